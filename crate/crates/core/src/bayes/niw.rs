use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::{Error, Result};

/// Normal–Inverse-Wishart posterior over the mean and covariance of a
/// `d`-dimensional Gaussian: `Σ ~ IW(scale, dof)`, `θ | Σ ~ N(mean, Σ/kappa)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NiwPosterior {
    pub mean: DVector<f64>,
    pub kappa: f64,
    pub scale: DMatrix<f64>,
    pub dof: f64,
}

/// One joint draw; `factor · factorᵀ = cov`.
#[derive(Debug, Clone)]
pub struct GaussianDraw {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub factor: DMatrix<f64>,
}

impl GaussianDraw {
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        linalg::sample_mvn(&self.mean, &self.factor, rng)
    }
}

impl NiwPosterior {
    pub fn new(mean: DVector<f64>, kappa: f64, scale: DMatrix<f64>, dof: f64) -> Result<Self> {
        let d = mean.len();
        if scale.nrows() != d || scale.ncols() != d {
            return Err(Error::InvalidSpec("scale shape does not match mean".into()));
        }
        if !(kappa > 0.0) {
            return Err(Error::InvalidSpec(format!("kappa {kappa} must be positive")));
        }
        if !(dof > d as f64 - 1.0) {
            return Err(Error::InvalidSpec(format!("dof {dof} must exceed d - 1 = {}", d as f64 - 1.0)));
        }
        linalg::cholesky(&scale)?;
        Ok(Self { mean, kappa, scale, dof })
    }

    /// Zero mean, `kappa = 1`, identity scale, `dof = d + 2`.
    pub fn default_prior(d: usize) -> Self {
        Self::new(DVector::zeros(d), 1.0, DMatrix::identity(d, d), d as f64 + 2.0)
            .expect("default prior is valid")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Batch update from the sample mean and centred scatter.
    pub fn update(&self, observations: &[Vec<f64>]) -> Self {
        if observations.is_empty() {
            return self.clone();
        }
        let d = self.dim();
        let n = observations.len() as f64;
        let mut zbar = DVector::zeros(d);
        for z in observations {
            zbar += DVector::from_column_slice(z);
        }
        zbar /= n;
        let mut scatter = DMatrix::zeros(d, d);
        for z in observations {
            let c = DVector::from_column_slice(z) - &zbar;
            scatter.ger(1.0, &c, &c, 1.0);
        }
        let kappa = self.kappa + n;
        let shift = &zbar - &self.mean;
        let mut scale = &self.scale + scatter;
        scale.ger(self.kappa * n / kappa, &shift, &shift, 1.0);
        linalg::symmetrize(&mut scale);
        Self {
            mean: (&self.mean * self.kappa + zbar * n) / kappa,
            kappa,
            scale,
            dof: self.dof + n,
        }
    }

    pub fn observe(&mut self, z: &[f64]) {
        let shift = DVector::from_column_slice(z) - &self.mean;
        let kappa = self.kappa + 1.0;
        self.scale.ger(self.kappa / kappa, &shift, &shift, 1.0);
        self.mean.axpy(1.0 / kappa, &shift, 1.0);
        self.kappa = kappa;
        self.dof += 1.0;
    }

    /// Joint draw via the Bartlett decomposition.
    ///
    /// With `scale = U Uᵀ` and Bartlett factor `A`, `Σ = (U A⁻ᵀ)(U A⁻ᵀ)ᵀ`
    /// is inverse-Wishart; the mean is then `N(mean, Σ/kappa)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GaussianDraw> {
        let d = self.dim();
        let root = linalg::cholesky(&self.scale)?.l();
        let mut bartlett = DMatrix::zeros(d, d);
        for i in 0..d {
            let chi = ChiSquared::new(self.dof - i as f64)
                .map_err(|e| Error::Numerical(format!("chi-square dof: {e}")))?;
            bartlett[(i, i)] = chi.sample(rng).sqrt();
            for j in 0..i {
                bartlett[(i, j)] = rng.sample(StandardNormal);
            }
        }
        let inv_t = bartlett
            .transpose()
            .solve_upper_triangular(&DMatrix::identity(d, d))
            .ok_or_else(|| Error::Numerical("singular Bartlett factor".into()))?;
        let factor = root * inv_t;
        let cov = &factor * factor.transpose();
        let eps = linalg::standard_normal_vector(d, rng);
        let mean = &self.mean + &factor * eps / self.kappa.sqrt();
        Ok(GaussianDraw { mean, cov, factor })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RngStream;

    /// Natural-statistic route: `Ψ' = Ψ + Σzzᵀ + κμμᵀ − κ'μ'μ'ᵀ`.
    fn oracle(p: &NiwPosterior, zs: &[Vec<f64>]) -> NiwPosterior {
        let n = zs.len() as f64;
        let kappa = p.kappa + n;
        let mut sum = DVector::zeros(p.dim());
        let mut outer = DMatrix::zeros(p.dim(), p.dim());
        for z in zs {
            let v = DVector::from_column_slice(z);
            outer += &v * v.transpose();
            sum += v;
        }
        let mean = (&p.mean * p.kappa + sum) / kappa;
        let scale = &p.scale + outer + &p.mean * p.mean.transpose() * p.kappa
            - &mean * mean.transpose() * kappa;
        NiwPosterior { mean, kappa, scale, dof: p.dof + n }
    }

    fn five_obs() -> Vec<Vec<f64>> {
        vec![
            vec![0.5, 1.0, -0.2],
            vec![1.5, -0.3, 0.0],
            vec![-0.7, 0.2, 0.9],
            vec![0.1, 0.1, 0.4],
            vec![2.2, -1.0, -0.6],
        ]
    }

    #[test]
    fn empty_update_is_identity() {
        let p = NiwPosterior::default_prior(3);
        assert_eq!(p.update(&[]), p);
    }

    #[test]
    fn five_observations_match_oracle() {
        let p = NiwPosterior::default_prior(3);
        let got = p.update(&five_obs());
        let want = oracle(&p, &five_obs());
        assert_eq!(got.kappa, 6.0);
        assert_eq!(got.dof, 10.0);
        assert!((got.mean - want.mean).amax() < 1e-12);
        assert!((got.scale - want.scale).amax() < 1e-12);
    }

    #[test]
    fn sequential_equals_batch() {
        let p = NiwPosterior::default_prior(3);
        let batch = p.update(&five_obs());
        let mut seq = p.clone();
        for z in five_obs() {
            seq.observe(&z);
        }
        assert!((batch.mean - seq.mean).amax() < 1e-12);
        assert!((batch.scale - seq.scale).amax() < 1e-12);
    }

    #[test]
    fn observations_at_prior_mean_keep_mean() {
        let p = NiwPosterior::new(DVector::from_vec(vec![1.0, -1.0]), 2.0, DMatrix::identity(2, 2), 4.0).unwrap();
        let q = p.update(&[vec![1.0, -1.0], vec![1.0, -1.0]]);
        assert_eq!(q.mean, p.mean);
    }

    #[test]
    fn improper_dof_rejected() {
        assert!(NiwPosterior::new(DVector::zeros(3), 1.0, DMatrix::identity(3, 3), 1.0).is_err());
    }

    #[test]
    fn inverse_wishart_mean() {
        let scale = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.3, 0.0, 0.3, 1.5]);
        let p = NiwPosterior::new(DVector::zeros(3), 1.0, scale.clone(), 9.0).unwrap();
        let mut rng = RngStream::new(21, 0);
        let n = 100_000;
        let mut acc = DMatrix::zeros(3, 3);
        for _ in 0..n {
            let draw = p.sample(&mut rng).unwrap();
            assert!(draw.cov.clone().cholesky().is_some());
            acc += draw.cov;
        }
        let emp = acc / n as f64;
        let analytic = scale / (9.0 - 3.0 - 1.0);
        assert!((emp - &analytic).norm() / analytic.norm() < 0.05);
    }

    #[test]
    fn huge_kappa_pins_mean() {
        let p = NiwPosterior::new(DVector::from_vec(vec![0.3, 0.7]), 1e12, DMatrix::identity(2, 2), 5.0).unwrap();
        let mut rng = RngStream::new(22, 0);
        for _ in 0..100 {
            assert!((p.sample(&mut rng).unwrap().mean - &p.mean).amax() < 1e-4);
        }
    }

    #[test]
    fn draws_always_positive_definite() {
        let p = NiwPosterior::default_prior(4);
        let mut rng = RngStream::new(23, 0);
        for _ in 0..100_000 {
            let draw = p.sample(&mut rng).unwrap();
            assert!(draw.cov.cholesky().is_some());
        }
    }

    #[test]
    fn consistency_on_long_stream() {
        let truth = DVector::from_vec(vec![1.0, -0.5]);
        let mut p = NiwPosterior::default_prior(2);
        let mut rng = RngStream::new(24, 0);
        for _ in 0..10_000 {
            let z = &truth + linalg::standard_normal_vector(2, &mut rng) * 0.7;
            p.observe(z.as_slice());
        }
        // Posterior sd of θ_i is about sqrt(E[Σ_ii]/kappa).
        for i in 0..2 {
            let sd = (p.scale[(i, i)] / (p.dof - 3.0) / p.kappa).sqrt();
            assert!((p.mean[i] - truth[i]).abs() < 4.0 * sd);
        }
    }
}
