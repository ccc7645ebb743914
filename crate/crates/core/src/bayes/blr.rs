use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::{Error, Result};

/// Gaussian posterior over regression coefficients with known noise
/// variance. Coefficient 0 is the intercept; design rows are `(1, z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlrPosterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub noise_var: f64,
}

impl BlrPosterior {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>, noise_var: f64) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::InvalidSpec("covariance shape does not match mean".into()));
        }
        if !(noise_var > 0.0) {
            return Err(Error::InvalidSpec(format!("noise variance {noise_var} must be positive")));
        }
        linalg::cholesky(&cov)?;
        Ok(Self { mean, cov, noise_var })
    }

    /// Prior `N((intercept, 0, …, 0), diag(intercept_var, slope_var, …))`
    /// over `d + 1` coefficients.
    pub fn isotropic_prior(
        d: usize,
        intercept: f64,
        intercept_var: f64,
        slope_var: f64,
        noise_sd: f64,
    ) -> Result<Self> {
        let mut mean = DVector::zeros(d + 1);
        mean[0] = intercept;
        let mut diag = DVector::from_element(d + 1, slope_var);
        diag[0] = intercept_var;
        Self::new(mean, DMatrix::from_diagonal(&diag), noise_sd * noise_sd)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Rank-one update with design row `phi` and response `y`.
    ///
    /// `B' = B − BφφᵀB / (σ² + φᵀBφ)`, `μ' = μ + Bφ (y − φᵀμ) / (σ² + φᵀBφ)`.
    pub fn observe(&mut self, phi: &[f64], y: f64) -> Result<()> {
        if phi.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "design row has length {}, expected {}",
                phi.len(),
                self.dim()
            )));
        }
        let phi = DVector::from_column_slice(phi);
        let b_phi = &self.cov * &phi;
        let denom = self.noise_var + phi.dot(&b_phi);
        if !(denom > 0.0) || !denom.is_finite() {
            return Err(Error::Numerical(format!("innovation variance {denom}")));
        }
        let residual = y - phi.dot(&self.mean);
        self.mean.axpy(residual / denom, &b_phi, 1.0);
        self.cov.ger(-1.0 / denom, &b_phi, &b_phi, 1.0);
        linalg::symmetrize(&mut self.cov);
        // Check only; `sample` refactors. Jitter is applied to the factor, never stored.
        linalg::cholesky(&self.cov)?;
        Ok(())
    }

    /// Design row `(1, z)`.
    pub fn design_row(z: &[f64]) -> Vec<f64> {
        std::iter::once(1.0).chain(z.iter().copied()).collect()
    }

    pub fn update(&self, rows: &[(Vec<f64>, f64)]) -> Result<Self> {
        let mut next = self.clone();
        for (phi, y) in rows {
            next.observe(phi, *y)?;
        }
        Ok(next)
    }

    /// Draw `θ ~ N(mean, cov)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        let chol = linalg::cholesky(&self.cov)?;
        Ok(linalg::sample_mvn(&self.mean, &chol.l(), rng))
    }
}
