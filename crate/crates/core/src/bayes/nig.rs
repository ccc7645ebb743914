use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

/// Normal–Inverse-Gamma posterior over `(μ, σ²)` of a Gaussian:
/// `σ² ~ IG(alpha, beta)`, `μ | σ² ~ N(m, σ²/kappa)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NigPosterior {
    pub m: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl NigPosterior {
    pub fn new(m: f64, kappa: f64, alpha: f64, beta: f64) -> Self {
        assert!(kappa > 0.0 && alpha > 0.0 && beta > 0.0, "NIG parameters must be positive");
        Self { m, kappa, alpha, beta }
    }

    /// Batch conjugate update.
    pub fn update(&self, observations: &[f64]) -> Self {
        if observations.is_empty() {
            return self.clone();
        }
        let n = observations.len() as f64;
        let mean = observations.iter().sum::<f64>() / n;
        let scatter: f64 = observations.iter().map(|x| (x - mean).powi(2)).sum();
        let kappa = self.kappa + n;
        let shift = mean - self.m;
        Self {
            m: self.m + n * shift / kappa,
            kappa,
            alpha: self.alpha + 0.5 * n,
            beta: self.beta + 0.5 * scatter + 0.5 * self.kappa * n * shift * shift / kappa,
        }
    }

    pub fn observe(&mut self, x: f64) {
        let kappa = self.kappa + 1.0;
        let shift = x - self.m;
        self.beta += 0.5 * self.kappa * shift * shift / kappa;
        self.m += shift / kappa;
        self.alpha += 0.5;
        self.kappa = kappa;
    }

    /// Joint draw `(μ, σ²)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let precision = Gamma::new(self.alpha, 1.0 / self.beta)
            .expect("valid gamma parameters")
            .sample(rng);
        let sigma2 = 1.0 / precision;
        let z: f64 = rng.sample(StandardNormal);
        (self.m + z * (sigma2 / self.kappa).sqrt(), sigma2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RngStream;

    /// Natural-parameter route: accumulate Σx and Σx², then read off the
    /// posterior. Independent of the centred update used by the module.
    fn oracle(p: &NigPosterior, xs: &[f64]) -> NigPosterior {
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let kappa = p.kappa + n;
        let m = (p.kappa * p.m + sx) / kappa;
        let beta = p.beta + 0.5 * (sxx + p.kappa * p.m * p.m - kappa * m * m);
        NigPosterior { m, kappa, alpha: p.alpha + n / 2.0, beta }
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn empty_update_is_identity() {
        let p = NigPosterior::new(77.0, 1.0, 1.0, 10.0);
        assert_eq!(p.update(&[]), p);
    }

    #[test]
    fn matches_formula_oracle() {
        let p = NigPosterior::new(77.0, 1.0, 1.0, 10.0);
        let got = p.update(&[70.0, 80.0, 90.0]);
        let want = oracle(&p, &[70.0, 80.0, 90.0]);
        // By hand: kappa 4, m = (77+240)/4 = 79.25, alpha 2.5,
        // beta = 10 + 200/2 + (1·3·3²)/(2·4) = 113.375.
        assert_eq!(got.kappa, 4.0);
        assert!(close(got.m, 79.25, 1e-12));
        assert_eq!(got.alpha, 2.5);
        assert!(close(got.beta, 113.375, 1e-12));
        for (a, b) in [(got.m, want.m), (got.beta, want.beta)] {
            assert!(close(a, b, 1e-12));
        }
    }

    #[test]
    fn observation_at_mean_keeps_location() {
        let p = NigPosterior::new(77.0, 1.0, 1.0, 10.0);
        let q = p.update(&[77.0]);
        assert_eq!(q.m, 77.0);
        assert_eq!(q.beta, 10.0);
    }

    #[test]
    fn sequential_equals_batch() {
        let p = NigPosterior::new(3.0, 0.5, 2.0, 1.5);
        let xs = [1.2, -0.4, 7.7, 3.3, 3.0, 2.1];
        let batch = p.update(&xs);
        let mut seq = p.clone();
        xs.iter().for_each(|&x| seq.observe(x));
        assert!(close(batch.m, seq.m, 1e-12));
        assert!(close(batch.beta, seq.beta, 1e-12));
        assert_eq!(batch.kappa, seq.kappa);
        assert_eq!(batch.alpha, seq.alpha);
    }

    #[test]
    fn sample_moments() {
        let p = NigPosterior::new(5.0, 2.0, 6.0, 10.0);
        let mut rng = RngStream::new(1, 1);
        let n = 100_000;
        let draws: Vec<(f64, f64)> = (0..n).map(|_| p.sample(&mut rng)).collect();
        let mean_mu = draws.iter().map(|d| d.0).sum::<f64>() / n as f64;
        let sd_mu = (draws.iter().map(|d| (d.0 - mean_mu).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((mean_mu - p.m).abs() < 4.0 * sd_mu / (n as f64).sqrt());

        let mean_s2 = draws.iter().map(|d| d.1).sum::<f64>() / n as f64;
        let sd_s2 = (draws.iter().map(|d| (d.1 - mean_s2).powi(2)).sum::<f64>() / n as f64).sqrt();
        let analytic = p.beta / (p.alpha - 1.0);
        assert!((mean_s2 - analytic).abs() < 4.0 * sd_s2 / (n as f64).sqrt());
    }

    #[test]
    fn huge_kappa_concentrates_location() {
        let p = NigPosterior::new(-2.5, 1e12, 3.0, 2.0);
        let mut rng = RngStream::new(2, 1);
        for _ in 0..1000 {
            assert!((p.sample(&mut rng).0 - p.m).abs() < 1e-4);
        }
    }

    #[test]
    fn consistency_on_long_stream() {
        use rand_distr::Normal;
        let truth = (12.0, 2.0);
        let mut rng = RngStream::new(3, 1);
        let xs: Vec<f64> = Normal::new(truth.0, truth.1)
            .unwrap()
            .sample_iter(&mut rng)
            .take(10_000)
            .collect();
        let p = NigPosterior::new(77.0, 1.0, 1.0, 10.0).update(&xs);
        // Marginal posterior sd of μ is about sqrt(E[σ²]/kappa).
        let sd = (p.beta / (p.alpha - 1.0) / p.kappa).sqrt();
        assert!((p.m - truth.0).abs() < 4.0 * sd);
    }
}
