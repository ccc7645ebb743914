//! Small dense linear-algebra helpers over `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Diagonal jitter added once when a Cholesky factorisation fails.
pub const JITTER: f64 = 1e-10;

/// Cholesky factorisation; on failure retries once with `JITTER·I` added.
pub fn cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c);
    }
    let n = m.nrows();
    Cholesky::new(m + DMatrix::identity(n, n) * JITTER).ok_or_else(|| {
        Error::Numerical(format!("matrix of order {n} is not positive definite"))
    })
}

/// `(m + mᵀ)/2`, in place.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn standard_normal_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Draw from `N(mean, L Lᵀ)` given the lower Cholesky factor `L`.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    lower: &DMatrix<f64>,
    rng: &mut R,
) -> DVector<f64> {
    mean + lower * standard_normal_vector(mean.len(), rng)
}

/// Lowest index among maximal entries.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Upper bound on the spectral norm (the Frobenius norm).
pub fn spectral_norm_bound(m: &DMatrix<f64>) -> f64 {
    m.norm()
}
