use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `b2 + w2 · relu(W1 x + b1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpRepr")]
pub struct Mlp {
    input: usize,
    hidden: usize,
    /// Row-major `hidden × input`.
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

#[derive(Deserialize)]
struct MlpRepr {
    input: usize,
    hidden: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

impl TryFrom<MlpRepr> for Mlp {
    type Error = Error;

    fn try_from(r: MlpRepr) -> Result<Self> {
        if r.b1.len() != r.hidden {
            return Err(Error::InvalidSpec(format!("{} hidden biases for {} hidden units", r.b1.len(), r.hidden)));
        }
        Mlp::from_parts(r.input, r.w1, r.b1, r.w2, r.b2)
    }
}

impl Mlp {
    pub fn from_parts(input: usize, w1: Vec<f64>, b1: Vec<f64>, w2: Vec<f64>, b2: f64) -> Result<Self> {
        let hidden = b1.len();
        if w1.len() != hidden * input || w2.len() != hidden {
            return Err(Error::InvalidSpec(format!(
                "weights do not form a {input} → {hidden} → 1 network"
            )));
        }
        if w1.iter().chain(&b1).chain(&w2).chain(std::iter::once(&b2)).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite network parameter".into()));
        }
        Ok(Self { input, hidden, w1, b1, w2, b2 })
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input,
            hidden,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    /// Each layer's weights and biases uniform on `±1/√fan_in`.
    pub fn random<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut uniform = |fan_in: usize, n: usize| -> Vec<f64> {
            let bound = 1.0 / (fan_in as f64).sqrt();
            (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
        };
        let w1 = uniform(input, hidden * input);
        let b1 = uniform(input, hidden);
        let w2 = uniform(hidden, hidden);
        let b2 = uniform(hidden, 1)[0];
        Self { input, hidden, w1, b1, w2, b2 }
    }

    /// Replace the output `f(x)` by `scale · f(x) + offset`.
    pub fn rescale_output(&mut self, scale: f64, offset: f64) {
        self.w2.iter_mut().for_each(|w| *w *= scale);
        self.b2 = self.b2 * scale + offset;
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input {
            return Err(Error::InvalidInput(format!(
                "network expects {} features, got {}",
                self.input,
                x.len()
            )));
        }
        Ok(self.eval(x))
    }

    /// Unchecked forward pass; `x.len()` must equal the input width.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.input);
        let mut out = self.b2;
        for (h, row) in self.w1.chunks_exact(self.input.max(1)).enumerate().take(self.hidden) {
            let pre = self.b1[h] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            if pre > 0.0 {
                out += self.w2[h] * pre;
            }
        }
        out
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input, self.hidden)
    }

    /// Adds `upstream · ∂f(x)/∂θ` into `grad`.
    pub fn accumulate_gradient(&self, x: &[f64], upstream: f64, grad: &mut Mlp) {
        grad.b2 += upstream;
        for h in 0..self.hidden {
            let row = &self.w1[h * self.input..(h + 1) * self.input];
            let pre = self.b1[h] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            if pre <= 0.0 {
                continue;
            }
            grad.w2[h] += upstream * pre;
            let back = upstream * self.w2[h];
            grad.b1[h] += back;
            for (g, v) in grad.w1[h * self.input..(h + 1) * self.input].iter_mut().zip(x) {
                *g += back * v;
            }
        }
    }

    /// `θ += step · other`.
    pub fn apply(&mut self, other: &Mlp, step: f64) {
        for (p, g) in self.params_mut().zip(other.params()) {
            *p += step * g;
        }
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    /// Flat parameter view: `w1`, `b1`, `w2`, `b2`.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(std::iter::once(&self.b2))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(std::iter::once(&mut self.b2))
    }

    pub fn param(&self, i: usize) -> f64 {
        *self.params().nth(i).expect("parameter index in range")
    }

    pub fn set_param(&mut self, i: usize, v: f64) {
        *self.params_mut().nth(i).expect("parameter index in range") = v;
    }

    pub fn first_layer(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.hidden, self.input, &self.w1)
    }

    pub fn output_layer(&self) -> &[f64] {
        &self.w2
    }
}
