use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One categorical context variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    pub levels: Vec<String>,
}

/// Finite product of categorical factors. Contexts are addressed by a dense
/// mixed-radix index in `[0, size)`, with the first factor most significant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ContextSpaceRepr", into = "ContextSpaceRepr")]
pub struct ContextSpace {
    factors: Vec<Factor>,
    size: usize,
}

#[derive(Serialize, Deserialize)]
struct ContextSpaceRepr {
    factors: Vec<Factor>,
}

impl TryFrom<ContextSpaceRepr> for ContextSpace {
    type Error = Error;

    fn try_from(repr: ContextSpaceRepr) -> Result<Self> {
        ContextSpace::new(repr.factors)
    }
}

impl From<ContextSpace> for ContextSpaceRepr {
    fn from(space: ContextSpace) -> Self {
        ContextSpaceRepr {
            factors: space.factors,
        }
    }
}

impl ContextSpace {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        for (i, f) in factors.iter().enumerate() {
            if f.levels.is_empty() {
                return Err(Error::InvalidSpec(format!(
                    "factor '{}' has no levels",
                    f.name
                )));
            }
            if factors[..i].iter().any(|g| g.name == f.name) {
                return Err(Error::InvalidSpec(format!(
                    "duplicate factor name '{}'",
                    f.name
                )));
            }
        }
        let size = factors.iter().map(|f| f.levels.len()).product();
        Ok(Self { factors, size })
    }

    /// Single factor with `n` anonymous levels.
    pub fn flat(n: usize) -> Result<Self> {
        Self::new(vec![Factor {
            name: "context".into(),
            levels: (0..n).map(|i| i.to_string()).collect(),
        }])
    }

    /// Previous-day step band (4 levels) × current location (3 levels).
    pub fn steps_and_location() -> Self {
        let factor = |name: &str, levels: &[&str]| Factor {
            name: name.into(),
            levels: levels.iter().map(|s| s.to_string()).collect(),
        };
        Self::new(vec![
            factor(
                "stepsprevday",
                &["0-4,999", "5,000-9,999", "10,000-15,000", "more than 15,000"],
            ),
            factor("currloc", &["home", "work", "other"]),
        ])
        .expect("static context space is valid")
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Total number of levels over all factors (width of a per-factor one-hot).
    pub fn one_hot_width(&self) -> usize {
        self.factors.iter().map(|f| f.levels.len()).sum()
    }

    pub fn encode(&self, level_indices: &[usize]) -> Result<Context> {
        if level_indices.len() != self.factors.len() {
            return Err(Error::InvalidContext(format!(
                "expected {} level indices, got {}",
                self.factors.len(),
                level_indices.len()
            )));
        }
        let mut index = 0;
        for (f, &l) in self.factors.iter().zip(level_indices) {
            if l >= f.levels.len() {
                return Err(Error::InvalidContext(format!(
                    "level {l} out of range for factor '{}' ({} levels)",
                    f.name,
                    f.levels.len()
                )));
            }
            index = index * f.levels.len() + l;
        }
        Ok(Context {
            index,
            levels: level_indices.to_vec(),
        })
    }

    pub fn decode(&self, index: usize) -> Result<Context> {
        if index >= self.size {
            return Err(Error::InvalidContext(format!(
                "index {index} out of range for {} contexts",
                self.size
            )));
        }
        let mut levels = vec![0; self.factors.len()];
        let mut rest = index;
        for (slot, f) in levels.iter_mut().zip(&self.factors).rev() {
            *slot = rest % f.levels.len();
            rest /= f.levels.len();
        }
        Ok(Context { index, levels })
    }

    pub fn contexts(&self) -> impl Iterator<Item = Context> + '_ {
        (0..self.size).map(|i| self.decode(i).expect("index in range"))
    }

    /// Per-factor one-hot encoding written into `out`.
    pub fn write_one_hot(&self, context: &Context, out: &mut [f64]) {
        out.fill(0.0);
        let mut offset = 0;
        for (f, &l) in self.factors.iter().zip(&context.levels) {
            out[offset + l] = 1.0;
            offset += f.levels.len();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Context {
    pub index: usize,
    pub levels: Vec<usize>,
}
