use serde::Serialize;

use crate::error::{Error, Result};

/// Weight parameters of the walk: `p, q >= 1` and `alpha` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Parameters {
    p: f64,
    q: f64,
    alpha: f64,
}

impl Parameters {
    pub fn new(p: f64, q: f64, alpha: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::InvalidParameters(format!("p must be >= 1, got {p}")));
        }
        if !(q.is_finite() && q >= 1.0) {
            return Err(Error::InvalidParameters(format!("q must be >= 1, got {q}")));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameters(format!(
                "alpha must lie in [0, 1], got {alpha}"
            )));
        }
        Ok(Self { p, q, alpha })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Same `p` and `q`, different `alpha`.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.p, self.q, alpha)
    }

    /// Weights of the three step kinds, indexed by step digit.
    pub fn step_weights(&self) -> [f64; 3] {
        [
            1.0 / (self.p * self.q),
            self.alpha * self.p * self.p,
            self.q / self.p,
        ]
    }
}
