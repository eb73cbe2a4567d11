use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One hidden unit: output weight `c` and input weights `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub c: f64,
    pub w: Vec<f64>,
}

impl ParticleState {
    pub fn new(c: f64, w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Empty("input weight vector"));
        }
        let p = Self { c, w };
        if !p.is_finite() {
            return Err(crate::error::config("particle has a non-finite component"));
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn is_finite(&self) -> bool {
        self.c.is_finite() && self.w.iter().all(|v| v.is_finite())
    }
}
