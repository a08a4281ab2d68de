use super::ModelError;

/// Uniform partition of the mass coordinate `η ∈ [0, 1]` into `n` intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassGrid {
    n: usize,
    h: f64,
}

impl MassGrid {
    pub fn new(n: usize) -> Result<Self, ModelError> {
        if n < 2 {
            return Err(ModelError::GridTooCoarse(n));
        }
        Ok(Self { n, h: 1.0 / n as f64 })
    }

    /// Number of intervals; nodes are indexed `0..=n`.
    pub fn intervals(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> usize {
        self.n + 1
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn eta(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }
}
