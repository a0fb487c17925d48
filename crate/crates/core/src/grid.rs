use crate::error::{Error, Result};

/// Equidistant grid `x_i = i h`, `i = 0..n` (zero based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    n: usize,
    h: f64,
}

impl Grid1D {
    pub fn new(n: usize, h: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::GridTooSmall { order: 0, n, min: 2 });
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::GridMismatch(format!("spacing must be positive, got {h}")));
        }
        Ok(Self { n, h })
    }

    /// Grid spanning `[0, 1]` with `h = 1/(n-1)`.
    pub fn unit_interval(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::GridTooSmall { order: 0, n, min: 2 });
        }
        Self::new(n, 1.0 / (n - 1) as f64)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn length(&self) -> f64 {
        (self.n - 1) as f64 * self.h
    }
}
