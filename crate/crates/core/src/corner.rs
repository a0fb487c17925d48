//! Erroneous boundary data at a fixed number of points next to the corners.

use serde::{Deserialize, Serialize};

use crate::sat::BoundaryKind;

/// Perturbs the west-side data at the first and last `sites_per_end` points.
/// Dirichlet data is scaled by `1 + ν` with `ν = c_p h^p`; Neumann data is
/// shifted by `ν = c_p h^{p−1}`. Either way the local truncation error at the
/// perturbed points is `O(h^{p−2})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerPerturbation {
    pub kind: BoundaryKind,
    pub order: usize,
    pub c_p: f64,
    pub sites_per_end: usize,
}

impl CornerPerturbation {
    pub const DEFAULT_SITES: usize = 5;

    pub fn new(kind: BoundaryKind, order: usize, c_p: f64) -> Self {
        Self { kind, order, c_p, sites_per_end: Self::DEFAULT_SITES }
    }

    pub fn p(&self) -> i32 {
        (self.order / 2) as i32
    }

    pub fn nu(&self, h: f64) -> f64 {
        match self.kind {
            BoundaryKind::Dirichlet => self.c_p * h.powi(self.p()),
            BoundaryKind::Neumann => self.c_p * h.powi(self.p() - 1),
        }
    }

    /// Indices along the west line, `ny` points long.
    pub fn sites(&self, ny: usize) -> Vec<usize> {
        let k = self.sites_per_end.min(ny / 2);
        (0..k).chain(ny - k..ny).collect()
    }

    pub fn apply(&self, west: &mut [f64], h: f64) {
        let nu = self.nu(h);
        for i in self.sites(west.len()) {
            match self.kind {
                BoundaryKind::Dirichlet => west[i] *= 1.0 + nu,
                BoundaryKind::Neumann => west[i] += nu,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_sites_at_every_resolution() {
        let c = CornerPerturbation::new(BoundaryKind::Dirichlet, 4, 1.0);
        for n in [41, 81, 161, 321] {
            let s = c.sites(n);
            assert_eq!(s.len(), 10);
            assert_eq!(s[..5], [0, 1, 2, 3, 4]);
            assert_eq!(s[9], n - 1);
        }
    }

    #[test]
    fn amplitude_laws() {
        let d = CornerPerturbation::new(BoundaryKind::Dirichlet, 6, 2.0);
        assert!((d.nu(0.1) - 2e-3).abs() < 1e-15);
        let n = CornerPerturbation::new(BoundaryKind::Neumann, 2, 3.0);
        assert_eq!(n.nu(0.1), 3.0);
        let mut data = vec![1.0; 20];
        n.apply(&mut data, 0.1);
        assert_eq!(data.iter().filter(|&&v| v == 4.0).count(), 10);
    }

    #[test]
    fn zero_amplitude_is_identity() {
        let mut data: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let before = data.clone();
        CornerPerturbation::new(BoundaryKind::Dirichlet, 2, 0.0).apply(&mut data, 0.05);
        CornerPerturbation::new(BoundaryKind::Neumann, 4, 0.0).apply(&mut data, 0.05);
        assert_eq!(data, before);
    }
}
