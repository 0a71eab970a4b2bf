//! Uniform periodic grid on a centered torus [-L/2, L/2).

use crate::error::{HalfwaveError, Result};
use serde::{Deserialize, Serialize};

/// Uniform grid with `n_points` nodes x_j = -L/2 + j*h, h = L/n.
///
/// The torus stands in for the real line; everything downstream assumes the
/// fields of interest decay well before |x| reaches L/2. Wavenumbers are
/// xi_m = 2*pi*m/L with signed index m in [-n/2, n/2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    n_points: usize,
    length: f64,
}

impl Grid1D {
    pub fn new(n_points: usize, length: f64) -> Result<Self> {
        if n_points < 16 || !n_points.is_power_of_two() {
            return Err(HalfwaveError::InvalidInput(format!(
                "n_points must be a power of two >= 16, got {n_points}"
            )));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(HalfwaveError::InvalidInput(format!(
                "length must be positive and finite, got {length}"
            )));
        }
        Ok(Self { n_points, length })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n_points
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.length / self.n_points as f64
    }

    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.node(j)).collect()
    }

    /// Signed integer mode index for FFT bin k: k for k < n/2, k - n otherwise.
    #[inline]
    pub fn mode_index(&self, k: usize) -> i64 {
        let n = self.n_points as i64;
        let k = k as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    /// Wavenumber xi_m = 2*pi*m/L for FFT bin k (m signed, Nyquist at -n/2).
    #[inline]
    pub fn wavenumber(&self, k: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.mode_index(k) as f64 / self.length
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.wavenumber(k)).collect()
    }

    /// Largest represented wavenumber magnitude, pi*n/L.
    #[inline]
    pub fn max_wavenumber(&self) -> f64 {
        std::f64::consts::PI * self.n_points as f64 / self.length
    }

    /// Index of the node whose value is x, if x lies on the grid.
    pub fn node_index(&self, x: f64) -> Result<usize> {
        let h = self.spacing();
        let fj = (x + 0.5 * self.length) / h;
        let j = fj.round();
        if (fj - j).abs() > 1e-6 || j < 0.0 || j >= self.n_points as f64 {
            return Err(HalfwaveError::InvalidInput(format!(
                "x = {x} is not a grid node"
            )));
        }
        Ok(j as usize)
    }

    /// Wrap a displacement into the principal window [-L/2, L/2).
    #[inline]
    pub fn wrap(&self, dx: f64) -> f64 {
        let l = self.length;
        let mut d = dx % l;
        if d < -0.5 * l {
            d += l;
        } else if d >= 0.5 * l {
            d -= l;
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid1D::new(12, 10.0).is_err());
        assert!(Grid1D::new(100, 10.0).is_err());
        assert!(Grid1D::new(64, -1.0).is_err());
        assert!(Grid1D::new(64, 10.0).is_ok());
    }

    #[test]
    fn nodes_are_centered_and_uniform() {
        let g = Grid1D::new(64, 16.0).unwrap();
        let x = g.nodes();
        assert_eq!(x.len(), 64);
        assert_eq!(x[0], -8.0);
        assert_eq!(x[32], 0.0);
        let h = g.spacing();
        for w in x.windows(2) {
            assert!((w[1] - w[0] - h).abs() < 1e-14);
        }
    }

    #[test]
    fn wavenumber_layout() {
        let g = Grid1D::new(16, 2.0 * std::f64::consts::PI).unwrap();
        assert_eq!(g.wavenumber(0), 0.0);
        assert!((g.wavenumber(1) - 1.0).abs() < 1e-15);
        assert!((g.wavenumber(8) + 8.0).abs() < 1e-15); // Nyquist signed negative
        assert!((g.wavenumber(15) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn node_index_roundtrip() {
        let g = Grid1D::new(64, 20.0).unwrap();
        for j in [0usize, 1, 31, 32, 63] {
            assert_eq!(g.node_index(g.node(j)).unwrap(), j);
        }
        assert!(g.node_index(0.1234).is_err());
    }

    #[test]
    fn wrap_displacement() {
        let g = Grid1D::new(64, 20.0).unwrap();
        assert!((g.wrap(11.0) - (-9.0)).abs() < 1e-12);
        assert!((g.wrap(-10.5) - 9.5).abs() < 1e-12);
        assert_eq!(g.wrap(3.0), 3.0);
    }
}
