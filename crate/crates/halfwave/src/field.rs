//! Complex-valued fields on a periodic grid with a lazily cached spectrum.

use crate::error::{HalfwaveError, Result};
use crate::fft;
use crate::grid::Grid1D;
use num_complex::Complex64;
use std::sync::OnceLock;

/// Samples of a complex function on a [`Grid1D`] plus a cached forward DFT.
///
/// Values are immutable once constructed; the spectrum is computed at most
/// once (`OnceLock`), so sharing a field across threads is safe and the cache
/// fill is race-free. Spectrum convention: `spectrum[k] = sum_j values[j]
/// exp(-2*pi*i*j*k/n)` (unnormalized forward DFT over the node index j).
#[derive(Debug)]
pub struct SpectralField {
    grid: Grid1D,
    values: Vec<Complex64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl Clone for SpectralField {
    fn clone(&self) -> Self {
        let f = SpectralField {
            grid: self.grid.clone(),
            values: self.values.clone(),
            spectrum: OnceLock::new(),
        };
        if let Some(s) = self.spectrum.get() {
            let _ = f.spectrum.set(s.clone());
        }
        f
    }
}

impl SpectralField {
    pub fn from_values(grid: Grid1D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(HalfwaveError::GridMismatch(format!(
                "{} values on a {}-point grid",
                values.len(),
                grid.n()
            )));
        }
        Ok(Self {
            grid,
            values,
            spectrum: OnceLock::new(),
        })
    }

    pub fn from_real(grid: Grid1D, values: &[f64]) -> Result<Self> {
        let v = values.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        Self::from_values(grid, v)
    }

    pub fn from_fn<F: FnMut(f64) -> Complex64>(grid: Grid1D, mut f: F) -> Self {
        let v = (0..grid.n()).map(|j| f(grid.node(j))).collect();
        Self {
            grid,
            values: v,
            spectrum: OnceLock::new(),
        }
    }

    pub fn zeros(grid: Grid1D) -> Self {
        let n = grid.n();
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); n],
            spectrum: OnceLock::new(),
        }
    }

    /// Build a field from unnormalized DFT coefficients (forward convention).
    pub fn from_spectrum(grid: Grid1D, spectrum: Vec<Complex64>) -> Result<Self> {
        if spectrum.len() != grid.n() {
            return Err(HalfwaveError::GridMismatch(format!(
                "{} coefficients on a {}-point grid",
                spectrum.len(),
                grid.n()
            )));
        }
        let n = grid.n();
        let mut vals = spectrum.clone();
        fft::inverse(&mut vals);
        let scale = 1.0 / n as f64;
        for v in &mut vals {
            *v *= scale;
        }
        let f = Self {
            grid,
            values: vals,
            spectrum: OnceLock::new(),
        };
        let _ = f.spectrum.set(spectrum);
        Ok(f)
    }

    #[inline]
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Forward DFT coefficients, computed once and cached.
    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| {
            let mut buf = self.values.clone();
            fft::forward(&mut buf);
            buf
        })
    }

    pub fn is_same_grid(&self, other: &SpectralField) -> bool {
        self.grid == other.grid
    }

    pub fn map<F: FnMut(Complex64) -> Complex64>(&self, mut f: F) -> SpectralField {
        let v = self.values.iter().map(|&z| f(z)).collect();
        SpectralField {
            grid: self.grid.clone(),
            values: v,
            spectrum: OnceLock::new(),
        }
    }

    pub fn zip_map<F: FnMut(Complex64, Complex64) -> Complex64>(
        &self,
        other: &SpectralField,
        mut f: F,
    ) -> Result<SpectralField> {
        if !self.is_same_grid(other) {
            return Err(HalfwaveError::GridMismatch(
                "zip_map over different grids".into(),
            ));
        }
        let v = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(SpectralField {
            grid: self.grid.clone(),
            values: v,
            spectrum: OnceLock::new(),
        })
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &SpectralField) -> Result<SpectralField> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: Complex64) -> SpectralField {
        self.map(|z| c * z)
    }

    pub fn conj(&self) -> SpectralField {
        self.map(|z| z.conj())
    }

    pub fn real_part(&self) -> SpectralField {
        self.map(|z| Complex64::new(z.re, 0.0))
    }

    pub fn imag_part(&self) -> SpectralField {
        self.map(|z| Complex64::new(z.im, 0.0))
    }

    pub fn abs_sq(&self) -> SpectralField {
        self.map(|z| Complex64::new(z.norm_sqr(), 0.0))
    }

    /// Multiply pointwise by a real weight given on the same grid.
    pub fn weight(&self, w: &[f64]) -> SpectralField {
        assert_eq!(w.len(), self.values.len());
        let v = self
            .values
            .iter()
            .zip(w.iter())
            .map(|(&z, &r)| z * r)
            .collect();
        SpectralField {
            grid: self.grid.clone(),
            values: v,
            spectrum: OnceLock::new(),
        }
    }

    /// Reflection x -> -x; on the node lattice j -> (n - j) mod n.
    pub fn reflect(&self) -> SpectralField {
        let n = self.values.len();
        let v = (0..n).map(|j| self.values[(n - j) % n]).collect();
        SpectralField {
            grid: self.grid.clone(),
            values: v,
            spectrum: OnceLock::new(),
        }
    }

    /// Even projection (f(x) + f(-x))/2.
    pub fn even_part(&self) -> SpectralField {
        let r = self.reflect();
        self.zip_map(&r, |a, b| 0.5 * (a + b)).expect("same grid")
    }

    /// Odd projection (f(x) - f(-x))/2.
    pub fn odd_part(&self) -> SpectralField {
        let r = self.reflect();
        self.zip_map(&r, |a, b| 0.5 * (a - b)).expect("same grid")
    }

    /// Cyclic roll by `s` nodes (positive s moves content toward larger x).
    pub fn roll(&self, s: i64) -> SpectralField {
        let n = self.values.len() as i64;
        let v = (0..n)
            .map(|j| self.values[(((j - s) % n + n) % n) as usize])
            .collect();
        SpectralField {
            grid: self.grid.clone(),
            values: v,
            spectrum: OnceLock::new(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn has_nan(&self) -> bool {
        self.values
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
    }

    /// Fraction of the L2 mass carried by |x| > frac * L/2.
    pub fn tail_mass_fraction(&self, frac: f64) -> f64 {
        let cut = frac * 0.5 * self.grid.length();
        let mut tail = 0.0;
        let mut total = 0.0;
        for (j, z) in self.values.iter().enumerate() {
            let m = z.norm_sqr();
            total += m;
            if self.grid.node(j).abs() > cut {
                tail += m;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    /// Fraction of spectral mass in the top band |m| >= band_frac * n/2.
    pub fn nyquist_band_fraction(&self, band_frac: f64) -> f64 {
        let spec = self.spectrum();
        let n = self.grid.n() as f64;
        let cut = band_frac * n / 2.0;
        let mut band = 0.0;
        let mut total = 0.0;
        for (k, c) in spec.iter().enumerate() {
            let m = self.grid.mode_index(k).unsigned_abs() as f64;
            let p = c.norm_sqr();
            total += p;
            if m >= cut {
                band += p;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            band / total
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> Grid1D {
        Grid1D::new(128, 20.0).unwrap()
    }

    #[test]
    fn roundtrip_values_spectrum_values() {
        let g = grid();
        let f = SpectralField::from_fn(g.clone(), |x| {
            Complex64::new((-x * x / 3.0).exp(), 0.3 * x.sin())
        });
        let spec = f.spectrum().to_vec();
        let back = SpectralField::from_spectrum(g, spec).unwrap();
        let num: f64 = f
            .values()
            .iter()
            .zip(back.values())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let den: f64 = f.values().iter().map(|a| a.norm_sqr()).sum();
        assert!((num / den).sqrt() < 1e-12);
    }

    #[test]
    fn parseval() {
        let g = grid();
        let f = SpectralField::from_fn(g.clone(), |x| Complex64::new((2.0 * x).cos(), x.sin()));
        let h = g.spacing();
        let phys: f64 = h * f.values().iter().map(|z| z.norm_sqr()).sum::<f64>();
        let spec: f64 = (g.length() / (g.n() as f64 * g.n() as f64))
            * f.spectrum().iter().map(|z| z.norm_sqr()).sum::<f64>();
        assert!(((phys - spec) / phys).abs() < 1e-10);
    }

    #[test]
    fn single_mode_spectrum() {
        let g = Grid1D::new(64, 2.0 * PI).unwrap();
        let f = SpectralField::from_fn(g, |x| (Complex64::i() * 3.0 * x).exp());
        let spec = f.spectrum();
        for (k, c) in spec.iter().enumerate() {
            let expect = if k == 3 { 64.0 } else { 0.0 };
            // grid starts at -pi so mode 3 carries phase (-1)^3; magnitude check only
            assert!(
                (c.norm() - expect).abs() < 1e-9,
                "bin {k} magnitude {}",
                c.norm()
            );
        }
    }

    #[test]
    fn reflection_and_parity() {
        let g = grid();
        let f = SpectralField::from_fn(g, |x| Complex64::new(x + x * x, 0.0));
        let e = f.even_part();
        let o = f.odd_part();
        for (j, (&ev, &ov)) in e.values().iter().zip(o.values()).enumerate() {
            // the j=0 node (x=-L/2) is its own mirror; both projections
            // see only the raw value there
            if j == 0 {
                assert!(ov.re.abs() < 1e-9);
                continue;
            }
            let x = f.grid().node(j);
            assert!((ev.re - x * x).abs() < 1e-9, "even at x={x}");
            assert!((ov.re - x).abs() < 1e-9, "odd at x={x}");
        }
    }

    #[test]
    fn roll_is_cyclic() {
        let g = grid();
        let f = SpectralField::from_fn(g, |x| Complex64::new(x, -x));
        let r = f.roll(5).roll(-5);
        for (a, b) in f.values().iter().zip(r.values()) {
            assert_eq!(a, b);
        }
    }
}
