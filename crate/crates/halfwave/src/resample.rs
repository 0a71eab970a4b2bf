//! Exact band-limited evaluation of a periodic field at an affine family of
//! points y_j = y0 + j*dy (chirp-z / Bluestein). This is what lets bubbles be
//! rendered at arbitrary (lambda, alpha) without interpolation error: the
//! trigonometric interpolant is evaluated exactly, in O((M+N) log) time.

use crate::field::SpectralField;
use num_complex::Complex64;
use std::f64::consts::PI;

/// (j^2 * r) mod 1 with the quadratic index computed exactly: r is split into
/// a 26-bit head (whose product with j^2 < 2^53 is exact) and a tail whose
/// contribution stays small, keeping phases accurate for indices ~10^6.
fn mod1_quadratic(j: i64, r: f64) -> f64 {
    let j2 = (j * j) as f64; // exact: |j| < 2^26 in practice
    let scale = (1u64 << 26) as f64;
    let r_hi = (r * scale).round() / scale;
    let r_lo = r - r_hi;
    let a = (j2 * r_hi).rem_euclid(1.0);
    let b = (j2 * r_lo).rem_euclid(1.0);
    (a + b).rem_euclid(1.0)
}

fn chirp(j: i64, r: f64) -> Complex64 {
    // exp(i * pi * j^2 * 2r) with 2r cycles per unit j^2... we store r so the
    // phase is 2*pi * (j^2 * r)
    let ph = 2.0 * PI * mod1_quadratic(j, r);
    Complex64::new(ph.cos(), ph.sin())
}

/// Evaluate the trig interpolant of `f` at y_j = y0 + j*dy for j = 0..m_out.
/// The interpolant is L-periodic in y; the Nyquist coefficient is split
/// symmetrically between +/- n/2 so real data stays real.
pub fn eval_trig_interpolant(f: &SpectralField, y0: f64, dy: f64, m_out: usize) -> Vec<Complex64> {
    let g = f.grid();
    let n = g.n();
    let l = g.length();
    let spec = f.spectrum();
    let inv_n = 1.0 / n as f64;

    // coefficients a_m for modes m = -n/2 .. n/2 (inclusive; ends half-weight),
    // corrected for the grid offset x_0 = -L/2 (factor (-1)^m) and carrying
    // the e^{i xi_m y0} start phase.
    let p = n + 1;
    let mut a: Vec<Complex64> = Vec::with_capacity(p);
    for idx in 0..p {
        let m = idx as i64 - (n as i64) / 2;
        let k = ((m % n as i64 + n as i64) % n as i64) as usize;
        let mut c = spec[k] * inv_n;
        if m.unsigned_abs() as usize == n / 2 {
            c *= 0.5;
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        // start phase in the shifted index p = m + n/2 (the -n/2 part rides
        // in the outer per-point factor)
        let phase = 2.0 * PI * idx as f64 * y0 / l;
        a.push(c * sign * Complex64::new(phase.cos(), phase.sin()));
    }

    // X_j = sum_p a_p w^{j p} with w = exp(2 pi i dy / L), shifted so the
    // outer phase carries mode -n/2; Bluestein: jp = (j^2 + p^2 - (j-p)^2)/2.
    let r = 0.5 * dy / l; // w^{j^2/2} = exp(2 pi i j^2 r)
    let conv_len = (m_out + p).next_power_of_two();
    let mut u = vec![Complex64::new(0.0, 0.0); conv_len];
    for (idx, &ap) in a.iter().enumerate() {
        u[idx] = ap * chirp(idx as i64, r);
    }
    let mut v = vec![Complex64::new(0.0, 0.0); conv_len];
    for j in 0..m_out {
        v[j] = chirp(j as i64, -r);
    }
    for q in 1..p {
        v[conv_len - q] = chirp(q as i64, -r);
    }
    crate::fft::forward(&mut u);
    crate::fft::forward(&mut v);
    for (uu, vv) in u.iter_mut().zip(v.iter()) {
        *uu *= vv;
    }
    crate::fft::inverse_norm(&mut u);

    let mut out = Vec::with_capacity(m_out);
    for j in 0..m_out {
        let y = y0 + j as f64 * dy;
        // outer phases: w^{j^2/2} from Bluestein and the mode shift -n/2
        let shift = -(n as f64) / 2.0 * 2.0 * PI * y / l;
        let outer = chirp(j as i64, r) * Complex64::new(shift.cos(), shift.sin());
        out.push(u[j] * outer);
    }
    out
}
