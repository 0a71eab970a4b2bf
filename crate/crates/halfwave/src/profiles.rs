//! Modified profiles Q_k(b, v), their self-similar-equation residual Psi,
//! rendered bubbles U_k, multi-bubble superpositions, boundary-time initial
//! data, and the localization partition of unity.

use crate::error::{HalfwaveError, Result};
use crate::field::SpectralField;
use crate::ground_state::GroundState;
use crate::grid::Grid1D;
use crate::linearized::ProfileSet;
use crate::resample::eval_trig_interpolant;
use crate::spectral::{derivative, fractional_laplacian, l2_norm};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Per-bubble modulation tuple (scale, scale velocity, translation velocity,
/// center, phase).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams {
    pub lambda: f64,
    pub b: f64,
    pub v: f64,
    pub alpha: f64,
    pub gamma: f64,
}

/// |b|, |v| ceiling below which the profile expansion is trusted.
pub const SMALLNESS_CEILING: f64 = 0.5;

impl BubbleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(HalfwaveError::InvalidInput(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.b.abs() > SMALLNESS_CEILING || self.v.abs() > SMALLNESS_CEILING {
            return Err(HalfwaveError::InvalidInput(format!(
                "(b, v) = ({}, {}) outside the smallness ceiling {}",
                self.b, self.v, SMALLNESS_CEILING
            )));
        }
        Ok(())
    }
}

/// Q_k = Q + i b S1 + i v G1 + b v G2 + b^2 S2 + b^3 S3 on the reference grid.
pub fn modified_profile(gs: &GroundState, ps: &ProfileSet, b: f64, v: f64) -> Result<SpectralField> {
    if b.abs() > SMALLNESS_CEILING || v.abs() > SMALLNESS_CEILING {
        return Err(HalfwaveError::InvalidInput(format!(
            "(b, v) = ({b}, {v}) outside the smallness ceiling"
        )));
    }
    let mut out = gs.q.clone();
    out = out.add(&ps.s1.scale(Complex64::new(0.0, b)))?;
    out = out.add(&ps.g1.scale(Complex64::new(0.0, v)))?;
    out = out.add(&ps.g2.scale(Complex64::new(b * v, 0.0)))?;
    out = out.add(&ps.s2.scale(Complex64::new(b * b, 0.0)))?;
    out = out.add(&ps.s3.scale(Complex64::new(b * b * b, 0.0)))?;
    Ok(out)
}

/// d(Q_k)/db = i S1 + v G2 + 2b S2 + 3b^2 S3.
pub fn profile_db(ps: &ProfileSet, b: f64, v: f64) -> SpectralField {
    ps.s1
        .scale(Complex64::new(0.0, 1.0))
        .add(&ps.g2.scale(Complex64::new(v, 0.0)))
        .unwrap()
        .add(&ps.s2.scale(Complex64::new(2.0 * b, 0.0)))
        .unwrap()
        .add(&ps.s3.scale(Complex64::new(3.0 * b * b, 0.0)))
        .unwrap()
}

/// d(Q_k)/dv = i G1 + b G2.
pub fn profile_dv(ps: &ProfileSet, b: f64) -> SpectralField {
    ps.g1
        .scale(Complex64::new(0.0, 1.0))
        .add(&ps.g2.scale(Complex64::new(b, 0.0)))
        .unwrap()
}

/// Residual Psi of Q_k in the self-similar profile equation:
/// Psi = (i/2) b^2 dQ/db + i b v dQ/dv - i b Lambda Q_k + i v Q_k'
///       + D Q_k + Q_k - |Q_k|^2 Q_k.
/// Returns the field, its L2 norm, and sup <x>^2 |Psi|.
pub fn profile_residual(
    gs: &GroundState,
    ps: &ProfileSet,
    b: f64,
    v: f64,
) -> Result<(SpectralField, f64, f64)> {
    let qk = modified_profile(gs, ps, b, v)?;
    let dqb = profile_db(ps, b, v);
    let dqv = profile_dv(ps, b);
    let lam_qk = ps.lambda_op(&qk);
    let dqk = derivative(&qk);
    let i = Complex64::i();

    let mut psi = dqb.scale(0.5 * b * b * i);
    psi = psi.add(&dqv.scale(b * v * i))?;
    psi = psi.sub(&lam_qk.scale(b * i))?;
    psi = psi.add(&dqk.scale(v * i))?;
    psi = psi.add(&fractional_laplacian(&qk, 1.0)?)?;
    psi = psi.add(&qk)?;
    let cubic = qk.map(|z| z * z.norm_sqr());
    psi = psi.sub(&cubic)?;

    let l2 = l2_norm(&psi);
    let g = psi.grid();
    let wsup = psi
        .values()
        .iter()
        .enumerate()
        .map(|(j, z)| (1.0 + g.node(j).powi(2)) * z.norm())
        .fold(0.0, f64::max);
    Ok((psi, l2, wsup))
}

/// Render lambda^{-1/2} f((x - alpha)/lambda) e^{i gamma} onto `sim`, where f
/// lives on the reference grid. `deriv_order` differentiates f first and
/// scales by lambda^{-deriv_order} (for grad U and similar directions).
///
/// The reference profile is treated as supported on its principal window:
/// outside |y| <= L_ref/2 the rendered field is zero, which preserves the L2
/// norm exactly (scaling is an L2 isometry). The bubble wraps on the
/// simulation torus via a cyclic roll.
pub fn render_scaled(
    sim: &Grid1D,
    fref: &SpectralField,
    lambda: f64,
    alpha: f64,
    gamma: f64,
    deriv_order: u32,
) -> Result<SpectralField> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(HalfwaveError::InvalidInput(format!(
            "render: lambda = {lambda}"
        )));
    }
    if lambda < 4.0 * sim.spacing() {
        return Err(HalfwaveError::UnderResolved {
            lambda,
            min_lambda: 4.0 * sim.spacing(),
        });
    }
    let src = if deriv_order == 0 {
        fref.clone()
    } else {
        let mut d = fref.clone();
        for _ in 0..deriv_order {
            d = derivative(&d);
        }
        d
    };
    let n = sim.n();
    let h = sim.spacing();
    let lref = fref.grid().length();
    // roll the bubble center to the middle of the grid, render, roll back
    let alpha_w = sim.wrap(alpha);
    let s = (alpha_w / h).round() as i64;
    let delta = alpha_w - s as f64 * h;
    // support in x around delta: |x - delta| <= lambda * L_ref / 2
    let half_support = 0.5 * lambda * lref;
    let x0 = sim.node(0);
    let j_lo = (((delta - half_support) - x0) / h).floor().max(0.0) as usize;
    let j_hi = ((((delta + half_support) - x0) / h).ceil() as usize).min(n - 1);
    let m_out = j_hi - j_lo + 1;
    let y0 = (sim.node(j_lo) - delta) / lambda;
    let dy = h / lambda;
    let vals = eval_trig_interpolant(&src, y0, dy, m_out);

    let amp = lambda.powf(-0.5) / lambda.powi(deriv_order as i32);
    let phase = Complex64::new(gamma.cos(), gamma.sin());
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let half_win = 0.5 * lref;
    for (jj, val) in vals.into_iter().enumerate() {
        let j = j_lo + jj;
        let y = (sim.node(j) - delta) / lambda;
        if y.abs() <= half_win {
            out[j] = val * amp * phase;
        }
    }
    let f = SpectralField::from_values(sim.clone(), out)?;
    Ok(f.roll(s))
}

/// U_k(x) = lambda^{-1/2} Q_k((x - alpha)/lambda) e^{i gamma}.
pub fn render_bubble(sim: &Grid1D, p: &BubbleParams, qk: &SpectralField) -> Result<SpectralField> {
    p.validate()?;
    render_scaled(sim, qk, p.lambda, p.alpha, p.gamma, 0)
}

/// Sum of K rendered bubbles. Centers must be pairwise distinct.
pub fn multi_bubble(
    sim: &Grid1D,
    params: &[BubbleParams],
    qks: &[SpectralField],
) -> Result<SpectralField> {
    if params.len() != qks.len() || params.is_empty() {
        return Err(HalfwaveError::InvalidInput(
            "multi_bubble: need one profile per parameter tuple".into(),
        ));
    }
    for (i, a) in params.iter().enumerate() {
        for b in params.iter().skip(i + 1) {
            if (a.alpha - b.alpha).abs() < 1e-12 {
                return Err(HalfwaveError::InvalidInput(
                    "multi_bubble: bubble centers must be pairwise distinct".into(),
                ));
            }
        }
    }
    let mut acc = SpectralField::zeros(sim.clone());
    for (p, qk) in params.iter().zip(qks) {
        acc = acc.add(&render_bubble(sim, p, qk)?)?;
    }
    Ok(acc)
}

/// Closed-form boundary parameters at time t < 0:
/// (omega^2 t^2/4, -omega^2 t/2, omega^2 t^2/4, x_k, -4/(omega^2 t) + theta_k).
pub fn closed_form_params(
    omega: f64,
    centers: &[f64],
    thetas: &[f64],
    t: f64,
) -> Result<Vec<BubbleParams>> {
    if !(t < 0.0) {
        return Err(HalfwaveError::InvalidInput(format!(
            "closed-form parameters require t < 0, got {t}"
        )));
    }
    if !(omega > 0.0) {
        return Err(HalfwaveError::InvalidInput("omega must be positive".into()));
    }
    if centers.len() != thetas.len() || centers.is_empty() {
        return Err(HalfwaveError::InvalidInput(
            "centers and thetas must have equal nonzero length".into(),
        ));
    }
    let o2 = omega * omega;
    Ok(centers
        .iter()
        .zip(thetas)
        .map(|(&xk, &th)| BubbleParams {
            lambda: 0.25 * o2 * t * t,
            b: -0.5 * o2 * t,
            v: 0.25 * o2 * t * t,
            alpha: xk,
            gamma: -4.0 / (o2 * t) + th,
        })
        .collect())
}

/// Frequency in the asymptotic normalization lambda ~ omega_thm * t^2,
/// related to the boundary-data convention by omega_thm = omega^2 / 4.
pub fn omega_thm_convention(omega: f64) -> f64 {
    0.25 * omega * omega
}

/// Multi-bubble boundary data at time t < 0: profiles at (b, v) from the
/// closed form, rendered and summed. Errors when the smallest bubble is not
/// resolvable on `sim`.
pub fn boundary_data(
    sim: &Grid1D,
    gs: &GroundState,
    ps: &ProfileSet,
    omega: f64,
    centers: &[f64],
    thetas: &[f64],
    t: f64,
) -> Result<(SpectralField, Vec<BubbleParams>)> {
    let params = closed_form_params(omega, centers, thetas, t)?;
    let mut qks = Vec::with_capacity(params.len());
    for p in &params {
        qks.push(modified_profile(gs, ps, p.b, p.v)?);
    }
    let field = multi_bubble(sim, &params, &qks)?;
    Ok((field, params))
}

/// Smooth partition of unity localizing around each bubble center.
#[derive(Debug, Clone)]
pub struct LocalizationSet {
    pub sigma: f64,
    pub centers: Vec<f64>,
    /// One weight per bubble, sampled on the simulation grid.
    pub phi: Vec<Vec<f64>>,
}

/// Quintic smoothstep, C^2 at both ends.
fn quintic_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

/// The profile cut Phi: 1 for x <= 4 sigma, 0 for x >= 8 sigma.
fn phi_profile(x: f64, sigma: f64) -> f64 {
    1.0 - quintic_step((x - 4.0 * sigma) / (4.0 * sigma))
}

/// Build Phi_1 = Phi(x - x_1), Phi_K = 1 - Phi(x - x_{K-1}),
/// Phi_k = Phi(x - x_k) - Phi(x - x_{k-1}); telescoping makes the partition
/// of unity exact. sigma defaults to (1/12) min center gap.
pub fn localization_set(
    sim: &Grid1D,
    centers: &[f64],
    sigma_override: Option<f64>,
) -> Result<LocalizationSet> {
    if centers.is_empty() {
        return Err(HalfwaveError::InvalidInput("no centers".into()));
    }
    for w in centers.windows(2) {
        if !(w[1] > w[0]) {
            return Err(HalfwaveError::InvalidInput(
                "centers must be strictly increasing".into(),
            ));
        }
    }
    let k = centers.len();
    let sigma = match sigma_override {
        Some(s) => s,
        None => {
            if k == 1 {
                // no gap to measure; any positive scale works since Phi_1 == 1
                sim.length() / 12.0
            } else {
                centers
                    .windows(2)
                    .map(|w| w[1] - w[0])
                    .fold(f64::INFINITY, f64::min)
                    / 12.0
            }
        }
    };
    if !(sigma > 0.0) {
        return Err(HalfwaveError::InvalidInput("sigma must be positive".into()));
    }
    if k > 1 && 8.0 * sigma < 4.0 * sim.spacing() {
        return Err(HalfwaveError::InvalidInput(format!(
            "centers too close for the grid: 8 sigma = {} < 4 spacing = {}",
            8.0 * sigma,
            4.0 * sim.spacing()
        )));
    }
    let n = sim.n();
    let mut phi = vec![vec![0.0; n]; k];
    for j in 0..n {
        let x = sim.node(j);
        let cuts: Vec<f64> = (0..k.saturating_sub(1))
            .map(|i| phi_profile(x - centers[i], sigma))
            .collect();
        for i in 0..k {
            phi[i][j] = if k == 1 {
                1.0
            } else if i == 0 {
                cuts[0]
            } else if i == k - 1 {
                1.0 - cuts[k - 2]
            } else {
                cuts[i] - cuts[i - 1]
            };
        }
    }
    Ok(LocalizationSet {
        sigma,
        centers: centers.to_vec(),
        phi,
    })
}

fn quintic_step_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        t * t * (30.0 + t * (-60.0 + 30.0 * t))
    }
}

impl LocalizationSet {
    /// Max |Phi_k'| * sigma over the grid, from the analytic derivative of
    /// the quintic ramp (each Phi_k is a difference of at most two cuts).
    pub fn grad_bound_times_sigma(&self, sim: &Grid1D) -> f64 {
        let k = self.centers.len();
        if k == 1 {
            return 0.0;
        }
        let dcut = |x: f64, c: f64| -> f64 {
            -quintic_step_deriv((x - c - 4.0 * self.sigma) / (4.0 * self.sigma))
                / (4.0 * self.sigma)
        };
        let mut worst: f64 = 0.0;
        for j in 0..sim.n() {
            let x = sim.node(j);
            for i in 0..k {
                let d = if i == 0 {
                    dcut(x, self.centers[0])
                } else if i == k - 1 {
                    -dcut(x, self.centers[k - 2])
                } else {
                    dcut(x, self.centers[i]) - dcut(x, self.centers[i - 1])
                };
                worst = worst.max(d.abs() * self.sigma);
            }
        }
        worst
    }
}
