//! Linearized operators L+/- around the ground state, constrained solves for
//! the correction-profile chain {S1, G1, G2, S2, S3, rho, varrho}, kernel
//! identities, the Scal projection functional, and numerical coercivity.
//!
//! L+ = D + 1 - 3Q^2 and L- = D + 1 - Q^2 act on real fields and preserve
//! parity. Solves restrict to the stated parity subspace and project against
//! the relevant kernel (L-: Q, L+: grad Q); uniqueness then pins each
//! profile. The scaling operator inside the chain uses a tapered coordinate
//! weight so the sawtooth seam of the torus cannot leak broadband noise into
//! the right-hand sides (the ground state decays only like x^-2).

use crate::error::{HalfwaveError, Result};
use crate::field::SpectralField;
use crate::ground_state::{linear_fit, GroundState};
use crate::grid::Grid1D;
use crate::minres::minres;
use crate::spectral::{
    derivative, fractional_laplacian, inner_product, l2_norm, scaling_operator_weighted,
    smoothstep_cinf, tapered_x, windowed_l2_norm,
};
use num_complex::Complex64;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone)]
pub struct ChainOptions {
    /// MINRES relative residual target.
    pub solve_rtol: f64,
    pub max_iter: usize,
    /// Ceiling on |<rhs, kernel>| / (|rhs| |kernel|) before a solve is
    /// refused. Analytically compatible right-hand sides still carry a
    /// discrete defect that scales like L^-2 (tail truncation): about 1.3e-3
    /// at L = 100 and 4e-4 at L = 200. The guard is meant to catch genuinely
    /// incompatible data (ratio O(1)), so it sits two orders above that floor.
    pub kernel_tol: f64,
    /// Fraction of L/2 where the scaling-operator taper collar begins.
    pub taper_frac: f64,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            solve_rtol: 1e-13,
            max_iter: 40_000,
            kernel_tol: 1e-2,
            taper_frac: 0.8,
        }
    }
}

/// Apply L+ or L- to a (real-valued) field.
pub fn apply_l(sign: Sign, f: &SpectralField, gs: &GroundState) -> Result<SpectralField> {
    if !f.is_same_grid(&gs.q) {
        return Err(HalfwaveError::GridMismatch(
            "apply_l: field and ground state on different grids".into(),
        ));
    }
    let c = match sign {
        Sign::Plus => 3.0,
        Sign::Minus => 1.0,
    };
    let df = fractional_laplacian(f, 1.0)?;
    let vals = df
        .values()
        .iter()
        .zip(f.values())
        .zip(gs.q.values())
        .map(|((&d, &v), &q)| d + v - c * q.re * q.re * v)
        .collect();
    SpectralField::from_values(f.grid().clone(), vals)
}

fn parity_of_kernel(sign: Sign) -> Parity {
    match sign {
        Sign::Plus => Parity::Odd,   // grad Q
        Sign::Minus => Parity::Even, // Q
    }
}

/// Solve L_sign f = rhs restricted to the parity subspace, with the solution
/// (and rhs) projected orthogonal to the kernel when parity alone does not
/// exclude it. Returns the solution and the relative residual against the
/// *original* rhs, so compatibility leftovers stay visible.
pub fn solve_constrained(
    gs: &GroundState,
    sign: Sign,
    rhs: &SpectralField,
    parity: Parity,
    opts: &ChainOptions,
) -> Result<(SpectralField, f64)> {
    let grid = gs.q.grid().clone();
    if !rhs.is_same_grid(&gs.q) {
        return Err(HalfwaveError::GridMismatch(
            "solve_constrained: rhs grid differs from ground state".into(),
        ));
    }
    let kernel = match sign {
        Sign::Plus => derivative(&gs.q).real_part(),
        Sign::Minus => gs.q.clone(),
    };
    let needs_projection = parity_of_kernel(sign) == parity;
    let rhs_norm = l2_norm(rhs);
    if rhs_norm == 0.0 {
        return Ok((SpectralField::zeros(grid), 0.0));
    }
    if needs_projection {
        let ratio = inner_product(rhs, &kernel).re / (rhs_norm * l2_norm(&kernel));
        if ratio.abs() > opts.kernel_tol {
            return Err(HalfwaveError::KernelIncompatible {
                ratio: ratio.abs(),
                tol: opts.kernel_tol,
            });
        }
    }

    let ker_vals: Vec<f64> = kernel.values().iter().map(|z| z.re).collect();
    let ker_nsq: f64 = ker_vals.iter().map(|v| v * v).sum();
    let n = grid.n();
    let reflect_idx = |j: usize| (n - j) % n;
    let c = match sign {
        Sign::Plus => 3.0,
        Sign::Minus => 1.0,
    };
    let q2: Vec<f64> = gs.q.values().iter().map(|z| z.re * z.re).collect();
    let xi_abs: Vec<f64> = (0..n).map(|k| grid.wavenumber(k).abs()).collect();

    let project = |v: &mut Vec<f64>| {
        // parity projection on the node lattice
        let snapshot = v.clone();
        for j in 0..n {
            let m = snapshot[reflect_idx(j)];
            v[j] = match parity {
                Parity::Even => 0.5 * (snapshot[j] + m),
                Parity::Odd => 0.5 * (snapshot[j] - m),
            };
        }
        if needs_projection {
            let dot: f64 = v.iter().zip(ker_vals.iter()).map(|(a, b)| a * b).sum();
            let coef = dot / ker_nsq;
            for (vi, ki) in v.iter_mut().zip(ker_vals.iter()) {
                *vi -= coef * ki;
            }
        }
    };

    let apply = |v: &[f64]| -> Vec<f64> {
        let mut vv = v.to_vec();
        let mut pv = vv.clone();
        // L = D + 1 - c Q^2 via one FFT round trip
        let mut buf: Vec<Complex64> = pv.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        crate::fft::forward(&mut buf);
        for (k, z) in buf.iter_mut().enumerate() {
            *z *= xi_abs[k];
        }
        crate::fft::inverse_norm(&mut buf);
        for j in 0..n {
            pv[j] = buf[j].re + pv[j] - c * q2[j] * pv[j];
        }
        vv.copy_from_slice(&pv);
        vv
    };

    let mut b: Vec<f64> = rhs.values().iter().map(|z| z.re).collect();
    project(&mut b);
    let (mut sol, _info) = minres(
        |v| {
            let mut out = apply(v);
            project(&mut out);
            out
        },
        &b,
        opts.solve_rtol,
        opts.max_iter,
    );
    project(&mut sol);

    let f = SpectralField::from_real(grid, &sol)?;
    let lf = apply_l(sign, &f, gs)?;
    let resid = l2_norm(&lf.sub(rhs)?) / rhs_norm;
    Ok((f, resid))
}

/// The correction-profile chain and derived constants.
#[derive(Debug, Clone)]
pub struct ProfileSet {
    pub s1: SpectralField,
    pub g1: SpectralField,
    pub g2: SpectralField,
    pub s2: SpectralField,
    pub s3: SpectralField,
    pub rho: SpectralField,
    /// Unit-coefficient solves for the parameter-dependent direction:
    /// varrho(b, v) = b * varrho_b + v * varrho_v.
    pub varrho_b: SpectralField,
    pub varrho_v: SpectralField,
    pub solve_residuals: BTreeMap<String, f64>,
    pub parities: BTreeMap<String, Parity>,
    /// e1 = <S1, Lambda Q> = <S1, L- S1> (positive).
    pub e1: f64,
    /// p1 = 2 <L- G1, G1> (positive).
    pub p1: f64,
    /// Tapered x-coordinate used for every scaling-operator application.
    pub x_weight: Vec<f64>,
}

impl ProfileSet {
    pub fn grid(&self) -> &Grid1D {
        self.s1.grid()
    }

    /// Tapered Lambda consistent with the chain construction.
    pub fn lambda_op(&self, f: &SpectralField) -> SpectralField {
        scaling_operator_weighted(f, &self.x_weight)
    }

    /// varrho for given (b, v); the defining equation is linear in both.
    pub fn varrho(&self, b: f64, v: f64) -> SpectralField {
        self.varrho_b
            .scale(Complex64::new(b, 0.0))
            .add(&self.varrho_v.scale(Complex64::new(v, 0.0)))
            .expect("same grid")
    }

    /// Residual of the full varrho equation at (b, v), for self-consistency checks.
    pub fn varrho_equation_residual(&self, gs: &GroundState, b: f64, v: f64) -> f64 {
        let rhs = self.varrho_rhs(gs, b, v);
        let lhs = apply_l(Sign::Minus, &self.varrho(b, v), gs).expect("same grid");
        let rn = l2_norm(&rhs);
        if rn == 0.0 {
            l2_norm(&lhs)
        } else {
            l2_norm(&lhs.sub(&rhs).expect("same grid")) / rn
        }
    }

    fn varrho_rhs(&self, gs: &GroundState, b: f64, v: f64) -> SpectralField {
        let q = &gs.q;
        let term_b = self
            .s1
            .mul(&self.rho)
            .unwrap()
            .mul(q)
            .unwrap()
            .scale(Complex64::new(2.0, 0.0))
            .add(&self.lambda_op(&self.rho))
            .unwrap()
            .sub(&self.s2.scale(Complex64::new(2.0, 0.0)))
            .unwrap();
        let term_v = self
            .g1
            .mul(&self.rho)
            .unwrap()
            .mul(q)
            .unwrap()
            .scale(Complex64::new(2.0, 0.0))
            .add(&derivative(&self.rho))
            .unwrap()
            .add(&self.g2)
            .unwrap();
        term_b
            .scale(Complex64::new(b, 0.0))
            .add(&term_v.scale(Complex64::new(v, 0.0)))
            .unwrap()
    }

    /// Fitted decay exponents of the profiles over `window` (log-log fit of
    /// |f| against x); the chain profiles inherit the <x>^-2 decay of Q.
    pub fn decay_exponents(&self, window: (f64, f64)) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (name, f) in [
            ("s1", &self.s1),
            ("g1", &self.g1),
            ("g2", &self.g2),
            ("s2", &self.s2),
            ("s3", &self.s3),
            ("rho", &self.rho),
        ] {
            let g = f.grid();
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (j, z) in f.values().iter().enumerate() {
                let x = g.node(j);
                if x >= window.0 && x <= window.1 && z.re.abs() > 0.0 {
                    xs.push(x.ln());
                    ys.push(z.re.abs().ln());
                }
            }
            let (slope, _) = linear_fit(&xs, &ys);
            out.insert(name.to_string(), -slope);
        }
        out
    }
}

/// Run the six profile solves in dependency order plus the two varrho basis
/// solves. Parities follow the symmetry table of the approximate-profile
/// expansion (S1, S2, S3, rho even; G1, G2 odd).
pub fn build_profile_chain(gs: &GroundState, opts: &ChainOptions) -> Result<ProfileSet> {
    let grid = gs.q.grid().clone();
    let xw = tapered_x(&grid, opts.taper_frac);
    let lam = |f: &SpectralField| scaling_operator_weighted(f, &xw);
    let q = &gs.q;

    let mut residuals = BTreeMap::new();
    let mut parities = BTreeMap::new();

    let lam_q = lam(q);
    let grad_q = derivative(q).real_part();

    // L- S1 = Lambda Q (even), L- G1 = -grad Q (odd)
    let (s1, r) = solve_constrained(gs, Sign::Minus, &lam_q, Parity::Even, opts)?;
    residuals.insert("s1".into(), r);
    parities.insert("s1".into(), Parity::Even);
    let (g1, r) = solve_constrained(
        gs,
        Sign::Minus,
        &grad_q.scale(Complex64::new(-1.0, 0.0)),
        Parity::Odd,
        opts,
    )?;
    residuals.insert("g1".into(), r);
    parities.insert("g1".into(), Parity::Odd);

    // L+ G2 = G1 - Lambda G1 + grad S1 + 2 S1 G1 Q (odd)
    let rhs_g2 = g1
        .sub(&lam(&g1))?
        .add(&derivative(&s1).real_part())?
        .add(
            &s1.mul(&g1)?
                .mul(q)?
                .scale(Complex64::new(2.0, 0.0)),
        )?;
    let (g2, r) = solve_constrained(gs, Sign::Plus, &rhs_g2, Parity::Odd, opts)?;
    residuals.insert("g2".into(), r);
    parities.insert("g2".into(), Parity::Odd);

    // L+ S2 = S1/2 - Lambda S1 + S1^2 Q (even)
    let rhs_s2 = s1
        .scale(Complex64::new(0.5, 0.0))
        .sub(&lam(&s1))?
        .add(&s1.mul(&s1)?.mul(q)?)?;
    let (s2, r) = solve_constrained(gs, Sign::Plus, &rhs_s2, Parity::Even, opts)?;
    residuals.insert("s2".into(), r);
    parities.insert("s2".into(), Parity::Even);

    // L- S3 = -S2 + Lambda S2 + 2 S1 S2 Q + S1^3 (even: every term above is
    // even, matching the symmetry table of the profile expansion)
    let rhs_s3 = s2
        .scale(Complex64::new(-1.0, 0.0))
        .add(&lam(&s2))?
        .add(
            &s1.mul(&s2)?
                .mul(q)?
                .scale(Complex64::new(2.0, 0.0)),
        )?
        .add(&s1.mul(&s1)?.mul(&s1)?)?;
    let (s3, r) = solve_constrained(gs, Sign::Minus, &rhs_s3, Parity::Even, opts)?;
    residuals.insert("s3".into(), r);
    parities.insert("s3".into(), Parity::Even);

    // L+ rho = S1 (even)
    let (rho, r) = solve_constrained(gs, Sign::Plus, &s1, Parity::Even, opts)?;
    residuals.insert("rho".into(), r);
    parities.insert("rho".into(), Parity::Even);

    // varrho basis: L- varrho_b = 2 S1 rho Q + Lambda rho - 2 S2 (even),
    //               L- varrho_v = 2 G1 rho Q + grad rho + G2 (odd)
    let rhs_vb = s1
        .mul(&rho)?
        .mul(q)?
        .scale(Complex64::new(2.0, 0.0))
        .add(&lam(&rho))?
        .sub(&s2.scale(Complex64::new(2.0, 0.0)))?;
    let (varrho_b, r) = solve_constrained(gs, Sign::Minus, &rhs_vb, Parity::Even, opts)?;
    residuals.insert("varrho_b".into(), r);
    let rhs_vv = g1
        .mul(&rho)?
        .mul(q)?
        .scale(Complex64::new(2.0, 0.0))
        .add(&derivative(&rho).real_part())?
        .add(&g2)?;
    let (varrho_v, r) = solve_constrained(gs, Sign::Minus, &rhs_vv, Parity::Odd, opts)?;
    residuals.insert("varrho_v".into(), r);

    let e1 = inner_product(&s1, &lam_q).re;
    let p1 = 2.0 * inner_product(&grad_q.scale(Complex64::new(-1.0, 0.0)), &g1).re;

    Ok(ProfileSet {
        s1,
        g1,
        g2,
        s2,
        s3,
        rho,
        varrho_b,
        varrho_v,
        solve_residuals: residuals,
        parities,
        e1,
        p1,
        x_weight: xw,
    })
}

/// Scal(f): squared projections of f = f1 + i f2 on the six generalized-null
/// directions, Re part against {Q, G1, S1} and Im part against
/// {grad Q, Lambda Q, rho}.
pub fn scal(f: &SpectralField, gs: &GroundState, ps: &ProfileSet) -> f64 {
    let f1 = f.real_part();
    let f2 = SpectralField::from_real(
        f.grid().clone(),
        &f.values().iter().map(|z| z.im).collect::<Vec<_>>(),
    )
    .expect("same grid");
    let grad_q = derivative(&gs.q).real_part();
    let lam_q = ps.lambda_op(&gs.q);
    let p = |a: &SpectralField, b: &SpectralField| inner_product(a, b).re.powi(2);
    p(&f1, &gs.q) + p(&f1, &ps.g1) + p(&f1, &ps.s1) + p(&f2, &grad_q) + p(&f2, &lam_q) + p(&f2, &ps.rho)
}

/// The six algebraic kernel identities, reported as relative L2 residuals on
/// the window |x| <= window_frac * L/2 (seam artifacts excluded).
pub fn kernel_identity_residuals(
    gs: &GroundState,
    ps: &ProfileSet,
    window_frac: f64,
) -> BTreeMap<String, f64> {
    let q = &gs.q;
    let grad_q = derivative(q).real_part();
    let lam_q = ps.lambda_op(q);
    let wn = |f: &SpectralField| windowed_l2_norm(f, window_frac);
    let mut out = BTreeMap::new();

    let lm_q = apply_l(Sign::Minus, q, gs).unwrap();
    out.insert("Lm[Q] = 0".into(), wn(&lm_q) / wn(q));

    let lp_gq = apply_l(Sign::Plus, &grad_q, gs).unwrap();
    out.insert("Lp[gradQ] = 0".into(), wn(&lp_gq) / wn(&grad_q));

    // scaling-family identity: L+ (Lambda Q) = -Q for the first-order operator
    let lp_lq = apply_l(Sign::Plus, &lam_q, gs).unwrap();
    out.insert(
        "Lp[LamQ] = -Q".into(),
        wn(&lp_lq.add(q).unwrap()) / wn(q),
    );

    let lm_g1 = apply_l(Sign::Minus, &ps.g1, gs).unwrap();
    out.insert(
        "Lm[G1] = -gradQ".into(),
        wn(&lm_g1.add(&grad_q).unwrap()) / wn(&grad_q),
    );

    let lm_s1 = apply_l(Sign::Minus, &ps.s1, gs).unwrap();
    out.insert(
        "Lm[S1] = LamQ".into(),
        wn(&lm_s1.sub(&lam_q).unwrap()) / wn(&lam_q),
    );

    let lp_rho = apply_l(Sign::Plus, &ps.rho, gs).unwrap();
    out.insert(
        "Lp[rho] = S1".into(),
        wn(&lp_rho.sub(&ps.s1).unwrap()) / wn(&ps.s1),
    );
    out
}

/// <S1,S1> + 2 <Q,S2>, relative to <S1,S1> (zero in the continuum; the
/// discrete value decays like L^-2 from tail truncation).
pub fn s1_s2_mass_identity(gs: &GroundState, ps: &ProfileSet) -> f64 {
    let a = inner_product(&ps.s1, &ps.s1).re;
    let b = inner_product(&gs.q, &ps.s2).re;
    (a + 2.0 * b) / a
}

#[derive(Debug, Clone)]
pub struct CoercivityReport {
    pub min_plus: f64,
    pub min_minus: f64,
    pub n_probe: usize,
}

impl CoercivityReport {
    pub fn min(&self) -> f64 {
        self.min_plus.min(self.min_minus)
    }
}

/// Minimize the Rayleigh quotient <L f, f> / |f|_{H^{1/2}}^2 over the
/// low-frequency probe space orthogonal to the Scal directions. The real and
/// imaginary blocks decouple, so the overall minimum is the smaller of the
/// L+ (constraints Q, G1, S1) and L- (constraints grad Q, Lambda Q, rho)
/// block minima.
pub fn coercivity_rayleigh(gs: &GroundState, ps: &ProfileSet, n_probe: usize) -> Result<CoercivityReport> {
    let grad_q = derivative(&gs.q).real_part();
    let lam_q = ps.lambda_op(&gs.q);
    let plus = rayleigh_block(gs, Sign::Plus, &[&gs.q, &ps.g1, &ps.s1], n_probe, None, 0.0)?;
    let minus = rayleigh_block(gs, Sign::Minus, &[&grad_q, &lam_q, &ps.rho], n_probe, None, 0.0)?;
    Ok(CoercivityReport {
        min_plus: plus,
        min_minus: minus,
        n_probe,
    })
}

/// Same minimization with the decaying weight phi_A in both the quadratic
/// form and the norm; positive for A large enough.
pub fn localized_coercivity_check(
    gs: &GroundState,
    ps: &ProfileSet,
    a_big: f64,
    a_exp: f64,
    n_probe: usize,
) -> Result<CoercivityReport> {
    if !(a_big > 0.0) {
        return Err(HalfwaveError::InvalidInput("A must be positive".into()));
    }
    if !(a_exp > 0.0 && a_exp < 1.0) {
        return Err(HalfwaveError::InvalidInput(
            "weight exponent must lie in (0,1)".into(),
        ));
    }
    let g = gs.q.grid();
    let w: Vec<f64> = (0..g.n())
        .map(|j| phi_weight(g.node(j) / a_big, a_exp))
        .collect();
    let grad_q = derivative(&gs.q).real_part();
    let lam_q = ps.lambda_op(&gs.q);
    let plus = rayleigh_block(gs, Sign::Plus, &[&gs.q, &ps.g1, &ps.s1], n_probe, Some(&w), 0.0)?;
    let minus = rayleigh_block(
        gs,
        Sign::Minus,
        &[&grad_q, &lam_q, &ps.rho],
        n_probe,
        Some(&w),
        0.0,
    )?;
    Ok(CoercivityReport {
        min_plus: plus,
        min_minus: minus,
        n_probe,
    })
}

/// phi(r): 1 for |r| <= 1, |r|^{-a} for |r| >= 2, C-infinity monotone bridge
/// in between (exponent ramped by a smooth step, so all derivatives match).
pub fn phi_weight(r: f64, a: f64) -> f64 {
    let r = r.abs();
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        r.powf(-a)
    } else {
        r.powf(-a * smoothstep_cinf(r - 1.0))
    }
}

/// Minimal generalized Rayleigh eigenvalue of one parity-free block.
/// weight = None: form <L f, f>, norm |f|^2 + |D^{1/2} f|^2.
/// weight = Some(w): form int (f^2 + |D^{1/2} f|^2) w - c Q^2 f^2,
/// norm int (f^2 + |D^{1/2} f|^2) w.
fn rayleigh_block(
    gs: &GroundState,
    sign: Sign,
    constraints: &[&SpectralField],
    n_probe: usize,
    weight: Option<&[f64]>,
    _reserved: f64,
) -> Result<f64> {
    use nalgebra::DMatrix;
    let g = gs.q.grid().clone();
    let n = g.n();
    let h = g.spacing();
    if n_probe < 8 {
        return Err(HalfwaveError::InvalidInput("n_probe too small".into()));
    }
    // probe basis: 1, cos(2pi m x/L), sin(2pi m x/L)
    let mut probes: Vec<Vec<f64>> = Vec::with_capacity(n_probe);
    let l = g.length();
    let mut m = 0usize;
    while probes.len() < n_probe {
        if m == 0 {
            probes.push(vec![1.0; n]);
        } else {
            let om = 2.0 * std::f64::consts::PI * m as f64 / l;
            probes.push((0..n).map(|j| (om * g.node(j)).cos()).collect());
            if probes.len() < n_probe {
                probes.push((0..n).map(|j| (om * g.node(j)).sin()).collect());
            }
        }
        m += 1;
    }
    let p = probes.len();
    let c = match sign {
        Sign::Plus => 3.0,
        Sign::Minus => 1.0,
    };
    let q2: Vec<f64> = gs.q.values().iter().map(|z| z.re * z.re).collect();

    // images needed for the two quadratic forms
    let field_of = |v: &[f64]| SpectralField::from_real(g.clone(), v).unwrap();
    let mut l_img: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut dhalf: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut d_img: Vec<Vec<f64>> = Vec::with_capacity(p);
    for b in &probes {
        let f = field_of(b);
        if weight.is_some() {
            let dh = fractional_laplacian(&f, 0.5)?;
            dhalf.push(dh.values().iter().map(|z| z.re).collect());
        } else {
            let lf = apply_l(sign, &f, gs)?;
            l_img.push(lf.values().iter().map(|z| z.re).collect());
            let df = fractional_laplacian(&f, 1.0)?;
            d_img.push(df.values().iter().map(|z| z.re).collect());
        }
    }

    let dot = |a: &[f64], b: &[f64]| -> f64 { h * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() };
    let wdot = |a: &[f64], b: &[f64], w: &[f64]| -> f64 {
        h * a
            .iter()
            .zip(b)
            .zip(w)
            .map(|((x, y), ww)| x * y * ww)
            .sum::<f64>()
    };

    let mut amat = DMatrix::<f64>::zeros(p, p);
    let mut bmat = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let (aij, bij) = match weight {
                None => {
                    let aij = dot(&l_img[i], &probes[j]);
                    // H^{1/2} Gram: <f,g> + <Df, g> pairing gives |f|^2 + |D^{1/2}f|^2 on the diagonal
                    let bij = dot(&probes[i], &probes[j]) + dot(&d_img[i], &probes[j]);
                    (aij, bij)
                }
                Some(w) => {
                    let norm_ij =
                        wdot(&probes[i], &probes[j], w) + wdot(&dhalf[i], &dhalf[j], w);
                    let pot: f64 = h * probes[i]
                        .iter()
                        .zip(probes[j].iter())
                        .zip(q2.iter())
                        .map(|((x, y), qq)| x * y * qq)
                        .sum::<f64>();
                    (norm_ij - c * pot, norm_ij)
                }
            };
            amat[(i, j)] = aij;
            amat[(j, i)] = aij;
            bmat[(i, j)] = bij;
            bmat[(j, i)] = bij;
        }
    }

    // orthonormal basis of the constraint complement by modified Gram-Schmidt
    let mut cons: Vec<Vec<f64>> = Vec::new();
    for cfield in constraints {
        // constraint coefficients in probe space: <b_i, c>
        let cv: Vec<f64> = cfield.values().iter().map(|z| z.re).collect();
        let mut col: Vec<f64> = probes.iter().map(|b| dot(b, &cv)).collect();
        for prev in &cons {
            let pr: f64 = col.iter().zip(prev).map(|(x, y)| x * y).sum();
            for (ci, pi) in col.iter_mut().zip(prev) {
                *ci -= pr * pi;
            }
        }
        let nn: f64 = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nn > 1e-12 {
            for ci in col.iter_mut() {
                *ci /= nn;
            }
            cons.push(col);
        }
    }
    let k = cons.len();
    let mut z = DMatrix::<f64>::zeros(p, p - k);
    {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(p - k);
        for i in 0..p {
            let mut e = vec![0.0; p];
            e[i] = 1.0;
            for c in &cons {
                let pr: f64 = e.iter().zip(c).map(|(x, y)| x * y).sum();
                for (ei, ci) in e.iter_mut().zip(c) {
                    *ei -= pr * ci;
                }
            }
            for bvec in &basis {
                let pr: f64 = e.iter().zip(bvec).map(|(x, y)| x * y).sum();
                for (ei, bi) in e.iter_mut().zip(bvec) {
                    *ei -= pr * bi;
                }
            }
            let nn: f64 = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nn > 1e-8 {
                for ei in e.iter_mut() {
                    *ei /= nn;
                }
                basis.push(e);
                if basis.len() == p - k {
                    break;
                }
            }
        }
        if basis.len() != p - k {
            return Err(HalfwaveError::NonConvergence(
                "constraint complement construction failed".into(),
            ));
        }
        for (jcol, bvec) in basis.iter().enumerate() {
            for i in 0..p {
                z[(i, jcol)] = bvec[i];
            }
        }
    }

    let at = z.transpose() * &amat * &z;
    let bt = z.transpose() * &bmat * &z;
    let chol = bt
        .clone()
        .cholesky()
        .ok_or_else(|| HalfwaveError::NonConvergence("probe Gram not positive definite".into()))?;
    let linv = chol.l().try_inverse().ok_or_else(|| {
        HalfwaveError::NonConvergence("Cholesky factor not invertible".into())
    })?;
    let mmat = &linv * at * linv.transpose();
    let sym = nalgebra::SymmetricEigen::new(mmat);
    Ok(sym.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize, l: f64) -> (GroundState, ProfileSet) {
        let g = Grid1D::new(n, l).unwrap();
        let gs = crate::ground_state::solve_ground_state(&g, 3, 1e-12, 500).unwrap();
        let ps = build_profile_chain(&gs, &ChainOptions::default()).unwrap();
        (gs, ps)
    }

    #[test]
    fn kernel_identities_small_grid() {
        // h = 0.0244 keeps cubic-product aliasing below the tail floors
        let (gs, ps) = setup(4096, 100.0);
        let res = kernel_identity_residuals(&gs, &ps, 0.6);
        assert!(res["Lm[Q] = 0"] < 1e-10, "{res:?}");
        assert!(res["Lp[gradQ] = 0"] < 1e-8, "{res:?}");
        // identity floors scale like L^-1.5..L^-2; loose bounds here,
        // tight ones in the acceptance suite on the big grid
        assert!(res["Lp[LamQ] = -Q"] < 2e-2, "{res:?}");
        assert!(res["Lm[G1] = -gradQ"] < 1e-8, "{res:?}");
        assert!(res["Lm[S1] = LamQ"] < 1e-3, "{res:?}");
        assert!(res["Lp[rho] = S1"] < 1e-8, "{res:?}");
    }

    #[test]
    fn lam_q_identity_has_unit_coefficient() {
        // L+ Lambda Q = -Q, not -2Q: the -2Q variant leaves an O(1) residual
        let (gs, ps) = setup(2048, 100.0);
        let lam_q = ps.lambda_op(&gs.q);
        let lp = apply_l(Sign::Plus, &lam_q, &gs).unwrap();
        let r1 = l2_norm(&lp.add(&gs.q).unwrap()) / l2_norm(&gs.q);
        let r2 = l2_norm(
            &lp.add(&gs.q.scale(Complex64::new(2.0, 0.0)))
                .unwrap(),
        ) / l2_norm(&gs.q);
        assert!(r1 < 0.05, "unit-coefficient residual {r1}");
        assert!(r2 > 0.5, "double-coefficient residual should be O(1), got {r2}");
    }

    #[test]
    fn chain_parities_and_signs() {
        let (_gs, ps) = setup(2048, 100.0);
        for (name, f) in [
            ("s1", &ps.s1),
            ("s2", &ps.s2),
            ("s3", &ps.s3),
            ("rho", &ps.rho),
        ] {
            let defect = l2_norm(&f.odd_part()) / l2_norm(f).max(1e-300);
            assert!(defect < 1e-10, "{name} should be even, odd defect {defect}");
        }
        for (name, f) in [("g1", &ps.g1), ("g2", &ps.g2)] {
            let defect = l2_norm(&f.even_part()) / l2_norm(f).max(1e-300);
            assert!(defect < 1e-10, "{name} should be odd, even defect {defect}");
        }
        assert!(ps.e1 > 0.0, "e1 = {}", ps.e1);
        assert!(ps.p1 > 0.0, "p1 = {}", ps.p1);
    }

    #[test]
    fn solve_rejects_kernel_rhs() {
        let g = Grid1D::new(1024, 100.0).unwrap();
        let gs = crate::ground_state::solve_ground_state(&g, 3, 1e-12, 500).unwrap();
        let out = solve_constrained(
            &gs,
            Sign::Minus,
            &gs.q,
            Parity::Even,
            &ChainOptions::default(),
        );
        assert!(matches!(out, Err(HalfwaveError::KernelIncompatible { .. })));
    }

    #[test]
    fn varrho_linearity_and_zero() {
        let (gs, ps) = setup(2048, 100.0);
        let z = ps.varrho(0.0, 0.0);
        assert!(l2_norm(&z) == 0.0);
        let a = ps.varrho(0.1, 0.0);
        let b = ps.varrho(0.2, 0.0);
        let d = l2_norm(&b.sub(&a.scale(Complex64::new(2.0, 0.0))).unwrap());
        assert!(d < 1e-10 * l2_norm(&b).max(1e-300));
        // the kernel-projection leftover of the b-part rhs is the torus
        // compatibility defect (~1/L^2, here L = 100); the equation holds to
        // that floor, not to solver precision
        let r = ps.varrho_equation_residual(&gs, 0.05, 0.0025);
        assert!(r < 5e-3, "varrho equation residual {r}");
    }

    #[test]
    fn scal_projections() {
        let (gs, ps) = setup(2048, 100.0);
        // f = iQ: real part zero; imaginary part Q is even, so the gradQ
        // (odd) and LamQ (antisymmetric pairing) projections vanish and only
        // <Q, rho>^2 survives
        let iq = gs.q.scale(Complex64::new(0.0, 1.0));
        let s = scal(&iq, &gs, &ps);
        let expect = inner_product(&gs.q, &ps.rho).re.powi(2);
        assert!(
            (s - expect).abs() < 1e-6 * expect.max(1e-12),
            "scal(iQ) = {s}, <Q,rho>^2 = {expect}"
        );
        // f = Q: only <Q,Q>^2 = mass^2
        let s2 = scal(&gs.q, &gs, &ps);
        let m2 = gs.mass().powi(2);
        assert!((s2 - m2).abs() < 1e-8 * m2);
    }

    #[test]
    fn coercivity_positive_with_projection() {
        let (gs, ps) = setup(2048, 100.0);
        let rep = coercivity_rayleigh(&gs, &ps, 120).unwrap();
        assert!(rep.min() > 0.0, "coercivity minimum {:?}", rep);
        // dropping the projection exposes the negative L+ direction
        let grad_q = derivative(&gs.q).real_part();
        let _ = grad_q;
        let unproj = rayleigh_block(&gs, Sign::Plus, &[], 120, None, 0.0).unwrap();
        assert!(unproj < 0.0, "unprojected L+ minimum {unproj}");
    }

    #[test]
    fn localized_coercivity_positive_for_large_a() {
        let (gs, ps) = setup(2048, 100.0);
        let rep = localized_coercivity_check(&gs, &ps, 50.0, 0.5, 120).unwrap();
        assert!(rep.min() > 0.0, "localized minimum {:?}", rep);
        assert!(localized_coercivity_check(&gs, &ps, -1.0, 0.5, 64).is_err());
        assert!(localized_coercivity_check(&gs, &ps, 50.0, 1.5, 64).is_err());
    }

    #[test]
    fn phi_weight_charts() {
        assert_eq!(phi_weight(0.5, 0.5), 1.0);
        assert!((phi_weight(3.0, 0.5) - 3.0_f64.powf(-0.5)).abs() < 1e-15);
        // monotone decreasing across the bridge
        let mut prev = phi_weight(1.0, 0.5);
        for i in 1..=100 {
            let r = 1.0 + i as f64 / 100.0;
            let v = phi_weight(r, 0.5);
            assert!(v <= prev + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn symmetry_of_l_operators() {
        let g = Grid1D::new(1024, 100.0).unwrap();
        let gs = crate::ground_state::solve_ground_state(&g, 3, 1e-12, 500).unwrap();
        let f = SpectralField::from_fn(g.clone(), |x| {
            Complex64::new((1.3 * x).cos() * (-x * x / 30.0).exp(), 0.0)
        });
        let w = SpectralField::from_fn(g, |x| {
            Complex64::new((0.7 * x).sin() * (-x * x / 40.0).exp(), 0.0)
        });
        for sign in [Sign::Plus, Sign::Minus] {
            let a = inner_product(&apply_l(sign, &f, &gs).unwrap(), &w).re;
            let b = inner_product(&f, &apply_l(sign, &w, &gs).unwrap()).re;
            assert!(
                (a - b).abs() < 1e-10 * a.abs().max(1.0),
                "L{:?} not symmetric: {a} vs {b}",
                sign
            );
        }
    }
}
