//! MINRES for symmetric (possibly indefinite) operators given as closures.
//!
//! L+ has a negative direction along the ground state, so CG is unsafe for
//! the constrained profile solves; MINRES handles both signs.

/// Solve A x = b for symmetric `apply`, returning (x, achieved |Ax-b|/|b|).
pub fn minres<F: FnMut(&[f64]) -> Vec<f64>>(
    mut apply: F,
    b: &[f64],
    rtol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let n = b.len();
    let dot = |a: &[f64], c: &[f64]| -> f64 { a.iter().zip(c).map(|(x, y)| x * y).sum() };
    let nrm = |a: &[f64]| -> f64 { dot(a, a).sqrt() };

    let beta1 = nrm(b);
    if beta1 == 0.0 {
        return (vec![0.0; n], 0.0);
    }
    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();

    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];

    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|&t| t * s).collect();
        let mut ay = apply(&v);
        if itn >= 2 {
            let c = beta / oldb;
            for (a, r) in ay.iter_mut().zip(r1.iter()) {
                *a -= c * r;
            }
        }
        let alfa = dot(&v, &ay);
        let c = alfa / beta;
        for (a, r) in ay.iter_mut().zip(r2.iter()) {
            *a -= c * r;
        }
        r1 = std::mem::replace(&mut r2, ay);
        y = r2.clone();
        oldb = beta;
        beta = dot(&r2, &y).max(0.0).sqrt();

        // rotation
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        let w1 = std::mem::replace(&mut w2, std::mem::take(&mut w));
        w = v
            .iter()
            .zip(w1.iter())
            .zip(w2.iter())
            .map(|((&vv, &a), &bb)| (vv - oldeps * a - delta * bb) * denom)
            .collect();
        for (xi, wi) in x.iter_mut().zip(w.iter()) {
            *xi += phi * wi;
        }
        if phibar <= rtol * beta1 {
            break;
        }
    }
    (x, phibar / beta1)
}
