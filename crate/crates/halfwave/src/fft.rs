//! Shared FFT plans, cached per transform length.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

struct PlanCache {
    forward: HashMap<usize, Arc<dyn Fft<f64>>>,
    inverse: HashMap<usize, Arc<dyn Fft<f64>>>,
    planner: FftPlanner<f64>,
}

fn cache() -> &'static Mutex<PlanCache> {
    static CACHE: OnceLock<Mutex<PlanCache>> = OnceLock::new();
    CACHE.get_or_init(|| {
        Mutex::new(PlanCache {
            forward: HashMap::new(),
            inverse: HashMap::new(),
            planner: FftPlanner::new(),
        })
    })
}

fn plan(n: usize, fwd: bool) -> Arc<dyn Fft<f64>> {
    let mut c = cache().lock().expect("fft plan cache poisoned");
    let PlanCache {
        forward,
        inverse,
        planner,
    } = &mut *c;
    let map = if fwd { forward } else { inverse };
    map.entry(n)
        .or_insert_with(|| {
            if fwd {
                planner.plan_fft_forward(n)
            } else {
                planner.plan_fft_inverse(n)
            }
        })
        .clone()
}

/// In-place unnormalized forward DFT.
pub fn forward(buf: &mut [Complex64]) {
    plan(buf.len(), true).process(buf);
}

/// In-place unnormalized inverse DFT (divide by n for the true inverse).
pub fn inverse(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
}

/// Normalized inverse: applies 1/n so forward -> inverse_norm is the identity.
pub fn inverse_norm(buf: &mut [Complex64]) {
    let n = buf.len() as f64;
    inverse(buf);
    for v in buf.iter_mut() {
        *v /= n;
    }
}
