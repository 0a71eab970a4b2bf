use halfwave::grid::Grid1D;
use halfwave::ground_state::solve_ground_state;
use halfwave::linearized::{build_profile_chain, ChainOptions};
use halfwave::profiles::profile_residual;

fn main() {
    let g = Grid1D::new(4096, 200.0).unwrap();
    let gs = solve_ground_state(&g, 3, 1e-12, 500).unwrap();
    let ps = build_profile_chain(&gs, &ChainOptions::default()).unwrap();
    println!("pure b:");
    for b in [1e-4, 1e-3, 1e-2, 1e-1] {
        let (_, l2, _) = profile_residual(&gs, &ps, b, 0.0).unwrap();
        println!("  b={b:.0e}: |Psi|={l2:.6e}  /b={:.3e} /b^2={:.3e} /b^4={:.3e}", l2/b, l2/(b*b), l2/b.powi(4));
    }
    println!("pure v:");
    for v in [1e-4, 1e-3, 1e-2, 1e-1] {
        let (_, l2, _) = profile_residual(&gs, &ps, 0.0, v).unwrap();
        println!("  v={v:.0e}: |Psi|={l2:.6e}  /v={:.3e} /v^2={:.3e}", l2/v, l2/(v*v));
    }
}
