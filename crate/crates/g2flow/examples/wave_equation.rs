//! Second-order form of the abelian flow: along a trajectory the central
//! time difference of `S` matches `-ε_{iαβ}ε_{jγδ} ∂_β∂_δ S̃_{αγ}`, with
//! the residual shrinking at second order under dt-halving.

use g2flow::grids::{PeriodicGrid3, DEFAULT_LEN};
use g2flow::integrate::rk4_step;
use g2flow::torus_flow::{double_curl_state, wave_residual, TorusSystem};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() {
    let grid = PeriodicGrid3::new(32, DEFAULT_LEN).unwrap();
    let mut rng = StdRng::seed_from_u64(5);
    let st0 = double_curl_state(grid, &mut rng, 0.05, 2.0).unwrap();
    let sys = TorusSystem::default();

    println!("{:>10} {:>14}", "dt", "wave residual");
    let mut points = Vec::new();
    for &dt in &[8e-3, 4e-3, 2e-3, 1e-3] {
        let (mid, _) = rk4_step(&sys, &st0, dt).unwrap();
        let (next, _) = rk4_step(&sys, &mid, dt).unwrap();
        let r = wave_residual(&st0, &mid, &next, dt).unwrap();
        println!("{dt:>10.1e} {r:>14.5e}");
        points.push((dt, r));
    }
    let slope = (points[0].1 / points[3].1).ln() / (points[0].0 / points[3].0).ln();
    println!("observed order: {slope:.3}");

    let ok = (slope - 2.0).abs() <= 0.3;
    println!("{}", if ok { "OK" } else { "FAILED" });
    std::process::exit(if ok { 0 } else { 1 });
}
