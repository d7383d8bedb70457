//! Two routes to the torsion of an abelian state: the coefficient-group
//! formulas against direct exterior differentiation of the sitewise
//! assembled forms ω, ψ, ψ#, ½ω∧ω.  The discrepancy is pure stencil
//! truncation and refines at second order.

use g2flow::grids::{divergence_free_sym_field, ConnField3, PeriodicGrid3, DEFAULT_LEN};
use g2flow::linalg3::Mat3;
use g2flow::torus_flow::{cross_check_exterior, TorusState};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() {
    println!("{:>6} {:>16}", "n", "max discrepancy");
    let mut series = Vec::new();
    for n in [12usize, 24, 48] {
        let g = PeriodicGrid3::new(n, DEFAULT_LEN).unwrap();
        let mut rng = StdRng::seed_from_u64(17);
        let s = divergence_free_sym_field(g, &mut rng, 0.05, 2.0).unwrap();
        let st = TorusState {
            grid: g,
            e: Mat3::identity(),
            a: ConnField3::zeros(g),
            s,
            t: 0.0,
        };
        let d = cross_check_exterior(&st).unwrap();
        println!("{n:>6} {d:>16.5e}");
        series.push(d);
    }
    let slope = (series[0] / series[2]).ln() / 4.0_f64.ln();
    println!("observed order: {slope:.3}");

    let ok = (slope - 2.0).abs() <= 0.4;
    println!("{}", if ok { "OK" } else { "FAILED" });
    std::process::exit(if ok { 0 } else { 1 });
}
