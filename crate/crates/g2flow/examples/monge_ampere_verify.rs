//! Potential reconstruction: recover ρ with `Hess ρ = S̃` by double
//! Poincaré integration and verify `det Hess ρ` is constant for
//! torsion-free abelian states.

use g2flow::grids::{PeriodicGrid3, DEFAULT_LEN};
use g2flow::linalg3::SymMat3;
use g2flow::monge_ampere::{box_hessian, potential_from_hessian, verify_ma, BoxSym};
use g2flow::torus_flow::ma_state;

fn main() {
    // torsion-free state from a quadratic potential with det Hess = 6
    let grid = PeriodicGrid3::new(32, DEFAULT_LEN).unwrap();
    let st = ma_state(grid, &SymMat3::diag(1.0, 2.0, 3.0)).unwrap();
    let rep = verify_ma(&st, 1e-10).unwrap();
    println!(
        "quadratic potential: det Hess ρ = {:.12} ± {:.2e}",
        rep.constant, rep.residual
    );

    // reconstruction of a non-quadratic potential up to affine gauge
    let dims = [33, 33, 9];
    let h = 0.05;
    let hess = BoxSym::from_fn(dims, h, |c| {
        let x = [c[0] as f64 * h, c[1] as f64 * h, c[2] as f64 * h];
        [
            -x[0].sin() * x[1].sin(),
            x[0].cos() * x[1].cos(),
            0.0,
            -x[0].sin() * x[1].sin(),
            0.0,
            0.0,
        ]
    });
    let p = potential_from_hessian(&hess, 1e-2).unwrap();
    let back = box_hessian(&p.rho);
    let mut hess_err = 0.0_f64;
    for i in 1..dims[0] - 1 {
        for j in 1..dims[1] - 1 {
            for k in 1..dims[2] - 1 {
                for p0 in 0..3 {
                    for q in 0..3 {
                        hess_err = hess_err
                            .max((back.at(p0, q, [i, j, k]) - hess.at(p0, q, [i, j, k])).abs());
                    }
                }
            }
        }
    }
    println!(
        "trig potential roundtrip Hessian error: {hess_err:.3e} (h² = {:.3e})",
        h * h
    );

    let ok =
        rep.residual <= 1e-10 && (rep.constant - 6.0).abs() <= 1e-10 && hess_err <= 10.0 * h * h;
    println!("{}", if ok { "OK" } else { "FAILED" });
    std::process::exit(if ok { 0 } else { 1 });
}
