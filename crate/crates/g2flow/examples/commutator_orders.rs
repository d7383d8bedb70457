//! Grid convergence of the commutator identity
//! `C S - S Cᵀ = (det S)^{-1/2} S D S`, with plain (comma) derivatives on
//! the abelian side and covariant (semicolon) derivatives with a
//! Levi-Civita connection on the SO(3) side.

use g2flow::grids::{divergence_free_sym_field, PeriodicGrid3, TrigPoly3, DEFAULT_LEN};
use g2flow::linalg3::Mat3;
use g2flow::so3_flow::{commutator_residual_semicolon, levi_civita, So3State};
use g2flow::torus_flow::commutator_residual_comma;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() {
    println!("{:>6} {:>14} {:>14}", "n", "comma", "semicolon");
    let mut res_c = Vec::new();
    let mut res_s = Vec::new();
    for n in [16usize, 32, 64] {
        let g = PeriodicGrid3::new(n, DEFAULT_LEN).unwrap();
        let mut rng = StdRng::seed_from_u64(1003);
        let s = divergence_free_sym_field(g, &mut rng, 0.05, 2.5).unwrap();
        let comma = commutator_residual_comma(&s, &Mat3::identity()).unwrap();

        let mut rng = StdRng::seed_from_u64(2003);
        let u = TrigPoly3::random(&mut rng, g.len(), 2, 0.05);
        let mut st = So3State::flat(g);
        for site in 0..g.sites() {
            let x = g.point(site);
            let sc = u.eval(x).exp();
            st.e.set_mat(site, &Mat3::diag(sc, sc, sc));
        }
        st.a = levi_civita(&st.e).unwrap();
        st.s = divergence_free_sym_field(g, &mut rng, 0.04, 2.0).unwrap();
        let semi = commutator_residual_semicolon(&st).unwrap();

        println!("{n:>6} {comma:>14.4e} {semi:>14.4e}");
        res_c.push(comma);
        res_s.push(semi);
    }
    let slope = |r: &[f64]| (r[0] / r[2]).ln() / 4.0_f64.ln();
    let (sc, ss) = (slope(&res_c), slope(&res_s));
    println!("orders: comma {sc:.3}, semicolon {ss:.3}");

    let ok = (sc - 2.0).abs() <= 0.3 && (ss - 2.0).abs() <= 0.3;
    println!("{}", if ok { "OK" } else { "FAILED" });
    std::process::exit(if ok { 0 } else { 1 });
}
