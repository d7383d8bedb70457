//! Levi-Civita solve and the Bianchi symmetry of the curvature: for the
//! solved connection the torsion vanishes (to rounding, since the solve
//! uses the same stencils), and `Ω - Ωᵀ` refines at second order.

use g2flow::grids::{PeriodicGrid3, TrigPoly3, DEFAULT_LEN};
use g2flow::linalg3::Mat3;
use g2flow::so3_flow::{levi_civita, torsion_curvature, So3State};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() {
    let mut rng = StdRng::seed_from_u64(9);
    let u = TrigPoly3::random(&mut rng, DEFAULT_LEN, 2, 0.1);
    let w = TrigPoly3::random(&mut rng, DEFAULT_LEN, 2, 0.1);

    let mut ok = true;
    for (name, berger) in [
        ("conformal e^u I", false),
        ("berger-type diag(mu, lam, lam)", true),
    ] {
        println!("{name}:");
        println!("{:>6} {:>14} {:>14}", "n", "torsion", "omega asym");
        let mut asym_series = Vec::new();
        for n in [16usize, 32, 64] {
            let g = PeriodicGrid3::new(n, DEFAULT_LEN).unwrap();
            let mut st = So3State::flat(g);
            for site in 0..g.sites() {
                let x = g.point(site);
                let lam = u.eval(x).exp();
                let mu = if berger { (0.5 * w.eval(x)).exp() } else { lam };
                st.e.set_mat(site, &Mat3::diag(mu, lam, lam));
            }
            st.a = levi_civita(&st.e).unwrap();
            let (t, om) = torsion_curvature(&st).unwrap();
            let mut asym = 0.0_f64;
            for site in 0..g.sites() {
                asym = asym.max(om.mat_at(site).asym_defect());
            }
            println!("{n:>6} {:>14.3e} {asym:>14.3e}", t.max_abs());
            ok &= t.max_abs() < 1e-11;
            asym_series.push(asym);
        }
        let slope = (asym_series[0] / asym_series[2]).ln() / 4.0_f64.ln();
        println!("omega-asym order: {slope:.3}\n");
        ok &= (slope - 2.0).abs() < 0.5;
    }
    println!("{}", if ok { "OK" } else { "FAILED" });
    std::process::exit(if ok { 0 } else { 1 });
}
