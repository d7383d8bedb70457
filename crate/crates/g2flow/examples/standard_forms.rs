//! The model forms on ℝ⁶/ℝ⁷ and the identities that pin every sign
//! convention in the crate:
//!
//!   φ₀ = ω₀ ∧ dx⁰ + ψ₀        ⋆φ₀ = -ψ₀# ∧ dx⁰ + ½ ω₀∧ω₀
//!
//! plus the assembled forms of the identity triple (e, a, S) = (I, I, I).

use g2flow::exterior::{standard, Form, Orientation};
use g2flow::linalg3::SymMat3;
use g2flow::su3g2::{forms_from_triple, g2_from_family, Lapse, TriplePoint, RELABEL6, RELABEL7};

fn main() {
    let phi = standard::phi0();
    let split = standard::embed7(&standard::omega0())
        .wedge(&Form::basis(7, standard::x7(0)))
        .unwrap()
        .add(&standard::embed7(&standard::psi0()))
        .unwrap();
    let om7 = standard::embed7(&standard::omega0());
    let dual = standard::embed7(&standard::psi0_sharp())
        .wedge(&Form::basis(7, standard::x7(0)))
        .unwrap()
        .scale(-1.0)
        .add(&om7.wedge(&om7).unwrap().scale(0.5))
        .unwrap();

    println!(
        "phi0 split residual:        {:e}",
        phi.sub(&split).unwrap().max_abs()
    );
    println!(
        "star phi0 split residual:   {:e}",
        standard::star_phi0().sub(&dual).unwrap().max_abs()
    );
    println!(
        "hodge star reproduces dual: {:e}",
        phi.hodge_star(Orientation::Positive)
            .sub(&standard::star_phi0())
            .unwrap()
            .max_abs()
    );

    // the identity triple assembles the same forms in the (a, e, dt) basis
    let t = TriplePoint::standard(SymMat3::identity());
    let fs = forms_from_triple(&t).unwrap();
    let (phi_t, star_t) = g2_from_family(&fs, Lapse::new(1.0).unwrap());
    let r_omega = fs
        .omega
        .sub(&standard::omega0().relabel(6, &RELABEL6))
        .unwrap()
        .max_abs();
    let r_phi = phi_t
        .sub(&standard::phi0().relabel(7, &RELABEL7))
        .unwrap()
        .max_abs();
    let r_star = star_t
        .sub(&standard::star_phi0().relabel(7, &RELABEL7))
        .unwrap()
        .max_abs();
    println!("identity triple omega:      {r_omega:e}");
    println!("identity triple phi:        {r_phi:e}");
    println!("identity triple star phi:   {r_star:e}");

    let ok = phi.sub(&split).unwrap().max_abs() == 0.0
        && r_omega == 0.0
        && r_phi == 0.0
        && r_star == 0.0;
    println!("{}", if ok { "OK" } else { "FAILED" });
    std::process::exit(if ok { 0 } else { 1 });
}
