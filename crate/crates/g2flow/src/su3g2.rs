//! Pointwise assembly of the SU(3)/G₂ forms of a triple `(e, a, S)` and the
//! inverse decomposition.
//!
//! The fixed 6-dimensional covector basis is ordered
//! `(a¹, a², a³, e¹, e², e³)` — three vertical slots dual to the
//! infinitesimal fiber directions `X₁*, X₂*, X₃*`, then three base slots —
//! and the 7th slot `dt` is appended last.  All sign conventions are pinned
//! by the standard-model identities: under the relabeling
//! `a^k ↔ dx^k, e^k ↔ dy^k, dt ↔ dx⁰` the assembled forms of the identity
//! triple reproduce `ω₀, ψ₀, ψ₀#, φ₀, ⋆φ₀` exactly.
//!
//! The assembled set is
//!
//! ```text
//! ω    = (det S)^{-1/2} S̃_ij a^i ∧ e^j
//! ψ    = -(det S) e^{123} + Σ_k e^k ∧ â^k
//! ψ#   = (det S)^{-1/2} a^{123} - (det S)^{1/2} Σ_k a^k ∧ ê^k
//! ½ω∧ω = -Σ_ij S_ij â^i ∧ ê^j
//! ```
//!
//! with `S̃` the adjugate and `â^i = ½ ε_{ijk} a^j ∧ a^k`.

use crate::exterior::{Form, Orientation, MAX_DIM};
use crate::linalg3::{chol_factor, det3, eps, Mat3, SymMat3};
use crate::{Error, Result};
use rand::Rng;

pub const DIM6: usize = 6;
pub const DIM7: usize = 7;
/// Index of the `dt` covector in the 7-dimensional basis.
pub const DT: usize = 6;

/// Relabeling of the standard ℝ⁶ basis `(x¹,y¹,x²,y²,x³,y³)` into
/// `(a¹,a²,a³,e¹,e²,e³)` under `a^k ↔ dx^k`, `e^k ↔ dy^k`.
pub const RELABEL6: [usize; 6] = [0, 3, 1, 4, 2, 5];
/// Relabeling of the standard ℝ⁷ basis `(x⁰,x¹,y¹,x²,y²,x³,y³)` into
/// `(a¹,a²,a³,e¹,e²,e³,dt)` under `dt ↔ dx⁰`.
pub const RELABEL7: [usize; 7] = [6, 0, 3, 1, 4, 2, 5];

/// Pointwise triple: coframe coefficients `e^i = E_ij (base slot j)`,
/// connection coefficients `a^i = A_ij (vertical slot j)`, and the
/// positive-definite symmetric `S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriplePoint {
    pub e: Mat3,
    pub a: Mat3,
    pub s: SymMat3,
}

impl TriplePoint {
    /// Identity coframe and connection over the fixed slots.
    pub fn standard(s: SymMat3) -> TriplePoint {
        TriplePoint {
            e: Mat3::identity(),
            a: Mat3::identity(),
            s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.s.is_pos_def()?;
        let det_e = det3(&self.e);
        if det_e.abs() < 1e-12 {
            return Err(Error::DegenerateCoframe { det: det_e });
        }
        Ok(())
    }

    /// The three connection 1-forms as dim-6 forms.
    pub fn a_forms(&self) -> [Form; 3] {
        std::array::from_fn(|i| {
            let mut comps = [0.0; 6];
            comps[..3].copy_from_slice(&self.a.0[i]);
            Form::one_form(DIM6, &comps)
        })
    }

    /// The three coframe 1-forms as dim-6 forms.
    pub fn e_forms(&self) -> [Form; 3] {
        std::array::from_fn(|i| {
            let mut comps = [0.0; 6];
            comps[3..].copy_from_slice(&self.e.0[i]);
            Form::one_form(DIM6, &comps)
        })
    }
}

/// The four forms of an SU(3)-structure vanishing along the fibers.
#[derive(Debug, Clone, PartialEq)]
pub struct FormSet {
    pub omega: Form,
    pub psi: Form,
    pub psi_sharp: Form,
    pub half_om_sq: Form,
}

/// Pointwise positive lapse value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lapse(f64);

impl Lapse {
    pub fn new(f: f64) -> Result<Lapse> {
        if f <= 0.0 {
            return Err(Error::PositivityViolation { min: f });
        }
        Ok(Lapse(f))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

fn hat(forms: &[Form; 3]) -> [Form; 3] {
    std::array::from_fn(|k| {
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        forms[i].wedge(&forms[j]).unwrap()
    })
}

fn triple_wedge(forms: &[Form; 3]) -> Form {
    forms[0].wedge(&forms[1]).unwrap().wedge(&forms[2]).unwrap()
}

/// Assemble the form set from arbitrary coframe 1-forms.  This is the
/// common core of [`forms_from_triple`] and of the grid-level evaluation
/// where `a^i` carries both a vertical and a horizontal part.
pub fn forms_from_coframes(a: &[Form; 3], e: &[Form; 3], s: &SymMat3) -> Result<FormSet> {
    s.is_pos_def()?;
    let det_s = s.det();
    let st = s.adjugate();
    let rh = det_s.sqrt();

    let a_hat = hat(a);
    let e_hat = hat(e);

    let mut omega = Form::zero(DIM6);
    for i in 0..3 {
        for j in 0..3 {
            let c = st.at(i, j) / rh;
            if c != 0.0 {
                omega = omega.add(&a[i].wedge(&e[j])?.scale(c))?;
            }
        }
    }

    let mut psi = triple_wedge(e).scale(-det_s);
    for k in 0..3 {
        psi = psi.add(&e[k].wedge(&a_hat[k])?)?;
    }

    let mut psi_sharp = triple_wedge(a).scale(1.0 / rh);
    for k in 0..3 {
        psi_sharp = psi_sharp.sub(&a[k].wedge(&e_hat[k])?.scale(rh))?;
    }

    let mut half_om_sq = Form::zero(DIM6);
    for i in 0..3 {
        for j in 0..3 {
            let c = -s.at(i, j);
            if c != 0.0 {
                half_om_sq = half_om_sq.add(&a_hat[i].wedge(&e_hat[j])?.scale(c))?;
            }
        }
    }

    Ok(FormSet {
        omega,
        psi,
        psi_sharp,
        half_om_sq,
    })
}

/// Forms of a pointwise triple.
pub fn forms_from_triple(t: &TriplePoint) -> Result<FormSet> {
    t.validate()?;
    forms_from_coframes(&t.a_forms(), &t.e_forms(), &t.s)
}

/// Recover `(e, S)` from `(ω, ψ)`; the vertical slots are the fixed basis
/// slots 0..3 (connection normalized to `a^i = slot i`).
///
/// `e^k` comes from the double contraction of `ψ` with the vertical basis
/// vectors, `M_ij = (det S)^{-1/2} S̃_ij` from the mixed coefficients of
/// `ω`, and then `det S = (det M)²`, `S̃ = det(M)·M`, `S = adj(S̃)/det S`.
pub fn triple_from_forms(omega: &Form, psi: &Form) -> Result<(Mat3, SymMat3)> {
    if omega.dim() != DIM6 || psi.dim() != DIM6 {
        return Err(Error::DimensionMismatch {
            left: omega.dim(),
            right: psi.dim(),
        });
    }
    // e^k = ½ ε_{ijk} ι(X_j*)(ι(X_i*) ψ)
    let mut e_mat = Mat3::ZERO;
    let mut vertical_residue = 0.0_f64;
    for k in 0..3 {
        let mut ek = Form::zero(DIM6);
        for i in 0..3 {
            for j in 0..3 {
                let s = eps(i, j, k);
                if s == 0.0 {
                    continue;
                }
                let c = psi.contract_basis(i).contract_basis(j);
                ek = ek.add(&c.scale(0.5 * s))?;
            }
        }
        for j in 0..3 {
            e_mat.0[k][j] = ek.coeff(1 << (3 + j));
            vertical_residue = vertical_residue.max(ek.coeff(1 << j).abs());
        }
    }
    let scale = e_mat.max_abs().max(f64::MIN_POSITIVE);
    if vertical_residue > 1e-9 * scale {
        return Err(Error::Precondition {
            what: "vertical component of recovered coframe",
            value: vertical_residue,
            tol: 1e-9 * scale,
        });
    }
    let det_e = det3(&e_mat);
    if det_e.abs() < 1e-12 * scale.powi(3) {
        return Err(Error::DegenerateCoframe { det: det_e });
    }

    // W_ij = coefficient of (slot i) ∧ (base slot j) in ω; M = W E⁻¹
    let mut w = Mat3::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            w.0[i][j] = omega.coeff((1 << i) | (1 << (3 + j)));
        }
    }
    let m = w * e_mat.inverse()?;
    let det_m = det3(&m);
    if det_m <= 0.0 {
        return Err(Error::OrientationViolation { det: det_m });
    }

    let st_full = m.scale(det_m);
    let defect = st_full.asym_defect();
    let tol = 1e-8 * st_full.max_abs().max(f64::MIN_POSITIVE);
    if defect > tol {
        return Err(Error::AsymmetricRecovery { defect, tol });
    }
    let st = st_full.symmetrize();
    let det_s = det_m * det_m;
    let s = st.adjugate().scale(1.0 / det_s);
    s.is_pos_def()?;
    Ok((e_mat, s))
}

/// The G₂ 3-form and its dual for a form set with lapse `f`:
/// `φ = ω ∧ f dt + ψ` and `⋆φ = -ψ# ∧ f dt + ½ω∧ω` in dimension 7.
pub fn g2_from_family(fs: &FormSet, f: Lapse) -> (Form, Form) {
    let embed = |g: &Form| g.relabel(DIM7, &[0, 1, 2, 3, 4, 5]);
    let fdt = Form::basis(DIM7, DT).scale(f.value());
    let phi = embed(&fs.omega)
        .wedge(&fdt)
        .unwrap()
        .add(&embed(&fs.psi))
        .unwrap();
    let star_phi = embed(&fs.psi_sharp)
        .wedge(&fdt)
        .unwrap()
        .scale(-1.0)
        .add(&embed(&fs.half_om_sq))
        .unwrap();
    (phi, star_phi)
}

/// Orthonormal coframe of the metric of `φ = ω ∧ f dt + ψ`, rows in the
/// fixed 7-dimensional basis: `Q^{ij} a^j`, `det(Q) Q^{ij} e^j`, `f dt`,
/// where `S = Q ᵀQ` in the Cholesky gauge.
pub fn orthonormal_coframe(t: &TriplePoint, f: Lapse) -> Result<[[f64; MAX_DIM]; MAX_DIM]> {
    orthonormal_coframe_with_q(t, &chol_factor(&t.s)?, f)
}

/// Same as [`orthonormal_coframe`] with an explicit `Q` factor (any matrix
/// with `Q ᵀQ = S`, e.g. a rotated Cholesky factor).
pub fn orthonormal_coframe_with_q(
    t: &TriplePoint,
    q: &Mat3,
    f: Lapse,
) -> Result<[[f64; MAX_DIM]; MAX_DIM]> {
    let q_inv = q.inverse()?;
    let det_q = det3(q);
    let vert = q_inv * t.a;
    let base = (q_inv * t.e).scale(det_q);
    let mut u = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..3 {
        for j in 0..3 {
            u[i][j] = vert.0[i][j];
            u[3 + i][3 + j] = base.0[i][j];
        }
    }
    u[DT][DT] = f.value();
    Ok(u)
}

fn invert7(m: &[[f64; MAX_DIM]; MAX_DIM]) -> Result<[[f64; MAX_DIM]; MAX_DIM]> {
    let n = MAX_DIM;
    let mut a = *m;
    let mut inv = [[0.0; MAX_DIM]; MAX_DIM];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::DegenerateCoframe { det: 0.0 });
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..n {
                a[row][j] -= factor * a[col][j];
                inv[row][j] -= factor * inv[col][j];
            }
        }
    }
    Ok(inv)
}

fn det7(m: &[[f64; MAX_DIM]; MAX_DIM]) -> f64 {
    let n = MAX_DIM;
    let mut a = *m;
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))
            .unwrap();
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(col, pivot);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for j in col..n {
                a[row][j] -= f * a[col][j];
            }
        }
    }
    det
}

/// Hodge star of a dim-7 form with respect to the metric whose orthonormal
/// coframe (rows in the fixed basis) is `u`.  The orientation is the one
/// fixed by the standard-model identities: for the identity coframe the
/// volume form is `-(a¹∧a²∧a³∧e¹∧e²∧e³∧dt)`.
pub fn star_via_coframe(form: &Form, u: &[[f64; MAX_DIM]; MAX_DIM]) -> Result<Form> {
    let u_inv = invert7(u)?;
    let in_u = form.substitute(&u_inv);
    let ori = if det7(u) > 0.0 {
        Orientation::Negative
    } else {
        Orientation::Positive
    };
    Ok(in_u.hodge_star(ori).substitute(u))
}

/// Reassemble `φ` and `⋆φ` from the trivialization data of three orthogonal
/// directions annihilating `φ` and return the maximum coefficient residual.
///
/// With `Z = -(⋆φ)(V₁,V₂,V₃,·)` and `E^i = ½ ε_{ijk} ι(V_k)(ι(V_j) φ)`,
///
/// ```text
/// φ  = Σ_k V^k ∧ E^k ∧ Z - (E^{123} - Σ_k E^k ∧ hat(V)^k)
/// ⋆φ = -(V^{123} - Σ_k V^k ∧ hat(E)^k) ∧ Z - Σ_k hat(V)^k ∧ hat(E)^k
/// ```
///
/// where `V^k` are the metric duals of the `V_k` (supplied by the caller).
pub fn normal_form_check(
    phi: &Form,
    star_phi: &Form,
    v: &[[f64; MAX_DIM]; 3],
    v_dual: &[Form; 3],
) -> Result<f64> {
    let val = phi.evaluate(&[&v[0][..DIM7], &v[1][..DIM7], &v[2][..DIM7]]);
    if val.abs() > 1e-12 {
        return Err(Error::Precondition {
            what: "phi(V1,V2,V3)",
            value: val.abs(),
            tol: 1e-12,
        });
    }

    let mut e_forms: [Form; 3] = std::array::from_fn(|_| Form::zero(DIM7));
    for (i, ei) in e_forms.iter_mut().enumerate() {
        for j in 0..3 {
            for k in 0..3 {
                let s = eps(i, j, k);
                if s == 0.0 {
                    continue;
                }
                let c = phi
                    .contract_vector(&v[j][..DIM7])
                    .contract_vector(&v[k][..DIM7]);
                *ei = ei.add(&c.scale(0.5 * s))?;
            }
        }
    }
    let z = star_phi
        .contract_vector(&v[0][..DIM7])
        .contract_vector(&v[1][..DIM7])
        .contract_vector(&v[2][..DIM7])
        .scale(-1.0);

    let v_hat = hat7(v_dual);
    let e_hat = hat7(&e_forms);

    let mut phi_rec = Form::zero(DIM7);
    for k in 0..3 {
        phi_rec = phi_rec.add(&v_dual[k].wedge(&e_forms[k])?.wedge(&z)?)?;
    }
    phi_rec = phi_rec.sub(&triple_wedge7(&e_forms))?;
    for k in 0..3 {
        phi_rec = phi_rec.add(&e_forms[k].wedge(&v_hat[k])?)?;
    }

    let mut bracket = triple_wedge7(v_dual);
    for k in 0..3 {
        bracket = bracket.sub(&v_dual[k].wedge(&e_hat[k])?)?;
    }
    let mut star_rec = bracket.wedge(&z)?.scale(-1.0);
    for k in 0..3 {
        star_rec = star_rec.sub(&v_hat[k].wedge(&e_hat[k])?)?;
    }

    let r1 = phi.sub(&phi_rec)?.max_abs();
    let r2 = star_phi.sub(&star_rec)?.max_abs();
    Ok(r1.max(r2))
}

fn hat7(forms: &[Form; 3]) -> [Form; 3] {
    std::array::from_fn(|k| {
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        forms[i].wedge(&forms[j]).unwrap()
    })
}

fn triple_wedge7(forms: &[Form; 3]) -> Form {
    forms[0].wedge(&forms[1]).unwrap().wedge(&forms[2]).unwrap()
}

/// Random well-conditioned triple (identity connection normalization).
pub fn random_triple(rng: &mut impl Rng) -> TriplePoint {
    let mut e = Mat3::identity();
    loop {
        for i in 0..3 {
            for j in 0..3 {
                e.0[i][j] = if i == j { 1.0 } else { 0.0 };
                e.0[i][j] += rng.gen_range(-0.3..0.3);
            }
        }
        if det3(&e).abs() > 0.3 {
            break;
        }
    }
    let mut r = Mat3::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            r.0[i][j] = rng.gen_range(-0.7..0.7);
        }
    }
    let mut s = (r.transpose() * r).symmetrize();
    for i in 0..3 {
        s.set(i, i, s.at(i, i) + rng.gen_range(0.5..1.5));
    }
    TriplePoint {
        e,
        a: Mat3::identity(),
        s,
    }
}

/// Random rotation from three Givens factors; determinant +1.
pub fn random_rotation(rng: &mut impl Rng) -> Mat3 {
    let mut m = Mat3::identity();
    for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
        let th = rng.gen_range(0.0..std::f64::consts::TAU);
        let (s, c) = th.sin_cos();
        let mut g = Mat3::identity();
        g.0[p][p] = c;
        g.0[q][q] = c;
        g.0[p][q] = -s;
        g.0[q][p] = s;
        m = m * g;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::standard;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn standard_triple_reproduces_model_forms() {
        let t = TriplePoint::standard(SymMat3::identity());
        let fs = forms_from_triple(&t).unwrap();
        let om = standard::omega0().relabel(DIM6, &RELABEL6);
        let ps = standard::psi0().relabel(DIM6, &RELABEL6);
        let pss = standard::psi0_sharp().relabel(DIM6, &RELABEL6);
        assert_eq!(fs.omega.sub(&om).unwrap().max_abs(), 0.0);
        assert_eq!(fs.psi.sub(&ps).unwrap().max_abs(), 0.0);
        assert_eq!(fs.psi_sharp.sub(&pss).unwrap().max_abs(), 0.0);

        let (phi, star_phi) = g2_from_family(&fs, Lapse::new(1.0).unwrap());
        let phi0 = standard::phi0().relabel(DIM7, &RELABEL7);
        let star_phi0 = standard::star_phi0().relabel(DIM7, &RELABEL7);
        assert_eq!(phi.sub(&phi0).unwrap().max_abs(), 0.0);
        assert_eq!(star_phi.sub(&star_phi0).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn diag_s_example() {
        // S = diag(4,1,1): det S = 4, S̃ = diag(1,4,4),
        // ω = ½ a¹e¹ + 2 a²e² + 2 a³e³
        let t = TriplePoint::standard(SymMat3::diag(4.0, 1.0, 1.0));
        let fs = forms_from_triple(&t).unwrap();
        assert_eq!(fs.omega.coeff((1 << 0) | (1 << 3)), 0.5);
        assert_eq!(fs.omega.coeff((1 << 1) | (1 << 4)), 2.0);
        assert_eq!(fs.omega.coeff((1 << 2) | (1 << 5)), 2.0);
    }

    #[test]
    fn half_om_sq_consistency_and_compatibility() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..30 {
            let t = random_triple(&mut rng);
            let fs = forms_from_triple(&t).unwrap();
            let direct = fs.omega.wedge(&fs.omega).unwrap().scale(0.5);
            let scale = direct.max_abs();
            assert!(fs.half_om_sq.sub(&direct).unwrap().max_abs() <= 1e-13 * scale);
            // Lagrangian compatibility
            assert!(fs.omega.wedge(&fs.psi).unwrap().max_abs() <= 1e-13 * scale);
            assert!(fs.omega.wedge(&fs.psi_sharp).unwrap().max_abs() <= 1e-13 * scale);
            // ψ ∧ ψ# = -(2/3) ω∧ω∧ω (verified constant of the normalization)
            let lhs = fs.psi.wedge(&fs.psi_sharp).unwrap();
            let rhs = fs.omega.wedge(&fs.omega).unwrap().wedge(&fs.omega).unwrap();
            let diff = lhs.sub(&rhs.scale(-2.0 / 3.0)).unwrap().max_abs();
            assert!(diff <= 1e-12 * lhs.max_abs(), "diff = {diff}");
        }
    }

    #[test]
    fn roundtrip_identity_and_diag() {
        let t = TriplePoint::standard(SymMat3::identity());
        let fs = forms_from_triple(&t).unwrap();
        let (e, s) = triple_from_forms(&fs.omega, &fs.psi).unwrap();
        assert!((e - t.e).max_abs() < 1e-14);
        assert!((s.to_mat3() - Mat3::identity()).max_abs() < 1e-13);

        let t = TriplePoint::standard(SymMat3::diag(4.0, 1.0, 1.0));
        let fs = forms_from_triple(&t).unwrap();
        let (_, s) = triple_from_forms(&fs.omega, &fs.psi).unwrap();
        assert!((s.to_mat3() - SymMat3::diag(4.0, 1.0, 1.0).to_mat3()).max_abs() < 1e-13);
    }

    #[test]
    fn roundtrip_random() {
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..200 {
            let t = random_triple(&mut rng);
            let fs = forms_from_triple(&t).unwrap();
            let (e, s) = triple_from_forms(&fs.omega, &fs.psi).unwrap();
            let scale = t.e.max_abs().max(t.s.max_abs());
            assert!((e - t.e).max_abs() < 1e-12 * scale);
            assert!((s.to_mat3() - t.s.to_mat3()).max_abs() < 1e-12 * scale);
            // forms_from_triple ∘ triple_from_forms = identity on form sets
            let fs2 = forms_from_triple(&TriplePoint {
                e,
                a: Mat3::identity(),
                s,
            })
            .unwrap();
            assert!(fs2.omega.sub(&fs.omega).unwrap().max_abs() < 1e-12 * fs.omega.max_abs());
            assert!(fs2.psi.sub(&fs.psi).unwrap().max_abs() < 1e-12 * fs.psi.max_abs());
        }
    }

    #[test]
    fn flipped_psi_is_rejected() {
        let t = TriplePoint::standard(SymMat3::identity());
        let fs = forms_from_triple(&t).unwrap();
        let err = triple_from_forms(&fs.omega, &fs.psi.scale(-1.0)).unwrap_err();
        assert!(matches!(err, Error::OrientationViolation { .. }));
    }

    #[test]
    fn lapse_scales_dt_part_only() {
        let t = TriplePoint::standard(SymMat3::identity());
        let fs = forms_from_triple(&t).unwrap();
        let (phi1, _) = g2_from_family(&fs, Lapse::new(1.0).unwrap());
        let (phi2, _) = g2_from_family(&fs, Lapse::new(2.0).unwrap());
        for (mask, c) in phi2.terms() {
            if mask & (1 << DT) != 0 {
                assert_eq!(c, 2.0 * phi1.coeff(mask));
            } else {
                assert_eq!(c, phi1.coeff(mask));
            }
        }
        assert!(Lapse::new(0.0).is_err());
    }

    #[test]
    fn g2_normalization_and_metric_star() {
        let mut rng = StdRng::seed_from_u64(13);
        for k in 0..20 {
            let t = random_triple(&mut rng);
            let f = Lapse::new(t.s.det().sqrt()).unwrap();
            let fs = forms_from_triple(&t).unwrap();
            let (phi, star_phi) = g2_from_family(&fs, f);

            // φ ∧ ⋆φ = 7 vol; the top basis coefficient of the metric
            // volume is -f √det S |det E| (identity coframe: -(a∧…∧dt))
            let top = phi.wedge(&star_phi).unwrap().coeff((1u32 << DIM7) - 1);
            let expect = -7.0 * f.value() * t.s.det().sqrt() * det3(&t.e).abs();
            assert!(
                (top - expect).abs() < 1e-10 * expect.abs(),
                "top = {top}, expect {expect}"
            );

            // the metric star built from the orthonormal coframe reproduces
            // the algebraic ⋆φ, also with a rotated Q-gauge
            let q = chol_factor(&t.s).unwrap();
            let q_used = if k % 2 == 0 {
                q
            } else {
                q * random_rotation(&mut rng)
            };
            let u = orthonormal_coframe_with_q(&t, &q_used, f).unwrap();
            let starred = star_via_coframe(&phi, &u).unwrap();
            let scale = star_phi.max_abs();
            assert!(
                starred.sub(&star_phi).unwrap().max_abs() < 1e-11 * scale,
                "metric star mismatch: {}",
                starred.sub(&star_phi).unwrap().max_abs()
            );
        }
    }

    #[test]
    fn normal_form_standard_and_cyclic() {
        // φ₀ with V = coordinate x-directions; residual exactly 0
        let phi0 = standard::phi0().relabel(DIM7, &RELABEL7);
        let star0 = standard::star_phi0().relabel(DIM7, &RELABEL7);
        // x^k direction = vertical slot k (a ↔ dx); dual covector a^k
        let mut v = [[0.0; MAX_DIM]; 3];
        let mut vd: [Form; 3] = std::array::from_fn(|_| Form::zero(DIM7));
        for k in 0..3 {
            v[k][k] = 1.0;
            vd[k] = Form::basis(DIM7, k);
        }
        let r = normal_form_check(&phi0, &star0, &v, &vd).unwrap();
        assert_eq!(r, 0.0);
        // cyclic relabel of the three directions
        let v2 = [v[1], v[2], v[0]];
        let vd2 = [vd[1].clone(), vd[2].clone(), vd[0].clone()];
        let r = normal_form_check(&phi0, &star0, &v2, &vd2).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn normal_form_random_vertical_frames() {
        let mut rng = StdRng::seed_from_u64(14);
        for k in 0..50 {
            let t = random_triple(&mut rng);
            let f = Lapse::new(t.s.det().sqrt()).unwrap();
            let fs = forms_from_triple(&t).unwrap();
            let (phi, star_phi) = g2_from_family(&fs, f);
            let q0 = chol_factor(&t.s).unwrap();
            let q = if k % 2 == 0 {
                q0
            } else {
                q0 * random_rotation(&mut rng)
            };
            // V_k = Q_{jk} X_j*, dual V^k = Q^{kj} a^j
            let q_inv = q.inverse().unwrap();
            let mut v = [[0.0; MAX_DIM]; 3];
            let mut vd: [Form; 3] = std::array::from_fn(|_| Form::zero(DIM7));
            for kk in 0..3 {
                for j in 0..3 {
                    v[kk][j] = q.0[j][kk];
                }
                let mut comps = [0.0; DIM7];
                comps[..3].copy_from_slice(&q_inv.0[kk]);
                vd[kk] = Form::one_form(DIM7, &comps);
            }
            let r = normal_form_check(&phi, &star_phi, &v, &vd).unwrap();
            assert!(r <= 1e-11 * phi.max_abs().max(1.0), "residual {r}");
        }
    }

    #[test]
    fn normal_form_precondition() {
        let phi0 = standard::phi0().relabel(DIM7, &RELABEL7);
        let star0 = standard::star_phi0().relabel(DIM7, &RELABEL7);
        // e-directions: φ₀(e¹,e²,e³) = -det S = -1 ≠ 0
        let mut v = [[0.0; MAX_DIM]; 3];
        let mut vd: [Form; 3] = std::array::from_fn(|_| Form::zero(DIM7));
        for k in 0..3 {
            v[k][3 + k] = 1.0;
            vd[k] = Form::basis(DIM7, 3 + k);
        }
        assert!(normal_form_check(&phi0, &star0, &v, &vd).is_err());
    }

    #[test]
    fn recovered_s_is_gauge_independent() {
        // S is recovered from the forms alone, thus independent of which
        // orthonormal vertical frame (Q vs Q·R) one imagines used to build
        // them; verify recovery against the generating S
        let mut rng = StdRng::seed_from_u64(15);
        for _ in 0..20 {
            let t = random_triple(&mut rng);
            let fs = forms_from_triple(&t).unwrap();
            let (_, s1) = triple_from_forms(&fs.omega, &fs.psi).unwrap();
            assert!((s1.to_mat3() - t.s.to_mat3()).max_abs() < 1e-12 * t.s.max_abs().max(1.0));
        }
    }
}
