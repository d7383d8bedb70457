//! The SO(3)-fiber constrained system: covariant calculus for a coframe
//! field with a connection, the Levi-Civita solve, the flow right-hand
//! side, torsion coefficient groups, and the two homogeneous reductions
//! (left-invariant SU(2) matrices and the spherically symmetric radial
//! system with its exact flat solutions).
//!
//! Structure equations in the `[Y_i,Y_j] = ε_{ijk}Y_k` basis:
//!
//! ```text
//! d_H e = de + [a∧e] = T_ij ê^j Y_i
//! d_H a = da + ½[a∧a] = Ω_ij ê^j Y_i
//! dA_ij = A_{ij;α} e^α + (ε_{αiβ}A_{βj} + ε_{αjβ}A_{βi}) a^α
//! ```
//!
//! Constraints: `d_He = 0`, `S_{iα;α} = 0`.  Motion (canonical lapse):
//! `∂e^i/∂t = S̃_ij e^j`, `∂S/∂t = -tr(S̃)S + 2(det S)I - Ω`, and the
//! induced connection velocity `∂a^i/∂t = -ε_{iαβ} p_{jα;β} e^j`, `p = S̃`.

use crate::grids::{
    partial_comp, radial_partial, radial_second, ConnField3, Field3, Mat3Field3, PeriodicGrid3,
    RadialGrid1, ScalarField3, SymMatField3,
};
use crate::integrate::{FlowSystem, GuardTrip};
use crate::linalg3::{adjugate, commutator, det3, eps, eps_contract2, Mat3, SymMat3};
use crate::{Error, Result};

/// State of the SO(3) system on the periodic grid (local test harness; the
/// fields are not required to assemble into global bundle data).
#[derive(Debug, Clone, PartialEq)]
pub struct So3State {
    pub grid: PeriodicGrid3,
    pub e: Mat3Field3,
    pub a: ConnField3,
    pub s: SymMatField3,
    pub t: f64,
}

/// Time derivative of the SO(3) state.
#[derive(Debug, Clone)]
pub struct So3Deriv {
    pub de: Mat3Field3,
    pub da: ConnField3,
    pub ds: Mat3Field3,
}

/// Lapse choice (canonical `f = (det S)^{1/2}` makes the prefactor 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum So3Lapse {
    Canonical,
}

impl So3State {
    pub fn flat(grid: PeriodicGrid3) -> So3State {
        So3State {
            grid,
            e: Mat3Field3::constant_mat(grid, &Mat3::identity()),
            a: ConnField3::zeros(grid),
            s: SymMatField3::constant_sym(grid, &SymMat3::identity()),
            t: 0.0,
        }
    }

    pub fn dets_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for site in 0..self.grid.sites() {
            let d = self.s.sym_at(site).det();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }

    pub fn stilde_field(&self) -> SymMatField3 {
        let mut out = SymMatField3::zeros(self.grid);
        for site in 0..self.grid.sites() {
            out.set_sym(site, &self.s.sym_at(site).adjugate());
        }
        out
    }

    /// Connection coefficients in the coframe, `a^i = B_ij e^j`, per site.
    pub fn b_at(&self, site: usize) -> Result<Mat3> {
        let e_inv = self.e.mat_at(site).inverse()?;
        Ok(self.a.mat_at(site) * e_inv)
    }

    /// Max over sites of `‖[S, B]‖`, the invariant-data spelling of the
    /// covariant divergence constraint.
    pub fn comm_sb(&self) -> Result<f64> {
        let mut worst = 0.0_f64;
        for site in 0..self.grid.sites() {
            let b = self.b_at(site)?;
            let s = self.s.sym_at(site).to_mat3();
            worst = worst.max(commutator(&s, &b).max_abs());
        }
        Ok(worst)
    }
}

/// Hat components of an so(3)-valued 2-form given by `rows`:
/// `w^i = rows_i` with `(w^i)_m` the `hat(dx)^m` coefficient; re-expressed
/// in the `ê^j` basis through `ê^j = adj(E)_{mj} hat(dx)^m`.
fn hat_to_frame(rows: &Mat3Field3, e: &Mat3Field3) -> Result<Mat3Field3> {
    let grid = rows.grid();
    let mut out = Mat3Field3::zeros(grid);
    for site in 0..grid.sites() {
        let em = e.mat_at(site);
        let det_e = det3(&em);
        if det_e.abs() < 1e-12 {
            return Err(Error::DegenerateCoframe { det: det_e });
        }
        let m = rows.mat_at(site) * em.transpose().scale(1.0 / det_e);
        out.set_mat(site, &m);
    }
    Ok(out)
}

/// `de^i` in hat(dx) components: `(de^i)_m = ε_{mcd} ∂_c E_{id}`.
fn curl_rows(fld: &Mat3Field3) -> Result<Mat3Field3> {
    let grid = fld.grid();
    let mut out = Mat3Field3::zeros(grid);
    for i in 0..3 {
        for m in 0..3 {
            let (c, d) = ((m + 1) % 3, (m + 2) % 3);
            let dcd = partial_comp(fld, 3 * i + d, c, 2)?;
            let ddc = partial_comp(fld, 3 * i + c, d, 2)?;
            for site in 0..grid.sites() {
                out.set(3 * i + m, site, dcd.at(0, site) - ddc.at(0, site));
            }
        }
    }
    Ok(out)
}

/// Torsion and curvature coefficients: `d_He = T_ij ê^j Y_i`,
/// `d_Ha = Ω_ij ê^j Y_i`.
pub fn torsion_curvature(st: &So3State) -> Result<(Mat3Field3, Mat3Field3)> {
    let grid = st.grid;
    let mut dhe = curl_rows(&st.e)?;
    let mut dha = curl_rows(&st.a)?;
    for site in 0..grid.sites() {
        let am = st.a.mat_at(site);
        let em = st.e.mat_at(site);
        // hat(dx)^m components of the brackets:
        // [a∧e]^i_m = ε_{ijk} ε_{cdm} A_jc E_kd, ½[a∧a]^i_m likewise
        let mut bracket_ae = Mat3::ZERO;
        let mut bracket_aa = Mat3::ZERO;
        for i in 0..3 {
            for m in 0..3 {
                let mut vae = 0.0;
                let mut vaa = 0.0;
                for j in 0..3 {
                    for k in 0..3 {
                        let e1 = eps(i, j, k);
                        if e1 == 0.0 {
                            continue;
                        }
                        for c in 0..3 {
                            for d in 0..3 {
                                let e2 = eps(c, d, m);
                                if e2 == 0.0 {
                                    continue;
                                }
                                vae += e1 * e2 * am.0[j][c] * em.0[k][d];
                                vaa += e1 * e2 * am.0[j][c] * am.0[k][d];
                            }
                        }
                    }
                }
                bracket_ae.0[i][m] = vae;
                bracket_aa.0[i][m] = 0.5 * vaa;
            }
        }
        let de = dhe.mat_at(site) + bracket_ae;
        let da = dha.mat_at(site) + bracket_aa;
        dhe.set_mat(site, &de);
        dha.set_mat(site, &da);
    }
    let t = hat_to_frame(&dhe, &st.e)?;
    let omega = hat_to_frame(&dha, &st.e)?;
    Ok((t, omega))
}

/// Covariant derivative coefficients `A_{ij;k}` of a symmetric field:
/// 18 components, index `6·k + sym(i,j)`.
pub type CovDerivSym = Field3<18>;

const SYM_IDX: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];

/// Solve `dA_ij = A_{ij;α} e^α + (ε_{αiβ}A_{βj} + ε_{αjβ}A_{βi}) a^α` for
/// the frame coefficients `A_{ij;α}`.
pub fn covariant_d_sym(a_field: &SymMatField3, st: &So3State) -> Result<CovDerivSym> {
    let grid = st.grid;
    let mut partials: Vec<ScalarField3> = Vec::with_capacity(18);
    for comp in 0..6 {
        for c in 0..3 {
            partials.push(partial_comp(a_field, comp, c, 2)?);
        }
    }
    let mut out = CovDerivSym::zeros(grid);
    for site in 0..grid.sites() {
        let e_inv = st.e.mat_at(site).inverse()?;
        let conn = st.a.mat_at(site);
        let av = a_field.sym_at(site);
        for i in 0..3 {
            for j in i..3 {
                let comp = SYM_IDX[i][j];
                // rhs_c = ∂_c A_ij - bracket_α a^α_c
                let mut rhs = [0.0_f64; 3];
                for (c, r) in rhs.iter_mut().enumerate() {
                    *r = partials[comp * 3 + c].at(0, site);
                    for al in 0..3 {
                        let mut br = 0.0;
                        for be in 0..3 {
                            br += eps(al, i, be) * av.at(be, j) + eps(al, j, be) * av.at(be, i);
                        }
                        *r -= br * conn.0[al][c];
                    }
                }
                for al in 0..3 {
                    let mut v = 0.0;
                    for (c, r) in rhs.iter().enumerate() {
                        v += r * e_inv.0[c][al];
                    }
                    out.set(6 * al + comp, site, v);
                }
            }
        }
    }
    Ok(out)
}

/// Covariant row divergence `S_{iα;α}`.
pub fn covariant_div(s: &SymMatField3, st: &So3State) -> Result<crate::grids::VecField3> {
    let cov = covariant_d_sym(s, st)?;
    let grid = st.grid;
    let mut out = crate::grids::VecField3::zeros(grid);
    for site in 0..grid.sites() {
        for i in 0..3 {
            let mut v = 0.0;
            for al in 0..3 {
                v += cov.at(6 * al + SYM_IDX[i][al], site);
            }
            out.set(i, site, v);
        }
    }
    Ok(out)
}

/// The unique connection with `d_He = 0` for the given coframe field.
///
/// With `de^i = t_ip ê^p` the solution of
/// `t_ip = -(tr A) δ_ip + A_pi` is `A = tᵀ - ½ tr(t) I`, and
/// `a^j = A_jm e^m`.
pub fn levi_civita(e: &Mat3Field3) -> Result<ConnField3> {
    let grid = e.grid();
    let de_hat = curl_rows(e)?;
    let t = hat_to_frame(&de_hat, e)?;
    let mut out = ConnField3::zeros(grid);
    for site in 0..grid.sites() {
        let tm = t.mat_at(site);
        let a_coef = tm.transpose() - Mat3::identity().scale(0.5 * tm.trace());
        let em = e.mat_at(site);
        out.set_mat(site, &(a_coef * em));
    }
    Ok(out)
}

/// Constraint residuals `(‖T‖, ‖S_{iα;α}‖)`.
pub fn constraints_so3(st: &So3State) -> Result<(f64, f64)> {
    let (t, _) = torsion_curvature(st)?;
    let div = covariant_div(&st.s, st)?;
    Ok((t.max_abs(), div.max_abs()))
}

/// `dS/dt` from the algebraic part of the motion with a supplied curvature:
/// `-(tr(S̃) S - 2 (det S) I + Ω)`.
pub fn ds_from_omega(s: &SymMat3, omega: &Mat3) -> Mat3 {
    let st = s.adjugate();
    let sm = s.to_mat3();
    -(sm.scale(st.trace()) - Mat3::identity().scale(2.0 * s.det()) + *omega)
}

/// Flow right-hand side (canonical lapse): `∂e^i/∂t = S̃_ij e^j`,
/// `∂S/∂t = -tr(S̃)S + 2(det S)I - Ω`, `∂a^i/∂t = -ε_{iαβ} S̃_{jα;β} e^j`.
pub fn rhs_so3(st: &So3State, _lapse: So3Lapse) -> Result<So3Deriv> {
    let grid = st.grid;
    for site in 0..grid.sites() {
        let d = st.s.sym_at(site).det();
        if d <= 0.0 {
            return Err(Error::NotPositiveDefinite { minor: 3, value: d });
        }
    }
    let stilde = st.stilde_field();
    let (_, omega) = torsion_curvature(st)?;
    let cov = covariant_d_sym(&stilde, st)?;

    let mut de = Mat3Field3::zeros(grid);
    let mut da = ConnField3::zeros(grid);
    let mut ds = Mat3Field3::zeros(grid);
    for site in 0..grid.sites() {
        let stv = stilde.sym_at(site);
        let em = st.e.mat_at(site);
        de.set_mat(site, &(stv.to_mat3() * em));
        ds.set_mat(
            site,
            &ds_from_omega(&st.s.sym_at(site), &omega.mat_at(site)),
        );
        let mut q = Mat3::ZERO; // q_ij with ∂a^i/∂t = q_ij e^j
        for i in 0..3 {
            for j in 0..3 {
                let mut v = 0.0;
                for al in 0..3 {
                    for be in 0..3 {
                        let s = eps(i, al, be);
                        if s != 0.0 {
                            v -= s * cov.at(6 * be + SYM_IDX[j][al], site);
                        }
                    }
                }
                q.0[i][j] = v;
            }
        }
        da.set_mat(site, &(q * em));
    }
    Ok(So3Deriv { de, da, ds })
}

/// Max norms of the torsion coefficient groups of the SO(3) structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct So3TorsionGroups {
    /// Max over all `dω` groups (including the never-vanishing
    /// `(det S)^{-1/2} S̃ â`-term).
    pub domega: f64,
    /// The `(det S)^{-1/2} S̃ â^i e^j` group alone.
    pub domega_vert: f64,
    pub domsq: f64,
    pub dpsi: f64,
    pub dpsisharp: f64,
}

/// Torsion coefficient groups (canonical lapse, prefactor 1):
///
/// ```text
/// dω:     ε_{jαβ}(M_{iα})_{;β} - M_{iα} T_{αj};  M_ij Ω_ij;  M_ij (â^i e^j term)
/// d½ω∧ω:  S_{iα;α} + ε_{αβγ} S_{iα} T_{βγ}
/// dψ:     T_ij;  ε_{iαβ} Ω_{αβ}
/// dψ#:    ((det S)^{1/2})_{;i} + (det S)^{1/2} ε_{iαβ}T_{αβ};
///         M Ω - (det S)^{1/2} I (the â^i ê^j group);  ((det S)^{-1/2})_{;i}
/// ```
///
/// with `M = (det S)^{-1/2} S̃`.
pub fn torsion_coeffs_so3(st: &So3State) -> Result<So3TorsionGroups> {
    let grid = st.grid;
    let stilde = st.stilde_field();
    let (t, omega) = torsion_curvature(st)?;

    let mut mfield = SymMatField3::zeros(grid);
    let mut dets = ScalarField3::zeros(grid);
    for site in 0..grid.sites() {
        let d = st.s.sym_at(site).det();
        dets.set(0, site, d);
        mfield.set_sym(site, &stilde.sym_at(site).scale(1.0 / d.sqrt()));
    }
    let cov_m = covariant_d_sym(&mfield, st)?;
    let div = covariant_div(&st.s, st)?;

    // scalar frame derivatives of (det S)^{±1/2}
    let mut root = ScalarField3::zeros(grid);
    let mut inv_root = ScalarField3::zeros(grid);
    for site in 0..grid.sites() {
        root.set(0, site, dets.at(0, site).sqrt());
        inv_root.set(0, site, 1.0 / dets.at(0, site).sqrt());
    }
    let frame_grad = |f: &ScalarField3| -> Result<crate::grids::VecField3> {
        let d: [ScalarField3; 3] =
            std::array::from_fn(|c| partial_comp(f, 0, c, 2).expect("axis in range"));
        let mut out = crate::grids::VecField3::zeros(grid);
        for site in 0..grid.sites() {
            let e_inv = st.e.mat_at(site).inverse()?;
            for k in 0..3 {
                let mut v = 0.0;
                for c in 0..3 {
                    v += d[c].at(0, site) * e_inv.0[c][k];
                }
                out.set(k, site, v);
            }
        }
        Ok(out)
    };
    let d_root = frame_grad(&root)?;
    let d_inv_root = frame_grad(&inv_root)?;

    let mut domega = 0.0_f64;
    let mut domega_vert = 0.0_f64;
    let mut domsq = 0.0_f64;
    let mut dpsi = 0.0_f64;
    let mut dpsisharp = 0.0_f64;
    for site in 0..grid.sites() {
        let tm = t.mat_at(site);
        let om = omega.mat_at(site);
        let mv = mfield.sym_at(site);
        let sv = st.s.sym_at(site);
        let rh = root.at(0, site);

        // dω
        for i in 0..3 {
            for j in 0..3 {
                let mut v = 0.0;
                for al in 0..3 {
                    for be in 0..3 {
                        let s = eps(j, al, be);
                        if s != 0.0 {
                            v += s * cov_m.at(6 * be + SYM_IDX[i][al], site);
                        }
                    }
                }
                for al in 0..3 {
                    v -= mv.at(i, al) * tm.0[al][j];
                }
                domega = domega.max(v.abs());
                domega_vert = domega_vert.max(mv.at(i, j).abs());
            }
        }
        let mut tr = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                tr += mv.at(i, j) * om.0[i][j];
            }
        }
        domega = domega.max(tr.abs()).max(domega_vert);

        // d(½ω∧ω)
        for i in 0..3 {
            let mut v = div.at(i, site);
            for al in 0..3 {
                for be in 0..3 {
                    for ga in 0..3 {
                        let s = eps(al, be, ga);
                        if s != 0.0 {
                            v += s * sv.at(i, al) * tm.0[be][ga];
                        }
                    }
                }
            }
            domsq = domsq.max(v.abs());
        }

        // dψ
        dpsi = dpsi.max(tm.max_abs());
        for i in 0..3 {
            let mut v = 0.0;
            for al in 0..3 {
                for be in 0..3 {
                    v += eps(i, al, be) * om.0[al][be];
                }
            }
            dpsi = dpsi.max(v.abs());
        }

        // dψ#
        for i in 0..3 {
            let mut v = d_root.at(i, site);
            for al in 0..3 {
                for be in 0..3 {
                    v += rh * eps(i, al, be) * tm.0[al][be];
                }
            }
            dpsisharp = dpsisharp.max(v.abs()).max(d_inv_root.at(i, site).abs());
        }
        let mut homog = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                homog.0[i][j] = {
                    let mut v = 0.0;
                    for al in 0..3 {
                        v += mv.at(i, al) * om.0[al][j];
                    }
                    v
                };
            }
            homog.0[i][i] -= rh;
        }
        dpsisharp = dpsisharp.max(homog.max_abs());
    }
    Ok(So3TorsionGroups {
        domega,
        domega_vert,
        domsq,
        dpsi,
        dpsisharp,
    })
}

/// Covariant version of the commutator identity residual:
/// `‖C S - S Cᵀ - (det S)^{-1/2} S D S‖` with semicolon derivatives,
/// `C_ij = ε_{iαβ} (M_{jα})_{;β}`, `D_ij = ε_{αij} S_{αβ;β}`.
pub fn commutator_residual_semicolon(st: &So3State) -> Result<f64> {
    let grid = st.grid;
    let mut mfield = SymMatField3::zeros(grid);
    for site in 0..grid.sites() {
        let sv = st.s.sym_at(site);
        mfield.set_sym(site, &sv.adjugate().scale(1.0 / sv.det().sqrt()));
    }
    let cov_m = covariant_d_sym(&mfield, st)?;
    let div = covariant_div(&st.s, st)?;
    let mut worst = 0.0_f64;
    for site in 0..grid.sites() {
        let mut c = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                let mut v = 0.0;
                for al in 0..3 {
                    for be in 0..3 {
                        let s = eps(i, al, be);
                        if s != 0.0 {
                            v += s * cov_m.at(6 * be + SYM_IDX[j][al], site);
                        }
                    }
                }
                c.0[i][j] = v;
            }
        }
        let mut d = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                let mut v = 0.0;
                for al in 0..3 {
                    v += eps(al, i, j) * div.at(al, site);
                }
                d.0[i][j] = v;
            }
        }
        let sv = st.s.sym_at(site).to_mat3();
        let lhs = c * sv - sv * c.transpose();
        let rhs = (sv * d * sv).scale(1.0 / st.s.sym_at(site).det().sqrt());
        worst = worst.max((lhs - rhs).max_abs());
    }
    Ok(worst)
}

/// The SO(3) flow as an integrable system.
pub struct So3System {
    pub dets_guard: f64,
}

impl Default for So3System {
    fn default() -> Self {
        So3System { dets_guard: 1e-8 }
    }
}

impl FlowSystem for So3System {
    type State = So3State;
    type Deriv = So3Deriv;

    fn rhs(&self, state: &So3State) -> Result<So3Deriv> {
        rhs_so3(state, So3Lapse::Canonical)
    }

    fn combine(&self, state: &So3State, ks: [&So3Deriv; 4], dt: f64) -> Result<(So3State, f64)> {
        let w = [dt / 6.0, dt / 3.0, dt / 3.0, dt / 6.0];
        let mut e = state.e.clone();
        let mut a = state.a.clone();
        for (i, k) in ks.iter().enumerate() {
            e.axpy(w[i], &k.de);
            a.axpy(w[i], &k.da);
        }
        let contributions: Vec<(f64, &Mat3Field3)> =
            ks.iter().enumerate().map(|(i, k)| (w[i], &k.ds)).collect();
        let (s, defect) = super::torus_flow::accumulate_sym_field(&state.s, &contributions);
        Ok((
            So3State {
                grid: state.grid,
                e,
                a,
                s,
                t: state.t + dt,
            },
            defect,
        ))
    }

    fn step_euler(&self, state: &So3State, k: &So3Deriv, c: f64) -> Result<So3State> {
        let mut e = state.e.clone();
        let mut a = state.a.clone();
        e.axpy(c, &k.de);
        a.axpy(c, &k.da);
        let (s, _) = super::torus_flow::accumulate_sym_field(&state.s, &[(c, &k.ds)]);
        Ok(So3State {
            grid: state.grid,
            e,
            a,
            s,
            t: state.t + c,
        })
    }

    fn guard(&self, state: &So3State) -> Option<GuardTrip> {
        let (lo, _) = state.dets_range();
        (lo < self.dets_guard).then_some(GuardTrip {
            what: "det S",
            value: lo,
            threshold: self.dets_guard,
        })
    }

    fn time(&self, state: &So3State) -> f64 {
        state.t
    }
}

// ---------------------------------------------------------------------------
// Left-invariant SU(2) reduction
// ---------------------------------------------------------------------------

/// Left-invariant state: `e^i = A_ij θ^j` on the group with
/// `dθ^i = -θ̂^i`, plus the symmetric `S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Su2State {
    pub a: Mat3,
    pub s: SymMat3,
    pub t: f64,
}

/// Coframe structure matrix `C` with `de^i = C_ij ê^j` for `e = Aθ`:
/// `C = -(det A)^{-1} A Aᵀ`.
pub fn su2_c_matrix(a: &Mat3) -> Result<Mat3> {
    let d = det3(a);
    if d.abs() < 1e-14 {
        return Err(Error::DegenerateCoframe { det: d });
    }
    Ok((*a * a.transpose()).scale(-1.0 / d))
}

/// Levi-Civita coefficients `B = C - ½ tr(C) I` (C symmetric here).
pub fn su2_b_matrix(c: &Mat3) -> Mat3 {
    *c - Mat3::identity().scale(0.5 * c.trace())
}

/// `‖[S, B]‖` for the invariant state (the covariant divergence constraint).
pub fn su2_comm_sb(st: &Su2State) -> Result<f64> {
    let b = su2_b_matrix(&su2_c_matrix(&st.a)?);
    Ok(commutator(&st.s.to_mat3(), &b).max_abs())
}

/// The reduced system
/// `dA/dt = S̃ A`,
/// `dS/dt = -tr(S̃) S + 2 (det S) I - C² - C̃ + ¼ (tr C)² I`.
pub fn su2_reduced_rhs(st: &Su2State) -> Result<(Mat3, Mat3)> {
    st.s.is_pos_def()?;
    let c = su2_c_matrix(&st.a)?;
    let stilde = st.s.adjugate();
    let da = stilde.to_mat3() * st.a;
    let ds = st.s.to_mat3().scale(-stilde.trace()) + Mat3::identity().scale(2.0 * st.s.det())
        - c * c
        - adjugate(&c)
        + Mat3::identity().scale(0.25 * c.trace() * c.trace());
    Ok((da, ds))
}

/// The general SO(3) right-hand side specialized to left-invariant data
/// through the structure-constant algebra: `C` from the coframe expansion,
/// `B` from the Levi-Civita solve, `Ω = B C + adj(B)`, then the motion.
/// An independent evaluation path for the reduction consistency check.
pub fn rhs_so3_invariant(a: &Mat3, s: &SymMat3) -> Result<(Mat3, Mat3)> {
    s.is_pos_def()?;
    // de^i = -A_ij θ̂^j and θ̂ = ((adj A)ᵀ)^{-1} ê give the frame expansion
    let c = (*a * adjugate(a).transpose().inverse()?).scale(-1.0);
    let b = su2_b_matrix(&c);
    // d_Ha = da + ½[a∧a]: da^i = B_ij de^j = (B C)_ik ê^k for spatially
    // constant B; the quadratic term is the ε-contraction ½[B∧B] = adj(B)
    let omega = b * c + eps_contract2(&b, &b).transpose().scale(0.5);
    let stilde = s.adjugate();
    let da = stilde.to_mat3() * *a;
    let ds = ds_from_omega(s, &omega);
    Ok((da, ds))
}

/// Torsion groups of a left-invariant state, evaluated through the
/// structure-constant algebra (spatial derivatives of the equivariant
/// functions vanish; covariant derivatives reduce to the `B`-brackets).
pub fn su2_torsion_groups(st: &Su2State) -> Result<So3TorsionGroups> {
    let c = su2_c_matrix(&st.a)?;
    let b = su2_b_matrix(&c);
    let omega = b * c + adjugate(&b);
    let det_s = st.s.det();
    let rh = det_s.sqrt();
    let m = st.s.adjugate().scale(1.0 / rh);

    // covariant derivative of M from the bracket term alone:
    // M_{ij;α} = -(ε_{kiβ}M_{βj} + ε_{kjβ}M_{βi}) B_{kα}
    let cov_m = |i: usize, j: usize, al: usize| -> f64 {
        let mut v = 0.0;
        for k in 0..3 {
            let mut br = 0.0;
            for be in 0..3 {
                br += eps(k, i, be) * m.at(be, j) + eps(k, j, be) * m.at(be, i);
            }
            v -= br * b.0[k][al];
        }
        v
    };
    let cov_s = |i: usize, j: usize, al: usize| -> f64 {
        let mut v = 0.0;
        for k in 0..3 {
            let mut br = 0.0;
            for be in 0..3 {
                br += eps(k, i, be) * st.s.at(be, j) + eps(k, j, be) * st.s.at(be, i);
            }
            v -= br * b.0[k][al];
        }
        v
    };

    let mut domega = 0.0_f64;
    let mut domega_vert = 0.0_f64;
    for i in 0..3 {
        for j in 0..3 {
            let mut v = 0.0;
            for al in 0..3 {
                for be in 0..3 {
                    let s = eps(j, al, be);
                    if s != 0.0 {
                        v += s * cov_m(i, al, be);
                    }
                }
            }
            domega = domega.max(v.abs());
            domega_vert = domega_vert.max(m.at(i, j).abs());
        }
    }
    let mut tr = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            tr += m.at(i, j) * omega.0[i][j];
        }
    }
    domega = domega.max(tr.abs()).max(domega_vert);

    let mut domsq = 0.0_f64;
    for i in 0..3 {
        let mut v = 0.0;
        for al in 0..3 {
            v += cov_s(i, al, al);
        }
        domsq = domsq.max(v.abs());
    }

    // T = 0 by the Levi-Civita choice; dψ group is the Ω antisymmetry
    let mut dpsi = 0.0_f64;
    for i in 0..3 {
        let mut v = 0.0;
        for al in 0..3 {
            for be in 0..3 {
                v += eps(i, al, be) * omega.0[al][be];
            }
        }
        dpsi = dpsi.max(v.abs());
    }

    // spatial gradients of det S vanish; the â ê-group remains
    let mut homog = m.to_mat3() * omega;
    for i in 0..3 {
        homog.0[i][i] -= rh;
    }
    let dpsisharp = homog.max_abs();
    Ok(So3TorsionGroups {
        domega,
        domega_vert,
        domsq,
        dpsi,
        dpsisharp,
    })
}

/// The SU(2) reduction as an integrable system.
pub struct Su2System {
    pub dets_guard: f64,
}

impl Default for Su2System {
    fn default() -> Self {
        Su2System { dets_guard: 1e-8 }
    }
}

/// Derivative pair for the SU(2) system.
#[derive(Debug, Clone, Copy)]
pub struct Su2Deriv {
    pub da: Mat3,
    pub ds: Mat3,
}

impl FlowSystem for Su2System {
    type State = Su2State;
    type Deriv = Su2Deriv;

    fn rhs(&self, state: &Su2State) -> Result<Su2Deriv> {
        let (da, ds) = su2_reduced_rhs(state)?;
        Ok(Su2Deriv { da, ds })
    }

    fn combine(&self, st: &Su2State, ks: [&Su2Deriv; 4], dt: f64) -> Result<(Su2State, f64)> {
        let w = [dt / 6.0, dt / 3.0, dt / 3.0, dt / 6.0];
        let mut a = st.a;
        let mut s_full = st.s.to_mat3();
        for (i, k) in ks.iter().enumerate() {
            a = a + k.da.scale(w[i]);
            s_full = s_full + k.ds.scale(w[i]);
        }
        let defect = s_full.asym_defect() / st.s.max_abs().max(f64::MIN_POSITIVE);
        Ok((
            Su2State {
                a,
                s: s_full.symmetrize(),
                t: st.t + dt,
            },
            defect,
        ))
    }

    fn step_euler(&self, st: &Su2State, k: &Su2Deriv, c: f64) -> Result<Su2State> {
        let s_full = st.s.to_mat3() + k.ds.scale(c);
        Ok(Su2State {
            a: st.a + k.da.scale(c),
            s: s_full.symmetrize(),
            t: st.t + c,
        })
    }

    fn guard(&self, st: &Su2State) -> Option<GuardTrip> {
        let d = st.s.det();
        (d < self.dets_guard).then_some(GuardTrip {
            what: "det S",
            value: d,
            threshold: self.dets_guard,
        })
    }

    fn time(&self, st: &Su2State) -> f64 {
        st.t
    }
}

// ---------------------------------------------------------------------------
// Spherically symmetric radial reduction
// ---------------------------------------------------------------------------

/// Radial state `(e¹,e²,e³) = (f θ¹, g θ², g θ³)`, `S = diag(k, l, l)` on a
/// 1D lattice in `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialState {
    pub grid: RadialGrid1,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub k: Vec<f64>,
    pub l: Vec<f64>,
    pub t: f64,
}

/// Time derivatives of the four radial profiles.
#[derive(Debug, Clone)]
pub struct RadialDeriv {
    pub df: Vec<f64>,
    pub dg: Vec<f64>,
    pub dk: Vec<f64>,
    pub dl: Vec<f64>,
}

impl RadialState {
    pub fn min_value(&self) -> f64 {
        self.f
            .iter()
            .chain(&self.g)
            .chain(&self.k)
            .chain(&self.l)
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

/// The closed-form flat solution
/// `f = α(2t+β)^{1/2}`, `g = α(2t+β)^{1/2} r`, `k = l = (2t+β)^{-1/2}`.
pub fn radial_flat(grid: RadialGrid1, alpha: f64, beta: f64, t: f64) -> RadialState {
    let tau = (2.0 * t + beta).sqrt();
    let m = grid.m();
    let mut st = RadialState {
        grid,
        f: vec![alpha * tau; m],
        g: vec![0.0; m],
        k: vec![1.0 / tau; m],
        l: vec![1.0 / tau; m],
        t,
    };
    for i in 0..m {
        st.g[i] = alpha * tau * grid.r(i);
    }
    st
}

/// Analytic time derivatives of the flat solution at `(r, t)`:
/// `(df, dg, dk, dl)`.
pub fn radial_flat_derivatives(alpha: f64, beta: f64, r: f64, t: f64) -> (f64, f64, f64, f64) {
    let tau = 2.0 * t + beta;
    let drt = alpha / tau.sqrt();
    (drt, drt * r, -tau.powf(-1.5), -tau.powf(-1.5))
}

/// Radial system right-hand side:
///
/// ```text
/// ∂f/∂t = f l²                ∂g/∂t = g k l
/// ∂k/∂t = k l² - 2k²l - ((∂g/∂r)/(fg))² + 1/g²
/// ∂l/∂t = -l³ - (∂²g/∂r²)/(f²g) + (∂f/∂r)(∂g/∂r)/(f³g)
/// ```
///
/// plus the residual of the constraint equation
/// `∂k/∂r - (2/g)(∂g/∂r)(l-k) = 0`.
pub fn radial_rhs(st: &RadialState) -> Result<(RadialDeriv, f64)> {
    let min = st.min_value();
    if min <= 0.0 {
        return Err(Error::PositivityViolation { min });
    }
    let m = st.grid.m();
    let g_r = radial_partial(st.grid, &st.g);
    let g_rr = radial_second(st.grid, &st.g);
    let f_r = radial_partial(st.grid, &st.f);
    let k_r = radial_partial(st.grid, &st.k);
    let mut d = RadialDeriv {
        df: vec![0.0; m],
        dg: vec![0.0; m],
        dk: vec![0.0; m],
        dl: vec![0.0; m],
    };
    let mut res5 = 0.0_f64;
    for i in 0..m {
        let (f, g, k, l) = (st.f[i], st.g[i], st.k[i], st.l[i]);
        d.df[i] = f * l * l;
        d.dg[i] = g * k * l;
        let grad_term = g_r[i] / (f * g);
        d.dk[i] = k * l * l - 2.0 * k * k * l - grad_term * grad_term + 1.0 / (g * g);
        d.dl[i] = -l * l * l - g_rr[i] / (f * f * g) + f_r[i] * g_r[i] / (f * f * f * g);
        let c5 = k_r[i] - 2.0 / g * g_r[i] * (l - k);
        res5 = res5.max(c5.abs());
    }
    Ok((d, res5))
}

/// The radial system as an integrable flow with positivity guard.
pub struct RadialSystem {
    pub positivity_guard: f64,
}

impl Default for RadialSystem {
    fn default() -> Self {
        RadialSystem {
            positivity_guard: 1e-8,
        }
    }
}

impl FlowSystem for RadialSystem {
    type State = RadialState;
    type Deriv = RadialDeriv;

    fn rhs(&self, state: &RadialState) -> Result<RadialDeriv> {
        Ok(radial_rhs(state)?.0)
    }

    fn combine(
        &self,
        st: &RadialState,
        ks: [&RadialDeriv; 4],
        dt: f64,
    ) -> Result<(RadialState, f64)> {
        let w = [dt / 6.0, dt / 3.0, dt / 3.0, dt / 6.0];
        let mut out = st.clone();
        out.t += dt;
        for (i, k) in ks.iter().enumerate() {
            for p in 0..st.grid.m() {
                out.f[p] += w[i] * k.df[p];
                out.g[p] += w[i] * k.dg[p];
                out.k[p] += w[i] * k.dk[p];
                out.l[p] += w[i] * k.dl[p];
            }
        }
        Ok((out, 0.0))
    }

    fn step_euler(&self, st: &RadialState, k: &RadialDeriv, c: f64) -> Result<RadialState> {
        let mut out = st.clone();
        out.t += c;
        for p in 0..st.grid.m() {
            out.f[p] += c * k.df[p];
            out.g[p] += c * k.dg[p];
            out.k[p] += c * k.dk[p];
            out.l[p] += c * k.dl[p];
        }
        Ok(out)
    }

    fn guard(&self, st: &RadialState) -> Option<GuardTrip> {
        let min = st.min_value();
        (min < self.positivity_guard).then_some(GuardTrip {
            what: "min(f,g,k,l)",
            value: min,
            threshold: self.positivity_guard,
        })
    }

    fn time(&self, st: &RadialState) -> f64 {
        st.t
    }
}
