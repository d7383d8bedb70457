//! Reconstruction of a potential `ρ` with prescribed Hessian, and the
//! `det Hess ρ = const` verification for torsion-free abelian states.
//!
//! The input is a symmetric matrix field on a contractible (non-wrapping)
//! index box whose rows satisfy the curl condition
//! `ε_{iαβ} ∂h_{jα}/∂x^β = 0`.  Two cumulative trapezoid sweeps perform the
//! double integration (1-forms `h_{ij} dx^j → φ_i`, then
//! `φ_i dx^i → ρ`), averaging the two sweep orders; the affine gauge is
//! fixed by `ρ = 0`, `∇ρ = 0` at the box corner.

use crate::grids::SymMatField3;
use crate::linalg3::{det3, eps, Mat3};
use crate::torus_flow::{torsion_coeffs_torus, LapseMode, TorusState};
use crate::{Error, Result};

/// Scalar field on a `dims[0]×dims[1]×dims[2]` box with spacing `h`
/// (non-periodic indexing, k fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct BoxScalar {
    pub dims: [usize; 3],
    pub h: f64,
    pub data: Vec<f64>,
}

impl BoxScalar {
    pub fn zeros(dims: [usize; 3], h: f64) -> BoxScalar {
        BoxScalar {
            dims,
            h,
            data: vec![0.0; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.idx(i, j, k)]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Symmetric matrix field on a box, components (11,12,13,22,23,33).
#[derive(Debug, Clone)]
pub struct BoxSym {
    pub dims: [usize; 3],
    pub h: f64,
    pub comps: [Vec<f64>; 6],
}

const SYM_IDX: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];

impl BoxSym {
    pub fn from_fn(dims: [usize; 3], h: f64, mut f: impl FnMut([usize; 3]) -> [f64; 6]) -> BoxSym {
        let n = dims[0] * dims[1] * dims[2];
        let mut comps: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; n]);
        let mut idx = 0;
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let v = f([i, j, k]);
                    for c in 0..6 {
                        comps[c][idx] = v[c];
                    }
                    idx += 1;
                }
            }
        }
        BoxSym { dims, h, comps }
    }

    /// Restriction of a periodic field to the corner box `[0, extent)³`
    /// without wrapping.
    pub fn from_periodic(fld: &SymMatField3, extent: usize) -> Result<BoxSym> {
        let n = fld.grid().n();
        if extent > n {
            return Err(Error::PeriodicWrap {
                want: extent,
                have: n,
            });
        }
        let g = fld.grid();
        Ok(BoxSym::from_fn([extent; 3], g.h(), |c| {
            fld.site_values(g.idx(c[0], c[1], c[2]))
        }))
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    pub fn at(&self, i: usize, j: usize, c: [usize; 3]) -> f64 {
        self.comps[SYM_IDX[i][j]][self.flat(c)]
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Box first derivative: central interior, one-sided second-order edges.
fn box_partial(dims: [usize; 3], h: f64, f: &dyn Fn([usize; 3]) -> f64, axis: usize) -> BoxScalar {
    let mut out = BoxScalar::zeros(dims, h);
    let n = dims[axis];
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let c = [i, j, k];
                let pos = c[axis];
                let sample = |p: usize| {
                    let mut cc = c;
                    cc[axis] = p;
                    f(cc)
                };
                let v = if pos == 0 {
                    (-3.0 * sample(0) + 4.0 * sample(1) - sample(2)) / (2.0 * h)
                } else if pos == n - 1 {
                    (3.0 * sample(n - 1) - 4.0 * sample(n - 2) + sample(n - 3)) / (2.0 * h)
                } else {
                    (sample(pos + 1) - sample(pos - 1)) / (2.0 * h)
                };
                let id = out.idx(i, j, k);
                out.data[id] = v;
            }
        }
    }
    out
}

/// Reconstructed potential with its gauge record.
#[derive(Debug, Clone)]
pub struct PotentialField {
    pub rho: BoxScalar,
    /// Value pinned at the box corner.
    pub base_value: f64,
    /// Gradient pinned at the box corner.
    pub base_gradient: [f64; 3],
}

/// Cumulative trapezoid integral of `v`(axis component) along `axis`
/// starting from plane 0.
fn sweep_axis(
    dims: [usize; 3],
    h: f64,
    v: &dyn Fn([usize; 3]) -> f64,
    axis: usize,
    out: &mut BoxScalar,
) {
    // out[c] += ∫₀^{c_axis} v along the axis line through c (other
    // coordinates of the path held at c's values)
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let c = [i, j, k];
                let pos = c[axis];
                let mut acc = 0.0;
                for p in 1..=pos {
                    let mut a = c;
                    a[axis] = p - 1;
                    let mut b = c;
                    b[axis] = p;
                    acc += 0.5 * h * (v(a) + v(b));
                }
                let id = out.idx(i, j, k);
                out.data[id] += acc;
            }
        }
    }
}

/// Path integral of the closed 1-form `v_i dx^i` from the corner along the
/// axes in the given order (coordinates already passed stay at their final
/// values, the rest at 0).
fn integrate_gradient(
    dims: [usize; 3],
    h: f64,
    v: &[&dyn Fn([usize; 3]) -> f64; 3],
    order: [usize; 3],
) -> BoxScalar {
    let mut out = BoxScalar::zeros(dims, h);
    for (leg, &axis) in order.iter().enumerate() {
        // on this leg, axes earlier in the order vary, later ones are 0
        let later: Vec<usize> = order[leg + 1..].to_vec();
        let f = |c: [usize; 3]| {
            let mut cc = c;
            for &ax in &later {
                cc[ax] = 0;
            }
            v[axis](cc)
        };
        sweep_axis(dims, h, &f, axis, &mut out);
    }
    out
}

fn average_orders(dims: [usize; 3], h: f64, v: &[&dyn Fn([usize; 3]) -> f64; 3]) -> BoxScalar {
    let a = integrate_gradient(dims, h, v, [0, 1, 2]);
    let b = integrate_gradient(dims, h, v, [2, 1, 0]);
    let mut out = a;
    for (x, y) in out.data.iter_mut().zip(b.data.iter()) {
        *x = 0.5 * (*x + *y);
    }
    out
}

/// Reconstruct `ρ` with `Hess ρ = h` by double Poincaré integration.
///
/// Preconditions: the box does not wrap (checked by the caller building the
/// [`BoxSym`]) and the rows are curl-free to `tol · ‖h‖`.
pub fn potential_from_hessian(h: &BoxSym, tol: f64) -> Result<PotentialField> {
    // curl precondition: ε_{iαβ} ∂h_{jα}/∂x^β ≈ 0
    let mut curl_residual = 0.0_f64;
    let mut dh: Vec<Vec<BoxScalar>> = Vec::new(); // [j][α] partials wrt β handled below
    for j in 0..3 {
        let mut row = Vec::new();
        for al in 0..3 {
            let f = |c: [usize; 3]| h.at(j, al, c);
            let mut per_axis = Vec::new();
            for be in 0..3 {
                per_axis.push(box_partial(h.dims, h.h, &f, be));
            }
            row.push(per_axis);
        }
        dh.push(row.into_iter().flatten().collect());
    }
    let d = |j: usize, al: usize, be: usize| -> &BoxScalar { &dh[j][3 * al + be] };
    for i in 0..3 {
        for j in 0..3 {
            for al in 0..3 {
                for be in 0..3 {
                    let e = eps(i, al, be);
                    if e == 0.0 {
                        continue;
                    }
                    for idx in 0..d(j, al, be).data.len() {
                        let mut v = 0.0;
                        for al2 in 0..3 {
                            for be2 in 0..3 {
                                let e2 = eps(i, al2, be2);
                                if e2 != 0.0 {
                                    v += e2 * d(j, al2, be2).data[idx];
                                }
                            }
                        }
                        curl_residual = curl_residual.max(v.abs());
                    }
                }
            }
        }
    }
    let bound = tol * h.max_abs().max(f64::MIN_POSITIVE);
    if curl_residual > bound {
        return Err(Error::NotIntegrable {
            residual: curl_residual,
            tol: bound,
        });
    }

    // stage 1: φ_i from f_i = h_{ij} dx^j
    let phi: Vec<BoxScalar> = (0..3)
        .map(|i| {
            let v0 = |c: [usize; 3]| h.at(i, 0, c);
            let v1 = |c: [usize; 3]| h.at(i, 1, c);
            let v2 = |c: [usize; 3]| h.at(i, 2, c);
            average_orders(h.dims, h.h, &[&v0, &v1, &v2])
        })
        .collect();
    // stage 2: ρ from φ_i dx^i
    let p0 = |c: [usize; 3]| phi[0].at(c[0], c[1], c[2]);
    let p1 = |c: [usize; 3]| phi[1].at(c[0], c[1], c[2]);
    let p2 = |c: [usize; 3]| phi[2].at(c[0], c[1], c[2]);
    let rho = average_orders(h.dims, h.h, &[&p0, &p1, &p2]);

    Ok(PotentialField {
        rho,
        base_value: 0.0,
        base_gradient: [0.0; 3],
    })
}

/// Discrete Hessian of a box scalar (mixed second derivatives by composing
/// the first-derivative stencils).
pub fn box_hessian(f: &BoxScalar) -> BoxSym {
    let fval = |c: [usize; 3]| f.at(c[0], c[1], c[2]);
    let grads: Vec<BoxScalar> = (0..3)
        .map(|ax| box_partial(f.dims, f.h, &fval, ax))
        .collect();
    let mut out = BoxSym::from_fn(f.dims, f.h, |_| [0.0; 6]);
    for i in 0..3 {
        for j in i..3 {
            let gi = |c: [usize; 3]| grads[i].at(c[0], c[1], c[2]);
            let dij = box_partial(f.dims, f.h, &gi, j);
            out.comps[SYM_IDX[i][j]].copy_from_slice(&dij.data);
        }
    }
    out
}

/// Outcome of [`verify_ma`].
#[derive(Debug, Clone)]
pub struct MaReport {
    pub rho: PotentialField,
    /// `max |det Hess ρ - mean|` over the interior of the box.
    pub residual: f64,
    /// Mean of `det Hess ρ` over the interior.
    pub constant: f64,
}

/// Verify the local potential characterization of a torsion-free abelian
/// state: reconstruct `ρ` from the `S̃` field on the corner box and measure
/// the deviation of `det Hess ρ` from constancy.
pub fn verify_ma(st: &TorusState, torsion_tol: f64) -> Result<MaReport> {
    let groups = torsion_coeffs_torus(st, &LapseMode::Canonical)?;
    let worst = groups
        .domega
        .max(groups.domsq)
        .max(groups.dpsi)
        .max(groups.dpsisharp);
    if worst > torsion_tol {
        return Err(Error::Precondition {
            what: "torsion residual of the state",
            value: worst,
            tol: torsion_tol,
        });
    }
    let stilde = st.stilde_field();
    let extent = st.grid.n();
    let boxed = BoxSym::from_periodic(&stilde, extent)?;
    let rho = potential_from_hessian(&boxed, 1e-6)?;
    let hess = box_hessian(&rho.rho);

    // det over the interior (one-sided boundary stencils excluded)
    let mut dets = Vec::new();
    for i in 1..extent - 1 {
        for j in 1..extent - 1 {
            for k in 1..extent - 1 {
                let c = [i, j, k];
                let mut m = Mat3::ZERO;
                for p in 0..3 {
                    for q in 0..3 {
                        m.0[p][q] = hess.at(p, q, c);
                    }
                }
                dets.push(det3(&m));
            }
        }
    }
    let mean = dets.iter().sum::<f64>() / dets.len() as f64;
    let residual = dets.iter().fold(0.0_f64, |m, v| m.max((v - mean).abs()));
    Ok(MaReport {
        rho,
        residual,
        constant: mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::{PeriodicGrid3, DEFAULT_LEN};
    use crate::linalg3::SymMat3;
    use crate::torus_flow::ma_state;

    #[test]
    fn identity_hessian_gives_quadratic() {
        let dims = [17, 17, 17];
        let h = 0.1;
        let hess = BoxSym::from_fn(dims, h, |_| [1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        let p = potential_from_hessian(&hess, 1e-6).unwrap();
        let mut worst = 0.0_f64;
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let x = [i as f64 * h, j as f64 * h, k as f64 * h];
                    let expect = 0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
                    worst = worst.max((p.rho.at(i, j, k) - expect).abs());
                }
            }
        }
        assert!(worst < 1e-12, "worst = {worst}");
        assert_eq!(p.base_value, 0.0);
    }

    #[test]
    fn trig_hessian_roundtrip() {
        // ρ₀ = sin(x¹) sin(x²) on a box; recovery up to affine gauge, O(h²)
        let dims = [33, 33, 9];
        let h = 0.05;
        let rho0 = |x: [f64; 3]| x[0].sin() * x[1].sin();
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
        // the discrete curl of a sampled analytic Hessian sits at O(h²)
        let p = potential_from_hessian(&hess, 1e-2).unwrap();
        // the affine gauge difference is fixed by construction: ρ(0)=0,∇ρ(0)=0
        // while ρ₀(0)=0, ∇ρ₀(0)=(0, 0, 0)… sin(0)cos' terms: ∂₁ρ₀(0)=0, ∂₂ρ₀(0)=0
        let mut worst = 0.0_f64;
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let x = [i as f64 * h, j as f64 * h, k as f64 * h];
                    worst = worst.max((p.rho.at(i, j, k) - rho0(x)).abs());
                }
            }
        }
        assert!(worst < 5.0 * h * h, "worst = {worst}");
        // roundtrip: Hess(ρ) matches the input to O(h²) in the interior
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
        assert!(hess_err < 10.0 * h * h, "hess_err = {hess_err}");
    }

    #[test]
    fn path_order_independence() {
        let dims = [17, 17, 17];
        let h = 0.07;
        let hess = BoxSym::from_fn(dims, h, |c| {
            let x = [c[0] as f64 * h, c[1] as f64 * h, c[2] as f64 * h];
            // Hessian of sin(x¹+x²+x³)
            let s = -(x[0] + x[1] + x[2]).sin();
            [s, s, s, s, s, s]
        });
        let v0 = |c: [usize; 3]| hess.at(0, 0, c);
        let v1 = |c: [usize; 3]| hess.at(0, 1, c);
        let v2 = |c: [usize; 3]| hess.at(0, 2, c);
        let a = integrate_gradient(dims, h, &[&v0, &v1, &v2], [0, 1, 2]);
        let b = integrate_gradient(dims, h, &[&v0, &v1, &v2], [2, 1, 0]);
        let mut diff = 0.0_f64;
        for (x, y) in a.data.iter().zip(b.data.iter()) {
            diff = diff.max((x - y).abs());
        }
        assert!(diff < 5.0 * h * h, "diff = {diff}");
    }

    #[test]
    fn curl_violation_is_rejected() {
        let dims = [9, 9, 9];
        let h = 0.1;
        let hess = BoxSym::from_fn(dims, h, |c| {
            let x1 = c[0] as f64 * h;
            // h₁₂ depends on x¹ only through an asymmetric recipe that
            // cannot be a Hessian: h₁₂ = x¹ but h₂₂-row sees nothing
            [1.0, x1, 0.0, 1.0, 0.0, 1.0]
        });
        // rows of this field have ε_{iαβ}∂h_{jα}/∂x^β ≠ 0 at O(1)
        assert!(matches!(
            potential_from_hessian(&hess, 1e-6),
            Err(Error::NotIntegrable { .. })
        ));
    }

    #[test]
    fn wrap_is_rejected() {
        let g = PeriodicGrid3::new(8, DEFAULT_LEN).unwrap();
        let fld = SymMatField3::constant_sym(g, &SymMat3::identity());
        assert!(matches!(
            BoxSym::from_periodic(&fld, 9),
            Err(Error::PeriodicWrap { .. })
        ));
    }

    #[test]
    fn verify_ma_on_quadratic_states() {
        let g = PeriodicGrid3::new(16, DEFAULT_LEN).unwrap();
        // S = I state: S̃ = I, ρ quadratic, det ≈ 1
        let st = ma_state(g, &SymMat3::identity()).unwrap();
        let rep = verify_ma(&st, 1e-10).unwrap();
        assert!(rep.residual < 1e-12, "residual {}", rep.residual);
        assert!((rep.constant - 1.0).abs() < 1e-12);
        // S̃ = diag(1,2,3): det Hess ρ = 6
        let st = ma_state(g, &SymMat3::diag(1.0, 2.0, 3.0)).unwrap();
        let rep = verify_ma(&st, 1e-10).unwrap();
        assert!(rep.residual < 1e-10, "residual {}", rep.residual);
        assert!((rep.constant - 6.0).abs() < 1e-10);
    }

    #[test]
    fn verify_ma_on_evolved_snapshot() {
        use crate::integrate::{evolve, EvolveOpts};
        use crate::torus_flow::TorusSystem;
        let g = PeriodicGrid3::new(16, DEFAULT_LEN).unwrap();
        let st = ma_state(g, &SymMat3::diag(1.0, 2.0, 3.0)).unwrap();
        let sys = TorusSystem::default();
        let opts = EvolveOpts {
            t_final: 0.1,
            dt: 1e-2,
            sample_every: 0,
        };
        let (fin, _) = evolve(&sys, st, &opts, |_| Ok(())).unwrap();
        let rep = verify_ma(&fin, 1e-10).unwrap();
        assert!(rep.residual < 1e-10, "residual {}", rep.residual);
        assert!((rep.constant - 6.0).abs() < 1e-10);
    }

    #[test]
    fn verify_ma_rejects_torsional_state() {
        use crate::torus_flow::double_curl_state;
        use rand::rngs::StdRng;
        use rand::SeedableRng;
        let g = PeriodicGrid3::new(16, DEFAULT_LEN).unwrap();
        let mut rng = StdRng::seed_from_u64(31);
        let st = double_curl_state(g, &mut rng, 0.05, 2.0).unwrap();
        assert!(verify_ma(&st, 1e-10).is_err());
    }
}
