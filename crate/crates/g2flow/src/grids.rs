//! Discrete domains and derivative operators.
//!
//! [`PeriodicGrid3`] is the n³ lattice on a 3-torus of period `len` per axis
//! (default 2π) carrying the field types of the flows; [`RadialGrid1`] is a
//! 1D lattice on `[r_min, r_max]` with `r_min > 0` for the spherically
//! symmetric reduction.  All stencils are central differences of the stated
//! order; the radial grid uses one-sided second-order stencils at its ends.

use crate::linalg3::{eps, Mat3, SymMat3};
use crate::{Error, Result};
use rand::Rng;

pub const DEFAULT_LEN: f64 = 2.0 * std::f64::consts::PI;

/// Periodic n×n×n lattice, spacing `h = len / n`, indices wrapping mod n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid3 {
    n: usize,
    len: f64,
}

impl PeriodicGrid3 {
    pub fn new(n: usize, len: f64) -> Result<PeriodicGrid3> {
        if n < 8 {
            return Err(Error::GridTooSmall { need: 8, got: n });
        }
        Ok(PeriodicGrid3 { n, len })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> f64 {
        self.len
    }

    pub fn h(&self) -> f64 {
        self.len / self.n as f64
    }

    pub fn sites(&self) -> usize {
        self.n * self.n * self.n
    }

    /// Flat site index of (i, j, k); k fastest.
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn coords_of(&self, site: usize) -> [usize; 3] {
        let k = site % self.n;
        let j = (site / self.n) % self.n;
        let i = site / (self.n * self.n);
        [i, j, k]
    }

    pub fn point(&self, site: usize) -> [f64; 3] {
        let c = self.coords_of(site);
        let h = self.h();
        [c[0] as f64 * h, c[1] as f64 * h, c[2] as f64 * h]
    }

    /// Site shifted by `delta` steps along `axis`, wrapping.
    pub fn shift(&self, site: usize, axis: usize, delta: isize) -> usize {
        let mut c = self.coords_of(site);
        let n = self.n as isize;
        let moved = (c[axis] as isize + delta).rem_euclid(n) as usize;
        c[axis] = moved;
        self.idx(c[0], c[1], c[2])
    }
}

/// Field of `C` real components per site, stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field3<const C: usize> {
    grid: PeriodicGrid3,
    data: Vec<f64>,
}

pub type ScalarField3 = Field3<1>;
pub type VecField3 = Field3<3>;
pub type SymMatField3 = Field3<6>;
/// Full 3×3 matrix per site, row-major components.
pub type Mat3Field3 = Field3<9>;
/// Connection coefficients `a^i = a^i_c dx^c`, component index `3i + c`.
pub type ConnField3 = Field3<9>;

impl<const C: usize> Field3<C> {
    pub fn zeros(grid: PeriodicGrid3) -> Self {
        Field3 {
            grid,
            data: vec![0.0; C * grid.sites()],
        }
    }

    pub fn grid(&self) -> PeriodicGrid3 {
        self.grid
    }

    pub fn comp(&self, c: usize) -> &[f64] {
        let s = self.grid.sites();
        &self.data[c * s..(c + 1) * s]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [f64] {
        let s = self.grid.sites();
        &mut self.data[c * s..(c + 1) * s]
    }

    pub fn at(&self, c: usize, site: usize) -> f64 {
        self.data[c * self.grid.sites() + site]
    }

    pub fn set(&mut self, c: usize, site: usize, v: f64) {
        let s = self.grid.sites();
        self.data[c * s + site] = v;
    }

    /// Fill from a per-site closure returning all components.
    pub fn from_fn(grid: PeriodicGrid3, mut f: impl FnMut(usize) -> [f64; C]) -> Self {
        let mut out = Self::zeros(grid);
        let sites = grid.sites();
        for site in 0..sites {
            let vals = f(site);
            for c in 0..C {
                out.data[c * sites + site] = vals[c];
            }
        }
        out
    }

    pub fn site_values(&self, site: usize) -> [f64; C] {
        let s = self.grid.sites();
        std::array::from_fn(|c| self.data[c * s + site])
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += alpha * b;
        }
    }

    pub fn scale_in_place(&mut self, alpha: f64) {
        for a in self.data.iter_mut() {
            *a *= alpha;
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Raw payload in site-major, component-minor order (snapshot layout).
    pub fn to_site_major(&self) -> Vec<f64> {
        let s = self.grid.sites();
        let mut out = Vec::with_capacity(C * s);
        for site in 0..s {
            for c in 0..C {
                out.push(self.data[c * s + site]);
            }
        }
        out
    }

    pub fn from_site_major(grid: PeriodicGrid3, payload: &[f64]) -> Result<Self> {
        let s = grid.sites();
        if payload.len() != C * s {
            return Err(Error::Io(format!(
                "payload length {} does not match {} sites × {} components",
                payload.len(),
                s,
                C
            )));
        }
        let mut out = Self::zeros(grid);
        for site in 0..s {
            for c in 0..C {
                out.data[c * s + site] = payload[site * C + c];
            }
        }
        Ok(out)
    }
}

impl SymMatField3 {
    pub fn sym_at(&self, site: usize) -> SymMat3 {
        SymMat3(self.site_values(site))
    }

    pub fn set_sym(&mut self, site: usize, m: &SymMat3) {
        for c in 0..6 {
            self.set(c, site, m.0[c]);
        }
    }

    pub fn constant_sym(grid: PeriodicGrid3, m: &SymMat3) -> Self {
        Self::from_fn(grid, |_| m.0)
    }
}

impl Mat3Field3 {
    pub fn mat_at(&self, site: usize) -> Mat3 {
        let v = self.site_values(site);
        Mat3([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
    }

    pub fn set_mat(&mut self, site: usize, m: &Mat3) {
        for i in 0..3 {
            for j in 0..3 {
                self.set(3 * i + j, site, m.0[i][j]);
            }
        }
    }

    pub fn constant_mat(grid: PeriodicGrid3, m: &Mat3) -> Self {
        let mut out = Self::zeros(grid);
        for site in 0..grid.sites() {
            out.set_mat(site, m);
        }
        out
    }
}

fn lane_derivative(grid: PeriodicGrid3, lane: &[f64], axis: usize, order: usize, out: &mut [f64]) {
    let h = grid.h();
    match order {
        2 => {
            let c = 1.0 / (2.0 * h);
            for site in 0..grid.sites() {
                let p = lane[grid.shift(site, axis, 1)];
                let m = lane[grid.shift(site, axis, -1)];
                out[site] = c * (p - m);
            }
        }
        4 => {
            let c = 1.0 / (12.0 * h);
            for site in 0..grid.sites() {
                let p1 = lane[grid.shift(site, axis, 1)];
                let m1 = lane[grid.shift(site, axis, -1)];
                let p2 = lane[grid.shift(site, axis, 2)];
                let m2 = lane[grid.shift(site, axis, -2)];
                out[site] = c * (-p2 + 8.0 * p1 - 8.0 * m1 + m2);
            }
        }
        _ => unreachable!("order checked by caller"),
    }
}

/// Central-difference partial derivative `∂f/∂x^axis` of the given order.
pub fn partial(fld: &ScalarField3, axis: usize, order: usize) -> Result<ScalarField3> {
    if axis >= 3 {
        return Err(Error::InvalidAxis { axis });
    }
    if order != 2 && order != 4 {
        return Err(Error::Usage(format!("unsupported stencil order {order}")));
    }
    let mut out = ScalarField3::zeros(fld.grid());
    lane_derivative(fld.grid(), fld.comp(0), axis, order, out.comp_mut(0));
    Ok(out)
}

/// Partial derivative of one component lane of a multi-component field.
pub fn partial_comp<const C: usize>(
    fld: &Field3<C>,
    comp: usize,
    axis: usize,
    order: usize,
) -> Result<ScalarField3> {
    if axis >= 3 {
        return Err(Error::InvalidAxis { axis });
    }
    let mut out = ScalarField3::zeros(fld.grid());
    lane_derivative(fld.grid(), fld.comp(comp), axis, order, out.comp_mut(0));
    Ok(out)
}

/// Row divergence `(div S)_i = S_{iα,α}` of a symmetric matrix field.
pub fn div_rows(s: &SymMatField3, order: usize) -> Result<VecField3> {
    let grid = s.grid();
    let mut out = VecField3::zeros(grid);
    let idx = |i: usize, j: usize| [[0, 1, 2], [1, 3, 4], [2, 4, 5]][i][j];
    for i in 0..3 {
        for al in 0..3 {
            let d = partial_comp(s, idx(i, al), al, order)?;
            for site in 0..grid.sites() {
                let v = out.at(i, site) + d.at(0, site);
                out.set(i, site, v);
            }
        }
    }
    Ok(out)
}

/// A differential-form-valued field over the grid, coefficients in the
/// coordinate coframe.  2-forms are stored in the hat basis
/// `hat(dx)^i = ½ ε_{ijk} dx^j ∧ dx^k`.
#[derive(Debug, Clone, PartialEq)]
pub enum GridForm {
    Zero(ScalarField3),
    One(VecField3),
    TwoHat(VecField3),
    Three(ScalarField3),
}

impl GridForm {
    pub fn degree(&self) -> usize {
        match self {
            GridForm::Zero(_) => 0,
            GridForm::One(_) => 1,
            GridForm::TwoHat(_) => 2,
            GridForm::Three(_) => 3,
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            GridForm::Zero(f) | GridForm::Three(f) => f.max_abs(),
            GridForm::One(f) | GridForm::TwoHat(f) => f.max_abs(),
        }
    }
}

/// Exterior derivative on coordinate-coframe coefficient fields.
///
/// In hat components this is grad / curl / div for degrees 0 / 1 / 2; a
/// degree-3 input is an error (`d` of a top form).
pub fn ext_d(form: &GridForm, order: usize) -> Result<GridForm> {
    match form {
        GridForm::Zero(f) => {
            let grid = f.grid();
            let mut out = VecField3::zeros(grid);
            for axis in 0..3 {
                let d = partial(f, axis, order)?;
                out.comp_mut(axis).copy_from_slice(d.comp(0));
            }
            Ok(GridForm::One(out))
        }
        GridForm::One(f) => {
            let grid = f.grid();
            let mut out = VecField3::zeros(grid);
            // (dω)_k = ε_{kab} ∂_a ω_b
            for k in 0..3 {
                let (a, b) = ((k + 1) % 3, (k + 2) % 3);
                let dab = partial_comp(f, b, a, order)?;
                let dba = partial_comp(f, a, b, order)?;
                for site in 0..grid.sites() {
                    out.set(k, site, dab.at(0, site) - dba.at(0, site));
                }
            }
            Ok(GridForm::TwoHat(out))
        }
        GridForm::TwoHat(f) => {
            let grid = f.grid();
            let mut out = ScalarField3::zeros(grid);
            for a in 0..3 {
                let d = partial_comp(f, a, a, order)?;
                for site in 0..grid.sites() {
                    let v = out.at(0, site) + d.at(0, site);
                    out.set(0, site, v);
                }
            }
            Ok(GridForm::Three(out))
        }
        GridForm::Three(_) => Err(Error::TopDegreeForm),
    }
}

/// 1D lattice on `[r_min, r_max]`, `r_min > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid1 {
    r_min: f64,
    r_max: f64,
    m: usize,
}

impl RadialGrid1 {
    pub fn new(r_min: f64, r_max: f64, m: usize) -> Result<RadialGrid1> {
        if m < 5 {
            return Err(Error::GridTooSmall { need: 5, got: m });
        }
        if r_min <= 0.0 || r_max <= r_min {
            return Err(Error::PositivityViolation { min: r_min });
        }
        Ok(RadialGrid1 { r_min, r_max, m })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn dr(&self) -> f64 {
        (self.r_max - self.r_min) / (self.m - 1) as f64
    }

    pub fn r(&self, i: usize) -> f64 {
        self.r_min + i as f64 * self.dr()
    }
}

/// First derivative on the radial grid: central interior, one-sided
/// second-order at the two ends.
pub fn radial_partial(grid: RadialGrid1, f: &[f64]) -> Vec<f64> {
    let m = grid.m();
    let dr = grid.dr();
    let mut out = vec![0.0; m];
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dr);
    for i in 1..m - 1 {
        out[i] = (f[i + 1] - f[i - 1]) / (2.0 * dr);
    }
    out[m - 1] = (3.0 * f[m - 1] - 4.0 * f[m - 2] + f[m - 3]) / (2.0 * dr);
    out
}

/// Second derivative on the radial grid, same boundary policy.
pub fn radial_second(grid: RadialGrid1, f: &[f64]) -> Vec<f64> {
    let m = grid.m();
    let dr2 = grid.dr() * grid.dr();
    let mut out = vec![0.0; m];
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / dr2;
    for i in 1..m - 1 {
        out[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / dr2;
    }
    out[m - 1] = (2.0 * f[m - 1] - 5.0 * f[m - 2] + 4.0 * f[m - 3] - f[m - 4]) / dr2;
    out
}

/// Smooth periodic trigonometric polynomial with analytic derivatives.
#[derive(Debug, Clone)]
pub struct TrigPoly3 {
    len: f64,
    /// (wave numbers, amplitude, phase) per mode
    modes: Vec<([i32; 3], f64, f64)>,
}

impl TrigPoly3 {
    pub fn random(rng: &mut impl Rng, len: f64, n_modes: usize, amplitude: f64) -> TrigPoly3 {
        let mut modes = Vec::with_capacity(n_modes);
        for _ in 0..n_modes {
            let k = [
                rng.gen_range(-2..=2),
                rng.gen_range(-2..=2),
                rng.gen_range(-2..=2),
            ];
            if k == [0, 0, 0] {
                continue;
            }
            let amp = amplitude * rng.gen_range(0.3..1.0);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            modes.push((k, amp, phase));
        }
        TrigPoly3 { len, modes }
    }

    /// Single explicit mode.
    pub fn mode(len: f64, k: [i32; 3], amplitude: f64, phase: f64) -> TrigPoly3 {
        TrigPoly3 {
            len,
            modes: vec![(k, amplitude, phase)],
        }
    }

    pub fn push_mode(&mut self, k: [i32; 3], amplitude: f64, phase: f64) {
        self.modes.push((k, amplitude, phase));
    }

    fn wavevec(&self, k: &[i32; 3]) -> [f64; 3] {
        let w = std::f64::consts::TAU / self.len;
        [k[0] as f64 * w, k[1] as f64 * w, k[2] as f64 * w]
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        self.modes
            .iter()
            .map(|(k, a, p)| {
                let kv = self.wavevec(k);
                a * (kv[0] * x[0] + kv[1] * x[1] + kv[2] * x[2] + p).cos()
            })
            .sum()
    }

    /// Analytic first derivative along `axis`.
    pub fn d(&self, x: [f64; 3], axis: usize) -> f64 {
        self.modes
            .iter()
            .map(|(k, a, p)| {
                let kv = self.wavevec(k);
                -a * kv[axis] * (kv[0] * x[0] + kv[1] * x[1] + kv[2] * x[2] + p).sin()
            })
            .sum()
    }

    /// Analytic second derivative.
    pub fn dd(&self, x: [f64; 3], a1: usize, a2: usize) -> f64 {
        self.modes
            .iter()
            .map(|(k, a, p)| {
                let kv = self.wavevec(k);
                -a * kv[a1] * kv[a2] * (kv[0] * x[0] + kv[1] * x[1] + kv[2] * x[2] + p).cos()
            })
            .sum()
    }
}

/// Divergence-free symmetric test data
/// `S_ij = ε_{iαβ} ε_{jγδ} ∂_α∂_γ Φ_{βδ} + c δ_ij`
/// from a random smooth symmetric potential Φ; the double curl is
/// analytically divergence-free in each row and symmetric, and `c` shifts
/// the spectrum into positive-definite range.
pub fn divergence_free_sym_field(
    grid: PeriodicGrid3,
    rng: &mut impl Rng,
    amplitude: f64,
    c: f64,
) -> Result<SymMatField3> {
    let mut phi: Vec<Vec<TrigPoly3>> = Vec::new();
    for i in 0..3 {
        let mut row = Vec::new();
        for _ in 0..=i {
            row.push(TrigPoly3::random(rng, grid.len(), 3, amplitude));
        }
        phi.push(row);
    }
    let phi_at = |i: usize, j: usize| -> &TrigPoly3 {
        if i >= j {
            &phi[i][j]
        } else {
            &phi[j][i]
        }
    };

    let mut out = SymMatField3::zeros(grid);
    for site in 0..grid.sites() {
        let x = grid.point(site);
        let mut s = SymMat3::default();
        for i in 0..3 {
            for j in i..3 {
                let mut v = 0.0;
                for al in 0..3 {
                    for be in 0..3 {
                        let e1 = eps(i, al, be);
                        if e1 == 0.0 {
                            continue;
                        }
                        for ga in 0..3 {
                            for de in 0..3 {
                                let e2 = eps(j, ga, de);
                                if e2 == 0.0 {
                                    continue;
                                }
                                v += e1 * e2 * phi_at(be, de).dd(x, al, ga);
                            }
                        }
                    }
                }
                if i == j {
                    v += c;
                }
                s.set(i, j, v);
            }
        }
        s.is_pos_def()?;
        out.set_sym(site, &s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use std::f64::consts::TAU;

    fn grid(n: usize) -> PeriodicGrid3 {
        PeriodicGrid3::new(n, DEFAULT_LEN).unwrap()
    }

    fn sample(g: PeriodicGrid3, f: impl Fn([f64; 3]) -> f64) -> ScalarField3 {
        ScalarField3::from_fn(g, |site| [f(g.point(site))])
    }

    #[test]
    fn grid_validation() {
        assert!(PeriodicGrid3::new(4, DEFAULT_LEN).is_err());
        assert!(RadialGrid1::new(0.25, 4.0, 3).is_err());
        assert!(RadialGrid1::new(-1.0, 4.0, 9).is_err());
    }

    #[test]
    fn partial_constant_is_zero() {
        let g = grid(8);
        let f = sample(g, |_| 3.5);
        for axis in 0..3 {
            assert_eq!(partial(&f, axis, 2).unwrap().max_abs(), 0.0);
        }
        assert!(partial(&f, 3, 2).is_err());
    }

    #[test]
    fn partial_matches_analytic() {
        let g = grid(32);
        let w = TAU / g.len();
        let f = sample(g, |x| (w * x[0]).sin());
        let d = partial(&f, 0, 2).unwrap();
        let exact = sample(g, |x| w * (w * x[0]).cos());
        let err = d.max_abs_diff(&exact);
        let h = g.h();
        assert!(err <= 0.5 * w.powi(3) * h * h, "err = {err}");
    }

    #[test]
    fn convergence_order() {
        // observed order within 0.2 of nominal on a trig field
        for (order, nominal) in [(2usize, 2.0), (4usize, 4.0)] {
            let mut errs = Vec::new();
            for n in [16usize, 32, 64] {
                let g = grid(n);
                let w = 2.0 * TAU / g.len();
                let f = sample(g, |x| (w * x[1]).sin());
                let d = partial(&f, 1, order).unwrap();
                let exact = sample(g, |x| w * (w * x[1]).cos());
                errs.push((g.h(), d.max_abs_diff(&exact)));
            }
            let slope = ((errs[0].1 / errs[2].1).ln()) / ((errs[0].0 / errs[2].0).ln());
            assert!(
                (slope - nominal).abs() < 0.2,
                "order {order}: slope {slope}"
            );
        }
    }

    #[test]
    fn product_rule_residual_small() {
        let g = grid(32);
        let mut rng = StdRng::seed_from_u64(3);
        let p1 = TrigPoly3::random(&mut rng, g.len(), 3, 1.0);
        let p2 = TrigPoly3::random(&mut rng, g.len(), 3, 1.0);
        let f = sample(g, |x| p1.eval(x));
        let h = sample(g, |x| p2.eval(x));
        let fh = sample(g, |x| p1.eval(x) * p2.eval(x));
        let d_fh = partial(&fh, 0, 2).unwrap();
        let mut residual = 0.0_f64;
        let df = partial(&f, 0, 2).unwrap();
        let dh = partial(&h, 0, 2).unwrap();
        for site in 0..g.sites() {
            let r =
                d_fh.at(0, site) - f.at(0, site) * dh.at(0, site) - h.at(0, site) * df.at(0, site);
            residual = residual.max(r.abs());
        }
        assert!(residual < 15.0 * g.h() * g.h(), "residual = {residual}");
    }

    #[test]
    fn shift_equivariance() {
        let g = grid(16);
        let mut rng = StdRng::seed_from_u64(4);
        let p = TrigPoly3::random(&mut rng, g.len(), 4, 1.0);
        let f = sample(g, |x| p.eval(x));
        let df = partial(&f, 2, 2).unwrap();
        // shift along axis 2 by 3 sites
        let mut fs = f.clone();
        for site in 0..g.sites() {
            fs.set(0, site, f.at(0, g.shift(site, 2, 3)));
        }
        let d_fs = partial(&fs, 2, 2).unwrap();
        let mut dfs = df.clone();
        for site in 0..g.sites() {
            dfs.set(0, site, df.at(0, g.shift(site, 2, 3)));
        }
        assert_eq!(d_fs.max_abs_diff(&dfs), 0.0);
    }

    #[test]
    fn div_rows_cases() {
        let g = grid(32);
        let w = TAU / g.len();
        // constant S
        let s = SymMatField3::constant_sym(g, &SymMat3::diag(1.0, 2.0, 3.0));
        assert_eq!(div_rows(&s, 2).unwrap().max_abs(), 0.0);
        // S_ij = δ_ij sin(w x¹): row 0 gets w cos(w x¹), rows 1, 2 get the
        // x², x³ derivatives of a function of x¹ only, which vanish
        let s = SymMatField3::from_fn(g, |site| {
            let v = (w * g.point(site)[0]).sin();
            [v, 0.0, 0.0, v, 0.0, v]
        });
        let d = div_rows(&s, 2).unwrap();
        let c1 = sample(g, |x| w * (w * x[0]).cos());
        let err = d
            .comp(0)
            .iter()
            .zip(c1.comp(0))
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 0.5 * w.powi(3) * g.h() * g.h());
        assert_eq!(d.comp(1).iter().fold(0.0_f64, |m, v| m.max(v.abs())), 0.0);
        assert_eq!(d.comp(2).iter().fold(0.0_f64, |m, v| m.max(v.abs())), 0.0);
    }

    #[test]
    fn double_curl_field_is_divergence_free() {
        let g = grid(16);
        let mut rng = StdRng::seed_from_u64(5);
        let s = divergence_free_sym_field(g, &mut rng, 0.05, 2.0).unwrap();
        let d = div_rows(&s, 2).unwrap();
        // analytic divergence is exactly zero; discrete residual is O(h²)
        let h = g.h();
        assert!(
            d.max_abs() < 2.0 * h * h * s.max_abs(),
            "div = {}",
            d.max_abs()
        );
        // refinement n: 16 → 32 cuts it by ≈ 4
        let g2 = grid(32);
        let mut rng2 = StdRng::seed_from_u64(5);
        let s2 = divergence_free_sym_field(g2, &mut rng2, 0.05, 2.0).unwrap();
        let d2 = div_rows(&s2, 2).unwrap();
        let ratio = d.max_abs() / d2.max_abs();
        assert!(ratio > 2.5 && ratio < 6.0, "ratio = {ratio}");
    }

    #[test]
    fn ext_d_squares_to_zero() {
        let g = grid(16);
        let mut rng = StdRng::seed_from_u64(6);
        let p = TrigPoly3::random(&mut rng, g.len(), 4, 1.0);
        let f = GridForm::Zero(sample(g, |x| p.eval(x)));
        let df = ext_d(&f, 2).unwrap();
        let ddf = ext_d(&df, 2).unwrap();
        assert!(ddf.max_abs() < 1e-12, "ddf = {}", ddf.max_abs());
        // and once more from degree 1 up to the top-degree error
        let one = GridForm::One(VecField3::from_fn(g, |site| {
            let x = g.point(site);
            [p.eval(x), p.d(x, 0), 0.0]
        }));
        let d1 = ext_d(&one, 2).unwrap();
        let dd1 = ext_d(&d1, 2).unwrap();
        assert!(dd1.max_abs() < 1e-12);
        assert!(ext_d(&dd1, 2).is_err());
    }

    #[test]
    fn ext_d_examples() {
        let g = grid(32);
        let w = TAU / g.len();
        // x-independent 1-form
        let c = GridForm::One(VecField3::from_fn(g, |_| [1.0, -2.0, 0.5]));
        assert_eq!(ext_d(&c, 2).unwrap().max_abs(), 0.0);
        // d(sin(w x²) dx¹) = -w cos(w x²) dx¹∧dx²; dx¹∧dx² = hat(dx³)
        let one = GridForm::One(VecField3::from_fn(g, |site| {
            [(w * g.point(site)[1]).sin(), 0.0, 0.0]
        }));
        let d = ext_d(&one, 2).unwrap();
        let GridForm::TwoHat(d) = d else { panic!() };
        let exact = sample(g, |x| -w * (w * x[1]).cos());
        let err = d
            .comp(2)
            .iter()
            .zip(exact.comp(0))
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 0.5 * w.powi(3) * g.h() * g.h());
        assert_eq!(d.comp(0).iter().fold(0.0_f64, |m, v| m.max(v.abs())), 0.0);
    }

    #[test]
    fn radial_derivatives() {
        let g = RadialGrid1::new(0.25, 4.0, 33).unwrap();
        let r: Vec<f64> = (0..g.m()).map(|i| g.r(i)).collect();
        // exact on linears and quadratics, including the one-sided ends
        let d1 = radial_partial(g, &r);
        assert!(d1.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let r2: Vec<f64> = r.iter().map(|v| v * v).collect();
        let d2 = radial_partial(g, &r2);
        for (i, v) in d2.iter().enumerate() {
            assert!((v - 2.0 * r[i]).abs() < 1e-11);
        }
        let dd = radial_second(g, &r2);
        assert!(dd.iter().all(|v| (v - 2.0).abs() < 1e-10));
        // e^r to O(Δr²)
        let er: Vec<f64> = r.iter().map(|v| v.exp()).collect();
        let de = radial_partial(g, &er);
        let dr = g.dr();
        for (i, v) in de.iter().enumerate() {
            assert!((v - er[i]).abs() < 2.0 * er[i] * dr * dr, "i = {i}");
        }
    }
}
