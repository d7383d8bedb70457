//! Dense exterior algebra on ℝⁿ, n ≤ 7, with a distinguished orthonormal
//! covector basis.
//!
//! A form stores one coefficient per basis subset, indexed by a bitmask over
//! the `dim` basis covectors (bit `i` set ⇔ covector `i` present, covectors
//! in increasing index order).  With 2^dim ≤ 128 coefficients the wedge is a
//! disjointness test plus a permutation parity, and every operation is exact
//! on dyadic-rational inputs.

use crate::{Error, Result};

pub const MAX_DIM: usize = 7;

/// Orientation of the basis: which sign of `e^{0…dim-1}` is the volume form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Positive,
    Negative,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }

    pub fn from_sign(s: f64) -> Orientation {
        if s >= 0.0 {
            Orientation::Positive
        } else {
            Orientation::Negative
        }
    }
}

/// Basis vector `∂_index`, dual to covector `index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisVector {
    pub dim: usize,
    pub index: usize,
}

impl BasisVector {
    pub fn new(dim: usize, index: usize) -> Result<BasisVector> {
        if index >= dim {
            return Err(Error::InvalidAxis { axis: index });
        }
        Ok(BasisVector { dim, index })
    }
}

/// A (generally mixed-grade) exterior form with dense bitmask coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Form {
    dim: usize,
    coeffs: Vec<f64>,
}

/// Parity sign of merging the basis subsets `a` and `b` (disjoint): the sign
/// of the permutation sorting the concatenation (a ascending, b ascending)
/// into ascending order.
fn merge_sign(a: u32, b: u32) -> f64 {
    let mut swaps = 0u32;
    let mut bits = a;
    while bits != 0 {
        let i = bits.trailing_zeros();
        swaps += (b & ((1u32 << i) - 1)).count_ones();
        bits &= bits - 1;
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl Form {
    pub fn zero(dim: usize) -> Form {
        assert!((1..=MAX_DIM).contains(&dim), "dim must be 1..=7");
        Form {
            dim,
            coeffs: vec![0.0; 1 << dim],
        }
    }

    pub fn scalar(dim: usize, value: f64) -> Form {
        let mut f = Form::zero(dim);
        f.coeffs[0] = value;
        f
    }

    /// The basis covector `e^index` as a 1-form.
    pub fn basis(dim: usize, index: usize) -> Form {
        assert!(index < dim);
        let mut f = Form::zero(dim);
        f.coeffs[1 << index] = 1.0;
        f
    }

    /// 1-form with the given covector components.
    pub fn one_form(dim: usize, comps: &[f64]) -> Form {
        assert_eq!(comps.len(), dim);
        let mut f = Form::zero(dim);
        for (i, &c) in comps.iter().enumerate() {
            f.coeffs[1 << i] = c;
        }
        f
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeff(&self, mask: u32) -> f64 {
        self.coeffs[mask as usize]
    }

    pub fn set(&mut self, mask: u32, value: f64) {
        self.coeffs[mask as usize] = value;
    }

    pub fn add_to(&mut self, mask: u32, value: f64) {
        self.coeffs[mask as usize] += value;
    }

    /// Iterator over `(mask, coefficient)` pairs with nonzero coefficient.
    pub fn terms(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(m, &c)| (m as u32, c))
    }

    pub fn scale(&self, c: f64) -> Form {
        Form {
            dim: self.dim,
            coeffs: self.coeffs.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Form) -> Result<Form> {
        self.check_dim(other)?;
        Ok(Form {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Form) -> Result<Form> {
        self.add(&other.scale(-1.0))
    }

    fn check_dim(&self, other: &Form) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(())
    }

    /// Grade-`p` part.
    pub fn grade(&self, p: u32) -> Form {
        let mut out = Form::zero(self.dim);
        for (m, c) in self.terms() {
            if m.count_ones() == p {
                out.coeffs[m as usize] = c;
            }
        }
        out
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |acc, c| acc.max(c.abs()))
    }

    /// Wedge product.  Bilinear, graded-anticommutative; the coefficient of
    /// a mask is the signed sum over its ordered splittings.
    pub fn wedge(&self, other: &Form) -> Result<Form> {
        self.check_dim(other)?;
        let mut out = Form::zero(self.dim);
        for (ma, ca) in self.terms() {
            for (mb, cb) in other.terms() {
                if ma & mb != 0 {
                    continue;
                }
                out.coeffs[(ma | mb) as usize] += merge_sign(ma, mb) * ca * cb;
            }
        }
        Ok(out)
    }

    /// Interior product with the basis vector `∂_index` (first slot).
    pub fn contract_basis(&self, index: usize) -> Form {
        let bit = 1u32 << index;
        let mut out = Form::zero(self.dim);
        for (m, c) in self.terms() {
            if m & bit == 0 {
                continue;
            }
            let below = (m & (bit - 1)).count_ones();
            let sign = if below % 2 == 0 { 1.0 } else { -1.0 };
            out.coeffs[(m ^ bit) as usize] += sign * c;
        }
        out
    }

    /// Interior product with the vector `Σ v_i ∂_i`.
    pub fn contract_vector(&self, v: &[f64]) -> Form {
        assert_eq!(v.len(), self.dim);
        let mut out = Form::zero(self.dim);
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                out = out.add(&self.contract_basis(i).scale(vi)).unwrap();
            }
        }
        out
    }

    /// Hodge star for the declared orthonormal basis:
    /// `⋆ e^I = ± e^{I^c}` so that `e^I ∧ ⋆e^I` is the oriented volume form.
    pub fn hodge_star(&self, orientation: Orientation) -> Form {
        let full: u32 = (1u32 << self.dim) - 1;
        let mut out = Form::zero(self.dim);
        for (m, c) in self.terms() {
            let comp = full ^ m;
            out.coeffs[comp as usize] += orientation.sign() * merge_sign(m, comp) * c;
        }
        out
    }

    /// Evaluate the form on `p` vectors, `p` = grade of interest:
    /// `u(v₁,…,v_p) = (ι(v_p)…ι(v₁) u)` scalar part.
    pub fn evaluate(&self, vectors: &[&[f64]]) -> f64 {
        let mut f = self.clone();
        for v in vectors {
            f = f.contract_vector(v);
        }
        f.coeffs[0]
    }

    /// Linear substitution of the basis covectors: `e^i ↦ Σ_j m[i][j] e^j`.
    /// Rows of `m` beyond `dim` are ignored.
    pub fn substitute(&self, m: &[[f64; MAX_DIM]; MAX_DIM]) -> Form {
        let images: Vec<Form> = (0..self.dim)
            .map(|i| Form::one_form(self.dim, &m[i][..self.dim]))
            .collect();
        let mut out = Form::zero(self.dim);
        for (mask, c) in self.terms() {
            let mut term = Form::scalar(self.dim, c);
            let mut bits = mask;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                term = term.wedge(&images[i]).unwrap();
                bits &= bits - 1;
            }
            out = out.add(&term).unwrap();
        }
        out
    }

    /// Re-index the basis covectors into a space of dimension `new_dim`
    /// through the injective `map` (old index ↦ new index), with the
    /// permutation sign each re-sorted mask picks up.
    pub fn relabel(&self, new_dim: usize, map: &[usize]) -> Form {
        assert_eq!(map.len(), self.dim);
        let mut out = Form::zero(new_dim);
        for (mask, c) in self.terms() {
            let mut new_indices: Vec<usize> = Vec::new();
            let mut bits = mask;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                new_indices.push(map[i]);
                bits &= bits - 1;
            }
            // parity of the insertion sort of the image sequence
            let mut swaps = 0usize;
            for a in 0..new_indices.len() {
                for b in (a + 1)..new_indices.len() {
                    if new_indices[a] > new_indices[b] {
                        swaps += 1;
                    }
                }
            }
            let sign = if swaps % 2 == 0 { 1.0 } else { -1.0 };
            let new_mask: u32 = new_indices.iter().map(|&i| 1u32 << i).sum();
            out.coeffs[new_mask as usize] += sign * c;
        }
        out
    }
}

/// Free-function spelling of the wedge.
pub fn wedge(u: &Form, v: &Form) -> Result<Form> {
    u.wedge(v)
}

/// Interior product `ι(X) u` for a basis vector.
pub fn contract(x: &BasisVector, u: &Form) -> Result<Form> {
    if x.dim != u.dim() {
        return Err(Error::DimensionMismatch {
            left: x.dim,
            right: u.dim(),
        });
    }
    Ok(u.contract_basis(x.index))
}

/// Hodge star of `u` in the declared orthonormal basis.
pub fn hodge_star(u: &Form, orientation: Orientation) -> Form {
    u.hodge_star(orientation)
}

/// The standard SU(3)/G₂ model forms on ℝ⁶ ≅ ℂ³ and ℝ⁷.
///
/// ℝ⁶ basis order: `(x¹, y¹, x², y², x³, y³)` (indices 0..6);
/// ℝ⁷ basis order: `(x⁰, x¹, y¹, x², y², x³, y³)` with the orientation
/// `dx⁰ dx¹ dy¹ dx² dy² dx³ dy³`.
pub mod standard {
    use super::Form;

    pub const DIM6: usize = 6;
    pub const DIM7: usize = 7;

    /// Index of `dx^k` (k = 1..3) in the ℝ⁶ basis.
    pub fn x6(k: usize) -> usize {
        2 * (k - 1)
    }

    /// Index of `dy^k` (k = 1..3) in the ℝ⁶ basis.
    pub fn y6(k: usize) -> usize {
        2 * k - 1
    }

    /// Index of `dx^k` (k = 0..3) in the ℝ⁷ basis.
    pub fn x7(k: usize) -> usize {
        if k == 0 {
            0
        } else {
            2 * k - 1
        }
    }

    /// Index of `dy^k` (k = 1..3) in the ℝ⁷ basis.
    pub fn y7(k: usize) -> usize {
        2 * k
    }

    fn wedge2(dim: usize, i: usize, j: usize) -> Form {
        Form::basis(dim, i).wedge(&Form::basis(dim, j)).unwrap()
    }

    fn wedge3(dim: usize, i: usize, j: usize, k: usize) -> Form {
        wedge2(dim, i, j).wedge(&Form::basis(dim, k)).unwrap()
    }

    /// `ω₀ = Σ_k dx^k ∧ dy^k` on ℝ⁶.
    pub fn omega0() -> Form {
        let mut f = Form::zero(DIM6);
        for k in 1..=3 {
            f = f.add(&wedge2(DIM6, x6(k), y6(k))).unwrap();
        }
        f
    }

    /// `ψ₀ = Im(dz¹dz²dz³) = -dy¹²³ + Σ_k dy^k ∧ hat(dx^k)` on ℝ⁶.
    pub fn psi0() -> Form {
        let mut f = wedge3(DIM6, y6(1), y6(2), y6(3)).scale(-1.0);
        f = f.add(&wedge3(DIM6, y6(1), x6(2), x6(3))).unwrap();
        f = f.add(&wedge3(DIM6, y6(2), x6(3), x6(1))).unwrap();
        f = f.add(&wedge3(DIM6, y6(3), x6(1), x6(2))).unwrap();
        f
    }

    /// `ψ₀# = Re(dz¹dz²dz³) = dx¹²³ - Σ_k dx^k ∧ hat(dy^k)` on ℝ⁶.
    pub fn psi0_sharp() -> Form {
        let mut f = wedge3(DIM6, x6(1), x6(2), x6(3));
        f = f.sub(&wedge3(DIM6, x6(1), y6(2), y6(3))).unwrap();
        f = f.sub(&wedge3(DIM6, x6(2), y6(3), y6(1))).unwrap();
        f = f.sub(&wedge3(DIM6, x6(3), y6(1), y6(2))).unwrap();
        f
    }

    /// Push an ℝ⁶ form into ℝ⁷ (the `dx⁰` slot stays empty).
    pub fn embed7(f: &Form) -> Form {
        f.relabel(DIM7, &[1, 2, 3, 4, 5, 6])
    }

    /// The standard definite 3-form
    /// `φ₀ = -dy¹²³ + dy¹(dx⁰¹+dx²³) + dy²(dx⁰²+dx³¹) + dy³(dx⁰³+dx¹²)`.
    pub fn phi0() -> Form {
        let d = DIM7;
        let mut f = wedge3(d, y7(1), y7(2), y7(3)).scale(-1.0);
        let pairs = [
            (1, (0, 1), (2, 3)),
            (2, (0, 2), (3, 1)),
            (3, (0, 3), (1, 2)),
        ];
        for (k, (a, b), (c, e)) in pairs {
            let two = wedge2(d, x7(a), x7(b))
                .add(&wedge2(d, x7(c), x7(e)))
                .unwrap();
            f = f.add(&Form::basis(d, y7(k)).wedge(&two).unwrap()).unwrap();
        }
        f
    }

    /// The displayed Hodge dual
    /// `⋆φ₀ = dx⁰¹²³ - dy²³(dx⁰¹+dx²³) - dy³¹(dx⁰²+dx³¹) - dy¹²(dx⁰³+dx¹²)`.
    pub fn star_phi0() -> Form {
        let d = DIM7;
        let mut f = wedge2(d, x7(0), x7(1))
            .wedge(&wedge2(d, x7(2), x7(3)))
            .unwrap();
        let pieces = [
            ((2, 3), (0, 1), (2, 3)),
            ((3, 1), (0, 2), (3, 1)),
            ((1, 2), (0, 3), (1, 2)),
        ];
        for ((p, q), (a, b), (c, e)) in pieces {
            let two = wedge2(d, x7(a), x7(b))
                .add(&wedge2(d, x7(c), x7(e)))
                .unwrap();
            let dy2 = wedge2(d, y7(p), y7(q));
            f = f.sub(&dy2.wedge(&two).unwrap()).unwrap();
        }
        f
    }
}

#[cfg(test)]
mod tests {
    use super::standard::*;
    use super::*;
    use proptest::prelude::*;

    fn b6(i: usize) -> Form {
        Form::basis(6, i)
    }

    #[test]
    fn wedge_antisymmetry() {
        let dx1 = b6(0);
        let dx2 = b6(2);
        assert_eq!(dx1.wedge(&dx1).unwrap().max_abs(), 0.0);
        let a = dx1.wedge(&dx2).unwrap();
        let b = dx2.wedge(&dx1).unwrap();
        assert_eq!(a.sub(&b.scale(-1.0)).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn wedge_dim_mismatch() {
        let u = Form::basis(6, 0);
        let v = Form::basis(7, 0);
        assert!(u.wedge(&v).is_err());
    }

    // Independent oracle for ω₀∧ω₀∧ω₀: multiply the three copies of
    // ω₀ = Σ_k dx^k dy^k term by term on sorted index lists.
    #[test]
    fn omega0_cubed() {
        let terms: Vec<[usize; 2]> = (1..=3).map(|k| [x6(k), y6(k)]).collect();
        let mut vol_coeff = 0.0;
        for t1 in &terms {
            for t2 in &terms {
                for t3 in &terms {
                    let mut idx: Vec<usize> = Vec::new();
                    idx.extend_from_slice(t1);
                    idx.extend_from_slice(t2);
                    idx.extend_from_slice(t3);
                    let mut seen = [false; 6];
                    if idx.iter().any(|&i| std::mem::replace(&mut seen[i], true)) {
                        continue;
                    }
                    let mut swaps = 0;
                    for a in 0..6 {
                        for b in (a + 1)..6 {
                            if idx[a] > idx[b] {
                                swaps += 1;
                            }
                        }
                    }
                    vol_coeff += if swaps % 2 == 0 { 1.0 } else { -1.0 };
                }
            }
        }
        assert_eq!(vol_coeff, 6.0);

        let om = omega0();
        let cube = om.wedge(&om).unwrap().wedge(&om).unwrap();
        let full: u32 = (1 << 6) - 1;
        assert_eq!(cube.coeff(full), vol_coeff);
        for (m, c) in cube.terms() {
            if m != full {
                assert_eq!(c, 0.0);
            }
        }
    }

    #[test]
    fn contraction_examples() {
        // ι(∂x¹)(dx¹∧dx²) = dx²
        let f = b6(x6(1)).wedge(&b6(x6(2))).unwrap();
        let g = f.contract_basis(x6(1));
        assert_eq!(g, b6(x6(2)));
        // ι(∂y¹) ω₀ = -dx¹
        let g = omega0().contract_basis(y6(1));
        assert_eq!(g, b6(x6(1)).scale(-1.0));
        // ι(∂x³)ι(∂x²)ι(∂x¹) ψ₀ = 0
        let g = psi0()
            .contract_basis(x6(1))
            .contract_basis(x6(2))
            .contract_basis(x6(3));
        assert_eq!(g.max_abs(), 0.0);
        // contracting a 0-form gives the zero form, not an error
        let z = Form::scalar(6, 3.0).contract_basis(0);
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn star_basics() {
        let one = Form::scalar(6, 1.0);
        let vol = one.hodge_star(Orientation::Positive);
        assert_eq!(vol.coeff((1 << 6) - 1), 1.0);
        // ⋆⋆ = (-1)^{p(n-p)} in Riemannian signature
        for dim in [6usize, 7] {
            for p in 0..=dim as u32 {
                let mask: u32 = (0..p).map(|i| 1u32 << i).sum();
                let mut u = Form::zero(dim);
                u.set(mask, 1.0);
                let ss = u
                    .hodge_star(Orientation::Positive)
                    .hodge_star(Orientation::Positive);
                let sign = if (p * (dim as u32 - p)) % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                assert_eq!(ss, u.scale(sign));
            }
        }
    }

    #[test]
    fn standard_g2_identities() {
        // φ₀ = ω₀ ∧ dx⁰ + ψ₀
        let phi = phi0();
        let built = embed7(&omega0())
            .wedge(&Form::basis(DIM7, x7(0)))
            .unwrap()
            .add(&embed7(&psi0()))
            .unwrap();
        assert_eq!(phi.sub(&built).unwrap().max_abs(), 0.0);

        // ⋆φ₀ = -ψ₀# ∧ dx⁰ + ½ ω₀∧ω₀
        let om7 = embed7(&omega0());
        let built = embed7(&psi0_sharp())
            .wedge(&Form::basis(DIM7, x7(0)))
            .unwrap()
            .scale(-1.0)
            .add(&om7.wedge(&om7).unwrap().scale(0.5))
            .unwrap();
        assert_eq!(star_phi0().sub(&built).unwrap().max_abs(), 0.0);

        // the Hodge star of the implementation reproduces the displayed dual
        let starred = phi.hodge_star(Orientation::Positive);
        assert_eq!(starred.sub(&star_phi0()).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn relabel_sign() {
        // swapping two covectors flips a 2-form coefficient
        let f = b6(0).wedge(&b6(1)).unwrap();
        let g = f.relabel(6, &[1, 0, 2, 3, 4, 5]);
        assert_eq!(g.coeff(0b11), -1.0);
    }

    #[test]
    fn substitute_matches_relabel() {
        let f = phi0();
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..7 {
            m[i][(i + 1) % 7] = 1.0;
        }
        let map: Vec<usize> = (0..7).map(|i| (i + 1) % 7).collect();
        let a = f.substitute(&m);
        let b = f.relabel(7, &map);
        assert_eq!(a.sub(&b).unwrap().max_abs(), 0.0);
    }

    // random mixed forms with dyadic coefficients, exact arithmetic
    fn dyadic_form(dim: usize) -> impl Strategy<Value = Form> {
        prop::collection::vec(-8i32..=8, 1 << dim).prop_map(move |v| {
            let mut f = Form::zero(dim);
            for (m, c) in v.into_iter().enumerate() {
                f.set(m as u32, c as f64 / 4.0);
            }
            f
        })
    }

    proptest! {
        #[test]
        fn wedge_associative(u in dyadic_form(5), v in dyadic_form(5), w in dyadic_form(5)) {
            let a = u.wedge(&v).unwrap().wedge(&w).unwrap();
            let b = u.wedge(&v.wedge(&w).unwrap()).unwrap();
            prop_assert_eq!(a.sub(&b).unwrap().max_abs(), 0.0);
        }

        #[test]
        fn graded_anticommutativity(u in dyadic_form(5), v in dyadic_form(5), p in 0u32..=5, q in 0u32..=5) {
            let up = u.grade(p);
            let vq = v.grade(q);
            let a = up.wedge(&vq).unwrap();
            let sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
            let b = vq.wedge(&up).unwrap().scale(sign);
            prop_assert_eq!(a.sub(&b).unwrap().max_abs(), 0.0);
        }

        #[test]
        fn double_contraction_vanishes(u in dyadic_form(6), i in 0usize..6) {
            let g = u.contract_basis(i).contract_basis(i);
            prop_assert_eq!(g.max_abs(), 0.0);
        }

        #[test]
        fn contraction_leibniz(u in dyadic_form(5), v in dyadic_form(5), i in 0usize..5, p in 0u32..=5) {
            // ι(X)(α∧β) = ι(X)α ∧ β + (-1)^p α ∧ ι(X)β for grade-p α
            let alpha = u.grade(p);
            let lhs = alpha.wedge(&v).unwrap().contract_basis(i);
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            let rhs = alpha.contract_basis(i).wedge(&v).unwrap()
                .add(&alpha.wedge(&v.contract_basis(i)).unwrap().scale(sign)).unwrap();
            prop_assert_eq!(lhs.sub(&rhs).unwrap().max_abs(), 0.0);
        }
    }
}
