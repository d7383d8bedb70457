//! Exact-shape 3×3 matrix kernel.
//!
//! Everything the index formulas of the flows need: determinant, adjugate
//! (`Ã A = det(A) I`), the Cholesky factor of a positive-definite symmetric
//! matrix, and the double Levi-Civita contraction
//! `N_ij = ε_{iαβ} ε_{jγδ} P_{αγ} Q_{βδ}`.

use crate::{Error, Result};
use std::ops::{Add, Mul, Neg, Sub};

/// Levi-Civita symbol ε_{ijk} for i,j,k ∈ {0,1,2}.
pub const fn eps(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// General 3×3 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat3(pub [[f64; 3]; 3]);

/// Symmetric 3×3 matrix, upper triangle stored as (11,12,13,22,23,33).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymMat3(pub [f64; 6]);

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);

    pub fn identity() -> Mat3 {
        Mat3::diag(1.0, 1.0, 1.0)
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Mat3 {
        Mat3([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn scale(&self, c: f64) -> Mat3 {
        let mut out = *self;
        for row in out.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= c;
            }
        }
        out
    }

    /// Inverse via the adjugate; errors when the determinant is tiny.
    pub fn inverse(&self) -> Result<Mat3> {
        let d = det3(self);
        if d.abs() < 1e-300 {
            return Err(Error::DegenerateCoframe { det: d });
        }
        Ok(adjugate(self).scale(1.0 / d))
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Largest absolute entry of `M - Mᵀ`.
    pub fn asym_defect(&self) -> f64 {
        let mut d = 0.0_f64;
        for i in 0..3 {
            for j in (i + 1)..3 {
                d = d.max((self.0[i][j] - self.0[j][i]).abs());
            }
        }
        d
    }

    /// Symmetric part `(M + Mᵀ)/2`.
    pub fn symmetrize(&self) -> SymMat3 {
        let m = &self.0;
        SymMat3([
            m[0][0],
            0.5 * (m[0][1] + m[1][0]),
            0.5 * (m[0][2] + m[2][0]),
            m[1][1],
            0.5 * (m[1][2] + m[2][1]),
            m[2][2],
        ])
    }

    pub fn mul_vec(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, rhs: Mat3) -> Mat3 {
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, rhs: Mat3) -> Mat3 {
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] -= rhs.0[i][j];
            }
        }
        out
    }
}

impl Neg for Mat3 {
    type Output = Mat3;
    fn neg(self) -> Mat3 {
        self.scale(-1.0)
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, rhs: Mat3) -> Mat3 {
        let mut out = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += self.0[i][k] * rhs.0[k][j];
                }
                out.0[i][j] = s;
            }
        }
        out
    }
}

const SYM_IDX: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];

impl SymMat3 {
    pub fn identity() -> SymMat3 {
        SymMat3::diag(1.0, 1.0, 1.0)
    }

    pub fn diag(a: f64, b: f64, c: f64) -> SymMat3 {
        SymMat3([a, 0.0, 0.0, b, 0.0, c])
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.0[SYM_IDX[i][j]]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.0[SYM_IDX[i][j]] = v;
    }

    pub fn to_mat3(&self) -> Mat3 {
        let mut m = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.at(i, j);
            }
        }
        m
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[3] + self.0[5]
    }

    pub fn scale(&self, c: f64) -> SymMat3 {
        let mut out = *self;
        for v in out.0.iter_mut() {
            *v *= c;
        }
        out
    }

    pub fn add(&self, rhs: &SymMat3) -> SymMat3 {
        let mut out = *self;
        for (v, w) in out.0.iter_mut().zip(rhs.0.iter()) {
            *v += w;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn det(&self) -> f64 {
        det3(&self.to_mat3())
    }

    /// Adjugate of a symmetric matrix (symmetric again).
    pub fn adjugate(&self) -> SymMat3 {
        adjugate(&self.to_mat3()).symmetrize()
    }

    /// Leading-principal-minor test; the threshold for minor k scales with
    /// `(1e-12 ‖S‖)^k` so degenerate input is rejected at any overall scale.
    pub fn is_pos_def(&self) -> Result<()> {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let m1 = self.at(0, 0);
        let m2 = self.at(0, 0) * self.at(1, 1) - self.at(0, 1) * self.at(0, 1);
        let m3 = self.det();
        for (k, m) in [(1usize, m1), (2, m2), (3, m3)] {
            if m <= 1e-12 * scale.powi(k as i32) {
                return Err(Error::NotPositiveDefinite { minor: k, value: m });
            }
        }
        Ok(())
    }
}

/// Determinant of a 3×3 matrix.
pub fn det3(m: &Mat3) -> f64 {
    let a = &m.0;
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Adjugate matrix, satisfying `adjugate(M) · M = det3(M) · I` (also for
/// singular `M`).
pub fn adjugate(m: &Mat3) -> Mat3 {
    let a = &m.0;
    let cof = |i: usize, j: usize| -> f64 {
        let r = [(i + 1) % 3, (i + 2) % 3];
        let c = [(j + 1) % 3, (j + 2) % 3];
        a[r[0]][c[0]] * a[r[1]][c[1]] - a[r[0]][c[1]] * a[r[1]][c[0]]
    };
    // adj = transpose of the cofactor matrix
    let mut out = Mat3::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            out.0[i][j] = cof(j, i);
        }
    }
    out
}

/// Lower-triangular Cholesky factor with positive diagonal: `Q ᵀQ = S`.
///
/// The factor is the canonical representative of the `Q`-gauge freedom
/// (`S = Q ᵀQ` determines `Q` only up to right multiplication by `O(3)`).
pub fn chol_factor(s: &SymMat3) -> Result<Mat3> {
    s.is_pos_def()?;
    let mut q = [[0.0_f64; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut sum = s.at(i, j);
            for k in 0..j {
                sum -= q[i][k] * q[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::NotPositiveDefinite {
                        minor: i + 1,
                        value: sum,
                    });
                }
                q[i][i] = sum.sqrt();
            } else {
                q[i][j] = sum / q[j][j];
            }
        }
    }
    Ok(Mat3(q))
}

/// Double ε-contraction `N_ij = ε_{iαβ} ε_{jγδ} P_{αγ} Q_{βδ}`.
///
/// Bilinear; `eps_contract2(P, P) = 2 adjugate(P)ᵀ`, so for symmetric `P`
/// it is twice the adjugate.
pub fn eps_contract2(p: &Mat3, q: &Mat3) -> Mat3 {
    let mut out = Mat3::ZERO;
    for i in 0..3 {
        for a in 0..3 {
            for b in 0..3 {
                let e1 = eps(i, a, b);
                if e1 == 0.0 {
                    continue;
                }
                for j in 0..3 {
                    for g in 0..3 {
                        for d in 0..3 {
                            let e2 = eps(j, g, d);
                            if e2 == 0.0 {
                                continue;
                            }
                            out.0[i][j] += e1 * e2 * p.0[a][g] * q.0[b][d];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Commutator `[A, B] = AB - BA`.
pub fn commutator(a: &Mat3, b: &Mat3) -> Mat3 {
    *a * *b - *b * *a
}
