//! Liouville-space plumbing for the four-level system.
//!
//! A density matrix ρ is flattened row-major, `vec(ρ)[4 i + j] = ρ_ij`, and a
//! linear map on 4×4 matrices becomes a 16×16 complex matrix acting on that
//! vector.

use nalgebra::{Matrix4, SMatrix, SVector};
use num_complex::Complex64;

use crate::error::{Result, SimError};

pub type C64 = Complex64;
pub type Mat4 = Matrix4<C64>;
pub type LVec = SVector<C64, 16>;
pub type SuperMatrix = SMatrix<C64, 16, 16>;

pub const LEVELS: usize = 4;
pub const LDIM: usize = LEVELS * LEVELS;

/// Pivot ratio below which an LU factorisation is declared singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-13;

/// Largest modulus over the entries of a complex matrix or vector.
pub fn max_norm<'a>(entries: impl IntoIterator<Item = &'a C64>) -> f64 {
    entries.into_iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[inline]
pub const fn idx(i: usize, j: usize) -> usize {
    LEVELS * i + j
}

pub fn vectorize(rho: &Mat4) -> LVec {
    LVec::from_fn(|k, _| rho[(k / LEVELS, k % LEVELS)])
}

pub fn unvectorize(v: &LVec) -> Mat4 {
    Mat4::from_fn(|i, j| v[idx(i, j)])
}

/// Row of the trace functional: `trace_row · vec(ρ) = tr ρ`.
pub fn trace_row() -> SMatrix<C64, 1, 16> {
    let mut row = SMatrix::<C64, 1, 16>::zeros();
    for i in 0..LEVELS {
        row[idx(i, i)] = C64::new(1.0, 0.0);
    }
    row
}

/// A linear map on 4×4 matrices in the row-major Liouville representation.
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator(pub SuperMatrix);

impl Superoperator {
    pub fn zero() -> Self {
        Self(SuperMatrix::zeros())
    }

    /// ρ ↦ Aρ
    pub fn left(a: &Mat4) -> Self {
        let mut s = SuperMatrix::zeros();
        for i in 0..LEVELS {
            for j in 0..LEVELS {
                for k in 0..LEVELS {
                    s[(idx(i, j), idx(k, j))] += a[(i, k)];
                }
            }
        }
        Self(s)
    }

    /// ρ ↦ ρB
    pub fn right(b: &Mat4) -> Self {
        let mut s = SuperMatrix::zeros();
        for i in 0..LEVELS {
            for j in 0..LEVELS {
                for k in 0..LEVELS {
                    s[(idx(i, j), idx(i, k))] += b[(k, j)];
                }
            }
        }
        Self(s)
    }

    /// ρ ↦ −i[H, ρ]
    pub fn commutator(h: &Mat4) -> Self {
        let minus_i = C64::new(0.0, -1.0);
        Self((Self::left(h).0 - Self::right(h).0) * minus_i)
    }

    /// ρ ↦ LρL† − ½{L†L, ρ} for a single jump operator.
    pub fn lindblad(jump: &Mat4) -> Self {
        let jd = jump.adjoint();
        let jdj = jd * jump;
        let mut s = SuperMatrix::zeros();
        for i in 0..LEVELS {
            for j in 0..LEVELS {
                for k in 0..LEVELS {
                    for l in 0..LEVELS {
                        s[(idx(i, j), idx(k, l))] += jump[(i, k)] * jd[(l, j)];
                    }
                }
            }
        }
        let half = C64::new(0.5, 0.0);
        Self(s - (Self::left(&jdj).0 + Self::right(&jdj).0) * half)
    }

    pub fn apply(&self, rho: &Mat4) -> Mat4 {
        unvectorize(&(self.0 * vectorize(rho)))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }
}

impl std::ops::Add for Superoperator {
    type Output = Superoperator;
    fn add(self, rhs: Superoperator) -> Superoperator {
        Superoperator(self.0 + rhs.0)
    }
}

/// LU factorisation with partial pivoting of a 16×16 complex matrix.
///
/// Hand-rolled on fixed arrays: this sits in the innermost loop of every
/// velocity-class solve.
#[derive(Clone)]
pub struct Lu16 {
    lu: [[C64; LDIM]; LDIM],
    perm: [usize; LDIM],
}

impl Lu16 {
    pub fn factor(m: &SuperMatrix) -> Result<Self> {
        let mut lu = [[C64::new(0.0, 0.0); LDIM]; LDIM];
        for (i, row) in lu.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[(i, j)];
            }
        }
        let mut perm = [0usize; LDIM];
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i;
        }
        let mut max_pivot = 0.0_f64;
        let mut min_pivot = f64::INFINITY;
        for col in 0..LDIM {
            let mut piv = col;
            let mut best = lu[col][col].norm_sqr();
            for (r, row) in lu.iter().enumerate().skip(col + 1) {
                let v = row[col].norm_sqr();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if piv != col {
                lu.swap(piv, col);
                perm.swap(piv, col);
            }
            let p = lu[col][col];
            let pn = p.norm();
            max_pivot = max_pivot.max(pn);
            min_pivot = min_pivot.min(pn);
            if pn == 0.0 {
                return Err(SimError::Singular { pivot_ratio: 0.0 });
            }
            let inv = p.inv();
            let (top, bottom) = lu.split_at_mut(col + 1);
            let prow = &top[col];
            for row in bottom.iter_mut() {
                let f = row[col] * inv;
                if f.re == 0.0 && f.im == 0.0 {
                    row[col] = f;
                    continue;
                }
                row[col] = f;
                for c in col + 1..LDIM {
                    row[c] -= f * prow[c];
                }
            }
        }
        let ratio = min_pivot / max_pivot;
        if ratio < SINGULAR_PIVOT_RATIO {
            return Err(SimError::Singular { pivot_ratio: ratio });
        }
        Ok(Self { lu, perm })
    }

    pub fn solve_vec(&self, b: &LVec) -> LVec {
        let mut x = [C64::new(0.0, 0.0); LDIM];
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = b[self.perm[i]];
        }
        self.substitute(&mut x);
        LVec::from_iterator(x)
    }

    /// Solves `A X = B` column by column.
    pub fn solve_mat(&self, b: &SuperMatrix) -> SuperMatrix {
        let mut out = SuperMatrix::zeros();
        for c in 0..LDIM {
            let col = b.column(c);
            if col.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                continue;
            }
            let mut x = [C64::new(0.0, 0.0); LDIM];
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = col[self.perm[i]];
            }
            self.substitute(&mut x);
            for (r, v) in x.iter().enumerate() {
                out[(r, c)] = *v;
            }
        }
        out
    }

    fn substitute(&self, x: &mut [C64; LDIM]) {
        for i in 0..LDIM {
            let mut s = x[i];
            for (j, xj) in x.iter().enumerate().take(i) {
                s -= self.lu[i][j] * xj;
            }
            x[i] = s;
        }
        for i in (0..LDIM).rev() {
            let mut s = x[i];
            for j in i + 1..LDIM {
                s -= self.lu[i][j] * x[j];
            }
            x[i] = s / self.lu[i][i];
        }
    }
}

/// Solves `L vec(ρ) = 0` with `tr ρ = 1` by overwriting the ρ₁₁ equation
/// with the trace constraint. Any diagonal equation is redundant for a
/// trace-preserving generator.
pub fn solve_with_trace(generator: &SuperMatrix) -> Result<Mat4> {
    let mut a = *generator;
    let row = idx(0, 0);
    let tr = trace_row();
    for c in 0..LDIM {
        a[(row, c)] = tr[c];
    }
    let mut rhs = LVec::zeros();
    rhs[row] = C64::new(1.0, 0.0);
    let lu = Lu16::factor(&a)?;
    Ok(unvectorize(&lu.solve_vec(&rhs)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(seed: u64) -> Mat4 {
        // Small deterministic pseudo-random matrix.
        let mut s = seed;
        Mat4::from_fn(|_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((s >> 33) as f64) / (1u64 << 31) as f64 - 0.5;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = ((s >> 33) as f64) / (1u64 << 31) as f64 - 0.5;
            C64::new(a, b)
        })
    }

    #[test]
    fn left_right_match_matrix_products() {
        let a = sample(1);
        let rho = sample(2);
        let l = Superoperator::left(&a).apply(&rho);
        let r = Superoperator::right(&a).apply(&rho);
        assert!((l - a * rho).norm() < 1e-14);
        assert!((r - rho * a).norm() < 1e-14);
    }

    #[test]
    fn commutator_with_identity_vanishes() {
        let h = sample(3);
        let id = Mat4::identity();
        assert!(Superoperator::commutator(&h).apply(&id).norm() < 1e-14);
    }

    #[test]
    fn lu_solves_random_system() {
        let mut m = SuperMatrix::zeros();
        let mut k = 0;
        for i in 0..LDIM {
            for j in 0..LDIM {
                k += 1;
                m[(i, j)] = C64::new(((k * 37) % 11) as f64 - 5.0, ((k * 17) % 7) as f64 - 3.0);
            }
            m[(i, i)] += C64::new(40.0, 0.0);
        }
        let b = LVec::from_fn(|i, _| C64::new(i as f64, 1.0));
        let x = Lu16::factor(&m).unwrap().solve_vec(&b);
        assert!((m * x - b).norm() < 1e-10);
    }

    #[test]
    fn lu_reports_singular() {
        let m = SuperMatrix::zeros();
        assert!(matches!(Lu16::factor(&m), Err(SimError::Singular { .. })));
    }
}
