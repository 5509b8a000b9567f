//! Periodic steady state of the modulated Bloch equations.
//!
//! Writing `ρ(t) = Σ_n ρ⁽ⁿ⁾ e^{−i n ω t}` turns the master equation into the
//! harmonic-balance system
//!
//! ```text
//! (L₀ + i n ω) ρ⁽ⁿ⁾ + Σ_{m≠0} L_m ρ⁽ⁿ⁻ᵐ⁾ = 0,
//! ```
//!
//! which is block-tridiagonal when the drive only has |m| ≤ 1. It is solved
//! here by matrix continued fractions, with a dense stacked solve as the
//! independent check.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::atom::{DensityMatrix, HamiltonianHarmonics};
use crate::error::{Result, SimError};
use crate::liouville::{
    idx, max_norm, solve_with_trace, trace_row, unvectorize, vectorize, LVec, Mat4, Superoperator,
    SuperMatrix, C64, LDIM, SINGULAR_PIVOT_RATIO,
};

/// Harmonics ρ⁽ⁿ⁾ for n ∈ [−N, N].
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicDensityMatrix {
    n_max: usize,
    blocks: Vec<Mat4>,
}

impl HarmonicDensityMatrix {
    pub fn zeros(n_max: usize) -> Self {
        Self { n_max, blocks: vec![Mat4::zeros(); 2 * n_max + 1] }
    }

    pub fn from_static(rho: &DensityMatrix) -> Self {
        Self { n_max: 0, blocks: vec![rho.0] }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// ρ⁽ⁿ⁾; zero outside the stored range.
    pub fn get(&self, n: i32) -> Mat4 {
        if n.unsigned_abs() as usize > self.n_max {
            Mat4::zeros()
        } else {
            self.blocks[(n + self.n_max as i32) as usize]
        }
    }

    pub fn set(&mut self, n: i32, m: Mat4) {
        let i = (n + self.n_max as i32) as usize;
        self.blocks[i] = m;
    }

    pub fn rho21(&self, n: i32) -> C64 {
        self.get(n)[(1, 0)]
    }

    /// ρ₂₁⁽ⁿ⁾ for n = −1, 0, +1.
    pub fn rho21_triplet(&self) -> [C64; 3] {
        [self.rho21(-1), self.rho21(0), self.rho21(1)]
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, &Mat4)> {
        let n = self.n_max as i32;
        self.blocks.iter().enumerate().map(move |(i, m)| (i as i32 - n, m))
    }

    /// ρ(t) at modulation phase θ = ω t.
    pub fn at_phase(&self, theta: f64) -> Mat4 {
        self.iter()
            .fold(Mat4::zeros(), |acc, (n, m)| acc + m * C64::from_polar(1.0, -(n as f64) * theta))
    }

    /// max_n ‖ρ⁽⁻ⁿ⁾ − (ρ⁽ⁿ⁾)†‖_max
    pub fn pairing_residual(&self) -> f64 {
        (0..=self.n_max as i32)
            .map(|n| max_norm((self.get(-n) - self.get(n).adjoint()).iter()))
            .fold(0.0, f64::max)
    }

    /// Weighted accumulation `self += w · other` over the common range.
    pub fn accumulate(&mut self, other: &HarmonicDensityMatrix, weight: f64) {
        if other.n_max > self.n_max {
            let mut grown = HarmonicDensityMatrix::zeros(other.n_max);
            for (n, m) in self.iter() {
                grown.set(n, *m);
            }
            *self = grown;
        }
        let w = C64::new(weight, 0.0);
        for (n, m) in other.iter() {
            let cur = self.get(n);
            self.set(n, cur + m * w);
        }
    }

    /// Largest elementwise difference over all harmonics.
    pub fn max_abs_diff(&self, other: &HarmonicDensityMatrix) -> f64 {
        let n = self.n_max.max(other.n_max) as i32;
        (-n..=n).map(|k| max_norm((self.get(k) - other.get(k)).iter())).fold(0.0, f64::max)
    }
}

/// Truncation control for the harmonic expansion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloquetConfig {
    /// Starting truncation order N.
    pub n_max: usize,
    /// Convergence tolerance on ρ⁽±¹⁾ between successive truncations.
    pub tol: f64,
    /// Double N until ρ⁽±¹⁾ stops changing.
    pub adaptive: bool,
    /// Ceiling for adaptive doubling.
    pub n_max_limit: usize,
}

impl Default for FloquetConfig {
    fn default() -> Self {
        Self { n_max: 5, tol: 1e-8, adaptive: true, n_max_limit: 80 }
    }
}

impl FloquetConfig {
    pub fn fixed(n_max: usize) -> Self {
        Self { n_max, adaptive: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_max < 1 {
            return Err(SimError::InvalidInput("n_max must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(SimError::InvalidInput("tol must be > 0".into()));
        }
        if self.n_max_limit < self.n_max {
            return Err(SimError::InvalidInput("n_max_limit must be >= n_max".into()));
        }
        Ok(())
    }
}

/// Liouvillian harmonics: `L₀ = −i[H₀,·] + D` and `L_m = −i[H_m,·]`.
#[derive(Clone, Debug)]
pub struct FloquetBlocks {
    pub l0: Superoperator,
    pub off: BTreeMap<i32, Superoperator>,
}

impl FloquetBlocks {
    pub fn get(&self, m: i32) -> Option<&Superoperator> {
        if m == 0 {
            Some(&self.l0)
        } else {
            self.off.get(&m)
        }
    }

    pub fn max_index(&self) -> i32 {
        self.off.keys().map(|m| m.abs()).max().unwrap_or(0)
    }

    pub fn is_static(&self) -> bool {
        self.off.is_empty()
    }
}

pub fn assemble_blocks(h: &HamiltonianHarmonics, dissipator: &Superoperator) -> FloquetBlocks {
    let l0 = Superoperator::commutator(&h.carrier()) + dissipator.clone();
    let off = h
        .terms
        .iter()
        .filter(|(m, hm)| **m != 0 && hm.iter().any(|z| z.norm() > 0.0))
        .map(|(m, hm)| (*m, Superoperator::commutator(hm)))
        .collect();
    FloquetBlocks { l0, off }
}

/// Norm of the harmonic-balance residual over the stored harmonics (terms
/// coupling outside the truncation window are dropped, consistent with the
/// truncated system).
pub fn harmonic_balance_residual(
    blocks: &FloquetBlocks,
    omega_mod: f64,
    rho: &HarmonicDensityMatrix,
) -> f64 {
    let n = rho.n_max() as i32;
    let mut worst = 0.0_f64;
    for k in -n..=n {
        let mut r = blocks.l0.0 * vectorize(&rho.get(k))
            + vectorize(&rho.get(k)) * C64::new(0.0, k as f64 * omega_mod);
        for (m, lm) in &blocks.off {
            r += lm.0 * vectorize(&rho.get(k - m));
        }
        worst = worst.max(max_norm(r.iter()));
    }
    worst
}

/// Matrix-continued-fraction solve, with adaptive truncation if enabled.
pub fn solve_continued_fraction(
    blocks: &FloquetBlocks,
    omega_mod: f64,
    cfg: &FloquetConfig,
) -> Result<HarmonicDensityMatrix> {
    cfg.validate()?;
    if let Some((m, _)) = blocks.off.iter().find(|(m, _)| m.abs() > 1) {
        return Err(SimError::NotTridiagonal { index: *m });
    }
    if blocks.is_static() {
        let rho = solve_with_trace(&blocks.l0.0)?;
        return Ok(HarmonicDensityMatrix::from_static(&DensityMatrix(rho)));
    }
    if !(omega_mod > 0.0) {
        return Err(SimError::InvalidInput("omega_mod must be > 0 for a modulated drive".into()));
    }

    let mut n = cfg.n_max;
    let mut current = continued_fraction_fixed(blocks, omega_mod, n)?;
    if !cfg.adaptive {
        return Ok(current);
    }
    let mut change = f64::INFINITY;
    loop {
        let next_n = 2 * n;
        if next_n > cfg.n_max_limit {
            return Err(SimError::NoConvergence { n_max: n, change });
        }
        let next = continued_fraction_fixed(blocks, omega_mod, next_n)?;
        change = sideband_change(&current, &next);
        if change < cfg.tol {
            return Ok(next);
        }
        current = next;
        n = next_n;
    }
}

fn sideband_change(a: &HarmonicDensityMatrix, b: &HarmonicDensityMatrix) -> f64 {
    max_norm((a.get(1) - b.get(1)).iter()).max(max_norm((a.get(-1) - b.get(-1)).iter()))
}

/// Continued fraction at a fixed truncation `n_max`.
///
/// For n > 0 the ansatz `ρ⁽ⁿ⁾ = Sₙ ρ⁽ⁿ⁻¹⁾` gives
/// `Sₙ = −(L₀ + i n ω + L₋₁ Sₙ₊₁)⁻¹ L₊₁` with `S_{N+1} = 0`. Because
/// `(L_m ρ)† = L₋ₘ ρ†`, the negative-side transfer matrices are the images
/// `T₋ₙ = P S̄ₙ P` of the positive ones under ρ ↦ ρ† (P transposes the
/// flattened index), so only one side is eliminated. The centre block
/// satisfies `(L₀ + L₋₁ S₁ + L₊₁ T₋₁) ρ⁽⁰⁾ = 0` with unit trace, and the
/// negative harmonics follow from `ρ⁽⁻ⁿ⁾ = (ρ⁽ⁿ⁾)†`.
pub fn continued_fraction_fixed(
    blocks: &FloquetBlocks,
    omega_mod: f64,
    n_max: usize,
) -> Result<HarmonicDensityMatrix> {
    let l0 = to_rows(&blocks.l0.0);
    let lp = blocks.off.get(&1).map(|s| Sparse::from(&s.0)).unwrap_or_default();
    let lm = blocks.off.get(&-1).map(|s| Sparse::from(&s.0)).unwrap_or_default();

    let s_pos = ladder(&l0, omega_mod, n_max, &lp, &lm)?;
    let t_neg = adjoint_image(&s_pos[0]);

    let mut centre = l0;
    lm.mul_add_into(&s_pos[0], &mut centre);
    lp.mul_add_into(&t_neg, &mut centre);
    let rho0 = solve_with_trace(&from_rows(&centre))?;

    let mut out = HarmonicDensityMatrix::zeros(n_max);
    out.set(0, rho0);
    let mut up: [C64; LDIM] = std::array::from_fn(|k| rho0[(k / 4, k % 4)]);
    for k in 1..=n_max {
        up = mat_vec(&s_pos[k - 1], &up);
        let m = Mat4::from_fn(|i, j| up[idx(i, j)]);
        out.set(k as i32, m);
        out.set(-(k as i32), m.adjoint());
    }
    Ok(out)
}

/// `P X̄ P`: the matrix of ρ ↦ (X ρ†)†.
fn adjoint_image(x: &Rows) -> Rows {
    let t = |k: usize| idx(k % 4, k / 4);
    std::array::from_fn(|i| std::array::from_fn(|j| x[t(i)][t(j)].conj()))
}

type Rows = [[C64; LDIM]; LDIM];

const CZERO: C64 = C64::new(0.0, 0.0);

fn to_rows(m: &SuperMatrix) -> Rows {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

fn from_rows(r: &Rows) -> SuperMatrix {
    SuperMatrix::from_fn(|i, j| r[i][j])
}

fn mat_vec(m: &Rows, v: &[C64; LDIM]) -> [C64; LDIM] {
    std::array::from_fn(|i| m[i].iter().zip(v).fold(CZERO, |acc, (a, b)| acc + a * b))
}

/// Nonzero entries of a commutator block; these carry only a handful of
/// entries per row.
#[derive(Default)]
struct Sparse {
    entries: Vec<(usize, usize, C64)>,
}

impl Sparse {
    fn from(m: &SuperMatrix) -> Self {
        let mut entries = Vec::new();
        for i in 0..LDIM {
            for k in 0..LDIM {
                let v = m[(i, k)];
                if v.re != 0.0 || v.im != 0.0 {
                    entries.push((i, k, v));
                }
            }
        }
        Self { entries }
    }

    /// `out += self · b`
    fn mul_add_into(&self, b: &Rows, out: &mut Rows) {
        for &(i, k, a) in &self.entries {
            let (src, dst) = (&b[k], &mut out[i]);
            for j in 0..LDIM {
                dst[j] += a * src[j];
            }
        }
    }

    /// `−self` as a dense block.
    fn negated_dense(&self) -> Rows {
        let mut out = [[CZERO; LDIM]; LDIM];
        for &(i, k, a) in &self.entries {
            out[i][k] = -a;
        }
        out
    }
}

/// Positive-side transfer matrices `S₁ … S_N`.
fn ladder(l0: &Rows, omega_mod: f64, n_max: usize, feed: &Sparse, close: &Sparse) -> Result<Vec<Rows>> {
    let mut out: Vec<Rows> = Vec::with_capacity(n_max);
    for k in (1..=n_max).rev() {
        let mut m = *l0;
        let shift = C64::new(0.0, k as f64 * omega_mod);
        for (d, row) in m.iter_mut().enumerate() {
            row[d] += shift;
        }
        if let Some(prev) = out.last() {
            close.mul_add_into(prev, &mut m);
        }
        let mut rhs = feed.negated_dense();
        solve_rows_in_place(&mut m, &mut rhs)?;
        out.push(rhs);
    }
    out.reverse();
    Ok(out)
}

/// Gaussian elimination with partial pivoting on `[A | B]`; B is overwritten
/// with `A⁻¹ B`.
fn solve_rows_in_place(a: &mut Rows, b: &mut Rows) -> Result<()> {
    let mut max_pivot = 0.0_f64;
    let mut min_pivot = f64::INFINITY;
    for col in 0..LDIM {
        let mut piv = col;
        let mut best = a[col][col].norm_sqr();
        for r in col + 1..LDIM {
            let v = a[r][col].norm_sqr();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if piv != col {
            a.swap(piv, col);
            b.swap(piv, col);
        }
        let p = a[col][col];
        let pn = p.norm();
        max_pivot = max_pivot.max(pn);
        min_pivot = min_pivot.min(pn);
        if pn == 0.0 {
            return Err(SimError::Singular { pivot_ratio: 0.0 });
        }
        let inv = p.inv();
        let (a_top, a_bot) = a.split_at_mut(col + 1);
        let (b_top, b_bot) = b.split_at_mut(col + 1);
        let (arow, brow) = (&a_top[col], &b_top[col]);
        for (ar, br) in a_bot.iter_mut().zip(b_bot.iter_mut()) {
            let f = ar[col] * inv;
            if f.re == 0.0 && f.im == 0.0 {
                continue;
            }
            for c in col + 1..LDIM {
                ar[c] -= f * arow[c];
            }
            for c in 0..LDIM {
                br[c] -= f * brow[c];
            }
        }
    }
    if min_pivot / max_pivot < SINGULAR_PIVOT_RATIO {
        return Err(SimError::Singular { pivot_ratio: min_pivot / max_pivot });
    }
    for i in (0..LDIM).rev() {
        let (b_top, b_bot) = b.split_at_mut(i + 1);
        let bi = &mut b_top[i];
        for (j, bj) in b_bot.iter().enumerate() {
            let aij = a[i][i + 1 + j];
            if aij.re == 0.0 && aij.im == 0.0 {
                continue;
            }
            for c in 0..LDIM {
                bi[c] -= aij * bj[c];
            }
        }
        let inv = a[i][i].inv();
        for v in bi.iter_mut() {
            *v *= inv;
        }
    }
    Ok(())
}

/// Dense solve of the stacked harmonic-balance system for |n| ≤ `n_max`.
/// Accepts drives with any harmonic span.
pub fn solve_direct(
    blocks: &FloquetBlocks,
    omega_mod: f64,
    n_max: usize,
) -> Result<HarmonicDensityMatrix> {
    if (blocks.max_index() as usize) > n_max {
        return Err(SimError::InvalidInput(format!(
            "n_max = {n_max} is below the drive harmonic {}",
            blocks.max_index()
        )));
    }
    let nb = 2 * n_max + 1;
    let dim = LDIM * nb;
    let mut a = DMatrix::<C64>::zeros(dim, dim);
    let n = n_max as i32;
    let block_of = |k: i32| ((k + n) as usize) * LDIM;
    for k in -n..=n {
        let r0 = block_of(k);
        let shift = C64::new(0.0, k as f64 * omega_mod);
        for i in 0..LDIM {
            for j in 0..LDIM {
                a[(r0 + i, r0 + j)] = blocks.l0.0[(i, j)];
            }
            a[(r0 + i, r0 + i)] += shift;
        }
        for (m, lm) in &blocks.off {
            let src = k - m;
            if src.abs() > n {
                continue;
            }
            let c0 = block_of(src);
            for i in 0..LDIM {
                for j in 0..LDIM {
                    a[(r0 + i, c0 + j)] += lm.0[(i, j)];
                }
            }
        }
    }
    let mut rhs = nalgebra::DVector::<C64>::zeros(dim);
    let trace_eq = block_of(0) + idx(0, 0);
    let tr = trace_row();
    for c in 0..dim {
        a[(trace_eq, c)] = C64::new(0.0, 0.0);
    }
    for c in 0..LDIM {
        a[(trace_eq, block_of(0) + c)] = tr[c];
    }
    rhs[trace_eq] = C64::new(1.0, 0.0);

    let lu = a.lu();
    let u = lu.u();
    let diag = u.diagonal().map(|z| z.norm());
    let ratio = diag.min() / diag.max();
    if !(ratio >= SINGULAR_PIVOT_RATIO) {
        return Err(SimError::Singular { pivot_ratio: ratio });
    }
    let x = lu.solve(&rhs).ok_or(SimError::Singular { pivot_ratio: 0.0 })?;
    let mut out = HarmonicDensityMatrix::zeros(n_max);
    for k in -n..=n {
        let b0 = block_of(k);
        let v = LVec::from_fn(|i, _| x[b0 + i]);
        out.set(k, unvectorize(&v));
    }
    Ok(out)
}
