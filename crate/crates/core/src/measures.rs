//! Matrix measures (logarithmic norms) induced by ℓ1, ℓ∞ and their diagonally
//! weighted variants.
//!
//! For the ℓ1 norm the measure is the largest "column measure"
//! `A_jj + Σ_{i≠j} |A_ij|`; for ℓ∞ it is the largest row measure. A diagonal
//! scaling `|x|_P = |Px|` changes the measure to that of `P A P⁻¹`, which for
//! `P = diag(v)` only rescales off-diagonal entries.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::norm::{NormKind, WeightedNorm};
use crate::scalar::Scalar;

/// Off-diagonal tolerance used when a caller does not pass one.
pub const METZLER_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MeasureKind {
    L1,
    Linf,
    L1Weighted,
    LinfWeighted,
    Similarity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MeasureReport<T> {
    pub value: T,
    pub kind: MeasureKind,
    /// Column (ℓ1 kinds) or row (ℓ∞ kinds) achieving the maximum; ties go to
    /// the smallest index.
    pub argmax_index: usize,
    pub metzler: bool,
}

pub fn is_metzler<T: Scalar>(a: &Matrix<T>, tol: T) -> bool {
    let n = a.nrows();
    a.is_square() && (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] >= -tol))
}

/// `A_jj + Σ_{i≠j} |A_ij|` for column `j`.
pub fn column_measure<T: Scalar>(a: &Matrix<T>, j: usize) -> T {
    let mut s = a[(j, j)];
    for i in 0..a.nrows() {
        if i != j {
            s += a[(i, j)].abs();
        }
    }
    s
}

/// `A_ii + Σ_{j≠i} |A_ij|` for row `i`.
pub fn row_measure<T: Scalar>(a: &Matrix<T>, i: usize) -> T {
    let mut s = a[(i, i)];
    for j in 0..a.ncols() {
        if j != i {
            s += a[(i, j)].abs();
        }
    }
    s
}

fn argmax<T: Scalar>(n: usize, f: impl Fn(usize) -> T) -> (usize, T) {
    let mut best = (0, f(0));
    for k in 1..n {
        let v = f(k);
        // strict comparison keeps the smallest index on ties
        if v > best.1 {
            best = (k, v);
        }
    }
    best
}

fn report<T: Scalar>(a: &Matrix<T>, kind: MeasureKind, metzler: bool) -> MeasureReport<T> {
    let n = a.nrows();
    if n == 0 {
        return MeasureReport { value: T::zero(), kind, argmax_index: 0, metzler };
    }
    let (idx, value) = match kind {
        MeasureKind::L1 | MeasureKind::L1Weighted => argmax(n, |j| column_measure(a, j)),
        MeasureKind::Linf | MeasureKind::LinfWeighted => argmax(n, |i| row_measure(a, i)),
        MeasureKind::Similarity => unreachable!("similarity reports carry their base kind's sums"),
    };
    MeasureReport { value, kind, argmax_index: idx, metzler }
}

/// Measure induced by the ℓ1 norm: the largest column measure.
pub fn mu1<T: Scalar>(a: &Matrix<T>) -> Result<MeasureReport<T>> {
    a.ensure_square()?;
    Ok(report(a, MeasureKind::L1, is_metzler(a, T::lit(METZLER_TOL))))
}

/// Measure induced by the ℓ∞ norm: the largest row measure.
pub fn mu_inf<T: Scalar>(a: &Matrix<T>) -> Result<MeasureReport<T>> {
    a.ensure_square()?;
    Ok(report(a, MeasureKind::Linf, is_metzler(a, T::lit(METZLER_TOL))))
}

/// The matrix `P A P⁻¹` whose plain measure equals the weighted measure of `A`.
///
/// L1 with weights `v`: `P = diag(v)`. L∞ with weights `w`: `P = diag(1/w)`.
pub fn scaled_matrix<T: Scalar>(a: &Matrix<T>, norm: &WeightedNorm<T>) -> Result<Matrix<T>> {
    let n = a.ensure_square()?;
    check_dim(n, norm.dim())?;
    let w = norm.weights();
    let inv: Vec<T> = w.iter().map(|&x| T::one() / x).collect();
    match norm.kind() {
        NormKind::L1 => a.diag_scale(w, &inv),
        NormKind::Linf => a.diag_scale(&inv, w),
    }
}

/// Measure induced by a weighted ℓ1 / ℓ∞ norm.
pub fn mu_weighted<T: Scalar>(a: &Matrix<T>, norm: &WeightedNorm<T>) -> Result<MeasureReport<T>> {
    let scaled = scaled_matrix(a, norm)?;
    let kind = match norm.kind() {
        NormKind::L1 => MeasureKind::L1Weighted,
        NormKind::Linf => MeasureKind::LinfWeighted,
    };
    Ok(report(&scaled, kind, is_metzler(a, T::lit(METZLER_TOL))))
}

/// Measure of `A` under `|x| = |diag(p) x|_*` for an arbitrary positive diagonal `p`.
pub fn mu_similarity<T: Scalar>(a: &Matrix<T>, p: &[T], base: NormKind) -> Result<MeasureReport<T>> {
    let n = a.ensure_square()?;
    check_dim(n, p.len())?;
    if p.iter().any(|&x| !(x > T::zero())) {
        return Err(crate::error::invalid("p", "diagonal scaling must be positive"));
    }
    let inv: Vec<T> = p.iter().map(|&x| T::one() / x).collect();
    let scaled = a.diag_scale(p, &inv)?;
    let mut r = match base {
        NormKind::L1 => report(&scaled, MeasureKind::L1, false),
        NormKind::Linf => report(&scaled, MeasureKind::Linf, false),
    };
    r.kind = MeasureKind::Similarity;
    r.metzler = is_metzler(a, T::lit(METZLER_TOL));
    Ok(r)
}

/// Induced ℓ1 matrix norm: the largest absolute column sum.
pub fn norm1<T: Scalar>(a: &Matrix<T>) -> T {
    (0..a.ncols()).map(|j| (0..a.nrows()).map(|i| a[(i, j)].abs()).sum::<T>()).fold(T::zero(), T::max)
}

/// Induced ℓ∞ matrix norm: the largest absolute row sum.
pub fn norm_inf<T: Scalar>(a: &Matrix<T>) -> T {
    (0..a.nrows()).map(|i| a.row(i).iter().map(|x| x.abs()).sum::<T>()).fold(T::zero(), T::max)
}

/// Induced norm of `A` for a weighted norm, `‖P A P⁻¹‖_*`.
pub fn induced_norm<T: Scalar>(a: &Matrix<T>, norm: &WeightedNorm<T>) -> Result<T> {
    let scaled = scaled_matrix(a, norm)?;
    Ok(match norm.kind() {
        NormKind::L1 => norm1(&scaled),
        NormKind::Linf => norm_inf(&scaled),
    })
}

/// Strict weight condition for Metzler `A`: `vᵀA < c·vᵀ` (ℓ1) or `A w < c·w`
/// (ℓ∞), compared exactly. Equivalent to `mu_weighted(A, norm) < c`.
pub fn metzler_weight_condition<T: Scalar>(a: &Matrix<T>, norm: &WeightedNorm<T>, c: T) -> Result<bool> {
    let n = a.ensure_square()?;
    check_dim(n, norm.dim())?;
    let tol = T::lit(METZLER_TOL);
    for i in 0..n {
        for j in 0..n {
            if i != j && a[(i, j)] < -tol {
                return Err(Error::NotMetzler { row: i, col: j, value: a[(i, j)].as_f64() });
            }
        }
    }
    let w = norm.weights();
    let lhs = match norm.kind() {
        NormKind::L1 => a.vec_mul(w)?,
        NormKind::Linf => a.mul_vec(w)?,
    };
    Ok(lhs.iter().zip(w).all(|(&l, &wi)| l < c * wi))
}
