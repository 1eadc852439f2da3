//! Independent oracles shared by the integration tests. Nothing here calls
//! into the measure or integrator code it is used to check.

#![allow(dead_code)]

use moncon::{Mat, Norm, NormKind};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H_SCHEDULE: [f64; 5] = [1e-4, 1e-5, 1e-6, 1e-7, 1e-8];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_na(a: &Mat) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

pub fn from_na(a: &DMatrix<f64>) -> Mat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Induced norm of `a` for the weighted norm, from the scaled matrix built here.
fn induced(a: &DMatrix<f64>, norm: &Norm) -> f64 {
    let n = a.nrows();
    let w = norm.weights();
    match norm.kind() {
        // ‖x‖ = ‖diag(v)x‖₁, so ‖A‖ = ‖diag(v) A diag(v)⁻¹‖₁
        NormKind::L1 => (0..n).map(|j| (0..n).map(|i| (w[i] * a[(i, j)] / w[j]).abs()).sum::<f64>()).fold(f64::MIN, f64::max),
        // ‖x‖ = ‖diag(w)⁻¹x‖∞
        NormKind::Linf => (0..n).map(|i| (0..n).map(|j| (a[(i, j)] * w[j] / w[i]).abs()).sum::<f64>()).fold(f64::MIN, f64::max),
    }
}

/// `lim (‖I + hA‖ - 1)/h` from the last three `h` of the schedule, extrapolated
/// to `h = 0` by a quadratic through the three quotients.
pub fn mu_limit_oracle(a: &Mat, norm: &Norm, schedule: &[f64]) -> f64 {
    assert!(schedule.len() >= 3 && schedule.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
    let a = to_na(a);
    let id = DMatrix::<f64>::identity(a.nrows(), a.ncols());
    let hs = &schedule[schedule.len() - 3..];
    let q: Vec<f64> = hs.iter().map(|&h| (induced(&(&id + &a * h), norm) - 1.0) / h).collect();
    // Lagrange weights at 0
    let mut out = 0.0;
    for i in 0..3 {
        let mut l = 1.0;
        for j in 0..3 {
            if i != j {
                l *= hs[j] / (hs[j] - hs[i]);
            }
        }
        out += l * q[i];
    }
    out
}

/// Largest real part of the eigenvalues.
pub fn spectral_abscissa(a: &Mat) -> f64 {
    to_na(a).complex_eigenvalues().iter().map(|z| z.re).fold(f64::MIN, f64::max)
}

pub fn expm(a: &Mat, t: f64) -> Mat {
    from_na(&(to_na(a) * t).exp())
}

pub fn random_matrix(rng: &mut impl Rng, n: usize, scale: f64) -> Mat {
    Mat::from_fn(n, n, |_, _| rng.gen_range(-scale..scale))
}

/// Off-diagonals uniform in `[0, off)`, diagonal in `[-diag, diag)`.
pub fn random_metzler(rng: &mut impl Rng, n: usize, off: f64, diag: f64) -> Mat {
    Mat::from_fn(n, n, |i, j| if i == j { rng.gen_range(-diag..diag) } else { rng.gen_range(0.0..off) })
}

pub fn random_weights(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.2..5.0)).collect()
}

pub fn random_point(rng: &mut impl Rng, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter().zip(hi).map(|(&l, &h)| rng.gen_range(l..=h)).collect()
}

/// Random `x ≤ y` inside the box.
pub fn random_ordered_pair(rng: &mut impl Rng, lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let x = random_point(rng, lo, hi);
    let y = x.iter().zip(hi).map(|(&xi, &h)| rng.gen_range(xi..=h)).collect();
    (x, y)
}

/// `A x`, written out by hand.
pub fn mat_vec(a: &Mat, x: &[f64]) -> Vec<f64> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum()).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Metzler matrix shifted so its spectral abscissa is uniform in `±[1e-3, 1]`;
/// about half are Hurwitz.
pub fn balanced_metzler(rng: &mut impl Rng, n: usize) -> Mat {
    let a = random_metzler(rng, n, 1.5, 3.0);
    let target = rng.gen_range(1e-3..1.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let shift = spectral_abscissa(&a) - target;
    Mat::from_fn(n, n, |i, j| if i == j { a[(i, j)] - shift } else { a[(i, j)] })
}
