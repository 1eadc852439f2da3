use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::system::{Bounds, SystemModel};

pub const DEFAULT_KINK_MARGIN: f64 = 1e-4;
pub const DEFAULT_GRID_PER_AXIS: usize = 5;
pub const DEFAULT_GRID_CAP: usize = 100_000;

/// Off-diagonal tolerance for the Metzler check on sampled Jacobians.
const SAMPLE_METZLER_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SampleStrategy {
    Grid,
    Random,
    /// Random points, a coarse grid, and point pairs straddling every switching surface.
    Mixed,
}

#[derive(Clone, Debug)]
pub struct SamplingOptions<T> {
    pub count: usize,
    pub strategy: SampleStrategy,
    pub seed: u64,
    pub kink_margin: T,
    /// Grid resolution used by MIXED.
    pub grid_per_axis: usize,
    pub grid_cap: usize,
    /// Box to sample; defaults to the model's truncation box.
    pub bounds: Option<Bounds<T>>,
}

impl<T: Scalar> SamplingOptions<T> {
    pub fn new(count: usize, strategy: SampleStrategy, seed: u64) -> Self {
        Self { count, strategy, seed, kink_margin: T::lit(DEFAULT_KINK_MARGIN), grid_per_axis: DEFAULT_GRID_PER_AXIS, grid_cap: DEFAULT_GRID_CAP, bounds: None }
    }

    pub fn with_bounds(mut self, bounds: Bounds<T>) -> Self {
        self.bounds = Some(bounds);
        self
    }
}

#[derive(Clone, Debug)]
pub struct JacobianSampleSet<T> {
    /// `(t, x)` pairs; `t` is zero for autonomous models.
    pub points: Vec<(T, Vec<T>)>,
    pub matrices: Vec<Matrix<T>>,
    pub strategy: SampleStrategy,
    pub seed: u64,
    pub kink_margin: T,
    pub bounds: Bounds<T>,
}

impl<T: Scalar> JacobianSampleSet<T> {
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.bounds.lower.len()
    }

    /// Sample set with given matrices and no points; handy for linear algebra
    /// experiments and tests.
    pub fn from_matrices(matrices: Vec<Matrix<T>>) -> Result<Self> {
        let n = matrices.first().ok_or_else(|| invalid("matrices", "need at least one matrix"))?.ensure_square()?;
        for m in &matrices {
            check_dim(n, m.ensure_square()?)?;
        }
        Ok(Self {
            points: Vec::new(),
            matrices,
            strategy: SampleStrategy::Random,
            seed: 0,
            kink_margin: T::zero(),
            bounds: Bounds { lower: vec![T::zero(); n], upper: vec![T::zero(); n] },
        })
    }

    /// Keeps only the first `k` samples.
    pub fn truncated(&self, k: usize) -> Self {
        let mut s = self.clone();
        s.matrices.truncate(k);
        s.points.truncate(k);
        s
    }

    pub(crate) fn ensure_metzler(&self) -> Result<()> {
        let tol = T::lit(SAMPLE_METZLER_TOL);
        for m in &self.matrices {
            let n = m.nrows();
            for i in 0..n {
                for j in 0..n {
                    if i != j && m[(i, j)] < -tol {
                        return Err(Error::NotMetzler { row: i, col: j, value: m[(i, j)].as_f64() });
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn sample_jacobians<T: Scalar>(model: &SystemModel<T>, count: usize, strategy: SampleStrategy, seed: u64) -> Result<JacobianSampleSet<T>> {
    sample_jacobians_with(model, &SamplingOptions::new(count, strategy, seed))
}

fn uniform<T: Scalar, R: Rng>(b: &Bounds<T>, rng: &mut R) -> Vec<T> {
    b.lower.iter().zip(&b.upper).map(|(&l, &u)| l + (u - l) * T::lit(rng.gen::<f64>())).collect()
}

fn grid<T: Scalar>(b: &Bounds<T>, per_axis: usize) -> Vec<Vec<T>> {
    let n = b.lower.len();
    let axis = |i: usize, k: usize| -> T {
        if per_axis == 1 {
            (b.lower[i] + b.upper[i]) / T::lit(2.0)
        } else {
            b.lower[i] + (b.upper[i] - b.lower[i]) * T::lit(k as f64 / (per_axis - 1) as f64)
        }
    };
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            (0..n)
                .map(|i| {
                    let k = idx % per_axis;
                    idx /= per_axis;
                    axis(i, k)
                })
                .collect()
        })
        .collect()
}

fn grid_per_axis_for(count: usize, dim: usize) -> usize {
    let mut k = (count as f64).powf(1.0 / dim as f64).ceil().max(1.0) as usize;
    // guard the float root against off-by-one
    while k > 1 && (k - 1).checked_pow(dim as u32).is_some_and(|p| p >= count) {
        k -= 1;
    }
    k
}

fn contains<T: Scalar>(b: &Bounds<T>, x: &[T]) -> bool {
    x.iter().zip(&b.lower).zip(&b.upper).all(|((&v, &l), &u)| l <= v && v <= u)
}

fn clamp<T: Scalar>(b: &Bounds<T>, x: &mut [T]) {
    for ((v, &l), &u) in x.iter_mut().zip(&b.lower).zip(&b.upper) {
        *v = v.max(l).min(u);
    }
}

fn unit_normal<T: Scalar>(g: &[T]) -> Option<Vec<T>> {
    let norm = g.iter().map(|&v| v * v).sum::<T>().sqrt();
    (norm > T::zero()).then(|| g.iter().map(|&v| v / norm).collect())
}

/// Pushes a point that sits within `margin` of a switching surface out to
/// distance `margin`, on the side it already occupies.
fn push_off_kinks<T: Scalar>(model: &SystemModel<T>, t: T, x: &mut Vec<T>, margin: T, b: &Bounds<T>) {
    if margin <= T::zero() {
        return;
    }
    for _ in 0..4 {
        let mut moved = false;
        for s in model.switches(t, x) {
            let Some(nrm) = unit_normal(&s.gradient) else { continue };
            let gnorm = s.gradient.iter().map(|&v| v * v).sum::<T>().sqrt();
            let dist = s.residual / gnorm;
            if dist.abs() < margin {
                let side = if dist < T::zero() { -T::one() } else { T::one() };
                let shift = side * margin - dist;
                let mut y: Vec<T> = x.iter().zip(&nrm).map(|(&a, &e)| a + shift * e).collect();
                if !contains(b, &y) {
                    // try the other side rather than leave the box
                    let shift = -side * margin - dist;
                    y = x.iter().zip(&nrm).map(|(&a, &e)| a + shift * e).collect();
                    clamp(b, &mut y);
                }
                *x = y;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}

/// Samples Jacobians over a box (the model's truncation box unless
/// overridden). Periodic models get uniform times in `[0, T)`.
pub fn sample_jacobians_with<T: Scalar>(model: &SystemModel<T>, opts: &SamplingOptions<T>) -> Result<JacobianSampleSet<T>> {
    if opts.count == 0 {
        return Err(invalid("count", "must be at least 1"));
    }
    let bounds = opts.bounds.clone().unwrap_or_else(|| model.domain().truncation());
    let n = model.dim();
    check_dim(n, bounds.lower.len())?;
    check_dim(n, bounds.upper.len())?;
    for i in 0..n {
        let (l, u) = (bounds.lower[i], bounds.upper[i]);
        if !l.is_finite() || !u.is_finite() || l > u {
            return Err(Error::InvalidDomain(format!("sampling box axis {i} is [{l}, {u}]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let time = |rng: &mut ChaCha8Rng| model.period().map_or(T::zero(), |p| p * T::lit(rng.gen::<f64>()));

    let mut states: Vec<Vec<T>> = Vec::new();
    match opts.strategy {
        SampleStrategy::Grid => states.extend(grid(&bounds, grid_per_axis_for(opts.count, n))),
        SampleStrategy::Random => states.extend((0..opts.count).map(|_| uniform(&bounds, &mut rng))),
        SampleStrategy::Mixed => {
            states.extend((0..opts.count).map(|_| uniform(&bounds, &mut rng)));
            let mut per_axis = opts.grid_per_axis.max(1);
            while per_axis > 1 && per_axis.checked_pow(n as u32).is_none_or(|p| p > opts.grid_cap) {
                per_axis -= 1;
            }
            states.extend(grid(&bounds, per_axis));
        }
    }
    let mut points: Vec<(T, Vec<T>)> = states.into_iter().map(|x| (time(&mut rng), x)).collect();
    for (t, x) in points.iter_mut() {
        push_off_kinks(model, *t, x, opts.kink_margin, &bounds);
    }

    if opts.strategy == SampleStrategy::Mixed && opts.kink_margin > T::zero() {
        // Both one-sided Jacobians near each switching surface.
        let mut extra = Vec::new();
        for _ in 0..opts.count {
            let t = time(&mut rng);
            let x = uniform(&bounds, &mut rng);
            for s in model.switches(t, &x) {
                let Some(nrm) = unit_normal(&s.gradient) else { continue };
                let gnorm = s.gradient.iter().map(|&v| v * v).sum::<T>().sqrt();
                let dist = s.residual / gnorm;
                let on_surface: Vec<T> = x.iter().zip(&nrm).map(|(&a, &e)| a - dist * e).collect();
                for side in [T::one(), -T::one()] {
                    let y: Vec<T> = on_surface.iter().zip(&nrm).map(|(&a, &e)| a + side * opts.kink_margin * e).collect();
                    if contains(&bounds, &y) {
                        extra.push((t, y));
                    }
                }
            }
        }
        points.extend(extra);
    }

    let matrices: Vec<Matrix<T>> = points.par_iter().map(|(t, x)| model.jacobian(*t, x)).collect();
    if let Some(bad) = matrices.iter().position(|m| !m.is_finite()) {
        return Err(Error::InvalidDomain(format!("non-finite Jacobian at sample {bad}")));
    }
    let set = JacobianSampleSet { points, matrices, strategy: opts.strategy, seed: opts.seed, kink_margin: opts.kink_margin, bounds };
    if model.claims_monotone() {
        set.ensure_metzler()?;
    }
    Ok(set)
}
