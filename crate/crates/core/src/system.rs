//! Model abstraction: vector field, analytic Jacobian, domain and period.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Default half-width of the sampling box on unbounded axes.
pub const DEFAULT_TRUNCATION: f64 = 10.0;

/// A smooth piece boundary of a piecewise-smooth field: the residual vanishes on
/// the switching surface and `gradient` is its derivative with respect to x.
#[derive(Clone, Debug)]
pub struct Switch<T> {
    pub residual: T,
    pub gradient: Vec<T>,
}

/// The right-hand side of `ẋ = f(t, x)` together with its Jacobian.
pub trait Dynamics<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn field(&self, t: T, x: &[T], out: &mut [T]);

    fn jacobian(&self, t: T, x: &[T]) -> Matrix<T>;

    /// Switching surfaces of a piecewise-smooth field. Smooth fields have none.
    fn switches(&self, _t: T, _x: &[T]) -> Vec<Switch<T>> {
        Vec::new()
    }
}

/// Closure-backed dynamics for fixtures and user-defined fields.
pub struct FnDynamics<T, F, J> {
    dim: usize,
    field: F,
    jacobian: J,
    _marker: std::marker::PhantomData<fn() -> T>,
}

impl<T, F, J> FnDynamics<T, F, J>
where
    T: Scalar,
    F: Fn(T, &[T], &mut [T]) + Send + Sync,
    J: Fn(T, &[T]) -> Matrix<T> + Send + Sync,
{
    pub fn new(dim: usize, field: F, jacobian: J) -> Self {
        Self { dim, field, jacobian, _marker: std::marker::PhantomData }
    }
}

impl<T, F, J> Dynamics<T> for FnDynamics<T, F, J>
where
    T: Scalar,
    F: Fn(T, &[T], &mut [T]) + Send + Sync,
    J: Fn(T, &[T]) -> Matrix<T> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn field(&self, t: T, x: &[T], out: &mut [T]) {
        (self.field)(t, x, out)
    }

    fn jacobian(&self, t: T, x: &[T]) -> Matrix<T> {
        (self.jacobian)(t, x)
    }
}

/// State domain `𝒳` (possibly unbounded) plus the finite box used for sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainBox<T> {
    lower: Vec<T>,
    upper: Vec<T>,
    trunc_lower: Vec<T>,
    trunc_upper: Vec<T>,
}

/// Finite bounds as they appear in certificates and JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Bounds<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> DomainBox<T> {
    /// Domain with the default truncation `[-10, 10]ⁿ ∩ [lower, upper]`.
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        let t = T::lit(DEFAULT_TRUNCATION);
        let trunc_lower = lower.iter().map(|&l| l.max(-t)).collect();
        let trunc_upper = upper.iter().map(|&u| u.min(t)).collect();
        let dom = Self { lower, upper, trunc_lower, trunc_upper };
        dom.validate()?;
        Ok(dom)
    }

    pub fn whole_space(n: usize) -> Self {
        Self::new(vec![T::neg_infinity(); n], vec![T::infinity(); n]).expect("valid unbounded domain")
    }

    pub fn nonnegative_orthant(n: usize) -> Self {
        Self::new(vec![T::zero(); n], vec![T::infinity(); n]).expect("valid orthant")
    }

    pub fn with_truncation(mut self, lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        check_dim(self.dim(), lower.len())?;
        check_dim(self.dim(), upper.len())?;
        self.trunc_lower = lower;
        self.trunc_upper = upper;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        for i in 0..self.dim() {
            let (l, u, tl, tu) = (self.lower[i], self.upper[i], self.trunc_lower[i], self.trunc_upper[i]);
            if l.is_nan() || u.is_nan() || l > u {
                return Err(Error::InvalidDomain(format!("axis {i}: lower {l} exceeds upper {u}")));
            }
            if !tl.is_finite() || !tu.is_finite() {
                return Err(Error::InvalidDomain(format!("axis {i}: truncation bounds must be finite")));
            }
            if !(l <= tl && tl <= tu && tu <= u) {
                return Err(Error::InvalidDomain(format!(
                    "axis {i}: need lower <= truncation lower <= truncation upper <= upper, got {l} <= {tl} <= {tu} <= {u}"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn truncation(&self) -> Bounds<T> {
        Bounds { lower: self.trunc_lower.clone(), upper: self.trunc_upper.clone() }
    }

    pub fn trunc_lower(&self) -> &[T] {
        &self.trunc_lower
    }

    pub fn trunc_upper(&self) -> &[T] {
        &self.trunc_upper
    }

    pub fn in_truncation(&self, x: &[T]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.trunc_lower).zip(&self.trunc_upper).all(|((&v, &l), &u)| l <= v && v <= u)
    }

    pub fn in_domain(&self, x: &[T]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.lower).zip(&self.upper).all(|((&v, &l), &u)| l <= v && v <= u)
    }

    pub fn clamp_to_truncation(&self, x: &mut [T]) {
        for ((v, &l), &u) in x.iter_mut().zip(&self.trunc_lower).zip(&self.trunc_upper) {
            *v = v.max(l).min(u);
        }
    }

    /// Uniform point in the truncation box.
    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> Vec<T> {
        self.trunc_lower
            .iter()
            .zip(&self.trunc_upper)
            .map(|(&l, &u)| {
                let r: f64 = rng.gen();
                l + (u - l) * T::lit(r)
            })
            .collect()
    }
}

/// An ODE model `ẋ = f(t, x)`; autonomous unless a period is attached.
#[derive(Clone)]
pub struct SystemModel<T: Scalar> {
    name: String,
    dynamics: Arc<dyn Dynamics<T>>,
    domain: DomainBox<T>,
    period: Option<T>,
    monotone: bool,
    equilibrium: Option<Vec<T>>,
}

impl<T: Scalar> fmt::Debug for SystemModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel").field("name", &self.name).field("dim", &self.dim()).field("period", &self.period).field("domain", &self.domain).finish()
    }
}

impl<T: Scalar> SystemModel<T> {
    pub fn new(name: impl Into<String>, dynamics: Arc<dyn Dynamics<T>>, domain: DomainBox<T>) -> Result<Self> {
        check_dim(dynamics.dim(), domain.dim())?;
        if dynamics.dim() == 0 {
            return Err(Error::InvalidParameter { name: "dim".into(), reason: "must be positive".into() });
        }
        Ok(Self { name: name.into(), dynamics, domain, period: None, monotone: true, equilibrium: None })
    }

    /// Model from closures, for fixtures and quick experiments.
    pub fn from_fns<F, J>(name: impl Into<String>, dim: usize, field: F, jacobian: J, domain: DomainBox<T>) -> Result<Self>
    where
        F: Fn(T, &[T], &mut [T]) + Send + Sync + 'static,
        J: Fn(T, &[T]) -> Matrix<T> + Send + Sync + 'static,
    {
        Self::new(name, Arc::new(FnDynamics::new(dim, field, jacobian)), domain)
    }

    /// Marks the model as periodically time-varying with the given period.
    pub fn periodic(mut self, period: T) -> Result<Self> {
        if !(period > T::zero() && period.is_finite()) {
            return Err(Error::InvalidParameter { name: "period".into(), reason: "must be a positive real".into() });
        }
        self.period = Some(period);
        Ok(self)
    }

    pub fn with_monotone_claim(mut self, monotone: bool) -> Self {
        self.monotone = monotone;
        self
    }

    pub fn with_equilibrium(mut self, eq: Vec<T>) -> Result<Self> {
        check_dim(self.dim(), eq.len())?;
        self.equilibrium = Some(eq);
        Ok(self)
    }

    pub fn with_domain(mut self, domain: DomainBox<T>) -> Result<Self> {
        check_dim(self.dim(), domain.dim())?;
        self.domain = domain;
        Ok(self)
    }

    pub fn with_truncation(self, lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        let domain = self.domain.clone().with_truncation(lower, upper)?;
        self.with_domain(domain)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dynamics.dim()
    }

    pub fn domain(&self) -> &DomainBox<T> {
        &self.domain
    }

    pub fn period(&self) -> Option<T> {
        self.period
    }

    pub fn is_autonomous(&self) -> bool {
        self.period.is_none()
    }

    /// Whether the model claims a Metzler Jacobian everywhere.
    pub fn claims_monotone(&self) -> bool {
        self.monotone
    }

    /// Analytic equilibrium, when the constructor knows one.
    pub fn known_equilibrium(&self) -> Option<&[T]> {
        self.equilibrium.as_deref()
    }

    pub fn field(&self, t: T, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        self.dynamics.field(t, x, &mut out);
        out
    }

    pub fn field_into(&self, t: T, x: &[T], out: &mut [T]) {
        self.dynamics.field(t, x, out)
    }

    pub fn jacobian(&self, t: T, x: &[T]) -> Matrix<T> {
        self.dynamics.jacobian(t, x)
    }

    pub fn switches(&self, t: T, x: &[T]) -> Vec<Switch<T>> {
        self.dynamics.switches(t, x)
    }

    pub fn is_piecewise(&self) -> bool {
        let x = self.domain.trunc_lower().to_vec();
        !self.switches(T::zero(), &x).is_empty()
    }

    /// For a monotone field, the order interval `[lower, upper]` is forward
    /// invariant when `f(t, lower) ≥ 0` and `f(t, upper) ≤ 0`. Periodic models
    /// are checked at 64 times across one period.
    pub fn order_interval_invariant(&self, lower: &[T], upper: &[T]) -> Result<bool> {
        check_dim(self.dim(), lower.len())?;
        check_dim(self.dim(), upper.len())?;
        let times: Vec<T> = match self.period {
            None => vec![T::zero()],
            Some(p) => (0..64).map(|k| p * T::lit(k as f64 / 64.0)).collect(),
        };
        let tol = T::lit(1e-12);
        Ok(times.into_iter().all(|t| self.field(t, lower).iter().all(|&v| v >= -tol) && self.field(t, upper).iter().all(|&v| v <= tol)))
    }
}

/// Result of comparing the analytic Jacobian against central differences.
#[derive(Clone, Debug)]
pub struct JacobianCheck {
    pub points_checked: usize,
    pub points_skipped: usize,
    pub max_error: f64,
    pub worst_point: Option<Vec<f64>>,
    pub passed: bool,
}

/// Central finite-difference check of the analytic Jacobian at random points of
/// the truncation box, step `1e-6·(1+|x|)`. An entry passes when
/// `|J_fd - J| ≤ rtol·(1 + |J|)`. Points within `kink_guard` of a switching
/// surface are skipped because the field is not differentiable there.
pub fn check_jacobian<T: Scalar>(model: &SystemModel<T>, count: usize, seed: u64, rtol: T, kink_guard: T) -> JacobianCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.dim();
    let dom = model.domain();
    let mut max_error = 0.0f64;
    let mut worst_point = None;
    let mut checked = 0;
    let mut skipped = 0;
    for _ in 0..count {
        let t = model.period().map_or(T::zero(), |p| p * T::lit(rng.gen::<f64>()));
        // Keep away from the box faces so that x ± h stays in the box.
        let mut x = dom.sample_uniform(&mut rng);
        for i in 0..n {
            let h = T::lit(1e-6) * (T::one() + x[i].abs());
            x[i] = x[i].max(dom.trunc_lower()[i] + h).min(dom.trunc_upper()[i] - h);
        }
        let near_kink = model.switches(t, &x).iter().any(|s| {
            let g = s.gradient.iter().fold(T::zero(), |m, &v| m.max(v.abs())).max(T::min_positive_value());
            s.residual.abs() / g < kink_guard
        });
        if near_kink {
            skipped += 1;
            continue;
        }
        checked += 1;
        let jac = model.jacobian(t, &x);
        for j in 0..n {
            let h = T::lit(1e-6) * (T::one() + x[j].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let fp = model.field(t, &xp);
            let fm = model.field(t, &xm);
            for i in 0..n {
                let fd = (fp[i] - fm[i]) / (h + h);
                let err = ((fd - jac[(i, j)]).abs() / (T::one() + jac[(i, j)].abs())).as_f64();
                if err > max_error {
                    max_error = err;
                    worst_point = Some(crate::scalar::to_f64_vec(&x));
                }
            }
        }
    }
    JacobianCheck { points_checked: checked, points_skipped: skipped, max_error, worst_point, passed: max_error <= rtol.as_f64() }
}

/// Spot check that an autonomous field does not depend on time, or that a
/// periodic field repeats after one period. Returns the largest discrepancy.
pub fn check_time_structure<T: Scalar>(model: &SystemModel<T>, count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let x = model.domain().sample_uniform(&mut rng);
        let t = T::lit(rng.gen::<f64>() * 10.0);
        let shifted = match model.period() {
            Some(p) => t + p,
            None => t + T::lit(3.7),
        };
        let a = model.field(t, &x);
        let b = model.field(shifted, &x);
        for (u, v) in a.iter().zip(&b) {
            worst = worst.max((*u - *v).abs().as_f64());
        }
    }
    worst
}

/// Fixed-step solution samples of one trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub step: T,
    /// Lyapunov values along the trajectory, when evaluated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &[T] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    /// Writes `t, x_1..x_n[, V]` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.dim();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        if self.values.is_some() {
            header.push("V".into());
        }
        writeln!(w, "{}", header.join(","))?;
        for (k, (t, x)) in self.times.iter().zip(&self.states).enumerate() {
            let mut row = vec![fmt_real(*t)];
            row.extend(x.iter().map(|&v| fmt_real(v)));
            if let Some(vals) = &self.values {
                row.push(fmt_real(vals[k]));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

/// 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_real<T: Scalar>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}
