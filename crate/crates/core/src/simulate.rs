//! Fixed-step integration and empirical checks of the monotonicity,
//! nonexpansion and entrainment properties a certificate predicts.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::max_abs;
use crate::measures::mu_weighted;
use crate::norm::{partial_order_leq, WeightedNorm};
use crate::scalar::{to_f64_vec, Scalar};
use crate::system::{SystemModel, Trajectory};

pub const DEFAULT_STEP: f64 = 1e-2;
pub const DEFAULT_HORIZON: f64 = 100.0;

/// Overshoot past a hard domain bound that is silently clamped.
pub const CLAMP_TOL: f64 = 1e-9;

/// Relative slack on exponential envelopes, absorbing integrator error.
pub const ENVELOPE_SLACK: f64 = 1e-4;

/// Distances below this are floating-point noise and never count as violations.
pub const ABS_FLOOR: f64 = 1e-12;

struct Rk4<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    tmp: Vec<T>,
}

impl<T: Scalar> Rk4<T> {
    fn new(n: usize) -> Self {
        Self { k1: vec![T::zero(); n], k2: vec![T::zero(); n], k3: vec![T::zero(); n], k4: vec![T::zero(); n], tmp: vec![T::zero(); n] }
    }

    fn step(&mut self, model: &SystemModel<T>, t: T, x: &mut [T], h: T) {
        let half = h / T::lit(2.0);
        let n = x.len();
        model.field_into(t, x, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = x[i] + half * self.k1[i];
        }
        model.field_into(t + half, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = x[i] + half * self.k2[i];
        }
        model.field_into(t + half, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        model.field_into(t + h, &self.tmp, &mut self.k4);
        let sixth = h / T::lit(6.0);
        for i in 0..n {
            x[i] += sixth * (self.k1[i] + T::lit(2.0) * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
    }
}

/// Clamps tiny overshoots of the hard domain bounds; rejects larger ones.
fn enforce_domain<T: Scalar>(model: &SystemModel<T>, t: T, x: &mut [T]) -> Result<()> {
    let tol = T::lit(CLAMP_TOL);
    let dom = model.domain();
    for (i, v) in x.iter_mut().enumerate() {
        if !v.is_finite() {
            return Err(Error::BlowUp { time: t.as_f64() });
        }
        let (lo, hi) = (dom.lower()[i], dom.upper()[i]);
        if *v < lo || *v > hi {
            if *v >= lo - tol && *v <= hi + tol {
                *v = v.max(lo).min(hi);
            } else {
                return Err(Error::DomainViolation { time: t.as_f64(), component: i, value: v.as_f64(), lower: lo.as_f64(), upper: hi.as_f64() });
            }
        }
    }
    Ok(())
}

fn step_count<T: Scalar>(horizon: T, step: T) -> usize {
    let ratio = (horizon / step).as_f64();
    let k = ratio.ceil() as usize;
    // a ratio like 100.00000000000001 should not add a sliver step
    if k > 0 && ratio - (k - 1) as f64 <= 1e-9 * ratio.max(1.0) {
        k - 1
    } else {
        k
    }
}

fn validate_run<T: Scalar>(model: &SystemModel<T>, x0: &[T], horizon: T, step: T) -> Result<()> {
    check_dim(model.dim(), x0.len())?;
    if !(step > T::zero() && step.is_finite()) {
        return Err(invalid("step", "must be a positive real"));
    }
    if !(horizon > T::zero() && horizon.is_finite()) {
        return Err(invalid("horizon", "must be a positive real"));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(invalid("x0", "must be finite"));
    }
    Ok(())
}

/// Classical RK4 on the uniform grid `t0, t0+h, …`; the final step may be shorter.
pub fn integrate<T: Scalar>(model: &SystemModel<T>, x0: &[T], t0: T, horizon: T, step: T) -> Result<Trajectory<T>> {
    validate_run(model, x0, horizon, step)?;
    let steps = step_count(horizon, step);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut rk = Rk4::new(model.dim());
    let mut x = x0.to_vec();
    enforce_domain(model, t0, &mut x)?;
    times.push(t0);
    states.push(x.clone());
    let t_end = t0 + horizon;
    for k in 0..steps {
        let t = t0 + step * T::lit(k as f64);
        let h = if k + 1 == steps { t_end - t } else { step };
        rk.step(model, t, &mut x, h);
        let t_next = if k + 1 == steps { t_end } else { t0 + step * T::lit((k + 1) as f64) };
        enforce_domain(model, t_next, &mut x)?;
        times.push(t_next);
        states.push(x.clone());
    }
    Ok(Trajectory { times, states, step, values: None })
}

/// Final state only; used by the Poincaré map where storing the grid is waste.
pub fn flow<T: Scalar>(model: &SystemModel<T>, x0: &[T], t0: T, horizon: T, step: T) -> Result<Vec<T>> {
    validate_run(model, x0, horizon, step)?;
    let steps = step_count(horizon, step);
    let mut rk = Rk4::new(model.dim());
    let mut x = x0.to_vec();
    let t_end = t0 + horizon;
    for k in 0..steps {
        let t = t0 + step * T::lit(k as f64);
        let h = if k + 1 == steps { t_end - t } else { step };
        rk.step(model, t, &mut x, h);
        enforce_domain(model, t + h, &mut x)?;
    }
    Ok(x)
}

#[derive(Clone, Debug)]
pub struct EquilibriumOptions<T> {
    pub step: T,
    /// Time budget for the integration phase.
    pub horizon_cap: T,
    /// Integration stops once `|f(x)|∞` falls below this.
    pub coarse_tol: T,
    /// Newton polishing target for `|f(x*)|∞`.
    pub fine_tol: T,
    pub max_newton: usize,
}

impl<T: Scalar> Default for EquilibriumOptions<T> {
    fn default() -> Self {
        Self { step: T::lit(DEFAULT_STEP), horizon_cap: T::lit(1e4), coarse_tol: T::lit(1e-6), fine_tol: T::lit(1e-10), max_newton: 50 }
    }
}

pub fn find_equilibrium<T: Scalar>(model: &SystemModel<T>, guess: &[T]) -> Result<Vec<T>> {
    find_equilibrium_with(model, guess, &EquilibriumOptions::default())
}

/// Integrates toward an attracting equilibrium, then Newton-polishes with the
/// analytic Jacobian.
pub fn find_equilibrium_with<T: Scalar>(model: &SystemModel<T>, guess: &[T], opts: &EquilibriumOptions<T>) -> Result<Vec<T>> {
    if !model.is_autonomous() {
        return Err(Error::NotAutonomous);
    }
    check_dim(model.dim(), guess.len())?;
    let zero = T::zero();
    let mut x = guess.to_vec();
    let mut rk = Rk4::new(model.dim());
    let mut t = zero;
    let mut residual = max_abs(&model.field(zero, &x));
    while residual >= opts.coarse_tol && t < opts.horizon_cap {
        rk.step(model, zero, &mut x, opts.step);
        t += opts.step;
        enforce_domain(model, t, &mut x)?;
        residual = max_abs(&model.field(zero, &x));
    }
    let mut iterations = 0;
    while residual >= opts.fine_tol && iterations < opts.max_newton {
        iterations += 1;
        let f = model.field(zero, &x);
        let rhs: Vec<T> = f.iter().map(|&v| -v).collect();
        let Some(dx) = model.jacobian(zero, &x).solve(&rhs) else { break };
        // simple backtracking keeps Newton honest across kinks
        let mut alpha = T::one();
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<T> = x.iter().zip(&dx).map(|(&a, &d)| a + alpha * d).collect();
            let r = max_abs(&model.field(zero, &trial));
            if r < residual && model.domain().in_domain(&trial) {
                x = trial;
                residual = r;
                accepted = true;
                break;
            }
            alpha /= T::lit(2.0);
        }
        if !accepted {
            break;
        }
    }
    if residual < opts.fine_tol {
        Ok(x)
    } else {
        Err(Error::NoConvergence { iterations, residual: residual.as_f64(), last: to_f64_vec(&x) })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderViolation {
    pub time: f64,
    pub component: usize,
    /// `x_i(t) - y_i(t)`; positive means the order broke.
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub holds: bool,
    pub max_gap: f64,
    pub violations: Vec<OrderViolation>,
}

/// Integrates from `x0 ≤ y0` and checks `x(t) ≤ y(t) + tol` at every grid time.
pub fn check_monotonicity<T: Scalar>(model: &SystemModel<T>, x0: &[T], y0: &[T], horizon: T, step: T) -> Result<OrderReport> {
    check_monotonicity_tol(model, x0, y0, horizon, step, T::lit(1e-9))
}

pub fn check_monotonicity_tol<T: Scalar>(model: &SystemModel<T>, x0: &[T], y0: &[T], horizon: T, step: T, tol: T) -> Result<OrderReport> {
    if !partial_order_leq(x0, y0)? {
        return Err(invalid("x0", "initial conditions must satisfy x0 <= y0"));
    }
    let tx = integrate(model, x0, T::zero(), horizon, step)?;
    let ty = integrate(model, y0, T::zero(), horizon, step)?;
    let mut max_gap = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for ((t, x), y) in tx.times.iter().zip(&tx.states).zip(&ty.states) {
        for (i, (&a, &b)) in x.iter().zip(y).enumerate() {
            let gap = a - b;
            max_gap = max_gap.max(gap.as_f64());
            if gap > tol {
                violations.push(OrderViolation { time: t.as_f64(), component: i, gap: gap.as_f64() });
            }
        }
    }
    Ok(OrderReport { holds: violations.is_empty(), max_gap, violations })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub holds: bool,
    /// Largest `measured / envelope` ratio over the grid (above the noise floor).
    pub worst_ratio: f64,
    pub violations: usize,
    pub first_violation_time: Option<f64>,
    pub initial: f64,
    pub last: f64,
}

/// Checks `values[k] ≤ e^{c(t_k - t_0)}·values[0]·(1 + 1e-4)` on a time grid.
pub fn check_envelope<T: Scalar>(times: &[T], values: &[T], c: T) -> EnvelopeReport {
    let initial = values[0];
    let slack = T::one() + T::lit(ENVELOPE_SLACK);
    let floor = T::lit(ABS_FLOOR);
    let mut worst = 0.0f64;
    let mut violations = 0;
    let mut first = None;
    for (&t, &v) in times.iter().zip(values) {
        let bound = (c * (t - times[0])).exp() * initial;
        if v > floor {
            worst = worst.max((v / bound.max(T::min_positive_value())).as_f64());
        }
        if v > bound * slack && v > floor {
            violations += 1;
            first.get_or_insert(t.as_f64());
        }
    }
    EnvelopeReport {
        holds: violations == 0,
        worst_ratio: worst,
        violations,
        first_violation_time: first,
        initial: initial.as_f64(),
        last: values[values.len() - 1].as_f64(),
    }
}

/// `|x(t) - y(t)| ≤ e^{ct}·|x0 - y0|·(1 + 1e-4)` along both trajectories.
pub fn check_pair_contraction<T: Scalar>(
    model: &SystemModel<T>,
    x0: &[T],
    y0: &[T],
    norm: &WeightedNorm<T>,
    c: T,
    horizon: T,
    step: T,
) -> Result<EnvelopeReport> {
    check_dim(model.dim(), norm.dim())?;
    let tx = integrate(model, x0, T::zero(), horizon, step)?;
    let ty = integrate(model, y0, T::zero(), horizon, step)?;
    let d: Vec<T> = tx.states.iter().zip(&ty.states).map(|(a, b)| norm.dist(a, b)).collect::<Result<_>>()?;
    Ok(check_envelope(&tx.times, &d, c))
}

/// `|f(x(t))| ≤ e^{ct}·|f(x0)|·(1 + 1e-4)` along one trajectory.
pub fn check_flow_decay<T: Scalar>(model: &SystemModel<T>, x0: &[T], norm: &WeightedNorm<T>, c: T, horizon: T, step: T) -> Result<EnvelopeReport> {
    if !model.is_autonomous() {
        return Err(Error::NotAutonomous);
    }
    check_dim(model.dim(), norm.dim())?;
    let tx = integrate(model, x0, T::zero(), horizon, step)?;
    let f: Vec<T> = tx.states.iter().map(|x| norm.eval(&model.field(T::zero(), x))).collect::<Result<_>>()?;
    Ok(check_envelope(&tx.times, &f, c))
}

/// Period map `P(ξ) = φ(T, ξ)` starting at `t = 0`.
pub fn poincare_map<T: Scalar>(model: &SystemModel<T>, xi: &[T], step: T) -> Result<Vec<T>> {
    let period = model.period().ok_or(Error::NotPeriodic)?;
    flow(model, xi, T::zero(), period, step)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PeriodicPoint<T> {
    pub point: Vec<T>,
    pub residual: T,
    pub iterations: usize,
}

/// Fixed point of the period map by Picard iteration `ξ ← P(ξ)`.
pub fn find_periodic_point<T: Scalar>(model: &SystemModel<T>, xi0: &[T], norm: &WeightedNorm<T>, step: T, tol: T, max_iter: usize) -> Result<PeriodicPoint<T>> {
    let mut xi = xi0.to_vec();
    let mut residual = T::infinity();
    for k in 0..max_iter {
        let next = poincare_map(model, &xi, step)?;
        residual = norm.dist(&next, &xi)?;
        xi = next;
        if residual < tol {
            return Ok(PeriodicPoint { point: xi, residual, iterations: k + 1 });
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: residual.as_f64(), last: to_f64_vec(&xi) })
}

#[derive(Clone, Debug)]
pub struct EntrainmentOptions<T> {
    pub step: T,
    /// Picard stopping tolerance `|P(ξ) - ξ|`.
    pub fixed_point_tol: T,
    pub max_picard: usize,
    /// Distances below this are treated as converged noise.
    pub noise_floor: T,
    /// Points along the orbit where the measure is evaluated.
    pub orbit_samples: usize,
}

impl<T: Scalar> Default for EntrainmentOptions<T> {
    fn default() -> Self {
        Self { step: T::lit(DEFAULT_STEP), fixed_point_tol: T::lit(1e-12), max_picard: 5000, noise_floor: T::lit(1e-11), orbit_samples: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PoincareRecord<T> {
    /// `ξ, P(ξ), P²(ξ), …`
    pub iterates: Vec<Vec<T>>,
    /// `|Pᵏ(ξ) - γ*|` in the certificate norm.
    pub distances: Vec<T>,
    /// Fitted radius below which the sequence contracts geometrically.
    pub epsilon: T,
    /// Fitted minimum decrement while the distance exceeds `epsilon`.
    pub delta: T,
    pub contraction_factor: T,
    pub fixed_point: Vec<T>,
    pub fixed_point_residual: T,
    pub picard_iterations: usize,
    /// Largest measure of `J(t, γ(t))` along the periodic orbit.
    pub orbit_measure_max: T,
    /// Smallest measure along the orbit; negative means strict contraction somewhere.
    pub orbit_measure_min: T,
    /// Iterates found outside the truncation box.
    pub excursions: usize,
    pub nonincreasing: bool,
    pub structure_holds: bool,
    pub passed: bool,
}

/// Locates `γ*` by Picard iteration, records the iterates from `xi0`, and
/// checks the two-phase decay: a fixed decrement `δ` while the distance exceeds
/// `ε`, geometric contraction below it.
pub fn check_entrainment<T: Scalar>(
    model: &SystemModel<T>,
    xi0: &[T],
    k_max: usize,
    norm: &WeightedNorm<T>,
    opts: &EntrainmentOptions<T>,
) -> Result<PoincareRecord<T>> {
    let period = model.period().ok_or(Error::NotPeriodic)?;
    check_dim(model.dim(), xi0.len())?;
    check_dim(model.dim(), norm.dim())?;
    let fixed = find_periodic_point(model, xi0, norm, opts.step, opts.fixed_point_tol, opts.max_picard)?;

    let mut iterates = vec![xi0.to_vec()];
    for _ in 0..k_max {
        let next = poincare_map(model, iterates.last().unwrap(), opts.step)?;
        iterates.push(next);
    }
    let distances: Vec<T> = iterates.iter().map(|x| norm.dist(x, &fixed.point)).collect::<Result<_>>()?;
    let excursions = iterates.iter().filter(|x| !model.domain().in_truncation(x)).count();

    // Hypothesis check along one period of the orbit through γ*.
    let orbit = integrate(model, &fixed.point, T::zero(), period, opts.step)?;
    let stride = (orbit.len() / opts.orbit_samples.max(1)).max(1);
    let mut orbit_max = T::neg_infinity();
    let mut orbit_min = T::infinity();
    for k in (0..orbit.len()).step_by(stride) {
        let m = mu_weighted(&model.jacobian(orbit.times[k], &orbit.states[k]), norm)?.value;
        orbit_max = orbit_max.max(m);
        orbit_min = orbit_min.min(m);
    }

    let fit = fit_two_phase(&distances, opts.noise_floor);
    let floor = opts.noise_floor;
    let nonincreasing = distances.windows(2).all(|w| w[1] <= w[0] || w[0] <= floor);
    let mut structure_holds = fit.is_some();
    if let Some((eps, delta, q)) = fit {
        for w in distances.windows(2) {
            let (d, next) = (w[0], w[1]);
            if d <= floor {
                continue;
            }
            let ok = if d > eps { next <= d - delta * (T::one() - T::lit(1e-6)) } else { next <= q * d };
            structure_holds &= ok;
        }
    }
    let (epsilon, delta, contraction_factor) = fit.unwrap_or((T::zero(), T::zero(), T::one()));
    let passed = structure_holds && nonincreasing && orbit_max <= T::lit(1e-9) && orbit_min < T::zero();
    Ok(PoincareRecord {
        iterates,
        distances,
        epsilon,
        delta,
        contraction_factor,
        fixed_point: fixed.point,
        fixed_point_residual: fixed.residual,
        picard_iterations: fixed.iterations,
        orbit_measure_max: orbit_max,
        orbit_measure_min: orbit_min,
        excursions,
        nonincreasing,
        structure_holds,
        passed,
    })
}

/// Fits `(ε, δ, q)`: `q` is the largest step ratio over the asymptotic tail,
/// `ε` the largest distance after which every ratio stays within `q`, and `δ`
/// the smallest decrement before that point (or `(1-q)·ε` when the whole
/// sequence is already geometric).
fn fit_two_phase<T: Scalar>(d: &[T], floor: T) -> Option<(T, T, T)> {
    let pairs: Vec<(usize, T)> = d.windows(2).enumerate().filter(|(_, w)| w[0] > floor && w[1] > floor).map(|(k, w)| (k, w[1] / w[0])).collect();
    if pairs.is_empty() {
        // already at the fixed point
        return d.first().map(|&d0| (d0.max(floor), T::zero(), T::zero()));
    }
    let tail = &pairs[pairs.len() / 2..];
    let q = tail.iter().fold(T::zero(), |m, &(_, r)| m.max(r));
    if q >= T::one() {
        return None;
    }
    // first index from which all ratios are ≤ q
    let mut start = pairs.len();
    for &(k, r) in pairs.iter().rev() {
        if r > q {
            break;
        }
        start = k;
    }
    let eps = d[start];
    let delta = if start == 0 { (T::one() - q) * eps } else { (0..start).map(|k| d[k] - d[k + 1]).fold(T::infinity(), T::min) };
    if delta > T::zero() {
        Some((eps, delta, q))
    } else {
        None
    }
}
