//! Built-in example systems with analytic Jacobians, and the JSON model spec.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::Matrix;
use crate::measures::{is_metzler, METZLER_TOL};
use crate::scalar::Scalar;
use crate::system::{Bounds, DomainBox, Dynamics, Switch, SystemModel};

/// `ẋ = A x` for Metzler `A`.
pub fn linear<T: Scalar>(a: Matrix<T>) -> Result<SystemModel<T>> {
    let n = a.ensure_square()?;
    if n == 0 {
        return Err(invalid("A", "matrix must be non-empty"));
    }
    if !a.is_finite() {
        return Err(invalid("A", "entries must be finite"));
    }
    let tol = T::lit(METZLER_TOL);
    if !is_metzler(&a, tol) {
        for i in 0..n {
            for j in 0..n {
                if i != j && a[(i, j)] < -tol {
                    return Err(Error::NotMetzler { row: i, col: j, value: a[(i, j)].as_f64() });
                }
            }
        }
    }
    let field_a = a.clone();
    let mut model = SystemModel::from_fns(
        "linear",
        n,
        move |_, x: &[T], out: &mut [T]| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = field_a.row(i).iter().zip(x).map(|(&p, &q)| p * q).sum();
            }
        },
        move |_, _| a.clone(),
        DomainBox::whole_space(n),
    )?;
    model = model.with_equilibrium(vec![T::zero(); n])?;
    Ok(model)
}

/// Comparison system on `ℝ²≥0` with `β(σ) = σ/(1+σ)` and `γ(σ) = s·σ/(1+σ)`.
pub fn comparison<T: Scalar>(s: T) -> Result<SystemModel<T>> {
    if !(s > T::zero() && s < T::one()) {
        return Err(invalid("s", format!("gamma scale must lie in (0, 1), got {s}")));
    }
    // With σ = e^{ξ₁} - 1: β(σ) = 1 - e^{-ξ₁} and γ(σ) = s(1 - e^{-ξ₁}).
    let domain = DomainBox::nonnegative_orthant(2).with_truncation(vec![T::zero(); 2], vec![T::lit(5.0); 2])?;
    let two = T::lit(2.0);
    SystemModel::from_fns(
        "comparison",
        2,
        move |_, x: &[T], out: &mut [T]| {
            let e = (-x[0]).exp();
            let g = s * (T::one() - e);
            out[0] = -(T::one() - e) + x[1];
            out[1] = -two * x[1] - x[1] * x[1] + g * g;
        },
        move |_, x: &[T]| {
            let e = (-x[0]).exp();
            let mut j = Matrix::zeros(2, 2);
            j[(0, 0)] = -e;
            j[(0, 1)] = T::one();
            j[(1, 0)] = two * s * s * (T::one() - e) * e;
            j[(1, 1)] = -two - two * x[1];
            j
        },
        domain,
    )?
    .with_equilibrium(vec![T::zero(); 2])
}

/// Derivative bounds of the multiagent example: `α₁' ≥ c0`, `ρ₁' ≤ c1`,
/// `ρ₂' ≥ c2`, `ρ₃' ≤ c3`, `ρ₄' ≥ c4`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct MultiagentBounds<T> {
    pub c0: T,
    pub c1: T,
    pub c2: T,
    pub c3: T,
    pub c4: T,
}

impl<T: Scalar> Default for MultiagentBounds<T> {
    fn default() -> Self {
        Self { c0: T::one(), c1: T::one(), c2: T::one(), c3: T::one(), c4: T::one() }
    }
}

impl<T: Scalar> MultiagentBounds<T> {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("c0", self.c0), ("c1", self.c1), ("c2", self.c2), ("c3", self.c3), ("c4", self.c4)] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(invalid(name, "derivative bounds must be positive reals"));
            }
        }
        Ok(())
    }
}

/// Rendezvous dynamics with `α₁(σ) = c0·σ`, `ρ₁ = c1·tanh`, `ρ₂(σ) = c2·σ`,
/// `ρ₃ = c3·tanh`, `ρ₄(σ) = c4·σ`, plus optional forcing on `ẋ₁`.
struct Multiagent<T> {
    b: MultiagentBounds<T>,
    amplitude: T,
    period: T,
}

fn sech2<T: Scalar>(z: T) -> T {
    let c = z.cosh();
    if c.is_finite() {
        T::one() / (c * c)
    } else {
        T::zero()
    }
}

impl<T: Scalar> Dynamics<T> for Multiagent<T> {
    fn dim(&self) -> usize {
        3
    }

    fn field(&self, t: T, x: &[T], out: &mut [T]) {
        let b = &self.b;
        let u = if self.amplitude == T::zero() { T::zero() } else { self.amplitude * (T::TAU() * t / self.period).sin() };
        out[0] = -b.c0 * x[0] + b.c1 * (x[2] - x[0]).tanh() + u;
        out[1] = b.c2 * (x[0] - x[1]) + b.c3 * (x[2] - x[1]).tanh();
        out[2] = b.c4 * (x[1] - x[2]);
    }

    fn jacobian(&self, _t: T, x: &[T]) -> Matrix<T> {
        let b = &self.b;
        let r1 = b.c1 * sech2(x[2] - x[0]);
        let r3 = b.c3 * sech2(x[2] - x[1]);
        let mut j = Matrix::zeros(3, 3);
        j[(0, 0)] = -b.c0 - r1;
        j[(0, 2)] = r1;
        j[(1, 0)] = b.c2;
        j[(1, 1)] = -b.c2 - r3;
        j[(1, 2)] = r3;
        j[(2, 1)] = b.c4;
        j[(2, 2)] = -b.c4;
        j
    }
}

pub fn multiagent<T: Scalar>(bounds: MultiagentBounds<T>) -> Result<SystemModel<T>> {
    bounds.validate()?;
    let dynamics = Multiagent { b: bounds, amplitude: T::zero(), period: T::one() };
    SystemModel::new("multiagent", Arc::new(dynamics), DomainBox::whole_space(3))?.with_equilibrium(vec![T::zero(); 3])
}

/// Multiagent field with `u(t) = amplitude·sin(2πt/period)` added to `ẋ₁`.
pub fn multiagent_forced<T: Scalar>(bounds: MultiagentBounds<T>, amplitude: T, period: T) -> Result<SystemModel<T>> {
    bounds.validate()?;
    if !amplitude.is_finite() {
        return Err(invalid("amplitude", "must be finite"));
    }
    if !(period > T::zero() && period.is_finite()) {
        return Err(invalid("period", "must be a positive real"));
    }
    let dynamics = Multiagent { b: bounds, amplitude, period };
    SystemModel::new("multiagent_forced", Arc::new(dynamics), DomainBox::whole_space(3))?.periodic(period)
}

/// Freeway with `n` links: demand `D_i(x) = d_i·x`, supply `S_i(x) = s_i·(x̄_i - x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrafficParams<T> {
    pub n: usize,
    /// Split ratios `β_1..β_{n-1}`.
    pub beta: Vec<T>,
    pub xbar: Vec<T>,
    pub delta1: T,
    pub demand_slope: Vec<T>,
    pub supply_slope: Vec<T>,
}

impl<T: Scalar> TrafficParams<T> {
    /// Uniform links: shared split ratio, capacity and slopes.
    pub fn uniform(n: usize, beta: T, xbar: T, delta1: T, demand_slope: T, supply_slope: T) -> Self {
        Self { n, beta: vec![beta; n.saturating_sub(1)], xbar: vec![xbar; n], delta1, demand_slope: vec![demand_slope; n], supply_slope: vec![supply_slope; n] }
    }

    /// `δ_i = δ_1·β_1⋯β_{i-1}`.
    pub fn inflows(&self) -> Vec<T> {
        let mut d = Vec::with_capacity(self.n);
        let mut acc = self.delta1;
        for i in 0..self.n {
            d.push(acc);
            if i + 1 < self.n {
                acc *= self.beta[i];
            }
        }
        d
    }

    /// `x*_i = D_i⁻¹(δ_i)`.
    pub fn equilibrium(&self) -> Vec<T> {
        self.inflows().iter().zip(&self.demand_slope).map(|(&d, &k)| d / k).collect()
    }

    /// Weights `(1, 1/β_1, 1/(β_1β_2), …)` making every column sum of `vᵀJ` nonpositive.
    pub fn limit_weights(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.n);
        let mut acc = T::one();
        for i in 0..self.n {
            v.push(acc);
            if i + 1 < self.n {
                acc /= self.beta[i];
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid("n", "need at least two links"));
        }
        check_dim(self.n - 1, self.beta.len())?;
        check_dim(self.n, self.xbar.len())?;
        check_dim(self.n, self.demand_slope.len())?;
        check_dim(self.n, self.supply_slope.len())?;
        if self.beta.iter().any(|&b| !(b > T::zero() && b < T::one())) {
            return Err(invalid("beta", "split ratios must lie in (0, 1)"));
        }
        for (name, v) in [("xbar", &self.xbar), ("demand_slope", &self.demand_slope), ("supply_slope", &self.supply_slope)] {
            if v.iter().any(|&x| !(x > T::zero() && x.is_finite())) {
                return Err(invalid(name, "entries must be positive reals"));
            }
        }
        if !(self.delta1 > T::zero() && self.delta1.is_finite()) {
            return Err(invalid("delta1", "inflow must be a positive real"));
        }
        // D_i⁻¹(δ_i) < S_i⁻¹(δ_i) on every link
        for (i, &d) in self.inflows().iter().enumerate() {
            let eq = d / self.demand_slope[i];
            let limit = self.xbar[i] - d / self.supply_slope[i];
            if !(eq < limit) {
                return Err(Error::InfeasibleInflow { index: i, equilibrium: eq.as_f64(), limit: limit.as_f64() });
            }
        }
        Ok(())
    }
}

struct Traffic<T> {
    p: TrafficParams<T>,
}

impl<T: Scalar> Traffic<T> {
    fn demand(&self, i: usize, x: T) -> T {
        self.p.demand_slope[i] * x
    }

    fn supply(&self, i: usize, x: T) -> T {
        self.p.supply_slope[i] * (self.p.xbar[i] - x)
    }

    /// Flow from link `i` to `i+1` (0-based) and whether demand is the active piece.
    fn flow(&self, i: usize, x: &[T]) -> (T, bool) {
        let d = self.p.beta[i] * self.demand(i, x[i]);
        let s = self.supply(i + 1, x[i + 1]);
        if d <= s {
            (d, true)
        } else {
            (s, false)
        }
    }

    fn inflow(&self, x: &[T]) -> (T, bool) {
        let s = self.supply(0, x[0]);
        if self.p.delta1 <= s {
            (self.p.delta1, true)
        } else {
            (s, false)
        }
    }
}

impl<T: Scalar> Dynamics<T> for Traffic<T> {
    fn dim(&self) -> usize {
        self.p.n
    }

    fn field(&self, _t: T, x: &[T], out: &mut [T]) {
        let n = self.p.n;
        let mut incoming = self.inflow(x).0;
        for i in 0..n {
            let outgoing = if i + 1 < n { self.flow(i, x).0 / self.p.beta[i] } else { self.demand(i, x[i]) };
            out[i] = incoming - outgoing;
            if i + 1 < n {
                incoming = self.flow(i, x).0;
            }
        }
    }

    /// One-sided Jacobian; ties between demand and supply take the demand piece.
    fn jacobian(&self, _t: T, x: &[T]) -> Matrix<T> {
        let n = self.p.n;
        let mut j = Matrix::zeros(n, n);
        if !self.inflow(x).1 {
            j[(0, 0)] -= self.p.supply_slope[0];
        }
        for i in 0..n - 1 {
            let (_, demand_side) = self.flow(i, x);
            // partial derivatives of g_i with respect to x_i and x_{i+1}
            let (di, dnext) = if demand_side { (self.p.beta[i] * self.p.demand_slope[i], T::zero()) } else { (T::zero(), -self.p.supply_slope[i + 1]) };
            let inv = T::one() / self.p.beta[i];
            j[(i, i)] -= inv * di;
            j[(i, i + 1)] -= inv * dnext;
            j[(i + 1, i)] += di;
            j[(i + 1, i + 1)] += dnext;
        }
        j[(n - 1, n - 1)] -= self.p.demand_slope[n - 1];
        j
    }

    fn switches(&self, _t: T, x: &[T]) -> Vec<Switch<T>> {
        let n = self.p.n;
        let mut out = Vec::with_capacity(n);
        let mut g = vec![T::zero(); n];
        g[0] = self.p.supply_slope[0];
        out.push(Switch { residual: self.p.delta1 - self.supply(0, x[0]), gradient: g });
        for i in 0..n - 1 {
            let mut g = vec![T::zero(); n];
            g[i] = self.p.beta[i] * self.p.demand_slope[i];
            g[i + 1] = self.p.supply_slope[i + 1];
            out.push(Switch { residual: self.p.beta[i] * self.demand(i, x[i]) - self.supply(i + 1, x[i + 1]), gradient: g });
        }
        out
    }
}

/// Cell-transmission freeway model on `∏[0, x̄_i]`.
pub fn traffic<T: Scalar>(params: TrafficParams<T>) -> Result<SystemModel<T>> {
    params.validate()?;
    let n = params.n;
    let domain = DomainBox::new(vec![T::zero(); n], params.xbar.clone())?.with_truncation(vec![T::zero(); n], params.xbar.clone())?;
    let eq = params.equilibrium();
    SystemModel::new("traffic", Arc::new(Traffic { p: params }), domain)?.with_equilibrium(eq)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    #[serde(alias = "LINEAR")]
    Linear,
    #[serde(alias = "COMPARISON")]
    Comparison,
    #[serde(alias = "MULTIAGENT")]
    Multiagent,
    #[serde(alias = "TRAFFIC")]
    Traffic,
    #[serde(alias = "MULTIAGENT_FORCED")]
    MultiagentForced,
}

/// A scalar applied to every entry, or one value per entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn expand<T: Scalar>(&self, len: usize) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![T::lit(*x); len],
            OneOrMany::Many(v) => v.iter().map(|&x| T::lit(x)).collect(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearSpec {
    #[serde(rename = "A", alias = "a")]
    a: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GammaParams {
    #[serde(alias = "scale")]
    s: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ComparisonSpec {
    gamma_params: GammaParams,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MultiagentSpec {
    #[serde(default)]
    bounds: MultiagentBounds<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrafficSpec {
    n: usize,
    beta: OneOrMany,
    xbar: OneOrMany,
    delta1: f64,
    demand_slope: OneOrMany,
    supply_slope: OneOrMany,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ForcedSpec {
    #[serde(default)]
    bounds: MultiagentBounds<f64>,
    amplitude: f64,
    period: f64,
}

/// `{"name": ..., "params": {...}, "truncation": {"lower": [...], "upper": [...]}}`;
/// the truncation box is optional and replaces the model's default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: ModelName,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<Bounds<f64>>,
}

fn params<P: for<'de> Deserialize<'de>>(v: &serde_json::Value) -> Result<P> {
    let v = if v.is_null() { serde_json::Value::Object(Default::default()) } else { v.clone() };
    serde_json::from_value(v).map_err(|e| Error::Spec(e.to_string()))
}

fn bounds_to<T: Scalar>(b: &MultiagentBounds<f64>) -> MultiagentBounds<T> {
    MultiagentBounds { c0: T::lit(b.c0), c1: T::lit(b.c1), c2: T::lit(b.c2), c3: T::lit(b.c3), c4: T::lit(b.c4) }
}

impl ModelSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Spec(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Traffic parameters, when this spec describes the traffic model.
    pub fn traffic_params<T: Scalar>(&self) -> Result<Option<TrafficParams<T>>> {
        if self.name != ModelName::Traffic {
            return Ok(None);
        }
        let p: TrafficSpec = params(&self.params)?;
        Ok(Some(TrafficParams {
            n: p.n,
            beta: p.beta.expand(p.n.saturating_sub(1)),
            xbar: p.xbar.expand(p.n),
            delta1: T::lit(p.delta1),
            demand_slope: p.demand_slope.expand(p.n),
            supply_slope: p.supply_slope.expand(p.n),
        }))
    }

    pub fn build<T: Scalar>(&self) -> Result<SystemModel<T>> {
        let model = match self.name {
            ModelName::Linear => {
                let p: LinearSpec = params(&self.params)?;
                let rows: Vec<Vec<T>> = p.a.iter().map(|r| r.iter().map(|&x| T::lit(x)).collect()).collect();
                linear(Matrix::from_rows(&rows)?)?
            }
            ModelName::Comparison => {
                let p: ComparisonSpec = params(&self.params)?;
                comparison(T::lit(p.gamma_params.s))?
            }
            ModelName::Multiagent => {
                let p: MultiagentSpec = params(&self.params)?;
                multiagent(bounds_to(&p.bounds))?
            }
            ModelName::Traffic => traffic(self.traffic_params()?.expect("traffic spec"))?,
            ModelName::MultiagentForced => {
                let p: ForcedSpec = params(&self.params)?;
                multiagent_forced(bounds_to(&p.bounds), T::lit(p.amplitude), T::lit(p.period))?
            }
        };
        match &self.truncation {
            None => Ok(model),
            Some(b) => model.with_truncation(b.lower.iter().map(|&x| T::lit(x)).collect(), b.upper.iter().map(|&x| T::lit(x)).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_rejects_non_metzler() {
        let a = Matrix::<f64>::from_f64_rows(&[&[-1.0, -0.5], &[0.5, -1.0]]).unwrap();
        assert!(matches!(linear(a), Err(Error::NotMetzler { row: 0, col: 1, .. })));
    }

    #[test]
    fn comparison_scale_validated() {
        assert!(comparison(1.0f64).is_err());
        assert!(comparison(0.0f64).is_err());
        let m = comparison(0.5f64).unwrap();
        assert_eq!(m.field(0.0, &[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn traffic_equilibrium_values() {
        let p = TrafficParams::<f64>::uniform(3, 0.9, 1.0, 0.3, 1.0, 1.0);
        let x = p.equilibrium();
        for (a, b) in x.iter().zip([0.3, 0.27, 0.243]) {
            assert!((a - b).abs() < 1e-15);
        }
        let m = traffic(p).unwrap();
        assert!(m.field(0.0, &x).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn traffic_infeasible_inflow_names_link() {
        // link 1: x* = 0.6 ≥ 1 - 0.6
        let p = TrafficParams::<f64>::uniform(2, 0.9, 1.0, 0.6, 1.0, 1.0);
        assert!(matches!(traffic(p), Err(Error::InfeasibleInflow { index: 0, .. })));
    }

    #[test]
    fn forced_needs_positive_period() {
        assert!(multiagent_forced(MultiagentBounds::<f64>::default(), 0.1, 0.0).is_err());
        let m = multiagent_forced(MultiagentBounds::<f64>::default(), 0.1, 1.0).unwrap();
        assert_eq!(m.period(), Some(1.0));
    }

    #[test]
    fn spec_round_trip() {
        let s = r#"{"name": "traffic", "params": {"n": 3, "beta": 0.9, "xbar": 1, "delta1": 0.3, "demand_slope": 1, "supply_slope": [1, 1, 1]}}"#;
        let spec = ModelSpec::from_json(s).unwrap();
        let m: SystemModel<f64> = spec.build().unwrap();
        assert_eq!(m.dim(), 3);
        let again = ModelSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(again, spec);
    }

    #[test]
    fn spec_rejects_unknown_params() {
        let s = r#"{"name": "COMPARISON", "params": {"gamma_params": {"s": 0.5}, "extra": 1}}"#;
        assert!(matches!(ModelSpec::from_json(s).unwrap().build::<f64>(), Err(Error::Spec(_))));
    }
}
