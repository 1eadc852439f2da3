//! LP weight search.
//!
//! For Metzler `J`, `μ_{1,v}(J) ≤ r` iff `Jᵀv ≤ r·v`, and `μ_{∞,w}(J) ≤ r` iff
//! `J w ≤ r·w`. Writing `G = Jᵀ` (sum kind) or `G = J` (max kind), the best
//! rate over the samples is the smallest `r` for which some `w ≥ 1` satisfies
//! `G_k w ≤ r·w` for all `k`. That set of `r` is an interval, so we bisect on
//! `r` and decide each step with a feasibility LP solved by row generation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampling::{sample_jacobians_with, JacobianSampleSet, SampleStrategy, SamplingOptions, DEFAULT_KINK_MARGIN};
use super::{CertKind, Status, WeightCertificate, CHECK_TOL, DEFAULT_MARGIN};
use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{max_abs, Matrix};
use crate::lp::{Constraint, LinearProgram, LpOutcome};
use crate::measures::mu_weighted;
use crate::norm::WeightedNorm;
use crate::scalar::{to_f64_vec, Scalar};
use crate::simulate::find_equilibrium;
use crate::system::{Bounds, SystemModel};

/// Upper bound on LP weights; keeps tableau entries in a sane range.
const WEIGHT_CAP: f64 = 1e6;
const MAX_ROUNDS: usize = 2000;
const BISECTION_STEPS: usize = 80;
/// A bisection point counts as feasible when the LP slack exceeds this.
const SLACK_TOL: f64 = 1e-9;
/// Strictness requested at the equilibrium once feasibility is known.
const STRICT_TARGET: f64 = 1e-2;
/// Largest `|f(x*)|∞` accepted for a supplied equilibrium.
const EQ_RESIDUAL_TOL: f64 = 1e-8;

fn to_g<T: Scalar>(kind: CertKind, j: &Matrix<T>) -> Matrix<T> {
    match kind {
        CertKind::SumL1 => j.transpose(),
        CertKind::MaxLinf => j.clone(),
    }
}

/// Linear constraint over `(y, u)` where `w = 1 + y` and the slack is `s = 1 - u`:
/// `a·y + cu·u ≤ rhs`.
struct Row<T> {
    a: Vec<T>,
    cu: T,
    rhs: T,
}

impl<T: Scalar> Row<T> {
    /// Row `i` of `(G - r I) w + s ≤ 0` (coupled) or `(G - r I) w ≤ 0`.
    fn from_matrix(g: &Matrix<T>, i: usize, shift: T, coupled: bool) -> Self {
        let mut a = g.row(i).to_vec();
        a[i] -= shift;
        let sum: T = a.iter().copied().sum();
        if coupled {
            Row { a, cu: -T::one(), rhs: -sum - T::one() }
        } else {
            Row { a, cu: T::zero(), rhs: -sum }
        }
    }

    fn violation(&self, y: &[T], u: T) -> T {
        let lhs: T = self.a.iter().zip(y).map(|(&a, &b)| a * b).sum::<T>() + self.cu * u;
        lhs - self.rhs
    }

    fn scale(&self, y: &[T]) -> T {
        T::one() + self.rhs.abs() + self.a.iter().zip(y).map(|(&a, &b)| a.abs() * (T::one() + b.abs())).sum::<T>()
    }

    fn constraint(&self) -> Constraint<T> {
        let mut c = self.a.clone();
        c.push(self.cu);
        Constraint::le(c, self.rhs)
    }
}

/// Candidate rows `(k, i)` drawn from a matrix family, generated on demand.
struct RowSource<'a, T> {
    mats: &'a [Matrix<T>],
    shift: T,
    coupled: bool,
}

impl<T: Scalar> RowSource<'_, T> {
    fn count(&self) -> usize {
        self.mats.len() * self.mats.first().map_or(0, |m| m.nrows())
    }

    fn row(&self, idx: usize) -> Row<T> {
        let n = self.mats[0].nrows();
        Row::from_matrix(&self.mats[idx / n], idx % n, self.shift, self.coupled)
    }
}

#[derive(Clone, Copy)]
enum Objective<T> {
    /// Largest slack `s ≤ 1`.
    MaxSlack,
    /// Smallest `Σ w` with the slack held at `s ≥ min_slack`.
    MinWeights { min_slack: T },
}

/// Optimizes over `w ≥ 1` (capped) subject to the fixed rows and every row of
/// `source`, adding violated rows lazily. Returns `None` when infeasible.
fn solve_rowgen<T: Scalar>(n: usize, fixed: &[Row<T>], source: &RowSource<'_, T>, warm: &[T], objective: Objective<T>) -> Result<Option<(Vec<T>, T)>> {
    let total = source.count();
    let mut active: Vec<usize> = Vec::new();
    let mut is_active = vec![false; total];
    let mut y: Vec<T> = warm.iter().map(|&w| w - T::one()).collect();
    let mut u = T::one();
    let cap = T::lit(WEIGHT_CAP) - T::one();
    let violation_tol = T::lit(1e-11);

    for _ in 0..MAX_ROUNDS {
        // Most violated candidate rows at the current point.
        let mut violated: Vec<(usize, T)> = (0..total)
            .into_par_iter()
            .filter(|&idx| !is_active[idx])
            .filter_map(|idx| {
                let row = source.row(idx);
                let v = row.violation(&y, u);
                (v > violation_tol * row.scale(&y)).then_some((idx, v / row.scale(&y)))
            })
            .collect();
        if violated.is_empty() && !active.is_empty() {
            let w = y.iter().map(|&v| T::one() + v).collect();
            return Ok(Some((w, T::one() - u)));
        }
        violated.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        // One row per component first, so every coordinate gets constrained.
        let mut picked = vec![false; n];
        let mut added = 0;
        for &(idx, _) in &violated {
            let comp = idx % n;
            if !picked[comp] {
                picked[comp] = true;
                is_active[idx] = true;
                active.push(idx);
                added += 1;
            }
        }
        for &(idx, _) in &violated {
            if added >= 4 * n {
                break;
            }
            if !is_active[idx] {
                is_active[idx] = true;
                active.push(idx);
                added += 1;
            }
        }
        if active.is_empty() {
            // nothing violated at the warm start and no rows: seed with row 0 of each component
            for i in 0..n.min(total) {
                is_active[i] = true;
                active.push(i);
            }
        }

        let mut lp = match objective {
            Objective::MaxSlack => {
                let mut c = vec![T::zero(); n + 1];
                c[n] = -T::one();
                LinearProgram::maximize(c)
            }
            Objective::MinWeights { min_slack } => {
                let mut c = vec![T::one(); n + 1];
                c[n] = T::zero();
                let mut lp = LinearProgram::minimize(c);
                let mut row = vec![T::zero(); n + 1];
                row[n] = T::one();
                lp.add(Constraint::le(row, T::one() - min_slack))?;
                lp
            }
        };
        for r in fixed {
            lp.add(r.constraint())?;
        }
        for &idx in &active {
            lp.add(source.row(idx).constraint())?;
        }
        for j in 0..n {
            let mut c = vec![T::zero(); n + 1];
            c[j] = T::one();
            lp.add(Constraint::le(c, cap))?;
        }
        match lp.solve()? {
            LpOutcome::Optimal(sol) => {
                y = sol.x[..n].to_vec();
                u = sol.x[n];
            }
            LpOutcome::Infeasible => return Ok(None),
            LpOutcome::Unbounded => return Err(Error::Lp("slack program reported unbounded".into())),
        }
    }
    Err(Error::Lp(format!("row generation did not settle in {MAX_ROUNDS} rounds")))
}

fn worst_measure<T: Scalar>(mats: &[Matrix<T>], norm: &WeightedNorm<T>) -> Result<T> {
    let values: Vec<T> = mats.par_iter().map(|m| mu_weighted(m, norm).map(|r| r.value)).collect::<Result<_>>()?;
    Ok(values.into_iter().fold(T::neg_infinity(), T::max))
}

fn normalized<T: Scalar>(w: &[T]) -> Vec<T> {
    let m = w.iter().copied().fold(T::infinity(), T::min);
    w.iter().map(|&x| (x / m).max(T::one())).collect()
}

/// Smallest feasible rate: returns normalized weights and the exact worst
/// weighted measure they achieve on the samples.
fn best_rate<T: Scalar>(kind: CertKind, samples: &JacobianSampleSet<T>, margin: T) -> Result<(Vec<T>, T)> {
    let n = samples.dim();
    let gs: Vec<Matrix<T>> = samples.matrices.iter().map(|j| to_g(kind, j)).collect();
    let norm_kind = kind.norm_kind();
    let ones = vec![T::one(); n];

    let mut hi = T::neg_infinity();
    let mut lo = T::neg_infinity();
    for g in &gs {
        for i in 0..n {
            hi = hi.max(g.row(i).iter().copied().sum());
            lo = lo.max(g[(i, i)]);
        }
    }
    let mut best = ones.clone();
    let slack_tol = T::lit(SLACK_TOL);
    for _ in 0..BISECTION_STEPS {
        let width = hi - lo;
        if width <= T::lit(1e-10) * T::one().max(hi.abs()) {
            break;
        }
        let mid = lo + width / T::lit(2.0);
        let source = RowSource { mats: &gs, shift: mid, coupled: true };
        match solve_rowgen(n, &[], &source, &best, Objective::MaxSlack)? {
            Some((w, s)) if s > slack_tol => {
                hi = mid;
                best = w;
            }
            _ => lo = mid,
        }
    }
    let mut weights = normalized(&best);
    let mut rate = worst_measure(&samples.matrices, &WeightedNorm::new(norm_kind, weights.clone())?)?;

    // Optimum at zero (nonexpansive systems): bisection only approaches it
    // from above, so ask for r = 0 directly, then take the smallest weights.
    if rate > -margin {
        let source = RowSource { mats: &gs, shift: T::zero(), coupled: true };
        if let Some((_, s)) = solve_rowgen(n, &[], &source, &best, Objective::MaxSlack)? {
            if s >= -slack_tol {
                let min_slack = s.min(T::zero());
                if let Some((w, _)) = solve_rowgen(n, &[], &source, &best, Objective::MinWeights { min_slack })? {
                    let w0 = normalized(&w);
                    let r0 = worst_measure(&samples.matrices, &WeightedNorm::new(norm_kind, w0.clone())?)?;
                    if r0 <= rate.max(T::lit(CHECK_TOL)) {
                        weights = w0;
                        rate = r0;
                    }
                }
            }
        }
    }
    Ok((weights, rate))
}

fn status_for<T: Scalar>(rate: T, margin: T) -> Status {
    if rate <= -margin {
        Status::Contractive
    } else if rate <= T::lit(CHECK_TOL) {
        Status::NonexpansiveOnly
    } else {
        Status::Failed
    }
}

fn check_margin<T: Scalar>(margin: T) -> Result<()> {
    if margin > T::zero() && margin.is_finite() {
        Ok(())
    } else {
        Err(invalid("margin", "must be a positive real"))
    }
}

fn find_weights<T: Scalar>(kind: CertKind, samples: &JacobianSampleSet<T>, margin: T) -> Result<WeightCertificate<T>> {
    check_margin(margin)?;
    if samples.is_empty() {
        return Err(invalid("samples", "sample set is empty"));
    }
    samples.ensure_metzler()?;
    let (weights, rate) = best_rate(kind, samples, margin)?;
    Ok(WeightCertificate {
        kind,
        weights,
        rate_c: rate,
        margin,
        status: status_for(rate, margin),
        domain: samples.bounds.clone(),
        sample_count: samples.len(),
        seed: samples.seed,
        equilibrium: None,
        limit_of_valid_sequence: false,
        strictness: None,
    })
}

/// Weights `v ≥ 1` minimizing the rate `c` in `vᵀJ_k ≤ c·vᵀ` over the samples.
pub fn find_sum_weights<T: Scalar>(samples: &JacobianSampleSet<T>, margin: T) -> Result<WeightCertificate<T>> {
    find_weights(CertKind::SumL1, samples, margin)
}

/// Weights `w ≥ 1` minimizing the rate `c` in `J_k w ≤ c·w` over the samples.
pub fn find_max_weights<T: Scalar>(samples: &JacobianSampleSet<T>, margin: T) -> Result<WeightCertificate<T>> {
    find_weights(CertKind::MaxLinf, samples, margin)
}

fn strictness_at<T: Scalar>(kind: CertKind, j_star: &Matrix<T>, w: &[T]) -> Result<T> {
    let gw = to_g(kind, j_star).mul_vec(w)?;
    Ok(-gw.into_iter().fold(T::neg_infinity(), T::max))
}

/// Nonexpansion on the samples plus strict decrease at an equilibrium:
/// maximize `s ≤ 1` with `G_k w ≤ 0` for every sample and `G(x*) w ≤ -s·1`.
pub fn certify_nonexpansive_strict<T: Scalar>(
    model: &SystemModel<T>,
    samples: &JacobianSampleSet<T>,
    kind: CertKind,
    equilibrium: &[T],
    margin: T,
) -> Result<WeightCertificate<T>> {
    check_margin(margin)?;
    if !model.is_autonomous() {
        return Err(Error::NotAutonomous);
    }
    check_dim(model.dim(), equilibrium.len())?;
    check_dim(model.dim(), samples.dim())?;
    let residual = max_abs(&model.field(T::zero(), equilibrium));
    if !(residual <= T::lit(EQ_RESIDUAL_TOL)) {
        return Err(Error::NotAnEquilibrium { residual: residual.as_f64(), tolerance: EQ_RESIDUAL_TOL });
    }
    samples.ensure_metzler()?;
    let n = model.dim();
    let j_star = model.jacobian(T::zero(), equilibrium);
    let g_star = to_g(kind, &j_star);
    let fixed: Vec<Row<T>> = (0..n).map(|i| Row::from_matrix(&g_star, i, T::zero(), true)).collect();
    let gs: Vec<Matrix<T>> = samples.matrices.iter().map(|j| to_g(kind, j)).collect();
    let source = RowSource { mats: &gs, shift: T::zero(), coupled: false };

    let mut cert = WeightCertificate {
        kind,
        weights: vec![T::one(); n],
        rate_c: T::zero(),
        margin,
        status: Status::Failed,
        domain: samples.bounds.clone(),
        sample_count: samples.len(),
        seed: samples.seed,
        equilibrium: Some(equilibrium.to_vec()),
        limit_of_valid_sequence: false,
        strictness: None,
    };
    let norm_kind = kind.norm_kind();
    let ones = vec![T::one(); n];
    let phase1 = solve_rowgen(n, &fixed, &source, &ones, Objective::MaxSlack)?;
    // Among strict solutions prefer the smallest weights at a modest strictness.
    let solution = match phase1 {
        Some((w, s)) if s >= margin => {
            let min_slack = s.min(T::lit(STRICT_TARGET)).max(margin);
            solve_rowgen(n, &fixed, &source, &w, Objective::MinWeights { min_slack })?.or(Some((w, s)))
        }
        other => other,
    };
    match solution {
        None => {
            cert.rate_c = worst_measure(&samples.matrices, &WeightedNorm::unit(norm_kind, n))?;
        }
        Some((w, _)) => {
            let rate = worst_measure(&samples.matrices, &WeightedNorm::new(norm_kind, w.clone())?)?;
            let strict = strictness_at(kind, &j_star, &w)?;
            cert.status = if rate > T::lit(CHECK_TOL) {
                Status::Failed
            } else if strict >= margin {
                Status::NonexpansiveStrictAtEq
            } else {
                Status::NonexpansiveOnly
            };
            cert.weights = w;
            cert.rate_c = rate;
            cert.strictness = Some(strict);
        }
    }
    Ok(cert)
}

/// Parametrized weight families approaching a limit as `ε → 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", rename_all = "snake_case")]
pub enum WeightFamily<T> {
    /// `w_i = limit_i + ε_1 + … + ε_{i-1}`.
    Cumulative { limit: Vec<T> },
    /// `w_i = limit_i + ε_i` with `ε_n = 0`.
    Offsets { limit: Vec<T> },
}

impl<T: Scalar> WeightFamily<T> {
    pub fn limit(&self) -> &[T] {
        match self {
            WeightFamily::Cumulative { limit } | WeightFamily::Offsets { limit } => limit,
        }
    }

    /// Weights for an offset vector of length `n - 1`.
    pub fn weights(&self, eps: &[T]) -> Result<Vec<T>> {
        let limit = self.limit();
        let n = limit.len();
        check_dim(n.saturating_sub(1), eps.len())?;
        Ok(match self {
            WeightFamily::Cumulative { .. } => {
                let mut acc = T::zero();
                limit
                    .iter()
                    .enumerate()
                    .map(|(i, &l)| {
                        if i > 0 {
                            acc += eps[i - 1];
                        }
                        l + acc
                    })
                    .collect()
            }
            WeightFamily::Offsets { .. } => limit.iter().enumerate().map(|(i, &l)| l + if i + 1 < n { eps[i] } else { T::zero() }).collect(),
        })
    }
}

/// Certificates along `w(ε_1), w(ε_2), …` followed by the limit weights.
///
/// Every intermediate certificate is re-checked on the samples and must be
/// contractive or strict at the equilibrium; the final element carries the
/// limit weights, status NONEXPANSIVE_ONLY and `limit_of_valid_sequence`.
pub fn refine_weight_sequence<T: Scalar>(
    model: &SystemModel<T>,
    samples: &JacobianSampleSet<T>,
    base: &WeightCertificate<T>,
    family: &WeightFamily<T>,
    epsilons: &[Vec<T>],
) -> Result<Vec<WeightCertificate<T>>> {
    if !matches!(base.status, Status::Contractive | Status::NonexpansiveStrictAtEq) {
        return Err(Error::UnusableCertificate(format!("refinement needs a contractive or strict base, got {}", base.status)));
    }
    let limit = family.limit();
    check_dim(base.weights.len(), limit.len())?;
    if limit.iter().any(|&l| !(l > T::zero())) {
        return Err(invalid("limit", "limit weights must be strictly positive"));
    }
    let scale = limit.iter().fold(T::one(), |m, &l| m.max(l.abs()));
    if base.weights.iter().zip(limit).all(|(&a, &b)| (a - b).abs() <= T::lit(1e-12) * scale) {
        return Ok(vec![base.clone()]);
    }
    for pair in epsilons.windows(2) {
        if pair[1].iter().zip(&pair[0]).any(|(&a, &b)| !(a < b)) {
            return Err(invalid("epsilons", "schedule must decrease in every component"));
        }
    }
    if epsilons.iter().flatten().any(|&e| !(e > T::zero())) {
        return Err(invalid("epsilons", "offsets must be positive"));
    }

    let kind = base.kind;
    let norm_kind = kind.norm_kind();
    let j_star = base.equilibrium.as_ref().map(|x| model.jacobian(T::zero(), x));
    let mut out = Vec::with_capacity(epsilons.len() + 1);
    for eps in epsilons {
        let w = family.weights(eps)?;
        let norm = WeightedNorm::new(norm_kind, w.clone())?;
        let rate = worst_measure(&samples.matrices, &norm)?;
        let strictness = j_star.as_ref().map(|j| strictness_at(kind, j, &w)).transpose()?;
        let status = if rate <= -base.margin {
            Status::Contractive
        } else if rate <= T::lit(CHECK_TOL) && strictness.is_some_and(|s| s >= base.margin) {
            Status::NonexpansiveStrictAtEq
        } else {
            return Err(Error::RefinementFailed { epsilon: to_f64_vec(eps), worst: rate.as_f64() });
        };
        out.push(WeightCertificate { weights: w, rate_c: rate, status, strictness, limit_of_valid_sequence: false, ..base.clone() });
    }
    let norm = WeightedNorm::new(norm_kind, limit.to_vec())?;
    let rate = worst_measure(&samples.matrices, &norm)?;
    if rate > T::lit(CHECK_TOL) {
        return Err(Error::RefinementFailed { epsilon: vec![0.0; limit.len().saturating_sub(1)], worst: rate.as_f64() });
    }
    let strictness = j_star.as_ref().map(|j| strictness_at(kind, j, limit)).transpose()?;
    out.push(WeightCertificate {
        weights: limit.to_vec(),
        rate_c: rate,
        status: Status::NonexpansiveOnly,
        strictness,
        limit_of_valid_sequence: true,
        ..base.clone()
    });
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct VerificationReport<T> {
    pub seed: u64,
    pub sample_count: usize,
    /// Largest `μ(J) - bound` over the fresh samples; the bound is `rate_c`
    /// for contractive certificates and 0 otherwise.
    pub worst_violation: T,
    pub worst_point: Option<Vec<T>>,
    pub passed: bool,
    /// Certificate status as supported by the fresh samples.
    pub status: Status,
}

/// Re-checks a certificate on fresh random samples drawn from its own box.
pub fn verify_certificate<T: Scalar>(model: &SystemModel<T>, cert: &WeightCertificate<T>, fresh_count: usize, seed: u64) -> Result<VerificationReport<T>> {
    if cert.status == Status::Failed {
        return Err(Error::UnusableCertificate("cannot verify a FAILED certificate".into()));
    }
    check_dim(model.dim(), cert.weights.len())?;
    let seed = if seed == cert.seed { seed ^ 0x9E37_79B9_7F4A_7C15 } else { seed };
    let opts = SamplingOptions::new(fresh_count, SampleStrategy::Random, seed).with_bounds(cert.domain.clone());
    let samples = sample_jacobians_with(model, &opts)?;
    let norm = cert.norm()?;
    let bound = cert.envelope_rate();
    let measures: Vec<T> = samples.matrices.par_iter().map(|m| mu_weighted(m, &norm).map(|r| r.value)).collect::<Result<_>>()?;
    let (worst_idx, worst) = measures.iter().enumerate().fold((0, T::neg_infinity()), |acc, (i, &m)| if m > acc.1 { (i, m) } else { acc });
    let worst_violation = worst - bound;
    let passed = worst_violation <= T::lit(CHECK_TOL);
    let status = if passed {
        cert.status
    } else if worst <= T::lit(CHECK_TOL) {
        Status::NonexpansiveOnly
    } else {
        Status::Failed
    };
    Ok(VerificationReport {
        seed,
        sample_count: samples.len(),
        worst_violation,
        worst_point: samples.points.get(worst_idx).map(|p| p.1.clone()),
        passed,
        status,
    })
}

#[derive(Clone, Debug)]
pub struct CertifyOptions<T> {
    pub samples: usize,
    pub seed: u64,
    pub margin: T,
    pub strategy: SampleStrategy,
    pub kink_margin: T,
    /// Equilibrium for the strict fallback; found numerically when absent.
    pub equilibrium: Option<Vec<T>>,
    pub bounds: Option<Bounds<T>>,
}

impl<T: Scalar> Default for CertifyOptions<T> {
    fn default() -> Self {
        Self {
            samples: 2000,
            seed: 42,
            margin: T::lit(DEFAULT_MARGIN),
            strategy: SampleStrategy::Mixed,
            kink_margin: T::lit(DEFAULT_KINK_MARGIN),
            equilibrium: None,
            bounds: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CertificationOutcome<T> {
    pub sum: WeightCertificate<T>,
    pub max: WeightCertificate<T>,
    pub equilibrium: Option<Vec<T>>,
}

impl<T: Scalar> CertificationOutcome<T> {
    pub fn get(&self, kind: CertKind) -> &WeightCertificate<T> {
        match kind {
            CertKind::SumL1 => &self.sum,
            CertKind::MaxLinf => &self.max,
        }
    }

    pub fn any_usable(&self) -> bool {
        self.sum.is_usable() || self.max.is_usable()
    }
}

/// Full pipeline: sample, search both weight kinds, and fall back to the
/// strict-at-equilibrium program for autonomous models that are not contractive.
pub fn certify<T: Scalar>(model: &SystemModel<T>, opts: &CertifyOptions<T>) -> Result<CertificationOutcome<T>> {
    let mut sopts = SamplingOptions::new(opts.samples, opts.strategy, opts.seed);
    sopts.kink_margin = opts.kink_margin;
    sopts.bounds = opts.bounds.clone();
    let samples = sample_jacobians_with(model, &sopts)?;
    let mut equilibrium: Option<Vec<T>> = None;
    let mut eq_attempted = false;
    let mut run = |kind: CertKind| -> Result<WeightCertificate<T>> {
        let cert = find_weights(kind, &samples, opts.margin)?;
        if cert.status == Status::Contractive || !model.is_autonomous() {
            return Ok(cert);
        }
        if !eq_attempted {
            eq_attempted = true;
            equilibrium = match (&opts.equilibrium, model.known_equilibrium()) {
                (Some(x), _) => Some(x.clone()),
                (None, Some(x)) => Some(x.to_vec()),
                (None, None) => {
                    let mid: Vec<T> = samples.bounds.lower.iter().zip(&samples.bounds.upper).map(|(&l, &u)| (l + u) / T::lit(2.0)).collect();
                    find_equilibrium(model, &mid).ok()
                }
            };
        }
        let Some(eq) = equilibrium.as_ref() else { return Ok(cert) };
        let strict = certify_nonexpansive_strict(model, &samples, kind, eq, opts.margin)?;
        Ok(if strict.status.rank() > cert.status.rank() { strict } else { cert })
    };
    let sum = run(CertKind::SumL1)?;
    let max = run(CertKind::MaxLinf)?;
    Ok(CertificationOutcome { sum, max, equilibrium })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[&[f64]]) -> JacobianSampleSet<f64> {
        JacobianSampleSet::from_matrices(vec![Matrix::from_f64_rows(rows).unwrap()]).unwrap()
    }

    #[test]
    fn symmetric_pair_gets_unit_weights() {
        let s = set(&[&[-1.0, 0.5], &[0.5, -1.0]]);
        for cert in [find_sum_weights(&s, 1e-6).unwrap(), find_max_weights(&s, 1e-6).unwrap()] {
            assert_eq!(cert.status, Status::Contractive);
            assert!((cert.rate_c + 0.5).abs() < 1e-9);
            assert!(cert.weights.iter().all(|&w| (w - 1.0).abs() < 1e-6));
        }
    }

    #[test]
    fn unstable_swap_fails() {
        let s = set(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(find_sum_weights(&s, 1e-6).unwrap().status, Status::Failed);
        assert_eq!(find_max_weights(&s, 1e-6).unwrap().status, Status::Failed);
    }

    #[test]
    fn zero_matrix_is_only_nonexpansive() {
        let s = set(&[&[0.0, 0.0], &[0.0, 0.0]]);
        let c = find_sum_weights(&s, 1e-6).unwrap();
        assert_eq!(c.status, Status::NonexpansiveOnly);
        assert_eq!(c.rate_c, 0.0);
    }

    #[test]
    fn asymmetric_matrix_needs_nonunit_weights() {
        // unit weights give column sums (-1+4, ...) > 0 but the matrix is Hurwitz
        let s = set(&[&[-1.0, 0.1], &[4.0, -2.0]]);
        let c = find_sum_weights(&s, 1e-6).unwrap();
        assert_eq!(c.status, Status::Contractive);
        let a = -1.5 + (0.25f64 + 0.4).sqrt();
        assert!((c.rate_c - a).abs() < 1e-6, "{} vs {}", c.rate_c, a);
    }

    #[test]
    fn non_metzler_samples_rejected() {
        let s = set(&[&[-1.0, -0.5], &[0.5, -1.0]]);
        assert!(matches!(find_sum_weights(&s, 1e-6), Err(Error::NotMetzler { .. })));
    }

    #[test]
    fn families() {
        let cum = WeightFamily::Cumulative { limit: vec![1.0, 1.0, 1.0] };
        assert_eq!(cum.weights(&[0.2, 0.1]).unwrap(), vec![1.0, 1.2, 1.0 + 0.2 + 0.1]);
        let off = WeightFamily::Offsets { limit: vec![1.0, 2.0, 3.0] };
        assert_eq!(off.weights(&[0.2, 0.1]).unwrap(), vec![1.2, 2.1, 3.0]);
        assert!(off.weights(&[0.1]).is_err());
    }
}
