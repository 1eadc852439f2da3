use moncon::certify::{certify, refine_weight_sequence, sample_jacobians, CertifyOptions, SampleStrategy, WeightFamily};
use moncon::lyapunov::decrease_along;
use moncon::measures::{mu1, mu_inf, MeasureReport};
use moncon::models::ModelName;
use moncon::simulate::{check_entrainment, check_flow_decay, check_monotonicity, check_pair_contraction, find_equilibrium, integrate, EntrainmentOptions};
use moncon::system::fmt_real;
use moncon::{Bounds, CertKind, Error, Lyapunov, LyapunovForm, NormKind, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::artifacts::*;
use crate::error::{CliError, Result};
use crate::run::Context;
use crate::{report, CommandKind};

/// Random starts per Lyapunov form and per entrainment run.
const STARTS: usize = 5;
/// Trajectory pairs per simulation suite.
const PAIRS: usize = 20;
const PERIODS: usize = 60;

pub fn dispatch(kind: CommandKind, ctx: &Context) -> Result<()> {
    match kind {
        CommandKind::Measure => measure(ctx),
        CommandKind::Certify => certify_cmd(ctx),
        CommandKind::Lyapunov => lyapunov(ctx),
        CommandKind::Simulate => simulate(ctx),
        CommandKind::Entrain => entrain(ctx),
        CommandKind::Report => report::report(ctx),
    }
}

fn rng(ctx: &Context) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(ctx.config.seed)
}

fn uniform(rng: &mut impl Rng, b: &Bounds<f64>) -> Vec<f64> {
    b.lower.iter().zip(&b.upper).map(|(&l, &u)| l + (u - l) * rng.gen::<f64>()).collect()
}

fn ordered_pair(rng: &mut impl Rng, b: &Bounds<f64>) -> (Vec<f64>, Vec<f64>) {
    let x = uniform(rng, b);
    let y = x.iter().zip(&b.upper).map(|(&xi, &u)| xi + (u - xi) * rng.gen::<f64>()).collect();
    (x, y)
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

#[derive(Serialize)]
struct MeasureRow<'a> {
    t: f64,
    x: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    mu1: Option<MeasureReport<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu_inf: Option<MeasureReport<f64>>,
}

#[derive(Serialize)]
struct Extremes {
    max: f64,
    argmax_sample: usize,
    min: f64,
}

#[derive(Serialize)]
struct MeasureArtifact<'a> {
    sample_count: usize,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu1: Option<Extremes>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu_inf: Option<Extremes>,
    samples: Vec<MeasureRow<'a>>,
}

fn extremes<'a>(values: impl Iterator<Item = Option<&'a MeasureReport<f64>>>) -> Option<Extremes> {
    let mut out: Option<Extremes> = None;
    for (i, r) in values.enumerate() {
        let v = r?.value;
        match &mut out {
            None => out = Some(Extremes { max: v, argmax_sample: i, min: v }),
            Some(e) => {
                if v > e.max {
                    e.max = v;
                    e.argmax_sample = i;
                }
                e.min = e.min.min(v);
            }
        }
    }
    out
}

fn measure(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    let samples = sample_jacobians(&ctx.model, cfg.samples, SampleStrategy::Mixed, cfg.seed)?;
    let rows = samples
        .points
        .iter()
        .zip(&samples.matrices)
        .map(|((t, x), a)| {
            Ok(MeasureRow {
                t: *t,
                x,
                mu1: ctx.wants(NormKind::L1).then(|| mu1(a)).transpose()?,
                mu_inf: ctx.wants(NormKind::Linf).then(|| mu_inf(a)).transpose()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let art = MeasureArtifact {
        sample_count: rows.len(),
        seed: cfg.seed,
        mu1: extremes(rows.iter().map(|r| r.mu1.as_ref())),
        mu_inf: extremes(rows.iter().map(|r| r.mu_inf.as_ref())),
        samples: rows,
    };
    for (name, ext, pick) in [("mu_1", &art.mu1, 0), ("mu_inf", &art.mu_inf, 1)] {
        let Some(e) = ext else { continue };
        let row = &art.samples[e.argmax_sample];
        let rep = if pick == 0 { row.mu1.as_ref() } else { row.mu_inf.as_ref() };
        println!("{name:<7} max {} min {} over {} samples", fmt_real(e.max), fmt_real(e.min), art.sample_count);
        println!("        worst sample {} at x = {}: {}", e.argmax_sample, fmt_vec(row.x), serde_json::to_string(&rep).expect("report serializes"));
    }
    let path = ctx.dir.write_json("measures.json", &art)?;
    println!("wrote {}", path.display());
    Ok(())
}

struct Plan {
    kind: CertKind,
    name: &'static str,
    family: WeightFamily<f64>,
    epsilons: Vec<Vec<f64>>,
}

/// Models with a known limit weight vector get a decreasing offset schedule
/// `ε·10^{-k}` toward it.
fn refinement_plan(ctx: &Context) -> Result<Option<Plan>> {
    let n = ctx.model.dim();
    let schedule = |base: f64, ratio: f64| -> Vec<Vec<f64>> {
        let top: Vec<f64> = (0..n.saturating_sub(1)).map(|i| base * ratio.powi((n - 2 - i) as i32)).collect();
        (0..4).map(|k| top.iter().map(|e| e * 10f64.powi(-k)).collect()).collect()
    };
    let spec = &ctx.config.model;
    Ok(match spec.name {
        ModelName::Traffic => {
            let p = spec.traffic_params::<f64>()?.expect("traffic spec has traffic params");
            Some(Plan { kind: CertKind::SumL1, name: "offsets", family: WeightFamily::Offsets { limit: p.limit_weights() }, epsilons: schedule(0.1, 1.5) })
        }
        ModelName::Multiagent | ModelName::MultiagentForced => {
            Some(Plan { kind: CertKind::MaxLinf, name: "cumulative", family: WeightFamily::Cumulative { limit: vec![1.0; n] }, epsilons: schedule(0.1, 2.0) })
        }
        _ => None,
    })
}

/// Runs both weight searches (with the strict fallback) and any refinement,
/// writing one JSON file per certificate.
fn compute_certs(ctx: &Context) -> Result<CertSet> {
    let cfg = &ctx.config;
    let opts = CertifyOptions { samples: cfg.samples, seed: cfg.seed, margin: cfg.margin, ..Default::default() };
    let outcome = certify(&ctx.model, &opts)?;
    let mut entries = Vec::new();
    for kind in KINDS {
        let cert = outcome.get(kind).clone();
        let file = cert_file(kind);
        ctx.dir.write(&file, &(cert.to_json() + "\n"))?;
        entries.push(NamedCert { file, cert });
    }
    if let Some(plan) = refinement_plan(ctx)? {
        let base = outcome.get(plan.kind);
        let mut record = RefinementRecord {
            kind: plan.kind,
            family: plan.name.into(),
            limit: plan.family.limit().to_vec(),
            epsilons: plan.epsilons.clone(),
            sequence: Vec::new(),
            error: None,
        };
        if base.is_usable() {
            let samples = sample_jacobians(&ctx.model, cfg.samples, SampleStrategy::Mixed, cfg.seed)?;
            match refine_weight_sequence(&ctx.model, &samples, base, &plan.family, &plan.epsilons) {
                Ok(seq) => {
                    if let Some(limit) = seq.last().filter(|c| c.limit_of_valid_sequence) {
                        let file = limit_file(plan.kind);
                        ctx.dir.write(&file, &(limit.to_json() + "\n"))?;
                        entries.push(NamedCert { file, cert: limit.clone() });
                    }
                    record.sequence = seq;
                }
                Err(e @ (Error::RefinementFailed { .. } | Error::UnusableCertificate(_))) => record.error = Some(e.to_string()),
                Err(e) => return Err(e.into()),
            }
        } else {
            record.error = Some(format!("base certificate is {}", base.status));
        }
        ctx.dir.write_json(&refinement_file(plan.kind), &record)?;
    }
    Ok(CertSet { entries })
}

/// Certificates from an earlier `certify` in the same run directory, or fresh ones.
fn certs(ctx: &Context) -> Result<CertSet> {
    match CertSet::load(&ctx.dir)? {
        Some(set) => Ok(set),
        None => compute_certs(ctx),
    }
}

fn require_certified(ctx: &Context, set: &CertSet) -> Result<()> {
    if !set.all_failed(ctx.config.norm) {
        return Ok(());
    }
    let parts: Vec<String> =
        KINDS.iter().filter(|k| ctx.wants(k.norm_kind())).map(|&k| format!("{k} worst measure {}", fmt_real(set.base(k).cert.rate_c))).collect();
    Err(CliError::Certification(format!("no admissible weights on the sampled box ({})", parts.join("; "))))
}

fn describe(e: &NamedCert) -> String {
    let c = &e.cert;
    let mut s = format!("{:<24} {:<26} rate {} weights {}", e.file, c.status.to_string(), fmt_real(c.rate_c), fmt_vec(&c.weights));
    if let Some(st) = c.strictness {
        s += &format!(" strictness {}", fmt_real(st));
    }
    if c.limit_of_valid_sequence {
        s += " (limit of valid weights)";
    }
    s
}

fn certify_cmd(ctx: &Context) -> Result<()> {
    let set = compute_certs(ctx)?;
    for e in &set.entries {
        println!("{}", describe(e));
    }
    for kind in KINDS {
        if let Some(rec) = load_json::<RefinementRecord>(&ctx.dir, &refinement_file(kind))? {
            match &rec.error {
                Some(err) => println!("refinement toward {} stopped: {err}", fmt_vec(&rec.limit)),
                None => {
                    for c in rec.sequence.iter().filter(|c| !c.limit_of_valid_sequence) {
                        println!("  {kind} {:<26} weights {}", c.status.to_string(), fmt_vec(&c.weights));
                    }
                }
            }
        }
    }
    require_certified(ctx, &set)
}

fn lyapunov(ctx: &Context) -> Result<()> {
    let model = &ctx.model;
    if !model.is_autonomous() {
        return Err(CliError::Config("Lyapunov functions need an autonomous model; use `entrain` for periodic ones".into()));
    }
    let set = certs(ctx)?;
    require_certified(ctx, &set)?;
    let usable: Vec<&NamedCert> = set.entries.iter().filter(|e| e.cert.is_usable() && ctx.wants(e.cert.kind.norm_kind())).collect();
    if usable.is_empty() {
        return Err(CliError::Certification("no certificate is contractive, strict at an equilibrium, or a limit of valid weights".into()));
    }
    let cfg = &ctx.config;
    let mut rng = rng(ctx);
    let mut art = LyapunovArtifact { horizon: cfg.horizon, step: cfg.step, checks: Vec::new(), skipped: Vec::new() };
    for e in usable {
        let cert = &e.cert;
        let eq = match (&cert.equilibrium, model.known_equilibrium()) {
            (Some(x), _) => Some(x.clone()),
            (None, Some(x)) => Some(x.to_vec()),
            (None, None) => {
                let mid: Vec<f64> = cert.domain.lower.iter().zip(&cert.domain.upper).map(|(l, u)| (l + u) / 2.0).collect();
                find_equilibrium(model, &mid).ok()
            }
        };
        let starts: Vec<Vec<f64>> = (0..STARTS).map(|_| uniform(&mut rng, &cert.domain)).collect();
        for form in LyapunovForm::for_kind(cert.kind) {
            if form.is_state() && eq.is_none() {
                art.skipped.push(format!("{form} from {}: no equilibrium found", e.file));
                continue;
            }
            let v = Lyapunov::build(cert, form, model, eq.as_deref())?;
            let rate = cert.envelope_rate();
            for (k, x0) in starts.iter().enumerate() {
                let rep = decrease_along(&v, model, x0, cfg.horizon, cfg.step)?;
                let csv = if k == 0 {
                    let name = format!("lyapunov_{}_{}.csv", e.label(), form.to_string().to_lowercase());
                    ctx.dir.write(&name, &rep.trajectory.to_csv_string())?;
                    Some(name)
                } else {
                    None
                };
                art.checks.push(LyapunovCheck {
                    certificate: e.file.clone(),
                    form,
                    start: x0.clone(),
                    initial: rep.initial,
                    last: rep.last,
                    max_upward_jump: rep.max_upward_jump,
                    excursions: rep.excursions,
                    passed: rep.passed,
                    envelope_rate: rate,
                    envelope_holds: rep.envelope(rate).holds,
                    csv,
                });
            }
            let mine: Vec<&LyapunovCheck> = art.checks.iter().filter(|c| c.certificate == e.file && c.form == form).collect();
            let ok = mine.iter().filter(|c| c.passed && c.envelope_holds).count();
            println!("{:<10} from {:<24} nonincreasing with envelope on {ok}/{} starts", form.to_string(), e.file, mine.len());
        }
    }
    for s in &art.skipped {
        println!("skipped {s}");
    }
    ctx.dir.write_json("lyapunov.json", &art)?;
    Ok(())
}

fn suite(name: &str, certificate: Option<&str>, rate: Option<f64>, results: &[(bool, f64)]) -> SuiteResult {
    SuiteResult {
        suite: name.into(),
        certificate: certificate.map(str::to_string),
        rate,
        cases: results.len(),
        passed: results.iter().filter(|r| r.0).count(),
        worst: results.iter().map(|r| r.1).fold(0.0, f64::max),
    }
}

fn simulate(ctx: &Context) -> Result<()> {
    let set = certs(ctx)?;
    require_certified(ctx, &set)?;
    let model = &ctx.model;
    let cfg = &ctx.config;
    let (h, step) = (cfg.horizon, cfg.step);
    let mut rng = rng(ctx);
    let trunc = model.domain().truncation();
    let mut suites = Vec::new();

    let ordered: Vec<_> = (0..PAIRS).map(|_| ordered_pair(&mut rng, &trunc)).collect();
    if model.claims_monotone() {
        let res = ordered.iter().map(|(x, y)| check_monotonicity(model, x, y, h, step).map(|r| (r.holds, r.max_gap))).collect::<moncon::Result<Vec<_>>>()?;
        suites.push(suite("monotonicity", None, None, &res));
    }
    for e in set.entries.iter().filter(|e| e.cert.status != Status::Failed && ctx.wants(e.cert.kind.norm_kind())) {
        let norm = e.cert.norm()?;
        let c = e.cert.envelope_rate();
        let pairs: Vec<_> = (0..PAIRS).map(|_| (uniform(&mut rng, &e.cert.domain), uniform(&mut rng, &e.cert.domain))).collect();
        let res = pairs
            .iter()
            .map(|(x, y)| check_pair_contraction(model, x, y, &norm, c, h, step).map(|r| (r.holds, r.worst_ratio)))
            .collect::<moncon::Result<Vec<_>>>()?;
        suites.push(suite("pair_contraction", Some(&e.file), Some(c), &res));
        if model.is_autonomous() {
            let res = pairs
                .iter()
                .map(|(x, _)| check_flow_decay(model, x, &norm, c, h, step).map(|r| (r.holds, r.worst_ratio)))
                .collect::<moncon::Result<Vec<_>>>()?;
            suites.push(suite("flow_decay", Some(&e.file), Some(c), &res));
        }
    }
    for s in &suites {
        let cert = s.certificate.as_deref().map(|f| format!(" ({f}, c = {})", fmt_real(s.rate.unwrap_or(0.0)))).unwrap_or_default();
        println!("{:<17} {}/{} passed, worst {}{cert}", s.suite, s.passed, s.cases, fmt_real(s.worst));
    }
    let traj = integrate(model, &ordered[0].0, 0.0, h, step)?;
    let csv = "trajectory.csv".to_string();
    ctx.dir.write(&csv, &traj.to_csv_string())?;
    ctx.dir.write_json("simulate.json", &SimulateArtifact { horizon: h, step, suites, trajectory_csv: csv })?;
    Ok(())
}

fn entrain(ctx: &Context) -> Result<()> {
    let model = &ctx.model;
    let Some(period) = model.period() else {
        return Err(CliError::Config("entrainment needs a periodically forced model".into()));
    };
    let set = certs(ctx)?;
    let kind = ctx.config.norm.map_or(CertKind::MaxLinf, CertKind::from_norm);
    let e = set.base(kind);
    if e.cert.status == Status::Failed {
        return Err(CliError::Certification(format!(
            "{kind} search failed (worst measure {}); the period map has no contraction norm",
            fmt_real(e.cert.rate_c)
        )));
    }
    let norm = e.cert.norm()?;
    let opts = EntrainmentOptions { step: ctx.config.step, ..Default::default() };
    let mut rng = rng(ctx);
    let trunc = model.domain().truncation();
    let mut records = Vec::new();
    for _ in 0..STARTS {
        let xi0 = uniform(&mut rng, &trunc);
        records.push((xi0.clone(), check_entrainment(model, &xi0, PERIODS, &norm, &opts)?));
    }
    let spread =
        records.iter().map(|(_, r)| norm.dist(&r.fixed_point, &records[0].1.fixed_point)).collect::<moncon::Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);

    let mut csv = String::from("k");
    for i in 1..=records.len() {
        csv += &format!(",d_{i}");
    }
    csv.push('\n');
    for k in 0..=PERIODS {
        let row: Vec<String> = std::iter::once(k.to_string()).chain(records.iter().map(|(_, r)| fmt_real(r.distances[k]))).collect();
        csv += &row.join(",");
        csv.push('\n');
    }
    ctx.dir.write("poincare.csv", &csv)?;

    let runs: Vec<EntrainRun> = records
        .into_iter()
        .map(|(start, r)| EntrainRun {
            start,
            final_distance: r.distances[PERIODS],
            contraction_factor: r.contraction_factor,
            fixed_point: r.fixed_point,
            fixed_point_residual: r.fixed_point_residual,
            nonincreasing: r.nonincreasing,
            structure_holds: r.structure_holds,
            passed: r.passed,
        })
        .collect();
    for (i, r) in runs.iter().enumerate() {
        println!(
            "start {i}: distance after {PERIODS} periods {}, factor per period {:.4}, fixed point {}{}",
            fmt_real(r.final_distance),
            r.contraction_factor,
            fmt_vec(&r.fixed_point),
            if r.passed { "" } else { " (structure check failed)" }
        );
    }
    println!("fixed points agree to {} in the {kind} norm of {}", fmt_real(spread), e.file);
    ctx.dir.write_json("entrain.json", &EntrainArtifact { certificate: e.file.clone(), period, periods: PERIODS, runs, fixed_point_spread: spread })?;
    Ok(())
}
