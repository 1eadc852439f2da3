//! Plain-text summary of a run directory. Each conclusion names the result that
//! justifies it and the certificate file it rests on.

use std::fmt::Write;

use moncon::system::fmt_real;
use moncon::{CertKind, Certificate, Status};

use crate::artifacts::*;
use crate::error::{CliError, Result};
use crate::run::Context;

const SUM_CONTRACTION: &str = "sum-separable contraction theorem (vᵀJ(x) ≤ c·1ᵀ with c < 0 on K)";
const MAX_CONTRACTION: &str = "max-separable contraction theorem (J(x)w ≤ c·1 with c < 0 on K)";
const SUM_STRICT: &str = "sum-separable nonexpansive corollary (vᵀJ(x) ≤ 0 on K and vᵀJ(x*) < 0)";
const MAX_STRICT: &str = "max-separable nonexpansive corollary (J(x)w ≤ 0 on K and J(x*)w < 0)";
const LIMIT: &str = "limit-of-norms proposition (contraction in each norm of a sequence converging to the limit weights)";
const NONEXPANSIVE: &str = "matrix-measure bound μ(J) ≤ 0 on K (nonexpansive only)";
const ENTRAINMENT: &str = "periodic entrainment theorem (μ(J(t,x)) ≤ 0 on K, strictly negative on part of each period)";
const MONOTONE: &str = "Kamke condition (Metzler Jacobian on a convex domain)";

/// The result a certificate invokes, if any.
fn justification(cert: &Certificate) -> Option<&'static str> {
    if cert.limit_of_valid_sequence {
        return Some(LIMIT);
    }
    match (cert.status, cert.kind) {
        (Status::Contractive, CertKind::SumL1) => Some(SUM_CONTRACTION),
        (Status::Contractive, CertKind::MaxLinf) => Some(MAX_CONTRACTION),
        (Status::NonexpansiveStrictAtEq, CertKind::SumL1) => Some(SUM_STRICT),
        (Status::NonexpansiveStrictAtEq, CertKind::MaxLinf) => Some(MAX_STRICT),
        (Status::NonexpansiveOnly, _) => Some(NONEXPANSIVE),
        (Status::Failed, _) => None,
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn conclusion(cert: &Certificate, autonomous: bool) -> String {
    let eq = cert.equilibrium.as_deref().map(fmt_vec).unwrap_or_else(|| "x*".into());
    if cert.limit_of_valid_sequence && !autonomous {
        return "distances between trajectories never grow in the limit norm".into();
    }
    if cert.limit_of_valid_sequence {
        return format!("the equilibrium {eq} is asymptotically stable on K and the limit-weight functions are Lyapunov functions");
    }
    match cert.status {
        Status::Contractive if autonomous => {
            format!("trajectories in K converge to each other at rate {}; a unique equilibrium in K attracts all of K", fmt_real(cert.rate_c))
        }
        Status::Contractive => format!("trajectories in K converge to each other at rate {}", fmt_real(cert.rate_c)),
        Status::NonexpansiveStrictAtEq => format!("the equilibrium {eq} is asymptotically stable and its domain of attraction includes K"),
        Status::NonexpansiveOnly => "distances between trajectories never grow; no stability conclusion on its own".into(),
        Status::Failed => "no conclusion: some sampled Jacobian has positive weighted measure for every weight found".into(),
    }
}

pub fn report(ctx: &Context) -> Result<()> {
    let dir = &ctx.dir;
    let Some(set) = CertSet::load(dir)? else {
        return Err(CliError::Config(format!("no certificates in {}; run `certify` first", dir.path().display())));
    };
    let model = &ctx.model;
    let cfg = &ctx.config;
    let by_file = |file: &str| set.entries.iter().find(|e| e.file == file).map(|e| &e.cert);
    let mut out = String::new();
    let w = &mut out;

    writeln!(w, "moncon report").unwrap();
    writeln!(w, "model: {} (dimension {}{})", model.name(), model.dim(), model.period().map(|p| format!(", period {p}")).unwrap_or_default()).unwrap();
    writeln!(w, "run: {}", dir.path().display()).unwrap();
    writeln!(w, "samples {} seed {} margin {:e} step {:e} horizon {}", cfg.samples, cfg.seed, cfg.margin, cfg.step, cfg.horizon).unwrap();

    writeln!(w, "\nCertificates").unwrap();
    for e in &set.entries {
        let c = &e.cert;
        let invariant = match model.order_interval_invariant(&c.domain.lower, &c.domain.upper) {
            Ok(true) => "forward invariant",
            Ok(false) => "NOT forward invariant",
            Err(_) => "forward invariance unchecked",
        };
        writeln!(w, "- {}: {} {}, weights {}, worst measure {}", e.file, c.kind, c.status, fmt_vec(&c.weights), fmt_real(c.rate_c)).unwrap();
        writeln!(w, "  K = {} x {} ({invariant}), {} samples", fmt_vec(&c.domain.lower), fmt_vec(&c.domain.upper), c.sample_count).unwrap();
        writeln!(w, "  conclusion: {}", conclusion(c, model.is_autonomous())).unwrap();
        match justification(c) {
            Some(j) => writeln!(w, "  justified by: {j}; certificate {}", e.file).unwrap(),
            None => writeln!(w, "  justified by: nothing; the weight search failed").unwrap(),
        }
    }
    for kind in KINDS {
        if let Some(rec) = load_json::<RefinementRecord>(dir, &refinement_file(kind))? {
            match &rec.error {
                Some(err) => writeln!(w, "- refinement of {kind} toward {} stopped: {err}", fmt_vec(&rec.limit)).unwrap(),
                None => {
                    let valid = rec.sequence.iter().filter(|c| !c.limit_of_valid_sequence).count();
                    writeln!(
                        w,
                        "- refinement of {kind}: {valid} valid weight vectors ({} family) converging to {}; see {}",
                        rec.family,
                        fmt_vec(&rec.limit),
                        refinement_file(kind)
                    )
                    .unwrap();
                }
            }
        }
    }

    if let Some(art) = load_json::<LyapunovArtifact>(dir, "lyapunov.json")? {
        writeln!(w, "\nLyapunov functions (horizon {}, step {:e})", art.horizon, art.step).unwrap();
        let mut keys: Vec<(String, String)> = Vec::new();
        for c in &art.checks {
            let key = (c.certificate.clone(), c.form.to_string());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        for (file, form) in keys {
            let mine: Vec<&LyapunovCheck> = art.checks.iter().filter(|c| c.certificate == file && c.form.to_string() == form).collect();
            let ok = mine.iter().filter(|c| c.passed && c.envelope_holds).count();
            let verdict = if ok == mine.len() { "decreases" } else { "FAILS to decrease" };
            writeln!(w, "- {form} from {file}: {verdict} on {ok}/{} simulated starts", mine.len()).unwrap();
            if let Some(j) = by_file(&file).and_then(justification) {
                writeln!(w, "  justified by: {j}; certificate {file}").unwrap();
            }
        }
        for s in &art.skipped {
            writeln!(w, "- skipped {s}").unwrap();
        }
    }

    if let Some(art) = load_json::<SimulateArtifact>(dir, "simulate.json")? {
        writeln!(w, "\nSimulation (horizon {}, step {:e})", art.horizon, art.step).unwrap();
        for s in &art.suites {
            let verdict = if s.passed == s.cases { "consistent" } else { "INCONSISTENT" };
            match &s.certificate {
                None => {
                    writeln!(w, "- {}: order preserved on {}/{} pairs, largest gap {}", s.suite, s.passed, s.cases, fmt_real(s.worst)).unwrap();
                    writeln!(w, "  justified by: {MONOTONE}").unwrap();
                }
                Some(file) => {
                    let rate = fmt_real(s.rate.unwrap_or(0.0));
                    writeln!(
                        w,
                        "- {} with c = {rate}: {}/{} within e^(ct) envelope, worst ratio {} ({verdict})",
                        s.suite,
                        s.passed,
                        s.cases,
                        fmt_real(s.worst)
                    )
                    .unwrap();
                    if let Some(j) = by_file(file).and_then(justification) {
                        writeln!(w, "  justified by: {j}; certificate {file}").unwrap();
                    }
                }
            }
        }
    }

    if let Some(art) = load_json::<EntrainArtifact>(dir, "entrain.json")? {
        writeln!(w, "\nEntrainment (period {}, {} periods)", art.period, art.periods).unwrap();
        let worst = art.runs.iter().map(|r| r.final_distance).fold(0.0, f64::max);
        let structure = art.runs.iter().all(|r| r.passed);
        writeln!(
            w,
            "- {} starts converge to one periodic orbit: final distance at most {}, fixed points agree to {}",
            art.runs.len(),
            fmt_real(worst),
            fmt_real(art.fixed_point_spread)
        )
        .unwrap();
        writeln!(w, "  nonincreasing distances with strict contraction on part of each period: {}", if structure { "observed" } else { "NOT observed" })
            .unwrap();
        writeln!(w, "  justified by: {ENTRAINMENT}; certificate {}", art.certificate).unwrap();
    }

    dir.write("REPORT.txt", &out)?;
    print!("{out}");
    Ok(())
}
