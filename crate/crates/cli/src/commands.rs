use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};
use mixkit::couplings::{construct as build_coupling, CouplingCertificate, MixSampler};
use mixkit::distributions::{log_transform_inverse, Support};
use mixkit::mixability::{decide, Decision, Verdict};
use mixkit::rearrange::{
    build_matrix, mixability_probe, ra_minimize, scramble, DEFAULT_HEAVY_TRIM, DEFAULT_MAX_SWEEPS, DEFAULT_TOL,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::scenario::Scenario;
use crate::{Common, Grid, Sampling};

pub const SEED_ENV: &str = "MIXKIT_SEED";
const DEFAULT_SAMPLE_N: usize = 1000;
const DEFAULT_VERIFY_N: usize = 100_000;
const DEFAULT_M: usize = 256;
const DEFAULT_SCHEDULE: [usize; 3] = [16, 64, 256];

pub enum Status {
    Ok,
    Infeasible,
    Failed,
}

pub fn write_output(path: Option<&str>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {p}")),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// JSON document carrying the tool version and the full input scenario.
fn envelope(scenario: &Scenario, mut body: serde_json::Map<String, Value>) -> Value {
    let mut doc = serde_json::Map::new();
    doc.insert("tool".into(), json!("mixkit"));
    doc.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    doc.insert("scenario".into(), serde_json::to_value(scenario).expect("scenario serializes"));
    doc.append(&mut body);
    Value::Object(doc)
}

fn emit(path: Option<&str>, doc: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    write_output(path, &text)
}

fn body(pairs: Vec<(&str, Value)>) -> serde_json::Map<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn load_scenario(common: &Common) -> Result<Scenario> {
    let path = common.scenario.as_deref().ok_or_else(|| anyhow!("--scenario is required"))?;
    Scenario::load(path)
}

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
enum SeedSource {
    Flag,
    Scenario,
    Environment,
    Random,
}

fn resolve_seed(flag: Option<u64>, scenario: Option<u64>) -> Result<(u64, SeedSource)> {
    if let Some(s) = flag {
        return Ok((s, SeedSource::Flag));
    }
    if let Some(s) = scenario {
        return Ok((s, SeedSource::Scenario));
    }
    if let Ok(v) = std::env::var(SEED_ENV) {
        let s = v
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer"))?;
        return Ok((s, SeedSource::Environment));
    }
    let s: u64 = rand::random();
    eprintln!("mixkit: seed {s} (random)");
    Ok((s, SeedSource::Random))
}

fn decision_status(d: &Decision) -> Status {
    if d.verdict == Verdict::NotMixable {
        Status::Infeasible
    } else {
        Status::Ok
    }
}

pub fn check(common: &Common) -> Result<Status> {
    let scenario = load_scenario(common)?;
    let d = decide(&scenario.problem())?;
    emit(
        common.out.as_deref(),
        &envelope(&scenario, body(vec![("decision", serde_json::to_value(&d)?)])),
    )?;
    Ok(decision_status(&d))
}

pub fn centers(common: &Common) -> Result<Status> {
    let scenario = load_scenario(common)?;
    let d = decide(&scenario.problem())?;
    emit(
        common.out.as_deref(),
        &envelope(
            &scenario,
            body(vec![
                ("verdict", serde_json::to_value(d.verdict)?),
                ("qualifier", serde_json::to_value(d.qualifier)?),
                ("center_set", serde_json::to_value(d.center_set)?),
            ]),
        ),
    )?;
    Ok(decision_status(&d))
}

pub fn construct(common: &Common) -> Result<Status> {
    let scenario = load_scenario(common)?;
    let sampler = build_coupling(&scenario.problem())?;
    emit(
        common.out.as_deref(),
        &envelope(&scenario, body(vec![("certificate", serde_json::to_value(sampler.certificate())?)])),
    )?;
    Ok(Status::Ok)
}

#[derive(Deserialize)]
struct CertificateFile {
    scenario: Option<Scenario>,
    certificate: CouplingCertificate,
}

/// Sampler plus the scenario it came from, read from `--cert` or built from `--scenario`.
fn load_sampler(common: &Common, sampling: &Sampling) -> Result<(MixSampler, Scenario)> {
    if let Some(path) = &sampling.cert {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading certificate {path}"))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let file: CertificateFile = serde_path_to_error::deserialize(de)
            .map_err(|e| anyhow!("certificate {path}: field `{}`: {}", e.path(), e.inner()))?;
        let scenario = match (&common.scenario, file.scenario) {
            (Some(p), _) => Scenario::load(p)?,
            (None, Some(s)) => s,
            (None, None) => bail!("certificate {path} embeds no scenario; pass --scenario"),
        };
        let sampler = MixSampler::from_certificate(file.certificate)?;
        Ok((sampler, scenario))
    } else {
        let scenario = load_scenario(common)?;
        Ok((build_coupling(&scenario.problem())?, scenario))
    }
}

/// 17 significant digits, so values round-trip exactly.
fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn sample(common: &Common, sampling: &Sampling) -> Result<Status> {
    let (sampler, scenario) = load_sampler(common, sampling)?;
    let n = sampling.n.or(scenario.options.n).unwrap_or(DEFAULT_SAMPLE_N);
    let (seed, _) = resolve_seed(sampling.seed, scenario.seed)?;
    let draws = sampler.sample(n, seed);
    let dim = sampler.dim();
    let mut out = String::with_capacity(n * (dim + 1) * 24);
    let header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).chain(["phi".to_string()]).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in &draws.rows {
        for v in row {
            out.push_str(&fmt_value(*v));
            out.push(',');
        }
        writeln!(out, "{}", fmt_value(sampler.phi().eval(row))).unwrap();
    }
    write_output(common.out.as_deref(), &out)?;
    Ok(Status::Ok)
}

fn ra_json(scenario: &Scenario, grid: &Grid, seed: u64) -> Result<Value> {
    let reals = scenario
        .marginals
        .iter()
        .map(|d| match d.support() {
            Support::RealLine => Ok(d.clone()),
            Support::Positive => log_transform_inverse(d, 1.0),
        })
        .collect::<mixkit::Result<Vec<_>>>()?;
    let m = grid.m.or(scenario.options.m).unwrap_or(DEFAULT_M);
    let heavy = reals.iter().any(|d| !d.variance().is_finite());
    let trim = grid
        .trim
        .or(scenario.options.trim)
        .unwrap_or(if heavy { DEFAULT_HEAVY_TRIM } else { 0.0 });
    let tol = scenario.options.ra_tol.unwrap_or(DEFAULT_TOL);
    let max_sweeps = scenario.options.max_sweeps.unwrap_or(DEFAULT_MAX_SWEEPS);
    let mut q = build_matrix(&reals, &scenario.phi.alphas, m, trim)?;
    scramble(&mut q, seed);
    let report = ra_minimize(&mut q, tol, max_sweeps);
    let analytic = decide(&scenario.problem()).ok();
    Ok(json!({
        "parameters": { "m": m, "trim": trim, "seed": seed, "tol": tol, "max_sweeps": max_sweeps },
        "report": report,
        "analytic_verdict": analytic.as_ref().map(|d| d.verdict),
        "analytic_margin": analytic.as_ref().map(|d| d.margin),
    }))
}

pub fn ra(common: &Common, grid: &Grid, seed: Option<u64>) -> Result<Status> {
    let scenario = load_scenario(common)?;
    let (seed, _) = resolve_seed(seed, scenario.seed)?;
    let ra = ra_json(&scenario, grid, seed)?;
    emit(common.out.as_deref(), &envelope(&scenario, body(vec![("ra", ra)])))?;
    Ok(Status::Ok)
}

pub fn verify(common: &Common, sampling: &Sampling) -> Result<Status> {
    let (sampler, scenario) = load_sampler(common, sampling)?;
    let n = sampling.n.or(scenario.options.n).unwrap_or(DEFAULT_VERIFY_N);
    let (seed, source) = resolve_seed(sampling.seed, scenario.seed)?;
    let report = mixkit::verify::verify(&sampler, n, seed)?;
    emit(
        common.out.as_deref(),
        &envelope(
            &scenario,
            body(vec![
                ("seed_source", serde_json::to_value(source)?),
                ("verification", serde_json::to_value(&report)?),
            ]),
        ),
    )?;
    Ok(if report.all_pass { Status::Ok } else { Status::Failed })
}

pub fn report(common: &Common, sampling: &Sampling, grid: &Grid) -> Result<Status> {
    let scenario = load_scenario(common)?;
    let (seed, source) = resolve_seed(sampling.seed, scenario.seed)?;
    let decision = decide(&scenario.problem())?;
    let schedule = scenario.options.schedule.clone().unwrap_or(DEFAULT_SCHEDULE.to_vec());
    let trim = grid.trim.or(scenario.options.trim).unwrap_or(0.0);
    let probe = mixability_probe(&scenario.marginals, &scenario.phi.alphas, &schedule, trim, seed)?;
    let mut parts = vec![
        ("seed", json!(seed)),
        ("seed_source", serde_json::to_value(source)?),
        ("decision", serde_json::to_value(&decision)?),
        ("center_set", serde_json::to_value(decision.center_set)?),
        ("ra_probe", serde_json::to_value(&probe)?),
    ];
    if decision.verdict == Verdict::NotMixable {
        parts.push(("all_pass", json!(false)));
        emit(common.out.as_deref(), &envelope(&scenario, body(parts)))?;
        eprintln!("mixkit: not mixable (margin {})", decision.margin);
        return Ok(Status::Infeasible);
    }
    let sampler = build_coupling(&scenario.problem())?;
    let n = sampling.n.or(scenario.options.n).unwrap_or(DEFAULT_VERIFY_N);
    let verification = mixkit::verify::verify(&sampler, n, seed)?;
    let all_pass = verification.all_pass;
    parts.push(("certificate", serde_json::to_value(sampler.certificate())?));
    parts.push(("verification", serde_json::to_value(&verification)?));
    parts.push(("all_pass", json!(all_pass)));
    emit(common.out.as_deref(), &envelope(&scenario, body(parts)))?;
    Ok(if all_pass { Status::Ok } else { Status::Failed })
}
