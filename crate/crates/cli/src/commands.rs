use std::path::Path;

use fcp_core::coupling::{check_lemma_properties, coupled_run, speedup_block_check, ItemStatus, LemmaTolerances};
use fcp_core::engine::{edge_patterns, run_spread, EdgeEnvironment, EventKind, Horizon, Region, SpreadResult};
use fcp_core::estimators::{estimate_time_constant, Regime};
use fcp_core::ordering::{
    convex_order_test, separating_collections, speedup_condition_scan, IntervalGrid, OrderTestConfig, OrderingReport,
    SpeedupCertificate, TestFunction,
};
use fcp_core::path_oracle::{
    count_paths, count_paths_discretized, count_paths_with_witnesses, exact_subdivision, reach_indicator, OracleLimits,
};
use fcp_core::point_process::{EmpiricalConfig, ProcessSpec};
use fcp_core::rng::derive_seed;
use fcp_core::sets::BorelSet;
use fcp_core::verify::criteria;
use fcp_core::Error;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::Resolved;
use crate::exit::{self, Failure};
use crate::output::{num, render_csv, reproducer_path, write_to, Report, Table};

fn half_line() -> Region {
    Region::half_line()
}

fn to_json<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("result serializes")
}

fn compact<T: Serialize>(x: &T) -> String {
    serde_json::to_string(x).expect("value serializes")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub spec: ProcessSpec,
    #[serde(default = "half_line")]
    pub region: Region,
    #[serde(default)]
    pub horizon: Horizon,
    #[serde(default)]
    pub start: f64,
    /// Window of the exported meeting times; defaults to
    /// `[start, last recorded time + 1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern_window: Option<(f64, f64)>,
}

pub fn simulate(r: &Resolved<SimulateParams>, patterns: Option<&Path>) -> Result<Report, Failure> {
    let p = &r.params;
    p.spec.validate()?;
    p.region.validate()?;
    if p.region.size().is_none() && p.horizon.time.is_none() && p.horizon.max_vertices.is_none() {
        return Err(Failure::usage("params.horizon: an unbounded region needs a time or vertex limit"));
    }
    let runs: Vec<(EdgeEnvironment, SpreadResult)> = (0..r.replicas())
        .into_par_iter()
        .map(|i| {
            let env = EdgeEnvironment::new(p.region.clone(), p.spec.clone(), derive_seed(r.seed, i as u64));
            run_spread(&env, p.start, p.horizon).map(|res| (env, res))
        })
        .collect::<Result<_, Error>>()?;

    let d = p.region.dimension();
    let coords = (0..d).map(|k| format!("x{k}"));
    let mut table =
        Table::new(["replica".to_string()].into_iter().chain(coords.clone()).chain(["time".into(), "event".into()]));
    let mut body = Vec::new();
    for (i, (_, res)) in runs.iter().enumerate() {
        for ev in &res.trace {
            let mut row = vec![i.to_string()];
            row.extend(ev.vertex.iter().map(i64::to_string));
            row.push(num(ev.time));
            row.push(match ev.event {
                EventKind::Infected => "infected".into(),
                EventKind::Stalled => "stalled".into(),
            });
            table.push(row);
        }
        body.push(json!({
            "replica": i,
            "stalled": res.stalled,
            "truncated": res.truncated,
            "trace": res.trace,
        }));
    }

    if let Some(path) = patterns {
        let mut pt =
            Table::new(["replica".to_string()].into_iter().chain(coords).chain(["axis".into(), "time".into()]));
        for (i, (env, res)) in runs.iter().enumerate() {
            let (w0, w1) = p.pattern_window.unwrap_or_else(|| {
                let last = res.trace.iter().map(|e| e.time).fold(p.start, f64::max);
                (p.start, last + 1.0)
            });
            for (lower, axis, pat) in edge_patterns(env, res, w0, w1)? {
                for &t in &pat.times {
                    let mut row = vec![i.to_string()];
                    row.extend(lower.iter().map(i64::to_string));
                    row.push(axis.to_string());
                    row.push(num(t));
                    pt.push(row);
                }
            }
        }
        write_to(Some(path), &render_csv("simulate patterns", r, &pt)?)?;
    }

    let status = runs
        .iter()
        .position(|(_, res)| res.truncated)
        .map(|i| Failure::new(exit::ENGINE, format!("replica {i} reached the engine's vertex safety cap")));
    Ok(Report { table, body: Value::Array(body), status })
}

/// A single value or a list of values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(xs) => xs.clone(),
        }
    }
}

fn default_n() -> OneOrMany<u64> {
    OneOrMany::One(10_000)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateParams {
    pub specs: Vec<ProcessSpec>,
    /// Number of half-line vertices; a list gives one row per value.
    #[serde(default = "default_n")]
    pub n: OneOrMany<u64>,
}

pub fn estimate_tc(r: &Resolved<EstimateParams>) -> Result<Report, Failure> {
    let p = &r.params;
    if p.specs.is_empty() {
        return Err(Failure::usage("params.specs: at least one spec is required"));
    }
    let mut table = Table::new(["spec_json", "n", "replicas", "mean", "lo", "hi", "regime"]);
    let mut body = Vec::new();
    for (i, spec) in p.specs.iter().enumerate() {
        for n in p.n.to_vec() {
            // Same seed for every n so a convergence curve follows the same replicas.
            let e = estimate_time_constant(spec, n, r.replicas(), derive_seed(r.seed, i as u64))?;
            let (mean, lo, hi) = match (e.regime, e.mean, e.ci95) {
                (Regime::InfiniteStall, _, _) => (f64::INFINITY, f64::INFINITY, f64::INFINITY),
                (_, Some(m), Some((lo, hi))) => (m, lo, hi),
                _ => (f64::NAN, f64::NAN, f64::NAN),
            };
            table.push(vec![
                compact(spec),
                n.to_string(),
                e.replicas.to_string(),
                num(mean),
                num(lo),
                num(hi),
                e.regime.as_str().to_string(),
            ]);
            body.push(to_json(&e));
        }
    }
    Ok(Report { table, body: Value::Array(body), status: None })
}

fn default_significance() -> f64 {
    0.01
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderParams {
    pub a: ProcessSpec,
    pub b: ProcessSpec,
    /// Collections of disjoint sets; defaults to the four separating ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collections: Option<Vec<Vec<BorelSet>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functions: Option<Vec<TestFunction>>,
    #[serde(default = "default_significance")]
    pub significance: f64,
    /// Also test `b >> a`.
    #[serde(default = "yes")]
    pub both_directions: bool,
}

pub fn order_test(r: &Resolved<OrderParams>) -> Result<Report, Failure> {
    let p = &r.params;
    if !(p.significance > 0.0 && p.significance < 1.0) {
        return Err(Failure::usage("params.significance must lie in (0, 1)"));
    }
    let collections = p.collections.clone().unwrap_or_else(separating_collections);
    let functions = p.functions.clone().unwrap_or_else(|| TestFunction::ALL.to_vec());
    let cfg = OrderTestConfig { replicas: r.replicas(), significance: p.significance, seed: r.seed };
    let mut reports: Vec<(String, OrderingReport)> =
        vec![("a>>b".into(), convex_order_test(&p.a, &p.b, &collections, &functions, &cfg)?)];
    if p.both_directions {
        let back = OrderTestConfig { seed: derive_seed(r.seed, 1), ..cfg };
        reports.push(("b>>a".into(), convex_order_test(&p.b, &p.a, &collections, &functions, &back)?));
    }
    let mut table =
        Table::new(["direction", "collection", "function", "mean_a", "mean_b", "std_err", "verdict", "refuted"]);
    for (dir, rep) in &reports {
        for t in &rep.trials {
            table.push(vec![
                dir.clone(),
                compact(&t.collection),
                compact(&t.function).trim_matches('"').to_string(),
                num(t.mean_a),
                num(t.mean_b),
                num(t.std_err),
                compact(&t.verdict).trim_matches('"').to_string(),
                rep.refuted.to_string(),
            ]);
        }
        eprintln!("{dir}: {} >> {} {}", rep.a, rep.b, if rep.refuted { "refuted" } else { "not refuted" });
    }
    let body = Value::Object(reports.iter().map(|(d, rep)| (d.clone(), to_json(rep))).collect());
    Ok(Report { table, body, status: None })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedupParams {
    pub strong: ProcessSpec,
    pub weak: ProcessSpec,
    #[serde(default)]
    pub grid: IntervalGrid,
    /// Monte Carlo settings used for specs without closed forms.
    #[serde(default)]
    pub empirical: EmpiricalConfig,
    /// Re-check this certificate instead of searching the grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<SpeedupCertificate>,
}

pub fn speedup_check(r: &Resolved<SpeedupParams>, out: Option<&Path>) -> Result<Report, Failure> {
    let p = &r.params;
    let mut table = Table::new(["field", "value"]);
    let found = match &p.certificate {
        Some(c) => Some(c.clone()),
        None => speedup_condition_scan(&p.strong, &p.weak, &p.grid, &p.empirical)?,
    };
    let Some(cert) = found else {
        table.push(vec!["certificate".into(), "none".into()]);
        eprintln!("no interval satisfies the speed-up condition");
        return Ok(Report { table, body: json!({ "certificate": null, "block": null }), status: None });
    };
    let block = match speedup_block_check(&p.strong, &p.weak, &cert, r.replicas(), r.seed) {
        Err(Error::Claim2Violation { start, gain, uniforms }) => {
            let path = reproducer_path(out, &r.sha256());
            let repro = json!({
                "config": r,
                "certificate": cert,
                "violation": { "start": start, "gain": gain, "uniforms": uniforms },
            });
            let text = serde_json::to_vec_pretty(&repro).map_err(|e| Failure::io(e.to_string()))?;
            write_to(Some(&path), &text)?;
            return Err(Failure::new(
                exit::CLAIM,
                format!("block gain {gain} < 1 from start {start}; reproducer written to {}", path.display()),
            ));
        }
        other => other?,
    };
    let fields: Vec<(&str, String)> = vec![
        ("interval_lo", num(cert.interval.0)),
        ("interval_hi", num(cert.interval.1)),
        ("p_strong", num(cert.p_strong)),
        ("p_weak", num(cert.p_weak)),
        ("margin", num(cert.margin)),
        ("epsilon", num(cert.epsilon)),
        ("m_lower", cert.m_lower.to_string()),
        ("m", cert.m.to_string()),
        ("block_prob", num(cert.block_prob)),
        ("block_replicas", block.replicas.to_string()),
        ("claim2_passed", block.claim2_passed.to_string()),
        ("min_gain", num(block.min_gain)),
        ("claim1_applicable", block.claim1_applicable.to_string()),
        ("claim1_start", num(block.claim1_start)),
    ];
    for (k, v) in fields {
        table.push(vec![k.into(), v]);
    }
    for (z, frac) in &block.tail_curve {
        table.push(vec![format!("tail_fraction_z{z}"), num(*frac)]);
    }
    Ok(Report { table, body: json!({ "certificate": cert, "block": block }), status: None })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupleParams {
    pub strong: ProcessSpec,
    pub weak: ProcessSpec,
    #[serde(default)]
    pub start: f64,
    #[serde(default)]
    pub steps: usize,
    /// Check the coupling properties instead of printing runs; `replicas`
    /// is then the number of trials.
    #[serde(default)]
    pub properties: bool,
    #[serde(default)]
    pub tolerances: LemmaTolerances,
}

pub fn couple(r: &Resolved<CoupleParams>) -> Result<Report, Failure> {
    let p = &r.params;
    if p.properties {
        let rep = check_lemma_properties(&p.strong, &p.weak, r.replicas(), r.seed, &p.tolerances)?;
        let mut table = Table::new(["item", "name", "checks", "status", "detail"]);
        for it in &rep.items {
            let (status, detail) = match &it.status {
                ItemStatus::Passed => ("passed", String::new()),
                ItemStatus::Failed { detail } => ("failed", detail.clone()),
                ItemStatus::PreconditionFailed { detail } => ("precondition_failed", detail.clone()),
            };
            table.push(vec![it.item.to_string(), it.name.clone(), it.checks.to_string(), status.into(), detail]);
        }
        let failed: Vec<String> = rep
            .items
            .iter()
            .filter(|i| matches!(i.status, ItemStatus::Failed { .. }))
            .map(|i| format!("({})", i.item))
            .collect();
        let status = (!failed.is_empty())
            .then(|| Failure::new(exit::CLAIM, format!("coupling properties {} failed", failed.join(", "))));
        return Ok(Report { table, body: to_json(&rep), status });
    }
    if p.steps == 0 {
        return Err(Failure::usage("params.steps must be positive"));
    }
    let runs = (0..r.replicas())
        .into_par_iter()
        .map(|i| coupled_run(&p.strong, &p.weak, p.start, p.steps, derive_seed(r.seed, i as u64)))
        .collect::<Result<Vec<_>, Error>>()?;
    let mut table = Table::new(["replica", "k", "uniform", "tau_strong", "tau_weak"]);
    for (i, run) in runs.iter().enumerate() {
        for k in 0..=p.steps {
            let u = if k == 0 { String::new() } else { num(run.uniforms[k - 1]) };
            table.push(vec![i.to_string(), k.to_string(), u, num(run.tau_strong[k]), num(run.tau_weak[k])]);
        }
    }
    Ok(Report { table, body: to_json(&runs), status: None })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsParams {
    pub spec: ProcessSpec,
    pub region: Region,
    pub x: Vec<i64>,
    pub y: Vec<i64>,
    pub t: f64,
    #[serde(default)]
    pub limits: OracleLimits,
    #[serde(default)]
    pub witnesses: bool,
    /// Subdivision counts at which to also evaluate the discretized sum.
    #[serde(default)]
    pub subdivisions: Vec<u64>,
}

pub fn paths(r: &Resolved<PathsParams>) -> Result<Report, Failure> {
    let p = &r.params;
    let mut header: Vec<String> =
        ["replica", "count", "reached", "exact_subdivision"].iter().map(|s| s.to_string()).collect();
    header.extend(p.subdivisions.iter().map(|n| format!("discretized_{n}")));
    let mut table = Table::new(header);
    let mut body = Vec::new();
    for i in 0..r.replicas() {
        let env = EdgeEnvironment::new(p.region.clone(), p.spec.clone(), derive_seed(r.seed, i as u64));
        let pc = if p.witnesses {
            count_paths_with_witnesses(&env, &p.x, &p.y, p.t, &p.limits)?
        } else {
            count_paths(&env, &p.x, &p.y, p.t, &p.limits)?
        };
        let reached = reach_indicator(&env, &p.x, &p.y, p.t, &p.limits)?;
        let n0 = exact_subdivision(&env, &p.x, &p.y, p.t, &p.limits)?;
        let mut row = vec![i.to_string(), pc.count.to_string(), reached.to_string(), n0.to_string()];
        let mut discretized = Vec::new();
        for &n in &p.subdivisions {
            let c = count_paths_discretized(&env, &p.x, &p.y, p.t, n, &p.limits)?;
            row.push(c.to_string());
            discretized.push(json!({ "n": n, "count": c }));
        }
        table.push(row);
        body.push(json!({
            "replica": i,
            "count": pc.count,
            "reached": reached,
            "exact_subdivision": n0,
            "discretized": discretized,
            "witnesses": pc.witnesses,
        }));
    }
    Ok(Report { table, body: Value::Array(body), status: None })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyParams {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub only: Vec<String>,
}

pub fn verify(r: &Resolved<VerifyParams>) -> Result<Report, Failure> {
    let all = criteria();
    if let Some(bad) = r.params.only.iter().find(|id| !all.iter().any(|c| c.id == id.as_str())) {
        let ids: Vec<&str> = all.iter().map(|c| c.id).collect();
        return Err(Failure::usage(format!("unknown criterion `{bad}`; known: {}", ids.join(", "))));
    }
    let mut table = Table::new(["id", "passed", "elapsed_s", "title", "detail"]);
    let mut body = Vec::new();
    let mut failed = Vec::new();
    for c in all.iter().filter(|c| r.params.only.is_empty() || r.params.only.iter().any(|id| id == c.id)) {
        let o = c.run(r.seed);
        eprintln!("{o}");
        if !o.passed {
            failed.push(o.id);
        }
        table.push(vec![
            o.id.into(),
            o.passed.to_string(),
            format!("{:.3}", o.elapsed.as_secs_f64()),
            o.title.into(),
            o.detail.clone(),
        ]);
        body.push(json!({
            "id": o.id,
            "title": o.title,
            "passed": o.passed,
            "detail": o.detail,
            "elapsed_s": o.elapsed.as_secs_f64(),
        }));
    }
    eprintln!("{} of {} criteria passed", table.rows.len() - failed.len(), table.rows.len());
    let status =
        (!failed.is_empty()).then(|| Failure::new(exit::VERIFY, format!("failed criteria: {}", failed.join(", "))));
    Ok(Report { table, body: Value::Array(body), status })
}
