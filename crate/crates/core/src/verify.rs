//! Acceptance battery. Each criterion runs at its stated scale and tolerance
//! and reports a single pass/fail outcome with a short explanation.

use std::fmt;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::coupling::{check_lemma_properties, speedup_block_check, LemmaTolerances};
use crate::engine::{half_line_sweep, EdgeEnvironment, Region};
use crate::error::Result;
use crate::estimators::{estimate_time_constant, waiting_bound_m, Regime, TimeConstantEstimate};
use crate::ordering::{
    convex_order_test, separating_collections, speedup_condition_scan, IntervalGrid, OrderTestConfig, TestFunction,
    Verdict,
};
use crate::path_oracle::{count_paths, count_paths_discretized, exact_subdivision, OracleLimits};
use crate::point_process::{EmpiricalConfig, IntensityId, ProcessSpec};
use crate::rng::{derive_seed, seeded};
use crate::stats::MeanEstimate;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: &'static str,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:<22} {:>8.2}s  {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.elapsed.as_secs_f64(),
            self.title,
            self.detail
        )
    }
}

pub struct Criterion {
    pub id: &'static str,
    pub title: &'static str,
    /// Wall-clock limit included in the verdict, if any.
    pub time_limit: Option<Duration>,
    run: fn(u64) -> Result<(bool, String)>,
}

impl Criterion {
    pub fn run(&self, seed: u64) -> CriterionOutcome {
        let start = Instant::now();
        let result = (self.run)(seed);
        let elapsed = start.elapsed();
        let (mut passed, mut detail) = match result {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if let Some(limit) = self.time_limit {
            if elapsed > limit {
                passed = false;
                detail.push_str(&format!("; exceeded time limit of {}s", limit.as_secs()));
            }
        }
        CriterionOutcome { id: self.id, title: self.title, passed, detail, elapsed }
    }
}

const MINUTE: Duration = Duration::from_secs(60);

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion {
            id: "tc-poisson",
            title: "Poisson(1) time constant is 1",
            time_limit: Some(MINUTE),
            run: tc_poisson,
        },
        Criterion {
            id: "tc-lattices",
            title: "SL time constant is 1/2, L is zero",
            time_limit: Some(MINUTE),
            run: tc_lattices,
        },
        Criterion {
            id: "strict-chain",
            title: "c_L < c_SL < c_SPL < c_Poi",
            time_limit: Some(5 * MINUTE),
            run: strict_chain,
        },
        Criterion { id: "waiting-bound", title: "waiting bound M and c <= M", time_limit: None, run: waiting_bound },
        Criterion { id: "path-oracle", title: "permitted-path counts", time_limit: None, run: path_oracle },
        Criterion {
            id: "path-monotonicity",
            title: "PL has more permitted paths than Poi",
            time_limit: None,
            run: path_monotonicity,
        },
        Criterion {
            id: "non-comparability",
            title: "convex-order verdicts on lattice-type processes",
            time_limit: None,
            run: non_comparability,
        },
        Criterion { id: "atoms", title: "shifted thinned lattice gives identical times", time_limit: None, run: atoms },
        Criterion { id: "coupling-lemma", title: "coupling properties (1)-(6)", time_limit: None, run: coupling_lemma },
        Criterion { id: "speedup", title: "strict speed-up SL vs Scaled(SL,4)", time_limit: None, run: speedup },
        Criterion {
            id: "inhomogeneous",
            title: "inhomogeneous Poisson has speed 1",
            time_limit: None,
            run: inhomogeneous,
        },
        Criterion { id: "stall-regime", title: "empty mixtures stall", time_limit: None, run: stall_regime },
    ]
}

/// Runs every criterion in order.
pub fn run_all(seed: u64) -> Vec<CriterionOutcome> {
    criteria().iter().map(|c| c.run(seed)).collect()
}

fn ci(e: &TimeConstantEstimate) -> (f64, f64) {
    e.ci95.unwrap_or((f64::NAN, f64::NAN))
}

fn describe(e: &TimeConstantEstimate) -> String {
    match (e.mean, e.ci95) {
        (Some(m), Some((lo, hi))) => format!("{} {m:.4} [{lo:.4}, {hi:.4}]", e.spec),
        _ => format!("{} {}", e.spec, e.regime.as_str()),
    }
}

fn tc_poisson(seed: u64) -> Result<(bool, String)> {
    let e = estimate_time_constant(&ProcessSpec::poisson(1.0), 10_000, 100, seed)?;
    let m = e.mean.unwrap_or(f64::NAN);
    Ok(((0.98..=1.02).contains(&m), describe(&e)))
}

fn tc_lattices(seed: u64) -> Result<(bool, String)> {
    let sl = estimate_time_constant(&ProcessSpec::StationarizedLattice, 10_000, 100, seed)?;
    let l = estimate_time_constant(&ProcessSpec::Lattice, 10_000, 100, seed)?;
    let m = sl.mean.unwrap_or(f64::NAN);
    let ok = (0.49..=0.51).contains(&m) && l.regime == Regime::Zero && l.mean == Some(0.0);
    Ok((ok, format!("{}; L regime {}", describe(&sl), l.regime.as_str())))
}

fn strict_chain(seed: u64) -> Result<(bool, String)> {
    let specs = [
        ProcessSpec::Lattice,
        ProcessSpec::StationarizedLattice,
        ProcessSpec::StationarizedPerturbedLattice,
        ProcessSpec::poisson(1.0),
    ];
    let ests = specs
        .iter()
        .enumerate()
        .map(|(i, s)| estimate_time_constant(s, 10_000, 200, derive_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let ok = ests.windows(2).all(|w| ci(&w[0]).1 < ci(&w[1]).0);
    Ok((ok, ests.iter().map(describe).collect::<Vec<_>>().join(" < ")))
}

fn waiting_bound(seed: u64) -> Result<(bool, String)> {
    let cases = [
        (ProcessSpec::poisson(1.0), 1.0),
        (ProcessSpec::StationarizedLattice, 0.5),
        (ProcessSpec::scaled(ProcessSpec::StationarizedLattice, 4.0), 2.0),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, (spec, expected)) in cases.iter().enumerate() {
        let m = waiting_bound_m(spec, 64.0, 1e-9)?.value().unwrap_or(f64::NAN);
        let e = estimate_time_constant(spec, 10_000, 100, derive_seed(seed, i as u64))?;
        let (lo, hi) = ci(&e);
        let c = e.mean.unwrap_or(f64::NAN);
        let bound_ok = (m - expected).abs() <= 1e-6;
        let c_ok = c <= m + 2.0 * (hi - lo) / 2.0;
        ok &= bound_ok && c_ok;
        parts.push(format!("{spec}: M={m:.9}, c={c:.4}"));
    }
    Ok((ok, parts.join("; ")))
}

fn path_oracle(seed: u64) -> Result<(bool, String)> {
    let lim = OracleLimits::default();
    let line = EdgeEnvironment::new(Region::Box { lo: vec![-3], hi: vec![3] }, ProcessSpec::Lattice, seed);
    let one = count_paths(&line, &[0], &[1], 2.5, &lim)?.count;
    let two = count_paths(&line, &[0], &[2], 2.5, &lim)?.count;
    let mut rng = seeded(seed);
    let mut mismatches = 0;
    let mut positive = 0;
    for i in 0..100u64 {
        let spec = if i % 2 == 0 { ProcessSpec::StationarizedLattice } else { ProcessSpec::poisson(1.0) };
        let region = if rng.random_bool(0.5) {
            Region::Box { lo: vec![0, 0], hi: vec![1, 1] }
        } else {
            Region::Box { lo: vec![-2], hi: vec![2] }
        };
        let env = EdgeEnvironment::new(region.clone(), spec, derive_seed(seed, i));
        let y = match region.dimension() {
            1 => vec![rng.random_range(-2..=2)],
            _ => vec![rng.random_range(0..=1), rng.random_range(0..=1)],
        };
        let t = rng.random_range(0.5..3.0);
        let direct = count_paths(&env, &env.region.origin(), &y, t, &lim)?.count;
        let n0 = exact_subdivision(&env, &env.region.origin(), &y, t, &lim)?;
        positive += usize::from(direct > 0);
        for n in [n0, 2 * n0, 7 * n0 + 3] {
            if count_paths_discretized(&env, &env.region.origin(), &y, t, n, &lim)? != direct {
                mismatches += 1;
            }
        }
    }
    let ok = one == 3 && two == 6 && mismatches == 0;
    Ok((
        ok,
        format!(
            "N(0->1)={one}, N(0->2)={two}; discretized identity mismatches {mismatches}/300 \
             ({positive} instances with paths)"
        ),
    ))
}

fn path_monotonicity(seed: u64) -> Result<(bool, String)> {
    let lim = OracleLimits { max_points_per_edge: 64, ..OracleLimits::default() };
    let replicas = 10_000u64;
    let mut ok = true;
    let mut parts = Vec::new();
    for t in [0.5, 1.0, 2.0] {
        let sample = |spec: &ProcessSpec, salt: u64| -> Result<(MeanEstimate, MeanEstimate)> {
            let counts: Vec<u64> = (0..replicas)
                .into_par_iter()
                .map(|r| {
                    let env = EdgeEnvironment::new(
                        Region::HalfLine { vertices: Some(4) },
                        spec.clone(),
                        derive_seed(derive_seed(seed, salt), r),
                    );
                    count_paths(&env, &[0], &[3], t, &lim).map(|c| c.count)
                })
                .collect::<Result<_>>()?;
            let n: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
            let hit: Vec<f64> = counts.iter().map(|&c| f64::from(u8::from(c >= 1))).collect();
            Ok((MeanEstimate::from_samples(&n), MeanEstimate::from_samples(&hit)))
        };
        let (pl_n, pl_p) = sample(&ProcessSpec::PerturbedLattice, 1)?;
        let (poi_n, poi_p) = sample(&ProcessSpec::poisson(1.0), 2)?;
        let pooled = |a: &MeanEstimate, b: &MeanEstimate| (a.std_err.powi(2) + b.std_err.powi(2)).sqrt();
        ok &= pl_n.mean >= poi_n.mean - 2.0 * pooled(&pl_n, &poi_n);
        ok &= pl_p.mean >= poi_p.mean - 2.0 * pooled(&pl_p, &poi_p);
        parts.push(format!(
            "t={t}: E[N] {:.4} vs {:.4}, P(N>=1) {:.4} vs {:.4}",
            pl_n.mean, poi_n.mean, pl_p.mean, poi_p.mean
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn non_comparability(seed: u64) -> Result<(bool, String)> {
    let cfg = OrderTestConfig { replicas: 20_000, significance: 0.01, seed };
    let sets = separating_collections();
    let sqrt = [TestFunction::SqrtSum];
    let l = ProcessSpec::Lattice;
    let sl = ProcessSpec::StationarizedLattice;
    let pl = ProcessSpec::PerturbedLattice;
    let spl = ProcessSpec::StationarizedPerturbedLattice;
    let poi = ProcessSpec::poisson(1.0);
    let mut pairs = Vec::new();
    let four = [&l, &sl, &pl, &spl];
    for i in 0..4 {
        for j in i + 1..4 {
            pairs.push((four[i], four[j]));
        }
    }
    pairs.push((&l, &poi));
    pairs.push((&sl, &poi));
    let mut ok = true;
    let mut failures = Vec::new();
    for (k, (a, b)) in pairs.iter().enumerate() {
        let c = OrderTestConfig { seed: derive_seed(seed, k as u64), ..cfg };
        let fwd = convex_order_test(a, b, &sets, &sqrt, &c)?;
        let bwd = convex_order_test(b, a, &sets, &sqrt, &c)?;
        if !(fwd.refuted && bwd.refuted) {
            ok = false;
            failures.push(format!("{a} vs {b} not refuted both ways"));
        }
    }
    for (k, strong) in [&pl, &spl].iter().enumerate() {
        let c = OrderTestConfig { seed: derive_seed(seed, 100 + k as u64), ..cfg };
        let rep = convex_order_test(strong, &poi, &sets, &sqrt, &c)?;
        if rep.refuted {
            ok = false;
            failures.push(format!("{strong} >> Poi refuted"));
        }
    }
    let unit = &sets[1..2];
    let c = OrderTestConfig { replicas: 100_000, ..cfg };
    let rep = convex_order_test(&pl, &poi, unit, &sqrt, &c)?;
    let (e_pl, e_poi) = (rep.trials[0].mean_a, rep.trials[0].mean_b);
    let supports = rep.trials[0].verdict == Verdict::Supports;
    ok &= e_pl == 1.0 && (e_poi - 0.7732).abs() <= 0.01 && supports;
    let summary = format!("E√PL((0,1))={e_pl}, E√Poi((0,1))={e_poi:.4}");
    Ok((ok, if failures.is_empty() { format!("all 8 pairs mutually refuted; {summary}") } else { failures.join("; ") }))
}

fn atoms(seed: u64) -> Result<(bool, String)> {
    let base = ProcessSpec::thinned(ProcessSpec::Lattice, 0.5);
    let shifted = ProcessSpec::shifted(base.clone(), vec![0.0, 0.5]);
    let mut differing = 0;
    for s in 0..50u64 {
        let seed = derive_seed(seed, s);
        let a = half_line_sweep(&EdgeEnvironment::new(Region::half_line(), base.clone(), seed), 1000, 0.0)?;
        let b = half_line_sweep(&EdgeEnvironment::new(Region::half_line(), shifted.clone(), seed), 1000, 0.0)?;
        let same =
            a.times.len() == b.times.len() && a.times.iter().zip(&b.times).all(|(x, y)| x.to_bits() == y.to_bits());
        differing += usize::from(!same);
    }
    Ok((differing == 0, format!("{differing}/50 seeds differ in some T(n), n <= 1000")))
}

fn coupling_lemma(seed: u64) -> Result<(bool, String)> {
    let sl = ProcessSpec::StationarizedLattice;
    let poi = ProcessSpec::poisson(1.0);
    let sl4 = ProcessSpec::scaled(sl.clone(), 4.0);
    let pairs = [(&sl, &sl), (&poi, &poi), (&sl4, &sl4), (&sl, &sl4)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, (a, b)) in pairs.iter().enumerate() {
        let rep = check_lemma_properties(a, b, 1000, derive_seed(seed, k as u64), &LemmaTolerances::default())?;
        ok &= rep.all_passed();
        let failed: Vec<String> = rep
            .items
            .iter()
            .filter(|i| i.status != crate::coupling::ItemStatus::Passed)
            .map(|i| format!("({}) {:?}", i.item, i.status))
            .collect();
        parts.push(if failed.is_empty() { format!("{a}/{b} ok") } else { format!("{a}/{b}: {}", failed.join(", ")) });
    }
    Ok((ok, parts.join("; ")))
}

fn speedup(seed: u64) -> Result<(bool, String)> {
    let sl = ProcessSpec::StationarizedLattice;
    let sl4 = ProcessSpec::scaled(sl.clone(), 4.0);
    let Some(cert) = speedup_condition_scan(&sl, &sl4, &IntervalGrid::default(), &EmpiricalConfig::default())? else {
        return Ok((false, "no certificate found".into()));
    };
    let block = speedup_block_check(&sl, &sl4, &cert, 1000, seed)?;
    let fast = estimate_time_constant(&sl, 10_000, 100, derive_seed(seed, 1))?;
    let slow = estimate_time_constant(&sl4, 10_000, 100, derive_seed(seed, 2))?;
    let length = cert.interval.1 - cert.interval.0;
    let ok = cert.margin == 0.25
        && length == 1.0
        && block.claim2_passed == 1000
        && ci(&fast).1 < ci(&slow).0
        && (fast.mean.unwrap_or(0.0) - 0.5).abs() < 0.01
        && (slow.mean.unwrap_or(0.0) - 2.0).abs() < 0.04;
    Ok((
        ok,
        format!(
            "margin {} on [{}, {}], m={}, claim 2 {}/{}, {} vs {}",
            cert.margin,
            cert.interval.0,
            cert.interval.1,
            cert.m,
            block.claim2_passed,
            block.replicas,
            describe(&fast),
            describe(&slow)
        ),
    ))
}

fn inhomogeneous(seed: u64) -> Result<(bool, String)> {
    let inhom = estimate_time_constant(
        &ProcessSpec::inhom_poisson(IntensityId::OnePlusInverseShift),
        10_000,
        100,
        derive_seed(seed, 1),
    )?;
    let poi = estimate_time_constant(&ProcessSpec::poisson(1.0), 10_000, 100, derive_seed(seed, 2))?;
    let within = |e: &TimeConstantEstimate| e.mean.is_some_and(|m| (0.95..=1.05).contains(&m));
    Ok((within(&inhom) && within(&poi), format!("{}; {}", describe(&inhom), describe(&poi))))
}

fn stall_regime(seed: u64) -> Result<(bool, String)> {
    let e = estimate_time_constant(&ProcessSpec::empty_mixture(ProcessSpec::poisson(1.0), 0.3), 10_000, 100, seed)?;
    let stalled = e.stall.as_ref().map_or(0, |s| s.stalled_replicas);
    Ok((e.regime == Regime::InfiniteStall, format!("regime {}, {stalled}/100 replicas stalled", e.regime.as_str())))
}
