//! Quantile coupling of two hitting-probability recursions.
//!
//! `τ_t(u_1..u_k) = G_{τ_t(u_1..u_{k-1})}(u_k) + τ_t(u_1..u_{k-1})`, with
//! `τ_t() = t`. Feeding the same uniforms to two processes gives arrival
//! sequences `T_t(n)`, `T'_t(n)` that are ordered whenever the first process
//! dominates the second in hitting probabilities.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ordering::SpeedupCertificate;
use crate::point_process::{hitting_prob, quantile, ProcessSpec};
use crate::rng::{derive_seed, seeded};
use crate::stats::proportion;

fn check_uniforms(us: &[f64]) -> Result<()> {
    match us.iter().find(|u| !(0.0..=1.0).contains(*u)) {
        Some(u) => Err(Error::Domain(format!("uniform {u} outside [0,1]"))),
        None => Ok(()),
    }
}

/// Arrival time after consuming `us` from start `t`.
pub fn tau(spec: &ProcessSpec, t: f64, us: &[f64]) -> Result<f64> {
    check_uniforms(us)?;
    let mut s = t;
    for &u in us {
        s += quantile(spec, s, u)?;
    }
    Ok(s)
}

/// All partial arrival times `τ_t(u_1..u_k)` for `k = 0..=us.len()`.
pub fn tau_path(spec: &ProcessSpec, t: f64, us: &[f64]) -> Result<Vec<f64>> {
    check_uniforms(us)?;
    let mut out = Vec::with_capacity(us.len() + 1);
    let mut s = t;
    out.push(s);
    for &u in us {
        s += quantile(spec, s, u)?;
        out.push(s);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRun {
    pub strong: ProcessSpec,
    pub weak: ProcessSpec,
    pub start: f64,
    pub uniforms: Vec<f64>,
    pub tau_strong: Vec<f64>,
    pub tau_weak: Vec<f64>,
    /// Indices `k` with `tau_strong[k] > tau_weak[k]`.
    pub violations: Vec<usize>,
}

impl CouplingRun {
    pub fn dominated(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Drives both recursions with the same `n` uniforms drawn from `seed`.
pub fn coupled_run(strong: &ProcessSpec, weak: &ProcessSpec, t: f64, n: usize, seed: u64) -> Result<CouplingRun> {
    let mut rng = seeded(seed);
    let uniforms: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    coupled_run_with(strong, weak, t, uniforms)
}

pub fn coupled_run_with(strong: &ProcessSpec, weak: &ProcessSpec, t: f64, uniforms: Vec<f64>) -> Result<CouplingRun> {
    let tau_strong = tau_path(strong, t, &uniforms)?;
    let tau_weak = tau_path(weak, t, &uniforms)?;
    let violations = tau_strong.iter().zip(&tau_weak).enumerate().filter(|(_, (s, w))| s > w).map(|(k, _)| k).collect();
    Ok(CouplingRun { strong: strong.clone(), weak: weak.clone(), start: t, uniforms, tau_strong, tau_weak, violations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ItemStatus {
    Passed,
    Failed { detail: String },
    PreconditionFailed { detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub item: u8,
    pub name: String,
    pub checks: usize,
    pub status: ItemStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub strong: ProcessSpec,
    pub weak: ProcessSpec,
    pub items: Vec<ItemResult>,
}

impl LemmaReport {
    pub fn all_passed(&self) -> bool {
        self.items.iter().all(|i| i.status == ItemStatus::Passed)
    }

    pub fn item(&self, k: u8) -> Option<&ItemResult> {
        self.items.iter().find(|i| i.item == k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaTolerances {
    /// Relative slack for the one comparison in which the two sides sum the
    /// same quantities in a different order.
    pub rounding: f64,
    /// Step used for the continuity checks.
    pub continuity_step: f64,
    pub continuity_tol: f64,
    /// Steps taken in the divergence check.
    pub divergence_steps: usize,
}

impl Default for LemmaTolerances {
    fn default() -> Self {
        Self { rounding: 1e-12, continuity_step: 2f64.powi(-40), continuity_tol: 1e-6, divergence_steps: 200 }
    }
}

struct ItemCheck {
    item: u8,
    name: &'static str,
    checks: usize,
    failure: Option<String>,
}

impl ItemCheck {
    fn new(item: u8, name: &'static str) -> Self {
        Self { item, name, checks: 0, failure: None }
    }

    fn assert(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok && self.failure.is_none() {
            self.failure = Some(detail());
        }
    }

    fn finish(self) -> ItemResult {
        ItemResult {
            item: self.item,
            name: self.name.to_string(),
            checks: self.checks,
            status: match self.failure {
                None => ItemStatus::Passed,
                Some(detail) => ItemStatus::Failed { detail },
            },
        }
    }
}

fn precondition(item: u8, name: &str, detail: String) -> ItemResult {
    ItemResult { item, name: name.to_string(), checks: 0, status: ItemStatus::PreconditionFailed { detail } }
}

fn lift<T>(c: &mut ItemCheck, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            c.assert(false, || e.to_string());
            None
        }
    }
}

/// Runs the six coupling properties on randomized inputs.
///
/// Single-process properties are checked on both processes; the comparison
/// property needs `strong` to dominate `weak` in hitting probabilities.
pub fn check_lemma_properties(
    strong: &ProcessSpec,
    weak: &ProcessSpec,
    trials: usize,
    seed: u64,
    tol: &LemmaTolerances,
) -> Result<LemmaReport> {
    strong.validate()?;
    weak.validate()?;
    let mut rng = seeded(seed);
    let specs = [strong, weak];
    let mut items = Vec::new();

    // (1) monotone and right-continuous.
    let mut c = ItemCheck::new(1, "monotone and right-continuous");
    for _ in 0..trials {
        for spec in specs {
            let a = rng.random_range(-4.0..4.0);
            let (t1, t2) = sorted(rng.random_range(0.0..3.0), rng.random_range(0.0..3.0));
            let (u1, u2) = sorted(rng.random::<f64>(), rng.random::<f64>());
            let (Some(f1), Some(f2), Some(f1h)) = (
                lift(&mut c, hitting_prob(spec, a, t1)),
                lift(&mut c, hitting_prob(spec, a, t2)),
                lift(&mut c, hitting_prob(spec, a, t1 + tol.continuity_step)),
            ) else {
                continue;
            };
            c.assert(f1.value <= f2.value, || format!("{spec}: F_{a}({t1}) > F_{a}({t2})"));
            c.assert((f1h.value - f1.value).abs() <= tol.continuity_tol, || {
                format!("{spec}: F_{a} not right-continuous at {t1}")
            });
            let (Some(g1), Some(g2)) = (lift(&mut c, quantile(spec, a, u1)), lift(&mut c, quantile(spec, a, u2)))
            else {
                continue;
            };
            c.assert(g1 <= g2, || format!("{spec}: G_{a}({u1}) > G_{a}({u2})"));
            // The generalized inverse of a distribution function with atoms
            // jumps from the left, so right-continuity is checked where F
            // is atomless.
            if spec.is_atomless() {
                if let Some(g1h) = lift(&mut c, quantile(spec, a, (u1 + tol.continuity_step).min(1.0))) {
                    c.assert((g1h - g1).abs() <= tol.continuity_tol, || {
                        format!("{spec}: G_{a} not right-continuous at {u1}")
                    });
                }
            }
        }
    }
    items.push(c.finish());

    // (2) comparison and monotonicity of tau.
    let mut c = ItemCheck::new(2, "domination and monotonicity of tau");
    for _ in 0..trials {
        let a = rng.random_range(-4.0..4.0);
        let t = rng.random_range(0.0..3.0);
        let u = rng.random::<f64>();
        if let (Some(fs), Some(fw)) = (lift(&mut c, hitting_prob(strong, a, t)), lift(&mut c, hitting_prob(weak, a, t)))
        {
            c.assert(fw.value <= fs.value, || format!("F'_{a}({t}) > F_{a}({t})"));
        }
        if let (Some(gs), Some(gw)) = (lift(&mut c, quantile(strong, a, u)), lift(&mut c, quantile(weak, a, u))) {
            c.assert(gs <= gw, || format!("G_{a}({u}) > G'_{a}({u})"));
        }
        let k = rng.random_range(1..8);
        let us: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        let (Some(ts), Some(tw)) = (lift(&mut c, tau(strong, a, &us)), lift(&mut c, tau(weak, a, &us))) else {
            continue;
        };
        c.assert(ts <= tw, || format!("tau_{a}{us:?} = {ts} > tau'_{a} = {tw}"));
        let later = a + rng.random_range(0.0..1.0);
        let mut bigger = us.clone();
        let i = rng.random_range(0..k);
        bigger[i] = rng.random_range(bigger[i]..=1.0);
        for spec in specs {
            let Some(base) = lift(&mut c, tau(spec, a, &us)) else { continue };
            if let Some(v) = lift(&mut c, tau(spec, later, &us)) {
                c.assert(base <= v, || format!("{spec}: tau not increasing in t at {a}, {us:?}"));
            }
            if let Some(v) = lift(&mut c, tau(spec, a, &bigger)) {
                c.assert(base <= v, || format!("{spec}: tau not increasing in u_{i} at {us:?}"));
            }
        }
    }
    items.push(c.finish());

    // (3) dropping a step never slows the arrival.
    let mut c = ItemCheck::new(3, "removing steps makes things faster");
    for _ in 0..trials {
        for spec in specs {
            let t = rng.random_range(0.0..4.0);
            let k = rng.random_range(1..8);
            let us: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
            let i = rng.random_range(0..k);
            let mut fewer = us.clone();
            fewer.remove(i);
            if let (Some(full), Some(short)) = (lift(&mut c, tau(spec, t, &us)), lift(&mut c, tau(spec, t, &fewer))) {
                c.assert(short <= full, || format!("{spec}: dropping u_{i} from {us:?} at {t} slows"));
            }
        }
    }
    items.push(c.finish());

    // (4) repeating a level above the atom mass diverges linearly.
    let mut c = ItemCheck::new(4, "repeated steps diverge");
    let mut blocked = Vec::new();
    for spec in specs {
        let atom = spec.atom_mass();
        if !spec.is_integer_stationary() {
            blocked.push(format!("{spec} is not Z-stationary"));
            continue;
        }
        if atom >= 1.0 {
            blocked.push(format!("{spec} has an atom of mass 1"));
            continue;
        }
        for _ in 0..trials.div_ceil(10) {
            let u = rng.random_range(atom..1.0).max(f64::MIN_POSITIVE);
            let t = rng.random_range(0.0..4.0);
            let mut slowest = f64::INFINITY;
            for j in 0..64 {
                if let Some(g) = lift(&mut c, quantile(spec, j as f64 / 64.0, u)) {
                    slowest = slowest.min(g);
                }
            }
            let delta = 0.5 * slowest;
            c.assert(delta > 0.0, || format!("{spec}: G_a({u}) vanishes on the mesh"));
            let Some(path) = lift(&mut c, tau_path(spec, t, &vec![u; tol.divergence_steps])) else {
                continue;
            };
            for (k, s) in path.iter().enumerate() {
                c.assert(s - t >= delta * k as f64, || {
                    format!("{spec}: tau_{t}(u={u} x{k}) = {s} below {delta} per step")
                });
            }
        }
    }
    items.push(if blocked.len() == specs.len() {
        precondition(4, "repeated steps diverge", blocked.join("; "))
    } else {
        c.finish()
    });

    // (5) two steps are no slower than one merged step.
    let mut c = ItemCheck::new(5, "merging two steps");
    for _ in 0..trials {
        for spec in specs {
            let u1 = rng.random::<f64>();
            let u2 = rng.random_range(0.0..=(1.0 - u1));
            let t = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..4.0) };
            let (Some(two), Some(one)) =
                (lift(&mut c, tau(spec, t, &[u1, u2])), lift(&mut c, tau(spec, t, &[u1 + u2])))
            else {
                continue;
            };
            // At t = 0 both sides are computed from the same sums, so the
            // inequality must hold exactly; elsewhere t + (u1 + u2) and
            // (t + u1) + u2 may round apart.
            let slack = if t == 0.0 { 0.0 } else { tol.rounding * one.abs().max(1.0) };
            c.assert(two <= one + slack, || {
                format!("{spec}: tau_{t}({u1},{u2}) = {two} > tau_{t}({}) = {one}", u1 + u2)
            });
        }
    }
    items.push(c.finish());

    // (6) continuity of F for atomless processes.
    let atomic: Vec<String> = specs.iter().filter(|s| !s.is_atomless()).map(|s| format!("{s} has atoms")).collect();
    if !atomic.is_empty() {
        items.push(precondition(6, "continuity of F", atomic.join("; ")));
    } else {
        let mut c = ItemCheck::new(6, "continuity of F");
        let h = tol.continuity_step;
        for _ in 0..trials {
            for spec in specs {
                let a = rng.random_range(-4.0..4.0);
                let t = rng.random_range(h..3.0);
                let Some(f) = lift(&mut c, hitting_prob(spec, a, t)) else { continue };
                for (aa, tt) in [(a - h, t), (a + h, t), (a, t - h), (a, t + h)] {
                    if let Some(g) = lift(&mut c, hitting_prob(spec, aa, tt)) {
                        c.assert((g.value - f.value).abs() <= tol.continuity_tol, || {
                            format!("{spec}: F jumps near a={a}, t={t}")
                        });
                    }
                }
            }
        }
        items.push(c.finish());
    }

    Ok(LemmaReport { strong: strong.clone(), weak: weak.clone(), items })
}

fn sorted(x: f64, y: f64) -> (f64, f64) {
    if x <= y {
        (x, y)
    } else {
        (y, x)
    }
}

/// Uniforms of one good block: `m^2` i.i.d. draws on `(u', u'+ε)` sorted
/// decreasingly, which has the law of the uniforms conditioned on the block
/// event.
pub fn conditioned_block<R: Rng>(rng: &mut R, u_weak: f64, epsilon: f64, len: usize) -> Vec<f64> {
    let mut us: Vec<f64> = (0..len)
        .map(|_| {
            let mut u = u_weak + epsilon * rng.random::<f64>();
            while u <= u_weak {
                u = u_weak + epsilon * rng.random::<f64>();
            }
            u
        })
        .collect();
    us.sort_by(|a, b| b.total_cmp(a));
    us
}

/// Empirical frequency of the block event over `replicas` unconditioned
/// blocks of `len` uniforms, with its standard error.
pub fn block_event_frequency(u_weak: f64, epsilon: f64, len: usize, replicas: usize, seed: u64) -> (f64, f64) {
    let hits = (0..replicas)
        .into_par_iter()
        .filter(|&r| {
            let mut rng = seeded(derive_seed(seed, r as u64));
            let us: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
            us.iter().all(|&u| u > u_weak && u < u_weak + epsilon) && us.windows(2).all(|w| w[0] > w[1])
        })
        .count();
    let p = proportion(hits, replicas);
    (p.mean, p.std_err)
}

/// Exact probability of the block event, `ε^len / len!`.
pub fn block_probability(epsilon: f64, len: usize) -> f64 {
    // Product form keeps the intermediate values representable.
    (1..=len).fold(1.0, |acc, k| acc * epsilon / k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub replicas: usize,
    pub block_len: usize,
    /// Conditioned replicas on which the strong process gained at least one time unit.
    pub claim2_passed: usize,
    pub min_gain: f64,
    /// Claim 1 instances checked, and those whose hypothesis held.
    pub claim1_checked: usize,
    pub claim1_applicable: usize,
    pub claim1_start: f64,
    pub block_prob: f64,
    /// `(frequency, std_err)` of the unconditioned block event, unless
    /// skipped because the event is too rare to observe.
    pub block_frequency: Option<(f64, f64)>,
    pub analytic_only: bool,
    pub delta: f64,
    /// `(z, P(T'(m^2 z) - T(m^2 z) <= δ m^2 z))`.
    pub tail_curve: Vec<(u64, f64)>,
}

/// Smallest `a_o` with `P(X'([a_o, b]) > 0) >= target`, by bisection on the
/// continuous hitting function of the atomless weak process.
fn lower_start(weak: &ProcessSpec, b: f64, target: f64) -> Result<f64> {
    let f = |a: f64| hitting_prob(weak, a, b - a).map(|p| p.value);
    let mut span = 1.0;
    while f(b - span)? < target {
        span *= 2.0;
        if span > 1e6 {
            return Err(Error::UnreachableQuantile { u: target, sup: f(b - span)? });
        }
    }
    let (mut lo, mut hi) = (b - span, b);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Executes the block argument of the speed-up theorem for a certificate.
pub fn speedup_block_check(
    strong: &ProcessSpec,
    weak: &ProcessSpec,
    cert: &SpeedupCertificate,
    replicas: usize,
    seed: u64,
) -> Result<BlockReport> {
    if cert.margin <= 0.0 {
        return Err(Error::Precondition {
            hypothesis: "positive margin",
            detail: format!("certificate margin {} is not positive", cert.margin),
        });
    }
    let m2 = cert.m * cert.m;
    let (u_w, eps) = (cert.u_weak, cert.epsilon);

    // Claim 2: a good block gains at least one time unit after any prefix.
    let gains: Vec<Result<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeded(derive_seed(seed, r as u64));
            let t_o = rng.random::<f64>();
            let prefix_len = rng.random_range(0..=2 * m2);
            let mut us: Vec<f64> = (0..prefix_len).map(|_| rng.random::<f64>()).collect();
            let before_s = tau(strong, t_o, &us)?;
            let before_w = tau(weak, t_o, &us)?;
            let lead = (before_w - before_s).max(0.0).floor();
            us.extend(conditioned_block(&mut rng, u_w, eps, m2));
            let after_s = tau(strong, t_o, &us)?;
            let after_w = tau(weak, t_o, &us)?;
            let gain = after_w - after_s - lead;
            if gain < 1.0 {
                return Err(Error::Claim2Violation { start: t_o, gain, uniforms: us });
            }
            Ok(gain)
        })
        .collect();
    let mut min_gain = f64::INFINITY;
    for g in gains {
        min_gain = min_gain.min(g?);
    }

    // Claim 1 on decreasing runs in (u', u'+ε) started inside [a_o, a].
    let a = cert.interval.0;
    let b = cert.interval.1;
    let a_o = lower_start(weak, b, 2.0 * u_w + eps)?;
    let mut rng = seeded(derive_seed(seed, u64::MAX));
    let mut applicable = 0;
    for _ in 0..replicas {
        let t_o = rng.random_range(a_o..=a);
        let k = rng.random_range(3..=m2.max(3));
        let us = conditioned_block(&mut rng, u_w, eps, k);
        if tau(weak, t_o, &us[..1])? <= a {
            continue;
        }
        applicable += 1;
        let lhs = tau(strong, t_o, &us)?;
        let rhs = tau(weak, t_o, &us[..k - 1])?;
        if lhs > rhs {
            return Err(Error::Precondition {
                hypothesis: "claim 1",
                detail: format!("tau_{t_o}{us:?} = {lhs} exceeds tau' without the last step = {rhs}"),
            });
        }
    }

    let analytic_only = cert.block_prob < 1e-6;
    let block_frequency =
        (!analytic_only).then(|| block_event_frequency(u_w, eps, m2, replicas, derive_seed(seed, 1 << 40)));

    // Claim 3 tail: fraction of runs whose lead after z blocks is small.
    let delta = cert.block_prob / (2.0 * m2 as f64);
    let zs = [1u64, 2, 4, 8];
    let zmax = *zs.last().expect("non-empty") as usize;
    let tail_runs: Vec<CouplingRun> = (0..replicas.min(200))
        .into_par_iter()
        .map(|r| coupled_run(strong, weak, 0.0, m2 * zmax, derive_seed(seed, (1 << 41) + r as u64)))
        .collect::<Result<_>>()?;
    let tail_curve = zs
        .iter()
        .map(|&z| {
            let n = m2 * z as usize;
            let small = tail_runs.iter().filter(|run| run.tau_weak[n] - run.tau_strong[n] <= delta * n as f64).count();
            (z, small as f64 / tail_runs.len() as f64)
        })
        .collect();

    Ok(BlockReport {
        replicas,
        block_len: m2,
        claim2_passed: replicas,
        min_gain,
        claim1_checked: replicas,
        claim1_applicable: applicable,
        claim1_start: a_o,
        block_prob: cert.block_prob,
        block_frequency,
        analytic_only,
        delta,
        tail_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_examples() {
        let sl = ProcessSpec::StationarizedLattice;
        assert_eq!(tau(&sl, 0.0, &[0.3, 0.4]).unwrap(), 0.3 + 0.4);
        assert_eq!(tau(&sl, 2.5, &[]).unwrap(), 2.5);
        let poi = ProcessSpec::poisson(1.0);
        let v = tau(&poi, 0.0, &[0.5, 0.9]).unwrap();
        assert!((v - (-(0.5f64.ln()) - 0.1f64.ln())).abs() < 1e-12);
        assert!(matches!(tau(&poi, 0.0, &[1.0]), Err(Error::UnreachableQuantile { .. })));
        assert!(matches!(tau(&poi, 0.0, &[1.5]), Err(Error::Domain(_))));
    }

    #[test]
    fn merging_is_exact_for_sl_at_zero() {
        let sl = ProcessSpec::StationarizedLattice;
        assert_eq!(tau(&sl, 0.0, &[0.4, 0.4]).unwrap(), tau(&sl, 0.0, &[0.8]).unwrap());
    }

    #[test]
    fn identical_processes_couple_identically() {
        let poi = ProcessSpec::poisson(1.0);
        let run = coupled_run(&poi, &poi, 0.0, 100, 4).unwrap();
        assert_eq!(run.tau_strong, run.tau_weak);
        let other = coupled_run(&poi, &poi, 0.0, 100, 5).unwrap();
        assert_ne!(run.tau_strong, other.tau_weak);
    }

    #[test]
    fn lattice_has_no_continuity() {
        let rep =
            check_lemma_properties(&ProcessSpec::Lattice, &ProcessSpec::Lattice, 20, 1, &LemmaTolerances::default())
                .unwrap();
        assert!(matches!(rep.item(6).unwrap().status, ItemStatus::PreconditionFailed { .. }));
    }

    #[test]
    fn block_probability_matches_factorial_form() {
        assert!((block_probability(0.5, 4) - 0.0625 / 24.0).abs() < 1e-18);
        let p = block_probability(1.0 / 12.0, 25);
        let direct = (1.0f64 / 12.0).powi(25) / (1..=25).map(|k| k as f64).product::<f64>();
        assert!(((p - direct) / direct).abs() < 1e-13);
    }
}
