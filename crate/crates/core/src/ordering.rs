//! Statistical tests of convex ordering, hitting-probability domination and
//! the speed-up condition between two point processes.
//!
//! `A ≫ B` (A more reliable than B) means `E[ψ(A(B_1..B_k))] >= E[ψ(B(B_1..B_k))]`
//! for every increasing concave `ψ` and disjoint bounded sets. A test can
//! refute this by exhibiting a significantly reversed trial, never prove it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{block_probability, tau};
use crate::error::{Error, Result};
use crate::estimators::{waiting_bound_m, WaitingBound};
use crate::point_process::{hitting_prob_with, sample_pattern, EdgeId, EmpiricalConfig, ProcessSpec};
use crate::rng::derive_seed;
use crate::sets::{check_disjoint, BorelSet, Interval};
use crate::stats::{normal_quantile, MeanEstimate};

/// Increasing concave functions of a count vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    /// `sqrt(n_1 + ... + n_k)`.
    SqrtSum,
    /// `sqrt(n_1) + ... + sqrt(n_k)`.
    SqrtCoordSum,
    /// `min_i n_i`.
    MinCoord,
    /// `min(n_1 + ... + n_k, 1)`.
    CappedSum,
}

impl TestFunction {
    pub const ALL: [TestFunction; 4] =
        [TestFunction::SqrtSum, TestFunction::SqrtCoordSum, TestFunction::MinCoord, TestFunction::CappedSum];

    pub fn eval(self, counts: &[usize]) -> f64 {
        let sum: usize = counts.iter().sum();
        match self {
            TestFunction::SqrtSum => (sum as f64).sqrt(),
            TestFunction::SqrtCoordSum => counts.iter().map(|&n| (n as f64).sqrt()).sum(),
            TestFunction::MinCoord => counts.iter().copied().min().unwrap_or(0) as f64,
            TestFunction::CappedSum => sum.min(1) as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// `A` scores significantly higher.
    Supports,
    /// `A` scores significantly lower, contradicting `A ≫ B`.
    Refutes,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub function: TestFunction,
    pub collection: Vec<BorelSet>,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Standard error of `mean_a - mean_b`.
    pub std_err: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub a: ProcessSpec,
    pub b: ProcessSpec,
    pub replicas: usize,
    pub significance: f64,
    pub trials: Vec<Trial>,
    pub refuted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrderTestConfig {
    pub replicas: usize,
    pub significance: f64,
    pub seed: u64,
}

impl Default for OrderTestConfig {
    fn default() -> Self {
        Self { replicas: 100_000, significance: 0.01, seed: 0x0D_0E }
    }
}

/// The four single-set collections on which the lattice-type processes
/// disagree: `{0}`, `(0,1)`, `(-1/2,1/2)\{0}` and `(-1/2,0)∪(1/2,1)`.
pub fn separating_collections() -> Vec<Vec<BorelSet>> {
    vec![
        vec![BorelSet::single(Interval::point(0.0))],
        vec![BorelSet::single(Interval::open(0.0, 1.0))],
        vec![BorelSet(vec![Interval::open(-0.5, 0.0), Interval::open(0.0, 0.5)])],
        vec![BorelSet(vec![Interval::open(-0.5, 0.0), Interval::open(0.5, 1.0)])],
    ]
}

/// Counts of `spec` in each set of `collection`, one vector per replica.
fn sample_counts(spec: &ProcessSpec, collection: &[BorelSet], replicas: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let (lo, hi) = collection
        .iter()
        .filter_map(BorelSet::hull_window)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), (a, b)| (l.min(a), h.max(b)));
    if lo >= hi {
        return Ok(vec![vec![0; collection.len()]; replicas]);
    }
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let p = sample_pattern(spec, seed, EdgeId(r as u64), lo, hi)?;
            Ok(collection.iter().map(|s| s.count(&p.times)).collect())
        })
        .collect()
}

/// Estimates `E[ψ(counts)]` under `spec`.
pub fn expected_value(
    spec: &ProcessSpec,
    collection: &[BorelSet],
    function: TestFunction,
    replicas: usize,
    seed: u64,
) -> Result<MeanEstimate> {
    check_disjoint(collection)?;
    let values: Vec<f64> = sample_counts(spec, collection, replicas, seed)?.iter().map(|c| function.eval(c)).collect();
    Ok(MeanEstimate::from_samples(&values))
}

/// Tests `A ≫ B` on every (collection, function) pair.
///
/// Samples of `A` and `B` are independent; each trial compares the means
/// with a two-sample z statistic at the Bonferroni-corrected level.
pub fn convex_order_test(
    a: &ProcessSpec,
    b: &ProcessSpec,
    collections: &[Vec<BorelSet>],
    functions: &[TestFunction],
    cfg: &OrderTestConfig,
) -> Result<OrderingReport> {
    a.validate()?;
    b.validate()?;
    for c in collections {
        check_disjoint(c)?;
    }
    let m = (collections.len() * functions.len()).max(1);
    let z = normal_quantile(1.0 - cfg.significance / (2.0 * m as f64));
    let mut trials = Vec::new();
    for (ci, collection) in collections.iter().enumerate() {
        let counts_a = sample_counts(a, collection, cfg.replicas, derive_seed(cfg.seed, 2 * ci as u64))?;
        let counts_b = sample_counts(b, collection, cfg.replicas, derive_seed(cfg.seed, 2 * ci as u64 + 1))?;
        for &function in functions {
            let ea = MeanEstimate::from_samples(&counts_a.iter().map(|c| function.eval(c)).collect::<Vec<_>>());
            let eb = MeanEstimate::from_samples(&counts_b.iter().map(|c| function.eval(c)).collect::<Vec<_>>());
            let diff = ea.mean - eb.mean;
            let se = (ea.std_err.powi(2) + eb.std_err.powi(2)).sqrt();
            let significant = if se == 0.0 { diff != 0.0 } else { diff.abs() > z * se };
            let verdict = match (significant, diff > 0.0) {
                (false, _) => Verdict::Inconclusive,
                (true, true) => Verdict::Supports,
                (true, false) => Verdict::Refutes,
            };
            trials.push(Trial {
                function,
                collection: collection.clone(),
                mean_a: ea.mean,
                mean_b: eb.mean,
                std_err: se,
                verdict,
            });
        }
    }
    let refuted = trials.iter().any(|t| t.verdict == Verdict::Refutes);
    Ok(OrderingReport {
        a: a.clone(),
        b: b.clone(),
        replicas: cfg.replicas,
        significance: cfg.significance,
        trials,
        refuted,
    })
}

/// Start points and lengths of the intervals `[a, a + len]` examined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntervalGrid {
    pub starts: Vec<f64>,
    pub lengths: Vec<f64>,
}

impl Default for IntervalGrid {
    /// `a ∈ {0, 0.05, ..., 0.95}`, lengths `{0.05, ..., 2.0}`.
    fn default() -> Self {
        Self {
            starts: (0..20).map(|j| j as f64 / 20.0).collect(),
            lengths: (1..=40).map(|j| j as f64 / 20.0).collect(),
        }
    }
}

impl IntervalGrid {
    fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.starts.iter().flat_map(move |&a| self.lengths.iter().map(move |&l| (a, l)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalComparison {
    pub interval: (f64, f64),
    pub p_strong: f64,
    pub p_weak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub dominated: bool,
    pub checked: usize,
    /// Interval maximizing `p_weak - p_strong`, reported when domination fails.
    pub worst: Option<IntervalComparison>,
}

/// Checks `P(X'([a,b]) > 0) <= P(X([a,b]) > 0)` on a grid of intervals.
///
/// Closed forms are compared exactly; Monte Carlo values must exceed the
/// strong value by more than a Bonferroni-corrected multiple of the error.
pub fn hitting_domination_test(
    strong: &ProcessSpec,
    weak: &ProcessSpec,
    grid: &IntervalGrid,
    cfg: &EmpiricalConfig,
) -> Result<DominationReport> {
    let points: Vec<(f64, f64)> = grid.points().collect();
    let z = normal_quantile(1.0 - 0.01 / (2.0 * points.len().max(1) as f64));
    let mut worst: Option<(f64, IntervalComparison)> = None;
    for &(a, len) in &points {
        let ps = hitting_prob_with(strong, a, len, cfg)?;
        let pw = hitting_prob_with(weak, a, len, cfg)?;
        let excess = pw.value - ps.value;
        let se = (ps.std_err.powi(2) + pw.std_err.powi(2)).sqrt();
        let violated = if se == 0.0 { excess > 0.0 } else { excess > z * se };
        if violated && worst.as_ref().is_none_or(|(e, _)| excess > *e) {
            worst = Some((excess, IntervalComparison { interval: (a, a + len), p_strong: ps.value, p_weak: pw.value }));
        }
    }
    Ok(DominationReport { dominated: worst.is_none(), checked: points.len(), worst: worst.map(|w| w.1) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupCertificate {
    pub interval: (f64, f64),
    pub p_strong: f64,
    pub p_weak: f64,
    /// `p_strong - 3 p_weak`.
    pub margin: f64,
    pub u_weak: f64,
    /// `margin / 3`.
    pub epsilon: f64,
    /// Least `k` with `τ'_0(u',...,u' (k times)) >= 2`.
    pub m_lower: usize,
    /// Block side; the block spans `m^2` edges.
    pub m: usize,
    /// `ε^{m^2} / (m^2)!`.
    pub block_prob: f64,
    /// Best `p_strong - c p_weak` over the grid for `c = 1, 2, 3`.
    pub margins_by_constant: Vec<(u32, f64)>,
}

/// Cap on the steps taken while searching for `m_lower`.
const MAX_LOWER_STEPS: usize = 1_000_000;

/// Searches the grid for an interval where `P(X([a,b]) > 0) > 3 P(X'([a,b]) > 0)`
/// and assembles the constants of the block argument.
///
/// The hypotheses are checked first, in order: both processes
/// `Z`-stationary, `X'` atomless, domination in hitting probabilities and a
/// finite waiting bound for `X`.
pub fn speedup_condition_scan(
    strong: &ProcessSpec,
    weak: &ProcessSpec,
    grid: &IntervalGrid,
    cfg: &EmpiricalConfig,
) -> Result<Option<SpeedupCertificate>> {
    strong.validate()?;
    weak.validate()?;
    for spec in [strong, weak] {
        if !spec.is_integer_stationary() {
            return Err(Error::Precondition {
                hypothesis: "Z-stationarity",
                detail: format!("{spec} is not Z-stationary"),
            });
        }
    }
    if !weak.is_atomless() {
        return Err(Error::Precondition {
            hypothesis: "atomless weak process",
            detail: format!("{weak} has atoms of mass {}", weak.atom_mass()),
        });
    }
    let dom = hitting_domination_test(strong, weak, grid, cfg)?;
    if let Some(w) = dom.worst {
        return Err(Error::Precondition {
            hypothesis: "hitting-probability domination",
            detail: format!(
                "on [{}, {}] the weak process hits with {} > {}",
                w.interval.0, w.interval.1, w.p_weak, w.p_strong
            ),
        });
    }
    match waiting_bound_m(strong, 64.0, 1e-9)? {
        WaitingBound::Finite { .. } => {}
        other => {
            return Err(Error::Precondition {
                hypothesis: "finite waiting bound",
                detail: format!("waiting bound of {strong} is {other:?}"),
            })
        }
    }

    let mut best: Option<(f64, IntervalComparison)> = None;
    let mut by_constant = [f64::NEG_INFINITY; 3];
    for (a, len) in grid.points() {
        let ps = hitting_prob_with(strong, a, len, cfg)?.value;
        let pw = hitting_prob_with(weak, a, len, cfg)?.value;
        for (k, slot) in by_constant.iter_mut().enumerate() {
            *slot = slot.max(ps - (k + 1) as f64 * pw);
        }
        let margin = ps - 3.0 * pw;
        if best.as_ref().is_none_or(|(m, _)| margin > *m) {
            best = Some((margin, IntervalComparison { interval: (a, a + len), p_strong: ps, p_weak: pw }));
        }
    }
    let margins_by_constant = by_constant.iter().enumerate().map(|(k, &m)| (k as u32 + 1, m)).collect();
    let Some((margin, cmp)) = best.filter(|(m, _)| *m > 0.0) else {
        return Ok(None);
    };

    let u_weak = cmp.p_weak;
    let epsilon = margin / 3.0;
    let m_lower = lower_block_len(weak, u_weak)?;
    let m = (2 * m_lower + 1).max(5);
    let block_prob = block_probability(epsilon, m * m);
    Ok(Some(SpeedupCertificate {
        interval: cmp.interval,
        p_strong: cmp.p_strong,
        p_weak: u_weak,
        margin,
        u_weak,
        epsilon,
        m_lower,
        m,
        block_prob,
        margins_by_constant,
    }))
}

/// `min{k : τ'_0(u', ..., u' (k times)) >= 2}`.
pub fn lower_block_len(weak: &ProcessSpec, u_weak: f64) -> Result<usize> {
    let mut s = 0.0;
    for k in 1..=MAX_LOWER_STEPS {
        s = tau(weak, s, &[u_weak])?;
        if s >= 2.0 {
            return Ok(k);
        }
    }
    Err(Error::Precondition {
        hypothesis: "divergent repeated steps",
        detail: format!("tau'_0 with u' = {u_weak} stays below 2 after {MAX_LOWER_STEPS} steps"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_functions_are_monotone() {
        for f in TestFunction::ALL {
            assert!(f.eval(&[1, 2]) <= f.eval(&[2, 2]));
            assert_eq!(f.eval(&[0, 0]), 0.0);
        }
    }

    #[test]
    fn overlapping_collections_are_rejected() {
        let bad =
            vec![vec![BorelSet::single(Interval::closed(0.0, 1.0)), BorelSet::single(Interval::closed(1.0, 2.0))]];
        let cfg = OrderTestConfig { replicas: 10, ..OrderTestConfig::default() };
        assert!(matches!(
            convex_order_test(&ProcessSpec::Lattice, &ProcessSpec::Lattice, &bad, &[TestFunction::SqrtSum], &cfg),
            Err(Error::Disjointness(_))
        ));
    }

    #[test]
    fn lattice_and_stationarized_lattice_disagree() {
        let cfg = OrderTestConfig { replicas: 2000, ..OrderTestConfig::default() };
        let sets = separating_collections();
        let fwd = convex_order_test(
            &ProcessSpec::Lattice,
            &ProcessSpec::StationarizedLattice,
            &sets[..2],
            &[TestFunction::SqrtSum],
            &cfg,
        )
        .unwrap();
        assert!(fwd.refuted);
        assert_eq!(fwd.trials[0].mean_a, 1.0);
        assert_eq!(fwd.trials[0].mean_b, 0.0);
        assert_eq!(fwd.trials[1].mean_a, 0.0);
        assert_eq!(fwd.trials[1].mean_b, 1.0);
    }

    #[test]
    fn certificate_for_scaled_lattice() {
        let sl = ProcessSpec::StationarizedLattice;
        let weak = ProcessSpec::scaled(sl.clone(), 4.0);
        let cert =
            speedup_condition_scan(&sl, &weak, &IntervalGrid::default(), &EmpiricalConfig::default()).unwrap().unwrap();
        assert_eq!(cert.interval, (0.0, 1.0));
        assert_eq!((cert.p_strong, cert.p_weak, cert.margin), (1.0, 0.25, 0.25));
        assert_eq!(cert.m_lower, 2);
        assert_eq!(cert.m, 5);
        assert_eq!(3.0 * cert.epsilon + 3.0 * cert.u_weak, cert.p_strong);
    }

    #[test]
    fn no_certificate_between_equal_processes() {
        let poi = ProcessSpec::poisson(1.0);
        assert!(speedup_condition_scan(&poi, &poi, &IntervalGrid::default(), &EmpiricalConfig::default())
            .unwrap()
            .is_none());
    }

    #[test]
    fn atoms_block_the_scan() {
        let base = ProcessSpec::thinned(ProcessSpec::Lattice, 0.5);
        let strong = ProcessSpec::shifted(base.clone(), vec![0.0, 0.5]);
        let err =
            speedup_condition_scan(&strong, &base, &IntervalGrid::default(), &EmpiricalConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition { hypothesis: "atomless weak process", .. }));
    }

    #[test]
    fn lattice_is_not_dominated_by_stationarized_lattice() {
        let rep = hitting_domination_test(
            &ProcessSpec::StationarizedLattice,
            &ProcessSpec::Lattice,
            &IntervalGrid::default(),
            &EmpiricalConfig::default(),
        )
        .unwrap();
        assert!(!rep.dominated);
        let w = rep.worst.unwrap();
        assert_eq!(w.p_weak, 1.0);
        assert!(w.p_strong < 1.0);
    }
}
