//! Hitting probabilities `F_a(t) = P(X([a, a+t]) > 0)`, their generalized
//! inverses `G_a(u) = inf{t >= 0 : u <= F_a(t)}`, and void probabilities.
//!
//! Closed forms cover the lattice family, Poisson processes and the derived
//! constructions built from them; everything else falls back to a Monte Carlo
//! estimate with a reported standard error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point_process::sample::{next_meeting, EdgeId, EdgeKey};
use crate::point_process::ProcessSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    Empirical,
}

/// A probability together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probability {
    pub value: f64,
    /// Zero for closed forms.
    pub std_err: f64,
    pub method: Method,
}

impl Probability {
    fn exact(value: f64) -> Self {
        Self { value, std_err: 0.0, method: Method::Analytic }
    }
}

/// Monte Carlo settings for specs without a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmpiricalConfig {
    pub replicas: usize,
    /// Grid step of tabulated hitting functions.
    pub resolution: f64,
    /// Largest waiting time tabulated.
    pub horizon: f64,
    pub seed: u64,
}

impl Default for EmpiricalConfig {
    fn default() -> Self {
        Self { replicas: 100_000, resolution: 1e-3, horizon: 16.0, seed: 0xF1_C0DE }
    }
}

fn check_start(a: f64) -> Result<()> {
    if a.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("interval start {a} is not finite")))
    }
}

fn check_length(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("interval length {t} must be finite and non-negative")))
    }
}

fn check_level(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::Domain(format!("probability level {u} outside [0,1]")))
    }
}

/// `P(X([a, a+t]) > 0)`.
pub fn hitting_prob(spec: &ProcessSpec, a: f64, t: f64) -> Result<Probability> {
    hitting_prob_with(spec, a, t, &EmpiricalConfig::default())
}

pub fn hitting_prob_with(spec: &ProcessSpec, a: f64, t: f64, cfg: &EmpiricalConfig) -> Result<Probability> {
    check_start(a)?;
    check_length(t)?;
    spec.validate()?;
    if let Some(p) = analytic_hit(spec, a, t) {
        return Ok(Probability::exact(p));
    }
    let hits: usize = (0..cfg.replicas)
        .into_par_iter()
        .filter(|&r| {
            let key = EdgeKey::new(cfg.seed, EdgeId(r as u64));
            next_meeting(spec, &key, a, Some((a + t).next_up())).is_some()
        })
        .count();
    let est = crate::stats::proportion(hits, cfg.replicas);
    Ok(Probability { value: est.mean, std_err: est.std_err, method: Method::Empirical })
}

/// `P(X([lo, hi]) = 0)`, the exact complement of the hitting probability.
pub fn void_prob(spec: &ProcessSpec, lo: f64, hi: f64) -> Result<Probability> {
    void_prob_with(spec, lo, hi, &EmpiricalConfig::default())
}

pub fn void_prob_with(spec: &ProcessSpec, lo: f64, hi: f64, cfg: &EmpiricalConfig) -> Result<Probability> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Domain(format!("interval [{lo}, {hi}] is unbounded")));
    }
    if hi < lo {
        return Err(Error::Domain(format!("interval [{lo}, {hi}] is reversed")));
    }
    let hit = hitting_prob_with(spec, lo, hi - lo, cfg)?;
    Ok(Probability { value: 1.0 - hit.value, ..hit })
}

/// Transmission-time CDF of the first passage model induced by an
/// R-stationary process, `mu([0, s]) = P(X([0, s]) > 0)`.
pub fn fpp_transmission_cdf(spec: &ProcessSpec, s: f64) -> Result<Probability> {
    if !spec.is_real_stationary() {
        return Err(Error::stationarity(spec, "R"));
    }
    hitting_prob(spec, 0.0, s)
}

/// Generalized inverse `G_a(u)` of `t ↦ F_a(t)`.
pub fn quantile(spec: &ProcessSpec, a: f64, u: f64) -> Result<f64> {
    quantile_with(spec, a, u, &EmpiricalConfig::default())
}

pub fn quantile_with(spec: &ProcessSpec, a: f64, u: f64, cfg: &EmpiricalConfig) -> Result<f64> {
    check_start(a)?;
    check_level(u)?;
    if let Some(g) = closed_form_quantile(spec, a, u) {
        return g;
    }
    if has_closed_form(spec) {
        return bisect_quantile(|t| analytic_hit(spec, a, t).expect("closed form"), u);
    }
    EmpiricalHitting::tabulate(spec, a, cfg).quantile(u)
}

/// True when the hitting function of `spec` is available in closed form.
pub fn has_closed_form(spec: &ProcessSpec) -> bool {
    analytic_hit(spec, 0.25, 0.5).is_some()
}

/// Hitting function of one spec, closed-form or tabulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingFunction {
    pub spec: ProcessSpec,
    pub form: HittingForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum HittingForm {
    Analytic,
    Empirical { replicas: usize, resolution: f64 },
}

impl HittingFunction {
    pub fn new(spec: ProcessSpec) -> Self {
        let cfg = EmpiricalConfig::default();
        let form = if has_closed_form(&spec) {
            HittingForm::Analytic
        } else {
            HittingForm::Empirical { replicas: cfg.replicas, resolution: cfg.resolution }
        };
        Self { spec, form }
    }

    fn config(&self) -> EmpiricalConfig {
        match self.form {
            HittingForm::Analytic => EmpiricalConfig::default(),
            HittingForm::Empirical { replicas, resolution } => {
                EmpiricalConfig { replicas, resolution, ..EmpiricalConfig::default() }
            }
        }
    }

    pub fn eval(&self, a: f64, t: f64) -> Result<Probability> {
        hitting_prob_with(&self.spec, a, t, &self.config())
    }

    pub fn quantile(&self, a: f64, u: f64) -> Result<f64> {
        quantile_with(&self.spec, a, u, &self.config())
    }
}

/// Tabulated empirical hitting function at one start time.
#[derive(Debug, Clone)]
pub struct EmpiricalHitting {
    pub a: f64,
    pub resolution: f64,
    /// `F_a(j * resolution)` for `j = 0..=horizon/resolution`.
    pub values: Vec<f64>,
    pub replicas: usize,
}

impl EmpiricalHitting {
    pub fn tabulate(spec: &ProcessSpec, a: f64, cfg: &EmpiricalConfig) -> Self {
        let limit = (a + cfg.horizon).next_up();
        let waits: Vec<Option<f64>> = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| {
                let key = EdgeKey::new(cfg.seed, EdgeId(r as u64));
                next_meeting(spec, &key, a, Some(limit)).map(|x| x - a)
            })
            .collect();
        let steps = (cfg.horizon / cfg.resolution).round() as usize;
        let mut counts = vec![0usize; steps + 1];
        for w in waits.into_iter().flatten() {
            // Smallest grid index j with w <= j * resolution.
            let mut j = (w / cfg.resolution).ceil() as usize;
            while j > 0 && w <= (j - 1) as f64 * cfg.resolution {
                j -= 1;
            }
            if j <= steps {
                counts[j] += 1;
            }
        }
        let mut acc = 0usize;
        let values = counts
            .into_iter()
            .map(|c| {
                acc += c;
                acc as f64 / cfg.replicas as f64
            })
            .collect();
        Self { a, resolution: cfg.resolution, values, replicas: cfg.replicas }
    }

    /// Right-continuous step interpolation of the grid.
    pub fn eval(&self, t: f64) -> f64 {
        let j = ((t / self.resolution).floor() as usize).min(self.values.len() - 1);
        self.values[j]
    }

    /// Infimum grid point whose tabulated value reaches `u`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        let j = self.values.partition_point(|&f| f < u);
        if j == self.values.len() {
            return Err(Error::UnreachableQuantile { u, sup: *self.values.last().unwrap_or(&0.0) });
        }
        Ok(j as f64 * self.resolution)
    }
}

fn bisect_quantile(f: impl Fn(f64) -> f64, u: f64) -> Result<f64> {
    if u <= f(0.0) {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) < u {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::UnreachableQuantile { u, sup: f(hi) });
        }
    }
    for _ in 0..2000 {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) >= u {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn closed_form_quantile(spec: &ProcessSpec, a: f64, u: f64) -> Option<Result<f64>> {
    match spec {
        ProcessSpec::StationarizedLattice => Some(Ok(u)),
        ProcessSpec::Poisson { rate } => Some(poisson_quantile(*rate, u)),
        ProcessSpec::Lattice => Some(Ok(if u == 0.0 { 0.0 } else { a.ceil() - a })),
        ProcessSpec::Scaled { base, factor } => Some(quantile(base, a / factor, u).map(|g| g * factor)),
        ProcessSpec::EmptyMixture { base, empty_prob } => {
            let reach = 1.0 - empty_prob;
            if u == 0.0 {
                return Some(Ok(0.0));
            }
            if u > reach {
                return Some(Err(Error::UnreachableQuantile { u, sup: reach }));
            }
            Some(quantile(base, a, (u / reach).min(1.0)))
        }
        ProcessSpec::Thinned { base, keep_prob } => match base.as_ref() {
            ProcessSpec::Poisson { rate } if *keep_prob > 0.0 => Some(poisson_quantile(rate * keep_prob, u)),
            _ => None,
        },
        _ => None,
    }
}

fn poisson_quantile(rate: f64, u: f64) -> Result<f64> {
    if u >= 1.0 {
        return Err(Error::UnreachableQuantile { u, sup: 1.0 });
    }
    Ok(-(-u).ln_1p() / rate)
}

/// Void probability of `[a, a+t]` for the perturbed lattice.
fn perturbed_void(a: f64, t: f64) -> f64 {
    let b = a + t;
    let mut void = 1.0;
    for z in (a.floor() as i64)..=(b.floor() as i64) {
        let zf = z as f64;
        let len = b.min(zf + 1.0) - a.max(zf);
        if len >= 1.0 {
            return 0.0;
        }
        if len > 0.0 {
            void *= 1.0 - len;
        }
    }
    void
}

/// Same as [`perturbed_void`] with each point independently kept w.p. `p`.
fn thinned_perturbed_void(a: f64, t: f64, p: f64) -> f64 {
    let b = a + t;
    let mut void = 1.0;
    for z in (a.floor() as i64)..=(b.floor() as i64) {
        let zf = z as f64;
        let len = (b.min(zf + 1.0) - a.max(zf)).clamp(0.0, 1.0);
        void *= 1.0 - p * len;
    }
    void
}

const GAUSS_LEGENDRE_5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Average of the perturbed-lattice void probability over a uniform shift.
/// The integrand is a polynomial of degree at most 3 between the breakpoints
/// where `a - s` or `a + t - s` crosses an integer, so 5-point Gauss-Legendre
/// on each piece is exact.
fn stationarized_perturbed_void(a: f64, t: f64) -> f64 {
    if t >= 2.0 {
        return 0.0;
    }
    let mut cuts = [0.0, a - a.floor(), (a + t) - (a + t).floor(), 1.0];
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        total += half * GAUSS_LEGENDRE_5.iter().map(|&(x, w)| w * perturbed_void(a - (mid + half * x), t)).sum::<f64>();
    }
    total.clamp(0.0, 1.0)
}

/// Number of distinct integers in `⋃_o [a - o, a + t - o]`.
fn integers_hit(a: f64, t: f64, offsets: &[f64]) -> u64 {
    let mut ranges: Vec<(i64, i64)> = offsets
        .iter()
        .map(|&o| (((a - o).ceil()) as i64, ((a + t - o).floor()) as i64))
        .filter(|(lo, hi)| lo <= hi)
        .collect();
    ranges.sort_unstable();
    let mut count = 0u64;
    let mut cur: Option<(i64, i64)> = None;
    for (lo, hi) in ranges {
        cur = match cur {
            Some((clo, chi)) if lo <= chi + 1 => Some((clo, chi.max(hi))),
            Some((clo, chi)) => {
                count += (chi - clo + 1) as u64;
                Some((lo, hi))
            }
            None => Some((lo, hi)),
        };
    }
    if let Some((clo, chi)) = cur {
        count += (chi - clo + 1) as u64;
    }
    count
}

/// Closed-form hitting probability, or `None` if the construction has none.
pub(crate) fn analytic_hit(spec: &ProcessSpec, a: f64, t: f64) -> Option<f64> {
    let p = match spec {
        ProcessSpec::Lattice => {
            if a.ceil() <= a + t {
                1.0
            } else {
                0.0
            }
        }
        ProcessSpec::StationarizedLattice => t.min(1.0),
        ProcessSpec::PerturbedLattice => 1.0 - perturbed_void(a, t),
        ProcessSpec::StationarizedPerturbedLattice => 1.0 - stationarized_perturbed_void(a, t),
        ProcessSpec::Poisson { rate } => -(-rate * t).exp_m1(),
        ProcessSpec::InhomPoisson { intensity } => -(-intensity.integral(a, a + t)).exp_m1(),
        ProcessSpec::Scaled { base, factor } => analytic_hit(base, a / factor, t / factor)?,
        ProcessSpec::EmptyMixture { base, empty_prob } => (1.0 - empty_prob) * analytic_hit(base, a, t)?,
        ProcessSpec::Thinned { base, keep_prob } => {
            let p = *keep_prob;
            match base.as_ref() {
                ProcessSpec::Lattice => {
                    let k = integers_hit(a, t, &[0.0]);
                    1.0 - (1.0 - p).powi(k as i32)
                }
                ProcessSpec::StationarizedLattice => {
                    let n = t.floor();
                    let r = t - n;
                    let q = 1.0 - p;
                    r * (1.0 - q.powi(n as i32 + 1)) + (1.0 - r) * (1.0 - q.powi(n as i32))
                }
                ProcessSpec::PerturbedLattice => 1.0 - thinned_perturbed_void(a, t, p),
                ProcessSpec::Poisson { rate } => -(-rate * p * t).exp_m1(),
                ProcessSpec::InhomPoisson { intensity } => -(-p * intensity.integral(a, a + t)).exp_m1(),
                ProcessSpec::Thinned { base: inner, keep_prob: inner_p } => {
                    analytic_hit(&ProcessSpec::thinned((**inner).clone(), p * inner_p), a, t)?
                }
                ProcessSpec::Scaled { base: inner, factor } => {
                    analytic_hit(&ProcessSpec::thinned((**inner).clone(), p), a / factor, t / factor)?
                }
                ProcessSpec::EmptyMixture { base: inner, empty_prob } => {
                    (1.0 - empty_prob) * analytic_hit(&ProcessSpec::thinned((**inner).clone(), p), a, t)?
                }
                _ => return None,
            }
        }
        ProcessSpec::Shifted { base, offsets } => match base.as_ref() {
            ProcessSpec::Lattice => {
                if integers_hit(a, t, offsets) > 0 {
                    1.0
                } else {
                    0.0
                }
            }
            ProcessSpec::Thinned { base: inner, keep_prob } if **inner == ProcessSpec::Lattice => {
                let k = integers_hit(a, t, offsets);
                1.0 - (1.0 - keep_prob).powi(k as i32)
            }
            _ => return None,
        },
    };
    Some(p.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_examples() {
        let poi = ProcessSpec::poisson(1.0);
        assert!((hitting_prob(&poi, 0.0, 1.0).unwrap().value - 0.632_120_558_828_557_7).abs() < 1e-15);
        assert_eq!(hitting_prob(&ProcessSpec::StationarizedLattice, 0.3, 0.5).unwrap().value, 0.5);
        assert_eq!(hitting_prob(&ProcessSpec::Lattice, 0.3, 0.5).unwrap().value, 0.0);
        assert!((void_prob(&poi, 0.0, 2.0).unwrap().value - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(void_prob(&ProcessSpec::StationarizedLattice, 0.0, 0.25).unwrap().value, 0.75);
        let sl4 = ProcessSpec::scaled(ProcessSpec::StationarizedLattice, 4.0);
        assert_eq!(void_prob(&sl4, 0.0, 1.0).unwrap().value, 0.75);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(hitting_prob(&ProcessSpec::Lattice, 0.0, -1.0), Err(Error::Domain(_))));
        assert!(matches!(void_prob(&ProcessSpec::Lattice, 0.0, f64::INFINITY), Err(Error::Domain(_))));
        assert!(matches!(quantile(&ProcessSpec::Lattice, 0.0, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn quantile_examples() {
        let poi = ProcessSpec::poisson(1.0);
        for u in [0.0, 0.1, 0.5, 0.9] {
            assert!((quantile(&poi, 3.7, u).unwrap() + (1.0 - u).ln()).abs() < 1e-14);
            assert_eq!(quantile(&ProcessSpec::StationarizedLattice, 3.7, u).unwrap(), u);
        }
        let g = quantile(&ProcessSpec::Lattice, 0.3, 0.9).unwrap();
        assert!((g - 0.7).abs() < 1e-15);
        assert!(matches!(quantile(&poi, 0.0, 1.0), Err(Error::UnreachableQuantile { .. })));
        let mix = ProcessSpec::empty_mixture(ProcessSpec::poisson(1.0), 0.5);
        assert!(matches!(quantile(&mix, 0.0, 0.6), Err(Error::UnreachableQuantile { .. })));
    }

    #[test]
    fn fpp_cdf_requires_real_stationarity() {
        let poi = ProcessSpec::poisson(1.0);
        let s = 0.7;
        assert!((fpp_transmission_cdf(&poi, s).unwrap().value - (1.0 - (-s).exp())).abs() < 1e-15);
        assert_eq!(fpp_transmission_cdf(&ProcessSpec::StationarizedLattice, 0.4).unwrap().value, 0.4);
        assert!(matches!(fpp_transmission_cdf(&ProcessSpec::PerturbedLattice, 0.4), Err(Error::Stationarity { .. })));
        assert!(matches!(fpp_transmission_cdf(&ProcessSpec::Lattice, 0.4), Err(Error::Stationarity { .. })));
    }

    #[test]
    fn counterexample_hitting_values() {
        let p = 0.5;
        let base = ProcessSpec::thinned(ProcessSpec::Lattice, p);
        let shifted = ProcessSpec::shifted(base.clone(), vec![0.0, 0.5]);
        let third = 1.0 / 3.0;
        assert_eq!(hitting_prob(&shifted, third, third).unwrap().value, p);
        assert_eq!(hitting_prob(&base, third, third).unwrap().value, 0.0);
    }

    #[test]
    fn integer_counting_merges_ranges() {
        assert_eq!(integers_hit(0.0, 2.0, &[0.0]), 3);
        assert_eq!(integers_hit(0.0, 2.0, &[0.0, 1.0]), 4);
        assert_eq!(integers_hit(0.2, 0.5, &[0.0]), 0);
        assert_eq!(integers_hit(0.2, 0.5, &[0.0, 0.5]), 1);
    }

    #[test]
    fn empirical_table_is_right_continuous_inverse() {
        let spec = ProcessSpec::shifted(ProcessSpec::StationarizedLattice, vec![0.0, 0.25]);
        assert!(!has_closed_form(&spec));
        let cfg = EmpiricalConfig { replicas: 20_000, ..EmpiricalConfig::default() };
        let table = EmpiricalHitting::tabulate(&spec, 0.0, &cfg);
        assert!(table.values.windows(2).all(|w| w[0] <= w[1]));
        for u in [0.1, 0.4, 0.8] {
            let g = table.quantile(u).unwrap();
            assert!(table.eval(g) >= u);
            if g > 0.0 {
                assert!(table.eval(g - table.resolution) < u);
            }
        }
    }
}
