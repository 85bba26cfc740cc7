//! Time constants on the half-line and the waiting-time bound `M`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{half_line_sweep, EdgeEnvironment, Region};
use crate::error::{Error, Result};
use crate::point_process::{analytic_hit, ProcessSpec};
use crate::rng::derive_seed;
use crate::stats::MeanEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Finite,
    /// Some time carries a point almost surely, so the front never waits.
    Zero,
    /// Edges are empty with positive probability, so the front stops.
    InfiniteStall,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Finite => "finite",
            Regime::Zero => "zero",
            Regime::InfiniteStall => "infinite_stall",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StallStats {
    pub stalled_replicas: usize,
    /// Vertex at which each stalled replica stopped.
    pub distances: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeConstantEstimate {
    pub spec: ProcessSpec,
    pub n_vertices: u64,
    pub replicas: usize,
    pub regime: Regime,
    pub mean: Option<f64>,
    pub std_err: Option<f64>,
    pub ci95: Option<(f64, f64)>,
    pub stall: Option<StallStats>,
}

impl TimeConstantEstimate {
    fn zero(spec: &ProcessSpec, n: u64, replicas: usize) -> Self {
        Self {
            spec: spec.clone(),
            n_vertices: n,
            replicas,
            regime: Regime::Zero,
            mean: Some(0.0),
            std_err: Some(0.0),
            ci95: Some((0.0, 0.0)),
            stall: None,
        }
    }
}

fn check_stationary(spec: &ProcessSpec) -> Result<()> {
    let sym = spec.symmetry();
    if sym.is_integer_stationary() || sym.asymptotic {
        Ok(())
    } else {
        Err(Error::stationarity(spec, "Z"))
    }
}

/// Estimates `c = lim T(n)/n` on `Z>=0` from independent replicas.
///
/// Specs whose law only becomes stationary at large times (such as the
/// inhomogeneous Poisson process) are accepted as well.
pub fn estimate_time_constant(
    spec: &ProcessSpec,
    n_vertices: u64,
    replicas: usize,
    seed: u64,
) -> Result<TimeConstantEstimate> {
    spec.validate()?;
    check_stationary(spec)?;
    if n_vertices < 100 {
        return Err(Error::Config(format!("need at least 100 vertices, got {n_vertices}")));
    }
    if replicas < 2 {
        return Err(Error::Config("need at least two replicas".into()));
    }
    if spec.atom_mass() == 1.0 {
        return Ok(TimeConstantEstimate::zero(spec, n_vertices, replicas));
    }
    let runs: Vec<(f64, bool, u64)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let env = EdgeEnvironment::new(Region::half_line(), spec.clone(), derive_seed(seed, r as u64));
            let run = half_line_sweep(&env, n_vertices, 0.0)?;
            let reached = run.times.len() as u64 - 1;
            Ok((run.times[reached as usize] / n_vertices as f64, run.stalled, reached))
        })
        .collect::<Result<_>>()?;

    let stalled: Vec<u64> = runs.iter().filter(|r| r.1).map(|r| r.2).collect();
    if !stalled.is_empty() || spec.empty_prob() > 0.0 {
        return Ok(TimeConstantEstimate {
            spec: spec.clone(),
            n_vertices,
            replicas,
            regime: Regime::InfiniteStall,
            mean: None,
            std_err: None,
            ci95: None,
            stall: Some(StallStats { stalled_replicas: stalled.len(), distances: stalled }),
        });
    }
    let ratios: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let est = MeanEstimate::from_samples(&ratios);
    Ok(TimeConstantEstimate {
        spec: spec.clone(),
        n_vertices,
        replicas,
        regime: Regime::Finite,
        mean: Some(est.mean),
        std_err: Some(est.std_err),
        ci95: Some(est.ci95()),
        stall: None,
    })
}

/// Result of integrating the void probability `s ↦ P(X([0, s]) = 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum WaitingBound {
    Finite {
        value: f64,
        error_bound: f64,
    },
    /// The process is empty with positive probability.
    Divergent,
    /// Neither a bounded support nor a tail bound is available.
    Indeterminate {
        partial: Option<f64>,
    },
}

impl WaitingBound {
    pub fn value(&self) -> Option<f64> {
        match self {
            WaitingBound::Finite { value, .. } => Some(*value),
            _ => None,
        }
    }
}

/// `M = ∫_0^∞ P(X([0, s]) = 0) ds`, the mean first waiting time from 0.
pub fn waiting_bound_m(spec: &ProcessSpec, integration_cap: f64, tolerance: f64) -> Result<WaitingBound> {
    spec.validate()?;
    if !(integration_cap > 0.0 && integration_cap.is_finite() && tolerance > 0.0) {
        return Err(Error::Config("integration cap and tolerance must be positive".into()));
    }
    if spec.empty_prob() > 0.0 {
        return Ok(WaitingBound::Divergent);
    }
    if analytic_hit(spec, 0.0, 1.0).is_none() {
        return Ok(WaitingBound::Indeterminate { partial: None });
    }
    let void = |s: f64| 1.0 - analytic_hit(spec, 0.0, s).expect("closed form");

    if let Some(support) = spec.void_support() {
        let (value, err) = integrate(&void, 0.0, support, tolerance);
        return Ok(WaitingBound::Finite { value, error_bound: err });
    }
    let (partial, err) = integrate(&void, 0.0, integration_cap, tolerance);
    if spec.cell_independent() && spec.is_integer_stationary() {
        // Voids on disjoint unit cells are independent, so
        // P(X([0,s]) = 0) <= r^floor(s) with r the void probability of one cell.
        let r = void(1.0);
        if r < 1.0 {
            let k = integration_cap.floor();
            let tail = r.powf(k) / (1.0 - r);
            return Ok(WaitingBound::Finite { value: partial, error_bound: err + tail });
        }
    }
    Ok(WaitingBound::Indeterminate { partial: Some(partial) })
}

/// Adaptive Simpson quadrature on unit pieces; returns `(value, error estimate)`.
fn integrate(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let mut total = 0.0;
    let mut err = 0.0;
    let pieces = (hi - lo).ceil().max(1.0) as usize;
    let piece_tol = tol / pieces as f64;
    for i in 0..pieces {
        let a = lo + i as f64;
        let b = (a + 1.0).min(hi);
        if b <= a {
            continue;
        }
        let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        let (v, e) = simpson(f, a, b, fa, fm, fb, whole, piece_tol, 48);
        total += v;
        err += e;
    }
    (total, err)
}

#[allow(clippy::too_many_arguments)]
fn simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> (f64, f64) {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return (left + right + diff / 15.0, diff.abs() / 15.0);
    }
    let (l, le) = simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1);
    let (r, re) = simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
    (l + r, le + re)
}

/// `min over t in grid of E[T(t)]/t`, with the estimate at the minimizing `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubadditiveBound {
    pub best_t: u64,
    pub estimate: MeanEstimate,
    /// `(t, E[T(t)]/t)` for every grid point.
    pub curve: Vec<(u64, f64)>,
}

pub fn subadditive_upper(spec: &ProcessSpec, t_grid: &[u64], replicas: usize, seed: u64) -> Result<SubadditiveBound> {
    spec.validate()?;
    check_stationary(spec)?;
    let Some(&top) = t_grid.iter().max() else {
        return Err(Error::Config("empty time grid".into()));
    };
    if t_grid.contains(&0) || replicas < 2 {
        return Err(Error::Config("grid points must be positive and replicas at least two".into()));
    }
    let runs: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let env = EdgeEnvironment::new(Region::half_line(), spec.clone(), derive_seed(seed, r as u64));
            half_line_sweep(&env, top, 0.0).map(|run| run.times)
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(u64, MeanEstimate)> = None;
    let mut curve = Vec::new();
    for &t in t_grid {
        let ratios: Vec<f64> =
            runs.iter().map(|times| times.get(t as usize).map_or(f64::INFINITY, |x| x / t as f64)).collect();
        let est = MeanEstimate::from_samples(&ratios);
        curve.push((t, est.mean));
        if best.as_ref().is_none_or(|(_, b)| est.mean < b.mean) {
            best = Some((t, est));
        }
    }
    let (best_t, estimate) = best.expect("non-empty grid");
    Ok(SubadditiveBound { best_t, estimate, curve })
}
