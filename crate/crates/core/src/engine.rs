//! Event-driven spread of first contact infection on subsets of `Z^d`.
//!
//! The front is advanced with a Dijkstra-style sweep: a vertex infected at
//! time `s` offers each neighbour the first meeting time `>= s` on the
//! connecting edge. Equal times on consecutive edges transmit instantly.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point_process::{edge_is_empty, next_meeting, sample_pattern, EdgeId, EdgeKey, PointPattern, ProcessSpec};
use crate::rng::hash_words;

pub type Vertex = Vec<i64>;

/// Vertex set on which the infection runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// `{0, 1, ..., vertices-1}`, or all of `Z>=0` when unbounded.
    HalfLine { vertices: Option<u64> },
    /// Box `lo <= x <= hi` coordinatewise.
    Box { lo: Vec<i64>, hi: Vec<i64> },
}

impl Region {
    pub fn half_line() -> Self {
        Region::HalfLine { vertices: None }
    }

    /// `[-l, l]^d`.
    pub fn centered(d: usize, l: i64) -> Self {
        Region::Box { lo: vec![-l; d], hi: vec![l; d] }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Region::HalfLine { .. } => 1,
            Region::Box { lo, .. } => lo.len(),
        }
    }

    pub fn origin(&self) -> Vertex {
        vec![0; self.dimension()]
    }

    pub fn contains(&self, v: &[i64]) -> bool {
        match self {
            Region::HalfLine { vertices } => v.len() == 1 && v[0] >= 0 && vertices.is_none_or(|n| (v[0] as u64) < n),
            Region::Box { lo, hi } => {
                v.len() == lo.len() && v.iter().zip(lo.iter().zip(hi)).all(|(x, (l, h))| l <= x && x <= h)
            }
        }
    }

    /// Number of vertices, `None` when infinite.
    pub fn size(&self) -> Option<u64> {
        match self {
            Region::HalfLine { vertices } => *vertices,
            Region::Box { lo, hi } => Some(lo.iter().zip(hi).map(|(l, h)| (h - l + 1).max(0) as u64).product()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Region::HalfLine { vertices: Some(0) } => Err(Error::Config("half-line must contain the origin".into())),
            Region::HalfLine { .. } => Ok(()),
            Region::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(Error::Config("box corners must have equal, positive dimension".into()));
                }
                if !self.contains(&self.origin()) {
                    return Err(Error::Config("box does not contain the origin".into()));
                }
                Ok(())
            }
        }
    }

    fn neighbors(&self, v: &[i64], out: &mut Vec<(Vertex, EdgeId)>) {
        out.clear();
        for axis in 0..v.len() {
            for step in [-1i64, 1] {
                let mut w = v.to_vec();
                w[axis] += step;
                if self.contains(&w) {
                    let lower = if step < 0 { &w } else { v };
                    out.push((w.clone(), edge_id(lower, axis)));
                }
            }
        }
    }
}

/// Identifier of the edge from `lower` to `lower + e_axis`.
///
/// In one dimension the edge `{x, x+1}` is `EdgeId(x)`, so half-line runs and
/// the quantile coupling address the same edges.
pub fn edge_id(lower: &[i64], axis: usize) -> EdgeId {
    if lower.len() == 1 {
        return EdgeId(lower[0] as u64);
    }
    let mut words = Vec::with_capacity(lower.len() + 1);
    words.push(axis as u64);
    words.extend(lower.iter().map(|&x| x as u64));
    EdgeId(hash_words(&words))
}

/// A realization of meeting times on every edge of a region.
///
/// Patterns are never stored; they are regenerated on demand from
/// `(seed, edge)` and are therefore identical on every query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEnvironment {
    pub region: Region,
    pub spec: ProcessSpec,
    pub seed: u64,
    /// Extra meeting times superposed onto individual edges.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overlay: BTreeMap<EdgeId, Vec<f64>>,
}

impl EdgeEnvironment {
    pub fn new(region: Region, spec: ProcessSpec, seed: u64) -> Self {
        Self { region, spec, seed, overlay: BTreeMap::new() }
    }

    /// Adds meeting times to one edge.
    pub fn superpose(&mut self, edge: EdgeId, times: &[f64]) {
        let slot = self.overlay.entry(edge).or_default();
        slot.extend_from_slice(times);
        slot.sort_by(f64::total_cmp);
        slot.dedup();
    }

    fn key(&self, edge: EdgeId) -> EdgeKey {
        EdgeKey::new(self.seed, edge)
    }

    /// First meeting time on `edge` at or after `s` and before `limit`.
    pub fn next_meeting(&self, edge: EdgeId, s: f64, limit: Option<f64>) -> Option<f64> {
        let base = next_meeting(&self.spec, &self.key(edge), s, limit);
        let extra = self.overlay.get(&edge).and_then(|ts| {
            let i = ts.partition_point(|&x| x < s);
            ts.get(i).copied().filter(|&x| limit.is_none_or(|l| x < l))
        });
        match (base, extra) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// True if the edge provably carries no meeting at all.
    pub fn edge_is_dead(&self, edge: EdgeId) -> bool {
        edge_is_empty(&self.spec, &self.key(edge)) && !self.overlay.contains_key(&edge)
    }

    /// Meeting times of one edge on `[w0, w1)`.
    pub fn edge_pattern(&self, edge: EdgeId, w0: f64, w1: f64) -> Result<PointPattern> {
        let mut p = sample_pattern(&self.spec, self.seed, edge, w0, w1)?;
        if let Some(extra) = self.overlay.get(&edge) {
            p.times.extend(extra.iter().copied().filter(|&x| w0 <= x && x < w1));
            p.times.sort_by(f64::total_cmp);
            p.times.dedup();
        }
        Ok(p)
    }
}

/// When a spread run stops.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Horizon {
    /// Only infections strictly before this time are recorded.
    pub time: Option<f64>,
    /// Stop after this many vertices (origin included) are infected.
    pub max_vertices: Option<u64>,
}

impl Horizon {
    pub fn time(t: f64) -> Self {
        Self { time: Some(t), max_vertices: None }
    }

    pub fn vertices(n: u64) -> Self {
        Self { time: None, max_vertices: Some(n) }
    }

    pub fn unbounded() -> Self {
        Self::default()
    }
}

/// Hard cap on vertices settled in one run.
pub const SAFETY_VERTEX_CAP: usize = 10_000_000;

/// A self-avoiding nearest-neighbour path with the meeting times used on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePath {
    pub vertices: Vec<Vertex>,
    /// `times[i]` is the meeting time used on the edge `vertices[i] -> vertices[i+1]`.
    pub times: Vec<f64>,
}

impl SpaceTimePath {
    /// Checks self-avoidance, adjacency, monotone times and that every time
    /// is a meeting of its edge.
    pub fn is_permitted(&self, env: &EdgeEnvironment, horizon: f64) -> bool {
        if self.vertices.len() != self.times.len() + 1 {
            return false;
        }
        let mut seen = std::collections::HashSet::new();
        if !self.vertices.iter().all(|v| seen.insert(v.clone())) {
            return false;
        }
        if !self.times.windows(2).all(|w| w[0] <= w[1]) {
            return false;
        }
        if self.times.last().is_some_and(|&t| t >= horizon) {
            return false;
        }
        self.vertices.windows(2).zip(&self.times).all(|(pair, &t)| {
            let (x, y) = (&pair[0], &pair[1]);
            let diff: Vec<i64> = x.iter().zip(y).map(|(a, b)| b - a).collect();
            let axis = match diff.iter().position(|&d| d != 0) {
                Some(k) if diff[k].abs() == 1 && diff.iter().filter(|&&d| d != 0).count() == 1 => k,
                _ => return false,
            };
            let lower = if diff[axis] > 0 { x } else { y };
            env.next_meeting(edge_id(lower, axis), t, None) == Some(t)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Infected,
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub vertex: Vertex,
    pub time: f64,
    pub event: EventKind,
}

#[derive(Debug, Clone)]
struct Settled {
    vertex: Vertex,
    time: f64,
    pred: Option<usize>,
}

/// Outcome of one spread run.
#[derive(Debug, Clone)]
pub struct SpreadResult {
    pub start: f64,
    settled: Vec<Settled>,
    index: HashMap<Vertex, usize>,
    pub trace: Vec<TraceEvent>,
    /// No meeting can extend the front any further.
    pub stalled: bool,
    /// The run hit [`SAFETY_VERTEX_CAP`].
    pub truncated: bool,
}

impl SpreadResult {
    /// Recorded infection time of `v`, `None` if not reached before the horizon.
    pub fn hitting_time(&self, v: &[i64]) -> Option<f64> {
        self.index.get(v).map(|&i| self.settled[i].time)
    }

    /// Infected vertices in order of infection, with their times.
    pub fn hitting_times(&self) -> impl Iterator<Item = (&Vertex, f64)> {
        self.settled.iter().map(|s| (&s.vertex, s.time))
    }

    pub fn reached(&self) -> usize {
        self.settled.len()
    }

    /// The path along which `v` was first reached.
    pub fn witness(&self, v: &[i64]) -> Option<SpaceTimePath> {
        let mut i = *self.index.get(v)?;
        let mut vertices = vec![self.settled[i].vertex.clone()];
        let mut times = Vec::new();
        while let Some(p) = self.settled[i].pred {
            times.push(self.settled[i].time);
            i = p;
            vertices.push(self.settled[i].vertex.clone());
        }
        vertices.reverse();
        times.reverse();
        Some(SpaceTimePath { vertices, times })
    }
}

#[derive(Debug, PartialEq)]
struct Candidate {
    time: f64,
    vertex: Vertex,
    pred: Option<usize>,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    // Reversed so that BinaryHeap pops the earliest (time, vertex) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Runs the spread from the origin at `start`.
pub fn run_spread(env: &EdgeEnvironment, start: f64, horizon: Horizon) -> Result<SpreadResult> {
    spread(env, start, horizon, None)
}

fn spread(env: &EdgeEnvironment, start: f64, horizon: Horizon, target: Option<&[i64]>) -> Result<SpreadResult> {
    env.region.validate()?;
    env.spec.validate()?;
    if !start.is_finite() {
        return Err(Error::Config(format!("start time {start} is not finite")));
    }
    if let Some(t) = horizon.time {
        if t.is_nan() || t <= start {
            return Err(Error::Config(format!("time horizon {t} must exceed the start {start}")));
        }
    }
    if horizon.max_vertices == Some(0) {
        return Err(Error::Config("vertex budget must be positive".into()));
    }

    let mut res = SpreadResult {
        start,
        settled: Vec::new(),
        index: HashMap::new(),
        trace: Vec::new(),
        stalled: false,
        truncated: false,
    };
    let mut best: HashMap<Vertex, f64> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let mut limited = false;
    let mut stopped = false;
    let mut nbrs = Vec::new();
    heap.push(Candidate { time: start, vertex: env.region.origin(), pred: None });

    while let Some(Candidate { time, vertex, pred }) = heap.pop() {
        if res.index.contains_key(&vertex) {
            continue;
        }
        if horizon.max_vertices.is_some_and(|n| res.settled.len() as u64 >= n) {
            stopped = true;
            break;
        }
        if res.settled.len() >= SAFETY_VERTEX_CAP {
            res.truncated = true;
            stopped = true;
            break;
        }
        let id = res.settled.len();
        res.index.insert(vertex.clone(), id);
        res.trace.push(TraceEvent { vertex: vertex.clone(), time, event: EventKind::Infected });
        res.settled.push(Settled { vertex: vertex.clone(), time, pred });
        if target.is_some_and(|t| t == vertex.as_slice()) {
            stopped = true;
            break;
        }
        env.region.neighbors(&vertex, &mut nbrs);
        for (w, edge) in nbrs.drain(..) {
            if res.index.contains_key(&w) {
                continue;
            }
            match env.next_meeting(edge, time, horizon.time) {
                Some(m) => {
                    if best.get(&w).is_none_or(|&b| m < b) {
                        best.insert(w.clone(), m);
                        heap.push(Candidate { time: m, vertex: w, pred: Some(id) });
                    }
                }
                None => {
                    if horizon.time.is_some() && !env.edge_is_dead(edge) {
                        limited = true;
                    }
                }
            }
        }
    }

    let exhausted = env.region.size().is_some_and(|n| res.settled.len() as u64 >= n);
    if !stopped && !limited && !exhausted {
        res.stalled = true;
        if let Some(last) = res.settled.last() {
            res.trace.push(TraceEvent { vertex: last.vertex.clone(), time: last.time, event: EventKind::Stalled });
        }
    }
    Ok(res)
}

/// `T(v)` started at `start`; `None` if `v` is never reached.
pub fn hitting_time(env: &EdgeEnvironment, v: &[i64], start: f64) -> Result<Option<f64>> {
    if !env.region.contains(v) {
        return Err(Error::Domain(format!("vertex {v:?} is outside the region")));
    }
    if matches!(env.region, Region::HalfLine { .. }) {
        let run = half_line_sweep(env, v[0] as u64, start)?;
        return Ok(run.times.get(v[0] as usize).copied());
    }
    Ok(spread(env, start, Horizon::unbounded(), Some(v))?.hitting_time(v))
}

/// Vertices with `T(v) < t`; the origin is always included.
pub fn infected_set(result: &SpreadResult, t: f64) -> Result<Vec<Vertex>> {
    if t < result.start {
        return Err(Error::Domain(format!("time {t} precedes the start {} of the run", result.start)));
    }
    Ok(result
        .settled
        .iter()
        .enumerate()
        .filter(|(i, s)| *i == 0 || s.time < t)
        .map(|(_, s)| s.vertex.clone())
        .collect())
}

/// Hitting times `T(0), ..., T(k)` along the half-line.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfLineRun {
    /// `times[k] = T(k)`; shorter than requested when the front stalls.
    pub times: Vec<f64>,
    pub stalled: bool,
}

/// On `Z>=0` the only self-avoiding path to `n` is the straight one, so
/// `T(k+1)` is simply the first meeting of edge `k` at or after `T(k)`.
pub fn half_line_sweep(env: &EdgeEnvironment, n: u64, start: f64) -> Result<HalfLineRun> {
    let Region::HalfLine { vertices } = env.region else {
        return Err(Error::Config("half-line sweep needs a half-line region".into()));
    };
    if vertices.is_some_and(|m| n >= m) {
        return Err(Error::Domain(format!("vertex {n} is outside the region")));
    }
    let mut times = Vec::with_capacity(n as usize + 1);
    times.push(start);
    let mut now = start;
    for k in 0..n {
        match env.next_meeting(EdgeId(k), now, None) {
            Some(m) => {
                now = m;
                times.push(m);
            }
            None => return Ok(HalfLineRun { times, stalled: true }),
        }
    }
    Ok(HalfLineRun { times, stalled: false })
}

/// Per-edge meeting times of the first `edges` half-line edges, or of every
/// edge touching a reached vertex in a box, restricted to `[w0, w1)`.
pub fn edge_patterns(
    env: &EdgeEnvironment,
    result: &SpreadResult,
    w0: f64,
    w1: f64,
) -> Result<Vec<(Vertex, usize, PointPattern)>> {
    let mut out = Vec::new();
    let mut nbrs = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for s in &result.settled {
        env.region.neighbors(&s.vertex, &mut nbrs);
        for (w, edge) in nbrs.drain(..) {
            if !seen.insert(edge) {
                continue;
            }
            let axis = s.vertex.iter().zip(&w).position(|(a, b)| a != b).expect("distinct");
            let lower = if w[axis] < s.vertex[axis] { w } else { s.vertex.clone() };
            out.push((lower, axis, env.edge_pattern(edge, w0, w1)?));
        }
    }
    out.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
    Ok(out)
}
