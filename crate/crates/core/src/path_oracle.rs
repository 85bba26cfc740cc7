//! Exhaustive counting of permitted paths on small instances.
//!
//! A permitted path from `x` to `y` before time `t` is a self-avoiding
//! nearest-neighbour path `x = x_0, ..., x_k = y` together with meeting times
//! `0 <= t_1 <= ... <= t_k < t`, `t_i` a meeting of edge `{x_{i-1}, x_i}`.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::engine::{edge_id, EdgeEnvironment, SpaceTimePath, Vertex};
use crate::error::{Error, Result};
use crate::point_process::EdgeId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleLimits {
    /// Longest spatial path enumerated.
    pub max_path_len: usize,
    /// Most meeting times tolerated on one edge inside `[0, t)`.
    pub max_points_per_edge: usize,
    /// Cap on elementary steps (search nodes plus counting operations).
    pub max_work: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self { max_path_len: 12, max_points_per_edge: 16, max_work: 100_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCount {
    pub count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<Vec<SpaceTimePath>>,
}

/// Called with each complete spatial path; returning `false` stops the search.
type Visitor<'v, O> = dyn FnMut(&mut O, &[Vertex], &[EdgeId]) -> Result<bool> + 'v;

struct Oracle<'a> {
    env: &'a EdgeEnvironment,
    t: f64,
    limits: OracleLimits,
    work: u64,
    count: u64,
    patterns: HashMap<EdgeId, Vec<f64>>,
}

impl<'a> Oracle<'a> {
    fn new(env: &'a EdgeEnvironment, x: &[i64], y: &[i64], t: f64, limits: OracleLimits) -> Result<Self> {
        for v in [x, y] {
            if !env.region.contains(v) {
                return Err(Error::Domain(format!("vertex {v:?} is outside the region")));
            }
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("time {t} must be finite and non-negative")));
        }
        Ok(Self { env, t, limits, work: 0, count: 0, patterns: HashMap::new() })
    }

    fn tick(&mut self, n: u64) -> Result<()> {
        self.work += n;
        if self.work > self.limits.max_work {
            return Err(Error::Budget {
                reason: format!("more than {} steps", self.limits.max_work),
                lower_bound: self.count,
            });
        }
        Ok(())
    }

    fn pattern(&mut self, edge: EdgeId) -> Result<&[f64]> {
        if !self.patterns.contains_key(&edge) {
            let times = if self.t > 0.0 { self.env.edge_pattern(edge, 0.0, self.t)?.times } else { Vec::new() };
            if times.len() > self.limits.max_points_per_edge {
                return Err(Error::Budget {
                    reason: format!(
                        "edge carries {} meeting times, more than {}",
                        times.len(),
                        self.limits.max_points_per_edge
                    ),
                    lower_bound: self.count,
                });
            }
            self.patterns.insert(edge, times);
        }
        Ok(&self.patterns[&edge])
    }

    /// Calls `visit` with the vertex and edge sequence of every self-avoiding
    /// path from `x` to `y` with at most `max_path_len` edges.
    fn spatial_paths(
        &mut self,
        x: &[i64],
        y: &[i64],
        visit: &mut Visitor<'_, Self>,
    ) -> Result<()> {
        let mut verts = vec![x.to_vec()];
        let mut edges = Vec::new();
        let mut on_path: HashSet<Vertex> = HashSet::from([x.to_vec()]);
        self.dfs(y, &mut verts, &mut edges, &mut on_path, visit)?;
        Ok(())
    }

    /// Returns `false` once the visitor asks to stop.
    fn dfs(
        &mut self,
        y: &[i64],
        verts: &mut Vec<Vertex>,
        edges: &mut Vec<EdgeId>,
        on_path: &mut HashSet<Vertex>,
        visit: &mut Visitor<'_, Self>,
    ) -> Result<bool> {
        self.tick(1)?;
        let cur = verts.last().expect("non-empty").clone();
        if cur.as_slice() == y {
            return visit(self, verts, edges);
        }
        let left = self.limits.max_path_len - edges.len();
        let dist: i64 = cur.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
        if dist as usize > left {
            return Ok(true);
        }
        for axis in 0..cur.len() {
            for step in [-1i64, 1] {
                let mut w = cur.clone();
                w[axis] += step;
                if !self.env.region.contains(&w) || on_path.contains(&w) {
                    continue;
                }
                let lower = if step < 0 { &w } else { &cur };
                edges.push(edge_id(lower, axis));
                on_path.insert(w.clone());
                verts.push(w.clone());
                let go_on = self.dfs(y, verts, edges, on_path, visit)?;
                verts.pop();
                on_path.remove(&w);
                edges.pop();
                if !go_on {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Number of non-decreasing meeting-time assignments along `edges`.
    fn count_assignments(&mut self, edges: &[EdgeId]) -> Result<u64> {
        let mut prev: Vec<(f64, u64)> = vec![(f64::NEG_INFINITY, 1)];
        for &e in edges {
            let pts = self.pattern(e)?.to_vec();
            self.tick((pts.len() + prev.len()) as u64)?;
            let mut next = Vec::with_capacity(pts.len());
            let (mut i, mut acc) = (0usize, 0u64);
            for p in pts {
                while i < prev.len() && prev[i].0 <= p {
                    acc = acc.checked_add(prev[i].1).ok_or_else(|| self.overflow())?;
                    i += 1;
                }
                next.push((p, acc));
            }
            prev = next;
        }
        prev.iter().try_fold(0u64, |s, &(_, c)| s.checked_add(c)).ok_or_else(|| self.overflow())
    }

    fn overflow(&self) -> Error {
        Error::Budget { reason: "count overflows u64".into(), lower_bound: self.count }
    }

    fn enumerate_assignments(
        &mut self,
        verts: &[Vertex],
        edges: &[EdgeId],
        chosen: &mut Vec<f64>,
        out: &mut Vec<SpaceTimePath>,
    ) -> Result<()> {
        self.tick(1)?;
        let i = chosen.len();
        if i == edges.len() {
            out.push(SpaceTimePath { vertices: verts.to_vec(), times: chosen.clone() });
            return Ok(());
        }
        let floor = chosen.last().copied().unwrap_or(f64::NEG_INFINITY);
        let pts = self.pattern(edges[i])?.to_vec();
        for p in pts.into_iter().filter(|&p| p >= floor) {
            chosen.push(p);
            self.enumerate_assignments(verts, edges, chosen, out)?;
            chosen.pop();
        }
        Ok(())
    }
}

/// Number of permitted paths from `x` to `y` before time `t`; the empty path
/// counts once when `x == y`.
pub fn count_paths(env: &EdgeEnvironment, x: &[i64], y: &[i64], t: f64, limits: &OracleLimits) -> Result<PathCount> {
    count(env, x, y, t, limits, false)
}

/// Like [`count_paths`] but also lists every permitted path.
pub fn count_paths_with_witnesses(
    env: &EdgeEnvironment,
    x: &[i64],
    y: &[i64],
    t: f64,
    limits: &OracleLimits,
) -> Result<PathCount> {
    count(env, x, y, t, limits, true)
}

fn count(
    env: &EdgeEnvironment,
    x: &[i64],
    y: &[i64],
    t: f64,
    limits: &OracleLimits,
    witnesses: bool,
) -> Result<PathCount> {
    let mut oracle = Oracle::new(env, x, y, t, *limits)?;
    if x == y {
        let w = witnesses.then(|| vec![SpaceTimePath { vertices: vec![x.to_vec()], times: vec![] }]);
        return Ok(PathCount { count: 1, witnesses: w });
    }
    let mut found = Vec::new();
    oracle.spatial_paths(x, y, &mut |o, verts, edges| {
        let c = o.count_assignments(edges)?;
        o.count = o.count.checked_add(c).ok_or_else(|| o.overflow())?;
        if witnesses && c > 0 {
            o.enumerate_assignments(verts, edges, &mut Vec::new(), &mut found)?;
        }
        Ok(true)
    })?;
    Ok(PathCount { count: oracle.count, witnesses: witnesses.then_some(found) })
}

/// True iff at least one permitted path from `x` to `y` exists before `t`.
pub fn reach_indicator(env: &EdgeEnvironment, x: &[i64], y: &[i64], t: f64, limits: &OracleLimits) -> Result<bool> {
    if x == y {
        Oracle::new(env, x, y, t, *limits)?;
        return Ok(true);
    }
    let mut oracle = Oracle::new(env, x, y, t, *limits)?;
    let mut reached = false;
    oracle.spatial_paths(x, y, &mut |o, _, edges| {
        // Greedy earliest arrival decides whether any assignment exists.
        let mut now = 0.0;
        for &e in edges {
            o.tick(1)?;
            match o.pattern(e)?.iter().find(|&&p| p >= now) {
                Some(&p) => now = p,
                None => return Ok(true),
            }
        }
        reached = true;
        Ok(false)
    })?;
    Ok(reached)
}

/// `sum over spatial paths of sum over (B_1..B_k) in J_k(n) of min_j X_{e_j}(B_j)`,
/// where `J_k(n)` are the non-decreasing `k`-tuples of the cells
/// `[(j-1)t/n, jt/n)`, `j = 1..=n`. Paths with more than `n` edges contribute 0.
pub fn count_paths_discretized(
    env: &EdgeEnvironment,
    x: &[i64],
    y: &[i64],
    t: f64,
    n: u64,
    limits: &OracleLimits,
) -> Result<u64> {
    if n == 0 {
        return Err(Error::Domain("subdivision count must be positive".into()));
    }
    let mut oracle = Oracle::new(env, x, y, t, *limits)?;
    if x == y {
        return Ok(1);
    }
    oracle.spatial_paths(x, y, &mut |o, _, edges| {
        if edges.len() as u64 > n {
            return Ok(true);
        }
        let mut cells = Vec::with_capacity(edges.len());
        for &e in edges {
            let pts = o.pattern(e)?.to_vec();
            cells.push(cell_counts(&pts, t, n));
        }
        let c = min_sum(&cells, o)?;
        o.count = o.count.checked_add(c).ok_or_else(|| o.overflow())?;
        Ok(true)
    })?;
    Ok(oracle.count)
}

/// Occupied cells `(index, count)` in increasing index order.
fn cell_counts(points: &[f64], t: f64, n: u64) -> Vec<(u64, u64)> {
    let mut out: Vec<(u64, u64)> = Vec::new();
    for &p in points {
        let j = ((p / t * n as f64).floor() as u64).min(n - 1);
        match out.last_mut() {
            Some((k, c)) if *k == j => *c += 1,
            _ => out.push((j, 1)),
        }
    }
    out
}

/// `sum over non-decreasing (j_1..j_k) of min_i c_i(j_i)`, computed as
/// `sum_{m >= 1} #{tuples with c_i(j_i) >= m for all i}`.
fn min_sum(cells: &[Vec<(u64, u64)>], o: &mut Oracle) -> Result<u64> {
    let top = cells.iter().map(|c| c.iter().map(|&(_, k)| k).max().unwrap_or(0)).min().unwrap_or(0);
    let mut total = 0u64;
    for m in 1..=top {
        let mut prev: Vec<(u64, u64)> = vec![(0, 1)];
        for edge in cells {
            o.tick((edge.len() + prev.len()) as u64)?;
            let mut next = Vec::new();
            let (mut i, mut acc) = (0usize, 0u64);
            for &(j, _) in edge.iter().filter(|&&(_, c)| c >= m) {
                while i < prev.len() && prev[i].0 <= j {
                    acc = acc.checked_add(prev[i].1).ok_or_else(|| o.overflow())?;
                    i += 1;
                }
                next.push((j, acc));
            }
            prev = next;
        }
        for &(_, c) in &prev {
            total = total.checked_add(c).ok_or_else(|| o.overflow())?;
        }
    }
    Ok(total)
}

/// Smallest positive gap between distinct meeting times in `[0, t)` over all
/// edges of the enumerated spatial paths; `None` with fewer than two distinct
/// times. Taken over the union of edges so that a cell never separates two
/// different times of consecutive edges.
pub fn minimal_gap(env: &EdgeEnvironment, x: &[i64], y: &[i64], t: f64, limits: &OracleLimits) -> Result<Option<f64>> {
    let mut oracle = Oracle::new(env, x, y, t, *limits)?;
    let mut used: HashSet<EdgeId> = HashSet::new();
    oracle.spatial_paths(x, y, &mut |_, _, edges| {
        used.extend(edges.iter().copied());
        Ok(true)
    })?;
    let mut all = Vec::new();
    for e in used {
        all.extend_from_slice(oracle.pattern(e)?);
    }
    all.sort_by(f64::total_cmp);
    all.dedup();
    Ok(all.windows(2).map(|w| w[1] - w[0]).min_by(f64::total_cmp))
}

/// Smallest subdivision count from which the discretized sum is exact:
/// cell width below the minimal gap and at least the longest path length.
pub fn exact_subdivision(env: &EdgeEnvironment, x: &[i64], y: &[i64], t: f64, limits: &OracleLimits) -> Result<u64> {
    let k = limits.max_path_len as u64;
    Ok(match minimal_gap(env, x, y, t, limits)? {
        Some(kappa) => ((t / kappa).floor() as u64 + 1).max(k),
        None => k.max(1),
    })
}
