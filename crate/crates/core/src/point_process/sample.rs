use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point_process::ProcessSpec;
use crate::rng::{self, EDGE_LEVEL};

/// Identifier of a lattice edge; also the key of its randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId(pub u64);

/// The randomness of one edge in one environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeKey {
    pub seed: u64,
    pub edge: EdgeId,
}

impl EdgeKey {
    pub fn new(seed: u64, edge: EdgeId) -> Self {
        Self { seed, edge }
    }

    fn stream(&self, level: u32, tag: Tag, cell: i64) -> rand_chacha::ChaCha8Rng {
        let slot = ((level as u64) << 8) | tag as u64;
        rng::stream(self.seed, self.edge.0, slot, cell)
    }

    fn uniform(&self, level: u32, tag: Tag, cell: i64) -> f64 {
        self.stream(level, tag, cell).random()
    }
}

#[derive(Clone, Copy)]
#[repr(u8)]
enum Tag {
    LatticeShift = 1,
    CellUniform = 2,
    CommonShift = 3,
    PoissonCell = 4,
    InhomCell = 5,
    Thinning = 6,
    Emptiness = 7,
}

/// Meeting times of one edge on a half-open window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPattern {
    pub window: (f64, f64),
    pub times: Vec<f64>,
}

impl PointPattern {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Checks the sortedness and containment invariants.
    pub fn is_well_formed(&self) -> bool {
        let (w0, w1) = self.window;
        self.times.windows(2).all(|w| w[0] < w[1]) && self.times.iter().all(|&t| t >= w0 && t < w1)
    }

    /// First time `>= s`, if inside this window.
    pub fn first_at_or_after(&self, s: f64) -> Option<f64> {
        let i = self.times.partition_point(|&t| t < s);
        self.times.get(i).copied()
    }

    /// Number of times in `[lo, hi)`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        let a = self.times.partition_point(|&t| t < lo);
        let b = self.times.partition_point(|&t| t < hi);
        b.saturating_sub(a)
    }
}

/// Realization of `spec` on `[w0, w1)` for one edge.
///
/// Deterministic in `(seed, edge)`; patterns of adjacent windows concatenate
/// to the pattern of their union exactly.
pub fn sample_pattern(spec: &ProcessSpec, seed: u64, edge: EdgeId, w0: f64, w1: f64) -> Result<PointPattern> {
    if !(w0.is_finite() && w1.is_finite()) || w0 >= w1 {
        return Err(Error::InvalidWindow(w0, w1));
    }
    let mut times = Vec::new();
    sample_window(spec, &EdgeKey::new(seed, edge), w0, w1, &mut times);
    Ok(PointPattern { window: (w0, w1), times })
}

/// Appends the sorted, de-duplicated points of `spec` in `[lo, hi)` to `out`.
pub(crate) fn sample_window(spec: &ProcessSpec, key: &EdgeKey, lo: f64, hi: f64, out: &mut Vec<f64>) {
    let start = out.len();
    push_points(spec, key, lo, hi, out);
    let tail = &mut out[start..];
    if !tail.windows(2).all(|w| w[0] < w[1]) {
        tail.sort_by(f64::total_cmp);
        let mut uniq: Vec<f64> = Vec::with_capacity(tail.len());
        for &x in tail.iter() {
            if uniq.last() != Some(&x) {
                uniq.push(x);
            }
        }
        out.truncate(start);
        out.extend(uniq);
    }
}

fn cell_range(lo: f64, hi: f64) -> std::ops::RangeInclusive<i64> {
    (lo.floor() as i64)..=(hi.floor() as i64)
}

fn push_points(spec: &ProcessSpec, key: &EdgeKey, lo: f64, hi: f64, out: &mut Vec<f64>) {
    if lo >= hi {
        return;
    }
    let level = spec.level();
    let keep = |x: f64| x >= lo && x < hi;
    match spec {
        ProcessSpec::Lattice => {
            for z in cell_range(lo, hi) {
                let x = z as f64;
                if keep(x) {
                    out.push(x);
                }
            }
        }
        ProcessSpec::StationarizedLattice => {
            let u = key.uniform(level, Tag::LatticeShift, EDGE_LEVEL);
            for z in (lo.floor() as i64 - 1)..=(hi.floor() as i64) {
                let x = z as f64 + u;
                if keep(x) {
                    out.push(x);
                }
            }
        }
        ProcessSpec::PerturbedLattice => {
            for z in cell_range(lo, hi) {
                let x = z as f64 + key.uniform(level, Tag::CellUniform, z);
                if keep(x) {
                    out.push(x);
                }
            }
        }
        ProcessSpec::StationarizedPerturbedLattice => {
            let shift = key.uniform(level, Tag::CommonShift, EDGE_LEVEL);
            for z in (lo.floor() as i64 - 1)..=(hi.floor() as i64) {
                let x = (z as f64 + key.uniform(level, Tag::CellUniform, z)) + shift;
                if keep(x) {
                    out.push(x);
                }
            }
        }
        ProcessSpec::Poisson { rate } => {
            let count = Poisson::new(*rate).expect("validated rate");
            let mut cell = Vec::new();
            for z in cell_range(lo, hi) {
                let mut rng = key.stream(level, Tag::PoissonCell, z);
                let n = count.sample(&mut rng) as usize;
                cell.clear();
                cell.extend((0..n).map(|_| z as f64 + rng.random::<f64>()));
                cell.sort_by(f64::total_cmp);
                out.extend(cell.iter().copied().filter(|&x| keep(x)));
            }
        }
        ProcessSpec::InhomPoisson { intensity } => {
            let bound = intensity.bound();
            let count = Poisson::new(bound).expect("positive bound");
            let mut cell = Vec::new();
            for z in cell_range(lo, hi).filter(|&z| z >= 0) {
                let mut rng = key.stream(level, Tag::InhomCell, z);
                let n = count.sample(&mut rng) as usize;
                cell.clear();
                for _ in 0..n {
                    let x = z as f64 + rng.random::<f64>();
                    let accept: f64 = rng.random();
                    if accept * bound < intensity.value(x) {
                        cell.push(x);
                    }
                }
                cell.sort_by(f64::total_cmp);
                out.extend(cell.iter().copied().filter(|&x| keep(x)));
            }
        }
        ProcessSpec::Thinned { base, keep_prob } => {
            if *keep_prob == 0.0 {
                return;
            }
            let mut cell = Vec::new();
            for z in cell_range(lo, hi) {
                cell.clear();
                sample_window(base, key, z as f64, (z + 1) as f64, &mut cell);
                let mut rng = key.stream(level, Tag::Thinning, z);
                for &x in &cell {
                    let u: f64 = rng.random();
                    if u < *keep_prob && keep(x) {
                        out.push(x);
                    }
                }
            }
        }
        ProcessSpec::Shifted { base, offsets } => {
            let mut tmp = Vec::new();
            for &o in offsets {
                tmp.clear();
                let blo = (lo - o).floor() - 1.0;
                let bhi = (hi - o).ceil() + 1.0;
                sample_window(base, key, blo, bhi, &mut tmp);
                out.extend(tmp.iter().map(|&x| x + o).filter(|&x| keep(x)));
            }
        }
        ProcessSpec::Scaled { base, factor } => {
            let mut tmp = Vec::new();
            let blo = (lo / factor).floor() - 1.0;
            let bhi = (hi / factor).ceil() + 1.0;
            sample_window(base, key, blo, bhi, &mut tmp);
            out.extend(tmp.iter().map(|&x| x * factor).filter(|&x| keep(x)));
        }
        ProcessSpec::EmptyMixture { base, empty_prob } => {
            if key.uniform(level, Tag::Emptiness, EDGE_LEVEL) < *empty_prob {
                return;
            }
            push_points(base, key, lo, hi, out);
        }
    }
}

/// Whether this edge's whole pattern is empty, as decided by edge-level draws.
pub fn edge_is_empty(spec: &ProcessSpec, key: &EdgeKey) -> bool {
    match spec {
        ProcessSpec::Thinned { keep_prob, .. } if *keep_prob == 0.0 => true,
        ProcessSpec::EmptyMixture { base, empty_prob } => {
            key.uniform(spec.level(), Tag::Emptiness, EDGE_LEVEL) < *empty_prob || edge_is_empty(base, key)
        }
        _ => spec.base().is_some_and(|b| edge_is_empty(b, key)),
    }
}

/// Longest stretch of time searched for a next meeting before giving up.
pub const MAX_SEARCH_SPAN: f64 = 1.0e7;

/// First meeting time `>= s` and `< limit`.
///
/// Returns `None` if the edge is decidably empty, if no meeting precedes
/// `limit`, or if none is found within [`MAX_SEARCH_SPAN`].
pub fn next_meeting(spec: &ProcessSpec, key: &EdgeKey, s: f64, limit: Option<f64>) -> Option<f64> {
    if edge_is_empty(spec, key) {
        return None;
    }
    let mut buf = Vec::new();
    let mut lo = s;
    let mut hi = s.floor() + 1.0;
    let mut width = 1.0f64;
    while lo - s < MAX_SEARCH_SPAN {
        if let Some(l) = limit {
            if lo >= l {
                return None;
            }
            hi = hi.min(l);
        }
        buf.clear();
        sample_window(spec, key, lo, hi, &mut buf);
        if let Some(&x) = buf.first() {
            return Some(x);
        }
        lo = hi;
        width = (width * 2.0).min(64.0);
        hi = lo + width;
    }
    None
}
