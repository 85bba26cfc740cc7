//! Intervals and finite unions of intervals on the time axis.
//!
//! Intervals serialize as strings in the usual bracket notation:
//! `"[0,1)"`, `"(0,1)"`, `"[-0.5,0.5]"`, and `"{0}"` for a single point.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: true }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: false, hi_closed: false }
    }

    pub fn half_open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: false }
    }

    pub fn point(x: f64) -> Self {
        Self::closed(x, x)
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        if self.is_empty() || other.is_empty() {
            return false;
        }
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if lo < hi {
            return true;
        }
        lo == hi && self.contains(lo) && other.contains(lo)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lo == self.hi && self.lo_closed && self.hi_closed {
            return write!(f, "{{{}}}", self.lo);
        }
        write!(
            f,
            "{}{},{}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

impl FromStr for Interval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("malformed interval {s:?}"));
        if let Some(inner) = s.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
            let x: f64 = inner.trim().parse().map_err(|_| bad())?;
            return Ok(Interval::point(x));
        }
        let lo_closed = match s.chars().next() {
            Some('[') => true,
            Some('(') => false,
            _ => return Err(bad()),
        };
        let hi_closed = match s.chars().last() {
            Some(']') => true,
            Some(')') => false,
            _ => return Err(bad()),
        };
        let body = &s[1..s.len() - 1];
        let (lo, hi) = body.split_once(',').ok_or_else(bad)?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(bad());
        }
        Ok(Interval { lo, hi, lo_closed, hi_closed })
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A finite union of intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BorelSet(pub Vec<Interval>);

impl BorelSet {
    pub fn single(iv: Interval) -> Self {
        Self(vec![iv])
    }

    pub fn contains(&self, x: f64) -> bool {
        self.0.iter().any(|iv| iv.contains(x))
    }

    pub fn is_bounded(&self) -> bool {
        self.0.iter().all(Interval::is_bounded)
    }

    pub fn overlaps(&self, other: &BorelSet) -> bool {
        self.0.iter().any(|a| other.0.iter().any(|b| a.overlaps(b)))
    }

    /// Smallest half-open window `[lo, hi)` covering the set.
    pub fn hull_window(&self) -> Option<(f64, f64)> {
        let lo = self.0.iter().map(|iv| iv.lo).fold(f64::INFINITY, f64::min);
        let hi = self.0.iter().map(|iv| iv.hi).fold(f64::NEG_INFINITY, f64::max);
        (lo <= hi).then(|| (lo, hi.next_up()))
    }

    /// Number of the given sorted times lying in the set.
    pub fn count(&self, times: &[f64]) -> usize {
        times.iter().filter(|&&x| self.contains(x)).count()
    }
}

impl fmt::Display for BorelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join("∪"))
    }
}

/// Checks that the sets of a collection are pairwise disjoint.
pub fn check_disjoint(sets: &[BorelSet]) -> Result<()> {
    for (i, a) in sets.iter().enumerate() {
        if !a.is_bounded() {
            return Err(Error::Domain(format!("set {a} is unbounded")));
        }
        for b in &sets[i + 1..] {
            if a.overlaps(b) {
                return Err(Error::Disjointness(format!("{a} and {b} intersect")));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        for s in ["[0,1)", "(0,1)", "[-0.5,0.5]", "{0}", "(0.5,1]"] {
            let iv: Interval = s.parse().unwrap();
            assert_eq!(iv.to_string(), s);
        }
        assert!("0,1".parse::<Interval>().is_err());
        assert!("[2,1]".parse::<Interval>().is_err());
    }

    #[test]
    fn membership_respects_endpoints() {
        let open: Interval = "(0,1)".parse().unwrap();
        assert!(!open.contains(0.0) && !open.contains(1.0) && open.contains(0.5));
        let point = Interval::point(0.0);
        assert!(point.contains(0.0) && !point.contains(1e-300));
    }

    #[test]
    fn disjointness() {
        let a = BorelSet::single(Interval::point(0.0));
        let b = BorelSet::single(Interval::open(0.0, 1.0));
        let c = BorelSet::single(Interval::half_open(0.0, 1.0));
        assert!(check_disjoint(&[a.clone(), b]).is_ok());
        assert!(matches!(check_disjoint(&[a, c]), Err(Error::Disjointness(_))));
    }
}
