use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declarative description of a simple point process on the time axis.
///
/// Serializes as `{"kind": "...", ...}`; derived kinds nest their `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessSpec {
    /// The integers.
    Lattice,
    /// `Z + U` with one uniform `U` per edge.
    StationarizedLattice,
    /// `{z + U_z}` with independent uniforms per unit cell.
    PerturbedLattice,
    /// Perturbed lattice plus one common uniform shift per edge.
    StationarizedPerturbedLattice,
    /// Homogeneous Poisson process.
    Poisson { rate: f64 },
    /// Inhomogeneous Poisson process with a registered intensity.
    InhomPoisson { intensity: IntensityId },
    /// Independent thinning: each point kept with probability `keep_prob`.
    Thinned { base: Box<ProcessSpec>, keep_prob: f64 },
    /// Union of translated copies of one realization of `base`.
    Shifted { base: Box<ProcessSpec>, offsets: Vec<f64> },
    /// All points multiplied by `factor`.
    Scaled { base: Box<ProcessSpec>, factor: f64 },
    /// With probability `empty_prob` the whole edge pattern is empty.
    EmptyMixture { base: Box<ProcessSpec>, empty_prob: f64 },
}

/// Registered intensity functions for [`ProcessSpec::InhomPoisson`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityId {
    /// `1 + 1/|1 + x|` on `x >= 0`, zero on negative times.
    OnePlusInverseShift,
}

impl IntensityId {
    pub fn value(self, x: f64) -> f64 {
        match self {
            IntensityId::OnePlusInverseShift => {
                if x < 0.0 {
                    0.0
                } else {
                    1.0 + 1.0 / (1.0 + x).abs()
                }
            }
        }
    }

    /// Upper bound of the intensity, used as the dominating rate for thinning.
    pub fn bound(self) -> f64 {
        match self {
            IntensityId::OnePlusInverseShift => 2.0,
        }
    }

    /// Integrated intensity over `[lo, hi]`.
    pub fn integral(self, lo: f64, hi: f64) -> f64 {
        match self {
            IntensityId::OnePlusInverseShift => {
                let lo = lo.max(0.0);
                if hi <= lo {
                    return 0.0;
                }
                (hi - lo) + ((1.0 + hi) / (1.0 + lo)).ln()
            }
        }
    }

    /// Limit of the intensity at large times, if any.
    pub fn asymptotic_rate(self) -> Option<f64> {
        match self {
            IntensityId::OnePlusInverseShift => Some(1.0),
        }
    }
}

/// Translation invariance of a specification's law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Symmetry {
    /// Law invariant under every real shift.
    pub real: bool,
    /// Smallest known period of the law, if periodic.
    pub period: Option<f64>,
    /// Law converges to a stationary one at large times.
    pub asymptotic: bool,
}

impl Symmetry {
    pub fn is_integer_stationary(&self) -> bool {
        if self.real {
            return true;
        }
        match self.period {
            Some(p) if p > 0.0 => {
                let k = (1.0 / p).round();
                k >= 1.0 && ((1.0 / p) - k).abs() < 1e-9
            }
            _ => false,
        }
    }
}

impl ProcessSpec {
    pub fn lattice() -> Self {
        ProcessSpec::Lattice
    }

    pub fn stationarized_lattice() -> Self {
        ProcessSpec::StationarizedLattice
    }

    pub fn perturbed_lattice() -> Self {
        ProcessSpec::PerturbedLattice
    }

    pub fn stationarized_perturbed_lattice() -> Self {
        ProcessSpec::StationarizedPerturbedLattice
    }

    pub fn poisson(rate: f64) -> Self {
        ProcessSpec::Poisson { rate }
    }

    pub fn inhom_poisson(intensity: IntensityId) -> Self {
        ProcessSpec::InhomPoisson { intensity }
    }

    pub fn thinned(base: ProcessSpec, keep_prob: f64) -> Self {
        ProcessSpec::Thinned { base: Box::new(base), keep_prob }
    }

    pub fn shifted(base: ProcessSpec, offsets: Vec<f64>) -> Self {
        ProcessSpec::Shifted { base: Box::new(base), offsets }
    }

    pub fn scaled(base: ProcessSpec, factor: f64) -> Self {
        ProcessSpec::Scaled { base: Box::new(base), factor }
    }

    pub fn empty_mixture(base: ProcessSpec, empty_prob: f64) -> Self {
        ProcessSpec::EmptyMixture { base: Box::new(base), empty_prob }
    }

    pub fn base(&self) -> Option<&ProcessSpec> {
        match self {
            ProcessSpec::Thinned { base, .. }
            | ProcessSpec::Shifted { base, .. }
            | ProcessSpec::Scaled { base, .. }
            | ProcessSpec::EmptyMixture { base, .. } => Some(base),
            _ => None,
        }
    }

    /// Distance from the innermost primitive. Random draws are keyed by level,
    /// so wrapping a spec never changes the randomness of its inner layers.
    pub fn level(&self) -> u32 {
        self.base().map_or(0, |b| 1 + b.level())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        match self {
            ProcessSpec::Poisson { rate } if !(rate.is_finite() && *rate > 0.0) => {
                bad(format!("poisson rate must be positive and finite, got {rate}"))
            }
            ProcessSpec::Thinned { keep_prob, .. } if !(0.0..=1.0).contains(keep_prob) => {
                bad(format!("keep_prob must lie in [0,1], got {keep_prob}"))
            }
            ProcessSpec::Shifted { offsets, .. } if offsets.is_empty() => {
                bad("shifted needs at least one offset".into())
            }
            ProcessSpec::Shifted { offsets, .. } if offsets.iter().any(|o| !o.is_finite()) => {
                bad("offsets must be finite".into())
            }
            ProcessSpec::Scaled { factor, .. } if !(factor.is_finite() && *factor > 0.0) => {
                bad(format!("scale factor must be positive and finite, got {factor}"))
            }
            ProcessSpec::EmptyMixture { empty_prob, .. } if !(0.0..=1.0).contains(empty_prob) => {
                bad(format!("empty_prob must lie in [0,1], got {empty_prob}"))
            }
            _ => self.base().map_or(Ok(()), ProcessSpec::validate),
        }
    }

    pub fn symmetry(&self) -> Symmetry {
        let periodic = |p| Symmetry { real: false, period: Some(p), asymptotic: false };
        let real = Symmetry { real: true, period: None, asymptotic: false };
        match self {
            ProcessSpec::Lattice | ProcessSpec::PerturbedLattice => periodic(1.0),
            ProcessSpec::StationarizedLattice
            | ProcessSpec::StationarizedPerturbedLattice
            | ProcessSpec::Poisson { .. } => real,
            ProcessSpec::InhomPoisson { intensity } => {
                Symmetry { real: false, period: None, asymptotic: intensity.asymptotic_rate().is_some() }
            }
            ProcessSpec::Scaled { base, factor } => {
                let s = base.symmetry();
                Symmetry { period: s.period.map(|p| p * factor), ..s }
            }
            ProcessSpec::Thinned { base, .. }
            | ProcessSpec::Shifted { base, .. }
            | ProcessSpec::EmptyMixture { base, .. } => base.symmetry(),
        }
    }

    pub fn is_integer_stationary(&self) -> bool {
        self.symmetry().is_integer_stationary()
    }

    pub fn is_real_stationary(&self) -> bool {
        self.symmetry().real
    }

    /// `P(X = ∅)` for one edge.
    pub fn empty_prob(&self) -> f64 {
        match self {
            ProcessSpec::Thinned { keep_prob, .. } if *keep_prob == 0.0 => 1.0,
            ProcessSpec::EmptyMixture { base, empty_prob } => empty_prob + (1.0 - empty_prob) * base.empty_prob(),
            _ => self.base().map_or(0.0, ProcessSpec::empty_prob),
        }
    }

    /// `sup_x P(x ∈ X)`.
    ///
    /// Exact for every shipped construction except translated copies of
    /// atomic bases other than (thinned) lattices, where the base's value is
    /// returned as a lower bound.
    pub fn atom_mass(&self) -> f64 {
        match self {
            ProcessSpec::Lattice => 1.0,
            ProcessSpec::StationarizedLattice
            | ProcessSpec::PerturbedLattice
            | ProcessSpec::StationarizedPerturbedLattice
            | ProcessSpec::Poisson { .. }
            | ProcessSpec::InhomPoisson { .. } => 0.0,
            ProcessSpec::Thinned { base, keep_prob } => keep_prob * base.atom_mass(),
            ProcessSpec::Scaled { base, .. } => base.atom_mass(),
            ProcessSpec::EmptyMixture { base, empty_prob } => (1.0 - empty_prob) * base.atom_mass(),
            ProcessSpec::Shifted { base, offsets } => {
                let m = base.atom_mass();
                if m == 0.0 {
                    return 0.0;
                }
                let keep = match base.as_ref() {
                    ProcessSpec::Lattice => 1.0,
                    ProcessSpec::Thinned { base: inner, keep_prob } if **inner == ProcessSpec::Lattice => *keep_prob,
                    _ => return m,
                };
                // Offsets with equal fractional parts stack on the same atoms.
                let mut fracs: Vec<f64> = offsets.iter().map(|o| o.rem_euclid(1.0)).collect();
                fracs.sort_by(f64::total_cmp);
                let mut best = 0usize;
                let mut i = 0;
                while i < fracs.len() {
                    let j = fracs[i..].iter().take_while(|&&f| f == fracs[i]).count();
                    best = best.max(j);
                    i += j;
                }
                1.0 - (1.0 - keep).powi(best as i32)
            }
        }
    }

    pub fn is_atomless(&self) -> bool {
        self.atom_mass() == 0.0
    }

    /// True if an edge's emptiness can be read off its edge-level draws,
    /// which is how the engine recognises a stalled front.
    pub fn emptiness_decidable(&self) -> bool {
        match self {
            ProcessSpec::EmptyMixture { .. } => true,
            ProcessSpec::Thinned { keep_prob, .. } if *keep_prob == 0.0 => true,
            _ => self.base().is_some_and(ProcessSpec::emptiness_decidable),
        }
    }

    /// Points have a deterministic upper bound on void lengths: every closed
    /// window of at least this length contains a point almost surely.
    pub fn void_support(&self) -> Option<f64> {
        match self {
            ProcessSpec::Lattice | ProcessSpec::StationarizedLattice => Some(1.0),
            ProcessSpec::PerturbedLattice | ProcessSpec::StationarizedPerturbedLattice => Some(2.0),
            ProcessSpec::Scaled { base, factor } => base.void_support().map(|s| s * factor),
            ProcessSpec::Shifted { base, .. } => base.void_support(),
            ProcessSpec::Thinned { base, keep_prob } if *keep_prob == 1.0 => base.void_support(),
            ProcessSpec::EmptyMixture { base, empty_prob } if *empty_prob == 0.0 => base.void_support(),
            _ => None,
        }
    }

    /// Restrictions of the process to disjoint unit cells are independent.
    pub fn cell_independent(&self) -> bool {
        match self {
            ProcessSpec::Lattice
            | ProcessSpec::PerturbedLattice
            | ProcessSpec::Poisson { .. }
            | ProcessSpec::InhomPoisson { .. } => true,
            ProcessSpec::Thinned { base, .. } => base.cell_independent(),
            _ => false,
        }
    }
}

impl fmt::Display for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessSpec::Lattice => write!(f, "L"),
            ProcessSpec::StationarizedLattice => write!(f, "SL"),
            ProcessSpec::PerturbedLattice => write!(f, "PL"),
            ProcessSpec::StationarizedPerturbedLattice => write!(f, "SPL"),
            ProcessSpec::Poisson { rate } => write!(f, "Poi({rate})"),
            ProcessSpec::InhomPoisson { intensity } => match intensity {
                IntensityId::OnePlusInverseShift => write!(f, "InhomPoi(1+1/|1+x|)"),
            },
            ProcessSpec::Thinned { base, keep_prob } => write!(f, "Thin({base},{keep_prob})"),
            ProcessSpec::Shifted { base, offsets } => {
                let offs: Vec<String> = offsets.iter().map(ToString::to_string).collect();
                write!(f, "Shift({base},{{{}}})", offs.join(","))
            }
            ProcessSpec::Scaled { base, factor } => write!(f, "Scale({base},{factor})"),
            ProcessSpec::EmptyMixture { base, empty_prob } => {
                write!(f, "Empty({base},{empty_prob})")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_schema_roundtrip() {
        let spec = ProcessSpec::shifted(ProcessSpec::thinned(ProcessSpec::Lattice, 0.5), vec![0.0, 0.5]);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(
            json,
            r#"{"kind":"shifted","base":{"kind":"thinned","base":{"kind":"lattice"},"keep_prob":0.5},"offsets":[0.0,0.5]}"#
        );
        let back: ProcessSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        let inhom: ProcessSpec =
            serde_json::from_str(r#"{"kind":"inhom_poisson","intensity":"one_plus_inverse_shift"}"#).unwrap();
        assert_eq!(inhom, ProcessSpec::inhom_poisson(IntensityId::OnePlusInverseShift));
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(ProcessSpec::poisson(0.0).validate().is_err());
        assert!(ProcessSpec::thinned(ProcessSpec::Lattice, 1.5).validate().is_err());
        assert!(ProcessSpec::shifted(ProcessSpec::Lattice, vec![]).validate().is_err());
        assert!(ProcessSpec::scaled(ProcessSpec::Lattice, -1.0).validate().is_err());
        assert!(ProcessSpec::empty_mixture(ProcessSpec::poisson(-1.0), 0.1).validate().is_err());
        assert!(ProcessSpec::scaled(ProcessSpec::StationarizedLattice, 4.0).validate().is_ok());
    }

    #[test]
    fn stationarity_classes() {
        assert!(ProcessSpec::Lattice.is_integer_stationary());
        assert!(!ProcessSpec::Lattice.is_real_stationary());
        assert!(!ProcessSpec::PerturbedLattice.is_real_stationary());
        assert!(ProcessSpec::StationarizedPerturbedLattice.is_real_stationary());
        assert!(ProcessSpec::scaled(ProcessSpec::Lattice, 0.5).is_integer_stationary());
        assert!(!ProcessSpec::scaled(ProcessSpec::Lattice, 2.0).is_integer_stationary());
        assert!(!ProcessSpec::scaled(ProcessSpec::PerturbedLattice, 1.5).is_integer_stationary());
        let inhom = ProcessSpec::inhom_poisson(IntensityId::OnePlusInverseShift);
        assert!(!inhom.is_integer_stationary());
        assert!(inhom.symmetry().asymptotic);
    }

    #[test]
    fn atoms_and_emptiness() {
        assert_eq!(ProcessSpec::Lattice.atom_mass(), 1.0);
        assert_eq!(ProcessSpec::StationarizedLattice.atom_mass(), 0.0);
        let thin = ProcessSpec::thinned(ProcessSpec::Lattice, 0.5);
        assert_eq!(thin.atom_mass(), 0.5);
        assert_eq!(ProcessSpec::shifted(thin.clone(), vec![0.0, 0.5]).atom_mass(), 0.5);
        assert_eq!(ProcessSpec::shifted(thin, vec![0.0, 1.0]).atom_mass(), 0.75);
        let mix = ProcessSpec::empty_mixture(ProcessSpec::poisson(1.0), 0.3);
        assert_eq!(mix.empty_prob(), 0.3);
        assert!(mix.emptiness_decidable());
        assert_eq!(ProcessSpec::poisson(1.0).empty_prob(), 0.0);
    }

    #[test]
    fn levels_count_wrappers() {
        let s = ProcessSpec::shifted(ProcessSpec::thinned(ProcessSpec::Lattice, 0.5), vec![0.0]);
        assert_eq!(s.level(), 2);
        assert_eq!(s.base().unwrap().level(), 1);
    }
}
