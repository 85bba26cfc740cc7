//! Point processes on the time axis: specifications, sampling and hitting
//! probabilities.

mod hitting;
mod sample;
mod spec;

pub use hitting::{
    fpp_transmission_cdf, has_closed_form, hitting_prob, hitting_prob_with, quantile, quantile_with, void_prob,
    void_prob_with, EmpiricalConfig, EmpiricalHitting, HittingForm, HittingFunction, Method, Probability,
};
pub use sample::{edge_is_empty, next_meeting, sample_pattern, EdgeId, EdgeKey, PointPattern, MAX_SEARCH_SPAN};
pub use spec::{IntensityId, ProcessSpec, Symmetry};

pub(crate) use hitting::analytic_hit;
