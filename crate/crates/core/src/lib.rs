//! Numerical wave front set estimation.
//!
//! A point `(x₀, ξ₀)` is declared regular when, for a bump window `χ`, a
//! cone `Γ` around `ξ₀` and a neighbourhood `K` of `x₀`, the cone-restricted
//! weighted norms of `ξ ↦ V_χ f(x, ξ)` stay bounded uniformly in `x ∈ K`.
//! Boundedness is judged from the tail of a dyadic radius schedule.

mod error;
mod params;

pub mod detector;
pub mod geometry;
pub mod norms;
pub mod signals;
pub mod stft;
pub mod weights;

pub use error::{Error, Result};
pub use geometry::{cone_indicator, direction_grid, shrink_margin, Cone, DirectionGrid};
pub use norms::{
    backend_norm, membership_score, weight_growth, Backend, Decision, DecisionRule, MembershipScore,
    Schedule, ScheduleSpec, Weight,
};
pub use signals::{analytic_wavefront, load_field, save_field, synth, AnalyticSignal, GridSpec, SampledField};
pub use stft::{bump_window, closed_form_stft, compute_stft, FreqGrid, STFTVolume, Window, WindowSpec};
pub use weights::{
    associated_function, gevrey_sequence, ultra_weight, verify_conditions, AssociatedFunction, ConditionReport,
    WeightSequence,
};
