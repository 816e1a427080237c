//! Experiment measurements: rank correlation, point-removal curves,
//! small-coalition noise profiles, and method comparison reports.

mod compare;
mod profile;
mod removal;
mod spearman;

pub use compare::{compare_methods, label, ComparisonReport, ComparisonRow};
pub use profile::{stability_profile, summarize_layer, LayerProfile, StabilityProfile};
pub use removal::{removal_curve, removal_curves, removal_order, Direction, RemovalCurve};
pub use spearman::{average_ranks, spearman};
