//! Value estimators: the exact oracle, layer-stratified Shapley, δ-Shapley,
//! the permutation Monte Carlo baseline, and the sample-size bounds.

mod convergence;
mod delta;
mod exact;
mod layer;
mod monte_carlo;
mod result;
mod sample_size;
mod semivalue;
mod stratified;

pub use convergence::{relative_deviation, Budget, ConvergenceMonitor, ConvergenceRule};
pub use delta::{delta_shapley, DeltaConfig};
pub use exact::{exact_layer_averages, exact_shapley, exact_valuation, utility_table, MAX_EXACT_PLAYERS};
pub use layer::{layer_estimate, layer_exhaustive, MarginalMode};
pub use monte_carlo::monte_carlo_shapley;
pub use result::{read_values_csv, ConvergencePoint, LayerEstimate, Method, ValuationResult, ValueRow};
pub use sample_size::{
    epsilon_convex, h_hat, h_permutations, mk_convex_sgd, mk_hoeffding, mk_nonconvex_sgd, mk_strongly_convex,
    AccuracyTarget,
};
pub use semivalue::{band_presets, semivalue_weight_check, BandPreset, SemiValueSpec, WeightCheck};
pub use stratified::{stratified_shapley, SampleRule, StratifiedConfig};
