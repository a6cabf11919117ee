//! Optimal affine load-sharing in stochastic lossy transport networks.
//!
//! A network is a connected weighted graph whose nodes carry a nominal load
//! `μ` plus zero-mean fluctuations `ω` with covariance `Σ`. Controllable nodes
//! absorb the realized mismatch `1^T ω` in fixed proportions `α`
//! (`1^T α = 1`), and the transport loss of the resulting balanced profile
//! `p` is `½ p^T L+ p`.
//!
//! Modules:
//!
//! - [`graph`]: Laplacians, pseudoinverses, effective resistances and
//!   rank-one edge updates.
//! - [`stochastic`]: covariance models, nominal profiles and sampling.
//! - [`loss`]: realized and expected losses and their quadratic coefficients.
//! - [`control`]: optimal controls (closed form, penalized, KKT reference).
//! - [`placement`]: loss averaged over controllable placements and its
//!   scaling in the number of controllables.
//! - [`montecarlo`]: sampling estimates with standard errors.
//! - [`io`]: file schemas and deterministic JSON output.

pub mod control;
pub mod error;
pub mod generators;
pub mod graph;
pub mod io;
pub mod loss;
pub mod montecarlo;
pub mod placement;
pub mod stochastic;

pub use control::{
    interpretation_weights, kkt_oracle, optimize_full, optimize_penalized, optimize_subset,
    ControllableSet, OptimalControl, PenaltyModel,
};
pub use error::{Error, Result};
pub use graph::{
    build_laplacian, effective_resistance, pairwise_total_resistance, perturb_edge,
    total_effective_resistance, Edge, EdgePerturbation, LaplacianPair, Spectrum, WeightedGraph,
};
pub use loss::{
    expected_loss, loss_coefficients, realized_loss, ControlVector, LossCoefficients, LossReport,
};
pub use montecarlo::{compare_controls, estimate_expected_loss, ControlComparison, MCEstimate};
pub use placement::{
    average_loss_k, empirical_random_placement_trace, scaling_curve, PlacementAverage, ScalingCurve,
};
pub use stochastic::{
    iid_covariance, sample_fluctuations, validate_covariance, CovarianceModel, FluctuationSample,
    LoadProfile,
};
