//! Energy-feasible dynamic traffic equilibria for electric vehicles.
//!
//! The pipeline is: build a battery-extended network ([`netmodel`]),
//! enumerate each commodity's energy-feasible walks ([`walks`]), load a
//! piecewise-constant walk-flow exactly in the Vickrey point-queue model
//! ([`loading`]) and iterate the projection-type fixed-point update until the
//! walk-flow stops changing ([`equilibrium`]). [`metrics`] computes the
//! quality and profile measures of the result.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod flow;
pub mod functions;
pub mod instance;
pub mod loading;
pub mod metrics;
pub mod netmodel;
pub mod toy;
pub mod walks;

pub use equilibrium::{
    fixed_point_residual, run_fixed_point, run_fixed_point_observed, solve_fp_update, step_size_update,
    AggregationSpec, EquilibriumResult, FixedPointConfig, Initialization, IterationStats, Termination,
    TerminationMode,
};
pub use flow::{Demand, Discretization, WalkFlow};
pub use functions::{PiecewiseLinearFn, StepFunction};
pub use loading::{network_loading, LoadingOptions, LoadingResult};
pub use metrics::NormKind;
pub use netmodel::{build_battery_extended_network, validate_network, Network};
pub use walks::{enumerate_feasible_walks, EnumerationLimits, Walk, WalkCatalog};
