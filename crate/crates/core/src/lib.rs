//! Optimal transport maps realized as flows of linear-control systems.
//!
//! The crate is organized bottom-up:
//!
//! - [`measure`] and [`transport`]: discrete measures, an exact transportation
//!   simplex producing sparse optimal plans, and W₂ evaluation.
//! - [`field`], [`control`] and [`flow`]: controlled vector-field families,
//!   piecewise-constant controls, explicit-Euler flows and implicit-Euler
//!   costates, plus the a-priori growth and Lipschitz bounds of the flows.
//! - [`trainer`] and [`gradient`]: the iterative maximum principle with
//!   covector correction and backtracking, and an adjoint-gradient descent
//!   alternative.
//! - [`evaluation`]: pushforward errors, geodesic interpolation diagnostics and
//!   the triangle-inequality error decomposition.
//! - [`io`]: CSV and JSON formats for measures, plans and controls.

pub mod control;
pub mod error;
pub mod evaluation;
pub mod field;
pub mod flow;
pub mod gradient;
pub mod io;
mod linalg;
pub mod measure;
mod simplex;
pub mod trainer;
pub mod transport;

pub use control::ControlSchedule;
pub use error::{Error, Result};
pub use evaluation::{
    evaluate, geodesic_deviation, interpolated_pushforward, l2_map_error, prefix_curve_deviation,
    ErrorDecomposition, EvalReport, ExactMap, ReferenceMeasures,
};
pub use field::{ControlledField, FieldFamily};
pub use flow::{
    costate_backward, flow_forward, flow_map, flow_prefix_map, growth_bound, lipschitz_bound,
    Trajectory,
};
pub use gradient::{adjoint_gradient, gradient_descent_train};
pub use measure::DiscreteMeasure;
pub use trainer::{
    corrected_covector, cost_functional, maximize_augmented_hamiltonian, minimizer_norm_bound,
    terminal_covector, train, IterationRecord, PmpTrainer, StepOutcome, TerminationReason,
    TrainOutcome, TrainerConfig,
};
pub use transport::{
    pushforward, solve_optimal_plan, squared_cost, transport_cost, w2_distance, CouplingPlan,
    PlanEntry,
};
