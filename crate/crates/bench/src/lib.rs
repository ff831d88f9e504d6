//! Shared fixtures for the benchmarks.

use otflow_cli::config::ExperimentConfig;
use otflow_cli::pipeline::{source_measure, target_measure};
use otflow_core::{solve_optimal_plan, CouplingPlan, DiscreteMeasure, FieldFamily};

/// Measures, coupling and field of the desk-scale experiment.
pub struct Instance {
    pub field: FieldFamily,
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    pub plan: CouplingPlan,
    pub config: ExperimentConfig,
}

pub fn instance(spacing: f64, samples: usize) -> Instance {
    let config = ExperimentConfig {
        spacing,
        samples,
        ..ExperimentConfig::desk()
    };
    let mu = source_measure(&config).expect("valid source");
    let nu = target_measure(&config).expect("valid target");
    let plan = solve_optimal_plan(&mu, &nu).expect("balanced measures");
    Instance {
        field: config.field,
        mu,
        nu,
        plan,
        config,
    }
}

pub fn desk() -> Instance {
    instance(0.08, 400)
}
