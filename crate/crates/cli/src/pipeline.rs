//! End-to-end experiment: sample, couple, train, evaluate, plot.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use otflow_core::{
    evaluate, flow_map, geodesic_deviation, gradient_descent_train, io, prefix_curve_deviation,
    solve_optimal_plan, train, transport_cost, CouplingPlan, DiscreteMeasure,
    EvalReport, IterationRecord, ReferenceMeasures, TerminationReason, TrainOutcome,
};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Method};
use crate::experiment::{disc_triangulation, sample_target};
use crate::rng;
use crate::svg::{scatter, Series};

/// Times at which the geodesic bound is tabulated.
pub const GEODESIC_TIMES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

pub fn source_measure(cfg: &ExperimentConfig) -> Result<DiscreteMeasure> {
    Ok(disc_triangulation(cfg.radius, cfg.spacing)?)
}

pub fn target_measure(cfg: &ExperimentConfig) -> Result<DiscreteMeasure> {
    Ok(sample_target(cfg.radius, cfg.samples, cfg.seed, &cfg.target.map())?)
}

/// Finer stand-ins for the continuous measures: `factor` times as many
/// source atoms and target samples, the latter from an independent stream.
pub fn reference_measures(cfg: &ExperimentConfig) -> Result<Option<(DiscreteMeasure, DiscreteMeasure)>> {
    if cfg.reference_factor == 0 {
        return Ok(None);
    }
    let f = cfg.reference_factor as f64;
    let mu = disc_triangulation(cfg.radius, cfg.spacing / f.sqrt())?;
    let nu = sample_target(
        cfg.radius,
        cfg.samples * cfg.reference_factor,
        rng::mix(cfg.seed),
        &cfg.target.map(),
    )?;
    Ok(Some((mu, nu)))
}

/// Trains with the configured method.
pub fn train_control(
    cfg: &ExperimentConfig,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plan: &CouplingPlan,
) -> Result<TrainOutcome> {
    let out = match cfg.method {
        Method::Pmp => train(&cfg.field, mu, nu, plan, &cfg.trainer, None)?,
        Method::Gd => gradient_descent_train(&cfg.field, mu, nu, plan, &cfg.trainer, None)?,
    };
    Ok(out)
}

/// Contents of `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub n1: usize,
    pub n2: usize,
    pub plan_support: usize,
    /// `W₂²(μ_N, ν_N)`, the cost of the zero control's coupling term.
    pub initial_w2_squared: f64,
    pub reason: TerminationReason,
    pub iterations: usize,
    pub accepted: usize,
    pub cost: f64,
    pub terminal_cost: f64,
    /// Rejected trials whose flow blew up carry a `null` trial cost.
    pub history: Vec<IterationRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_seconds: Option<f64>,
}

/// Contents of `eval.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    #[serde(flatten)]
    pub report: EvalReport,
    pub initial_w2_squared: f64,
    /// `coupling_cost / initial_w2_squared`.
    pub coupling_ratio: f64,
}

/// One row of the geodesic table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicRow {
    pub t: f64,
    pub bound: f64,
    pub actual: f64,
}

pub fn geodesic_table(
    mu: &DiscreteMeasure,
    phi_points: &[Vec<f64>],
    t_points: &[Vec<f64>],
    times: &[f64],
) -> Result<Vec<GeodesicRow>> {
    times
        .iter()
        .map(|&t| {
            let (bound, actual) = geodesic_deviation(mu, phi_points, t_points, t)?;
            Ok(GeodesicRow { t, bound, actual })
        })
        .collect()
}

fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_geodesic_csv(rows: &[GeodesicRow], path: &Path) -> Result<()> {
    write_csv(rows, path)
}

pub fn exact_points(cfg: &ExperimentConfig, mu: &DiscreteMeasure) -> Result<Vec<Vec<f64>>> {
    let map = cfg.target.map();
    Ok(mu
        .atoms()
        .iter()
        .map(|x| map.apply(x).map(|y| y.to_vec()))
        .collect::<otflow_core::Result<_>>()?)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Record wall time in `run.json`; this makes reruns differ.
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run: RunRecord,
    pub eval: EvalRecord,
    pub geodesic: Vec<GeodesicRow>,
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.with_context(|| format!("stage `{name}` failed"))
}

/// Runs the full experiment and writes every artifact into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, opts: RunOptions) -> Result<RunSummary> {
    let start = Instant::now();
    stage("config", cfg.validate())?;
    stage(
        "output",
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display())),
    )?;

    let (mu, nu) = stage("sample", (|| Ok((source_measure(cfg)?, target_measure(cfg)?)))())?;
    stage("sample", (|| {
        io::save_measure(&mu, out.join("mu_N.csv"))?;
        io::save_measure(&nu, out.join("nu_N.csv"))?;
        Ok(())
    })())?;

    let plan = stage("plan", solve_optimal_plan(&mu, &nu).map_err(Into::into))?;
    let initial = stage("plan", transport_cost(&plan, &mu, &nu).map_err(Into::into))?;
    stage("plan", io::save_plan(&plan, out.join("plan.csv")).map_err(Into::into))?;

    let outcome = stage("train", train_control(cfg, &mu, &nu, &plan))?;
    stage("train", io::save_control(&outcome.control, out.join("control.json")).map_err(Into::into))?;

    let t_points = stage("eval", exact_points(cfg, &mu))?;
    let report = stage("eval", (|| {
        let refs = reference_measures(cfg)?;
        let map = cfg.target.map();
        let exact = |x: &[f64]| map.apply(x).map(|y| y.to_vec()).unwrap_or_else(|_| vec![f64::NAN; 2]);
        let refs = refs.as_ref().map(|(m, n)| ReferenceMeasures { mu: m, nu: n });
        Ok(evaluate(&cfg.field, &outcome.control, &mu, &nu, &plan, Some(&exact), refs)?)
    })())?;
    let eval = EvalRecord {
        coupling_ratio: report.coupling_cost / initial,
        report,
        initial_w2_squared: initial,
    };
    stage("eval", write_json(&eval, &out.join("eval.json")))?;

    let phi_points: Vec<Vec<f64>> = stage(
        "geodesic",
        flow_map(&cfg.field, &outcome.control, mu.atoms())
            .map(|ts| ts.iter().map(|t| t.terminal().to_vec()).collect())
            .map_err(Into::into),
    )?;
    let geodesic = stage("geodesic", geodesic_table(&mu, &phi_points, &t_points, &GEODESIC_TIMES))?;
    stage("geodesic", write_geodesic_csv(&geodesic, &out.join("geodesic.csv")))?;
    let m = cfg.trainer.steps;
    let prefix_times: Vec<f64> = (0..=8).map(|q| (q * m / 8) as f64 / m as f64).collect();
    stage("geodesic", (|| {
        let rows = prefix_curve_deviation(&cfg.field, &outcome.control, &mu, &t_points, &prefix_times)?;
        let mut w = csv::Writer::from_path(out.join("prefix.csv"))?;
        w.write_record(["t", "w2"])?;
        for (t, d) in rows {
            w.write_record([t.to_string(), d.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })())?;

    stage("plot", write_plots(out, &mu, &nu, &phi_points, &t_points))?;

    let accepted = outcome.history.iter().filter(|h| h.accepted).count();
    let run = RunRecord {
        config: cfg.clone(),
        n1: mu.len(),
        n2: nu.len(),
        plan_support: plan.support_size(),
        initial_w2_squared: initial,
        reason: outcome.reason,
        iterations: outcome.history.len(),
        accepted,
        cost: outcome.cost,
        terminal_cost: outcome.terminal_cost,
        history: outcome.history,
        wall_seconds: opts.timing.then(|| start.elapsed().as_secs_f64()),
    };
    stage("output", write_json(&run, &out.join("run.json")))?;
    Ok(RunSummary { run, eval, geodesic })
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// The panels: source atoms, target samples, pushforward over the samples,
/// and the pushforward against the exact map's image.
pub fn write_plots(
    out: &Path,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    phi_points: &[Vec<f64>],
    t_points: &[Vec<f64>],
) -> Result<()> {
    let panels = [
        (
            "source.svg",
            scatter("source atoms", &[Series { label: "μ_N", color: "steelblue", points: mu.atoms() }]),
        ),
        (
            "target.svg",
            scatter("target samples", &[Series { label: "ν_N", color: "darkorange", points: nu.atoms() }]),
        ),
        (
            "pushforward.svg",
            scatter(
                "trained flow",
                &[
                    Series { label: "ν_N", color: "darkorange", points: nu.atoms() },
                    Series { label: "Φ_u # μ_N", color: "steelblue", points: phi_points },
                ],
            ),
        ),
        (
            "comparison.svg",
            scatter(
                "flow vs exact map",
                &[
                    Series { label: "T # μ_N", color: "seagreen", points: t_points },
                    Series { label: "Φ_u # μ_N", color: "steelblue", points: phi_points },
                ],
            ),
        ),
    ];
    for (name, svg) in panels {
        let path = out.join(name);
        fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// One rung of a refinement ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub spacing: f64,
    pub samples: usize,
}

/// Roughly 40, 80, 140 and 280 source atoms, target samples doubling.
pub fn default_ladder() -> Vec<Level> {
    [(0.15, 100), (0.1065, 200), (0.0805, 400), (0.0569, 800)]
        .into_iter()
        .map(|(spacing, samples)| Level { spacing, samples })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub n1: usize,
    pub n2: usize,
    pub min_cost: f64,
}

/// Trains on each level and records the minimal discrete cost.
pub fn gamma_convergence_study(base: &ExperimentConfig, levels: &[Level]) -> Result<Vec<GammaRow>> {
    if levels.len() < 3 {
        bail!("a refinement study needs at least 3 levels, got {}", levels.len());
    }
    levels
        .iter()
        .enumerate()
        .map(|(k, level)| {
            let cfg = ExperimentConfig {
                spacing: level.spacing,
                samples: level.samples,
                ..base.clone()
            };
            level_minimum(&cfg).with_context(|| format!("level {k} (spacing {}, {} samples)", level.spacing, level.samples))
        })
        .collect()
}

fn level_minimum(cfg: &ExperimentConfig) -> Result<GammaRow> {
    cfg.validate()?;
    let mu = source_measure(cfg)?;
    let nu = target_measure(cfg)?;
    let plan = solve_optimal_plan(&mu, &nu)?;
    let outcome = train_control(cfg, &mu, &nu, &plan)?;
    Ok(GammaRow {
        n1: mu.len(),
        n2: nu.len(),
        min_cost: outcome.cost,
    })
}

/// `|m_{k+1} − m_k|` for successive rows.
pub fn successive_gaps(rows: &[GammaRow]) -> Vec<f64> {
    rows.windows(2).map(|w| (w[1].min_cost - w[0].min_cost).abs()).collect()
}

pub fn write_gamma_csv(rows: &[GammaRow], path: &Path) -> Result<()> {
    write_csv(rows, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::desk();
        cfg.spacing = 0.2;
        cfg.samples = 30;
        cfg.reference_factor = 0;
        cfg.trainer.max_iter = 20;
        cfg.trainer.steps = 8;
        cfg
    }

    #[test]
    fn zero_iterations_evaluate_zero_control() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny();
        cfg.trainer.max_iter = 0;
        let s = run_experiment(&cfg, dir.path(), RunOptions::default()).unwrap();
        assert_eq!(s.eval.report.control_norm, 0.0);
        assert_eq!(s.eval.report.coupling_cost, s.eval.initial_w2_squared);
        assert!(s.run.history.is_empty());
    }

    #[test]
    fn writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        run_experiment(&tiny(), dir.path(), RunOptions::default()).unwrap();
        for f in [
            "mu_N.csv", "nu_N.csv", "plan.csv", "control.json", "run.json", "eval.json",
            "geodesic.csv", "prefix.csv", "source.svg", "target.svg", "pushforward.svg",
            "comparison.svg",
        ] {
            assert!(dir.path().join(f).is_file(), "{f} missing");
        }
    }

    #[test]
    fn failing_stage_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny();
        cfg.spacing = -1.0;
        let err = run_experiment(&cfg, dir.path(), RunOptions::default()).unwrap_err();
        assert!(format!("{err:#}").contains("stage `config`"));
    }

    #[test]
    fn gamma_study_rows() {
        let mut base = tiny();
        base.trainer.max_iter = 5;
        let levels = [
            Level { spacing: 0.3, samples: 10 },
            Level { spacing: 0.2, samples: 20 },
            Level { spacing: 0.15, samples: 40 },
        ];
        let rows = gamma_convergence_study(&base, &levels).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.windows(2).all(|w| w[0].n1 < w[1].n1));
        let same = gamma_convergence_study(&base, &[levels[0]; 3]).unwrap();
        assert!(same.iter().all(|r| r == &same[0]));
        assert!(gamma_convergence_study(&base, &levels[..2]).is_err());
    }
}
