use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use otflow_cli::config::{ExperimentConfig, Method};
use otflow_cli::pipeline::{self, Level, RunOptions};
use otflow_core::{io, solve_optimal_plan, transport_cost, FieldFamily};

#[derive(Parser)]
#[command(name = "otflow", version, about = "Transport flows of linear-control systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config file plus command-line overrides of its keys.
#[derive(Args, Clone, Default)]
struct Settings {
    /// TOML config; missing keys take desk-scale defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    field: Option<FieldFamily>,
    #[arg(long, global = true)]
    radius: Option<f64>,
    #[arg(long, global = true)]
    spacing: Option<f64>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of Euler steps M.
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    rho0: Option<f64>,
    #[arg(long, global = true)]
    tau: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(long, global = true)]
    reference_factor: Option<usize>,
    /// Output directory; inputs of later stages are read from it as well.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

impl Settings {
    fn resolve(&self, base: ExperimentConfig) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => base,
        };
        macro_rules! set {
            ($($src:ident => $($dst:ident).+),*) => {
                $(if let Some(v) = self.$src.clone() { cfg.$($dst).+ = v; })*
            };
        }
        set!(
            field => field, radius => radius, spacing => spacing, samples => samples,
            seed => seed, steps => trainer.steps, beta => trainer.beta, rho0 => trainer.rho0,
            tau => trainer.tau, max_iter => trainer.max_iter,
            reference_factor => reference_factor
        );
        cfg.validate()?;
        Ok(cfg)
    }

    fn config(&self) -> Result<ExperimentConfig> {
        self.resolve(ExperimentConfig::desk())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the source triangulation and the target samples.
    Sample {
        #[command(flatten)]
        settings: Settings,
    },
    /// Solve the optimal coupling between the sampled measures.
    Plan {
        #[command(flatten)]
        settings: Settings,
    },
    /// Train a control on the sampled measures and coupling.
    Train {
        #[command(flatten)]
        settings: Settings,
        #[arg(long, value_enum)]
        method: Option<Method>,
    },
    /// Evaluate the trained control.
    Eval {
        #[command(flatten)]
        settings: Settings,
    },
    /// Tabulate the geodesic deviation bound of the trained control.
    Geodesic {
        #[command(flatten)]
        settings: Settings,
    },
    /// Minimal cost across a refinement ladder.
    GammaStudy {
        #[command(flatten)]
        settings: Settings,
        /// Comma-separated `spacing:samples` levels.
        #[arg(long, value_delimiter = ',', value_parser = parse_level)]
        levels: Option<Vec<Level>>,
    },
    /// Run the full disc-to-ellipse experiment.
    ReproducePaper {
        #[command(flatten)]
        settings: Settings,
        /// Scaled-down instance (default).
        #[arg(long, conflicts_with = "paper_scale")]
        desk: bool,
        /// Full-size instance.
        #[arg(long)]
        paper_scale: bool,
        /// Record wall time in run.json.
        #[arg(long)]
        timing: bool,
    },
}

fn parse_level(s: &str) -> Result<Level, String> {
    let (a, b) = s.split_once(':').ok_or("expected spacing:samples")?;
    Ok(Level {
        spacing: a.trim().parse().map_err(|e| format!("{e}"))?,
        samples: b.trim().parse().map_err(|e| format!("{e}"))?,
    })
}

fn measures(out: &Path) -> Result<(otflow_core::DiscreteMeasure, otflow_core::DiscreteMeasure)> {
    let mu = io::load_measure(out.join("mu_N.csv")).context("loading mu_N.csv (run `sample` first)")?;
    let nu = io::load_measure(out.join("nu_N.csv")).context("loading nu_N.csv (run `sample` first)")?;
    Ok((mu, nu))
}

fn load_plan(out: &Path, n1: usize, n2: usize) -> Result<otflow_core::CouplingPlan> {
    io::load_plan(out.join("plan.csv"), n1, n2).context("loading plan.csv (run `plan` first)")
}

fn load_control(out: &Path) -> Result<otflow_core::ControlSchedule> {
    io::load_control(out.join("control.json")).context("loading control.json (run `train` first)")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample { settings } => {
            let cfg = settings.config()?;
            std::fs::create_dir_all(&settings.out)?;
            let mu = pipeline::source_measure(&cfg)?;
            let nu = pipeline::target_measure(&cfg)?;
            io::save_measure(&mu, settings.out.join("mu_N.csv"))?;
            io::save_measure(&nu, settings.out.join("nu_N.csv"))?;
            println!("{} source atoms, {} target samples", mu.len(), nu.len());
        }
        Command::Plan { settings } => {
            let (mu, nu) = measures(&settings.out)?;
            let plan = solve_optimal_plan(&mu, &nu)?;
            io::save_plan(&plan, settings.out.join("plan.csv"))?;
            println!(
                "W2^2 = {}, support {}",
                transport_cost(&plan, &mu, &nu)?,
                plan.support_size()
            );
        }
        Command::Train { settings, method } => {
            let mut cfg = settings.config()?;
            if let Some(m) = method {
                cfg.method = m;
            }
            let (mu, nu) = measures(&settings.out)?;
            let plan = load_plan(&settings.out, mu.len(), nu.len())?;
            let outcome = pipeline::train_control(&cfg, &mu, &nu, &plan)?;
            io::save_control(&outcome.control, settings.out.join("control.json"))?;
            pipeline::write_json(&outcome.history, &settings.out.join("history.json"))?;
            println!(
                "{:?} after {} iterations: cost {}, coupling {}",
                outcome.reason,
                outcome.history.len(),
                outcome.cost,
                outcome.terminal_cost
            );
        }
        Command::Eval { settings } => {
            let cfg = settings.config()?;
            let (mu, nu) = measures(&settings.out)?;
            let plan = load_plan(&settings.out, mu.len(), nu.len())?;
            let u = load_control(&settings.out)?;
            let map = cfg.target.map();
            let exact = |x: &[f64]| map.apply(x).map(|y| y.to_vec()).unwrap_or_else(|_| vec![f64::NAN; 2]);
            let refs = pipeline::reference_measures(&cfg)?;
            let refs = refs
                .as_ref()
                .map(|(m, n)| otflow_core::ReferenceMeasures { mu: m, nu: n });
            let report = otflow_core::evaluate(&cfg.field, &u, &mu, &nu, &plan, Some(&exact), refs)?;
            let initial = transport_cost(&plan, &mu, &nu)?;
            let record = pipeline::EvalRecord {
                coupling_ratio: report.coupling_cost / initial,
                report,
                initial_w2_squared: initial,
            };
            pipeline::write_json(&record, &settings.out.join("eval.json"))?;
            println!("{}", serde_json::to_string_pretty(&record)?);
        }
        Command::Geodesic { settings } => {
            let cfg = settings.config()?;
            let mu = io::load_measure(settings.out.join("mu_N.csv"))?;
            let u = load_control(&settings.out)?;
            let phi: Vec<Vec<f64>> = otflow_core::flow_map(&cfg.field, &u, mu.atoms())?
                .iter()
                .map(|t| t.terminal().to_vec())
                .collect();
            let t_points = pipeline::exact_points(&cfg, &mu)?;
            let rows = pipeline::geodesic_table(&mu, &phi, &t_points, &pipeline::GEODESIC_TIMES)?;
            pipeline::write_geodesic_csv(&rows, &settings.out.join("geodesic.csv"))?;
            for r in rows {
                println!("t = {:.2}: W2 = {:.3e} <= {:.3e}", r.t, r.actual, r.bound);
            }
        }
        Command::GammaStudy { settings, levels } => {
            let cfg = settings.config()?;
            let levels = levels.unwrap_or_else(pipeline::default_ladder);
            let rows = pipeline::gamma_convergence_study(&cfg, &levels)?;
            std::fs::create_dir_all(&settings.out)?;
            pipeline::write_gamma_csv(&rows, &settings.out.join("gamma.csv"))?;
            for r in &rows {
                println!("N1 = {:4}  N2 = {:5}  min F = {:.6e}", r.n1, r.n2, r.min_cost);
            }
            println!("gaps: {:?}", pipeline::successive_gaps(&rows));
        }
        Command::ReproducePaper {
            settings,
            desk: _,
            paper_scale,
            timing,
        } => {
            let base = if paper_scale {
                ExperimentConfig::paper_scale()
            } else {
                ExperimentConfig::desk()
            };
            let cfg = settings.resolve(base)?;
            let s = pipeline::run_experiment(&cfg, &settings.out, RunOptions { timing })?;
            println!(
                "N1 = {}, N2 = {}: {:?} after {} iterations",
                s.run.n1, s.run.n2, s.run.reason, s.run.iterations
            );
            println!(
                "coupling cost {:.4e} ({:.2}% of W2^2 = {:.4e}), L2 map error {:.4}",
                s.eval.report.coupling_cost,
                100.0 * s.eval.coupling_ratio,
                s.eval.initial_w2_squared,
                s.eval.report.l2_map_error.unwrap_or(f64::NAN)
            );
            println!("artifacts in {}", settings.out.display());
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
