//! The discrete cost functional and the iterative maximum principle.
//!
//! For a sparse plan `γ` between `μ_N = Σ wᵢ δ_{xᵢ}` and `ν_N = Σ v_j δ_{y_j}`
//! the trained objective is
//!
//! ```text
//! F(u) = Σ_{(i,j)} γ_ij |Φ_u(x_i) − y_j|² + (β/2) ‖u‖²_{L²}
//! ```
//!
//! with `Φ_u` the explicit-Euler flow. [`PmpTrainer`] minimizes it by sweeping
//! the time grid and maximizing the proximal (augmented) Hamiltonian on each
//! interval in closed form. Stored covectors are corrected as the trajectories
//! move. A sweep that fails to decrease the cost is discarded and the proximal
//! weight `ρ` shrinks.

use serde::{Deserialize, Serialize};

use crate::control::ControlSchedule;
use crate::error::{Error, Result};
use crate::field::ControlledField;
use crate::flow::{self, check_compat, euler_step, CostateScratch, Trajectory};
use crate::measure::DiscreteMeasure;
use crate::transport::{sq_dist, CouplingPlan, PlanEntry};

/// Settings of the iterative maximum principle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    /// Regularization weight `β > 0`.
    pub beta: f64,
    /// Initial proximal weight `ρ`.
    pub rho0: f64,
    /// Backtracking factor `τ ∈ (0, 1)`.
    pub tau: f64,
    pub max_iter: usize,
    /// Training stops once `ρ` falls below this floor.
    pub rho_min: f64,
    /// Relative cost decrease over the last 10 accepted iterations below
    /// which training stops.
    pub cost_tol: f64,
    /// Reset `ρ` to `rho0` after every accepted iteration.
    pub rho_reset: bool,
    /// Number of Euler steps `M` of the default zero initial control.
    pub steps: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            beta: 5e-4,
            rho0: 1.0,
            tau: 0.5,
            max_iter: 500,
            rho_min: 1e-10,
            cost_tol: 1e-9,
            rho_reset: false,
            steps: 32,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad(format!("tau must lie in (0, 1), got {}", self.tau));
        }
        if !(self.rho_min > 0.0 && self.rho0 > self.rho_min && self.rho0.is_finite()) {
            return bad(format!(
                "need rho0 > rho_min > 0, got rho0 = {}, rho_min = {}",
                self.rho0, self.rho_min
            ));
        }
        if self.cost_tol.is_nan() || self.cost_tol < 0.0 {
            return bad(format!("cost_tol must be non-negative, got {}", self.cost_tol));
        }
        if self.steps < 1 {
            return bad("steps must be positive".into());
        }
        Ok(())
    }
}

/// One line of the training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Cost of the current (accepted) control after this iteration.
    pub cost: f64,
    /// Cost of the trial control; `+∞` when the trial flow blew up.
    pub trial_cost: f64,
    /// Proximal weight (or step size) used by the trial.
    pub rho: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    MaxIter,
    /// The step parameter fell below its floor.
    Stalled,
    /// Relative decrease over 10 accepted iterations fell below `cost_tol`.
    Converged,
    /// The gradient vanished at the current control.
    Stationary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub control: ControlSchedule,
    pub history: Vec<IterationRecord>,
    /// `F(u)` of the returned control.
    pub cost: f64,
    /// The coupling term `Σ γ_ij |Φ_u(x_i) − y_j|²` alone.
    pub terminal_cost: f64,
    pub reason: TerminationReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Accepted,
    Rejected,
    /// Rejected, and `ρ` is now below `rho_min`.
    Stalled,
}

/// `Σ_{(i,j)} γ_ij |z_i − y_j|²` for given terminal states.
pub(crate) fn coupling_cost(terminals: &[&[f64]], plan: &CouplingPlan, nu: &DiscreteMeasure) -> f64 {
    plan.entries()
        .iter()
        .map(|e| e.mass * sq_dist(terminals[e.source], nu.atom(e.target)))
        .sum()
}

pub(crate) fn check_problem<F: ControlledField + ?Sized>(
    field: &F,
    u: &ControlSchedule,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plan: &CouplingPlan,
) -> Result<()> {
    plan.check_shape(mu, nu)?;
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    check_compat(field, u, mu.dim())
}

/// `F(u) = Σ γ_ij |Φ_u(x_i) − y_j|² + (β/2)‖u‖²_{L²}`.
pub fn cost_functional<F: ControlledField + ?Sized>(
    field: &F,
    u: &ControlSchedule,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plan: &CouplingPlan,
    beta: f64,
) -> Result<f64> {
    check_problem(field, u, mu, nu, plan)?;
    let trajs = flow::flow_map(field, u, mu.atoms())?;
    let terminals: Vec<&[f64]> = trajs.iter().map(Trajectory::terminal).collect();
    Ok(coupling_cost(&terminals, plan, nu) + 0.5 * beta * u.l2_norm_squared())
}

/// `λ^M = −2 Σ_j γ_ij (z^M − y_j)`, minus the gradient of the terminal cost of
/// one source atom.
pub fn terminal_covector(z_m: &[f64], plan_row: &[PlanEntry], nu_atoms: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; z_m.len()];
    for e in plan_row {
        let y = &nu_atoms[e.target];
        for a in 0..out.len() {
            out[a] -= 2.0 * e.mass * (z_m[a] - y[a]);
        }
    }
    out
}

/// Covector correction after the trajectory moved from `z_old` to `z_new`:
/// `λ + 2Σγ(z_old − y) − 2Σγ(z_new − y) = λ − 2(Σ_j γ_ij)(z_new − z_old)`.
pub fn corrected_covector(
    lambda_l: &[f64],
    z_old: &[f64],
    z_new: &[f64],
    plan_row: &[PlanEntry],
) -> Vec<f64> {
    let row_mass: f64 = plan_row.iter().map(|e| e.mass).sum();
    lambda_l
        .iter()
        .zip(z_old.iter().zip(z_new))
        .map(|(l, (o, n))| l - 2.0 * row_mass * (n - o))
        .collect()
}

/// Maximizer of `a·v − (β/2)|v|² − (1/(2ρ))|v − u_l|²`, i.e.
/// `v* = (ρ a + u_l) / (1 + ρβ)`.
pub fn maximize_augmented_hamiltonian(a: &[f64], u_l: &[f64], beta: f64, rho: f64) -> Vec<f64> {
    let denom = 1.0 + rho * beta;
    a.iter()
        .zip(u_l)
        .map(|(aj, uj)| (rho * aj + uj) / denom)
        .collect()
}

/// `(2/β) · max |x_i − y_j|²` over the support pairs, which bounds `‖û‖²_{L²}`
/// for any control with `F(û) ≤ F(0)`. With a plan, only its support pairs are
/// considered.
pub fn minimizer_norm_bound(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plan: Option<&CouplingPlan>,
    beta: f64,
) -> f64 {
    let sup = match plan {
        Some(p) => p
            .entries()
            .iter()
            .map(|e| sq_dist(mu.atom(e.source), nu.atom(e.target)))
            .fold(0.0, f64::max),
        None => mu
            .atoms()
            .iter()
            .flat_map(|x| nu.atoms().iter().map(move |y| sq_dist(x, y)))
            .fold(0.0, f64::max),
    };
    2.0 / beta * sup
}

/// Trajectories, covectors and bookkeeping of the iterative maximum principle.
#[derive(Debug, Clone)]
pub struct TrainerState {
    pub(crate) control: ControlSchedule,
    /// Per atom, `(M + 1) · n` states.
    pub(crate) trajectories: Vec<Vec<f64>>,
    /// Per atom, `(M + 1) · n` covector components.
    pub(crate) covectors: Vec<Vec<f64>>,
    pub(crate) cost: f64,
    pub(crate) terminal_cost: f64,
    pub(crate) rho: f64,
    pub(crate) needs_covectors: bool,
    pub(crate) history: Vec<IterationRecord>,
}

impl TrainerState {
    pub fn control(&self) -> &ControlSchedule {
        &self.control
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn terminal_cost(&self) -> f64 {
        self.terminal_cost
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Whether the covectors are recomputed at the next iteration.
    pub fn needs_covectors(&self) -> bool {
        self.needs_covectors
    }

    pub fn history(&self) -> &[IterationRecord] {
        &self.history
    }

    /// Current states `z_i^l` of atom `i`, flattened `(M + 1) × n`.
    pub fn trajectory(&self, i: usize) -> &[f64] {
        &self.trajectories[i]
    }

    pub fn covectors(&self, i: usize) -> &[f64] {
        &self.covectors[i]
    }
}

/// Runs the iterative maximum principle one outer iteration at a time.
pub struct PmpTrainer<'a, F: ControlledField + ?Sized> {
    field: &'a F,
    mu: &'a DiscreteMeasure,
    nu: &'a DiscreteMeasure,
    plan: &'a CouplingPlan,
    config: TrainerConfig,
    state: TrainerState,
}

impl<'a, F: ControlledField + ?Sized> PmpTrainer<'a, F> {
    /// Flows the initial control (zero when `u0` is `None`) and evaluates its cost.
    pub fn new(
        field: &'a F,
        mu: &'a DiscreteMeasure,
        nu: &'a DiscreteMeasure,
        plan: &'a CouplingPlan,
        config: TrainerConfig,
        u0: Option<ControlSchedule>,
    ) -> Result<Self> {
        config.validate()?;
        let control = match u0 {
            Some(u) => u,
            None => ControlSchedule::zeros(config.steps, field.channels())?,
        };
        check_problem(field, &control, mu, nu, plan)?;
        let trajs = flow::flow_map(field, &control, mu.atoms())?;
        let terminals: Vec<&[f64]> = trajs.iter().map(Trajectory::terminal).collect();
        let terminal_cost = coupling_cost(&terminals, plan, nu);
        let cost = terminal_cost + 0.5 * config.beta * control.l2_norm_squared();
        let trajectories = trajs
            .iter()
            .map(|t| t.states().flatten().copied().collect())
            .collect();
        let len = (control.steps() + 1) * mu.dim();
        let state = TrainerState {
            control,
            trajectories,
            covectors: vec![vec![0.0; len]; mu.len()],
            cost,
            terminal_cost,
            rho: config.rho0,
            needs_covectors: true,
            history: Vec::new(),
        };
        Ok(Self {
            field,
            mu,
            nu,
            plan,
            config,
            state,
        })
    }

    pub fn state(&self) -> &TrainerState {
        &self.state
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn into_state(self) -> TrainerState {
        self.state
    }

    fn recompute_covectors(&mut self) -> Result<()> {
        let n = self.mu.dim();
        let m = self.state.control.steps();
        let h = self.state.control.step_size();
        let mut scratch = CostateScratch::new(n);
        for i in 0..self.mu.len() {
            let traj = &self.state.trajectories[i];
            let lam = &mut self.state.covectors[i];
            let terminal = terminal_covector(&traj[m * n..], self.plan.row(i), self.nu.atoms());
            lam[m * n..].copy_from_slice(&terminal);
            let mut current = terminal;
            for l in (1..=m).rev() {
                scratch
                    .implicit_step(
                        self.field,
                        &traj[(l - 1) * n..l * n],
                        self.state.control.step(l - 1),
                        h,
                        &mut current,
                    )
                    .ok_or(Error::SingularCostate { step: l })?;
                lam[(l - 1) * n..l * n].copy_from_slice(&current);
            }
        }
        Ok(())
    }

    /// The forward sweep producing a trial control and trajectories, or `None`
    /// when the trial flow blows up.
    fn sweep(&self) -> Option<(ControlSchedule, Vec<Vec<f64>>)> {
        let n = self.mu.dim();
        let k = self.field.channels();
        let m = self.state.control.steps();
        let h = self.state.control.step_size();
        let n1 = self.mu.len();
        let row_mass = self.plan.row_marginal();

        let mut control = self.state.control.clone();
        let mut trajs: Vec<Vec<f64>> = (0..n1)
            .map(|i| {
                let mut t = vec![0.0; (m + 1) * n];
                t[..n].copy_from_slice(&self.state.trajectories[i][..n]);
                t
            })
            .collect();
        let mut lam_corr: Vec<Vec<f64>> = (0..n1)
            .map(|i| self.state.covectors[i][..n].to_vec())
            .collect();
        let mut fmat = vec![0.0; n * k];
        let mut a = vec![0.0; k];
        let mut velocity = vec![0.0; n];

        for l in 0..m {
            // a_j = Σ_i λ_i^{l,corr} · F_j(z_i^{l,new})
            a.fill(0.0);
            for i in 0..n1 {
                let z = &trajs[i][l * n..(l + 1) * n];
                self.field.eval_into(z, &mut fmat);
                for (c, lam_c) in lam_corr[i].iter().enumerate() {
                    let row = &fmat[c * k..(c + 1) * k];
                    for j in 0..k {
                        a[j] += lam_c * row[j];
                    }
                }
            }
            let v = maximize_augmented_hamiltonian(&a, control.step(l), self.config.beta, self.state.rho);
            if v.iter().any(|x| !x.is_finite()) {
                return None;
            }
            control.step_mut(l).copy_from_slice(&v);

            for i in 0..n1 {
                let (prev, next) = trajs[i].split_at_mut((l + 1) * n);
                if !euler_step(self.field, &prev[l * n..], &v, h, &mut velocity, &mut next[..n]) {
                    return None;
                }
                let old = &self.state.trajectories[i][(l + 1) * n..(l + 2) * n];
                let lam = &self.state.covectors[i][(l + 1) * n..(l + 2) * n];
                for c in 0..n {
                    lam_corr[i][c] = lam[c] - 2.0 * row_mass[i] * (next[c] - old[c]);
                }
            }
        }
        Some((control, trajs))
    }

    /// One outer iteration: a forward sweep followed by the accept/backtrack
    /// decision. Covectors are refreshed first when flagged.
    pub fn step(&mut self) -> Result<StepOutcome> {
        if self.state.needs_covectors {
            self.recompute_covectors()?;
        }
        let n = self.mu.dim();
        let m = self.state.control.steps();
        let trial = self.sweep().map(|(control, trajs)| {
            let terminals: Vec<&[f64]> = trajs.iter().map(|t| &t[m * n..]).collect();
            let terminal_cost = coupling_cost(&terminals, self.plan, self.nu);
            let cost = terminal_cost + 0.5 * self.config.beta * control.l2_norm_squared();
            (control, trajs, cost, terminal_cost)
        });
        let trial_cost = trial
            .as_ref()
            .map(|t| t.2)
            .filter(|c| c.is_finite())
            .unwrap_or(f64::INFINITY);
        let rho_used = self.state.rho;
        let iteration = self.state.history.len() + 1;

        let outcome = match trial {
            Some((control, trajs, cost, terminal_cost)) if cost < self.state.cost => {
                self.state.control = control;
                self.state.trajectories = trajs;
                self.state.cost = cost;
                self.state.terminal_cost = terminal_cost;
                self.state.needs_covectors = true;
                if self.config.rho_reset {
                    self.state.rho = self.config.rho0;
                }
                StepOutcome::Accepted
            }
            _ => {
                self.state.rho *= self.config.tau;
                self.state.needs_covectors = false;
                if self.state.rho < self.config.rho_min {
                    StepOutcome::Stalled
                } else {
                    StepOutcome::Rejected
                }
            }
        };
        self.state.history.push(IterationRecord {
            iteration,
            cost: self.state.cost,
            trial_cost,
            rho: rho_used,
            accepted: outcome == StepOutcome::Accepted,
        });
        Ok(outcome)
    }

    /// Iterates until convergence or until `max_iter` is reached or `ρ` stalls.
    pub fn run(mut self) -> Result<TrainOutcome> {
        let mut accepted_costs = vec![self.state.cost];
        let mut reason = TerminationReason::MaxIter;
        for _ in 0..self.config.max_iter {
            match self.step()? {
                StepOutcome::Stalled => {
                    reason = TerminationReason::Stalled;
                    break;
                }
                StepOutcome::Rejected => {}
                StepOutcome::Accepted => {
                    accepted_costs.push(self.state.cost);
                    if converged(&accepted_costs, self.config.cost_tol) {
                        reason = TerminationReason::Converged;
                        break;
                    }
                }
            }
        }
        let state = self.state;
        Ok(TrainOutcome {
            control: state.control,
            history: state.history,
            cost: state.cost,
            terminal_cost: state.terminal_cost,
            reason,
        })
    }
}

/// Relative decrease across the last 10 accepted iterations below `tol`.
pub(crate) fn converged(accepted_costs: &[f64], tol: f64) -> bool {
    const WINDOW: usize = 10;
    if accepted_costs.len() <= WINDOW {
        return false;
    }
    let last = accepted_costs[accepted_costs.len() - 1];
    let before = accepted_costs[accepted_costs.len() - 1 - WINDOW];
    (before - last) <= tol * before.abs()
}

/// Minimizes `F` with the iterative maximum principle.
pub fn train<F: ControlledField + ?Sized>(
    field: &F,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plan: &CouplingPlan,
    config: &TrainerConfig,
    u0: Option<ControlSchedule>,
) -> Result<TrainOutcome> {
    PmpTrainer::new(field, mu, nu, plan, config.clone(), u0)?.run()
}
