//! Exact gradient of the discretized cost and a descent alternative to the
//! maximum-principle iteration.
//!
//! The adjoint recursion is the transpose of the explicit Euler step
//! `z^l = z^{l-1} + h F(z^{l-1}) u_l`:
//!
//! ```text
//! p^M     = −2 Σ_j γ_ij (z^M − y_j)
//! p^{l-1} = p^l (I + h ∂(F(z^{l-1}) u_l)/∂z)
//! ∂F/∂u_{j,l} = −h Σ_i p_i^l · F_j(z_i^{l-1}) + β h u_{j,l}
//! ```

use crate::control::ControlSchedule;
use crate::error::Result;
use crate::field::ControlledField;
use crate::flow;
use crate::measure::DiscreteMeasure;
use crate::trainer::{
    check_problem, converged, cost_functional, terminal_covector, IterationRecord,
    TerminationReason, TrainOutcome, TrainerConfig,
};
use crate::transport::CouplingPlan;

/// Armijo sufficient-decrease constant.
const ARMIJO_C: f64 = 1e-4;

/// Gradient of [`cost_functional`] with respect to every `u_{j,l}`, flattened
/// row-major as `M × k` (`out[l*k + j]`).
pub fn adjoint_gradient<F: ControlledField + ?Sized>(
    field: &F,
    u: &ControlSchedule,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plan: &CouplingPlan,
    beta: f64,
) -> Result<Vec<f64>> {
    check_problem(field, u, mu, nu, plan)?;
    let n = mu.dim();
    let k = u.channels();
    let m = u.steps();
    let h = u.step_size();
    let trajs = flow::flow_map(field, u, mu.atoms())?;

    let mut grad: Vec<f64> = u.values().iter().map(|v| beta * h * v).collect();
    let mut fmat = vec![0.0; n * k];
    let mut jac = vec![0.0; n * n];
    let mut next = vec![0.0; n];
    for (i, traj) in trajs.iter().enumerate() {
        let mut p = terminal_covector(traj.terminal(), plan.row(i), nu.atoms());
        for l in (1..=m).rev() {
            let z = traj.state(l - 1);
            let u_l = u.step(l - 1);
            field.eval_into(z, &mut fmat);
            let g = &mut grad[(l - 1) * k..l * k];
            for (c, pc) in p.iter().enumerate() {
                for j in 0..k {
                    g[j] -= h * pc * fmat[c * k + j];
                }
            }
            field.jacobian_into(z, u_l, &mut jac);
            for c in 0..n {
                next[c] = p[c] + h * (0..n).map(|a| p[a] * jac[a * n + c]).sum::<f64>();
            }
            p.copy_from_slice(&next);
        }
    }
    Ok(grad)
}

/// Steepest descent along the L² gradient with Armijo backtracking.
///
/// `rho0` is the initial step, `tau` the backtracking factor and `rho_min`
/// the step floor; after an accepted step the next trial starts from
/// `step / tau`. Termination follows [`crate::train`].
pub fn gradient_descent_train<F: ControlledField + ?Sized>(
    field: &F,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plan: &CouplingPlan,
    config: &TrainerConfig,
    u0: Option<ControlSchedule>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let mut u = match u0 {
        Some(u) => u,
        None => ControlSchedule::zeros(config.steps, field.channels())?,
    };
    let beta = config.beta;
    let mut cost = cost_functional(field, &u, mu, nu, plan, beta)?;
    let mut history = Vec::new();
    let mut accepted_costs = vec![cost];
    let mut step = config.rho0;
    let mut reason = TerminationReason::MaxIter;

    let mut grad = adjoint_gradient(field, &u, mu, nu, plan, beta)?;
    for iteration in 1..=config.max_iter {
        let h = u.step_size();
        let grad_sq: f64 = grad.iter().map(|g| g * g).sum();
        if grad_sq == 0.0 {
            reason = TerminationReason::Stationary;
            break;
        }
        // L² Riesz representative of the gradient is grad / h.
        let slope = -grad_sq / h;
        let trial_values: Vec<f64> = u
            .values()
            .iter()
            .zip(&grad)
            .map(|(v, g)| v - step * g / h)
            .collect();
        let trial_cost = ControlSchedule::from_flat(u.steps(), u.channels(), trial_values)
            .ok()
            .and_then(|t| {
                cost_functional(field, &t, mu, nu, plan, beta)
                    .ok()
                    .filter(|c| c.is_finite())
                    .map(|c| (t, c))
            });
        let used = step;
        let trial_c = trial_cost.as_ref().map_or(f64::INFINITY, |t| t.1);
        let accepted = match trial_cost {
            Some((t, c)) if c < cost && c <= cost + ARMIJO_C * step * slope => {
                u = t;
                cost = c;
                step /= config.tau;
                true
            }
            _ => {
                step *= config.tau;
                false
            }
        };
        history.push(IterationRecord {
            iteration,
            cost,
            trial_cost: trial_c,
            rho: used,
            accepted,
        });
        if accepted {
            accepted_costs.push(cost);
            if converged(&accepted_costs, config.cost_tol) {
                reason = TerminationReason::Converged;
                break;
            }
            grad = adjoint_gradient(field, &u, mu, nu, plan, beta)?;
        } else if step < config.rho_min {
            reason = TerminationReason::Stalled;
            break;
        }
    }

    let trajs = flow::flow_map(field, &u, mu.atoms())?;
    let terminals: Vec<&[f64]> = trajs.iter().map(flow::Trajectory::terminal).collect();
    let terminal_cost = crate::trainer::coupling_cost(&terminals, plan, nu);
    Ok(TrainOutcome {
        control: u,
        history,
        cost,
        terminal_cost,
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldFamily;
    use crate::transport::solve_optimal_plan;

    #[test]
    fn zero_at_global_minimum() {
        let f = FieldFamily::hermite2d(10.0).unwrap();
        let mu = DiscreteMeasure::uniform(vec![vec![0.1, 0.2], vec![-0.3, 0.0]]).unwrap();
        let plan = CouplingPlan::diagonal(&mu);
        let u = ControlSchedule::zeros(4, 14).unwrap();
        let g = adjoint_gradient(&f, &u, &mu, &mu, &plan, 0.1).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn regularizer_only_when_residuals_vanish() {
        // translations: Φ_u(0) = ∫u; pick u with ∫u = (1, 0) so the residual is zero
        let f = FieldFamily::translations(2).unwrap();
        let mu = DiscreteMeasure::dirac(vec![0.0, 0.0]).unwrap();
        let nu = DiscreteMeasure::dirac(vec![1.0, 0.0]).unwrap();
        let plan = solve_optimal_plan(&mu, &nu).unwrap();
        let u = ControlSchedule::from_rows(vec![
            vec![1.5, 0.5],
            vec![0.5, -0.5],
            vec![1.0, 1.0],
            vec![1.0, -1.0],
        ])
        .unwrap();
        let beta = 0.3;
        let g = adjoint_gradient(&f, &u, &mu, &nu, &plan, beta).unwrap();
        for (gv, uv) in g.iter().zip(u.values()) {
            assert!((gv - beta * 0.25 * uv).abs() < 1e-15);
        }
    }
}
