//! Post-training diagnostics.

use serde::{Deserialize, Serialize};

use crate::control::ControlSchedule;
use crate::error::{Error, Result};
use crate::field::ControlledField;
use crate::flow::{self, lipschitz_bound, Trajectory};
use crate::measure::DiscreteMeasure;
use crate::trainer::{check_problem, coupling_cost};
use crate::transport::{sq_dist, w2_distance, CouplingPlan};

/// Terms of `W₂(Φ_# μ, ν) ≤ L·W₂(μ, μ_N) + 2√κ + W₂(ν_N, ν)`, with finer
/// discretizations standing in for `μ` and `ν`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDecomposition {
    /// `L · W₂(μ_ref, μ_N)` with `L` the a-priori Lipschitz bound of the flow.
    pub lipschitz_term: f64,
    /// `2 √κ` with the achieved coupling cost as proxy for `κ`.
    pub kappa_term: f64,
    /// `W₂(ν_N, ν_ref)`.
    pub target_term: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `W₂(Φ_u# μ_N, ν_N)`.
    pub w2_push_vs_target: f64,
    /// `Σ γ_ij |Φ_u(x_i) − y_j|²`.
    pub coupling_cost: f64,
    /// The coupling cost, reported as the empirical stand-in for `κ(β)`.
    pub kappa_proxy: f64,
    /// `‖Φ_u − T‖_{L²_{μ_N}}` when the exact map is known.
    pub l2_map_error: Option<f64>,
    pub decomposition: Option<ErrorDecomposition>,
    /// `‖u‖_{L²}`.
    pub control_norm: f64,
    /// `e^{L√k‖u‖}`.
    pub lipschitz_bound: f64,
}

/// Known ground-truth map evaluated at single points.
pub type ExactMap<'a> = &'a dyn Fn(&[f64]) -> Vec<f64>;

/// Finer discretizations of the reference and target measures.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceMeasures<'a> {
    pub mu: &'a DiscreteMeasure,
    pub nu: &'a DiscreteMeasure,
}

pub fn evaluate<F: ControlledField + ?Sized>(
    field: &F,
    u: &ControlSchedule,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plan: &CouplingPlan,
    exact_map: Option<ExactMap<'_>>,
    references: Option<ReferenceMeasures<'_>>,
) -> Result<EvalReport> {
    check_problem(field, u, mu, nu, plan)?;
    let trajs = flow::flow_map(field, u, mu.atoms())?;
    let terminals: Vec<&[f64]> = trajs.iter().map(Trajectory::terminal).collect();
    let phi_points: Vec<Vec<f64>> = terminals.iter().map(|z| z.to_vec()).collect();
    let pushed = mu.with_atoms(phi_points.clone())?;
    let w2_push_vs_target = w2_distance(&pushed, nu)?;
    let coupling = coupling_cost(&terminals, plan, nu);

    let l2_map_error = match exact_map {
        Some(t) => {
            let t_points: Vec<Vec<f64>> = mu.atoms().iter().map(|x| t(x)).collect();
            Some(l2_map_error(&phi_points, &t_points, mu.weights())?)
        }
        None => None,
    };

    let control_norm = u.l2_norm();
    let lip = lipschitz_bound(field, control_norm);
    let decomposition = match references {
        Some(refs) => {
            let lipschitz_term = lip * w2_distance(refs.mu, mu)?;
            let kappa_term = 2.0 * coupling.sqrt();
            let target_term = w2_distance(nu, refs.nu)?;
            Some(ErrorDecomposition {
                lipschitz_term,
                kappa_term,
                target_term,
                total: lipschitz_term + kappa_term + target_term,
            })
        }
        None => None,
    };

    Ok(EvalReport {
        w2_push_vs_target,
        coupling_cost: coupling,
        kappa_proxy: coupling,
        l2_map_error,
        decomposition,
        control_norm,
        lipschitz_bound: lip,
    })
}

fn check_time(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("time {t} outside [0, 1]")))
    }
}

fn check_aligned(a: &[Vec<f64>], b_len: usize) -> Result<()> {
    if a.len() != b_len {
        return Err(Error::Shape(format!(
            "{} mapped points for {} atoms",
            a.len(),
            b_len
        )));
    }
    Ok(())
}

/// `((1 − t) Id + t Φ)_# μ` with `Φ` given by its values on the atoms.
pub fn interpolated_pushforward(
    mu: &DiscreteMeasure,
    phi_points: &[Vec<f64>],
    t: f64,
) -> Result<DiscreteMeasure> {
    check_time(t)?;
    check_aligned(phi_points, mu.len())?;
    let atoms = mu
        .atoms()
        .iter()
        .zip(phi_points)
        .map(|(x, p)| {
            if p.len() != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: x.len(),
                    got: p.len(),
                });
            }
            Ok(x.iter().zip(p).map(|(a, b)| (1.0 - t) * a + t * b).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    mu.with_atoms(atoms)
}

/// `(t·‖Φ − T‖_{L²_μ}, W₂(η_t, η̃_t))` where `η_t` interpolates along `T` and
/// `η̃_t` along `Φ`. The identity coupling makes the first an upper bound of
/// the second.
pub fn geodesic_deviation(
    mu: &DiscreteMeasure,
    phi_points: &[Vec<f64>],
    t_points: &[Vec<f64>],
    t: f64,
) -> Result<(f64, f64)> {
    check_time(t)?;
    let bound = t * l2_map_error(phi_points, t_points, mu.weights())?;
    if t == 0.0 {
        return Ok((0.0, 0.0));
    }
    let along_phi = interpolated_pushforward(mu, phi_points, t)?;
    let along_t = interpolated_pushforward(mu, t_points, t)?;
    let actual = w2_distance(&along_t, &along_phi)?;
    Ok((bound, actual))
}

/// `√(Σᵢ wᵢ |Φ(xᵢ) − T(xᵢ)|²)`.
pub fn l2_map_error(phi_points: &[Vec<f64>], t_points: &[Vec<f64>], weights: &[f64]) -> Result<f64> {
    if phi_points.len() != t_points.len() || phi_points.len() != weights.len() {
        return Err(Error::Shape(format!(
            "lengths differ: {} images, {} reference images, {} weights",
            phi_points.len(),
            t_points.len(),
            weights.len()
        )));
    }
    let mut acc = 0.0;
    for ((p, q), w) in phi_points.iter().zip(t_points).zip(weights) {
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                got: q.len(),
            });
        }
        acc += w * sq_dist(p, q);
    }
    Ok(acc.sqrt())
}

/// For each grid time `t`, `W₂(Φ^{(0,t)}_{u#} μ_N, ((1 − t) Id + t T)_# μ_N)`.
pub fn prefix_curve_deviation<F: ControlledField + ?Sized>(
    field: &F,
    u: &ControlSchedule,
    mu: &DiscreteMeasure,
    t_points_exact: &[Vec<f64>],
    times: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let m = u.steps() as f64;
    for &t in times {
        check_time(t)?;
        if ((t * m) - (t * m).round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "time {t} is not on the Euler grid of {m} steps"
            )));
        }
    }
    check_aligned(t_points_exact, mu.len())?;
    let trajs = flow::flow_map(field, u, mu.atoms())?;
    times
        .iter()
        .map(|&t| {
            let l = (t * m).round() as usize;
            let prefix = mu.with_atoms(trajs.iter().map(|tr| tr.state(l).to_vec()).collect())?;
            let geodesic = interpolated_pushforward(mu, t_points_exact, t)?;
            Ok((t, w2_distance(&prefix, &geodesic)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldFamily;
    use crate::transport::solve_optimal_plan;

    #[test]
    fn zero_control_identical_measures() {
        let f = FieldFamily::hermite2d(10.0).unwrap();
        let mu = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![0.2, 0.1]]).unwrap();
        let plan = CouplingPlan::diagonal(&mu);
        let u = ControlSchedule::zeros(8, 14).unwrap();
        let id = |x: &[f64]| x.to_vec();
        let r = evaluate(&f, &u, &mu, &mu, &plan, Some(&id), None).unwrap();
        assert!(r.w2_push_vs_target < 1e-12);
        assert_eq!(r.coupling_cost, 0.0);
        assert_eq!(r.l2_map_error, Some(0.0));
        assert_eq!(r.control_norm, 0.0);
    }

    #[test]
    fn zero_control_general_pair() {
        let f = FieldFamily::translations(2).unwrap();
        let mu = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let nu = DiscreteMeasure::uniform(vec![vec![0.0, 1.0], vec![1.0, 1.5], vec![2.0, 0.0]]).unwrap();
        let plan = solve_optimal_plan(&mu, &nu).unwrap();
        let u = ControlSchedule::zeros(4, 2).unwrap();
        let r = evaluate(&f, &u, &mu, &nu, &plan, None, Some(ReferenceMeasures { mu: &mu, nu: &nu })).unwrap();
        let w = w2_distance(&mu, &nu).unwrap();
        assert!((r.w2_push_vs_target - w).abs() < 1e-12);
        assert!(r.w2_push_vs_target.powi(2) <= r.coupling_cost + 1e-9);
        let d = r.decomposition.unwrap();
        assert!(d.lipschitz_term.abs() < 1e-12 && d.target_term.abs() < 1e-12);
    }

    #[test]
    fn interpolation_cases() {
        let mu = DiscreteMeasure::new(vec![vec![0.0, 0.0], vec![1.0, 1.0]], Some(vec![1.0, 3.0])).unwrap();
        let phi = vec![vec![1.0, 0.0], vec![3.0, 1.0]];
        assert_eq!(interpolated_pushforward(&mu, &phi, 0.0).unwrap(), mu);
        let end = interpolated_pushforward(&mu, &phi, 1.0).unwrap();
        assert_eq!(end.atoms(), &phi[..]);
        let mid = interpolated_pushforward(&mu, &phi, 0.5).unwrap();
        assert_eq!(mid.atom(0), &[0.5, 0.0]);
        assert_eq!(mid.weights(), mu.weights());
        assert!(interpolated_pushforward(&mu, &phi, 1.01).is_err());
    }

    #[test]
    fn l2_map_error_cases() {
        let a = vec![vec![1.0, 2.0]];
        assert_eq!(l2_map_error(&a, &a, &[1.0]).unwrap(), 0.0);
        assert_eq!(l2_map_error(&[vec![3.0, 4.0]], &[vec![0.0, 0.0]], &[1.0]).unwrap(), 5.0);
        let got = l2_map_error(
            &[vec![1.0, 0.0], vec![0.0, 0.0]],
            &[vec![0.0, 0.0], vec![0.0, 0.0]],
            &[0.5, 0.5],
        )
        .unwrap();
        assert!((got - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(l2_map_error(&a, &[], &[1.0]).is_err());
    }

    #[test]
    fn geodesic_trivial_cases() {
        let mu = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let phi = vec![vec![0.5, 0.5], vec![2.0, 0.0]];
        assert_eq!(geodesic_deviation(&mu, &phi, &phi, 0.0).unwrap(), (0.0, 0.0));
        let (b, a) = geodesic_deviation(&mu, &phi, &phi, 0.7).unwrap();
        assert_eq!(b, 0.0);
        assert!(a < 1e-12);
    }

    #[test]
    fn prefix_curve_endpoints() {
        let f = FieldFamily::translations(2).unwrap();
        let mu = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let u = ControlSchedule::constant(4, &[1.0, 0.5]).unwrap();
        let t_points: Vec<Vec<f64>> = mu.atoms().iter().map(|x| vec![x[0] + 1.0, x[1] + 0.5]).collect();
        let curve = prefix_curve_deviation(&f, &u, &mu, &t_points, &[0.0, 0.5, 1.0]).unwrap();
        for (_, d) in curve {
            assert!(d < 1e-12);
        }
        assert!(prefix_curve_deviation(&f, &u, &mu, &t_points, &[0.3]).is_err());
    }
}
