//! Sparse couplings, the exact discrete OT solve and W₂.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::simplex;

/// Above this many cells the cost matrix is evaluated on demand.
const DENSE_COST_LIMIT: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    #[serde(rename = "i")]
    pub source: usize,
    #[serde(rename = "j")]
    pub target: usize,
    pub mass: f64,
}

/// A sparse transport plan `γ = Σ m_k δ_{(x_{i_k}, y_{j_k})}`.
///
/// Entries are kept sorted by `(source, target)` so each source row is a
/// contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingPlan {
    n1: usize,
    n2: usize,
    entries: Vec<PlanEntry>,
    row_start: Vec<usize>,
    row_marginal: Vec<f64>,
    col_marginal: Vec<f64>,
}

impl CouplingPlan {
    /// Validates indices, positivity and the `n1 + n2` support bound.
    pub fn from_entries(n1: usize, n2: usize, mut entries: Vec<PlanEntry>) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::Empty("plan marginal sizes"));
        }
        for e in &entries {
            if e.source >= n1 {
                return Err(Error::IndexOutOfRange {
                    what: "source",
                    index: e.source,
                    size: n1,
                });
            }
            if e.target >= n2 {
                return Err(Error::IndexOutOfRange {
                    what: "target",
                    index: e.target,
                    size: n2,
                });
            }
            if !(e.mass > 0.0 && e.mass.is_finite()) {
                return Err(Error::InvalidPlan(format!(
                    "entry ({}, {}) has non-positive mass {}",
                    e.source, e.target, e.mass
                )));
            }
        }
        if entries.len() > n1 + n2 {
            return Err(Error::InvalidPlan(format!(
                "{} entries exceed the sparsity bound {}",
                entries.len(),
                n1 + n2
            )));
        }
        entries.sort_by_key(|e| (e.source, e.target));
        if entries
            .windows(2)
            .any(|w| (w[0].source, w[0].target) == (w[1].source, w[1].target))
        {
            return Err(Error::InvalidPlan("duplicate entry".into()));
        }
        let mut row_marginal = vec![0.0; n1];
        let mut col_marginal = vec![0.0; n2];
        let mut row_start = vec![0; n1 + 1];
        for e in &entries {
            row_marginal[e.source] += e.mass;
            col_marginal[e.target] += e.mass;
            row_start[e.source + 1] += 1;
        }
        for i in 0..n1 {
            row_start[i + 1] += row_start[i];
        }
        Ok(Self {
            n1,
            n2,
            entries,
            row_start,
            row_marginal,
            col_marginal,
        })
    }

    /// The plan `(Id, Id)_# μ` between a measure and itself.
    pub fn diagonal(mu: &DiscreteMeasure) -> Self {
        let entries = mu
            .weights()
            .iter()
            .enumerate()
            .map(|(i, &w)| PlanEntry {
                source: i,
                target: i,
                mass: w,
            })
            .collect();
        Self::from_entries(mu.len(), mu.len(), entries).expect("diagonal plan is valid")
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn entries(&self) -> &[PlanEntry] {
        &self.entries
    }

    pub fn support_size(&self) -> usize {
        self.entries.len()
    }

    /// Entries whose source index is `i`.
    pub fn row(&self, i: usize) -> &[PlanEntry] {
        &self.entries[self.row_start[i]..self.row_start[i + 1]]
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &[f64] {
        &self.col_marginal
    }

    /// Largest absolute deviation of the plan marginals from the measure weights.
    pub fn marginal_residual(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
        self.check_shape(mu, nu)?;
        let rows = self
            .row_marginal
            .iter()
            .zip(mu.weights())
            .map(|(a, b)| (a - b).abs());
        let cols = self
            .col_marginal
            .iter()
            .zip(nu.weights())
            .map(|(a, b)| (a - b).abs());
        Ok(rows.chain(cols).fold(0.0, f64::max))
    }

    /// Fails unless the plan's index ranges match the two measures.
    pub fn check_shape(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
        if self.n1 != mu.len() {
            return Err(Error::Shape(format!(
                "plan has {} sources, measure has {} atoms",
                self.n1,
                mu.len()
            )));
        }
        if self.n2 != nu.len() {
            return Err(Error::Shape(format!(
                "plan has {} targets, measure has {} atoms",
                self.n2,
                nu.len()
            )));
        }
        Ok(())
    }
}

/// `|x - y|²`.
pub fn squared_cost(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(sq_dist(x, y))
}

#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Exact optimal plan for the squared Euclidean cost.
///
/// The result is a basic solution of the transportation problem, so its
/// support never exceeds `n1 + n2 - 1` cells.
pub fn solve_optimal_plan(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<CouplingPlan> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    let (n1, n2) = (mu.len(), nu.len());
    let solution = if n1 * n2 <= DENSE_COST_LIMIT {
        let mut dense = Vec::with_capacity(n1 * n2);
        for x in mu.atoms() {
            dense.extend(nu.atoms().iter().map(|y| sq_dist(x, y)));
        }
        simplex::solve(mu.weights(), nu.weights(), |i, j| dense[i * n2 + j])?
    } else {
        simplex::solve(mu.weights(), nu.weights(), |i, j| {
            sq_dist(mu.atom(i), nu.atom(j))
        })?
    };
    let entries = solution
        .cells
        .into_iter()
        .map(|(i, j, mass)| PlanEntry {
            source: i,
            target: j,
            mass,
        })
        .collect();
    CouplingPlan::from_entries(n1, n2, entries)
}

/// `Σ m·|x_i − y_j|²` over the plan entries.
pub fn transport_cost(
    plan: &CouplingPlan,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<f64> {
    plan.check_shape(mu, nu)?;
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    Ok(plan
        .entries()
        .iter()
        .map(|e| e.mass * sq_dist(mu.atom(e.source), nu.atom(e.target)))
        .sum())
}

pub fn w2_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    let plan = solve_optimal_plan(mu, nu)?;
    Ok(transport_cost(&plan, mu, nu)?.max(0.0).sqrt())
}

/// `map_# μ`: atoms are mapped, weights kept.
pub fn pushforward<F>(mu: &DiscreteMeasure, map: F) -> Result<DiscreteMeasure>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    mu.with_atoms(mu.atoms().iter().map(|x| map(x)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Vec<f64>> {
        v.iter().map(|&(a, b)| vec![a, b]).collect()
    }

    #[test]
    fn squared_cost_examples() {
        assert_eq!(squared_cost(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(squared_cost(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(squared_cost(&[1.0, 1.0], &[2.0, 3.0]).unwrap(), 5.0);
        assert!(squared_cost(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn dirac_to_dirac() {
        let mu = DiscreteMeasure::dirac(vec![0.0, 0.0]).unwrap();
        let nu = DiscreteMeasure::dirac(vec![1.0, 0.0]).unwrap();
        let plan = solve_optimal_plan(&mu, &nu).unwrap();
        assert_eq!(
            plan.entries(),
            &[PlanEntry {
                source: 0,
                target: 0,
                mass: 1.0
            }]
        );
        assert_eq!(transport_cost(&plan, &mu, &nu).unwrap(), 1.0);
        let far = DiscreteMeasure::dirac(vec![3.0, 4.0]).unwrap();
        assert_eq!(w2_distance(&mu, &far).unwrap(), 5.0);
    }

    #[test]
    fn two_atom_vertical_matching() {
        // Brute force: identity matching costs (1 + 1)/2 = 1, the crossed one (2 + 2)/2 = 2.
        let mu = DiscreteMeasure::uniform(pts(&[(0.0, 0.0), (1.0, 0.0)])).unwrap();
        let nu = DiscreteMeasure::uniform(pts(&[(0.0, 1.0), (1.0, 1.0)])).unwrap();
        let plan = solve_optimal_plan(&mu, &nu).unwrap();
        assert!((transport_cost(&plan, &mu, &nu).unwrap() - 1.0).abs() < 1e-12);
        assert!((w2_distance(&mu, &nu).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_plan_on_identical_measures() {
        let mu = DiscreteMeasure::uniform(pts(&[(0.0, 0.0), (1.0, 2.0), (-1.0, 0.5)])).unwrap();
        let plan = CouplingPlan::diagonal(&mu);
        assert_eq!(transport_cost(&plan, &mu, &mu).unwrap(), 0.0);
        assert!(w2_distance(&mu, &mu).unwrap() < 1e-12);
    }

    #[test]
    fn plan_validation() {
        let e = |i, j, m| PlanEntry {
            source: i,
            target: j,
            mass: m,
        };
        assert!(CouplingPlan::from_entries(1, 1, vec![e(0, 1, 1.0)]).is_err());
        assert!(CouplingPlan::from_entries(1, 1, vec![e(0, 0, 0.0)]).is_err());
        assert!(CouplingPlan::from_entries(1, 1, vec![e(0, 0, 0.5), e(0, 0, 0.5)]).is_err());
        let too_many = (0..3)
            .flat_map(|i| (0..3).map(move |j| e(i, j, 1.0 / 9.0)))
            .collect();
        assert!(CouplingPlan::from_entries(3, 3, too_many).is_err());
    }

    #[test]
    fn transport_cost_index_out_of_range() {
        let mu = DiscreteMeasure::uniform(pts(&[(0.0, 0.0), (1.0, 0.0)])).unwrap();
        let nu = DiscreteMeasure::dirac(vec![0.0, 0.0]).unwrap();
        let plan = CouplingPlan::diagonal(&mu);
        assert!(transport_cost(&plan, &mu, &nu).is_err());
    }

    #[test]
    fn pushforward_examples() {
        let mu = DiscreteMeasure::new(pts(&[(0.0, 0.0), (1.0, 1.0)]), Some(vec![1.0, 3.0])).unwrap();
        assert_eq!(pushforward(&mu, |x| x.to_vec()).unwrap(), mu);
        let shifted = pushforward(&mu, |x| vec![x[0] + 1.0, x[1]]).unwrap();
        assert_eq!(shifted.atoms(), &pts(&[(1.0, 0.0), (2.0, 1.0)])[..]);
        assert_eq!(shifted.weights(), mu.weights());
        assert_eq!(shifted.total_mass(), mu.total_mass());
        assert!(pushforward(&mu, |_| vec![f64::NAN, 0.0]).is_err());
    }
}
