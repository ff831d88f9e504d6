//! Weighted atom clouds in ℝⁿ.

use crate::error::{Error, Result};

/// A discrete probability measure `Σ wᵢ δ_{xᵢ}`.
///
/// Weights are strictly positive and sum to one; zero-weight atoms are dropped
/// at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a normalized measure. Missing weights mean the uniform measure.
    pub fn new(points: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        let dim = points.first().ok_or(Error::Empty("measure has no atoms"))?.len();
        if dim == 0 {
            return Err(Error::Empty("atoms have zero dimension"));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite("atom coordinate".into()));
            }
        }
        let raw = match weights {
            None => vec![1.0; points.len()],
            Some(w) => {
                if w.len() != points.len() {
                    return Err(Error::InvalidWeights(format!(
                        "{} weights for {} atoms",
                        w.len(),
                        points.len()
                    )));
                }
                if let Some(bad) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
                    return Err(Error::InvalidWeights(format!(
                        "weight {bad} is negative or non-finite"
                    )));
                }
                w
            }
        };
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidWeights("weights sum to zero".into()));
        }
        // Already-normalized input is kept bit-exact so files round-trip.
        let scale = if (total - 1.0).abs() <= 1e-14 { 1.0 } else { total };
        let (atoms, weights): (Vec<_>, Vec<_>) = points
            .into_iter()
            .zip(raw)
            .filter(|(_, w)| *w > 0.0)
            .map(|(p, w)| (p, w / scale))
            .unzip();
        Ok(Self {
            dim,
            atoms,
            weights,
        })
    }

    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(points, None)
    }

    /// Dirac mass at a single point.
    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        Self::new(vec![point], None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Replaces the atoms while keeping the weights. Used by pushforwards.
    pub(crate) fn with_atoms(&self, atoms: Vec<Vec<f64>>) -> Result<Self> {
        debug_assert_eq!(atoms.len(), self.atoms.len());
        let dim = atoms.first().map(Vec::len).unwrap_or(self.dim);
        for a in &atoms {
            if a.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.len(),
                });
            }
            if a.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite("pushed-forward atom".into()));
            }
        }
        Ok(Self {
            dim,
            atoms,
            weights: self.weights.clone(),
        })
    }

    /// Weighted mean of the atoms.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            for (mi, ai) in m.iter_mut().zip(a) {
                *mi += w * ai;
            }
        }
        m
    }

    /// Largest Euclidean norm among the atoms.
    pub fn radius(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}
