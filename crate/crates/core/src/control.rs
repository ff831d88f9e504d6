//! Piecewise-constant controls on `[0, 1]`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A control `u ∈ U_M`: constant value `u_l ∈ ℝᵏ` on each of the `M` intervals
/// `[(l-1)/M, l/M)`.
///
/// Steps are 0-based in code: `step(0)` is the value on the first interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    steps: usize,
    channels: usize,
    values: Vec<f64>,
}

impl ControlSchedule {
    pub fn zeros(steps: usize, channels: usize) -> Result<Self> {
        Self::from_flat(steps, channels, vec![0.0; steps * channels])
    }

    /// Same value on every interval.
    pub fn constant(steps: usize, value: &[f64]) -> Result<Self> {
        let values = value.iter().copied().cycle().take(steps * value.len()).collect();
        Self::from_flat(steps, value.len(), values)
    }

    pub fn from_flat(steps: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if steps == 0 || channels == 0 {
            return Err(Error::InvalidParameter(
                "control needs at least one step and one channel".into(),
            ));
        }
        if values.len() != steps * channels {
            return Err(Error::Shape(format!(
                "{} values for a {steps}×{channels} control",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("control value".into()));
        }
        Ok(Self {
            steps,
            channels,
            values,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let steps = rows.len();
        let channels = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != channels) {
            return Err(Error::Shape("ragged control rows".into()));
        }
        Self::from_flat(steps, channels, rows.concat())
    }

    /// Number of intervals `M`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of channels `k`.
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Interval length `h = 1/M`.
    pub fn step_size(&self) -> f64 {
        1.0 / self.steps as f64
    }

    pub fn step(&self, l: usize) -> &[f64] {
        &self.values[l * self.channels..(l + 1) * self.channels]
    }

    pub(crate) fn step_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.values[l * self.channels..(l + 1) * self.channels]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.channels).map(<[f64]>::to_vec).collect()
    }

    /// `‖u‖²_{L²} = (1/M) Σ_l |u_l|²`.
    pub fn l2_norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.steps as f64
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_squared().sqrt()
    }
}

/// `sqrt((1/M) Σ_l |u_l|²)`.
pub fn l2_norm(u: &ControlSchedule) -> f64 {
    u.l2_norm()
}

#[derive(Serialize, Deserialize)]
struct ControlJson {
    #[serde(rename = "M")]
    steps: usize,
    k: usize,
    values: Vec<Vec<f64>>,
}

impl Serialize for ControlSchedule {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ControlJson {
            steps: self.steps,
            k: self.channels,
            values: self.rows(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ControlSchedule {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = ControlJson::deserialize(deserializer)?;
        if raw.values.len() != raw.steps || raw.values.iter().any(|r| r.len() != raw.k) {
            return Err(serde::de::Error::custom(format!(
                "control values do not form a {}×{} array",
                raw.steps, raw.k
            )));
        }
        ControlSchedule::from_flat(raw.steps, raw.k, raw.values.concat())
            .map_err(serde::de::Error::custom)
    }
}
