//! Controlled vector-field families `F = (F_1, …, F_k)` for `ẋ = F(x)u`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A family of `k` vector fields on ℝⁿ driven linearly by a control in ℝᵏ.
///
/// Implementors provide the constants used by the flow bounds:
///
/// - `lipschitz_constant()`: `L` with `|F_i(x) − F_i(y)| ≤ L|x − y|` for every `i`;
/// - `growth_constant()`: `C ≥ 1` with `|F_i(x)| ≤ C + |x|` for every `i`, hence
///   also `|F_i(x)| ≤ C(1 + |x|)`.
pub trait ControlledField {
    fn dim(&self) -> usize;

    fn channels(&self) -> usize;

    /// Writes `F(x)` row-major into `out` (`n × k`): `out[a*k + j] = (F_j(x))_a`.
    fn eval_into(&self, x: &[f64], out: &mut [f64]);

    /// Writes the velocity `F(x)u` into `out`.
    fn velocity_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        let (n, k) = (self.dim(), self.channels());
        let mut m = vec![0.0; n * k];
        self.eval_into(x, &mut m);
        for a in 0..n {
            out[a] = (0..k).map(|j| m[a * k + j] * u[j]).sum();
        }
    }

    /// Writes `∂(F(x)u)/∂x` row-major into `out` (`n × n`): `out[a*n + b] = ∂v_a/∂x_b`.
    fn jacobian_into(&self, x: &[f64], u: &[f64], out: &mut [f64]);

    fn lipschitz_constant(&self) -> f64;

    fn growth_constant(&self) -> f64;

    fn descriptor(&self) -> String;

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.dim() * self.channels()];
        self.eval_into(x, &mut m);
        m
    }

    fn jacobian(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut j = vec![0.0; n * n];
        self.jacobian_into(x, u, &mut j);
        j
    }
}

/// The built-in field families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldFamily {
    /// `F_i = ∂/∂x_i`, `k = n`.
    Translations { dim: usize },
    /// `F_{(a,b)} = x_b ∂/∂x_a`, `k = n²`; the flow of `ẋ = U(t)x`.
    Linear { dim: usize },
    /// Fourteen fields on ℝ²: two constants, two Gaussian-weighted constants,
    /// four linear fields and six Gaussian-weighted quadratics.
    Hermite2d { zeta: f64 },
    /// Constants and Gaussian-weighted constants on ℝⁿ, `k = 2n`.
    HermiteNd { dim: usize, zeta: f64 },
}

/// Monomials `x1², x1·x2, x2²` of the quadratic channels.
#[inline]
fn quad_monomials(x: &[f64]) -> [f64; 3] {
    [x[0] * x[0], x[0] * x[1], x[1] * x[1]]
}

#[inline]
fn gaussian(x: &[f64], zeta: f64) -> f64 {
    let r2: f64 = x.iter().map(|c| c * c).sum();
    (-r2 / (2.0 * zeta)).exp()
}

impl FieldFamily {
    pub fn hermite2d(zeta: f64) -> Result<Self> {
        check_zeta(zeta)?;
        Ok(Self::Hermite2d { zeta })
    }

    pub fn hermite_nd(dim: usize, zeta: f64) -> Result<Self> {
        check_zeta(zeta)?;
        check_dim(dim)?;
        Ok(Self::HermiteNd { dim, zeta })
    }

    pub fn translations(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::Translations { dim })
    }

    pub fn linear(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::Linear { dim })
    }
}

fn check_zeta(zeta: f64) -> Result<()> {
    if zeta > 0.0 && zeta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("zeta must be positive, got {zeta}")))
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::InvalidParameter("dimension must be positive".into()))
    } else {
        Ok(())
    }
}

impl ControlledField for FieldFamily {
    fn dim(&self) -> usize {
        match *self {
            Self::Translations { dim } | Self::Linear { dim } | Self::HermiteNd { dim, .. } => dim,
            Self::Hermite2d { .. } => 2,
        }
    }

    fn channels(&self) -> usize {
        match *self {
            Self::Translations { dim } => dim,
            Self::Linear { dim } => dim * dim,
            Self::Hermite2d { .. } => 14,
            Self::HermiteNd { dim, .. } => 2 * dim,
        }
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let (n, k) = (self.dim(), self.channels());
        out[..n * k].fill(0.0);
        match *self {
            Self::Translations { .. } => {
                for a in 0..n {
                    out[a * k + a] = 1.0;
                }
            }
            Self::Linear { .. } => {
                for a in 0..n {
                    for b in 0..n {
                        out[a * k + a * n + b] = x[b];
                    }
                }
            }
            Self::Hermite2d { zeta } => {
                let g = gaussian(x, zeta);
                let mono = quad_monomials(x);
                for a in 0..2 {
                    let row = &mut out[a * k..(a + 1) * k];
                    row[a] = 1.0;
                    row[2 + a] = g;
                    row[4 + 2 * a] = x[0];
                    row[4 + 2 * a + 1] = x[1];
                    for (m, mono_m) in mono.iter().enumerate() {
                        row[8 + 3 * a + m] = g * mono_m;
                    }
                }
            }
            Self::HermiteNd { zeta, .. } => {
                let g = gaussian(x, zeta);
                for a in 0..n {
                    out[a * k + a] = 1.0;
                    out[a * k + n + a] = g;
                }
            }
        }
    }

    fn velocity_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        let n = self.dim();
        match *self {
            Self::Translations { .. } => out[..n].copy_from_slice(&u[..n]),
            Self::Linear { .. } => {
                for a in 0..n {
                    out[a] = (0..n).map(|b| u[a * n + b] * x[b]).sum();
                }
            }
            Self::Hermite2d { zeta } => {
                let g = gaussian(x, zeta);
                let mono = quad_monomials(x);
                for a in 0..2 {
                    let quad: f64 = (0..3).map(|m| u[8 + 3 * a + m] * mono[m]).sum();
                    out[a] = u[a]
                        + g * u[2 + a]
                        + u[4 + 2 * a] * x[0]
                        + u[4 + 2 * a + 1] * x[1]
                        + g * quad;
                }
            }
            Self::HermiteNd { zeta, .. } => {
                let g = gaussian(x, zeta);
                for a in 0..n {
                    out[a] = u[a] + g * u[n + a];
                }
            }
        }
    }

    fn jacobian_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        let n = self.dim();
        out[..n * n].fill(0.0);
        match *self {
            Self::Translations { .. } => {}
            Self::Linear { .. } => out[..n * n].copy_from_slice(&u[..n * n]),
            Self::Hermite2d { zeta } => {
                let g = gaussian(x, zeta);
                let mono = quad_monomials(x);
                // ∂(x1², x1x2, x2²)/∂x_c
                let dmono = [[2.0 * x[0], x[1], 0.0], [0.0, x[0], 2.0 * x[1]]];
                for a in 0..2 {
                    let weighted = u[2 + a] + (0..3).map(|m| u[8 + 3 * a + m] * mono[m]).sum::<f64>();
                    for c in 0..2 {
                        let dg = -x[c] / zeta * g;
                        let dquad: f64 = (0..3).map(|m| u[8 + 3 * a + m] * dmono[c][m]).sum();
                        out[a * 2 + c] = u[4 + 2 * a + c] + dg * weighted + g * dquad;
                    }
                }
            }
            Self::HermiteNd { zeta, .. } => {
                let g = gaussian(x, zeta);
                for a in 0..n {
                    for c in 0..n {
                        out[a * n + c] = u[n + a] * (-x[c] / zeta) * g;
                    }
                }
            }
        }
    }

    fn lipschitz_constant(&self) -> f64 {
        match *self {
            Self::Translations { .. } => 0.0,
            Self::Linear { .. } => 1.0,
            Self::Hermite2d { zeta } => {
                // sup|∇g| = e^{-1/2}/√ζ at |x| = √ζ. For g·m with m a quadratic
                // monomial, |∇(g m)| ≤ g(|∇m| + |m||x|/ζ) ≤ e^{-r²/2ζ}(2r + r³/ζ),
                // maximized at r² = 2ζ with value 4√(2ζ)/e.
                let gauss_const = (-0.5f64).exp() / zeta.sqrt();
                let gauss_quad = 4.0 * (2.0 * zeta).sqrt() / std::f64::consts::E;
                gauss_const.max(gauss_quad).max(1.0)
            }
            Self::HermiteNd { zeta, .. } => (-0.5f64).exp() / zeta.sqrt(),
        }
    }

    fn growth_constant(&self) -> f64 {
        match *self {
            Self::Translations { .. } | Self::Linear { .. } | Self::HermiteNd { .. } => 1.0,
            // sup g·r² = 2ζ/e at r² = 2ζ
            Self::Hermite2d { zeta } => (2.0 * zeta / std::f64::consts::E).max(1.0),
        }
    }

    fn descriptor(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for FieldFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Translations { dim } => write!(f, "translations:n={dim}"),
            Self::Linear { dim } => write!(f, "linear:n={dim}"),
            Self::Hermite2d { zeta } => write!(f, "hermite2d:zeta={zeta}"),
            Self::HermiteNd { dim, zeta } => write!(f, "hermitend:n={dim},zeta={zeta}"),
        }
    }
}

impl FromStr for FieldFamily {
    type Err = Error;

    /// Parses descriptors such as `hermite2d:zeta=10`, `translations:n=2`,
    /// `linear:n=1` or `hermitend:n=3,zeta=5`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, params) = s.split_once(':').unwrap_or((s, ""));
        let mut dim = None;
        let mut zeta = None;
        for kv in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| Error::UnknownField(s.to_string()))?;
            let bad = || Error::UnknownField(s.to_string());
            match key.trim() {
                "n" | "dim" => dim = Some(value.trim().parse::<usize>().map_err(|_| bad())?),
                "zeta" => zeta = Some(value.trim().parse::<f64>().map_err(|_| bad())?),
                _ => return Err(bad()),
            }
        }
        match name.trim().to_ascii_lowercase().as_str() {
            "translations" => Self::translations(dim.unwrap_or(2)),
            "linear" => Self::linear(dim.unwrap_or(2)),
            "hermite2d" => {
                if dim.is_some_and(|d| d != 2) {
                    return Err(Error::UnknownField(s.to_string()));
                }
                Self::hermite2d(zeta.unwrap_or(10.0))
            }
            "hermitend" => Self::hermite_nd(dim.unwrap_or(2), zeta.unwrap_or(10.0)),
            _ => Err(Error::UnknownField(s.to_string())),
        }
    }
}

impl Serialize for FieldFamily {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FieldFamily {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
