//! Explicit-Euler flows, implicit-Euler costates and the a-priori flow bounds.

use crate::control::ControlSchedule;
use crate::error::{Error, Result};
use crate::field::ControlledField;
use crate::linalg;

/// States `z⁰ … z^M` of one atom on the uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    states: Vec<f64>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of grid nodes, `M + 1`.
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, l: usize) -> &[f64] {
        &self.states[l * self.dim..(l + 1) * self.dim]
    }

    pub fn initial(&self) -> &[f64] {
        self.state(0)
    }

    /// `Φ_u(x₀)`.
    pub fn terminal(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks(self.dim)
    }
}

pub(crate) fn check_compat<F: ControlledField + ?Sized>(
    field: &F,
    u: &ControlSchedule,
    dim: usize,
) -> Result<()> {
    if field.channels() != u.channels() {
        return Err(Error::Shape(format!(
            "field has {} channels, control has {}",
            field.channels(),
            u.channels()
        )));
    }
    if field.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            got: dim,
        });
    }
    Ok(())
}

/// One explicit Euler step `z + h F(z) u_l`, written to `out`.
#[inline]
pub(crate) fn euler_step<F: ControlledField + ?Sized>(
    field: &F,
    z: &[f64],
    u_l: &[f64],
    h: f64,
    velocity: &mut [f64],
    out: &mut [f64],
) -> bool {
    field.velocity_into(z, u_l, velocity);
    let mut finite = true;
    for a in 0..z.len() {
        out[a] = z[a] + h * velocity[a];
        finite &= out[a].is_finite();
    }
    finite
}

/// Integrates `ẋ = F(x)u` from `x0` with `M` explicit Euler steps.
///
/// Fails with [`Error::FlowBlowUp`] at the first step producing a non-finite
/// state.
pub fn flow_forward<F: ControlledField + ?Sized>(
    field: &F,
    u: &ControlSchedule,
    x0: &[f64],
) -> Result<Trajectory> {
    let n = x0.len();
    check_compat(field, u, n)?;
    if x0.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("initial state".into()));
    }
    let m = u.steps();
    let h = u.step_size();
    let mut states = vec![0.0; (m + 1) * n];
    states[..n].copy_from_slice(x0);
    let mut velocity = vec![0.0; n];
    for l in 0..m {
        let (done, rest) = states.split_at_mut((l + 1) * n);
        let z = &done[l * n..];
        if !euler_step(field, z, u.step(l), h, &mut velocity, &mut rest[..n]) {
            return Err(Error::FlowBlowUp {
                step: l + 1,
                atom: None,
            });
        }
    }
    Ok(Trajectory { dim: n, states })
}

/// Drives every point simultaneously with the same control.
pub fn flow_map<F: ControlledField + ?Sized>(
    field: &F,
    u: &ControlSchedule,
    points: &[Vec<f64>],
) -> Result<Vec<Trajectory>> {
    points
        .iter()
        .enumerate()
        .map(|(i, x)| {
            flow_forward(field, u, x).map_err(|e| match e {
                Error::FlowBlowUp { step, .. } => Error::FlowBlowUp {
                    step,
                    atom: Some(i),
                },
                other => other,
            })
        })
        .collect()
}

/// Backward implicit-Euler costate recursion
/// `λ^{l-1} (I − h A_l) = λ^l`, `A_l = ∂(F(z^{l-1}) u_l)/∂z`, from `λ^M`.
///
/// Returns `λ⁰ … λ^M`.
pub fn costate_backward<F: ControlledField + ?Sized>(
    field: &F,
    u: &ControlSchedule,
    traj: &Trajectory,
    lambda_m: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let n = traj.dim();
    check_compat(field, u, n)?;
    if traj.len() != u.steps() + 1 || lambda_m.len() != n {
        return Err(Error::Shape(
            "trajectory or terminal covector does not match the control".into(),
        ));
    }
    let m = u.steps();
    let mut out = vec![Vec::new(); m + 1];
    out[m] = lambda_m.to_vec();
    let mut scratch = CostateScratch::new(n);
    for l in (1..=m).rev() {
        let mut next = out[l].clone();
        scratch.implicit_step(field, traj.state(l - 1), u.step(l - 1), u.step_size(), &mut next)
            .ok_or(Error::SingularCostate { step: l })?;
        out[l - 1] = next;
    }
    Ok(out)
}

/// Reusable buffers for one implicit costate step.
pub(crate) struct CostateScratch {
    n: usize,
    jac: Vec<f64>,
    sys: Vec<f64>,
}

impl CostateScratch {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            n,
            jac: vec![0.0; n * n],
            sys: vec![0.0; n * n],
        }
    }

    /// Overwrites `lambda` (holding `λ^l`) with `λ^{l-1}`.
    pub(crate) fn implicit_step<F: ControlledField + ?Sized>(
        &mut self,
        field: &F,
        z_prev: &[f64],
        u_l: &[f64],
        h: f64,
        lambda: &mut [f64],
    ) -> Option<()> {
        let n = self.n;
        field.jacobian_into(z_prev, u_l, &mut self.jac);
        // (I − hA)ᵀ λᵀ = λ^lᵀ
        for r in 0..n {
            for c in 0..n {
                let id = if r == c { 1.0 } else { 0.0 };
                self.sys[r * n + c] = id - h * self.jac[c * n + r];
            }
        }
        linalg::solve_in_place(&mut self.sys, lambda, n)
    }
}

/// Radius `R = (r + C√k ρ) e^{√k ρ}` containing `Φ_u(x)` for `|x| ≤ r` and
/// `‖u‖_{L²} ≤ ρ`.
pub fn growth_bound<F: ControlledField + ?Sized>(field: &F, r: f64, rho: f64) -> f64 {
    let sk = (field.channels() as f64).sqrt();
    (r + field.growth_constant() * sk * rho) * (sk * rho).exp()
}

/// Lipschitz constant `e^{L√k ρ}` of `Φ_u` for `‖u‖_{L²} ≤ ρ`.
pub fn lipschitz_bound<F: ControlledField + ?Sized>(field: &F, rho: f64) -> f64 {
    (field.lipschitz_constant() * (field.channels() as f64).sqrt() * rho).exp()
}

/// States `z^l`, `l = round(tM)`, of every point: the partial flow `Φ_u^{(0,t)}`.
pub fn flow_prefix_map<F: ControlledField + ?Sized>(
    field: &F,
    u: &ControlSchedule,
    points: &[Vec<f64>],
    t: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("time {t} outside [0, 1]")));
    }
    let l = (t * u.steps() as f64).round() as usize;
    Ok(flow_map(field, u, points)?
        .iter()
        .map(|traj| traj.state(l).to_vec())
        .collect())
}
