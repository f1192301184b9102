//! Time evolution under `H = |p - (e/c) A|^2 / 2m` and conservation monitors.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::fields::{curl, FieldError, GaugePotential, PhysicalConstants};
use crate::flows::rk4_step;
use crate::observables::{EvalError, HamiltonianFn, PhaseFunction, PhasePoint};

/// Default time steps per cyclotron period.
pub const STEPS_PER_PERIOD: f64 = 2000.0;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("duration must be positive and finite, got {0}")]
    InvalidDuration(f64),
    #[error("field vanishes at the start point; an explicit time step is required")]
    NoDefaultStep,
    #[error("trajectory diverged at t = {0}")]
    Divergence(f64),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("export failed: {0}")]
    Export(#[from] csv::Error),
    #[error("export failed: {0}")]
    Io(#[from] std::io::Error),
}

pub fn hamiltonian(
    state: &PhasePoint,
    a: &GaugePotential,
    consts: &PhysicalConstants,
) -> Result<f64, FieldError> {
    let pi = state.kinematical(a, consts)?;
    Ok(pi.dot(&pi) / (2.0 * consts.m_f64()))
}

/// `2 pi m c / (e |B(x)|)`, or `None` where the field vanishes.
pub fn cyclotron_period(
    a: &GaugePotential,
    consts: &PhysicalConstants,
    x: crate::fields::Vec3,
) -> Result<Option<f64>, FieldError> {
    let b = curl(a)?.eval(x)?.norm();
    if b == 0.0 {
        return Ok(None);
    }
    Ok(Some(
        2.0 * PI * consts.m_f64() * consts.c_f64() / (consts.e_f64() * b),
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    pub gauge: String,
    pub dt: f64,
    #[serde(skip)]
    pub potential: GaugePotential,
    #[serde(skip)]
    pub consts: PhysicalConstants,
}

/// Integrate Hamilton's equations in canonical variables over `[0, duration]`.
/// With `dt = None` the step is a 2000th of the local cyclotron period at the
/// start point.
pub fn integrate_trajectory(
    start: &PhasePoint,
    a: &GaugePotential,
    consts: &PhysicalConstants,
    duration: f64,
    dt: Option<f64>,
) -> Result<Trajectory, DynamicsError> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(DynamicsError::InvalidDuration(duration));
    }
    let dt = match dt {
        Some(dt) => dt,
        None => {
            cyclotron_period(a, consts, start.x)?.ok_or(DynamicsError::NoDefaultStep)?
                / STEPS_PER_PERIOD
        }
    };
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    let n = ((duration / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = duration / n as f64;
    let ham = HamiltonianFn::new(a.clone(), consts);
    let mut z = start.to_array();
    let mut traj = Trajectory {
        times: Vec::with_capacity(n + 1),
        states: Vec::with_capacity(n + 1),
        gauge: a.label.clone(),
        dt: h,
        potential: a.clone(),
        consts: consts.clone(),
    };
    traj.times.push(0.0);
    traj.states.push(*start);
    for i in 1..=n {
        z = rk4_step(&ham, &z, h)?;
        let t = h * i as f64;
        if !z.iter().all(|v| v.is_finite()) {
            return Err(DynamicsError::Divergence(t));
        }
        traj.times.push(t);
        traj.states.push(PhasePoint::from_array(z));
    }
    Ok(traj)
}

impl Trajectory {
    pub fn end(&self) -> &PhasePoint {
        self.states
            .last()
            .expect("trajectory has at least one sample")
    }

    pub fn kinematical(&self) -> Result<Vec<crate::fields::Vec3>, FieldError> {
        self.states
            .iter()
            .map(|z| z.kinematical(&self.potential, &self.consts))
            .collect()
    }

    /// CSV with `t, x1..x3, p1..p3, pi1..pi3, H` and one column per monitor.
    pub fn write_csv<W: Write>(
        &self,
        out: W,
        monitors: &[&dyn PhaseFunction],
    ) -> Result<(), DynamicsError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = [
            "t", "x1", "x2", "x3", "p1", "p2", "p3", "pi1", "pi2", "pi3", "H",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(monitors.iter().map(|m| m.label().to_string()));
        w.write_record(&header)?;
        for (t, z) in self.times.iter().zip(&self.states) {
            let pi = z.kinematical(&self.potential, &self.consts)?;
            let mut row = vec![t.to_string()];
            row.extend(z.to_array().iter().map(f64::to_string));
            row.extend(pi.0.iter().map(f64::to_string));
            row.push(hamiltonian(z, &self.potential, &self.consts)?.to_string());
            for m in monitors {
                row.push(m.value(z)?.to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `max_t |O(t) - O(0)| / max(1, |O(0)|)`.
pub fn drift(traj: &Trajectory, o: &dyn PhaseFunction) -> Result<f64, EvalError> {
    let first = o.value(&traj.states[0])?;
    let scale = first.abs().max(1.0);
    let mut worst = 0.0_f64;
    for z in &traj.states {
        worst = worst.max((o.value(z)? - first).abs() / scale);
    }
    Ok(worst)
}

/// Largest deviation between the central-difference `dpi/dt` and the
/// Lorentz force `(e/c) v x B` over interior samples.
pub fn lorentz_residual(traj: &Trajectory) -> Result<f64, FieldError> {
    let field = curl(&traj.potential)?;
    let pis = traj.kinematical()?;
    let q = traj.consts.coupling_f64();
    let m = traj.consts.m_f64();
    let mut worst = 0.0_f64;
    for i in 1..traj.states.len().saturating_sub(1) {
        let dt = traj.times[i + 1] - traj.times[i - 1];
        let dpi = (pis[i + 1] - pis[i - 1]) * (1.0 / dt);
        let v = pis[i] * (1.0 / m);
        let force = v.cross(&field.eval(traj.states[i].x)?) * q;
        worst = worst.max((dpi - force).norm());
    }
    Ok(worst)
}
