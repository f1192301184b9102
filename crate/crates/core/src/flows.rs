//! One-parameter canonical flows generated by phase-space functions, the
//! closed-form finite passive translation, and numeric canonicity tests for
//! finite maps.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::fields::{Axis, FieldError, GaugePotential, PhysicalConstants};
use crate::observables::{EvalError, PhaseFunction, PhasePoint};

/// Integration steps per flow call when no explicit step is given.
pub const DEFAULT_FLOW_STEPS: usize = 1000;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("flow of {label:?} diverged at s = {s}")]
    Divergence { label: String, s: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("export failed: {0}")]
    Export(#[from] csv::Error),
    #[error("export failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Hamilton's equations for generator `g`: `dx/ds = dG/dp`, `dp/ds = -dG/dx`.
pub fn hamilton_vector_field(g: &dyn PhaseFunction, z: &[f64; 6]) -> Result<[f64; 6], EvalError> {
    let grad = g.gradient(&PhasePoint::from_array(*z))?;
    Ok([grad[3], grad[4], grad[5], -grad[0], -grad[1], -grad[2]])
}

/// One classical fourth-order Runge-Kutta step of size `h`.
pub fn rk4_step(g: &dyn PhaseFunction, z: &[f64; 6], h: f64) -> Result<[f64; 6], EvalError> {
    let add = |a: &[f64; 6], b: &[f64; 6], s: f64| -> [f64; 6] {
        std::array::from_fn(|i| a[i] + s * b[i])
    };
    let k1 = hamilton_vector_field(g, z)?;
    let k2 = hamilton_vector_field(g, &add(z, &k1, h / 2.0))?;
    let k3 = hamilton_vector_field(g, &add(z, &k2, h / 2.0))?;
    let k4 = hamilton_vector_field(g, &add(z, &k3, h))?;
    Ok(std::array::from_fn(|i| {
        z[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    }))
}

fn step_count(span: f64, step: f64) -> Result<usize, FlowError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(FlowError::InvalidStep(step));
    }
    Ok(((span.abs() / step) - 1e-9).ceil().max(1.0) as usize)
}

/// Advance `start` by parameter `s` along the flow of `g`, with steps no
/// longer than `step`. Negative `s` flows backwards.
pub fn flow(
    g: &dyn PhaseFunction,
    s: f64,
    start: &PhasePoint,
    step: f64,
) -> Result<PhasePoint, FlowError> {
    let n = step_count(s, step)?;
    if s == 0.0 {
        return Ok(*start);
    }
    let h = s / n as f64;
    let mut z = start.to_array();
    for i in 0..n {
        z = rk4_step(g, &z, h)?;
        if !z.iter().all(|v| v.is_finite()) {
            return Err(FlowError::Divergence {
                label: g.label().to_string(),
                s: h * (i + 1) as f64,
            });
        }
    }
    Ok(PhasePoint::from_array(z))
}

/// `flow` with the default resolution `|s| / 1000`.
pub fn flow_default(
    g: &dyn PhaseFunction,
    s: f64,
    start: &PhasePoint,
) -> Result<PhasePoint, FlowError> {
    if s == 0.0 {
        return Ok(*start);
    }
    flow(g, s, start, s.abs() / DEFAULT_FLOW_STEPS as f64)
}

/// Sampled flow, one state per integration step.
#[derive(Clone, Debug, Serialize)]
pub struct FlowPath {
    pub generator: String,
    pub s: Vec<f64>,
    pub states: Vec<PhasePoint>,
    pub method: &'static str,
    pub step: f64,
}

impl FlowPath {
    /// CSV with columns `s, x1..x3, p1..p3, pi1..pi3`.
    pub fn write_csv<W: Write>(
        &self,
        out: W,
        a: &GaugePotential,
        consts: &PhysicalConstants,
    ) -> Result<(), FlowError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s", "x1", "x2", "x3", "p1", "p2", "p3", "pi1", "pi2", "pi3"])?;
        for (s, z) in self.s.iter().zip(&self.states) {
            let pi = z.kinematical(a, consts)?;
            let mut row = vec![s.to_string()];
            row.extend(z.to_array().iter().map(f64::to_string));
            row.extend(pi.0.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn flow_path(
    g: &dyn PhaseFunction,
    s: f64,
    start: &PhasePoint,
    step: f64,
) -> Result<FlowPath, FlowError> {
    let n = step_count(s, step)?;
    let h = s / n as f64;
    let mut z = start.to_array();
    let mut path = FlowPath {
        generator: g.label().to_string(),
        s: vec![0.0],
        states: vec![*start],
        method: "rk4",
        step: h.abs(),
    };
    for i in 0..n {
        z = rk4_step(g, &z, h)?;
        let si = h * (i + 1) as f64;
        if !z.iter().all(|v| v.is_finite()) {
            return Err(FlowError::Divergence {
                label: g.label().to_string(),
                s: si,
            });
        }
        path.s.push(si);
        path.states.push(PhasePoint::from_array(z));
    }
    Ok(path)
}

/// Finite passive translation by `s` along `axis`: positions shift, the
/// kinematical momentum is unchanged, so `p_i(s) = p_i + (e/c)[A_i(x(s)) - A_i(x)]`.
pub fn finite_passive_translation(
    start: &PhasePoint,
    axis: Axis,
    s: f64,
    a: &GaugePotential,
    consts: &PhysicalConstants,
) -> Result<PhasePoint, FieldError> {
    let mut x = start.x;
    x.0[axis.index()] += s;
    let da = a.eval(x)? - a.eval(start.x)?;
    Ok(PhasePoint::new(x, start.p + da * consts.coupling_f64()))
}

/// Fundamental-bracket residuals of a map at one point.
#[derive(Clone, Debug, Serialize)]
pub struct CanonicityResidual {
    pub point: PhasePoint,
    /// `{x_i', p_j'} - delta_ij`
    pub xp: [[f64; 3]; 3],
    /// `{x_i', x_j'}`
    pub xx: [[f64; 3]; 3],
    /// `{p_i', p_j'}`
    pub pp: [[f64; 3]; 3],
}

impl CanonicityResidual {
    pub fn max_abs(&self) -> f64 {
        [self.xp, self.xx, self.pp]
            .iter()
            .flat_map(|m| m.iter().flatten())
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

/// Central-difference Jacobian of a map, then `{z'_a, z'_b} = (M J M^T)_ab`.
pub fn canonicity_report(
    map: &dyn Fn(&PhasePoint) -> Result<PhasePoint, FlowError>,
    points: &[PhasePoint],
    h: f64,
) -> Result<Vec<CanonicityResidual>, FlowError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(FlowError::InvalidStep(h));
    }
    points
        .iter()
        .map(|pt| {
            let at = pt.to_array();
            // jac[a][b] = d z'_a / d z_b
            let mut jac = [[0.0; 6]; 6];
            for b in 0..6 {
                let hb = h * at[b].abs().max(1.0);
                let mut up = at;
                let mut dn = at;
                up[b] += hb;
                dn[b] -= hb;
                let fu = map(&PhasePoint::from_array(up))?.to_array();
                let fd = map(&PhasePoint::from_array(dn))?.to_array();
                for a in 0..6 {
                    let d = (fu[a] - fd[a]) / (2.0 * hb);
                    if !d.is_finite() {
                        return Err(FlowError::Divergence {
                            label: "map".into(),
                            s: 0.0,
                        });
                    }
                    jac[a][b] = d;
                }
            }
            let bracket = |a: usize, b: usize| -> f64 {
                (0..3)
                    .map(|i| jac[a][i] * jac[b][3 + i] - jac[a][3 + i] * jac[b][i])
                    .sum()
            };
            let mut r = CanonicityResidual {
                point: *pt,
                xp: [[0.0; 3]; 3],
                xx: [[0.0; 3]; 3],
                pp: [[0.0; 3]; 3],
            };
            for i in 0..3 {
                for j in 0..3 {
                    r.xp[i][j] = bracket(i, 3 + j) - if i == j { 1.0 } else { 0.0 };
                    r.xx[i][j] = bracket(i, j);
                    r.pp[i][j] = bracket(3 + i, 3 + j);
                }
            }
            Ok(r)
        })
        .collect()
}

/// Phase-space distance between the two orders of composing the flows.
pub fn flow_commutator_gap(
    g1: &dyn PhaseFunction,
    g2: &dyn PhaseFunction,
    s1: f64,
    s2: f64,
    start: &PhasePoint,
    step: f64,
) -> Result<f64, FlowError> {
    let a = flow(g2, s2, &flow(g1, s1, start, step)?, step)?;
    let b = flow(g1, s1, &flow(g2, s2, start, step)?, step)?;
    Ok(a.distance(&b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{builtin, Builtin, Vec3};
    use crate::generators::{origin, passive_translation_generator};
    use crate::observables::{p, CompiledObservable, NumericObservable};
    use crate::poly::int;

    fn uniform() -> GaugePotential {
        builtin(&Builtin::Symmetric {
            b: [int(0), int(0), int(1)],
        })
    }

    #[test]
    fn canonical_momentum_flow_is_a_shift() {
        let g = CompiledObservable::new("p1", &p(0));
        let end = flow(&g, 2.0, &PhasePoint::origin(), 0.01).unwrap();
        assert!((end.x - Vec3::new(2.0, 0.0, 0.0)).norm() < 1e-12);
        assert_eq!(end.p, Vec3::ZERO);
    }

    #[test]
    fn passive_generator_flow() {
        let k = PhysicalConstants::default();
        let a = uniform();
        let g1 = passive_translation_generator(&a, Axis::X1, &k, &origin()).unwrap();
        let g = CompiledObservable::new("G1", &g1.observable);
        let start = PhasePoint::origin();
        let end = flow_default(&g, 1.0, &start).unwrap();
        assert!(
            end.distance(&PhasePoint::new(
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 0.5, 0.0)
            )) < 1e-12
        );
        let pi0 = start.kinematical(&a, &k).unwrap();
        let pi1 = end.kinematical(&a, &k).unwrap();
        assert!((pi0 - pi1).norm() < 1e-12);
    }

    #[test]
    fn invalid_step() {
        let g = CompiledObservable::new("p1", &p(0));
        assert!(matches!(
            flow(&g, 1.0, &PhasePoint::origin(), 0.0),
            Err(FlowError::InvalidStep(_))
        ));
        assert!(matches!(
            flow(&g, 1.0, &PhasePoint::origin(), -1.0),
            Err(FlowError::InvalidStep(_))
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let g = NumericObservable::new("blowup", |z| Ok(z.x[0] * z.p[0] * z.p[0]))
            .with_gradient(|z| Ok([z.p[0] * z.p[0], 0.0, 0.0, 2.0 * z.x[0] * z.p[0], 0.0, 0.0]));
        let start = PhasePoint::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(1e100, 0.0, 0.0));
        assert!(matches!(
            flow(&g, 1.0, &start, 0.1),
            Err(FlowError::Divergence { .. })
        ));
    }

    #[test]
    fn finite_translation_examples() {
        let k = PhysicalConstants::default();
        let z = PhasePoint::new(Vec3::new(0.5, 1.0, -2.0), Vec3::new(1.0, 2.0, 3.0));
        let moved =
            finite_passive_translation(&z, Axis::X2, 0.25, &GaugePotential::zero(), &k).unwrap();
        assert_eq!(moved, PhasePoint::new(Vec3::new(0.5, 1.25, -2.0), z.p));
        let moved =
            finite_passive_translation(&PhasePoint::origin(), Axis::X1, 2.0, &uniform(), &k)
                .unwrap();
        assert_eq!(
            moved,
            PhasePoint::new(Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0))
        );
    }

    #[test]
    fn identity_map_is_canonical() {
        let pts = [
            PhasePoint::origin(),
            PhasePoint::new(Vec3::new(1.0, -2.0, 3.0), Vec3::new(0.1, 0.2, -5.0)),
        ];
        let rep = canonicity_report(&|z| Ok(*z), &pts, 1e-5).unwrap();
        assert!(rep.iter().all(|r| r.max_abs() < 1e-9));
    }

    #[test]
    fn flow_path_csv_has_header_and_rows() {
        let g = CompiledObservable::new("p1", &p(0));
        let path = flow_path(&g, 1.0, &PhasePoint::origin(), 0.25).unwrap();
        assert_eq!(path.s, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let mut buf = Vec::new();
        path.write_csv(&mut buf, &uniform(), &PhysicalConstants::default())
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("s,x1,x2,x3,p1,p2,p3,pi1,pi2,pi3\n"));
        assert_eq!(text.lines().count(), 6);
    }
}
