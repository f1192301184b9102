//! Phase-space observables and Poisson brackets.
//!
//! Variables are ordered `(x1, x2, x3, p1, p2, p3)`; after
//! [`substitute_kinematical`] the last three slots hold the kinematical
//! momentum `pi` instead of `p`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{FieldError, GaugePotential, PhysicalConstants, Vec3, DEFAULT_FD_STEP};
use crate::poly::{CompiledPoly, Polynomial, Rational, SpatialPoly};

pub type PolyObservable = Polynomial<6>;

pub const PHASE_NAMES: [&str; 6] = ["x1", "x2", "x3", "p1", "p2", "p3"];
pub const KINEMATICAL_NAMES: [&str; 6] = ["x1", "x2", "x3", "pi1", "pi2", "pi3"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("observable {label:?} is not finite at {at:?}")]
    NonFinite { label: String, at: [f64; 6] },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Position and canonical momentum.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec3,
    pub p: Vec3,
}

impl PhasePoint {
    pub fn new(x: Vec3, p: Vec3) -> Self {
        PhasePoint { x, p }
    }

    pub fn origin() -> Self {
        PhasePoint::default()
    }

    pub fn to_array(&self) -> [f64; 6] {
        let [a, b, c] = self.x.0;
        let [d, e, f] = self.p.0;
        [a, b, c, d, e, f]
    }

    pub fn from_array(z: [f64; 6]) -> Self {
        PhasePoint {
            x: Vec3([z[0], z[1], z[2]]),
            p: Vec3([z[3], z[4], z[5]]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.p.is_finite()
    }

    /// Euclidean distance over the six components.
    pub fn distance(&self, other: &PhasePoint) -> f64 {
        let a = self.to_array();
        let b = other.to_array();
        a.iter()
            .zip(b.iter())
            .map(|(u, v)| (u - v).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Kinematical momentum `p - (e/c) A(x)`.
    pub fn kinematical(
        &self,
        a: &GaugePotential,
        k: &PhysicalConstants,
    ) -> Result<Vec3, FieldError> {
        Ok(self.p - a.eval(self.x)? * k.coupling_f64())
    }

    /// Phase point with the given kinematical momentum at `x`.
    pub fn from_kinematical(
        x: Vec3,
        pi: Vec3,
        a: &GaugePotential,
        k: &PhysicalConstants,
    ) -> Result<Self, FieldError> {
        Ok(PhasePoint::new(x, pi + a.eval(x)? * k.coupling_f64()))
    }
}

pub fn x(i: usize) -> PolyObservable {
    PolyObservable::var(i)
}

pub fn p(i: usize) -> PolyObservable {
    PolyObservable::var(3 + i)
}

/// Lift a position-space polynomial into phase space.
pub fn lift(f: &SpatialPoly) -> PolyObservable {
    f.embed([0, 1, 2])
}

/// Exact Poisson bracket `sum_i (df/dx_i dg/dp_i - df/dp_i dg/dx_i)`.
pub fn poisson(f: &PolyObservable, g: &PolyObservable) -> PolyObservable {
    let mut out = PolyObservable::zero();
    for i in 0..3 {
        out += &f.derivative(i) * &g.derivative(3 + i);
        out -= &(&f.derivative(3 + i) * &g.derivative(i));
    }
    out
}

/// Canonical `1/2m |p - (e/c) A|^2` for polynomial `A`.
pub fn hamiltonian_poly(
    a: &GaugePotential,
    k: &PhysicalConstants,
) -> Result<PolyObservable, FieldError> {
    let comps = a.require_polynomial()?;
    let q = k.coupling();
    let mut h = PolyObservable::zero();
    for i in 0..3 {
        let pi = &p(i) - &lift(&comps[i]).scale(&q);
        h += &pi * &pi;
    }
    Ok(h.scale(&(Rational::from_integer(1.into()) / (&k.m * Rational::from_integer(2.into())))))
}

/// Rewrite `p_i = pi_i + (e/c) A_i(x)`; the result lives in `(x, pi)`.
pub fn substitute_kinematical(
    f: &PolyObservable,
    a: &GaugePotential,
    k: &PhysicalConstants,
) -> Result<PolyObservable, FieldError> {
    let comps = a.require_polynomial()?;
    let q = k.coupling();
    let subs: [PolyObservable; 6] = std::array::from_fn(|i| {
        if i < 3 {
            x(i)
        } else {
            &p(i - 3) + &lift(&comps[i - 3]).scale(&q)
        }
    });
    Ok(f.compose(&subs))
}

/// Rewrite an `(x, pi)` polynomial back to canonical `(x, p)`.
pub fn substitute_canonical(
    f: &PolyObservable,
    a: &GaugePotential,
    k: &PhysicalConstants,
) -> Result<PolyObservable, FieldError> {
    let comps = a.require_polynomial()?;
    let q = k.coupling();
    let subs: [PolyObservable; 6] = std::array::from_fn(|i| {
        if i < 3 {
            x(i)
        } else {
            &p(i - 3) - &lift(&comps[i - 3]).scale(&q)
        }
    });
    Ok(f.compose(&subs))
}

/// Anything that can drive a Hamiltonian flow: a value and a phase-space gradient.
pub trait PhaseFunction: Send + Sync {
    fn label(&self) -> &str;
    fn value(&self, z: &PhasePoint) -> Result<f64, EvalError>;
    /// `(dF/dx1, dF/dx2, dF/dx3, dF/dp1, dF/dp2, dF/dp3)`
    fn gradient(&self, z: &PhasePoint) -> Result<[f64; 6], EvalError>;
}

/// A polynomial observable with precompiled f64 value and gradient.
#[derive(Clone)]
pub struct CompiledObservable {
    label: String,
    value: CompiledPoly<6>,
    grad: [CompiledPoly<6>; 6],
}

impl CompiledObservable {
    pub fn new(label: impl Into<String>, f: &PolyObservable) -> Self {
        CompiledObservable {
            label: label.into(),
            value: f.compile(),
            grad: std::array::from_fn(|i| f.derivative(i).compile()),
        }
    }
}

impl PhaseFunction for CompiledObservable {
    fn label(&self) -> &str {
        &self.label
    }

    fn value(&self, z: &PhasePoint) -> Result<f64, EvalError> {
        let v = self.value.eval(&z.to_array());
        finite(v, &self.label, z)
    }

    fn gradient(&self, z: &PhasePoint) -> Result<[f64; 6], EvalError> {
        let at = z.to_array();
        let g = self.grad.each_ref().map(|d| d.eval(&at));
        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(EvalError::NonFinite {
                label: self.label.clone(),
                at,
            })
        }
    }
}

fn finite(v: f64, label: &str, z: &PhasePoint) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite {
            label: label.to_string(),
            at: z.to_array(),
        })
    }
}

type ValueFn = Arc<dyn Fn(&PhasePoint) -> Result<f64, EvalError> + Send + Sync>;
type GradientFn = Arc<dyn Fn(&PhasePoint) -> Result<[f64; 6], EvalError> + Send + Sync>;

/// Black-box observable with an optional analytic gradient.
#[derive(Clone)]
pub struct NumericObservable {
    pub label: String,
    value: ValueFn,
    gradient: Option<GradientFn>,
    /// Relative base step used when no analytic gradient is supplied.
    pub fd_step: f64,
}

impl fmt::Debug for NumericObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NumericObservable")
            .field("label", &self.label)
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl NumericObservable {
    pub fn new<F>(label: impl Into<String>, value: F) -> Self
    where
        F: Fn(&PhasePoint) -> Result<f64, EvalError> + Send + Sync + 'static,
    {
        NumericObservable {
            label: label.into(),
            value: Arc::new(value),
            gradient: None,
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn with_gradient<G>(mut self, gradient: G) -> Self
    where
        G: Fn(&PhasePoint) -> Result<[f64; 6], EvalError> + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn from_poly(label: impl Into<String>, f: &PolyObservable) -> Self {
        let c = Arc::new(CompiledObservable::new(label, f));
        let (cv, cg) = (c.clone(), c.clone());
        NumericObservable::new(c.label.clone(), move |z| cv.value(z))
            .with_gradient(move |z| cg.gradient(z))
    }

    /// `pi_k = p_k - (e/c) A_k(x)` for any kind of potential.
    pub fn kinematical_momentum(a: &GaugePotential, k: usize, consts: &PhysicalConstants) -> Self {
        let q = consts.coupling_f64();
        let (av, ag) = (a.clone(), a.clone());
        NumericObservable::new(format!("pi{}[{}]", k + 1, a.label), move |z| {
            Ok(z.p[k] - q * av.eval(z.x)?[k])
        })
        .with_gradient(move |z| {
            let jac = ag.jacobian(z.x)?;
            let mut g = [0.0; 6];
            for j in 0..3 {
                g[j] = -q * jac[k][j];
            }
            g[3 + k] = 1.0;
            Ok(g)
        })
    }

    /// `H = |p - (e/c) A|^2 / 2m` for any kind of potential.
    pub fn hamiltonian(a: &GaugePotential, consts: &PhysicalConstants) -> Self {
        let h = Arc::new(HamiltonianFn::new(a.clone(), consts));
        let (hv, hg) = (h.clone(), h.clone());
        NumericObservable::new(format!("H[{}]", a.label), move |z| hv.value(z))
            .with_gradient(move |z| hg.gradient(z))
    }
}

impl PhaseFunction for NumericObservable {
    fn label(&self) -> &str {
        &self.label
    }

    fn value(&self, z: &PhasePoint) -> Result<f64, EvalError> {
        let v = (self.value)(z)?;
        finite(v, &self.label, z)
    }

    fn gradient(&self, z: &PhasePoint) -> Result<[f64; 6], EvalError> {
        if let Some(g) = &self.gradient {
            return g(z);
        }
        let at = z.to_array();
        let mut g = [0.0; 6];
        for (i, gi) in g.iter_mut().enumerate() {
            let h = self.fd_step * at[i].abs().max(1.0);
            let mut up = at;
            let mut dn = at;
            up[i] += h;
            dn[i] -= h;
            let fu = self.value(&PhasePoint::from_array(up))?;
            let fd = self.value(&PhasePoint::from_array(dn))?;
            *gi = (fu - fd) / (2.0 * h);
        }
        Ok(g)
    }
}

/// Hamiltonian of a charged particle in a static magnetic field.
#[derive(Clone, Debug)]
pub struct HamiltonianFn {
    a: GaugePotential,
    coupling: f64,
    mass: f64,
}

impl HamiltonianFn {
    pub fn new(a: GaugePotential, consts: &PhysicalConstants) -> Self {
        HamiltonianFn {
            a,
            coupling: consts.coupling_f64(),
            mass: consts.m_f64(),
        }
    }
}

impl PhaseFunction for HamiltonianFn {
    fn label(&self) -> &str {
        "H"
    }

    fn value(&self, z: &PhasePoint) -> Result<f64, EvalError> {
        let pi = z.p - self.a.eval(z.x)? * self.coupling;
        finite(pi.dot(&pi) / (2.0 * self.mass), "H", z)
    }

    fn gradient(&self, z: &PhasePoint) -> Result<[f64; 6], EvalError> {
        let pi = z.p - self.a.eval(z.x)? * self.coupling;
        let jac = self.a.jacobian(z.x)?;
        let mut g = [0.0; 6];
        for j in 0..3 {
            let s: f64 = (0..3).map(|i| pi[i] * jac[i][j]).sum();
            g[j] = -self.coupling * s / self.mass;
            g[3 + j] = pi[j] / self.mass;
        }
        Ok(g)
    }
}

/// Poisson bracket at a point. Uses analytic gradients when both sides
/// provide them, central differences with relative step `h` otherwise.
pub fn poisson_numeric(
    f: &NumericObservable,
    g: &NumericObservable,
    at: &PhasePoint,
    h: f64,
) -> Result<f64, EvalError> {
    let with_step = |o: &NumericObservable| {
        let mut o = o.clone();
        o.fd_step = h;
        if !(f.has_gradient() && g.has_gradient()) {
            o.gradient = None;
        }
        o
    };
    let (f, g) = (with_step(f), with_step(g));
    let df = f.gradient(at)?;
    let dg = g.gradient(at)?;
    Ok(bracket_of_gradients(&df, &dg))
}

pub fn bracket_of_gradients(df: &[f64; 6], dg: &[f64; 6]) -> f64 {
    (0..3).map(|i| df[i] * dg[3 + i] - df[3 + i] * dg[i]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{builtin, Builtin};
    use crate::poly::{int, rat};

    #[test]
    fn canonical_pairs() {
        assert_eq!(poisson(&x(0), &p(0)), PolyObservable::one());
        assert!(poisson(&x(0), &p(1)).is_zero());
        assert!(poisson(&p(0), &p(1)).is_zero());
        assert_eq!(poisson(&p(0), &x(0)), -PolyObservable::one());
    }

    #[test]
    fn product_rule() {
        assert_eq!(poisson(&(&x(0) * &p(1)), &p(0)), p(1));
    }

    #[test]
    fn numeric_bracket_by_differences() {
        let f = NumericObservable::new("x1p2", |z| Ok(z.x[0] * z.p[1]));
        let g = NumericObservable::new("p1", |z| Ok(z.p[0]));
        let at = PhasePoint::new(Vec3::new(1.0, 2.0, 3.0), Vec3::new(4.0, 5.0, 6.0));
        let v = poisson_numeric(&f, &g, &at, DEFAULT_FD_STEP).unwrap();
        assert!((v - 5.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn self_bracket_is_exactly_zero_with_gradients() {
        let f = NumericObservable::from_poly("f", &(&(&x(0) * &p(1)) + &(&x(2) * &x(2))));
        let at = PhasePoint::new(Vec3::new(0.3, -2.0, 1.7), Vec3::new(4.0, 0.5, -6.0));
        assert_eq!(poisson_numeric(&f, &f, &at, DEFAULT_FD_STEP).unwrap(), 0.0);
    }

    #[test]
    fn dipole_kinematical_bracket() {
        let k = PhysicalConstants::default();
        let a = builtin(&Builtin::Dipole {
            moment: [int(0), int(0), int(1)],
        });
        let pi1 = NumericObservable::kinematical_momentum(&a, 0, &k);
        let pi2 = NumericObservable::kinematical_momentum(&a, 1, &k);
        let at = PhasePoint::new(Vec3::new(1.0, 0.0, 0.0), Vec3::ZERO);
        let v = poisson_numeric(&pi1, &pi2, &at, DEFAULT_FD_STEP).unwrap();
        assert!((v + 1.0).abs() < 1e-12, "{v}");
        // same bracket without analytic gradients
        let strip = |o: &NumericObservable| {
            let o = o.clone();
            NumericObservable::new(o.label.clone(), move |z| o.value(z))
        };
        let v = poisson_numeric(&strip(&pi1), &strip(&pi2), &at, DEFAULT_FD_STEP).unwrap();
        assert!((v + 1.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn non_finite_is_an_error() {
        let f = NumericObservable::new("inv", |z| Ok(1.0 / z.x[0]));
        let g = NumericObservable::new("p1", |z| Ok(z.p[0]));
        assert!(matches!(
            poisson_numeric(&f, &g, &PhasePoint::origin(), DEFAULT_FD_STEP),
            Err(EvalError::NonFinite { .. })
        ));
    }

    #[test]
    fn kinematical_substitution() {
        let k = PhysicalConstants::default();
        assert_eq!(
            substitute_kinematical(&p(0), &GaugePotential::zero(), &k).unwrap(),
            p(0)
        );
        let a = builtin(&Builtin::Symmetric {
            b: [int(0), int(0), int(2)],
        });
        // p2 = pi2 + x1 in this gauge
        assert_eq!(
            substitute_kinematical(&p(1), &a, &k).unwrap(),
            &p(1) + &x(0)
        );
        let h = hamiltonian_poly(&a, &k).unwrap();
        let back = substitute_kinematical(&h, &a, &k).unwrap();
        let free = (0..3)
            .fold(PolyObservable::zero(), |acc, i| acc + &p(i) * &p(i))
            .scale(&rat(1, 2));
        assert_eq!(back, free);
        assert_eq!(substitute_canonical(&back, &a, &k).unwrap(), h);
    }

    #[test]
    fn substitution_rejects_blackbox() {
        let a = builtin(&Builtin::Dipole {
            moment: [int(0), int(0), int(1)],
        });
        assert!(substitute_kinematical(&p(0), &a, &PhysicalConstants::default()).is_err());
    }

    #[test]
    fn hamiltonian_gradient_matches_polynomial() {
        let k = PhysicalConstants::new(int(2), int(3), rat(1, 2), int(1)).unwrap();
        let a = builtin(&Builtin::Gradient {
            b0: int(1),
            beta: rat(1, 2),
        });
        let exact = CompiledObservable::new("H", &hamiltonian_poly(&a, &k).unwrap());
        let h = HamiltonianFn::new(a, &k);
        let z = PhasePoint::new(Vec3::new(0.4, -1.2, 0.9), Vec3::new(1.1, 0.2, -0.3));
        assert!((h.value(&z).unwrap() - exact.value(&z).unwrap()).abs() < 1e-13);
        let (g1, g2) = (h.gradient(&z).unwrap(), exact.gradient(&z).unwrap());
        for i in 0..6 {
            assert!((g1[i] - g2[i]).abs() < 1e-13);
        }
    }
}
