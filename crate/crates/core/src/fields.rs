//! Vector potentials, magnetic fields and gauge transformations.

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{int, rat, rational_sqrt, to_f64, CompiledPoly, Rational, SpatialPoly};

/// Relative base step for central differences; the absolute step is
/// `DEFAULT_FD_STEP * max(1, |r|)`.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Distance from the dipole below which evaluation is refused.
pub const DIPOLE_CORE_RADIUS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("vector potential {label:?} is singular at {at:?}")]
    Singular { label: String, at: [f64; 3] },
    #[error("black-box potential {0:?} has no finite-difference step configured")]
    StepNotSet(String),
    #[error("operation needs a polynomial vector potential, {0:?} is a black box")]
    NotPolynomial(String),
    #[error("invalid axis {0}; expected 1, 2 or 3")]
    InvalidAxis(i64),
    #[error("non-finite value from potential {0:?}")]
    NonFinite(String),
    #[error("physical constant {0} must be strictly positive")]
    NonPositiveConstant(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Vec3([x1, x2, x3])
    }

    pub fn x1(&self) -> f64 {
        self.0[0]
    }
    pub fn x2(&self) -> f64 {
        self.0[1]
    }
    pub fn x3(&self) -> f64 {
        self.0[2]
    }

    pub fn dot(&self, o: &Vec3) -> f64 {
        self.0.iter().zip(o.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn cross(&self, o: &Vec3) -> Vec3 {
        let [a1, a2, a3] = self.0;
        let [b1, b2, b3] = o.0;
        Vec3([a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1])
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn unit(k: usize) -> Vec3 {
        let mut v = [0.0; 3];
        v[k] = 1.0;
        Vec3(v)
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3(std::array::from_fn(|i| self.0[i] + o.0[i]))
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3(std::array::from_fn(|i| self.0[i] - o.0[i]))
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3(self.0.map(|v| -v))
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3(self.0.map(|v| v * s))
    }
}

/// Cartesian axis `x1`, `x2` or `x3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Axis {
    X1,
    X2,
    X3,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X1, Axis::X2, Axis::X3];

    /// Zero-based index.
    pub fn index(self) -> usize {
        match self {
            Axis::X1 => 0,
            Axis::X2 => 1,
            Axis::X3 => 2,
        }
    }

    pub fn from_index(i: usize) -> Axis {
        Axis::ALL[i]
    }

    pub fn number(self) -> i64 {
        self.index() as i64 + 1
    }
}

impl TryFrom<i64> for Axis {
    type Error = FieldError;
    fn try_from(k: i64) -> Result<Axis, FieldError> {
        match k {
            1 => Ok(Axis::X1),
            2 => Ok(Axis::X2),
            3 => Ok(Axis::X3),
            _ => Err(FieldError::InvalidAxis(k)),
        }
    }
}

impl From<Axis> for i64 {
    fn from(a: Axis) -> i64 {
        a.number()
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.number())
    }
}

/// Levi-Civita symbol on zero-based indices.
pub fn levi_civita(i: usize, j: usize, k: usize) -> i64 {
    if i == j || j == k || i == k {
        return 0;
    }
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1,
        _ => -1,
    }
}

/// Charge `e`, speed of light `c`, mass `m` and `hbar`, all exact and positive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhysicalConstants {
    pub e: Rational,
    pub c: Rational,
    pub m: Rational,
    pub hbar: Rational,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            e: Rational::one(),
            c: Rational::one(),
            m: Rational::one(),
            hbar: Rational::one(),
        }
    }
}

impl PhysicalConstants {
    pub fn new(e: Rational, c: Rational, m: Rational, hbar: Rational) -> Result<Self, FieldError> {
        let zero = Rational::zero();
        for (name, v) in [("e", &e), ("c", &c), ("m", &m), ("hbar", &hbar)] {
            if *v <= zero {
                return Err(FieldError::NonPositiveConstant(name));
            }
        }
        Ok(PhysicalConstants { e, c, m, hbar })
    }

    pub fn with_hbar(&self, hbar: Rational) -> Result<Self, FieldError> {
        Self::new(self.e.clone(), self.c.clone(), self.m.clone(), hbar)
    }

    /// `e / c`.
    pub fn coupling(&self) -> Rational {
        &self.e / &self.c
    }

    pub fn coupling_f64(&self) -> f64 {
        to_f64(&self.coupling())
    }

    pub fn e_f64(&self) -> f64 {
        to_f64(&self.e)
    }
    pub fn c_f64(&self) -> f64 {
        to_f64(&self.c)
    }
    pub fn m_f64(&self) -> f64 {
        to_f64(&self.m)
    }
    pub fn hbar_f64(&self) -> f64 {
        to_f64(&self.hbar)
    }
}

pub type VectorFn = Arc<dyn Fn(Vec3) -> Result<Vec3, FieldError> + Send + Sync>;

#[derive(Clone)]
pub struct Blackbox {
    pub eval: VectorFn,
    /// Relative base step for numeric derivatives; `None` until configured.
    pub fd_step: Option<f64>,
}

#[derive(Clone)]
pub enum PotentialRepr {
    Polynomial {
        components: [SpatialPoly; 3],
        compiled: Arc<CompiledSet>,
    },
    /// `A = mu x r / |r|^3`; black-box kind with closed-form field and Jacobian.
    Dipole {
        moment: [Rational; 3],
    },
    Blackbox(Blackbox),
}

/// Components and their first derivatives in f64 form.
pub struct CompiledSet {
    values: [CompiledPoly<3>; 3],
    /// `jacobian[i][j] = dA_i/dx_j`
    jacobian: [[CompiledPoly<3>; 3]; 3],
}

impl CompiledSet {
    fn new(components: &[SpatialPoly; 3]) -> Self {
        CompiledSet {
            values: std::array::from_fn(|i| components[i].compile()),
            jacobian: std::array::from_fn(|i| {
                std::array::from_fn(|j| components[i].derivative(j).compile())
            }),
        }
    }
}

/// Vector potential, either an exact polynomial or a differentiable black box.
#[derive(Clone)]
pub struct GaugePotential {
    pub label: String,
    pub repr: PotentialRepr,
}

impl fmt::Debug for GaugePotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            PotentialRepr::Polynomial { components, .. } => f
                .debug_struct("GaugePotential")
                .field("label", &self.label)
                .field("A1", &components[0].to_string())
                .field("A2", &components[1].to_string())
                .field("A3", &components[2].to_string())
                .finish(),
            PotentialRepr::Dipole { moment } => f
                .debug_struct("GaugePotential")
                .field("label", &self.label)
                .field("dipole", &moment.iter().map(to_f64).collect::<Vec<_>>())
                .finish(),
            PotentialRepr::Blackbox(b) => f
                .debug_struct("GaugePotential")
                .field("label", &self.label)
                .field("fd_step", &b.fd_step)
                .finish(),
        }
    }
}

impl GaugePotential {
    pub fn polynomial(label: impl Into<String>, components: [SpatialPoly; 3]) -> Self {
        let compiled = Arc::new(CompiledSet::new(&components));
        GaugePotential {
            label: label.into(),
            repr: PotentialRepr::Polynomial {
                components,
                compiled,
            },
        }
    }

    pub fn zero() -> Self {
        Self::polynomial("zero", std::array::from_fn(|_| SpatialPoly::zero()))
    }

    pub fn blackbox<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(Vec3) -> Result<Vec3, FieldError> + Send + Sync + 'static,
    {
        GaugePotential {
            label: label.into(),
            repr: PotentialRepr::Blackbox(Blackbox {
                eval: Arc::new(f),
                fd_step: None,
            }),
        }
    }

    /// Configure the relative finite-difference step of a black-box potential.
    pub fn with_fd_step(mut self, step: f64) -> Self {
        if let PotentialRepr::Blackbox(b) = &mut self.repr {
            b.fd_step = Some(step);
        }
        self
    }

    pub fn dipole(moment: [Rational; 3]) -> Self {
        GaugePotential {
            label: "dipole".into(),
            repr: PotentialRepr::Dipole { moment },
        }
    }

    pub fn as_polynomial(&self) -> Option<&[SpatialPoly; 3]> {
        match &self.repr {
            PotentialRepr::Polynomial { components, .. } => Some(components),
            _ => None,
        }
    }

    pub fn require_polynomial(&self) -> Result<&[SpatialPoly; 3], FieldError> {
        self.as_polynomial()
            .ok_or_else(|| FieldError::NotPolynomial(self.label.clone()))
    }

    pub fn dipole_moment(&self) -> Option<&[Rational; 3]> {
        match &self.repr {
            PotentialRepr::Dipole { moment } => Some(moment),
            _ => None,
        }
    }

    pub fn is_blackbox(&self) -> bool {
        !matches!(self.repr, PotentialRepr::Polynomial { .. })
    }

    pub fn eval(&self, r: Vec3) -> Result<Vec3, FieldError> {
        let v = match &self.repr {
            PotentialRepr::Polynomial { compiled, .. } => {
                Vec3(compiled.values.each_ref().map(|c| c.eval(&r.0)))
            }
            PotentialRepr::Dipole { moment } => {
                let mu = moment_f64(moment);
                let r2 = self.dipole_r2(r)?;
                mu.cross(&r) * (1.0 / (r2 * r2.sqrt()))
            }
            PotentialRepr::Blackbox(b) => (b.eval)(r)?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(FieldError::NonFinite(self.label.clone()))
        }
    }

    /// `J[i][j] = dA_i/dx_j` at `r`. Black boxes fall back to central
    /// differences with their configured step.
    pub fn jacobian(&self, r: Vec3) -> Result<[[f64; 3]; 3], FieldError> {
        match &self.repr {
            PotentialRepr::Polynomial { compiled, .. } => Ok(compiled
                .jacobian
                .each_ref()
                .map(|row| row.each_ref().map(|c| c.eval(&r.0)))),
            PotentialRepr::Dipole { moment } => {
                let mu = moment_f64(moment);
                let r2 = self.dipole_r2(r)?;
                let inv3 = 1.0 / (r2 * r2.sqrt());
                let inv5 = inv3 / r2;
                let mxr = mu.cross(&r);
                Ok(std::array::from_fn(|i| {
                    std::array::from_fn(|j| {
                        // d/dx_j (mu x r)_i = eps_{i a j} mu_a
                        let lin: f64 = (0..3).map(|a| levi_civita(i, a, j) as f64 * mu[a]).sum();
                        lin * inv3 - 3.0 * mxr[i] * r[j] * inv5
                    })
                }))
            }
            PotentialRepr::Blackbox(b) => {
                let step = b
                    .fd_step
                    .ok_or_else(|| FieldError::StepNotSet(self.label.clone()))?;
                numeric_jacobian(&|v| self.eval(v), r, step)
            }
        }
    }

    fn dipole_r2(&self, r: Vec3) -> Result<f64, FieldError> {
        let r2 = r.dot(&r);
        if r2.sqrt() < DIPOLE_CORE_RADIUS {
            return Err(FieldError::Singular {
                label: self.label.clone(),
                at: r.0,
            });
        }
        Ok(r2)
    }
}

fn moment_f64(m: &[Rational; 3]) -> Vec3 {
    Vec3(m.each_ref().map(to_f64))
}

/// Central-difference Jacobian of a vector function.
pub fn numeric_jacobian(
    f: &dyn Fn(Vec3) -> Result<Vec3, FieldError>,
    r: Vec3,
    base_step: f64,
) -> Result<[[f64; 3]; 3], FieldError> {
    let h = base_step * r.norm().max(1.0);
    let mut jac = [[0.0; 3]; 3];
    for j in 0..3 {
        let e = Vec3::unit(j) * h;
        let fp = f(r + e)?;
        let fm = f(r - e)?;
        for (i, row) in jac.iter_mut().enumerate() {
            row[j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

fn curl_of_jacobian(j: &[[f64; 3]; 3]) -> Vec3 {
    Vec3([j[2][1] - j[1][2], j[0][2] - j[2][0], j[1][0] - j[0][1]])
}

/// Curl of a potential by central differences, independent of its kind.
pub fn numeric_curl(a: &GaugePotential, r: Vec3, base_step: f64) -> Result<Vec3, FieldError> {
    let jac = numeric_jacobian(&|v| a.eval(v), r, base_step)?;
    Ok(curl_of_jacobian(&jac))
}

/// Closed-form point-dipole field `(3 (mu.r) r - mu r^2) / r^5`.
pub fn dipole_field(moment: Vec3, r: Vec3) -> Result<Vec3, FieldError> {
    let r2 = r.dot(&r);
    if r2.sqrt() < DIPOLE_CORE_RADIUS {
        return Err(FieldError::Singular {
            label: "dipole".into(),
            at: r.0,
        });
    }
    let inv5 = 1.0 / (r2 * r2 * r2.sqrt());
    Ok((r * (3.0 * moment.dot(&r)) - moment * r2) * inv5)
}

/// Exact dipole field at a rational point whose norm is rational.
/// Returns `None` when `|r|` is irrational or `r = 0`.
pub fn dipole_field_exact(moment: &[Rational; 3], r: &[Rational; 3]) -> Option<[Rational; 3]> {
    let r2: Rational = r.iter().map(|v| v * v).sum();
    if r2.is_zero() {
        return None;
    }
    let norm = rational_sqrt(&r2)?;
    let mu_dot_r: Rational = moment.iter().zip(r.iter()).map(|(a, b)| a * b).sum();
    let r5 = &r2 * &r2 * &norm;
    Some(std::array::from_fn(|i| {
        (&r[i] * &mu_dot_r * int(3) - &moment[i] * &r2) / &r5
    }))
}

#[derive(Clone)]
pub enum FieldRepr {
    Polynomial([SpatialPoly; 3]),
    Function(VectorFn),
}

/// Magnetic field `B = curl A`.
#[derive(Clone)]
pub struct MagneticField {
    pub repr: FieldRepr,
}

impl fmt::Debug for MagneticField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            FieldRepr::Polynomial(c) => write!(f, "B = ({}, {}, {})", c[0], c[1], c[2]),
            FieldRepr::Function(_) => f.write_str("B = <function>"),
        }
    }
}

impl MagneticField {
    pub fn as_polynomial(&self) -> Option<&[SpatialPoly; 3]> {
        match &self.repr {
            FieldRepr::Polynomial(c) => Some(c),
            FieldRepr::Function(_) => None,
        }
    }

    pub fn eval(&self, r: Vec3) -> Result<Vec3, FieldError> {
        match &self.repr {
            FieldRepr::Polynomial(c) => Ok(Vec3(c.each_ref().map(|p| p.eval(&r.0)))),
            FieldRepr::Function(f) => f(r),
        }
    }

    /// Constant field vector, when the field is a constant polynomial.
    pub fn uniform_value(&self) -> Option<[Rational; 3]> {
        let c = self.as_polynomial()?;
        Some([
            c[0].as_constant()?,
            c[1].as_constant()?,
            c[2].as_constant()?,
        ])
    }

    /// Exact divergence; `None` for function-backed fields.
    pub fn divergence(&self) -> Option<SpatialPoly> {
        let c = self.as_polynomial()?;
        Some((0..3).fold(SpatialPoly::zero(), |acc, i| acc + c[i].derivative(i)))
    }
}

/// Exact curl of polynomial components.
pub fn poly_curl(a: &[SpatialPoly; 3]) -> [SpatialPoly; 3] {
    [
        &a[2].derivative(1) - &a[1].derivative(2),
        &a[0].derivative(2) - &a[2].derivative(0),
        &a[1].derivative(0) - &a[0].derivative(1),
    ]
}

pub fn curl(a: &GaugePotential) -> Result<MagneticField, FieldError> {
    match &a.repr {
        PotentialRepr::Polynomial { components, .. } => Ok(MagneticField {
            repr: FieldRepr::Polynomial(poly_curl(components)),
        }),
        PotentialRepr::Dipole { moment } => {
            let mu = moment_f64(moment);
            Ok(MagneticField {
                repr: FieldRepr::Function(Arc::new(move |r| dipole_field(mu, r))),
            })
        }
        PotentialRepr::Blackbox(b) => {
            let step = b
                .fd_step
                .ok_or_else(|| FieldError::StepNotSet(a.label.clone()))?;
            let a = a.clone();
            Ok(MagneticField {
                repr: FieldRepr::Function(Arc::new(move |r| numeric_curl(&a, r, step))),
            })
        }
    }
}

/// `A -> A + grad xi`.
pub fn gauge_transform(a: &GaugePotential, xi: &SpatialPoly) -> Result<GaugePotential, FieldError> {
    let comps = a.require_polynomial()?;
    let next = std::array::from_fn(|i| &comps[i] + &xi.derivative(i));
    Ok(GaugePotential::polynomial(
        format!("{}+grad({})", a.label, xi),
        next,
    ))
}

/// Built-in field families.
#[derive(Clone, Debug, PartialEq)]
pub enum Builtin {
    /// `A = B x r / 2` for uniform `B`.
    Symmetric {
        b: [Rational; 3],
    },
    /// Uniform field of strength `b` along `axis`; for `x3`, `A = (0, b x1, 0)`.
    Landau {
        b: Rational,
        axis: Axis,
    },
    /// `A = (0, b0 x1 + beta x1^2 / 2, 0)`, field `(0, 0, b0 + beta x1)`.
    Gradient {
        b0: Rational,
        beta: Rational,
    },
    Dipole {
        moment: [Rational; 3],
    },
}

pub fn builtin(kind: &Builtin) -> GaugePotential {
    let x = |i: usize| SpatialPoly::var(i);
    match kind {
        Builtin::Symmetric { b } => {
            let half = rat(1, 2);
            // (B x r)_i = eps_ijk B_j x_k
            let comps = std::array::from_fn(|i| {
                let mut p = SpatialPoly::zero();
                for j in 0..3 {
                    for k in 0..3 {
                        let eps = levi_civita(i, j, k);
                        if eps != 0 {
                            p += x(k).scale(&(&b[j] * &half * int(eps)));
                        }
                    }
                }
                p
            });
            GaugePotential::polynomial("symmetric", comps)
        }
        Builtin::Landau { b, axis } => {
            let k = axis.index();
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            let mut comps: [SpatialPoly; 3] = std::array::from_fn(|_| SpatialPoly::zero());
            comps[j] = x(i).scale(b);
            GaugePotential::polynomial(format!("landau-{axis}"), comps)
        }
        Builtin::Gradient { b0, beta } => {
            let a2 = &x(0).scale(b0) + &x(0).pow(2).scale(&(beta * rat(1, 2)));
            GaugePotential::polynomial("gradient", [SpatialPoly::zero(), a2, SpatialPoly::zero()])
        }
        Builtin::Dipole { moment } => GaugePotential::dipole(moment.clone()),
    }
}
