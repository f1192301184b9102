//! Generators of passive translations, active translations and passive
//! rotations, with the integrability gate that decides their existence.
//!
//! A passive translation along `x_k` is generated by `G_k = p_k + f(x)` where
//! `grad f = -(e/c) dA/dx_k`; this has a solution exactly when `B` does not
//! depend on `x_k`. A passive rotation about `x_k` is generated by
//! `L_k = eps_kij x_i p_j + g(x)` with `grad g` fixed by requiring
//! `{pi_i, L_k} = eps_ikl pi_l`; it exists exactly when `B` is invariant under
//! those rotations. Active translations are generated by `pi_k` and always
//! exist.

use std::fmt;

use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::fields::{
    curl, dipole_field_exact, levi_civita, Axis, FieldError, GaugePotential, PhysicalConstants,
};
use crate::observables::{lift, p, x, PolyObservable};
use crate::poly::{format_rational, int, Rational, SerialTerm, SpatialPoly};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    PassiveTranslation,
    ActiveTranslation,
    PassiveRotation,
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorKind::PassiveTranslation => "passive-translation",
            GeneratorKind::ActiveTranslation => "active-translation",
            GeneratorKind::PassiveRotation => "passive-rotation",
        })
    }
}

/// A constructed generator together with how it was normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub observable: PolyObservable,
    pub kind: GeneratorKind,
    pub axis: Axis,
    pub gauge: String,
    /// Point at which the position-only part (`f` or `g`) vanishes.
    pub basepoint: [Rational; 3],
}

#[derive(Serialize)]
pub struct SerialGenerator {
    pub kind: GeneratorKind,
    pub axis: Axis,
    pub gauge: String,
    pub basepoint: Vec<String>,
    pub observable: Vec<SerialTerm>,
    pub pretty: String,
}

impl GeneratorSpec {
    pub fn to_serial(&self) -> SerialGenerator {
        SerialGenerator {
            kind: self.kind,
            axis: self.axis,
            gauge: self.gauge.clone(),
            basepoint: self.basepoint.iter().map(format_rational).collect(),
            observable: self.observable.to_serial(),
            pretty: self.observable.to_string(),
        }
    }
}

/// Evidence that an integrability condition fails.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Obstruction {
    /// An exact polynomial that should vanish but does not.
    Polynomial {
        label: String,
        residual: Vec<SerialTerm>,
        pretty: String,
    },
    /// Exact field values at rational witness points that violate invariance.
    Witness {
        label: String,
        point_a: Vec<String>,
        value_a: Vec<String>,
        point_b: Vec<String>,
        value_b: Vec<String>,
    },
}

impl Obstruction {
    fn poly(label: String, residual: &SpatialPoly) -> Self {
        Obstruction::Polynomial {
            label,
            residual: residual.to_serial(),
            pretty: residual.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonIntegrableReport {
    pub axis: Option<Axis>,
    pub kind: Option<GeneratorKind>,
    pub offending: Vec<Obstruction>,
}

impl fmt::Display for NonIntegrableReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.axis) {
            (Some(k), Some(a)) => write!(f, "no {k} generator along {a}: ")?,
            _ => f.write_str("gradient equation not integrable: ")?,
        }
        let parts: Vec<String> = self
            .offending
            .iter()
            .map(|o| match o {
                Obstruction::Polynomial { label, pretty, .. } => format!("{label} = {pretty}"),
                Obstruction::Witness { label, .. } => label.clone(),
            })
            .collect();
        f.write_str(&parts.join("; "))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("{0}")]
    NonIntegrable(NonIntegrableReport),
    #[error(transparent)]
    Field(#[from] FieldError),
}

impl GeneratorError {
    pub fn non_integrable(&self) -> Option<&NonIntegrableReport> {
        match self {
            GeneratorError::NonIntegrable(r) => Some(r),
            GeneratorError::Field(_) => None,
        }
    }
}

pub fn origin() -> [Rational; 3] {
    [int(0), int(0), int(0)]
}

/// Solve `grad phi = rhs` with `phi(basepoint) = 0` by integrating along the
/// straight segment from the basepoint, after checking exact mixed partials.
pub fn solve_gradient(
    rhs: &[SpatialPoly; 3],
    basepoint: &[Rational; 3],
) -> Result<SpatialPoly, NonIntegrableReport> {
    let mut offending = Vec::new();
    for i in 0..3 {
        for j in (i + 1)..3 {
            let d = &rhs[i].derivative(j) - &rhs[j].derivative(i);
            if !d.is_zero() {
                offending.push(Obstruction::poly(
                    format!("d{}(rhs{}) - d{}(rhs{})", j + 1, i + 1, i + 1, j + 1),
                    &d,
                ));
            }
        }
    }
    if !offending.is_empty() {
        return Err(NonIntegrableReport {
            axis: None,
            kind: None,
            offending,
        });
    }
    // In shifted coordinates y = r - b:
    //   phi = sum_i y_i * int_0^1 rhs_i(b + t y) dt,
    // and each monomial of degree d in y picks up a factor 1/(d+1).
    let mut phi_y = SpatialPoly::zero();
    for (i, comp) in rhs.iter().enumerate() {
        let shifted = comp.shift(basepoint);
        let averaged = SpatialPoly::from_terms(
            shifted
                .terms()
                .map(|(m, c)| (*m, c / int(m.degree() as i64 + 1))),
        );
        phi_y += &SpatialPoly::var(i) * &averaged;
    }
    let back: [Rational; 3] = std::array::from_fn(|i| -basepoint[i].clone());
    Ok(phi_y.shift(&back))
}

fn d_field_along(b: &[SpatialPoly; 3], k: usize) -> Vec<Obstruction> {
    (0..3)
        .filter_map(|i| {
            let d = b[i].derivative(k);
            (!d.is_zero()).then(|| Obstruction::poly(format!("dB{}/dx{}", i + 1, k + 1), &d))
        })
        .collect()
}

fn rat_strings(v: &[Rational; 3]) -> Vec<String> {
    v.iter().map(format_rational).collect()
}

/// Passive translation generator `G_k = p_k + f`.
pub fn passive_translation_generator(
    a: &GaugePotential,
    axis: Axis,
    consts: &PhysicalConstants,
    basepoint: &[Rational; 3],
) -> Result<GeneratorSpec, GeneratorError> {
    let k = axis.index();
    let spec = |observable| GeneratorSpec {
        observable,
        kind: GeneratorKind::PassiveTranslation,
        axis,
        gauge: a.label.clone(),
        basepoint: basepoint.clone(),
    };
    let refuse = |offending| {
        GeneratorError::NonIntegrable(NonIntegrableReport {
            axis: Some(axis),
            kind: Some(GeneratorKind::PassiveTranslation),
            offending,
        })
    };

    if let Some(moment) = a.dipole_moment() {
        if moment.iter().all(Zero::is_zero) {
            return Ok(spec(p(k)));
        }
        // On-axis points s e_k have rational norm; B(e_k) != B(2 e_k) for any
        // nonzero moment, which refutes invariance along x_k exactly.
        let mut ra = origin();
        ra[k] = int(1);
        let mut rb = origin();
        rb[k] = int(2);
        let ba = dipole_field_exact(moment, &ra).expect("rational norm");
        let bb = dipole_field_exact(moment, &rb).expect("rational norm");
        debug_assert!(ba != bb);
        return Err(refuse(vec![Obstruction::Witness {
            label: format!(
                "B({}) != B({}) along x{}",
                rat_strings(&ra).join(","),
                rat_strings(&rb).join(","),
                k + 1
            ),
            point_a: rat_strings(&ra),
            value_a: rat_strings(&ba),
            point_b: rat_strings(&rb),
            value_b: rat_strings(&bb),
        }]));
    }

    let comps = a.require_polynomial()?;
    let field = curl(a)?;
    let b = field
        .as_polynomial()
        .expect("polynomial potential has polynomial curl");
    let offending = d_field_along(b, k);
    if !offending.is_empty() {
        return Err(refuse(offending));
    }
    let q = consts.coupling();
    let rhs: [SpatialPoly; 3] = std::array::from_fn(|i| -comps[i].derivative(k).scale(&q));
    let f = solve_gradient(&rhs, basepoint).map_err(|mut r| {
        r.axis = Some(axis);
        r.kind = Some(GeneratorKind::PassiveTranslation);
        GeneratorError::NonIntegrable(r)
    })?;
    Ok(spec(&p(k) + &lift(&f)))
}

/// Active translation generator `pi_k = p_k - (e/c) A_k`.
pub fn active_translation_generator(
    a: &GaugePotential,
    axis: Axis,
    consts: &PhysicalConstants,
) -> Result<GeneratorSpec, GeneratorError> {
    let comps = a.require_polynomial()?;
    let k = axis.index();
    Ok(GeneratorSpec {
        observable: &p(k) - &lift(&comps[k]).scale(&consts.coupling()),
        kind: GeneratorKind::ActiveTranslation,
        axis,
        gauge: a.label.clone(),
        basepoint: origin(),
    })
}

/// `eps_kij x_i p_j`
pub fn free_angular_momentum(axis: Axis) -> PolyObservable {
    let k = axis.index();
    let mut l = PolyObservable::zero();
    for i in 0..3 {
        for j in 0..3 {
            let eps = levi_civita(k, i, j);
            if eps != 0 {
                l += (&x(i) * &p(j)).scale(&int(eps));
            }
        }
    }
    l
}

/// Right-hand side of the gradient equation for `g`:
/// `dg/dx_i = (e/c) (eps_ikl A_l - eps_klj x_l dA_i/dx_j)`.
pub fn rotation_gradient_rhs(
    comps: &[SpatialPoly; 3],
    axis: Axis,
    consts: &PhysicalConstants,
) -> [SpatialPoly; 3] {
    let k = axis.index();
    let q = consts.coupling();
    std::array::from_fn(|i| {
        let mut t = SpatialPoly::zero();
        for l in 0..3 {
            let eps = levi_civita(i, k, l);
            if eps != 0 {
                t += comps[l].scale(&int(eps));
            }
        }
        for l in 0..3 {
            for j in 0..3 {
                let eps = levi_civita(k, l, j);
                if eps != 0 {
                    t -= &(&SpatialPoly::var(l) * &comps[i].derivative(j)).scale(&int(eps));
                }
            }
        }
        t.scale(&q)
    })
}

/// Passive rotation generator `L_k = eps_kij x_i p_j + g`.
pub fn passive_rotation_generator(
    a: &GaugePotential,
    axis: Axis,
    consts: &PhysicalConstants,
    basepoint: &[Rational; 3],
) -> Result<GeneratorSpec, GeneratorError> {
    let k = axis.index();
    let spec = |observable| GeneratorSpec {
        observable,
        kind: GeneratorKind::PassiveRotation,
        axis,
        gauge: a.label.clone(),
        basepoint: basepoint.clone(),
    };

    if let Some(moment) = a.dipole_moment() {
        // mu x r / r^3 is invariant under rotations about mu, so g = 0.
        let off_axis: Vec<usize> = (0..3).filter(|&i| i != k && !moment[i].is_zero()).collect();
        if off_axis.is_empty() {
            return Ok(spec(free_angular_momentum(axis)));
        }
        // Quarter turn about x_k maps e_i -> e_j; invariance would need
        // R B(e_i) = B(e_j), which fails whenever mu has a component off x_k.
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        let mut ra = origin();
        ra[i] = int(1);
        let mut rb = origin();
        rb[j] = int(1);
        let ba = dipole_field_exact(moment, &ra).expect("unit vector");
        let bb = dipole_field_exact(moment, &rb).expect("unit vector");
        let mut rotated = origin();
        rotated[j] = ba[i].clone();
        rotated[i] = -ba[j].clone();
        rotated[k] = ba[k].clone();
        return Err(GeneratorError::NonIntegrable(NonIntegrableReport {
            axis: Some(axis),
            kind: Some(GeneratorKind::PassiveRotation),
            offending: vec![Obstruction::Witness {
                label: format!(
                    "quarter turn about x{}: R B(e{}) != B(e{})",
                    k + 1,
                    i + 1,
                    j + 1
                ),
                point_a: rat_strings(&ra),
                value_a: rat_strings(&rotated),
                point_b: rat_strings(&rb),
                value_b: rat_strings(&bb),
            }],
        }));
    }

    let comps = a.require_polynomial()?;
    let rhs = rotation_gradient_rhs(comps, axis, consts);
    if rhs.iter().all(SpatialPoly::is_zero) {
        return Ok(spec(free_angular_momentum(axis)));
    }
    let g = solve_gradient(&rhs, basepoint).map_err(|mut r| {
        r.axis = Some(axis);
        r.kind = Some(GeneratorKind::PassiveRotation);
        GeneratorError::NonIntegrable(r)
    })?;
    Ok(spec(&free_angular_momentum(axis) + &lift(&g)))
}

/// Kinematical momentum components for a polynomial potential.
pub fn kinematical_momenta(
    a: &GaugePotential,
    consts: &PhysicalConstants,
) -> Result<[PolyObservable; 3], FieldError> {
    let comps = a.require_polynomial()?;
    let q = consts.coupling();
    Ok(std::array::from_fn(|i| &p(i) - &lift(&comps[i]).scale(&q)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{builtin, gauge_transform, Builtin};
    use crate::observables::{hamiltonian_poly, poisson, substitute_kinematical};
    use crate::poly::rat;

    fn symmetric(b: Rational) -> GaugePotential {
        builtin(&Builtin::Symmetric {
            b: [int(0), int(0), b],
        })
    }

    fn xs(i: usize) -> SpatialPoly {
        SpatialPoly::var(i)
    }

    #[test]
    fn solve_gradient_examples() {
        let zero = SpatialPoly::zero();
        let one = SpatialPoly::one();
        assert_eq!(
            solve_gradient(&[one, zero.clone(), zero.clone()], &origin()).unwrap(),
            xs(0)
        );
        let phi = solve_gradient(&[xs(1), xs(0), zero.clone()], &origin()).unwrap();
        assert_eq!(phi, &xs(0) * &xs(1));
        let err = solve_gradient(&[xs(1), -xs(0), zero], &origin()).unwrap_err();
        assert_eq!(err.offending.len(), 1);
        match &err.offending[0] {
            Obstruction::Polynomial { pretty, .. } => assert_eq!(pretty, "2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn solve_gradient_respects_basepoint() {
        let rhs = [xs(1), xs(0), SpatialPoly::one()];
        let b = [rat(1, 2), int(-3), int(2)];
        let phi = solve_gradient(&rhs, &b).unwrap();
        assert!(phi.eval_exact(&b).is_zero());
        for (i, r) in rhs.iter().enumerate() {
            assert_eq!(&phi.derivative(i), r);
        }
    }

    #[test]
    fn symmetric_gauge_passive_generator() {
        let b = rat(3, 2);
        let k = PhysicalConstants::new(int(2), int(5), int(1), int(1)).unwrap();
        let g1 =
            passive_translation_generator(&symmetric(b.clone()), Axis::X1, &k, &origin()).unwrap();
        let coef = &k.e * &b / (&k.c * int(2));
        assert_eq!(g1.observable, &p(0) - &x(1).scale(&coef));
    }

    #[test]
    fn zero_potential_generators() {
        let k = PhysicalConstants::default();
        let a = GaugePotential::zero();
        for axis in Axis::ALL {
            let g = passive_translation_generator(&a, axis, &k, &origin()).unwrap();
            assert_eq!(g.observable, p(axis.index()));
            let pi = active_translation_generator(&a, axis, &k).unwrap();
            assert_eq!(pi.observable, p(axis.index()));
            let l = passive_rotation_generator(&a, axis, &k, &origin()).unwrap();
            assert_eq!(l.observable, free_angular_momentum(axis));
        }
    }

    #[test]
    fn gradient_field_refuses_x1() {
        let k = PhysicalConstants::default();
        let a = builtin(&Builtin::Gradient {
            b0: int(1),
            beta: int(1),
        });
        let err = passive_translation_generator(&a, Axis::X1, &k, &origin()).unwrap_err();
        let report = err.non_integrable().unwrap();
        assert_eq!(report.axis, Some(Axis::X1));
        match &report.offending[..] {
            [Obstruction::Polynomial { label, pretty, .. }] => {
                assert_eq!(label, "dB3/dx1");
                assert_eq!(pretty, "1");
            }
            other => panic!("{other:?}"),
        }
        assert!(passive_translation_generator(&a, Axis::X2, &k, &origin()).is_ok());
        assert!(passive_translation_generator(&a, Axis::X3, &k, &origin()).is_ok());
    }

    #[test]
    fn landau_active_generator() {
        let k = PhysicalConstants::default();
        let a = builtin(&Builtin::Landau {
            b: int(1),
            axis: Axis::X3,
        });
        let pi2 = active_translation_generator(&a, Axis::X2, &k).unwrap();
        assert_eq!(pi2.observable, &p(1) - &x(0));
    }

    #[test]
    fn active_bracket_in_uniform_field() {
        let k = PhysicalConstants::new(int(3), int(2), int(1), int(1)).unwrap();
        let b = int(5);
        let a = symmetric(b.clone());
        let pi = kinematical_momenta(&a, &k).unwrap();
        let expect = &k.coupling() * &b;
        assert_eq!(poisson(&pi[0], &pi[1]), PolyObservable::constant(expect));
    }

    #[test]
    fn rotation_generators_in_uniform_field() {
        let k = PhysicalConstants::default();
        let a = symmetric(int(2));
        let l3 = passive_rotation_generator(&a, Axis::X3, &k, &origin()).unwrap();
        assert_eq!(l3.observable, &(&x(0) * &p(1)) - &(&x(1) * &p(0)));
        for axis in [Axis::X1, Axis::X2] {
            let err = passive_rotation_generator(&a, axis, &k, &origin()).unwrap_err();
            assert!(err.non_integrable().is_some());
        }
    }

    #[test]
    fn rotation_in_landau_gauge_has_nonzero_g() {
        let k = PhysicalConstants::default();
        let a = builtin(&Builtin::Landau {
            b: int(1),
            axis: Axis::X3,
        });
        let l3 = passive_rotation_generator(&a, Axis::X3, &k, &origin()).unwrap();
        assert_ne!(l3.observable, free_angular_momentum(Axis::X3));
        let pi = kinematical_momenta(&a, &k).unwrap();
        for i in 0..3 {
            assert_eq!(poisson(&x(i), &l3.observable), {
                let mut e = PolyObservable::zero();
                for l in 0..3 {
                    e += x(l).scale(&int(levi_civita(i, 2, l)));
                }
                e
            });
            let mut e = PolyObservable::zero();
            for l in 0..3 {
                e += pi[l].scale(&int(levi_civita(i, 2, l)));
            }
            assert_eq!(poisson(&pi[i], &l3.observable), e);
        }
    }

    #[test]
    fn dipole_gates() {
        let k = PhysicalConstants::default();
        let a = builtin(&Builtin::Dipole {
            moment: [int(0), int(0), int(1)],
        });
        for axis in Axis::ALL {
            let err = passive_translation_generator(&a, axis, &k, &origin()).unwrap_err();
            assert!(err.non_integrable().is_some(), "{axis}");
        }
        let l3 = passive_rotation_generator(&a, Axis::X3, &k, &origin()).unwrap();
        assert_eq!(l3.observable, free_angular_momentum(Axis::X3));
        assert!(passive_rotation_generator(&a, Axis::X1, &k, &origin()).is_err());
        let tilted = builtin(&Builtin::Dipole {
            moment: [int(1), int(0), int(1)],
        });
        assert!(passive_rotation_generator(&tilted, Axis::X3, &k, &origin()).is_err());
        assert!(active_translation_generator(&a, Axis::X1, &k).is_err());
    }

    #[test]
    fn conservation_and_gauge_independence() {
        let k = PhysicalConstants::new(rat(1, 2), int(3), int(2), int(1)).unwrap();
        let a = symmetric(int(4));
        let xi = &(&xs(0) * &xs(1)) + &xs(2).pow(3);
        let moved = gauge_transform(&a, &xi).unwrap();
        for axis in Axis::ALL {
            let g = passive_translation_generator(&a, axis, &k, &origin()).unwrap();
            let h = hamiltonian_poly(&a, &k).unwrap();
            assert!(poisson(&g.observable, &h).is_zero());
            let g2 = passive_translation_generator(&moved, axis, &k, &origin()).unwrap();
            assert_eq!(
                substitute_kinematical(&g.observable, &a, &k).unwrap(),
                substitute_kinematical(&g2.observable, &moved, &k).unwrap()
            );
        }
    }

    #[test]
    fn report_serializes() {
        let k = PhysicalConstants::default();
        let a = symmetric(int(1));
        let err = passive_rotation_generator(&a, Axis::X1, &k, &origin()).unwrap_err();
        let json = serde_json::to_string(err.non_integrable().unwrap()).unwrap();
        assert!(json.contains("\"kind\":\"passive-rotation\""));
        assert!(json.contains("\"axis\":1"));
    }
}
