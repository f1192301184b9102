//! Exact operator algebra generated by `x_i`, `p_j` with `[x_i, p_j] = i hbar delta_ij`.
//!
//! Operators are stored in normal order (every `x` factor to the left of every
//! `p` factor) with complex-rational coefficients. `hbar` is a fixed rational
//! held by [`WeylAlgebra`]; products are reordered with
//! `p^b x^c = sum_k C(b,k) C(c,k) k! (-i hbar)^k x^(c-k) p^(b-k)`,
//! which factorizes over coordinates because different indices commute.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::fields::{curl, levi_civita, Axis, FieldError, GaugePotential, PhysicalConstants};
use crate::generators::{
    kinematical_momenta, origin, passive_rotation_generator, passive_translation_generator,
    GeneratorError, NonIntegrableReport,
};
use crate::observables::{hamiltonian_poly, lift, PolyObservable};
use crate::poly::{format_rational, int, rat, Monomial, Rational, SpatialPoly};

pub type CRational = Complex<Rational>;

fn creal(r: Rational) -> CRational {
    Complex::new(r, Rational::zero())
}

fn cimag(r: Rational) -> CRational {
    Complex::new(Rational::zero(), r)
}

/// `(i * s)^k` for rational `s`.
fn i_power(s: &Rational, k: u32) -> CRational {
    let mag = num_traits::pow(s.clone(), k as usize);
    match k % 4 {
        0 => creal(mag),
        1 => cimag(mag),
        2 => creal(-mag),
        _ => cimag(-mag),
    }
}

fn binomial(n: u32, k: u32) -> Rational {
    let mut r = Rational::one();
    for j in 0..k {
        r = r * int((n - j) as i64) / int((j + 1) as i64);
    }
    r
}

fn factorial(n: u32) -> Rational {
    (1..=n).fold(Rational::one(), |acc, j| acc * int(j as i64))
}

/// Normal-ordered operator polynomial.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct WeylOp {
    terms: BTreeMap<Monomial<6>, CRational>,
}

impl WeylOp {
    pub fn zero() -> Self {
        WeylOp::default()
    }

    pub fn identity() -> Self {
        Self::scalar(creal(Rational::one()))
    }

    pub fn scalar(c: CRational) -> Self {
        let mut w = Self::zero();
        w.add_term(Monomial::one(), c);
        w
    }

    pub fn x(i: usize) -> Self {
        let mut w = Self::zero();
        w.add_term(Monomial::var(i), creal(Rational::one()));
        w
    }

    pub fn p(i: usize) -> Self {
        let mut w = Self::zero();
        w.add_term(Monomial::var(3 + i), creal(Rational::one()));
        w
    }

    /// Multiplication operator by a function of position.
    pub fn from_position(f: &SpatialPoly) -> Self {
        let mut w = Self::zero();
        for (m, c) in f.terms() {
            w.add_term(
                Monomial([m.0[0], m.0[1], m.0[2], 0, 0, 0]),
                creal(c.clone()),
            );
        }
        w
    }

    /// Read a phase-space polynomial literally in normal order (`x` left of `p`).
    pub fn from_normal_symbol(f: &PolyObservable) -> Self {
        let mut w = Self::zero();
        for (m, c) in f.terms() {
            w.add_term(*m, creal(c.clone()));
        }
        w
    }

    pub fn add_term(&mut self, m: Monomial<6>, c: CRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m).or_insert_with(CRational::zero);
        *entry = &*entry + c;
        if entry.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial<6>, &CRational)> {
        self.terms.iter()
    }

    /// `Some(c)` when the operator is `c` times the identity.
    pub fn as_scalar(&self) -> Option<CRational> {
        match self.terms.len() {
            0 => Some(CRational::zero()),
            1 => self
                .terms
                .iter()
                .next()
                .filter(|(m, _)| m.degree() == 0)
                .map(|(_, c)| c.clone()),
            _ => None,
        }
    }

    pub fn scale(&self, c: &CRational) -> Self {
        let mut w = Self::zero();
        for (m, a) in &self.terms {
            w.add_term(*m, a * c);
        }
        w
    }

    pub fn scale_real(&self, r: &Rational) -> Self {
        self.scale(&creal(r.clone()))
    }

    /// Real and imaginary parts of the coefficients, read as normal-ordered symbols.
    pub fn parts(&self) -> (PolyObservable, PolyObservable) {
        let re = PolyObservable::from_terms(self.terms.iter().map(|(m, c)| (*m, c.re.clone())));
        let im = PolyObservable::from_terms(self.terms.iter().map(|(m, c)| (*m, c.im.clone())));
        (re, im)
    }
}

fn format_complex(c: &CRational) -> String {
    match (c.re.is_zero(), c.im.is_zero()) {
        (_, true) => format_rational(&c.re),
        (true, false) => format!("{}i", format_rational(&c.im)),
        _ => {
            let sign = if c.im.is_negative() { "-" } else { "+" };
            format!(
                "({} {} {}i)",
                format_rational(&c.re),
                sign,
                format_rational(&c.im.abs())
            )
        }
    }
}

impl fmt::Display for WeylOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        const NAMES: [&str; 6] = ["x1", "x2", "x3", "p1", "p2", "p3"];
        let parts: Vec<String> = self
            .terms
            .iter()
            .rev()
            .map(|(m, c)| {
                let factors: Vec<String> =
                    m.0.iter()
                        .enumerate()
                        .filter(|(_, &e)| e > 0)
                        .map(|(i, &e)| {
                            if e == 1 {
                                NAMES[i].to_string()
                            } else {
                                format!("{}^{}", NAMES[i], e)
                            }
                        })
                        .collect();
                let coef = format_complex(c);
                if factors.is_empty() {
                    coef
                } else if c.is_one() {
                    factors.join("*")
                } else {
                    format!("{}*{}", coef, factors.join("*"))
                }
            })
            .collect();
        f.write_str(&parts.join(" + "))
    }
}

impl Serialize for WeylOp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl Add for &WeylOp {
    type Output = WeylOp;
    fn add(self, rhs: &WeylOp) -> WeylOp {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(*m, c.clone());
        }
        out
    }
}

impl Sub for &WeylOp {
    type Output = WeylOp;
    fn sub(self, rhs: &WeylOp) -> WeylOp {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(*m, -c.clone());
        }
        out
    }
}

impl Neg for &WeylOp {
    type Output = WeylOp;
    fn neg(self) -> WeylOp {
        self.scale_real(&int(-1))
    }
}

/// Multiplication context for a fixed value of `hbar`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeylAlgebra {
    pub hbar: Rational,
}

impl WeylAlgebra {
    pub fn new(hbar: Rational) -> Self {
        WeylAlgebra { hbar }
    }

    /// `i hbar`
    pub fn i_hbar(&self) -> CRational {
        cimag(self.hbar.clone())
    }

    /// Expand `x^a p^b` per coordinate with `factor(k) = C(a,k) C(b,k) k! s^k`.
    fn reorder(
        alpha: [u32; 3],
        beta: [u32; 3],
        step: &Rational,
    ) -> Vec<([u32; 3], [u32; 3], CRational)> {
        let mut out = vec![([0u32; 3], [0u32; 3], creal(Rational::one()))];
        for i in 0..3 {
            let (a, b) = (alpha[i], beta[i]);
            let mut next = Vec::new();
            for (xs, ps, c) in &out {
                for k in 0..=a.min(b) {
                    let mut xs = *xs;
                    let mut ps = *ps;
                    xs[i] = a - k;
                    ps[i] = b - k;
                    let coef =
                        creal(binomial(a, k) * binomial(b, k) * factorial(k)) * i_power(step, k);
                    next.push((xs, ps, c * coef));
                }
            }
            out = next;
        }
        out
    }

    /// Exact normal-ordered product `a b`.
    pub fn mul(&self, a: &WeylOp, b: &WeylOp) -> WeylOp {
        let minus_hbar = -self.hbar.clone();
        let mut out = WeylOp::zero();
        for (ma, ca) in &a.terms {
            for (mb, cb) in &b.terms {
                // x^alpha p^beta x^gamma p^delta: reorder the middle p^beta x^gamma.
                let beta = [ma.0[3], ma.0[4], ma.0[5]];
                let gamma = [mb.0[0], mb.0[1], mb.0[2]];
                let c = ca * cb;
                for (xs, ps, coef) in Self::reorder(gamma, beta, &minus_hbar) {
                    let m = Monomial([
                        ma.0[0] + xs[0],
                        ma.0[1] + xs[1],
                        ma.0[2] + xs[2],
                        ps[0] + mb.0[3],
                        ps[1] + mb.0[4],
                        ps[2] + mb.0[5],
                    ]);
                    out.add_term(m, &c * coef);
                }
            }
        }
        out
    }

    pub fn commutator(&self, a: &WeylOp, b: &WeylOp) -> WeylOp {
        &self.mul(a, b) - &self.mul(b, a)
    }

    /// Formal adjoint: reverse factors, conjugate coefficients, reorder.
    pub fn adjoint(&self, a: &WeylOp) -> WeylOp {
        let mut out = WeylOp::zero();
        for (m, c) in &a.terms {
            let ps = WeylOp {
                terms: BTreeMap::from([(Monomial([0, 0, 0, m.0[3], m.0[4], m.0[5]]), c.conj())]),
            };
            let xs = WeylOp {
                terms: BTreeMap::from([(
                    Monomial([m.0[0], m.0[1], m.0[2], 0, 0, 0]),
                    creal(Rational::one()),
                )]),
            };
            for (mm, cc) in self.mul(&ps, &xs).terms {
                out.add_term(mm, cc);
            }
        }
        out
    }

    pub fn is_hermitian(&self, a: &WeylOp) -> bool {
        self.adjoint(a) == *a
    }

    /// Weyl (symmetric-ordering) quantization of a classical polynomial.
    pub fn quantize(&self, f: &PolyObservable) -> WeylOp {
        self.convert(
            f.terms().map(|(m, c)| (*m, creal(c.clone()))),
            &(-&self.hbar * rat(1, 2)),
        )
    }

    /// Inverse of [`quantize`](Self::quantize); complex in general.
    pub fn symbol(&self, a: &WeylOp) -> (PolyObservable, PolyObservable) {
        self.convert(
            a.terms.iter().map(|(m, c)| (*m, c.clone())),
            &(&self.hbar * rat(1, 2)),
        )
        .parts()
    }

    /// Real Weyl symbol, or `None` if the operator is not Hermitian.
    pub fn real_symbol(&self, a: &WeylOp) -> Option<PolyObservable> {
        let (re, im) = self.symbol(a);
        im.is_zero().then_some(re)
    }

    fn convert<I: Iterator<Item = (Monomial<6>, CRational)>>(
        &self,
        terms: I,
        step: &Rational,
    ) -> WeylOp {
        let mut out = WeylOp::zero();
        for (m, c) in terms {
            let alpha = [m.0[0], m.0[1], m.0[2]];
            let beta = [m.0[3], m.0[4], m.0[5]];
            for (xs, ps, coef) in Self::reorder(alpha, beta, step) {
                out.add_term(
                    Monomial([xs[0], xs[1], xs[2], ps[0], ps[1], ps[2]]),
                    &c * coef,
                );
            }
        }
        out
    }
}

/// Operators built from a polynomial gauge potential.
#[derive(Clone, Debug)]
pub struct OperatorSet {
    pub algebra: WeylAlgebra,
    pub pi: [WeylOp; 3],
    pub hamiltonian: WeylOp,
    pub field: [WeylOp; 3],
    pub passive: [Result<WeylOp, NonIntegrableReport>; 3],
    pub rotation: [Result<WeylOp, NonIntegrableReport>; 3],
    /// Classical counterparts, for symbol-map checks.
    pub classical_pi: [PolyObservable; 3],
    pub classical_hamiltonian: PolyObservable,
    pub classical_passive: [Option<PolyObservable>; 3],
    pub classical_rotation: [Option<PolyObservable>; 3],
    pub uniform_field: Option<[Rational; 3]>,
}

fn gate(
    r: Result<crate::generators::GeneratorSpec, GeneratorError>,
) -> Result<Result<PolyObservable, NonIntegrableReport>, FieldError> {
    match r {
        Ok(g) => Ok(Ok(g.observable)),
        Err(GeneratorError::NonIntegrable(rep)) => Ok(Err(rep)),
        Err(GeneratorError::Field(e)) => Err(e),
    }
}

/// `pi_i = p_i - (e/c) A_i(x)`, `G_k`, `L_k` and `H = sum_i pi_i pi_i / 2m`.
pub fn build_operators(
    a: &GaugePotential,
    consts: &PhysicalConstants,
) -> Result<OperatorSet, FieldError> {
    let comps = a.require_polynomial()?;
    let alg = WeylAlgebra::new(consts.hbar.clone());
    let q = consts.coupling();
    let pi: [WeylOp; 3] =
        std::array::from_fn(|i| &WeylOp::p(i) - &WeylOp::from_position(&comps[i]).scale_real(&q));
    let mut h = WeylOp::zero();
    for op in &pi {
        h = &h + &alg.mul(op, op);
    }
    let hamiltonian = h.scale_real(&(Rational::one() / (&consts.m * int(2))));
    let field_poly = curl(a)?;
    let b = field_poly.as_polynomial().expect("polynomial curl").clone();
    let field = std::array::from_fn(|i| WeylOp::from_position(&b[i]));

    let mut classical_passive: [Option<PolyObservable>; 3] = Default::default();
    let mut classical_rotation: [Option<PolyObservable>; 3] = Default::default();
    let mut passive = Vec::new();
    let mut rotation = Vec::new();
    for axis in Axis::ALL {
        let k = axis.index();
        let g = gate(passive_translation_generator(a, axis, consts, &origin()))?;
        classical_passive[k] = g.as_ref().ok().cloned();
        passive.push(g.map(|g| alg.quantize(&g)));
        let l = gate(passive_rotation_generator(a, axis, consts, &origin()))?;
        classical_rotation[k] = l.as_ref().ok().cloned();
        rotation.push(l.map(|l| alg.quantize(&l)));
    }
    let to3 =
        |v: Vec<Result<WeylOp, NonIntegrableReport>>| -> [Result<WeylOp, NonIntegrableReport>; 3] {
            v.try_into().expect("three axes")
        };
    Ok(OperatorSet {
        pi,
        hamiltonian,
        field,
        passive: to3(passive),
        rotation: to3(rotation),
        classical_pi: kinematical_momenta(a, consts)?,
        classical_hamiltonian: hamiltonian_poly(a, consts)?,
        classical_passive,
        classical_rotation,
        uniform_field: field_poly.uniform_value(),
        algebra: alg,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    /// The identity holds with zero residual.
    Holds,
    /// The identity fails.
    Violated,
    /// The generator does not exist and the algebra confirms it.
    Refused,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub outcome: Outcome,
    pub residual: WeylOp,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub hbar: String,
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn all_consistent(&self) -> bool {
        self.checks.iter().all(|c| c.outcome != Outcome::Violated)
    }

    pub fn find(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Recorder {
    checks: Vec<IdentityCheck>,
}

impl Recorder {
    fn zero(&mut self, name: String, residual: WeylOp) {
        let outcome = if residual.is_zero() {
            Outcome::Holds
        } else {
            Outcome::Violated
        };
        self.checks.push(IdentityCheck {
            name,
            outcome,
            residual,
        });
    }
}

/// Check every operator identity available for this potential.
///
/// Residuals are `lhs - rhs`; each must be the zero operator. For axes where
/// no passive generator exists, the candidate `p_k` is shown to fail
/// `[G_k, B_l] = 0`, which the Jacobi identity requires of any generator.
pub fn verify_identities(
    a: &GaugePotential,
    consts: &PhysicalConstants,
) -> Result<IdentityReport, FieldError> {
    let ops = build_operators(a, consts)?;
    let alg = &ops.algebra;
    let ih = alg.i_hbar();
    let q = creal(consts.coupling());
    let mut rec = Recorder { checks: Vec::new() };

    for i in 0..3 {
        for j in (i + 1)..3 {
            let mut rhs = WeylOp::zero();
            for l in 0..3 {
                let eps = levi_civita(i, j, l);
                if eps != 0 {
                    rhs = &rhs + &ops.field[l].scale(&(&ih * &q * creal(int(eps))));
                }
            }
            rec.zero(
                format!("[pi{}, pi{}] = i hbar (e/c) eps B", i + 1, j + 1),
                &alg.commutator(&ops.pi[i], &ops.pi[j]) - &rhs,
            );
        }
    }

    for k in 0..3 {
        match &ops.passive[k] {
            Ok(g) => {
                for i in 0..3 {
                    let rhs = if i == k {
                        WeylOp::scalar(ih.clone())
                    } else {
                        WeylOp::zero()
                    };
                    rec.zero(
                        format!("[x{}, G{}] = i hbar delta", i + 1, k + 1),
                        &alg.commutator(&WeylOp::x(i), g) - &rhs,
                    );
                    rec.zero(
                        format!("[pi{}, G{}] = 0", i + 1, k + 1),
                        alg.commutator(&ops.pi[i], g),
                    );
                }
                for i in 0..3 {
                    for j in (i + 1)..3 {
                        let (pi_i, pi_j) = (&ops.pi[i], &ops.pi[j]);
                        let t1 = alg.commutator(pi_i, &alg.commutator(pi_j, g));
                        let t2 = alg.commutator(pi_j, &alg.commutator(g, pi_i));
                        let t3 = alg.commutator(g, &alg.commutator(pi_i, pi_j));
                        rec.zero(
                            format!("jacobi(pi{}, pi{}, G{})", i + 1, j + 1, k + 1),
                            &(&t1 + &t2) + &t3,
                        );
                    }
                }
                for l in 0..3 {
                    rec.zero(
                        format!("[G{}, B{}] = 0", k + 1, l + 1),
                        alg.commutator(g, &ops.field[l]),
                    );
                }
                rec.zero(
                    format!("[G{}, H] = 0", k + 1),
                    alg.commutator(g, &ops.hamiltonian),
                );
                rec.zero(format!("G{} hermitian", k + 1), &alg.adjoint(g) - g);
                let sym = alg.real_symbol(g).unwrap_or_default();
                let classical = ops.classical_passive[k].clone().unwrap_or_default();
                rec.zero(
                    format!("symbol(G{}) = classical G{}", k + 1, k + 1),
                    WeylOp::from_normal_symbol(&(&sym - &classical)),
                );
            }
            Err(_) => {
                let candidate = WeylOp::p(k);
                let mut residual = WeylOp::zero();
                for l in 0..3 {
                    residual = &residual + &alg.commutator(&candidate, &ops.field[l]);
                }
                let outcome = if residual.is_zero() {
                    Outcome::Violated
                } else {
                    Outcome::Refused
                };
                rec.checks.push(IdentityCheck {
                    name: format!("[G{}, B] = 0 unattainable", k + 1),
                    outcome,
                    residual,
                });
            }
        }
    }

    if let Some(b) = &ops.uniform_field {
        for i in 0..3 {
            for j in (i + 1)..3 {
                if let (Ok(gi), Ok(gj)) = (&ops.passive[i], &ops.passive[j]) {
                    let mut rhs = CRational::zero();
                    for l in 0..3 {
                        rhs = rhs - &ih * &q * creal(&b[l] * int(levi_civita(i, j, l)));
                    }
                    let c = alg.commutator(gi, gj);
                    rec.zero(
                        format!("[G{}, G{}] = -i hbar (e/c) eps B", i + 1, j + 1),
                        &c - &WeylOp::scalar(rhs),
                    );
                }
            }
        }
    }

    for k in 0..3 {
        if let Ok(l_op) = &ops.rotation[k] {
            for i in 0..3 {
                let mut rx = WeylOp::zero();
                let mut rp = WeylOp::zero();
                for l in 0..3 {
                    let eps = creal(int(levi_civita(i, k, l)));
                    rx = &rx + &WeylOp::x(l).scale(&(&ih * &eps));
                    rp = &rp + &ops.pi[l].scale(&(&ih * &eps));
                }
                rec.zero(
                    format!("[x{}, L{}] = i hbar eps x", i + 1, k + 1),
                    &alg.commutator(&WeylOp::x(i), l_op) - &rx,
                );
                rec.zero(
                    format!("[pi{}, L{}] = i hbar eps pi", i + 1, k + 1),
                    &alg.commutator(&ops.pi[i], l_op) - &rp,
                );
            }
            rec.zero(format!("L{} hermitian", k + 1), &alg.adjoint(l_op) - l_op);
            rec.zero(
                format!("[L{}, H] = 0", k + 1),
                alg.commutator(l_op, &ops.hamiltonian),
            );
        }
    }

    if let (Some(b), Ok(l3)) = (&ops.uniform_field, &ops.rotation[2]) {
        if b[0].is_zero() && b[1].is_zero() {
            let two_form = &(&alg.mul(&WeylOp::x(0), &ops.pi[1])
                - &alg.mul(&WeylOp::x(1), &ops.pi[0]))
                + &(&alg.mul(&WeylOp::x(0), &WeylOp::x(0))
                    + &alg.mul(&WeylOp::x(1), &WeylOp::x(1)))
                    .scale_real(&(consts.coupling() * &b[2] * rat(1, 2)));
            rec.zero(
                "L3 = x1 pi2 - x2 pi1 + (eB/2c)(x1^2 + x2^2)".into(),
                l3 - &two_form,
            );
        }
    }

    rec.zero(
        "H hermitian".into(),
        &alg.adjoint(&ops.hamiltonian) - &ops.hamiltonian,
    );
    let h_sym = alg.real_symbol(&ops.hamiltonian).unwrap_or_default();
    rec.zero(
        "symbol(H) = classical H".into(),
        WeylOp::from_normal_symbol(&(&h_sym - &ops.classical_hamiltonian)),
    );

    Ok(IdentityReport {
        hbar: format_rational(&consts.hbar),
        checks: rec.checks,
    })
}

/// Lift a classical observable and check `[f, g] = i hbar {f, g}` under Weyl quantization.
pub fn correspondence_residual(
    alg: &WeylAlgebra,
    f: &PolyObservable,
    g: &PolyObservable,
) -> WeylOp {
    let lhs = alg.commutator(&alg.quantize(f), &alg.quantize(g));
    let rhs = alg
        .quantize(&crate::observables::poisson(f, g))
        .scale(&alg.i_hbar());
    &lhs - &rhs
}

/// Position-only observable as a phase-space polynomial.
pub fn position_observable(f: &SpatialPoly) -> PolyObservable {
    lift(f)
}
