//! Exact multivariate polynomials with rational coefficients.
//!
//! `Polynomial<3>` carries position-space functions (vector-potential
//! components, gauge functions, magnetic fields); `Polynomial<6>` carries
//! phase-space observables over `(x1, x2, x3, p1, p2, p3)`.
//!
//! Terms are kept in a `BTreeMap` keyed by [`Monomial`], whose ordering is
//! graded lexicographic, so two polynomials are equal exactly when their
//! coefficient maps are equal. Zero coefficients are never stored.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Rational = BigRational;

/// Build a rational from an integer numerator and denominator.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Parse `"n/d"` or `"n"` into a rational.
pub fn parse_rational(s: &str) -> Result<Rational, PolyError> {
    let t = s.trim();
    let bad = || PolyError::BadRational(s.to_string());
    let (n, d) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(Rational::new(n, d))
}

pub fn format_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Exact square root of a non-negative rational, if it is a perfect square.
pub fn rational_sqrt(q: &Rational) -> Option<Rational> {
    if q.is_negative() {
        return None;
    }
    let n = q.numer().sqrt();
    let d = q.denom().sqrt();
    let r = Rational::new(n, d);
    (&r * &r == *q).then_some(r)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("malformed rational coefficient {0:?}")]
    BadRational(String),
    #[error("monomial has {got} exponents, expected {expected}")]
    ExponentArity { expected: usize, got: usize },
}

/// Exponent vector of a single monomial.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Monomial<const N: usize>(pub [u32; N]);

impl<const N: usize> Monomial<N> {
    pub fn one() -> Self {
        Monomial([0; N])
    }

    pub fn var(i: usize) -> Self {
        let mut e = [0; N];
        e[i] = 1;
        Monomial(e)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut e = self.0;
        for (a, b) in e.iter_mut().zip(other.0.iter()) {
            *a += b;
        }
        Monomial(e)
    }
}

impl<const N: usize> Ord for Monomial<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl<const N: usize> PartialOrd for Monomial<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Polynomial<const N: usize> {
    terms: BTreeMap<Monomial<N>, Rational>,
}

pub type SpatialPoly = Polynomial<3>;

impl<const N: usize> Polynomial<N> {
    pub fn zero() -> Self {
        Polynomial {
            terms: BTreeMap::new(),
        }
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self::term(c, Monomial::one())
    }

    pub fn var(i: usize) -> Self {
        Self::term(Rational::one(), Monomial::var(i))
    }

    pub fn term(c: Rational, m: Monomial<N>) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial<N>, Rational)>>(it: I) -> Self {
        let mut p = Self::zero();
        for (m, c) in it {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial<N>, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(existing) => {
                *existing += c;
                if existing.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; the zero polynomial reports 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial<N>, &Rational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial<N>) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    /// `Some(c)` when the polynomial is the constant `c` (including zero).
    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => self
                .terms
                .iter()
                .next()
                .filter(|(m, _)| m.degree() == 0)
                .map(|(_, c)| c.clone()),
            _ => None,
        }
    }

    /// True when no term involves variable `i`.
    pub fn is_free_of(&self, i: usize) -> bool {
        self.terms.keys().all(|m| m.0[i] == 0)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Polynomial {
            terms: self.terms.iter().map(|(m, a)| (*m, a * c)).collect(),
        }
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let e = m.0[i];
            if e == 0 {
                continue;
            }
            let mut dm = *m;
            dm.0[i] -= 1;
            out.add_term(dm, c * int(e as i64));
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    pub fn eval_exact(&self, at: &[Rational; N]) -> Rational {
        let mut sum = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (x, &e) in at.iter().zip(m.0.iter()) {
                for _ in 0..e {
                    t *= x;
                }
            }
            sum += t;
        }
        sum
    }

    pub fn eval(&self, at: &[f64; N]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| to_f64(c) * monomial_value(&m.0, at))
            .sum()
    }

    /// Substitute polynomial `subs[i]` for variable `i`.
    pub fn compose<const M: usize>(&self, subs: &[Polynomial<M>; N]) -> Polynomial<M> {
        let mut powers: Vec<Vec<Polynomial<M>>> = subs
            .iter()
            .map(|s| vec![Polynomial::one(), s.clone()])
            .collect();
        let mut out = Polynomial::<M>::zero();
        for (m, c) in &self.terms {
            let mut t = Polynomial::<M>::constant(c.clone());
            for (i, &e) in m.0.iter().enumerate() {
                let e = e as usize;
                while powers[i].len() <= e {
                    let next = &powers[i][powers[i].len() - 1] * &subs[i];
                    powers[i].push(next);
                }
                if e > 0 {
                    t = &t * &powers[i][e];
                }
            }
            out += t;
        }
        out
    }

    /// `p(v + offset)`.
    pub fn shift(&self, offset: &[Rational; N]) -> Self {
        let subs: [Polynomial<N>; N] = std::array::from_fn(|i| {
            let mut s = Polynomial::var(i);
            s.add_term(Monomial::one(), offset[i].clone());
            s
        });
        self.compose(&subs)
    }

    /// Re-index variables: variable `i` of `self` becomes variable `map[i]`.
    pub fn embed<const M: usize>(&self, map: [usize; N]) -> Polynomial<M> {
        Polynomial::from_terms(self.terms.iter().map(|(m, c)| {
            let mut e = [0u32; M];
            for (i, &k) in map.iter().enumerate() {
                e[k] += m.0[i];
            }
            (Monomial(e), c.clone())
        }))
    }

    pub fn compile(&self) -> CompiledPoly<N> {
        CompiledPoly {
            terms: self.terms.iter().map(|(m, c)| (to_f64(c), m.0)).collect(),
        }
    }

    pub fn to_string_with(&self, names: &[&str; N]) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut s = String::new();
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if k == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            let vars: Vec<String> =
                m.0.iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(i, &e)| {
                        if e == 1 {
                            names[i].to_string()
                        } else {
                            format!("{}^{}", names[i], e)
                        }
                    })
                    .collect();
            if vars.is_empty() {
                s.push_str(&format_rational(&mag));
            } else {
                if !mag.is_one() {
                    s.push_str(&format_rational(&mag));
                    s.push('*');
                }
                s.push_str(&vars.join("*"));
            }
        }
        s
    }

    pub fn to_serial(&self) -> Vec<SerialTerm> {
        self.terms
            .iter()
            .map(|(m, c)| SerialTerm {
                coefficient: format_rational(c),
                exponents: m.0.to_vec(),
            })
            .collect()
    }

    pub fn from_serial(terms: &[SerialTerm]) -> Result<Self, PolyError> {
        let mut p = Self::zero();
        for t in terms {
            if t.exponents.len() != N {
                return Err(PolyError::ExponentArity {
                    expected: N,
                    got: t.exponents.len(),
                });
            }
            let mut e = [0u32; N];
            e.copy_from_slice(&t.exponents);
            p.add_term(Monomial(e), parse_rational(&t.coefficient)?);
        }
        Ok(p)
    }
}

fn monomial_value<const N: usize>(e: &[u32; N], at: &[f64; N]) -> f64 {
    let mut v = 1.0;
    for (x, &k) in at.iter().zip(e.iter()) {
        if k > 0 {
            v *= x.powi(k as i32);
        }
    }
    v
}

/// One serialized term: `{"coefficient": "n/d", "exponents": [..]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct SerialTerm {
    pub coefficient: String,
    pub exponents: Vec<u32>,
}

/// Floating-point snapshot of a polynomial for fast repeated evaluation.
#[derive(Clone, Debug)]
pub struct CompiledPoly<const N: usize> {
    terms: Vec<(f64, [u32; N])>,
}

impl<const N: usize> CompiledPoly<N> {
    pub fn eval(&self, at: &[f64; N]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * monomial_value(e, at))
            .sum()
    }
}

impl fmt::Display for Polynomial<3> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_string_with(&["x1", "x2", "x3"]))
    }
}

impl fmt::Display for Polynomial<6> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_string_with(&["x1", "x2", "x3", "p1", "p2", "p3"]))
    }
}

impl<const N: usize> AddAssign<Polynomial<N>> for Polynomial<N> {
    fn add_assign(&mut self, rhs: Polynomial<N>) {
        for (m, c) in rhs.terms {
            self.add_term(m, c);
        }
    }
}

impl<const N: usize> AddAssign<&Polynomial<N>> for Polynomial<N> {
    fn add_assign(&mut self, rhs: &Polynomial<N>) {
        for (m, c) in &rhs.terms {
            self.add_term(*m, c.clone());
        }
    }
}

impl<const N: usize> SubAssign<&Polynomial<N>> for Polynomial<N> {
    fn sub_assign(&mut self, rhs: &Polynomial<N>) {
        for (m, c) in &rhs.terms {
            self.add_term(*m, -c.clone());
        }
    }
}

impl<const N: usize> Add for &Polynomial<N> {
    type Output = Polynomial<N>;
    fn add(self, rhs: &Polynomial<N>) -> Polynomial<N> {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl<const N: usize> Add for Polynomial<N> {
    type Output = Polynomial<N>;
    fn add(mut self, rhs: Polynomial<N>) -> Polynomial<N> {
        self += rhs;
        self
    }
}

impl<const N: usize> Sub for &Polynomial<N> {
    type Output = Polynomial<N>;
    fn sub(self, rhs: &Polynomial<N>) -> Polynomial<N> {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl<const N: usize> Sub for Polynomial<N> {
    type Output = Polynomial<N>;
    fn sub(mut self, rhs: Polynomial<N>) -> Polynomial<N> {
        self -= &rhs;
        self
    }
}

impl<const N: usize> Neg for &Polynomial<N> {
    type Output = Polynomial<N>;
    fn neg(self) -> Polynomial<N> {
        Polynomial {
            terms: self.terms.iter().map(|(m, c)| (*m, -c.clone())).collect(),
        }
    }
}

impl<const N: usize> Neg for Polynomial<N> {
    type Output = Polynomial<N>;
    fn neg(self) -> Polynomial<N> {
        -&self
    }
}

impl<const N: usize> Mul for &Polynomial<N> {
    type Output = Polynomial<N>;
    fn mul(self, rhs: &Polynomial<N>) -> Polynomial<N> {
        let mut out = Polynomial::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl<const N: usize> Mul for Polynomial<N> {
    type Output = Polynomial<N>;
    fn mul(self, rhs: Polynomial<N>) -> Polynomial<N> {
        &self * &rhs
    }
}
