use std::collections::BTreeMap;

use magtrans::fields::{builtin, gauge_transform, Builtin, PhysicalConstants};
use magtrans::observables::{poisson, PolyObservable};
use magtrans::poly::{int, rat, Monomial, Polynomial, Rational};
use magtrans::weyl::*;
use num_complex::Complex;
use num_traits::Zero;
use proptest::prelude::*;

/// Letters `0..3` are `x_i`, `3..6` are `p_i`.
type Word = Vec<u8>;

/// Normal-order a word by repeated adjacent swaps: `p_i x_j = x_j p_i - i hbar delta_ij`.
fn normal_order(
    word: Word,
    coeff: CRational,
    hbar: &Rational,
    out: &mut BTreeMap<[u32; 6], CRational>,
) {
    if let Some(pos) = word.windows(2).position(|w| w[0] >= 3 && w[1] < 3) {
        let (pl, xl) = (word[pos], word[pos + 1]);
        let mut swapped = word.clone();
        swapped.swap(pos, pos + 1);
        normal_order(swapped, coeff.clone(), hbar, out);
        if pl - 3 == xl {
            let mut contracted = word;
            contracted.drain(pos..pos + 2);
            let factor = Complex::new(Rational::zero(), -hbar.clone());
            normal_order(contracted, coeff * factor, hbar, out);
        }
        return;
    }
    let mut e = [0u32; 6];
    for l in word {
        e[l as usize] += 1;
    }
    let slot = out
        .entry(e)
        .or_insert_with(|| Complex::new(Rational::zero(), Rational::zero()));
    *slot = &*slot + coeff;
}

fn word_of(m: &Monomial<6>) -> Word {
    let mut w = Vec::new();
    for (l, &n) in m.0.iter().enumerate() {
        w.extend(std::iter::repeat_n(l as u8, n as usize));
    }
    w
}

fn oracle_product(a: &WeylOp, b: &WeylOp, hbar: &Rational) -> BTreeMap<[u32; 6], CRational> {
    let mut out = BTreeMap::new();
    for (ma, ca) in a.terms() {
        for (mb, cb) in b.terms() {
            let mut w = word_of(ma);
            w.extend(word_of(mb));
            normal_order(w, ca * cb, hbar, &mut out);
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn as_map(op: &WeylOp) -> BTreeMap<[u32; 6], CRational> {
    op.terms().map(|(m, c)| (m.0, c.clone())).collect()
}

fn monomial() -> impl Strategy<Value = Monomial<6>> {
    prop::array::uniform6(0u32..=2)
        .prop_filter("small degree", |e| e.iter().sum::<u32>() <= 3)
        .prop_map(Monomial)
}

fn op_strategy() -> impl Strategy<Value = WeylOp> {
    prop::collection::vec((monomial(), -4i64..=4, -4i64..=4, 1i64..=3), 1..=3).prop_map(|terms| {
        let mut op = WeylOp::zero();
        for (m, re, im, den) in terms {
            op.add_term(m, Complex::new(rat(re, den), rat(im, den)));
        }
        op
    })
}

fn observable(max_degree: u32) -> impl Strategy<Value = PolyObservable> {
    prop::collection::vec(
        (
            prop::array::uniform6(0u32..=max_degree)
                .prop_filter("degree", move |e| e.iter().sum::<u32>() <= max_degree),
            -5i64..=5,
            1i64..=4,
        ),
        0..=5,
    )
    .prop_map(|terms| {
        Polynomial::from_terms(terms.into_iter().map(|(e, n, d)| (Monomial(e), rat(n, d))))
    })
}

fn hbar() -> impl Strategy<Value = Rational> {
    (1i64..=7, 1i64..=5).prop_map(|(n, d)| rat(n, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_matches_word_reordering(a in op_strategy(), b in op_strategy(), h in hbar()) {
        let alg = WeylAlgebra::new(h.clone());
        prop_assert_eq!(as_map(&alg.mul(&a, &b)), oracle_product(&a, &b, &h));
    }

    #[test]
    fn product_is_associative(a in op_strategy(), b in op_strategy(), c in op_strategy(), h in hbar()) {
        let alg = WeylAlgebra::new(h);
        prop_assert_eq!(alg.mul(&a, &alg.mul(&b, &c)), alg.mul(&alg.mul(&a, &b), &c));
    }

    #[test]
    fn adjoint_is_an_anti_involution(a in op_strategy(), b in op_strategy(), h in hbar()) {
        let alg = WeylAlgebra::new(h);
        prop_assert_eq!(alg.adjoint(&alg.adjoint(&a)), a.clone());
        prop_assert_eq!(alg.adjoint(&alg.mul(&a, &b)), alg.mul(&alg.adjoint(&b), &alg.adjoint(&a)));
    }

    #[test]
    fn quantization_round_trips(f in observable(3), h in hbar()) {
        let alg = WeylAlgebra::new(h);
        let q = alg.quantize(&f);
        prop_assert!(alg.is_hermitian(&q));
        prop_assert_eq!(alg.real_symbol(&q), Some(f));
    }

    #[test]
    fn commutator_matches_bracket_up_to_degree_two(f in observable(2), g in observable(2), h in hbar()) {
        let alg = WeylAlgebra::new(h);
        prop_assert!(correspondence_residual(&alg, &f, &g).is_zero());
        let lhs = alg.commutator(&alg.quantize(&f), &alg.quantize(&g));
        let rhs = alg.quantize(&poisson(&f, &g)).scale(&alg.i_hbar());
        prop_assert_eq!(lhs, rhs);
    }
}

#[test]
fn correspondence_fails_beyond_degree_two() {
    let alg = WeylAlgebra::new(int(1));
    let f = &magtrans::observables::x(0) * &magtrans::observables::x(0);
    let f = &f * &magtrans::observables::x(0);
    let g = &magtrans::observables::p(0) * &magtrans::observables::p(0);
    let g = &g * &magtrans::observables::p(0);
    assert!(!correspondence_residual(&alg, &f, &g).is_zero());
}

#[test]
fn identities_hold_in_every_gauge_of_a_uniform_field() {
    let xi = &(&Polynomial::<3>::var(0) * &Polynomial::<3>::var(1))
        + &Polynomial::<3>::var(2).pow(2).scale(&rat(3, 2));
    for h in [rat(1, 1), rat(1, 3), rat(7, 2)] {
        let k = PhysicalConstants::new(rat(1, 2), int(2), int(3), h).unwrap();
        let sym = builtin(&Builtin::Symmetric {
            b: [int(0), int(0), rat(5, 3)],
        });
        for a in [sym.clone(), gauge_transform(&sym, &xi).unwrap()] {
            let report = verify_identities(&a, &k).unwrap();
            assert!(
                report.all_consistent(),
                "{:#?}",
                report
                    .checks
                    .iter()
                    .filter(|c| c.outcome == Outcome::Violated)
                    .collect::<Vec<_>>()
            );
            assert!(report.find("[G1, G2] = -i hbar (e/c) eps B").is_some());
        }
    }
}

#[test]
fn identities_for_the_gradient_field() {
    let k = PhysicalConstants::new(int(1), int(1), int(1), rat(1, 2)).unwrap();
    let a = builtin(&Builtin::Gradient {
        b0: int(1),
        beta: int(1),
    });
    let report = verify_identities(&a, &k).unwrap();
    assert!(report.all_consistent());
    assert_eq!(
        report.find("[G1, B] = 0 unattainable").unwrap().outcome,
        Outcome::Refused
    );
    assert_eq!(report.find("[G2, H] = 0").unwrap().outcome, Outcome::Holds);
}
