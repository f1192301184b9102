//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::time::{Duration, Instant};

use magtrans::dynamics::{cyclotron_period, drift, integrate_trajectory};
use magtrans::fields::{
    builtin, gauge_transform, levi_civita, Axis, Builtin, GaugePotential, PhysicalConstants, Vec3,
};
use magtrans::flows::{canonicity_report, finite_passive_translation, flow_commutator_gap};
use magtrans::generators::{
    kinematical_momenta, origin, passive_rotation_generator, passive_translation_generator,
};
use magtrans::observables::{
    hamiltonian_poly, p, poisson, substitute_kinematical, x, CompiledObservable, HamiltonianFn,
    NumericObservable, PhasePoint, PolyObservable,
};
use magtrans::poly::{int, rat, Monomial, Polynomial, Rational, SpatialPoly};
use magtrans::qgrid::{
    compose_phase, gaussian_packet, invariance_residual, translate_active, translate_passive,
    triangle_flux, GridSpec, LatticeShift, TranslationKind,
};
use magtrans::weyl::{build_operators, CRational, WeylAlgebra, WeylOp};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn delta(i: usize, j: usize) -> i64 {
    i64::from(i == j)
}

fn uniform_z(b: Rational) -> GaugePotential {
    builtin(&Builtin::Symmetric {
        b: [int(0), int(0), b],
    })
}

/// `sum_l eps_ijl B_l` with `B = (0, 0, b)`.
fn eps_b(i: usize, j: usize, b: &Rational) -> Rational {
    b * int(levi_civita(i, j, 2))
}

fn c1_classical() -> Outcome {
    for (e, c, b) in [
        (rat(3, 2), int(5), rat(7, 3)),
        (int(1), int(1), int(1)),
        (rat(2, 7), rat(1, 3), rat(-5, 4)),
    ] {
        let k = match PhysicalConstants::new(e, c, int(2), int(1)) {
            Ok(k) => k,
            Err(err) => return Err(err.to_string()),
        };
        let a = uniform_z(b.clone());
        let q = k.coupling();
        let g: Vec<PolyObservable> = Axis::ALL
            .iter()
            .map(|&axis| {
                passive_translation_generator(&a, axis, &k, &origin()).map(|g| g.observable)
            })
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let pi = kinematical_momenta(&a, &k).map_err(|e| e.to_string())?;
        let h = hamiltonian_poly(&a, &k).map_err(|e| e.to_string())?;
        for i in 0..3 {
            for j in 0..3 {
                let expected = Polynomial::constant(-(&q * eps_b(i, j, &b)));
                ensure(poisson(&g[i], &g[j]) == expected, || {
                    format!("{{G{},G{}}}", i + 1, j + 1)
                })?;
                let expected = Polynomial::constant(&q * eps_b(i, j, &b));
                ensure(poisson(&pi[i], &pi[j]) == expected, || {
                    format!("{{pi{},pi{}}}", i + 1, j + 1)
                })?;
                ensure(
                    poisson(&x(i), &g[j]) == Polynomial::constant(int(delta(i, j))),
                    || format!("{{x{},G{}}}", i + 1, j + 1),
                )?;
                ensure(poisson(&pi[i], &g[j]).is_zero(), || {
                    format!("{{pi{},G{}}}", i + 1, j + 1)
                })?;
                ensure(poisson(&p(i), &p(j)).is_zero(), || {
                    format!("{{p{},p{}}}", i + 1, j + 1)
                })?;
            }
            ensure(poisson(&g[i], &h).is_zero(), || format!("{{G{},H}}", i + 1))?;
        }
    }
    Ok(())
}

fn cscalar(re: Rational, im: Rational) -> WeylOp {
    WeylOp::scalar(Complex::new(re, im))
}

fn c2_quantum() -> Outcome {
    let b = rat(5, 3);
    for hbar in [int(1), rat(1, 3), rat(7, 2)] {
        let k = PhysicalConstants::new(rat(1, 2), int(2), int(3), hbar.clone())
            .map_err(|e| e.to_string())?;
        let a = uniform_z(b.clone());
        let ops = build_operators(&a, &k).map_err(|e| e.to_string())?;
        let alg = &ops.algebra;
        let q = k.coupling();
        let g: Vec<&WeylOp> = ops
            .passive
            .iter()
            .map(|r| r.as_ref().map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        let l3 = ops.rotation[2].as_ref().map_err(|e| e.to_string())?;
        let i_hbar_q = |v: Rational| cscalar(int(0), &hbar * &q * v);
        for i in 0..3 {
            for j in 0..3 {
                ensure(
                    alg.commutator(&ops.pi[i], &ops.pi[j]) == i_hbar_q(eps_b(i, j, &b)),
                    || format!("[pi{},pi{}] at hbar {hbar}", i + 1, j + 1),
                )?;
                ensure(
                    alg.commutator(g[i], g[j]) == i_hbar_q(-eps_b(i, j, &b)),
                    || format!("[G{},G{}] at hbar {hbar}", i + 1, j + 1),
                )?;
                ensure(
                    alg.commutator(&WeylOp::x(i), g[j])
                        == cscalar(int(0), &hbar * int(delta(i, j))),
                    || format!("[x{},G{}]", i + 1, j + 1),
                )?;
                ensure(alg.commutator(&ops.pi[i], g[j]).is_zero(), || {
                    format!("[pi{},G{}]", i + 1, j + 1)
                })?;
                for l in 0..3 {
                    let jac = &(&alg.commutator(&ops.pi[i], &alg.commutator(&ops.pi[j], g[l]))
                        + &alg.commutator(&ops.pi[j], &alg.commutator(g[l], &ops.pi[i])))
                        + &alg.commutator(g[l], &alg.commutator(&ops.pi[i], &ops.pi[j]));
                    ensure(jac.is_zero(), || {
                        format!("jacobi(pi{}, pi{}, G{})", i + 1, j + 1, l + 1)
                    })?;
                }
            }
            ensure(alg.commutator(g[i], &ops.hamiltonian).is_zero(), || {
                format!("[G{},H]", i + 1)
            })?;
            // [x_i, L3] = i hbar eps_i3j x_j, [pi_i, L3] = i hbar eps_i3j pi_j
            let mut rx = WeylOp::zero();
            let mut rp = WeylOp::zero();
            for j in 0..3 {
                let eps = int(levi_civita(i, 2, j));
                rx = &rx + &WeylOp::x(j).scale(&Complex::new(int(0), &hbar * &eps));
                rp = &rp + &ops.pi[j].scale(&Complex::new(int(0), &hbar * &eps));
            }
            ensure(alg.commutator(&WeylOp::x(i), l3) == rx, || {
                format!("[x{},L3]", i + 1)
            })?;
            ensure(alg.commutator(&ops.pi[i], l3) == rp, || {
                format!("[pi{},L3]", i + 1)
            })?;
        }
        ensure(alg.commutator(l3, &ops.hamiltonian).is_zero(), || {
            "[L3,H]".into()
        })?;
        let x1sq = alg.mul(&WeylOp::x(0), &WeylOp::x(0));
        let x2sq = alg.mul(&WeylOp::x(1), &WeylOp::x(1));
        let two_form = &(&alg.mul(&WeylOp::x(0), &ops.pi[1]) - &alg.mul(&WeylOp::x(1), &ops.pi[0]))
            + &(&x1sq + &x2sq).scale_real(&(&q * &b * rat(1, 2)));
        ensure(*l3 == two_form, || {
            format!("L3 two-form at hbar {hbar}: {l3} vs {two_form}")
        })?;
    }
    Ok(())
}

fn c3_existence() -> Outcome {
    let k = PhysicalConstants::default();
    let check = |name: &str,
                 a: &GaugePotential,
                 passive: [bool; 3],
                 rotation: [Option<bool>; 3]|
     -> Outcome {
        for axis in Axis::ALL {
            let got = passive_translation_generator(a, axis, &k, &origin()).is_ok();
            ensure(got == passive[axis.index()], || {
                format!("{name}: passive G{axis} exists = {got}")
            })?;
            if let Some(want) = rotation[axis.index()] {
                let got = passive_rotation_generator(a, axis, &k, &origin()).is_ok();
                ensure(got == want, || format!("{name}: L{axis} exists = {got}"))?;
            }
        }
        Ok(())
    };
    check(
        "uniform",
        &uniform_z(int(1)),
        [true; 3],
        [Some(false), Some(false), Some(true)],
    )?;
    check(
        "gradient",
        &builtin(&Builtin::Gradient {
            b0: int(1),
            beta: int(1),
        }),
        [false, true, true],
        [None; 3],
    )?;
    check(
        "dipole",
        &builtin(&Builtin::Dipole {
            moment: [int(0), int(0), int(1)],
        }),
        [false; 3],
        [None, None, Some(true)],
    )
}

fn random_xi(rng: &mut ChaCha8Rng) -> SpatialPoly {
    SpatialPoly::from_terms((0..6).map(|_| {
        let mut e = [0u32; 3];
        for _ in 0..rng.gen_range(0..=3) {
            e[rng.gen_range(0..3)] += 1;
        }
        (
            Monomial(e),
            rat(rng.gen_range(-6..=6), rng.gen_range(1..=4)),
        )
    }))
}

fn c4_gauge_independence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let k = PhysicalConstants::new(rat(3, 2), int(2), int(1), int(1)).map_err(|e| e.to_string())?;
    let a = builtin(&Builtin::Symmetric {
        b: [int(0), int(0), int(1)],
    });
    let strip = |f: &PolyObservable| -> (PolyObservable, Rational) {
        let c = f.coeff(&Monomial::one());
        let mut f = f.clone();
        f.add_term(Monomial::one(), -c.clone());
        (f, c)
    };
    for n in 0..20 {
        let xi = random_xi(&mut rng);
        let moved = gauge_transform(&a, &xi).map_err(|e| e.to_string())?;
        for axis in Axis::ALL {
            let g = passive_translation_generator(&a, axis, &k, &origin())
                .map_err(|e| e.to_string())?;
            let g2 = passive_translation_generator(&moved, axis, &k, &origin())
                .map_err(|e| e.to_string())?;
            let (lhs, c1) =
                strip(&substitute_kinematical(&g.observable, &a, &k).map_err(|e| e.to_string())?);
            let (rhs, c2) = strip(
                &substitute_kinematical(&g2.observable, &moved, &k).map_err(|e| e.to_string())?,
            );
            ensure(lhs == rhs, || {
                format!("sample {n}, G{axis}: {lhs} vs {rhs}")
            })?;
            // additive constant fixed by the basepoint normalization in each gauge
            let offset = xi.derivative(axis.index()).eval_exact(&origin()) * k.coupling();
            ensure(&c2 - &c1 == offset, || {
                format!(
                    "sample {n}, G{axis}: constant offset {} vs {offset}",
                    &c2 - &c1
                )
            })?;
        }
    }
    Ok(())
}

fn c5_conservation() -> Outcome {
    let k = PhysicalConstants::default();
    let a = uniform_z(int(1));
    let start =
        PhasePoint::from_kinematical(Vec3::new(1.5, -0.5, 0.2), Vec3::new(0.6, 0.8, 0.3), &a, &k)
            .map_err(|e| e.to_string())?;
    let period = cyclotron_period(&a, &k, start.x)
        .map_err(|e| e.to_string())?
        .ok_or("no field")?;
    let traj = integrate_trajectory(&start, &a, &k, 10.0 * period, Some(period / 2000.0))
        .map_err(|e| e.to_string())?;
    let mut monitors: Vec<(String, CompiledObservable)> = Axis::ALL
        .iter()
        .map(|&axis| {
            let g = passive_translation_generator(&a, axis, &k, &origin()).unwrap();
            (
                format!("G{axis}"),
                CompiledObservable::new(format!("G{axis}"), &g.observable),
            )
        })
        .collect();
    let l3 = passive_rotation_generator(&a, Axis::X3, &k, &origin()).map_err(|e| e.to_string())?;
    monitors.push(("L3".into(), CompiledObservable::new("L3", &l3.observable)));
    let h = drift(&traj, &HamiltonianFn::new(a.clone(), &k)).map_err(|e| e.to_string())?;
    ensure(h <= 1e-8, || format!("H drift {h:e}"))?;
    for (name, m) in &monitors {
        let d = drift(&traj, m).map_err(|e| e.to_string())?;
        ensure(d <= 1e-8, || format!("{name} drift {d:e}"))?;
    }
    let p1 = drift(&traj, &CompiledObservable::new("p1", &p(0))).map_err(|e| e.to_string())?;
    ensure(p1 >= 0.1, || format!("p1 drift {p1:e} (negative control)"))
}

fn c6_canonicity() -> Outcome {
    let k = PhysicalConstants::default();
    let gradient = builtin(&Builtin::Gradient {
        b0: int(1),
        beta: int(1),
    });
    let beta = 1.0;
    let points = [
        PhasePoint::new(Vec3::new(0.3, -0.2, 0.5), Vec3::new(0.1, 0.7, -0.4)),
        PhasePoint::new(Vec3::new(-1.1, 0.8, 0.0), Vec3::new(-0.5, 0.2, 0.9)),
        PhasePoint::origin(),
    ];
    for s in [0.1, 0.5, 1.0] {
        let map = |z: &PhasePoint| Ok(finite_passive_translation(z, Axis::X1, s, &gradient, &k)?);
        for r in canonicity_report(&map, &points, 1e-5).map_err(|e| e.to_string())? {
            let want = -k.coupling_f64() * beta * s;
            ensure((r.pp[0][1] - want).abs() <= 1e-6, || {
                format!("s = {s}: {{p1,p2}} = {} vs {want}", r.pp[0][1])
            })?;
        }
    }
    let a = uniform_z(int(1));
    for axis in Axis::ALL {
        let map = |z: &PhasePoint| Ok(finite_passive_translation(z, axis, 0.7, &a, &k)?);
        for r in canonicity_report(&map, &points, 1e-5).map_err(|e| e.to_string())? {
            ensure(r.max_abs() <= 1e-8, || {
                format!("uniform field, axis {axis}: residual {:e}", r.max_abs())
            })?;
        }
    }
    Ok(())
}

fn ray_setup() -> Result<(magtrans::qgrid::Wavefunction2D, PhysicalConstants), String> {
    let grid = GridSpec::centered(256, 0.1).map_err(|e| e.to_string())?;
    let psi = gaussian_packet(grid, [0.0, 0.0], 1.0, [0.0, 0.0], 0.0).map_err(|e| e.to_string())?;
    Ok((psi, PhysicalConstants::default()))
}

fn c7_ray_representation() -> Outcome {
    let (psi, k) = ray_setup()?;
    let a = LatticeShift::from_physical([1.0, 0.0], 0.1).ok_or("a not lattice-aligned")?;
    let b = LatticeShift::from_physical([0.0, 1.0], 0.1).ok_or("b not lattice-aligned")?;
    let ab =
        compose_phase(&psi, a, b, 1.0, &k, TranslationKind::Passive).map_err(|e| e.to_string())?;
    ensure(ab.fidelity >= 1.0 - 1e-12, || {
        format!("fidelity {}", ab.fidelity)
    })?;
    ensure((ab.phi - 0.5).abs() <= 1e-10, || format!("phi {}", ab.phi))?;
    let ba =
        compose_phase(&psi, b, a, 1.0, &k, TranslationKind::Passive).map_err(|e| e.to_string())?;
    ensure((ba.phi + ab.phi).abs() <= 1e-10, || {
        format!("phi(b,a) = {} vs phi(a,b) = {}", ba.phi, ab.phi)
    })?;
    // (e / hbar c) * flux of B through the triangle 0, a, a + b
    let flux = triangle_flux(&|_| 1.0, [0.0, 0.0], [1.0, 0.0], [1.0, 1.0], 16);
    let scaled = k.e_f64() / (k.hbar_f64() * k.c_f64()) * flux;
    ensure((scaled - ab.phi).abs() <= 1e-9, || {
        format!("flux phase {scaled} vs phi {}", ab.phi)
    })
}

fn c8_active_sign() -> Outcome {
    let (psi, k) = ray_setup()?;
    let a = LatticeShift::new(10, 0);
    let b = LatticeShift::new(0, 10);
    let r =
        compose_phase(&psi, a, b, 1.0, &k, TranslationKind::Active).map_err(|e| e.to_string())?;
    ensure(r.fidelity >= 1.0 - 1e-12, || {
        format!("fidelity {}", r.fidelity)
    })?;
    ensure((r.phi + 0.5).abs() <= 1e-10, || {
        format!("active phi {}", r.phi)
    })?;
    let pas = translate_passive(&psi, a, 1.0, &k).map_err(|e| e.to_string())?;
    let act = translate_active(&psi, a, 1.0, &k).map_err(|e| e.to_string())?;
    let overlap = pas.fidelity(&act).map_err(|e| e.to_string())?;
    ensure(overlap < 0.99, || {
        format!("passive and active images have fidelity {overlap}")
    })
}

fn c9_grid_invariance() -> Outcome {
    let k = PhysicalConstants::default();
    let residual = |n: usize, h: f64, field: f64| -> Result<f64, String> {
        let grid = GridSpec::centered(n, h).map_err(|e| e.to_string())?;
        let psi =
            gaussian_packet(grid, [0.0, 0.0], 1.0, [0.0, 0.0], 0.0).map_err(|e| e.to_string())?;
        let a = LatticeShift::from_physical([0.5, 0.0], h).ok_or("shift not lattice-aligned")?;
        invariance_residual(&psi, a, field, &k, TranslationKind::Passive).map_err(|e| e.to_string())
    };
    let coarse = residual(256, 0.1, 1.0)?;
    let fine = residual(512, 0.05, 1.0)?;
    let ratio = coarse / fine;
    ensure((3.5..=4.5).contains(&ratio), || {
        format!("residuals {coarse:e} -> {fine:e}, ratio {ratio}")
    })?;
    let zero = residual(256, 0.1, 0.0)?;
    ensure(zero <= 1e-12, || format!("B = 0 residual {zero:e}"))
}

fn c10_flow_commutation() -> Outcome {
    let k = PhysicalConstants::default();
    let a = uniform_z(int(1));
    let g = |axis| {
        passive_translation_generator(&a, axis, &k, &origin())
            .map(|g| CompiledObservable::new("G", &g.observable))
    };
    let start = PhasePoint::new(Vec3::new(0.2, -0.4, 0.3), Vec3::new(0.1, 0.3, -0.2));
    let (g1, g2, g3) = (
        g(Axis::X1).map_err(|e| e.to_string())?,
        g(Axis::X2).map_err(|e| e.to_string())?,
        g(Axis::X3).map_err(|e| e.to_string())?,
    );
    for (name, u, v) in [
        ("G1,G2", &g1, &g2),
        ("G2,G3", &g2, &g3),
        ("G1,G3", &g1, &g3),
    ] {
        let gap = flow_commutator_gap(u, v, 1.0, 1.0, &start, 1e-3).map_err(|e| e.to_string())?;
        ensure(gap <= 1e-9, || format!("passive {name} gap {gap:e}"))?;
    }
    let dipole = builtin(&Builtin::Dipole {
        moment: [int(0), int(0), int(1)],
    });
    let p1 = NumericObservable::kinematical_momentum(&dipole, 0, &k);
    let p2 = NumericObservable::kinematical_momentum(&dipole, 1, &k);
    let start = PhasePoint::new(Vec3::new(2.0, 0.0, 0.0), Vec3::ZERO);
    let gap = flow_commutator_gap(&p1, &p2, 0.1, 0.1, &start, 1e-4).map_err(|e| e.to_string())?;
    ensure(gap >= 1e-6, || format!("dipole active gap {gap:e}"))?;
    ensure((gap - 1.699_161_243e-3).abs() < 1e-11, || {
        format!("dipole active gap {gap:e} moved from pinned 1.699161243e-3")
    })
}

fn random_observable(rng: &mut ChaCha8Rng) -> PolyObservable {
    Polynomial::from_terms((0..rng.gen_range(1..=6)).map(|_| {
        let mut e = [0u32; 6];
        for _ in 0..rng.gen_range(0..=2) {
            e[rng.gen_range(0..6)] += 1;
        }
        (
            Monomial(e),
            rat(rng.gen_range(-9..=9), rng.gen_range(1..=5)),
        )
    }))
}

fn c11_correspondence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 0..50 {
        let hbar = rat(rng.gen_range(1..=9), rng.gen_range(1..=4));
        let alg = WeylAlgebra::new(hbar);
        let f = random_observable(&mut rng);
        let g = random_observable(&mut rng);
        let lhs = alg.commutator(&alg.quantize(&f), &alg.quantize(&g));
        let i_hbar: CRational = alg.i_hbar();
        let rhs = alg.quantize(&poisson(&f, &g)).scale(&i_hbar);
        ensure(lhs == rhs, || format!("pair {n}: f = {f}, g = {g}"))?;
    }
    Ok(())
}

struct Criterion {
    id: usize,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let secs = |s: u64| Some(Duration::from_secs(s));
    let criteria = [
        Criterion {
            id: 1,
            name: "exact classical bracket identities",
            limit: secs(1),
            run: c1_classical,
        },
        Criterion {
            id: 2,
            name: "exact quantum commutator identities at three hbar",
            limit: secs(1),
            run: c2_quantum,
        },
        Criterion {
            id: 3,
            name: "existence gates for translation and rotation generators",
            limit: None,
            run: c3_existence,
        },
        Criterion {
            id: 4,
            name: "gauge independence of passive generators",
            limit: None,
            run: c4_gauge_independence,
        },
        Criterion {
            id: 5,
            name: "conservation over ten cyclotron periods",
            limit: secs(5),
            run: c5_conservation,
        },
        Criterion {
            id: 6,
            name: "canonicity of finite passive translations",
            limit: None,
            run: c6_canonicity,
        },
        Criterion {
            id: 7,
            name: "ray-representation phase on the grid",
            limit: secs(5),
            run: c7_ray_representation,
        },
        Criterion {
            id: 8,
            name: "active composition phase has the opposite sign",
            limit: None,
            run: c8_active_sign,
        },
        Criterion {
            id: 9,
            name: "grid Hamiltonian invariance converges at second order",
            limit: None,
            run: c9_grid_invariance,
        },
        Criterion {
            id: 10,
            name: "commutation of passive and active flows",
            limit: None,
            run: c10_flow_commutation,
        },
        Criterion {
            id: 11,
            name: "commutator equals i hbar times quantized bracket",
            limit: None,
            run: c11_correspondence,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let mut outcome = (c.run)();
        let elapsed = start.elapsed();
        if let (Ok(()), Some(limit)) = (&outcome, c.limit) {
            if elapsed > limit {
                outcome = Err(format!("runtime {elapsed:.2?} exceeds {limit:?}"));
            }
        }
        match outcome {
            Ok(()) => println!(
                "criterion {:>2} PASS  {} ({:.3} s)",
                c.id,
                c.name,
                elapsed.as_secs_f64()
            ),
            Err(why) => {
                failed += 1;
                println!(
                    "criterion {:>2} FAIL  {} ({:.3} s): {why}",
                    c.id,
                    c.name,
                    elapsed.as_secs_f64()
                );
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
