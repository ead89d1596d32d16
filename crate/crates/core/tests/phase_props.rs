use disjoint_core::fixed::Scalar;
use disjoint_core::phase::Phase;
use disjoint_core::phase_sums::*;
use disjoint_core::weights::Constant;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

#[test]
fn rational_rotation_cancels_over_full_periods() {
    let ones = Constant::one(10_000);
    for (a, qd) in [(1i64, 7i64), (3, 10), (5, 12)] {
        let p = Phase::polynomial(vec![Scalar::int(0), Scalar::rational(a, qd)]);
        let n = (10_000 / qd as u64) * qd as u64;
        let r = weighted_average(&ones, &p, n, &[]).unwrap();
        assert!(r.last().modulus < 1e-12, "{a}/{qd}: {}", r.last().modulus);
    }
}

#[test]
fn irrational_rotation_matches_geometric_closed_form() {
    let ones = Constant::one(100_000);
    let alpha = 2f64.sqrt();
    let p = Phase::polynomial(vec![Scalar::int(0), Scalar::sqrt(2)]);
    let cps = log_checkpoints(100_000, 12);
    let r = weighted_average(&ones, &p, 100_000, &cps).unwrap();
    for c in &r.checkpoints {
        // |Σ_{n=1}^{N} e(nα)| = |sin(π N α) / sin(π α)|
        let pi = std::f64::consts::PI;
        let expect = ((pi * c.n as f64 * alpha).sin() / (pi * alpha).sin()).abs() / c.n as f64;
        assert!((c.modulus - expect).abs() < 1e-9, "N={}", c.n);
    }
}

#[test]
fn averages_do_not_depend_on_checkpoint_choice() {
    let mu = disjoint_core::sieves::sieve_mobius(200_000).unwrap();
    let p = Phase::polynomial(vec![Scalar::int(0), Scalar::sqrt(5), Scalar::rational(1, 3)]);
    let a = weighted_average(&mu, &p, 200_000, &[]).unwrap();
    let b = weighted_average(&mu, &p, 200_000, &log_checkpoints(200_000, 40)).unwrap();
    assert_eq!(a.last(), b.last());
}

#[test]
fn dirichlet_certificates_reevaluate() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    for _ in 0..60 {
        let l = rng.gen_range(1..=2);
        let q: u64 = rng.gen_range(2..=8);
        let thetas: Vec<Scalar> = (0..l)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    Scalar::rational(rng.gen_range(-50..50), rng.gen_range(1..30))
                } else {
                    Scalar::sqrt(rng.gen_range(2..50))
                }
            })
            .collect();
        let r = dirichlet_approx(&thetas, q, DIRICHLET_BUDGET).unwrap();
        assert!(r.t >= 1 && r.t <= q.pow(l as u32));
        for (th, a) in thetas.iter().zip(r.a_int()) {
            // ‖tθ‖ < 1/q with tθ evaluated in 300-bit rationals
            let v = match th {
                Scalar::Rational(x) => x * BigRational::from_integer(BigInt::from(r.t)),
                Scalar::Real { value, .. } => {
                    let wide = value.to_rational();
                    wide * BigRational::from_integer(BigInt::from(r.t))
                }
            };
            let dist = (v - BigRational::from_integer(a)).abs().to_f64().unwrap();
            assert!(dist < 1.0 / q as f64 + 1e-20, "θ={th} q={q} t={} dist={dist}", r.t);
        }
    }
}

proptest! {
    #[test]
    fn concatenation_of_a_low_degree_polynomial_is_exact(
        coeffs in prop::collection::vec((-20i64..20, 1i64..9), 1..4),
        gap in 1u64..6,
        ratio in 1.1f64..2.5,
    ) {
        let k = coeffs.len();
        let cs: Vec<BigRational> = coeffs.iter().map(|&(n, d)| BigRational::new(n.into(), d.into())).collect();
        let f = move |n: u64| {
            let x = BigRational::from_integer(BigInt::from(n));
            Scalar::Rational(cs.iter().rev().fold(BigRational::from_integer(0.into()), |acc, c| acc * &x + c))
        };
        let g = build_concatenation(&f, k, &BreakpointSchedule::Geometric { first_gap: gap, ratio }, 400).unwrap();
        let r = concatenation_residual(&f, &g, 0..400).unwrap();
        prop_assert!(r.exact_zero);
    }

    #[test]
    fn shift_correlation_is_symmetric_under_negation(v in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 5..40), s in 0usize..4) {
        let seq: Vec<num_complex::Complex64> = v.iter().map(|&(a, b)| num_complex::Complex64::new(a, b)).collect();
        let neg: Vec<num_complex::Complex64> = seq.iter().map(|z| -z).collect();
        prop_assume!(seq.len() > s + 1);
        let n = seq.len() - s;
        prop_assert!((shift_self_correlation(&seq, s, n).unwrap() - shift_self_correlation(&neg, s, n).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn concatenation_tracks_three_halves_power() {
    let f = power_oracle(3, 2, Scalar::int(1));
    // M C = 1 gives block lengths 1, 2, 4, 8 below 2 · 10^5
    let schedule = BreakpointSchedule::DecayDriven { tau: 0.7, c: 1.0, accuracy: 1.0 };
    let g = build_concatenation(&f, 2, &schedule, 200_000).unwrap();
    let Phase::Concatenation(c) = &g else { panic!("expected a concatenation") };
    let b = c.breakpoints();
    assert_eq!(b[b.len() - 1] - b[b.len() - 2], 8);
    let r = concatenation_residual(&f, &g, (100_000..200_000).step_by(7)).unwrap();
    assert!(r.max_distance > 0.0 && r.max_distance < 0.05, "{r:?}");
    // on the nodes themselves the pieces agree with f up to rounding
    let nodes = concatenation_residual(&f, &g, b.iter().copied().filter(|&n| n > 0)).unwrap();
    assert!(nodes.max_distance < 1e-20, "{nodes:?}");
}

proptest! {
    #[test]
    fn averages_are_bounded_by_one(a in -40i64..40, b in 1i64..40, c in -40i64..40, n in 1u64..3000) {
        let mu = disjoint_core::sieves::sieve_mobius(3000).unwrap();
        let p = Phase::polynomial(vec![Scalar::int(0), Scalar::rational(a, b), Scalar::rational(c, 7)]);
        let r = weighted_average(&mu, &p, n, &log_checkpoints(n, 5)).unwrap();
        for cp in &r.checkpoints {
            prop_assert!(cp.modulus <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn zero_shift_has_zero_correlation(v in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..40)) {
        let seq: Vec<num_complex::Complex64> = v.iter().map(|&(a, b)| num_complex::Complex64::new(a, b)).collect();
        prop_assert_eq!(shift_self_correlation(&seq, 0, seq.len()).unwrap(), 0.0);
    }

    #[test]
    fn larger_families_never_lower_the_sup(x in 50u64..400, h in 1u64..30) {
        let mu = disjoint_core::sieves::sieve_mobius(1000).unwrap();
        let small = coefficient_grid(2, 2);
        // the density-4 grid contains the density-2 grid
        let big = coefficient_grid(2, 4);
        let a = short_interval_sup_average(&mu, &small, x, h).unwrap().value;
        let b = short_interval_sup_average(&mu, &big, x, h).unwrap().value;
        prop_assert!(b >= a - 1e-12);
        prop_assert!(b <= 1.0 + 1e-12);
    }
}
