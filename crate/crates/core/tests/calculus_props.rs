use disjoint_core::exact_calculus::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn rationals(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<BigRational>> {
    prop::collection::vec((-50i64..50, 1i64..12), len).prop_map(|v| v.into_iter().map(|(n, d)| q(n, d)).collect())
}

// n! / (k! (n-k)!) by repeated multiplication, kept separate from the library helper
fn choose(n: i64, k: i64) -> BigInt {
    if k < 0 || k > n {
        return BigInt::zero();
    }
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

proptest! {
    #[test]
    fn iterated_difference_matches_binomial_sum(xs in rationals(1..16), k in 0usize..5) {
        prop_assume!(xs.len() > k);
        let seq = RationalSeq::new(xs.clone()).unwrap();
        let d = diff(&seq, k).unwrap();
        prop_assert_eq!(d.len(), xs.len() - k);
        for n in 0..d.len() {
            let mut s = BigRational::zero();
            for l in 0..=k {
                let w = BigRational::from_integer(choose(k as i64, l as i64));
                if (k - l) % 2 == 1 { s -= w * &xs[n + l]; } else { s += w * &xs[n + l]; }
            }
            prop_assert_eq!(&d[n], &s);
        }
    }

    #[test]
    fn sigma_inverts_difference(xs in rationals(1..20), init in (-9i64..9, 1i64..5)) {
        let s = sigma(&xs, q(init.0, init.1));
        prop_assert_eq!(&s[0], &q(init.0, init.1));
        let back = diff(&s, 1).unwrap();
        prop_assert_eq!(back.values(), &xs[..]);
    }

    #[test]
    fn lagrange_polynomial_interpolates(xs in rationals(1..7)) {
        let p = lagrange_poly(&xs).unwrap();
        prop_assert!(p.degree() < xs.len() as i64);
        for (i, x) in xs.iter().enumerate() {
            prop_assert_eq!(&p.eval(&q(i as i64, 1)), x);
        }
    }

    #[test]
    fn extension_has_prescribed_differences(init in rationals(1..5), g in rationals(1..12)) {
        let k = init.len();
        let m = k + g.len();
        let y = extend_y(&init, &g, m).unwrap();
        prop_assert_eq!(&y[..k], &init[..]);
        let d = diff(&y, k).unwrap();
        prop_assert_eq!(d.values(), &g[..]);
    }

    #[test]
    fn reconstruction_identity(xs in rationals(8..15), k in 1usize..5, j_off in 0usize..6) {
        let j = k + j_off;
        prop_assume!(j < xs.len());
        let seq = RationalSeq::new(xs).unwrap();
        for n in 0..seq.len() - j {
            let (lhs, rhs) = reconstruction_sides(&seq, n, k, j).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}

#[test]
fn lagrange_basis_integers_match_closed_form() {
    for k in 1..=6u64 {
        for j in 0..k {
            for n in 0..=40u64 {
                let direct = lagrange_coeff(n as i64, j as i64, k as usize).unwrap();
                // Π_{i≠j} (n-i)/(j-i) evaluated independently in rationals
                let mut p = BigRational::one();
                for i in 0..k as i64 {
                    if i != j as i64 {
                        p *= q(n as i64 - i, j as i64 - i);
                    }
                }
                assert!(p.is_integer(), "n={n} j={j} k={k}");
                assert_eq!(BigRational::from_integer(direct.clone()), p);
                if let Some(cf) = lagrange_coeff_closed_form(n, j, k) {
                    assert_eq!(cf, direct, "closed form n={n} j={j} k={k}");
                }
            }
        }
    }
}

#[test]
fn reconstruction_coefficients_are_bounded() {
    for k in 1..=6usize {
        for j in k..=20usize {
            let a = reconstruct_coeffs(j, k).unwrap();
            let cap = BigInt::from(j).pow(k as u32 - 1);
            for (l, v) in (k..=j).zip(&a) {
                assert!(!v.is_negative());
                assert!(*v <= cap, "a_{l} for j={j} k={k}");
                assert_eq!(*v, choose((j - l + k - 1) as i64, k as i64 - 1));
            }
        }
    }
}

fn frac_q(x: &BigRational) -> BigRational {
    x - x.floor()
}

/// Condition (i) evaluated directly on rational fractional parts.
fn condition_i_oracle(xs: &[BigRational], k: usize) -> bool {
    (0..xs.len() - k).all(|n| {
        let mut s = BigRational::zero();
        for l in 0..=k {
            let w = BigRational::from_integer(choose(k as i64, l as i64));
            let f = frac_q(&xs[n + l]);
            if (k - l) % 2 == 1 { s -= w * f } else { s += w * f }
        }
        s.is_integer()
    })
}

#[test]
fn fractional_equivalence_exhaustive_small_denominators() {
    let mut cases = 0u64;
    for d in 1..=8i64 {
        for k in 1..=3usize {
            for len in k + 1..=6usize {
                let total = (d as u64).pow(len as u32);
                for code in 0..total {
                    let mut c = code;
                    let xs: Vec<BigRational> = (0..len)
                        .map(|_| {
                            let r = (c % d as u64) as i64;
                            c /= d as u64;
                            q(r, d)
                        })
                        .collect();
                    let seq = RationalSeq::new(xs.clone()).unwrap();
                    let (i, ii) = frac_diff_equivalence(&seq, k).unwrap();
                    assert_eq!(i, ii, "d={d} k={k} xs={xs:?}");
                    if code % 97 == 0 {
                        assert_eq!(i, condition_i_oracle(&xs, k));
                    }
                    cases += 1;
                }
            }
        }
    }
    assert!(cases > 100_000);
}

#[test]
fn value_bound_on_generated_windows() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for trial in 0..300 {
        let k = 1 + trial % 3;
        let c = q(rng.gen_range(1..20), rng.gen_range(1..5));
        let init: Vec<BigRational> = (0..k).map(|_| &c * q(rng.gen_range(0..=16), 16)).collect();
        let len = 12;
        let g: Vec<BigRational> = (0..len - k).map(|_| &c * q(rng.gen_range(-16..=16), 16)).collect();
        let y = extend_y(&init, &g, len).unwrap();
        assert_eq!(check_value_bound(&y, k, &c).unwrap(), BoundCheck::Holds);
        for j in k..len {
            let bound = BigRational::from_integer(BigInt::from((k + 1) as u64 * (j as u64).pow(k as u32))) * &c;
            assert!(y[j].abs() <= bound);
        }
    }
}
