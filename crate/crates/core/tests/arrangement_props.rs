use disjoint_core::arrangements::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn random_arrangement(rng: &mut impl Rng, m: usize, k: usize) -> Vec<Hyperplane> {
    (0..m)
        .map(|_| loop {
            let normal: Vec<BigRational> = (0..k).map(|_| q(rng.gen_range(-6..=6), rng.gen_range(1..=4))).collect();
            if let Ok(h) = Hyperplane::new(normal, q(rng.gen_range(-6..=6), rng.gen_range(1..=4))) {
                break h;
            }
        })
        .collect()
}

/// Arrangements with small integer data, so coincidences are common.
fn degenerate_arrangement(rng: &mut impl Rng, m: usize, k: usize) -> Vec<Hyperplane> {
    (0..m)
        .map(|_| loop {
            let normal: Vec<i64> = (0..k).map(|_| rng.gen_range(-1..=1)).collect();
            if let Ok(h) = Hyperplane::from_ints(&normal, rng.gen_range(-1..=1)) {
                break h;
            }
        })
        .collect()
}

#[test]
fn bound_recursion_holds() {
    for m in 2..=30u64 {
        for k in 1..m {
            assert_eq!(piece_bound(m, k), piece_bound(m - 1, k) + 2 * piece_bound(m - 1, k - 1), "m={m} k={k}");
        }
    }
}

#[test]
fn counts_never_exceed_the_bound() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for trial in 0..120 {
        let m = rng.gen_range(1..=7);
        let k = rng.gen_range(1..=3);
        let arr = if trial % 2 == 0 { random_arrangement(&mut rng, m, k) } else { degenerate_arrangement(&mut rng, m, k) };
        let c = count_pieces(&arr, DEFAULT_ENUMERATION_BUDGET, false).unwrap().count;
        assert!(BigInt::from(c) <= piece_bound(m as u64, k as u64), "m={m} k={k} count={c}");
        assert!(BigInt::from(c) <= coarse_bound(m as u64, k as u64));
    }
}

#[test]
fn generic_arrangements_attain_the_bound() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut tested = 0;
    for m in 1..=6usize {
        for k in 1..=3usize {
            let arr = random_arrangement(&mut rng, m, k);
            if !is_general_position(&arr).unwrap() {
                continue;
            }
            tested += 1;
            let c = count_pieces(&arr, DEFAULT_ENUMERATION_BUDGET, false).unwrap().count;
            assert_eq!(BigInt::from(c), piece_bound(m as u64, k as u64), "m={m} k={k}");
        }
    }
    assert!(tested >= 12);
}

#[test]
fn witnesses_and_convexity() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let m = rng.gen_range(1..=5);
        let k = rng.gen_range(1..=3);
        let arr = random_arrangement(&mut rng, m, k);
        let r = count_pieces(&arr, DEFAULT_ENUMERATION_BUDGET, true).unwrap();
        let w = r.witnesses.unwrap();
        for (s, p) in &w {
            assert_eq!(&classify_point(p, &arr).unwrap(), s);
        }
        // open pieces: midpoint of a witness and a random point in the same piece stays there
        for (s, p) in w.iter().filter(|(s, _)| !s.0.contains(&Sign::Zero)) {
            let other: Vec<BigRational> = p.iter().map(|x| x + q(rng.gen_range(-2..=2), 1000)).collect();
            if classify_point(&other, &arr).unwrap() == *s {
                let mid: Vec<BigRational> = p.iter().zip(&other).map(|(a, b)| (a + b) / q(2, 1)).collect();
                assert_eq!(&classify_point(&mid, &arr).unwrap(), s);
            }
        }
    }
}

proptest! {
    #[test]
    fn grouping_agrees_with_pairwise_classification(
        pts in prop::collection::vec(prop::collection::vec((-5i64..5, 1i64..3), 2), 1..12),
        seed in 0u64..1000,
    ) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let arr = degenerate_arrangement(&mut rng, 3, 2);
        let points: Vec<Vec<BigRational>> =
            pts.iter().map(|p| p.iter().map(|&(n, d)| q(n, d)).collect()).collect();
        let groups = locate_block_pieces(&points, &arr).unwrap();
        let mut owner = vec![None; points.len()];
        for (g, members) in groups.values().enumerate() {
            for &i in members {
                prop_assert!(owner[i].is_none());
                owner[i] = Some(g);
            }
        }
        for i in 0..points.len() {
            for j in 0..points.len() {
                let same = classify_point(&points[i], &arr).unwrap() == classify_point(&points[j], &arr).unwrap();
                prop_assert_eq!(same, owner[i] == owner[j]);
            }
        }
    }

    #[test]
    fn classification_matches_direct_evaluation(
        normal in prop::collection::vec((-5i64..5, 1i64..4), 3),
        offset in (-5i64..5, 1i64..4),
        point in prop::collection::vec((-9i64..9, 1i64..5), 3),
    ) {
        let normal: Vec<BigRational> = normal.iter().map(|&(n, d)| q(n, d)).collect();
        prop_assume!(normal.iter().any(|c| *c != q(0, 1)));
        let h = Hyperplane::new(normal.clone(), q(offset.0, offset.1)).unwrap();
        let x: Vec<BigRational> = point.iter().map(|&(n, d)| q(n, d)).collect();
        let value: BigRational = normal.iter().zip(&x).map(|(a, b)| a * b).sum::<BigRational>() - q(offset.0, offset.1);
        let s = classify_point(&x, std::slice::from_ref(&h)).unwrap().0[0];
        let expect = if value > q(0, 1) { Sign::Plus } else if value < q(0, 1) { Sign::Minus } else { Sign::Zero };
        prop_assert_eq!(s, expect);
    }
}
