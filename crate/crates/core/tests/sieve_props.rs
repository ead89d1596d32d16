use disjoint_core::sieves::*;
use rand::{Rng, SeedableRng};

fn factor(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        let mut e = 0;
        while n.is_multiple_of(p) {
            n /= p;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
        p += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

fn mu_oracle(n: u64) -> i8 {
    let f = factor(n);
    if f.iter().any(|&(_, e)| e > 1) {
        0
    } else if f.len().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

#[test]
fn tables_match_trial_division_at_random_points() {
    let n_max = 1_000_000;
    let mu = sieve_mobius(n_max).unwrap();
    let lam = sieve_liouville(n_max).unwrap();
    let phi = sieve_phi(n_max).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut points: Vec<u64> = (0..10_000).map(|_| rng.gen_range(1..=n_max)).collect();
    points.extend([1, 2, 3, 4, n_max - 1, n_max, 65_536, 65_537, 131_072]);
    for n in points {
        let f = factor(n);
        assert_eq!(mu.get(n), mu_oracle(n), "mu({n})");
        let omega: u32 = f.iter().map(|&(_, e)| e).sum();
        assert_eq!(lam.get(n), if omega.is_multiple_of(2) { 1 } else { -1 }, "lambda({n})");
        let ph = f.iter().fold(n, |acc, &(p, _)| acc / p * (p - 1));
        assert_eq!(phi.get(n) as u64, ph, "phi({n})");
    }
}

#[test]
fn divisor_sums_of_mu_vanish() {
    let n_max = 20_000;
    let mu = sieve_mobius(n_max).unwrap();
    let mut sums = vec![0i64; n_max as usize + 1];
    for d in 1..=n_max {
        let m = mu.get(d) as i64;
        if m != 0 {
            let mut k = d;
            while k <= n_max {
                sums[k as usize] += m;
                k += d;
            }
        }
    }
    assert_eq!(sums[1], 1);
    assert!(sums[2..].iter().all(|&s| s == 0));
}

#[test]
fn mertens_matches_running_sum() {
    let mu = sieve_mobius(1_000_000).unwrap();
    let mut running = 0i64;
    let mut at = std::collections::BTreeMap::new();
    for n in 1..=1_000_000u64 {
        running += mu.get(n) as i64;
        if [1_000, 10_000, 100_000, 1_000_000, 999_999, 12_345].contains(&n) {
            at.insert(n, running);
        }
    }
    for (&n, &v) in &at {
        assert_eq!(mertens(&mu, n).unwrap(), v, "M({n})");
    }
    assert_eq!(at[&1_000], 2);
    let trace = mertens_trace(&mu);
    assert_eq!(trace[999] as i64, at[&1_000]);
}

#[test]
fn cache_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mu.bin");
    let mu = sieve_mobius(100_000).unwrap();
    save_cache(&mu, &path).unwrap();
    let back = load_cache(&path).unwrap();
    assert_eq!(back, mu);
    assert_eq!(encode_cache(&back), std::fs::read(&path).unwrap());
}

#[test]
fn damaged_caches_are_rejected() {
    let mu = sieve_mobius(1_000).unwrap();
    let bytes = encode_cache(&mu);
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(matches!(decode_cache(&bad_magic), Err(CacheError::BadMagic { .. })));
    let mut bad_version = bytes.clone();
    bad_version[4] = 9;
    assert!(matches!(decode_cache(&bad_version), Err(CacheError::Version { .. })));
    let mut flipped = bytes.clone();
    flipped[20] ^= 0x01;
    assert!(matches!(decode_cache(&flipped), Err(CacheError::Checksum { .. })));
    assert!(decode_cache(&bytes[..bytes.len() - 7]).is_err());
}

#[test]
fn segment_boundaries_are_seamless() {
    // a range spanning several segments against the oracle, every point
    let mu = sieve_mobius(3 * 65_536 + 17).unwrap();
    for n in (65_536 - 200..65_536 + 200).chain(2 * 65_536 - 50..2 * 65_536 + 50) {
        assert_eq!(mu.get(n), mu_oracle(n), "mu({n})");
    }
}

#[test]
fn distance_to_itself_is_zero_for_trivial_character() {
    let d = pretentious_distance_sq(|_| num_complex::Complex64::new(1.0, 0.0), 0.0, 10_000).unwrap();
    assert!(d.abs() < 1e-12);
    let mu = sieve_mobius(10_000).unwrap();
    let g = prime_values(&mu);
    let d = pretentious_distance_sq(&g, 0.0, 10_000).unwrap();
    // Σ_{p ≤ X} 2/p
    let direct: f64 = primes(10_000).iter().map(|&p| 2.0 / p as f64).sum();
    assert!((d - direct).abs() < 1e-9);
}
