//! Segmented sieves for μ, λ and φ, Mertens sums, the pretentious distance,
//! and the on-disk cache for Möbius tables.
//!
//! Index 0 is never addressable: every table covers `[1, n_max]`.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::weights::ArithmeticWeight;

/// Default cap on the packed size of a table built in one piece.
pub const DEFAULT_MEMORY_BUDGET: u64 = 1 << 30;

const SEGMENT: u64 = 1 << 16;

#[derive(Debug, Error)]
pub enum SieveError {
    #[error("n_max must be at least 1")]
    EmptyRange,
    #[error(
        "table for n_max = {n_max} needs {required} bytes, over the {budget}-byte budget; \
         use segmented mode (sieve disjoint ranges separately)"
    )]
    MemoryBudget { n_max: u64, required: u64, budget: u64 },
    #[error("n = {n} is outside the table range [1, {n_max}]")]
    OutOfRange { n: u64, n_max: u64 },
    #[error("g({p}) has modulus {modulus} > 1")]
    NotOneBounded { p: u64, modulus: f64 },
    #[error("empty t-grid")]
    EmptyGrid,
}

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes {found:?}, expected \"MUSV\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported cache version: expected {expected}, found {found}")]
    Version { expected: u8, found: u8 },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("payload is {found} bytes, n_max = {n_max} needs {expected}")]
    Length { n_max: u64, expected: u64, found: u64 },
    #[error("invalid code 0b11 at n = {n}")]
    InvalidCode { n: u64 },
    #[error("file is too short to hold a header ({len} bytes)")]
    ShortHeader { len: u64 },
}

pub const CACHE_MAGIC: &[u8; 4] = b"MUSV";
pub const CACHE_VERSION: u8 = 0x01;
const HEADER_LEN: usize = 4 + 1 + 8;

fn primes_up_to(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let limit = limit as usize;
    let mut composite = vec![false; limit + 1];
    let mut primes = Vec::new();
    for i in 2..=limit {
        if !composite[i] {
            primes.push(i as u64);
            let mut m = i * i;
            while m <= limit {
                composite[m] = true;
                m += i;
            }
        }
    }
    primes
}

/// All primes `<= limit`.
pub fn primes(limit: u64) -> Vec<u64> {
    primes_up_to(limit)
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Runs `per_segment(lo, hi, primes)` over `[1, n_max]` split into aligned
/// segments and concatenates the results in order.
fn segmented<T, F>(n_max: u64, per_segment: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64, &[u64]) -> Vec<T> + Sync,
{
    let small = primes_up_to(isqrt(n_max));
    let segments: Vec<(u64, u64)> = (0..n_max.div_ceil(SEGMENT))
        .map(|s| (1 + s * SEGMENT, (1 + (s + 1) * SEGMENT).min(n_max + 1)))
        .collect();
    segments
        .into_par_iter()
        .map(|(lo, hi)| per_segment(lo, hi, &small))
        .collect::<Vec<Vec<T>>>()
        .into_iter()
        .flatten()
        .collect()
}

fn first_multiple(p: u64, lo: u64) -> u64 {
    lo.div_ceil(p) * p
}

fn mobius_segment(lo: u64, hi: u64, primes: &[u64]) -> Vec<i8> {
    let len = (hi - lo) as usize;
    let mut mu = vec![1i8; len];
    let mut rem: Vec<u64> = (lo..hi).collect();
    for &p in primes {
        if p * p >= hi {
            break;
        }
        let mut m = first_multiple(p, lo);
        while m < hi {
            let i = (m - lo) as usize;
            mu[i] = -mu[i];
            rem[i] /= p;
            m += p;
        }
        let pp = p * p;
        let mut m = first_multiple(pp, lo);
        while m < hi {
            mu[(m - lo) as usize] = 0;
            m += pp;
        }
    }
    for i in 0..len {
        if rem[i] > 1 && mu[i] != 0 {
            // exactly one prime factor above sqrt(hi) remains
            mu[i] = -mu[i];
        }
    }
    mu
}

fn liouville_segment(lo: u64, hi: u64, primes: &[u64]) -> Vec<i8> {
    let len = (hi - lo) as usize;
    let mut lam = vec![1i8; len];
    let mut rem: Vec<u64> = (lo..hi).collect();
    for &p in primes {
        if p * p >= hi {
            break;
        }
        let mut pk = p;
        loop {
            let mut m = first_multiple(pk, lo);
            while m < hi {
                let i = (m - lo) as usize;
                lam[i] = -lam[i];
                rem[i] /= p;
                m += pk;
            }
            match pk.checked_mul(p) {
                Some(next) if next < hi => pk = next,
                _ => break,
            }
        }
    }
    for i in 0..len {
        if rem[i] > 1 {
            lam[i] = -lam[i];
        }
    }
    lam
}

fn phi_segment(lo: u64, hi: u64, primes: &[u64]) -> Vec<u32> {
    let len = (hi - lo) as usize;
    let mut phi: Vec<u64> = (lo..hi).collect();
    let mut rem: Vec<u64> = (lo..hi).collect();
    for &p in primes {
        if p * p >= hi {
            break;
        }
        let mut m = first_multiple(p, lo);
        while m < hi {
            let i = (m - lo) as usize;
            phi[i] -= phi[i] / p;
            while rem[i].is_multiple_of(p) {
                rem[i] /= p;
            }
            m += p;
        }
    }
    for i in 0..len {
        if rem[i] > 1 {
            phi[i] -= phi[i] / rem[i];
        }
    }
    phi.into_iter().map(|v| v as u32).collect()
}

/// μ on `[1, n_max]`, two bits per entry: `00 ↦ 0`, `01 ↦ +1`, `10 ↦ -1`.
/// Entry `n` lives at bit offset `2 (n-1)`, low bits first within each byte.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MobiusTable {
    n_max: u64,
    packed: Vec<u8>,
}

fn encode(mu: i8) -> u8 {
    match mu {
        0 => 0b00,
        1 => 0b01,
        -1 => 0b10,
        _ => unreachable!("μ takes values in {{-1, 0, 1}}"),
    }
}

fn pack_mobius(values: &[i8]) -> Vec<u8> {
    let mut packed = vec![0u8; values.len().div_ceil(4)];
    for (i, &v) in values.iter().enumerate() {
        packed[i / 4] |= encode(v) << (2 * (i % 4));
    }
    packed
}

impl MobiusTable {

    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    pub fn packed(&self) -> &[u8] {
        &self.packed
    }

    pub fn checksum(&self) -> u32 {
        crc32fast::hash(&self.packed)
    }

    /// μ(n). Panics outside `[1, n_max]`; use [`MobiusTable::try_get`] for a checked read.
    #[inline]
    pub fn get(&self, n: u64) -> i8 {
        assert!(n >= 1 && n <= self.n_max, "μ({n}) outside [1, {}]", self.n_max);
        let i = (n - 1) as usize;
        match (self.packed[i / 4] >> (2 * (i % 4))) & 0b11 {
            0b00 => 0,
            0b01 => 1,
            0b10 => -1,
            _ => unreachable!("code 0b11 is rejected at load time"),
        }
    }

    pub fn try_get(&self, n: u64) -> Result<i8, SieveError> {
        if n == 0 || n > self.n_max {
            return Err(SieveError::OutOfRange { n, n_max: self.n_max });
        }
        Ok(self.get(n))
    }

    pub fn primes(&self) -> Vec<u64> {
        primes_up_to(self.n_max)
    }
}

pub fn sieve_mobius(n_max: u64) -> Result<MobiusTable, SieveError> {
    sieve_mobius_with_budget(n_max, DEFAULT_MEMORY_BUDGET)
}

pub fn sieve_mobius_with_budget(n_max: u64, budget: u64) -> Result<MobiusTable, SieveError> {
    if n_max == 0 {
        return Err(SieveError::EmptyRange);
    }
    let required = n_max.div_ceil(4);
    if required > budget {
        return Err(SieveError::MemoryBudget { n_max, required, budget });
    }
    // segments start at multiples of 4 entries, so packed bytes concatenate
    let packed = segmented(n_max, |lo, hi, primes| pack_mobius(&mobius_segment(lo, hi, primes)));
    Ok(MobiusTable { n_max, packed })
}

/// λ on `[1, n_max]`, one bit per entry (set ↦ -1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiouvilleTable {
    n_max: u64,
    bits: Vec<u64>,
}

impl LiouvilleTable {
    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    #[inline]
    pub fn get(&self, n: u64) -> i8 {
        assert!(n >= 1 && n <= self.n_max, "λ({n}) outside [1, {}]", self.n_max);
        let i = (n - 1) as usize;
        if (self.bits[i / 64] >> (i % 64)) & 1 == 1 {
            -1
        } else {
            1
        }
    }
}

pub fn sieve_liouville(n_max: u64) -> Result<LiouvilleTable, SieveError> {
    if n_max == 0 {
        return Err(SieveError::EmptyRange);
    }
    let required = n_max.div_ceil(8);
    if required > DEFAULT_MEMORY_BUDGET {
        return Err(SieveError::MemoryBudget { n_max, required, budget: DEFAULT_MEMORY_BUDGET });
    }
    let values = segmented(n_max, liouville_segment);
    let mut bits = vec![0u64; n_max.div_ceil(64) as usize];
    for (i, &v) in values.iter().enumerate() {
        if v < 0 {
            bits[i / 64] |= 1 << (i % 64);
        }
    }
    Ok(LiouvilleTable { n_max, bits })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhiTable {
    n_max: u64,
    values: Vec<u32>,
}

impl PhiTable {
    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    pub fn get(&self, n: u64) -> u32 {
        assert!(n >= 1 && n <= self.n_max, "φ({n}) outside [1, {}]", self.n_max);
        self.values[(n - 1) as usize]
    }
}

pub fn sieve_phi(n_max: u64) -> Result<PhiTable, SieveError> {
    if n_max == 0 {
        return Err(SieveError::EmptyRange);
    }
    let required = n_max.saturating_mul(4);
    if n_max > u32::MAX as u64 || required > DEFAULT_MEMORY_BUDGET {
        return Err(SieveError::MemoryBudget { n_max, required, budget: DEFAULT_MEMORY_BUDGET });
    }
    Ok(PhiTable { n_max, values: segmented(n_max, phi_segment) })
}

// Sum of the four 2-bit codes in a byte, as μ values.
const BYTE_SUMS: [i8; 256] = {
    let mut t = [0i8; 256];
    let mut b = 0;
    while b < 256 {
        let mut s = 0i8;
        let mut k = 0;
        while k < 4 {
            match (b >> (2 * k)) & 0b11 {
                0b01 => s += 1,
                0b10 => s -= 1,
                _ => {}
            }
            k += 1;
        }
        t[b] = s;
        b += 1;
    }
    t
};

/// `M(n) = Σ_{m≤n} μ(m)`.
pub fn mertens(table: &MobiusTable, n: u64) -> Result<i64, SieveError> {
    if n > table.n_max {
        return Err(SieveError::OutOfRange { n, n_max: table.n_max });
    }
    let full = (n / 4) as usize;
    let mut s: i64 = table.packed[..full].iter().map(|&b| BYTE_SUMS[b as usize] as i64).sum();
    for m in (full as u64 * 4 + 1)..=n {
        s += table.get(m) as i64;
    }
    Ok(s)
}

/// `M(1), ..., M(n_max)`.
pub fn mertens_trace(table: &MobiusTable) -> Vec<i32> {
    let mut acc = 0i32;
    (1..=table.n_max)
        .map(|n| {
            acc += table.get(n) as i32;
            acc
        })
        .collect()
}

/// `Σ_{p≤x_max} (1 - Re(g(p) p^{-it})) / p`.
pub fn pretentious_distance_sq<G>(g: G, t: f64, x_max: u64) -> Result<f64, SieveError>
where
    G: Fn(u64) -> Complex64,
{
    distance_over_primes(&g, t, &primes_up_to(x_max))
}

fn distance_over_primes<G>(g: &G, t: f64, primes: &[u64]) -> Result<f64, SieveError>
where
    G: Fn(u64) -> Complex64,
{
    let mut acc = 0.0;
    for &p in primes {
        let gp = g(p);
        let modulus = gp.norm();
        if modulus > 1.0 + 1e-12 {
            return Err(SieveError::NotOneBounded { p, modulus });
        }
        let pf = p as f64;
        // p^{-it} = exp(-i t log p)
        let twist = Complex64::from_polar(1.0, -t * pf.ln());
        acc += (1.0 - (gp * twist).re) / pf;
    }
    Ok(acc.max(0.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct GridEstimate {
    pub x_max: u64,
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub best_t: f64,
    /// Minimum of `D²` over the grid with the trivial character only; an
    /// upper bound on the infimum over all characters and `|t| <= X`.
    pub upper_bound: f64,
}

pub fn m_estimate<G>(g: G, t_grid: &[f64], x_max: u64) -> Result<GridEstimate, SieveError>
where
    G: Fn(u64) -> Complex64,
{
    if t_grid.is_empty() {
        return Err(SieveError::EmptyGrid);
    }
    let primes = primes_up_to(x_max);
    let values = t_grid
        .iter()
        .map(|&t| distance_over_primes(&g, t, &primes))
        .collect::<Result<Vec<_>, _>>()?;
    let (best, &upper_bound) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is nonempty");
    Ok(GridEstimate {
        x_max,
        t_grid: t_grid.to_vec(),
        values,
        best_t: t_grid[best],
        upper_bound,
    })
}

/// `t`-values `-t_max, ..., t_max` in `2 steps + 1` points.
pub fn symmetric_t_grid(t_max: f64, steps: usize) -> Vec<f64> {
    if steps == 0 {
        return vec![0.0];
    }
    (0..=2 * steps)
        .map(|i| -t_max + t_max * i as f64 / steps as f64)
        .collect()
}

/// The weight's values on primes, as a complex function for the distance.
pub fn prime_values<W: ArithmeticWeight + ?Sized>(w: &W) -> impl Fn(u64) -> Complex64 + '_ {
    move |p| Complex64::new(w.weight(p) as f64, 0.0)
}

/// Complex unit `e(θ) = exp(2πiθ)`.
#[inline]
pub fn e(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * theta)
}

pub fn encode_cache(table: &MobiusTable) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + table.packed.len() + 4);
    out.extend_from_slice(CACHE_MAGIC);
    out.push(CACHE_VERSION);
    out.extend_from_slice(&table.n_max.to_le_bytes());
    out.extend_from_slice(&table.packed);
    out.extend_from_slice(&table.checksum().to_le_bytes());
    out
}

pub fn decode_cache(bytes: &[u8]) -> Result<MobiusTable, CacheError> {
    if bytes.len() < 4 {
        return Err(CacheError::ShortHeader { len: bytes.len() as u64 });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("four bytes");
    if &magic != CACHE_MAGIC {
        return Err(CacheError::BadMagic { found: magic });
    }
    if bytes.len() < HEADER_LEN + 4 {
        return Err(CacheError::ShortHeader { len: bytes.len() as u64 });
    }
    if bytes[4] != CACHE_VERSION {
        return Err(CacheError::Version { expected: CACHE_VERSION, found: bytes[4] });
    }
    let n_max = u64::from_le_bytes(bytes[5..13].try_into().expect("eight bytes"));
    let (payload, crc) = bytes[HEADER_LEN..].split_at(bytes.len() - HEADER_LEN - 4);
    let stored = u32::from_le_bytes(crc.try_into().expect("four bytes"));
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(CacheError::Checksum { stored, computed });
    }
    let expected = n_max.div_ceil(4);
    if payload.len() as u64 != expected || n_max == 0 {
        return Err(CacheError::Length { n_max, expected, found: payload.len() as u64 });
    }
    for (i, &b) in payload.iter().enumerate() {
        for slot in 0..4 {
            let n = i as u64 * 4 + slot + 1;
            let code = (b >> (2 * slot)) & 0b11;
            if code == 0b11 || (n > n_max && code != 0) {
                return Err(CacheError::InvalidCode { n });
            }
        }
    }
    Ok(MobiusTable { n_max, packed: payload.to_vec() })
}

/// Writes the cache atomically (temporary file, then rename).
pub fn save_cache(table: &MobiusTable, path: &Path) -> Result<(), CacheError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&encode_cache(table))?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_cache(path: &Path) -> Result<MobiusTable, CacheError> {
    decode_cache(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_mu(mut n: u64) -> i8 {
        let mut mu = 1;
        let mut p = 2;
        while p * p <= n {
            if n.is_multiple_of(p) {
                n /= p;
                if n.is_multiple_of(p) {
                    return 0;
                }
                mu = -mu;
            }
            p += 1;
        }
        if n > 1 {
            mu = -mu;
        }
        mu
    }

    #[test]
    fn small_mobius_values() {
        let t = sieve_mobius(100).unwrap();
        assert_eq!(t.get(1), 1);
        assert_eq!(t.get(12), 0);
        assert_eq!(t.get(30), -1);
        for n in 1..=100 {
            assert_eq!(t.get(n), trial_mu(n), "n = {n}");
        }
    }

    #[test]
    fn crosses_segment_boundaries() {
        let n = 3 * SEGMENT + 17;
        let t = sieve_mobius(n).unwrap();
        for m in (SEGMENT - 40)..(SEGMENT + 40) {
            assert_eq!(t.get(m), trial_mu(m));
        }
        for m in (n - 40)..=n {
            assert_eq!(t.get(m), trial_mu(m));
        }
    }

    #[test]
    fn mertens_small() {
        let t = sieve_mobius(10).unwrap();
        assert_eq!(mertens(&t, 1).unwrap(), 1);
        assert_eq!(mertens(&t, 10).unwrap(), -1);
        assert_eq!(mertens(&t, 0).unwrap(), 0);
        assert!(mertens(&t, 11).is_err());
        let trace = mertens_trace(&t);
        assert_eq!(trace, vec![1, 0, -1, -1, -2, -1, -2, -2, -2, -1]);
    }

    #[test]
    fn rejects_zero_and_budget() {
        assert!(matches!(sieve_mobius(0), Err(SieveError::EmptyRange)));
        assert!(matches!(
            sieve_mobius_with_budget(1000, 10),
            Err(SieveError::MemoryBudget { required: 250, .. })
        ));
        assert!(matches!(sieve_mobius(5).unwrap().try_get(0), Err(SieveError::OutOfRange { .. })));
    }

    #[test]
    fn liouville_and_phi_small() {
        let l = sieve_liouville(100).unwrap();
        assert_eq!(l.get(8), -1);
        assert_eq!(l.get(1), 1);
        assert_eq!(l.get(12), -1);
        let p = sieve_phi(100).unwrap();
        assert_eq!(p.get(10), 4);
        assert_eq!(p.get(1), 1);
        assert_eq!(p.get(97), 96);
    }

    #[test]
    fn distance_examples() {
        let zero = pretentious_distance_sq(|_| Complex64::new(1.0, 0.0), 0.0, 1000).unwrap();
        assert_eq!(zero, 0.0);
        let mu = pretentious_distance_sq(|_| Complex64::new(-1.0, 0.0), 0.0, 100).unwrap();
        let direct: f64 = primes(100).iter().map(|&p| 2.0 / p as f64).sum();
        assert!((mu - direct).abs() < 1e-12);
        let err = pretentious_distance_sq(|_| Complex64::new(1.5, 0.0), 0.0, 10);
        assert!(matches!(err, Err(SieveError::NotOneBounded { p: 2, .. })));
    }

    #[test]
    fn grid_estimate_picks_minimum() {
        let est = m_estimate(|_| Complex64::new(1.0, 0.0), &symmetric_t_grid(2.0, 4), 200).unwrap();
        assert_eq!(est.best_t, 0.0);
        assert_eq!(est.upper_bound, 0.0);
        assert!(m_estimate(|_| Complex64::new(1.0, 0.0), &[], 10).is_err());
    }

    #[test]
    fn cache_errors_are_typed() {
        let t = sieve_mobius(1000).unwrap();
        let bytes = encode_cache(&t);
        assert_eq!(decode_cache(&bytes).unwrap(), t);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_cache(&bad), Err(CacheError::BadMagic { .. })));

        let mut bad = bytes.clone();
        bad[4] = 2;
        let err = decode_cache(&bad).unwrap_err();
        assert!(matches!(err, CacheError::Version { expected: 1, found: 2 }));
        assert!(err.to_string().contains("expected 1, found 2"));

        let truncated = &bytes[..bytes.len() - 10];
        assert!(matches!(decode_cache(truncated), Err(CacheError::Checksum { .. })));

        let mut flipped = bytes.clone();
        flipped[20] ^= 0b01;
        assert!(matches!(decode_cache(&flipped), Err(CacheError::Checksum { .. })));
    }

    #[test]
    fn invalid_code_is_rejected() {
        let t = sieve_mobius(8).unwrap();
        let mut bytes = encode_cache(&t);
        bytes[HEADER_LEN] |= 0b11;
        let crc = crc32fast::hash(&bytes[HEADER_LEN..bytes.len() - 4]);
        let len = bytes.len();
        bytes[len - 4..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(decode_cache(&bytes), Err(CacheError::InvalidCode { n: 1 })));
    }
}
