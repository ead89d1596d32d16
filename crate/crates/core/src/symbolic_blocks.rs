//! Finite-prefix block statistics for finite-range sequences, and the
//! symbolic sequences built from fractional parts of polynomial and
//! bracket phases.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact_calculus::frac;
use crate::fixed::{FixedPointReal, Scalar, FRAC_BITS};
use crate::phase::{Phase, PhaseError};

/// Near-tie window for strict fractional-part comparisons, in 2^-96 ulps (2^-64).
pub const TIE_WINDOW_ULPS: u128 = 1 << 32;

const SCAN_CHUNK: usize = 1 << 16;

#[derive(Debug, Error)]
pub enum BlockError {
    #[error("window length {j} is invalid for a prefix of length {len}")]
    Window { j: usize, len: usize },
    #[error("symbol {symbol} at position {position} is not below the alphabet size {alphabet}")]
    Symbol { symbol: u32, position: usize, alphabet: u32 },
    #[error("empty sequence")]
    Empty,
    #[error("effective threshold must be at least 2, got {0}")]
    Threshold(u64),
    #[error("alphabet size {0} does not fit the byte format")]
    WideAlphabet(u32),
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error("sequence header mismatch: {0}")]
    Header(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSeq {
    symbols: Vec<u32>,
    alphabet_size: u32,
}

impl SymbolSeq {
    pub fn new(symbols: Vec<u32>, alphabet_size: u32) -> Result<Self, BlockError> {
        if symbols.is_empty() {
            return Err(BlockError::Empty);
        }
        if let Some((position, &symbol)) = symbols.iter().enumerate().find(|(_, &s)| s >= alphabet_size) {
            return Err(BlockError::Symbol { symbol, position, alphabet: alphabet_size });
        }
        Ok(Self { symbols, alphabet_size })
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    pub fn alphabet_size(&self) -> u32 {
        self.alphabet_size
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// The first `p` symbols.
    pub fn prefix(&self, p: usize) -> Result<Self, BlockError> {
        if p == 0 || p > self.len() {
            return Err(BlockError::Window { j: p, len: self.len() });
        }
        Ok(Self { symbols: self.symbols[..p].to_vec(), alphabet_size: self.alphabet_size })
    }
}

/// Window keys: base-`alphabet` integers when they fit in 128 bits.
fn packable(alphabet: u32, j: usize) -> bool {
    (alphabet.max(2) as f64).log2() * j as f64 <= 127.0
}

fn encode(window: &[u32], alphabet: u128) -> u128 {
    window.iter().fold(0u128, |acc, &s| acc * alphabet + s as u128)
}

fn decode(mut key: u128, alphabet: u128, j: usize) -> Vec<u32> {
    let mut out = vec![0u32; j];
    for slot in out.iter_mut().rev() {
        *slot = (key % alphabet) as u32;
        key /= alphabet;
    }
    out
}

/// Occurrence counts of the length-`j` windows starting at `starts`.
fn count_windows<I>(symbols: &[u32], alphabet: u32, j: usize, starts: I) -> HashMap<Vec<u32>, u64>
where
    I: IntoParallelIterator<Item = usize>,
    I::Iter: IndexedParallelIterator,
{
    let starts: Vec<usize> = starts.into_par_iter().collect();
    if packable(alphabet, j) {
        let a = alphabet.max(2) as u128;
        let counts = starts
            .par_chunks(SCAN_CHUNK)
            .map(|chunk| {
                let mut m: HashMap<u128, u64> = HashMap::new();
                for &s in chunk {
                    *m.entry(encode(&symbols[s..s + j], a)).or_default() += 1;
                }
                m
            })
            .reduce(HashMap::new, merge);
        counts.into_iter().map(|(k, c)| (decode(k, a, j), c)).collect()
    } else {
        let counts = starts
            .par_chunks(SCAN_CHUNK)
            .map(|chunk| {
                let mut m: HashMap<&[u32], u64> = HashMap::new();
                for &s in chunk {
                    *m.entry(&symbols[s..s + j]).or_default() += 1;
                }
                m
            })
            .reduce(HashMap::new, merge);
        counts.into_iter().map(|(k, c)| (k.to_vec(), c)).collect()
    }
}

fn merge<K: std::hash::Hash + Eq>(mut a: HashMap<K, u64>, b: HashMap<K, u64>) -> HashMap<K, u64> {
    if a.len() < b.len() {
        return merge(b, a);
    }
    for (k, c) in b {
        *a.entry(k).or_default() += c;
    }
    a
}

/// The four `J`-block families of a finite prefix, with occurrence counts.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockIndex {
    pub j: usize,
    pub prefix_len: usize,
    pub threshold: u64,
    pub tail_start: usize,
    pub all: HashMap<Vec<u32>, u64>,
    pub regular: HashMap<Vec<u32>, u64>,
    /// Blocks occurring at least `threshold` times at starts `>= tail_start`.
    pub effective: HashMap<Vec<u32>, u64>,
    /// Regular blocks with at least `threshold` regular occurrences at starts `>= tail_start`.
    pub regularly_effective: HashMap<Vec<u32>, u64>,
}

impl BlockIndex {
    pub fn containments_hold(&self) -> bool {
        let sub = |a: &HashMap<Vec<u32>, u64>, b: &HashMap<Vec<u32>, u64>| a.keys().all(|k| b.contains_key(k));
        sub(&self.regularly_effective, &self.regular)
            && sub(&self.regular, &self.all)
            && sub(&self.regularly_effective, &self.effective)
            && sub(&self.effective, &self.all)
    }
}

pub fn index_blocks(seq: &SymbolSeq, j: usize, threshold: u64) -> Result<BlockIndex, BlockError> {
    index_blocks_with_tail(seq, j, threshold, 0)
}

pub fn index_blocks_with_tail(
    seq: &SymbolSeq,
    j: usize,
    threshold: u64,
    tail_start: usize,
) -> Result<BlockIndex, BlockError> {
    let p = seq.len();
    if j == 0 || j > p {
        return Err(BlockError::Window { j, len: p });
    }
    if threshold < 2 {
        return Err(BlockError::Threshold(threshold));
    }
    let last = p - j;
    let all = count_windows(&seq.symbols, seq.alphabet_size, j, 0..last + 1);
    let regular = count_windows(&seq.symbols, seq.alphabet_size, j, (0..last / j + 1).into_par_iter().map(|l| l * j));
    let (effective, regularly_effective) = if tail_start == 0 {
        (
            all.iter().filter(|(_, &c)| c >= threshold).map(|(k, &c)| (k.clone(), c)).collect(),
            regular.iter().filter(|(_, &c)| c >= threshold).map(|(k, &c)| (k.clone(), c)).collect(),
        )
    } else {
        let first = tail_start.min(last + 1);
        let tail_all = count_windows(&seq.symbols, seq.alphabet_size, j, first..last + 1);
        let first_l = tail_start.div_ceil(j);
        let tail_reg = count_windows(
            &seq.symbols,
            seq.alphabet_size,
            j,
            (first_l.min(last / j + 1)..last / j + 1).into_par_iter().map(|l| l * j),
        );
        (
            tail_all.into_iter().filter(|(_, c)| *c >= threshold).collect(),
            tail_reg.into_iter().filter(|(_, c)| *c >= threshold).collect(),
        )
    };
    Ok(BlockIndex { j, prefix_len: p, threshold, tail_start, all, regular, effective, regularly_effective })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EntropyRow {
    #[serde(rename = "J")]
    pub j: usize,
    pub count_all: usize,
    pub count_regular: usize,
    pub count_effective: usize,
    pub count_reg_effective: usize,
    /// `log|B_J| / J` on the finite prefix (natural log).
    pub entropy_estimate: f64,
}

pub fn entropy_curve(
    seq: &SymbolSeq,
    j_max: usize,
    threshold: u64,
    tail_start: usize,
) -> Result<Vec<EntropyRow>, BlockError> {
    if j_max == 0 || j_max > seq.len() {
        return Err(BlockError::Window { j: j_max, len: seq.len() });
    }
    (1..=j_max)
        .map(|j| {
            let idx = index_blocks_with_tail(seq, j, threshold, tail_start)?;
            Ok(EntropyRow {
                j,
                count_all: idx.all.len(),
                count_regular: idx.regular.len(),
                count_effective: idx.effective.len(),
                count_reg_effective: idx.regularly_effective.len(),
                entropy_estimate: (idx.all.len() as f64).ln() / j as f64,
            })
        })
        .collect()
}

/// Distinct windows of length `j` at starts `0..=P-j`.
pub fn distinct_blocks(seq: &SymbolSeq, j: usize) -> Result<usize, BlockError> {
    if j == 0 || j > seq.len() {
        return Err(BlockError::Window { j, len: seq.len() });
    }
    Ok(count_windows(&seq.symbols, seq.alphabet_size, j, 0..seq.len() - j + 1).len())
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct InequalityCheck {
    pub j: usize,
    pub l: usize,
    /// Distinct `lJ`-windows starting at or before `P - (l+1)J`.
    pub lhs: u64,
    /// `J |B_J^r|^{l+1}`.
    pub rhs: String,
    pub holds: bool,
}

/// `|B_{lJ}| <= J |B_J^r|^{l+1}` on the edge-safe region.
pub fn block_count_inequality_check(seq: &SymbolSeq, j: usize, l: usize) -> Result<InequalityCheck, BlockError> {
    let p = seq.len();
    if j == 0 || l == 0 || (l + 1) * j > p {
        return Err(BlockError::Window { j: (l + 1) * j, len: p });
    }
    let last = p - (l + 1) * j;
    let lhs = count_windows(&seq.symbols, seq.alphabet_size, l * j, 0..last + 1).len() as u64;
    let regular = count_windows(
        &seq.symbols,
        seq.alphabet_size,
        j,
        (0..(p - j) / j + 1).into_par_iter().map(|i| i * j),
    )
    .len();
    let rhs = BigUint::from(j) * num_traits::pow(BigUint::from(regular), l + 1);
    Ok(InequalityCheck { j, l, lhs, holds: BigUint::from(lhs) <= rhs, rhs: rhs.to_string() })
}

/// `t = ⌊N {y}⌋`, so `{y} ∈ [t/N, (t+1)/N)`.
pub fn quantize_gn(values: &[Scalar], n: u32) -> Result<SymbolSeq, BlockError> {
    if n == 0 {
        return Err(BlockError::Symbol { symbol: 0, position: 0, alphabet: 0 });
    }
    let symbols = values
        .iter()
        .map(|y| {
            let t = match y {
                Scalar::Rational(r) => {
                    (frac(r) * BigRational::from_integer(BigInt::from(n))).floor().to_integer().to_u32().unwrap_or(0)
                }
                Scalar::Real { value, .. } => ((value.frac_bits() * n as u128) >> FRAC_BITS) as u32,
            };
            t.min(n - 1)
        })
        .collect();
    SymbolSeq::new(symbols, n)
}

#[derive(Debug, Clone, Serialize, PartialEq, Default)]
pub struct TieReport {
    /// Indices where the two fractional parts were within 2^-64 (plus error bounds).
    pub near_ties: Vec<u64>,
    pub max_error_bound: f64,
}

/// `1_S(n)` for `S = {n : {p1(n)} < {p2(n)}}`, `0 <= n < P`.
pub fn indicator_s(p1: &Phase, p2: &Phase, p: u64) -> Result<(SymbolSeq, TieReport), BlockError> {
    if p == 0 {
        return Err(BlockError::Empty);
    }
    let mut report = TieReport::default();
    let mut max_err = 0u128;
    let mut symbols = Vec::with_capacity(p as usize);
    for n in 0..p {
        let a = p1.eval(n)?;
        let b = p2.eval(n)?;
        let less = match (&a.exact, &b.exact) {
            (Some(x), Some(y)) => x < y,
            _ => {
                let slack = a.err_ulps + b.err_ulps;
                max_err = max_err.max(slack);
                if a.frac.abs_diff(b.frac) <= slack + TIE_WINDOW_ULPS {
                    report.near_ties.push(n);
                }
                a.frac < b.frac
            }
        };
        symbols.push(less as u32);
    }
    report.max_error_bound = max_err as f64 * 2f64.powi(-(FRAC_BITS as i32));
    Ok((SymbolSeq::new(symbols, 2)?, report))
}

/// `8^{2k} (2k+1) 2^{2k} (k+2)^{2k} J^{2k(k+1)}`.
pub fn prop32_bound(j: u64, k: u64) -> BigUint {
    let two_k = (2 * k) as usize;
    num_traits::pow(BigUint::from(8u32), two_k)
        * BigUint::from(2 * k + 1)
        * (BigUint::one() << two_k)
        * num_traits::pow(BigUint::from(k + 2), two_k)
        * num_traits::pow(BigUint::from(j), two_k * (k as usize + 1))
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Example33Report {
    pub p: u64,
    /// Occurrences of cases 1..4.
    pub case_counts: [u64; 4],
    pub unlabeled: u64,
    pub multiply_labeled: u64,
    /// `max |Δ²f(n) - formula(n)|`.
    pub max_residual: f64,
    pub argmax: u64,
}

/// Labels `n < P` by which of the four carry patterns of `{√2 n}, {√2(n+1)}, {√2(n+2)}`
/// holds (symbol `c - 1` for case `c`), and checks the piecewise form of
/// `Δ²f` for `f(n) = √3 n {√2 n}`.
pub fn example33_labels(p: u64) -> Result<(SymbolSeq, Example33Report), BlockError> {
    if p < 3 {
        return Err(BlockError::Window { j: 3, len: p as usize });
    }
    let sqrt2 = Scalar::sqrt(2).to_fixed();
    let sqrt3 = Scalar::sqrt(3).to_fixed();
    let f = Phase::bracket(Scalar::sqrt(3), Scalar::sqrt(2));
    let fracs: Vec<u128> = (0..p + 2).map(|n| sqrt2.mul_int(&BigInt::from(n)).frac_bits()).collect();
    let values: Vec<FixedPointReal> = (0..p + 2).map(|n| f.real(n)).collect::<Result<_, _>>()?;

    let delta = sqrt2.sub(&FixedPointReal::from_int(1));
    let two = BigInt::from(2);
    let base1 = sqrt3.mul(&delta).mul_int(&two); // 2√3(√2 - 1)
    let base2 = sqrt3.mul(&sqrt2.sub(&FixedPointReal::from_int(2))).mul_int(&two); // 2√3(√2 - 2)

    let mut symbols = Vec::with_capacity(p as usize);
    let mut report = Example33Report {
        p,
        case_counts: [0; 4],
        unlabeled: 0,
        multiply_labeled: 0,
        max_residual: 0.0,
        argmax: 0,
    };
    for n in 0..p as usize {
        let (a, b, c) = (fracs[n], fracs[n + 1], fracs[n + 2]);
        let cases = [c > b && b > a, c < b && b < a, c > b && b < a, c < b && b > a];
        let hits: Vec<usize> = (0..4).filter(|&i| cases[i]).collect();
        match hits.len() {
            0 => report.unlabeled += 1,
            1 => {}
            _ => report.multiply_labeled += 1,
        }
        let Some(&case) = hits.first() else {
            symbols.push(0);
            continue;
        };
        report.case_counts[case] += 1;
        symbols.push(case as u32);

        let nn = BigInt::from(n);
        let formula = match case {
            0 => base1.clone(),
            1 => base2.clone(),
            2 => base1.add(&sqrt3.mul_int(&nn)),
            _ => base2.sub(&sqrt3.mul_int(&nn)),
        };
        let d2 = values[n + 2].sub(&values[n + 1].mul_int(&two)).add(&values[n]);
        let r = d2.sub(&formula).to_f64().abs();
        if r > report.max_residual {
            report.max_residual = r;
            report.argmax = n as u64;
        }
    }
    Ok((SymbolSeq::new(symbols, 4)?, report))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SequenceHeader {
    pub alphabet_size: u32,
    pub length: u64,
}

/// `(data, header)` paths: `stem.bin` and `stem.json`, whichever of the two is given.
fn sequence_paths(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("bin"), path.with_extension("json"))
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> BlockError + '_ {
    move |source| BlockError::Io { path: path.to_path_buf(), source }
}

/// Writes one byte per symbol to `stem.bin` and the header to `stem.json`.
pub fn save_sequence(seq: &SymbolSeq, path: &Path) -> Result<(), BlockError> {
    let (path, hp) = sequence_paths(path);
    let path = path.as_path();
    if seq.alphabet_size > 256 {
        return Err(BlockError::WideAlphabet(seq.alphabet_size));
    }
    let bytes: Vec<u8> = seq.symbols.iter().map(|&s| s as u8).collect();
    let header = SequenceHeader { alphabet_size: seq.alphabet_size, length: seq.len() as u64 };
    let json = serde_json::to_vec_pretty(&header).map_err(|source| BlockError::Json { path: hp.clone(), source })?;
    write_atomic(path, &bytes)?;
    write_atomic(&hp, &json)
}

fn write_atomic(path: &Path, data: &[u8]) -> Result<(), BlockError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, data).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Reads a sequence saved by [`save_sequence`], given either of its two paths.
pub fn load_sequence(path: &Path) -> Result<SymbolSeq, BlockError> {
    let (path, hp) = sequence_paths(path);
    let path = path.as_path();
    let text = fs::read(&hp).map_err(io_err(&hp))?;
    let header: SequenceHeader =
        serde_json::from_slice(&text).map_err(|source| BlockError::Json { path: hp.clone(), source })?;
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() as u64 != header.length {
        return Err(BlockError::Header(format!(
            "header says {} symbols, file has {}",
            header.length,
            bytes.len()
        )));
    }
    SymbolSeq::new(bytes.into_iter().map(u32::from).collect(), header.alphabet_size)
}

/// Independent distinct-window count with a plain hash set of slices.
pub fn distinct_windows_naive(symbols: &[u32], j: usize) -> usize {
    symbols.windows(j).collect::<HashSet<_>>().len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &[u32], a: u32) -> SymbolSeq {
        SymbolSeq::new(s.to_vec(), a).unwrap()
    }

    #[test]
    fn constant_sequence_has_one_block_everywhere() {
        let s = seq(&[0; 50], 1);
        for j in 1..=10 {
            let idx = index_blocks(&s, j, 2).unwrap();
            assert_eq!(
                (idx.all.len(), idx.regular.len(), idx.effective.len(), idx.regularly_effective.len()),
                (1, 1, 1, 1)
            );
        }
    }

    #[test]
    fn period_two() {
        let s = seq(&(0..1000).map(|i| i % 2).collect::<Vec<_>>(), 2);
        let idx = index_blocks(&s, 2, 2).unwrap();
        let mut all: Vec<_> = idx.all.keys().cloned().collect();
        all.sort();
        assert_eq!(all, vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(idx.regular.keys().cloned().collect::<Vec<_>>(), vec![vec![0, 1]]);
        assert!(idx.containments_hold());
        assert!(block_count_inequality_check(&s, 2, 3).unwrap().holds);
    }

    #[test]
    fn wide_alphabet_falls_back_to_slices() {
        let symbols: Vec<u32> = (0..300).map(|i| (i * 7919) % 1000).collect();
        let s = seq(&symbols, 1000);
        assert!(!packable(1000, 20));
        for j in [3, 20] {
            assert_eq!(distinct_blocks(&s, j).unwrap(), distinct_windows_naive(&symbols, j));
        }
    }

    #[test]
    fn tail_start_restricts_effective() {
        let mut v = vec![1, 1, 1, 1];
        v.extend([0u32; 10]);
        let s = seq(&v, 2);
        let idx = index_blocks_with_tail(&s, 1, 2, 4).unwrap();
        assert!(idx.all.contains_key(&vec![1]));
        assert!(!idx.effective.contains_key(&vec![1]));
        assert!(idx.containments_hold());
    }

    #[test]
    fn quantization_cells() {
        let q = quantize_gn(
            &["0.37".parse().unwrap(), Scalar::int(1), Scalar::rational(3, 10), Scalar::rational(-1, 10)],
            10,
        )
        .unwrap();
        assert_eq!(q.symbols(), &[3, 0, 3, 9]);
    }

    #[test]
    fn indicator_constants() {
        let (s, _) = indicator_s(&Phase::zero(), &Phase::polynomial(vec![Scalar::rational(1, 2)]), 20).unwrap();
        assert!(s.symbols().iter().all(|&b| b == 1));
        let (s, _) = indicator_s(&Phase::polynomial(vec![Scalar::rational(1, 2)]), &Phase::zero(), 20).unwrap();
        assert!(s.symbols().iter().all(|&b| b == 0));
    }

    #[test]
    fn example33_first_values() {
        let (labels, report) = example33_labels(1000).unwrap();
        assert_eq!(labels.symbols()[1], 3);
        assert_eq!(report.unlabeled + report.multiply_labeled, 0);
        assert!(report.max_residual <= 1e-9);
        // two consecutive carries of √2 n are impossible
        assert_eq!(report.case_counts[1], 0);
        let f = Phase::bracket(Scalar::sqrt(3), Scalar::sqrt(2));
        let d2 = f.real(3).unwrap().sub(&f.real(2).unwrap().mul_int(&BigInt::from(2))).add(&f.real(1).unwrap());
        let expect = 2.0 * 3f64.sqrt() * (2f64.sqrt() - 2.0) - 3f64.sqrt();
        assert!((d2.to_f64() - expect).abs() < 1e-9);
        assert!((d2.to_f64() + 3.761276).abs() < 5e-6);
    }

    #[test]
    fn prop32_bound_value() {
        // k = 2: 8^4 · 5 · 2^4 · 4^4 · J^12
        assert_eq!(prop32_bound(1, 2), BigUint::from(4096u64 * 5 * 16 * 256));
        assert_eq!(prop32_bound(2, 2), BigUint::from(4096u64 * 5 * 16 * 256 * 4096));
    }

    #[test]
    fn sequence_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        let s = seq(&[0, 2, 1, 2, 2], 3);
        save_sequence(&s, &path).unwrap();
        assert_eq!(load_sequence(&path).unwrap(), s);
        assert_eq!(load_sequence(&dir.path().join("s.json")).unwrap(), s);
        fs::write(&path, [0u8, 1]).unwrap();
        assert!(matches!(load_sequence(&path), Err(BlockError::Header(_))));
    }
}
