//! Pieces of `R^k` cut out by finitely many rational hyperplanes.
//!
//! A piece is a nonempty intersection `P_1 ∩ ... ∩ P_m` where each `P_j` is
//! the open half-space above, the open half-space below, or the hyperplane
//! `F_j(x) = c_j` itself. Feasibility is decided exactly by Fourier–Motzkin
//! elimination over the rationals.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact_calculus::binomial;

/// Default cap on `3^m` sign vectors for [`count_pieces`].
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 43_046_721; // 3^16

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArrangementError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("hyperplane {index} has a zero normal")]
    ZeroNormal { index: usize },
    #[error("empty arrangement")]
    Empty,
    #[error("3^{m} sign vectors exceed the enumeration budget {budget}")]
    Budget { m: usize, budget: u64 },
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hyperplane {
    normal: Vec<BigRational>,
    offset: BigRational,
}

impl Hyperplane {
    pub fn new(normal: Vec<BigRational>, offset: BigRational) -> Result<Self, ArrangementError> {
        if normal.is_empty() {
            return Err(ArrangementError::Dimension { expected: 1, got: 0 });
        }
        if normal.iter().all(Zero::is_zero) {
            return Err(ArrangementError::ZeroNormal { index: 0 });
        }
        Ok(Self { normal, offset })
    }

    /// Integer convenience constructor.
    pub fn from_ints(normal: &[i64], offset: i64) -> Result<Self, ArrangementError> {
        Self::new(
            normal.iter().map(|&a| BigRational::from_integer(a.into())).collect(),
            BigRational::from_integer(offset.into()),
        )
    }

    pub fn normal(&self) -> &[BigRational] {
        &self.normal
    }

    pub fn offset(&self) -> &BigRational {
        &self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// `F(x) - c`.
    pub fn residual(&self, point: &[BigRational]) -> BigRational {
        let mut acc = -self.offset.clone();
        for (a, x) in self.normal.iter().zip(point) {
            acc += a * x;
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
    Zero,
}

impl Sign {
    /// Digit order used for enumeration.
    pub const ALL: [Sign; 3] = [Sign::Plus, Sign::Minus, Sign::Zero];

    fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
            Sign::Zero => '0',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SignVector(pub Vec<Sign>);

impl fmt::Display for SignVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{}", s.symbol())?;
        }
        Ok(())
    }
}

fn check_arrangement(arr: &[Hyperplane]) -> Result<usize, ArrangementError> {
    let first = arr.first().ok_or(ArrangementError::Empty)?;
    let k = first.dim();
    for (index, h) in arr.iter().enumerate() {
        if h.dim() != k {
            return Err(ArrangementError::Dimension { expected: k, got: h.dim() });
        }
        if h.normal.iter().all(Zero::is_zero) {
            return Err(ArrangementError::ZeroNormal { index });
        }
    }
    Ok(k)
}

pub fn classify_point(point: &[BigRational], arr: &[Hyperplane]) -> Result<SignVector, ArrangementError> {
    let k = check_arrangement(arr)?;
    if point.len() != k {
        return Err(ArrangementError::Dimension { expected: k, got: point.len() });
    }
    Ok(SignVector(
        arr.iter()
            .map(|h| {
                let r = h.residual(point);
                if r.is_zero() {
                    Sign::Zero
                } else if r.is_positive() {
                    Sign::Plus
                } else {
                    Sign::Minus
                }
            })
            .collect(),
    ))
}

/// `a · x + b > 0` (strict) or `>= 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Ineq {
    a: Vec<BigRational>,
    b: BigRational,
    strict: bool,
}

impl Ineq {
    fn is_constant(&self) -> bool {
        self.a.iter().all(Zero::is_zero)
    }

    fn holds_constant(&self) -> bool {
        if self.strict {
            self.b.is_positive()
        } else {
            !self.b.is_negative()
        }
    }

    /// Scale by a positive factor so the first nonzero coefficient is ±1.
    fn normalize(&mut self) {
        if let Some(lead) = self.a.iter().find(|c| !c.is_zero()).map(|c| c.abs()) {
            for c in &mut self.a {
                *c /= &lead;
            }
            self.b /= &lead;
        }
    }

    fn eval(&self, x: &[BigRational]) -> BigRational {
        let mut acc = self.b.clone();
        for (a, v) in self.a.iter().zip(x) {
            acc += a * v;
        }
        acc
    }
}

/// `a · x + b = 0`.
#[derive(Debug, Clone)]
struct Eq_ {
    a: Vec<BigRational>,
    b: BigRational,
}

/// Keep only the tightest inequality for each normalized left-hand side.
fn dedup(ineqs: Vec<Ineq>) -> Vec<Ineq> {
    let mut best: BTreeMap<Vec<BigRational>, (BigRational, bool)> = BTreeMap::new();
    for mut q in ineqs {
        q.normalize();
        match best.get_mut(&q.a) {
            Some((b, strict)) => {
                if q.b < *b || (q.b == *b && q.strict && !*strict) {
                    *b = q.b;
                    *strict = q.strict;
                }
            }
            None => {
                best.insert(q.a, (q.b, q.strict));
            }
        }
    }
    best.into_iter().map(|(a, (b, strict))| Ineq { a, b, strict }).collect()
}

/// Substitute `x_var = -(Σ_{j≠var} e_j x_j + b) / e_var` into `target`.
fn substitute(target_a: &mut [BigRational], target_b: &mut BigRational, eq: &Eq_, var: usize) {
    let t = target_a[var].clone();
    if t.is_zero() {
        return;
    }
    let factor = &t / &eq.a[var];
    for (j, c) in target_a.iter_mut().enumerate() {
        if j == var {
            *c = BigRational::zero();
        } else {
            *c -= &factor * &eq.a[j];
        }
    }
    *target_b -= &factor * &eq.b;
}

struct FmStep {
    var: usize,
    lower: Vec<Ineq>,
    upper: Vec<Ineq>,
}

/// Exact feasibility of `{ eqs = 0, ineqs }` in `k` variables, with a witness point.
fn solve(k: usize, mut eqs: Vec<Eq_>, mut ineqs: Vec<Ineq>) -> Option<Vec<BigRational>> {
    let mut subs: Vec<(usize, Eq_)> = Vec::new();
    while let Some(eq) = eqs.pop() {
        let Some(var) = eq.a.iter().position(|c| !c.is_zero()) else {
            if eq.b.is_zero() {
                continue;
            }
            return None;
        };
        for other in eqs.iter_mut() {
            substitute(&mut other.a, &mut other.b, &eq, var);
        }
        for q in ineqs.iter_mut() {
            substitute(&mut q.a, &mut q.b, &eq, var);
        }
        subs.push((var, eq));
    }

    let mut steps: Vec<FmStep> = Vec::new();
    let mut current = dedup(ineqs);
    loop {
        let (constants, rest): (Vec<Ineq>, Vec<Ineq>) = current.into_iter().partition(Ineq::is_constant);
        if !constants.iter().all(Ineq::holds_constant) {
            return None;
        }
        if rest.is_empty() {
            break;
        }
        // eliminate the variable producing the fewest combined constraints
        let var = (0..k)
            .filter(|&v| rest.iter().any(|q| !q.a[v].is_zero()))
            .min_by_key(|&v| {
                let p = rest.iter().filter(|q| q.a[v].is_positive()).count();
                let n = rest.iter().filter(|q| q.a[v].is_negative()).count();
                p * n
            })
            .expect("some variable appears");
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut keep = Vec::new();
        for q in rest {
            if q.a[var].is_positive() {
                lower.push(q);
            } else if q.a[var].is_negative() {
                upper.push(q);
            } else {
                keep.push(q);
            }
        }
        for p in &lower {
            for n in &upper {
                let sp = p.a[var].clone();
                let sn = -n.a[var].clone();
                let a: Vec<BigRational> = p.a.iter().zip(&n.a).map(|(x, y)| x * &sn + y * &sp).collect();
                let b = &p.b * &sn + &n.b * &sp;
                keep.push(Ineq { a, b, strict: p.strict || n.strict });
            }
        }
        steps.push(FmStep { var, lower, upper });
        current = dedup(keep);
    }

    let mut x = vec![BigRational::zero(); k];
    for step in steps.iter().rev() {
        x[step.var] = BigRational::zero();
        // bound_i = -(rest_i + b_i) / a_i, rest evaluated with x_var = 0
        let bound = |q: &Ineq| -q.eval(&x) / &q.a[step.var];
        let lo = step.lower.iter().map(|q| (bound(q), q.strict)).max_by(|a, b| {
            a.0.cmp(&b.0).then(a.1.cmp(&b.1))
        });
        let hi = step.upper.iter().map(|q| (bound(q), q.strict)).min_by(|a, b| {
            a.0.cmp(&b.0).then(b.1.cmp(&a.1))
        });
        x[step.var] = match (lo, hi) {
            (Some((l, _)), Some((h, _))) if l == h => l,
            (Some((l, _)), Some((h, _))) => (l + h) / BigRational::from_integer(2.into()),
            (Some((l, _)), None) => l + BigRational::one(),
            (None, Some((h, _))) => h - BigRational::one(),
            (None, None) => BigRational::zero(),
        };
    }
    for (var, eq) in subs.iter().rev() {
        let mut acc = eq.b.clone();
        for (j, c) in eq.a.iter().enumerate() {
            if j != *var {
                acc += c * &x[j];
            }
        }
        x[*var] = -acc / &eq.a[*var];
    }
    Some(x)
}

fn system_for(arr: &[Hyperplane], signs: &[Sign]) -> (Vec<Eq_>, Vec<Ineq>) {
    let mut eqs = Vec::new();
    let mut ineqs = Vec::new();
    for (h, s) in arr.iter().zip(signs) {
        match s {
            Sign::Zero => eqs.push(Eq_ { a: h.normal.clone(), b: -h.offset.clone() }),
            Sign::Plus => ineqs.push(Ineq { a: h.normal.clone(), b: -h.offset.clone(), strict: true }),
            Sign::Minus => ineqs.push(Ineq {
                a: h.normal.iter().map(|c| -c).collect(),
                b: h.offset.clone(),
                strict: true,
            }),
        }
    }
    (eqs, ineqs)
}

/// A point realizing the sign pattern on the first `signs.len()` hyperplanes, if any.
pub fn feasible_point(arr: &[Hyperplane], signs: &[Sign]) -> Result<Option<Vec<BigRational>>, ArrangementError> {
    let k = check_arrangement(arr)?;
    if signs.len() > arr.len() {
        return Err(ArrangementError::Dimension { expected: arr.len(), got: signs.len() });
    }
    let (eqs, ineqs) = system_for(&arr[..signs.len()], signs);
    Ok(solve(k, eqs, ineqs))
}

/// A sign vector with a point realizing it.
pub type Witness = (SignVector, Vec<BigRational>);

#[derive(Debug, Clone, PartialEq)]
pub struct PieceCount {
    pub count: u64,
    /// Nonempty sign vectors in enumeration order, each with a witness point.
    pub witnesses: Option<Vec<Witness>>,
}

fn dfs(
    arr: &[Hyperplane],
    k: usize,
    prefix: &mut Vec<Sign>,
    keep: bool,
    out: &mut Vec<(SignVector, Vec<BigRational>)>,
) -> u64 {
    let (eqs, ineqs) = system_for(arr, prefix);
    let Some(point) = solve(k, eqs, ineqs) else {
        return 0;
    };
    if prefix.len() == arr.len() {
        if keep {
            out.push((SignVector(prefix.clone()), point));
        }
        return 1;
    }
    let mut total = 0;
    for s in Sign::ALL {
        prefix.push(s);
        total += dfs(arr, k, prefix, keep, out);
        prefix.pop();
    }
    total
}

/// Number of nonempty pieces, by pruned enumeration of sign vectors in
/// ternary-counter order (position 0 most significant, digits `+ - 0`).
pub fn count_pieces(
    arr: &[Hyperplane],
    budget: u64,
    with_witnesses: bool,
) -> Result<PieceCount, ArrangementError> {
    let k = check_arrangement(arr)?;
    let m = arr.len();
    if 3u128.checked_pow(m as u32).is_none_or(|v| v > budget as u128) {
        return Err(ArrangementError::Budget { m, budget });
    }
    let split = m.min(2);
    let prefixes: Vec<Vec<Sign>> = (0..3usize.pow(split as u32))
        .map(|mut i| {
            let mut p = vec![Sign::Plus; split];
            for slot in p.iter_mut().rev() {
                *slot = Sign::ALL[i % 3];
                i /= 3;
            }
            p
        })
        .collect();
    let parts: Vec<(u64, Vec<Witness>)> = prefixes
        .into_par_iter()
        .map(|mut p| {
            let mut out = Vec::new();
            let c = dfs(arr, k, &mut p, with_witnesses, &mut out);
            (c, out)
        })
        .collect();
    let count = parts.iter().map(|p| p.0).sum();
    let witnesses = with_witnesses.then(|| parts.into_iter().flat_map(|p| p.1).collect());
    Ok(PieceCount { count, witnesses })
}

/// `Σ_{j=0}^{k} 2^j C(m, j)`.
pub fn piece_bound(m: u64, k: u64) -> BigInt {
    (0..=k.min(m)).map(|j| (BigInt::one() << j) * binomial(m, j)).sum()
}

/// `(k + 1) 2^k m^k`.
pub fn coarse_bound(m: u64, k: u64) -> BigInt {
    BigInt::from(k + 1) * (BigInt::one() << k) * num_traits::pow(BigInt::from(m), k as usize)
}

/// Groups point indices by the piece containing them.
pub fn locate_block_pieces(
    points: &[Vec<BigRational>],
    arr: &[Hyperplane],
) -> Result<BTreeMap<SignVector, Vec<usize>>, ArrangementError> {
    let mut map: BTreeMap<SignVector, Vec<usize>> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        map.entry(classify_point(p, arr)?).or_default().push(i);
    }
    Ok(map)
}

fn rank(mut rows: Vec<Vec<BigRational>>) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(piv) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, piv);
        let pivot = rows[r][c].clone();
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let f = &rows[i][c] / &pivot;
                let (head, tail) = if i < r {
                    let (a, b) = rows.split_at_mut(r);
                    (&mut a[i], &b[0])
                } else {
                    let (a, b) = rows.split_at_mut(i);
                    (&mut b[0], &a[r])
                };
                for (x, y) in head.iter_mut().zip(tail) {
                    *x -= &f * y;
                }
            }
        }
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    r
}

fn subsets(m: usize, size: usize, f: &mut impl FnMut(&[usize]) -> bool) -> bool {
    fn go(start: usize, m: usize, size: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize]) -> bool) -> bool {
        if cur.len() == size {
            return f(cur);
        }
        for i in start..m {
            cur.push(i);
            if !go(i + 1, m, size, cur, f) {
                return false;
            }
            cur.pop();
        }
        true
    }
    go(0, m, size, &mut Vec::new(), f)
}

/// Every `j <= k` hyperplanes meet in an affine subspace of dimension
/// `k - j`, and no `k + 1` of them share a point.
pub fn is_general_position(arr: &[Hyperplane]) -> Result<bool, ArrangementError> {
    let k = check_arrangement(arr)?;
    for size in 1..=(k + 1).min(arr.len()) {
        let ok = subsets(arr.len(), size, &mut |idx| {
            let normals: Vec<Vec<BigRational>> = idx.iter().map(|&i| arr[i].normal.clone()).collect();
            let augmented: Vec<Vec<BigRational>> = idx
                .iter()
                .map(|&i| {
                    let mut row = arr[i].normal.clone();
                    row.push(arr[i].offset.clone());
                    row
                })
                .collect();
            let rn = rank(normals);
            let ra = rank(augmented);
            if size <= k {
                rn == size
            } else {
                ra > rn
            }
        });
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CountReport {
    pub m: usize,
    pub k: usize,
    pub count: u64,
    pub bound: String,
    pub attained: bool,
}

pub fn count_report(arr: &[Hyperplane], budget: u64) -> Result<CountReport, ArrangementError> {
    let k = check_arrangement(arr)?;
    let count = count_pieces(arr, budget, false)?.count;
    let bound = piece_bound(arr.len() as u64, k as u64);
    Ok(CountReport {
        m: arr.len(),
        k,
        count,
        attained: BigInt::from(count) == bound,
        bound: bound.to_string(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonHyperplane {
    normal: Vec<String>,
    offset: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonArrangement {
    hyperplanes: Vec<JsonHyperplane>,
}

fn parse_rational(s: &str, row: usize) -> Result<BigRational, ArrangementError> {
    s.trim().parse::<BigRational>().map_err(|e| ArrangementError::Parse {
        row,
        message: format!("bad rational {s:?}: {e}"),
    })
}

fn finish(rows: Vec<Hyperplane>) -> Result<Vec<Hyperplane>, ArrangementError> {
    check_arrangement(&rows)?;
    Ok(rows)
}

/// `{"hyperplanes": [{"normal": ["1", "-2/3"], "offset": "1/2"}, ...]}`.
pub fn parse_json(text: &str) -> Result<Vec<Hyperplane>, ArrangementError> {
    let parsed: JsonArrangement =
        serde_json::from_str(text).map_err(|e| ArrangementError::Parse { row: e.line(), message: e.to_string() })?;
    let mut rows = Vec::with_capacity(parsed.hyperplanes.len());
    for (row, h) in parsed.hyperplanes.iter().enumerate() {
        let normal = h.normal.iter().map(|s| parse_rational(s, row)).collect::<Result<Vec<_>, _>>()?;
        let offset = parse_rational(&h.offset, row)?;
        rows.push(Hyperplane::new(normal, offset).map_err(|e| match e {
            ArrangementError::ZeroNormal { .. } => ArrangementError::ZeroNormal { index: row },
            e => e,
        })?);
    }
    finish(rows)
}

/// One hyperplane per row: `k` numerator/denominator pairs, then the offset pair. No header.
pub fn parse_csv<R: Read>(reader: R) -> Result<Vec<Hyperplane>, ArrangementError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).from_reader(reader);
    let mut rows = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ArrangementError::Parse { row, message: e.to_string() })?;
        if rec.len() < 4 || rec.len() % 2 != 0 {
            return Err(ArrangementError::Parse {
                row,
                message: format!("expected 2k + 2 fields with k >= 1, got {}", rec.len()),
            });
        }
        let mut vals = Vec::with_capacity(rec.len() / 2);
        for pair in rec.iter().collect::<Vec<_>>().chunks(2) {
            let num: BigInt = pair[0].trim().parse().map_err(|_| ArrangementError::Parse {
                row,
                message: format!("bad numerator {:?}", pair[0]),
            })?;
            let den: BigInt = pair[1].trim().parse().map_err(|_| ArrangementError::Parse {
                row,
                message: format!("bad denominator {:?}", pair[1]),
            })?;
            if den.is_zero() {
                return Err(ArrangementError::Parse { row, message: "zero denominator".into() });
            }
            vals.push(BigRational::new(num, den));
        }
        let offset = vals.pop().expect("at least two pairs");
        rows.push(Hyperplane::new(vals, offset).map_err(|e| match e {
            ArrangementError::ZeroNormal { .. } => ArrangementError::ZeroNormal { index: row },
            e => e,
        })?);
    }
    finish(rows)
}
