//! Exact-rational difference calculus.
//!
//! Every routine here works on windows `f(0), f(1), ..., f(J-1)` of an
//! arithmetic function with values in `Q`. Nothing rounds; the results serve
//! as the reference against which the floating-point modules are tested.

use std::fmt;
use std::ops::Deref;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CalculusError {
    #[error("window of length {len} is too short for a difference of order {k}")]
    WindowTooShort { len: usize, k: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("node index {j} outside [0, {k})")]
    NodeOutOfRange { j: i64, k: usize },
    #[error("need {needed} forcing values, got {got}")]
    InsufficientValues { needed: usize, got: usize },
    #[error("reconstruction needs j >= k >= 1 (got j = {j}, k = {k})")]
    BadReconstructionOrder { j: usize, k: usize },
    #[error("bound constant must be positive")]
    NonPositiveBound,
}

/// Finite window of exact rational values, indexed from 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RationalSeq(Vec<BigRational>);

impl RationalSeq {
    pub fn new(values: Vec<BigRational>) -> Result<Self, CalculusError> {
        if values.is_empty() {
            return Err(CalculusError::EmptyInput);
        }
        Ok(Self(values))
    }

    pub fn from_integers<I: IntoIterator<Item = i64>>(values: I) -> Result<Self, CalculusError> {
        Self::new(values.into_iter().map(rat_int).collect())
    }

    pub fn values(&self) -> &[BigRational] {
        &self.0
    }

    pub fn into_values(self) -> Vec<BigRational> {
        self.0
    }
}

impl Deref for RationalSeq {
    type Target = [BigRational];

    fn deref(&self) -> &[BigRational] {
        &self.0
    }
}

/// Univariate polynomial with exact rational coefficients in ascending order.
///
/// The zero polynomial has no stored coefficients and degree `-1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RationalPoly {
    coeffs: Vec<BigRational>,
}

impl RationalPoly {
    pub fn new(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: BigRational) -> Self {
        Self::new(vec![c])
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn degree(&self) -> i64 {
        self.coeffs.len() as i64 - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval(&self, y: &BigRational) -> BigRational {
        // Horner
        self.coeffs
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * y + c)
    }

    /// Multiplies by the linear factor `(y - root)`.
    fn mul_linear(&self, root: &BigRational) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut out = vec![BigRational::zero(); self.coeffs.len() + 1];
        for (d, c) in self.coeffs.iter().enumerate() {
            out[d + 1] += c;
            out[d] -= c * root;
        }
        Self::new(out)
    }

    fn scale(&self, s: &BigRational) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let out = (0..len)
            .map(|d| {
                let a = self.coeffs.get(d).cloned().unwrap_or_else(BigRational::zero);
                let b = other.coeffs.get(d).cloned().unwrap_or_else(BigRational::zero);
                a + b
            })
            .collect();
        Self::new(out)
    }
}

impl fmt::Display for RationalPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(d, c)| match d {
                0 => format!("{c}"),
                1 => format!("({c})y"),
                _ => format!("({c})y^{d}"),
            })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}

pub(crate) fn rat_int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Fractional part `{x} = x - floor(x)`, exact.
pub fn frac(x: &BigRational) -> BigRational {
    x - x.floor()
}

/// One-step forward difference.
pub fn diff_once(seq: &[BigRational]) -> Vec<BigRational> {
    seq.windows(2).map(|w| &w[1] - &w[0]).collect()
}

/// `Δ^k f(n) = Σ_{l=0}^{k} (-1)^{k-l} C(k,l) f(n+l)` for every `n` the window allows.
pub fn diff(seq: &RationalSeq, k: usize) -> Result<RationalSeq, CalculusError> {
    if k >= seq.len() {
        return Err(CalculusError::WindowTooShort { len: seq.len(), k });
    }
    let weights = signed_binomial_row(k);
    let out = (0..seq.len() - k)
        .map(|n| {
            weights
                .iter()
                .enumerate()
                .fold(BigRational::zero(), |acc, (l, w)| acc + &seq[n + l] * w)
        })
        .collect();
    Ok(RationalSeq(out))
}

/// `(-1)^{k-l} C(k, l)` for `l = 0..=k`.
fn signed_binomial_row(k: usize) -> Vec<BigRational> {
    (0..=k)
        .map(|l| {
            let c = binomial(k as u64, l as u64);
            let c = if (k - l) % 2 == 1 { -c } else { c };
            BigRational::from_integer(c)
        })
        .collect()
}

/// Summation operator: `g(0) = initial`, `g(n+1) = g(n) + f(n)`.
///
/// The result has one more entry than the input, so `diff(sigma(f), 1) == f`.
pub fn sigma(seq: &[BigRational], initial: BigRational) -> RationalSeq {
    let mut out = Vec::with_capacity(seq.len() + 1);
    let mut acc = initial;
    out.push(acc.clone());
    for v in seq {
        acc += v;
        out.push(acc.clone());
    }
    RationalSeq(out)
}

/// Interpolating polynomial of degree `< k` through `(j, values[j])`, built
/// from the product form `Σ_j f(j) Π_{i≠j} (y-i)/(j-i)`.
pub fn lagrange_poly(values: &[BigRational]) -> Result<RationalPoly, CalculusError> {
    if values.is_empty() {
        return Err(CalculusError::EmptyInput);
    }
    let k = values.len();
    let mut acc = RationalPoly::zero();
    for (j, fj) in values.iter().enumerate() {
        if fj.is_zero() {
            continue;
        }
        let mut basis = RationalPoly::constant(BigRational::one());
        let mut denom = BigInt::one();
        for i in (0..k).filter(|&i| i != j) {
            basis = basis.mul_linear(&rat_int(i as i64));
            denom *= BigInt::from(j as i64 - i as i64);
        }
        let scale = fj / BigRational::from_integer(denom);
        acc = acc.add(&basis.scale(&scale));
    }
    Ok(acc)
}

/// `Π_{0≤i≤k-1, i≠j} (n-i)/(j-i)`, evaluated as an exact product.
///
/// The value is always an integer; a non-integral intermediate result would
/// indicate a broken invariant and panics.
pub fn lagrange_coeff(n: i64, j: i64, k: usize) -> Result<BigInt, CalculusError> {
    if k == 0 || j < 0 || j >= k as i64 {
        return Err(CalculusError::NodeOutOfRange { j, k });
    }
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in (0..k as i64).filter(|&i| i != j) {
        num *= BigInt::from(n - i);
        den *= BigInt::from(j - i);
    }
    let (q, r) = num.div_rem(&den);
    assert!(r.is_zero(), "Lagrange basis value at an integer node is not integral");
    Ok(q)
}

/// Signed double-binomial form `(-1)^{k-j-1} C(n-j-1, n-k) C(n, n-j)`, valid for `n >= k`.
pub fn lagrange_coeff_closed_form(n: u64, j: u64, k: u64) -> Option<BigInt> {
    if k == 0 || j >= k || n < k {
        return None;
    }
    let v = binomial(n - j - 1, n - k) * binomial(n, n - j);
    Some(if (k - j - 1) % 2 == 1 { -v } else { v })
}

/// Coefficients `a_k, ..., a_j` with `a_l = C(j-l+k-1, k-1)`.
///
/// With these, `Σ_{l=k}^{j} a_l Δ^k f(n+l-k)` equals `f(n+j)` minus the
/// degree-`< k` extrapolation of `f(n), ..., f(n+k-1)` to offset `j`
/// (see [`reconstruction_sides`]).
pub fn reconstruct_coeffs(j: usize, k: usize) -> Result<Vec<BigInt>, CalculusError> {
    if k < 1 || j < k {
        return Err(CalculusError::BadReconstructionOrder { j, k });
    }
    Ok((k..=j)
        .map(|l| binomial((j - l + k - 1) as u64, (k - 1) as u64))
        .collect())
}

/// Both sides of the reconstruction identity at window offset `n`:
/// `(Σ a_l Δ^k f(n+l-k), f(n+j) - Σ_m f(n+m) Π_{i≠m} (j-i)/(m-i))`.
pub fn reconstruction_sides(
    seq: &RationalSeq,
    n: usize,
    k: usize,
    j: usize,
) -> Result<(BigRational, BigRational), CalculusError> {
    let coeffs = reconstruct_coeffs(j, k)?;
    if n + j >= seq.len() {
        return Err(CalculusError::WindowTooShort { len: seq.len(), k: n + j });
    }
    let weights = signed_binomial_row(k);
    let mut lhs = BigRational::zero();
    for (a, l) in coeffs.iter().zip(k..=j) {
        let start = n + l - k;
        let dk = weights
            .iter()
            .enumerate()
            .fold(BigRational::zero(), |acc, (t, w)| acc + &seq[start + t] * w);
        lhs += dk * BigRational::from_integer(a.clone());
    }
    let mut rhs = seq[n + j].clone();
    for m in 0..k {
        let c = lagrange_coeff(j as i64, m as i64, k)?;
        rhs -= &seq[n + m] * BigRational::from_integer(c);
    }
    Ok((lhs, rhs))
}

/// `(k+1) j^k c`.
pub fn value_bound(k: u32, c: &BigRational, j: u64) -> Result<BigRational, CalculusError> {
    if !c.is_positive() {
        return Err(CalculusError::NonPositiveBound);
    }
    let jk = num_traits::pow(BigInt::from(j), k as usize);
    Ok(BigRational::from_integer(jk * BigInt::from(k + 1)) * c)
}

/// Outcome of checking a window against the value bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoundCheck {
    /// The window does not satisfy the hypotheses; nothing to conclude.
    HypothesesFail,
    /// Every entry `f(j)`, `j >= k`, satisfies `|f(j)| <= (k+1) j^k c`.
    Holds,
    /// First offset at which the bound fails.
    Violated { j: usize },
}

/// Checks the value bound on a window.
///
/// Hypotheses: `|Δ^k f(j)| <= c` for all `j` the window allows, and
/// `f(j) ∈ [0, c]` for `j < k`.
pub fn check_value_bound(
    seq: &RationalSeq,
    k: usize,
    c: &BigRational,
) -> Result<BoundCheck, CalculusError> {
    if !c.is_positive() {
        return Err(CalculusError::NonPositiveBound);
    }
    let dk = diff(seq, k)?;
    let zero = BigRational::zero();
    let hyp_a = dk.iter().all(|d| d.abs() <= *c);
    let hyp_b = seq[..k].iter().all(|v| *v >= zero && v <= c);
    if !(hyp_a && hyp_b) {
        return Ok(BoundCheck::HypothesesFail);
    }
    for j in k..seq.len() {
        let bound = value_bound(k as u32, c, j as u64)?;
        if seq[j].abs() > bound {
            return Ok(BoundCheck::Violated { j });
        }
    }
    Ok(BoundCheck::Holds)
}

/// Evaluates both conditions of the fractional-difference equivalence:
///
/// * (i)  `{Σ_l (-1)^{k-l} C(k,l) {x_{n+l}}} = 0` for `n = 0..J-1-k`;
/// * (ii) `{x_n} = {Σ_{j<k} {x_j} Π_{i≠j} (n-i)/(j-i)}` for `n = 0..J-1`.
///
/// Evaluation uses integer residues modulo the common denominator of the
/// window, so it is exact.
pub fn frac_diff_equivalence(xs: &RationalSeq, k: usize) -> Result<(bool, bool), CalculusError> {
    if xs.len() <= k {
        return Err(CalculusError::WindowTooShort { len: xs.len(), k });
    }
    if k <= 8 && xs.len() <= 64 {
        if let Some((res, d)) = small_residues(xs) {
            return Ok(frac_conditions_small(&res, d, k));
        }
    }
    let denom = xs
        .iter()
        .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    // {x} * denom as a residue in [0, denom)
    let residues: Vec<BigInt> = xs
        .iter()
        .map(|x| (x.numer() * (&denom / x.denom())).mod_floor(&denom))
        .collect();
    Ok(frac_conditions_big(&residues, &denom, k))
}

/// Residues `{x} d` and the common denominator `d`, when `d < 2^40`.
fn small_residues(xs: &[BigRational]) -> Option<(Vec<i64>, i128)> {
    let mut d: i128 = 1;
    for x in xs {
        d = d.lcm(&(x.denom().to_i64()? as i128));
        if d >= 1 << 40 {
            return None;
        }
    }
    xs.iter()
        .map(|x| {
            let n = x.numer().to_i64()? as i128;
            let scaled = n.checked_mul(d / x.denom().to_i64()? as i128)?;
            Some(scaled.rem_euclid(d) as i64)
        })
        .collect::<Option<Vec<i64>>>()
        .map(|r| (r, d))
}

fn frac_conditions_small(res: &[i64], denom: i128, k: usize) -> (bool, bool) {
    let len = res.len();
    let weights: Vec<i128> = (0..=k)
        .map(|l| {
            let c = binomial(k as u64, l as u64).to_i128().expect("small binomial");
            if (k - l) % 2 == 1 {
                -c
            } else {
                c
            }
        })
        .collect();
    let cond_i = (0..len - k).all(|n| {
        let s: i128 = (0..=k).map(|l| weights[l] * res[n + l] as i128).sum();
        s.rem_euclid(denom) == 0
    });
    // Π_{i≠j} (n-i)/(j-i); numerator and denominator stay below 64^8
    let basis: Vec<Vec<i128>> = (0..len as i128)
        .map(|n| {
            (0..k as i128)
                .map(|j| {
                    let (mut num, mut den) = (1i128, 1i128);
                    for i in (0..k as i128).filter(|&i| i != j) {
                        num *= n - i;
                        den *= j - i;
                    }
                    num / den
                })
                .collect()
        })
        .collect();
    let cond_ii = (0..len).all(|n| {
        let s: i128 = (0..k).map(|j| basis[n][j] * res[j] as i128).sum();
        s.rem_euclid(denom) == res[n] as i128
    });
    (cond_i, cond_ii)
}

fn frac_conditions_big(res: &[BigInt], denom: &BigInt, k: usize) -> (bool, bool) {
    let len = res.len();
    let weights: Vec<BigInt> = signed_binomial_row(k)
        .into_iter()
        .map(|w| w.to_integer())
        .collect();
    let cond_i = (0..len - k).all(|n| {
        let s: BigInt = (0..=k).map(|l| &weights[l] * &res[n + l]).sum();
        s.mod_floor(denom).is_zero()
    });
    let cond_ii = (0..len).all(|n| {
        let s: BigInt = (0..k)
            .map(|j| lagrange_coeff(n as i64, j as i64, k).expect("node in range") * &res[j])
            .sum();
        s.mod_floor(denom) == res[n]
    });
    (cond_i, cond_ii)
}

/// Extends `init` (length `k`) to length `m_len` so that `Δ^k Y(j) = g(j)`
/// for `j = 0..m_len-k-1`, by forward substitution.
pub fn extend_y(
    init: &[BigRational],
    g_vals: &[BigRational],
    m_len: usize,
) -> Result<RationalSeq, CalculusError> {
    let k = init.len();
    if m_len < k {
        return Err(CalculusError::WindowTooShort { len: m_len, k });
    }
    let needed = m_len - k;
    if g_vals.len() < needed {
        return Err(CalculusError::InsufficientValues { needed, got: g_vals.len() });
    }
    if m_len == 0 {
        return Err(CalculusError::EmptyInput);
    }
    let weights = signed_binomial_row(k);
    let mut y: Vec<BigRational> = init.to_vec();
    y.reserve(needed);
    for (n, g) in g_vals.iter().take(needed).enumerate() {
        // Δ^k Y(n) = Y(n+k) + Σ_{l<k} w_l Y(n+l); the top coefficient is 1.
        let lower = (0..k).fold(BigRational::zero(), |acc, l| acc + &y[n + l] * &weights[l]);
        y.push(g - lower);
    }
    Ok(RationalSeq(y))
}
