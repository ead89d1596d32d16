//! Weighted exponential sums and correlation functionals.
//!
//! Everything here is a finite-`N` measurement. Quantities defined through a
//! supremum over an infinite family of phases are replaced by a maximum over
//! a finite family and reported as lower bounds.

use std::f64::consts::TAU;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::exact_calculus::{frac, lagrange_poly, rat_int};
use crate::fixed::{frac_distance, frac_to_f64, FixedPointReal, Scalar, FRAC_BITS};
use crate::phase::{Concatenation, Phase, PhaseError};
use crate::sieves::PhiTable;
use crate::summation::{ComplexSum, NeumaierSum};
use crate::weights::ArithmeticWeight;

/// Chunk length for data-parallel sums. Fixed, so results do not depend on the thread count.
const CHUNK: u64 = 1 << 14;

/// Default cap on `q^L` for the Dirichlet scan.
pub const DIRICHLET_BUDGET: u64 = 50_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SumError {
    #[error("range exceeded: need n up to {needed}, weights cover [1, {available}]")]
    Range { needed: u64, available: u64 },
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("enumeration budget exceeded: {size} > {budget}; use a smaller q or fewer angles")]
    Budget { size: u64, budget: u64 },
    #[error("no t in [1, {limit}] certifies the approximation (near-tie at the 1/q boundary)")]
    Uncertified { limit: u64 },
}

#[inline]
pub fn unit(frac: f64) -> Complex64 {
    let (s, c) = (TAU * frac).sin_cos();
    Complex64::new(c, s)
}

fn check_range<W: ArithmeticWeight + ?Sized>(w: &W, needed: u64) -> Result<(), SumError> {
    if needed > w.range() {
        return Err(SumError::Range { needed, available: w.range() });
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Checkpoint {
    pub n: u64,
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SumReport {
    pub n_max: u64,
    pub weight: String,
    pub phase: String,
    /// Running averages `(1/N) Σ_{n≤N} w(n) e(f(n))`.
    pub checkpoints: Vec<Checkpoint>,
    /// Largest certified error of `{f(n)}` met during the run.
    pub max_phase_error: f64,
}

impl SumReport {
    pub fn at(&self, n: u64) -> Option<&Checkpoint> {
        self.checkpoints.iter().find(|c| c.n == n)
    }

    pub fn last(&self) -> &Checkpoint {
        self.checkpoints.last().expect("at least one checkpoint")
    }
}

/// About `count` logarithmically spaced checkpoints in `[1, n_max]`, ending at `n_max`.
pub fn log_checkpoints(n_max: u64, count: usize) -> Vec<u64> {
    if n_max == 0 || count == 0 {
        return Vec::new();
    }
    let mut out: Vec<u64> = Vec::with_capacity(count);
    let ln = (n_max as f64).ln();
    for i in 1..=count {
        let mut c = (ln * i as f64 / count as f64).exp().round() as u64;
        c = c.clamp(1, n_max);
        if let Some(&prev) = out.last() {
            if c <= prev {
                c = prev + 1;
            }
        }
        if c > n_max {
            break;
        }
        out.push(c);
    }
    if let Some(last) = out.last_mut() {
        *last = n_max;
    }
    out
}

fn weighted_chunk<W: ArithmeticWeight + ?Sized>(
    w: &W,
    phase: &Phase,
    lo: u64,
    hi: u64,
) -> Result<(ComplexSum, u128), PhaseError> {
    let mut acc = ComplexSum::default();
    let mut err = 0u128;
    for n in lo..hi {
        let wn = w.weight(n);
        if wn == 0 {
            continue;
        }
        let (f, e) = phase.frac96(n)?;
        err = err.max(e);
        acc += unit(frac_to_f64(f)) * wn as f64;
    }
    Ok((acc, err))
}

/// `(1/N) Σ_{n=1}^{N} w(n) e(f(n))` at each checkpoint `N` (values above `n_max` are dropped).
pub fn weighted_average<W: ArithmeticWeight + ?Sized>(
    w: &W,
    phase: &Phase,
    n_max: u64,
    checkpoints: &[u64],
) -> Result<SumReport, SumError> {
    if n_max == 0 {
        return Err(SumError::Invalid("n_max must be at least 1".into()));
    }
    check_range(w, n_max)?;
    let mut cps: Vec<u64> = checkpoints.iter().copied().filter(|&c| c >= 1 && c <= n_max).collect();
    cps.sort_unstable();
    cps.dedup();
    if cps.last() != Some(&n_max) {
        cps.push(n_max);
    }

    // chunk c covers [1 + c CHUNK, 1 + (c+1) CHUNK)
    let n_chunks = n_max.div_ceil(CHUNK);
    let totals: Vec<(ComplexSum, u128)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = 1 + c * CHUNK;
            let hi = (lo + CHUNK).min(n_max + 1);
            weighted_chunk(w, phase, lo, hi)
        })
        .collect::<Result<_, _>>()?;
    let max_err = totals.iter().map(|t| t.1).max().unwrap_or(0);

    let mut out = Vec::with_capacity(cps.len());
    let mut prefix = ComplexSum::default();
    let mut done_chunks = 0u64;
    for &cp in &cps {
        let full = (cp - 1) / CHUNK; // chunks entirely below cp... plus the partial one
        while done_chunks < full {
            prefix += totals[done_chunks as usize].0;
            done_chunks += 1;
        }
        let lo = 1 + full * CHUNK;
        let (partial, _) = weighted_chunk(w, phase, lo, cp + 1)?;
        let mut s = prefix;
        s += partial;
        let avg = s.value() / cp as f64;
        out.push(Checkpoint { n: cp, re: avg.re, im: avg.im, modulus: avg.norm() });
    }
    Ok(SumReport {
        n_max,
        weight: w.id(),
        phase: phase.describe(),
        checkpoints: out,
        max_phase_error: max_err as f64 * 2f64.powi(-(FRAC_BITS as i32)),
    })
}

/// All `density^k` polynomials `Σ_{d<k} (i_d / density) y^d` with `0 <= i_d < density`.
pub fn coefficient_grid(k: usize, density: u32) -> Vec<Phase> {
    let total = (density as usize).pow(k as u32);
    (0..total)
        .map(|mut idx| {
            let coeffs = (0..k)
                .map(|_| {
                    let i = idx % density as usize;
                    idx /= density as usize;
                    Scalar::rational(i as i64, density as i64)
                })
                .collect();
            Phase::polynomial(coeffs)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ShortIntervalReport {
    pub x: u64,
    pub h: u64,
    pub family_size: usize,
    /// `(1/(X h)) Σ_{x=X}^{2X-1} max_f |Σ_{x≤n<x+h} w(n) e(f(n))|`; a lower
    /// bound for the supremum over all polynomials of the family's degree.
    pub value: f64,
    pub bound_kind: &'static str,
}

/// Short-interval sup-average with the `x`-integral taken at unit steps.
pub fn short_interval_sup_average<W: ArithmeticWeight + ?Sized>(
    w: &W,
    family: &[Phase],
    x: u64,
    h: u64,
) -> Result<ShortIntervalReport, SumError> {
    if family.is_empty() {
        return Err(SumError::Invalid("empty phase family".into()));
    }
    if x == 0 || h == 0 {
        return Err(SumError::Invalid("X and h must be positive".into()));
    }
    check_range(w, 2 * x + h - 2)?;
    let n_chunks = x.div_ceil(CHUNK);
    let partials: Vec<NeumaierSum> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let x0 = x + c * CHUNK;
            let x1 = (x0 + CHUNK).min(2 * x);
            let span = (x1 - x0 + h - 1) as usize;
            let weights: Vec<i8> = (0..span as u64).map(|i| w.weight(x0 + i)).collect();
            let mut best = vec![0f64; (x1 - x0) as usize];
            let mut prefix = vec![Complex64::zero(); span + 1];
            for phase in family {
                for i in 0..span {
                    let z = if weights[i] == 0 {
                        Complex64::zero()
                    } else {
                        unit(phase.frac_f64(x0 + i as u64)?) * weights[i] as f64
                    };
                    prefix[i + 1] = prefix[i] + z;
                }
                for (j, b) in best.iter_mut().enumerate() {
                    let m = (prefix[j + h as usize] - prefix[j]).norm();
                    if m > *b {
                        *b = m;
                    }
                }
            }
            let mut s = NeumaierSum::default();
            for b in best {
                s += b;
            }
            Ok(s)
        })
        .collect::<Result<_, PhaseError>>()?;
    let mut total = NeumaierSum::default();
    for p in partials {
        total += p;
    }
    Ok(ShortIntervalReport {
        x,
        h,
        family_size: family.len(),
        value: total.value() / (x as f64 * h as f64),
        bound_kind: "finite-family lower bound",
    })
}

/// `(1/N_m) Σ_{i<m} max_f |Σ_{N_i≤n<N_{i+1}} w(n) e(f(n))|` for breakpoints
/// `N_0 = 0 < N_1 < ... < N_m`. `n = 0` carries no weight.
pub fn blockwise_sup_average<W: ArithmeticWeight + ?Sized>(
    w: &W,
    family: &[Phase],
    breakpoints: &[u64],
) -> Result<f64, SumError> {
    if family.is_empty() || breakpoints.len() < 2 {
        return Err(SumError::Invalid("need a family and at least two breakpoints".into()));
    }
    if breakpoints[0] != 0 || breakpoints.windows(2).any(|b| b[1] <= b[0]) {
        return Err(SumError::Invalid("breakpoints must start at 0 and increase".into()));
    }
    let end = *breakpoints.last().expect("nonempty");
    check_range(w, end - 1)?;
    let blocks: Vec<f64> = breakpoints
        .par_windows(2)
        .map(|b| {
            let mut best = 0f64;
            for phase in family {
                let mut acc = ComplexSum::default();
                for n in b[0].max(1)..b[1] {
                    let wn = w.weight(n);
                    if wn != 0 {
                        acc += unit(phase.frac_f64(n)?) * wn as f64;
                    }
                }
                best = best.max(acc.value().norm());
            }
            Ok(best)
        })
        .collect::<Result<_, PhaseError>>()?;
    let mut s = NeumaierSum::default();
    for b in blocks {
        s += b;
    }
    Ok(s.value() / end as f64)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ApCorrelationReport {
    pub s: u64,
    pub h: u64,
    pub n_max: u64,
    /// `(1/N) Σ_{n=1}^{N} |(1/h) Σ_{l=1}^{h} w(n+ls) e(P(n+ls))|²`.
    pub value: f64,
    /// `(s/φ(s)) · log log h / log h`.
    pub comparison: f64,
}

pub fn ap_correlation<W: ArithmeticWeight + ?Sized>(
    w: &W,
    phase: &Phase,
    s: u64,
    h: u64,
    n_max: u64,
    phi: &PhiTable,
) -> Result<ApCorrelationReport, SumError> {
    if s == 0 || h < 3 || n_max == 0 {
        return Err(SumError::Invalid("need s >= 1, h >= 3, n_max >= 1".into()));
    }
    let top = n_max + h * s;
    check_range(w, top)?;
    if s > phi.n_max() {
        return Err(SumError::Range { needed: s, available: phi.n_max() });
    }
    // q[m] = Σ_{j ≥ 0, m - j s ≥ 1} z(m - j s), so the window sum is q[n + hs] - q[n]
    let mut q = vec![Complex64::zero(); (top + 1) as usize];
    let mut running: Vec<ComplexSum> = vec![ComplexSum::default(); s as usize];
    for m in 1..=top {
        let wm = w.weight(m);
        let r = (m % s) as usize;
        if wm != 0 {
            running[r] += unit(phase.frac_f64(m)?) * wm as f64;
        }
        q[m as usize] = running[r].value();
    }
    let n_chunks = n_max.div_ceil(CHUNK);
    let hs = (h * s) as usize;
    let hf = h as f64;
    let parts: Vec<NeumaierSum> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = 1 + c * CHUNK;
            let hi = (lo + CHUNK).min(n_max + 1);
            let mut acc = NeumaierSum::default();
            for n in lo as usize..hi as usize {
                acc += ((q[n + hs] - q[n]) / hf).norm_sqr();
            }
            acc
        })
        .collect();
    let mut total = NeumaierSum::default();
    for p in parts {
        total += p;
    }
    let hl = (h as f64).ln();
    let comparison = s as f64 / phi.get(s) as f64 * hl.ln() / hl;
    Ok(ApCorrelationReport { s, h, n_max, value: total.value() / n_max as f64, comparison })
}

/// `(1/N) Σ_{n=0}^{N-1} |g(n+shift) - g(n)|²`.
pub fn shift_self_correlation(seq: &[Complex64], shift: usize, n_max: usize) -> Result<f64, SumError> {
    if n_max == 0 {
        return Err(SumError::Invalid("n_max must be at least 1".into()));
    }
    if n_max + shift > seq.len() {
        return Err(SumError::Range {
            needed: (n_max + shift) as u64,
            available: seq.len() as u64,
        });
    }
    let mut acc = NeumaierSum::default();
    for n in 0..n_max {
        acc += (seq[n + shift] - seq[n]).norm_sqr();
    }
    Ok(acc.value() / n_max as f64)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DirichletApprox {
    pub t: u64,
    pub a: Vec<String>,
    /// `max_j |t θ_j - a_j|`.
    pub max_err: f64,
    pub q: u64,
}

impl DirichletApprox {
    pub fn a_int(&self) -> Vec<BigInt> {
        self.a.iter().map(|s| s.parse().expect("integer string")).collect()
    }
}

enum ScaledTheta {
    Exact(BigRational),
    Fixed(FixedPointReal),
}

/// Smallest `t ∈ [1, q^L]` with `‖t θ_j‖ < 1/q` for every `j`, by direct scan.
///
/// Irrational inputs are accepted only when the error bound certifies the
/// strict inequality.
pub fn dirichlet_approx(thetas: &[Scalar], q: u64, budget: u64) -> Result<DirichletApprox, SumError> {
    if thetas.is_empty() || q < 2 {
        return Err(SumError::Invalid("need at least one angle and q >= 2".into()));
    }
    let limit = (q as u128)
        .checked_pow(thetas.len() as u32)
        .filter(|&s| s <= budget as u128)
        .ok_or(SumError::Budget {
            size: (q as u128).saturating_pow(thetas.len() as u32).min(u64::MAX as u128) as u64,
            budget,
        })? as u64;
    let qr = BigRational::new(BigInt::one(), BigInt::from(q));
    let one_bits: u128 = 1 << FRAC_BITS;
    for t in 1..=limit {
        let tt = BigInt::from(t);
        let mut ok = true;
        let mut scaled = Vec::with_capacity(thetas.len());
        for th in thetas {
            match th {
                Scalar::Rational(r) => {
                    let v = r * BigRational::from_integer(tt.clone());
                    let f = frac(&v);
                    let dist = f.clone().min(BigRational::one() - f);
                    if dist >= qr {
                        ok = false;
                        break;
                    }
                    scaled.push(ScaledTheta::Exact(v));
                }
                Scalar::Real { value, .. } => {
                    let v = value.mul_int(&tt);
                    let f = v.frac_bits();
                    let dist = f.min(one_bits - f);
                    // certified: (dist + err) < 2^96 / q
                    let upper = (dist + v.err_ulps()).checked_mul(q as u128);
                    if upper.is_none_or(|u| u >= one_bits) {
                        ok = false;
                        break;
                    }
                    scaled.push(ScaledTheta::Fixed(v));
                }
            }
        }
        if !ok {
            continue;
        }
        let mut a = Vec::with_capacity(scaled.len());
        let mut max_err = 0f64;
        for v in scaled {
            let (nearest, err) = match v {
                ScaledTheta::Exact(v) => {
                    let n = v.round();
                    let e = (&v - &n).abs().to_f64().unwrap_or(f64::NAN);
                    (n.to_integer(), e)
                }
                ScaledTheta::Fixed(v) => {
                    let f = v.frac_bits();
                    let fl = v.floor();
                    if f >= one_bits / 2 {
                        (fl + 1, frac_to_f64(one_bits - f))
                    } else {
                        (fl, frac_to_f64(f))
                    }
                }
            };
            a.push(nearest.to_string());
            max_err = max_err.max(err);
        }
        return Ok(DirichletApprox { t, a, max_err, q });
    }
    Err(SumError::Uncertified { limit })
}

/// Breakpoint policy for concatenations of interpolating polynomials.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BreakpointSchedule {
    /// `L_0 = 0`, `L_m = 2^m ⌊exp(log^{1/τ}(M C 2^{mk})) + 1⌋`, cut into
    /// blocks of length `2^m` on `[L_m, L_{m+1})`. Requires `M C >= 1`.
    DecayDriven { tau: f64, c: f64, accuracy: f64 },
    /// Gaps `⌈first_gap · ratio^i⌉`, `ratio > 1`.
    Geometric { first_gap: u64, ratio: f64 },
    Explicit { breakpoints: Vec<u64> },
}

impl BreakpointSchedule {
    /// Breakpoints `N_0 = 0 < N_1 < ...` below `n_end`.
    pub fn breakpoints(&self, k: usize, n_end: u64) -> Result<Vec<u64>, SumError> {
        match self {
            BreakpointSchedule::DecayDriven { tau, c, accuracy } => {
                if !(*tau > 0.0 && *tau < 1.0) || accuracy * c < 1.0 {
                    return Err(SumError::Invalid("need 0 < tau < 1 and M C >= 1".into()));
                }
                let mut levels = vec![0u64];
                let mut m = 1u32;
                while *levels.last().expect("nonempty") < n_end && m < 63 {
                    let x = accuracy * c * 2f64.powi((m as usize * k) as i32);
                    let grow = x.ln().max(0.0).powf(1.0 / tau).exp() + 1.0;
                    let unit = 1u64 << m;
                    let mut l = if grow.is_finite() && grow * (unit as f64) < 1e18 {
                        unit * grow.floor() as u64
                    } else {
                        u64::MAX / 2
                    };
                    let prev = *levels.last().expect("nonempty");
                    if l <= prev {
                        l = (prev / unit + 1) * unit;
                    }
                    levels.push(l);
                    m += 1;
                }
                let mut out = Vec::new();
                for (m, w) in levels.windows(2).enumerate() {
                    let step = 1u64 << m;
                    let mut b = w[0];
                    while b < w[1] && b < n_end {
                        out.push(b);
                        b += step;
                    }
                }
                Ok(out)
            }
            BreakpointSchedule::Geometric { first_gap, ratio } => {
                if *first_gap == 0 || ratio.partial_cmp(&1.0) != Some(std::cmp::Ordering::Greater) {
                    return Err(SumError::Invalid("need first_gap >= 1 and ratio > 1".into()));
                }
                let mut out = vec![0u64];
                let mut gap = *first_gap as f64;
                loop {
                    let next = out.last().expect("nonempty") + gap.ceil() as u64;
                    if next >= n_end {
                        break;
                    }
                    out.push(next);
                    gap *= ratio;
                }
                Ok(out)
            }
            BreakpointSchedule::Explicit { breakpoints } => {
                if breakpoints.first() != Some(&0) || breakpoints.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(SumError::Invalid(
                        "explicit breakpoints must start at 0 and strictly increase".into(),
                    ));
                }
                Ok(breakpoints.iter().copied().filter(|&b| b < n_end).collect())
            }
        }
    }
}

fn scalar_rational(s: &Scalar) -> (BigRational, u128) {
    match s {
        Scalar::Rational(r) => (r.clone(), 0),
        Scalar::Real { value, .. } => (value.to_rational(), value.err_ulps()),
    }
}

/// Monomial coefficients of the Lagrange basis on nodes `0..k`: `basis[l][d]`.
fn lagrange_basis(k: usize) -> Vec<Vec<BigRational>> {
    (0..k)
        .map(|l| {
            let mut unit_vals = vec![BigRational::zero(); k];
            unit_vals[l] = BigRational::one();
            let mut c = lagrange_poly(&unit_vals).expect("k >= 1").coeffs().to_vec();
            c.resize(k, BigRational::zero());
            c
        })
        .collect()
}

/// The degree-`< k` polynomial through `(N + l, f(N + l))`, `l < k`, in
/// monomials of the absolute variable `y`.
fn anchored_piece<F>(f: &F, anchor: u64, basis: &[Vec<BigRational>]) -> Phase
where
    F: Fn(u64) -> Scalar,
{
    let k = basis.len();
    let samples: Vec<Scalar> = (0..k as u64).map(|l| f(anchor + l)).collect();
    if !samples.iter().all(Scalar::is_rational) {
        return anchored_piece_fixed(&samples, anchor, basis);
    }
    let values: Vec<BigRational> = samples.iter().map(|s| scalar_rational(s).0).collect();
    // q(z) = Σ_l v_l L_l(z), then p(y) = q(y - N)
    let mut local = vec![BigRational::zero(); k];
    for (v, row) in values.iter().zip(basis) {
        for d in 0..k {
            local[d] += &row[d] * v;
        }
    }
    let coeffs = translate(&local, &rat_int(anchor as i64));
    Phase::polynomial(coeffs.into_iter().map(Scalar::Rational).collect())
}

/// Same as [`anchored_piece`] for fixed-point samples, in integer arithmetic
/// scaled by `(k-1)! 2^96`.
fn anchored_piece_fixed(samples: &[Scalar], anchor: u64, basis: &[Vec<BigRational>]) -> Phase {
    let k = basis.len();
    let scale: BigInt = (1..k as u64).map(BigInt::from).product();
    let int_basis: Vec<Vec<BigInt>> = basis
        .iter()
        .map(|row| row.iter().map(|c| (c * BigRational::from_integer(scale.clone())).to_integer()).collect())
        .collect();
    let mut local = vec![BigInt::zero(); k];
    let mut local_err = vec![BigInt::zero(); k];
    for (s, row) in samples.iter().zip(&int_basis) {
        let v = s.to_fixed();
        for d in 0..k {
            local[d] += &row[d] * v.mantissa();
            if v.err_ulps() != 0 {
                local_err[d] += row[d].abs() * BigInt::from(v.err_ulps());
            }
        }
    }
    let n = BigInt::from(anchor);
    let coeffs = translate_int(&local, &n);
    // |coefficients| of q(y + N) dominate those of q(y - N)
    let errs = translate_int(&local_err, &-n);
    let scalars = coeffs
        .into_iter()
        .zip(errs)
        .map(|(c, e)| {
            let mantissa = c.div_floor(&scale);
            // floor costs at most one ulp; the scaled error rounds up
            let err = (e.div_ceil(&scale) + 1u32).to_u128().unwrap_or(u128::MAX);
            let value = FixedPointReal::from_parts(mantissa, err, crate::fixed::Provenance::IrrationalConstant);
            Scalar::Real { label: format!("{}", value.to_f64()), value }
        })
        .collect();
    Phase::polynomial(scalars)
}

fn translate_int(coeffs: &[BigInt], shift: &BigInt) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); coeffs.len()];
    for c in coeffs.iter().rev() {
        let mut next = vec![BigInt::zero(); coeffs.len()];
        for d in 0..out.len() {
            if out[d].is_zero() {
                continue;
            }
            if d + 1 < next.len() {
                next[d + 1] += &out[d];
            }
            next[d] -= &out[d] * shift;
        }
        next[0] += c;
        out = next;
    }
    out
}

/// Coefficients of `p(y - shift)` given those of `p`.
fn translate(coeffs: &[BigRational], shift: &BigRational) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); coeffs.len()];
    // Horner in the polynomial ring: out = ((c_top)(y - s) + c_{top-1})(y - s) + ...
    for c in coeffs.iter().rev() {
        let mut next = vec![BigRational::zero(); coeffs.len()];
        for d in 0..out.len() {
            if out[d].is_zero() {
                continue;
            }
            if d + 1 < next.len() {
                next[d + 1] += &out[d];
            }
            next[d] -= &out[d] * shift;
        }
        next[0] += c;
        out = next;
    }
    out
}

/// Concatenation of degree-`< k` interpolating polynomials, piece `i`
/// anchored at `f(N_i), ..., f(N_i + k - 1)`, for `n < n_end`.
pub fn build_concatenation<F>(
    f: F,
    k: usize,
    schedule: &BreakpointSchedule,
    n_end: u64,
) -> Result<Phase, SumError>
where
    F: Fn(u64) -> Scalar + Sync,
{
    if k == 0 || n_end == 0 {
        return Err(SumError::Invalid("need k >= 1 and n_end >= 1".into()));
    }
    let breakpoints = schedule.breakpoints(k, n_end)?;
    let basis = lagrange_basis(k);
    let pieces: Vec<Phase> = breakpoints.par_iter().map(|&b| anchored_piece(&f, b, &basis)).collect();
    Ok(Phase::Concatenation(Concatenation::new(breakpoints, pieces)?))
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ResidualReport {
    pub samples: u64,
    /// `max ‖f(n) - g(n)‖`.
    pub max_distance: f64,
    pub argmax: u64,
    /// True when every sample was compared in exact rational arithmetic and agreed.
    pub exact_zero: bool,
}

/// `max_n ‖f(n) - g(n)‖` over the sample points.
pub fn concatenation_residual<F, I>(f: F, g: &Phase, samples: I) -> Result<ResidualReport, SumError>
where
    F: Fn(u64) -> Scalar,
    I: IntoIterator<Item = u64>,
{
    let mut count = 0u64;
    let mut max = 0f64;
    let mut argmax = 0u64;
    let mut exact_zero = true;
    for n in samples {
        count += 1;
        let fv = f(n);
        let gv = g.eval(n)?;
        let d = match (&fv, &gv.exact) {
            (Scalar::Rational(r), Some(ge)) => {
                let diff = frac(&(r - ge));
                let d = diff.clone().min(BigRational::one() - diff);
                if !d.is_zero() {
                    exact_zero = false;
                }
                d.to_f64().unwrap_or(f64::NAN)
            }
            _ => {
                exact_zero = false;
                frac_to_f64(frac_distance(fv.frac_bits().0, gv.frac))
            }
        };
        if d > max {
            max = d;
            argmax = n;
        }
    }
    if count == 0 {
        exact_zero = false;
    }
    Ok(ResidualReport { samples: count, max_distance: max, argmax, exact_zero })
}

/// `f(n) = c n^{p/q}` as a value oracle for [`build_concatenation`].
pub fn power_oracle(num: u32, den: u32, coefficient: Scalar) -> impl Fn(u64) -> Scalar + Sync {
    move |n| {
        let v = crate::phase::rational_power(n, num, den, &coefficient);
        if v.err_ulps() == 0 && coefficient.is_rational() {
            Scalar::Rational(v.to_rational())
        } else {
            Scalar::Real { value: v, label: format!("{n}^({num}/{den})") }
        }
    }
}

/// Divides out common factors so rational reports print compactly.
pub fn reduced(r: &BigRational) -> (BigInt, BigInt) {
    let g = r.numer().gcd(r.denom());
    (r.numer() / &g, r.denom() / &g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sieves::{sieve_mobius, sieve_phi};
    use crate::weights::{Constant, ResidueMasked};

    #[test]
    fn checkpoints_are_log_spaced_and_end_at_n_max() {
        let c = log_checkpoints(1_000_000, 20);
        assert_eq!(c.len(), 20);
        assert_eq!(*c.last().unwrap(), 1_000_000);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(log_checkpoints(5, 20), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn masked_weights_give_zero() {
        let mu = sieve_mobius(1000).unwrap();
        let masked = ResidueMasked { inner: &mu, modulus: 4, residue: 0 };
        let r = weighted_average(&masked, &Phase::bracket(Scalar::sqrt(3), Scalar::sqrt(2)), 1000, &[10, 100])
            .unwrap();
        assert!(r.checkpoints.iter().all(|c| c.modulus == 0.0));
    }

    #[test]
    fn mertens_over_ten() {
        let mu = sieve_mobius(10).unwrap();
        let r = weighted_average(&mu, &Phase::zero(), 10, &[10]).unwrap();
        assert!((r.last().re + 0.1).abs() < 1e-15);
        assert!(r.last().im.abs() < 1e-15);
    }

    #[test]
    fn checkpoint_prefix_spans_chunks() {
        let ones = Constant::one(3 * CHUNK + 5);
        let p = Phase::polynomial(vec![Scalar::int(0), Scalar::sqrt(2)]);
        let n = 3 * CHUNK + 5;
        let cps = [1, CHUNK - 1, CHUNK, CHUNK + 1, 2 * CHUNK + 7, n];
        let r = weighted_average(&ones, &p, n, &cps).unwrap();
        for c in &r.checkpoints {
            let mut direct = Complex64::zero();
            for m in 1..=c.n {
                direct += unit(p.frac_f64(m).unwrap());
            }
            let direct = direct / c.n as f64;
            assert!((direct.re - c.re).abs() < 1e-12, "checkpoint {}", c.n);
            assert!((direct.im - c.im).abs() < 1e-12);
        }
    }

    #[test]
    fn range_is_checked() {
        let mu = sieve_mobius(100).unwrap();
        assert_eq!(
            weighted_average(&mu, &Phase::zero(), 101, &[]),
            Err(SumError::Range { needed: 101, available: 100 })
        );
    }

    #[test]
    fn short_interval_trivial_cases() {
        let zero = Constant::zero(1000);
        let r = short_interval_sup_average(&zero, &[Phase::zero()], 100, 10).unwrap();
        assert_eq!(r.value, 0.0);
        let one = Constant::one(1000);
        let r = short_interval_sup_average(&one, &[Phase::zero()], 100, 10).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!(short_interval_sup_average(&one, &[Phase::zero()], 500, 10).is_err());
    }

    #[test]
    fn grid_has_all_members() {
        let g = coefficient_grid(2, 16);
        assert_eq!(g.len(), 256);
        assert_eq!(g[17].to_string(), "poly:1/16,1/16");
    }

    #[test]
    fn ap_correlation_trivial_cases() {
        let phi = sieve_phi(10).unwrap();
        let zero = Constant::zero(2000);
        let r = ap_correlation(&zero, &Phase::zero(), 1, 3, 1000, &phi).unwrap();
        assert_eq!(r.value, 0.0);
        let one = Constant::one(2000);
        let r = ap_correlation(&one, &Phase::zero(), 1, 3, 1000, &phi).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        let r = ap_correlation(&one, &Phase::zero(), 4, 5, 1000, &phi).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!((r.comparison - 2.0 * 5f64.ln().ln() / 5f64.ln()).abs() < 1e-12);
        assert!(ap_correlation(&one, &Phase::zero(), 1, 2, 1000, &phi).is_err());
    }

    #[test]
    fn ap_correlation_matches_direct_sum() {
        let mu = sieve_mobius(5000).unwrap();
        let phi = sieve_phi(10).unwrap();
        let p = Phase::polynomial(vec![Scalar::int(0), Scalar::sqrt(3)]);
        let (s, h, n) = (3u64, 7u64, 2000u64);
        let r = ap_correlation(&mu, &p, s, h, n, &phi).unwrap();
        let mut direct = 0.0;
        for m in 1..=n {
            let mut z = Complex64::zero();
            for l in 1..=h {
                let k = m + l * s;
                z += unit(p.frac_f64(k).unwrap()) * mu.get(k) as f64;
            }
            direct += (z / h as f64).norm_sqr();
        }
        assert!((direct / n as f64 - r.value).abs() < 1e-12);
    }

    #[test]
    fn shift_correlation_examples() {
        let constant = vec![Complex64::new(0.3, -0.2); 20];
        assert_eq!(shift_self_correlation(&constant, 3, 10).unwrap(), 0.0);
        let alt: Vec<Complex64> =
            (0..20).map(|n| Complex64::new(if n % 2 == 0 { 1.0 } else { -1.0 }, 0.0)).collect();
        assert_eq!(shift_self_correlation(&alt, 1, 10).unwrap(), 4.0);
        assert_eq!(shift_self_correlation(&alt, 2, 10).unwrap(), 0.0);
        assert_eq!(shift_self_correlation(&alt, 0, 20).unwrap(), 0.0);
        assert!(shift_self_correlation(&alt, 2, 19).is_err());
    }

    #[test]
    fn dirichlet_examples() {
        let r = dirichlet_approx(&[Scalar::rational(1, 3)], 3, DIRICHLET_BUDGET).unwrap();
        assert_eq!((r.t, r.a_int(), r.max_err), (3, vec![BigInt::from(1)], 0.0));
        let r = dirichlet_approx(&[Scalar::sqrt(2)], 3, DIRICHLET_BUDGET).unwrap();
        assert_eq!(r.t, 2);
        assert_eq!(r.a_int(), vec![BigInt::from(3)]);
        assert!((r.max_err - (3.0 - 2.0 * 2f64.sqrt())).abs() < 1e-12);
        let r = dirichlet_approx(&[Scalar::int(4), Scalar::int(-7)], 5, DIRICHLET_BUDGET).unwrap();
        assert_eq!((r.t, r.max_err), (1, 0.0));
        assert!(matches!(
            dirichlet_approx(&vec![Scalar::sqrt(2); 4], 100, 1000),
            Err(SumError::Budget { .. })
        ));
    }

    #[test]
    fn geometric_and_explicit_schedules() {
        let g = BreakpointSchedule::Geometric { first_gap: 2, ratio: 2.0 };
        assert_eq!(g.breakpoints(2, 40).unwrap(), vec![0, 2, 6, 14, 30]);
        let e = BreakpointSchedule::Explicit { breakpoints: vec![0, 3, 9, 50] };
        assert_eq!(e.breakpoints(2, 40).unwrap(), vec![0, 3, 9]);
        let bad = BreakpointSchedule::Explicit { breakpoints: vec![0, 3, 3] };
        assert!(bad.breakpoints(2, 40).is_err());
    }

    #[test]
    fn decay_schedule_shape() {
        let s = BreakpointSchedule::DecayDriven { tau: 0.7, c: 2.0, accuracy: 10.0 };
        let b = s.breakpoints(2, 1_000_000).unwrap();
        assert_eq!(b[0], 0);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        // unit blocks first, then blocks of two
        assert_eq!(b[1], 1);
        let l1 = b.windows(2).position(|w| w[1] - w[0] == 2).unwrap();
        assert_eq!(b[l1] % 2, 0);
    }

    #[test]
    fn translate_shifts_polynomials() {
        // p(y) = y^2 → p(y - 3) = y^2 - 6y + 9
        let p = vec![rat_int(0), rat_int(0), rat_int(1)];
        assert_eq!(translate(&p, &rat_int(3)), vec![rat_int(9), rat_int(-6), rat_int(1)]);
    }

    #[test]
    fn concatenation_reproduces_polynomials() {
        let f = |n: u64| {
            let x = rat_int(n as i64);
            Scalar::Rational(&x * &x * BigRational::new(1.into(), 3.into()) + x / rat_int(7))
        };
        let g = build_concatenation(
            f,
            3,
            &BreakpointSchedule::Geometric { first_gap: 3, ratio: 1.5 },
            500,
        )
        .unwrap();
        let r = concatenation_residual(f, &g, 0..500).unwrap();
        assert!(r.exact_zero);
        assert_eq!(r.max_distance, 0.0);
    }
}
