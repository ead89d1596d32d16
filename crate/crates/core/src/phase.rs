//! Real-valued phases `f(n)` evaluated modulo 1 with certified error bounds.
//!
//! Polynomial phases reduce modulo 1 term by term: only the 96 fractional
//! bits of each coefficient matter, and `frac(c) · n^d mod 2^96` is exact
//! integer arithmetic, so the only error is the stored coefficient error
//! amplified by `n^d`.

use std::fmt;
use std::path::Path;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Deserialize;
use thiserror::Error;

use crate::exact_calculus::frac;
use crate::fixed::{
    frac_to_f64, FixedPointReal, Scalar, ScalarParseError, CERTIFIED_ERR_ULPS, FRAC_BITS, FRAC_MASK,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error(
        "precision exceeded at n = {n}: error bound {bound:e} reaches the certified limit 2^-30"
    )]
    Precision { n: u64, bound: f64 },
    #[error("value at n = {n} exceeds the 192-bit fixed-point width")]
    Width { n: u64 },
    #[error("n = {n} is outside the table (length {len})")]
    OutOfTable { n: u64, len: u64 },
    #[error("table phases store fractional parts only; real value at n = {n} unavailable")]
    RealValueUnavailable { n: u64 },
    #[error("invalid concatenation: {0}")]
    Schedule(String),
    #[error("parse error at position {position}: {message} (token {token:?})")]
    Parse { token: String, position: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// `{f(n)}` as a 96-bit fraction with its error bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseValue {
    pub frac: u128,
    pub err_ulps: u128,
    /// Present when every constant in the phase is rational.
    pub exact: Option<BigRational>,
}

impl PhaseValue {
    pub fn to_f64(&self) -> f64 {
        match &self.exact {
            Some(r) => r.to_f64().unwrap_or_else(|| frac_to_f64(self.frac)),
            None => frac_to_f64(self.frac),
        }
    }

    pub fn error_bound(&self) -> f64 {
        self.err_ulps as f64 * 2f64.powi(-(FRAC_BITS as i32))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyPhase {
    coeffs: Vec<Scalar>,
    // (frac bits, err ulps) per coefficient
    mod1: Vec<(u128, u128)>,
}

impl PolyPhase {
    pub fn new(coeffs: Vec<Scalar>) -> Self {
        let mod1 = coeffs.iter().map(Scalar::frac_bits).collect();
        Self { coeffs, mod1 }
    }

    pub fn coeffs(&self) -> &[Scalar] {
        &self.coeffs
    }

    fn all_rational(&self) -> bool {
        self.coeffs.iter().all(Scalar::is_rational)
    }

    #[inline]
    fn frac96(&self, n: u64) -> Result<(u128, u128), PhaseError> {
        let mut acc: u128 = 0;
        let mut err: u128 = 0;
        let mut pow_mod: u128 = 1;
        let mut pow_exact: Option<u128> = Some(1);
        for &(c, e) in &self.mod1 {
            acc = acc.wrapping_add(c.wrapping_mul(pow_mod)) & FRAC_MASK;
            if e != 0 {
                let term = pow_exact.and_then(|p| p.checked_mul(e)).unwrap_or(u128::MAX);
                err = err.saturating_add(term);
            }
            pow_mod = pow_mod.wrapping_mul(n as u128) & FRAC_MASK;
            pow_exact = pow_exact.and_then(|p| p.checked_mul(n as u128));
        }
        if err >= CERTIFIED_ERR_ULPS {
            return Err(PhaseError::Precision { n, bound: err as f64 * 2f64.powi(-96) });
        }
        Ok((acc, err))
    }

    fn exact_value(&self, n: u64) -> BigRational {
        let x = BigRational::from_integer(BigInt::from(n));
        self.coeffs.iter().rev().fold(BigRational::zero(), |acc, c| match c {
            Scalar::Rational(r) => acc * &x + r,
            Scalar::Real { .. } => unreachable!("checked all_rational"),
        })
    }

    fn real_value(&self, n: u64) -> FixedPointReal {
        let nn = BigInt::from(n);
        let mut pow = BigInt::from(1);
        let mut acc = FixedPointReal::from_int(0);
        for c in &self.coeffs {
            acc = acc.add(&c.to_fixed().mul_int(&pow));
            pow *= &nn;
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Concatenation {
    breakpoints: Vec<u64>,
    pieces: Vec<Phase>,
}

impl Concatenation {
    /// Piece `i` applies on `[N_i, N_{i+1})`; the last piece extends indefinitely.
    pub fn new(breakpoints: Vec<u64>, pieces: Vec<Phase>) -> Result<Self, PhaseError> {
        if breakpoints.first() != Some(&0) {
            return Err(PhaseError::Schedule("first breakpoint must be 0".into()));
        }
        if let Some(w) = breakpoints.windows(2).find(|w| w[1] <= w[0]) {
            return Err(PhaseError::Schedule(format!(
                "breakpoints must strictly increase ({} then {})",
                w[0], w[1]
            )));
        }
        if breakpoints.len() != pieces.len() {
            return Err(PhaseError::Schedule(format!(
                "{} breakpoints but {} pieces",
                breakpoints.len(),
                pieces.len()
            )));
        }
        Ok(Self { breakpoints, pieces })
    }

    pub fn breakpoints(&self) -> &[u64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Phase] {
        &self.pieces
    }

    pub fn piece_index(&self, n: u64) -> usize {
        self.breakpoints.partition_point(|&b| b <= n) - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TablePhase {
    label: String,
    values: Vec<(u128, u128)>,
}

impl TablePhase {
    /// Table over `n = 0..values.len()`.
    pub fn new(label: impl Into<String>, values: Vec<(u128, u128)>) -> Self {
        Self { label: label.into(), values }
    }

    pub fn from_reals<F>(label: impl Into<String>, len: u64, f: F) -> Self
    where
        F: Fn(u64) -> FixedPointReal,
    {
        let values = (0..len)
            .map(|n| {
                let v = f(n);
                (v.frac_bits(), v.err_ulps())
            })
            .collect();
        Self::new(label, values)
    }

    pub fn len(&self) -> u64 {
        self.values.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Phase {
    Polynomial(PolyPhase),
    /// `f(n) = β n {α n}`.
    BracketProduct { beta: Scalar, alpha: Scalar },
    Concatenation(Concatenation),
    Table(TablePhase),
}

impl Phase {
    pub fn polynomial(coeffs: Vec<Scalar>) -> Self {
        Phase::Polynomial(PolyPhase::new(coeffs))
    }

    pub fn zero() -> Self {
        Phase::polynomial(vec![Scalar::int(0)])
    }

    pub fn bracket(beta: Scalar, alpha: Scalar) -> Self {
        Phase::BracketProduct { beta, alpha }
    }

    /// `{f(n)}` with its certified error.
    pub fn eval(&self, n: u64) -> Result<PhaseValue, PhaseError> {
        match self {
            Phase::Polynomial(p) if p.all_rational() => {
                let exact = frac(&p.exact_value(n));
                let fixed = FixedPointReal::from_rational(&exact);
                Ok(PhaseValue {
                    frac: fixed.frac_bits(),
                    err_ulps: fixed.err_ulps(),
                    exact: Some(exact),
                })
            }
            Phase::Concatenation(c) => c.pieces[c.piece_index(n)].eval(n),
            _ => {
                let (frac, err_ulps) = self.frac96(n)?;
                Ok(PhaseValue { frac, err_ulps, exact: None })
            }
        }
    }

    /// `{f(n)}` on the fast path: 96-bit fraction and error in ulps.
    pub fn frac96(&self, n: u64) -> Result<(u128, u128), PhaseError> {
        match self {
            Phase::Polynomial(p) => p.frac96(n),
            Phase::BracketProduct { .. } => {
                let v = self.real(n)?;
                Ok((v.frac_bits(), v.err_ulps()))
            }
            Phase::Concatenation(c) => c.pieces[c.piece_index(n)].frac96(n),
            Phase::Table(t) => t
                .values
                .get(n as usize)
                .copied()
                .ok_or(PhaseError::OutOfTable { n, len: t.len() }),
        }
    }

    /// `{f(n)}` as `f64` in `[0, 1)`.
    #[inline]
    pub fn frac_f64(&self, n: u64) -> Result<f64, PhaseError> {
        self.frac96(n).map(|(f, _)| frac_to_f64(f))
    }

    /// The real value `f(n)` (not reduced), where the variant carries it.
    pub fn real(&self, n: u64) -> Result<FixedPointReal, PhaseError> {
        let v = match self {
            Phase::Polynomial(p) => p.real_value(n),
            Phase::BracketProduct { beta, alpha } => {
                let nn = BigInt::from(n);
                let alpha_n = alpha.to_fixed().mul_int(&nn);
                beta.to_fixed().mul_int(&nn).mul(&alpha_n.frac())
            }
            Phase::Concatenation(c) => return c.pieces[c.piece_index(n)].real(n),
            Phase::Table(_) => return Err(PhaseError::RealValueUnavailable { n }),
        };
        if !v.fits_width() {
            return Err(PhaseError::Width { n });
        }
        if v.err_ulps() >= CERTIFIED_ERR_ULPS {
            return Err(PhaseError::Precision { n, bound: v.error_bound() });
        }
        Ok(v)
    }

    pub fn describe(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Polynomial(p) => {
                let cs: Vec<String> = p.coeffs.iter().map(ToString::to_string).collect();
                write!(f, "poly:{}", cs.join(","))
            }
            Phase::BracketProduct { beta, alpha } => write!(f, "bracket:{beta},{alpha}"),
            Phase::Concatenation(c) => write!(f, "concat:{} pieces", c.pieces.len()),
            Phase::Table(t) => write!(f, "table:{}", t.label),
        }
    }
}

/// `f(n) = c · n^{p/q}` as an exact fixed-point evaluator.
pub fn rational_power(n: u64, num: u32, den: u32, coefficient: &Scalar) -> FixedPointReal {
    let base = num_traits::pow(BigUint::from(n), num as usize);
    let root = FixedPointReal::root(&BigRational::from_integer(base.into()), den)
        .expect("nonnegative base");
    match coefficient {
        Scalar::Rational(r) if r == &BigRational::from_integer(1.into()) => root,
        c => root.mul(&c.to_fixed()),
    }
}

/// Parsed phase description, materialized with [`PhaseSpec::build`].
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseSpec {
    Ready(Phase),
    /// `c · n^{num/den}`, tabulated on demand.
    Power { num: u32, den: u32, coefficient: Scalar },
}

impl PhaseSpec {
    /// Tables are built for `n = 0..=n_end`.
    pub fn build(&self, n_end: u64) -> Phase {
        match self {
            PhaseSpec::Ready(p) => p.clone(),
            PhaseSpec::Power { num, den, coefficient } => {
                let label = format!("pow:{num}/{den},{coefficient}");
                Phase::Table(TablePhase::from_reals(label, n_end + 1, |n| {
                    rational_power(n, *num, *den, coefficient)
                }))
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConcatFile {
    breakpoints: Vec<u64>,
    pieces: Vec<String>,
}

fn parse_error(token: &str, position: usize, message: impl Into<String>) -> PhaseError {
    PhaseError::Parse { token: token.to_string(), position, message: message.into() }
}

fn parse_scalars(body: &str, offset: usize) -> Result<Vec<Scalar>, PhaseError> {
    let mut out = Vec::new();
    let mut pos = offset;
    for tok in body.split(',') {
        let s = tok.parse::<Scalar>().map_err(|e| match e {
            ScalarParseError::Syntax { .. } => parse_error(tok, pos, "not a scalar"),
            ScalarParseError::NegativeRoot { .. } => parse_error(tok, pos, "negative radicand"),
        })?;
        out.push(s);
        pos += tok.len() + 1;
    }
    Ok(out)
}

/// Parses `poly:c0,c1,...`, `bracket:beta,alpha`, `pow:p/q[,c]` and
/// `concat:@file.json` (relative to `base_dir`).
pub fn parse_phase(text: &str, base_dir: &Path) -> Result<PhaseSpec, PhaseError> {
    let text = text.trim();
    let Some((kind, body)) = text.split_once(':') else {
        return Err(parse_error(text, 0, "expected <kind>:<body>"));
    };
    let offset = kind.len() + 1;
    match kind {
        "poly" => Ok(PhaseSpec::Ready(Phase::polynomial(parse_scalars(body, offset)?))),
        "bracket" => {
            let s = parse_scalars(body, offset)?;
            let [beta, alpha]: [Scalar; 2] = s
                .try_into()
                .map_err(|_| parse_error(body, offset, "bracket takes exactly two scalars"))?;
            Ok(PhaseSpec::Ready(Phase::bracket(beta, alpha)))
        }
        "pow" => {
            let (exp, coeff) = match body.split_once(',') {
                Some((e, c)) => (e, Some(c)),
                None => (body, None),
            };
            let (num, den) = exp.split_once('/').unwrap_or((exp, "1"));
            let num: u32 = num
                .trim()
                .parse()
                .map_err(|_| parse_error(exp, offset, "exponent numerator"))?;
            let den: u32 = den
                .trim()
                .parse()
                .ok()
                .filter(|&d| d > 0)
                .ok_or_else(|| parse_error(exp, offset, "exponent denominator"))?;
            let coefficient = match coeff {
                Some(c) => parse_scalars(c, offset + exp.len() + 1)?.remove(0),
                None => Scalar::int(1),
            };
            Ok(PhaseSpec::Power { num, den, coefficient })
        }
        "concat" => {
            let Some(file) = body.strip_prefix('@') else {
                return Err(parse_error(body, offset, "expected @<schedule.json>"));
            };
            let path = base_dir.join(file);
            let raw = std::fs::read_to_string(&path).map_err(|e| PhaseError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let spec: ConcatFile = serde_json::from_str(&raw).map_err(|e| PhaseError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let pieces = spec
                .pieces
                .iter()
                .map(|p| match parse_phase(p, base_dir)? {
                    PhaseSpec::Ready(ph) => Ok(ph),
                    PhaseSpec::Power { .. } => {
                        Err(parse_error(p, 0, "concatenation pieces cannot be tabulated powers"))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(PhaseSpec::Ready(Phase::Concatenation(Concatenation::new(
                spec.breakpoints,
                pieces,
            )?)))
        }
        other => Err(parse_error(other, 0, "unknown phase kind (poly, bracket, pow, concat)")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn zero_polynomial_is_zero() {
        for n in [0, 1, 17, 1_000_000] {
            let v = Phase::zero().eval(n).unwrap();
            assert_eq!(v.frac, 0);
            assert_eq!(v.exact, Some(q(0, 1)));
        }
    }

    #[test]
    fn rational_polynomial_is_exact() {
        let p = Phase::polynomial(vec![Scalar::rational(1, 2), Scalar::rational(1, 3)]);
        let v = p.eval(3).unwrap();
        assert_eq!(v.exact, Some(q(1, 2)));
        assert_eq!(v.frac, 1u128 << 95);
        assert_eq!(v.err_ulps, 0);
        // fast path agrees to within its bound
        let (f, e) = p.frac96(3).unwrap();
        assert!(f.abs_diff(v.frac) <= e + 1);
    }

    #[test]
    fn bracket_at_one() {
        let p = Phase::bracket(Scalar::sqrt(3), Scalar::sqrt(2));
        let v = p.eval(1).unwrap();
        let expected = 3f64.sqrt() * (2f64.sqrt() - 1.0);
        assert!((v.to_f64() - expected).abs() < 1e-15);
        assert!((expected - 0.717439).abs() < 1e-6);
        assert!(v.err_ulps < 64);
    }

    #[test]
    fn precision_limit_is_enforced() {
        // err grows like n^2 through the coefficient of n^2
        let p = Phase::polynomial(vec![Scalar::int(0), Scalar::int(0), Scalar::sqrt(2)]);
        assert!(p.frac96(1_000_000_000).is_ok());
        assert!(matches!(p.frac96(u64::MAX / 2), Err(PhaseError::Precision { .. })));
    }

    #[test]
    fn concatenation_selects_pieces() {
        let c = Concatenation::new(
            vec![0, 5, 9],
            vec![
                Phase::polynomial(vec![Scalar::rational(1, 4)]),
                Phase::polynomial(vec![Scalar::rational(1, 2)]),
                Phase::polynomial(vec![Scalar::rational(3, 4)]),
            ],
        )
        .unwrap();
        assert_eq!(c.piece_index(0), 0);
        assert_eq!(c.piece_index(4), 0);
        assert_eq!(c.piece_index(5), 1);
        assert_eq!(c.piece_index(9), 2);
        assert_eq!(c.piece_index(1000), 2);
        let p = Phase::Concatenation(c);
        assert_eq!(p.eval(6).unwrap().exact, Some(q(1, 2)));
        assert!(Concatenation::new(vec![1, 2], vec![Phase::zero(), Phase::zero()]).is_err());
        assert!(Concatenation::new(vec![0, 2, 2], vec![Phase::zero(); 3]).is_err());
        assert!(Concatenation::new(vec![0, 2], vec![Phase::zero()]).is_err());
    }

    #[test]
    fn power_table() {
        let spec = parse_phase("pow:3/2", Path::new(".")).unwrap();
        let p = spec.build(100);
        // 4^{3/2} = 8, exact
        assert_eq!(p.frac96(4).unwrap(), (0, 0));
        let f = p.frac_f64(2).unwrap();
        assert!((f - (2f64.powf(1.5) - 2.0)).abs() < 1e-12);
        assert!(matches!(p.frac96(101), Err(PhaseError::OutOfTable { .. })));
        assert!(matches!(p.real(3), Err(PhaseError::RealValueUnavailable { .. })));
    }

    #[test]
    fn parse_errors_name_position() {
        let err = parse_phase("poly:1,x,3", Path::new(".")).unwrap_err();
        assert_eq!(
            err,
            PhaseError::Parse { token: "x".into(), position: 7, message: "not a scalar".into() }
        );
        assert!(parse_phase("bracket:1", Path::new(".")).is_err());
        assert!(parse_phase("wave:1", Path::new(".")).is_err());
        assert!(parse_phase("poly", Path::new(".")).is_err());
    }

    #[test]
    fn parse_concat_file() {
        let dir = std::env::temp_dir().join(format!("concat-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(
            dir.join("s.json"),
            r#"{"breakpoints":[0,10],"pieces":["poly:0,1/2","bracket:1,sqrt2"]}"#,
        )
        .unwrap();
        let spec = parse_phase("concat:@s.json", &dir).unwrap();
        let PhaseSpec::Ready(Phase::Concatenation(c)) = spec else { panic!() };
        assert_eq!(c.breakpoints(), &[0, 10]);
        std::fs::remove_dir_all(dir).ok();
    }
}
