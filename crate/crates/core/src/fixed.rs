//! Fixed-point reals with 96 fractional bits and a tracked error bound.
//!
//! A value is `mantissa · 2^-96`; `err_ulps` bounds the distance to the
//! real number it stands for, in units of `2^-96`. Mantissas are limited to
//! 192 bits of magnitude when used by phase evaluation.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

pub const FRAC_BITS: u32 = 96;
pub const WIDTH_BITS: u64 = 192;
pub const FRAC_MASK: u128 = (1u128 << FRAC_BITS) - 1;
/// `2^-30` in units of `2^-96`: evaluations whose error bound reaches this are refused.
pub const CERTIFIED_ERR_ULPS: u128 = 1u128 << 66;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScalarParseError {
    #[error("cannot parse scalar {token:?}")]
    Syntax { token: String },
    #[error("square root of a negative number in {token:?}")]
    NegativeRoot { token: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ExactRational,
    IrrationalConstant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedPointReal {
    mantissa: BigInt,
    err_ulps: u128,
    provenance: Provenance,
}

fn one_shifted(bits: u32) -> BigInt {
    BigInt::one() << bits
}

fn saturating_u128(v: &BigUint) -> u128 {
    v.to_u128().unwrap_or(u128::MAX)
}

impl FixedPointReal {
    pub fn from_int(v: i64) -> Self {
        Self {
            mantissa: BigInt::from(v) << FRAC_BITS,
            err_ulps: 0,
            provenance: Provenance::ExactRational,
        }
    }

    /// Rounds `r` down to the grid; exact when `r` is dyadic with at most 96 fractional bits.
    pub fn from_rational(r: &BigRational) -> Self {
        let scaled = r.numer() << FRAC_BITS;
        let (q, rem) = scaled.div_mod_floor(r.denom());
        Self {
            mantissa: q,
            err_ulps: if rem.is_zero() { 0 } else { 1 },
            provenance: Provenance::ExactRational,
        }
    }

    /// `sqrt(r)` for `r >= 0`, within two units of the last place.
    pub fn sqrt(r: &BigRational) -> Option<Self> {
        if r.is_negative() {
            return None;
        }
        let scaled = (r.numer() << (2 * FRAC_BITS)).div_floor(r.denom());
        let exact_scaled = (r.numer() << (2 * FRAC_BITS)).is_multiple_of(r.denom());
        let root = scaled.magnitude().sqrt();
        let exact = exact_scaled && &root * &root == *scaled.magnitude();
        Some(Self {
            mantissa: BigInt::from_biguint(Sign::Plus, root),
            err_ulps: if exact { 0 } else { 2 },
            provenance: if exact {
                Provenance::ExactRational
            } else {
                Provenance::IrrationalConstant
            },
        })
    }

    /// `r^(1/q)` for `r >= 0` and `q >= 1`, within two units of the last place.
    pub fn root(r: &BigRational, q: u32) -> Option<Self> {
        if r.is_negative() || q == 0 {
            return None;
        }
        let shift = FRAC_BITS as usize * q as usize;
        let num = r.numer() << shift;
        let scaled = num.div_floor(r.denom());
        let exact_scaled = num.is_multiple_of(r.denom());
        let root = scaled.magnitude().nth_root(q);
        let exact = exact_scaled && num_traits::pow(root.clone(), q as usize) == *scaled.magnitude();
        Some(Self {
            mantissa: BigInt::from_biguint(Sign::Plus, root),
            err_ulps: if exact { 0 } else { 2 },
            provenance: if exact {
                Provenance::ExactRational
            } else {
                Provenance::IrrationalConstant
            },
        })
    }

    pub fn from_parts(mantissa: BigInt, err_ulps: u128, provenance: Provenance) -> Self {
        Self { mantissa, err_ulps, provenance }
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn err_ulps(&self) -> u128 {
        self.err_ulps
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn error_bound(&self) -> f64 {
        self.err_ulps as f64 * 2f64.powi(-(FRAC_BITS as i32))
    }

    pub fn fits_width(&self) -> bool {
        self.mantissa.bits() < WIDTH_BITS
    }

    fn join(a: Provenance, b: Provenance) -> Provenance {
        if a == Provenance::ExactRational && b == Provenance::ExactRational {
            Provenance::ExactRational
        } else {
            Provenance::IrrationalConstant
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            mantissa: &self.mantissa + &other.mantissa,
            err_ulps: self.err_ulps.saturating_add(other.err_ulps),
            provenance: Self::join(self.provenance, other.provenance),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Self { mantissa: -&self.mantissa, ..self.clone() }
    }

    pub fn mul_int(&self, k: &BigInt) -> Self {
        let err = BigUint::from(self.err_ulps) * k.magnitude();
        Self {
            mantissa: &self.mantissa * k,
            err_ulps: saturating_u128(&err),
            provenance: self.provenance,
        }
    }

    /// Product rounded down to the grid; the error bound covers both inputs' errors and the rounding.
    pub fn mul(&self, other: &Self) -> Self {
        let prod = &self.mantissa * &other.mantissa;
        let mantissa = prod.div_floor(&one_shifted(FRAC_BITS));
        let a = self.mantissa.magnitude();
        let b = other.mantissa.magnitude();
        let ea = BigUint::from(self.err_ulps);
        let eb = BigUint::from(other.err_ulps);
        // ulps: (|a| eb + |b| ea + ea eb) / 2^96, rounded up, plus one for the floor
        let cross: BigUint = a * &eb + b * &ea + &ea * &eb;
        let cross = (cross + ((BigUint::one() << FRAC_BITS) - 1u32)) >> FRAC_BITS;
        Self {
            mantissa,
            err_ulps: saturating_u128(&cross).saturating_add(1),
            provenance: Self::join(self.provenance, other.provenance),
        }
    }

    pub fn floor(&self) -> BigInt {
        self.mantissa.div_floor(&one_shifted(FRAC_BITS))
    }

    /// `{x}` as a 96-bit fraction of unity.
    pub fn frac_bits(&self) -> u128 {
        let m = self.mantissa.mod_floor(&one_shifted(FRAC_BITS));
        m.to_u128().expect("fraction fits in 96 bits")
    }

    pub fn frac(&self) -> FixedPointReal {
        Self {
            mantissa: BigInt::from(self.frac_bits()),
            err_ulps: self.err_ulps,
            provenance: self.provenance,
        }
    }

    /// Nearest `f64` up to one rounding of the mantissa; small values keep their relative precision.
    pub fn to_f64(&self) -> f64 {
        self.mantissa.to_f64().unwrap_or(f64::NAN) * 2f64.powi(-(FRAC_BITS as i32))
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.mantissa.clone(), one_shifted(FRAC_BITS))
    }
}

/// A 96-bit fraction of unity as an `f64` in `[0, 1)`.
#[inline]
pub fn frac_to_f64(bits: u128) -> f64 {
    // keep the top 53 bits; the result stays below 1
    ((bits >> 43) as f64) * 2f64.powi(-53)
}

/// Circular distance between two 96-bit fractions, as a 96-bit fraction.
pub fn frac_distance(a: u128, b: u128) -> u128 {
    let d = a.wrapping_sub(b) & FRAC_MASK;
    d.min((1u128 << FRAC_BITS) - d)
}

/// A real constant: exact rational when possible, otherwise a fixed-point value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scalar {
    Rational(BigRational),
    Real { value: FixedPointReal, label: String },
}

impl Scalar {
    pub fn rational(n: i64, d: i64) -> Self {
        Scalar::Rational(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn int(n: i64) -> Self {
        Scalar::Rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn sqrt(n: u64) -> Self {
        Scalar::Real {
            value: FixedPointReal::sqrt(&BigRational::from_integer(BigInt::from(n)))
                .expect("nonnegative"),
            label: format!("sqrt{n}"),
        }
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, Scalar::Rational(_))
    }

    pub fn to_fixed(&self) -> FixedPointReal {
        match self {
            Scalar::Rational(r) => FixedPointReal::from_rational(r),
            Scalar::Real { value, .. } => value.clone(),
        }
    }

    /// `{x}` as 96-bit fraction plus an error bound in ulps.
    pub fn frac_bits(&self) -> (u128, u128) {
        let f = self.to_fixed();
        (f.frac_bits(), f.err_ulps())
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Rational(r) => write!(f, "{r}"),
            Scalar::Real { label, .. } => write!(f, "{label}"),
        }
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

fn parse_rational(token: &str) -> Option<BigRational> {
    let t = token.trim();
    if t.is_empty() {
        return None;
    }
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).ok()?;
        let d = BigInt::from_str(d.trim()).ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    if let Some((int, dec)) = t.split_once('.') {
        let neg = int.trim_start().starts_with('-');
        if dec.is_empty() || !dec.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let int_val = if int.is_empty() || int == "-" || int == "+" {
            BigInt::zero()
        } else {
            BigInt::from_str(int).ok()?
        };
        let scale = num_traits::pow(BigInt::from(10), dec.len());
        let frac = BigInt::from_str(dec).ok()?;
        let mag = int_val.abs() * &scale + frac;
        let num = if neg { -mag } else { mag };
        return Some(BigRational::new(num, scale));
    }
    BigInt::from_str(t).ok().map(BigRational::from_integer)
}

impl FromStr for Scalar {
    type Err = ScalarParseError;

    /// Accepts `3`, `-1/2`, `0.37`, `sqrt2`, `sqrt(5/3)`, `2*sqrt3`, `-sqrt2`, `1/3*sqrt(7)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let token = s.trim();
        let syntax = || ScalarParseError::Syntax { token: token.to_string() };
        let (factor, radical) = match token.find("sqrt") {
            None => return parse_rational(token).map(Scalar::Rational).ok_or_else(syntax),
            Some(pos) => {
                let head = token[..pos].trim();
                let factor = match head {
                    "" | "+" => BigRational::one(),
                    "-" => -BigRational::one(),
                    h => parse_rational(h.strip_suffix('*').ok_or_else(syntax)?).ok_or_else(syntax)?,
                };
                let rest = &token[pos + 4..];
                let inner = rest
                    .strip_prefix('(')
                    .and_then(|r| r.strip_suffix(')'))
                    .unwrap_or(rest);
                (factor, parse_rational(inner).ok_or_else(syntax)?)
            }
        };
        if radical.is_negative() {
            return Err(ScalarParseError::NegativeRoot { token: token.to_string() });
        }
        let root = FixedPointReal::sqrt(&radical).expect("checked sign");
        if root.err_ulps() == 0 {
            return Ok(Scalar::Rational(root.to_rational() * factor));
        }
        let value = if factor.is_one() {
            root
        } else {
            root.mul(&FixedPointReal::from_rational(&factor))
        };
        Ok(Scalar::Real { value, label: token.to_string() })
    }
}
