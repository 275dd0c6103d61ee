use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Smallest accepted precision for dyadic means, in bits.
pub const MIN_DYADIC_BITS: u32 = 128;

/// Fractional bits used by [`Mean::sqrt`].
pub const SQRT_BITS: u32 = 160;

/// A stream mean: either an exact rational or a dyadic approximation
/// `mantissa / 2^frac_bits` whose distance to the true value is at most
/// `2^-err_bits`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mean {
    Exact(BigRational),
    Dyadic {
        mantissa: BigInt,
        frac_bits: u32,
        err_bits: u32,
    },
}

impl Mean {
    pub fn integer(n: i64) -> Self {
        Mean::Exact(BigRational::from_integer(n.into()))
    }

    pub fn ratio(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::invalid("mean", "zero denominator"));
        }
        Ok(Mean::Exact(BigRational::new(num.into(), den.into())))
    }

    /// Exact value of a finite double.
    pub fn from_f64(x: f64) -> Result<Self> {
        BigRational::from_float(x)
            .map(Mean::Exact)
            .ok_or(Error::NonFinite { what: "mean", value: x })
    }

    /// `sqrt(n)` truncated to [`SQRT_BITS`] fractional bits.
    pub fn sqrt(n: u64) -> Self {
        let scaled = BigUint::from(n) << (2 * SQRT_BITS as usize);
        let root = scaled.sqrt();
        let exact = &root * &root == scaled;
        Mean::Dyadic {
            mantissa: BigInt::from_biguint(Sign::Plus, root),
            frac_bits: SQRT_BITS,
            // floor(sqrt(x * 4^b)) / 2^b is within 2^-b of sqrt(x)
            err_bits: if exact { u32::MAX } else { SQRT_BITS },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Mean::Dyadic { err_bits, .. } = self {
            if *err_bits < MIN_DYADIC_BITS {
                return Err(Error::invalid(
                    "mean",
                    format!("dyadic error bound 2^-{err_bits} is coarser than 2^-{MIN_DYADIC_BITS}"),
                ));
            }
        }
        Ok(())
    }

    /// The represented rational value (the approximation, for dyadic means).
    pub fn value(&self) -> BigRational {
        match self {
            Mean::Exact(r) => r.clone(),
            Mean::Dyadic {
                mantissa,
                frac_bits,
                ..
            } => BigRational::new(mantissa.clone(), BigInt::one() << *frac_bits as usize),
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.value().to_f64().unwrap_or(f64::NAN)
    }

    /// `Some(n)` when the mean is exactly the natural number `n`, `None` when
    /// it is certainly not a natural number. Dyadic means whose error interval
    /// contains an integer cannot be classified and are rejected.
    pub fn natural(&self) -> Result<Option<u64>> {
        match self {
            Mean::Exact(r) => {
                if r.is_integer() && !r.is_negative() {
                    Ok(r.to_integer().to_u64())
                } else {
                    Ok(None)
                }
            }
            Mean::Dyadic { err_bits, .. } => {
                let v = self.value();
                let exact = *err_bits == u32::MAX;
                let err = if exact {
                    BigRational::zero()
                } else {
                    BigRational::new(BigInt::one(), BigInt::one() << *err_bits as usize)
                };
                let lo = (&v - &err).ceil();
                let hi = (&v + &err).floor();
                if lo > hi {
                    return Ok(None);
                }
                if exact {
                    return Ok(if v.is_negative() { None } else { v.to_integer().to_u64() });
                }
                Err(Error::invalid(
                    "mean",
                    "dyadic approximation is within its error bound of an integer",
                ))
            }
        }
    }
}

impl From<i64> for Mean {
    fn from(n: i64) -> Self {
        Mean::integer(n)
    }
}

impl fmt::Display for Mean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mean::Exact(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Mean::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Mean::Dyadic {
                mantissa,
                frac_bits,
                err_bits,
            } => write!(f, "dyadic:{mantissa}/2^{frac_bits}~2^-{err_bits}"),
        }
    }
}

impl FromStr for Mean {
    type Err = Error;

    /// Accepts integers, decimals (`2.5`, `-1e-3`), ratios (`7/3`),
    /// `sqrt(n)` and the dyadic display form.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |reason: &str| Error::invalid("mean", format!("`{s}`: {reason}"));
        if let Some(inner) = s.strip_prefix("sqrt(").and_then(|r| r.strip_suffix(')')) {
            let n: u64 = inner.trim().parse().map_err(|_| bad("sqrt takes a natural number"))?;
            return Ok(Mean::sqrt(n));
        }
        if let Some(rest) = s.strip_prefix("dyadic:") {
            let (mant, rest) = rest.split_once("/2^").ok_or_else(|| bad("expected dyadic:M/2^B~2^-E"))?;
            let (bits, err) = rest.split_once("~2^-").ok_or_else(|| bad("expected dyadic:M/2^B~2^-E"))?;
            let mean = Mean::Dyadic {
                mantissa: mant.parse().map_err(|_| bad("bad mantissa"))?,
                frac_bits: bits.parse().map_err(|_| bad("bad exponent"))?,
                err_bits: err.parse().map_err(|_| bad("bad error exponent"))?,
            };
            mean.validate()?;
            return Ok(mean);
        }
        if let Some((num, den)) = s.split_once('/') {
            let num: BigInt = num.trim().parse().map_err(|_| bad("bad numerator"))?;
            let den: BigInt = den.trim().parse().map_err(|_| bad("bad denominator"))?;
            if den.is_zero() {
                return Err(bad("zero denominator"));
            }
            return Ok(Mean::Exact(BigRational::new(num, den)));
        }
        parse_decimal(s).map(Mean::Exact).ok_or_else(|| bad("not a number"))
    }
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: BigInt = format!("{int}{frac}").parse().ok()?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut r = if scale >= 0 {
        BigRational::from_integer(all * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(all, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        r = -r;
    }
    Some(r)
}
