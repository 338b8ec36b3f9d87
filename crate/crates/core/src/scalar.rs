//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! Probabilities, output values, precisions and certificate slopes are all
//! carried as a [`Scalar`]. Binary floats (`f32`, `f64`) compare with a small
//! absolute slack; [`BigRational`] is exact and compares with zero slack, which
//! makes threshold tests such as `0.2 <= 1 - 0.8` decidable without rounding
//! artefacts.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

/// Numeric type usable as probability and output value.
pub trait Scalar:
    Clone + Debug + PartialOrd + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Absolute slack applied to comparisons between computed quantities.
    fn slack() -> Self;

    /// Probabilities at or below this value are not treated as edges.
    fn edge_floor() -> Self;

    /// Tolerance on `|Σ row - 1|` accepted by model validation.
    fn row_sum_tolerance() -> Self;

    /// Parses a decimal literal (`0.25`, `-1e-3`) or a fraction (`1/3`).
    fn parse_literal(lit: &str) -> Option<Self>;

    /// Canonical textual form. Decimal where the value has a terminating
    /// expansion, `n/d` otherwise.
    fn to_literal(&self) -> String;

    /// True when arithmetic is exact.
    fn is_exact() -> bool;

    /// Lossy conversion used for sampling and display.
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::zero)
    }
}

macro_rules! float_scalar {
    ($t:ty, $slack:expr, $rowtol:expr) => {
        impl Scalar for $t {
            fn slack() -> Self {
                $slack
            }

            fn edge_floor() -> Self {
                1e-12
            }

            fn row_sum_tolerance() -> $t {
                $rowtol
            }

            fn parse_literal(lit: &str) -> Option<Self> {
                let lit = lit.trim();
                if let Some((n, d)) = lit.split_once('/') {
                    let n: $t = n.trim().parse().ok()?;
                    let d: $t = d.trim().parse().ok()?;
                    if d == 0.0 {
                        return None;
                    }
                    return Some(n / d);
                }
                let v: $t = lit.parse().ok()?;
                v.is_finite().then_some(v)
            }

            fn to_literal(&self) -> String {
                format!("{}", self)
            }

            fn is_exact() -> bool {
                false
            }
        }
    };
}

float_scalar!(f64, 1e-12, 1e-9);
float_scalar!(f32, 1e-6, 1e-6);

impl Scalar for BigRational {
    fn slack() -> Self {
        BigRational::zero()
    }

    fn edge_floor() -> Self {
        BigRational::zero()
    }

    fn row_sum_tolerance() -> Self {
        BigRational::new(BigInt::one(), BigInt::from(1_000_000_000u64))
    }

    fn parse_literal(lit: &str) -> Option<Self> {
        let lit = lit.trim();
        if let Some((n, d)) = lit.split_once('/') {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            return Some(BigRational::new(n, d));
        }
        parse_decimal(lit)
    }

    fn to_literal(&self) -> String {
        rational_literal(self)
    }

    fn is_exact() -> bool {
        true
    }
}

/// Exact parse of a JSON-style decimal literal.
fn parse_decimal(lit: &str) -> Option<BigRational> {
    let (mantissa, exponent) = match lit.find(['e', 'E']) {
        Some(pos) => (&lit[..pos], lit[pos + 1..].parse::<i64>().ok()?),
        None => (lit, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .bytes()
        .chain(frac_part.bytes())
        .all(|b| b.is_ascii_digit())
    {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut numer: BigInt = if all.is_empty() {
        BigInt::zero()
    } else {
        all.parse().ok()?
    };
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i64;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Some(value)
}

fn rational_literal(v: &BigRational) -> String {
    let numer = v.numer();
    let denom = v.denom();
    if denom.is_one() {
        return numer.to_string();
    }
    // A reduced fraction terminates in base 10 iff its denominator is 2^a 5^b.
    let two = BigInt::from(2u32);
    let five = BigInt::from(5u32);
    let mut rest = denom.clone();
    let (mut a, mut b) = (0usize, 0usize);
    while rest.is_even() {
        rest /= &two;
        a += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        b += 1;
    }
    if !rest.is_one() {
        return format!("{numer}/{denom}");
    }
    let digits = a.max(b);
    let scaled = numer * num_traits::pow(BigInt::from(10u32), digits) / denom;
    let negative = scaled.is_negative();
    let mut s = scaled.abs().to_string();
    if s.len() <= digits {
        s = format!("{}{}", "0".repeat(digits + 1 - s.len()), s);
    }
    let (int_part, frac_part) = s.split_at(s.len() - digits);
    let frac_part = frac_part.trim_end_matches('0');
    let sign = if negative { "-" } else { "" };
    if frac_part.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part}")
    }
}

/// `a <= b` up to the scalar's slack.
pub fn approx_le<S: Scalar>(a: &S, b: &S) -> bool {
    *a <= b.clone() + S::slack()
}

/// `a >= b` up to the scalar's slack.
pub fn approx_ge<S: Scalar>(a: &S, b: &S) -> bool {
    approx_le(b, a)
}

/// Probability strictly above the edge floor.
pub fn is_positive<S: Scalar>(p: &S) -> bool {
    *p > S::edge_floor()
}

pub fn max_of<S: Scalar>(a: S, b: S) -> S {
    if b > a {
        b
    } else {
        a
    }
}

pub fn min_of<S: Scalar>(a: S, b: S) -> S {
    if b < a {
        b
    } else {
        a
    }
}

/// Infinity norm of `a - b`.
pub fn inf_norm_distance<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (x, y)| {
        max_of(acc, (x.clone() - y.clone()).abs())
    })
}

/// Converts between scalar types through the canonical literal.
pub fn convert<A: Scalar, B: Scalar>(v: &A) -> B {
    B::parse_literal(&v.to_literal()).unwrap_or_else(|| B::from_f64_lossy(v.to_f64_lossy()))
}
