//! Exact nonnegative rationals for every time quantity, and seeded random
//! substreams for Monte Carlo trials.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::NumericsError;

/// Comparison tolerance for expected costs and probabilities.
pub const COST_TOL: f64 = 1e-9;

/// Nonnegative fraction in lowest terms.
///
/// Backed by an arbitrary-precision ratio so that repeated stretching by
/// `(1 + 5ε)` never overflows.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Rational(BigRational);

/// Builds `num/den`, rejecting a zero denominator or a negative value.
pub fn rat(num: i64, den: i64) -> Result<Rational, NumericsError> {
    if den == 0 {
        return Err(NumericsError::ZeroDenominator);
    }
    let r = BigRational::new(BigInt::from(num), BigInt::from(den));
    Rational::from_big(r)
}

impl Rational {
    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn from_int(n: u64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(n)))
    }

    /// `1/den` for a positive `den`.
    pub fn one_over(den: u64) -> Self {
        assert!(den > 0, "zero denominator");
        Rational(BigRational::new(BigInt::one(), BigInt::from(den)))
    }

    pub fn from_big(r: BigRational) -> Result<Self, NumericsError> {
        if r.is_negative() {
            return Err(NumericsError::Negative(r.to_string()));
        }
        Ok(Rational(r))
    }

    /// Exact value of a finite, nonnegative float.
    pub fn from_f64(x: f64) -> Result<Self, NumericsError> {
        let r = BigRational::from_float(x).ok_or_else(|| NumericsError::Parse(x.to_string()))?;
        Self::from_big(r)
    }

    pub fn from_bigint(n: BigInt) -> Result<Self, NumericsError> {
        Self::from_big(BigRational::from_integer(n))
    }

    pub fn as_big(&self) -> &BigRational {
        &self.0
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::INFINITY)
    }

    /// `self - rhs`, or an error when the result would be negative.
    pub fn checked_sub(&self, rhs: &Rational) -> Result<Rational, NumericsError> {
        let r = &self.0 - &rhs.0;
        if r.is_negative() {
            Err(NumericsError::Negative(r.to_string()))
        } else {
            Ok(Rational(r))
        }
    }

    pub fn checked_div(&self, rhs: &Rational) -> Result<Rational, NumericsError> {
        if rhs.is_zero() {
            Err(NumericsError::DivisionByZero)
        } else {
            Ok(Rational(&self.0 / &rhs.0))
        }
    }

    /// `floor(self / rhs)`.
    pub fn floor_div(&self, rhs: &Rational) -> Result<BigInt, NumericsError> {
        let q = self.checked_div(rhs)?;
        Ok(q.0.numer().div_floor(q.0.denom()))
    }

    /// Smallest multiple of `g` that is `>= self`.
    pub fn ceil_to_multiple_of(&self, g: &Rational) -> Result<Rational, NumericsError> {
        let q = self.checked_div(g)?;
        let k = q.0.numer().div_ceil(q.0.denom());
        Ok(Rational(BigRational::from_integer(k) * &g.0))
    }

    /// True when `self` is an integer multiple of `g` (`g > 0`).
    pub fn is_multiple_of(&self, g: &Rational) -> bool {
        if g.is_zero() {
            return self.is_zero();
        }
        (&self.0 / &g.0).is_integer()
    }

    pub fn scale(&self, k: u64) -> Rational {
        Rational(&self.0 * BigRational::from_integer(BigInt::from(k)))
    }

    pub fn min_of<'a>(a: &'a Rational, b: &'a Rational) -> &'a Rational {
        if a <= b {
            a
        } else {
            b
        }
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = NumericsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || NumericsError::Parse(s.to_string());
        let (num, den) = match s.split_once('/') {
            Some((n, d)) => (
                n.trim().parse::<BigInt>().map_err(|_| bad())?,
                d.trim().parse::<BigInt>().map_err(|_| bad())?,
            ),
            None => (s.parse::<BigInt>().map_err(|_| bad())?, BigInt::one()),
        };
        if den.is_zero() {
            return Err(NumericsError::ZeroDenominator);
        }
        Rational::from_big(BigRational::new(num, den))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl<'a> Add<&'a Rational> for &'a Rational {
    type Output = Rational;
    fn add(self, rhs: &'a Rational) -> Rational {
        Rational(&self.0 + &rhs.0)
    }
}

impl Add for Rational {
    type Output = Rational;
    fn add(self, rhs: Rational) -> Rational {
        Rational(self.0 + rhs.0)
    }
}

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        self.0 += &rhs.0;
    }
}

/// Panics when the difference is negative; use [`Rational::checked_sub`]
/// where that is not an invariant.
impl<'a> Sub<&'a Rational> for &'a Rational {
    type Output = Rational;
    fn sub(self, rhs: &'a Rational) -> Rational {
        self.checked_sub(rhs).expect("negative rational difference")
    }
}

impl<'a> Mul<&'a Rational> for &'a Rational {
    type Output = Rational;
    fn mul(self, rhs: &'a Rational) -> Rational {
        Rational(&self.0 * &rhs.0)
    }
}

impl Mul for Rational {
    type Output = Rational;
    fn mul(self, rhs: Rational) -> Rational {
        Rational(self.0 * rhs.0)
    }
}

/// Panics on a zero divisor; use [`Rational::checked_div`] otherwise.
impl<'a> Div<&'a Rational> for &'a Rational {
    type Output = Rational;
    fn div(self, rhs: &'a Rational) -> Rational {
        self.checked_div(rhs).expect("division by zero")
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, r| &acc + r)
    }
}

impl From<u64> for Rational {
    fn from(n: u64) -> Self {
        Rational::from_int(n)
    }
}

/// Compares two expected costs with the shared tolerance.
pub fn approx_cmp(a: f64, b: f64) -> Ordering {
    if (a - b).abs() <= COST_TOL * a.abs().max(b.abs()).max(1.0) {
        Ordering::Equal
    } else if a < b {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

/// A reproducible random substream: `(master_seed, stream_index)` always
/// yields the same sequence, and distinct indices yield independent streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeedStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        SeedStream {
            master_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}
