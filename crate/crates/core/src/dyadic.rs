//! Exact dyadic rationals `numerator / 2^exponent`.
//!
//! Every path probability of the geometric down-walk is dyadic, so sums of
//! them stay exact and identities between them can be tested with `==`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::special::{ldexp, pow2_rational};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    numerator: BigInt,
    exponent: u64,
}

impl Dyadic {
    pub fn zero() -> Self {
        Self {
            numerator: BigInt::zero(),
            exponent: 0,
        }
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn from_int(v: impl Into<BigInt>) -> Self {
        Self {
            numerator: v.into(),
            exponent: 0,
        }
    }

    /// `count * 2^shift` for any sign of `shift`.
    pub fn from_pow2(count: impl Into<BigInt>, shift: i64) -> Self {
        let count = count.into();
        if shift >= 0 {
            Self::from_int(count << shift as u64)
        } else {
            Self::new(count, shift.unsigned_abs())
        }
    }

    pub fn new(numerator: BigInt, exponent: u64) -> Self {
        let mut d = Self {
            numerator,
            exponent,
        };
        d.normalize();
        d
    }

    fn normalize(&mut self) {
        if self.numerator.is_zero() {
            self.exponent = 0;
            return;
        }
        let tz = self.numerator.trailing_zeros().unwrap_or(0).min(self.exponent);
        self.numerator >>= tz;
        self.exponent -= tz;
    }

    pub fn numerator(&self) -> &BigInt {
        &self.numerator
    }

    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    pub fn half(&self) -> Self {
        Self::new(self.numerator.clone(), self.exponent + 1)
    }

    pub fn double(&self) -> Self {
        Self::from_pow2(self.numerator.clone(), 1 - self.exponent as i64)
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::from_integer(self.numerator.clone()) * pow2_rational(-(self.exponent as i64))
    }

    pub fn to_f64(&self) -> f64 {
        big_to_f64_scaled(&self.numerator, -(self.exponent as i64))
    }

    fn aligned(&self, other: &Self) -> (BigInt, BigInt, u64) {
        let e = self.exponent.max(other.exponent);
        (
            &self.numerator << (e - self.exponent),
            &other.numerator << (e - other.exponent),
            e,
        )
    }
}

/// `n * 2^shift` as f64, without overflowing on huge numerators.
pub fn big_to_f64_scaled(n: &BigInt, shift: i64) -> f64 {
    let bits = n.bits() as i64;
    if bits <= 1000 {
        return ldexp(n.to_f64().unwrap_or(f64::NAN), shift);
    }
    let drop = bits - 64;
    let top = (n >> drop as u64).to_f64().unwrap_or(f64::NAN);
    ldexp(top, shift + drop)
}

/// Nearest f64 to a rational (correct to a couple of ulps).
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if r.numer().is_zero() {
        return 0.0;
    }
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    // scale so the integer quotient carries 64+ significant bits
    let shift = 64 - (nb - db);
    let q = if shift >= 0 {
        (r.numer() << shift as u64) / r.denom()
    } else {
        r.numer() / (r.denom() << (-shift) as u64)
    };
    big_to_f64_scaled(&q, -shift)
}

impl Add for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        let (a, b, e) = self.aligned(rhs);
        Dyadic::new(a + b, e)
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        &self + &rhs
    }
}

impl Sub for &Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        let (a, b, e) = self.aligned(rhs);
        Dyadic::new(a - b, e)
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        &self - &rhs
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        Dyadic::new(&self.numerator * &rhs.numerator, self.exponent + rhs.exponent)
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: Dyadic) -> Dyadic {
        &self * &rhs
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic::new(-self.numerator, self.exponent)
    }
}

impl std::iter::Sum for Dyadic {
    fn sum<I: Iterator<Item = Dyadic>>(iter: I) -> Dyadic {
        iter.fold(Dyadic::zero(), |a, b| &a + &b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(other);
        a.cmp(&b)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponent == 0 {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "{}/2^{}", self.numerator, self.exponent)
        }
    }
}

impl Dyadic {
    pub fn abs(&self) -> Self {
        Self::new(self.numerator.abs(), self.exponent)
    }

    pub fn is_one(&self) -> bool {
        self.exponent == 0 && self.numerator.is_one()
    }
}
