//! Exact rational arithmetic used for every rate, bound, and solver value.
//!
//! All quantities of interest here are exact fractions (retrieval rates such
//! as 8/13, LP vertex coordinates, dual prices), so no floating point appears
//! anywhere in this crate. `Rat` is a thin wrapper around an arbitrary
//! precision rational kept in lowest terms with a positive denominator.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Exact rational number: arbitrary-precision numerator and denominator,
/// always reduced, denominator always positive.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rat(BigRational);

impl Rat {
    pub fn zero() -> Self {
        Rat(BigRational::zero())
    }

    pub fn one() -> Self {
        Rat(BigRational::one())
    }

    pub fn from_int<T: Into<BigInt>>(n: T) -> Self {
        Rat(BigRational::from_integer(n.into()))
    }

    /// `numer/denom` in lowest terms. Panics on a zero denominator.
    pub fn ratio<T: Into<BigInt>, U: Into<BigInt>>(numer: T, denom: U) -> Self {
        Rat(BigRational::new(numer.into(), denom.into()))
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

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Self {
        Rat(self.0.abs())
    }

    pub fn recip(&self) -> Self {
        Rat(self.0.clone().recip())
    }

    pub fn floor_int(&self) -> BigInt {
        self.0.floor().to_integer()
    }

    pub fn ceil_int(&self) -> BigInt {
        self.0.ceil().to_integer()
    }

    /// Distance to the nearest integer; zero iff the value is integral.
    pub fn frac_distance(&self) -> Rat {
        let fl = Rat::from_int(self.floor_int());
        let frac = self.clone() - fl;
        let half = Rat::ratio(1, 2);
        if frac <= half {
            frac
        } else {
            Rat::one() - frac
        }
    }

    /// Rough size measure (total bits of numerator and denominator), used to
    /// prefer small pivots inside the simplex.
    pub fn bit_size(&self) -> u64 {
        self.0.numer().bits() + self.0.denom().bits()
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Error parsing a rational from its `numer/denom` text form.
#[derive(Debug, thiserror::Error)]
#[error("invalid rational literal `{0}`")]
pub struct ParseRatError(String);

impl FromStr for Rat {
    type Err = ParseRatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParseRatError(s.to_string());
        match s.split_once('/') {
            None => {
                let n = BigInt::from_str(s.trim()).map_err(|_| bad())?;
                Ok(Rat::from_int(n))
            }
            Some((n, d)) => {
                let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
                let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
                if d.is_zero() {
                    return Err(bad());
                }
                Ok(Rat::ratio(n, d))
            }
        }
    }
}

impl From<i64> for Rat {
    fn from(n: i64) -> Self {
        Rat::from_int(n)
    }
}

impl From<BigInt> for Rat {
    fn from(n: BigInt) -> Self {
        Rat::from_int(n)
    }
}

macro_rules! binop {
    ($trait:ident, $m:ident) => {
        impl $trait for Rat {
            type Output = Rat;
            fn $m(self, rhs: Rat) -> Rat {
                Rat((self.0).$m(rhs.0))
            }
        }
        impl<'a> $trait<&'a Rat> for Rat {
            type Output = Rat;
            fn $m(self, rhs: &'a Rat) -> Rat {
                Rat((self.0).$m(&rhs.0))
            }
        }
        impl<'a, 'b> $trait<&'b Rat> for &'a Rat {
            type Output = Rat;
            fn $m(self, rhs: &'b Rat) -> Rat {
                Rat((&self.0).$m(&rhs.0))
            }
        }
    };
}

binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);
binop!(Div, div);

impl AddAssign<&Rat> for Rat {
    fn add_assign(&mut self, rhs: &Rat) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&Rat> for Rat {
    fn sub_assign(&mut self, rhs: &Rat) {
        self.0 -= &rhs.0;
    }
}

impl MulAssign<&Rat> for Rat {
    fn mul_assign(&mut self, rhs: &Rat) {
        self.0 *= &rhs.0;
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-self.0)
    }
}

impl Neg for &Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-self.0.clone())
    }
}

// Rationals cross serialization boundaries as exact `numer/denom` strings,
// never as decimals.
impl serde::Serialize for Rat {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for Rat {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for arbitrary-precision integers as decimal strings
/// (JSON numbers cannot carry them exactly).
pub mod bigint_string {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Scale a list of rationals by the least common multiple of their
/// denominators. Returns the (minimal) multiplier and the exact integer
/// values `multiplier * v`.
pub fn lift_to_integral(values: &[Rat]) -> (BigInt, Vec<BigInt>) {
    let mut m = BigInt::one();
    for v in values {
        m = m.lcm(v.denom());
    }
    let scaled = values
        .iter()
        .map(|v| {
            let s = v.numer() * (&m / v.denom());
            debug_assert!((&Rat::from_int(s.clone()) - &(v * &Rat::from_int(m.clone()))).is_zero());
            s
        })
        .collect();
    (m, scaled)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowest_terms_and_display() {
        let r = Rat::ratio(16, 26);
        assert_eq!(r.numer(), &BigInt::from(8));
        assert_eq!(r.denom(), &BigInt::from(13));
        assert_eq!(r.to_string(), "8/13");
        assert_eq!(Rat::ratio(-4, -6).to_string(), "2/3");
        assert_eq!(Rat::ratio(4, -6).to_string(), "-2/3");
        assert_eq!(Rat::from_int(7).to_string(), "7");
    }

    #[test]
    fn parse_round_trip() {
        for s in ["8/13", "-2/3", "0", "42", "1000000000000000000000/7"] {
            let r: Rat = s.parse().unwrap();
            assert_eq!(r.to_string(), s);
        }
        assert!("1/0".parse::<Rat>().is_err());
        assert!("x".parse::<Rat>().is_err());
    }

    #[test]
    fn exact_arithmetic() {
        let a = Rat::ratio(1, 3);
        let b = Rat::ratio(1, 6);
        assert_eq!(&a + &b, Rat::ratio(1, 2));
        assert_eq!(&a - &b, Rat::ratio(1, 6));
        assert_eq!(&a * &b, Rat::ratio(1, 18));
        assert_eq!(&a / &b, Rat::from_int(2));
        assert_eq!(Rat::ratio(7, 2).floor_int(), BigInt::from(3));
        assert_eq!(Rat::ratio(7, 2).ceil_int(), BigInt::from(4));
        assert_eq!(Rat::ratio(-7, 2).floor_int(), BigInt::from(-4));
        assert_eq!(Rat::ratio(-7, 2).ceil_int(), BigInt::from(-3));
    }

    #[test]
    fn lift_multiplier_is_lcm_of_denominators() {
        let vals = [Rat::ratio(1, 8), Rat::ratio(3, 8), Rat::ratio(1, 4)];
        let (m, ints) = lift_to_integral(&vals);
        assert_eq!(m, BigInt::from(8));
        assert_eq!(ints, vec![1.into(), 3.into(), 2.into()]);

        let vals = [Rat::from_int(3), Rat::from_int(0)];
        let (m, ints) = lift_to_integral(&vals);
        assert_eq!(m, BigInt::one());
        assert_eq!(ints, vec![3.into(), 0.into()]);
    }
}
