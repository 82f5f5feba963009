//! Exact Gaussian-rational scalars.
//!
//! Every coefficient in the kernel is an element of Q(i): a pair of
//! arbitrary-precision rationals. All identity checks in this crate assert
//! *literal* zero, so the scalar type must never round.
//!
//! Invariants:
//! * both components are always fully reduced (delegated to `num-rational`);
//! * there is no floating-point anywhere behind this type.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// An exact element of Q(i).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct GaussianRational {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussianRational {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self {
            re: BigRational::one(),
            im: BigRational::zero(),
        }
    }

    /// The imaginary unit.
    pub fn i() -> Self {
        Self {
            re: BigRational::zero(),
            im: BigRational::one(),
        }
    }

    pub fn from_int(n: i64) -> Self {
        Self {
            re: BigRational::from_integer(BigInt::from(n)),
            im: BigRational::zero(),
        }
    }

    /// Real rational `num/den`. Panics on a zero denominator.
    pub fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Self {
            re: BigRational::new(BigInt::from(num), BigInt::from(den)),
            im: BigRational::zero(),
        }
    }

    /// Gaussian rational `a/b + (c/d) i`.
    pub fn from_parts(a: i64, b: i64, c: i64, d: i64) -> Self {
        assert!(b != 0 && d != 0, "zero denominator");
        Self {
            re: BigRational::new(BigInt::from(a), BigInt::from(b)),
            im: BigRational::new(BigInt::from(c), BigInt::from(d)),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }

    /// Complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }

    /// Squared modulus `re^2 + im^2` (a real rational).
    pub fn norm_sq(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    /// Multiplicative inverse. Panics on zero; callers guard.
    pub fn inv(&self) -> Self {
        let n = self.norm_sq();
        assert!(!n.is_zero(), "division by zero Gaussian rational");
        Self {
            re: &self.re / &n,
            im: -&self.im / &n,
        }
    }

    /// Scale by an integer, in place.
    pub fn scale_int(&mut self, k: i64) {
        let k = BigRational::from_integer(BigInt::from(k));
        self.re *= &k;
        self.im *= &k;
    }

    /// Product by reference (also reachable through `std::ops::Mul`).
    pub fn mul(&self, rhs: &Self) -> Self {
        Self {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }

    /// Negation by reference (also reachable through `std::ops::Neg`).
    pub fn neg(&self) -> Self {
        Self {
            re: -self.re.clone(),
            im: -self.im.clone(),
        }
    }
}

impl Add for GaussianRational {
    type Output = GaussianRational;
    fn add(self, rhs: Self) -> Self {
        Self {
            re: self.re + rhs.re,
            im: self.im + rhs.im,
        }
    }
}

impl AddAssign<&GaussianRational> for GaussianRational {
    fn add_assign(&mut self, rhs: &Self) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl Sub for GaussianRational {
    type Output = GaussianRational;
    fn sub(self, rhs: Self) -> Self {
        Self {
            re: self.re - rhs.re,
            im: self.im - rhs.im,
        }
    }
}

impl Neg for GaussianRational {
    type Output = GaussianRational;
    fn neg(self) -> Self {
        Self {
            re: -self.re,
            im: -self.im,
        }
    }
}

impl Mul for GaussianRational {
    type Output = GaussianRational;
    fn mul(self, rhs: Self) -> Self {
        GaussianRational::mul(&self, &rhs)
    }
}

impl Div for GaussianRational {
    type Output = GaussianRational;
    fn div(self, rhs: Self) -> Self {
        GaussianRational::mul(&self, &rhs.inv())
    }
}

impl fmt::Display for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            return write!(f, "{}", self.re);
        }
        if self.re.is_zero() {
            return write!(f, "{}i", self.im);
        }
        if self.im.is_negative() {
            write!(f, "{}{}i", self.re, self.im)
        } else {
            write!(f, "{}+{}i", self.re, self.im)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_identities() {
        let a = GaussianRational::from_parts(2, 3, -1, 4);
        let b = GaussianRational::from_parts(-5, 7, 2, 9);
        let prod = (&a).mul(&b);
        // commutativity and exact inverse round-trip
        assert_eq!(prod, (&b).mul(&a));
        assert_eq!((&prod).mul(&b.inv()), a);
    }

    #[test]
    fn i_squared_is_minus_one() {
        let i = GaussianRational::i();
        assert_eq!((&i).mul(&i), GaussianRational::from_int(-1));
    }

    #[test]
    fn conjugation_is_multiplicative() {
        let a = GaussianRational::from_parts(1, 2, 3, 5);
        let b = GaussianRational::from_parts(-2, 1, 1, 3);
        assert_eq!((&a).mul(&b).conj(), (&a.conj()).mul(&b.conj()));
    }
}
