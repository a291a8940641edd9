//! Float values with tracked error bounds, and exact integer helpers.
//!
//! Real-valued outputs of the crate (radii, tilt points, lattice constants,
//! total-variation distances) are `f64`s paired with an explicit error bound
//! that the producing routine is responsible for honoring. The bound covers
//! both method error (bisection width, lumped tails) and accumulated
//! rounding, propagated first-order through arithmetic.

use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{Float, One, Signed, ToPrimitive, Zero};

use crate::series::Rat;

/// Relative rounding unit used when charging one `f64` operation.
pub const EPS: f64 = 2.3e-16;

/// A value together with an absolute error bound: the represented quantity
/// lies in `[value - err, value + err]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Approx {
    pub value: f64,
    pub err: f64,
}

impl Approx {
    pub fn new(value: f64, err: f64) -> Self {
        Approx { value, err }
    }

    /// A value known exactly up to one rounding of the `f64` representation.
    pub fn exact(value: f64) -> Self {
        Approx {
            value,
            err: value.abs() * EPS,
        }
    }

    pub fn zero() -> Self {
        Approx { value: 0.0, err: 0.0 }
    }

    /// Enlarge the bound to at least `err`.
    pub fn with_err_at_least(mut self, err: f64) -> Self {
        if err > self.err {
            self.err = err;
        }
        self
    }

    /// `exp` of the value, with the bound pushed through the derivative
    /// (exact for upper bound since exp is convex: uses `exp(v)(e^err - 1)`).
    pub fn exp(self) -> Self {
        let v = self.value.exp();
        let err = v * (self.err.exp() - 1.0) + v * EPS;
        Approx { value: v, err }
    }

    pub fn recip(self) -> Self {
        let v = 1.0 / self.value;
        // |1/(x±e) - 1/x| <= e / (x (x - e)) for e < |x|
        let denom = self.value.abs() * (self.value.abs() - self.err);
        let err = if denom > 0.0 {
            self.err / denom + v.abs() * EPS
        } else {
            f64::INFINITY
        };
        Approx { value: v, err }
    }

    pub fn abs(self) -> Self {
        Approx {
            value: self.value.abs(),
            err: self.err,
        }
    }

    /// True when the interval lies strictly above `x`.
    pub fn certainly_above(self, x: f64) -> bool {
        self.value - self.err > x
    }

    /// True when the interval lies strictly below `x`.
    pub fn certainly_below(self, x: f64) -> bool {
        self.value + self.err < x
    }

    /// True when `x` is inside the interval.
    pub fn contains(self, x: f64) -> bool {
        (self.value - x).abs() <= self.err
    }
}

impl Add for Approx {
    type Output = Approx;
    fn add(self, rhs: Approx) -> Approx {
        let v = self.value + rhs.value;
        Approx {
            value: v,
            err: self.err + rhs.err + v.abs() * EPS,
        }
    }
}

impl Sub for Approx {
    type Output = Approx;
    fn sub(self, rhs: Approx) -> Approx {
        self + (-rhs)
    }
}

impl Neg for Approx {
    type Output = Approx;
    fn neg(self) -> Approx {
        Approx {
            value: -self.value,
            err: self.err,
        }
    }
}

impl Mul for Approx {
    type Output = Approx;
    fn mul(self, rhs: Approx) -> Approx {
        let v = self.value * rhs.value;
        let err = self.value.abs() * rhs.err
            + rhs.value.abs() * self.err
            + self.err * rhs.err
            + v.abs() * EPS;
        Approx { value: v, err }
    }
}

impl Mul<f64> for Approx {
    type Output = Approx;
    fn mul(self, rhs: f64) -> Approx {
        Approx {
            value: self.value * rhs,
            err: self.err * rhs.abs() + (self.value * rhs).abs() * EPS,
        }
    }
}

/// Convert a big rational to `f64`, falling back to a scaled conversion when
/// numerator or denominator overflow the double range.
pub fn rat_to_f64(r: &Rat) -> f64 {
    if let Some(v) = r.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    // Scale both parts into range by shifting away excess bits.
    let numer = r.numer();
    let denom = r.denom();
    let nb = numer.bits() as i64;
    let db = denom.bits() as i64;
    let shift = (nb.max(db) - 900).max(0) as u64;
    let n = (numer >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (denom >> shift).to_f64().unwrap_or(f64::NAN);
    n / d
}

/// Natural log of a positive rational, usable far outside the `f64` range.
pub fn rat_ln(r: &Rat) -> f64 {
    debug_assert!(r.is_positive());
    big_ln(r.numer()) - big_ln(r.denom())
}

fn big_ln(x: &BigInt) -> f64 {
    debug_assert!(x.sign() == Sign::Plus);
    let bits = x.bits();
    if bits <= 52 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 52;
    let top = (x >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * core::f64::consts::LN_2
}

/// `n!` as a big integer.
pub fn factorial(n: usize) -> BigInt {
    let mut acc = BigUint::one();
    for k in 2..=n {
        acc *= BigUint::from(k);
    }
    BigInt::from(acc)
}

/// Binomial coefficient `C(n, k)` as a big integer.
pub fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for i in 0..k {
        num *= BigUint::from(n - i);
        den *= BigUint::from(i + 1);
    }
    BigInt::from(num / den)
}

/// Rational `p / q` from machine integers.
pub fn rat(p: i64, q: i64) -> Rat {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// Rational from an integer.
pub fn rat_int(p: i64) -> Rat {
    BigRational::from_integer(BigInt::from(p))
}

/// Stirling numbers of the second kind `S(k, j)` for `j = 0..=k`.
///
/// Used to expand the power-reweighted exponential: the identity
/// `sum_i i^k y^i / i! = e^y * sum_j S(k,j) y^j` turns k-th component
/// moments of set-composites into finitely many series products.
pub fn stirling2_row(k: usize) -> Vec<BigInt> {
    let mut row: Vec<BigInt> = alloc::vec![BigInt::one()];
    for _ in 0..k {
        let mut next = alloc::vec![BigInt::zero(); row.len() + 1];
        for (j, v) in row.iter().enumerate() {
            // S(k+1, j) = j*S(k, j) + S(k, j-1)
            next[j] += BigInt::from(j) * v;
            next[j + 1] += v;
        }
        row = next;
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorials_and_binomials() {
        assert_eq!(factorial(0), BigInt::from(1));
        assert_eq!(factorial(6), BigInt::from(720));
        assert_eq!(binomial(6, 3), BigInt::from(20));
        assert_eq!(binomial(5, 0), BigInt::from(1));
        assert_eq!(binomial(3, 5), BigInt::from(0));
    }

    #[test]
    fn stirling_rows() {
        assert_eq!(stirling2_row(0), alloc::vec![BigInt::from(1)]);
        // S(3, j) = 0, 1, 3, 1
        let r3 = stirling2_row(3);
        assert_eq!(
            r3,
            alloc::vec![
                BigInt::from(0),
                BigInt::from(1),
                BigInt::from(3),
                BigInt::from(1)
            ]
        );
    }

    #[test]
    fn big_rational_to_f64_in_and_out_of_range() {
        let r = rat(1, 3);
        assert!((rat_to_f64(&r) - 1.0 / 3.0).abs() < 1e-15);
        // 10^400 / (3 * 10^400) = 1/3 but parts overflow f64.
        let big = BigInt::from(10u32).pow(400);
        let r = BigRational::new(big.clone(), big * 3);
        assert!((rat_to_f64(&r) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ln_of_huge_rational() {
        let big = BigInt::from(10u32).pow(500);
        let r = BigRational::new(big, BigInt::from(1));
        let expect = 500.0 * core::f64::consts::LN_10;
        assert!((rat_ln(&r) - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn approx_propagation() {
        let a = Approx::new(2.0, 1e-12);
        let b = Approx::new(3.0, 1e-12);
        let c = a * b;
        assert!((c.value - 6.0).abs() < 1e-14);
        assert!(c.err < 1e-10 && c.err >= 5e-12);
        let e = Approx::new(1.0, 1e-13).exp();
        assert!((e.value - core::f64::consts::E).abs() < 1e-14);
        assert!(e.err < 1e-11);
        assert!(Approx::new(0.5, 1e-3).contains(0.5005));
        assert!(Approx::new(0.5, 1e-3).certainly_above(0.49));
    }
}
