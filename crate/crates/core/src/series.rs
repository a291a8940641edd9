//! Truncated formal power series with exact rational coefficients.
//!
//! A [`Series`] stores the coefficients of `z^0 .. z^N` for a truncation
//! order `N`. Coefficients beyond `N` are *unknown*, never implicitly zero;
//! callers that know a series is a polynomial state the zeros explicitly via
//! [`Series::with_truncation`]. All arithmetic is exact; generating functions
//! are stored EGF-normalized (the coefficient of `z^n` is `w_n / n!`).

use alloc::vec;
use alloc::vec::Vec;

use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{precondition, Result};
use crate::numeric::{factorial, rat_int};

/// Exact rational scalar used for every coefficient.
pub type Rat = BigRational;

/// Dense truncated power series; index `n` holds the coefficient of `z^n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Series {
    coeffs: Vec<Rat>,
}

/// The arithmetic progression `min_index + span * Z` carrying the nonzero
/// coefficients of a series, as detected on the computed window.
///
/// `span` is the gcd of all pairwise differences of nonzero indices, hence
/// maximal for the window; `offset` is `min_index % span` reduced to
/// `0 <= offset < span`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SupportLattice {
    pub span: usize,
    pub offset: usize,
    pub min_index: usize,
}

impl Series {
    /// Build a series from explicit coefficients (`coeffs[n]` is `[z^n]`).
    /// The vector length fixes the truncation order at `len - 1`.
    pub fn from_coeffs(coeffs: Vec<Rat>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(precondition("series must have at least one coefficient"));
        }
        Ok(Series { coeffs })
    }

    /// Convenience constructor from machine integers.
    pub fn from_i64s(coeffs: &[i64]) -> Self {
        Series {
            coeffs: coeffs.iter().map(|&c| rat_int(c)).collect(),
        }
    }

    /// The zero series truncated at order `n`.
    pub fn zero(n: usize) -> Self {
        Series {
            coeffs: vec![Rat::zero(); n + 1],
        }
    }

    /// The constant-one series truncated at order `n`.
    pub fn one(n: usize) -> Self {
        Self::monomial(0, Rat::one(), n)
    }

    /// The series `z` truncated at order `n`.
    pub fn z(n: usize) -> Self {
        Self::monomial(1, Rat::one(), n)
    }

    /// `c * z^k` truncated at order `n` (requires `k <= n`).
    pub fn monomial(k: usize, c: Rat, n: usize) -> Self {
        let mut coeffs = vec![Rat::zero(); n + 1];
        coeffs[k] = c;
        Series { coeffs }
    }

    /// The exponential series `sum z^k / k!` truncated at order `n`.
    pub fn exp_z(n: usize) -> Self {
        let coeffs = (0..=n)
            .map(|k| Rat::new(1.into(), factorial(k)))
            .collect();
        Series { coeffs }
    }

    pub fn truncation(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient of `z^n`; panics beyond the truncation order.
    pub fn coeff(&self, n: usize) -> &Rat {
        &self.coeffs[n]
    }

    pub fn get(&self, n: usize) -> Option<&Rat> {
        self.coeffs.get(n)
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.coeffs
    }

    pub fn set_coeff(&mut self, n: usize, c: Rat) {
        self.coeffs[n] = c;
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// All coefficients nonnegative (the weighted-species invariant).
    pub fn is_nonnegative(&self) -> bool {
        self.coeffs.iter().all(|c| !c.is_negative())
    }

    pub fn max_nonzero_index(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| !c.is_zero())
    }

    pub fn min_nonzero_index(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    /// Lower the truncation order to `n`.
    pub fn truncated(&self, n: usize) -> Series {
        let keep = (n + 1).min(self.coeffs.len());
        Series {
            coeffs: self.coeffs[..keep].to_vec(),
        }
    }

    /// Raise the truncation order to `n`, asserting that the appended
    /// coefficients are genuinely zero (use only for polynomials).
    pub fn with_truncation(&self, n: usize) -> Series {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(n + 1, Rat::zero());
        Series { coeffs }
    }

    /// Zero out every coefficient of index greater than `m` (the generating
    /// function of the same objects restricted to size at most `m`).
    pub fn zero_beyond(&self, m: usize) -> Series {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut().skip(m + 1) {
            *c = Rat::zero();
        }
        out
    }

    pub fn add(&self, other: &Series) -> Series {
        let n = self.truncation().min(other.truncation());
        let coeffs = (0..=n)
            .map(|i| &self.coeffs[i] + &other.coeffs[i])
            .collect();
        Series { coeffs }
    }

    pub fn sub(&self, other: &Series) -> Series {
        let n = self.truncation().min(other.truncation());
        let coeffs = (0..=n)
            .map(|i| &self.coeffs[i] - &other.coeffs[i])
            .collect();
        Series { coeffs }
    }

    /// Cauchy product truncated to the smaller truncation order.
    pub fn mul(&self, other: &Series) -> Series {
        let n = self.truncation().min(other.truncation());
        let mut coeffs = vec![Rat::zero(); n + 1];
        for (i, a) in self.coeffs.iter().enumerate().take(n + 1) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(n + 1 - i) {
                if b.is_zero() {
                    continue;
                }
                coeffs[i + j] += a * b;
            }
        }
        Series { coeffs }
    }

    pub fn scale(&self, c: &Rat) -> Series {
        Series {
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    /// Add a constant to the `z^0` coefficient.
    pub fn add_constant(&self, c: &Rat) -> Series {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    /// `k`-th power by repeated multiplication (truncation preserved).
    pub fn pow(&self, k: usize) -> Series {
        let n = self.truncation();
        let mut acc = Series::one(n);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Formal derivative: `[z^n] out = (n+1) [z^{n+1}] self`; truncation
    /// drops by one.
    pub fn derive(&self) -> Result<Series> {
        let n = self.truncation();
        if n < 1 {
            return Err(precondition("derivative needs truncation order >= 1"));
        }
        let coeffs = (1..=n)
            .map(|i| &self.coeffs[i] * rat_int(i as i64))
            .collect();
        Ok(Series { coeffs })
    }

    /// Formal antiderivative with prescribed constant term; truncation rises
    /// by one. Inverse of [`Series::derive`] up to the constant.
    pub fn integrate(&self, constant: Rat) -> Series {
        let n = self.truncation();
        let mut coeffs = Vec::with_capacity(n + 2);
        coeffs.push(constant);
        for i in 0..=n {
            coeffs.push(&self.coeffs[i] / rat_int(i as i64 + 1));
        }
        Series { coeffs }
    }

    /// Divide by `z` (requires zero constant term); truncation drops by one.
    pub fn div_z(&self) -> Result<Series> {
        if !self.coeffs[0].is_zero() {
            return Err(precondition("division by z needs zero constant term"));
        }
        if self.coeffs.len() < 2 {
            return Err(precondition("division by z needs truncation order >= 1"));
        }
        Ok(Series {
            coeffs: self.coeffs[1..].to_vec(),
        })
    }

    /// Multiply by `z`; truncation rises by one.
    pub fn mul_z(&self) -> Series {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(Rat::zero());
        coeffs.extend_from_slice(&self.coeffs);
        Series { coeffs }
    }

    /// Replace `[z^n]` by `f(n) * [z^n]` for every index.
    pub fn reweight(&self, f: impl Fn(usize) -> Rat) -> Series {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| c * f(n))
            .collect();
        Series { coeffs }
    }

    /// Formal exponential. Requires a zero constant term; the coefficients
    /// satisfy `n b_n = sum_{k=1}^{n} k a_k b_{n-k}`.
    pub fn exp_series(&self) -> Result<Series> {
        if !self.coeffs[0].is_zero() {
            return Err(precondition(
                "formal exp needs zero constant term (split the constant out first)",
            ));
        }
        let n = self.truncation();
        let mut b = vec![Rat::zero(); n + 1];
        b[0] = Rat::one();
        for m in 1..=n {
            let mut acc = Rat::zero();
            for k in 1..=m {
                if self.coeffs[k].is_zero() || b[m - k].is_zero() {
                    continue;
                }
                acc += rat_int(k as i64) * &self.coeffs[k] * &b[m - k];
            }
            b[m] = acc / rat_int(m as i64);
        }
        Ok(Series { coeffs: b })
    }

    /// Formal logarithm; requires constant term exactly one.
    pub fn log_series(&self) -> Result<Series> {
        if !self.coeffs[0].is_one() {
            return Err(precondition("formal log needs constant term 1"));
        }
        let n = self.truncation();
        let mut l = vec![Rat::zero(); n + 1];
        for m in 1..=n {
            let mut acc = Rat::zero();
            for k in 1..m {
                if l[k].is_zero() || self.coeffs[m - k].is_zero() {
                    continue;
                }
                acc += rat_int(k as i64) * &l[k] * &self.coeffs[m - k];
            }
            l[m] = &self.coeffs[m] - acc / rat_int(m as i64);
        }
        Ok(Series { coeffs: l })
    }

    /// Formal composition `self(inner)`; `inner` must have zero constant
    /// term. The result is truncated where both operands still determine the
    /// coefficients exactly.
    pub fn compose(&self, inner: &Series) -> Result<Series> {
        if !inner.coeffs[0].is_zero() {
            return Err(precondition("composition needs inner constant term 0"));
        }
        let inner_min = match inner.min_nonzero_index() {
            Some(d) => d,
            None => {
                // inner == 0: result is the constant term of self.
                return Ok(Series::monomial(
                    0,
                    self.coeffs[0].clone(),
                    inner.truncation(),
                ));
            }
        };
        // [z^m] self(inner) needs outer coefficients up to m / inner_min.
        let n = inner
            .truncation()
            .min(self.truncation().saturating_mul(inner_min));
        let outer_top = self.truncation().min(n);
        let inner_t = inner.truncated(n);
        let mut acc = Series::monomial(0, self.coeffs[outer_top].clone(), n);
        for i in (0..outer_top).rev() {
            acc = acc.mul(&inner_t);
            acc.coeffs[0] += &self.coeffs[i];
        }
        Ok(acc)
    }

    /// Detect the support lattice of the nonzero coefficients. Needs at
    /// least two nonzero coefficients within the truncation window.
    pub fn support_span(&self) -> Result<SupportLattice> {
        let nz: Vec<usize> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, _)| i)
            .collect();
        if nz.len() < 2 {
            return Err(precondition(
                "support lattice needs at least two nonzero coefficients",
            ));
        }
        let min_index = nz[0];
        let mut span = 0usize;
        for w in nz.windows(2) {
            span = span.gcd(&(w[1] - w[0]));
        }
        Ok(SupportLattice {
            span,
            offset: min_index % span,
            min_index,
        })
    }
}

/// Check the simply-generated-tree hypotheses on an offspring series:
/// nonnegative coefficients, positive constant term, and some positive
/// coefficient at index `>= 2`.
pub fn sgt_hypotheses(phi: &Series) -> Result<()> {
    if !phi.is_nonnegative() {
        return Err(precondition("offspring series must have nonnegative weights"));
    }
    if !phi.coeff(0).is_positive() {
        return Err(precondition("offspring series needs positive constant term"));
    }
    if !phi.coeffs().iter().skip(2).any(|c| c.is_positive()) {
        return Err(precondition(
            "offspring series needs a positive weight at some index >= 2",
        ));
    }
    Ok(())
}

/// Solve `Z = z * phi(Z)` by Lagrange inversion: `Z_n = [w^{n-1}] phi(w)^n / n`.
///
/// `phi` is taken at face value as the full weight sequence, so its
/// truncation order must cover `n - 1`. Formal solvability only needs
/// `phi_0 > 0` plus some positive coefficient at index `>= 1`; the stronger
/// branching-process hypotheses are checked separately by [`sgt_hypotheses`]
/// where the limit theorems require them.
pub fn solve_lagrange(phi: &Series, n: usize) -> Result<Series> {
    if !phi.is_nonnegative() {
        return Err(precondition("phi must have nonnegative coefficients"));
    }
    if !phi.coeff(0).is_positive() {
        return Err(precondition("phi needs positive constant term"));
    }
    if !phi.coeffs().iter().skip(1).any(|c| c.is_positive()) {
        return Err(precondition(
            "phi must have a positive coefficient at some index >= 1",
        ));
    }
    if n > 0 && phi.truncation() < n - 1 {
        return Err(precondition(alloc::format!(
            "phi truncation {} too low for requested order {} (pad explicit zeros if phi is a polynomial)",
            phi.truncation(),
            n
        )));
    }
    let mut z = Series::zero(n);
    if n == 0 {
        return Ok(z);
    }
    let window = phi.truncated(n.saturating_sub(1).max(0));
    let mut power = window.clone(); // phi^m for m = 1, 2, ...
    for m in 1..=n {
        z.set_coeff(m, &power.coeffs[m - 1] / rat_int(m as i64));
        if m < n {
            power = power.mul(&window);
        }
    }
    Ok(z)
}

/// Solve `T = z * exp(bprime(T))` for a polynomial `bprime` with zero
/// constant term, to truncation order `n`.
///
/// This is the rooted-structure fixed point of block-substitution classes.
/// It runs in `O(deg(bprime) * n^2)` coefficient operations by maintaining
/// the powers of `T` and the exponential incrementally, degree by degree,
/// and agrees coefficientwise with [`solve_lagrange`] applied to
/// `exp(bprime)`.
pub fn solve_tree_egf(bprime: &Series, n: usize) -> Result<Series> {
    if !bprime.is_nonnegative() {
        return Err(precondition("block weight series must be nonnegative"));
    }
    if !bprime.coeff(0).is_zero() {
        return Err(precondition(
            "block weight series must have zero constant term (no size-1 blocks)",
        ));
    }
    let deg = match bprime.max_nonzero_index() {
        Some(d) => d,
        None => return Err(precondition("block weight series must be nonzero")),
    };
    let mut t = vec![Rat::zero(); n + 1]; // T coefficients
    let mut s = vec![Rat::zero(); n + 1]; // bprime(T) coefficients
    let mut e = vec![Rat::zero(); n + 1]; // exp(bprime(T)) coefficients
    // powers[j][m] = [z^m] T^{j+1}
    let mut powers = vec![vec![Rat::zero(); n + 1]; deg];
    e[0] = Rat::one();
    if n >= 1 {
        t[1] = Rat::one();
    }
    for m in 1..=n {
        // T known through degree m; fill powers at degree m.
        powers[0][m] = t[m].clone();
        for j in 1..deg {
            let mut acc = Rat::zero();
            for i in j..m {
                if powers[j - 1][i].is_zero() || t[m - i].is_zero() {
                    continue;
                }
                acc += &powers[j - 1][i] * &t[m - i];
            }
            powers[j][m] = acc;
        }
        let mut sm = Rat::zero();
        for j in 1..=deg {
            let b = bprime.coeff(j);
            if b.is_zero() || powers[j - 1][m].is_zero() {
                continue;
            }
            sm += b * &powers[j - 1][m];
        }
        s[m] = sm;
        let mut em = Rat::zero();
        for k in 1..=m {
            if s[k].is_zero() || e[m - k].is_zero() {
                continue;
            }
            em += rat_int(k as i64) * &s[k] * &e[m - k];
        }
        e[m] = em / rat_int(m as i64);
        if m + 1 <= n {
            t[m + 1] = e[m].clone();
        }
    }
    Series::from_coeffs(t)
}

impl core::fmt::Display for Series {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if i == 0 {
                write!(f, "{c}")?;
            } else if c.is_one() {
                write!(f, "z^{i}")?;
            } else {
                write!(f, "{c}*z^{i}")?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(z^{})", self.coeffs.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat;

    #[test]
    fn mul_binomial() {
        let a = Series::from_i64s(&[1, 1, 0]);
        let sq = a.mul(&a);
        assert_eq!(sq, Series::from_i64s(&[1, 2, 1]));
    }

    #[test]
    fn add_identity() {
        let z = Series::z(4);
        let zero = Series::zero(4);
        assert_eq!(z.add(&zero), z);
    }

    #[test]
    fn derive_monomial() {
        // d/dz z^2 = 2z
        let s = Series::monomial(2, Rat::one(), 4);
        let d = s.derive().unwrap();
        assert_eq!(d, Series::from_i64s(&[0, 2, 0, 0]));
    }

    #[test]
    fn derive_exp_fixed_point() {
        let e = Series::exp_z(8);
        let d = e.derive().unwrap();
        assert_eq!(d, e.truncated(7));
    }

    #[test]
    fn integrate_one_gives_z() {
        let one = Series::one(3);
        let i = one.integrate(Rat::zero());
        assert_eq!(i, Series::from_i64s(&[0, 1, 0, 0, 0]));
    }

    #[test]
    fn integrate_derive_round_trip() {
        let s = Series::from_coeffs(vec![rat(3, 2), rat(-1, 3), rat(7, 5), rat(2, 1)]).unwrap();
        let back = s.derive().unwrap().integrate(s.coeff(0).clone());
        assert_eq!(back, s);
    }

    #[test]
    fn exp_of_z_is_exp_series() {
        let z = Series::z(10);
        assert_eq!(z.exp_series().unwrap(), Series::exp_z(10));
    }

    #[test]
    fn exp_even_support() {
        // exp(z^2/2) has support {0, 2, 4, ...}
        let s = Series::monomial(2, rat(1, 2), 9);
        let e = s.exp_series().unwrap();
        for i in (1..=9).step_by(2) {
            assert!(e.coeff(i).is_zero());
        }
        assert_eq!(e.coeff(2), &rat(1, 2));
        assert_eq!(e.coeff(4), &rat(1, 8));
    }

    #[test]
    fn exp_rejects_constant_term() {
        let s = Series::one(3);
        assert!(s.exp_series().is_err());
    }

    #[test]
    fn exp_log_round_trip() {
        let s = Series::from_coeffs(vec![Rat::zero(), rat(1, 2), rat(1, 3), rat(-2, 7)]).unwrap();
        let back = s.exp_series().unwrap().log_series().unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn compose_exp_with_z() {
        let e = Series::exp_z(8);
        let z = Series::z(8);
        assert_eq!(e.compose(&z).unwrap(), e);
    }

    #[test]
    fn compose_matches_exp_series() {
        // exp(g) via composition == exp_series(g) coefficientwise
        let g = Series::from_coeffs(vec![Rat::zero(), rat(1, 1), rat(1, 2), rat(5, 6)]).unwrap();
        let via_compose = Series::exp_z(3).compose(&g).unwrap();
        let via_exp = g.exp_series().unwrap();
        assert_eq!(via_compose, via_exp);
    }

    #[test]
    fn compose_rejects_nonzero_inner_constant() {
        let f = Series::exp_z(4);
        let g = Series::one(4);
        assert!(f.compose(&g).is_err());
    }

    #[test]
    fn lagrange_geometric_fixed_point() {
        // phi = 1 + z  =>  Z = z / (1 - z), all coefficients 1.
        let phi = Series::from_i64s(&[1, 1]).with_truncation(20);
        let z = solve_lagrange(&phi, 12).unwrap();
        assert!(z.coeff(0).is_zero());
        for m in 1..=12 {
            assert!(z.coeff(m).is_one(), "Z_{m} should be 1");
        }
    }

    #[test]
    fn lagrange_cayley_small() {
        // phi = exp: Z_n = n^{n-1}/n!
        let z = solve_lagrange(&Series::exp_z(8), 8).unwrap();
        assert_eq!(z.coeff(1), &rat(1, 1));
        assert_eq!(z.coeff(2), &rat(1, 1));
        assert_eq!(z.coeff(3), &rat(3, 2));
        assert_eq!(z.coeff(4), &rat(8, 3));
    }

    #[test]
    fn lagrange_triangle_parity() {
        // phi = exp(w^2/2): Z_1 = 1, Z_2 = 0, Z_3 = 1/2.
        let phi = Series::monomial(2, rat(1, 2), 8).exp_series().unwrap();
        let z = solve_lagrange(&phi, 8).unwrap();
        assert_eq!(z.coeff(1), &rat(1, 1));
        assert!(z.coeff(2).is_zero());
        assert_eq!(z.coeff(3), &rat(1, 2));
        assert!(z.coeff(4).is_zero());
    }

    #[test]
    fn lagrange_rejects_bad_phi() {
        assert!(solve_lagrange(&Series::zero(4), 4).is_err());
        assert!(solve_lagrange(&Series::z(4), 4).is_err()); // phi_0 = 0
        let neg = Series::from_i64s(&[1, -1]);
        assert!(solve_lagrange(&neg, 1).is_err());
    }

    #[test]
    fn tree_solver_matches_lagrange() {
        // edge blocks: T = z e^T, the rooted-tree series
        let bprime = Series::z(16);
        let t = solve_tree_egf(&bprime, 16).unwrap();
        let z = solve_lagrange(&Series::exp_z(16), 16).unwrap();
        assert_eq!(t, z);
        // triangle blocks: T = z exp(T^2/2)
        let bprime = Series::monomial(2, rat(1, 2), 16);
        let t = solve_tree_egf(&bprime, 16).unwrap();
        let phi = Series::monomial(2, rat(1, 2), 16).exp_series().unwrap();
        let z = solve_lagrange(&phi, 16).unwrap();
        assert_eq!(t, z);
    }

    #[test]
    fn span_detection() {
        let cosh_like = Series::monomial(2, rat(1, 2), 9).exp_series().unwrap();
        let lat = cosh_like.support_span().unwrap();
        assert_eq!((lat.span, lat.offset, lat.min_index), (2, 0, 0));

        let z = solve_lagrange(&Series::exp_z(9), 9).unwrap();
        let lat = z.support_span().unwrap();
        assert_eq!((lat.span, lat.offset, lat.min_index), (1, 0, 1));

        let phi = Series::monomial(2, rat(1, 2), 9).exp_series().unwrap();
        let zt = solve_lagrange(&phi, 9).unwrap();
        let lat = zt.support_span().unwrap();
        assert_eq!((lat.span, lat.offset, lat.min_index), (2, 1, 1));
    }

    #[test]
    fn span_needs_two_nonzero() {
        assert!(Series::z(5).support_span().is_err());
        assert!(Series::zero(5).support_span().is_err());
    }

    #[test]
    fn sgt_hypotheses_check() {
        assert!(sgt_hypotheses(&Series::exp_z(4)).is_ok());
        // geometric phi = 1 + z has no weight at index >= 2
        assert!(sgt_hypotheses(&Series::from_i64s(&[1, 1]).with_truncation(4)).is_err());
    }

    #[test]
    fn zero_length_rejected() {
        assert!(Series::from_coeffs(vec![]).is_err());
    }
}
