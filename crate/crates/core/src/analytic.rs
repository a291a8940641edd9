//! Numeric evaluation of series and radius/tilt-point estimation.
//!
//! Coefficients stay exact until the last moment; every float that leaves
//! this module carries an explicit error bound. Tail certification in
//! geometric mode extrapolates the observed coefficient-ratio bound past the
//! truncation window, which is valid for series whose term ratios at the
//! evaluation point are eventually non-increasing (every series this crate
//! produces from nonnegative weights with a log-concave tail behaves this
//! way; series where the observed ratios still grow are rejected rather
//! than guessed at).

use alloc::format;
use alloc::vec::Vec;

use num_traits::{Float, One, Signed, Zero};

use crate::error::{precondition, uncertified, Result};
use crate::numeric::{rat_to_f64, Approx, EPS};
use crate::series::{solve_lagrange, Rat, Series};

/// Tail handling for [`eval_at`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailMode {
    /// Sum the stored window only; the reported bound covers rounding alone,
    /// so this treats the series as a polynomial with known zero tail.
    Truncate,
    /// Partial sum plus a certified geometric bound on the discarded tail.
    GeometricBound,
}

/// How a radius estimate was obtained.
#[derive(Clone, Debug, PartialEq)]
pub enum RadiusInfo {
    /// The tilt equation `tau phi'(tau) = phi(tau)` has a root inside the
    /// certifiable evaluation range; `rho = tau / phi(tau)`.
    Critical { rho: Approx, tau: Approx },
    /// No root was bracketed; `rho` comes from late-window coefficient
    /// ratios of the tree series, with the observed spread as a heuristic
    /// (not certified) error bound. `tau` is the partial sum of the tree
    /// series at `rho` when that sum is certifiable, otherwise `None`.
    RatioFallback { rho: Approx, tau: Option<Approx> },
    /// Neither path produced an estimate.
    Undetermined { reason: alloc::string::String },
}

impl RadiusInfo {
    pub fn rho(&self) -> Option<Approx> {
        match self {
            RadiusInfo::Critical { rho, .. } => Some(*rho),
            RadiusInfo::RatioFallback { rho, .. } => Some(*rho),
            RadiusInfo::Undetermined { .. } => None,
        }
    }

    pub fn tau(&self) -> Option<Approx> {
        match self {
            RadiusInfo::Critical { tau, .. } => Some(*tau),
            RadiusInfo::RatioFallback { tau, .. } => *tau,
            RadiusInfo::Undetermined { .. } => None,
        }
    }

    pub fn critical(&self) -> bool {
        matches!(self, RadiusInfo::Critical { .. })
    }
}

/// Evaluate a series at `x >= 0` with the requested tail handling.
pub fn eval_at(series: &Series, x: f64, mode: TailMode) -> Result<Approx> {
    if !(x >= 0.0) {
        return Err(precondition("evaluation point must be nonnegative"));
    }
    let mut sum = 0.0f64;
    let mut abs_sum = 0.0f64;
    let mut xn = 1.0f64;
    let mut terms: Vec<f64> = Vec::with_capacity(series.truncation() + 1);
    for c in series.coeffs() {
        let term = if c.is_zero() { 0.0 } else { rat_to_f64(c) * xn };
        terms.push(term);
        sum += term;
        abs_sum += term.abs();
        xn *= x;
    }
    let rounding = abs_sum * EPS * (series.truncation() as f64 + 2.0);
    match mode {
        TailMode::Truncate => Ok(Approx::new(sum, rounding)),
        TailMode::GeometricBound => {
            let tail = geometric_tail_bound(&terms)?;
            Ok(Approx::new(sum, rounding + tail))
        }
    }
}

/// Certified bound on the dropped tail, from the observed per-lattice-step
/// term ratios over the trailing window.
fn geometric_tail_bound(terms: &[f64]) -> Result<f64> {
    let nz: Vec<usize> = terms
        .iter()
        .enumerate()
        .filter(|(_, t)| **t != 0.0)
        .map(|(i, _)| i)
        .collect();
    if nz.is_empty() {
        return Ok(0.0);
    }
    if nz.len() == 1 {
        return Err(uncertified(
            "geometric tail bound needs at least two nonzero terms",
        ));
    }
    let window = 8.min(nz.len() - 1);
    let mut ratios = Vec::with_capacity(window);
    for w in nz[nz.len() - 1 - window..].windows(2) {
        ratios.push(terms[w[1]].abs() / terms[w[0]].abs());
    }
    let r_max = ratios.iter().cloned().fold(0.0f64, f64::max);
    let r_last = *ratios.last().unwrap();
    if r_max >= 1.0 {
        return Err(uncertified(format!(
            "observed term ratio {r_max:.6} >= 1 at the truncation window"
        )));
    }
    if r_last > r_max * (1.0 + 64.0 * EPS) && r_last > ratios[0] {
        // Ratios still growing: extrapolating the max would be a guess.
        return Err(uncertified(
            "term ratios increasing at the truncation window",
        ));
    }
    let last = terms[*nz.last().unwrap()].abs();
    Ok(last * r_max / (1.0 - r_max))
}

/// Evaluate with certified tail and verify the bound is below `need`.
pub fn eval_certified(series: &Series, x: f64, need: f64) -> Result<Approx> {
    let v = eval_at(series, x, TailMode::GeometricBound)?;
    if v.err > need {
        return Err(uncertified(format!(
            "evaluation error bound {:.3e} exceeds requested {need:.3e}",
            v.err
        )));
    }
    Ok(v)
}

/// Estimate the radius of convergence and tilt point for the fixed point
/// `Z = z phi(Z)`.
///
/// Preferred path: bracket a root of `h(t) = t phi'(t) - phi(t)` (which is
/// strictly increasing where some weight of index `>= 2` is positive) using
/// evaluations whose sign is certain under their error bounds, then bisect
/// to width `precision`; this gives `rho = tau / phi(tau)` with a certified
/// bound. Fallback: solve for `Z` and estimate `rho^d` from late-window
/// coefficient ratios `Z_n / Z_{n+d}`; the spread over the window is
/// reported as the (heuristic) error. Returns an explicit
/// [`RadiusInfo::Undetermined`] when neither path applies.
pub fn radius_and_tau(phi: &Series, precision: f64) -> Result<RadiusInfo> {
    if !phi.is_nonnegative() {
        return Err(precondition("phi must have nonnegative coefficients"));
    }
    let dphi = phi.derive()?;
    let h = |t: f64| -> Result<Approx> {
        let p = eval_at(phi, t, TailMode::GeometricBound)?;
        let dp = eval_at(&dphi, t, TailMode::GeometricBound)?;
        Ok(dp * t - p)
    };
    // Expand t geometrically while h stays certifiably negative.
    let mut lo = 0.0f64;
    let mut hi: Option<f64> = None;
    let mut t = 1e-3;
    for _ in 0..120 {
        match h(t) {
            Ok(v) if v.certainly_below(0.0) => {
                lo = t;
                t *= 1.5;
            }
            Ok(v) if v.certainly_above(0.0) => {
                hi = Some(t);
                break;
            }
            _ => break, // sign uncertain or tail not certifiable at this t
        }
    }
    if let Some(mut hi) = hi {
        let mut width = hi - lo;
        while width > precision {
            let mid = 0.5 * (lo + hi);
            match h(mid) {
                Ok(v) if v.certainly_below(0.0) => lo = mid,
                Ok(v) if v.certainly_above(0.0) => hi = mid,
                _ => break, // cannot certify further; report achieved width
            }
            width = hi - lo;
        }
        let tau = Approx::new(0.5 * (lo + hi), 0.5 * width + EPS);
        let phi_tau = eval_at(phi, tau.value, TailMode::GeometricBound)?;
        let dphi_tau = eval_at(&dphi, tau.value, TailMode::GeometricBound)?;
        // rho = tau / phi(tau); d(rho)/d(tau) = (phi - tau phi') / phi^2 and
        // the bracket pins h = tau phi' - phi near 0, so propagate directly.
        let rho_val = tau.value / phi_tau.value;
        let drho_dtau = (phi_tau.value - tau.value * dphi_tau.value) / (phi_tau.value * phi_tau.value);
        let rho_err = drho_dtau.abs() * tau.err
            + tau.value * phi_tau.err / (phi_tau.value * phi_tau.value)
            + rho_val.abs() * 4.0 * EPS;
        return Ok(RadiusInfo::Critical {
            rho: Approx::new(rho_val, rho_err),
            tau,
        });
    }
    // Ratio fallback on the solved tree series.
    let n = phi.truncation() + 1;
    let z = match solve_lagrange(phi, n) {
        Ok(z) => z,
        Err(e) => {
            return Ok(RadiusInfo::Undetermined {
                reason: format!("no bracketable root and Lagrange fallback failed: {e}"),
            })
        }
    };
    let lat = match z.support_span() {
        Ok(l) => l,
        Err(e) => {
            return Ok(RadiusInfo::Undetermined {
                reason: format!("no bracketable root and fallback span failed: {e}"),
            })
        }
    };
    let d = lat.span.max(1);
    let mut ratios: Vec<f64> = Vec::new();
    let mut idx = lat.min_index;
    while idx + d <= z.truncation() {
        let a = z.coeff(idx);
        let b = z.coeff(idx + d);
        if !a.is_zero() && !b.is_zero() {
            ratios.push(rat_to_f64(&(a / b)));
        }
        idx += d;
    }
    if ratios.len() < 4 {
        return Ok(RadiusInfo::Undetermined {
            reason: "too few lattice coefficients for a ratio window".into(),
        });
    }
    let window = &ratios[ratios.len() - ratios.len().min(8)..];
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    let spread = window
        .iter()
        .map(|r| (r - mean).abs())
        .fold(0.0f64, f64::max);
    if !(mean > 0.0) || spread > 0.5 * mean {
        return Ok(RadiusInfo::Undetermined {
            reason: format!("ratio window did not settle (mean {mean:.3e}, spread {spread:.3e})"),
        });
    }
    let rho = Approx::new(
        mean.powf(1.0 / d as f64),
        (spread / mean + EPS) * mean.powf(1.0 / d as f64) / d as f64 + EPS,
    );
    let tau = eval_at(&z, rho.value, TailMode::GeometricBound).ok();
    Ok(RadiusInfo::RatioFallback { rho, tau })
}

/// Boundary constants of a block-substitution class with polynomial block
/// weight series `bprime`.
///
/// The rooted series `T = z exp(bprime(T))` is critical at `z = rho` with
/// tilt point `tau = T(rho)`. For `phi = exp(bprime)` the tilt equation
/// `tau phi'(tau) = phi(tau)` reduces to the polynomial equation
/// `tau * bprime'(tau) = 1`, whose unique positive root is bisected with
/// exact rational sign evaluations, so the reported bounds are certified.
/// The connected-series value at the radius comes from the exact primitive
/// identity `C(rho) = tau - tau bprime(tau) + B(tau)` with `B` the
/// antiderivative of `bprime`; differentiating it back gives `C' = T/z`,
/// which the tests check coefficientwise.
#[derive(Clone, Debug)]
pub struct BlockConstants {
    pub tau: Approx,
    /// Set when the bisection lands on an exact rational root.
    pub tau_exact: Option<Rat>,
    pub rho: Approx,
    /// `C(rho)`, the connected series at its radius.
    pub c_rho: Approx,
    /// `C'(rho) = phi(tau) = tau / rho`.
    pub cprime_rho: Approx,
    /// `A(rho) = exp(C(rho))`.
    pub a_rho: Approx,
}

/// Evaluate a polynomial (series taken literally) at a rational point.
pub fn poly_eval_rat(poly: &Series, x: &Rat) -> Rat {
    let mut acc = Rat::zero();
    for c in poly.coeffs().iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// Evaluate a polynomial at an interval value with first-order error
/// propagation through Horner's scheme.
pub fn poly_eval_approx(poly: &Series, x: Approx) -> Approx {
    let mut acc = Approx::zero();
    for c in poly.coeffs().iter().rev() {
        acc = acc * x + Approx::exact(rat_to_f64(c));
    }
    acc
}

/// Compute [`BlockConstants`] for a polynomial block weight series with
/// nonnegative coefficients, zero constant term, and at least one positive
/// coefficient.
pub fn block_constants(bprime: &Series) -> Result<BlockConstants> {
    if !bprime.is_nonnegative() {
        return Err(precondition("block weight series must be nonnegative"));
    }
    if !bprime.coeff(0).is_zero() {
        return Err(precondition("block weight series must have zero constant term"));
    }
    if bprime.max_nonzero_index().is_none() {
        return Err(precondition("block weight series must be nonzero"));
    }
    // p(t) = t * d(bprime)/dt - 1, strictly increasing for t > 0.
    let dbp = if bprime.truncation() >= 1 {
        bprime.derive()?
    } else {
        Series::zero(0)
    };
    let p = |t: &Rat| -> Rat { t * poly_eval_rat(&dbp, t) - Rat::one() };
    let mut lo = Rat::zero();
    let mut hi = Rat::one();
    let mut guard = 0;
    while !p(&hi).is_positive() {
        if p(&hi).is_zero() {
            break;
        }
        hi = &hi * Rat::from_integer(2.into());
        guard += 1;
        if guard > 200 {
            return Err(uncertified("tilt equation root not bracketable"));
        }
    }
    let mut tau_exact = None;
    if p(&hi).is_zero() {
        tau_exact = Some(hi.clone());
        lo = hi.clone();
    } else {
        for _ in 0..64 {
            let mid = (&lo + &hi) / Rat::from_integer(2.into());
            let v = p(&mid);
            if v.is_zero() {
                tau_exact = Some(mid.clone());
                lo = mid.clone();
                hi = mid;
                break;
            } else if v.is_positive() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let width = rat_to_f64(&(&hi - &lo));
    let tau_mid = rat_to_f64(&((&lo + &hi) / Rat::from_integer(2.into())));
    let tau = Approx::new(tau_mid, 0.5 * width + tau_mid.abs() * 2.0 * EPS);

    // Values of bprime and its primitive at tau; exact when tau is rational.
    let b = bprime.integrate(Rat::zero());
    let (bp_tau, b_tau) = match &tau_exact {
        Some(t) => (
            Approx::exact(rat_to_f64(&poly_eval_rat(bprime, t))),
            Approx::exact(rat_to_f64(&poly_eval_rat(&b, t))),
        ),
        None => (poly_eval_approx(bprime, tau), poly_eval_approx(&b, tau)),
    };
    // phi(tau) = exp(bprime(tau)); rho = tau / phi(tau)
    let phi_tau = bp_tau.exp();
    let rho = tau * phi_tau.recip();
    // C(rho) = tau (1 - bprime(tau)) + B(tau)
    let c_rho = tau - tau * bp_tau + b_tau;
    let a_rho = c_rho.exp();
    Ok(BlockConstants {
        tau,
        tau_exact,
        rho,
        c_rho,
        cprime_rho: phi_tau,
        a_rho,
    })
}
