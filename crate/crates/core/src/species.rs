//! Symbolic weighted-species combinators and their compilation to
//! exponential generating functions.
//!
//! Expressions are built from weighted atoms, the set species, lattice
//! restrictions, derivatives, compositions, and a small registry of named
//! built-in classes. Compilation to a truncated EGF is exact; composites
//! with a set-family outer species take the `O(n^2)` exponential recurrence
//! rather than generic composition.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use num_traits::{Float, One, Zero};

use crate::analytic::{block_constants, eval_certified, BlockConstants};
use crate::error::{precondition, Result};
use crate::numeric::{rat_ln, Approx, EPS};
use crate::series::{Rat, Series, SupportLattice};

/// Built-in structure classes that samplers can realize explicitly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NamedClass {
    /// Unrooted labelled trees (the connected objects of forests).
    CayleyTree,
    /// Rooted labelled trees.
    RootedCayleyTree,
    /// Connected graphs all of whose blocks are triangles.
    TriangleCactus,
}

impl NamedClass {
    pub fn from_id(id: &str) -> Option<NamedClass> {
        match id {
            "cayley_tree" => Some(NamedClass::CayleyTree),
            "rooted_cayley_tree" => Some(NamedClass::RootedCayleyTree),
            "triangle_cactus" => Some(NamedClass::TriangleCactus),
            _ => None,
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            NamedClass::CayleyTree => "cayley_tree",
            NamedClass::RootedCayleyTree => "rooted_cayley_tree",
            NamedClass::TriangleCactus => "triangle_cactus",
        }
    }

    /// The block weight series `B'` of the underlying rooted fixed point.
    pub(crate) fn bprime(&self) -> Series {
        match self {
            NamedClass::CayleyTree | NamedClass::RootedCayleyTree => Series::z(1),
            NamedClass::TriangleCactus => Series::monomial(2, Rat::new(1.into(), 2.into()), 2),
        }
    }

    /// Exact EGF to truncation order `n`.
    pub fn egf(&self, n: usize) -> Result<Series> {
        let t = crate::series::solve_tree_egf(&self.bprime(), n + 1)?;
        match self {
            NamedClass::RootedCayleyTree => Ok(t.truncated(n)),
            NamedClass::CayleyTree | NamedClass::TriangleCactus => {
                Ok(t.div_z()?.integrate(Rat::zero()).truncated(n))
            }
        }
    }

    /// Radius and boundary constants of the class.
    pub fn constants(&self) -> BlockConstants {
        // bprime is a fixed small polynomial; the bisection cannot fail.
        block_constants(&self.bprime()).expect("built-in class constants")
    }

    /// Normalizing value of the EGF at `y`, certified. Handles the boundary
    /// point `y = rho` through the fixed-point identities rather than
    /// summation (coefficient tails at the radius decay only polynomially).
    pub fn egf_norm_at(&self, egf: &Series, y: f64) -> Result<Approx> {
        let consts = self.constants();
        let rho = consts.rho.value;
        if y > rho + consts.rho.err + 1e-9 {
            return Err(precondition(format!(
                "parameter {y} above radius {rho} of {}",
                self.id()
            )));
        }
        let near_rho = (y - rho).abs() <= 1e-9;
        match self {
            NamedClass::CayleyTree | NamedClass::TriangleCactus => {
                if near_rho {
                    // |C(y) - C(rho)| <= C'(rho) |y - rho| for y <= rho
                    let lip = consts.cprime_rho.value + consts.cprime_rho.err;
                    Ok(consts.c_rho.with_err_at_least(
                        consts.c_rho.err + lip * (y - rho).abs() + 4.0 * EPS,
                    ))
                } else {
                    eval_certified(egf, y, f64::INFINITY)
                }
            }
            NamedClass::RootedCayleyTree => {
                if near_rho {
                    // Z(rho) = tau; the derivative blows up at rho, so use
                    // the square-root singularity envelope for the error.
                    let delta = (y - rho).abs() / rho;
                    Ok(consts
                        .tau
                        .with_err_at_least(consts.tau.err + 2.5 * delta.sqrt() + 4.0 * EPS))
                } else {
                    eval_certified(egf, y, f64::INFINITY)
                }
            }
        }
    }
}

/// A weighted-species expression.
#[derive(Clone, Debug, PartialEq)]
pub enum SpeciesExpr {
    /// Weighted atoms: the weight sequence is the EGF itself, taken as a
    /// polynomial (absent coefficients are genuine zeros).
    Atom(Series),
    /// The set species, `SET(z) = exp(z)`.
    Set,
    /// Restriction of the child to objects whose size lies in
    /// `residue + modulus * Z`.
    Restrict {
        child: Box<SpeciesExpr>,
        residue: usize,
        modulus: usize,
    },
    /// Derived species: one distinguished unlabelled placeholder atom.
    Derive(Box<SpeciesExpr>),
    /// Partition composite: outer structure on the set of inner components.
    Compose(Box<SpeciesExpr>, Box<SpeciesExpr>),
    /// A registered structure class.
    Named(NamedClass),
}

impl SpeciesExpr {
    pub fn set() -> Self {
        SpeciesExpr::Set
    }

    pub fn atom(weights: Series) -> Self {
        SpeciesExpr::Atom(weights)
    }

    pub fn named(class: NamedClass) -> Self {
        SpeciesExpr::Named(class)
    }

    pub fn derive(self) -> Self {
        SpeciesExpr::Derive(Box::new(self))
    }

    pub fn compose(outer: SpeciesExpr, inner: SpeciesExpr) -> Self {
        SpeciesExpr::Compose(Box::new(outer), Box::new(inner))
    }

    /// Labelled forests: sets of unrooted labelled trees.
    pub fn forest() -> Self {
        Self::compose(Self::set(), Self::named(NamedClass::CayleyTree))
    }
}

/// Wrap an expression in a size-lattice restriction (`restrict_size`).
/// The residue is reduced modulo the modulus.
pub fn restrict_size(e: SpeciesExpr, residue: usize, modulus: usize) -> Result<SpeciesExpr> {
    if modulus == 0 {
        return Err(precondition("restriction modulus must be >= 1"));
    }
    Ok(SpeciesExpr::Restrict {
        child: Box::new(e),
        residue: residue % modulus,
        modulus,
    })
}

/// Compile an expression to its exact EGF, truncated at order `n`.
pub fn egf(e: &SpeciesExpr, n: usize) -> Result<Series> {
    match e {
        SpeciesExpr::Atom(w) => Ok(if w.truncation() >= n {
            w.truncated(n)
        } else {
            w.with_truncation(n)
        }),
        SpeciesExpr::Set => Ok(Series::exp_z(n)),
        SpeciesExpr::Restrict {
            child,
            residue,
            modulus,
        } => {
            let inner = egf(child, n)?;
            Ok(restrict_series(&inner, *residue, *modulus))
        }
        SpeciesExpr::Derive(child) => egf(child, n + 1)?.derive(),
        SpeciesExpr::Compose(outer, inner) => {
            let g = egf(inner, n)?;
            compose_egf(outer, &g)
        }
        SpeciesExpr::Named(class) => class.egf(n),
    }
}

/// Zero out every coefficient with index outside `residue + modulus * Z`.
pub fn restrict_series(s: &Series, residue: usize, modulus: usize) -> Series {
    let mut out = s.clone();
    for i in 0..=s.truncation() {
        if i % modulus != residue {
            out.set_coeff(i, Rat::zero());
        }
    }
    out
}

/// `sum_{k = residue mod modulus} g^k / k!`, exact to the truncation of `g`.
/// Requires `g` to have zero constant term so only finitely many powers
/// contribute to each coefficient.
pub fn residue_exp(g: &Series, residue: usize, modulus: usize) -> Result<Series> {
    if !g.coeff(0).is_zero() {
        return Err(precondition(
            "residue-restricted exponential needs zero constant term",
        ));
    }
    let n = g.truncation();
    let mut acc = Series::zero(n);
    if residue == 0 {
        acc.set_coeff(0, Rat::one());
    }
    let mut power = Series::one(n); // g^k / k!
    for k in 1..=n {
        power = power.mul(g).scale(&Rat::new(1.into(), k.into()));
        if power.is_zero() {
            break;
        }
        if k % modulus == residue {
            acc = acc.add(&power);
        }
    }
    Ok(acc)
}

/// EGF of `outer(g)` for a composed expression, using the exponential
/// recurrence when the outer species is set-like (plain, restricted, or
/// derived set) and generic formal composition otherwise.
pub fn compose_egf(outer: &SpeciesExpr, g: &Series) -> Result<Series> {
    if !g.coeff(0).is_zero() {
        return Err(precondition(
            "composition needs an inner class without size-0 objects",
        ));
    }
    match outer {
        SpeciesExpr::Set => g.exp_series(),
        SpeciesExpr::Restrict {
            child,
            residue,
            modulus,
        } if **child == SpeciesExpr::Set => residue_exp(g, *residue, *modulus),
        SpeciesExpr::Derive(inner) => match &**inner {
            SpeciesExpr::Set => g.exp_series(),
            SpeciesExpr::Restrict {
                child,
                residue,
                modulus,
            } if **child == SpeciesExpr::Set => {
                // (SET_a)' keeps component counts in a - 1 mod modulus
                let shifted = (residue + modulus - 1) % modulus;
                residue_exp(g, shifted, *modulus)
            }
            other => egf(&SpeciesExpr::Derive(Box::new(other.clone())), g.truncation())?.compose(g),
        },
        other => egf(other, g.truncation())?.compose(g),
    }
}

/// The size distribution induced by the Boltzmann measure at parameter `y`:
/// `Pr{size = n} = [z^n]egf * y^n / egf(y)` for `n` up to the truncation
/// order, with the remaining mass reported as `tail`.
#[derive(Clone, Debug)]
pub struct SizeLaw {
    pub probs: Vec<f64>,
    pub tail: f64,
    /// Bound on the absolute error of each reported probability.
    pub err: f64,
    pub lattice: Option<SupportLattice>,
}

impl SizeLaw {
    /// Build from an explicit EGF and certified normalizing value.
    pub fn from_series(egf: &Series, y: f64, norm: Approx) -> Result<SizeLaw> {
        if !(y >= 0.0) {
            return Err(precondition("Boltzmann parameter must be nonnegative"));
        }
        if !(norm.value.is_finite() && norm.value > 0.0) {
            return Err(precondition("normalizing value must be positive and finite"));
        }
        let ln_norm = norm.value.ln();
        let ln_y = if y > 0.0 { y.ln() } else { f64::NEG_INFINITY };
        let mut probs = Vec::with_capacity(egf.truncation() + 1);
        let mut sum = 0.0;
        for (i, c) in egf.coeffs().iter().enumerate() {
            let p = if c.is_zero() || (y == 0.0 && i > 0) {
                0.0
            } else {
                // log-space guards against overflow of huge coefficients
                (rat_ln(c) + i as f64 * ln_y - ln_norm).exp()
            };
            probs.push(p);
            sum += p;
        }
        let rel = norm.err / norm.value + (egf.truncation() as f64 + 4.0) * 4.0 * EPS;
        let tail = (1.0 - sum).max(0.0);
        if sum > 1.0 + rel + 1e-9 {
            return Err(precondition(format!(
                "size law masses sum to {sum} > 1 beyond the tracked error",
            )));
        }
        Ok(SizeLaw {
            probs,
            tail,
            err: rel,
            lattice: egf.support_span().ok(),
        })
    }
}

/// Size law of an expression at parameter `y` (see [`SizeLaw`]).
pub fn size_law(e: &SpeciesExpr, y: f64, n: usize) -> Result<SizeLaw> {
    let series = egf(e, n)?;
    let norm = boltzmann_norm(e, &series, y)?;
    SizeLaw::from_series(&series, y, norm)
}

/// Certified value of the EGF of `e` at `y`, used as a Boltzmann
/// normalizer. Named classes route boundary points through their
/// fixed-point constants; polynomial atoms are summed exactly; everything
/// else needs a certifiable geometric tail.
pub fn boltzmann_norm(e: &SpeciesExpr, series: &Series, y: f64) -> Result<Approx> {
    if !(y >= 0.0) {
        return Err(precondition("Boltzmann parameter must be nonnegative"));
    }
    match e {
        SpeciesExpr::Atom(w) => {
            // polynomial: exact partial sum
            crate::analytic::eval_at(w, y, crate::analytic::TailMode::Truncate)
        }
        SpeciesExpr::Set => Ok(Approx::exact(y.exp())),
        SpeciesExpr::Restrict {
            child,
            residue,
            modulus,
        } if **child == SpeciesExpr::Set => Ok(restricted_exp_value(y, *residue, *modulus)),
        SpeciesExpr::Named(class) => class.egf_norm_at(series, y),
        SpeciesExpr::Derive(inner) if **inner == SpeciesExpr::Set => Ok(Approx::exact(y.exp())),
        SpeciesExpr::Compose(outer, inner) => {
            let inner_series = egf(inner, series.truncation())?;
            let y_inner = boltzmann_norm(inner, &inner_series, y)?;
            let outer_series = egf(outer, series.truncation())?;
            let v = boltzmann_norm(outer, &outer_series, y_inner.value)?;
            // first-order sensitivity to the inner normalizer error
            let douter = outer_series.derive()?;
            let slope = crate::analytic::eval_at(
                &douter,
                y_inner.value,
                crate::analytic::TailMode::GeometricBound,
            )
            .map(|a| a.value.abs() + a.err)
            .unwrap_or(f64::INFINITY);
            Ok(v.with_err_at_least(v.err + slope * y_inner.err))
        }
        _ => eval_certified(series, y, f64::INFINITY),
    }
}

/// `sum_{k = residue mod modulus} y^k / k!` with a certified truncation tail.
fn restricted_exp_value(y: f64, residue: usize, modulus: usize) -> Approx {
    let mut term = 1.0f64;
    let mut sum = 0.0f64;
    let mut k = 0usize;
    // terms decay superexponentially; this is far past the peak at k ~ y
    let kmax = (3.0 * (y.abs() + 60.0)) as usize;
    while k <= kmax {
        if k % modulus == residue {
            sum += term;
        }
        k += 1;
        term *= y / k as f64;
    }
    Approx::new(sum, term + sum.abs() * (kmax as f64) * EPS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat;

    #[test]
    fn set_egf_is_exp() {
        let s = egf(&SpeciesExpr::Set, 8).unwrap();
        assert_eq!(s, Series::exp_z(8));
    }

    #[test]
    fn derived_set_egf_is_exp() {
        let s = egf(&SpeciesExpr::Set.derive(), 8).unwrap();
        assert_eq!(s, Series::exp_z(8));
    }

    #[test]
    fn restricted_set_is_cosh() {
        let e = restrict_size(SpeciesExpr::Set, 0, 2).unwrap();
        let s = egf(&e, 6).unwrap();
        assert_eq!(s.coeff(0), &rat(1, 1));
        assert!(s.coeff(1).is_zero());
        assert_eq!(s.coeff(2), &rat(1, 2));
        assert!(s.coeff(3).is_zero());
        assert_eq!(s.coeff(4), &rat(1, 24));
        assert_eq!(s.coeff(6), &rat(1, 720));
    }

    #[test]
    fn full_modulus_restriction_is_identity() {
        let e = restrict_size(SpeciesExpr::Set, 1, 1).unwrap();
        assert_eq!(egf(&e, 6).unwrap(), Series::exp_z(6));
    }

    #[test]
    fn restriction_inside_support_is_identity() {
        let w = Series::from_i64s(&[0, 2, 0, 5]);
        let e = restrict_size(SpeciesExpr::Atom(w.clone()), 1, 2).unwrap();
        assert_eq!(egf(&e, 3).unwrap(), w);
    }

    #[test]
    fn residue_restrictions_sum_to_original() {
        let e = SpeciesExpr::forest();
        let full = egf(&e, 10).unwrap();
        let mut acc = Series::zero(10);
        for a in 0..3 {
            let r = restrict_size(e.clone(), a, 3).unwrap();
            acc = acc.add(&egf(&r, 10).unwrap());
        }
        assert_eq!(acc, full);
    }

    #[test]
    fn forest_egf_matches_exp_of_trees() {
        let forest = egf(&SpeciesExpr::forest(), 8).unwrap();
        let trees = egf(&SpeciesExpr::named(NamedClass::CayleyTree), 8).unwrap();
        assert_eq!(forest, trees.exp_series().unwrap());
    }

    #[test]
    fn compose_special_case_matches_generic() {
        let c = egf(&SpeciesExpr::named(NamedClass::CayleyTree), 9).unwrap();
        let via_special = compose_egf(&SpeciesExpr::Set, &c).unwrap();
        let via_generic = Series::exp_z(9).compose(&c).unwrap();
        assert_eq!(via_special, via_generic);
    }

    #[test]
    fn compose_rejects_size_zero_inner() {
        let e = SpeciesExpr::compose(SpeciesExpr::Set, SpeciesExpr::Set);
        assert!(egf(&e, 4).is_err());
    }

    #[test]
    fn cactus_egf_small_counts() {
        // connected triangle cacti: 1 on 3 labels, 15 on 5 labels
        let c = egf(&SpeciesExpr::named(NamedClass::TriangleCactus), 6).unwrap();
        assert_eq!(c.coeff(1), &rat(1, 1));
        assert!(c.coeff(2).is_zero());
        assert_eq!(c.coeff(3), &rat(1, 6));
        assert!(c.coeff(4).is_zero());
        assert_eq!(c.coeff(5), &rat(15, 120));
    }

    #[test]
    fn size_law_poisson() {
        let law = size_law(&SpeciesExpr::Set, 1.0, 30).unwrap();
        let e_inv = (-1.0f64).exp();
        assert!((law.probs[0] - e_inv).abs() < 1e-12);
        assert!((law.probs[1] - e_inv).abs() < 1e-12);
        assert!((law.probs[3] - e_inv / 6.0).abs() < 1e-12);
        assert!(law.tail < 1e-12);
    }

    #[test]
    fn size_law_borel_at_radius() {
        // rooted trees at rho = 1/e: Pr{size = n} = e^{-n} n^{n-1} / n!
        let rho = (-1.0f64).exp();
        let law = size_law(&SpeciesExpr::named(NamedClass::RootedCayleyTree), rho, 60).unwrap();
        let e1 = (-1.0f64).exp();
        assert!((law.probs[1] - e1).abs() < 1e-7);
        let borel2 = (-2.0f64).exp();
        assert!((law.probs[2] - borel2).abs() < 1e-7);
    }

    #[test]
    fn size_law_low_parameter_concentrates() {
        let law = size_law(&SpeciesExpr::named(NamedClass::CayleyTree), 1e-8, 20).unwrap();
        assert!(law.probs[1] > 1.0 - 1e-6);
    }

    #[test]
    fn size_law_respects_lattice() {
        let rho = (-0.5f64).exp();
        let law =
            size_law(&SpeciesExpr::named(NamedClass::TriangleCactus), rho * 0.9, 40).unwrap();
        for (i, p) in law.probs.iter().enumerate() {
            if i % 2 == 0 {
                assert_eq!(*p, 0.0, "even index {i} must carry no mass");
            }
        }
        let lat = law.lattice.unwrap();
        assert_eq!((lat.span, lat.offset), (2, 1));
    }

    #[test]
    fn named_registry_round_trip() {
        for class in [
            NamedClass::CayleyTree,
            NamedClass::RootedCayleyTree,
            NamedClass::TriangleCactus,
        ] {
            assert_eq!(NamedClass::from_id(class.id()), Some(class));
        }
        assert_eq!(NamedClass::from_id("nope"), None);
    }
}
