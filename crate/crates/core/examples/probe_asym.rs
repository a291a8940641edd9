//! Dev probe: per-residue coefficient normalization for triangle cacti.

use gibbs_core::analytic::block_constants;
use gibbs_core::numeric::rat_to_f64;
use gibbs_core::series::{solve_tree_egf, Series};
use num_rational::BigRational;
use num_traits::Zero;

fn main() {
    let n = 201usize;
    let bprime = Series::monomial(2, BigRational::new(1.into(), 2.into()), 2);
    let t = solve_tree_egf(&bprime, n).unwrap();
    let c = t.div_z().unwrap().integrate(BigRational::zero());
    let a = c.exp_series().unwrap();
    let consts = block_constants(&bprime).unwrap();
    let x = consts.c_rho.value;
    let rho = consts.rho.value;
    // lattice constants for d = 2: C_0 = cosh(x), C_1 = sinh(x)
    let c0 = x.cosh();
    let c1 = x.sinh();
    println!("rho = {rho}, C(rho) = {x}, C0 = {c0}, C1 = {c1}");
    for nn in [99usize, 149, 199] {
        // n odd: representative a = 1: a_n / (rho^0 * C_0 * c_n)
        let r1 = rat_to_f64(&(a.coeff(nn) / c.coeff(nn))) / c0;
        println!("n = {nn} (odd):  a_n/(C0 c_n)            = {r1}");
    }
    for nn in [100usize, 150, 200] {
        // n even: representative a = 2: a_n / (rho^{-1} * C_1 * c_{n-1})
        let r_mine = rat_to_f64(&(a.coeff(nn) / c.coeff(nn - 1))) / (c1 / rho);
        // paper display reading with a = 0: a_n / (C_1 c_{n+1})
        let r_paper = rat_to_f64(&(a.coeff(nn) / c.coeff(nn + 1))) / c1;
        println!("n = {nn} (even): a_n/(rho^-1 C1 c_(n-1)) = {r_mine}   a_n/(C1 c_(n+1)) = {r_paper}");
    }
}
