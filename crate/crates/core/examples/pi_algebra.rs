//! Composition and adjoints of PI operators, checked against direct
//! application to a polynomial.

use pie_core::polymat::{Interval, Poly, PolyMat, Rational, Var};
use pie_core::{Coeff, Dims, PiOp};

fn q(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

fn main() -> pie_core::Result<()> {
    let iv = Interval::new(q(0, 1), q(1, 1))?;
    let d = Dims::new(0, 1);
    let (x, th) = (Poly::x(), Poly::theta());
    let one = PolyMat::from_fn(1, 1, |_, _| Poly::constant(q(1, 1)));

    // Volterra integration (v ↦ ∫_0^x v) and a multiplier by x
    let mut volterra = PiOp::zero(iv.clone(), d, d);
    volterra.r1 = one.clone();
    let mult = PiOp::multiplier(iv.clone(), PolyMat::from_fn(1, 1, |_, _| x.clone()));

    let both = mult.compose(&volterra)?;
    println!("x·∫_0^x : R1 = {}", both.r1.get(0, 0));
    let twice = volterra.compose(&volterra)?;
    println!("∫∫      : R1 = {}", twice.r1.get(0, 0));

    let v1 = PolyMat::from_fn(1, 1, |_, _| x.mul(&x));
    let direct = twice.apply_poly(&PolyMat::zeros(0, 1), &v1)?.1;
    let inner = volterra.apply_poly(&PolyMat::zeros(0, 1), &v1)?.1;
    let nested = volterra.apply_poly(&PolyMat::zeros(0, 1), &inner)?.1;
    println!("∫∫ x² = {} (nested {})", direct.get(0, 0), nested.get(0, 0));

    let adj = volterra.adjoint();
    println!("adjoint of ∫_0^x: R2 = {} (∫_x^1)", adj.r2.get(0, 0));
    let w = PolyMat::from_fn(1, 1, |_, _| Poly::constant(q(1, 1)).sub(&x));
    let lhs = inner.transpose().mul(&w)?.integrate(Var::X, &iv.lower(), &iv.upper())?;
    let av = adj.apply_poly(&PolyMat::zeros(0, 1), &w)?.1;
    let rhs = v1.transpose().mul(&av)?.integrate(Var::X, &iv.lower(), &iv.upper())?;
    println!("<Av, w> = {}, <v, A*w> = {}", lhs.get(0, 0), rhs.get(0, 0));

    let k = PolyMat::from_fn(1, 1, |_, _| x.sub(&th));
    let mut kernel = PiOp::zero(iv, d, d);
    kernel.r1 = k;
    let rev = mult.compose(&kernel)?.adjoint();
    let expect = kernel.adjoint().compose(&mult.adjoint())?;
    println!("(AB)* = B*A*: {}", rev == expect);
    Ok(())
}
