//! Converts the periodic reaction-diffusion equation to its PIE and checks
//! that the state maps invert each other on a member of the domain.

use pie_core::bcspace::BoundarySpec;
use pie_core::convert::reaction_diffusion;
use pie_core::maps::project_to_domain;
use pie_core::polymat::{Poly, PolyMat, Rational};
use pie_core::textio::{describe_constraint, write_pie};
use pie_core::{pde_to_pie, Coeff};

fn main() -> pie_core::Result<()> {
    let lambda = Rational::from_ratio(3, 1);
    let pie = pde_to_pie(&reaction_diffusion(lambda, true))?;
    println!("m = {}, n = {}", pie.m, pie.n);
    for line in describe_constraint(&pie.k) {
        println!("constraint: {line}");
    }
    println!("T1 kernel: {}", pie.maps.t1.get(0, 0));

    let bc = BoundarySpec::periodic(pie.maps.interval.clone(), 1);
    let raw = PolyMat::from_fn(1, 1, |_, _| Poly::from_terms([(4, 0, Rational::from_ratio(1, 1)), (1, 0, Rational::from_ratio(2, 3))]));
    let u = project_to_domain(&bc, &raw)?.expect("periodic projection exists");
    let (v0, v1) = pie.maps.apply_d(&u)?;
    let back = pie.maps.apply_t(&v0, &v1)?;
    println!("u      = {}", u.get(0, 0));
    println!("v0     = {}", v0.get(0, 0));
    println!("v1     = {}", v1.get(0, 0));
    println!("T(D u) = {}", back.get(0, 0));
    println!("K(D u) = {}", pie.maps.apply_k(&v0, &v1)?.get(0, 0));

    print!("\n{}", write_pie(&pie));
    Ok(())
}
