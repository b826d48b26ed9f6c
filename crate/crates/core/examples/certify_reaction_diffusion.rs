//! Certifies decay rates of the periodic reaction-diffusion equation and
//! searches for the largest one.

use std::f64::consts::PI;

use pie_core::convert::{reaction_diffusion, Trajectory};
use pie_core::lpi::{self, LpiOptions, Verdict, BISECTION_TOL};

fn main() -> pie_core::Result<()> {
    let lambda = 6.0;
    let pde = reaction_diffusion(lambda, true);
    let opts = LpiOptions::default();
    let limit = PI * PI - lambda;
    println!("analytic rate {limit:.4}");

    for alpha in [2.0, 3.8, 4.5] {
        match lpi::check_stability(&pde, &Trajectory::T0F, alpha, &opts)? {
            Verdict::Certified(c) => println!(
                "alpha {alpha}: certified (eps2 {:.2e}, residual {:.1e}, sampled max {:.1e})",
                c.eps2, c.residual, c.sampled_max
            ),
            other => println!("alpha {alpha}: {}", other.status()),
        }
    }

    let search = lpi::max_decay_rate(&pde, &Trajectory::T0F, &opts, BISECTION_TOL)?;
    println!("largest certified rate: {:?} after {} solves", search.rate, search.probes.len());
    if let Some(cert) = search.certificate {
        print!("{}", cert.to_text());
    }
    Ok(())
}
