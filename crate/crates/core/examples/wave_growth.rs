//! The damped wave in `(φ, φ_t)`: the spectrum decays at rate k, but the
//! `L2 × L2` norm of a mode-n solution first grows in proportion to n, so no bounded
//! Lyapunov operator exists and the LPI is infeasible for every rate.

use std::f64::consts::PI;

use pie_core::convert::{damped_wave, Trajectory};
use pie_core::lpi::{self, LpiOptions};
use pie_core::pde_to_pie;
use pie_core::spectral::{self, integrate_pie, DiscretizedPencil};

fn main() -> pie_core::Result<()> {
    let k = 1.0;
    let pde = damped_wave(k);
    let pie = pde_to_pie(&pde)?;
    println!("spectral decay rate {:.6}", spectral::decay_rate(&pie, &Trajectory::Zero, 16)?);

    let pencil = DiscretizedPencil::new(&pie, &Trajectory::Zero, 24)?;
    for n in 1..=4 {
        let v = pencil.fit_state(|x| vec![(n as f64 * PI * x).cos(), 0.0])?;
        let traj = integrate_pie(&pencil, &v, 0.5, 1e-4)?;
        let peak = traj.norms.iter().cloned().fold(0.0, f64::max) / traj.norms[0];
        println!("mode {n}: peak norm ratio {peak:.3} (nπ = {:.3})", n as f64 * PI);
    }

    let verdict = lpi::check_stability(&pde, &Trajectory::Zero, 0.0, &LpiOptions::default())?;
    println!("LPI at alpha = 0: {}", verdict.status());
    Ok(())
}
