//! Integrates the periodic heat equation from cos(πx) + 1 and compares the
//! seminorm with the separated solution.

use std::f64::consts::PI;

use pie_core::convert::{reaction_diffusion, Trajectory};
use pie_core::pde_to_pie;
use pie_core::spectral::{integrate_pie, DiscretizedPencil};

fn main() -> pie_core::Result<()> {
    let pie = pde_to_pie(&reaction_diffusion::<f64>(0.0, true))?;
    let pencil = DiscretizedPencil::new(&pie, &Trajectory::T0F, 16)?;
    let v = pencil.fit_state(|x| vec![1.0 + (PI * x).cos()])?;
    let traj = integrate_pie(&pencil, &v, 0.3, 1e-4)?;
    println!("{:>6} {:>12} {:>12} {:>10}", "t", "seminorm", "exact", "norm");
    for i in (0..traj.times.len()).step_by(500) {
        let t = traj.times[i];
        println!(
            "{t:6.3} {:12.6e} {:12.6e} {:10.6}",
            traj.seminorms[i],
            (-PI * PI * t).exp(),
            traj.norms[i]
        );
    }
    println!("fitted rate {:.5} (π² = {:.5})", traj.fitted_rate(0.1, 0.3).unwrap(), PI * PI);
    Ok(())
}
