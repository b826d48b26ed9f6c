//! Leading eigenvalues of the discretized PIE for the bundled systems.

use pie_core::specfile;
use pie_core::spectral::{constrained_spectrum, DiscretizedPencil};
use pie_core::pde_to_pie;

fn main() -> pie_core::Result<()> {
    for (name, _) in specfile::BUNDLED {
        let spec = specfile::bundled(name).expect("bundled");
        let pie = pde_to_pie(&spec.numeric()?)?;
        let s = spec.trajectory(&pie);
        let spectrum = constrained_spectrum(&DiscretizedPencil::new(&pie, &s, 16)?)?;
        println!("{name}: decay rate {:.6}", spectrum.decay_rate()?);
        for m in spectrum.modes.iter().take(6) {
            let tag = if m.visibility > 1e-8 { "" } else { " (hidden by the seminorm)" };
            println!("  {:>12.6} {:+.6}i{tag}", m.value.re, m.value.im);
        }
    }
    Ok(())
}
