//! Reads a PDE spec, reports parse errors with positions, and runs the
//! command-line front end on a bundled file.

use pie_core::cli;
use pie_core::specfile::{self, PdeSpec};

fn main() {
    let spec = specfile::bundled("dirichlet_heat").expect("bundled");
    print!("{}", spec.to_text());

    let broken = "[domain]\ndomain = 0 1\n[state]\nn = 1\n[dynamics]\nA2 = [ (0, 0, 0, x) ]\n";
    match PdeSpec::parse(broken) {
        Ok(_) => println!("unexpectedly parsed"),
        Err(e) => println!("\nrejected: {e}"),
    }

    let path = std::env::temp_dir().join("dirichlet_heat.pde");
    std::fs::write(&path, spec.to_text()).expect("writable temp dir");
    let path = path.to_string_lossy().into_owned();
    println!();
    let code = cli::run(["pie", "convert", path.as_str()], &mut std::io::stdout(), &mut std::io::stderr());
    println!("exit code {code}");
}
