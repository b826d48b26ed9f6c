//! The semidefinite solver on its own: a 2×2 matrix with unit diagonal is
//! PSD exactly when its off-diagonal entry lies in [−1, 1].

use pie_core::sdp::{solve, SdpProblem, SolveOptions};

fn main() {
    for off in [0.6, 1.2] {
        let mut p = SdpProblem::new(vec![2], 0);
        p.add_constraint(vec![(p.block_var(0, 0, 0), 1.0)], 1.0);
        p.add_constraint(vec![(p.block_var(0, 1, 1), 1.0)], 1.0);
        p.add_constraint(vec![(p.block_var(0, 0, 1), 1.0)], off);
        let sol = solve(&p, &SolveOptions::default());
        println!(
            "X12 = {off}: {} after {} iterations ({}), min eigenvalue {:.3}",
            sol.status, sol.iterations, sol.message, sol.min_block_eigenvalue
        );
        if let Some(y) = &sol.farkas {
            println!("  Farkas multipliers {y:.3?}");
        }
    }
    let mut p = SdpProblem::new(vec![2], 0);
    p.add_constraint(vec![(p.block_var(0, 0, 0), 1.0), (p.block_var(0, 1, 1), 1.0)], 2.0);
    print!("\nproblem dump:\n{}", p.dump());
}
