//! Margin adaptation on two separable blobs. The outer loop grows the target
//! margin by the positive part of the error with decaying rate eta1/t, so the
//! margin vector only moves upward and the sparse inner solve chases it.
//! Prints the trace for a sparse inner stage and the final separation check.

use sparsesel::shk::{run_shk, separates, InnerSolver, ShkConfig};
use sparsesel::solvers::StoppingRule;
use sparsesel::synth::separable_blobs;

fn main() {
    let (y, _labels) = separable_blobs(42, 20);
    println!("{} samples, {} columns (bias included)", y.n(), y.dim());

    for (name, inner) in [
        ("dense least squares", InnerSolver::DenseLeastSquares),
        ("omp, 2 atoms", InnerSolver::Omp(StoppingRule::max_atoms(2))),
    ] {
        let cfg = ShkConfig::new(inner);
        let out = run_shk(&y, &cfg, &[]).expect("shk");
        println!();
        println!("inner stage: {name}");
        println!(
            "{:>5} {:>10} {:>12} {:>12} {:>12} {:>8}",
            "t", "eta", "||b||", "residual", "||e+||", "support"
        );
        let total = out.trace.iterates.len();
        for it in &out.trace.iterates {
            if it.t <= 5 || it.t % 50 == 0 || it.t == total {
                println!(
                    "{:>5} {:>10.5} {:>12.6} {:>12.6} {:>12.3e} {:>8}",
                    it.t, it.eta, it.margin_norm, it.residual_norm, it.eplus_norm, it.support_size
                );
            }
        }

        // The margin never shrinks in any coordinate.
        let monotone = out.trace.margins.windows(2).all(|w| {
            w[0].iter().zip(w[1].iter()).all(|(a, b)| b >= a)
        });
        let a = out.solution.augmented_vector(y.dim()).expect("densify");
        println!(
            "stopped after {total} iterations (margin-change rule: {}), margins monotone: {monotone}",
            out.converged
        );
        println!(
            "separates all {} samples: {}, support {:?}",
            y.n(),
            separates(&y, &a).expect("check"),
            out.solution.support
        );
    }
}
