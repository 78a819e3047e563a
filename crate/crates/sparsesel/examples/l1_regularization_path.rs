//! Sweeps the l1 penalty weight gamma on one planted instance and prints how
//! the iterative soft-threshold solution thins out. Past gamma = ||Y^T b||_inf
//! the zero vector becomes optimal and the solver returns an empty support.
//! Each achieved objective is checked against exhaustive support/sign
//! enumeration, which is exact at these sizes.

use sparsesel::solvers::{solve_l1, L1Config};
use sparsesel::synth::{l1_optimum_by_enumeration, planted_instance};

fn main() {
    let inst = planted_instance(7, 12, 8, 3, 0.5);
    let d = inst.dictionary.dim();
    let gmax = (0..d)
        .map(|j| inst.dictionary.column(j).dot(&inst.target).abs())
        .fold(0.0_f64, f64::max);

    println!("planted instance: n=12, d={d}, support {:?}", inst.support);
    println!("zero-solution threshold ||Y^T b||_inf = {gmax:.4}");
    println!();
    println!(
        "{:>12} {:>8} {:>10} {:>12} {:>12} {:>10}",
        "gamma", "support", "iters", "objective", "enumerated", "gap"
    );

    for frac in [0.01, 0.02, 0.05, 0.1, 0.2, 0.4, 0.7, 0.9, 1.0, 1.1] {
        let gamma = frac * gmax;
        let cfg = L1Config {
            gamma,
            max_iterations: 200_000,
            convergence_tol: 1e-12,
            step_size: None,
        };
        let sol = solve_l1(&inst.dictionary, &inst.target, &cfg, &[]).expect("ista");
        let a = sol.augmented_vector(d).expect("densify");
        let r = inst.dictionary.data().dot(&a) - &inst.target;
        let achieved = 0.5 * r.dot(&r) + gamma * a.iter().map(|v| v.abs()).sum::<f64>();
        let best = l1_optimum_by_enumeration(&inst.dictionary, &inst.target, gamma);
        println!(
            "{:>12.5} {:>8} {:>10} {:>12.6} {:>12.6} {:>10.2e}",
            gamma,
            sol.support.len(),
            sol.iterations,
            achieved,
            best,
            achieved - best
        );
    }

    println!();
    println!("small gamma keeps all useful atoms; large gamma empties the support.");
}
