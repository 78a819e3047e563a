//! Orthogonal matching pursuit against the exhaustive l0 oracle on planted
//! instances. With near-orthonormal dictionaries the greedy solver should
//! recover the planted support every time; the oracle proves it by trying
//! every subset.

use sparsesel::solvers::{oracle_l0, solve_omp, StoppingRule};
use sparsesel::synth::planted_instance;

fn main() {
    let (n, d, k) = (20, 15, 3);
    let instances = 50;
    let tau = 1e-3;

    println!("{instances} planted instances, n={n} rows, d={d} columns, k={k} planted atoms");
    println!();
    println!("{:>4}  {:>9}  {:<16} {:<16} {}", "seed", "coherence", "planted", "omp", "oracle");

    let mut agree_planted = 0;
    let mut agree_oracle = 0;
    for seed in 0..instances {
        let inst = planted_instance(seed, n, d, k, 0.3);
        let omp = solve_omp(&inst.dictionary, &inst.target, &StoppingRule::max_atoms(k), &[])
            .expect("omp");
        let oracle = oracle_l0(&inst.dictionary, &inst.target, tau, k, &[]).expect("oracle");
        if omp.support == inst.support {
            agree_planted += 1;
        }
        if omp.support == oracle.support {
            agree_oracle += 1;
        }
        if seed < 10 {
            println!(
                "{seed:>4}  {:>9.4}  {:<16} {:<16} {:?}",
                inst.coherence,
                format!("{:?}", inst.support),
                format!("{:?}", omp.support),
                oracle.support
            );
        }
    }
    println!("   ... ({} more not shown)", instances - 10);
    println!();
    println!("omp support == planted support: {agree_planted}/{instances}");
    println!("omp support == oracle support:  {agree_oracle}/{instances}");

    // A noise-only target with a dominant penalty: the oracle keeps the
    // support empty because every atom costs more than it saves, and pursuit
    // with a residual threshold at ||b|| stops before picking anything.
    let inst = planted_instance(1000, n, d, 0, 0.3);
    let bnorm = inst.target.dot(&inst.target).sqrt();
    let oracle = oracle_l0(&inst.dictionary, &inst.target, 10.0 * bnorm, k, &[]).expect("oracle");
    let omp = solve_omp(
        &inst.dictionary,
        &inst.target,
        &StoppingRule::both(bnorm * (1.0 + 1e-12), k),
        &[],
    )
    .expect("omp");
    println!();
    println!(
        "noise-only target, tau = 10 ||b||: oracle support {:?}, omp support {:?}",
        oracle.support, omp.support
    );
}
