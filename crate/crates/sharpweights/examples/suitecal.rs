//! Calibration probe: run each randomized suite at acceptance size and
//! print per-check worst statistics with wall time, to pin the fixture
//! bounds with honest margins.

use sharpweights::suites::{
    cov_suite, duality_suite, matrix_suite, oracle_suite, sparse_suite, SuiteSizes,
};
use std::time::Instant;

fn main() {
    let sizes = SuiteSizes::default();
    let seed = 2026;
    let runs: Vec<(&str, Box<dyn Fn() -> _>)> = vec![
        (
            "sparse",
            Box::new(move || sparse_suite(seed, sizes.sparse)) as Box<dyn Fn() -> _>,
        ),
        ("matrix", Box::new(move || matrix_suite(seed, sizes.matrix))),
        ("cov", Box::new(move || cov_suite(seed, sizes.cov))),
        (
            "duality",
            Box::new(move || duality_suite(seed, sizes.duality)),
        ),
        ("oracle", Box::new(move || oracle_suite(seed, sizes.oracle))),
    ];
    for (name, run) in runs {
        let t = Instant::now();
        match run() {
            Ok(checks) => {
                let dt = t.elapsed().as_secs_f64();
                println!("== {name} ({dt:.2}s)");
                for c in checks {
                    println!(
                        "  {:<28} n={:<5} viol={:<3} worst={:.6} bound={:.6}",
                        c.name, c.instances, c.violations, c.worst, c.bound
                    );
                    if let Some(ce) = &c.counterexample {
                        let head: String = ce.chars().take(180).collect();
                        println!("    witness: {head}");
                    }
                }
            }
            Err(e) => println!("== {name} ERROR: {e}"),
        }
    }
}
