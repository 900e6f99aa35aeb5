//! Acceptance gate: every headline claim the library makes, re-derived
//! end-to-end with pinned tolerances and wall-clock budgets.
//!
//! Each gate prints one PASS/FAIL line per sub-check plus a final
//! verdict line, and panics only after every sub-check has printed, so
//! a red gate still shows the full picture. Gates serialize on a shared
//! lock so the budgets are measured without contention from siblings.
//!
//! Known red: the fitted growth exponent of the small-exponent sharpness
//! functional at p = 1.25 measures 1.38 against the [1.40, 1.80] window.
//! The value is genuine — the weight constant grows affinely in N with a
//! large negative intercept at desk scale, which deflates the log-log
//! slope below its limiting value — and the gate reports it as a failure
//! rather than widening the window or changing the regressor.

use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use sharpweights::experiment::{
    default_eps_grid, default_large_p_grid, default_small_p_grid, run_hilbert_small_p,
    run_power_weight, run_sharpness_large_p, run_sharpness_small_p, ExperimentReport,
};
use sharpweights::stepfn::Exponent;
use sharpweights::suites::{
    cov_suite, duality_suite, matrix_suite, oracle_suite, sparse_suite, SuiteCheck,
};

/// One fixed seed for every randomized suite in the gate.
const SUITE_SEED: u64 = 2026;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    // A red gate poisons the lock; later gates still run.
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

struct Gate {
    name: &'static str,
    checks: usize,
    failures: Vec<String>,
}

impl Gate {
    fn new(name: &'static str) -> Self {
        Gate {
            name,
            checks: 0,
            failures: Vec::new(),
        }
    }

    fn record(&mut self, sub: &str, passed: bool, detail: &str) {
        self.checks += 1;
        let verdict = if passed { "PASS" } else { "FAIL" };
        println!("{verdict} {}::{sub} — {detail}", self.name);
        if !passed {
            self.failures.push(format!("{sub}: {detail}"));
        }
    }

    /// Record every check row of an experiment report under a label.
    fn report(&mut self, label: &str, report: &ExperimentReport) {
        for c in &report.checks {
            self.record(&format!("{label}/{}", c.name), c.passed, &c.detail);
        }
    }

    /// Record every tally of a randomized suite.
    fn suite(&mut self, checks: &[SuiteCheck]) {
        for c in checks {
            let detail = if c.passed() {
                format!(
                    "worst {:.6e} within bound {:.6e} over {} instances",
                    c.worst, c.bound, c.instances
                )
            } else {
                let witness = c.counterexample.as_deref().unwrap_or("(none captured)");
                let head: String = witness.chars().take(600).collect();
                format!(
                    "{} violations out of {}; worst {:.6e} vs bound {:.6e}; first counterexample: {head}",
                    c.violations, c.instances, c.worst, c.bound
                )
            };
            self.record(&c.name, c.passed(), &detail);
        }
    }

    fn budget(&mut self, label: &str, elapsed: Duration, cap: Duration) {
        self.record(
            &format!("{label}/runtime"),
            elapsed <= cap,
            &format!("{:.2} s (cap {} s)", elapsed.as_secs_f64(), cap.as_secs()),
        );
    }

    fn finish(self) {
        let failed = self.failures.len();
        let verdict = if failed == 0 { "PASS" } else { "FAIL" };
        println!(
            "ACCEPTANCE {verdict} {} — {}/{} sub-checks met",
            self.name,
            self.checks - failed,
            self.checks
        );
        assert!(
            self.failures.is_empty(),
            "{}: {failed} sub-check(s) unmet:\n  {}",
            self.name,
            self.failures.join("\n  ")
        );
    }
}

// ---------------------------------------------------------------------------
// scaling-law experiments
// ---------------------------------------------------------------------------

#[test]
fn gate1_small_exponent_sharpness() {
    let _lock = serial();
    let mut gate = Gate::new("small-exponent-sharpness");
    for &p in &[1.25, 1.5, 1.75] {
        let exp = Exponent::new(p).unwrap();
        let t = Instant::now();
        let rep = run_sharpness_small_p(exp, &default_small_p_grid(), false).unwrap();
        let dt = t.elapsed();
        let label = format!("p={p}");
        gate.report(&label, &rep);
        gate.budget(&label, dt, Duration::from_secs(60));
    }
    gate.finish();
}

#[test]
fn gate2_large_exponent_growth() {
    let _lock = serial();
    let mut gate = Gate::new("large-exponent-growth");
    for &p in &[2.0, 3.0] {
        let exp = Exponent::new(p).unwrap();
        let t = Instant::now();
        let rep = run_sharpness_large_p(exp, &default_large_p_grid(), false).unwrap();
        let dt = t.elapsed();
        let label = format!("p={p}");
        gate.report(&label, &rep);
        gate.budget(&label, dt, Duration::from_secs(120));
    }
    gate.finish();
}

#[test]
fn gate3_power_family_blowup() {
    let _lock = serial();
    let mut gate = Gate::new("power-family-blowup");
    let mut total = Duration::ZERO;
    for &p in &[2.0, 3.0] {
        let exp = Exponent::new(p).unwrap();
        let t = Instant::now();
        let rep = run_power_weight(exp, &default_eps_grid(), false).unwrap();
        total += t.elapsed();
        gate.report(&format!("p={p}"), &rep);
    }
    gate.budget("total", total, Duration::from_secs(30));
    gate.finish();
}

#[test]
fn gate4_hilbert_variant_sharpness() {
    let _lock = serial();
    let mut gate = Gate::new("hilbert-variant-sharpness");
    for &p in &[1.25, 1.5, 1.75] {
        let exp = Exponent::new(p).unwrap();
        let t = Instant::now();
        let rep = run_hilbert_small_p(exp, &default_small_p_grid(), false).unwrap();
        let dt = t.elapsed();
        let label = format!("p={p}");
        gate.report(&label, &rep);
        gate.budget(&label, dt, Duration::from_secs(60));
    }
    gate.finish();
}

// ---------------------------------------------------------------------------
// randomized property suites
// ---------------------------------------------------------------------------

#[test]
fn gate5_sparse_machinery_suite() {
    let _lock = serial();
    let mut gate = Gate::new("sparse-machinery-suite");
    let t = Instant::now();
    let checks = sparse_suite(SUITE_SEED, 200).unwrap();
    let dt = t.elapsed();
    gate.suite(&checks);
    gate.budget("suite", dt, Duration::from_secs(90));
    gate.finish();
}

#[test]
fn gate6_matrix_weight_suite() {
    let _lock = serial();
    let mut gate = Gate::new("matrix-weight-suite");
    let t = Instant::now();
    let checks = matrix_suite(SUITE_SEED, 50).unwrap();
    let dt = t.elapsed();
    gate.suite(&checks);
    gate.budget("suite", dt, Duration::from_secs(120));
    gate.finish();
}

#[test]
fn gate7_cov_equivalence_suite() {
    let _lock = serial();
    let mut gate = Gate::new("cov-equivalence-suite");
    let checks = cov_suite(SUITE_SEED, 100).unwrap();
    gate.suite(&checks);
    gate.finish();
}

#[test]
fn gate8_duality_identity() {
    let _lock = serial();
    let mut gate = Gate::new("duality-identity");
    let checks = duality_suite(SUITE_SEED, 100).unwrap();
    gate.suite(&checks);
    gate.finish();
}

#[test]
fn gate9_maximal_oracles() {
    let _lock = serial();
    let mut gate = Gate::new("maximal-oracles");
    let checks = oracle_suite(SUITE_SEED, 1000).unwrap();
    gate.suite(&checks);
    gate.finish();
}
