//! Calibration sweep over the default grids: prints every band ratio,
//! slope, and floor the experiments check, with timings.

use sharpweights::experiment::*;
use sharpweights::stepfn::Exponent;

fn show(rep: &sharpweights::experiment::ExperimentReport, secs: f64) {
    println!("== {} p={} ({secs:.2}s)", rep.id, rep.exponent);
    for b in &rep.bands {
        println!("  band {}: min {:.6} max {:.6} ratio {:.4}", b.key, b.min, b.max, b.ratio);
    }
    if let Some(f) = &rep.fit {
        println!(
            "  fit ln {} vs ln {}: slope {:.4} residual {:.4}",
            f.y_key, f.x_key, f.fit.slope, f.fit.max_abs_residual
        );
    }
    for c in &rep.checks {
        println!("  [{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
    }
    for pt in &rep.points {
        let mut line = format!("    x={}", pt.x);
        for (k, v) in &pt.values {
            line.push_str(&format!(" {k}={v:.5e}"));
        }
        println!("{line}");
    }
}

fn main() {
    for pv in [1.25, 1.5, 1.75] {
        let p = Exponent::new(pv).unwrap();
        let t = std::time::Instant::now();
        let rep = run_sharpness_small_p(p, &default_small_p_grid(), false).unwrap();
        show(&rep, t.elapsed().as_secs_f64());
        let t = std::time::Instant::now();
        let rep = run_hilbert_small_p(p, &default_small_p_grid(), false).unwrap();
        show(&rep, t.elapsed().as_secs_f64());
    }
    for pv in [2.0, 3.0] {
        let p = Exponent::new(pv).unwrap();
        let t = std::time::Instant::now();
        let rep = run_sharpness_large_p(p, &default_large_p_grid(), false).unwrap();
        show(&rep, t.elapsed().as_secs_f64());
        let t = std::time::Instant::now();
        let rep = run_power_weight(p, &default_eps_grid(), false).unwrap();
        show(&rep, t.elapsed().as_secs_f64());
    }
}
