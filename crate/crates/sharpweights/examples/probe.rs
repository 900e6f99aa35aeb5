//! Focused probe of the small-exponent family: where the A_p sup lives,
//! half-period versus full-period search, and the per-N drift.

use sharpweights::functionals::{ap_constant, SearchConfig};
use sharpweights::stepfn::{Exponent, Interval};
use sharpweights::weights::build_weight_small_p;

fn main() {
    let p = Exponent::new(1.25).unwrap();
    for n in [10u32, 14, 18, 22, 26, 30] {
        let w = build_weight_small_p(p.p(), n).unwrap();
        let half = ap_constant(&w, p, &SearchConfig::default()).unwrap();
        let full_dom = Interval::new(0.0, 2.0_f64.powi(n as i32 + 2)).unwrap();
        let full = ap_constant(&w, p, &SearchConfig::over(full_dom)).unwrap();
        println!(
            "N={n}: half {:.6} argmax [{:.3}, {:.3}]  full {:.6} argmax [{:.3}, {:.3}]",
            half.value,
            half.argmax.a(),
            half.argmax.b(),
            full.value,
            full.argmax.a(),
            full.argmax.b()
        );
        let top = 2.0_f64.powi(n as i32);
        println!(
            "    2^N = {top:.0}, argmax/2^N: [{:.4}, {:.4}]",
            half.argmax.a() / top,
            half.argmax.b() / top
        );
    }
}
