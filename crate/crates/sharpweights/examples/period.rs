//! Whole-period and multi-period interval values versus the half-period
//! supremum, for the periodic extremal families.

use sharpweights::functionals::{ap_constant, ap_functional, SearchConfig};
use sharpweights::stepfn::{Exponent, Interval};
use sharpweights::weights::build_weight_small_p;

fn main() {
    for pv in [1.25, 1.5, 1.75] {
        let p = Exponent::new(pv).unwrap();
        for n in [10u32, 30] {
            let w = build_weight_small_p(p.p(), n).unwrap();
            let t = 2.0_f64.powi(n as i32 + 2);
            let half = ap_constant(&w, p, &SearchConfig::default()).unwrap();
            let one = ap_functional(&w, p, Interval::new(0.0, t).unwrap()).unwrap();
            let five = ap_functional(&w, p, Interval::new(0.0, 5.0 * t).unwrap()).unwrap();
            let shifted =
                ap_functional(&w, p, Interval::new(0.25 * t, 1.75 * t).unwrap()).unwrap();
            println!(
                "p={pv} N={n}: half-sup {:.4} | period {:.4} | 5 periods {:.4} | straddle {:.4}",
                half.value, one, five, shifted
            );
        }
    }
}
