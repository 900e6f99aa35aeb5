//! Dense-grid cross-check of the two-stage A_p search at small N: every
//! piece is split 8-fold and all pairs evaluated exactly.

use rayon::prelude::*;
use sharpweights::functionals::{ap_constant, ap_functional, SearchConfig};
use sharpweights::stepfn::{Exponent, Interval};
use sharpweights::weights::build_weight_small_p;

fn main() {
    let p = Exponent::new(1.25).unwrap();
    for n in [10u32, 14] {
        let w = build_weight_small_p(p.p(), n).unwrap();
        let rep = ap_constant(&w, p, &SearchConfig::default()).unwrap();
        // dense mesh: all breakpoints in the half period plus 8-fold splits
        let half = 2.0_f64.powi(n as i32 + 1);
        let brk: Vec<f64> = w
            .breakpoints()
            .iter()
            .copied()
            .filter(|&x| x <= half)
            .collect();
        let mut mesh = Vec::new();
        for win in brk.windows(2) {
            for s in 0..8 {
                mesh.push(win[0] + (win[1] - win[0]) * s as f64 / 8.0);
            }
        }
        mesh.push(half);
        let best = (0..mesh.len() - 1)
            .into_par_iter()
            .map(|i| {
                let mut local = (f64::NEG_INFINITY, 0.0, 0.0);
                for j in (i + 1)..mesh.len() {
                    let v = ap_functional(&w, p, Interval::new(mesh[i], mesh[j]).unwrap())
                        .unwrap_or(0.0);
                    if v > local.0 {
                        local = (v, mesh[i], mesh[j]);
                    }
                }
                local
            })
            .reduce(
                || (f64::NEG_INFINITY, 0.0, 0.0),
                |a, b| if a.0 >= b.0 { a } else { b },
            );
        println!(
            "N={n}: search {:.9} | dense {:.9} at [{:.4}, {:.4}] | ratio {:.6}",
            rep.value,
            best.0,
            best.1,
            best.2,
            best.0 / rep.value
        );
    }
}
