//! Fixed-order Gauss–Legendre rules for the few places where an integrand is
//! genuinely non-polynomial (logarithmic tails of the adjoint Hardy operator,
//! maximal functions inside the A_∞ functional). Everything else in the crate
//! integrates step functions in closed form and never touches quadrature.

/// 16-point Gauss–Legendre nodes on (0, 1), listed with their weights.
/// Exact for polynomials of degree ≤ 31.
pub const GAUSS_16: [(f64, f64); 16] = [
    (0.005299532504175031, 0.013576229705877047),
    (0.027712488463383712, 0.031126761969323946),
    (0.06718439880608412, 0.04757925584124639),
    (0.12229779582249848, 0.06231448562776694),
    (0.19106187779867811, 0.07479799440828837),
    (0.27099161117138630, 0.08457825969750127),
    (0.35919822461037054, 0.09130170752246179),
    (0.45249374508118123, 0.09472530522753425),
    (0.54750625491881877, 0.09472530522753425),
    (0.64080177538962946, 0.09130170752246179),
    (0.72900838882861370, 0.08457825969750127),
    (0.80893812220132189, 0.07479799440828837),
    (0.87770220417750152, 0.06231448562776694),
    (0.93281560119391588, 0.04757925584124639),
    (0.97228751153661629, 0.031126761969323946),
    (0.99470046749582497, 0.013576229705877047),
];

/// 4-point Gauss–Legendre nodes on (0, 1) with weights.
pub const GAUSS_4: [(f64, f64); 4] = [
    (0.06943184420297371, 0.17392742256872693),
    (0.33000947820757187, 0.32607257743127307),
    (0.66999052179242813, 0.32607257743127307),
    (0.93056815579702629, 0.17392742256872693),
];

/// ∫_a^b f with a single Gauss–Legendre rule of the given nodes.
pub fn integrate(nodes: &[(f64, f64)], a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let h = b - a;
    nodes.iter().map(|&(x, w)| w * f(a + x * h)).sum::<f64>() * h
}

/// ∫_a^b f by the 16-point rule, with an error estimate obtained by
/// comparing against the same rule applied to the two half-intervals.
/// Returns `(refined_value, |whole - refined|)`.
pub fn integrate_with_estimate(a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let whole = integrate(&GAUSS_16, a, b, &mut f);
    let mid = 0.5 * (a + b);
    let refined = integrate(&GAUSS_16, a, mid, &mut f) + integrate(&GAUSS_16, mid, b, &mut f);
    (refined, (whole - refined).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        let s16: f64 = GAUSS_16.iter().map(|&(_, w)| w).sum();
        let s4: f64 = GAUSS_4.iter().map(|&(_, w)| w).sum();
        assert!((s16 - 1.0).abs() < 1e-15);
        assert!((s4 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_on_high_degree_polynomials() {
        // ∫_0^1 x^20 = 1/21; degree 20 ≤ 31 so GL16 is exact up to rounding
        let v = integrate(&GAUSS_16, 0.0, 1.0, |x| x.powi(20));
        assert!((v - 1.0 / 21.0).abs() < 1e-15);
        // GL4 is exact through degree 7
        let v4 = integrate(&GAUSS_4, -1.0, 2.0, |x| 3.0 * x.powi(7) - x.powi(3) + 1.0);
        let exact = 3.0 * (2.0_f64.powi(8) - 1.0) / 8.0 - (2.0_f64.powi(4) - 1.0) / 4.0 + 3.0;
        assert!((v4 - exact).abs() < 1e-12 * exact.abs());
    }

    #[test]
    fn log_integrand_estimate_is_honest() {
        // ∫_1^2 ln x dx = 2 ln 2 − 1
        let (v, err) = integrate_with_estimate(1.0, 2.0, f64::ln);
        assert!((v - (2.0 * 2.0_f64.ln() - 1.0)).abs() <= err.max(1e-14));
    }
}
