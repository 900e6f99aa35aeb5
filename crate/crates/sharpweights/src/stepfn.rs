//! Exact calculus for piecewise-constant functions on the line.
//!
//! A [`StepFunction`] is a finite list of half-open pieces `[x_i, x_{i+1})`
//! with one value per piece, a constant value outside the support, and an
//! optional period equal to the support length. All set conventions in the
//! crate are half-open on the right, so piece lengths add up exactly and
//! tilings can be checked with equalities instead of tolerances.
//!
//! Integrals, level-set measures, and comparisons against the reference
//! shapes `c`, `c·x`, `c/x` are computed piece by piece in closed form; the
//! only floating-point error is the usual rounding of sums and products.

use crate::error::{domain, guard, invalid, Result};
use serde::{Deserialize, Serialize};

/// Hard cap on the number of segments any windowed walk may produce; walks
/// over many periods of a fine mesh error out instead of allocating wildly.
const SEGMENT_CAP: usize = 4_000_000;

/// A nonempty bounded interval `[a, b)` with `a < b`, both finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    a: f64,
    b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return invalid(format!("interval endpoints must be finite, got [{a}, {b})"));
        }
        if !(a < b) {
            return invalid(format!("interval requires a < b, got [{a}, {b})"));
        }
        Ok(Interval { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.a <= x && x < self.b
    }

    /// Overlap length with `[a, b)`; zero when disjoint.
    pub fn overlap(&self, a: f64, b: f64) -> f64 {
        (self.b.min(b) - self.a.max(a)).max(0.0)
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = crate::Error;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> [f64; 2] {
        [i.a, i.b]
    }
}

/// A Lebesgue exponent `1 < p < ∞` together with its conjugate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Exponent {
    p: f64,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() || p <= 1.0 {
            return invalid(format!("exponent must satisfy 1 < p < ∞, got {p}"));
        }
        Ok(Exponent { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// The conjugate exponent `p' = p/(p-1)`.
    pub fn conjugate(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// `1/(p-1)`, the exponent of the dual-weight power `σ = w^{-1/(p-1)}`.
    pub fn dual_power(&self) -> f64 {
        1.0 / (self.p - 1.0)
    }
}

impl TryFrom<f64> for Exponent {
    type Error = crate::Error;
    fn try_from(p: f64) -> Result<Self> {
        Exponent::new(p)
    }
}

impl From<Exponent> for f64 {
    fn from(e: Exponent) -> f64 {
        e.p
    }
}

/// Reference shapes a step function can be compared against in closed form.
#[derive(Debug, Clone, Copy)]
pub enum CompareForm {
    /// `g(x) = c`
    Constant(f64),
    /// `g(x) = c·x`
    Linear(f64),
    /// `g(x) = c/x`; the window must lie in `(0, ∞)`
    Reciprocal(f64),
}

#[derive(Serialize, Deserialize)]
struct StepFnRepr {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    outside: f64,
    period: Option<f64>,
}

/// A piecewise-constant function with half-open pieces.
///
/// With breakpoints `x_0 < x_1 < … < x_B` the function equals `values[i]` on
/// `[x_i, x_{i+1})`. Outside `[x_0, x_B)` it equals `outside_value`, unless a
/// period is set, in which case the pattern repeats with period `x_B - x_0`
/// and the outside value is never consulted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepFnRepr", into = "StepFnRepr")]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    outside_value: f64,
    period: Option<f64>,
    /// prefix[i] = ∫ over the first i pieces; prefix[B] is the mass of one
    /// period (or of the support for non-periodic functions).
    prefix: Vec<f64>,
}

impl StepFunction {
    pub fn new(
        breakpoints: Vec<f64>,
        values: Vec<f64>,
        outside_value: f64,
        period: Option<f64>,
    ) -> Result<Self> {
        if breakpoints.len() < 2 {
            return invalid("a step function needs at least one piece");
        }
        if values.len() + 1 != breakpoints.len() {
            return invalid(format!(
                "breakpoints/values length mismatch: {} vs {}",
                breakpoints.len(),
                values.len()
            ));
        }
        if breakpoints.iter().any(|x| !x.is_finite())
            || values.iter().any(|v| !v.is_finite())
            || !outside_value.is_finite()
        {
            return invalid("breakpoints and values must all be finite");
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("breakpoints must be strictly increasing");
        }
        if let Some(t) = period {
            let support = breakpoints[breakpoints.len() - 1] - breakpoints[0];
            if !(t == support) {
                return invalid(format!(
                    "period {t} must equal the support length {support} exactly"
                ));
            }
        }
        let mut prefix = Vec::with_capacity(breakpoints.len());
        let mut acc = 0.0;
        prefix.push(0.0);
        for i in 0..values.len() {
            acc += values[i] * (breakpoints[i + 1] - breakpoints[i]);
            prefix.push(acc);
        }
        Ok(StepFunction {
            breakpoints,
            values,
            outside_value,
            period,
            prefix,
        })
    }

    /// Indicator of an interval: 1 on `[a, b)`, 0 elsewhere.
    pub fn indicator(i: Interval) -> Self {
        StepFunction::new(vec![i.a(), i.b()], vec![1.0], 0.0, None).expect("valid by construction")
    }

    /// Constant `v` on `[a, b)`, 0 elsewhere.
    pub fn constant_on(i: Interval, v: f64) -> Result<Self> {
        StepFunction::new(vec![i.a(), i.b()], vec![v], 0.0, None)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn outside_value(&self) -> f64 {
        self.outside_value
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn piece_count(&self) -> usize {
        self.values.len()
    }

    /// The base mesh interval `[x_0, x_B)`.
    pub fn support(&self) -> Interval {
        Interval {
            a: self.breakpoints[0],
            b: self.breakpoints[self.breakpoints.len() - 1],
        }
    }

    fn x0(&self) -> f64 {
        self.breakpoints[0]
    }

    fn xb(&self) -> f64 {
        self.breakpoints[self.breakpoints.len() - 1]
    }

    /// Mass of one period (periodic) or of the support (non-periodic).
    pub fn support_mass(&self) -> f64 {
        self.prefix[self.prefix.len() - 1]
    }

    /// Wrap `x` into the base mesh of a periodic function.
    fn wrap(&self, x: f64) -> f64 {
        match self.period {
            None => x,
            Some(t) => {
                let mut r = self.x0() + (x - self.x0()).rem_euclid(t);
                // rem_euclid can round up to exactly t for tiny negative input
                if r >= self.xb() {
                    r = self.x0();
                }
                r
            }
        }
    }

    /// Index of the piece containing `x`, for `x` inside the base mesh.
    fn piece_index(&self, x: f64) -> Option<usize> {
        if x < self.x0() || x >= self.xb() {
            return None;
        }
        let i = self.breakpoints.partition_point(|&bp| bp <= x);
        Some(i - 1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = self.wrap(x);
        match self.piece_index(t) {
            Some(i) => self.values[i],
            None => self.outside_value,
        }
    }

    /// Primitive of the base mesh: `∫_{x_0}^{x}` for `x ∈ [x_0, x_B]`.
    fn primitive(&self, x: f64) -> f64 {
        debug_assert!(x >= self.x0() && x <= self.xb());
        if x >= self.xb() {
            return self.support_mass();
        }
        let i = self.piece_index(x).expect("x inside support");
        self.prefix[i] + self.values[i] * (x - self.breakpoints[i])
    }

    /// Signed primitive on the whole line: `G(x) = ∫_{x_0}^{x} f` with the
    /// periodic extension or the outside value beyond the support.
    fn extended_primitive(&self, x: f64) -> f64 {
        match self.period {
            Some(t) => {
                let k = ((x - self.x0()) / t).floor();
                let mut r = x - self.x0() - k * t;
                if r < 0.0 {
                    r = 0.0;
                }
                if r > t {
                    r = t;
                }
                k * self.support_mass() + self.primitive(self.x0() + r)
            }
            None => {
                if x < self.x0() {
                    self.outside_value * (x - self.x0())
                } else if x > self.xb() {
                    self.support_mass() + self.outside_value * (x - self.xb())
                } else {
                    self.primitive(x)
                }
            }
        }
    }

    /// Exact integral over `[a, b)`.
    pub fn integrate(&self, i: Interval) -> f64 {
        self.integrate_raw(i.a(), i.b())
    }

    pub(crate) fn integrate_raw(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.extended_primitive(b) - self.extended_primitive(a)
    }

    /// Average over `[a, b)`.
    pub fn average(&self, i: Interval) -> f64 {
        self.integrate(i) / i.len()
    }

    /// Collect all breakpoints of the (possibly periodic) function that fall
    /// in `(a, b)`, in increasing order.
    pub(crate) fn breakpoints_within(&self, a: f64, b: f64, out: &mut Vec<f64>) -> Result<()> {
        match self.period {
            None => {
                for &x in &self.breakpoints {
                    if x > a && x < b {
                        out.push(x);
                    }
                }
            }
            Some(t) => {
                let copies = ((b - a) / t).ceil() as usize + 2;
                if copies.saturating_mul(self.values.len()) > SEGMENT_CAP {
                    return guard(format!(
                        "window spans {copies} periods of a {}-piece mesh",
                        self.values.len()
                    ));
                }
                let k0 = ((a - self.x0()) / t).floor();
                let mut k = k0;
                loop {
                    let off = k * t;
                    if self.x0() + off >= b {
                        break;
                    }
                    for &x in &self.breakpoints {
                        let y = x + off;
                        if y > a && y < b {
                            out.push(y);
                        }
                    }
                    k += 1.0;
                }
            }
        }
        Ok(())
    }

    /// Walk the window `[a, b)` as maximal segments on which the function is
    /// constant, calling `visit(lo, hi, value)` for each.
    pub(crate) fn walk_segments(
        &self,
        a: f64,
        b: f64,
        mut visit: impl FnMut(f64, f64, f64),
    ) -> Result<()> {
        if b <= a {
            return Ok(());
        }
        let mut cuts = vec![a];
        self.breakpoints_within(a, b, &mut cuts)?;
        cuts.push(b);
        for w in cuts.windows(2) {
            if w[1] > w[0] {
                visit(w[0], w[1], self.eval(w[0]));
            }
        }
        Ok(())
    }

    /// Measure of `{x ∈ window : f(x) > α}`, exact.
    pub fn level_measure(&self, alpha: f64, window: Interval) -> Result<f64> {
        let (a, b) = (window.a(), window.b());
        match self.period {
            None => {
                let mut m = 0.0;
                // outside parts
                if self.outside_value > alpha {
                    m += (self.x0().min(b) - a).max(0.0);
                    m += (b - self.xb().max(a)).max(0.0);
                }
                for i in 0..self.values.len() {
                    if self.values[i] > alpha {
                        m += (self.breakpoints[i + 1].min(b) - self.breakpoints[i].max(a)).max(0.0);
                    }
                }
                Ok(m)
            }
            Some(t) => {
                // whole periods via the per-period measure, partials by walking
                let per_period: f64 = (0..self.values.len())
                    .filter(|&i| self.values[i] > alpha)
                    .map(|i| self.breakpoints[i + 1] - self.breakpoints[i])
                    .sum();
                let k = ((b - a) / t).floor();
                let cut = a + k * t;
                let mut partial = 0.0;
                self.walk_segments(cut, b, |lo, hi, v| {
                    if v > alpha {
                        partial += hi - lo;
                    }
                })?;
                Ok(k * per_period + partial)
            }
        }
    }

    /// Measure of `{x ∈ window : f(x) > g(x)}` for the closed-form shapes.
    pub fn compare_measure(&self, g: CompareForm, window: Interval) -> Result<f64> {
        if let CompareForm::Reciprocal(_) = g {
            if window.a() <= 0.0 {
                return domain("reciprocal comparison requires a window inside (0, ∞)");
            }
        }
        let mut total = 0.0;
        self.walk_segments(window.a(), window.b(), |lo, hi, v| {
            let part = match g {
                CompareForm::Constant(c) => {
                    if v > c {
                        hi - lo
                    } else {
                        0.0
                    }
                }
                CompareForm::Linear(c) => {
                    if c > 0.0 {
                        // v > c·x  ⟺  x < v/c
                        (hi.min(v / c) - lo).max(0.0)
                    } else if c < 0.0 {
                        (hi - lo.max(v / c)).max(0.0)
                    } else if v > 0.0 {
                        hi - lo
                    } else {
                        0.0
                    }
                }
                CompareForm::Reciprocal(c) => {
                    // window ⊂ (0, ∞): v > c/x ⟺ v·x > c
                    if v > 0.0 {
                        (hi - lo.max(c / v)).max(0.0)
                    } else if v == 0.0 {
                        if c < 0.0 {
                            hi - lo
                        } else {
                            0.0
                        }
                    } else {
                        // v < 0: v·x decreasing; v·x > c ⟺ x < c/v
                        if c < 0.0 {
                            (hi.min(c / v) - lo).max(0.0)
                        } else {
                            0.0
                        }
                    }
                }
            };
            total += part;
        })?;
        Ok(total)
    }

    /// Pointwise power `f^s` on the same mesh.
    ///
    /// Piece values must be strictly positive when `s` is negative or
    /// fractional. A zero outside value is kept as zero regardless of `s`:
    /// the power is taken on the support, and every consumer in the crate
    /// integrates the result against sets inside the support.
    pub fn pointwise_power(&self, s: f64) -> Result<StepFunction> {
        let fractional = s.fract() != 0.0;
        let powered = |v: f64| -> Result<f64> {
            if v < 0.0 && (fractional || s < 0.0) {
                return domain(format!("negative value {v} under power {s}"));
            }
            if v == 0.0 && s < 0.0 {
                return domain("zero value under negative power");
            }
            Ok(v.powf(s))
        };
        let values = self
            .values
            .iter()
            .map(|&v| powered(v))
            .collect::<Result<Vec<_>>>()?;
        let outside = if self.outside_value == 0.0 {
            0.0
        } else {
            powered(self.outside_value)?
        };
        StepFunction::new(self.breakpoints.clone(), values, outside, self.period)
    }

    /// Scale all values (and the outside value) by `c`.
    pub fn scale(&self, c: f64) -> StepFunction {
        StepFunction::new(
            self.breakpoints.clone(),
            self.values.iter().map(|v| c * v).collect(),
            c * self.outside_value,
            self.period,
        )
        .expect("mesh unchanged")
    }

    /// Materialize the restriction to a window as a non-periodic step
    /// function that is 0 outside the window.
    pub fn restrict(&self, window: Interval) -> Result<StepFunction> {
        let mut brk = vec![window.a()];
        let mut vals = Vec::new();
        self.walk_segments(window.a(), window.b(), |_lo, hi, v| {
            vals.push(v);
            brk.push(hi);
        })?;
        StepFunction::new(brk, vals, 0.0, None)
    }

    /// Materialize the restriction to a disjoint ascending union of
    /// intervals, with explicit zero pieces in the gaps.
    pub fn restrict_to_union(&self, parts: &[Interval]) -> Result<StepFunction> {
        if parts.is_empty() {
            return invalid("restriction needs at least one interval");
        }
        for w in parts.windows(2) {
            if !(w[0].b() <= w[1].a()) {
                return invalid("restriction intervals must be disjoint and ascending");
            }
        }
        let mut brk = vec![parts[0].a()];
        let mut vals = Vec::new();
        for (idx, part) in parts.iter().enumerate() {
            if idx > 0 {
                let gap_start = parts[idx - 1].b();
                if part.a() > gap_start {
                    vals.push(0.0);
                    brk.push(part.a());
                }
            }
            self.walk_segments(part.a(), part.b(), |_lo, hi, v| {
                vals.push(v);
                brk.push(hi);
            })?;
        }
        StepFunction::new(brk, vals, 0.0, None)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<StepFunction> {
        Ok(serde_json::from_str(s)?)
    }
}

impl TryFrom<StepFnRepr> for StepFunction {
    type Error = crate::Error;
    fn try_from(r: StepFnRepr) -> Result<Self> {
        StepFunction::new(r.breakpoints, r.values, r.outside, r.period)
    }
}

impl From<StepFunction> for StepFnRepr {
    fn from(f: StepFunction) -> StepFnRepr {
        StepFnRepr {
            breakpoints: f.breakpoints,
            values: f.values,
            outside: f.outside_value,
            period: f.period,
        }
    }
}

/// Walk two step functions on a common refinement of a window, calling
/// `visit(lo, hi, f_value, g_value)` per cell.
pub(crate) fn walk_pair(
    f: &StepFunction,
    g: &StepFunction,
    a: f64,
    b: f64,
    mut visit: impl FnMut(f64, f64, f64, f64),
) -> Result<()> {
    if b <= a {
        return Ok(());
    }
    let mut cuts = vec![a];
    f.breakpoints_within(a, b, &mut cuts)?;
    g.breakpoints_within(a, b, &mut cuts)?;
    cuts.push(b);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    if cuts.len() > SEGMENT_CAP {
        return guard("common refinement exceeds segment cap");
    }
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            visit(w[0], w[1], f.eval(w[0]), g.eval(w[0]));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b).unwrap()
    }

    #[test]
    fn rejects_malformed_meshes() {
        assert!(StepFunction::new(vec![0.0, 1.0, 1.0], vec![1.0, 2.0], 0.0, None).is_err());
        assert!(StepFunction::new(vec![0.0, 1.0], vec![1.0, 2.0], 0.0, None).is_err());
        assert!(StepFunction::new(vec![0.0, f64::NAN], vec![1.0], 0.0, None).is_err());
        assert!(StepFunction::new(vec![0.0, 1.0], vec![1.0], 0.0, Some(2.0)).is_err());
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(Exponent::new(1.0).is_err());
    }

    #[test]
    fn evaluation_follows_half_open_convention() {
        let f = StepFunction::new(vec![0.0, 1.0, 3.0], vec![2.0, -1.0], 7.0, None).unwrap();
        assert_eq!(f.eval(0.0), 2.0);
        assert_eq!(f.eval(1.0), -1.0);
        assert_eq!(f.eval(3.0), 7.0); // right endpoint is outside
        assert_eq!(f.eval(-0.5), 7.0);
    }

    #[test]
    fn indicator_integral_is_overlap_length() {
        let f = StepFunction::indicator(iv(0.0, 3.0));
        assert_eq!(f.integrate(iv(1.0, 2.0)), 1.0);
        assert_eq!(f.integrate(iv(2.0, 5.0)), 1.0);
        assert_eq!(f.integrate(iv(-1.0, 4.0)), 3.0);
        assert_eq!(f.integrate(iv(3.0, 4.0)), 0.0);
    }

    #[test]
    fn periodic_integral_counts_whole_periods_exactly() {
        // period 1, mass 1/2 per period
        let f = StepFunction::new(vec![0.0, 0.5, 1.0], vec![1.0, 0.0], 0.0, Some(1.0)).unwrap();
        assert_eq!(f.integrate(iv(0.0, 4.0)), 2.0);
        assert_eq!(f.integrate(iv(-2.0, 2.0)), 2.0);
        assert_eq!(f.integrate(iv(0.25, 1.25)), 0.5);
        assert_eq!(f.eval(2.25), 1.0);
        assert_eq!(f.eval(-0.25), 0.0);
    }

    #[test]
    fn level_measure_on_two_piece_example() {
        let f = StepFunction::new(vec![0.0, 1.0, 3.0], vec![2.0, 0.5], 0.0, None).unwrap();
        assert_eq!(f.level_measure(1.0, iv(0.0, 3.0)).unwrap(), 1.0);
        assert_eq!(f.level_measure(0.25, iv(0.0, 3.0)).unwrap(), 3.0);
        assert_eq!(f.level_measure(0.25, iv(0.0, 10.0)).unwrap(), 3.0);
        assert_eq!(f.level_measure(-1.0, iv(0.0, 10.0)).unwrap(), 10.0);
    }

    #[test]
    fn compare_measure_against_identity_solves_piecewise() {
        // f = 2 on [0,4): {x: 2 > x} ∩ [0,4) = [0,2)
        let f = StepFunction::constant_on(iv(0.0, 4.0), 2.0).unwrap();
        assert_eq!(f.compare_measure(CompareForm::Linear(1.0), iv(0.0, 4.0)).unwrap(), 2.0);
        // against c/x on (1, 4): {x: 2 > 4/x} = (2, 4)
        assert_eq!(
            f.compare_measure(CompareForm::Reciprocal(4.0), iv(1.0, 4.0)).unwrap(),
            2.0
        );
        assert!(f
            .compare_measure(CompareForm::Reciprocal(1.0), iv(-1.0, 4.0))
            .is_err());
    }

    #[test]
    fn pointwise_power_respects_domain() {
        let f = StepFunction::new(vec![0.0, 1.0], vec![4.0], 0.0, None).unwrap();
        let g = f.pointwise_power(-0.5).unwrap();
        assert_eq!(g.eval(0.5), 0.5);
        assert_eq!(g.outside_value(), 0.0); // zero outside survives untouched
        let h = StepFunction::new(vec![0.0, 1.0], vec![-4.0], 0.0, None).unwrap();
        assert!(h.pointwise_power(0.5).is_err());
        let z = StepFunction::new(vec![0.0, 1.0], vec![0.0], 0.0, None).unwrap();
        assert!(z.pointwise_power(-1.0).is_err());
        assert!(z.pointwise_power(2.0).is_ok());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let f = StepFunction::new(
            vec![0.0, 0.1 + 0.2, 1.0, 2.0_f64.sqrt() + 1.0],
            vec![std::f64::consts::PI, -1.0 / 3.0, 1e-300],
            0.25,
            None,
        )
        .unwrap();
        let s = f.to_json().unwrap();
        let g = StepFunction::from_json(&s).unwrap();
        assert_eq!(f.breakpoints(), g.breakpoints());
        assert_eq!(f.values(), g.values());
        assert_eq!(f.outside_value(), g.outside_value());
        assert_eq!(f.period(), g.period());
    }

    #[test]
    fn restriction_to_union_inserts_zero_gaps() {
        let f = StepFunction::new(vec![0.0, 10.0], vec![3.0], 9.0, None).unwrap();
        let r = f
            .restrict_to_union(&[iv(1.0, 2.0), iv(4.0, 5.0)])
            .unwrap();
        assert_eq!(r.eval(1.5), 3.0);
        assert_eq!(r.eval(3.0), 0.0);
        assert_eq!(r.eval(4.5), 3.0);
        assert_eq!(r.eval(0.5), 0.0);
        assert_eq!(r.integrate(iv(0.0, 10.0)), 6.0);
    }

    #[test]
    fn walk_pair_refines_meshes() {
        let f = StepFunction::new(vec![0.0, 2.0, 4.0], vec![1.0, 3.0], 0.0, None).unwrap();
        let g = StepFunction::new(vec![1.0, 3.0], vec![10.0], 0.0, None).unwrap();
        let mut cells = Vec::new();
        walk_pair(&f, &g, 0.0, 4.0, |lo, hi, a, b| cells.push((lo, hi, a, b))).unwrap();
        assert_eq!(
            cells,
            vec![
                (0.0, 1.0, 1.0, 0.0),
                (1.0, 2.0, 1.0, 10.0),
                (2.0, 3.0, 3.0, 10.0),
                (3.0, 4.0, 3.0, 0.0),
            ]
        );
    }
}
