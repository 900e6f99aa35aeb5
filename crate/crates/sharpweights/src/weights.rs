//! Extremal weight families with piecewise-exact meshes.
//!
//! Two periodic families live on blocks `J_k = [2^k, 2^{k+1})`. Each block
//! carries a short head interval `I_k` at its left edge and a tail that is
//! carved into halving levels: split the remainder `L_k` of the block into
//! halves `L_k^-` (left) and `L_k^+` (right), then walk towards the head
//! from the middle — level `j` has length `|L_k^-|/2^j` — so the levels pile
//! up geometrically against both ends of `L_k`, with a doubled-up terminal
//! level `j = k` closing the gap. Values decay by a factor 2 per level down
//! to a floor, the whole block is scaled by `2^{(k+1)(p-1)}`, and the
//! concatenation over `k` is reflected around `2^{N+1}` and repeated with
//! period `2^{N+2}`.
//!
//! The small-exponent family (`1 < p < 2`) uses heads of length `k` and a
//! value floor `k`; the large-exponent family (`p ≥ 2`) uses heads of length
//! `k^{p-1}` and a floor `k^{p-1}`, starting from the first block index
//! whose head fits in half a block. The third family is the discretized
//! power weight `w_ε` (`ε^{-1}` on `[0,1]`, `x^{ε-1}` beyond, even), meshed
//! geometrically with exact per-piece averages so that `∫_0^h w = h^ε/ε`
//! holds at every mesh point.

use crate::error::{guard, invalid, Result};
use crate::stepfn::{Exponent, Interval, StepFunction};
use serde::{Deserialize, Serialize};

/// Which extremal family to build, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FamilySpec {
    SmallP { p: f64, n: u32 },
    LargeP { p: f64, n: u32 },
    Power { eps: f64, cutoff: f64 },
}

impl FamilySpec {
    pub fn build(&self) -> Result<StepFunction> {
        match *self {
            FamilySpec::SmallP { p, n } => build_weight_small_p(p, n),
            FamilySpec::LargeP { p, n } => build_weight_large_p(p, n),
            FamilySpec::Power { eps, cutoff } => build_power_weight(eps, cutoff),
        }
    }
}

/// The block `J_k = [2^k, 2^{k+1})`.
pub fn block(k: u32) -> Interval {
    Interval::new(f64::exp2(k as f64), f64::exp2(k as f64 + 1.0)).expect("valid block")
}

/// One block's carved mesh: head `I_k` plus halving levels on both sides.
#[derive(Debug, Clone)]
pub struct BlockPartition {
    pub k: u32,
    pub block: Interval,
    /// `I_k`, the head at the left edge of the block.
    pub head: Interval,
    /// Left-side levels `(L_k^-)^j`, `j = 1..=k` at `minus[j-1]`.
    pub minus: Vec<Interval>,
    /// Right-side levels `(L_k^+)^j`, `j = 1..=k` at `plus[j-1]`.
    pub plus: Vec<Interval>,
}

impl BlockPartition {
    /// The block pieces in ascending position:
    /// `I_k, (L^-)^k, …, (L^-)^1, (L^+)^1, …, (L^+)^k`,
    /// each tagged with its level (`0` for the head).
    pub fn ascending(&self) -> Vec<(u32, Interval)> {
        let mut out = Vec::with_capacity(2 * self.minus.len() + 1);
        out.push((0, self.head));
        for j in (1..=self.minus.len()).rev() {
            out.push((j as u32, self.minus[j - 1]));
        }
        for j in 1..=self.plus.len() {
            out.push((j as u32, self.plus[j - 1]));
        }
        out
    }
}

/// Carve block `k` with the given head length.
///
/// Tiling is exact by construction: adjacent pieces share the same binary64
/// breakpoint. Requires `3 ≤ k ≤ 48` and `0 < head_length < 2^k`.
pub fn partition_block(k: u32, head_length: f64) -> Result<BlockPartition> {
    if !(3..=48).contains(&k) {
        return invalid(format!("block index k = {k} outside 3..=48"));
    }
    let lo = f64::exp2(k as f64);
    let hi = f64::exp2(k as f64 + 1.0);
    if !(head_length > 0.0 && head_length < lo) {
        return invalid(format!("head length {head_length} outside (0, 2^{k})"));
    }
    let s = lo + head_length; // left edge of the halving region
    let h = (lo - head_length) / 2.0; // |L_k^-| = |L_k^+|
    let m = s + h; // middle of the halving region

    // left cuts cl[j] = s + h·2^{-j}; minus level j occupies [cl[j], cl[j-1])
    let cl: Vec<f64> = (0..=k).map(|j| s + h * f64::exp2(-(j as f64))).collect();
    // right cuts cr[j] = m + h·(1 - 2^{-j}); plus level j is [cr[j-1], cr[j])
    let cr: Vec<f64> = (0..=k)
        .map(|j| m + h * (1.0 - f64::exp2(-(j as f64))))
        .collect();

    let mut minus = Vec::with_capacity(k as usize);
    let mut plus = Vec::with_capacity(k as usize);
    for j in 1..=(k as usize) {
        let (a, b) = if j < k as usize {
            (cl[j], cl[j - 1])
        } else {
            // terminal level closes the gap down to the head
            (s, cl[j - 1])
        };
        minus.push(Interval::new(a, b)?);
        let (c, d) = if j < k as usize {
            (cr[j - 1], cr[j])
        } else {
            (cr[j - 1], hi)
        };
        plus.push(Interval::new(c, d)?);
    }
    Ok(BlockPartition {
        k,
        block: Interval::new(lo, hi)?,
        head: Interval::new(lo, s)?,
        minus,
        plus,
    })
}

/// Integer `⌊log₂ k⌋`.
fn ilog2(k: u32) -> u32 {
    31 - k.leading_zeros()
}

/// `⌊t⌋` with a guard against ties: if `t` sits within 1e-9 of an integer
/// without being exactly that integer, the floor is ambiguous at binary64
/// precision and the construction refuses to guess.
fn guarded_floor(t: f64) -> Result<i64> {
    let r = t.round();
    if (t - r).abs() < 1e-9 {
        if t == r {
            return Ok(r as i64);
        }
        return guard(format!("floor({t}) is ambiguous at binary64 precision"));
    }
    Ok(t.floor() as i64)
}

/// Reflect a half-period mesh on `[0, 2^{N+1}]` around its right endpoint
/// and wrap the result into a periodic step function of period `2^{N+2}`.
fn mirror_into_period(brk: Vec<f64>, vals: Vec<f64>) -> Result<StepFunction> {
    let half = brk[brk.len() - 1];
    let period = 2.0 * half;
    let mut full_brk = brk.clone();
    let mut full_vals = vals.clone();
    for i in (0..vals.len()).rev() {
        full_brk.push(period - brk[i]);
        full_vals.push(vals[i]);
    }
    StepFunction::new(full_brk, full_vals, 0.0, Some(period))
}

/// Common assembly for both periodic block families. `head_len(k)` and
/// `floor_level(k)`/`floor_value(k)` encode the family differences.
fn build_block_family(
    p: f64,
    n: u32,
    k_first: u32,
    head_len: impl Fn(u32) -> f64,
    floor_level: impl Fn(u32) -> Result<i64>,
    floor_value: impl Fn(u32) -> f64,
) -> Result<StepFunction> {
    let mut brk = vec![0.0];
    let mut vals = Vec::new();
    // flat head of the whole weight: value 1 on [0, 2^{k_first})
    vals.push(1.0);
    brk.push(f64::exp2(k_first as f64));
    for k in k_first..=n {
        let part = partition_block(k, head_len(k))?;
        let scale = f64::exp2((k as f64 + 1.0) * (p - 1.0));
        let t = floor_level(k)?;
        for (level, piece) in part.ascending() {
            let v = if level == 0 {
                scale * f64::exp2(k as f64 + 1.0)
            } else if (level as i64) >= t {
                scale * f64::exp2(level as f64)
            } else {
                scale * floor_value(k)
            };
            vals.push(v);
            brk.push(piece.b());
        }
    }
    mirror_into_period(brk, vals)
}

/// The small-exponent extremal family: `1 < p < 2`, `5 ≤ N ≤ 40`.
///
/// Block `k` has head length `k`, head value `2^{(k+1)p}` (so the head's
/// `p`-th root is `2^{k+1}`, above every point of the block), levels
/// `2^j·2^{(k+1)(p-1)}` for `j ≥ ⌊log₂k⌋`, and floor `k·2^{(k+1)(p-1)}`.
pub fn build_weight_small_p(p: f64, n: u32) -> Result<StepFunction> {
    if !(p > 1.0 && p < 2.0) {
        return invalid(format!("small-exponent family needs 1 < p < 2, got {p}"));
    }
    if !(5..=40).contains(&n) {
        return invalid(format!("N = {n} outside 5..=40"));
    }
    build_block_family(
        p,
        n,
        3,
        |k| k as f64,
        |k| Ok(ilog2(k) as i64),
        |k| k as f64,
    )
}

/// Smallest block index whose head fits in half a block:
/// the minimal `k ≥ 1` with `k^{p-1} < 2^{k-1}`.
pub fn large_p_first_block(p: f64) -> Result<u32> {
    if p < 2.0 {
        return invalid(format!("large-exponent family needs p ≥ 2, got {p}"));
    }
    for k in 1..=64u32 {
        if (k as f64).powf(p - 1.0) < f64::exp2(k as f64 - 1.0) {
            return Ok(k);
        }
    }
    guard("no admissible first block below 64")
}

/// The large-exponent extremal family: `p ≥ 2`, blocks `k₀(p)+1 ..= N`.
///
/// Block `k` has head length `k^{p-1}`, head value `2^{(k+1)p}`, levels
/// `2^j·2^{(k+1)(p-1)}` for `j ≥ ⌊(p-1)log₂k⌋`, floor `k^{p-1}·2^{(k+1)(p-1)}`.
pub fn build_weight_large_p(p: f64, n: u32) -> Result<StepFunction> {
    let k0 = large_p_first_block(p)?;
    if !(n > k0 + 2 && n <= 48) {
        return invalid(format!("N = {n} outside ({}, 48]", k0 + 2));
    }
    // the defining inequality must hold on every block we build
    for k in (k0 + 1)..=n {
        if !((k as f64).powf(p - 1.0) < f64::exp2(k as f64 - 1.0)) {
            return guard(format!("head of block {k} does not fit in half a block"));
        }
    }
    build_block_family(
        p,
        n,
        k0 + 1,
        |k| (k as f64).powf(p - 1.0),
        |k| guarded_floor((p - 1.0) * (k as f64).log2()),
        |k| (k as f64).powf(p - 1.0),
    )
}

/// Mesh refinement for the power family: pieces per octave.
pub const POWER_STEPS_PER_OCTAVE: u32 = 16;

/// The discretized power weight `w_ε`: even, `ε^{-1}` on `[-1, 1)`, and the
/// exact piece averages of `x^{ε-1}` on a geometric mesh of ratio
/// `2^{1/steps}` out to at least `cutoff`.
pub fn build_power_weight(eps: f64, cutoff: f64) -> Result<StepFunction> {
    build_power_weight_with_mesh(eps, cutoff, POWER_STEPS_PER_OCTAVE)
}

pub fn build_power_weight_with_mesh(
    eps: f64,
    cutoff: f64,
    steps_per_octave: u32,
) -> Result<StepFunction> {
    if !(eps > 0.0 && eps <= 0.5) {
        return invalid(format!("ε = {eps} outside (0, 1/2]"));
    }
    if !(cutoff >= 4.0 && cutoff.is_finite()) {
        return invalid(format!("cutoff {cutoff} must be ≥ 4"));
    }
    if !(1..=64).contains(&steps_per_octave) {
        return invalid("steps per octave outside 1..=64");
    }
    let steps = steps_per_octave as f64;
    let n = (steps * cutoff.log2()).ceil() as u32;
    // positive mesh points x_i = 2^{i/steps}, i = 0..=n
    let xs: Vec<f64> = (0..=n).map(|i| f64::exp2(i as f64 / steps)).collect();
    // piece averages of x^{ε-1}: (x_{i+1}^ε − x_i^ε)/(ε·(x_{i+1} − x_i))
    let avgs: Vec<f64> = xs
        .windows(2)
        .map(|w| (w[1].powf(eps) - w[0].powf(eps)) / (eps * (w[1] - w[0])))
        .collect();
    let mut brk = Vec::with_capacity(2 * xs.len());
    let mut vals = Vec::with_capacity(2 * avgs.len() + 1);
    for i in (0..xs.len()).rev() {
        brk.push(-xs[i]);
        if i > 0 {
            vals.push(avgs[i - 1]);
        }
    }
    vals.push(1.0 / eps); // the central piece [-1, 1)
    brk.push(xs[0]);
    for i in 1..xs.len() {
        vals.push(avgs[i - 1]);
        brk.push(xs[i]);
    }
    StepFunction::new(brk, vals, 0.0, None)
}

/// Closed form of `∫_from^∞ w_ε^{-1/(p-1)}(x) · x^{-p'} dx` for `from ≥ 1`,
/// where `w_ε = x^{ε-1}` beyond 1: the integrand is `x^{-1-ε/(p-1)}`, so the
/// value is `((p-1)/ε) · from^{-ε/(p-1)}`.
pub fn power_sigma_weighted_tail(eps: f64, p: Exponent, from: f64) -> f64 {
    let d = eps / (p.p() - 1.0);
    (1.0 / d) * from.powf(-d)
}

/// The discretized counterpart of [`power_sigma_weighted_tail`] from
/// `lower`: exact per-piece integrals of `σ_disc(x)·x^{-p'}` over the mesh,
/// plus the closed-form continuation beyond the mesh cutoff.
pub fn power_sigma_weighted_integral(
    w: &StepFunction,
    eps: f64,
    p: Exponent,
    lower: f64,
) -> Result<f64> {
    if lower < 1.0 {
        return invalid("lower end must be ≥ 1 (above the flat central piece)");
    }
    let pp = p.conjugate();
    let support_end = w.support().b();
    let mut total = 0.0;
    let brk = w.breakpoints();
    let vals = w.values();
    for i in 0..vals.len() {
        let a = brk[i].max(lower);
        let b = brk[i + 1];
        if b <= a {
            continue;
        }
        let sigma = vals[i].powf(-p.dual_power());
        // ∫_a^b x^{-p'} dx, p' > 1
        let piece = (a.powf(1.0 - pp) - b.powf(1.0 - pp)) / (pp - 1.0);
        total += sigma * piece;
    }
    Ok(total + power_sigma_weighted_tail(eps, p, support_end))
}

/// Closed form of the lower-bound functional for the power family:
/// `(∫_0^1 w^{1/p})·(∫_2^∞ σ(x)x^{-p'}dx)^{1/p'} = ε^{-1/p}·(((p-1)/ε)·2^{-ε/(p-1)})^{1/p'}`.
pub fn power_lower_functional_closed_form(eps: f64, p: Exponent) -> f64 {
    eps.powf(-1.0 / p.p()) * power_sigma_weighted_tail(eps, p, 2.0).powf(1.0 / p.conjugate())
}

/// Same functional with the σ-integral taken from the discretized weight.
pub fn power_lower_functional_discretized(
    w: &StepFunction,
    eps: f64,
    p: Exponent,
) -> Result<f64> {
    let tail = power_sigma_weighted_integral(w, eps, p, 2.0)?;
    Ok(eps.powf(-1.0 / p.p()) * tail.powf(1.0 / p.conjugate()))
}

/// The head intervals `I_k` of the large-exponent family, `k₀+1 ..= N`;
/// their union is the test set of the adjoint-Hardy lower bound.
pub fn large_p_heads(p: f64, n: u32) -> Result<Vec<Interval>> {
    let k0 = large_p_first_block(p)?;
    (k0 + 1..=n)
        .map(|k| {
            let lo = f64::exp2(k as f64);
            Interval::new(lo, lo + (k as f64).powf(p - 1.0))
        })
        .collect()
}

/// The head intervals `I_k` of the small-exponent family, `3 ..= N`.
pub fn small_p_heads(n: u32) -> Result<Vec<Interval>> {
    (3..=n)
        .map(|k| {
            let lo = f64::exp2(k as f64);
            Interval::new(lo, lo + k as f64)
        })
        .collect()
}
