//! Muckenhoupt-type functionals of scalar weights: the `A_p` constant via
//! an exact candidate search plus endpoint refinement, its duality
//! cross-check, a Fujii–Wilson-style `A_∞` diagnostic, a reverse-Hölder
//! probe, and the Carleson-type covering functional on sparse families.
//!
//! The two-route policy: whenever two quantities are related by an
//! identity, each side is computed from its own data (for example the
//! dual weight is re-raised numerically rather than substituted back),
//! so agreement is evidence, not tautology.

use crate::error::{domain, guard, invalid, Result};
use crate::operators::MaximalEvaluator;
use crate::quadrature;
use crate::sparse::SparseFamily;
use crate::stepfn::{Exponent, Interval, StepFunction};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Hard cap on the stage-1 candidate mesh. Every family built by this
/// crate stays far below it; exceeding it is a sign the search domain
/// should be narrowed, reported as a guard failure rather than silently
/// subsampled.
pub const MAX_STAGE1_MESH: usize = 20_000;

/// Search policy for the interval-supremum functionals.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Interval to search; `None` selects the weight's natural domain
    /// (the support, or half a period for periodic weights, which
    /// suffices for the mirror-symmetric periodic families built here).
    pub domain: Option<Interval>,
    /// Refinement passes over the two endpoints of each finalist.
    pub passes: usize,
    /// Golden-section steps per endpoint per pass.
    pub refine_steps: usize,
    /// Residual above this marks the refinement as not settled.
    pub rel_tol: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            domain: None,
            passes: 2,
            refine_steps: 24,
            rel_tol: 1e-3,
        }
    }
}

impl SearchConfig {
    pub fn over(domain: Interval) -> Self {
        SearchConfig {
            domain: Some(domain),
            ..SearchConfig::default()
        }
    }
}

/// The natural search domain of a weight: its support when aperiodic,
/// the first half-period otherwise.
pub fn default_domain(w: &StepFunction) -> Interval {
    let s = w.support();
    match w.period() {
        None => s,
        Some(t) => Interval::new(s.a(), s.a() + t / 2.0).expect("positive period"),
    }
}

/// `(avg_I w)·(avg_I w^{-1/(p-1)})^{p-1}`, both averages exact.
pub fn ap_functional(w: &StepFunction, p: Exponent, i: Interval) -> Result<f64> {
    let mut mw = 0.0;
    let mut ms = 0.0;
    let neg = -p.dual_power();
    w.walk_segments(i.a(), i.b(), |lo, hi, v| {
        if v > 0.0 {
            mw += v * (hi - lo);
            ms += v.powf(neg) * (hi - lo);
        } else {
            ms += f64::INFINITY;
        }
    })?;
    if !ms.is_finite() {
        return domain("weight vanishes inside the interval");
    }
    let len = i.len();
    Ok((mw / len) * (ms / len).powf(p.p() - 1.0))
}

/// Result of an interval-supremum search.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ApReport {
    /// Best value found — a certified lower bound for the supremum.
    pub value: f64,
    /// The interval attaining it.
    pub argmax: Interval,
    /// Relative growth of the best value during the final refinement
    /// pass; small means the candidate grid had already converged.
    pub refinement_residual: f64,
    /// Number of candidate intervals examined in stage 1.
    pub candidates_examined: usize,
}

/// Exact prefix sums of `w` and `σ = w^{-1/(p-1)}` over a mesh, with
/// piecewise-linear interpolation between mesh points (exact, since the
/// mesh contains every breakpoint of the domain).
struct PairMass {
    mesh: Vec<f64>,
    cw: Vec<f64>,
    cs: Vec<f64>,
    vw: Vec<f64>,
    vs: Vec<f64>,
}

impl PairMass {
    fn build(w: &StepFunction, p: Exponent, dom: Interval) -> Result<PairMass> {
        let neg = -p.dual_power();
        let mut mesh = vec![dom.a()];
        let mut vw = Vec::new();
        let mut vs = Vec::new();
        let mut bad = None;
        w.walk_segments(dom.a(), dom.b(), |lo, hi, v| {
            if v <= 0.0 {
                bad = Some(lo);
            }
            mesh.push(hi);
            vw.push(v);
            vs.push(if v > 0.0 { v.powf(neg) } else { f64::NAN });
        })?;
        if let Some(x) = bad {
            return domain(format!("weight is not strictly positive near {x}"));
        }
        if mesh.len() > MAX_STAGE1_MESH {
            return guard(format!(
                "candidate mesh has {} points (cap {MAX_STAGE1_MESH}); narrow the domain",
                mesh.len()
            ));
        }
        let mut cw = vec![0.0];
        let mut cs = vec![0.0];
        for i in 0..vw.len() {
            let len = mesh[i + 1] - mesh[i];
            cw.push(cw[i] + vw[i] * len);
            cs.push(cs[i] + vs[i] * len);
        }
        Ok(PairMass { mesh, cw, cs, vw, vs })
    }

    fn mass_w(&self, t: f64) -> f64 {
        let i = self
            .mesh
            .partition_point(|&m| m <= t)
            .clamp(1, self.mesh.len() - 1)
            - 1;
        self.cw[i] + self.vw[i] * (t - self.mesh[i])
    }

    fn mass_s(&self, t: f64) -> f64 {
        let i = self
            .mesh
            .partition_point(|&m| m <= t)
            .clamp(1, self.mesh.len() - 1)
            - 1;
        self.cs[i] + self.vs[i] * (t - self.mesh[i])
    }

    fn value(&self, a: f64, b: f64, pm1: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let len = b - a;
        let aw = (self.mass_w(b) - self.mass_w(a)) / len;
        let as_ = (self.mass_s(b) - self.mass_s(a)) / len;
        aw * as_.powf(pm1)
    }

    fn grid_value(&self, i: usize, j: usize, pm1: f64) -> f64 {
        let len = self.mesh[j] - self.mesh[i];
        ((self.cw[j] - self.cw[i]) / len) * ((self.cs[j] - self.cs[i]) / len).powf(pm1)
    }
}

/// Deterministic maximum over `(value, i, j)` triples: larger value wins,
/// ties broken toward the lexicographically smaller index pair.
fn better(a: (f64, usize, usize), b: (f64, usize, usize)) -> (f64, usize, usize) {
    if a.0 > b.0 || (a.0 == b.0 && (a.1, a.2) <= (b.1, b.2)) {
        a
    } else {
        b
    }
}

fn stage1_all_pairs(pm: &PairMass, pm1: f64) -> Vec<(f64, usize, usize)> {
    let n = pm.mesh.len();
    (0..n - 1)
        .into_par_iter()
        .map(|i| {
            let mut best = (f64::NEG_INFINITY, usize::MAX, usize::MAX);
            for j in (i + 1)..n {
                best = better((pm.grid_value(i, j, pm1), i, j), best);
            }
            best
        })
        .collect()
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const FINALISTS: usize = 8;

fn refine_pair(
    pm: &PairMass,
    pm1: f64,
    i: usize,
    j: usize,
    cfg: &SearchConfig,
) -> (f64, Interval, f64) {
    let n = pm.mesh.len();
    let mut a = pm.mesh[i];
    let mut b = pm.mesh[j];
    let mut best = pm.value(a, b, pm1);
    let mut last_pass_growth = 0.0;
    for pass in 0..cfg.passes.max(1) {
        let before = best;
        // endpoint a inside its neighbouring pieces
        let (mut lo, mut hi) = (pm.mesh[i.saturating_sub(1)], pm.mesh[(i + 1).min(n - 1)].min(b));
        for _ in 0..cfg.refine_steps {
            let m1 = hi - GOLDEN * (hi - lo);
            let m2 = lo + GOLDEN * (hi - lo);
            let f1 = pm.value(m1, b, pm1);
            let f2 = pm.value(m2, b, pm1);
            if f1 >= f2 {
                hi = m2;
                if f1 > best {
                    best = f1;
                    a = m1;
                }
            } else {
                lo = m1;
                if f2 > best {
                    best = f2;
                    a = m2;
                }
            }
        }
        // endpoint b
        let (mut lo, mut hi) = (pm.mesh[j.saturating_sub(1)].max(a), pm.mesh[(j + 1).min(n - 1)]);
        for _ in 0..cfg.refine_steps {
            let m1 = hi - GOLDEN * (hi - lo);
            let m2 = lo + GOLDEN * (hi - lo);
            let f1 = pm.value(a, m1, pm1);
            let f2 = pm.value(a, m2, pm1);
            if f1 >= f2 {
                hi = m2;
                if f1 > best {
                    best = f1;
                    b = m1;
                }
            } else {
                lo = m1;
                if f2 > best {
                    best = f2;
                    b = m2;
                }
            }
        }
        if pass + 1 == cfg.passes.max(1) {
            last_pass_growth = if best > 0.0 { (best - before) / best } else { 0.0 };
        }
    }
    (best, Interval::new(a, b).expect("a < b maintained"), last_pass_growth)
}

/// The `A_p` search: stage 1 evaluates the functional exactly on every
/// pair of mesh points (all breakpoints in the domain), stage 2 polishes
/// the endpoints of the best candidates inside their neighbouring pieces.
/// The reported value is a certified lower bound, being a maximum of
/// exactly evaluated candidates.
pub fn ap_constant(w: &StepFunction, p: Exponent, cfg: &SearchConfig) -> Result<ApReport> {
    let dom = cfg.domain.unwrap_or_else(|| default_domain(w));
    let pm = PairMass::build(w, p, dom)?;
    let pm1 = p.p() - 1.0;
    let n = pm.mesh.len();
    if n < 2 {
        return invalid("domain contains no candidate intervals");
    }
    let mut row_bests = stage1_all_pairs(&pm, pm1);
    row_bests.sort_by(|x, y| {
        y.0.partial_cmp(&x.0)
            .unwrap()
            .then_with(|| (x.1, x.2).cmp(&(y.1, y.2)))
    });
    let candidates = n * (n - 1) / 2;
    let mut value = row_bests[0].0;
    let mut argmax = Interval::new(pm.mesh[row_bests[0].1], pm.mesh[row_bests[0].2])?;
    let mut residual = 0.0;
    for &(_, i, j) in row_bests.iter().take(FINALISTS) {
        let (v, iv, growth) = refine_pair(&pm, pm1, i, j, cfg);
        if v > value {
            value = v;
            argmax = iv;
            residual = growth;
        }
    }
    Ok(ApReport {
        value,
        argmax,
        refinement_residual: residual,
        candidates_examined: candidates,
    })
}

/// Two routes to the same number: the `A_{p'}` constant of the dual
/// weight, and the `1/(p-1)`-th power of the `A_p` constant of `w`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DualityReport {
    /// `A_{p'}` search value computed from σ as its own weight.
    pub sigma_constant: f64,
    /// `value(w)^{1/(p-1)}` from the direct search.
    pub predicted: f64,
    /// Largest per-interval relative gap between the two functional
    /// evaluations over the shared candidate set.
    pub max_rel_gap: f64,
    pub intervals_checked: usize,
}

/// Evaluates both sides of the duality identity on the same candidate
/// grid. σ is materialized numerically from `w`, and its dual weight is
/// re-raised from σ rather than substituted, so the comparison exercises
/// the full round trip.
pub fn ap_duality_check(
    w: &StepFunction,
    p: Exponent,
    cfg: &SearchConfig,
) -> Result<DualityReport> {
    let dom = cfg.domain.unwrap_or_else(|| default_domain(w));
    let sigma = w.pointwise_power(-p.dual_power())?;
    let q = Exponent::new(p.conjugate())?;
    let pm_w = PairMass::build(w, p, dom)?;
    let pm_s = PairMass::build(&sigma, q, dom)?;
    if pm_w.mesh != pm_s.mesh {
        return invalid("σ mesh diverged from the weight mesh");
    }
    let inv = p.dual_power(); // 1/(p-1) = p' - 1
    let n = pm_w.mesh.len();
    let stats = (0..n - 1)
        .into_par_iter()
        .map(|i| {
            let mut best_s = f64::NEG_INFINITY;
            let mut best_w = f64::NEG_INFINITY;
            let mut gap = 0.0_f64;
            for j in (i + 1)..n {
                let vs = pm_s.grid_value(i, j, q.p() - 1.0);
                let vw = pm_w.grid_value(i, j, p.p() - 1.0);
                best_s = best_s.max(vs);
                best_w = best_w.max(vw);
                let predicted = vw.powf(inv);
                let denom = predicted.max(1.0);
                gap = gap.max((vs - predicted).abs() / denom);
            }
            (best_s, best_w, gap)
        })
        .reduce(
            || (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0),
            |a, b| (a.0.max(b.0), a.1.max(b.1), a.2.max(b.2)),
        );
    Ok(DualityReport {
        sigma_constant: stats.0,
        predicted: stats.1.powf(inv),
        max_rel_gap: stats.2,
        intervals_checked: n * (n - 1) / 2,
    })
}

/// Quadrature-backed `A_∞` diagnostic.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AinfReport {
    pub value: f64,
    pub argmax: Interval,
    /// Half-cell Richardson estimate for the winner's outer integral.
    pub quadrature_residual: f64,
    pub candidates_examined: usize,
    /// True when the candidate mesh had to drop breakpoints to stay
    /// within budget — the search is then coarse (the winner is still
    /// re-evaluated on the full mesh).
    pub search_mesh_subsampled: bool,
}

/// Number of mesh points the `A_∞` candidate search keeps. The maximal
/// function inside the integrand makes each candidate far more expensive
/// than in the `A_p` search, so the search grid is deliberately coarse;
/// the winning interval is re-integrated on the exact mesh with 16-node
/// cells and a half-cell error estimate.
pub const AINF_SEARCH_MESH: usize = 48;

/// `sup_I (1/w(I))·∫_I M(w·χ_I)` — the maximal-function form of the
/// `A_∞` characteristic. The inner maximal function is evaluated exactly;
/// the outer integral is Gauss quadrature, so the result carries a
/// residual rather than an exactness claim.
pub fn ainf_constant(w: &StepFunction, cfg: &SearchConfig) -> Result<AinfReport> {
    let dom = cfg.domain.unwrap_or_else(|| default_domain(w));
    let mut mesh = vec![dom.a()];
    let mut positive = true;
    w.walk_segments(dom.a(), dom.b(), |_lo, hi, v| {
        if v <= 0.0 {
            positive = false;
        }
        mesh.push(hi);
    })?;
    if !positive {
        return domain("weight must be strictly positive on the domain");
    }
    let full_mesh = mesh.clone();
    let subsampled = mesh.len() > AINF_SEARCH_MESH;
    if subsampled {
        let n = mesh.len();
        let keep: Vec<f64> = (0..AINF_SEARCH_MESH)
            .map(|k| mesh[k * (n - 1) / (AINF_SEARCH_MESH - 1)])
            .collect();
        mesh = keep;
        mesh.dedup();
    }

    let score = |a: f64, b: f64, nodes: &[(f64, f64)], cells: &[f64]| -> Result<f64> {
        let iv = Interval::new(a, b)?;
        let restricted = w.restrict(iv)?;
        let ev = MaximalEvaluator::new(&restricted)?;
        let mass = w.integrate_raw(a, b);
        if mass <= 0.0 {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for cell in cells.windows(2) {
            if cell[1] > cell[0] {
                total += quadrature::integrate(nodes, cell[0], cell[1], |x| ev.eval(x));
            }
        }
        Ok(total / mass)
    };

    let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
    for i in 0..mesh.len() - 1 {
        for j in (i + 1)..mesh.len() {
            let cells: Vec<f64> = mesh[i..=j].to_vec();
            let v = score(mesh[i], mesh[j], &quadrature::GAUSS_4, &cells)?;
            best = better((v, i, j), best);
        }
    }
    let (a, b) = (mesh[best.1], mesh[best.2]);
    // exact-mesh re-evaluation of the winner, with error estimate
    let iv = Interval::new(a, b)?;
    let restricted = w.restrict(iv)?;
    let ev = MaximalEvaluator::new(&restricted)?;
    let mass = w.integrate_raw(a, b);
    let mut total = 0.0;
    let mut err = 0.0;
    let lo_idx = full_mesh.partition_point(|&m| m < a);
    let mut cells = vec![a];
    cells.extend(full_mesh[lo_idx..].iter().copied().filter(|&m| m > a && m < b));
    cells.push(b);
    for cell in cells.windows(2) {
        if cell[1] > cell[0] {
            let (v, e) = quadrature::integrate_with_estimate(cell[0], cell[1], |x| ev.eval(x));
            total += v;
            err += e;
        }
    }
    let value = total / mass;
    Ok(AinfReport {
        value,
        argmax: iv,
        quadrature_residual: if total > 0.0 { err / total } else { 0.0 },
        candidates_examined: mesh.len() * (mesh.len() - 1) / 2,
        search_mesh_subsampled: subsampled,
    })
}

/// Outcome of the reverse-Hölder scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RhProbe {
    /// Largest grid exponent `r` with `(avg_I w^r)^{1/r} ≤ 2·avg_I w` on
    /// every candidate interval, if any.
    pub r_max: Option<f64>,
    /// `1/((r_max − 1)·[w]_{A_p})`, the self-improvement scale implied by
    /// the passing exponent.
    pub c_estimate: Option<f64>,
    /// An interval violating the inequality at the smallest grid
    /// exponent, when even that fails.
    pub witness: Option<Interval>,
    pub intervals_checked: usize,
}

/// Cap on the reverse-Hölder candidate mesh: the scan re-walks the
/// domain once per grid exponent, so it keeps a smaller grid than the
/// `A_p` search and subsamples evenly beyond it.
pub const RH_SEARCH_MESH: usize = 2_000;

/// Scans `r ∈ {1 + 2^{-j}}` downward for the largest exponent whose
/// doubling-form reverse-Hölder inequality holds on every candidate
/// interval. Power-mean monotonicity makes the predicate monotone in
/// `r`, so the first passing exponent is the grid maximum.
pub fn reverse_holder_probe(w: &StepFunction, p: Exponent, cfg: &SearchConfig) -> Result<RhProbe> {
    let dom = cfg.domain.unwrap_or_else(|| default_domain(w));
    let mut mesh = vec![dom.a()];
    let mut vals = Vec::new();
    w.walk_segments(dom.a(), dom.b(), |_lo, hi, v| {
        mesh.push(hi);
        vals.push(v);
    })?;
    if vals.iter().any(|&v| v <= 0.0) {
        return domain("weight must be strictly positive on the domain");
    }
    if mesh.len() > RH_SEARCH_MESH {
        let n = mesh.len();
        let idx: Vec<usize> = (0..RH_SEARCH_MESH)
            .map(|k| k * (n - 1) / (RH_SEARCH_MESH - 1))
            .collect();
        let mut new_mesh = Vec::with_capacity(RH_SEARCH_MESH);
        for &i in &idx {
            new_mesh.push(mesh[i]);
        }
        new_mesh.dedup();
        mesh = new_mesh;
    }
    // exact prefix masses of w and w^r on the (possibly subsampled) mesh
    let prefix = |exponent: f64| -> Vec<f64> {
        let mut c = vec![0.0];
        for k in 0..mesh.len() - 1 {
            let mut m = 0.0;
            w.walk_segments(mesh[k], mesh[k + 1], |lo, hi, v| {
                m += v.powf(exponent) * (hi - lo);
            })
            .expect("mesh inside domain");
            c.push(c[k] + m);
        }
        c
    };
    let cw = prefix(1.0);
    let n = mesh.len();
    let intervals = n * (n - 1) / 2;
    let mut last_witness = None;
    for j in 0..=20 {
        let r = 1.0 + 0.5_f64.powi(j);
        let cr = prefix(r);
        let violation = (0..n - 1)
            .into_par_iter()
            .map(|i| {
                for k in (i + 1)..n {
                    let len = mesh[k] - mesh[i];
                    let lhs = ((cr[k] - cr[i]) / len).powf(1.0 / r);
                    let rhs = 2.0 * (cw[k] - cw[i]) / len;
                    if lhs > rhs {
                        return Some((i, k));
                    }
                }
                None
            })
            .reduce(|| None, |a, b| a.or(b));
        match violation {
            None => {
                let ap = ap_constant(w, p, cfg)?;
                return Ok(RhProbe {
                    r_max: Some(r),
                    c_estimate: Some(1.0 / ((r - 1.0) * ap.value)),
                    witness: None,
                    intervals_checked: intervals,
                });
            }
            Some((i, k)) => {
                last_witness = Some(Interval::new(mesh[i], mesh[k])?);
            }
        }
    }
    Ok(RhProbe {
        r_max: None,
        c_estimate: None,
        witness: last_witness,
        intervals_checked: intervals,
    })
}

/// Both sides of the covering inequality for a sparse family with scalar
/// coefficients: the weighted norm of `Σ λ_Q χ_Q` on the left, the
/// Carleson-type sum over cubes on the right. Exact.
pub fn cov_functional(
    s: &SparseFamily,
    lambda: &[f64],
    w: &StepFunction,
    p: Exponent,
) -> Result<(f64, f64)> {
    if s.is_empty() {
        return invalid("covering functional needs a nonempty family");
    }
    if lambda.len() != s.len() {
        return invalid(format!("{} coefficients for {} cubes", lambda.len(), s.len()));
    }
    if lambda.iter().any(|&l| l < 0.0) {
        return invalid("coefficients must be nonnegative");
    }
    let spans: Vec<Interval> = (0..s.len())
        .map(|i| s.interval(i))
        .collect::<Result<Vec<_>>>()?;
    let wq: Vec<f64> = spans.iter().map(|iv| w.integrate_raw(iv.a(), iv.b())).collect();
    if wq.iter().any(|&m| m <= 0.0) {
        return domain("weight must give positive mass to every cube");
    }
    // left side on the common mesh
    let mut cuts: Vec<f64> = spans.iter().flat_map(|iv| [iv.a(), iv.b()]).collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    let mut lhs_p = 0.0;
    for cell in cuts.windows(2) {
        let x = cell[0];
        let h: f64 = spans
            .iter()
            .zip(lambda)
            .filter(|(iv, _)| iv.contains(x))
            .map(|(_, &l)| l)
            .sum();
        if h > 0.0 {
            lhs_p += h.powf(p.p()) * w.integrate_raw(cell[0], cell[1]);
        }
    }
    // right side over cubes, inner sum over contained cubes (inclusive)
    let lat = s.lattice();
    let cubes = s.cubes();
    let mut rhs_p = 0.0;
    for (q, (&lq, &wq_q)) in cubes.iter().zip(lambda.iter().zip(&wq)) {
        let mut inner = 0.0;
        for (r, (&lr, &wq_r)) in cubes.iter().zip(lambda.iter().zip(&wq)) {
            if lat.contains_cube(q, r) {
                inner += lr * wq_r / wq_q;
            }
        }
        rhs_p += lq * inner.powf(p.p() - 1.0) * wq_q;
    }
    Ok((lhs_p.powf(1.0 / p.p()), rhs_p.powf(1.0 / p.p())))
}
