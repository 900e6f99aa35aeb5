//! Seeded randomized property suites.
//!
//! Each suite draws a deterministic stream of instances from a base seed,
//! exercises one cluster of guarantees — sparse-family constructions,
//! matrix-weight inequalities, the covering equivalence, the duality
//! identity, and oracle agreement of the fast evaluators with brute
//! force — and tallies per-check results: instance count, violation
//! count, the worst measured statistic against its pinned bound, and a
//! serialized witness of the first violating instance so a red run can
//! be replayed offline.
//!
//! Instances are generated per index from a split-mixed seed, so suites
//! parallelize over instances without changing their results, and a
//! fixed seed reproduces the same numbers byte for byte.

use crate::dyadic::{DyadicCube, DyadicLattice};
use crate::error::{invalid, Result};
use crate::functionals::{ap_duality_check, cov_functional, SearchConfig};
use crate::matweight::{
    cg_maximal, cg_strong_norm_estimate, default_candidates, default_probes, matrix_ap,
    prop_pr1_check, prop_pr2_check, reducing_operator, scap_check, MatrixWeight, MaximalMode,
    VectorField,
};
use crate::operators::{dyadic_maximal, weak_lp_quasinorm};
use crate::sparse::{
    cz_decompose, select_carriers, spb_construct, split_sparse, vanishing_check, verify_sparseness,
    SparseFamily,
};
use crate::stepfn::{Exponent, Interval, StepFunction};
use crate::weights::{build_power_weight, build_weight_large_p, build_weight_small_p};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

// ---------------------------------------------------------------------------
// pinned suite bounds
// ---------------------------------------------------------------------------

/// Pinned pass bounds for the randomized suites. Calibrated values carry
/// a comment with the worst statistic measured at calibration time; the
/// margins absorb seed-to-seed variation without hiding regressions.
pub mod bounds {
    /// Relative slack on exact identities verified in floating point.
    pub const EXACT_REL: f64 = 1e-12;
    /// `p = 2` reducing operators are closed-form exact.
    pub const REDUCING_P2: f64 = 1e-8;
    /// Two-sided band for general reducing operators in dimension 2.
    pub fn reducing_two_sided() -> f64 {
        2.0_f64.sqrt() * 1.05
    }
    /// Averaged-inverse ratio cap (dimension-2 suite).
    pub const PR1_RATIO: f64 = 4.0;
    /// Power-average ratio cap at `s = 1 + 1/(8·[W])`; measured worst
    /// 0.5486 over the calibration run (50 weights, p ∈ {2, 3}).
    pub const PR2_RATIO: f64 = 2.0;
    /// Strong-norm estimate over `[W]^{1/(p-1)}`; measured worst 0.7009
    /// over the calibration run (50 weights, p ∈ {2, 3}).
    pub const SQB_OVER_AP: f64 = 2.0;
    /// Suite-wide covering-equivalence constant.
    pub const COV_EQUIVALENCE: f64 = 32.0;
    /// Duality identity per candidate interval.
    pub const DUALITY_REL: f64 = 1e-9;
    /// Oracle agreement between fast evaluators and brute force.
    pub const ORACLE_REL: f64 = 1e-10;
    /// Domination check slack (pure roundoff).
    pub const DOMINATION_REL: f64 = 1e-9;
}

// ---------------------------------------------------------------------------
// check tallies
// ---------------------------------------------------------------------------

/// Outcome of one named suite check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteCheck {
    pub name: String,
    pub instances: usize,
    pub violations: usize,
    /// Worst measured statistic across the suite; its meaning is fixed
    /// per check and compared against `bound`.
    pub worst: f64,
    /// The pinned pass bound on `worst`.
    pub bound: f64,
    /// Serialized inputs of the first violating instance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<String>,
}

impl SuiteCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// One check's per-instance measurement: the statistic, whether the
/// instance passed, and a lazily-built witness used on the first failure.
struct Sample {
    stat: f64,
    ok: bool,
    witness: Option<String>,
}

fn judge(stat: f64, bound: f64, witness: impl FnOnce() -> String) -> Sample {
    let ok = stat <= bound && stat.is_finite();
    Sample {
        stat,
        ok,
        witness: if ok { None } else { Some(witness()) },
    }
}

/// Fold per-instance samples (one vector per check, instance-major) into
/// the named checks.
fn tally(names: &[(&str, f64)], rows: Vec<Vec<Sample>>) -> Vec<SuiteCheck> {
    let mut out: Vec<SuiteCheck> = names
        .iter()
        .map(|(n, b)| SuiteCheck {
            name: n.to_string(),
            instances: 0,
            violations: 0,
            worst: 0.0,
            bound: *b,
            counterexample: None,
        })
        .collect();
    for row in rows {
        for (slot, s) in row.into_iter().enumerate() {
            let c = &mut out[slot];
            c.instances += 1;
            if !s.stat.is_nan() {
                c.worst = if s.stat.is_finite() {
                    c.worst.max(s.stat)
                } else {
                    f64::INFINITY
                };
            }
            if !s.ok {
                c.violations += 1;
                if c.counterexample.is_none() {
                    c.counterexample = s.witness;
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// seeded generators
// ---------------------------------------------------------------------------

/// Deterministic per-instance generator: the pair (seed, index) is
/// split-mixed so neighbouring indices decorrelate.
pub fn instance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

fn unit() -> Interval {
    Interval::new(0.0, 1.0).unwrap()
}

/// Positive step function on the unit interval's uniform mesh, with
/// log-uniform values `2^{±spread}`.
pub fn random_step(rng: &mut ChaCha8Rng, cells: usize, spread: f64) -> Result<StepFunction> {
    let breaks: Vec<f64> = (0..=cells).map(|i| i as f64 / cells as f64).collect();
    let values: Vec<f64> = (0..cells)
        .map(|_| f64::exp2(rng.gen_range(-spread..spread)))
        .collect();
    StepFunction::new(breaks, values, 0.0, None)
}

/// Random η-sparse family inside the unit cube of the standard lattice.
///
/// Children are placed three generations below their parent (eighth
/// slots), at most `⌊(1-η)·8⌋` of the eight slots per cube, so the
/// claimed sparseness holds by construction and is re-verified exactly.
pub fn random_sparse_family(
    rng: &mut ChaCha8Rng,
    eta: f64,
    levels: u32,
) -> Result<SparseFamily> {
    let lattice = DyadicLattice::standard(1);
    let budget = ((1.0 - eta) * 8.0).floor() as usize;
    let mut cubes = Vec::new();
    let mut frontier = vec![DyadicCube {
        generation: 0,
        index: vec![0],
    }];
    for _ in 0..levels {
        let mut next = Vec::new();
        for q in frontier.drain(..) {
            cubes.push(q.clone());
            let picks = rng.gen_range(0..=budget);
            let mut slots: Vec<i64> = (0..8).collect();
            for s in 0..picks {
                let j = rng.gen_range(s..slots.len());
                slots.swap(s, j);
            }
            for &slot in &slots[..picks] {
                next.push(DyadicCube {
                    generation: q.generation + 3,
                    index: vec![q.index[0] * 8 + slot],
                });
            }
        }
        frontier = next;
    }
    cubes.extend(frontier);
    SparseFamily::new(lattice, cubes, eta)
}

/// Random SPD 2×2 matrix: rotation times `diag(2^{±spread})`.
pub fn random_spd2(rng: &mut ChaCha8Rng, spread: f64) -> DMatrix<f64> {
    let t: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let r = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
    let d = DMatrix::from_partial_diagonal(
        2,
        2,
        &[
            f64::exp2(rng.gen_range(-spread..spread)),
            f64::exp2(rng.gen_range(-spread..spread)),
        ],
    );
    let m = &r * d * r.transpose();
    0.5 * (&m + m.transpose())
}

/// Random 2×2 matrix weight on the unit interval.
pub fn random_matrix_weight(
    rng: &mut ChaCha8Rng,
    cells: usize,
    spread: f64,
) -> Result<MatrixWeight> {
    let pieces: Vec<DMatrix<f64>> = (0..cells).map(|_| random_spd2(rng, spread)).collect();
    MatrixWeight::new(unit(), pieces)
}

/// Random vector field with entries uniform in `[-1, 1]`, resampled until
/// it is not identically zero.
pub fn random_vector_field(rng: &mut ChaCha8Rng, cells: usize, n: usize) -> Result<VectorField> {
    loop {
        let values: Vec<DVector<f64>> = (0..cells)
            .map(|_| DVector::from_iterator(n, (0..n).map(|_| rng.gen_range(-1.0..1.0))))
            .collect();
        if values.iter().any(|v| v.norm() > 1e-3) {
            return VectorField::new(unit(), values);
        }
    }
}

fn weight_json(w: &MatrixWeight) -> serde_json::Value {
    serde_json::to_value(w).unwrap_or(serde_json::Value::Null)
}

fn field_json(f: &VectorField) -> serde_json::Value {
    serde_json::to_value(f).unwrap_or(serde_json::Value::Null)
}

fn step_json(f: &StepFunction) -> serde_json::Value {
    serde_json::to_value(f).unwrap_or(serde_json::Value::Null)
}

fn family_json(s: &SparseFamily) -> serde_json::Value {
    serde_json::to_value(s).unwrap_or(serde_json::Value::Null)
}

// ---------------------------------------------------------------------------
// sparse lemma suite
// ---------------------------------------------------------------------------

/// Randomized checks of the sparse-family constructions: carrier
/// selection's eightfold integral bound, splitting's improved sparseness,
/// the off-support vanishing of the bad part, the stopping-time
/// domination, and the Calderón–Zygmund invariants.
pub fn sparse_suite(seed: u64, instances: usize) -> Result<Vec<SuiteCheck>> {
    if instances == 0 {
        return invalid("suite needs at least one instance");
    }
    let names = [
        ("carrier_eightfold", 1.0 + bounds::EXACT_REL),
        ("split_sparseness", 1.0 + bounds::EXACT_REL),
        ("vanishing_off_omega", bounds::EXACT_REL),
        ("domination_factor", 1.0 + bounds::DOMINATION_REL),
        ("cz_invariants", bounds::EXACT_REL),
    ];
    let rows: Vec<Vec<Sample>> = (0..instances as u64)
        .into_par_iter()
        .map(|i| sparse_instance(seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(tally(&names, rows))
}

fn sparse_instance(seed: u64, i: u64) -> Result<Vec<Sample>> {
    let mut rng = instance_rng(seed, i);
    let lattice = DyadicLattice::standard(1);
    let root = DyadicCube {
        generation: 0,
        index: vec![0],
    };

    // Lemma: carrier selection with the eightfold bound
    let fam78 = random_sparse_family(&mut rng, 0.875, 3)?;
    let phi = random_step(&mut rng, 32, 3.0)?;
    let gamma = phi.average(unit()) * rng.gen_range(0.25..1.0);
    let sel = select_carriers(&fam78, &phi, gamma)?;
    let mut carrier_worst = 0.0_f64;
    for (&q, &g) in sel.cube_integrals.iter().zip(&sel.carrier_integrals) {
        if q > 0.0 {
            carrier_worst = carrier_worst.max(q / (8.0 * g));
        }
    }
    let carrier = judge(carrier_worst, 1.0 + bounds::EXACT_REL, || {
        json!({
            "instance": i,
            "family": family_json(&fam78),
            "phi": step_json(&phi),
            "gamma": gamma,
        })
        .to_string()
    });

    // Lemma: splitting improves sparseness to m/(m + 1/η − 1)
    let eta = if i % 2 == 0 { 0.5 } else { 0.875 };
    let m = 2 + (i % 2) as usize;
    let fam = random_sparse_family(&mut rng, eta, 3)?;
    let target = m as f64 / (m as f64 + 1.0 / fam.eta() - 1.0);
    let parts = split_sparse(&fam, m)?;
    let mut split_worst = 0.0_f64;
    let mut rejoined: Vec<DyadicCube> = Vec::new();
    for part in &parts {
        rejoined.extend(part.cubes().iter().cloned());
        if !part.is_empty() {
            let measured = verify_sparseness(part.lattice(), part.cubes())?;
            split_worst = split_worst.max(target / measured);
        }
    }
    rejoined.sort();
    let mut original = fam.cubes().to_vec();
    original.sort();
    let partition_ok = rejoined == original;
    let split = Sample {
        stat: split_worst,
        ok: partition_ok && split_worst <= 1.0 + bounds::EXACT_REL,
        witness: if partition_ok && split_worst <= 1.0 + bounds::EXACT_REL {
            None
        } else {
            Some(
                json!({
                    "instance": i,
                    "family": family_json(&fam),
                    "m": m,
                    "target": target,
                })
                .to_string(),
            )
        },
    };

    // Lemma: sparse sums of the bad part vanish off the selected cubes
    let psi = random_step(&mut rng, 32, 3.0)?;
    let gamma_cz = psi.average(unit()) * rng.gen_range(1.5..4.0);
    let cz = cz_decompose(&psi, gamma_cz, &lattice, &root)?;
    let van_fam = random_sparse_family(&mut rng, 0.5, 3)?;
    let lambdas: Vec<StepFunction> = (0..van_fam.len())
        .map(|j| {
            let iv = van_fam.interval(j)?;
            let scale = rng.gen_range(0.1..3.0);
            Ok(StepFunction::indicator(iv).scale(scale))
        })
        .collect::<Result<Vec<_>>>()?;
    let vr = vanishing_check(&lambdas, &van_fam, &cz)?;
    let vanish = judge(
        vr.max_off_omega / vr.scale.max(1.0),
        bounds::EXACT_REL,
        || {
            json!({
                "instance": i,
                "psi": step_json(&psi),
                "gamma": gamma_cz,
                "family": family_json(&van_fam),
            })
            .to_string()
        },
    );

    // Lemma: stopping-time domination with factor 2^r at sampled points
    let (n_dim, p_val, depth) = match i % 3 {
        0 => (1, 1.5, 8u32),
        1 => (2, 2.0, 8),
        _ => (2, 3.0, 7),
    };
    let cells = 1usize << depth;
    let w = if n_dim == 1 {
        let vals: Vec<f64> = (0..cells)
            .map(|_| f64::exp2(rng.gen_range(-4.0..4.0)))
            .collect();
        MatrixWeight::scalar_on_mesh(unit(), &vals)?
    } else {
        random_matrix_weight(&mut rng, cells, 3.0)?
    };
    let f = random_vector_field(&mut rng, cells, n_dim)?;
    let p = Exponent::new(p_val)?;
    let samples: Vec<usize> = (0..1024).map(|_| rng.gen_range(0..cells)).collect();
    let (_, report) = spb_construct(&lattice, &root, &w, p, &f, 64, &samples)?;
    let dom_stat = report
        .worst_max_form
        .max(report.worst_sum_r1)
        .max(report.worst_sum_rp)
        .max(2.0 * report.max_child_cover);
    let domination = judge(dom_stat, 1.0 + bounds::DOMINATION_REL, || {
        json!({
            "instance": i,
            "weight": weight_json(&w),
            "field": field_json(&f),
            "p": p_val,
        })
        .to_string()
    });

    // Calderón–Zygmund invariants: mean-zero, boundedness, disjointness,
    // the weak (1,1) measure bound, and maximality of the selected cubes
    let mut cz_stat = 0.0_f64;
    let scale = psi.integrate(unit()).max(1.0);
    let mut intervals = Vec::new();
    for q in &cz.cubes {
        let iv = lattice.interval(q)?;
        cz_stat = cz_stat.max(cz.bad.integrate(iv).abs() / scale);
        let parent = lattice.parent(q)?;
        let pav = psi.average(lattice.interval(&parent)?);
        if pav > gamma_cz * (1.0 + 1e-12) {
            cz_stat = f64::INFINITY; // selected cube was not maximal
        }
        intervals.push(iv);
    }
    intervals.sort_by(|a, b| a.a().partial_cmp(&b.a()).unwrap());
    for w2 in intervals.windows(2) {
        if w2[1].a() < w2[0].b() {
            cz_stat = f64::INFINITY; // overlap
        }
    }
    let g_cap = 2.0 * gamma_cz;
    for &v in cz.good.values() {
        if v > g_cap * (1.0 + 1e-12) {
            cz_stat = f64::INFINITY;
        }
    }
    let omega_measure: f64 = intervals.iter().map(|iv| iv.len()).sum();
    if omega_measure > psi.integrate(unit()) / gamma_cz * (1.0 + 1e-12) {
        cz_stat = f64::INFINITY;
    }
    let cz_check = judge(cz_stat, bounds::EXACT_REL, || {
        json!({
            "instance": i,
            "psi": step_json(&psi),
            "gamma": gamma_cz,
        })
        .to_string()
    });

    Ok(vec![carrier, split, vanish, domination, cz_check])
}

// ---------------------------------------------------------------------------
// matrix-weight suite
// ---------------------------------------------------------------------------

/// Randomized checks of the matrix-weight machinery in dimension 2 at
/// mesh depth 8: exactness of the closed-form `p = 2` reducing operator,
/// the two-sided band of the general one, the averaged-inverse and
/// power-average inequalities, the per-direction scalar bound, and the
/// strong-norm sanity cap.
pub fn matrix_suite(seed: u64, instances: usize) -> Result<Vec<SuiteCheck>> {
    if instances == 0 {
        return invalid("suite needs at least one instance");
    }
    let names = [
        ("reducing_p2_exact", 1.0 + bounds::REDUCING_P2),
        ("reducing_p3_two_sided", bounds::reducing_two_sided()),
        ("pr1_ratio", bounds::PR1_RATIO),
        ("pr2_ratio", bounds::PR2_RATIO),
        ("scap_directions", 1.0 + 1e-9),
        ("strong_norm_cap", bounds::SQB_OVER_AP),
    ];
    let rows: Vec<Vec<Sample>> = (0..instances as u64)
        .into_par_iter()
        .map(|i| matrix_instance(seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(tally(&names, rows))
}

fn matrix_instance(seed: u64, i: u64) -> Result<Vec<Sample>> {
    let mut rng = instance_rng(seed, i);
    let cells = 256;
    let w = random_matrix_weight(&mut rng, cells, 3.0)?;
    let full = w.full_cube();
    let witness = |extra: serde_json::Value| {
        let w_json = weight_json(&w);
        move || {
            json!({
                "instance": i,
                "weight": w_json,
                "detail": extra,
            })
            .to_string()
        }
    };

    // closed-form p = 2 reducing operator is exact
    let red2 = reducing_operator(&w, Exponent::new(2.0)?, full, 64)?;
    let p2_stat = red2.c_high.max(1.0 / red2.c_low);
    let p2 = judge(p2_stat, 1.0 + bounds::REDUCING_P2, witness(json!("p2")));

    // general reducing operator stays in the John band
    let red3 = reducing_operator(&w, Exponent::new(3.0)?, full, 64)?;
    let p3 = judge(
        red3.c_high / red3.c_low,
        bounds::reducing_two_sided(),
        witness(json!("p3")),
    );

    // averaged-inverse inequality for p ∈ {2, 3}
    let f = random_vector_field(&mut rng, cells, 2)?;
    let mut pr1_stat = 0.0_f64;
    for pv in [2.0, 3.0] {
        let rep = prop_pr1_check(&w, Exponent::new(pv)?, full, &f, 64)?;
        pr1_stat = pr1_stat.max(rep.ratio);
    }
    let pr1 = judge(pr1_stat, bounds::PR1_RATIO, witness(json!("pr1")));

    // power-average inequality at s = 1 + 1/(8·[W])
    let candidates = default_candidates(cells);
    let mut pr2_stat = 0.0_f64;
    for pv in [2.0, 3.0] {
        let p = Exponent::new(pv)?;
        let ap = matrix_ap(&w, p, &candidates)?;
        let s = 1.0 + 1.0 / (8.0 * ap);
        let rep = prop_pr2_check(&w, p, full, s, 64, Some(ap))?;
        pr2_stat = pr2_stat.max(rep.ratio);
    }
    let pr2 = judge(pr2_stat, bounds::PR2_RATIO, witness(json!("pr2")));

    // scalar projections stay below the matrix constant, 16 directions
    let p_scap = Exponent::new(if i % 2 == 0 { 2.0 } else { 3.0 })?;
    let ap_scap = matrix_ap(&w, p_scap, &candidates)?;
    let mut scap_stat = 0.0_f64;
    let mut scap_ok = true;
    for j in 0..16 {
        let theta = std::f64::consts::PI * (j as f64 + rng.gen_range(0.0..1.0)) / 16.0;
        let u = DVector::from_column_slice(&[theta.cos(), theta.sin()]);
        match scap_check(&w, p_scap, &u, &candidates, Some(ap_scap)) {
            Ok(rep) => scap_stat = scap_stat.max(rep.scalar / rep.matrix),
            Err(_) => {
                scap_ok = false;
                scap_stat = f64::INFINITY;
            }
        }
    }
    let scap = Sample {
        stat: scap_stat,
        ok: scap_ok && scap_stat <= 1.0 + 1e-9,
        witness: if scap_ok && scap_stat <= 1.0 + 1e-9 {
            None
        } else {
            Some(witness(json!("scap"))())
        },
    };

    // strong-norm estimate against its weight-constant cap
    let mut sqb_stat = 0.0_f64;
    for pv in [2.0, 3.0] {
        let p = Exponent::new(pv)?;
        let ap = matrix_ap(&w, p, &candidates)?;
        let probes = default_probes(&w, p, 64)?;
        let est = cg_strong_norm_estimate(&w, p, &probes)?;
        sqb_stat = sqb_stat.max(est.value / ap.powf(1.0 / (pv - 1.0)));
    }
    let sqb = judge(sqb_stat, bounds::SQB_OVER_AP, witness(json!("sqb")));

    Ok(vec![p2, p3, pr1, pr2, scap, sqb])
}

// ---------------------------------------------------------------------------
// covering-equivalence suite
// ---------------------------------------------------------------------------

/// Randomized two-sided comparison of the covering functional's sides,
/// plus exactness on singleton families.
pub fn cov_suite(seed: u64, instances: usize) -> Result<Vec<SuiteCheck>> {
    if instances == 0 {
        return invalid("suite needs at least one instance");
    }
    let names = [
        ("cov_equivalence", bounds::COV_EQUIVALENCE),
        ("cov_singleton_exact", bounds::EXACT_REL),
    ];
    let rows: Vec<Vec<Sample>> = (0..instances as u64)
        .into_par_iter()
        .map(|i| cov_instance(seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(tally(&names, rows))
}

fn cov_instance(seed: u64, i: u64) -> Result<Vec<Sample>> {
    let mut rng = instance_rng(seed, i);
    let p = Exponent::new([1.5, 2.0, 3.0][(i % 3) as usize])?;
    let w = random_step(&mut rng, 16, 3.0)?;

    let fam = random_sparse_family(&mut rng, 0.5, 3)?;
    let lambda: Vec<f64> = (0..fam.len())
        .map(|_| {
            if rng.gen_bool(0.2) {
                0.0
            } else {
                rng.gen_range(0.1..2.0)
            }
        })
        .collect();
    let (lhs, rhs) = cov_functional(&fam, &lambda, &w, p)?;
    let ratio = if lhs == 0.0 && rhs == 0.0 {
        1.0
    } else {
        (lhs / rhs).max(rhs / lhs)
    };
    let equivalence = judge(ratio, bounds::COV_EQUIVALENCE, || {
        json!({
            "instance": i,
            "family": family_json(&fam),
            "lambda": lambda,
            "weight": step_json(&w),
            "p": p.p(),
            "lhs": lhs,
            "rhs": rhs,
        })
        .to_string()
    });

    // singleton family: both sides collapse to λ·w(Q)^{1/p}
    let g = rng.gen_range(0..4);
    let idx = rng.gen_range(0..(1_i64 << g));
    let single = SparseFamily::new(
        DyadicLattice::standard(1),
        vec![DyadicCube {
            generation: g,
            index: vec![idx],
        }],
        1.0,
    )?;
    let lam = rng.gen_range(0.1..2.0);
    let (slhs, srhs) = cov_functional(&single, &[lam], &w, p)?;
    let singleton = judge(
        (slhs - srhs).abs() / srhs.max(f64::MIN_POSITIVE),
        bounds::EXACT_REL,
        || {
            json!({
                "instance": i,
                "generation": g,
                "index": idx,
                "lambda": lam,
                "weight": step_json(&w),
                "p": p.p(),
            })
            .to_string()
        },
    );

    Ok(vec![equivalence, singleton])
}

// ---------------------------------------------------------------------------
// duality suite
// ---------------------------------------------------------------------------

/// The duality identity per candidate interval, on random scalar weights
/// and on small members of the three constructed families.
pub fn duality_suite(seed: u64, instances: usize) -> Result<Vec<SuiteCheck>> {
    if instances == 0 {
        return invalid("suite needs at least one instance");
    }
    let names = [("duality_identity", bounds::DUALITY_REL)];
    let mut rows: Vec<Vec<Sample>> = (0..instances as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = instance_rng(seed, i);
            let p = Exponent::new([1.25, 1.5, 2.0, 3.0][(i % 4) as usize])?;
            let w = random_step(&mut rng, 12 + (i % 5) as usize, 3.0)?;
            let rep = ap_duality_check(&w, p, &SearchConfig::default())?;
            Ok(vec![judge(rep.max_rel_gap, bounds::DUALITY_REL, || {
                json!({
                    "instance": i,
                    "weight": step_json(&w),
                    "p": p.p(),
                    "gap": rep.max_rel_gap,
                })
                .to_string()
            })])
        })
        .collect::<Result<Vec<_>>>()?;

    // the constructed families at desk size
    let family_weights: Vec<(StepFunction, f64, &str)> = vec![
        (build_weight_small_p(1.5, 6)?, 1.5, "small-p"),
        (build_weight_large_p(2.0, 8)?, 2.0, "large-p"),
        (build_power_weight(0.25, 64.0)?, 2.0, "power"),
    ];
    for (w, pv, tag) in &family_weights {
        let rep = ap_duality_check(w, Exponent::new(*pv)?, &SearchConfig::default())?;
        rows.push(vec![judge(rep.max_rel_gap, bounds::DUALITY_REL, || {
            json!({ "family": tag, "p": pv, "gap": rep.max_rel_gap }).to_string()
        })]);
    }
    Ok(tally(&names, rows))
}

// ---------------------------------------------------------------------------
// oracle-equivalence suite
// ---------------------------------------------------------------------------

/// Fast evaluators against independent brute force: the dyadic maximal
/// function, the matrix-weighted maximal function over all mesh runs,
/// and the weak quasinorm.
pub fn oracle_suite(seed: u64, instances: usize) -> Result<Vec<SuiteCheck>> {
    if instances == 0 {
        return invalid("suite needs at least one instance");
    }
    let names = [
        ("dyadic_maximal_oracle", bounds::ORACLE_REL),
        ("cg_maximal_oracle", bounds::ORACLE_REL),
        ("weak_norm_oracle", bounds::ORACLE_REL),
    ];
    let rows: Vec<Vec<Sample>> = (0..instances as u64)
        .into_par_iter()
        .map(|i| oracle_instance(seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(tally(&names, rows))
}

/// Symmetric power via a fresh eigendecomposition — kept separate from
/// the library's implementation so the comparison is double-entry.
fn brute_sym_pow(m: &DMatrix<f64>, s: f64) -> DMatrix<f64> {
    let e = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|l| l.powf(s)));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

fn oracle_instance(seed: u64, i: u64) -> Result<Vec<Sample>> {
    let mut rng = instance_rng(seed, i);
    let lattice = DyadicLattice::standard(1);
    let root = DyadicCube {
        generation: 0,
        index: vec![0],
    };

    // dyadic maximal vs direct halving-chain averages on the raw values
    let depth = 3 + (i % 2) as u32;
    let cells = 1usize << depth;
    let vals: Vec<f64> = (0..cells).map(|_| rng.gen_range(0.0..4.0)).collect();
    let breaks: Vec<f64> = (0..=cells).map(|c| c as f64 / cells as f64).collect();
    let f = StepFunction::new(breaks, vals.clone(), 0.0, None)?;
    let x: f64 = rng.gen_range(0.0..1.0);
    let got = dyadic_maximal(&f, &lattice, x, &root)?;
    let cell_of_x = ((x * cells as f64) as usize).min(cells - 1);
    let mut brute = 0.0_f64;
    let (mut first, mut count) = (0usize, cells);
    loop {
        brute = brute.max(vals[first..first + count].iter().sum::<f64>() / count as f64);
        if count == 1 {
            break;
        }
        count /= 2;
        if cell_of_x >= first + count {
            first += count;
        }
    }
    let dyadic = judge(
        (got - brute).abs() / brute.max(1.0),
        bounds::ORACLE_REL,
        || json!({ "instance": i, "values": vals, "x": x }).to_string(),
    );

    // matrix-weighted maximal vs brute enumeration of every run
    let mcells = 8usize;
    let w = random_matrix_weight(&mut rng, mcells, 2.0)?;
    let fv: Vec<DVector<f64>> = (0..mcells)
        .map(|_| DVector::from_column_slice(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]))
        .collect();
    let field = VectorField::new(unit(), fv.clone())?;
    let pv = [1.5, 2.0, 3.0][(i % 3) as usize];
    let p = Exponent::new(pv)?;
    let xi = rng.gen_range(0..mcells);
    let xm = (xi as f64 + 0.5) / mcells as f64;
    let got_cg = cg_maximal(&w, p, &field, xm, MaximalMode::AllMeshIntervals)?;
    let px = brute_sym_pow(w.piece(xi), 1.0 / pv);
    let h: Vec<f64> = (0..mcells)
        .map(|j| (&px * (brute_sym_pow(w.piece(j), -1.0 / pv) * &fv[j])).norm())
        .collect();
    let mut brute_cg = 0.0_f64;
    for a in 0..=xi {
        for b in (xi + 1)..=mcells {
            brute_cg = brute_cg.max(h[a..b].iter().sum::<f64>() / (b - a) as f64);
        }
    }
    let cg = judge(
        (got_cg - brute_cg).abs() / brute_cg.max(1.0),
        bounds::ORACLE_REL,
        || {
            json!({
                "instance": i,
                "weight": weight_json(&w),
                "field": field_json(&field),
                "p": pv,
                "cell": xi,
            })
            .to_string()
        },
    );

    // weak quasinorm vs direct level enumeration
    let g = random_step(&mut rng, 10, 2.0)?;
    let use_weight = i % 2 == 0;
    let mu = if use_weight {
        Some(random_step(&mut rng, 10, 2.0)?)
    } else {
        None
    };
    let rep = weak_lp_quasinorm(&g, pv, unit(), mu.as_ref())?;
    let mut brute_weak = 0.0_f64;
    for u in g.values() {
        if *u <= 0.0 {
            continue;
        }
        let mut mass = 0.0;
        for (k, v) in g.values().iter().enumerate() {
            if *v >= *u {
                let (a, b) = (g.breakpoints()[k], g.breakpoints()[k + 1]);
                mass += match &mu {
                    Some(m) => m.integrate(Interval::new(a, b)?),
                    None => b - a,
                };
            }
        }
        brute_weak = brute_weak.max(u * mass.powf(1.0 / pv));
    }
    let weak = judge(
        (rep.value - brute_weak).abs() / brute_weak.max(1.0),
        bounds::ORACLE_REL,
        || {
            json!({
                "instance": i,
                "g": step_json(&g),
                "weighted": use_weight,
                "p": pv,
            })
            .to_string()
        },
    );

    Ok(vec![dyadic, cg, weak])
}

// ---------------------------------------------------------------------------
// aggregate
// ---------------------------------------------------------------------------

/// Instance counts for the full suite run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SuiteSizes {
    pub sparse: usize,
    pub matrix: usize,
    pub cov: usize,
    pub duality: usize,
    pub oracle: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        SuiteSizes {
            sparse: 200,
            matrix: 50,
            cov: 100,
            duality: 100,
            oracle: 1000,
        }
    }
}

impl SuiteSizes {
    /// A reduced profile for quick smoke runs.
    pub fn small() -> Self {
        SuiteSizes {
            sparse: 12,
            matrix: 4,
            cov: 12,
            duality: 8,
            oracle: 60,
        }
    }
}

/// Run every suite and concatenate the checks, names prefixed by suite.
pub fn run_all(seed: u64, sizes: SuiteSizes) -> Result<Vec<SuiteCheck>> {
    let mut out = Vec::new();
    for (prefix, checks) in [
        ("sparse", sparse_suite(seed, sizes.sparse)?),
        ("matrix", matrix_suite(seed, sizes.matrix)?),
        ("cov", cov_suite(seed, sizes.cov)?),
        ("duality", duality_suite(seed, sizes.duality)?),
        ("oracle", oracle_suite(seed, sizes.oracle)?),
    ] {
        for mut c in checks {
            c.name = format!("{prefix}/{}", c.name);
            out.push(c);
        }
    }
    Ok(out)
}
