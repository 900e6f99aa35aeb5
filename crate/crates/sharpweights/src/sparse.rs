//! Sparse cube families and their constructive verification.
//!
//! A family of dyadic cubes is η-sparse when every cube keeps a core of
//! measure at least η|Q| after removing all its strict descendants in the
//! family. Because dyadic cubes are nested or disjoint, the removed union
//! is the disjoint union of the *maximal* strict descendants, so cores and
//! sparseness constants are computed exactly from cube volumes.
//!
//! The module provides: sparseness verification, splitting a family into m
//! pieces of improved sparseness, the selection of disjoint carriers for
//! cubes with comparable averages, a dyadic Calderón–Zygmund decomposition,
//! the exact off-support vanishing of sparse operators applied to the bad
//! part, level families of comparable-average cubes, the distribution of
//! the overlap count, and a stopping-time construction that dominates the
//! matrix-weighted dyadic maximal function by a ½-sparse family.

use std::collections::HashMap;

use crate::dyadic::{DyadicCube, DyadicLattice};
use crate::error::{guard, invalid, Result};
use crate::matweight::{
    cg_maximal, check_aligned, matrix_power, operator_norm, reducing_operator, MatrixWeight,
    MaximalMode, MeshCube, VectorField,
};
use crate::stepfn::{Exponent, Interval, StepFunction};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// A verified η-sparse family of cubes from one lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFamily {
    lattice: DyadicLattice,
    cubes: Vec<DyadicCube>,
    eta: f64,
}

#[derive(Serialize, Deserialize)]
struct SparseFamilyRepr {
    shifts: Vec<u8>,
    eta: f64,
    cubes: Vec<String>,
}

impl Serialize for SparseFamily {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SparseFamilyRepr {
            shifts: self.lattice.shifts().to_vec(),
            eta: self.eta,
            cubes: self.cubes.iter().map(|q| self.lattice.cube_id(q)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SparseFamily {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = SparseFamilyRepr::deserialize(d)?;
        let lattice = DyadicLattice::new(repr.shifts).map_err(serde::de::Error::custom)?;
        let cubes = repr
            .cubes
            .iter()
            .map(|s| s.parse::<DyadicCube>())
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        SparseFamily::new(lattice, cubes, repr.eta).map_err(serde::de::Error::custom)
    }
}

/// Parent pointers within a cube family: `forest[i]` is the index of the
/// smallest family cube strictly containing cube `i`, if any.
fn family_forest(lattice: &DyadicLattice, cubes: &[DyadicCube]) -> Result<Vec<Option<usize>>> {
    let by_cube: HashMap<&DyadicCube, usize> =
        cubes.iter().enumerate().map(|(i, q)| (q, i)).collect();
    if by_cube.len() != cubes.len() {
        return invalid("family contains duplicate cubes");
    }
    let min_gen = cubes.iter().map(|q| q.generation).min().unwrap_or(0);
    let mut forest = vec![None; cubes.len()];
    for (i, q) in cubes.iter().enumerate() {
        let mut cur = q.clone();
        while cur.generation > min_gen {
            cur = lattice.parent(&cur)?;
            if let Some(&j) = by_cube.get(&cur) {
                forest[i] = Some(j);
                break;
            }
        }
    }
    Ok(forest)
}

/// Children lists derived from the parent pointers: `children[j]` holds the
/// maximal strict descendants of cube `j` within the family.
fn forest_children(forest: &[Option<usize>]) -> Vec<Vec<usize>> {
    let mut children = vec![Vec::new(); forest.len()];
    for (i, parent) in forest.iter().enumerate() {
        if let Some(j) = parent {
            children[*j].push(i);
        }
    }
    children
}

/// Exact sparseness constant of a cube family: the minimum over cubes of
/// the core fraction `|E_Q|/|Q|`, where `E_Q` removes all strict family
/// descendants. An empty or descendant-free family is 1-sparse.
pub fn verify_sparseness(lattice: &DyadicLattice, cubes: &[DyadicCube]) -> Result<f64> {
    let forest = family_forest(lattice, cubes)?;
    let children = forest_children(&forest);
    let mut eta = 1.0_f64;
    for (j, kids) in children.iter().enumerate() {
        let vol = lattice.volume(&cubes[j]);
        let covered: f64 = kids.iter().map(|&i| lattice.volume(&cubes[i])).sum();
        eta = eta.min((vol - covered) / vol);
    }
    Ok(eta.max(0.0))
}

impl SparseFamily {
    /// Build a family claiming sparseness `eta`; the claim is verified
    /// exactly and rejected when the measured constant falls below it.
    pub fn new(lattice: DyadicLattice, mut cubes: Vec<DyadicCube>, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return invalid(format!("sparseness constant {eta} outside (0, 1]"));
        }
        cubes.sort();
        cubes.dedup();
        let measured = verify_sparseness(&lattice, &cubes)?;
        if measured + 1e-12 < eta {
            return invalid(format!(
                "family is only {measured}-sparse, below the claimed {eta}"
            ));
        }
        Ok(SparseFamily {
            lattice,
            cubes,
            eta,
        })
    }

    /// Build a family carrying its measured sparseness constant.
    pub fn with_measured_eta(lattice: DyadicLattice, mut cubes: Vec<DyadicCube>) -> Result<Self> {
        cubes.sort();
        cubes.dedup();
        let measured = verify_sparseness(&lattice, &cubes)?;
        if measured <= 0.0 {
            return invalid("family has a fully covered cube (sparseness 0)");
        }
        Ok(SparseFamily {
            lattice,
            cubes,
            eta: measured,
        })
    }

    pub fn lattice(&self) -> &DyadicLattice {
        &self.lattice
    }

    pub fn cubes(&self) -> &[DyadicCube] {
        &self.cubes
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// The interval of cube `i` (one-dimensional lattices).
    pub fn interval(&self, i: usize) -> Result<Interval> {
        self.lattice.interval(&self.cubes[i])
    }

    /// The disjoint cores `E_Q` as interval unions (one-dimensional).
    pub fn cores(&self) -> Result<Vec<Vec<Interval>>> {
        let forest = family_forest(&self.lattice, &self.cubes)?;
        let children = forest_children(&forest);
        let mut out = Vec::with_capacity(self.cubes.len());
        for (j, kids) in children.iter().enumerate() {
            let q = self.lattice.interval(&self.cubes[j])?;
            let mut parts = kids
                .iter()
                .map(|&i| self.lattice.interval(&self.cubes[i]))
                .collect::<Result<Vec<_>>>()?;
            parts.sort_by(|x, y| x.a().partial_cmp(&y.a()).unwrap());
            out.push(subtract_intervals(q, &parts));
        }
        Ok(out)
    }
}

/// `q` minus a sorted disjoint list of subintervals.
fn subtract_intervals(q: Interval, parts: &[Interval]) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut cursor = q.a();
    for p in parts {
        if p.a() > cursor {
            out.push(Interval::new(cursor, p.a()).expect("gap is nonempty"));
        }
        cursor = cursor.max(p.b());
    }
    if cursor < q.b() {
        out.push(Interval::new(cursor, q.b()).expect("tail is nonempty"));
    }
    out
}

/// Split a family into `m` disjoint subfamilies, each verified at least
/// `m/(m + 1/η - 1)`-sparse (η the input family's constant).
///
/// Cubes are assigned by chain depth modulo `m`; strict descendants within
/// one class then sit at least `m` family-generations deeper, so their
/// union shrinks geometrically and the class clears the target. Should
/// verification ever fail, a greedy local reassignment pass runs, and a
/// failure after that pass is a hard error.
pub fn split_sparse(s: &SparseFamily, m: usize) -> Result<Vec<SparseFamily>> {
    if m < 2 {
        return invalid("split needs m ≥ 2");
    }
    let target = m as f64 / (m as f64 + 1.0 / s.eta - 1.0);
    let forest = family_forest(&s.lattice, &s.cubes)?;
    let mut depth = vec![0usize; s.cubes.len()];
    // cubes are sorted ancestors-first, so parents precede children
    for i in 0..s.cubes.len() {
        if let Some(j) = forest[i] {
            depth[i] = depth[j] + 1;
        }
    }
    let mut class: Vec<usize> = depth.iter().map(|d| d % m).collect();

    let class_eta = |class: &[usize], c: usize| -> Result<f64> {
        let cubes: Vec<DyadicCube> = s
            .cubes
            .iter()
            .zip(class)
            .filter(|(_, &cc)| cc == c)
            .map(|(q, _)| q.clone())
            .collect();
        verify_sparseness(&s.lattice, &cubes)
    };

    let verified = |class: &[usize]| -> Result<bool> {
        for c in 0..m {
            if class_eta(class, c)? + 1e-12 < target {
                return Ok(false);
            }
        }
        Ok(true)
    };

    if !verified(&class)? {
        // Greedy repair: move cubes out of the class whose constraint they
        // violate, one at a time, into the class that stays best off.
        let budget = 2 * s.cubes.len() + 8;
        let mut moves = 0;
        'repair: while moves < budget {
            for i in 0..s.cubes.len() {
                let home = class[i];
                let before = class_eta(&class, home)?;
                if before + 1e-12 >= target {
                    continue;
                }
                let mut best: Option<(usize, f64)> = None;
                for c in 0..m {
                    if c == home {
                        continue;
                    }
                    class[i] = c;
                    let worst = (0..m)
                        .map(|cc| class_eta(&class, cc))
                        .collect::<Result<Vec<_>>>()?
                        .into_iter()
                        .fold(f64::INFINITY, f64::min);
                    if best.map_or(true, |(_, w)| worst > w) {
                        best = Some((c, worst));
                    }
                }
                let (c, _) = best.expect("m ≥ 2 offers an alternative class");
                class[i] = c;
                moves += 1;
                if verified(&class)? {
                    break 'repair;
                }
                continue 'repair;
            }
            break;
        }
        if !verified(&class)? {
            return guard(format!(
                "split into {m} parts could not reach {target}-sparseness"
            ));
        }
    }

    (0..m)
        .map(|c| {
            let cubes: Vec<DyadicCube> = s
                .cubes
                .iter()
                .zip(&class)
                .filter(|(_, &cc)| cc == c)
                .map(|(q, _)| q.clone())
                .collect();
            if cubes.is_empty() {
                return Ok(SparseFamily {
                    lattice: s.lattice.clone(),
                    cubes,
                    eta: 1.0,
                });
            }
            SparseFamily::new(s.lattice.clone(), cubes, target.min(1.0))
        })
        .collect()
}

/// The disjoint carriers selected for cubes of comparable average.
#[derive(Debug, Clone)]
pub struct CarrierSelection {
    pub gamma: f64,
    /// The selected cubes: those with `γ ≤ avg_Q φ ≤ 4γ`.
    pub cubes: Vec<DyadicCube>,
    /// `G_Q`: the cube minus all smaller selected cubes, as interval unions.
    pub carriers: Vec<Vec<Interval>>,
    /// `∫_Q φ` per selected cube.
    pub cube_integrals: Vec<f64>,
    /// `∫_{G_Q} φ` per selected cube.
    pub carrier_integrals: Vec<f64>,
}

impl CarrierSelection {
    /// Does `∫_Q φ ≤ 8 ∫_{G_Q} φ` hold for every selected cube?
    pub fn eightfold_bound_holds(&self) -> bool {
        self.cube_integrals
            .iter()
            .zip(&self.carrier_integrals)
            .all(|(&q, &g)| q <= 8.0 * g * (1.0 + 1e-12) + f64::MIN_POSITIVE)
    }
}

/// From a ≥ 7/8-sparse family, select the cubes whose φ-average lies in
/// `[γ, 4γ]` and hand each a carrier `G_Q` disjoint from all smaller
/// selected cubes; the construction guarantees `∫_Q φ ≤ 8 ∫_{G_Q} φ`.
pub fn select_carriers(
    s: &SparseFamily,
    phi: &StepFunction,
    gamma: f64,
) -> Result<CarrierSelection> {
    if s.eta + 1e-12 < 0.875 {
        return invalid(format!(
            "carrier selection needs a 7/8-sparse family, got {}",
            s.eta
        ));
    }
    if gamma <= 0.0 {
        return invalid("threshold must be positive");
    }
    if phi.values().iter().any(|&v| v < 0.0) || phi.outside_value() < 0.0 {
        return invalid("φ must be nonnegative");
    }
    let mut selected = Vec::new();
    for (i, q) in s.cubes.iter().enumerate() {
        let avg = phi.average(s.interval(i)?);
        if gamma <= avg && avg <= 4.0 * gamma {
            selected.push(q.clone());
        }
    }
    let forest = family_forest(&s.lattice, &selected)?;
    let children = forest_children(&forest);
    let mut carriers = Vec::with_capacity(selected.len());
    let mut cube_integrals = Vec::with_capacity(selected.len());
    let mut carrier_integrals = Vec::with_capacity(selected.len());
    for (j, kids) in children.iter().enumerate() {
        let q = s.lattice.interval(&selected[j])?;
        let mut parts = kids
            .iter()
            .map(|&i| s.lattice.interval(&selected[i]))
            .collect::<Result<Vec<_>>>()?;
        parts.sort_by(|x, y| x.a().partial_cmp(&y.a()).unwrap());
        let whole = phi.integrate(q);
        let removed: f64 = parts.iter().map(|p| phi.integrate(*p)).sum();
        carriers.push(subtract_intervals(q, &parts));
        cube_integrals.push(whole);
        carrier_integrals.push(whole - removed);
    }
    Ok(CarrierSelection {
        gamma,
        cubes: selected,
        carriers,
        cube_integrals,
        carrier_integrals,
    })
}

/// A dyadic Calderón–Zygmund decomposition at threshold γ.
#[derive(Debug, Clone)]
pub struct CZDecomposition {
    pub threshold: f64,
    /// The maximal cubes with average above the threshold (disjoint).
    pub cubes: Vec<DyadicCube>,
    /// Mean-zero on every selected cube, zero elsewhere.
    pub bad: StepFunction,
    /// Equals the cube average on each selected cube, ψ elsewhere.
    pub good: StepFunction,
    pub lattice: DyadicLattice,
    pub window: DyadicCube,
}

/// Decompose `ψ = g + b` over the window cube at threshold γ by selecting
/// the maximal lattice cubes whose ψ-average exceeds γ.
pub fn cz_decompose(
    psi: &StepFunction,
    gamma: f64,
    lattice: &DyadicLattice,
    window: &DyadicCube,
) -> Result<CZDecomposition> {
    if lattice.dim() != 1 {
        return invalid("decomposition works on one-dimensional lattices");
    }
    if psi.values().iter().any(|&v| v < 0.0) || psi.outside_value() < 0.0 {
        return invalid("ψ must be nonnegative");
    }
    let root = lattice.interval(window)?;
    if gamma <= 0.0 || psi.average(root) > gamma {
        return invalid(format!(
            "threshold {gamma} must exceed the window average {}",
            psi.average(root)
        ));
    }

    // stopping time: descend while a breakpoint splits the cube
    let mut selected = Vec::new();
    let mut stack = vec![window.clone()];
    let mut scratch = Vec::new();
    while let Some(cube) = stack.pop() {
        let iv = lattice.interval(&cube)?;
        scratch.clear();
        psi.breakpoints_within(iv.a(), iv.b(), &mut scratch)?;
        if scratch.is_empty() {
            continue; // constant on the cube, average ≤ γ inherited
        }
        for child in lattice.children(&cube)? {
            let ci = lattice.interval(&child)?;
            if psi.average(ci) > gamma {
                selected.push(child);
            } else {
                stack.push(child);
            }
        }
    }
    selected.sort();

    // assemble b and g on the common mesh of ψ and the selected cubes
    let mut cuts = vec![root.a(), root.b()];
    psi.breakpoints_within(root.a(), root.b(), &mut cuts)?;
    let mut cube_span = Vec::with_capacity(selected.len());
    for q in &selected {
        let iv = lattice.interval(q)?;
        cuts.push(iv.a());
        cuts.push(iv.b());
        cube_span.push((iv, psi.average(iv)));
    }
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    let mut bad_vals = Vec::with_capacity(cuts.len() - 1);
    let mut good_vals = Vec::with_capacity(cuts.len() - 1);
    for w in cuts.windows(2) {
        let x = w[0];
        let v = psi.eval(x);
        match cube_span.iter().find(|(iv, _)| iv.contains(x)) {
            Some((_, avg)) => {
                bad_vals.push(v - avg);
                good_vals.push(*avg);
            }
            None => {
                bad_vals.push(0.0);
                good_vals.push(v);
            }
        }
    }
    Ok(CZDecomposition {
        threshold: gamma,
        cubes: selected,
        bad: StepFunction::new(cuts.clone(), bad_vals, 0.0, None)?,
        good: StepFunction::new(cuts, good_vals, 0.0, None)?,
        lattice: lattice.clone(),
        window: window.clone(),
    })
}

/// Outcome of evaluating `Σ_Q λ_Q·avg_Q(b)` away from the decomposition's
/// selected cubes: exactly zero in exact arithmetic, so the measured
/// maximum is pure floating-point residue.
#[derive(Debug, Clone, Copy)]
pub struct VanishingReport {
    /// max |Σ λ_Q avg_Q(b)| over mesh cells outside every selected cube
    pub max_off_omega: f64,
    /// max of the same sum over all cells — the natural comparison scale
    pub scale: f64,
}

/// Evaluate the λ-weighted sparse sum of the bad part off the selected
/// cubes. Every term vanishes there: a family cube inside some selected
/// cube contributes nothing outside it, and any other family cube meets
/// the selected cubes only as full subsets, over which `b` integrates to
/// zero. The family and the decomposition must share one lattice.
pub fn vanishing_check(
    lambdas: &[StepFunction],
    s: &SparseFamily,
    cz: &CZDecomposition,
) -> Result<VanishingReport> {
    if s.lattice != cz.lattice {
        return invalid("family and decomposition use different lattices");
    }
    if lambdas.len() != s.cubes.len() {
        return invalid(format!(
            "{} λ-functions for {} cubes",
            lambdas.len(),
            s.cubes.len()
        ));
    }
    let mut avg_b = Vec::with_capacity(s.cubes.len());
    let mut cuts = Vec::new();
    for (i, lam) in lambdas.iter().enumerate() {
        let iv = s.interval(i)?;
        if lam.support().a() < iv.a() || lam.support().b() > iv.b() {
            return invalid(format!("λ[{i}] is supported outside its cube"));
        }
        if lam.values().iter().any(|&v| v < 0.0) {
            return invalid("λ values must be nonnegative");
        }
        avg_b.push(cz.bad.average(iv));
        cuts.push(iv.a());
        cuts.push(iv.b());
        cuts.extend_from_slice(&lam.breakpoints()[1..lam.breakpoints().len() - 1]);
    }
    let mut omega = Vec::with_capacity(cz.cubes.len());
    for q in &cz.cubes {
        let iv = cz.lattice.interval(q)?;
        cuts.push(iv.a());
        cuts.push(iv.b());
        omega.push(iv);
    }
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    let mut max_off = 0.0_f64;
    let mut scale = 0.0_f64;
    let spans: Vec<Interval> = (0..s.cubes.len())
        .map(|i| s.interval(i))
        .collect::<Result<Vec<_>>>()?;
    for w in cuts.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let x = w[0];
        let mut total = 0.0;
        for i in 0..s.cubes.len() {
            if spans[i].contains(x) {
                total += lambdas[i].eval(x) * avg_b[i];
            }
        }
        scale = scale.max(total.abs());
        if !omega.iter().any(|iv| iv.contains(x)) {
            max_off = max_off.max(total.abs());
        }
    }
    Ok(VanishingReport {
        max_off_omega: max_off,
        scale,
    })
}

/// Cubes whose φ-average lies in `(base^{-k-1}, base^{-k}]`, with the
/// maximal ones singled out.
#[derive(Debug, Clone)]
pub struct LevelFamily {
    pub k: i64,
    pub cubes: Vec<DyadicCube>,
    pub maximal: Vec<DyadicCube>,
}

/// The level decomposition of a family under φ-averages.
#[derive(Debug, Clone)]
pub struct LevelSplit {
    pub families: Vec<LevelFamily>,
    /// Cubes with zero average (φ vanishes there), reported separately.
    pub zero_average: Vec<DyadicCube>,
}

/// Partition the family by which band `(base^{-k-1}, base^{-k}]` holds the
/// cube's φ-average. The right-closed convention means an average exactly
/// equal to `base^{-k}` lands in level `k`; for `base = 4` the boundary
/// comparisons are exact powers of two.
pub fn level_families(s: &SparseFamily, phi: &StepFunction, base: f64) -> Result<LevelSplit> {
    if !(base > 1.0) || !base.is_finite() {
        return invalid(format!("level base must exceed 1, got {base}"));
    }
    if phi.values().iter().any(|&v| v < 0.0) || phi.outside_value() < 0.0 {
        return invalid("φ must be nonnegative");
    }
    let level_of = |avg: f64| -> i64 {
        // largest k with base^{-k} ≥ avg, adjusted by exact comparisons
        let mut k = (-avg.ln() / base.ln()).floor() as i64;
        while base.powi(-(k + 1) as i32) >= avg {
            k += 1;
        }
        while base.powi(-k as i32) < avg {
            k -= 1;
        }
        k
    };
    let mut buckets: HashMap<i64, Vec<DyadicCube>> = HashMap::new();
    let mut zero = Vec::new();
    for (i, q) in s.cubes.iter().enumerate() {
        let avg = phi.average(s.interval(i)?);
        if avg == 0.0 {
            zero.push(q.clone());
        } else {
            buckets.entry(level_of(avg)).or_default().push(q.clone());
        }
    }
    let mut families = Vec::with_capacity(buckets.len());
    let mut keys: Vec<i64> = buckets.keys().copied().collect();
    keys.sort();
    for k in keys {
        let cubes = buckets.remove(&k).unwrap();
        let forest = family_forest(&s.lattice, &cubes)?;
        let maximal = cubes
            .iter()
            .zip(&forest)
            .filter(|(_, p)| p.is_none())
            .map(|(q, _)| q.clone())
            .collect();
        families.push(LevelFamily { k, cubes, maximal });
    }
    Ok(LevelSplit {
        families,
        zero_average: zero,
    })
}

/// Exact distribution of the overlap count `N(x) = #{Q ∈ F : x ∈ Q ⊆ R}`:
/// entry `m` of the result is the measure of `{x ∈ R : N(x) > m}`; entries
/// beyond the returned length are zero.
pub fn overlap_distribution(
    lattice: &DyadicLattice,
    cubes: &[DyadicCube],
    r: &DyadicCube,
) -> Result<Vec<f64>> {
    if lattice.dim() != 1 {
        return invalid("overlap distribution works on one-dimensional lattices");
    }
    let inside: Vec<Interval> = cubes
        .iter()
        .filter(|q| lattice.contains_cube(r, q))
        .map(|q| lattice.interval(q))
        .collect::<Result<Vec<_>>>()?;
    if inside.is_empty() {
        return Ok(Vec::new());
    }
    let mut cuts: Vec<f64> = inside.iter().flat_map(|iv| [iv.a(), iv.b()]).collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    let mut cells = Vec::with_capacity(cuts.len() - 1);
    for w in cuts.windows(2) {
        let count = inside.iter().filter(|iv| iv.contains(w[0])).count();
        cells.push((w[1] - w[0], count));
    }
    let max_count = cells.iter().map(|&(_, c)| c).max().unwrap_or(0);
    let mut out = vec![0.0; max_count];
    for (len, count) in cells {
        for slot in out.iter_mut().take(count) {
            *slot += len;
        }
    }
    Ok(out)
}

/// One selected cube of the stopping-time construction, with the data the
/// domination bound needs: its lattice cube, its mesh run, its reducing
/// operator, and the average of `φ = |V^{-1}W^{-1/p}f|` over the run.
#[derive(Debug, Clone)]
pub struct StoppingCube {
    pub cube: DyadicCube,
    pub run: MeshCube,
    pub reducer: DMatrix<f64>,
    pub phi_average: f64,
}

/// Verification summary of the stopping-time domination.
///
/// At each sampled mesh cell `x` the matrix-weighted dyadic maximal value
/// `M(x) = sup_R avg_R |W^{1/p}(x) W^{-1/p} f|` is compared against the
/// selected cubes' contributions `t_R(x) = ‖W^{1/p}(x) V_R‖ · avg_R φ_R`.
/// The construction guarantees `M(x) ≤ 2·max_R t_R(x)`, hence
/// `M(x)^r ≤ 2^r Σ_R t_R(x)^r` for every `r > 0`; the worst measured
/// left/right ratios are recorded (all must be ≤ 1 up to roundoff).
#[derive(Debug, Clone)]
pub struct DominationReport {
    /// Number of cubes selected by the iteration (the root included).
    pub family_size: usize,
    /// Worst cover fraction `Σ|children| / |R|`, exact in cell counts;
    /// the iteration guarantees ≤ 1/2.
    pub max_child_cover: f64,
    /// Worst `M(x) / (2·max_R t_R(x))` over the samples.
    pub worst_max_form: f64,
    /// Worst `M(x) / (2·Σ_R t_R(x))` (the summed bound at r = 1).
    pub worst_sum_r1: f64,
    /// Worst `M(x)^p / (2^p·Σ_R t_R(x)^p)` (the summed bound at r = p).
    pub worst_sum_rp: f64,
    pub samples_checked: usize,
    /// The selected cubes with their verification data.
    pub cubes: Vec<StoppingCube>,
}

/// Map a lattice cube onto the weight's mesh, requiring exact alignment:
/// the cube's endpoints must land on cell boundaries (up to roundoff) and
/// its width must span a power of two of cells.
fn run_of_cube(
    lattice: &DyadicLattice,
    q: &DyadicCube,
    w: &MatrixWeight,
) -> Result<MeshCube> {
    let iv = lattice.interval(q)?;
    let base = w.base();
    let cell = w.piece_len();
    let first_f = (iv.a() - base.a()) / cell;
    let count_f = iv.len() / cell;
    let first = first_f.round();
    let count = count_f.round();
    if (first_f - first).abs() > 1e-9
        || (count_f - count).abs() > 1e-9
        || first < 0.0
        || count < 1.0
    {
        return invalid(format!(
            "cube [{}, {}) is not aligned with the weight mesh",
            iv.a(),
            iv.b()
        ));
    }
    let run = MeshCube::new(first as usize, count as usize)?;
    if !run.count.is_power_of_two() {
        return invalid("cube spans a non-power-of-two number of cells");
    }
    w.check_cube(run)?;
    Ok(run)
}

/// Split a run/cube pair into its two dyadic halves, pairing each lattice
/// child with the half whose midpoint it contains.
fn lockstep_halves(
    lattice: &DyadicLattice,
    w: &MatrixWeight,
    run: MeshCube,
    cube: &DyadicCube,
) -> Result<[(MeshCube, DyadicCube); 2]> {
    let half = run.count / 2;
    let left = MeshCube::new(run.first, half)?;
    let right = MeshCube::new(run.first + half, half)?;
    let cell = w.piece_len();
    let base_a = w.base().a();
    let mid = |r: &MeshCube| base_a + cell * (r.first as f64 + r.count as f64 / 2.0);
    let mut found: [Option<DyadicCube>; 2] = [None, None];
    for kid in lattice.children(cube)? {
        let kiv = lattice.interval(&kid)?;
        if kiv.contains(mid(&left)) {
            found[0] = Some(kid);
        } else if kiv.contains(mid(&right)) {
            found[1] = Some(kid);
        }
    }
    match found {
        [Some(l), Some(r)] => Ok([(left, l), (right, r)]),
        _ => invalid("lattice children do not align with the weight mesh"),
    }
}

/// Stopping-time construction dominating the matrix-weighted dyadic maximal
/// function on `q` by a ½-sparse family.
///
/// Starting from `q`, each selected cube `R` computes its reducing operator
/// `V_R`, the cell values `φ_R = |V_R^{-1} W^{-1/p} f|`, and selects as
/// children the maximal dyadic subcubes whose `φ_R`-average exceeds twice
/// the average over `R`; those children join the family and the iteration
/// recurses. Disjointness of the children and the strict threshold force
/// the children to cover at most half of `R` (checked exactly in cell
/// counts), so the family is ½-sparse.
///
/// The returned report additionally verifies, at the sampled mesh cells,
/// that the maximal function is pointwise dominated — with factor `2` in
/// max form and `2^r` in sum form for `r ∈ {1, p}` — by the selected
/// cubes' terms `‖W^{1/p}(x) V_R‖ · avg_R φ_R`. The bound is pure linear
/// algebra plus the stopping condition, so it holds for any invertible
/// reducing operators; a violation beyond roundoff is reported as an error.
///
/// `k` is the direction budget for the reducing operators; `samples` lists
/// the mesh cells (global indices) where the domination is checked.
pub fn spb_construct(
    lattice: &DyadicLattice,
    q: &DyadicCube,
    w: &MatrixWeight,
    p: Exponent,
    f: &VectorField,
    k: usize,
    samples: &[usize],
) -> Result<(SparseFamily, DominationReport)> {
    if lattice.dim() != 1 {
        return invalid("stopping-time construction works on one-dimensional lattices");
    }
    check_aligned(w, f)?;
    let root_run = run_of_cube(lattice, q, w)?;
    let minus = w.power_field(-1.0 / p.p())?;

    let mut selected: Vec<StoppingCube> = Vec::new();
    let mut max_child_cover = 0.0_f64;
    let mut todo: Vec<(MeshCube, DyadicCube)> = vec![(root_run, q.clone())];
    while let Some((run, cube)) = todo.pop() {
        let red = reducing_operator(w, p, run, k)?;
        let vinv = matrix_power(&red.matrix, -1.0)?;
        // φ on the run's cells, with a prefix table for exact averages
        let mut prefix = Vec::with_capacity(run.count + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for j in run.first..run.end() {
            acc += (&vinv * (&minus[j] * &f.values()[j])).norm();
            prefix.push(acc);
        }
        let avg = acc / run.count as f64;
        let cell_avg =
            |r: &MeshCube| (prefix[r.end() - run.first] - prefix[r.first - run.first]) / r.count as f64;

        let mut children: Vec<(MeshCube, DyadicCube)> = Vec::new();
        if avg > 0.0 && run.count >= 2 {
            let mut descend: Vec<(MeshCube, DyadicCube)> =
                lockstep_halves(lattice, w, run, &cube)?.into();
            while let Some((r2, c2)) = descend.pop() {
                if cell_avg(&r2) > 2.0 * avg {
                    children.push((r2, c2));
                } else if r2.count >= 2 {
                    descend.extend(lockstep_halves(lattice, w, r2, &c2)?);
                }
            }
        }
        let covered: usize = children.iter().map(|(r, _)| r.count).sum();
        if 2 * covered > run.count {
            return guard(format!(
                "stopping children cover {covered} of {} cells",
                run.count
            ));
        }
        max_child_cover = max_child_cover.max(covered as f64 / run.count as f64);
        selected.push(StoppingCube {
            cube,
            run,
            reducer: red.matrix,
            phi_average: avg,
        });
        todo.extend(children);
    }

    let family = SparseFamily::new(
        lattice.clone(),
        selected.iter().map(|s| s.cube.clone()).collect(),
        0.5,
    )?;

    // pointwise verification at the sampled cells
    let mut sample_cells: Vec<usize> = samples.to_vec();
    sample_cells.sort_unstable();
    sample_cells.dedup();
    let cell = w.piece_len();
    let base_a = w.base().a();
    let mut worst_max_form = 0.0_f64;
    let mut worst_sum_r1 = 0.0_f64;
    let mut worst_sum_rp = 0.0_f64;
    let r_exp = p.p();
    for &i in &sample_cells {
        if !root_run.contains_index(i) {
            return invalid(format!("sample cell {i} lies outside the root cube"));
        }
        let x = base_a + cell * (i as f64 + 0.5);
        let lhs = cg_maximal(w, p, f, x, MaximalMode::DyadicLocal(root_run))?;
        let px = matrix_power(w.piece(i), 1.0 / p.p())?;
        let mut t_max = 0.0_f64;
        let mut t_sum = 0.0_f64;
        let mut t_sum_p = 0.0_f64;
        for s in &selected {
            if s.run.contains_index(i) {
                let t = operator_norm(&(&px * &s.reducer)) * s.phi_average;
                t_max = t_max.max(t);
                t_sum += t;
                t_sum_p += t.powf(r_exp);
            }
        }
        if lhs > 0.0 {
            worst_max_form = worst_max_form.max(lhs / (2.0 * t_max));
            worst_sum_r1 = worst_sum_r1.max(lhs / (2.0 * t_sum));
            worst_sum_rp = worst_sum_rp.max(lhs.powf(r_exp) / (2.0_f64.powf(r_exp) * t_sum_p));
        }
    }
    if !worst_max_form.is_finite() || worst_max_form > 1.0 + 1e-9 {
        return guard(format!(
            "domination violated: max-form ratio {worst_max_form}"
        ));
    }
    Ok((
        family,
        DominationReport {
            family_size: selected.len(),
            max_child_cover,
            worst_max_form,
            worst_sum_r1,
            worst_sum_rp,
            samples_checked: sample_cells.len(),
            cubes: selected,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::DyadicLattice;

    fn lat() -> DyadicLattice {
        DyadicLattice::standard(1)
    }

    fn cube(gen: i32, idx: i64) -> DyadicCube {
        DyadicCube {
            generation: gen,
            index: vec![idx],
        }
    }

    #[test]
    fn sparseness_of_reference_families() {
        let l = lat();
        // single cube
        assert_eq!(verify_sparseness(&l, &[cube(0, 0)]).unwrap(), 1.0);
        // nested halves: each parent keeps half
        let chain: Vec<_> = (0..5).map(|g| cube(g, 0)).collect();
        assert_eq!(verify_sparseness(&l, &chain).unwrap(), 0.5);
        // cube plus both children: parent fully covered
        let covered = vec![cube(0, 0), cube(1, 0), cube(1, 1)];
        assert_eq!(verify_sparseness(&l, &covered).unwrap(), 0.0);
        assert!(SparseFamily::new(l, covered, 0.5).is_err());
    }

    #[test]
    fn cores_are_disjoint_and_fill_each_cube() {
        let l = lat();
        let fam = SparseFamily::new(
            l,
            vec![cube(0, 0), cube(2, 0), cube(2, 3)],
            0.5,
        )
        .unwrap();
        let cores = fam.cores().unwrap();
        // top cube loses [0, 1/4) and [3/4, 1)
        assert_eq!(cores[0].len(), 1);
        assert_eq!((cores[0][0].a(), cores[0][0].b()), (0.25, 0.75));
        // leaves keep themselves
        assert_eq!(cores[1][0].len(), 0.25);
        assert_eq!(cores[2][0].len(), 0.25);
    }

    #[test]
    fn split_nested_halves_reaches_the_guaranteed_bound() {
        let l = lat();
        let chain: Vec<_> = (0..8).map(|g| cube(g, 0)).collect();
        let fam = SparseFamily::new(l, chain.clone(), 0.5).unwrap();
        let parts = split_sparse(&fam, 2).unwrap();
        assert_eq!(parts.len(), 2);
        let mut rejoined: Vec<_> = parts.iter().flat_map(|p| p.cubes().to_vec()).collect();
        rejoined.sort();
        assert_eq!(rejoined, chain);
        for p in &parts {
            // m/(m + 1/η − 1) = 2/3 at η = 1/2, m = 2
            let measured = verify_sparseness(p.lattice(), p.cubes()).unwrap();
            assert!(measured + 1e-12 >= 2.0 / 3.0, "measured {measured}");
            assert!(p.eta() + 1e-12 >= 2.0 / 3.0);
        }
    }

    #[test]
    fn carrier_selection_on_a_two_cube_chain() {
        let l = lat();
        let fam = SparseFamily::new(l, vec![cube(0, 0), cube(3, 0)], 0.875).unwrap();
        let phi = StepFunction::indicator(Interval::new(0.0, 1.0).unwrap());
        let sel = select_carriers(&fam, &phi, 0.5).unwrap();
        // both cubes have average 1 ∈ [1/2, 2]
        assert_eq!(sel.cubes.len(), 2);
        assert!(sel.eightfold_bound_holds());
        // the big cube's carrier excludes the small one
        let big = &sel.carriers[0];
        let total: f64 = big.iter().map(|iv| iv.len()).sum();
        assert_eq!(total, 0.875);
        assert_eq!(sel.carrier_integrals[0], 0.875);
        assert_eq!(sel.cube_integrals[0], 1.0);
    }

    #[test]
    fn carrier_selection_requires_seven_eighths() {
        let l = lat();
        let fam = SparseFamily::new(l, vec![cube(0, 0), cube(1, 0)], 0.5).unwrap();
        let phi = StepFunction::indicator(Interval::new(0.0, 1.0).unwrap());
        assert!(select_carriers(&fam, &phi, 0.5).is_err());
    }

    #[test]
    fn cz_decomposition_matches_hand_computation() {
        let l = lat();
        let psi = StepFunction::new(
            vec![0.0, 0.125, 0.25],
            vec![6.0, 2.0],
            0.0,
            None,
        )
        .unwrap();
        let cz = cz_decompose(&psi, 3.0, &l, &cube(0, 0)).unwrap();
        assert_eq!(cz.cubes, vec![cube(2, 0)]); // [0, 1/4), average 4
        assert_eq!(cz.bad.eval(0.0), 2.0);
        assert_eq!(cz.bad.eval(0.2), -2.0);
        assert_eq!(cz.bad.eval(0.5), 0.0);
        assert_eq!(cz.good.eval(0.1), 4.0);
        assert_eq!(cz.good.eval(0.5), 0.0);
        let q = Interval::new(0.0, 0.25).unwrap();
        assert_eq!(cz.bad.integrate(q), 0.0);
        // g ≤ 2γ and ψ = g + b on the mesh
        assert!(cz.good.values().iter().all(|&v| v <= 2.0 * 3.0));
        for x in [0.0, 0.1, 0.125, 0.2, 0.25, 0.7] {
            assert_eq!(cz.good.eval(x) + cz.bad.eval(x), psi.eval(x));
        }
    }

    #[test]
    fn cz_rejects_thresholds_at_or_below_the_window_average() {
        let l = lat();
        let psi = StepFunction::constant_on(Interval::new(0.0, 1.0).unwrap(), 2.0).unwrap();
        assert!(cz_decompose(&psi, 1.0, &l, &cube(0, 0)).is_err());
        // constant ψ below the threshold: no cubes selected, b = 0
        let cz = cz_decompose(&psi, 3.0, &l, &cube(0, 0)).unwrap();
        assert!(cz.cubes.is_empty());
        assert_eq!(cz.bad.support_mass(), 0.0);
    }

    #[test]
    fn sparse_sum_of_bad_part_vanishes_off_selected_cubes() {
        let l = lat();
        let psi = StepFunction::new(
            vec![0.0, 0.125, 0.25],
            vec![6.0, 2.0],
            0.0,
            None,
        )
        .unwrap();
        let cz = cz_decompose(&psi, 3.0, &l, &cube(0, 0)).unwrap();
        // family: the window and the parent of the selected cube
        let fam = SparseFamily::new(l, vec![cube(0, 0), cube(1, 0)], 0.5).unwrap();
        let lambdas = vec![
            StepFunction::indicator(Interval::new(0.0, 1.0).unwrap()),
            StepFunction::indicator(Interval::new(0.0, 0.5).unwrap()),
        ];
        let report = vanishing_check(&lambdas, &fam, &cz).unwrap();
        assert!(report.max_off_omega <= 1e-12 * report.scale.max(1.0));
    }

    #[test]
    fn level_families_use_right_closed_bands() {
        let l = lat();
        let fam = SparseFamily::new(l, vec![cube(0, 0)], 1.0).unwrap();
        // average exactly 4^{-3} lands in level 3
        let phi =
            StepFunction::constant_on(Interval::new(0.0, 1.0).unwrap(), 0.015625).unwrap();
        let split = level_families(&fam, &phi, 4.0).unwrap();
        assert_eq!(split.families.len(), 1);
        assert_eq!(split.families[0].k, 3);
        // indicator: average 1 = 4^0 sits in level 0
        let ind = StepFunction::indicator(Interval::new(0.0, 1.0).unwrap());
        let split = level_families(&fam, &ind, 4.0).unwrap();
        assert_eq!(split.families[0].k, 0);
        assert_eq!(split.families[0].maximal.len(), 1);
    }

    #[test]
    fn overlap_distribution_of_nested_halves_halves_each_level() {
        let l = lat();
        let chain: Vec<_> = (0..6).map(|g| cube(g, 0)).collect();
        let dist = overlap_distribution(&l, &chain, &cube(0, 0)).unwrap();
        assert_eq!(dist.len(), 6);
        for (m, &measure) in dist.iter().enumerate() {
            assert!((measure - f64::exp2(-(m as f64))).abs() < 1e-15);
        }
        // disjoint family: no point is covered twice
        let disjoint = vec![cube(1, 0), cube(1, 1)];
        let dist = overlap_distribution(&l, &disjoint, &cube(0, 0)).unwrap();
        assert_eq!(dist.len(), 1);
        assert_eq!(dist[0], 1.0);
    }

    #[test]
    fn family_serialization_round_trips() {
        let l = lat();
        let fam = SparseFamily::new(l, vec![cube(0, 0), cube(2, 1)], 0.75).unwrap();
        let json = serde_json::to_string(&fam).unwrap();
        let back: SparseFamily = serde_json::from_str(&json).unwrap();
        assert_eq!(back, fam);
    }

    // ------------------------------------------------------------------
    // stopping-time construction
    // ------------------------------------------------------------------

    use crate::matweight::VectorField;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    fn spd2(rng: &mut ChaCha8Rng, spread: f64) -> DMatrix<f64> {
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

    #[test]
    fn stopping_construction_on_constant_data_keeps_only_the_root() {
        let l = lat();
        let w = MatrixWeight::constant(unit(), DMatrix::identity(1, 1), 16).unwrap();
        let f = VectorField::constant(unit(), 16, &DVector::from_column_slice(&[1.0])).unwrap();
        let p = Exponent::new(2.0).unwrap();
        let (fam, report) =
            spb_construct(&l, &cube(0, 0), &w, p, &f, 8, &(0..16).collect::<Vec<_>>()).unwrap();
        assert_eq!(fam.cubes(), &[cube(0, 0)]);
        assert_eq!(report.family_size, 1);
        assert_eq!(report.max_child_cover, 0.0);
        assert!(report.worst_max_form <= 1.0);
        assert_eq!(report.samples_checked, 16);
    }

    #[test]
    fn stopping_construction_scalar_agrees_with_brute_force_maximal() {
        let l = lat();
        let cells = 32usize;
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let wv: Vec<f64> = (0..cells).map(|_| f64::exp2(rng.gen_range(-4.0..4.0))).collect();
        let fv: Vec<DVector<f64>> = (0..cells)
            .map(|_| DVector::from_column_slice(&[rng.gen_range(-2.0..2.0)]))
            .collect();
        let w = MatrixWeight::scalar_on_mesh(unit(), &wv).unwrap();
        let f = VectorField::new(unit(), fv.clone()).unwrap();
        let p = Exponent::new(1.5).unwrap();

        // brute force: over the halving chain of runs containing each cell
        let h: Vec<f64> = (0..cells)
            .map(|j| wv[j].powf(-1.0 / 1.5) * fv[j][0].abs())
            .collect();
        for i in 0..cells {
            let x = (i as f64 + 0.5) / cells as f64;
            let got = cg_maximal(
                &w,
                p,
                &f,
                x,
                MaximalMode::DyadicLocal(MeshCube::new(0, cells).unwrap()),
            )
            .unwrap();
            let mut best = 0.0_f64;
            let (mut first, mut count) = (0usize, cells);
            loop {
                let avg = h[first..first + count].iter().sum::<f64>() / count as f64;
                best = best.max(wv[i].powf(1.0 / 1.5) * avg);
                if count == 1 {
                    break;
                }
                count /= 2;
                if i >= first + count {
                    first += count;
                }
            }
            assert!((got - best).abs() <= 1e-10 * best.max(1.0), "cell {i}");
        }

        // domination at every mesh cell
        let samples: Vec<usize> = (0..cells).collect();
        let (fam, report) = spb_construct(&l, &cube(0, 0), &w, p, &f, 8, &samples).unwrap();
        assert!(fam.eta() >= 0.5);
        assert!(report.max_child_cover <= 0.5);
        assert!(
            report.worst_max_form <= 1.0 + 1e-9,
            "max-form {}",
            report.worst_max_form
        );
        assert!(report.worst_sum_r1 <= report.worst_max_form + 1e-12);
        assert!(report.worst_sum_rp <= 1.0 + 1e-9);
    }

    #[test]
    fn stopping_construction_matrix_domination_holds_everywhere() {
        let l = lat();
        let cells = 64usize;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pieces: Vec<DMatrix<f64>> = (0..cells).map(|_| spd2(&mut rng, 3.0)).collect();
        let values: Vec<DVector<f64>> = (0..cells)
            .map(|_| {
                DVector::from_column_slice(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            })
            .collect();
        let w = MatrixWeight::new(unit(), pieces).unwrap();
        let f = VectorField::new(unit(), values).unwrap();
        let p = Exponent::new(3.0).unwrap();
        let samples: Vec<usize> = (0..cells).collect();
        let (fam, report) = spb_construct(&l, &cube(0, 0), &w, p, &f, 64, &samples).unwrap();
        assert!(fam.eta() >= 0.5, "eta {}", fam.eta());
        assert!(report.max_child_cover <= 0.5);
        assert!(report.family_size >= 1);
        assert!(
            report.worst_max_form <= 1.0 + 1e-9,
            "max-form {}",
            report.worst_max_form
        );
        assert!(report.worst_sum_r1 <= 1.0 + 1e-9);
        assert!(report.worst_sum_rp <= 1.0 + 1e-9);
        // every selected cube's run really sits inside the root
        for s in &report.cubes {
            assert!(MeshCube::new(0, cells).unwrap().contains_cube(&s.run));
            assert!(s.phi_average >= 0.0);
        }
    }

    #[test]
    fn stopping_construction_rejects_misaligned_cubes() {
        let w = MatrixWeight::constant(unit(), DMatrix::identity(1, 1), 8).unwrap();
        let f = VectorField::constant(unit(), 8, &DVector::from_column_slice(&[1.0])).unwrap();
        let p = Exponent::new(2.0).unwrap();
        // cube [0, 2) overflows the weight's base interval
        let too_big = cube(-1, 0);
        assert!(spb_construct(&lat(), &too_big, &w, p, &f, 8, &[0]).is_err());
        // a thirds-shifted lattice's unit cube is offset from the mesh
        let shifted = DyadicLattice::new(vec![1]).unwrap();
        assert!(spb_construct(&shifted, &cube(0, 0), &w, p, &f, 8, &[0]).is_err());
        // sample index outside the root cube
        assert!(spb_construct(&lat(), &cube(0, 0), &w, p, &f, 8, &[9]).is_err());
    }
}
