//! Shifted dyadic lattices and the three-lattice covering trick.
//!
//! A lattice in dimension `d` is determined by a shift digit `j ∈ {0,1,2}`
//! per coordinate: at generation `g` (cube side `2^{-g}`) the cubes along a
//! coordinate with digit `j` start at `2^{-g}(m + (-1)^g j/3)`, `m ∈ ℤ`. The
//! sign flip per generation is what makes every cube's children cubes of the
//! same lattice, because `2·j/3 ≡ -j/3 (mod 1)`.
//!
//! At a fixed scale the three lattices `j = 0, 1, 2` cut each coordinate at
//! the three residue classes of `(side/3)·ℤ`, and an interval of length
//! `ℓ ≤ (2/3)·side` can straddle at most two consecutive cuts, which always
//! belong to two *different* lattices — so the third lattice contains a cube
//! covering it. Scanning scales from small to large therefore finds, for any
//! interval, a covering cube of side at most `3ℓ` among the three lattices.
//!
//! Index arithmetic (children, parents, containment) is exact in integers;
//! only the conversion to interval endpoints rounds, by at most one ulp.

use crate::error::{guard, invalid, Result};
use crate::stepfn::Interval;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Default bound on |generation| for searches and enumerations.
pub const DEFAULT_GENERATION_CAP: i32 = 60;

/// Hard cap on the number of cubes an enumeration may return.
const ENUMERATION_CAP: usize = 4_000_000;

/// One shifted dyadic lattice on `ℝ^d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicLattice {
    /// Shift digit in {0, 1, 2} per coordinate.
    shifts: Vec<u8>,
    /// Searches and enumerations refuse to pass |generation| beyond this.
    generation_cap: i32,
}

/// A cube of a [`DyadicLattice`]: side `2^{-generation}`, lower corner at
/// `2^{-generation}·(index_c + (-1)^generation·shift_c/3)` per coordinate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DyadicCube {
    pub generation: i32,
    pub index: Vec<i64>,
}

impl DyadicLattice {
    pub fn new(shifts: Vec<u8>) -> Result<Self> {
        if shifts.is_empty() {
            return invalid("lattice needs at least one coordinate");
        }
        if shifts.iter().any(|&j| j > 2) {
            return invalid("lattice shift digits must be 0, 1, or 2");
        }
        Ok(DyadicLattice {
            shifts,
            generation_cap: DEFAULT_GENERATION_CAP,
        })
    }

    /// The standard (unshifted) lattice in dimension `d`.
    pub fn standard(d: usize) -> Self {
        DyadicLattice::new(vec![0; d]).expect("valid shifts")
    }

    pub fn dim(&self) -> usize {
        self.shifts.len()
    }

    pub fn shifts(&self) -> &[u8] {
        &self.shifts
    }

    pub fn generation_cap(&self) -> i32 {
        self.generation_cap
    }

    /// Identifier of this lattice among the `3^d` shifted lattices:
    /// the shift digits read as a base-3 number, coordinate 0 least
    /// significant.
    pub fn id(&self) -> u32 {
        self.shifts
            .iter()
            .rev()
            .fold(0u32, |acc, &j| acc * 3 + j as u32)
    }

    /// Shift fraction (in units of the side) along a coordinate at a
    /// generation: `(-1)^g · j/3`.
    fn shift_fraction(&self, coord: usize, generation: i32) -> f64 {
        let sign = if generation.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        sign * self.shifts[coord] as f64 / 3.0
    }

    pub fn side(&self, generation: i32) -> f64 {
        f64::exp2(-(generation as f64))
    }

    fn check_generation(&self, generation: i32) -> Result<()> {
        if generation.abs() > self.generation_cap {
            return guard(format!(
                "generation {generation} beyond cap {}",
                self.generation_cap
            ));
        }
        Ok(())
    }

    /// The unique cube of the given generation containing the point.
    pub fn cube_containing(&self, x: &[f64], generation: i32) -> Result<DyadicCube> {
        if x.len() != self.dim() {
            return invalid("point dimension mismatch");
        }
        self.check_generation(generation)?;
        let side = self.side(generation);
        let mut index = Vec::with_capacity(self.dim());
        for (c, &xc) in x.iter().enumerate() {
            let m = (xc / side - self.shift_fraction(c, generation)).floor();
            if m.abs() > 9.0e15 {
                return guard("cube index exceeds exact integer range");
            }
            index.push(m as i64);
        }
        Ok(DyadicCube { generation, index })
    }

    /// Lower corner coordinates of a cube (rounded to nearest, ≤ 1 ulp off
    /// for shifted lattices, exact for the standard one).
    pub fn lower_corner(&self, q: &DyadicCube) -> Vec<f64> {
        let side = self.side(q.generation);
        q.index
            .iter()
            .enumerate()
            .map(|(c, &m)| (m as f64 + self.shift_fraction(c, q.generation)) * side)
            .collect()
    }

    /// The cube as an interval — dimension 1 only.
    pub fn interval(&self, q: &DyadicCube) -> Result<Interval> {
        if self.dim() != 1 {
            return invalid("interval view requires dimension 1");
        }
        let low = self.lower_corner(q)[0];
        Interval::new(low, low + self.side(q.generation))
    }

    /// All `2^d` children.
    pub fn children(&self, q: &DyadicCube) -> Result<Vec<DyadicCube>> {
        self.check_generation(q.generation + 1)?;
        let sign: i64 = if q.generation.rem_euclid(2) == 0 { 1 } else { -1 };
        let base: Vec<i64> = q
            .index
            .iter()
            .enumerate()
            .map(|(c, &m)| 2 * m + sign * self.shifts[c] as i64)
            .collect();
        let d = self.dim();
        let mut out = Vec::with_capacity(1 << d);
        for bits in 0..(1u32 << d) {
            let index = base
                .iter()
                .enumerate()
                .map(|(c, &b)| b + ((bits >> c) & 1) as i64)
                .collect();
            out.push(DyadicCube {
                generation: q.generation + 1,
                index,
            });
        }
        Ok(out)
    }

    pub fn parent(&self, q: &DyadicCube) -> Result<DyadicCube> {
        self.check_generation(q.generation - 1)?;
        let sign: i64 = if (q.generation - 1).rem_euclid(2) == 0 { 1 } else { -1 };
        let index = q
            .index
            .iter()
            .enumerate()
            .map(|(c, &m)| (m - sign * self.shifts[c] as i64).div_euclid(2))
            .collect();
        Ok(DyadicCube {
            generation: q.generation - 1,
            index,
        })
    }

    /// Ancestor at a coarser generation (equal generation returns a copy).
    pub fn ancestor_at(&self, q: &DyadicCube, generation: i32) -> Result<DyadicCube> {
        if generation > q.generation {
            return invalid("ancestor generation must be ≤ cube generation");
        }
        let mut cur = q.clone();
        while cur.generation > generation {
            cur = self.parent(&cur)?;
        }
        Ok(cur)
    }

    /// Whether `inner ⊆ outer` (both cubes of this lattice). Exact.
    pub fn contains_cube(&self, outer: &DyadicCube, inner: &DyadicCube) -> bool {
        if inner.generation < outer.generation {
            return false;
        }
        match self.ancestor_at(inner, outer.generation) {
            Ok(a) => a == *outer,
            Err(_) => false,
        }
    }

    pub fn contains_point(&self, q: &DyadicCube, x: &[f64]) -> Result<bool> {
        Ok(self.cube_containing(x, q.generation)? == *q)
    }

    pub fn volume(&self, q: &DyadicCube) -> f64 {
        self.side(q.generation).powi(self.dim() as i32)
    }

    /// Canonical identifier `L{lattice}/g{generation}/i{i0[,i1,…]}`.
    pub fn cube_id(&self, q: &DyadicCube) -> String {
        let idx = q
            .index
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(",");
        format!("L{}/g{}/i{}", self.id(), q.generation, idx)
    }

    /// Dimension-1 cubes of one generation that intersect a window.
    pub fn cubes_meeting(&self, window: Interval, generation: i32) -> Result<Vec<DyadicCube>> {
        if self.dim() != 1 {
            return invalid("enumeration implemented for dimension 1");
        }
        self.check_generation(generation)?;
        let first = self.cube_containing(&[window.a()], generation)?;
        let side = self.side(generation);
        let count = ((window.b() - window.a()) / side).ceil() as usize + 1;
        if count > ENUMERATION_CAP {
            return guard("enumeration cap exceeded");
        }
        let mut out = Vec::new();
        for k in 0..count as i64 {
            let q = DyadicCube {
                generation,
                index: vec![first.index[0] + k],
            };
            let iv = self.interval(&q)?;
            if iv.a() < window.b() && iv.b() > window.a() {
                out.push(q);
            }
        }
        Ok(out)
    }
}

impl DyadicCube {
    pub fn dim(&self) -> usize {
        self.index.len()
    }
}

impl fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx = self
            .index
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(",");
        write!(f, "g{}/i{}", self.generation, idx)
    }
}

impl FromStr for DyadicCube {
    type Err = crate::Error;

    /// Parse `L{lat}/g{gen}/i{i0[,i1,…]}` or the lattice-less `g{gen}/i{…}`.
    /// The lattice digit is the caller's to check; it is not stored here.
    fn from_str(s: &str) -> Result<DyadicCube> {
        let mut parts: Vec<&str> = s.split('/').collect();
        if parts.len() == 3 {
            if !parts[0].starts_with('L') {
                return invalid(format!("bad cube id {s:?}"));
            }
            parts.remove(0);
        }
        if parts.len() != 2 || !parts[0].starts_with('g') || !parts[1].starts_with('i') {
            return invalid(format!("bad cube id {s:?}"));
        }
        let generation: i32 = parts[0][1..]
            .parse()
            .map_err(|_| crate::Error::Invalid(format!("bad generation in {s:?}")))?;
        let index = parts[1][1..]
            .split(',')
            .map(|t| {
                t.parse::<i64>()
                    .map_err(|_| crate::Error::Invalid(format!("bad index in {s:?}")))
            })
            .collect::<Result<Vec<i64>>>()?;
        Ok(DyadicCube { generation, index })
    }
}

/// The `3^d` shifted lattices of the covering lemma.
pub fn three_lattices(d: usize) -> Result<Vec<DyadicLattice>> {
    if d == 0 || d > 8 {
        return invalid("dimension must be between 1 and 8");
    }
    let n = 3usize.pow(d as u32);
    let mut out = Vec::with_capacity(n);
    for mut code in 0..n {
        let mut shifts = Vec::with_capacity(d);
        for _ in 0..d {
            shifts.push((code % 3) as u8);
            code /= 3;
        }
        out.push(DyadicLattice::new(shifts)?);
    }
    Ok(out)
}

/// Find, among the given 1-d lattices, a cube `R ⊇ q` with minimal side.
///
/// With the standard triple from [`three_lattices`] the result satisfies
/// `|R| ≤ 3|q|`; the search scans at most four scales and errors only if the
/// lattice list is too thin to cover (e.g. a single lattice).
pub fn dyadic_cover(
    q: Interval,
    lattices: &[DyadicLattice],
) -> Result<(usize, DyadicCube)> {
    if lattices.is_empty() {
        return invalid("need at least one lattice");
    }
    if lattices.iter().any(|l| l.dim() != 1) {
        return invalid("covering search requires 1-d lattices");
    }
    let len = q.len();
    // largest generation whose side is ≥ the interval length
    let mut g0 = (-(len.log2())).floor() as i32;
    while f64::exp2(-(g0 as f64)) < len {
        g0 -= 1;
    }
    for g in (g0 - 4..=g0).rev() {
        for (pos, lat) in lattices.iter().enumerate() {
            lat.check_generation(g)?;
            let cube = lat.cube_containing(&[q.a()], g)?;
            let iv = lat.interval(&cube)?;
            if iv.a() <= q.a() && q.b() <= iv.b() {
                return Ok((pos, cube));
            }
        }
    }
    guard("no covering cube found; pass the full shifted triple")
}
