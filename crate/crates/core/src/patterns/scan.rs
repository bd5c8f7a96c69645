//! Tuple search shared by violation scans and incidence detection.
//!
//! Prefixes `(k_1..k_{n-1})` are enumerated directly; the last slot is either
//! scanned in full or pruned through a bucket grid around the points the
//! relation allows. Both paths apply the same exact predicate, so they return
//! identical sets.

use rayon::prelude::*;

use super::{PatternSpec, TranslationalPattern};
use crate::error::{Error, Result};
use crate::sampler::WeightedConfiguration;
use crate::spatial::SpatialGrid;
use crate::torus::{dist_sq, wrap};

/// Absolute slack added to every margin so that relations holding exactly in
/// real arithmetic survive rounding (`0.3 - 2*0.2` is not `-0.1` in binary).
pub const ROUNDING_SLACK: f64 = 1e-12;

thread_local! {
    static CANDIDATES: std::cell::RefCell<Vec<usize>> = const { std::cell::RefCell::new(Vec::new()) };
    static HITS: std::cell::RefCell<Vec<usize>> = const { std::cell::RefCell::new(Vec::new()) };
}

/// Default cap on enumerated tuples before pruning kicks in.
pub const DEFAULT_BUDGET: u64 = 1 << 24;

/// Candidate index lists, one per tuple slot, over a shared coordinate array.
pub(crate) struct Slots<'a> {
    pub coords: &'a [f64],
    pub dim: usize,
    pub members: Vec<Vec<usize>>,
}

impl Slots<'_> {
    #[inline]
    fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    fn tuple_count(&self, slots: usize) -> u128 {
        self.members[..slots]
            .iter()
            .fold(1u128, |acc, m| acc.saturating_mul(m.len() as u128))
    }
}

pub(crate) struct SearchOptions {
    pub tol: f64,
    pub separation: Option<f64>,
    pub budget: u64,
    /// Fail with a resource error instead of warning when even the pruned
    /// search exceeds the budget.
    pub strict_budget: bool,
}

struct Kernel<'a> {
    pattern: &'a PatternSpec,
    slots: &'a Slots<'a>,
    n: usize,
    tol: f64,
    tol_sq: f64,
    sep_sq: Option<f64>,
    grid: Option<SpatialGrid>,
}

/// Every matching tuple (indices in slot order), sorted. With `last_only`
/// each match contributes only its last index, and the result is the sorted
/// set of those indices as one-element tuples.
pub(crate) fn search_tuples(
    pattern: &PatternSpec,
    slots: &Slots,
    opts: &SearchOptions,
    last_only: bool,
) -> Result<Vec<Vec<usize>>> {
    let n = pattern.arity();
    assert_eq!(slots.members.len(), n, "one slot per tuple position");
    if slots.members.iter().any(|m| m.is_empty()) {
        return Ok(Vec::new());
    }
    let total = slots.tuple_count(n);
    let naive = total <= opts.budget as u128;
    if !naive {
        let prefixes = slots.tuple_count(n - 1);
        if prefixes > opts.budget as u128 {
            let msg = format!(
                "{prefixes} prefix tuples exceed the enumeration budget {}",
                opts.budget
            );
            if opts.strict_budget {
                return Err(Error::Resource(msg));
            }
            log::warn!("{msg}; scanning anyway");
        }
    }
    let grid = (!naive).then(|| SpatialGrid::build(slots.coords, slots.dim, &slots.members[n - 1]));
    let tol = opts.tol + ROUNDING_SLACK;
    let kernel = Kernel {
        pattern,
        slots,
        n,
        tol,
        tol_sq: tol * tol,
        sep_sq: opts.separation.map(|s| s * s),
        grid,
    };

    let mut found: Vec<Vec<usize>> = if n == 1 {
        let mut out = Vec::new();
        kernel.finish(&mut Vec::new(), None, &mut |t| out.push(t.to_vec()));
        out
    } else {
        slots.members[0]
            .par_iter()
            .map(|&k0| {
                let mut out = Vec::new();
                let mut tuple = vec![k0];
                kernel.descend(&mut tuple, None, &mut |t: &[usize]| {
                    if last_only {
                        out.push(vec![t[n - 1]]);
                    } else {
                        out.push(t.to_vec());
                    }
                });
                if last_only {
                    out.sort_unstable();
                    out.dedup();
                }
                out
            })
            .flatten()
            .collect()
    };
    if last_only && n == 1 {
        found.iter_mut().for_each(|t| t.truncate(1));
    }
    found.sort_unstable();
    found.dedup();
    Ok(found)
}

impl Kernel<'_> {
    fn admissible(&self, tuple: &[usize], k: usize) -> bool {
        if tuple.contains(&k) {
            return false;
        }
        match self.sep_sq {
            Some(s2) => {
                let x = self.slots.point(k);
                tuple.iter().all(|&j| dist_sq(self.slots.point(j), x) >= s2)
            }
            None => true,
        }
    }

    fn head_targets(&self, tuple: &[usize]) -> Option<Vec<f64>> {
        match self.pattern {
            PatternSpec::Translational(t) => {
                let head: Vec<f64> = tuple[..self.n.saturating_sub(2)]
                    .iter()
                    .flat_map(|&k| self.slots.point(k).to_vec())
                    .collect();
                Some(t.targets(&head))
            }
            _ => None,
        }
    }

    fn descend(
        &self,
        tuple: &mut Vec<usize>,
        targets: Option<&[f64]>,
        sink: &mut dyn FnMut(&[usize]),
    ) {
        let depth = tuple.len();
        // targets depend on x_1..x_{n-2}; fix them once that head is chosen
        let owned;
        let targets = if depth == self.n.saturating_sub(2) && targets.is_none() {
            owned = self.head_targets(tuple);
            owned.as_deref()
        } else {
            targets
        };
        if depth == self.n - 1 {
            self.finish(tuple, targets, sink);
            return;
        }
        for &k in &self.slots.members[depth] {
            if !self.admissible(tuple, k) {
                continue;
            }
            tuple.push(k);
            self.descend(tuple, targets, sink);
            tuple.pop();
        }
    }

    /// Tests every admissible last index against the fixed prefix.
    fn finish(
        &self,
        tuple: &mut Vec<usize>,
        targets: Option<&[f64]>,
        sink: &mut dyn FnMut(&[usize]),
    ) {
        let owned;
        let targets = match targets {
            Some(t) => Some(t),
            None => {
                owned = self.head_targets(tuple);
                owned.as_deref()
            }
        };
        let mut prefix = Vec::new();
        if !matches!(self.pattern, PatternSpec::Translational(_)) {
            prefix.reserve(tuple.len() * self.slots.dim);
            for &k in tuple.iter() {
                prefix.extend_from_slice(self.slots.point(k));
            }
        }
        let surface_center = match self.pattern {
            PatternSpec::Surface(s) => Some(s.eval(&prefix)),
            _ => None,
        };
        let mut test = |k: usize, tuple: &mut Vec<usize>| {
            if !self.admissible(tuple, k) {
                return;
            }
            tuple.push(k);
            if self.holds(tuple, &prefix, targets, surface_center.as_deref()) {
                sink(tuple);
            }
            tuple.pop();
        };
        match &self.grid {
            None => {
                for &k in &self.slots.members[self.n - 1] {
                    test(k, tuple);
                }
            }
            Some(grid) => CANDIDATES.with_borrow_mut(|cand| {
                cand.clear();
                if let PatternSpec::Translational(t) = self.pattern {
                    // filtered per target here, so `holds` rarely runs twice
                    self.translational_candidates(grid, t, tuple, targets.unwrap(), cand);
                } else {
                    self.candidates(
                        grid,
                        tuple,
                        &prefix,
                        targets,
                        surface_center.as_deref(),
                        cand,
                    );
                }
                cand.sort_unstable();
                cand.dedup();
                for &k in cand.iter() {
                    test(k, tuple);
                }
            }),
        }
    }

    fn holds(
        &self,
        tuple: &[usize],
        prefix: &[f64],
        targets: Option<&[f64]>,
        center: Option<&[f64]>,
    ) -> bool {
        let last = self.slots.point(tuple[self.n - 1]);
        match self.pattern {
            PatternSpec::Rough(z) => {
                let mut flat = prefix.to_vec();
                flat.extend_from_slice(last);
                z.contains_within(&flat, self.tol)
            }
            PatternSpec::Surface(_) => dist_sq(last, center.unwrap()) <= self.tol_sq,
            PatternSpec::Translational(t) => {
                let d = self.slots.dim;
                let prev = (self.n >= 2).then(|| self.slots.point(tuple[self.n - 2]));
                let mut off = [0f64; 8];
                t.offset(last, prev, &mut off[..d]);
                targets
                    .unwrap()
                    .chunks_exact(d)
                    .any(|y| dist_sq(&off[..d], y) <= self.tol_sq)
            }
        }
    }

    /// Last-slot indices within `tol` of the query target that produced them.
    fn translational_candidates(
        &self,
        grid: &SpatialGrid,
        t: &TranslationalPattern,
        tuple: &[usize],
        targets: &[f64],
        out: &mut Vec<usize>,
    ) {
        let d = self.slots.dim;
        let a = t.coefficient().value();
        let prev = (self.n >= 2).then(|| self.slots.point(tuple[self.n - 2]));
        let mut c = [0.0; 8];
        let mut off = [0.0; 8];
        HITS.with_borrow_mut(|hits| {
            for y in targets.chunks_exact(d) {
                for j in 0..d {
                    c[j] = match prev {
                        Some(p) => wrap(y[j] + a * p[j]),
                        None => y[j],
                    };
                }
                hits.clear();
                grid.query_ball(&c, self.tol + 1e-9, hits);
                for &k in hits.iter() {
                    t.offset(self.slots.point(k), prev, &mut off[..d]);
                    if dist_sq(&off[..d], y) <= self.tol_sq {
                        out.push(k);
                    }
                }
            }
        });
    }

    /// Superset of the last-slot indices that can satisfy the relation.
    fn candidates(
        &self,
        grid: &SpatialGrid,
        tuple: &[usize],
        prefix: &[f64],
        targets: Option<&[f64]>,
        center: Option<&[f64]>,
        out: &mut Vec<usize>,
    ) {
        let d = self.slots.dim;
        let pad = self.tol + 1e-9;
        match self.pattern {
            PatternSpec::Rough(z) => {
                let mut cells = Vec::new();
                z.last_block_cells(prefix, self.tol, &mut cells);
                cells.sort_unstable();
                cells.dedup();
                let g = z.resolution() as f64;
                let mut lo = vec![0.0; d];
                let mut hi = vec![0.0; d];
                for c in cells {
                    let coords = z.cell_coords(c, d);
                    for j in 0..d {
                        lo[j] = coords[j] as f64 / g - pad;
                        hi[j] = (coords[j] + 1) as f64 / g + pad;
                    }
                    grid.query_box(&lo, &hi, out);
                }
            }
            PatternSpec::Surface(_) => grid.query_ball(center.unwrap(), pad, out),
            PatternSpec::Translational(t) => {
                let a = t.coefficient().value();
                let prev = (self.n >= 2).then(|| self.slots.point(tuple[self.n - 2]));
                let mut c = [0.0; 8];
                for y in targets.unwrap().chunks_exact(d) {
                    for j in 0..d {
                        c[j] = match prev {
                            Some(p) => wrap(y[j] + a * p[j]),
                            None => y[j],
                        };
                    }
                    grid.query_ball(&c, pad, out);
                }
            }
        }
    }
}

/// Tuples of points of `config`, pairwise at least `separation` apart,
/// satisfying the pattern within `margin`. Surface patterns, and
/// translational patterns carrying a window, only consider tuples with
/// `x_i ∈ R_i`.
pub fn violation_scan(
    config: &WeightedConfiguration,
    pattern: &PatternSpec,
    separation: f64,
    margin: f64,
) -> Vec<Vec<usize>> {
    violation_scan_with_budget(config, pattern, separation, margin, DEFAULT_BUDGET)
}

pub fn violation_scan_with_budget(
    config: &WeightedConfiguration,
    pattern: &PatternSpec,
    separation: f64,
    margin: f64,
    budget: u64,
) -> Vec<Vec<usize>> {
    scan_coords(
        config.coords(),
        config.dim(),
        pattern,
        separation,
        margin,
        budget,
    )
}

pub(crate) fn scan_coords(
    coords: &[f64],
    dim: usize,
    pattern: &PatternSpec,
    separation: f64,
    margin: f64,
    budget: u64,
) -> Vec<Vec<usize>> {
    if dim != pattern.dim() {
        log::warn!(
            "configuration dimension {dim} does not match pattern dimension {}",
            pattern.dim()
        );
        return Vec::new();
    }
    let count = coords.len() / dim;
    let n = pattern.arity();
    let members: Vec<Vec<usize>> = match pattern.window() {
        Some(cubes) => cubes
            .iter()
            .map(|q| {
                (0..count)
                    .filter(|&k| q.contains(&coords[k * dim..(k + 1) * dim]))
                    .collect()
            })
            .collect(),
        None => vec![(0..count).collect(); n],
    };
    if (count as f64).powi(n as i32) > budget as f64 {
        log::warn!(
            "violation scan over {count}^{n} tuples exceeds budget {budget}; using pruned search"
        );
    }
    let slots = Slots {
        coords,
        dim,
        members,
    };
    let opts = SearchOptions {
        tol: margin.max(0.0),
        separation: Some(separation),
        budget,
        strict_budget: false,
    };
    search_tuples(pattern, &slots, &opts, false).expect("non-strict search does not fail")
}
