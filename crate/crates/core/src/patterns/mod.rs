//! Pattern sets in their three representations, plus exact violation scans.
//!
//! A pattern is a relation on `n`-tuples of points of `T^d`:
//!
//! * rough: the concatenated tuple lies near a union of grid cells in `T^{dn}`;
//! * surface: `x_n = f(x_1, ..., x_{n-1})` for a Lipschitz map `f`;
//! * translational: `x_n - a x_{n-1} ∈ T(x_1, ..., x_{n-2})` for a finite-valued `T`.

mod builtin;
mod cells;
mod scan;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::torus::{dist_sq, wrap, TorusCube, TorusPoint};

pub use builtin::{
    ap3_surface, ap3_translational, isosceles_parabola, linear_equation_patterns,
    min_layout_period, parabola, reflect_on_parabola, translational_layout, IsoscelesSetup,
    LinearEquation,
};
pub use cells::{read_cell_list, write_cell_list};
pub(crate) use scan::{scan_coords, search_tuples, SearchOptions, Slots};
pub use scan::{violation_scan, violation_scan_with_budget, DEFAULT_BUDGET, ROUNDING_SLACK};

/// A map on flat coordinate slices. Surface maps return one point of `T^d`;
/// translational target maps return a flat list of points.
pub type PointMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub struct RoughPattern {
    n: usize,
    dim: usize,
    resolution: u64,
    cells: HashSet<u64>,
    // prefix cell (first d(n-1) axes) -> last-block cell indices
    by_prefix: HashMap<u64, Vec<u64>>,
    pub claimed_alpha: f64,
}

impl fmt::Debug for RoughPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RoughPattern")
            .field("n", &self.n)
            .field("dim", &self.dim)
            .field("resolution", &self.resolution)
            .field("cells", &self.cells.len())
            .field("claimed_alpha", &self.claimed_alpha)
            .finish()
    }
}

impl RoughPattern {
    /// `resolution` is the number of cells per axis (`rho_Z = 1/g`).
    pub fn new(
        n: usize,
        dim: usize,
        resolution: u64,
        cells: impl IntoIterator<Item = u64>,
        claimed_alpha: f64,
    ) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::input("rough pattern needs n >= 1 and d >= 1"));
        }
        if resolution < 2 {
            return Err(Error::input("cell resolution must be 1/g with g >= 2"));
        }
        let axes = (n * dim) as u32;
        let total = (resolution as u128).checked_pow(axes).unwrap_or(u128::MAX);
        if total > (1u128 << 63) {
            return Err(Error::input("cell grid too fine for 64-bit cell indices"));
        }
        if !(0.0..(n * dim) as f64).contains(&claimed_alpha) {
            return Err(Error::input("claimed_alpha must lie in [0, dn)"));
        }
        let cells: HashSet<u64> = cells.into_iter().collect();
        if let Some(&bad) = cells.iter().find(|&&c| c as u128 >= total) {
            return Err(Error::input(format!("cell index {bad} out of range")));
        }
        let last_span = resolution.pow(dim as u32);
        let mut by_prefix: HashMap<u64, Vec<u64>> = HashMap::new();
        for &c in &cells {
            by_prefix
                .entry(c / last_span)
                .or_default()
                .push(c % last_span);
        }
        for v in by_prefix.values_mut() {
            v.sort_unstable();
        }
        Ok(RoughPattern {
            n,
            dim,
            resolution,
            cells,
            by_prefix,
            claimed_alpha,
        })
    }

    pub fn empty(n: usize, dim: usize, resolution: u64) -> Result<Self> {
        Self::new(n, dim, resolution, std::iter::empty(), 0.0)
    }

    /// Every cell of `T^{dn}` occupied.
    pub fn full(n: usize, dim: usize, resolution: u64) -> Result<Self> {
        let total = resolution.pow((n * dim) as u32);
        Self::new(n, dim, resolution, 0..total, (n * dim) as f64 - 1e-9)
    }

    /// Occupies every cell met by the points `p` produced by `sample` (a
    /// rasterization helper).
    pub fn rasterize(
        n: usize,
        dim: usize,
        resolution: u64,
        points: impl IntoIterator<Item = Vec<f64>>,
        claimed_alpha: f64,
    ) -> Result<Self> {
        let g = resolution;
        let cells = points.into_iter().map(|p| {
            p.iter().fold(0u64, |acc, &c| {
                acc * g + ((wrap(c) * g as f64) as u64).min(g - 1)
            })
        });
        let cells: Vec<u64> = cells.collect();
        Self::new(n, dim, resolution, cells, claimed_alpha)
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> u64 {
        self.resolution
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = u64> + '_ {
        self.cells.iter().copied()
    }

    /// Cell coordinates (one integer per axis) of a cell index.
    pub fn cell_coords(&self, mut index: u64, axes: usize) -> Vec<u64> {
        let g = self.resolution;
        let mut out = vec![0; axes];
        for a in (0..axes).rev() {
            out[a] = index % g;
            index /= g;
        }
        out
    }

    #[inline]
    fn axis_box_gap(&self, x: f64, cell: u64) -> f64 {
        let g = self.resolution as f64;
        let center = (cell as f64 + 0.5) / g;
        let d = (x - center).abs();
        (d.min(1.0 - d) - 0.5 / g).max(0.0)
    }

    /// Squared distance from the point `p` (any number of leading axes) to
    /// the closed box of the cell given by its per-axis coordinates.
    pub(crate) fn box_dist_sq(&self, p: &[f64], cell: &[u64]) -> f64 {
        p.iter()
            .zip(cell)
            .map(|(&x, &c)| self.axis_box_gap(x, c).powi(2))
            .sum()
    }

    /// Occupied cells whose closed boxes could lie within `eps` of `p` over
    /// the first `p.len()` axes; calls `visit(cell_index_over_those_axes)`.
    fn visit_nearby(
        &self,
        p: &[f64],
        eps: f64,
        keys: &dyn Fn(u64) -> bool,
        visit: &mut dyn FnMut(u64),
    ) {
        let g = self.resolution as i64;
        let axes = p.len();
        let mut first = Vec::with_capacity(axes);
        let mut count = Vec::with_capacity(axes);
        let mut product: u128 = 1;
        for &x in p {
            let s = ((x - eps) * g as f64).floor() as i64 - 1;
            let e = ((x + eps) * g as f64).floor() as i64 + 1;
            let c = (e - s + 1).clamp(1, g);
            first.push(s);
            count.push(c);
            product = product.saturating_mul(c as u128);
        }
        let mut offset = vec![0i64; axes];
        let _ = product;
        loop {
            let idx = (0..axes).fold(0u64, |acc, a| {
                acc * g as u64 + (first[a] + offset[a]).rem_euclid(g) as u64
            });
            if keys(idx) {
                visit(idx);
            }
            let mut a = axes;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                offset[a] += 1;
                if offset[a] < count[a] {
                    break;
                }
                offset[a] = 0;
            }
        }
    }

    fn probe_count(&self, p: &[f64], eps: f64) -> u128 {
        let g = self.resolution as i64;
        p.iter()
            .map(|&x| {
                let s = ((x - eps) * g as f64).floor() as i64 - 1;
                let e = ((x + eps) * g as f64).floor() as i64 + 1;
                (e - s + 1).clamp(1, g) as u128
            })
            .fold(1u128, |a, b| a.saturating_mul(b))
    }

    /// True iff the concatenated point `p` in `T^{dn}` is within `eps` of
    /// some occupied cell's closed box.
    pub fn contains_within(&self, p: &[f64], eps: f64) -> bool {
        if self.cells.is_empty() {
            return false;
        }
        let axes = self.n * self.dim;
        let eps_sq = eps * eps;
        if self.probe_count(p, eps) > self.cells.len() as u128 {
            return self
                .cells
                .iter()
                .any(|&c| self.box_dist_sq(p, &self.cell_coords(c, axes)) <= eps_sq);
        }
        let mut hit = false;
        self.visit_nearby(p, eps, &|c| self.cells.contains(&c), &mut |c| {
            if !hit && self.box_dist_sq(p, &self.cell_coords(c, axes)) <= eps_sq {
                hit = true;
            }
        });
        hit
    }

    /// Candidate last-block boxes for a prefix of `n - 1` points: every
    /// last-block cell whose prefix cell is within `eps` of `prefix`.
    pub(crate) fn last_block_cells(&self, prefix: &[f64], eps: f64, out: &mut Vec<u64>) {
        let prefix_axes = prefix.len();
        if self.n == 1 {
            out.extend(self.by_prefix.get(&0).into_iter().flatten().copied());
            return;
        }
        let eps_sq = eps * eps;
        let mut check = |key: u64| {
            if self.box_dist_sq(prefix, &self.cell_coords(key, prefix_axes)) <= eps_sq {
                if let Some(v) = self.by_prefix.get(&key) {
                    out.extend_from_slice(v);
                }
            }
        };
        if self.probe_count(prefix, eps) > self.by_prefix.len() as u128 {
            for &key in self.by_prefix.keys() {
                check(key);
            }
        } else {
            self.visit_nearby(
                prefix,
                eps,
                &|k| self.by_prefix.contains_key(&k),
                &mut check,
            );
        }
    }
}

/// Tuple-level membership: concatenates the points and tests the thickening.
pub fn thickened_membership(z: &RoughPattern, tuple: &[TorusPoint], eps: f64) -> Result<bool> {
    if eps < 0.0 {
        return Err(Error::input("eps must be nonnegative"));
    }
    if tuple.len() != z.n || tuple.iter().any(|p| p.dim() != z.dim) {
        let got = tuple.iter().map(|p| p.dim()).sum();
        return Err(Error::DimensionMismatch {
            expected: z.n * z.dim,
            got,
        });
    }
    let flat: Vec<f64> = tuple.iter().flat_map(|p| p.coords().to_vec()).collect();
    Ok(z.contains_within(&flat, eps))
}

#[derive(Clone)]
pub struct SurfacePattern {
    n: usize,
    dim: usize,
    cubes: Vec<TorusCube>,
    f: PointMap,
    lipschitz: f64,
}

impl fmt::Debug for SurfacePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SurfacePattern")
            .field("n", &self.n)
            .field("dim", &self.dim)
            .field("cubes", &self.cubes)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl SurfacePattern {
    /// `cubes` are `R_1..R_n`; `f` maps `d(n-1)` coordinates to `d`.
    /// The Lipschitz bound is spot-checked on random pairs from
    /// `2R_1 x ... x 2R_{n-1}`.
    pub fn new(
        n: usize,
        dim: usize,
        cubes: Vec<TorusCube>,
        f: PointMap,
        lipschitz: f64,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::input("surface pattern needs n >= 2"));
        }
        if cubes.len() != n || cubes.iter().any(|c| c.dim() != dim) {
            return Err(Error::input("surface pattern needs n cubes of dimension d"));
        }
        if !(lipschitz >= 0.0) {
            return Err(Error::input("Lipschitz constant must be nonnegative"));
        }
        check_cube_layout(&cubes, 10.0)?;
        let pat = SurfacePattern {
            n,
            dim,
            cubes,
            f,
            lipschitz,
        };
        pat.spot_check_lipschitz(256)?;
        pat.probe_jacobian(64);
        Ok(pat)
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cubes(&self) -> &[TorusCube] {
        &self.cubes
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn eval(&self, prefix: &[f64]) -> Vec<f64> {
        let mut y = (self.f)(prefix);
        y.iter_mut().for_each(|c| *c = wrap(*c));
        y
    }

    fn domain_sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut x = Vec::with_capacity((self.n - 1) * self.dim);
        for cube in &self.cubes[..self.n - 1] {
            let q = cube.scaled(2.0);
            for lo in q.lower() {
                x.push(wrap(lo + q.side * rng.gen::<f64>()));
            }
        }
        x
    }

    fn spot_check_lipschitz(&self, pairs: usize) -> Result<()> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_11f5);
        for _ in 0..pairs {
            let x = self.domain_sample(&mut rng);
            let y = self.domain_sample(&mut rng);
            let lhs = dist_sq(&self.eval(&x), &self.eval(&y)).sqrt();
            let rhs = self.lipschitz * dist_sq(&x, &y).sqrt();
            if lhs > rhs * (1.0 + 1e-9) + 1e-15 {
                return Err(Error::input(format!(
                    "Lipschitz bound {} violated: |f(x)-f(y)| = {lhs:.3e} > {rhs:.3e}",
                    self.lipschitz
                )));
            }
        }
        Ok(())
    }

    /// Finite-difference probe of each d x d Jacobian block; warns when a
    /// block is numerically singular.
    fn probe_jacobian(&self, points: usize) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x1acb);
        let h = 1e-6;
        let d = self.dim;
        for _ in 0..points {
            let x = self.domain_sample(&mut rng);
            let fx = (self.f)(&x);
            for block in 0..self.n - 1 {
                let mut jac = vec![0.0; d * d];
                for col in 0..d {
                    let mut xp = x.clone();
                    xp[block * d + col] += h;
                    let fp = (self.f)(&xp);
                    for row in 0..d {
                        jac[row * d + col] = (fp[row] - fx[row]) / h;
                    }
                }
                let det = determinant(&mut jac, d);
                if det.abs() < 1e-8 {
                    log::warn!(
                        "surface map has a near-singular Jacobian block {block} (det {det:.2e})"
                    );
                    return;
                }
            }
        }
    }
}

fn determinant(m: &mut [f64], d: usize) -> f64 {
    let mut det = 1.0;
    for c in 0..d {
        let p = (c..d)
            .max_by(|&a, &b| m[a * d + c].abs().total_cmp(&m[b * d + c].abs()))
            .unwrap();
        if m[p * d + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for k in 0..d {
                m.swap(p * d + k, c * d + k);
            }
            det = -det;
        }
        det *= m[c * d + c];
        for r in c + 1..d {
            let factor = m[r * d + c] / m[c * d + c];
            for k in c..d {
                m[r * d + k] -= factor * m[c * d + k];
            }
        }
    }
    det
}

/// Rejects layouts where two cubes are closer than `factor` sidelengths.
pub fn check_cube_layout(cubes: &[TorusCube], factor: f64) -> Result<()> {
    for i in 0..cubes.len() {
        for j in i + 1..cubes.len() {
            let need = factor * cubes[i].side.max(cubes[j].side);
            let got = cubes[i].distance(&cubes[j]);
            if got < need * (1.0 - 1e-12) {
                return Err(Error::input(format!(
                    "cubes {} and {} are {got:.4} apart, need at least {need:.4}",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(())
}

/// `a = num/den`, kept exact for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Ratio {
    pub num: i64,
    pub den: i64,
}

impl Ratio {
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::input("zero denominator"));
        }
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i64;
        let s = if den < 0 { -1 } else { 1 };
        Ok(Ratio {
            num: s * num / g.max(1),
            den: s * den / g.max(1),
        })
    }

    pub fn integer(v: i64) -> Self {
        Ratio { num: v, den: 1 }
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Clone)]
pub struct TranslationalPattern {
    n: usize,
    dim: usize,
    a: Ratio,
    period: u32,
    targets: PointMap,
    lipschitz: f64,
    pub claimed_alpha: f64,
    periodized: bool,
    window: Option<Vec<TorusCube>>,
}

impl fmt::Debug for TranslationalPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TranslationalPattern")
            .field("n", &self.n)
            .field("dim", &self.dim)
            .field("a", &self.a)
            .field("period", &self.period)
            .field("lipschitz", &self.lipschitz)
            .field("claimed_alpha", &self.claimed_alpha)
            .field("periodized", &self.periodized)
            .field("window", &self.window)
            .finish()
    }
}

impl TranslationalPattern {
    /// Relation `x_n - a x_{n-1} ∈ T(x_1..x_{n-2})`. For `n = 1` the relation
    /// degenerates to `x_1 ∈ T()`, and `a` is unused.
    pub fn new(
        n: usize,
        dim: usize,
        a: Ratio,
        period: u32,
        targets: PointMap,
        lipschitz: f64,
        claimed_alpha: f64,
    ) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::input(
                "translational pattern needs n >= 1 and d >= 1",
            ));
        }
        if a.num == 0 && n >= 2 {
            return Err(Error::input("translational coefficient a must be nonzero"));
        }
        if period == 0 {
            return Err(Error::input("period m must be positive"));
        }
        Ok(TranslationalPattern {
            n,
            dim,
            a,
            period,
            targets,
            lipschitz,
            claimed_alpha,
            periodized: false,
            window: None,
        })
    }

    /// Restricts violation scans to tuples with `x_i ∈ R_i`.
    pub fn with_window(mut self, cubes: Vec<TorusCube>) -> Result<Self> {
        if cubes.len() != self.n || cubes.iter().any(|c| c.dim() != self.dim) {
            return Err(Error::input("window needs n cubes of dimension d"));
        }
        self.window = Some(cubes);
        Ok(self)
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coefficient(&self) -> Ratio {
        self.a
    }

    pub fn period(&self) -> u32 {
        self.period
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn is_periodized(&self) -> bool {
        self.periodized
    }

    pub fn window(&self) -> Option<&[TorusCube]> {
        self.window.as_deref()
    }

    /// Flat list of target points for the head `x_1..x_{n-2}`.
    pub fn targets(&self, head: &[f64]) -> Vec<f64> {
        let mut t = (self.targets)(head);
        t.iter_mut().for_each(|c| *c = wrap(*c));
        t
    }

    /// `x_n - a x_{n-1}` reduced mod 1 (`x_n` itself when `n = 1`).
    #[inline]
    pub fn offset(&self, last: &[f64], before_last: Option<&[f64]>, out: &mut [f64]) {
        let a = self.a.value();
        match before_last {
            Some(prev) => {
                for j in 0..self.dim {
                    out[j] = wrap(last[j] - a * prev[j]);
                }
            }
            None => out.copy_from_slice(last),
        }
    }
}

/// Closes every target list under translation by `b/m`, `b ∈ {0..m-1}^d`.
pub fn periodize(raw: &TranslationalPattern) -> TranslationalPattern {
    let mut out = raw.clone();
    out.periodized = true;
    if raw.periodized || raw.period == 1 {
        return out;
    }
    let m = raw.period as usize;
    let d = raw.dim;
    let inner = raw.targets.clone();
    out.targets = Arc::new(move |head: &[f64]| {
        let base = inner(head);
        let mut pts: Vec<Vec<f64>> = Vec::with_capacity(base.len() / d * m.pow(d as u32));
        for t in base.chunks_exact(d) {
            let mut b = vec![0usize; d];
            loop {
                pts.push(
                    t.iter()
                        .zip(&b)
                        .map(|(&c, &bj)| wrap(c + bj as f64 / m as f64))
                        .collect(),
                );
                let mut j = d;
                let done = loop {
                    if j == 0 {
                        break true;
                    }
                    j -= 1;
                    b[j] += 1;
                    if b[j] < m {
                        break false;
                    }
                    b[j] = 0;
                };
                if done {
                    break;
                }
            }
        }
        pts.sort_by(|x, y| {
            x.iter()
                .zip(y)
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        pts.dedup_by(|x, y| dist_sq(x, y) < 1e-24);
        pts.concat()
    });
    out
}

#[derive(Debug, Clone)]
pub enum PatternSpec {
    Rough(RoughPattern),
    Surface(SurfacePattern),
    Translational(TranslationalPattern),
}

impl PatternSpec {
    pub fn arity(&self) -> usize {
        match self {
            PatternSpec::Rough(z) => z.n,
            PatternSpec::Surface(s) => s.n,
            PatternSpec::Translational(t) => t.n,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            PatternSpec::Rough(z) => z.dim,
            PatternSpec::Surface(s) => s.dim,
            PatternSpec::Translational(t) => t.dim,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PatternSpec::Rough(_) => "rough",
            PatternSpec::Surface(_) => "surface",
            PatternSpec::Translational(_) => "translational",
        }
    }

    /// Cubes `R_1..R_n` to which violation scans are restricted, if any.
    pub fn window(&self) -> Option<&[TorusCube]> {
        match self {
            PatternSpec::Rough(_) => None,
            PatternSpec::Surface(s) => Some(&s.cubes),
            PatternSpec::Translational(t) => t.window(),
        }
    }

    /// Whether the tuple (flat slices, one per point) satisfies the relation
    /// within `tol`. No distinctness or window conditions are applied.
    pub fn holds_within(&self, tuple: &[&[f64]], tol: f64) -> bool {
        let tol_sq = tol * tol;
        match self {
            PatternSpec::Rough(z) => {
                let flat: Vec<f64> = tuple.concat();
                z.contains_within(&flat, tol)
            }
            PatternSpec::Surface(s) => {
                let prefix: Vec<f64> = tuple[..s.n - 1].concat();
                dist_sq(tuple[s.n - 1], &s.eval(&prefix)) <= tol_sq
            }
            PatternSpec::Translational(t) => {
                let head: Vec<f64> = if t.n >= 2 {
                    tuple[..t.n - 2].concat()
                } else {
                    Vec::new()
                };
                let targets = t.targets(&head);
                translational_holds(t, tuple, &targets, tol_sq)
            }
        }
    }
}

#[inline]
pub(crate) fn translational_holds(
    t: &TranslationalPattern,
    tuple: &[&[f64]],
    targets: &[f64],
    tol_sq: f64,
) -> bool {
    let d = t.dim;
    let mut off = [0f64; 8];
    let prev = if t.n >= 2 { Some(tuple[t.n - 2]) } else { None };
    t.offset(tuple[t.n - 1], prev, &mut off[..d]);
    targets
        .chunks_exact(d)
        .any(|y| dist_sq(&off[..d], y) <= tol_sq)
}

/// `|γ(t1) - γ(t2)|^2 - |γ(t2) - γ(t3)|^2` for a curve in `R^d`.
pub fn isosceles_functional(gamma: &dyn Fn(f64) -> Vec<f64>, t1: f64, t2: f64, t3: f64) -> f64 {
    let (a, b, c) = (gamma(t1), gamma(t2), gamma(t3));
    let sq = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    sq(&a, &b) - sq(&b, &c)
}
