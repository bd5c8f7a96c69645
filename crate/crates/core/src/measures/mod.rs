//! Grid measures on `T^d`: cell-averaged densities, their transforms,
//! `M(λ)` seminorms, the mollifier, and the perturbation pipeline.

mod iterate;
mod mollifier;
mod perturb;

use std::io::{Read, Write};
use std::path::Path;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{signed_gap, Frequency};

pub use iterate::{geometric_schedule, salem_iterate, IterationOptions, StageOutcome};
pub use mollifier::{profile, profile_hat, profile_hat_direct, Mollifier};
pub use perturb::{perturb, support_distance, PerturbDiagnostics, SeminormPair};

const MAGIC: &[u8; 4] = b"SFGM";
const MAX_CELLS: usize = 1 << 26;

/// Real-valued field on the `G^d` grid, cell `c` covering
/// `Π_j [c_j/G, (c_j+1)/G)`, row-major with the last axis fastest.
#[derive(Debug, Clone)]
pub(crate) struct GridField {
    dim: usize,
    g: usize,
    values: Vec<f64>,
    spectrum: OnceLock<Arc<Vec<Complex64>>>,
}

impl GridField {
    fn new(dim: usize, g: usize, values: Vec<f64>) -> Self {
        GridField {
            dim,
            g,
            values,
            spectrum: OnceLock::new(),
        }
    }

    fn cells(&self) -> usize {
        self.values.len()
    }

    fn integral(&self) -> f64 {
        neumaier(self.values.iter().copied()) / self.cells() as f64
    }

    /// Unnormalized DFT `Σ_c v_c e^{-2πi k·c/G}`, cached.
    fn spectrum(&self) -> Arc<Vec<Complex64>> {
        self.spectrum
            .get_or_init(|| {
                let data: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                Arc::new(dft(self.dim, self.g, data, false))
            })
            .clone()
    }

    fn nyquist(&self) -> i64 {
        (self.g / 2) as i64
    }

    fn in_band(&self, xi: &[i64]) -> bool {
        xi.iter().all(|&k| k.abs() < self.nyquist())
    }

    /// Transform of the piecewise-constant function at `ξ` inside the band.
    fn transform(&self, xi: &[i64]) -> Result<Complex64> {
        if xi.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: xi.len(),
            });
        }
        if !self.in_band(xi) {
            return Err(Error::input(format!(
                "frequency {xi:?} outside the band |ξ_j| < {} of a {}-cell grid",
                self.nyquist(),
                self.g
            )));
        }
        Ok(self.transform_in_band(&self.spectrum(), xi))
    }

    fn transform_in_band(&self, spec: &[Complex64], xi: &[i64]) -> Complex64 {
        let g = self.g as i64;
        let mut idx = 0usize;
        let mut factor = Complex64::new(1.0 / self.cells() as f64, 0.0);
        for &k in xi {
            idx = idx * self.g + k.rem_euclid(g) as usize;
            factor *= cell_factor(k, self.g);
        }
        spec[idx] * factor
    }

    /// Same transform by direct summation over cells.
    fn transform_direct(&self, xi: &[i64]) -> Complex64 {
        let g = self.g;
        let axes: Vec<Vec<Complex64>> = xi
            .iter()
            .map(|&k| {
                let f = cell_factor(k, g) / g as f64;
                (0..g)
                    .map(|c| f * unit_phase(-((k as i128 * c as i128).rem_euclid(g as i128) as f64) / g as f64))
                    .collect()
            })
            .collect();
        let mut re = Neumaier::default();
        let mut im = Neumaier::default();
        let mut idx = vec![0usize; self.dim];
        for &v in &self.values {
            let mut z = Complex64::new(v, 0.0);
            for (a, &i) in idx.iter().enumerate() {
                z *= axes[a][i];
            }
            re.add(z.re);
            im.add(z.im);
            for a in (0..self.dim).rev() {
                idx[a] += 1;
                if idx[a] < g {
                    break;
                }
                idx[a] = 0;
            }
        }
        Complex64::new(re.total(), im.total())
    }

    /// `max |v̂(ξ)| |ξ|^{λ/2}` over `0 < max_j |ξ_j| ≤ xi_max`.
    fn seminorm(&self, lambda: f64, xi_max: i64) -> Result<SeminormValue> {
        if xi_max < 1 || xi_max >= self.nyquist() {
            return Err(Error::input(format!(
                "seminorm box {xi_max} must lie in 1..{} for a {}-cell grid",
                self.nyquist(),
                self.g
            )));
        }
        let spec = self.spectrum();
        let d = self.dim;
        let side = (2 * xi_max + 1) as usize;
        let total = side.pow(d as u32);
        // |v̂(-ξ)| = |v̂(ξ)| for real fields: scan the upper half of the box
        let best = (total / 2 + 1..total)
            .into_par_iter()
            .fold(
                || (f64::NEG_INFINITY, Vec::new()),
                |(bv, bx), flat| {
                    let xi = unflatten(flat, d, side, xi_max);
                    let n2: i128 = xi.iter().map(|&k| (k as i128) * (k as i128)).sum();
                    let v = self.transform_in_band(&spec, &xi).norm() * (n2 as f64).powf(lambda / 4.0);
                    if better(v, &xi, bv, &bx) {
                        (v, xi)
                    } else {
                        (bv, bx)
                    }
                },
            )
            .reduce(
                || (f64::NEG_INFINITY, Vec::new()),
                |a, b| if better(b.0, &b.1, a.0, &a.1) { b } else { a },
            );
        Ok(SeminormValue {
            lambda,
            xi_max,
            value: best.0.max(0.0),
            argmax: Frequency(best.1),
        })
    }
}

fn unflatten(mut flat: usize, d: usize, side: usize, shift: i64) -> Vec<i64> {
    let mut xi = vec![0i64; d];
    for a in (0..d).rev() {
        xi[a] = (flat % side) as i64 - shift;
        flat /= side;
    }
    xi
}

/// Larger value wins; ties go to the lexicographically smaller frequency.
pub(crate) fn better(v: f64, xi: &[i64], best: f64, best_xi: &[i64]) -> bool {
    v > best || (v == best && (best_xi.is_empty() || xi < best_xi))
}

/// `∫_0^{1/G} e^{-2πi k x} dx · G`, times the half-cell phase shift.
fn cell_factor(k: i64, g: usize) -> Complex64 {
    let t = k as f64 / g as f64;
    let sinc = if k == 0 {
        1.0
    } else {
        let a = std::f64::consts::PI * t;
        a.sin() / a
    };
    unit_phase(-0.5 * t) * sinc
}

/// `e^{2πi t}`.
pub(crate) fn unit_phase(t: f64) -> Complex64 {
    let (s, c) = (2.0 * std::f64::consts::PI * t).sin_cos();
    Complex64::new(c, s)
}

/// Multi-axis DFT (forward `e^{-2πi}` or inverse `e^{+2πi}`, unnormalized).
pub(crate) fn dft(dim: usize, g: usize, mut data: Vec<Complex64>, inverse: bool) -> Vec<Complex64> {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(g)
    } else {
        planner.plan_fft_forward(g)
    };
    let total = data.len();
    for axis in 0..dim {
        let stride = g.pow((dim - 1 - axis) as u32);
        if stride == 1 {
            data.par_chunks_mut(g).for_each(|line| fft.process(line));
            continue;
        }
        let block = stride * g;
        data.par_chunks_mut(block).for_each(|chunk| {
            let mut line = vec![Complex64::new(0.0, 0.0); g];
            for off in 0..stride {
                for (i, z) in line.iter_mut().enumerate() {
                    *z = chunk[off + i * stride];
                }
                fft.process(&mut line);
                for (i, z) in line.iter().enumerate() {
                    chunk[off + i * stride] = *z;
                }
            }
        });
        debug_assert_eq!(total % block, 0);
    }
    data
}

/// Neumaier compensated sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

pub(crate) fn neumaier(xs: impl Iterator<Item = f64>) -> f64 {
    let mut acc = Neumaier::default();
    xs.for_each(|x| acc.add(x));
    acc.total()
}

/// `sup |μ̂(ξ)| |ξ|^{λ/2}` over a finite frequency box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormValue {
    pub lambda: f64,
    pub xi_max: i64,
    pub value: f64,
    pub argmax: Frequency,
}

/// Nonnegative cell-averaged density on the `G^d` torus grid.
#[derive(Debug, Clone)]
pub struct GridMeasure {
    field: GridField,
}

impl PartialEq for GridMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.field.dim == other.field.dim && self.field.g == other.field.g && self.field.values == other.field.values
    }
}

impl GridMeasure {
    pub fn new(dim: usize, g: usize, density: Vec<f64>) -> Result<Self> {
        if dim == 0 || g < 2 {
            return Err(Error::input("grid needs d ≥ 1 and at least 2 cells per axis"));
        }
        let cells = (g as u128).checked_pow(dim as u32).filter(|&c| c <= MAX_CELLS as u128);
        let Some(cells) = cells else {
            return Err(Error::Resource(format!("{g}^{dim} grid cells exceed {MAX_CELLS}")));
        };
        if density.len() != cells as usize {
            return Err(Error::input(format!(
                "grid expects {cells} densities, got {}",
                density.len()
            )));
        }
        if let Some(v) = density.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::input(format!("density value {v} is not finite and nonnegative")));
        }
        Ok(GridMeasure {
            field: GridField::new(dim, g, density),
        })
    }

    /// Lebesgue measure.
    pub fn uniform(dim: usize, g: usize) -> Result<Self> {
        let cells = g.checked_pow(dim as u32).unwrap_or(usize::MAX);
        if cells > MAX_CELLS {
            return Err(Error::Resource(format!("{g}^{dim} grid cells exceed {MAX_CELLS}")));
        }
        GridMeasure::new(dim, g, vec![1.0; cells])
    }

    /// Cell averages of the tensor bump of radius `radius` at `center`
    /// (the mollifier profile), a probability measure.
    pub fn bump(dim: usize, g: usize, center: &[f64], radius: f64) -> Result<Self> {
        if center.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: center.len(),
            });
        }
        if !(radius > 0.0 && radius < 0.5) {
            return Err(Error::input(format!("bump radius {radius} outside (0, 1/2)")));
        }
        if 1.0 / g as f64 >= radius {
            return Err(Error::input(format!(
                "grid of {g} cells per axis does not resolve radius {radius}"
            )));
        }
        let m = Mollifier::new(dim);
        let axes: Vec<Vec<f64>> = center.iter().map(|&c| axis_averages(g, c, m.half_width(radius))).collect();
        let cells = g.pow(dim as u32);
        let mut density = vec![0.0; cells];
        density.par_iter_mut().enumerate().for_each(|(flat, v)| {
            let mut rest = flat;
            let mut p = 1.0;
            for a in (0..dim).rev() {
                p *= axes[a][rest % g];
                rest /= g;
            }
            *v = p;
        });
        GridMeasure::new(dim, g, density)
    }

    pub fn dim(&self) -> usize {
        self.field.dim
    }

    pub fn cells_per_axis(&self) -> usize {
        self.field.g
    }

    pub fn density(&self) -> &[f64] {
        &self.field.values
    }

    pub fn mass(&self) -> f64 {
        self.field.integral()
    }

    /// Largest `|ξ_j|` whose coefficient is claimed.
    pub fn band(&self) -> i64 {
        self.field.nyquist() - 1
    }

    pub fn normalized(&self) -> Result<Self> {
        let m = self.mass();
        if !(m > 0.0) {
            return Err(Error::input("cannot normalize a zero measure"));
        }
        GridMeasure::new(self.dim(), self.cells_per_axis(), self.field.values.iter().map(|v| v / m).collect())
    }

    /// Center of cell `flat` (row-major).
    pub fn cell_center(&self, flat: usize) -> Vec<f64> {
        let g = self.field.g;
        let mut out = vec![0.0; self.dim()];
        let mut rest = flat;
        for a in (0..self.dim()).rev() {
            out[a] = ((rest % g) as f64 + 0.5) / g as f64;
            rest /= g;
        }
        out
    }

    /// Flat index of the cell containing `x`.
    pub fn cell_of(&self, x: &[f64]) -> usize {
        let g = self.field.g;
        x.iter().fold(0usize, |acc, &c| {
            acc * g + ((crate::torus::wrap(c) * g as f64) as usize).min(g - 1)
        })
    }

    /// `μ̂(ξ) = ∫ e^{-2πi ξ·x} dμ(x)`, via the cached grid DFT.
    pub fn transform(&self, xi: &Frequency) -> Result<Complex64> {
        self.field.transform(&xi.0)
    }

    /// Same value by direct summation over all cells.
    pub fn transform_direct(&self, xi: &Frequency) -> Result<Complex64> {
        if xi.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: xi.dim(),
            });
        }
        Ok(self.field.transform_direct(&xi.0))
    }

    /// Writes the `SFGM` binary and a `.json` sidecar next to it.
    pub fn save(&self, path: &Path, provenance: serde_json::Value) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(MAGIC)?;
        f.write_all(&(self.dim() as u32).to_le_bytes())?;
        f.write_all(&(self.cells_per_axis() as u32).to_le_bytes())?;
        for v in self.density() {
            f.write_all(&v.to_le_bytes())?;
        }
        f.flush()?;
        let sidecar = serde_json::json!({
            "dim": self.dim(),
            "cells_per_axis": self.cells_per_axis(),
            "mass": self.mass(),
            "provenance": provenance,
        });
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(Error::input(format!("{} is not an SFGM grid file", path.display())));
        }
        let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let g = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = &bytes[12..];
        let cells = (g as u128).checked_pow(dim as u32).unwrap_or(u128::MAX);
        if cells > MAX_CELLS as u128 || body.len() as u128 != cells * 8 {
            return Err(Error::input(format!(
                "{}: header says {g}^{dim} cells, body holds {} bytes",
                path.display(),
                body.len()
            )));
        }
        let density = body.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        GridMeasure::new(dim, g, density)
    }
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    p.into()
}

/// Cell averages of `x ↦ ψ(gap(x, c)/w)/w` on a `g`-cell circle.
fn axis_averages(g: usize, c: f64, w: f64) -> Vec<f64> {
    const SUB: usize = 64;
    (0..g)
        .map(|i| {
            let lo = i as f64 / g as f64;
            let s: f64 = (0..SUB)
                .map(|k| {
                    let x = lo + (k as f64 + 0.5) / (SUB * g) as f64;
                    profile(signed_gap(x, c) / w) / w
                })
                .sum();
            s / SUB as f64
        })
        .collect()
}

/// Cell-averaged `φ_r` centered at the origin.
pub fn mollifier_density(dim: usize, r: f64, g: usize) -> Result<GridMeasure> {
    if 1.0 / g as f64 >= r {
        return Err(Error::input(format!("1/G = {} does not resolve r = {r}", 1.0 / g as f64)));
    }
    GridMeasure::bump(dim, g, &vec![0.0; dim], r)
}

/// `‖μ‖_{M(λ)}` over the box `0 < max_j |ξ_j| ≤ xi_max`.
pub fn seminorm(mu: &GridMeasure, lambda: f64, xi_max: i64) -> Result<SeminormValue> {
    mu.field.seminorm(lambda, xi_max)
}

pub(crate) fn field_difference(a: &GridMeasure, b: &GridMeasure) -> Result<GridField> {
    same_grid(a, b)?;
    Ok(GridField::new(
        a.dim(),
        a.cells_per_axis(),
        a.density().iter().zip(b.density()).map(|(x, y)| x - y).collect(),
    ))
}

pub(crate) fn same_grid(a: &GridMeasure, b: &GridMeasure) -> Result<()> {
    if a.dim() != b.dim() || a.cells_per_axis() != b.cells_per_axis() {
        return Err(Error::input(format!(
            "grids differ: {}^{} vs {}^{}",
            a.cells_per_axis(),
            a.dim(),
            b.cells_per_axis(),
            b.dim()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
