//! Empirical dimension estimators: box counting for point and cell sets,
//! and Fourier-decay exponents for measures and configurations.

use std::collections::HashSet;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expsum::{annulus_sup_with, EnumerationOptions, SpectralSource};
use crate::patterns::RoughPattern;
use crate::sampler::WeightedConfiguration;
use crate::torus::Frequency;

/// Annulus sups at or below this are treated as exact zeros.
pub const ZERO_FLOOR: f64 = 1e-13;

/// Annuli dropped at each end of the usable range before taking the minimum.
pub const TRIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateKind {
    Box,
    Fourier,
}

/// One row of the per-scale table. For box counts `scale` is the box side
/// and `count` the occupied boxes; for Fourier fits `scale` is `2^-j`,
/// `count` the annulus sup and `exponent` the per-annulus `s_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub j: Option<u32>,
    pub scale: f64,
    pub count: f64,
    pub exponent: Option<f64>,
    pub used: bool,
    pub argmax: Option<Frequency>,
    pub exhaustive: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub kind: EstimateKind,
    pub value: f64,
    pub ambient: usize,
    /// Finest and coarsest scale entering the value.
    pub scale_range: (f64, f64),
    pub table: Vec<ScaleRow>,
    /// RMS residual of the box-count fit; spread of the used exponents for
    /// Fourier fits.
    pub residual: f64,
    /// The raw value fell outside `[0, ambient]` and was clamped.
    pub capped: bool,
    pub notes: Vec<String>,
}

impl DimensionEstimate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Input to box counting.
#[derive(Debug, Clone, Copy)]
pub enum BoxInput<'a> {
    /// Flat coordinates of points in `T^dim`.
    Points { dim: usize, coords: &'a [f64] },
    /// Occupied cells of a rough pattern, taken at their centers.
    Cells(&'a RoughPattern),
}

/// `count` scales `finest * 2^k`, coarsest first.
pub fn dyadic_scales(finest: f64, count: usize) -> Vec<f64> {
    (0..count).rev().map(|k| finest * 2f64.powi(k as i32)).collect()
}

/// Box-counting estimate. A box of side `s` is one of `floor(1/s)^d`
/// periodic boxes; the table records the effective side. The value is the
/// least-squares slope of `log count` against `log(1/side)`.
pub fn box_dimension(input: BoxInput<'_>, scales: &[f64]) -> Result<DimensionEstimate> {
    if scales.len() < 4 {
        return Err(Error::input("box counting needs at least 4 scales"));
    }
    if scales.iter().any(|s| !(*s > 0.0 && *s <= 1.0)) {
        return Err(Error::input("scales must lie in (0, 1]"));
    }
    if scales.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::input("scales must be strictly decreasing"));
    }
    let (dim, coords) = match input {
        BoxInput::Points { dim, coords } => {
            if dim == 0 || coords.len() % dim != 0 {
                return Err(Error::input("coordinate array is not a whole number of points"));
            }
            (dim, coords.to_vec())
        }
        BoxInput::Cells(z) => (z.arity() * z.dim(), cell_centers(z)),
    };
    if coords.is_empty() {
        return Err(Error::input("box counting of an empty set"));
    }

    let rows: Vec<ScaleRow> = scales
        .par_iter()
        .map(|&s| {
            let m = ((1.0 / s).floor() as u64).max(1);
            let count = occupied_boxes(dim, &coords, m);
            ScaleRow {
                j: None,
                scale: 1.0 / m as f64,
                count: count as f64,
                exponent: None,
                used: true,
                argmax: None,
                exhaustive: None,
            }
        })
        .collect();

    let xs: Vec<f64> = rows.iter().map(|r| (1.0 / r.scale).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.count.ln()).collect();
    let (slope, residual) = least_squares(&xs, &ys);
    let mut notes = Vec::new();
    let (value, capped) = clamp(slope, dim);
    if capped {
        notes.push(format!("raw slope {slope:.4} clamped to [0, {dim}]"));
    }
    Ok(DimensionEstimate {
        kind: EstimateKind::Box,
        value,
        ambient: dim,
        scale_range: (rows.last().unwrap().scale, rows[0].scale),
        table: rows,
        residual,
        capped,
        notes,
    })
}

/// Box counting at `levels` dyadic multiples of the configuration radius.
pub fn box_dimension_of_config(cfg: &WeightedConfiguration, levels: usize) -> Result<DimensionEstimate> {
    let finest = cfg.radius();
    let mut scales = dyadic_scales(finest, levels);
    scales.retain(|&s| s <= 1.0);
    box_dimension(
        BoxInput::Points {
            dim: cfg.dim(),
            coords: cfg.coords(),
        },
        &scales,
    )
}

fn cell_centers(z: &RoughPattern) -> Vec<f64> {
    let axes = z.arity() * z.dim();
    let g = z.resolution() as f64;
    let mut out = Vec::with_capacity(z.cell_count() * axes);
    for c in z.cells() {
        out.extend(z.cell_coords(c, axes).into_iter().map(|k| (k as f64 + 0.5) / g));
    }
    out
}

fn occupied_boxes(dim: usize, coords: &[f64], m: u64) -> usize {
    let key = |x: &[f64]| -> Vec<u64> {
        x.iter()
            .map(|&c| ((crate::torus::wrap(c) * m as f64) as u64).min(m - 1))
            .collect()
    };
    coords
        .par_chunks(dim)
        .fold(HashSet::new, |mut set, x| {
            set.insert(key(x));
            set
        })
        .reduce(HashSet::new, |mut a, b| {
            if a.len() < b.len() {
                return b.into_iter().chain(a).collect();
            }
            a.extend(b);
            a
        })
        .len()
}

/// Slope and RMS residual of the least-squares line through `(xs, ys)`.
fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    (slope, (rss / n).sqrt())
}

fn clamp(v: f64, d: usize) -> (f64, bool) {
    let c = v.clamp(0.0, d as f64);
    (c, c != v)
}

/// Per-annulus exponent `s_j = 2 log(1/sup_j) / (j log 2)`.
pub fn annulus_exponent(sup: f64, j: u32) -> f64 {
    2.0 * (1.0 / sup).ln() / (j as f64 * std::f64::consts::LN_2)
}

/// Fourier-decay estimate over the annuli `j_range`. `j = 0` carries no
/// decay information and is skipped. Annuli with a zero sup are excluded;
/// of the rest, the [`TRIM`] lowest and highest are dropped when at least
/// `2 TRIM + 1` remain, and the value is the minimum exponent. With no
/// nonzero annulus the value is the ambient dimension, flagged as capped.
pub fn fourier_dimension(
    source: SpectralSource<'_>,
    j_range: RangeInclusive<u32>,
    opts: &EnumerationOptions,
) -> Result<DimensionEstimate> {
    let d = source.dim();
    let js: Vec<u32> = j_range.filter(|&j| j > 0).collect();
    if js.is_empty() {
        return Err(Error::input("fourier fit needs an annulus with j >= 1"));
    }
    let sups = js
        .iter()
        .map(|&j| annulus_sup_with(source, j, opts))
        .collect::<Result<Vec<_>>>()?;

    let mut notes = Vec::new();
    let mut table: Vec<ScaleRow> = js
        .iter()
        .zip(sups)
        .map(|(&j, (sup, xi, exhaustive))| ScaleRow {
            j: Some(j),
            scale: 2f64.powi(-(j as i32)),
            count: sup,
            exponent: (sup > ZERO_FLOOR).then(|| annulus_exponent(sup, j)),
            used: false,
            argmax: Some(xi),
            exhaustive: Some(exhaustive),
        })
        .collect();
    let zero: Vec<u32> = table.iter().filter(|r| r.exponent.is_none()).filter_map(|r| r.j).collect();
    if !zero.is_empty() {
        notes.push(format!("annuli {zero:?} have zero sup and are excluded"));
    }
    let usable: Vec<usize> = (0..table.len()).filter(|&i| table[i].exponent.is_some()).collect();
    if usable.is_empty() {
        notes.push(format!("no nonzero coefficient in range; value set to the ambient dimension {d}"));
        return Ok(DimensionEstimate {
            kind: EstimateKind::Fourier,
            value: d as f64,
            ambient: d,
            scale_range: (table.last().unwrap().scale, table[0].scale),
            table,
            residual: 0.0,
            capped: true,
            notes,
        });
    }
    let window = if usable.len() > 2 * TRIM {
        &usable[TRIM..usable.len() - TRIM]
    } else {
        notes.push(format!("only {} usable annuli; none trimmed", usable.len()));
        &usable[..]
    };
    for &i in window {
        table[i].used = true;
    }
    let exps: Vec<f64> = window.iter().map(|&i| table[i].exponent.unwrap()).collect();
    let raw = exps.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max) - raw;
    let (value, capped) = clamp(raw, d);
    if capped {
        notes.push(format!("raw exponent {raw:.4} clamped to [0, {d}]"));
    }
    if table.iter().any(|r| r.used && r.exhaustive == Some(false)) {
        notes.push("some annuli were subsampled; sups are lower bounds".into());
    }
    Ok(DimensionEstimate {
        kind: EstimateKind::Fourier,
        value,
        ambient: d,
        scale_range: (table[*window.last().unwrap()].scale, table[window[0]].scale),
        table,
        residual: spread,
        capped,
        notes,
    })
}

/// Annulus range for a mollified configuration: `1 ..= floor(log2(1/r))`.
pub fn mollified_range(cfg: &WeightedConfiguration) -> RangeInclusive<u32> {
    1..=(1.0 / cfg.radius()).log2().floor().max(1.0) as u32
}
