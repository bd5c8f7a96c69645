//! Flat torus geometry: points reduced mod 1, integer frequencies, cubes.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduce a real into `[0, 1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    if x.abs() < 4.0e15 {
        // truncation is a single instruction; floor is not on baseline x86-64
        let mut y = x - (x as i64) as f64;
        if y < 0.0 {
            y += 1.0;
        }
        return if y >= 1.0 { 0.0 } else { y };
    }
    let y = x.rem_euclid(1.0);
    // rem_euclid rounds tiny negatives up to exactly 1.0
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Shortest signed displacement from `b` to `a` on the circle, in `[-0.5, 0.5]`.
#[inline]
pub fn signed_gap(a: f64, b: f64) -> f64 {
    let d = a - b;
    d - d.round()
}

#[inline]
fn axis_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(1.0 - d)
}

/// Squared torus distance between two coordinate slices of equal length.
#[inline]
pub fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(&a, &b)| axis_gap(a, b).powi(2)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    pub fn new(coords: impl Into<Vec<f64>>) -> Result<Self> {
        let mut coords = coords.into();
        if coords.is_empty() {
            return Err(Error::input("torus point needs at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::input("torus point has a non-finite coordinate"));
        }
        coords.iter_mut().for_each(|c| *c = wrap(*c));
        Ok(TorusPoint { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Frequency(pub Vec<i64>);

impl Frequency {
    pub fn new(entries: impl Into<Vec<i64>>) -> Self {
        Frequency(entries.into())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm_sq(&self) -> i128 {
        self.0.iter().map(|&e| (e as i128) * (e as i128)).sum()
    }

    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn neg(&self) -> Frequency {
        Frequency(self.0.iter().map(|e| -e).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusCube {
    pub center: TorusPoint,
    pub side: f64,
}

impl TorusCube {
    pub fn new(center: TorusPoint, side: f64) -> Result<Self> {
        if !(side > 0.0 && side <= 1.0) {
            return Err(Error::input(format!(
                "cube sidelength {side} outside (0, 1]"
            )));
        }
        Ok(TorusCube { center, side })
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// Same center, sidelength scaled by `factor` and capped at 1.
    pub fn scaled(&self, factor: f64) -> TorusCube {
        TorusCube {
            center: self.center.clone(),
            side: (self.side * factor).min(1.0),
        }
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim() as i32)
    }

    /// Closed-cube membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        let h = 0.5 * self.side;
        x.iter()
            .zip(self.center.coords())
            .all(|(&a, &c)| axis_gap(a, c) <= h)
    }

    /// Squared torus distance from a point to the closed cube.
    pub fn dist_sq_to(&self, x: &[f64]) -> f64 {
        let h = 0.5 * self.side;
        x.iter()
            .zip(self.center.coords())
            .map(|(&a, &c)| (axis_gap(a, c) - h).max(0.0).powi(2))
            .sum()
    }

    /// Torus distance between two closed cubes.
    pub fn distance(&self, other: &TorusCube) -> f64 {
        let h = 0.5 * (self.side + other.side);
        self.center
            .coords()
            .iter()
            .zip(other.center.coords())
            .map(|(&a, &b)| (axis_gap(a, b) - h).max(0.0).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Lower corner, unwrapped: the cube is `[lo, lo + side]` per axis mod 1.
    pub fn lower(&self) -> Vec<f64> {
        self.center
            .coords()
            .iter()
            .map(|c| c - 0.5 * self.side)
            .collect()
    }
}

fn check_dims(x: usize, y: usize) -> Result<()> {
    if x != y {
        return Err(Error::DimensionMismatch {
            expected: x,
            got: y,
        });
    }
    Ok(())
}

pub fn tdist(x: &TorusPoint, y: &TorusPoint) -> Result<f64> {
    check_dims(x.dim(), y.dim())?;
    Ok(dist_sq(x.coords(), y.coords()).sqrt())
}

pub fn double_cube(q: &TorusCube) -> TorusCube {
    q.scaled(2.0)
}

fn directed(a: &[TorusPoint], b: &[TorusPoint]) -> f64 {
    a.iter()
        .map(|p| {
            b.iter()
                .map(|q| dist_sq(p.coords(), q.coords()))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
        .sqrt()
}

pub fn hausdorff_distance(a: &[TorusPoint], b: &[TorusPoint]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::input("hausdorff distance of an empty set"));
    }
    let d = a[0].dim();
    for p in a.iter().chain(b) {
        check_dims(d, p.dim())?;
    }
    Ok(directed(a, b).max(directed(b, a)))
}

/// A flat list of points in `T^d`, optionally weighted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointTable {
    pub dim: usize,
    pub coords: Vec<f64>,
    pub weights: Option<Vec<f64>>,
}

impl PointTable {
    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.coords.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }
}

pub fn write_points_csv<W: Write>(out: W, table: &PointTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..table.dim).map(|j| format!("x{j}")).collect();
    if table.weights.is_some() {
        header.push("w".into());
    }
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(table.dim + 1);
    for k in 0..table.len() {
        row.clear();
        row.extend(table.point(k).iter().map(|c| format!("{c:?}")));
        if let Some(ws) = &table.weights {
            row.push(format!("{:?}", ws[k]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_points_csv<R: Read>(input: R) -> Result<PointTable> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    let mut dim = 0;
    let mut weighted = false;
    for (i, h) in header.iter().enumerate() {
        let h = h.trim();
        if h == format!("x{i}") && !weighted {
            dim += 1;
        } else if h == "w" && i == dim && !weighted {
            weighted = true;
        } else {
            return Err(Error::input(format!("unexpected CSV column '{h}' at {i}")));
        }
    }
    if dim == 0 {
        return Err(Error::input("CSV has no coordinate columns"));
    }
    let mut table = PointTable {
        dim,
        coords: Vec::new(),
        weights: weighted.then(Vec::new),
    };
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::input("ragged CSV row"));
        }
        for j in 0..dim {
            let v: f64 = rec[j]
                .trim()
                .parse()
                .map_err(|_| Error::input(format!("bad coordinate '{}'", &rec[j])))?;
            table.coords.push(wrap(v));
        }
        if let Some(ws) = table.weights.as_mut() {
            let v: f64 = rec[dim]
                .trim()
                .parse()
                .map_err(|_| Error::input(format!("bad weight '{}'", &rec[dim])))?;
            ws.push(v);
        }
    }
    Ok(table)
}

pub fn save_points_csv(path: &Path, table: &PointTable) -> Result<()> {
    write_points_csv(std::fs::File::create(path)?, table)
}

pub fn load_points_csv(path: &Path) -> Result<PointTable> {
    read_points_csv(std::fs::File::open(path)?)
}
