use std::sync::OnceLock;

use crate::torus::signed_gap;

/// `exp(-1/(1-u^2))` on `(-1, 1)`, zero outside.
fn raw_bump(u: f64) -> f64 {
    let q = 1.0 - u * u;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp()
    }
}

/// Trapezoid rule on `[-1, 1]`; spectrally accurate here because the
/// integrands vanish to all orders at the endpoints.
fn trapezoid(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = 2.0 / n as f64;
    (1..n).map(|i| f(-1.0 + i as f64 * h)).sum::<f64>() * h
}

fn bump_mass() -> f64 {
    static Z: OnceLock<f64> = OnceLock::new();
    *Z.get_or_init(|| trapezoid(4096, raw_bump))
}

/// Unit-mass 1-D bump supported on `[-1, 1]`.
pub fn profile(u: f64) -> f64 {
    raw_bump(u) / bump_mass()
}

/// Fourier transform of [`profile`] at `t` (real and even).
pub fn profile_hat(t: f64) -> f64 {
    let t = t.abs();
    if t > 4096.0 {
        // below 1e-40
        return 0.0;
    }
    if t <= TABLE_MAX {
        return table_lookup(t);
    }
    profile_hat_direct(t)
}

/// Quadrature value of the transform, no table.
pub fn profile_hat_direct(t: f64) -> f64 {
    let n = 256 + (16.0 * t.abs()).ceil() as usize;
    let w = 2.0 * std::f64::consts::PI * t;
    trapezoid(n, |u| raw_bump(u) * (w * u).cos()) / bump_mass()
}

fn profile_hat_slope(t: f64) -> f64 {
    let n = 256 + (16.0 * t.abs()).ceil() as usize;
    let w = 2.0 * std::f64::consts::PI;
    trapezoid(n, |u| -raw_bump(u) * w * u * (w * t * u).sin()) / bump_mass()
}

const TABLE_MAX: f64 = 64.0;
const TABLE_STEP: f64 = 1.0 / 256.0;

/// Cubic Hermite table of values and slopes on `[0, 64]`.
fn table() -> &'static [(f64, f64)] {
    static T: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    T.get_or_init(|| {
        use rayon::prelude::*;
        let n = (TABLE_MAX / TABLE_STEP) as usize + 2;
        (0..n)
            .into_par_iter()
            .map(|k| {
                let t = k as f64 * TABLE_STEP;
                (profile_hat_direct(t), profile_hat_slope(t))
            })
            .collect()
    })
}

fn table_lookup(t: f64) -> f64 {
    let tab = table();
    let x = t / TABLE_STEP;
    let k = (x as usize).min(tab.len() - 2);
    let s = x - k as f64;
    let (y0, d0) = tab[k];
    let (y1, d1) = tab[k + 1];
    let h = TABLE_STEP;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

/// Tensor-product mollifier on `T^d`: `φ(x) = Π_j √d ψ(√d x_j)`, so the
/// support sits inside the unit ball. `φ_r(x) = r^{-d} φ(x/r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mollifier {
    pub dim: usize,
}

impl Mollifier {
    pub fn new(dim: usize) -> Self {
        Mollifier { dim }
    }

    fn axis_scale(&self) -> f64 {
        (self.dim as f64).sqrt()
    }

    /// `φ_r(x)` with torus wrap-around; needs `r < 1/2`.
    pub fn density(&self, x: &[f64], r: f64) -> f64 {
        let c = self.axis_scale();
        x.iter()
            .map(|&xj| c / r * profile(c * signed_gap(xj, 0.0) / r))
            .product()
    }

    /// `φ̂_r(ξ) = Π_j ψ̂(r ξ_j / √d)`.
    pub fn hat(&self, xi: &[i64], r: f64) -> f64 {
        let c = self.axis_scale();
        xi.iter().map(|&k| profile_hat(r * k as f64 / c)).product()
    }

    /// Per-axis support half-width of `φ_r`.
    pub fn half_width(&self, r: f64) -> f64 {
        r / self.axis_scale()
    }
}
