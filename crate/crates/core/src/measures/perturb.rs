use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{dft, field_difference, mollifier_density, same_grid, GridMeasure, SeminormValue};
use crate::error::{Error, Result};
use crate::sampler::WeightedConfiguration;

/// Seminorms of one `γ` recorded by [`perturb`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormPair {
    pub gamma: f64,
    /// `‖f‖_{M(γ)}`
    pub f: SeminormValue,
    /// `‖ρ - μ₀‖_{M(γ)}`
    pub rho_minus_mu0: SeminormValue,
    /// `‖μ - μ₀‖_{M(γ)}`
    pub mu_minus_mu0: SeminormValue,
    /// `‖ρ‖_{M(γ)}`
    pub rho: SeminormValue,
    /// `‖ρ - μ₀‖ / (‖μ₀‖_{M(3d)} ‖f‖)`
    pub k_ratio: f64,
    /// `‖μ - μ₀‖ ≤ |1/ρ(T^d) - 1| ‖ρ‖ + ‖ρ - μ₀‖`, up to rounding.
    pub triangle_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbDiagnostics {
    pub rho_mass: f64,
    pub radius: f64,
    pub xi_max: i64,
    /// `‖μ₀‖_{M(3d)}`
    pub mu0_smooth_norm: f64,
    /// Most negative value of `f` cleared after the spectral convolution.
    pub clipped: f64,
    pub seminorms: Vec<SeminormPair>,
}

/// `η = (1/N) Σ a_k δ_{x_k}` deposited cellwise, `f = η * φ_r`,
/// `ρ = f μ₀`, `μ = ρ / ρ(T^d)`. Seminorms use the widest in-band box.
pub fn perturb(
    mu0: &GridMeasure,
    config: &WeightedConfiguration,
    gammas: &[f64],
) -> Result<(GridMeasure, PerturbDiagnostics)> {
    let (d, g) = (mu0.dim(), mu0.cells_per_axis());
    if config.is_empty() {
        return Err(Error::input("perturb needs a nonempty configuration"));
    }
    if config.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: config.dim(),
        });
    }
    if (mu0.mass() - 1.0).abs() > 1e-9 {
        return Err(Error::input(format!("μ₀ has mass {}, expected 1", mu0.mass())));
    }
    let r = config.radius();
    let phi = mollifier_density(d, r, g)?;
    let cells = mu0.density().len();

    let mut eta = vec![0.0; cells];
    let n = config.len() as f64;
    for k in 0..config.len() {
        eta[mu0.cell_of(config.point(k))] += config.weights()[k] / n * cells as f64;
    }
    let f = convolve(d, g, &eta, phi.density());
    let clipped = f.iter().copied().fold(0.0f64, f64::min);
    let f: Vec<f64> = f.into_iter().map(|v| v.max(0.0)).collect();

    let rho_vals: Vec<f64> = f.iter().zip(mu0.density()).map(|(a, b)| a * b).collect();
    let rho = GridMeasure::new(d, g, rho_vals)?;
    let rho_mass = rho.mass();
    if rho_mass < 1e-6 {
        return Err(Error::DegenerateOverlap { mass: rho_mass });
    }
    let mu = rho.normalized()?;
    let f = GridMeasure::new(d, g, f)?;

    let xi_max = mu0.band();
    let mu0_smooth_norm = super::seminorm(mu0, 3.0 * d as f64, xi_max)?.value;
    let rho_diff = field_difference(&rho, mu0)?;
    let mu_diff = field_difference(&mu, mu0)?;
    let mut seminorms = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let sf = super::seminorm(&f, gamma, xi_max)?;
        let s_rho_diff = rho_diff.seminorm(gamma, xi_max)?;
        let s_mu_diff = mu_diff.seminorm(gamma, xi_max)?;
        let s_rho = super::seminorm(&rho, gamma, xi_max)?;
        let rhs = (1.0 / rho_mass - 1.0).abs() * s_rho.value + s_rho_diff.value;
        let triangle_holds = s_mu_diff.value <= rhs * (1.0 + 1e-9) + 1e-12;
        let denom = mu0_smooth_norm * sf.value;
        seminorms.push(SeminormPair {
            gamma,
            k_ratio: if denom > 0.0 { s_rho_diff.value / denom } else { f64::INFINITY },
            f: sf,
            rho_minus_mu0: s_rho_diff,
            mu_minus_mu0: s_mu_diff,
            rho: s_rho,
            triangle_holds,
        });
    }
    Ok((
        mu,
        PerturbDiagnostics {
            rho_mass,
            radius: r,
            xi_max,
            mu0_smooth_norm,
            clipped,
            seminorms,
        },
    ))
}

/// Circular convolution `(a * b)(x) = ∫ a(y) b(x - y) dy` of cell arrays.
fn convolve(d: usize, g: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let cells = a.len();
    let lift = |v: &[f64]| v.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>();
    let fa = dft(d, g, lift(a), false);
    let fb = dft(d, g, lift(b), false);
    let prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    let scale = 1.0 / (cells as f64 * cells as f64);
    dft(d, g, prod, true).into_iter().map(|z| z.re * scale).collect()
}

/// Hausdorff distance between the cell-center sets where each density
/// exceeds `threshold` times its cell mean.
pub fn support_distance(mu: &GridMeasure, mu0: &GridMeasure, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::input("support threshold must be positive"));
    }
    same_grid(mu, mu0)?;
    let a = support_mask(mu, threshold)?;
    let b = support_mask(mu0, threshold)?;
    let (d, g) = (mu.dim(), mu.cells_per_axis());
    let da = squared_distance_transform(d, g, &a);
    let db = squared_distance_transform(d, g, &b);
    let directed = |mask: &[bool], dt: &[f64]| {
        mask.iter()
            .zip(dt)
            .filter(|(m, _)| **m)
            .map(|(_, &v)| v)
            .fold(0.0f64, f64::max)
    };
    let h = directed(&a, &db).max(directed(&b, &da));
    Ok(h.sqrt() / g as f64)
}

fn support_mask(mu: &GridMeasure, threshold: f64) -> Result<Vec<bool>> {
    let level = threshold * mu.mass();
    let mask: Vec<bool> = mu.density().iter().map(|&v| v > level).collect();
    if !mask.iter().any(|&m| m) {
        return Err(Error::input(format!("support is empty at threshold {threshold}")));
    }
    Ok(mask)
}

/// Squared Euclidean distance (in cells) to the nearest marked cell on the
/// periodic grid, separable lower-envelope transform per axis.
fn squared_distance_transform(d: usize, g: usize, mask: &[bool]) -> Vec<f64> {
    const FAR: f64 = 1e30;
    let mut vals: Vec<f64> = mask.iter().map(|&m| if m { 0.0 } else { FAR }).collect();
    let mut line = vec![0.0; 3 * g];
    let mut out = vec![0.0; 3 * g];
    for axis in 0..d {
        let stride = g.pow((d - 1 - axis) as u32);
        let block = stride * g;
        for start in (0..vals.len()).step_by(block) {
            for off in 0..stride {
                for rep in 0..3 {
                    for i in 0..g {
                        line[rep * g + i] = vals[start + off + i * stride];
                    }
                }
                lower_envelope(&line, &mut out);
                for i in 0..g {
                    vals[start + off + i * stride] = out[g + i];
                }
            }
        }
    }
    vals
}

/// `out[q] = min_p (q - p)^2 + f[p]`.
fn lower_envelope(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    let finite: Vec<usize> = (0..n).filter(|&i| f[i] < 1e29).collect();
    if finite.is_empty() {
        out.iter_mut().for_each(|o| *o = 1e30);
        return;
    }
    v[0] = finite[0];
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for &q in &finite[1..] {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    let mut j = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[j + 1] < q as f64 {
            j += 1;
        }
        let p = v[j];
        *o = (q as f64 - p as f64).powi(2) + f[p];
    }
}
