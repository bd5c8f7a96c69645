//! Registered demo patterns: 3-term progressions, isosceles triangles on the
//! parabola, and bounded-coefficient linear equations.

use std::sync::Arc;

use super::{periodize, Ratio, SurfacePattern, TranslationalPattern};
use crate::error::{Error, Result};
use crate::torus::{wrap, TorusCube, TorusPoint};

/// Cubes `R_1..R_n` with common sidelength `1/(2|a|m)`, centered on the
/// diagonal and evenly spaced, provided neighbours are at least `10/(|a|m)`
/// apart.
pub fn translational_layout(n: usize, dim: usize, a: f64, period: u32) -> Result<Vec<TorusCube>> {
    let am = a.abs() * period as f64;
    let side = 1.0 / (2.0 * am);
    let gap = 1.0 / n as f64 - side;
    // the gap is measured per axis; on the diagonal the distance is sqrt(d) times that
    if gap * (dim as f64).sqrt() < 10.0 / am * (1.0 - 1e-12) {
        return Err(Error::input(format!(
            "period {period} too small for {n} cubes with |a| = {a}: need at least {}",
            min_layout_period(n, dim, a)
        )));
    }
    (0..n)
        .map(|i| {
            let c = (i as f64 + 0.5) / n as f64;
            TorusCube::new(TorusPoint::new(vec![c; dim])?, side)
        })
        .collect()
}

/// Smallest period for which [`translational_layout`] succeeds.
pub fn min_layout_period(n: usize, dim: usize, a: f64) -> u32 {
    // gap*sqrt(d) >= 10/(am)  <=>  am >= n (10/sqrt(d) + 1/2)
    let need = n as f64 * (10.0 / (dim as f64).sqrt() + 0.5) / a.abs();
    let mut m = need.ceil().max(1.0) as u32;
    while translational_layout_fits(n, dim, a, m - 1) && m > 1 {
        m -= 1;
    }
    while !translational_layout_fits(n, dim, a, m) {
        m += 1;
    }
    m
}

fn translational_layout_fits(n: usize, dim: usize, a: f64, period: u32) -> bool {
    if period == 0 {
        return false;
    }
    let am = a.abs() * period as f64;
    let gap = 1.0 / n as f64 - 1.0 / (2.0 * am);
    gap * (dim as f64).sqrt() >= 10.0 / am * (1.0 - 1e-12)
}

/// `x_3 - 2 x_2 ∈ {-x_1}` on the circle, periodized with the smallest period
/// admitting the standard cube layout (16), and windowed on that layout.
pub fn ap3_translational() -> Result<TranslationalPattern> {
    let m = min_layout_period(3, 1, 2.0);
    let raw = TranslationalPattern::new(
        3,
        1,
        Ratio::integer(2),
        m,
        Arc::new(|head: &[f64]| vec![wrap(-head[0])]),
        1.0,
        2.0,
    )?;
    periodize(&raw).with_window(translational_layout(3, 1, 2.0, m)?)
}

/// The same relation as a graph `x_3 = 2 x_2 - x_1` over the given cubes.
pub fn ap3_surface(cubes: Vec<TorusCube>) -> Result<SurfacePattern> {
    SurfacePattern::new(
        3,
        1,
        cubes,
        Arc::new(|x: &[f64]| vec![wrap(2.0 * x[1] - x[0])]),
        5f64.sqrt(),
    )
}

pub fn parabola(t: f64) -> Vec<f64> {
    vec![t, t * t]
}

/// The isosceles-triangle surface on the parabola `t -> (t, t^2)`.
#[derive(Debug, Clone)]
pub struct IsoscelesSetup {
    pub pattern: SurfacePattern,
    /// Bound for `|γ'|`, the curvature and the second-order Taylor error on [0, 1].
    pub c: f64,
    /// Working interval is `[0, epsilon]`.
    pub epsilon: f64,
}

/// Slot order is `(apex t_2, t_3, t_1)`: the surface solves for `t_1`, the
/// reflection of `t_3` through the apex along the curve. The cubes sit inside
/// `[0, epsilon]` in the order `R_2 < R_1 < R_3`.
pub fn isosceles_parabola() -> Result<IsoscelesSetup> {
    let c = 5f64.sqrt();
    let epsilon = 1.0 / (2.0 * c.powi(3));
    let s = epsilon / 26.0;
    let cube = |center: f64| TorusCube::new(TorusPoint::new(vec![center])?, s);
    let cubes = vec![cube(13.0 * s)?, cube(s)?, cube(25.0 * s)?];
    let f = Arc::new(|x: &[f64]| vec![reflect_on_parabola(x[0], x[1])]);
    let pattern = SurfacePattern::new(3, 1, cubes, f, 2.5)?;
    Ok(IsoscelesSetup {
        pattern,
        c,
        epsilon,
    })
}

/// The `t` on the far side of `apex` from `other` with
/// `|γ(t) - γ(apex)| = |γ(apex) - γ(other)|`, by bisection.
pub fn reflect_on_parabola(apex: f64, other: f64) -> f64 {
    let sq = |u: f64, v: f64| (u - v).powi(2) + (u * u - v * v).powi(2);
    let target = sq(apex, other);
    if target == 0.0 {
        return apex;
    }
    let dir = if other < apex { 1.0 } else { -1.0 };
    let mut lo = 0.0;
    let mut hi = 2.0 * (apex - other).abs();
    while sq(apex + dir * hi, apex) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sq(apex + dir * mid, apex) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    apex + dir * 0.5 * (lo + hi)
}

/// `m_1 x_1 + ... + m_n x_n = s` on `T^d` with integer coefficients.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinearEquation {
    pub coeffs: Vec<i64>,
    pub s: Vec<f64>,
}

impl LinearEquation {
    pub fn residual(&self, xs: &[&[f64]]) -> Vec<f64> {
        let d = self.s.len();
        (0..d)
            .map(|j| {
                let v: f64 = self
                    .coeffs
                    .iter()
                    .zip(xs)
                    .map(|(&m, x)| m as f64 * x[j])
                    .sum();
                wrap(v - self.s[j])
            })
            .collect()
    }
}

/// One translational pattern per coefficient vector in `[-bound, bound]^n`
/// (nonzero) and per `s ∈ S`. Zero coefficients drop their variable, so a
/// vector with `q` nonzero entries gives a `q`-ary pattern over those
/// variables: the last two carry `x_q - a x_{q-1}` with `a = -m_{q-1}/m_q`,
/// the rest move into the targets `{(s - Σ m_i x_i + j)/m_q}`. A single
/// nonzero entry gives the one-point relation `m x ∈ {s}`. Vectors that are
/// negatives of each other are kept once when `S = -S`.
pub fn linear_equation_patterns(
    n: usize,
    dim: usize,
    bound: i64,
    set_s: &[Vec<f64>],
) -> Result<Vec<(LinearEquation, TranslationalPattern)>> {
    if bound < 1 {
        return Err(Error::input("coefficient bound must be at least 1"));
    }
    if set_s.is_empty() || set_s.iter().any(|s| s.len() != dim) {
        return Err(Error::input("S must be a nonempty list of points of T^d"));
    }
    let symmetric = set_s.iter().all(|s| {
        let neg: Vec<f64> = s.iter().map(|&v| wrap(-v)).collect();
        set_s.iter().any(|t| crate::torus::dist_sq(t, &neg) < 1e-24)
    });
    let width = (2 * bound + 1) as usize;
    let mut out = Vec::new();
    for code in 0..width.pow(n as u32) {
        let mut rem = code;
        let coeffs: Vec<i64> = (0..n)
            .map(|_| {
                let v = (rem % width) as i64 - bound;
                rem /= width;
                v
            })
            .collect();
        let Some(&first) = coeffs.iter().find(|&&m| m != 0) else {
            continue;
        };
        if symmetric && first < 0 {
            continue;
        }
        for s in set_s {
            let eq = LinearEquation {
                coeffs: coeffs.clone(),
                s: s.clone(),
            };
            let pattern = equation_pattern(&eq, dim)?;
            out.push((eq, pattern));
        }
    }
    Ok(out)
}

fn equation_pattern(eq: &LinearEquation, dim: usize) -> Result<TranslationalPattern> {
    let nz: Vec<i64> = eq.coeffs.iter().copied().filter(|&m| m != 0).collect();
    let q = nz.len();
    let last = nz[q - 1];
    let s = eq.s.clone();
    let head: Vec<i64> = if q >= 2 {
        nz[..q - 2].to_vec()
    } else {
        Vec::new()
    };
    let a = if q >= 2 {
        Ratio::new(-nz[q - 2], last)?
    } else {
        Ratio::integer(1)
    };
    // Lipschitz constant of the target map in the head variables
    let lip = head
        .iter()
        .map(|&m| (m as f64 / last as f64).powi(2))
        .sum::<f64>()
        .sqrt();
    let span = last.unsigned_abs() as usize;
    let targets = Arc::new(move |x: &[f64]| {
        let mut base = s.clone();
        for (i, &m) in head.iter().enumerate() {
            for j in 0..dim {
                base[j] -= m as f64 * x[i * dim + j];
            }
        }
        let mut out = Vec::with_capacity(span.pow(dim as u32) * dim);
        let mut shift = vec![0usize; dim];
        loop {
            for j in 0..dim {
                out.push(wrap((base[j] + shift[j] as f64) / last as f64));
            }
            let mut j = dim;
            loop {
                if j == 0 {
                    return out;
                }
                j -= 1;
                shift[j] += 1;
                if shift[j] < span {
                    break;
                }
                shift[j] = 0;
            }
        }
    });
    let alpha = (dim * (q - 1)) as f64;
    TranslationalPattern::new(q, dim, a, 1, targets, lip, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::isosceles_functional;

    #[test]
    fn ap3_layout_needs_period_sixteen() {
        assert_eq!(min_layout_period(3, 1, 2.0), 16);
        assert!(translational_layout(3, 1, 2.0, 15).is_err());
        let cubes = translational_layout(3, 1, 2.0, 16).unwrap();
        assert!((cubes[0].side - 1.0 / 64.0).abs() < 1e-15);
        crate::patterns::check_cube_layout(&cubes, 10.0).unwrap();
    }

    #[test]
    fn reflection_solves_the_functional() {
        for &(apex, other) in &[(0.02, 0.005), (0.03, 0.001), (0.01, 0.04)] {
            let t = reflect_on_parabola(apex, other);
            assert!((t - apex) * (other - apex) < 0.0);
            let f = isosceles_functional(&parabola, t, apex, other);
            assert!(f.abs() < 1e-15, "F = {f}");
        }
    }

    #[test]
    fn isosceles_cubes_fit_working_interval() {
        let setup = isosceles_parabola().unwrap();
        assert!((setup.epsilon - 1.0 / (2.0 * 5f64.powf(1.5))).abs() < 1e-15);
        for q in setup.pattern.cubes() {
            let q2 = q.scaled(2.0);
            let lo = q2.center.coords()[0] - q2.side / 2.0;
            let hi = q2.center.coords()[0] + q2.side / 2.0;
            assert!(lo >= -1e-15 && hi <= setup.epsilon + 1e-15);
        }
    }

    #[test]
    fn linear_equation_targets_solve_equation() {
        let pats = linear_equation_patterns(3, 1, 2, &[vec![0.0]]).unwrap();
        // (5^3 - 1) / 2 vectors up to sign
        assert_eq!(pats.len(), 62);
        let x = [0.137, 0.654, 0.291];
        for (eq, p) in &pats {
            let vars: Vec<f64> = eq
                .coeffs
                .iter()
                .zip(&x)
                .filter(|(m, _)| **m != 0)
                .map(|(_, &v)| v)
                .collect();
            let q = vars.len();
            let head: Vec<f64> = vars[..q.saturating_sub(2)].to_vec();
            let mut off = [0.0];
            let prev = (q >= 2).then(|| &vars[q - 2..q - 1]);
            p.offset(&vars[q - 1..], prev, &mut off);
            let hit = p
                .targets(&head)
                .iter()
                .map(|&t| crate::torus::signed_gap(t, off[0]).abs())
                .fold(f64::INFINITY, f64::min);
            let xs: Vec<&[f64]> = x.iter().map(std::slice::from_ref).collect();
            let res = eq.residual(&xs)[0];
            let res = res.min(1.0 - res);
            // the offset lands on a target exactly when the equation holds;
            // in general its distance scales with the residual
            assert!(
                hit <= res
                    / eq.coeffs
                        .iter()
                        .rev()
                        .find(|m| **m != 0)
                        .unwrap()
                        .unsigned_abs() as f64
                    + 1e-12
            );
        }
    }
}
