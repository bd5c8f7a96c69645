use std::collections::HashSet;

use super::EnumerationOptions;

/// Consecutive frequencies `start + t e_last` for `t < len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub start: Vec<i64>,
    pub len: usize,
}

pub(crate) struct Plan {
    pub runs: Vec<Run>,
    pub exhaustive: bool,
}

const RUN: usize = 256;

fn isqrt(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as u128;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

fn ceil_sqrt(n: u128) -> u128 {
    let r = isqrt(n);
    if r * r == n {
        r
    } else {
        r + 1
    }
}

fn push_interval(runs: &mut Vec<Run>, head: &[i64], lo: i64, hi: i64) {
    let mut s = lo;
    while s <= hi {
        let len = ((hi - s + 1) as usize).min(RUN);
        let mut start = head.to_vec();
        start.push(s);
        runs.push(Run { start, len });
        s += len as i64;
    }
}

/// One representative of each `±ξ` pair with `4^j ≤ |ξ|^2 ≤ cap_sq`.
pub(crate) fn plan_annulus(d: usize, j: u32, cap_sq: u128, opts: &EnumerationOptions) -> Plan {
    let lo_sq = 1u128 << (2 * j);
    let outer = 1u128 << (j + 1);
    let limit = if d == 1 { opts.exhaustive_radius_1d } else { opts.exhaustive_radius };
    if outer <= limit as u128 || cap_sq < lo_sq {
        return Plan {
            runs: exhaustive_runs(d, lo_sq, cap_sq),
            exhaustive: true,
        };
    }
    if d == 1 {
        sampled_line(lo_sq, cap_sq, opts.samples)
    } else {
        sampled_lattice(d, lo_sq, cap_sq, opts.samples)
    }
}

fn exhaustive_runs(d: usize, lo_sq: u128, cap_sq: u128) -> Vec<Run> {
    let mut runs = Vec::new();
    if cap_sq < lo_sq {
        return runs;
    }
    let mut head = Vec::with_capacity(d);
    prefixes(d - 1, &mut head, 0, false, cap_sq, &mut |head, p2, positive| {
        let t_hi = isqrt(cap_sq - p2) as i64;
        let t_lo = if p2 >= lo_sq { 0 } else { ceil_sqrt(lo_sq - p2) as i64 };
        if t_lo > t_hi {
            return;
        }
        if !positive {
            // zero prefix: only ξ_last > 0
            push_interval(&mut runs, head, t_lo.max(1), t_hi);
        } else if t_lo == 0 {
            push_interval(&mut runs, head, -t_hi, t_hi);
        } else {
            push_interval(&mut runs, head, -t_hi, -t_lo);
            push_interval(&mut runs, head, t_lo, t_hi);
        }
    });
    runs
}

/// Visits prefixes in `Z^k` that are zero or have a positive first nonzero
/// entry, with `|p|^2 ≤ cap_sq`.
fn prefixes(
    k: usize,
    head: &mut Vec<i64>,
    p2: u128,
    positive: bool,
    cap_sq: u128,
    visit: &mut dyn FnMut(&[i64], u128, bool),
) {
    if head.len() == k {
        visit(head, p2, positive);
        return;
    }
    let room = isqrt(cap_sq - p2) as i64;
    let lo = if positive { -room } else { 0 };
    for e in lo..=room {
        let e2 = (e as i128 * e as i128) as u128;
        head.push(e);
        prefixes(k, head, p2 + e2, positive || e > 0, cap_sq, visit);
        head.pop();
    }
}

/// Golden-ratio sequence over blocks of `RUN` consecutive integers.
fn sampled_line(lo_sq: u128, cap_sq: u128, samples: usize) -> Plan {
    let lo = isqrt(lo_sq - 1) as i64 + 1;
    let hi = isqrt(cap_sq) as i64;
    let width = (hi - lo + 1) as u64;
    let blocks = width.div_ceil(RUN as u64);
    let want = (samples.div_ceil(RUN) as u64).max(1);
    if want >= blocks {
        let mut runs = Vec::new();
        push_interval(&mut runs, &[], lo, hi);
        return Plan { runs, exhaustive: true };
    }
    let alpha = (5f64.sqrt() - 1.0) / 2.0;
    let mut chosen = HashSet::new();
    let mut m = 0u64;
    while (chosen.len() as u64) < want {
        let u = (0.5 + m as f64 * alpha).fract();
        chosen.insert(((u * blocks as f64) as u64).min(blocks - 1));
        m += 1;
    }
    let mut chosen: Vec<u64> = chosen.into_iter().collect();
    chosen.sort_unstable();
    let runs = chosen
        .into_iter()
        .map(|b| {
            let s = lo + (b * RUN as u64) as i64;
            Run {
                start: vec![s],
                len: ((hi - s + 1) as usize).min(RUN),
            }
        })
        .collect();
    Plan { runs, exhaustive: false }
}

/// Additive recurrence with the generalized golden ratio in `d` dims,
/// rejected to the annulus half-shell.
fn sampled_lattice(d: usize, lo_sq: u128, cap_sq: u128, samples: usize) -> Plan {
    let mut phi: f64 = 2.0;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (d as f64 + 1.0));
    }
    let alpha: Vec<f64> = (1..=d).map(|i| phi.powi(-(i as i32)).fract()).collect();
    let r = isqrt(cap_sq) as i64;
    let span = (2 * r + 1) as f64;
    let mut seen = HashSet::new();
    let mut runs = Vec::with_capacity(samples);
    let attempts = samples as u64 * 64;
    for m in 0..attempts {
        if runs.len() >= samples {
            break;
        }
        let xi: Vec<i64> = alpha
            .iter()
            .map(|&a| ((0.5 + m as f64 * a).fract() * span) as i64 - r)
            .collect();
        let n2: u128 = xi.iter().map(|&k| (k as i128 * k as i128) as u128).sum();
        if n2 < lo_sq || n2 > cap_sq {
            continue;
        }
        if xi.iter().find(|&&k| k != 0).is_some_and(|&k| k < 0) {
            continue;
        }
        if seen.insert(xi.clone()) {
            runs.push(Run { start: xi, len: 1 });
        }
    }
    Plan { runs, exhaustive: false }
}
