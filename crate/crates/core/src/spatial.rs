//! Uniform bucket grid over `T^d` for box queries with wrap-around.

const MAX_CELLS: usize = 1 << 22;

/// Points bucketed by cell in compressed (CSR) form.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    dim: usize,
    cells_per_axis: usize,
    starts: Vec<u32>,
    members: Vec<u32>,
}

impl SpatialGrid {
    /// Buckets the points `subset` (indices into `coords`) with roughly one
    /// point per cell of their bounding box.
    pub fn build(coords: &[f64], dim: usize, subset: &[usize]) -> Self {
        let n = subset.len().max(1);
        let mut vol = 1.0;
        for a in 0..dim {
            let (lo, hi) = subset.iter().fold((1.0f64, 0.0f64), |(lo, hi), &k| {
                let c = coords[k * dim + a];
                (lo.min(c), hi.max(c))
            });
            vol *= (hi - lo).max(1.0 / n as f64);
        }
        let cap = (MAX_CELLS as f64).powf(1.0 / dim as f64).floor();
        let per_axis =
            ((n as f64 / vol.min(1.0)).powf(1.0 / dim as f64).ceil()).clamp(1.0, cap) as usize;
        let total = per_axis.pow(dim as u32);
        let mut counts = vec![0u32; total + 1];
        let cell_of = |k: usize| -> usize {
            let x = &coords[k * dim..(k + 1) * dim];
            x.iter().fold(0usize, |acc, &c| {
                acc * per_axis + ((c * per_axis as f64) as usize).min(per_axis - 1)
            })
        };
        let ids: Vec<usize> = subset.iter().map(|&k| cell_of(k)).collect();
        for &c in &ids {
            counts[c + 1] += 1;
        }
        for i in 0..total {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut members = vec![0u32; subset.len()];
        for (&k, &c) in subset.iter().zip(&ids) {
            members[fill[c] as usize] = k as u32;
            fill[c] += 1;
        }
        SpatialGrid {
            dim,
            cells_per_axis: per_axis,
            starts: counts,
            members,
        }
    }

    /// Pushes every bucketed index whose cell meets the box `[lo, hi]`
    /// (unwrapped, `hi - lo` per axis at most 1). Callers filter exactly.
    pub fn query_box(&self, lo: &[f64], hi: &[f64], out: &mut Vec<usize>) {
        let g = self.cells_per_axis as i64;
        let mut first = [0i64; 8];
        let mut count = [0i64; 8];
        assert!(self.dim <= 8, "spatial grid supports at most 8 axes");
        for a in 0..self.dim {
            let s = floor_i64(lo[a] * g as f64);
            let e = floor_i64(hi[a] * g as f64);
            first[a] = s;
            count[a] = (e - s + 1).clamp(1, g);
        }
        let mut offset = [0i64; 8];
        loop {
            let mut cell = 0usize;
            for a in 0..self.dim {
                let mut i = first[a] + offset[a];
                if !(0..g).contains(&i) {
                    i = i.rem_euclid(g);
                }
                cell = cell * self.cells_per_axis + i as usize;
            }
            let (s, e) = (self.starts[cell] as usize, self.starts[cell + 1] as usize);
            out.extend(self.members[s..e].iter().map(|&k| k as usize));
            let mut a = self.dim;
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

    /// Candidates within `radius` of `center` (bounding-box superset).
    pub fn query_ball(&self, center: &[f64], radius: f64, out: &mut Vec<usize>) {
        let mut lo = [0f64; 8];
        let mut hi = [0f64; 8];
        let r = radius.min(0.5);
        for a in 0..self.dim {
            lo[a] = center[a] - r;
            hi[a] = center[a] + r;
        }
        self.query_box(&lo[..self.dim], &hi[..self.dim], out);
    }
}

fn floor_i64(x: f64) -> i64 {
    let t = x as i64;
    if (t as f64) > x {
        t - 1
    } else {
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::dist_sq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn ball_queries_are_supersets() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for dim in 1..=3 {
            let n = 300;
            let coords: Vec<f64> = (0..n * dim).map(|_| rng.gen()).collect();
            let all: Vec<usize> = (0..n).collect();
            let grid = SpatialGrid::build(&coords, dim, &all);
            for _ in 0..200 {
                let c: Vec<f64> = (0..dim).map(|_| rng.gen()).collect();
                let r = rng.gen::<f64>() * 0.3;
                let mut got = Vec::new();
                grid.query_ball(&c, r, &mut got);
                got.sort_unstable();
                got.dedup();
                for k in 0..n {
                    let inside = dist_sq(&coords[k * dim..(k + 1) * dim], &c) <= r * r;
                    if inside {
                        assert!(got.binary_search(&k).is_ok(), "dim {dim} missed {k}");
                    }
                }
            }
        }
    }
}
