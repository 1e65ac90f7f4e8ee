//! Surface extraction and exact nearest-surface distances in millimetres.
//!
//! Distances are computed with a separable squared Euclidean distance
//! transform (lower envelope of parabolas, one pass per axis) over the
//! bounding box of both point sets, with per-axis voxel spacing folded into
//! the parabola positions. The transform is exact, so results agree with an
//! all-pairs search up to floating-point summation order.

use super::{BinaryMask, Grid};
use crate::error::{Error, Result};

/// Integer voxel coordinate `[x, y, z]`.
pub type Coord = [usize; 3];

/// Switch to pairwise search when the bounding box would be this many times
/// larger than the number of point pairs.
const BOX_TO_PAIRS_RATIO: usize = 16;

/// Set voxels with at least one face neighbor that is unset or outside the
/// grid, in scan order.
pub fn surface_voxels(mask: &BinaryMask) -> Vec<Coord> {
    let grid = mask.grid();
    let data = mask.data();
    const FACES: [[isize; 3]; 6] = [
        [-1, 0, 0],
        [1, 0, 0],
        [0, -1, 0],
        [0, 1, 0],
        [0, 0, -1],
        [0, 0, 1],
    ];
    data.iter()
        .enumerate()
        .filter(|(_, &v)| v)
        .map(|(i, _)| grid.coord(i))
        .filter(|&c| {
            FACES.iter().any(|&o| match grid.offset(c, o) {
                Some([x, y, z]) => !data[grid.index(x, y, z)],
                None => true,
            })
        })
        .collect()
}

/// For each voxel of `from`, the distance in mm to the nearest voxel of `to`.
pub fn directed_surface_distances(
    from: &[Coord],
    to: &[Coord],
    spacing: [f64; 3],
) -> Result<Vec<f64>> {
    if to.is_empty() {
        return Err(Error::UndefinedDistance);
    }
    if from.is_empty() {
        return Ok(Vec::new());
    }
    if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(Error::Geometry(format!("invalid spacing {spacing:?}")));
    }

    let (lo, hi) = bounds(from.iter().chain(to.iter()));
    let box_dims = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
    let box_len = box_dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
    let pairs = from.len().saturating_mul(to.len());
    match box_len {
        Some(n) if n / BOX_TO_PAIRS_RATIO <= pairs => {
            Ok(transform_distances(from, to, spacing, lo, box_dims))
        }
        _ => Ok(pairwise_distances(from, to, spacing)),
    }
}

fn bounds<'a>(points: impl Iterator<Item = &'a Coord>) -> (Coord, Coord) {
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (lo, hi)
}

fn pairwise_distances(from: &[Coord], to: &[Coord], spacing: [f64; 3]) -> Vec<f64> {
    from.iter()
        .map(|p| {
            to.iter()
                .map(|q| squared_mm(p, q, spacing))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect()
}

#[inline]
fn squared_mm(p: &Coord, q: &Coord, spacing: [f64; 3]) -> f64 {
    (0..3)
        .map(|a| {
            let d = (p[a] as f64 - q[a] as f64) * spacing[a];
            d * d
        })
        .sum()
}

fn transform_distances(
    from: &[Coord],
    to: &[Coord],
    spacing: [f64; 3],
    origin: Coord,
    dims: [usize; 3],
) -> Vec<f64> {
    let grid = Grid { dims, spacing };
    let mut field = vec![f64::INFINITY; grid.len()];
    for p in to {
        field[grid.index(p[0] - origin[0], p[1] - origin[1], p[2] - origin[2])] = 0.0;
    }
    squared_edt(&mut field, dims, spacing);
    from.iter()
        .map(|p| field[grid.index(p[0] - origin[0], p[1] - origin[1], p[2] - origin[2])].sqrt())
        .collect()
}

/// In-place squared distance transform of `field` (0 at sites, +inf elsewhere).
pub(crate) fn squared_edt(field: &mut [f64], dims: [usize; 3], spacing: [f64; 3]) {
    let [nx, ny, nz] = dims;
    let max_len = nx.max(ny).max(nz);
    let mut scratch = EnvelopeScratch::new(max_len);
    let mut line = vec![0.0; max_len];

    // x lines are contiguous
    for start in (0..field.len()).step_by(nx) {
        line[..nx].copy_from_slice(&field[start..start + nx]);
        scratch.transform(&line[..nx], spacing[0], &mut field[start..start + nx]);
    }
    let mut out = vec![0.0; max_len];
    for z in 0..nz {
        for x in 0..nx {
            for y in 0..ny {
                line[y] = field[x + nx * (y + ny * z)];
            }
            scratch.transform(&line[..ny], spacing[1], &mut out[..ny]);
            for y in 0..ny {
                field[x + nx * (y + ny * z)] = out[y];
            }
        }
    }
    for y in 0..ny {
        for x in 0..nx {
            for z in 0..nz {
                line[z] = field[x + nx * (y + ny * z)];
            }
            scratch.transform(&line[..nz], spacing[2], &mut out[..nz]);
            for z in 0..nz {
                field[x + nx * (y + ny * z)] = out[z];
            }
        }
    }
}

struct EnvelopeScratch {
    sites: Vec<usize>,
    bounds: Vec<f64>,
}

impl EnvelopeScratch {
    fn new(n: usize) -> Self {
        Self {
            sites: vec![0; n],
            bounds: vec![0.0; n + 1],
        }
    }

    /// `out[q] = min_p (step * (q - p))^2 + f[p]` over finite `f[p]`.
    fn transform(&mut self, f: &[f64], step: f64, out: &mut [f64]) {
        let n = f.len();
        let pos = |i: usize| i as f64 * step;
        let mut k: isize = -1;
        for q in 0..n {
            if !f[q].is_finite() {
                continue;
            }
            let xq = pos(q);
            loop {
                if k < 0 {
                    k = 0;
                    self.sites[0] = q;
                    self.bounds[0] = f64::NEG_INFINITY;
                    self.bounds[1] = f64::INFINITY;
                    break;
                }
                let v = self.sites[k as usize];
                let xv = pos(v);
                let s = ((f[q] + xq * xq) - (f[v] + xv * xv)) / (2.0 * (xq - xv));
                if s <= self.bounds[k as usize] {
                    k -= 1;
                    continue;
                }
                k += 1;
                self.sites[k as usize] = q;
                self.bounds[k as usize] = s;
                self.bounds[k as usize + 1] = f64::INFINITY;
                break;
            }
        }
        if k < 0 {
            out.fill(f64::INFINITY);
            return;
        }
        let mut j = 0usize;
        for (q, o) in out.iter_mut().enumerate().take(n) {
            let xq = pos(q);
            while self.bounds[j + 1] < xq {
                j += 1;
            }
            let v = self.sites[j];
            let d = xq - pos(v);
            *o = d * d + f[v];
        }
    }
}
