//! Deterministic synthetic phantoms and controlled perturbations.
//!
//! Lesions are random-walk blobs kept at least one voxel apart, so under any
//! connectivity each blob is its own component. Blob `i` draws from ChaCha8
//! stream `i` of the phantom seed; label-2 regions use the streams after the
//! lesions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{
    connected_components, dilate, erode, BinaryMask, Connectivity, Coord, Grid, LabelVolume,
    StructuringElement,
};

/// Placement attempts per blob before giving up.
pub const PLACEMENT_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub n_lesions: usize,
    /// Inclusive voxel-count range of each lesion.
    pub size_range: (usize, usize),
    pub seed: u64,
    /// Number of label-2 regions as a fraction of `n_lesions` (rounded).
    pub ignore_fraction: f64,
}

impl PhantomSpec {
    fn validate(&self) -> Result<Grid> {
        let grid = Grid::new(self.dims, self.spacing)?;
        let (lo, hi) = self.size_range;
        if lo == 0 || lo > hi {
            return Err(Error::Parameter(format!(
                "invalid lesion size range {lo}..={hi}"
            )));
        }
        if !(0.0..1.0).contains(&self.ignore_fraction) {
            return Err(Error::Parameter(format!(
                "ignore fraction must be in [0, 1), got {}",
                self.ignore_fraction
            )));
        }
        Ok(grid)
    }

    pub fn n_ignore(&self) -> usize {
        (self.ignore_fraction * self.n_lesions as f64).round() as usize
    }
}

fn stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

const FACES: [[isize; 3]; 6] = [
    [1, 0, 0],
    [-1, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [0, 0, 1],
    [0, 0, -1],
];

/// Grows a blob of `size` voxels avoiding `blocked`; `None` if it gets stuck.
fn random_walk(
    grid: &Grid,
    blocked: &[bool],
    size: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<usize>> {
    let start = rng.random_range(0..grid.len());
    if blocked[start] {
        return None;
    }
    let mut blob = vec![start];
    let mut steps = 0;
    while blob.len() < size {
        steps += 1;
        if steps > size * 64 {
            return None;
        }
        let from = grid.coord(blob[rng.random_range(0..blob.len())]);
        let face = FACES[rng.random_range(0..6)];
        let Some([x, y, z]) = grid.offset(from, face) else {
            continue;
        };
        let i = grid.index(x, y, z);
        if !blocked[i] && !blob.contains(&i) {
            blob.push(i);
        }
    }
    Some(blob)
}

/// Marks `blob` and its 26-neighbourhood.
fn block(grid: &Grid, blocked: &mut [bool], blob: &[usize]) {
    for &i in blob {
        let c = grid.coord(i);
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some([x, y, z]) = grid.offset(c, [dx, dy, dz]) {
                        blocked[grid.index(x, y, z)] = true;
                    }
                }
            }
        }
    }
}

fn place(
    grid: &Grid,
    blocked: &mut [bool],
    size_range: (usize, usize),
    seed: u64,
    stream_index: usize,
) -> Result<Vec<usize>> {
    let mut rng = stream(seed, stream_index);
    for _ in 0..PLACEMENT_ATTEMPTS {
        let size = rng.random_range(size_range.0..=size_range.1);
        if let Some(blob) = random_walk(grid, blocked, size, &mut rng) {
            block(grid, blocked, &blob);
            return Ok(blob);
        }
    }
    Err(Error::Capacity {
        index: stream_index,
        attempts: PLACEMENT_ATTEMPTS,
    })
}

/// Label volume with `n_lesions` label-1 blobs and the requested label-2
/// regions.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<LabelVolume> {
    let grid = spec.validate()?;
    let mut data = vec![0u32; grid.len()];
    let mut blocked = vec![false; grid.len()];
    for k in 0..spec.n_lesions + spec.n_ignore() {
        let label = if k < spec.n_lesions { 1 } else { 2 };
        for i in place(&grid, &mut blocked, spec.size_range, spec.seed, k)? {
            data[i] = label;
        }
    }
    LabelVolume::new(grid, data)
}

/// One edit applied by [`perturb_mask`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbOp {
    /// `k` dilations with the 6-neighbour cross.
    Dilate(usize),
    /// `k` erosions with the 6-neighbour cross.
    Erode(usize),
    /// Removes the given 26-connected component ids (1-based, scan order).
    DropComponents(Vec<u32>),
    /// Adds blobs kept one voxel away from the current mask.
    AddBlobs {
        count: usize,
        size_range: (usize, usize),
        seed: u64,
    },
    /// Shifts by whole voxels; voxels leaving the grid are lost.
    Translate([isize; 3]),
}

/// Applies `ops` in order.
pub fn perturb_mask(reference: &BinaryMask, ops: &[PerturbOp]) -> Result<BinaryMask> {
    let grid = *reference.grid();
    let cross = StructuringElement::cross6();
    let mut mask = reference.clone();
    for op in ops {
        mask = match op {
            PerturbOp::Dilate(k) => (0..*k).fold(mask, |m, _| dilate(&m, &cross)),
            PerturbOp::Erode(k) => (0..*k).fold(mask, |m, _| erode(&m, &cross)),
            PerturbOp::DropComponents(ids) => {
                let cc = connected_components(&mask, Connectivity::TwentySix);
                let data = (0..grid.len()).map(|i| {
                    let id = cc.id_at(i);
                    id != 0 && !ids.contains(&id)
                });
                BinaryMask::new(grid, data.collect())?
            }
            PerturbOp::AddBlobs {
                count,
                size_range,
                seed,
            } => {
                let (lo, hi) = *size_range;
                if lo == 0 || lo > hi {
                    return Err(Error::Parameter(format!(
                        "invalid blob size range {lo}..={hi}"
                    )));
                }
                let mut blocked = vec![false; grid.len()];
                let existing: Vec<usize> = (0..grid.len()).filter(|&i| mask.data()[i]).collect();
                block(&grid, &mut blocked, &existing);
                let mut data = mask.data().to_vec();
                for k in 0..*count {
                    for i in place(&grid, &mut blocked, *size_range, *seed, k)? {
                        data[i] = true;
                    }
                }
                BinaryMask::new(grid, data)?
            }
            PerturbOp::Translate(shift) => {
                let coords: Vec<Coord> = mask
                    .coords()
                    .into_iter()
                    .filter_map(|c| grid.offset(c, *shift))
                    .collect();
                BinaryMask::from_coords(grid, &coords)
            }
        };
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::dice;

    fn spec(n: usize) -> PhantomSpec {
        PhantomSpec {
            dims: [24, 24, 12],
            spacing: [1.0, 1.0, 3.0],
            n_lesions: n,
            size_range: (3, 30),
            seed: 42,
            ignore_fraction: 0.0,
        }
    }

    #[test]
    fn empty_phantom() {
        assert_eq!(generate_phantom(&spec(0)).unwrap().max_label(), 0);
    }

    #[test]
    fn deterministic_and_disjoint() {
        let s = spec(7);
        let a = generate_phantom(&s).unwrap();
        assert_eq!(a, generate_phantom(&s).unwrap());
        assert_eq!(
            connected_components(&a.mask_of(1), Connectivity::TwentySix).count,
            7
        );
    }

    #[test]
    fn ignore_regions() {
        let s = PhantomSpec {
            ignore_fraction: 0.5,
            n_lesions: 4,
            ..spec(0)
        };
        let v = generate_phantom(&s).unwrap();
        assert_eq!(
            connected_components(&v.mask_of(2), Connectivity::TwentySix).count,
            2
        );
        assert_eq!(
            connected_components(&v.nonzero(), Connectivity::TwentySix).count,
            6
        );
    }

    #[test]
    fn over_capacity_errors() {
        let s = PhantomSpec {
            dims: [3, 3, 3],
            size_range: (5, 5),
            ..spec(3)
        };
        assert!(matches!(generate_phantom(&s), Err(Error::Capacity { .. })));
    }

    #[test]
    fn perturbations() {
        let r = generate_phantom(&spec(2)).unwrap().mask_of(1);
        assert_eq!(dice(&r, &perturb_mask(&r, &[]).unwrap()).unwrap(), 1.0);
        let dropped = perturb_mask(&r, &[PerturbOp::DropComponents(vec![1])]).unwrap();
        assert_eq!(
            connected_components(&dropped, Connectivity::TwentySix).count,
            1
        );
        let grown = perturb_mask(&r, &[PerturbOp::Dilate(1)]).unwrap();
        assert!(grown.count() > r.count());
        let extra = perturb_mask(
            &r,
            &[PerturbOp::AddBlobs {
                count: 2,
                size_range: (2, 4),
                seed: 1,
            }],
        )
        .unwrap();
        assert_eq!(
            connected_components(&extra, Connectivity::TwentySix).count,
            4
        );
    }

    #[test]
    fn translate_single_voxel() {
        let grid = Grid::new([4, 4, 4], [1.0; 3]).unwrap();
        let m = BinaryMask::from_coords(grid, &[[1, 1, 1]]);
        let t = perturb_mask(&m, &[PerturbOp::Translate([1, 0, 0])]).unwrap();
        assert_eq!(t.coords(), vec![[2, 1, 1]]);
        let gone = perturb_mask(&m, &[PerturbOp::Translate([5, 0, 0])]).unwrap();
        assert!(gone.is_empty());
    }
}
