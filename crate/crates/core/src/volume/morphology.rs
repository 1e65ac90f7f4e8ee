use super::BinaryMask;
use crate::error::{Error, Result};

/// A flat structuring element: a set of voxel offsets around a centre.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    shape: [usize; 3],
    offsets: Vec<[isize; 3]>,
}

impl StructuringElement {
    pub fn new(shape: [usize; 3], offsets: Vec<[isize; 3]>) -> Result<Self> {
        if shape.iter().any(|&s| s == 0 || s % 2 == 0) {
            return Err(Error::Parameter(format!(
                "structuring element shape must be odd and positive, got {shape:?}"
            )));
        }
        if !offsets.contains(&[0, 0, 0]) {
            return Err(Error::Parameter(
                "structuring element must contain its centre".into(),
            ));
        }
        for o in &offsets {
            for axis in 0..3 {
                let half = (shape[axis] as isize - 1) / 2;
                if o[axis].abs() > half {
                    return Err(Error::Parameter(format!(
                        "offset {o:?} lies outside shape {shape:?}"
                    )));
                }
            }
        }
        Ok(Self { shape, offsets })
    }

    /// Solid box of the given odd extents.
    pub fn cuboid(shape: [usize; 3]) -> Result<Self> {
        let half = shape.map(|s| (s as isize - 1) / 2);
        let mut offsets = Vec::new();
        for dz in -half[2]..=half[2] {
            for dy in -half[1]..=half[1] {
                for dx in -half[0]..=half[0] {
                    offsets.push([dx, dy, dz]);
                }
            }
        }
        Self::new(shape, offsets)
    }

    /// The 3x3x1 in-plane kernel used to grow reference masks by one pixel.
    pub fn in_plane_3x3() -> Self {
        Self::cuboid([3, 3, 1]).expect("static kernel")
    }

    /// Centre plus its six face neighbors.
    pub fn cross6() -> Self {
        Self::new(
            [3, 3, 3],
            vec![
                [0, 0, 0],
                [-1, 0, 0],
                [1, 0, 0],
                [0, -1, 0],
                [0, 1, 0],
                [0, 0, -1],
                [0, 0, 1],
            ],
        )
        .expect("static kernel")
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn offsets(&self) -> &[[isize; 3]] {
        &self.offsets
    }
}

/// Output voxel is set iff some element offset from it lands on a set input
/// voxel. Offsets falling outside the grid are ignored.
pub fn dilate(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let grid = *mask.grid();
    let mut out = BinaryMask::empty(grid);
    for (i, _) in mask.data().iter().enumerate().filter(|(_, &v)| v) {
        let c = grid.coord(i);
        for o in se.offsets() {
            if let Some([x, y, z]) = grid.offset(c, [-o[0], -o[1], -o[2]]) {
                out.set(x, y, z, true);
            }
        }
    }
    out
}

/// Output voxel is set iff every element offset from it lands on a set input
/// voxel; voxels outside the grid count as unset.
pub fn erode(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let grid = *mask.grid();
    let data = mask.data();
    let mut out = BinaryMask::empty(grid);
    for (i, _) in data.iter().enumerate().filter(|(_, &v)| v) {
        let c = grid.coord(i);
        let keep = se.offsets().iter().all(|&o| match grid.offset(c, o) {
            Some([x, y, z]) => data[grid.index(x, y, z)],
            None => false,
        });
        if keep {
            out.set(c[0], c[1], c[2], true);
        }
    }
    out
}
