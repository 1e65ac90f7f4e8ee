//! Labeled 3-D volumes and the voxel-level primitives the metrics build on.
//!
//! All volumes store their voxels in a dense buffer with x varying fastest,
//! matching the NIfTI on-disk order, so a file payload maps onto a volume
//! without any reshuffling.

mod components;
mod distance;
mod morphology;
pub mod nifti;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use components::{connected_components, ComponentLabeling, Connectivity};
pub use distance::{directed_surface_distances, surface_voxels, Coord};
pub use morphology::{dilate, erode, StructuringElement};
pub use nifti::{read_nifti, read_nifti_real, write_nifti, NiftiPayload};

/// Spacing values closer than this (in mm) are considered the same grid.
/// NIfTI stores pixdim as f32, so f64 spacings only survive a round trip to
/// about this precision.
pub const SPACING_TOLERANCE: f64 = 1e-5;

/// Voxel grid geometry: extent along each axis and voxel size in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Geometry(format!(
                "dimensions must be positive, got {dims:?}"
            )));
        }
        if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::Geometry(format!(
                "spacing must be positive and finite, got {spacing:?}"
            )));
        }
        if dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .is_none()
        {
            return Err(Error::Geometry(format!("dimensions {dims:?} overflow")));
        }
        Ok(Self { dims, spacing })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coord(&self, index: usize) -> Coord {
        let x = index % self.dims[0];
        let rest = index / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    /// Neighbor of `c` displaced by `offset`, or `None` if it leaves the grid.
    #[inline]
    pub fn offset(&self, c: Coord, offset: [isize; 3]) -> Option<Coord> {
        let mut out = [0usize; 3];
        for axis in 0..3 {
            let v = c[axis] as isize + offset[axis];
            if v < 0 || v >= self.dims[axis] as isize {
                return None;
            }
            out[axis] = v as usize;
        }
        Some(out)
    }

    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Checks that `other` describes the same grid.
    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!(
                "dimensions differ: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        let spacing_ok = self
            .spacing
            .iter()
            .zip(other.spacing.iter())
            .all(|(a, b)| (a - b).abs() <= SPACING_TOLERANCE);
        if !spacing_ok {
            return Err(Error::Shape(format!(
                "spacing differs: {:?} vs {:?}",
                self.spacing, other.spacing
            )));
        }
        Ok(())
    }
}

/// A 3-D grid of non-negative integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    grid: Grid,
    data: Vec<u32>,
}

impl LabelVolume {
    pub fn new(grid: Grid, data: Vec<u32>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Shape(format!(
                "label buffer holds {} voxels, grid {:?} needs {}",
                data.len(),
                grid.dims,
                grid.len()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            data: vec![0; grid.len()],
            grid,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.grid.spacing
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u32> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u32 {
        self.data[self.grid.index(x, y, z)]
    }

    pub fn max_label(&self) -> u32 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    /// Mask of voxels carrying exactly `label`.
    pub fn mask_of(&self, label: u32) -> BinaryMask {
        BinaryMask {
            grid: self.grid,
            data: self.data.iter().map(|&v| v == label).collect(),
        }
    }

    /// Mask of all nonzero voxels.
    pub fn nonzero(&self) -> BinaryMask {
        BinaryMask {
            grid: self.grid,
            data: self.data.iter().map(|&v| v != 0).collect(),
        }
    }
}

/// A 3-D boolean mask.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    grid: Grid,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(grid: Grid, data: Vec<bool>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Shape(format!(
                "mask buffer holds {} voxels, grid {:?} needs {}",
                data.len(),
                grid.dims,
                grid.len()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn empty(grid: Grid) -> Self {
        Self {
            data: vec![false; grid.len()],
            grid,
        }
    }

    pub fn full(grid: Grid) -> Self {
        Self {
            data: vec![true; grid.len()],
            grid,
        }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for z in 0..grid.dims[2] {
            for y in 0..grid.dims[1] {
                for x in 0..grid.dims[0] {
                    data.push(f(x, y, z));
                }
            }
        }
        Self { grid, data }
    }

    pub fn from_coords(grid: Grid, coords: &[Coord]) -> Self {
        let mut mask = Self::empty(grid);
        for c in coords {
            mask.set(c[0], c[1], c[2], true);
        }
        mask
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.grid.spacing
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.grid.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.grid.index(x, y, z);
        self.data[i] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    /// Physical volume of the true voxels in millilitres.
    pub fn volume_ml(&self) -> f64 {
        self.count() as f64 * self.grid.voxel_volume_mm3() / 1000.0
    }

    /// Coordinates of the true voxels in scan order.
    pub fn coords(&self) -> Vec<Coord> {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(|(i, _)| self.grid.coord(i))
            .collect()
    }

    pub fn intersection_count(&self, other: &BinaryMask) -> Result<usize> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .filter(|(&a, &b)| a && b)
            .count())
    }

    /// Voxels true in `self` and false in `other`.
    pub fn and_not(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn and(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a || b)
    }

    fn zip_with(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> Result<BinaryMask> {
        self.grid.ensure_same(&other.grid)?;
        Ok(BinaryMask {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn to_labels(&self) -> LabelVolume {
        LabelVolume {
            grid: self.grid,
            data: self.data.iter().map(|&v| v as u32).collect(),
        }
    }

    /// Inclusive bounding box `(min, max)` of the true voxels.
    pub fn bounding_box(&self) -> Option<(Coord, Coord)> {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for (i, _) in self.data.iter().enumerate().filter(|(_, &v)| v) {
            let c = self.grid.coord(i);
            any = true;
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        any.then_some((lo, hi))
    }
}

/// A real-valued 3-D map (probability maps, rate maps).
#[derive(Debug, Clone, PartialEq)]
pub struct RealVolume {
    grid: Grid,
    data: Vec<f32>,
}

impl RealVolume {
    pub fn new(grid: Grid, data: Vec<f32>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Shape(format!(
                "real buffer holds {} voxels, grid {:?} needs {}",
                data.len(),
                grid.dims,
                grid.len()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Splits a challenge mask into the WMH mask (label 1) and the ignore mask
/// (label 2, other pathology).
pub fn binarize_challenge(vol: &LabelVolume) -> Result<(BinaryMask, BinaryMask)> {
    let grid = *vol.grid();
    let mut wmh = Vec::with_capacity(grid.len());
    let mut ignore = Vec::with_capacity(grid.len());
    for (i, &v) in vol.data().iter().enumerate() {
        match v {
            0..=2 => {
                wmh.push(v == 1);
                ignore.push(v == 2);
            }
            _ => {
                let [x, y, z] = grid.coord(i);
                return Err(Error::InvalidLabel {
                    value: v as i64,
                    x,
                    y,
                    z,
                });
            }
        }
    }
    Ok((
        BinaryMask { grid, data: wmh },
        BinaryMask { grid, data: ignore },
    ))
}

/// Combines dilated WMH and other-pathology masks into a challenge label
/// volume. WMH wins where both are set.
pub fn merge_labels(wmh_dilated: &BinaryMask, other_dilated: &BinaryMask) -> Result<LabelVolume> {
    wmh_dilated.grid().ensure_same(other_dilated.grid())?;
    let data = wmh_dilated
        .data()
        .iter()
        .zip(other_dilated.data())
        .map(|(&w, &o)| {
            if w {
                1
            } else if o {
                2
            } else {
                0
            }
        })
        .collect();
    Ok(LabelVolume {
        grid: *wmh_dilated.grid(),
        data,
    })
}
