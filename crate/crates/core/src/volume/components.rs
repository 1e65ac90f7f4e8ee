use serde::{Deserialize, Serialize};

use super::{BinaryMask, LabelVolume};
use crate::error::{Error, Result};

/// Voxel adjacency used for connected components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    /// Face neighbors only.
    Six,
    /// Faces and edges.
    Eighteen,
    /// Full 3x3x3 neighborhood.
    #[default]
    TwentySix,
}

impl Connectivity {
    pub fn as_u8(self) -> u8 {
        match self {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }

    fn admits(self, offset: [isize; 3]) -> bool {
        let manhattan: isize = offset.iter().map(|v| v.abs()).sum();
        match self {
            Connectivity::Six => manhattan == 1,
            Connectivity::Eighteen => (1..=2).contains(&manhattan),
            Connectivity::TwentySix => manhattan >= 1,
        }
    }

    /// All neighbor offsets admitted by this connectivity.
    pub fn offsets(self) -> Vec<[isize; 3]> {
        let mut out = Vec::with_capacity(26);
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let o = [dx, dy, dz];
                    if self.admits(o) {
                        out.push(o);
                    }
                }
            }
        }
        out
    }

    /// Neighbors already visited in an x-fastest raster scan.
    fn backward_offsets(self) -> Vec<[isize; 3]> {
        self.offsets()
            .into_iter()
            .filter(|&[dx, dy, dz]| dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0))))
            .collect()
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            other => Err(Error::Parameter(format!(
                "connectivity must be 6, 18 or 26, got {other}"
            ))),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        c.as_u8()
    }
}

impl std::str::FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: u8 = s.trim().parse().map_err(|_| {
            Error::Parameter(format!("connectivity must be 6, 18 or 26, got `{s}`"))
        })?;
        Connectivity::try_from(v)
    }
}

impl std::fmt::Display for Connectivity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Connected components of a mask. Component ids run `1..=count` in the
/// order their first voxel is met in an x-fastest scan; 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentLabeling {
    pub labels: LabelVolume,
    pub count: usize,
    /// `sizes[k]` is the voxel count of component `k + 1`.
    pub sizes: Vec<usize>,
    pub connectivity: Connectivity,
}

impl ComponentLabeling {
    /// Component id at a linear voxel index (0 = background).
    #[inline]
    pub fn id_at(&self, index: usize) -> u32 {
        self.labels.data()[index]
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        Self { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        lo
    }
}

/// Two-pass union-find labeling.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> ComponentLabeling {
    let grid = *mask.grid();
    let [nx, ny, nz] = grid.dims;
    let data = mask.data();
    let backward = connectivity.backward_offsets();

    const NONE: u32 = u32::MAX;
    let mut provisional = vec![NONE; grid.len()];
    let mut sets = DisjointSet::new();

    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = grid.index(x, y, z);
                if !data[i] {
                    continue;
                }
                let mut label = NONE;
                for &o in &backward {
                    let Some([qx, qy, qz]) = grid.offset([x, y, z], o) else {
                        continue;
                    };
                    let q = provisional[grid.index(qx, qy, qz)];
                    if q == NONE {
                        continue;
                    }
                    label = if label == NONE {
                        sets.find(q)
                    } else {
                        sets.union(label, q)
                    };
                }
                provisional[i] = if label == NONE { sets.make() } else { label };
            }
        }
    }

    let mut final_id = vec![0u32; sets.parent.len()];
    let mut sizes = Vec::new();
    let mut out = vec![0u32; grid.len()];
    for (i, &p) in provisional.iter().enumerate() {
        if p == NONE {
            continue;
        }
        let root = sets.find(p) as usize;
        if final_id[root] == 0 {
            sizes.push(0);
            final_id[root] = sizes.len() as u32;
        }
        let id = final_id[root];
        sizes[id as usize - 1] += 1;
        out[i] = id;
    }

    ComponentLabeling {
        labels: LabelVolume::new(grid, out).expect("labeling buffer matches grid"),
        count: sizes.len(),
        sizes,
        connectivity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;

    fn grid(dims: [usize; 3]) -> Grid {
        Grid::new(dims, [1.0; 3]).unwrap()
    }

    #[test]
    fn offsets_counts() {
        assert_eq!(Connectivity::Six.offsets().len(), 6);
        assert_eq!(Connectivity::Eighteen.offsets().len(), 18);
        assert_eq!(Connectivity::TwentySix.offsets().len(), 26);
        assert_eq!(Connectivity::TwentySix.backward_offsets().len(), 13);
    }

    #[test]
    fn diagonal_voxels_depend_on_connectivity() {
        let g = grid([2, 2, 2]);
        let m = BinaryMask::from_coords(g, &[[0, 0, 0], [1, 1, 1]]);
        assert_eq!(connected_components(&m, Connectivity::TwentySix).count, 1);
        assert_eq!(connected_components(&m, Connectivity::Eighteen).count, 2);
        assert_eq!(connected_components(&m, Connectivity::Six).count, 2);
    }

    #[test]
    fn full_mask_is_one_component() {
        let g = grid([4, 3, 5]);
        let cc = connected_components(&BinaryMask::full(g), Connectivity::Six);
        assert_eq!(cc.count, 1);
        assert_eq!(cc.sizes, vec![60]);
    }

    #[test]
    fn empty_mask_has_no_components() {
        let cc = connected_components(&BinaryMask::empty(grid([3, 3, 3])), Connectivity::TwentySix);
        assert_eq!(cc.count, 0);
        assert!(cc.sizes.is_empty());
    }

    #[test]
    fn ids_follow_first_encounter() {
        // A U shape whose arms merge only on the last row: the left arm is
        // met first, so the merged component must be id 1.
        let g = grid([5, 3, 1]);
        let m = BinaryMask::from_coords(
            g,
            &[
                [0, 0, 0],
                [4, 0, 0],
                [2, 1, 0],
                [0, 1, 0],
                [4, 1, 0],
                [0, 2, 0],
                [1, 2, 0],
                [2, 2, 0],
                [3, 2, 0],
                [4, 2, 0],
            ],
        );
        let cc = connected_components(&m, Connectivity::Six);
        assert_eq!(cc.count, 1);
        let cc = connected_components(
            &BinaryMask::from_coords(g, &[[4, 0, 0], [0, 2, 0]]),
            Connectivity::Six,
        );
        assert_eq!(cc.labels.get(4, 0, 0), 1);
        assert_eq!(cc.labels.get(0, 2, 0), 2);
    }

    #[test]
    fn parses_connectivity() {
        assert_eq!(
            "18".parse::<Connectivity>().unwrap(),
            Connectivity::Eighteen
        );
        assert!("8".parse::<Connectivity>().is_err());
    }
}
