use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, Grid, RealVolume};

/// One co-registered reference/prediction pair of a subject.
#[derive(Debug, Clone)]
pub struct MapPair {
    pub subject_id: String,
    pub reference: BinaryMask,
    pub prediction: BinaryMask,
}

/// Which voxels count towards the false-positive denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FpDenominator {
    /// Pairs whose reference is negative at the voxel.
    #[default]
    ReferenceNegative,
    AllPairs,
}

/// Unit counted in numerators and denominators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Accumulation {
    #[default]
    PerPair,
    /// A subject counts once; an event counts if any of its pairs has it.
    PerSubject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MapOptions {
    pub fp_denominator: FpDenominator,
    pub accumulation: Accumulation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateMap {
    pub grid: Grid,
    pub numerator: Vec<u32>,
    pub denominator: Vec<u32>,
    /// `numerator / denominator`, 0 where the denominator is 0.
    pub rate: Vec<f64>,
}

impl RateMap {
    fn from_counts(grid: Grid, numerator: Vec<u32>, denominator: Vec<u32>) -> Self {
        let rate = numerator
            .iter()
            .zip(&denominator)
            .map(|(&n, &d)| if d == 0 { 0.0 } else { n as f64 / d as f64 })
            .collect();
        Self {
            grid,
            numerator,
            denominator,
            rate,
        }
    }

    pub fn rate_volume(&self) -> RealVolume {
        let data = self.rate.iter().map(|&r| r as f32).collect();
        RealVolume::new(self.grid, data).expect("rate map matches its grid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnFpMaps {
    pub false_negative: RateMap,
    pub false_positive: RateMap,
    /// Number of distinct subjects with a reference lesion at each voxel.
    pub lesion_count: Vec<u32>,
}

impl FnFpMaps {
    pub fn lesion_count_volume(&self) -> RealVolume {
        let grid = self.false_negative.grid;
        RealVolume::new(grid, self.lesion_count.iter().map(|&c| c as f32).collect())
            .expect("matching grid")
    }
}

#[derive(Clone)]
struct Counts {
    fn_num: Vec<u32>,
    fn_den: Vec<u32>,
    fp_num: Vec<u32>,
    fp_den: Vec<u32>,
}

impl Counts {
    fn zeros(n: usize) -> Self {
        Self {
            fn_num: vec![0; n],
            fn_den: vec![0; n],
            fp_num: vec![0; n],
            fp_den: vec![0; n],
        }
    }

    fn merge(mut self, other: Counts) -> Self {
        for (a, b) in [
            (&mut self.fn_num, &other.fn_num),
            (&mut self.fn_den, &other.fn_den),
            (&mut self.fp_num, &other.fp_num),
            (&mut self.fp_den, &other.fp_den),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self
    }

    /// Adds one unit (a pair, or a subject's pairs OR-ed together).
    fn add(&mut self, pairs: &[&MapPair], fp_denominator: FpDenominator) {
        for i in 0..self.fn_num.len() {
            let reference = pairs.iter().any(|p| p.reference.data()[i]);
            let missed = pairs
                .iter()
                .any(|p| p.reference.data()[i] && !p.prediction.data()[i]);
            let false_pos = pairs
                .iter()
                .any(|p| !p.reference.data()[i] && p.prediction.data()[i]);
            if reference {
                self.fn_den[i] += 1;
            }
            if missed {
                self.fn_num[i] += 1;
            }
            if false_pos {
                self.fp_num[i] += 1;
            }
            let fp_counted = match fp_denominator {
                FpDenominator::ReferenceNegative => pairs.iter().any(|p| !p.reference.data()[i]),
                FpDenominator::AllPairs => true,
            };
            if fp_counted {
                self.fp_den[i] += 1;
            }
        }
    }
}

/// Voxel-wise false-negative and false-positive rates over a set of pairs
/// sharing one grid.
pub fn fn_fp_maps(pairs: &[MapPair], options: MapOptions) -> Result<FnFpMaps> {
    let first = pairs
        .first()
        .ok_or_else(|| Error::Arity("rate maps need at least one pair".into()))?;
    let grid = *first.reference.grid();
    for p in pairs {
        grid.ensure_same(p.reference.grid())?;
        grid.ensure_same(p.prediction.grid())?;
    }
    let n = grid.len();

    let mut by_subject: Vec<(&str, Vec<&MapPair>)> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for p in pairs {
        let k = *index.entry(&p.subject_id).or_insert_with(|| {
            by_subject.push((&p.subject_id, Vec::new()));
            by_subject.len() - 1
        });
        by_subject[k].1.push(p);
    }

    let units: Vec<Vec<&MapPair>> = match options.accumulation {
        Accumulation::PerPair => pairs.iter().map(|p| vec![p]).collect(),
        Accumulation::PerSubject => by_subject.iter().map(|(_, v)| v.clone()).collect(),
    };
    let counts = units
        .par_iter()
        .fold(
            || Counts::zeros(n),
            |mut acc, unit| {
                acc.add(unit, options.fp_denominator);
                acc
            },
        )
        .reduce(|| Counts::zeros(n), Counts::merge);

    let mut lesion_count = vec![0u32; n];
    for (_, subject_pairs) in &by_subject {
        for (i, c) in lesion_count.iter_mut().enumerate() {
            if subject_pairs.iter().any(|p| p.reference.data()[i]) {
                *c += 1;
            }
        }
    }

    Ok(FnFpMaps {
        false_negative: RateMap::from_counts(grid, counts.fn_num, counts.fn_den),
        false_positive: RateMap::from_counts(grid, counts.fp_num, counts.fp_den),
        lesion_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new([3, 1, 1], [1.0; 3]).unwrap()
    }

    fn pair(subject: &str, r: [bool; 3], p: [bool; 3]) -> MapPair {
        MapPair {
            subject_id: subject.into(),
            reference: BinaryMask::new(grid(), r.to_vec()).unwrap(),
            prediction: BinaryMask::new(grid(), p.to_vec()).unwrap(),
        }
    }

    #[test]
    fn missed_reference_is_full_fn_rate() {
        let m = fn_fp_maps(
            &[pair("a", [true, true, false], [false; 3])],
            MapOptions::default(),
        )
        .unwrap();
        assert_eq!(m.false_negative.rate, vec![1.0, 1.0, 0.0]);
        assert_eq!(m.false_positive.rate, vec![0.0; 3]);
        assert_eq!(m.lesion_count, vec![1, 1, 0]);
    }

    #[test]
    fn half_missed_voxel() {
        let pairs = [
            pair("a", [true, false, false], [true, false, true]),
            pair("b", [true, false, false], [false; 3]),
        ];
        let m = fn_fp_maps(&pairs, MapOptions::default()).unwrap();
        assert_eq!(m.false_negative.rate[0], 0.5);
        assert_eq!(m.false_positive.rate, vec![0.0, 0.0, 0.5]);
        let all = MapOptions {
            fp_denominator: FpDenominator::AllPairs,
            ..Default::default()
        };
        assert_eq!(
            fn_fp_maps(&pairs, all).unwrap().false_positive.denominator,
            vec![2, 2, 2]
        );
    }

    #[test]
    fn subject_dedup() {
        let pairs = [
            pair("a", [true, false, false], [false; 3]),
            pair("a", [true, false, false], [true, false, false]),
        ];
        let per_pair = fn_fp_maps(&pairs, MapOptions::default()).unwrap();
        assert_eq!(per_pair.false_negative.denominator[0], 2);
        assert_eq!(per_pair.lesion_count[0], 1);
        let per_subject = fn_fp_maps(
            &pairs,
            MapOptions {
                accumulation: Accumulation::PerSubject,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(per_subject.false_negative.numerator[0], 1);
        assert_eq!(per_subject.false_negative.denominator[0], 1);
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        assert!(matches!(
            fn_fp_maps(&[], MapOptions::default()),
            Err(Error::Arity(_))
        ));
        let mut p = pair("a", [false; 3], [false; 3]);
        p.prediction = BinaryMask::empty(Grid::new([3, 1, 1], [2.0, 1.0, 1.0]).unwrap());
        assert!(matches!(
            fn_fp_maps(&[p], MapOptions::default()),
            Err(Error::Shape(_))
        ));
    }
}
