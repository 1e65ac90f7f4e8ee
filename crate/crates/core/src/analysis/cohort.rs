use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, quantile_sorted, sample_variance};
use crate::volume::{connected_components, BinaryMask, Connectivity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 when `n == 1`.
    pub sd: f64,
    pub sd_undefined: bool,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let m = mean(values)?;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let variance = sample_variance(values);
        Some(Self {
            n: values.len(),
            mean: m,
            sd: variance.map_or(0.0, f64::sqrt),
            sd_undefined: variance.is_none(),
            min: sorted[0],
            q1: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            q3: quantile_sorted(&sorted, 0.75),
            max: sorted[sorted.len() - 1],
        })
    }
}

/// Fixed-width bins starting at 0; the last bin covers the maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(Error::Parameter(format!(
                "bin width must be positive, got {bin_width}"
            )));
        }
        let max = values.iter().copied().fold(0.0f64, f64::max);
        let bins = ((max / bin_width).floor() as usize + 1).max(1);
        let mut counts = vec![0usize; bins];
        for &v in values {
            let b = ((v.max(0.0) / bin_width).floor() as usize).min(bins - 1);
            counts[b] += 1;
        }
        let edges = (0..=bins).map(|k| k as f64 * bin_width).collect();
        Ok(Self { edges, counts })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohortOptions {
    pub connectivity: Connectivity,
    pub volume_bin_ml: f64,
    pub count_bin: f64,
}

impl Default for CohortOptions {
    fn default() -> Self {
        Self {
            connectivity: Connectivity::default(),
            volume_bin_ml: 5.0,
            count_bin: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub volumes_ml: Vec<f64>,
    pub lesion_counts: Vec<usize>,
    pub volume: Summary,
    pub lesions: Summary,
    pub volume_histogram: Histogram,
    pub lesion_histogram: Histogram,
}

/// Volume and lesion-count distribution of a set of reference masks.
pub fn cohort_summary(references: &[BinaryMask], options: &CohortOptions) -> Result<CohortSummary> {
    if references.is_empty() {
        return Err(Error::Arity(
            "cohort summary needs at least one subject".into(),
        ));
    }
    let volumes_ml: Vec<f64> = references.iter().map(BinaryMask::volume_ml).collect();
    let lesion_counts: Vec<usize> = references
        .iter()
        .map(|m| connected_components(m, options.connectivity).count)
        .collect();
    let counts_f: Vec<f64> = lesion_counts.iter().map(|&c| c as f64).collect();
    Ok(CohortSummary {
        volume: Summary::of(&volumes_ml).expect("nonempty"),
        lesions: Summary::of(&counts_f).expect("nonempty"),
        volume_histogram: Histogram::new(&volumes_ml, options.volume_bin_ml)?,
        lesion_histogram: Histogram::new(&counts_f, options.count_bin)?,
        volumes_ml,
        lesion_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;

    #[test]
    fn single_subject_flags_sd() {
        let grid = Grid::new([10, 10, 10], [1.0; 3]).unwrap();
        let s = cohort_summary(&[BinaryMask::full(grid)], &CohortOptions::default()).unwrap();
        assert!((s.volume.mean - 1.0).abs() < 1e-12);
        assert_eq!(s.volume.sd, 0.0);
        assert!(s.volume.sd_undefined);
        assert_eq!(s.lesion_counts, vec![1]);
    }

    #[test]
    fn two_volumes() {
        let a = BinaryMask::full(Grid::new([2, 1, 1], [10.0, 10.0, 10.0]).unwrap());
        let b = BinaryMask::full(Grid::new([4, 1, 1], [10.0, 10.0, 10.0]).unwrap());
        let s = cohort_summary(&[a, b], &CohortOptions::default()).unwrap();
        assert!((s.volume.mean - 3.0).abs() < 1e-12);
        assert!((s.volume.median - 3.0).abs() < 1e-12);
        assert_eq!(s.volume_histogram.counts.iter().sum::<usize>(), 2);
    }

    #[test]
    fn histogram_edges() {
        let h = Histogram::new(&[0.0, 4.9, 5.0, 12.0], 5.0).unwrap();
        assert_eq!(h.counts, vec![2, 1, 1]);
        assert_eq!(h.edges, vec![0.0, 5.0, 10.0, 15.0]);
        assert!(Histogram::new(&[1.0], 0.0).is_err());
    }
}
