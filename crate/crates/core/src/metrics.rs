//! Per-subject segmentation metrics: Dice, 95th-percentile Hausdorff
//! distance, volume differences (percentage and log ratio), and lesion-level
//! recall/F1 with a size-stratified recall.
//!
//! Values that cannot be computed for a subject (for example any surface
//! distance when the prediction is empty) are reported as `None` rather than
//! replaced by a sentinel; aggregation decides what to do with them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::volume::{
    connected_components, directed_surface_distances, surface_voxels, BinaryMask,
    ComponentLabeling, Connectivity, LabelVolume,
};

/// How reference label 2 (other pathology) enters the evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IgnorePolicy {
    /// Remove label-2 voxels from both reference and prediction.
    #[default]
    Exclude,
    /// Treat label 2 as background in both volumes.
    Background,
}

/// How the two directed distance lists are combined into H95.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HausdorffMode {
    /// Larger of the two directed 95th percentiles.
    #[default]
    MaxDirected,
    /// 95th percentile of both directed lists pooled together.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalConfig {
    pub connectivity: Connectivity,
    pub ignore: IgnorePolicy,
    pub hausdorff: HausdorffMode,
}

/// All per-subject scores for one (reference, prediction) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub dsc: f64,
    pub h95_mm: Option<f64>,
    pub avd_pct: Option<f64>,
    /// Natural-log volume ratio magnitude.
    pub lavd: Option<f64>,
    pub recall: f64,
    pub f1: f64,
    pub recall_small: Option<f64>,
    pub recall_large: Option<f64>,
    pub ref_volume_ml: f64,
    pub pred_volume_ml: f64,
    pub n_ref_lesions: usize,
    pub n_pred_lesions: usize,
}

impl MetricVector {
    /// True when any metric is missing for this subject.
    pub fn has_missing(&self) -> bool {
        self.h95_mm.is_none()
            || self.avd_pct.is_none()
            || self.lavd.is_none()
            || self.recall_small.is_none()
            || self.recall_large.is_none()
    }
}

/// Which lesions found a partner in the other mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LesionMatch {
    /// Indexed by reference component id - 1.
    pub ref_detected: Vec<bool>,
    /// Indexed by predicted component id - 1.
    pub pred_matched: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LesionScores {
    pub recall: f64,
    /// `None` when the prediction has no lesions.
    pub precision: Option<f64>,
    pub f1: f64,
    pub matches: LesionMatch,
}

pub fn dice(reference: &BinaryMask, prediction: &BinaryMask) -> Result<f64> {
    let overlap = reference.intersection_count(prediction)?;
    let total = reference.count() + prediction.count();
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * overlap as f64 / total as f64)
}

/// 95th-percentile symmetric surface distance in mm, `None` if either mask
/// is empty.
pub fn hausdorff95(reference: &BinaryMask, prediction: &BinaryMask) -> Result<Option<f64>> {
    hausdorff95_with(reference, prediction, HausdorffMode::MaxDirected)
}

pub fn hausdorff95_with(
    reference: &BinaryMask,
    prediction: &BinaryMask,
    mode: HausdorffMode,
) -> Result<Option<f64>> {
    reference.grid().ensure_same(prediction.grid())?;
    if reference.is_empty() || prediction.is_empty() {
        return Ok(None);
    }
    let spacing = reference.spacing();
    let ref_surface = surface_voxels(reference);
    let pred_surface = surface_voxels(prediction);
    let forward = directed_surface_distances(&ref_surface, &pred_surface, spacing)?;
    let backward = directed_surface_distances(&pred_surface, &ref_surface, spacing)?;
    let h = match mode {
        HausdorffMode::MaxDirected => {
            let f = stats::quantile(&forward, 0.95).expect("non-empty surface");
            let b = stats::quantile(&backward, 0.95).expect("non-empty surface");
            f.max(b)
        }
        HausdorffMode::Pooled => {
            let mut all = forward;
            all.extend(backward);
            stats::quantile(&all, 0.95).expect("non-empty surface")
        }
    };
    Ok(Some(h))
}

/// Absolute percentage volume difference.
pub fn avd(ref_volume: f64, pred_volume: f64) -> Result<f64> {
    if ref_volume.is_nan() || ref_volume <= 0.0 {
        return Err(Error::UndefinedMetric(format!(
            "AVD needs a positive reference volume, got {ref_volume}"
        )));
    }
    Ok((pred_volume - ref_volume).abs() / ref_volume * 100.0)
}

/// `|ln(pred / ref)|`; `None` for an empty prediction.
pub fn lavd(ref_volume: f64, pred_volume: f64) -> Result<Option<f64>> {
    if ref_volume.is_nan() || ref_volume <= 0.0 {
        return Err(Error::UndefinedMetric(format!(
            "lAVD needs a positive reference volume, got {ref_volume}"
        )));
    }
    if pred_volume <= 0.0 {
        return Ok(None);
    }
    Ok(Some((pred_volume / ref_volume).ln().abs()))
}

/// Marks each component that shares at least one voxel with the other mask.
pub fn match_lesions(
    ref_cc: &ComponentLabeling,
    pred_cc: &ComponentLabeling,
) -> Result<LesionMatch> {
    ref_cc.labels.grid().ensure_same(pred_cc.labels.grid())?;
    let mut ref_detected = vec![false; ref_cc.count];
    let mut pred_matched = vec![false; pred_cc.count];
    for (&r, &p) in ref_cc.labels.data().iter().zip(pred_cc.labels.data()) {
        if r != 0 && p != 0 {
            ref_detected[r as usize - 1] = true;
            pred_matched[p as usize - 1] = true;
        }
    }
    Ok(LesionMatch {
        ref_detected,
        pred_matched,
    })
}

fn scores_from_match(matches: LesionMatch) -> LesionScores {
    let n_ref = matches.ref_detected.len();
    let n_pred = matches.pred_matched.len();
    let tp_ref = matches.ref_detected.iter().filter(|&&d| d).count();
    let tp_pred = matches.pred_matched.iter().filter(|&&m| m).count();

    let precision = (n_pred > 0).then(|| tp_pred as f64 / n_pred as f64);
    let (recall, f1) = if n_ref == 0 {
        if n_pred == 0 {
            (1.0, 1.0)
        } else {
            (0.0, 0.0)
        }
    } else {
        let recall = tp_ref as f64 / n_ref as f64;
        let f1 = match precision {
            Some(p) if p + recall > 0.0 => 2.0 * p * recall / (p + recall),
            _ => 0.0,
        };
        (recall, f1)
    };
    LesionScores {
        recall,
        precision,
        f1,
        matches,
    }
}

/// Lesion-level recall, precision and F1. A lesion counts as detected when
/// any of its voxels overlaps the other mask.
pub fn lesion_recall_f1(
    reference: &BinaryMask,
    prediction: &BinaryMask,
    connectivity: Connectivity,
) -> Result<LesionScores> {
    reference.grid().ensure_same(prediction.grid())?;
    let ref_cc = connected_components(reference, connectivity);
    let pred_cc = connected_components(prediction, connectivity);
    Ok(scores_from_match(match_lesions(&ref_cc, &pred_cc)?))
}

fn split_recall(ref_sizes: &[usize], ref_detected: &[bool]) -> (Option<f64>, Option<f64>) {
    let sizes: Vec<f64> = ref_sizes.iter().map(|&s| s as f64).collect();
    let Some(median) = stats::median(&sizes) else {
        return (None, None);
    };
    let (mut small, mut small_hit, mut large, mut large_hit) = (0usize, 0usize, 0usize, 0usize);
    for (&size, &hit) in sizes.iter().zip(ref_detected) {
        if size <= median {
            small += 1;
            small_hit += hit as usize;
        } else {
            large += 1;
            large_hit += hit as usize;
        }
    }
    let ratio = |hit: usize, n: usize| (n > 0).then(|| hit as f64 / n as f64);
    (ratio(small_hit, small), ratio(large_hit, large))
}

/// Recall over reference lesions no larger than the subject's median lesion
/// size, and over the larger ones.
pub fn size_split_recall(
    reference: &BinaryMask,
    prediction: &BinaryMask,
    connectivity: Connectivity,
) -> Result<(Option<f64>, Option<f64>)> {
    reference.grid().ensure_same(prediction.grid())?;
    if reference.is_empty() {
        return Err(Error::UndefinedMetric(
            "size-split recall needs a non-empty reference".into(),
        ));
    }
    let ref_cc = connected_components(reference, connectivity);
    let pred_cc = connected_components(prediction, connectivity);
    let m = match_lesions(&ref_cc, &pred_cc)?;
    Ok(split_recall(&ref_cc.sizes, &m.ref_detected))
}

/// Relative change of `small` with respect to `large`, as a fraction.
pub fn relative_difference(small: f64, large: f64) -> f64 {
    (small - large) / large
}

/// Extracts the evaluation masks from a challenge reference and a prediction.
pub fn evaluation_masks(
    reference: &LabelVolume,
    prediction: &LabelVolume,
    policy: IgnorePolicy,
) -> Result<(BinaryMask, BinaryMask)> {
    reference.grid().ensure_same(prediction.grid())?;
    let (ref_wmh, ignore) = crate::volume::binarize_challenge(reference)?;
    let grid = *prediction.grid();
    let mut pred = Vec::with_capacity(grid.len());
    for (i, &v) in prediction.data().iter().enumerate() {
        match v {
            0 | 2 => pred.push(false),
            1 => pred.push(true),
            other => {
                let [x, y, z] = grid.coord(i);
                return Err(Error::InvalidLabel {
                    value: other as i64,
                    x,
                    y,
                    z,
                });
            }
        }
    }
    let pred = BinaryMask::new(grid, pred)?;
    let pred = match policy {
        IgnorePolicy::Exclude => pred.and_not(&ignore)?,
        IgnorePolicy::Background => pred,
    };
    Ok((ref_wmh, pred))
}

/// Full metric vector for one subject.
pub fn evaluate_pair(
    reference: &LabelVolume,
    prediction: &LabelVolume,
    config: &EvalConfig,
) -> Result<MetricVector> {
    let (ref_mask, pred_mask) = evaluation_masks(reference, prediction, config.ignore)?;
    evaluate_masks(&ref_mask, &pred_mask, config)
}

/// Metric vector for already-binarized masks.
pub fn evaluate_masks(
    ref_mask: &BinaryMask,
    pred_mask: &BinaryMask,
    config: &EvalConfig,
) -> Result<MetricVector> {
    ref_mask.grid().ensure_same(pred_mask.grid())?;
    let ref_ml = ref_mask.volume_ml();
    let pred_ml = pred_mask.volume_ml();

    let dsc = dice(ref_mask, pred_mask)?;
    let h95_mm = hausdorff95_with(ref_mask, pred_mask, config.hausdorff)?;
    let (avd_pct, lavd_value) = if ref_mask.is_empty() {
        (None, None)
    } else {
        (Some(avd(ref_ml, pred_ml)?), lavd(ref_ml, pred_ml)?)
    };

    let ref_cc = connected_components(ref_mask, config.connectivity);
    let pred_cc = connected_components(pred_mask, config.connectivity);
    let matches = match_lesions(&ref_cc, &pred_cc)?;
    let (recall_small, recall_large) = split_recall(&ref_cc.sizes, &matches.ref_detected);
    let lesions = scores_from_match(matches);

    Ok(MetricVector {
        dsc,
        h95_mm,
        avd_pct,
        lavd: lavd_value,
        recall: lesions.recall,
        f1: lesions.f1,
        recall_small,
        recall_large,
        ref_volume_ml: ref_ml,
        pred_volume_ml: pred_ml,
        n_ref_lesions: ref_cc.count,
        n_pred_lesions: pred_cc.count,
    })
}
