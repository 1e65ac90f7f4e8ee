//! Brute-force reference implementations and shared fixtures.
//!
//! Nothing here calls into the code paths it is used to check: components
//! are found by flood fill over explicitly enumerated neighbours, distances
//! by all-pairs search, and lesion matching through a full overlap matrix.

#![allow(dead_code)]

use std::collections::VecDeque;

use segeval::ranking::{ResultRecord, Scores};
use segeval::volume::BinaryMask;

pub type Coord = [usize; 3];

pub fn neighbours(connectivity: u8) -> Vec<[isize; 3]> {
    let mut out = Vec::new();
    for dz in -1isize..=1 {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let manhattan = dx.abs() + dy.abs() + dz.abs();
                let keep = match connectivity {
                    6 => manhattan == 1,
                    18 => manhattan == 1 || manhattan == 2,
                    26 => manhattan >= 1,
                    _ => panic!("connectivity {connectivity}"),
                };
                if keep {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

fn step(c: Coord, d: [isize; 3], dims: [usize; 3]) -> Option<Coord> {
    let mut out = [0usize; 3];
    for k in 0..3 {
        let v = c[k] as isize + d[k];
        if v < 0 || v >= dims[k] as isize {
            return None;
        }
        out[k] = v as usize;
    }
    Some(out)
}

fn flat(c: Coord, dims: [usize; 3]) -> usize {
    c[0] + dims[0] * (c[1] + dims[1] * c[2])
}

fn unflat(i: usize, dims: [usize; 3]) -> Coord {
    [
        i % dims[0],
        (i / dims[0]) % dims[1],
        i / (dims[0] * dims[1]),
    ]
}

/// Labels (0 = background, ids from 1 in scan order of each component's
/// first voxel) and sizes, by breadth-first flood fill.
pub fn flood_components(
    data: &[bool],
    dims: [usize; 3],
    connectivity: u8,
) -> (Vec<u32>, Vec<usize>) {
    let offsets = neighbours(connectivity);
    let mut labels = vec![0u32; data.len()];
    let mut sizes = Vec::new();
    for seed in 0..data.len() {
        if !data[seed] || labels[seed] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        let mut queue = VecDeque::from([seed]);
        labels[seed] = id;
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            for &d in &offsets {
                if let Some(n) = step(unflat(i, dims), d, dims) {
                    let j = flat(n, dims);
                    if data[j] && labels[j] == 0 {
                        labels[j] = id;
                        queue.push_back(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Foreground voxels with a 6-neighbour that is background or outside.
pub fn surface(data: &[bool], dims: [usize; 3]) -> Vec<Coord> {
    (0..data.len())
        .filter(|&i| data[i])
        .map(|i| unflat(i, dims))
        .filter(|&c| {
            neighbours(6)
                .into_iter()
                .any(|d| step(c, d, dims).is_none_or(|n| !data[flat(n, dims)]))
        })
        .collect()
}

pub fn all_pairs_directed(from: &[Coord], to: &[Coord], spacing: [f64; 3]) -> Vec<f64> {
    from.iter()
        .map(|a| {
            to.iter()
                .map(|b| {
                    (0..3)
                        .map(|k| ((a[k] as f64 - b[k] as f64) * spacing[k]).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Linear-interpolation percentile, `p` in [0, 100].
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = p / 100.0 * (v.len() - 1) as f64;
    let below = pos.floor() as usize;
    let above = (below + 1).min(v.len() - 1);
    v[below] * (1.0 - (pos - below as f64)) + v[above] * (pos - below as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMetrics {
    pub dsc: f64,
    pub h95_max_directed: Option<f64>,
    pub h95_pooled: Option<f64>,
    pub avd_pct: Option<f64>,
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

/// Reference scores for two binary masks on one grid.
pub fn oracle_metrics(
    reference: &[bool],
    prediction: &[bool],
    dims: [usize; 3],
    spacing: [f64; 3],
    connectivity: u8,
) -> OracleMetrics {
    let voxel_ml = spacing.iter().product::<f64>() / 1000.0;
    let n_ref = reference.iter().filter(|&&v| v).count();
    let n_pred = prediction.iter().filter(|&&v| v).count();
    let both = reference
        .iter()
        .zip(prediction)
        .filter(|(a, b)| **a && **b)
        .count();
    let dsc = if n_ref + n_pred == 0 {
        1.0
    } else {
        2.0 * both as f64 / (n_ref + n_pred) as f64
    };

    let (h95_max_directed, h95_pooled) = if n_ref == 0 || n_pred == 0 {
        (None, None)
    } else {
        let rs = surface(reference, dims);
        let ps = surface(prediction, dims);
        let fwd = all_pairs_directed(&rs, &ps, spacing);
        let bwd = all_pairs_directed(&ps, &rs, spacing);
        let pooled: Vec<f64> = fwd.iter().chain(&bwd).copied().collect();
        (
            Some(percentile(&fwd, 95.0).max(percentile(&bwd, 95.0))),
            Some(percentile(&pooled, 95.0)),
        )
    };

    let ref_ml = n_ref as f64 * voxel_ml;
    let pred_ml = n_pred as f64 * voxel_ml;
    let avd_pct = (n_ref > 0).then(|| (pred_ml - ref_ml).abs() / ref_ml * 100.0);
    let lavd = (n_ref > 0 && n_pred > 0).then(|| (pred_ml / ref_ml).ln().abs());

    let (ref_labels, ref_sizes) = flood_components(reference, dims, connectivity);
    let (pred_labels, pred_sizes) = flood_components(prediction, dims, connectivity);
    let mut overlap = vec![vec![0usize; pred_sizes.len() + 1]; ref_sizes.len() + 1];
    for (&r, &p) in ref_labels.iter().zip(&pred_labels) {
        overlap[r as usize][p as usize] += 1;
    }
    let detected: Vec<bool> = (1..=ref_sizes.len())
        .map(|r| (1..=pred_sizes.len()).any(|p| overlap[r][p] > 0))
        .collect();
    let matched = (1..=pred_sizes.len())
        .filter(|&p| (1..=ref_sizes.len()).any(|r| overlap[r][p] > 0))
        .count();
    let hits = detected.iter().filter(|&&d| d).count();

    let (recall, f1) = match (ref_sizes.len(), pred_sizes.len()) {
        (0, 0) => (1.0, 1.0),
        (0, _) => (0.0, 0.0),
        (n, 0) => (hits as f64 / n as f64, 0.0),
        (n, m) => {
            let r = hits as f64 / n as f64;
            let p = matched as f64 / m as f64;
            (
                r,
                if r + p > 0.0 {
                    2.0 * r * p / (r + p)
                } else {
                    0.0
                },
            )
        }
    };

    let (recall_small, recall_large) = if ref_sizes.is_empty() {
        (None, None)
    } else {
        let sizes_f: Vec<f64> = ref_sizes.iter().map(|&s| s as f64).collect();
        let median = percentile(&sizes_f, 50.0);
        let group = |small: bool| {
            let idx: Vec<usize> = (0..ref_sizes.len())
                .filter(|&k| (sizes_f[k] <= median) == small)
                .collect();
            (!idx.is_empty())
                .then(|| idx.iter().filter(|&&k| detected[k]).count() as f64 / idx.len() as f64)
        };
        (group(true), group(false))
    };

    OracleMetrics {
        dsc,
        h95_max_directed,
        h95_pooled,
        avd_pct,
        lavd,
        recall,
        f1,
        recall_small,
        recall_large,
        ref_volume_ml: ref_ml,
        pred_volume_ml: pred_ml,
        n_ref_lesions: ref_sizes.len(),
        n_pred_lesions: pred_sizes.len(),
    }
}

pub fn mask_bits(mask: &BinaryMask) -> Vec<bool> {
    mask.data().to_vec()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn close_opt(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => close(a, b, tol),
        _ => false,
    }
}

/// Published per-method means: DSC, H95 (mm), lAVD, recall, F1, AVD (%).
pub const CHALLENGE_MEANS: [(&str, f64, f64, f64, f64, f64, f64); 20] = [
    ("sysu_media", 0.80, 6.30, 0.193, 0.84, 0.76, 21.88),
    ("cian", 0.78, 6.82, 0.193, 0.83, 0.70, 21.72),
    ("nlp_logix", 0.77, 7.16, 0.219, 0.73, 0.78, 18.37),
    ("nic-vicorob", 0.77, 8.28, 0.248, 0.75, 0.71, 28.54),
    ("k2", 0.77, 9.79, 0.246, 0.59, 0.70, 19.08),
    ("misp", 0.72, 14.88, 0.258, 0.63, 0.68, 21.36),
    ("lrde", 0.73, 14.54, 0.309, 0.63, 0.67, 21.71),
    ("nih_cidi", 0.68, 12.82, 0.281, 0.59, 0.54, 196.38),
    ("ipmi-bern", 0.69, 9.72, 0.225, 0.44, 0.57, 19.92),
    ("scan", 0.63, 14.34, 0.277, 0.55, 0.51, 34.67),
    ("achilles", 0.63, 11.82, 0.276, 0.45, 0.52, 24.41),
    ("skkumedneuro", 0.58, 19.02, 0.384, 0.47, 0.51, 58.54),
    ("tignet", 0.59, 21.58, 0.533, 0.46, 0.45, 86.22),
    ("tig", 0.60, 17.86, 0.400, 0.38, 0.42, 34.34),
    ("knight", 0.70, 17.03, 0.352, 0.25, 0.35, 39.99),
    ("upc_dlmi", 0.53, 27.01, 0.612, 0.57, 0.42, 208.49),
    ("nist", 0.53, 15.91, 0.581, 0.37, 0.25, 109.98),
    ("neuro.ml", 0.51, 37.36, 1.033, 0.71, 0.21, 614.05),
    ("text_class", 0.50, 28.23, 0.605, 0.27, 0.29, 146.64),
    ("hadi", 0.23, 52.02, 1.685, 0.58, 0.11, 828.61),
];

/// Published final rank with its 95 % interval, in published order.
pub const CHALLENGE_RANKS: [(&str, f64, f64, f64); 20] = [
    ("sysu_media", 0.0068, 0.0019, 0.0161),
    ("cian", 0.0357, 0.0248, 0.0539),
    ("nlp_logix", 0.0520, 0.0365, 0.0744),
    ("nic-vicorob", 0.0785, 0.0577, 0.1045),
    ("k2", 0.1437, 0.1188, 0.1711),
    ("misp", 0.1740, 0.1356, 0.2273),
    ("lrde", 0.1782, 0.1395, 0.2290),
    ("nih_cidi", 0.2376, 0.2131, 0.2680),
    ("ipmi-bern", 0.2537, 0.2391, 0.2727),
    ("scan", 0.2836, 0.2631, 0.3099),
    ("achilles", 0.3058, 0.2896, 0.3276),
    ("skkumedneuro", 0.3649, 0.3325, 0.4044),
    ("tignet", 0.4090, 0.3765, 0.4481),
    ("tig", 0.4097, 0.3795, 0.4454),
    ("knight", 0.4320, 0.4082, 0.4598),
    ("upc_dlmi", 0.4429, 0.3903, 0.5016),
    ("nist", 0.5040, 0.4724, 0.5404),
    ("neuro.ml", 0.5615, 0.5193, 0.6084),
    ("text_class", 0.5961, 0.5539, 0.6430),
    ("hadi", 0.8886, 0.8687, 0.9103),
];

/// Published rank when the percentage volume difference replaces the log
/// ratio, in that ranking's order.
pub const CHALLENGE_AVD_RANKS: [(&str, f64); 20] = [
    ("sysu_media", 0.0076),
    ("cian", 0.0366),
    ("nlp_logix", 0.0485),
    ("nic-vicorob", 0.0735),
    ("k2", 0.1368),
    ("lrde", 0.1635),
    ("misp", 0.1659),
    ("ipmi-bern", 0.2498),
    ("nih_cidi", 0.2697),
    ("scan", 0.2762),
    ("achilles", 0.2962),
    ("skkumedneuro", 0.3492),
    ("tignet", 0.3802),
    ("tig", 0.3858),
    ("knight", 0.4159),
    ("upc_dlmi", 0.4337),
    ("nist", 0.4747),
    ("text_class", 0.5725),
    ("neuro.ml", 0.5960),
    ("hadi", 0.8886),
];

/// One pseudo-subject per method carrying the published means.
pub fn challenge_records() -> Vec<ResultRecord> {
    CHALLENGE_MEANS
        .iter()
        .map(|&(method, dsc, h95, lavd, recall, f1, avd)| ResultRecord {
            method_id: method.into(),
            subject_id: "mean".into(),
            scanner_id: "all".into(),
            scores: Scores {
                dsc: Some(dsc),
                h95_mm: Some(h95),
                avd_pct: Some(avd),
                lavd: Some(lavd),
                recall: Some(recall),
                f1: Some(f1),
                ..Scores::default()
            },
        })
        .collect()
}
