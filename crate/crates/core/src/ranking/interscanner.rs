//! Robustness across scanners.
//!
//! For each method and metric, subjects are grouped by scanner and reduced
//! to their median; the population standard deviation of those medians is
//! the method's dispersion. Dispersions are normalised across methods per
//! metric (lower is better) and averaged over the five ranked metrics.

use serde::{Deserialize, Serialize};

use super::{relative_rank, Metric, MetricColumns, Orientation, ResultTable, VolumeMetric};
use crate::error::{Error, Result};
use crate::stats::{median, population_sd};

/// How per-metric dispersions become comparable ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankNormalization {
    /// Min-max scaling to [0, 1], as for the final rank.
    #[default]
    MinMax,
    /// Ordinal position (ties share the average position) scaled to [0, 1].
    Ordinal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterscannerEntry {
    /// 1-based position after sorting by `rank`.
    pub position: usize,
    pub method_id: String,
    pub dispersion: MetricColumns<Option<f64>>,
    pub normalized: MetricColumns<Option<f64>>,
    pub rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterscannerResult {
    pub volume_metric: VolumeMetric,
    pub normalization: RankNormalization,
    pub scanners: Vec<String>,
    /// Sorted by rank ascending, ties by method id.
    pub methods: Vec<InterscannerEntry>,
    pub warnings: Vec<String>,
}

fn ordinal_rank(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = avg / (n - 1) as f64;
        }
        i = j + 1;
    }
    ranks
}

pub fn interscanner_rank(
    table: &ResultTable,
    volume_metric: VolumeMetric,
    normalization: RankNormalization,
) -> Result<InterscannerResult> {
    let n_methods = table.methods().len();
    if n_methods < 2 {
        return Err(Error::Arity(format!(
            "ranking needs at least 2 methods, got {n_methods}"
        )));
    }
    let mut scanners: Vec<String> = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for s in 0..table.subjects().len() {
        let id = table.scanner_of(s);
        match scanners.iter().position(|x| x == id) {
            Some(k) => groups[k].push(s),
            None => {
                scanners.push(id.to_string());
                groups.push(vec![s]);
            }
        }
    }
    if scanners.len() < 2 {
        return Err(Error::Arity(format!(
            "inter-scanner ranking needs at least 2 scanners, got {}",
            scanners.len()
        )));
    }

    let metrics = volume_metric.ranked_metrics();
    let mut warnings = Vec::new();
    let mut dispersions: Vec<MetricColumns<Option<f64>>> =
        vec![MetricColumns::default(); n_methods];
    for (m, method_id) in table.methods().iter().enumerate() {
        for metric in Metric::ALL {
            let mut medians = Vec::with_capacity(scanners.len());
            for (k, subjects) in groups.iter().enumerate() {
                let values: Vec<f64> = subjects
                    .iter()
                    .filter_map(|&s| table.scores(m, s).get(metric))
                    .collect();
                match median(&values) {
                    Some(v) => medians.push(v),
                    None if metrics.contains(&metric) => warnings.push(format!(
                        "method `{method_id}`, metric `{metric}`: scanner `{}` has no values and is excluded",
                        scanners[k]
                    )),
                    None => {}
                }
            }
            if medians.len() >= 2 {
                *dispersions[m].get_mut(metric) = population_sd(&medians);
            } else if metrics.contains(&metric) {
                return Err(Error::AllMissing {
                    method: method_id.clone(),
                    metric: format!("{metric} (fewer than 2 scanners with values)"),
                });
            }
        }
    }

    let mut normalized: Vec<MetricColumns<Option<f64>>> = vec![MetricColumns::default(); n_methods];
    for metric in metrics {
        let values: Vec<f64> = dispersions
            .iter()
            .map(|d| d.get(metric).expect("checked"))
            .collect();
        let ranks = match normalization {
            RankNormalization::MinMax => relative_rank(&values, Orientation::LowerBetter)?,
            RankNormalization::Ordinal => ordinal_rank(&values),
        };
        for (m, r) in ranks.into_iter().enumerate() {
            *normalized[m].get_mut(metric) = Some(r);
        }
    }

    let mut methods: Vec<InterscannerEntry> = table
        .methods()
        .iter()
        .enumerate()
        .map(|(m, method_id)| InterscannerEntry {
            position: 0,
            method_id: method_id.clone(),
            dispersion: dispersions[m],
            normalized: normalized[m],
            rank: metrics
                .iter()
                .map(|&k| normalized[m].get(k).expect("ranked"))
                .sum::<f64>()
                / 5.0,
        })
        .collect();
    methods.sort_by(|a, b| {
        a.rank
            .total_cmp(&b.rank)
            .then_with(|| a.method_id.cmp(&b.method_id))
    });
    for (k, e) in methods.iter_mut().enumerate() {
        e.position = k + 1;
    }
    Ok(InterscannerResult {
        volume_metric,
        normalization,
        scanners,
        methods,
        warnings,
    })
}
