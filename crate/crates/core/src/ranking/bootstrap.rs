//! Subject-level bootstrap of metric means and final ranks.
//!
//! Every replicate draws `n` subjects with replacement and applies the same
//! draw to all methods. Replicate `r` uses its own ChaCha8 stream (`seed`,
//! stream `r`), so results do not depend on thread count or scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{final_ranks_from_means, Metric, MetricColumns, ResultTable, VolumeMetric};
use crate::error::{Error, Result};
use crate::stats::quantile_sorted;

/// Draws rejected in a row before a replicate gives up.
const MAX_REDRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 2000,
            confidence: 0.95,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Parameter(
                "bootstrap needs at least one replicate".into(),
            ));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Parameter(format!(
                "confidence must be in (0, 1), got {}",
                self.confidence
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodIntervals {
    pub method_id: String,
    /// `None` with a single method, where no rank is defined.
    pub final_rank: Option<Interval>,
    /// `None` where a metric was missing in every replicate.
    pub means: MetricColumns<Option<Interval>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub replicates: usize,
    pub confidence: f64,
    pub seed: u64,
    /// Draws rejected because a ranked metric had no values for some method.
    pub redrawn: usize,
    /// In table method order.
    pub methods: Vec<MethodIntervals>,
}

struct Replicate {
    /// `means[metric slot][method]`.
    means: [Vec<Option<f64>>; 6],
    finals: Option<Vec<f64>>,
    redrawn: usize,
}

fn resampled_means(table: &ResultTable, draw: &[usize]) -> [Vec<Option<f64>>; 6] {
    let n_methods = table.methods().len();
    let mut out: [Vec<Option<f64>>; 6] = Default::default();
    for metric in Metric::ALL {
        out[metric.slot()] = (0..n_methods)
            .map(|m| {
                let (sum, count) = draw
                    .iter()
                    .filter_map(|&s| table.scores(m, s).get(metric))
                    .fold((0.0, 0usize), |(sum, n), v| (sum + v, n + 1));
                (count > 0).then(|| sum / count as f64)
            })
            .collect();
    }
    out
}

fn replicate(
    table: &ResultTable,
    volume_metric: VolumeMetric,
    seed: u64,
    r: usize,
) -> Result<Replicate> {
    let n = table.subjects().len();
    let ranked = volume_metric.ranked_metrics();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    let mut draw = vec![0usize; n];
    for redrawn in 0..=MAX_REDRAWS {
        for d in draw.iter_mut() {
            *d = rng.random_range(0..n);
        }
        let means = resampled_means(table, &draw);
        if ranked
            .iter()
            .any(|m| means[m.slot()].iter().any(Option::is_none))
        {
            continue;
        }
        let finals = if table.methods().len() >= 2 {
            let dense: [Vec<f64>; 5] = std::array::from_fn(|k| {
                means[ranked[k].slot()]
                    .iter()
                    .map(|v| v.expect("checked"))
                    .collect()
            });
            Some(final_ranks_from_means(&dense, ranked)?.0)
        } else {
            None
        };
        return Ok(Replicate {
            means,
            finals,
            redrawn,
        });
    }
    Err(Error::Degenerate(format!(
        "bootstrap replicate {r}: every one of {MAX_REDRAWS} draws left a ranked metric without values"
    )))
}

fn percentile_interval(mut values: Vec<f64>, confidence: f64) -> Option<Interval> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let alpha = 1.0 - confidence;
    Some(Interval {
        low: quantile_sorted(&values, alpha / 2.0),
        high: quantile_sorted(&values, 1.0 - alpha / 2.0),
    })
}

/// Percentile bootstrap intervals for every method's metric means and, with
/// two or more methods, final rank.
pub fn bootstrap_ci(
    table: &ResultTable,
    volume_metric: VolumeMetric,
    config: &BootstrapConfig,
) -> Result<BootstrapResult> {
    config.validate()?;
    if table.subjects().len() < 2 {
        return Err(Error::Arity(format!(
            "bootstrap needs at least 2 subjects, got {}",
            table.subjects().len()
        )));
    }
    let reps: Vec<Replicate> = (0..config.replicates)
        .into_par_iter()
        .map(|r| replicate(table, volume_metric, config.seed, r))
        .collect::<Result<_>>()?;

    let methods = table
        .methods()
        .iter()
        .enumerate()
        .map(|(m, method_id)| {
            let mut means = MetricColumns::<Option<Interval>>::default();
            for metric in Metric::ALL {
                let values = reps
                    .iter()
                    .filter_map(|rep| rep.means[metric.slot()][m])
                    .collect();
                *means.get_mut(metric) = percentile_interval(values, config.confidence);
            }
            let finals: Option<Vec<f64>> = reps
                .iter()
                .map(|rep| rep.finals.as_ref().map(|f| f[m]))
                .collect();
            MethodIntervals {
                method_id: method_id.clone(),
                final_rank: finals.and_then(|f| percentile_interval(f, config.confidence)),
                means,
            }
        })
        .collect();

    Ok(BootstrapResult {
        replicates: config.replicates,
        confidence: config.confidence,
        seed: config.seed,
        redrawn: reps.iter().map(|r| r.redrawn).sum(),
        methods,
    })
}
