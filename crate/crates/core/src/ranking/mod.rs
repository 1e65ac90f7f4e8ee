//! Challenge ranking.
//!
//! Each metric is averaged per method over the subjects where it is
//! available. Per metric, the averages are min-max normalised so the best
//! method gets 0 and the worst 1; the final rank is the mean of the five
//! normalised ranks (DSC, H95, a volume metric, recall, F1). Because the
//! normalisation is affine, ranks do not change when a metric column is
//! rescaled by a positive constant or shifted.

mod bootstrap;
mod interscanner;
mod table;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bootstrap::{bootstrap_ci, BootstrapConfig, BootstrapResult, Interval, MethodIntervals};
pub use interscanner::{
    interscanner_rank, InterscannerEntry, InterscannerResult, RankNormalization,
};
pub use table::{write_records_csv, ResultRecord, ResultTable, Scores, CSV_COLUMNS};

/// The six per-subject scores that can be aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Dsc,
    H95,
    Avd,
    Lavd,
    Recall,
    F1,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Dsc,
        Metric::H95,
        Metric::Avd,
        Metric::Lavd,
        Metric::Recall,
        Metric::F1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Dsc => "dsc",
            Metric::H95 => "h95",
            Metric::Avd => "avd",
            Metric::Lavd => "lavd",
            Metric::Recall => "recall",
            Metric::F1 => "f1",
        }
    }

    pub fn orientation(self) -> Orientation {
        match self {
            Metric::Dsc | Metric::Recall | Metric::F1 => Orientation::HigherBetter,
            Metric::H95 | Metric::Avd | Metric::Lavd => Orientation::LowerBetter,
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    HigherBetter,
    LowerBetter,
}

/// Which volume-agreement metric enters the final rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeMetric {
    #[default]
    Lavd,
    Avd,
}

impl VolumeMetric {
    pub fn metric(self) -> Metric {
        match self {
            VolumeMetric::Lavd => Metric::Lavd,
            VolumeMetric::Avd => Metric::Avd,
        }
    }

    /// The five metrics averaged into the final rank.
    pub fn ranked_metrics(self) -> [Metric; 5] {
        [
            Metric::Dsc,
            Metric::H95,
            self.metric(),
            Metric::Recall,
            Metric::F1,
        ]
    }
}

impl std::str::FromStr for VolumeMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lavd" => Ok(VolumeMetric::Lavd),
            "avd" => Ok(VolumeMetric::Avd),
            other => Err(Error::Parameter(format!(
                "volume metric must be lavd or avd, got `{other}`"
            ))),
        }
    }
}

/// One value per metric, serialised with the metric names as keys.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricColumns<T> {
    pub dsc: T,
    pub h95: T,
    pub avd: T,
    pub lavd: T,
    pub recall: T,
    pub f1: T,
}

impl<T> MetricColumns<T> {
    pub fn get(&self, metric: Metric) -> &T {
        match metric {
            Metric::Dsc => &self.dsc,
            Metric::H95 => &self.h95,
            Metric::Avd => &self.avd,
            Metric::Lavd => &self.lavd,
            Metric::Recall => &self.recall,
            Metric::F1 => &self.f1,
        }
    }

    pub fn get_mut(&mut self, metric: Metric) -> &mut T {
        match metric {
            Metric::Dsc => &mut self.dsc,
            Metric::H95 => &mut self.h95,
            Metric::Avd => &mut self.avd,
            Metric::Lavd => &mut self.lavd,
            Metric::Recall => &mut self.recall,
            Metric::F1 => &mut self.f1,
        }
    }
}

/// Mean of one metric for one method and how many subjects contributed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMean {
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMeans {
    pub method_id: String,
    pub means: MetricColumns<Option<CellMean>>,
}

/// Per-method means of every metric. Metrics listed in `required` must
/// have at least one non-missing subject for every method; the others are
/// reported as `None` where nothing is available.
pub fn metric_means(table: &ResultTable, required: &[Metric]) -> Result<Vec<MethodMeans>> {
    let n_subjects = table.subjects().len();
    table
        .methods()
        .iter()
        .enumerate()
        .map(|(m, method_id)| {
            let mut means = MetricColumns::<Option<CellMean>>::default();
            for metric in Metric::ALL {
                let (sum, count) = (0..n_subjects)
                    .filter_map(|s| table.scores(m, s).get(metric))
                    .fold((0.0, 0usize), |(sum, n), v| (sum + v, n + 1));
                if count == 0 {
                    if required.contains(&metric) {
                        return Err(Error::AllMissing {
                            method: method_id.clone(),
                            metric: metric.name().into(),
                        });
                    }
                    continue;
                }
                *means.get_mut(metric) = Some(CellMean {
                    mean: sum / count as f64,
                    count,
                });
            }
            Ok(MethodMeans {
                method_id: method_id.clone(),
                means,
            })
        })
        .collect()
}

/// Min-max normalised rank of each value: 0 for the best, 1 for the worst.
/// All ranks are 0 when every value is equal.
pub fn relative_rank(values: &[f64], orientation: Orientation) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::Arity(format!(
            "ranking needs at least 2 methods, got {}",
            values.len()
        )));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let (best, worst) = match orientation {
        Orientation::LowerBetter => (lo, hi),
        Orientation::HigherBetter => (hi, lo),
    };
    if best == worst {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values
        .iter()
        .map(|&v| (v - best).abs() / (worst - best).abs())
        .collect())
}

/// Final ranks from a dense `[metric][method]` matrix of means, in the
/// metric order of `VolumeMetric::ranked_metrics`.
pub(crate) fn final_ranks_from_means(
    means: &[Vec<f64>; 5],
    metrics: [Metric; 5],
) -> Result<(Vec<f64>, [Vec<f64>; 5])> {
    let mut per_metric: [Vec<f64>; 5] = Default::default();
    for (k, metric) in metrics.iter().enumerate() {
        per_metric[k] = relative_rank(&means[k], metric.orientation())?;
    }
    let n = means[0].len();
    let finals = (0..n)
        .map(|i| per_metric.iter().map(|r| r[i]).sum::<f64>() / 5.0)
        .collect();
    Ok((finals, per_metric))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRank {
    /// 1-based position after sorting by final rank.
    pub position: usize,
    pub method_id: String,
    pub means: MetricColumns<Option<CellMean>>,
    /// Normalised rank per metric; `None` for the metric not ranked.
    pub ranks: MetricColumns<Option<f64>>,
    pub final_rank: f64,
    pub intervals: Option<MethodIntervals>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub volume_metric: VolumeMetric,
    /// Sorted by final rank ascending, ties by method id.
    pub methods: Vec<MethodRank>,
    /// Positions `k` such that method `k` and `k + 1` have disjoint
    /// final-rank intervals. Empty without bootstrap intervals.
    pub cluster_boundaries: Vec<usize>,
    pub bootstrap: Option<BootstrapSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub replicates: usize,
    pub confidence: f64,
    pub seed: u64,
    pub redrawn: usize,
}

impl RankTable {
    pub fn method(&self, method_id: &str) -> Option<&MethodRank> {
        self.methods.iter().find(|m| m.method_id == method_id)
    }

    pub fn order(&self) -> Vec<&str> {
        self.methods.iter().map(|m| m.method_id.as_str()).collect()
    }

    /// Attaches bootstrap intervals and derives the cluster boundaries.
    pub fn attach_bootstrap(&mut self, result: &BootstrapResult) {
        for m in &mut self.methods {
            m.intervals = result
                .methods
                .iter()
                .find(|b| b.method_id == m.method_id)
                .cloned();
        }
        let cis: Option<Vec<Interval>> = self
            .methods
            .iter()
            .map(|m| m.intervals.as_ref().and_then(|i| i.final_rank))
            .collect();
        self.cluster_boundaries = cis.map(|c| significance_clusters(&c)).unwrap_or_default();
        self.bootstrap = Some(BootstrapSummary {
            replicates: result.replicates,
            confidence: result.confidence,
            seed: result.seed,
            redrawn: result.redrawn,
        });
    }

    pub fn write_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let to_io = |e: csv::Error| Error::io("<csv>", std::io::Error::other(e.to_string()));
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![
            "position".to_string(),
            "method_id".into(),
            "final_rank".into(),
            "final_rank_ci_low".into(),
            "final_rank_ci_high".into(),
        ];
        for metric in Metric::ALL {
            header.push(format!("{metric}_mean"));
            header.push(format!("{metric}_n"));
            header.push(format!("{metric}_ci_low"));
            header.push(format!("{metric}_ci_high"));
            header.push(format!("{metric}_rank"));
        }
        w.write_record(&header).map_err(to_io)?;
        let real = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for m in &self.methods {
            let fr = m.intervals.as_ref().and_then(|i| i.final_rank);
            let mut row = vec![
                m.position.to_string(),
                m.method_id.clone(),
                format!("{}", m.final_rank),
                real(fr.map(|i| i.low)),
                real(fr.map(|i| i.high)),
            ];
            for metric in Metric::ALL {
                let cell = m.means.get(metric);
                let ci = m.intervals.as_ref().and_then(|i| *i.means.get(metric));
                row.push(real(cell.map(|c| c.mean)));
                row.push(cell.map(|c| c.count.to_string()).unwrap_or_default());
                row.push(real(ci.map(|i| i.low)));
                row.push(real(ci.map(|i| i.high)));
                row.push(real(*m.ranks.get(metric)));
            }
            w.write_record(&row).map_err(to_io)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }
}

/// Ranks every method of `table` using the five metrics of `volume_metric`.
pub fn final_rank(table: &ResultTable, volume_metric: VolumeMetric) -> Result<RankTable> {
    let metrics = volume_metric.ranked_metrics();
    let means = metric_means(table, &metrics)?;
    let mut dense: [Vec<f64>; 5] = Default::default();
    for (k, metric) in metrics.iter().enumerate() {
        dense[k] = means
            .iter()
            .map(|m| m.means.get(*metric).expect("required metric present").mean)
            .collect();
    }
    let (finals, per_metric) = final_ranks_from_means(&dense, metrics)?;

    let mut rows: Vec<MethodRank> = means
        .into_iter()
        .enumerate()
        .map(|(i, mm)| {
            let mut ranks = MetricColumns::<Option<f64>>::default();
            for (k, metric) in metrics.iter().enumerate() {
                *ranks.get_mut(*metric) = Some(per_metric[k][i]);
            }
            MethodRank {
                position: 0,
                method_id: mm.method_id,
                means: mm.means,
                ranks,
                final_rank: finals[i],
                intervals: None,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.final_rank
            .total_cmp(&b.final_rank)
            .then_with(|| a.method_id.cmp(&b.method_id))
    });
    for (k, r) in rows.iter_mut().enumerate() {
        r.position = k + 1;
    }
    Ok(RankTable {
        volume_metric,
        methods: rows,
        cluster_boundaries: Vec::new(),
        bootstrap: None,
    })
}

/// Positions (1-based) after which the next method's interval lies strictly
/// above the current one. `intervals` must follow the ranking order.
pub fn significance_clusters(intervals: &[Interval]) -> Vec<usize> {
    intervals
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].high < w[1].low)
        .map(|(k, _)| k + 1)
        .collect()
}
