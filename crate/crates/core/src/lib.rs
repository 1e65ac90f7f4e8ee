//! Evaluation engine for volumetric lesion segmentation challenges.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`volume`]: labeled 3-D grids, NIfTI-1 I/O, connected components,
//!   morphology and exact surface distances.
//! - [`metrics`]: the per-subject scores (DSC, H95, AVD, lAVD, lesion recall
//!   and F1, size-split recall).
//! - [`fusion`]: STAPLE consensus and majority vote.
//! - [`ranking`]: relative min-max ranking, bootstrap confidence intervals,
//!   significance clusters and inter-scanner robustness.
//! - [`analysis`]: spatial error-rate maps, cohort summaries and the
//!   hypothesis tests used for cohort balance.
//! - [`synth`]: deterministic phantoms for testing without patient data.

pub mod analysis;
pub mod error;
pub mod fusion;
pub mod metrics;
pub mod ranking;
pub mod stats;
pub mod synth;
pub mod volume;

pub use error::{Error, Result};
pub use fusion::{majority_vote, staple_fuse, FusionResult, Prior, StapleParams};
pub use metrics::{evaluate_pair, EvalConfig, HausdorffMode, IgnorePolicy, MetricVector};
pub use ranking::{
    bootstrap_ci, final_rank, interscanner_rank, metric_means, relative_rank,
    significance_clusters, BootstrapConfig, Metric, RankTable, ResultRecord, ResultTable, Scores,
    VolumeMetric,
};
pub use volume::{BinaryMask, Connectivity, Grid, LabelVolume, RealVolume};
