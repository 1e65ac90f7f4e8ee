//! Descriptive analyses over a cohort: voxel-wise error rate maps, volume and
//! lesion-count distributions, cohort-balance tests and train/test agreement.

mod cohort;
mod hypothesis;
mod maps;

pub use cohort::{cohort_summary, CohortOptions, CohortSummary, Histogram, Summary};
pub use hypothesis::{fisher_exact, train_test_correlation, welch_ttest, Correlation, WelchResult};
pub use maps::{fn_fp_maps, Accumulation, FnFpMaps, FpDenominator, MapOptions, MapPair, RateMap};
