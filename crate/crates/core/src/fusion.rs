//! Consensus segmentation from several raters.
//!
//! [`staple_fuse`] runs the binary STAPLE expectation-maximization: a latent
//! true segmentation with a global prior, and per-rater sensitivity `p` and
//! specificity `q`. The posterior weight of a voxel depends only on which
//! raters marked it, so voxels are grouped by vote pattern and each EM
//! iteration runs over the distinct patterns weighted by their counts. This
//! is exact and makes the cost independent of the (mostly empty) background.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, Grid, RealVolume};

/// Starting value for every rater's sensitivity and specificity.
pub const INITIAL_PERFORMANCE: f64 = 0.999;

/// Prior probability that a voxel belongs to the true segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Prior {
    /// Fraction of positive votes over all raters and voxels.
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StapleParams {
    pub max_iterations: usize,
    /// Convergence bound on the mean absolute change of the weights.
    pub tolerance: f64,
    pub threshold: f64,
    pub prior: Prior,
}

impl Default for StapleParams {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-6,
            threshold: 0.5,
            prior: Prior::Auto,
        }
    }
}

impl StapleParams {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Parameter("max_iterations must be positive".into()));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::Parameter("tolerance must be positive".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Parameter("threshold must lie in (0, 1)".into()));
        }
        if let Prior::Fixed(f) = self.prior {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Parameter("prior must lie in (0, 1)".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionResult {
    pub grid: Grid,
    /// Posterior probability of the true label per voxel.
    pub weights: Vec<f64>,
    pub sensitivities: Vec<f64>,
    pub specificities: Vec<f64>,
    pub consensus: BinaryMask,
    pub prior: f64,
    pub iterations_used: usize,
    pub converged: bool,
    /// Observed-data log-likelihood before each M-step.
    pub log_likelihood: Vec<f64>,
}

impl FusionResult {
    pub fn weight_map(&self) -> RealVolume {
        RealVolume::new(self.grid, self.weights.iter().map(|&w| w as f32).collect())
            .expect("weights match grid")
    }
}

fn check_inputs(masks: &[BinaryMask], min: usize) -> Result<Grid> {
    if masks.len() < min {
        return Err(Error::Arity(format!(
            "need at least {min} segmentations, got {}",
            masks.len()
        )));
    }
    let grid = *masks[0].grid();
    for m in &masks[1..] {
        grid.ensure_same(m.grid())?;
    }
    Ok(grid)
}

/// Voxel set by strictly more than half of the raters.
pub fn majority_vote(masks: &[BinaryMask]) -> Result<BinaryMask> {
    let grid = check_inputs(masks, 1)?;
    let mut votes = vec![0usize; grid.len()];
    for m in masks {
        for (v, &b) in votes.iter_mut().zip(m.data()) {
            *v += b as usize;
        }
    }
    let n = masks.len();
    BinaryMask::new(grid, votes.into_iter().map(|v| 2 * v > n).collect())
}

/// A distinct vote pattern and how many voxels carry it.
struct Pattern {
    votes: Vec<bool>,
    count: f64,
}

fn group_patterns(masks: &[BinaryMask], n_voxels: usize) -> (Vec<Pattern>, Vec<u32>) {
    let words = masks.len().div_ceil(64);
    let mut lookup: HashMap<Vec<u64>, u32> = HashMap::new();
    let mut patterns: Vec<Pattern> = Vec::new();
    let mut voxel_pattern = Vec::with_capacity(n_voxels);
    let mut key = vec![0u64; words];
    for i in 0..n_voxels {
        key.iter_mut().for_each(|w| *w = 0);
        for (j, m) in masks.iter().enumerate() {
            if m.data()[i] {
                key[j / 64] |= 1 << (j % 64);
            }
        }
        let id = match lookup.get(&key) {
            Some(&id) => id,
            None => {
                let id = patterns.len() as u32;
                patterns.push(Pattern {
                    votes: masks.iter().map(|m| m.data()[i]).collect(),
                    count: 0.0,
                });
                lookup.insert(key.clone(), id);
                id
            }
        };
        patterns[id as usize].count += 1.0;
        voxel_pattern.push(id);
    }
    (patterns, voxel_pattern)
}

#[inline]
fn ln_or_neg_inf(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// `ln(exp(a) + exp(b))` tolerating infinities.
fn log_add(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

fn sorted_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

/// Posterior weight per pattern and the observed-data log-likelihood.
fn expectation(patterns: &[Pattern], p: &[f64], q: &[f64], prior: f64, weights: &mut [f64]) -> f64 {
    let ln_f = prior.ln();
    let ln_not_f = (1.0 - prior).ln();
    let mut ll = 0.0;
    let mut terms_a = Vec::with_capacity(p.len());
    let mut terms_b = Vec::with_capacity(p.len());
    for (pat, w) in patterns.iter().zip(weights.iter_mut()) {
        terms_a.clear();
        terms_b.clear();
        for (j, &d) in pat.votes.iter().enumerate() {
            if d {
                terms_a.push(ln_or_neg_inf(p[j]));
                terms_b.push(ln_or_neg_inf(1.0 - q[j]));
            } else {
                terms_a.push(ln_or_neg_inf(1.0 - p[j]));
                terms_b.push(ln_or_neg_inf(q[j]));
            }
        }
        // Summing in sorted order keeps the result independent of rater order.
        let la = ln_f + sorted_sum(&mut terms_a);
        let lb = ln_not_f + sorted_sum(&mut terms_b);
        *w = match (la == f64::NEG_INFINITY, lb == f64::NEG_INFINITY) {
            (true, true) => prior,
            (true, false) => 0.0,
            (false, true) => 1.0,
            (false, false) => 1.0 / (1.0 + (lb - la).exp()),
        };
        ll += pat.count * log_add(la, lb);
    }
    ll
}

fn maximization(patterns: &[Pattern], weights: &[f64], p: &mut [f64], q: &mut [f64]) {
    let raters = p.len();
    let mut w_sum = 0.0;
    let mut not_w_sum = 0.0;
    let mut hit = vec![0.0; raters];
    let mut reject = vec![0.0; raters];
    for (pat, &w) in patterns.iter().zip(weights) {
        let cw = pat.count * w;
        let cnw = pat.count * (1.0 - w);
        w_sum += cw;
        not_w_sum += cnw;
        for (j, &d) in pat.votes.iter().enumerate() {
            if d {
                hit[j] += cw;
            } else {
                reject[j] += cnw;
            }
        }
    }
    for j in 0..raters {
        if w_sum > 0.0 {
            p[j] = (hit[j] / w_sum).clamp(0.0, 1.0);
        }
        if not_w_sum > 0.0 {
            q[j] = (reject[j] / not_w_sum).clamp(0.0, 1.0);
        }
    }
}

/// Binary STAPLE fusion of two or more segmentations on one grid.
pub fn staple_fuse(masks: &[BinaryMask], params: &StapleParams) -> Result<FusionResult> {
    params.validate()?;
    let grid = check_inputs(masks, 2)?;
    let n_voxels = grid.len();
    let raters = masks.len();
    let positives: usize = masks.iter().map(BinaryMask::count).sum();
    if positives == 0 {
        return Err(Error::Degenerate("all segmentations are empty".into()));
    }
    let prior = match params.prior {
        Prior::Auto => positives as f64 / (raters * n_voxels) as f64,
        Prior::Fixed(f) => f,
    };
    // Auto prior reaches 1 only when every rater marks every voxel.
    let prior = prior.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);

    let (patterns, voxel_pattern) = group_patterns(masks, n_voxels);
    let mut p = vec![INITIAL_PERFORMANCE; raters];
    let mut q = vec![INITIAL_PERFORMANCE; raters];
    let mut weights = vec![0.0; patterns.len()];
    let mut previous: Option<Vec<f64>> = None;
    let mut log_likelihood: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations_used = 0;

    for iteration in 1..=params.max_iterations {
        iterations_used = iteration;
        let ll = expectation(&patterns, &p, &q, prior, &mut weights);
        if let Some(&last) = log_likelihood.last() {
            debug_assert!(
                ll >= last - 1e-9 * last.abs().max(1.0),
                "EM log-likelihood decreased: {last} -> {ll}"
            );
        }
        log_likelihood.push(ll);
        maximization(&patterns, &weights, &mut p, &mut q);

        if let Some(prev) = &previous {
            let change: f64 = patterns
                .iter()
                .zip(weights.iter().zip(prev))
                .map(|(pat, (w, v))| pat.count * (w - v).abs())
                .sum::<f64>()
                / n_voxels as f64;
            if change < params.tolerance {
                converged = true;
                break;
            }
        }
        previous = Some(weights.clone());
    }

    let voxel_weights: Vec<f64> = voxel_pattern.iter().map(|&k| weights[k as usize]).collect();
    let consensus = BinaryMask::new(
        grid,
        voxel_weights
            .iter()
            .map(|&w| w >= params.threshold)
            .collect(),
    )?;
    Ok(FusionResult {
        grid,
        weights: voxel_weights,
        sensitivities: p,
        specificities: q,
        consensus,
        prior,
        iterations_used,
        converged,
        log_likelihood,
    })
}
