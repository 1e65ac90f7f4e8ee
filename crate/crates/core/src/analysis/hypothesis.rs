//! Cohort-balance tests and train/test agreement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{ln_factorial_table, mean, sample_variance, student_t_two_sided};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    /// Both samples constant with different means.
    pub infinite_t: bool,
}

/// Welch's unequal-variances t-test, two-sided.
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Arity(format!(
            "each sample needs at least 2 values, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (ma, mb) = (mean(a).expect("nonempty"), mean(b).expect("nonempty"));
    let va = sample_variance(a).expect("n >= 2") / a.len() as f64;
    let vb = sample_variance(b).expect("n >= 2") / b.len() as f64;
    let se2 = va + vb;
    if se2 == 0.0 {
        return Ok(if ma == mb {
            WelchResult {
                t: 0.0,
                df: f64::NAN,
                p: 1.0,
                infinite_t: false,
            }
        } else {
            WelchResult {
                t: if ma > mb {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                },
                df: f64::NAN,
                p: 0.0,
                infinite_t: true,
            }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    Ok(WelchResult {
        t,
        df,
        p: student_t_two_sided(t, df),
        infinite_t: false,
    })
}

/// Two-sided Fisher exact test on `[[a, b], [c, d]]`: the total probability
/// of all tables with the observed margins that are no more likely than the
/// observed one.
pub fn fisher_exact(table: [[u64; 2]; 2]) -> f64 {
    let [[a, b], [c, d]] = table;
    let row1 = a + b;
    let col1 = a + c;
    let n = a + b + c + d;
    if row1 == 0 || col1 == 0 || row1 == n || col1 == n {
        return 1.0;
    }
    let lf = ln_factorial_table(n as usize);
    let ln_p = |x: u64| {
        let (x, r1, c1, n) = (x as usize, row1 as usize, col1 as usize, n as usize);
        lf[r1] + lf[n - r1] + lf[c1] + lf[n - c1]
            - lf[n]
            - lf[x]
            - lf[r1 - x]
            - lf[c1 - x]
            - lf[n + x - r1 - c1]
    };
    let lo = (row1 + col1).saturating_sub(n);
    let hi = row1.min(col1);
    let observed = ln_p(a);
    let p: f64 = (lo..=hi)
        .map(ln_p)
        .filter(|&lp| lp <= observed + 1e-12f64.ln_1p())
        .map(f64::exp)
        .sum();
    p.min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r_squared: f64,
    /// The test column is constant, so no correlation is defined; reported as 0.
    pub degenerate: bool,
}

/// Squared Pearson correlation between train and test scores.
pub fn train_test_correlation(pairs: &[(f64, f64)]) -> Result<Correlation> {
    if pairs.len() < 3 {
        return Err(Error::Arity(format!(
            "correlation needs at least 3 pairs, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedMetric(
            "train scores have zero variance".into(),
        ));
    }
    if syy == 0.0 {
        return Ok(Correlation {
            r_squared: 0.0,
            degenerate: true,
        });
    }
    Ok(Correlation {
        r_squared: (sxy * sxy / (sxx * syy)).min(1.0),
        degenerate: false,
    })
}
