//! Normality screening of residual samples.

use serde::{Deserialize, Serialize};

use crate::error::{domain, input, Error, Result};
use crate::specfun::{std_normal_cdf, PROB_CEIL, PROB_FLOOR};

/// 5% critical value of the Anderson–Darling statistic when the null
/// distribution is fully specified.
pub const AD_CRITICAL_5PCT: f64 = 2.492;

/// Anderson–Darling statistic of `sample` against the standard normal.
///
/// No parameters are estimated and no finite-sample modification is
/// applied.
pub fn anderson_darling(sample: &[f64]) -> Result<f64> {
    let n = sample.len();
    if n < 2 {
        return Err(input("Anderson-Darling needs at least two values"));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(domain("Anderson-Darling sample contains non-finite values"));
    }
    let mut u: Vec<f64> = sample
        .iter()
        .map(|&x| std_normal_cdf(x).clamp(PROB_FLOOR, PROB_CEIL))
        .collect();
    u.sort_by(f64::total_cmp);
    let mut acc = 0.0;
    for i in 0..n {
        let w = (2 * i + 1) as f64;
        acc += w * (u[i].ln() + (-u[n - 1 - i]).ln_1p());
    }
    Ok(-(n as f64) - acc / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    /// Unbiased (n − 1 divisor).
    pub variance: f64,
    /// `m3 / m2^{3/2}` with n-divisor central moments.
    pub skewness: f64,
    /// `m4 / m2²` (not excess); `None` below four observations.
    pub kurtosis: Option<f64>,
}

/// Mean, variance, skewness and kurtosis of a sample.
pub fn moment_summary(sample: &[f64]) -> Result<MomentSummary> {
    let n = sample.len();
    if n < 2 {
        return Err(input("moment summary needs at least two values"));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(domain("moment summary sample contains non-finite values"));
    }
    let nf = n as f64;
    let mean = sample.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in sample {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    if m2 <= 0.0 {
        return Err(Error::UndefinedStatistic("sample has zero variance".into()));
    }
    let variance = m2 / (nf - 1.0);
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    Ok(MomentSummary {
        mean,
        variance,
        skewness: m3 / m2.powf(1.5),
        kurtosis: (n >= 4).then(|| m4 / (m2 * m2)),
    })
}

/// Sample quantile by linear interpolation between order statistics
/// (the default "type 7" rule). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
