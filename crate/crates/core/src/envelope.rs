//! Half-normal plots with simulated envelopes, and residual-versus-linear-
//! predictor tables.
//!
//! Each envelope replicate simulates a response from the fitted model,
//! refits the same design, and records the sorted absolute residuals. The
//! bands depend only on the fitted model, the design and the seed; the
//! observed residuals are compared against them at the end.

use serde::{Deserialize, Serialize};

use crate::betadist::{sample, BetaParams};
use crate::error::{input, Error, Result};
use crate::fit::{fit_mle, Dataset, FitOptions, FittedModel};
use crate::gof::quantile_sorted;
use crate::par::{map_indexed, Execution};
use crate::residuals::{compute, ResidualKind};
use crate::rng::{replicate_stream, Purpose};
use crate::specfun::std_normal_quantile;

/// Pointwise rule turning replicate residuals into a band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BandRule {
    /// Minimum and maximum over replicates.
    MinMax,
    /// Empirical `alpha/2` and `1 − alpha/2` quantiles over replicates.
    Percentile { alpha: f64 },
}

/// Expected half-normal order statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlottingPositions {
    /// `Φ⁻¹((i + n − 1/8)/(2n + 1/2))`
    Atkinson,
    /// `Φ⁻¹((1 + (i − 1/2)/n)/2)`
    Midpoint,
}

impl PlottingPositions {
    pub fn positions(self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        (1..=n)
            .map(|i| {
                let i = i as f64;
                let p = match self {
                    PlottingPositions::Atkinson => (i + nf - 0.125) / (2.0 * nf + 0.5),
                    PlottingPositions::Midpoint => 0.5 * (1.0 + (i - 0.5) / nf),
                };
                std_normal_quantile(p).expect("plotting position inside (0,1)")
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeOptions {
    pub n_sim: usize,
    pub band: BandRule,
    pub positions: PlottingPositions,
    pub fit: FitOptions,
    pub execution: Execution,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        Self {
            n_sim: 100,
            band: BandRule::MinMax,
            positions: PlottingPositions::Atkinson,
            fit: FitOptions::default(),
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeData {
    pub kind: ResidualKind,
    pub abs_residuals_sorted: Vec<f64>,
    pub expected_halfnormal: Vec<f64>,
    pub lower: Vec<f64>,
    /// Pointwise median over replicates.
    pub median: Vec<f64>,
    pub upper: Vec<f64>,
    pub points_outside: usize,
    pub n_sim: usize,
    /// Replicates redrawn because the refit failed.
    pub redraws: usize,
}

fn sorted_abs(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().map(|r| r.abs()).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// One envelope replicate: sorted |r| from a simulate-and-refit cycle, or
/// `None` if the refit failed.
fn replicate(
    m: &FittedModel,
    d: &Dataset,
    kind: ResidualKind,
    fit: &FitOptions,
    seed: u64,
    index: usize,
    attempt: usize,
) -> Option<Vec<f64>> {
    let mut rng = replicate_stream(seed, Purpose::EnvelopeReplicate, index as u64, attempt as u64);
    let y: Vec<f64> = m
        .mu
        .iter()
        .map(|&mu| sample(BetaParams::new(mu, m.phi).expect("fitted parameters are valid"), &mut rng))
        .collect();
    let sim = d.with_response(y);
    let opts = FitOptions {
        start: Some((m.beta.clone(), m.phi)),
        ..fit.clone()
    };
    let refit = fit_mle(&sim, m.link, &opts).ok().filter(|f| f.converged())?;
    let r = compute(&refit, &sim, kind).ok()?;
    Some(sorted_abs(&r.values))
}

/// Half-normal plot data with a simulated envelope.
///
/// A failed refit is redrawn from a fresh substream; more than
/// `10·n_sim` attempts in total is an error.
pub fn half_normal_envelope(
    m: &FittedModel,
    d: &Dataset,
    kind: ResidualKind,
    seed: u64,
    opts: &EnvelopeOptions,
) -> Result<EnvelopeData> {
    let n_sim = opts.n_sim;
    if n_sim == 0 {
        return Err(input("envelope needs at least one simulation"));
    }
    if let BandRule::Percentile { alpha } = opts.band {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(input(format!("band level {alpha} must lie in (0,1)")));
        }
    }
    if m.mu.len() != d.n() {
        return Err(input("model and dataset sizes differ"));
    }
    let observed = sorted_abs(&compute(m, d, kind)?.values);
    let max_total = 10 * n_sim;
    // Worst case for one replicate when all others succeed first time.
    let per_replicate = max_total - (n_sim - 1);

    let sims: Vec<Option<(Vec<f64>, usize)>> = map_indexed(opts.execution, n_sim, |j| {
        (0..per_replicate).find_map(|a| replicate(m, d, kind, &opts.fit, seed, j, a).map(|r| (r, a + 1)))
    });
    let mut attempts = 0;
    let mut columns = Vec::with_capacity(n_sim);
    for s in sims {
        let Some((r, used)) = s else {
            return Err(Error::Convergence(format!("envelope refits failed more than {max_total} times")));
        };
        attempts += used;
        columns.push(r);
    }
    if attempts > max_total {
        return Err(Error::Convergence(format!("envelope needed {attempts} attempts (cap {max_total})")));
    }

    let n = d.n();
    let (mut lower, mut median, mut upper) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut point = vec![0.0; n_sim];
    for i in 0..n {
        for (p, col) in point.iter_mut().zip(&columns) {
            *p = col[i];
        }
        point.sort_by(f64::total_cmp);
        (lower[i], upper[i]) = match opts.band {
            BandRule::MinMax => (point[0], point[n_sim - 1]),
            BandRule::Percentile { alpha } => {
                (quantile_sorted(&point, alpha / 2.0), quantile_sorted(&point, 1.0 - alpha / 2.0))
            }
        };
        median[i] = quantile_sorted(&point, 0.5);
    }
    let points_outside = observed
        .iter()
        .zip(lower.iter().zip(&upper))
        .filter(|(o, (lo, hi))| **o < **lo || **o > **hi)
        .count();
    Ok(EnvelopeData {
        kind,
        abs_residuals_sorted: observed,
        expected_halfnormal: opts.positions.positions(n),
        lower,
        median,
        upper,
        points_outside,
        n_sim,
        redraws: attempts - n_sim,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorTable {
    pub kind: ResidualKind,
    pub eta: Vec<f64>,
    pub residual: Vec<f64>,
}

/// Fitted linear predictor paired with residuals, in observation order.
pub fn residual_vs_predictor(m: &FittedModel, d: &Dataset, kind: ResidualKind) -> Result<PredictorTable> {
    let r = compute(m, d, kind)?;
    Ok(PredictorTable {
        kind,
        eta: m.eta.clone(),
        residual: r.values,
    })
}
