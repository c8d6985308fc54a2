//! Residuals of a fitted beta regression.
//!
//! * `swr1`: `(y* − mu*)/sqrt(v*)` on the logit scale of the response, with
//!   `y* = ln(y/(1 − y))`, `mu* = ψ(mu phi) − ψ((1 − mu) phi)` and
//!   `v* = ψ′(mu phi) + ψ′((1 − mu) phi)`.
//! * `swr2`: `swr1 / sqrt(1 − h_ii)` using leverages of the weighted hat matrix.
//! * `quantile`: `Φ⁻¹(F(y; mu, phi))`, exactly standard normal under the
//!   true model.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::betadist::{cdf_tails, BetaParams};
use crate::error::{domain, input, numerical, Error, Result};
use crate::fit::{hat_diagnostics, Dataset, FittedModel, HatDiagnostics};
use crate::specfun::{clamped_normal_quantile, digamma_unchecked, trigamma_unchecked, PROB_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualKind {
    Swr1,
    Swr2,
    Quantile,
}

impl ResidualKind {
    pub const ALL: [ResidualKind; 3] = [ResidualKind::Swr1, ResidualKind::Swr2, ResidualKind::Quantile];

    pub fn name(self) -> &'static str {
        match self {
            ResidualKind::Swr1 => "swr1",
            ResidualKind::Swr2 => "swr2",
            ResidualKind::Quantile => "quantile",
        }
    }
}

impl fmt::Display for ResidualKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ResidualKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "swr1" => Ok(ResidualKind::Swr1),
            "swr2" => Ok(ResidualKind::Swr2),
            "quantile" | "rq" => Ok(ResidualKind::Quantile),
            other => Err(input(format!("unknown residual kind '{other}' (expected swr1, swr2 or quantile)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSet {
    pub kind: ResidualKind,
    pub values: Vec<f64>,
}

/// Numerator and variance of the first standardized weighted residual.
pub fn swr1_parts(y: f64, mu: f64, phi: f64) -> (f64, f64) {
    let a = mu * phi;
    let b = (1.0 - mu) * phi;
    let ystar = y.ln() - (-y).ln_1p();
    let mustar = digamma_unchecked(a) - digamma_unchecked(b);
    (ystar - mustar, trigamma_unchecked(a) + trigamma_unchecked(b))
}

/// Standardized weighted residual 1 for a single observation.
pub fn swr1_value(y: f64, mu: f64, phi: f64) -> Result<f64> {
    BetaParams::new(mu, phi)?;
    if !(y > 0.0 && y < 1.0) {
        return Err(domain(format!("response {y} is outside (0,1)")));
    }
    let (num, var) = swr1_parts(y, mu, phi);
    let r = num / var.sqrt();
    if !r.is_finite() {
        return Err(numerical("standardized weighted residual is not finite"));
    }
    Ok(r)
}

/// Quantile residual for a single observation.
///
/// Each tail of the fitted CDF is evaluated directly and the smaller one
/// is floored at 1e-300, so the result is finite and symmetric in the two
/// tails.
pub fn quantile_value(y: f64, mu: f64, phi: f64) -> Result<f64> {
    let p = BetaParams::new(mu, phi)?;
    if !(y > 0.0 && y < 1.0) {
        return Err(domain(format!("response {y} is outside (0,1)")));
    }
    let (lower, upper) = cdf_tails(y, p)?;
    Ok(if lower <= upper {
        clamped_normal_quantile(lower.max(PROB_FLOOR))
    } else {
        -clamped_normal_quantile(upper.max(PROB_FLOOR))
    })
}

fn check_sizes(m: &FittedModel, d: &Dataset) -> Result<()> {
    if m.mu.len() != d.n() {
        return Err(input("model and dataset sizes differ"));
    }
    Ok(())
}

pub fn swr1(m: &FittedModel, d: &Dataset) -> Result<ResidualSet> {
    check_sizes(m, d)?;
    let values = d
        .y()
        .iter()
        .zip(&m.mu)
        .map(|(&y, &mu)| swr1_value(y, mu, m.phi))
        .collect::<Result<_>>()?;
    Ok(ResidualSet {
        kind: ResidualKind::Swr1,
        values,
    })
}

pub fn swr2(m: &FittedModel, d: &Dataset, h: &HatDiagnostics) -> Result<ResidualSet> {
    let r1 = swr1(m, d)?;
    if h.leverages.len() != d.n() {
        return Err(input("leverage vector has the wrong length"));
    }
    let values = r1
        .values
        .iter()
        .zip(&h.leverages)
        .map(|(&r, &hii)| {
            if !(hii < 1.0) {
                return Err(numerical(format!("leverage {hii} is not below 1")));
            }
            Ok(r / (1.0 - hii).sqrt())
        })
        .collect::<Result<_>>()?;
    Ok(ResidualSet {
        kind: ResidualKind::Swr2,
        values,
    })
}

pub fn quantile_residual(m: &FittedModel, d: &Dataset) -> Result<ResidualSet> {
    check_sizes(m, d)?;
    let values = d
        .y()
        .iter()
        .zip(&m.mu)
        .map(|(&y, &mu)| quantile_value(y, mu, m.phi))
        .collect::<Result<_>>()?;
    Ok(ResidualSet {
        kind: ResidualKind::Quantile,
        values,
    })
}

/// Residuals of one kind; leverages are computed when needed.
pub fn compute(m: &FittedModel, d: &Dataset, kind: ResidualKind) -> Result<ResidualSet> {
    match kind {
        ResidualKind::Swr1 => swr1(m, d),
        ResidualKind::Swr2 => swr2(m, d, &hat_diagnostics(m, d)?),
        ResidualKind::Quantile => quantile_residual(m, d),
    }
}

/// Residuals of several kinds, sharing one hat-matrix factorization.
pub fn compute_many(m: &FittedModel, d: &Dataset, kinds: &[ResidualKind]) -> Result<Vec<ResidualSet>> {
    let hat = if kinds.contains(&ResidualKind::Swr2) {
        Some(hat_diagnostics(m, d)?)
    } else {
        None
    };
    kinds
        .iter()
        .map(|&kind| match (kind, &hat) {
            (ResidualKind::Swr2, Some(h)) => swr2(m, d, h),
            _ => compute(m, d, kind),
        })
        .collect()
}
