//! The beta distribution in its mean/precision form and the link functions
//! connecting the mean to a linear predictor.
//!
//! With mean `mu` and precision `phi` the usual shape parameters are
//! `a = mu·phi` and `b = (1 − mu)·phi`, giving `E(y) = mu` and
//! `Var(y) = mu(1 − mu)/(1 + phi)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{domain, input, Error, Result};
use crate::specfun::{inc_beta_tails, ln_gamma_unchecked};

/// Samples that land exactly on 0 or 1 are moved this far inside.
pub const SAMPLE_NUDGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    mu: f64,
    phi: f64,
}

impl BetaParams {
    pub fn new(mu: f64, phi: f64) -> Result<Self> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(domain(format!("beta mean must lie in (0,1), got {mu}")));
        }
        if !(phi > 0.0 && phi.is_finite()) {
            return Err(domain(format!("beta precision must be positive, got {phi}")));
        }
        Ok(Self { mu, phi })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Shape pair `(mu·phi, (1 − mu)·phi)`.
    pub fn shapes(&self) -> (f64, f64) {
        (self.mu * self.phi, (1.0 - self.mu) * self.phi)
    }
}

/// Log-density of `y` under Beta(mu, phi).
pub fn log_density(y: f64, p: BetaParams) -> Result<f64> {
    if !(y > 0.0 && y < 1.0) {
        return Err(domain(format!("beta density requires 0 < y < 1, got {y}")));
    }
    Ok(log_density_unchecked(y, p.mu, p.phi))
}

pub(crate) fn log_density_unchecked(y: f64, mu: f64, phi: f64) -> f64 {
    let a = mu * phi;
    let b = (1.0 - mu) * phi;
    ln_gamma_unchecked(phi) - ln_gamma_unchecked(a) - ln_gamma_unchecked(b)
        + (a - 1.0) * y.ln()
        + (b - 1.0) * (-y).ln_1p()
}

/// `(mean, variance)` of Beta(mu, phi).
pub fn moments(p: BetaParams) -> (f64, f64) {
    (p.mu, p.mu * (1.0 - p.mu) / (1.0 + p.phi))
}

/// CDF of Beta(mu, phi) at `y ∈ [0, 1]`.
pub fn cdf(y: f64, p: BetaParams) -> Result<f64> {
    cdf_tails(y, p).map(|(lower, _)| lower)
}

/// `(F(y), 1 − F(y))`, each accurate in its own tail.
pub fn cdf_tails(y: f64, p: BetaParams) -> Result<(f64, f64)> {
    let (a, b) = p.shapes();
    inc_beta_tails(y, a, b)
}

/// One draw from Beta(mu, phi) as a ratio of two unit-scale gamma variates.
///
/// The result is always strictly inside (0, 1).
pub fn sample<R: Rng + ?Sized>(p: BetaParams, rng: &mut R) -> f64 {
    let (a, b) = p.shapes();
    // Shapes are finite and positive by construction of BetaParams.
    let ga = Gamma::new(a, 1.0).expect("positive gamma shape");
    let gb = Gamma::new(b, 1.0).expect("positive gamma shape");
    loop {
        let x = ga.sample(rng);
        let z = gb.sample(rng);
        let y = x / (x + z);
        if y.is_nan() {
            // both variates underflowed to zero
            continue;
        }
        return if y <= 0.0 {
            SAMPLE_NUDGE
        } else if y >= 1.0 {
            1.0 - SAMPLE_NUDGE
        } else {
            y
        };
    }
}

/// Link function `g` mapping the mean in (0, 1) onto the real line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    #[default]
    Logit,
    /// Complementary log-log.
    Cloglog,
}

/// Which of the three link maps to evaluate in [`link_eval`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkDirection {
    Forward,
    Inverse,
    Derivative,
}

impl Link {
    /// g(mu)
    pub fn eta(self, mu: f64) -> f64 {
        match self {
            Link::Logit => mu.ln() - (-mu).ln_1p(),
            Link::Cloglog => (-(-mu).ln_1p()).ln(),
        }
    }

    /// g⁻¹(eta)
    pub fn mu(self, eta: f64) -> f64 {
        match self {
            Link::Logit => 1.0 / (1.0 + (-eta).exp()),
            Link::Cloglog => -(-eta.exp()).exp_m1(),
        }
    }

    /// g′(mu)
    pub fn deriv(self, mu: f64) -> f64 {
        match self {
            Link::Logit => 1.0 / (mu * (1.0 - mu)),
            Link::Cloglog => 1.0 / (-(1.0 - mu) * (-mu).ln_1p()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Link::Logit => "logit",
            Link::Cloglog => "cloglog",
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logit" => Ok(Link::Logit),
            "cloglog" => Ok(Link::Cloglog),
            other => Err(input(format!("unknown link '{other}' (expected logit or cloglog)"))),
        }
    }
}

/// Evaluates one of the link maps with domain checking.
pub fn link_eval(link: Link, direction: LinkDirection, v: f64) -> Result<f64> {
    match direction {
        LinkDirection::Forward | LinkDirection::Derivative => {
            if !(v > 0.0 && v < 1.0) {
                return Err(domain(format!("{link} link requires a mean in (0,1), got {v}")));
            }
        }
        LinkDirection::Inverse => {
            if v.is_nan() {
                return Err(domain("linear predictor is NaN"));
            }
        }
    }
    Ok(match direction {
        LinkDirection::Forward => link.eta(v),
        LinkDirection::Inverse => link.mu(v),
        LinkDirection::Derivative => link.deriv(v),
    })
}
