//! Maximum-likelihood fitting of the beta regression model
//! `g(mu_i) = x_iᵀβ`, `y_i ~ Beta(mu_i, phi)`.
//!
//! The optimizer works on `(β, ln phi)` by default. The analytic score is
//! always reported on the natural `(β, phi)` scale, and convergence is
//! judged on that score.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::betadist::Link;
use crate::error::{input, numerical, Error, Result};
use crate::optim::{minimize, sup_norm, BfgsOptions, StopReason};
use crate::specfun::{digamma_unchecked, ln_gamma_unchecked, trigamma_unchecked};

/// Ratio below which the smallest eigenvalue of the column-scaled Gram
/// matrix marks the design as rank deficient.
const RANK_TOL: f64 = 1e-13;

pub const INTERCEPT_NAME: &str = "(Intercept)";

/// Responses in (0, 1) together with an `n × k` design matrix.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: Vec<f64>,
    log_y: Vec<f64>,
    log_1my: Vec<f64>,
    x: DMatrix<f64>,
    names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from a response vector and a full design matrix.
    ///
    /// Requires `n > k >= 1`, every `y` strictly inside (0, 1), finite
    /// covariates, and a design of full column rank.
    pub fn new(y: Vec<f64>, x: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        let (n, k) = x.shape();
        if y.len() != n {
            return Err(input(format!("response has {} rows but design has {n}", y.len())));
        }
        if k == 0 {
            return Err(input("design matrix has no columns"));
        }
        if n <= k {
            return Err(input(format!("need more observations than coefficients (n={n}, k={k})")));
        }
        if names.len() != k {
            return Err(input(format!("{} column names for {k} columns", names.len())));
        }
        if let Some(i) = y.iter().position(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(input(format!("response at row {} is {} (must lie in (0,1))", i + 1, y[i])));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(input("design matrix contains non-finite values"));
        }
        check_full_rank(&x, &names)?;
        Ok(Self::assemble(y, x, names))
    }

    /// Intercept column followed by the given named covariates.
    pub fn with_intercept(y: Vec<f64>, covariates: &[(String, Vec<f64>)]) -> Result<Self> {
        let n = y.len();
        let k = covariates.len() + 1;
        if let Some((name, _)) = covariates.iter().find(|(_, c)| c.len() != n) {
            return Err(input(format!("covariate '{name}' length differs from response")));
        }
        let x = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { covariates[j - 1].1[i] });
        let mut names = vec![INTERCEPT_NAME.to_string()];
        names.extend(covariates.iter().map(|(name, _)| name.clone()));
        Self::new(y, x, names)
    }

    fn assemble(y: Vec<f64>, x: DMatrix<f64>, names: Vec<String>) -> Self {
        let log_y = y.iter().map(|v| v.ln()).collect();
        let log_1my = y.iter().map(|v| (-v).ln_1p()).collect();
        Self {
            y,
            log_y,
            log_1my,
            x,
            names,
        }
    }

    /// Same design with a new response vector. Every value must already be
    /// strictly inside (0, 1).
    pub(crate) fn with_response(&self, y: Vec<f64>) -> Self {
        debug_assert!(y.len() == self.n() && y.iter().all(|v| *v > 0.0 && *v < 1.0));
        Self::assemble(y, self.x.clone(), self.names.clone())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// `X·β`
    pub fn linear_predictor(&self, beta: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(beta);
        (&self.x * b).iter().copied().collect()
    }
}

fn check_full_rank(x: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let mut scaled = x.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(input(format!("column '{}' is identically zero", names[j])));
        }
        col /= norm;
    }
    let gram = scaled.transpose() * &scaled;
    let eig = gram.symmetric_eigenvalues();
    let max = eig.max();
    let min = eig.min();
    if !(min > RANK_TOL * max) {
        return Err(input("design matrix is rank deficient (collinear or constant covariate columns)"));
    }
    Ok(())
}

/// Scale on which the precision parameter is optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PrecisionScale {
    #[default]
    Log,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Convergence threshold on the sup-norm of the `(β, phi)` score.
    pub grad_tol: f64,
    /// Relative log-likelihood change that stops the quasi-Newton phase.
    pub rel_loglik_tol: f64,
    pub precision_scale: PrecisionScale,
    /// Optional starting point `(β, phi)`; defaults to least squares on `g(y)`.
    pub start: Option<(Vec<f64>, f64)>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-6,
            rel_loglik_tol: 1e-10,
            precision_scale: PrecisionScale::Log,
            start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    /// Accepted quasi-Newton steps.
    pub iterations: usize,
    /// Newton refinement steps taken after the quasi-Newton phase.
    pub polish_steps: usize,
    pub converged: bool,
    /// Sup-norm of the `(β, phi)` score at the returned estimate.
    pub gradient_norm: f64,
    /// Log-likelihood after each accepted quasi-Newton step.
    pub loglik_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub link: Link,
    pub beta: Vec<f64>,
    pub phi: f64,
    pub mu: Vec<f64>,
    pub eta: Vec<f64>,
    pub loglik: f64,
    pub convergence: Convergence,
}

impl FittedModel {
    pub fn converged(&self) -> bool {
        self.convergence.converged
    }
}

/// Log-likelihood and optionally the `(β, phi)` score in one pass.
/// `None` when any intermediate is not finite.
fn evaluate(d: &Dataset, link: Link, beta: &[f64], phi: f64, want_grad: bool) -> Option<(f64, Vec<f64>)> {
    if !(phi > 0.0 && phi.is_finite()) || beta.iter().any(|b| !b.is_finite()) {
        return None;
    }
    let k = d.k();
    let eta = d.linear_predictor(beta);
    let lg_phi = ln_gamma_unchecked(phi);
    let dg_phi = if want_grad { digamma_unchecked(phi) } else { 0.0 };
    let mut ll = 0.0;
    let mut grad = vec![0.0; if want_grad { k + 1 } else { 0 }];
    for (i, &e) in eta.iter().enumerate() {
        let mu = link.mu(e);
        if !(mu > 0.0 && mu < 1.0) {
            return None;
        }
        let a = mu * phi;
        let b = (1.0 - mu) * phi;
        let (ly, l1y) = (d.log_y[i], d.log_1my[i]);
        ll += lg_phi - ln_gamma_unchecked(a) - ln_gamma_unchecked(b) + (a - 1.0) * ly + (b - 1.0) * l1y;
        if want_grad {
            let dg_b = digamma_unchecked(b);
            let resid = (ly - l1y) - (digamma_unchecked(a) - dg_b);
            let c = phi * resid / link.deriv(mu);
            for (j, gj) in grad.iter_mut().take(k).enumerate() {
                *gj += c * d.x[(i, j)];
            }
            grad[k] += mu * resid + l1y - dg_b + dg_phi;
        }
    }
    if !ll.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return None;
    }
    Some((ll, grad))
}

fn check_params(d: &Dataset, beta: &[f64]) -> Result<()> {
    if beta.len() != d.k() {
        return Err(input(format!("beta has length {} but design has {} columns", beta.len(), d.k())));
    }
    Ok(())
}

/// Σ log f(y_i; g⁻¹(x_iᵀβ), phi)
pub fn log_likelihood(d: &Dataset, link: Link, beta: &[f64], phi: f64) -> Result<f64> {
    check_params(d, beta)?;
    evaluate(d, link, beta, phi, false)
        .map(|(ll, _)| ll)
        .ok_or_else(|| numerical("log-likelihood is not finite at these parameters"))
}

/// Gradient of the log-likelihood in `(β, phi)`; the last entry is ∂ℓ/∂phi.
pub fn score(d: &Dataset, link: Link, beta: &[f64], phi: f64) -> Result<Vec<f64>> {
    check_params(d, beta)?;
    evaluate(d, link, beta, phi, true)
        .map(|(_, g)| g)
        .ok_or_else(|| numerical("score is not finite at these parameters"))
}

/// Least squares of `g(y)` on `X` and the matching moment estimate of phi.
pub fn starting_values(d: &Dataset, link: Link) -> Result<(Vec<f64>, f64)> {
    let (n, k) = (d.n(), d.k());
    let z = DVector::from_iterator(n, d.y.iter().map(|&y| link.eta(y)));
    let xtx = d.x.transpose() * &d.x;
    let xtz = d.x.transpose() * &z;
    let beta = xtx
        .cholesky()
        .ok_or_else(|| numerical("XᵀX is not positive definite"))?
        .solve(&xtz);
    let fitted = &d.x * &beta;
    let resid = &z - &fitted;
    let sigma2 = resid.norm_squared() / (n - k) as f64;
    let mut acc = 0.0;
    for &eta in fitted.iter() {
        let mu = link.mu(eta).clamp(1e-12, 1.0 - 1e-12);
        let var_y = sigma2 / link.deriv(mu).powi(2);
        acc += mu * (1.0 - mu) / var_y;
    }
    let mut phi = acc / n as f64 - 1.0;
    if !phi.is_finite() {
        phi = 1e6;
    }
    Ok((beta.iter().copied().collect(), phi.clamp(1.0, 1e6)))
}

/// Parameter vector used by the optimizer.
struct Coordinates {
    k: usize,
    scale: PrecisionScale,
}

impl Coordinates {
    fn to_theta(&self, beta: &[f64], phi: f64) -> Vec<f64> {
        let mut t = beta.to_vec();
        t.push(match self.scale {
            PrecisionScale::Log => phi.ln(),
            PrecisionScale::Identity => phi,
        });
        t
    }

    fn phi(&self, theta: &[f64]) -> f64 {
        match self.scale {
            PrecisionScale::Log => theta[self.k].exp(),
            PrecisionScale::Identity => theta[self.k],
        }
    }

    /// Negative log-likelihood and its gradient in θ.
    fn objective(&self, d: &Dataset, link: Link, theta: &[f64]) -> Option<(f64, Vec<f64>)> {
        let phi = self.phi(theta);
        let (ll, mut g) = evaluate(d, link, &theta[..self.k], phi, true)?;
        if self.scale == PrecisionScale::Log {
            g[self.k] *= phi;
        }
        g.iter_mut().for_each(|v| *v = -*v);
        Some((-ll, g))
    }
}

/// Fits the model by quasi-Newton maximization of the log-likelihood.
///
/// BFGS stops on a small score or a small relative log-likelihood change;
/// a few Newton steps on a finite-difference Hessian then refine the
/// estimate. `converged` is set only if the final score satisfies
/// `grad_tol`. Non-convergence is reported, not raised.
pub fn fit_mle(d: &Dataset, link: Link, opts: &FitOptions) -> Result<FittedModel> {
    let k = d.k();
    let (beta0, phi0) = match &opts.start {
        Some((b, p)) => {
            check_params(d, b)?;
            (b.clone(), *p)
        }
        None => starting_values(d, link)?,
    };
    let coords = Coordinates {
        k,
        scale: opts.precision_scale,
    };
    let mut theta0 = coords.to_theta(&beta0, phi0);
    if coords.objective(d, link, &theta0).is_none() {
        // Least-squares start can push fitted means onto 0 or 1.
        let (b, p) = intercept_only_start(d, link);
        theta0 = coords.to_theta(&b, p);
    }
    let bfgs = BfgsOptions {
        max_iter: opts.max_iter,
        grad_tol: opts.grad_tol,
        rel_f_tol: opts.rel_loglik_tol,
    };
    let result = minimize(|t| coords.objective(d, link, t), &theta0, &bfgs)?;
    let loglik_trace: Vec<f64> = result.trace.iter().map(|f| -f).collect();

    let mut theta = result.x;
    let mut polish_steps = 0;
    let mut natural = score_norm(d, link, &coords, &theta);
    if natural >= opts.grad_tol && result.reason != StopReason::MaxIterations {
        (theta, polish_steps, natural) = newton_polish(d, link, &coords, theta, opts.grad_tol);
    }

    let phi = coords.phi(&theta);
    let beta = theta[..k].to_vec();
    let eta = d.linear_predictor(&beta);
    let mu: Vec<f64> = eta.iter().map(|&e| link.mu(e)).collect();
    let loglik = log_likelihood(d, link, &beta, phi)?;
    Ok(FittedModel {
        link,
        beta,
        phi,
        mu,
        eta,
        loglik,
        convergence: Convergence {
            iterations: result.iterations,
            polish_steps,
            converged: natural < opts.grad_tol,
            gradient_norm: natural,
            loglik_trace,
        },
    })
}

fn intercept_only_start(d: &Dataset, link: Link) -> (Vec<f64>, f64) {
    let n = d.n() as f64;
    let mean = d.y.iter().sum::<f64>() / n;
    let var = d.y.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let phi = if var > 0.0 { (mean * (1.0 - mean) / var - 1.0).clamp(1.0, 1e6) } else { 1e6 };
    let mut beta = vec![0.0; d.k()];
    beta[0] = link.eta(mean);
    (beta, phi)
}

fn score_norm(d: &Dataset, link: Link, coords: &Coordinates, theta: &[f64]) -> f64 {
    evaluate(d, link, &theta[..coords.k], coords.phi(theta), true)
        .map(|(_, g)| sup_norm(&g))
        .unwrap_or(f64::INFINITY)
}

/// Newton refinement in θ with a central-difference Hessian of the
/// analytic gradient. Steps are kept only while the score shrinks.
fn newton_polish(
    d: &Dataset,
    link: Link,
    coords: &Coordinates,
    mut theta: Vec<f64>,
    grad_tol: f64,
) -> (Vec<f64>, usize, f64) {
    const MAX_STEPS: usize = 20;
    let p = theta.len();
    let mut current = score_norm(d, link, coords, &theta);
    let mut steps = 0;
    while steps < MAX_STEPS && current >= grad_tol {
        let Some((f0, g0)) = coords.objective(d, link, &theta) else { break };
        let Some(hess) = fd_jacobian(|t| coords.objective(d, link, t).map(|(_, g)| g), &theta) else {
            break;
        };
        let hess = symmetrize(hess);
        let Some(step) = hess.lu().solve(&DVector::from_column_slice(&g0)) else { break };
        let mut alpha = 1.0;
        let mut moved = false;
        for _ in 0..20 {
            let trial: Vec<f64> = (0..p).map(|j| theta[j] - alpha * step[j]).collect();
            if let Some((f1, _)) = coords.objective(d, link, &trial) {
                let norm = score_norm(d, link, coords, &trial);
                if norm < current && f1 <= f0 + 1e-12 * f0.abs().max(1.0) {
                    theta = trial;
                    current = norm;
                    moved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
        steps += 1;
    }
    (theta, steps, current)
}

/// Central-difference Jacobian of a vector function.
fn fd_jacobian<F>(f: F, x: &[f64]) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let p = x.len();
    let m = f(x)?.len();
    let mut jac = DMatrix::zeros(m, p);
    let mut xp = x.to_vec();
    for j in 0..p {
        let h = 1e-5 * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let up = f(&xp)?;
        xp[j] = x[j] - h;
        let down = f(&xp)?;
        xp[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    Some(jac)
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Weights and leverages of the weighted projection
/// `H = W^{1/2} X (XᵀWX)⁻¹ Xᵀ W^{1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HatDiagnostics {
    pub weights: Vec<f64>,
    pub leverages: Vec<f64>,
}

/// `w_i = phi · v*_i / g′(mu_i)²` with `v*_i = ψ′(mu_i phi) + ψ′((1 − mu_i) phi)`.
pub fn hat_weights(m: &FittedModel) -> Vec<f64> {
    m.mu
        .iter()
        .map(|&mu| {
            let v = trigamma_unchecked(mu * m.phi) + trigamma_unchecked((1.0 - mu) * m.phi);
            m.phi * v / m.link.deriv(mu).powi(2)
        })
        .collect()
}

/// Leverages from a thin QR factorization of `W^{1/2} X`.
pub fn hat_diagnostics(m: &FittedModel, d: &Dataset) -> Result<HatDiagnostics> {
    if m.mu.len() != d.n() {
        return Err(input("model and dataset sizes differ"));
    }
    let weights = hat_weights(m);
    if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(numerical("non-positive or non-finite working weight"));
    }
    let (n, k) = (d.n(), d.k());
    let z = DMatrix::from_fn(n, k, |i, j| weights[i].sqrt() * d.x[(i, j)]);
    let qr = z.qr();
    let r = qr.r();
    let rmax = (0..k).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if (0..k).any(|j| !(r[(j, j)].abs() > 1e-12 * rmax)) {
        return Err(numerical("XᵀWX is singular"));
    }
    let q = qr.q();
    let leverages = q.row_iter().map(|row| row.norm_squared()).collect();
    Ok(HatDiagnostics { weights, leverages })
}

/// Squared correlation between the fitted linear predictor and `g(y)`.
pub fn pseudo_r2(m: &FittedModel, d: &Dataset) -> Result<f64> {
    let gy: Vec<f64> = d.y.iter().map(|&y| m.link.eta(y)).collect();
    let r = correlation(&m.eta, &gy)
        .ok_or_else(|| Error::UndefinedStatistic("linear predictor or g(y) has zero variance".into()))?;
    Ok((r * r).clamp(0.0, 1.0))
}

fn correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Observed information `−∂²ℓ/∂θ∂θᵀ` in `(β, phi)`, by central differences
/// of the analytic score.
pub fn observed_information(m: &FittedModel, d: &Dataset) -> Result<DMatrix<f64>> {
    let k = d.k();
    let mut theta = m.beta.clone();
    theta.push(m.phi);
    let jac = fd_jacobian(|t| evaluate(d, m.link, &t[..k], t[k], true).map(|(_, g)| g), &theta)
        .ok_or_else(|| numerical("score not finite near the estimate"))?;
    Ok(symmetrize(-jac))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefRow {
    pub term: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
    /// `exp(estimate)`; an odds ratio under the logit link.
    pub exp_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefReport {
    pub rows: Vec<CoefRow>,
    pub phi: f64,
    pub phi_std_error: Option<f64>,
    /// False when the observed information was not positive definite; the
    /// standard errors are then absent.
    pub information_ok: bool,
}

/// Estimates, standard errors from the inverse observed information, and
/// exponentiated estimates.
pub fn coef_report(m: &FittedModel, d: &Dataset) -> Result<CoefReport> {
    let k = d.k();
    let info = observed_information(m, d)?;
    let cov = info.cholesky().map(|c| c.inverse());
    let se = |j: usize| -> Option<f64> {
        cov.as_ref().and_then(|c| {
            let v = c[(j, j)];
            (v > 0.0 && v.is_finite()).then(|| v.sqrt())
        })
    };
    let rows = (0..k)
        .map(|j| CoefRow {
            term: d.names[j].clone(),
            estimate: m.beta[j],
            std_error: se(j),
            exp_estimate: m.beta[j].exp(),
        })
        .collect();
    Ok(CoefReport {
        rows,
        phi: m.phi,
        phi_std_error: se(k),
        information_ok: cov.is_some(),
    })
}
