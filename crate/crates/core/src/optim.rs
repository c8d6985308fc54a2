//! Dense BFGS minimizer with Armijo backtracking.
//!
//! The objective returns `None` for points where it cannot be evaluated
//! (non-finite intermediates, infeasible parameters); the line search treats
//! those as rejected trial steps.

use crate::error::{numerical, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop when the sup-norm of the gradient falls below this.
    pub grad_tol: f64,
    /// Stop when `|Δf| <= rel_f_tol · max(|f|, 1)` after an accepted step.
    pub rel_f_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-6,
            rel_f_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Gradient,
    FunctionChange,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub reason: StopReason,
    /// Objective value after each accepted step, starting point first.
    pub trace: Vec<f64>,
}

pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `objective` from `x0`.
///
/// Fails only if the objective cannot be evaluated at `x0`.
pub fn minimize<F>(mut objective: F, x0: &[f64], opts: &BfgsOptions) -> Result<BfgsResult>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    const ARMIJO: f64 = 1e-4;
    const MAX_HALVINGS: usize = 60;

    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut f, mut g) = objective(&x)
        .ok_or_else(|| numerical("objective is not finite at the starting point"))?;
    let mut h = identity(n);
    let mut scaled = false;
    let mut trace = vec![f];
    let mut reason = StopReason::MaxIterations;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if sup_norm(&g) < opts.grad_tol {
            reason = StopReason::Gradient;
            break;
        }
        let mut p = mat_vec(&h, &g, n);
        p.iter_mut().for_each(|v| *v = -*v);
        let mut slope = dot(&g, &p);
        if slope >= 0.0 || !slope.is_finite() {
            h = identity(n);
            scaled = false;
            p = g.iter().map(|v| -v).collect();
            slope = dot(&g, &p);
        }
        let mut alpha = if scaled { 1.0 } else { (1.0 / sup_norm(&p)).min(1.0) };

        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + alpha * pi).collect();
            if let Some((ft, gt)) = objective(&trial) {
                if ft.is_finite() && ft <= f + ARMIJO * alpha * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            reason = StopReason::LineSearchFailed;
            break;
        };
        iterations += 1;

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * yy.sqrt() {
            if !scaled {
                let gamma = sy / yy;
                h.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..n {
                    h[i * n + i] = gamma;
                }
                scaled = true;
            }
            bfgs_update(&mut h, &s, &y, sy, n);
        }

        let change = (f - fnew).abs();
        let scale = f.abs().max(1.0);
        x = xn;
        f = fnew;
        g = gn;
        trace.push(f);
        if sup_norm(&g) < opts.grad_tol {
            reason = StopReason::Gradient;
            break;
        }
        if change <= opts.rel_f_tol * scale {
            reason = StopReason::FunctionChange;
            break;
        }
    }

    Ok(BfgsResult {
        x,
        f,
        grad: g,
        iterations,
        reason,
        trace,
    })
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

fn mat_vec(m: &[f64], v: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], v)).collect()
}

/// H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ with ρ = 1/(sᵀy).
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64, n: usize) {
    let hy = mat_vec(h, y, n);
    let yhy = dot(y, &hy);
    let coef = (sy + yhy) / (sy * sy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += coef * s[i] * s[j] - (hy[i] * s[j] + s[i] * hy[j]) / sy;
        }
    }
}
