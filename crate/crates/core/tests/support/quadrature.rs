//! Adaptive Gauss–Legendre quadrature, used as an independent oracle for
//! the incomplete beta function and the beta density normalizer.

#![allow(dead_code)]

const ORDER: usize = 20;

/// Nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

pub struct Integrator {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    rel_tol: f64,
}

impl Default for Integrator {
    fn default() -> Self {
        let (nodes, weights) = gauss_legendre(ORDER);
        Self {
            nodes,
            weights,
            rel_tol: 1e-14,
        }
    }
}

impl Integrator {
    fn panel<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
    }

    fn adapt<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64, whole: f64, depth: usize) -> f64 {
        let m = 0.5 * (a + b);
        let left = self.panel(f, a, m);
        let right = self.panel(f, m, b);
        let both = left + right;
        if depth == 0 || (both - whole).abs() <= self.rel_tol * both.abs().max(1e-300) {
            return both;
        }
        self.adapt(f, a, m, left, depth - 1) + self.adapt(f, m, b, right, depth - 1)
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let whole = self.panel(&f, a, b);
        self.adapt(&f, a, b, whole, 60)
    }
}

/// ∫_0^c t^{a−1}(1−t)^{b−1} dt for c ≤ 1/2. When a < 1 the substitution
/// t = s^{1/a} removes the endpoint singularity.
fn left_piece(q: &Integrator, c: f64, a: f64, b: f64) -> f64 {
    if a < 1.0 {
        q.integrate(|s| ((b - 1.0) * (-(s.powf(1.0 / a))).ln_1p()).exp(), 0.0, c.powf(a)) / a
    } else {
        q.integrate(|t| ((a - 1.0) * t.ln() + (b - 1.0) * (-t).ln_1p()).exp(), 0.0, c)
    }
}

/// B(a, b) = ∫_0^1 t^{a−1}(1−t)^{b−1} dt by quadrature.
pub fn beta_total(a: f64, b: f64) -> f64 {
    let q = Integrator::default();
    left_piece(&q, 0.5, a, b) + left_piece(&q, 0.5, b, a)
}

/// I_y(a, b) with the normalizer also obtained by quadrature.
pub fn reg_inc_beta_oracle(y: f64, a: f64, b: f64) -> f64 {
    let q = Integrator::default();
    let total = left_piece(&q, 0.5, a, b) + left_piece(&q, 0.5, b, a);
    if y <= 0.5 {
        left_piece(&q, y, a, b) / total
    } else {
        1.0 - left_piece(&q, 1.0 - y, b, a) / total
    }
}
