//! Acceptance suite. Each criterion prints one `[PASS]` or `[FAIL]` line;
//! the process exits nonzero if any criterion fails.

#[path = "../../core/tests/support/quadrature.rs"]
mod quadrature;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use betadiag::betadist::{sample, BetaParams, Link};
use betadiag::fit::{fit_mle, hat_diagnostics, hat_weights, log_likelihood, score, Dataset, FitOptions, FittedModel};
use betadiag::gof::{anderson_darling, AD_CRITICAL_5PCT};
use betadiag::par::{map_indexed, Execution};
use betadiag::residuals::{compute, quantile_value, ResidualKind};
use betadiag::rng::rng_stream;
use betadiag::simstudy::{builtin_scenario, generate_design, run_study, ScenarioId, StudyOptions, StudySummary};
use betadiag::specfun::{digamma, reg_inc_beta, trigamma};
use betadiag::{half_normal_envelope, EnvelopeOptions};
use betadiag_cli::{run, DEFAULT_SEED};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn simulate(x: &DMatrix<f64>, mu: &[f64], phi: f64, seed: u64, stream: u64) -> Dataset {
    let mut rng = rng_stream(seed, stream);
    let y = mu.iter().map(|&m| sample(BetaParams::new(m, phi).unwrap(), &mut rng)).collect();
    let names = (0..x.ncols()).map(|j| format!("x{}", j + 1)).collect();
    Dataset::new(y, x.clone(), names).unwrap()
}

fn scenario_fit(id: ScenarioId, n: usize, seed: u64) -> (Dataset, FittedModel) {
    let spec = builtin_scenario(id, 10.0, n, Link::Logit, seed).unwrap();
    let x = generate_design(&spec);
    let d = simulate(&x, &spec.true_mu(&x), spec.phi, seed, 1);
    let m = fit_mle(&d, Link::Logit, &FitOptions::default()).unwrap();
    (d, m)
}

fn study(id: ScenarioId, phi: f64, n: usize, link: Link, seed: u64) -> StudySummary {
    let spec = builtin_scenario(id, phi, n, link, seed).unwrap();
    run_study(&spec, 5000, &ResidualKind::ALL, &StudyOptions::default()).unwrap()
}

fn within(elapsed: Duration, budget_secs: u64) -> bool {
    elapsed.as_secs_f64() < budget_secs as f64
}

fn ac1(start: Instant) -> Outcome {
    let mut worst_beta = 0.0f64;
    for mu in [0.02, 0.2, 0.5, 0.8, 0.98] {
        for phi in [2.0, 10.0, 100.0] {
            let (a, b) = (mu * phi, (1.0 - mu) * phi);
            for y in [1e-4, 0.01, 0.05, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95, 0.99, 0.9999] {
                let err = (reg_inc_beta(y, a, b).unwrap() - quadrature::reg_inc_beta_oracle(y, a, b)).abs();
                worst_beta = worst_beta.max(err);
            }
        }
    }
    let mut worst_rec = 0.0f64;
    for i in 0..=120 {
        let x = 10f64.powf(-2.0 + 6.0 * i as f64 / 120.0);
        let d = digamma(x + 1.0).unwrap() - digamma(x).unwrap() - 1.0 / x;
        let t = trigamma(x + 1.0).unwrap() - trigamma(x).unwrap() + 1.0 / (x * x);
        worst_rec = worst_rec.max(d.abs()).max(t.abs());
    }
    let secs = start.elapsed();
    outcome(
        worst_beta < 1e-8 && worst_rec < 1e-9 && within(secs, 10),
        format!("max |I - oracle| {worst_beta:.2e}, max recurrence error {worst_rec:.2e}"),
    )
}

fn ac2(start: Instant) -> Outcome {
    let (d, _) = scenario_fit(ScenarioId::II, 40, DEFAULT_SEED);
    let mut rng = rng_stream(DEFAULT_SEED, 2);
    let mut worst = 0.0f64;
    for point in 0..20 {
        let link = if point % 2 == 0 { Link::Logit } else { Link::Cloglog };
        let mut theta: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        theta.push(rng.random_range(0.5f64..5.0).exp());
        let analytic = score(&d, link, &theta[..3], theta[3]).unwrap();
        let f = |t: &[f64]| log_likelihood(&d, link, &t[..3], t[3]).unwrap();
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for j in 0..4 {
            let central = |h: f64| {
                let (mut up, mut down) = (theta.clone(), theta.clone());
                up[j] += h;
                down[j] -= h;
                (f(&up) - f(&down)) / (2.0 * h)
            };
            let h = 1e-3 * theta[j].abs().max(1.0);
            let fd = (4.0 * central(h / 2.0) - central(h)) / 3.0;
            num = num.max((analytic[j] - fd).abs());
            den = den.max(fd.abs());
        }
        worst = worst.max(num / den);
    }
    outcome(worst < 1e-6 && within(start.elapsed(), 10), format!("max relative error {worst:.2e}"))
}

fn ac3(start: Instant) -> Outcome {
    let x = DMatrix::from_element(1000, 1, 1.0);
    let eta = Link::Logit.eta(0.3);
    let fits: Vec<Option<(f64, f64)>> = map_indexed(Execution::Parallel, 200, |r| {
        let d = simulate(&x, &[0.3; 1000], 50.0, DEFAULT_SEED, 1000 + r as u64);
        let start = Some((vec![eta], 50.0));
        let m = fit_mle(&d, Link::Logit, &FitOptions { start, ..Default::default() }).ok()?;
        m.converged().then(|| (m.mu[0], m.phi))
    });
    let ok: Vec<(f64, f64)> = fits.into_iter().flatten().collect();
    let n = ok.len() as f64;
    let mu = ok.iter().map(|f| f.0).sum::<f64>() / n;
    let phi = ok.iter().map(|f| f.1).sum::<f64>() / n;
    outcome(
        ok.len() == 200 && (mu - 0.3).abs() <= 0.005 && (phi - 50.0).abs() <= 3.0 && within(start.elapsed(), 120),
        format!("{} of 200 converged, mean mu {mu:.5}, mean phi {phi:.3}", ok.len()),
    )
}

fn ac4(_: Instant) -> Outcome {
    let (d, m) = scenario_fit(ScenarioId::II, 16, DEFAULT_SEED);
    let h = hat_diagnostics(&m, &d).unwrap();
    let w = hat_weights(&m);
    let sw = DMatrix::from_diagonal(&DVector::from_iterator(16, w.iter().map(|v| v.sqrt())));
    let z = &sw * d.x();
    let dense = &z * (z.transpose() * &z).try_inverse().unwrap() * z.transpose();
    let idem = (&dense * &dense - &dense).amax();
    let trace: f64 = h.leverages.iter().sum();
    let inside = h.leverages.iter().all(|v| *v > 0.0 && *v < 1.0);
    outcome(
        (trace - 3.0).abs() < 1e-8 && inside && idem < 1e-8,
        format!("trace {trace:.12}, all h in (0,1): {inside}, max|H^2-H| {idem:.2e}"),
    )
}

fn ac5(start: Instant) -> Outcome {
    let (mu, phi) = (0.3, 10.0);
    let p = BetaParams::new(mu, phi).unwrap();
    let below: Vec<bool> = map_indexed(Execution::Parallel, 100, |t| {
        let mut rng = rng_stream(DEFAULT_SEED, 10_000 + t as u64);
        let r: Vec<f64> = (0..100_000).map(|_| quantile_value(sample(p, &mut rng), mu, phi).unwrap()).collect();
        anderson_darling(&r).unwrap() < AD_CRITICAL_5PCT
    });
    let count = below.iter().filter(|b| **b).count();
    outcome(count >= 90 && within(start.elapsed(), 60), format!("{count} of 100 trials below {AD_CRITICAL_5PCT}"))
}

fn ac6(_: Instant) -> Outcome {
    let a = anderson_darling(&[-1.0, 0.0, 1.0]).unwrap();
    outcome((a - 0.1895).abs() <= 1e-4, format!("A^2 = {a:.6}"))
}

/// Mean over observations of |variance - 1| for one kind.
fn mean_var_gap(s: &StudySummary, kind: ResidualKind) -> f64 {
    let k = s.kind_index(kind).unwrap();
    s.observations.iter().map(|o| (o.cells[k].variance - 1.0).abs()).sum::<f64>() / s.observations.len() as f64
}

fn ac7(start: Instant) -> Outcome {
    let s = study(ScenarioId::I, 10.0, 16, Link::Logit, DEFAULT_SEED);
    let q = s.mean_ad(ResidualKind::Quantile).unwrap();
    let r1 = s.mean_ad(ResidualKind::Swr1).unwrap();
    let g1 = mean_var_gap(&s, ResidualKind::Swr1);
    let g2 = mean_var_gap(&s, ResidualKind::Swr2);
    outcome(
        q < 25.0 && r1 > 50.0 && g2 > g1 && within(start.elapsed(), 600),
        format!(
            "mean AD quantile {q:.2} (<25: {}), swr1 {r1:.2} (>50: {}), mean |var-1| swr2 {g2:.3} vs swr1 {g1:.3} (swr2 farther: {})",
            q < 25.0,
            r1 > 50.0,
            g2 > g1
        ),
    )
}

fn ac8(start: Instant) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in [DEFAULT_SEED, 2, 3] {
        let small = study(ScenarioId::V, 10.0, 16, Link::Logit, seed).mean_ad(ResidualKind::Quantile).unwrap();
        let large = study(ScenarioId::V, 10.0, 40, Link::Logit, seed).mean_ad(ResidualKind::Quantile).unwrap();
        pass &= large < small;
        parts.push(format!("seed {seed}: n=40 {large:.2} vs n=16 {small:.2}"));
    }
    outcome(pass && within(start.elapsed(), 900), parts.join("; "))
}

fn ac9(_: Instant) -> Outcome {
    let s = study(ScenarioId::II, 10.0, 16, Link::Logit, DEFAULT_SEED);
    let mut failures = Vec::new();
    let mut parts = Vec::new();
    for kind in ResidualKind::ALL {
        let k = s.kind_index(kind).unwrap();
        let cells: Vec<_> = s.observations.iter().map(|o| o.cells[k]).collect();
        let max_mean = cells.iter().fold(0.0f64, |m, c| m.max(c.mean.abs()));
        let (vlo, vhi) = cells
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c.variance), hi.max(c.variance)));
        if max_mean > 0.05 {
            failures.push(format!("{kind} |mean| {max_mean:.3}"));
        }
        if vlo < 0.7 || vhi > 1.25 {
            failures.push(format!("{kind} variance [{vlo:.3}, {vhi:.3}]"));
        }
        parts.push(format!("{kind}: max|mean| {max_mean:.3}, var [{vlo:.3}, {vhi:.3}]"));
        if kind == ResidualKind::Quantile {
            let skew = cells.iter().fold(0.0f64, |m, c| m.max(c.skewness.unwrap().abs()));
            let (klo, khi) = cells.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                let k = c.kurtosis.unwrap();
                (lo.min(k), hi.max(k))
            });
            if skew > 0.15 || klo < 2.3 || khi > 2.9 {
                failures.push(format!("quantile shape skew {skew:.3} kurt [{klo:.3}, {khi:.3}]"));
            }
            parts.push(format!("max|skew| {skew:.3}, kurtosis [{klo:.3}, {khi:.3}]"));
        }
    }
    if !failures.is_empty() {
        parts.push(format!("out of range: {}", failures.join(", ")));
    }
    outcome(failures.is_empty(), parts.join("; "))
}

fn ac10(_: Instant) -> Outcome {
    let s = study(ScenarioId::I, 10.0, 40, Link::Cloglog, DEFAULT_SEED);
    let cal = s.scenario.calibration.as_ref().unwrap();
    let rel = |a: f64, t: f64| ((a - t) / t).abs();
    let errs = [
        rel(cal.achieved.mean, cal.target.mean),
        rel(cal.achieved.sd, cal.target.sd),
        rel(cal.achieved.min, cal.target.min),
        rel(cal.achieved.max, cal.target.max),
    ];
    let worst = errs.iter().fold(0.0f64, |m, e| m.max(*e));
    let q = s.mean_ad(ResidualKind::Quantile).unwrap();
    let r1 = s.mean_ad(ResidualKind::Swr1).unwrap();
    outcome(
        worst < 0.05 && q < r1,
        format!("max mu-summary relative error {worst:.4}, mean AD quantile {q:.2} vs swr1 {r1:.2}"),
    )
}

fn ac11(_: Instant) -> Outcome {
    let opts = EnvelopeOptions::default();
    let mut hits = 0;
    let mut parts = Vec::new();
    for seed in 1..=10u64 {
        let (d, m) = scenario_fit(ScenarioId::I, 160, seed);
        let r1 = compute(&m, &d, ResidualKind::Swr1).unwrap();
        let rq = compute(&m, &d, ResidualKind::Quantile).unwrap();
        let min1 = r1.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let minq = rq.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let out1 = half_normal_envelope(&m, &d, ResidualKind::Swr1, seed, &opts).unwrap().points_outside;
        let outq = half_normal_envelope(&m, &d, ResidualKind::Quantile, seed, &opts).unwrap().points_outside;
        let hit = min1 < -3.0 && minq > -3.5 && outq < out1;
        hits += usize::from(hit);
        parts.push(format!("{seed}:{}", if hit { "y" } else { "n" }));
        if !hit {
            parts.push(format!("(min swr1 {min1:.2}, min q {minq:.2}, outside {out1}/{outq})"));
        }
    }
    outcome(hits >= 7, format!("{hits} of 10 seeds [{}]", parts.join(" ")))
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn ac12(_: Instant) -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let (d, _) = scenario_fit(ScenarioId::II, 40, DEFAULT_SEED);
    let mut csv = String::from("y,x2,x3\n");
    for i in 0..d.n() {
        csv += &format!("{:.17e},{:.17e},{:.17e}\n", d.y()[i], d.x()[(i, 1)], d.x()[(i, 2)]);
    }
    let input = tmp.path().join("data.csv");
    fs::write(&input, csv).unwrap();
    let input = input.to_str().unwrap().to_string();

    let mut outputs = Vec::new();
    for (label, threads) in [("a", "1"), ("b", "1"), ("c", "4")] {
        let sim = tmp.path().join(format!("sim_{label}"));
        let env = tmp.path().join(format!("env_{label}"));
        let mut sink = Vec::new();
        let mut err = Vec::new();
        let c1 = run(
            ["betadiag", "simulate", "--reps", "1000", "--threads", threads, "--output", sim.to_str().unwrap()],
            &mut sink,
            &mut err,
        );
        let c2 = run(
            ["betadiag", "envelope", "--input", &input, "--threads", threads, "--output", env.to_str().unwrap()],
            &mut sink,
            &mut err,
        );
        if c1 != 0 || c2 != 0 {
            return outcome(false, format!("exit codes {c1}/{c2}: {}", String::from_utf8_lossy(&err)));
        }
        outputs.push((dir_bytes(&sim), dir_bytes(&env)));
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    let files = outputs[0].0.len() + outputs[0].1.len();
    outcome(same, format!("{files} files compared over two runs at 1 thread and one at 4 threads"))
}

fn main() -> ExitCode {
    // libtest-style arguments such as --nocapture are accepted and ignored
    let criteria: [(&str, fn(Instant) -> Outcome); 12] = [
        ("AC1 special functions vs quadrature", ac1),
        ("AC2 score vs finite differences", ac2),
        ("AC3 intercept-only MLE consistency", ac3),
        ("AC4 hat matrix properties", ac4),
        ("AC5 probability integral transform", ac5),
        ("AC6 Anderson-Darling worked value", ac6),
        ("AC7 Scenario I residual ordering", ac7),
        ("AC8 Scenario V sample-size effect", ac8),
        ("AC9 Scenario II moment ranges", ac9),
        ("AC10 cloglog calibration", ac10),
        ("AC11 misfit illustration", ac11),
        ("AC12 determinism", ac12),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check(start);
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!("[{tag}] {name}: {} ({:.1}s)", o.detail, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
