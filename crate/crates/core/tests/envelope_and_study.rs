use betadiag::betadist::{sample, BetaParams, Link};
use betadiag::envelope::{half_normal_envelope, EnvelopeOptions};
use betadiag::fit::{fit_mle, Dataset, FitOptions, FittedModel};
use betadiag::par::{with_threads, Execution};
use betadiag::residuals::ResidualKind;
use betadiag::rng::rng_stream;
use betadiag::simstudy::{builtin_scenario, design_fingerprint, generate_design, run_study, ScenarioId, StudyOptions};

fn fitted(id: ScenarioId, n: usize, seed: u64) -> (Dataset, FittedModel) {
    let spec = builtin_scenario(id, 10.0, n, Link::Logit, seed).unwrap();
    let x = generate_design(&spec);
    let mut rng = rng_stream(seed, 9);
    let y = spec.true_mu(&x).iter().map(|&m| sample(BetaParams::new(m, 10.0).unwrap(), &mut rng)).collect();
    let d = Dataset::new(y, x, vec!["1".into(), "x2".into(), "x3".into()]).unwrap();
    let m = fit_mle(&d, Link::Logit, &FitOptions::default()).unwrap();
    (d, m)
}

fn envelope_opts(n_sim: usize, execution: Execution) -> EnvelopeOptions {
    EnvelopeOptions {
        n_sim,
        execution,
        ..Default::default()
    }
}

#[test]
fn envelope_is_deterministic_across_execution_modes() {
    let (d, m) = fitted(ScenarioId::II, 40, 2);
    let serial = half_normal_envelope(&m, &d, ResidualKind::Quantile, 99, &envelope_opts(40, Execution::Serial)).unwrap();
    for threads in [1, 3] {
        let par = with_threads(Some(threads), || {
            half_normal_envelope(&m, &d, ResidualKind::Quantile, 99, &envelope_opts(40, Execution::Parallel)).unwrap()
        });
        assert_eq!(serial, par);
    }
    let other = half_normal_envelope(&m, &d, ResidualKind::Quantile, 100, &envelope_opts(40, Execution::Serial)).unwrap();
    assert_ne!(serial.lower, other.lower);
}

#[test]
fn envelope_shape() {
    let (d, m) = fitted(ScenarioId::I, 16, 3);
    let e = half_normal_envelope(&m, &d, ResidualKind::Swr2, 1, &envelope_opts(19, Execution::Serial)).unwrap();
    assert!(e.abs_residuals_sorted.windows(2).all(|w| w[0] <= w[1]));
    assert!(e.expected_halfnormal.windows(2).all(|w| w[0] < w[1]));
    for i in 0..16 {
        assert!(e.lower[i] <= e.median[i] && e.median[i] <= e.upper[i]);
    }
    assert!(half_normal_envelope(&m, &d, ResidualKind::Swr2, 1, &envelope_opts(0, Execution::Serial)).is_err());
}

#[test]
fn more_simulations_widen_the_band() {
    let mut wider = 0;
    let trials = 20;
    for seed in 0..trials {
        let (d, m) = fitted(ScenarioId::II, 40, 200 + seed);
        let width = |n_sim| {
            let e = half_normal_envelope(&m, &d, ResidualKind::Quantile, seed, &envelope_opts(n_sim, Execution::Parallel)).unwrap();
            e.upper.iter().zip(&e.lower).map(|(u, l)| u - l).sum::<f64>() / 40.0
        };
        if width(99) >= width(19) {
            wider += 1;
        }
    }
    assert!(wider as f64 >= 0.9 * trials as f64, "{wider}/{trials}");
}

#[test]
fn correct_model_rarely_leaves_the_band() {
    let trials = 50;
    let n = 40;
    let total: usize = (0..trials)
        .map(|seed| {
            let (d, m) = fitted(ScenarioId::II, n, 500 + seed);
            half_normal_envelope(&m, &d, ResidualKind::Quantile, seed, &envelope_opts(99, Execution::Parallel))
                .unwrap()
                .points_outside
        })
        .sum();
    let avg = total as f64 / trials as f64;
    assert!(avg <= 0.15 * n as f64, "average outside {avg}");
}

#[test]
fn study_serial_and_parallel_agree() {
    let spec = builtin_scenario(ScenarioId::III, 10.0, 16, Link::Logit, 12).unwrap();
    let run = |execution| {
        run_study(&spec, 200, &ResidualKind::ALL, &StudyOptions { execution, ..Default::default() }).unwrap()
    };
    let serial = run(Execution::Serial);
    let parallel = with_threads(Some(4), || run(Execution::Parallel));
    assert_eq!(serial, parallel);
    assert_eq!(serial.row_count(), 18);
}

#[test]
fn design_is_fixed_per_seed() {
    for id in ScenarioId::ALL {
        let a = builtin_scenario(id, 10.0, 16, Link::Logit, 7).unwrap();
        let b = builtin_scenario(id, 100.0, 16, Link::Logit, 7).unwrap();
        let c = builtin_scenario(id, 10.0, 16, Link::Logit, 8).unwrap();
        let fa = design_fingerprint(&generate_design(&a));
        assert_eq!(fa, design_fingerprint(&generate_design(&b)));
        assert_ne!(fa, design_fingerprint(&generate_design(&c)));
        let s = run_study(&a, 20, &[ResidualKind::Swr1], &StudyOptions::default()).unwrap();
        assert_eq!(s.design_fingerprint, fa);
    }
}

const SEEDS: [u64; 3] = [314159, 2, 3];

fn mean_ads(id: ScenarioId, phi: f64, n: usize, seed: u64) -> Vec<f64> {
    let spec = builtin_scenario(id, phi, n, Link::Logit, seed).unwrap();
    let s = run_study(&spec, 5000, &ResidualKind::ALL, &StudyOptions::default()).unwrap();
    ResidualKind::ALL.iter().map(|k| s.mean_ad(*k).unwrap()).collect()
}

#[test]
fn higher_precision_does_not_hurt_normality() {
    for seed in SEEDS {
        for id in ScenarioId::ALL {
            let low = mean_ads(id, 10.0, 16, seed);
            let high = mean_ads(id, 100.0, 16, seed);
            for (k, (l, h)) in ResidualKind::ALL.iter().zip(low.iter().zip(&high)) {
                assert!(*h <= 1.2 * l, "{id} {} seed {seed}: phi=100 {h} vs phi=10 {l}", k.name());
            }
        }
    }
}

#[test]
fn larger_samples_help_the_quantile_residual() {
    for seed in SEEDS {
        for id in ScenarioId::ALL {
            for phi in [10.0, 100.0] {
                let small = mean_ads(id, phi, 16, seed)[2];
                let large = mean_ads(id, phi, 40, seed)[2];
                assert!(large < small, "{id} phi {phi} seed {seed}: {large} vs {small}");
            }
        }
    }
}
