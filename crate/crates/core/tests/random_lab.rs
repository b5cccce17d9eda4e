#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;

use parimplode::lab::fit_log_log;
use parimplode::random_lab::*;
use parimplode::recurrences::{additive_offsets, martingale_path, run_recurrences};
use parimplode::schedules::{materialize, RandomDist};
use parimplode::{Error, ScheduleSpec};

const UNIFORM: RandomDist = RandomDist::UniformSymmetric { m: 1.0 };

fn ladder() -> Vec<usize> {
    (0..6).map(|j| 200 << j).collect()
}

fn ensemble_csv(threads: usize) -> (Vec<u8>, Vec<u8>) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let ens = pool.install(|| run_ensemble(0.5, UNIFORM, &[64, 128, 256], 50, 7).unwrap());
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_trial_csv(&ens.records, &mut a).unwrap();
    write_summary_csv(&ens.summaries, &mut b).unwrap();
    (a, b)
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let one = ensemble_csv(1);
    assert_eq!(one, ensemble_csv(3));
    let text = String::from_utf8(one.0).unwrap();
    assert_eq!(text.lines().next().unwrap(), TRIAL_CSV_HEADER);
    assert_eq!(text.lines().count(), 1 + 150);
    let summary = String::from_utf8(one.1).unwrap();
    assert_eq!(summary.lines().next().unwrap(), SUMMARY_CSV_HEADER);
}

#[test]
fn trial_records_are_pure() {
    let rule = LambdaRule::default();
    let a = run_trial(0.25, &UNIFORM, 400, 11, 5, rule).unwrap();
    assert_eq!(a, run_trial(0.25, &UNIFORM, 400, 11, 5, rule).unwrap());
    assert_ne!(a, run_trial(0.25, &UNIFORM, 400, 11, 6, rule).unwrap());
    assert!(a.max_identity_residual <= 1e-8);
    assert!(a.q_n.re.is_finite() && a.coeff_err.is_finite());
}

#[test]
fn identity_holds_in_every_trial() {
    for delta in [0.25, 0.5, 1.0] {
        let ens = run_ensemble(delta, UNIFORM, &[200, 800, 3200], 40, 3).unwrap();
        assert!(ens.failures.is_empty());
        for r in &ens.records {
            assert!(r.max_identity_residual <= 1e-8, "{r:?}");
        }
        for s in &ens.summaries {
            assert!(s.exceed_count <= s.trials);
            assert!(s.coeff_exceed_count <= s.trials);
            assert_eq!(s.failed, 0);
        }
    }
}

#[test]
fn martingale_increments_have_small_mean() {
    // d_k carries the mean of eta^2 / N^{2+2 delta}, far below the noise here
    let c = martingale_check(0.5, UNIFORM, 256, 10_000, 1).unwrap();
    assert!(c.max_identity_residual <= 1e-8);
    assert!(c.mean_increment_abs <= 5.0 * c.stderr, "{c:?}");
    let r = martingale_check(0.5, RandomDist::Rademacher, 256, 10_000, 1).unwrap();
    assert!(r.mean_increment_abs <= 5.0 * r.stderr, "{r:?}");
}

#[test]
fn offset_expansion() {
    // d_k = -2 pi eta/N^{2+delta} - eta^2/N^{2+2 delta} + O(1/N^4)
    for n in [100usize, 1000, 10000] {
        for delta in [0.25, 0.5, 1.0] {
            let seqs = materialize(&ScheduleSpec::random(delta, UNIFORM, 2, 0), n).unwrap();
            let d = additive_offsets(&seqs, 2.0 * (PI / n as f64).cos()).unwrap();
            let etas = parimplode::schedules::random_etas(&UNIFORM, 2, 0, n);
            let nf = n as f64;
            for (dk, eta) in d.iter().zip(&etas) {
                let approx = -2.0 * PI * eta / nf.powf(2.0 + delta) - eta * eta / nf.powf(2.0 + 2.0 * delta);
                // plus the rounding of a difference of two O(1) numbers
                let tol = 10.0 / nf.powi(4) + 8.0 * f64::EPSILON;
                assert!((dk.re - approx).abs() <= tol, "N={n} delta={delta}");
            }
        }
    }
}

#[test]
fn degenerate_distribution_is_deterministic() {
    // eta == 0: the schedule is the plain additive one with eps = pi/N
    let ens = run_ensemble(0.5, RandomDist::Zero, &[100, 200, 400], 30, 0).unwrap();
    for s in &ens.summaries {
        assert_eq!(s.median_qn, s.q90_qn);
    }
    assert_eq!(xi_bound(&RandomDist::Zero, 100, 0.5) * 0.0, 0.0);
    let fit = fit_log_log(&ens.summaries.iter().map(|s| (s.n, s.median_qn)).collect::<Vec<_>>()).unwrap();
    assert!(fit.slope < -0.9, "{fit:?}");
}

#[test]
fn bound_with_the_proof_lambda() {
    // exponent N^{delta-1}/M^2: exp(-1) at delta = 1, M = 1
    let rule = LambdaRule::default();
    let b = azuma_tail_bound(rule.lambda(3200, 6400, 1.0), 3200, 6400, 1.0, 1.0);
    assert!((b - (-1.0f64).exp()).abs() < 1e-12);
    let looser = LambdaRule::Proof { factor: 10.0 };
    let b10 = azuma_tail_bound(looser.lambda(3200, 6400, 1.0), 3200, 6400, 1.0, 1.0);
    assert!((b10 - (-100.0f64).exp()).abs() < 1e-50);
}

#[test]
fn exceedance_never_beats_the_bound() {
    // with lambda scaled up the union bound becomes informative
    for factor in [3.0, 6.0] {
        let mut config = EnsembleConfig::new(1.0, UNIFORM, vec![200, 400, 800], 100, 5);
        config.lambda_rule = LambdaRule::Proof { factor };
        let ens = run_ensemble_with(&config).unwrap();
        for row in exceedance_vs_bound(&ens.summaries) {
            assert!(row.within, "factor {factor}: {row:?}");
        }
    }
}

#[test]
fn checkpoint_limits_decay() {
    let mut misses = Vec::new();
    for delta in [0.25, 0.5, 1.0] {
        let ens = run_ensemble(delta, UNIFORM, &ladder(), 200, 7).unwrap();
        let target = -0.5 * (1.0 + delta) + 0.2;
        for (i, name) in CHECKPOINT_NAMES.iter().enumerate() {
            let pairs: Vec<(usize, f64)> = ens.summaries.iter().map(|s| (s.n, s.q90_checkpoints[i])).collect();
            let slope = fit_log_log(&pairs).unwrap().slope;
            if !(slope <= target) {
                misses.push(format!("delta={delta} {name}: {slope:.3} > {target:.3}"));
            }
        }
    }
    assert!(misses.is_empty(), "{}", misses.join("\n"));
}

#[test]
fn quantiles() {
    assert_eq!(nearest_rank(&[3.0, 1.0, 2.0], 0.5), Some(2.0));
    assert_eq!(nearest_rank(&[1.0, 2.0, 3.0, 4.0], 0.5), Some(2.0));
    assert_eq!(nearest_rank(&(1..=10).map(f64::from).collect::<Vec<_>>(), 0.9), Some(9.0));
    assert_eq!(nearest_rank(&[], 0.5), None);
}

#[test]
fn config_validation() {
    assert!(matches!(run_ensemble(0.5, UNIFORM, &[100], 10, 0), Err(Error::InvalidSpec { .. })));
    assert!(matches!(run_ensemble(0.0, UNIFORM, &[100], 30, 0), Err(Error::InvalidSpec { .. })));
    assert!(matches!(
        run_ensemble(0.5, RandomDist::UniformSymmetric { m: -1.0 }, &[100], 30, 0),
        Err(Error::InvalidSpec { .. })
    ));
    assert!(matches!(run_ensemble(0.5, UNIFORM, &[200, 100], 30, 0), Err(Error::InvalidSpec { .. })));
}

#[test]
fn recurrence_and_path_agree_with_records() {
    let rec = run_trial(1.0, &UNIFORM, 300, 4, 2, LambdaRule::default()).unwrap();
    let seqs = materialize(&ScheduleSpec::random(1.0, UNIFORM, 4, 2), 300).unwrap();
    let t = run_recurrences(&seqs).unwrap();
    assert_eq!(rec.q_n, t.q[300]);
    let theta = PI / 300.0;
    let path = martingale_path(&additive_offsets(&seqs, 2.0 * theta.cos()).unwrap(), &t, theta).unwrap();
    let ratio = path
        .deltas
        .iter()
        .enumerate()
        .map(|(i, d)| d.norm() / LambdaRule::default().lambda(i + 1, 300, 1.0))
        .fold(0.0, f64::max);
    assert_eq!(rec.max_lambda_ratio, ratio);
}
