use std::f64::consts::PI;

use parimplode::lab::*;
use parimplode::mobius::{Complex, EvalRegion};
use parimplode::schedules::{materialize, CounterSide, ScheduleParams, Variant};
use parimplode::{Error, ScheduleSpec};

fn all_schedules() -> Vec<ScheduleSpec> {
    let mut v: Vec<ScheduleSpec> = (1..=3).map(ScheduleSpec::theorem_a).collect();
    v.extend((1..=5).map(ScheduleSpec::theorem_b));
    v.push(ScheduleSpec::counterexample(CounterSide::MultiplicativeF));
    v.push(ScheduleSpec::counterexample(CounterSide::AdditiveG));
    v.push(ScheduleSpec::new(Variant::QuadraticNonconvergent));
    v
}

#[test]
fn wronskian_stays_small_on_every_sweep() {
    let ns = default_ladder();
    assert_eq!(ns, vec![100, 200, 400, 800, 1600, 3200, 6400, 12800]);
    for spec in all_schedules() {
        let pts = run_sweep_with(&spec, &ns, &LabConfig::default()).unwrap();
        assert_eq!(pts.iter().map(|p| p.n).collect::<Vec<_>>(), ns);
        for p in &pts {
            assert!(p.wronskian_resid <= 1e-9, "{} {p:?}", spec.label());
        }
    }
}

#[test]
fn zero_remainders_compose_to_the_identity() {
    let zero = ScheduleParams {
        amplitude: 0.0,
        eps_amp: 0.0,
        pair_bound: 0.0,
        c: Complex::new(0.0, 0.0),
    };
    let specs = [
        ScheduleSpec::theorem_a(1),
        ScheduleSpec::theorem_a(2),
        ScheduleSpec::theorem_a(3),
        ScheduleSpec::theorem_b(1),
        ScheduleSpec::theorem_b(2),
        ScheduleSpec::theorem_b(3),
    ];
    for spec in specs {
        let spec = spec.with_params(zero);
        for p in run_sweep_with(&spec, &default_ladder(), &LabConfig::default()).unwrap() {
            assert!(p.coeff_err <= 1e-9 * p.n as f64, "{} {p:?}", spec.label());
        }
    }
}

#[test]
fn divergent_and_convergent_sides() {
    let ns: Vec<usize> = vec![500, 1000, 2000, 4000, 8000];
    let f = run_sweep_with(&ScheduleSpec::counterexample(CounterSide::MultiplicativeF), &ns, &LabConfig::default())
        .unwrap();
    for p in &f {
        assert!(p.coeff_err >= 1.0 / PI - 0.07, "{p:?}");
    }
    let g = run_sweep_with(&ScheduleSpec::counterexample(CounterSide::AdditiveG), &ns, &LabConfig::default())
        .unwrap();
    assert!(fit_decay(&g, RateField::CoeffErr).unwrap().slope <= -0.6);
}

#[test]
fn f_side_uniform_error_is_bounded_below() {
    let p = run_point(
        &ScheduleSpec::counterexample(CounterSide::MultiplicativeF),
        2000,
        &EvalRegion::disk(Complex::new(0.0, 0.0), 0.25).unwrap(),
    )
    .unwrap();
    assert!(p.sup_err >= 0.01, "{p:?}");
}

#[test]
fn uniform_error_is_controlled_by_coefficients() {
    let mut worst: f64 = 0.0;
    for spec in all_schedules() {
        for n in [100, 400, 1600] {
            let p = run_point_with(&spec, n, &LabConfig::default()).unwrap();
            if p.coeff_err <= 0.1 && p.coeff_err > 0.0 {
                worst = worst.max(p.sup_err / p.coeff_err);
            }
        }
    }
    assert!(worst <= 10.0, "{worst}");
}

#[test]
fn rates_on_the_deterministic_schedules() {
    let ns = default_ladder();
    let slope = |spec: ScheduleSpec, field| fit_decay(&run_sweep(&spec, &ns, &EvalRegion::default()).unwrap(), field).unwrap();
    let a1 = slope(ScheduleSpec::theorem_a(1), RateField::QNAbs);
    assert!((-1.1..=-0.9).contains(&a1.slope), "{a1:?}");
    assert!(a1.r_squared > 0.99);
    let b2 = slope(ScheduleSpec::theorem_b(2), RateField::CoeffErr);
    assert!((-1.4..=-0.6).contains(&b2.slope), "{b2:?}");
}

#[test]
fn rotation_case_one_scaled_error_is_bounded() {
    for p in run_sweep(&ScheduleSpec::theorem_a(1), &default_ladder(), &EvalRegion::default()).unwrap() {
        let n = p.n as f64;
        assert!(n * p.q_n_abs <= 50.0);
        assert!(n * p.q_n1_err <= 50.0);
    }
}

#[test]
fn oracle_cross_check_is_exercised() {
    // tiny oracle limit disables the chain; results do not change
    let spec = ScheduleSpec::theorem_b(3);
    let with = run_point_with(&spec, 256, &LabConfig::default()).unwrap();
    let without = run_point_with(
        &spec,
        256,
        &LabConfig {
            oracle_limit: 0,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(with, without);
    let compensated = run_point_with(
        &spec,
        256,
        &LabConfig {
            compensated: true,
            ..Default::default()
        },
    )
    .unwrap();
    assert!((compensated.coeff_err - with.coeff_err).abs() < 1e-12);
}

#[test]
fn randomized_oracle_agrees() {
    for t in 0..200u64 {
        let n = ORACLE_SIZES[t as usize % 4];
        let seqs = oracle_schedule(1, t, n).unwrap();
        for k in 1..=n + 1 {
            assert!((seqs.rho(k) - parimplode::recurrences::root_of_unity(n)).norm() <= 1.0 / (n * n) as f64);
            assert!(seqs.eps_sq(k).norm().sqrt() <= 1.0 / (n * n) as f64);
        }
        assert!(oracle_deviation(&seqs).unwrap() <= 1e-9);
    }
}

#[test]
fn sweep_errors_carry_their_n() {
    let err = run_sweep(&ScheduleSpec::counterexample(CounterSide::AdditiveG), &[100, 101, 200, 201], &EvalRegion::default())
        .unwrap_err();
    match &err {
        Error::Sweep(all) => {
            let ns: Vec<usize> = all
                .iter()
                .map(|e| match e {
                    Error::AtPoint { n, .. } => *n,
                    other => panic!("{other:?}"),
                })
                .collect();
            assert_eq!(ns, vec![101, 201]);
        }
        other => panic!("{other:?}"),
    }
    assert!(err.is_usage());
    for bad in [vec![], vec![2, 8], vec![8, 8], vec![16, 8]] {
        assert!(matches!(check_ladder(&bad), Err(Error::InvalidSpec { .. })), "{bad:?}");
    }
}

#[test]
fn log_log_fit() {
    let pairs: Vec<(usize, f64)> = [10, 20, 40, 80].iter().map(|&n| (n, 3.0 / (n as f64).powi(2))).collect();
    let f = fit_log_log(&pairs).unwrap();
    assert!((f.slope + 2.0).abs() < 1e-12);
    assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    assert_eq!(f.n_points, 4);
    assert!((f.r_squared - 1.0).abs() < 1e-12);
    assert!(matches!(fit_log_log(&pairs[..2]), Err(Error::InvalidSpec { .. })));
    let mut bad = pairs.clone();
    bad[2].1 = 0.0;
    assert!(matches!(fit_log_log(&bad), Err(Error::NonPositiveValue { n: 40, .. })));
}

#[test]
fn csv_layout() {
    let pts = run_sweep(&ScheduleSpec::theorem_a(1), &[100, 200], &EvalRegion::default()).unwrap();
    let mut buf = Vec::new();
    write_rate_csv(&pts, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], RATE_CSV_HEADER);
    assert_eq!(lines.len(), 3);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields.len(), 8);
    assert_eq!(fields[0], "100");
    assert_eq!(fields[1].parse::<f64>().unwrap(), pts[0].coeff_err);
    assert_eq!(fmt_real(0.5), "5.0000000000000000e-1");
}

#[test]
fn measurement_exposes_regime() {
    let seqs = materialize(&ScheduleSpec::theorem_b(4), 128).unwrap();
    let m = measure(&seqs, &LabConfig::default()).unwrap();
    assert_eq!(m.regime, parimplode::schedules::Regime::Additive);
    assert_eq!(m.triple.n(), 128);
    assert!((m.triple.q[129] + 1.0).norm() < 0.1);
}
