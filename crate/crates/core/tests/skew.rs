#![allow(clippy::neg_cmp_op_on_partial_ord)]

use parimplode::lab::{default_ladder, fit_log_log, LabConfig};
use parimplode::mobius::Complex;
use parimplode::schedules::{materialize, ScheduleParams};
use parimplode::skew::*;
use parimplode::{Error, ScheduleSpec};

fn params(amplitude: f64, pair_bound: f64) -> ScheduleParams {
    ScheduleParams {
        amplitude,
        pair_bound,
        ..Default::default()
    }
}

/// Schedule each example's fiber reproduces.
fn counterpart(id: u8) -> ScheduleSpec {
    match id {
        1 => ScheduleSpec::theorem_a(1).with_params(params(0.0, 1.0)),
        2 => ScheduleSpec::theorem_a(2).with_params(params(-1.0, 0.0)),
        3 => ScheduleSpec::theorem_a(3),
        4 => ScheduleSpec::theorem_b(1).with_params(params(0.0, 1.0)),
        5 => ScheduleSpec::theorem_b(2).with_params(params(-1.0, 0.0)),
        _ => unreachable!(),
    }
}

#[test]
fn fibers_match_the_schedule_constructions() {
    for id in 1..=5 {
        for n in [10, 100, 1000] {
            let fiber = build_example(id, n).unwrap().fiber_sequences(n).unwrap();
            let direct = materialize(&counterpart(id), n).unwrap();
            for k in 1..=n + 1 {
                assert!((fiber.rho(k) - direct.rho(k)).norm() <= 1e-15, "Ex{id} N={n} k={k}");
                assert!((fiber.eps_sq(k) - direct.eps_sq(k)).norm() <= 1e-15, "Ex{id} N={n} k={k}");
            }
        }
    }
}

#[test]
fn example_one_is_exact() {
    let config = LabConfig::default();
    for n in default_ladder() {
        let r = iterate_skew(&build_example(1, n).unwrap(), n, &config).unwrap();
        assert!(r.fiber_coeff_err <= 1e-9, "{r:?}");
        assert_eq!(r.w_final, Complex::new(1.0 / n as f64, 0.0));
    }
}

#[test]
fn base_orbit_closed_forms() {
    let n = 64;
    let nf = n as f64;
    let ex3 = build_example(3, n).unwrap();
    for k in [0, 1, 5, n] {
        assert!((ex3.w(k, n).norm() - 1.0 / (nf * nf)).abs() < 1e-18);
    }
    let ex2 = build_example(2, n).unwrap();
    assert_eq!(ex2.w(1, n), Complex::new(1.0 / (nf * nf), 0.0));
    assert_eq!(ex2.w(2, n), Complex::new(-1.0 / (nf * nf), 0.0));
    assert_eq!(ex2.multiplier(n), Complex::new(-1.0, 0.0));
    for id in 1..=5 {
        let sys = build_example(id, n).unwrap();
        assert!(sys.w(n, n).norm() <= sys.w0(n).norm() * (1.0 + 1e-15));
    }
}

#[test]
fn base_and_fiber_converge_along_the_ladder() {
    let config = LabConfig::default();
    let ns = default_ladder();
    for id in 1..=5 {
        let rows: Vec<SkewOrbitResult> = ns
            .iter()
            .map(|&n| iterate_skew(&build_example(id, n).unwrap(), n, &config).unwrap())
            .collect();
        let w: Vec<f64> = rows.iter().map(|r| r.w_final.norm()).collect();
        assert!(w.windows(2).all(|p| p[1] < p[0]), "Ex{id}: {w:?}");
        for r in &rows {
            assert!(r.fiber_sup_err.is_finite() && r.fiber_coeff_err.is_finite());
        }
    }
}

#[test]
fn perturbed_fibers_decay() {
    let config = LabConfig::default();
    for id in [4, 5] {
        let pairs: Vec<(usize, f64)> = default_ladder()
            .iter()
            .map(|&n| (n, iterate_skew(&build_example(id, n).unwrap(), n, &config).unwrap().fiber_coeff_err))
            .collect();
        let slope = fit_log_log(&pairs).unwrap().slope;
        assert!(slope <= -0.5, "Ex{id}: {slope}");
    }
}

#[test]
fn cancelling_fibers_decay() {
    // Examples 2 and 3: fiber_coeff_err should decay with slope <= -0.5
    let config = LabConfig::default();
    let mut misses = Vec::new();
    for id in [2, 3] {
        let pairs: Vec<(usize, f64)> = default_ladder()
            .iter()
            .map(|&n| (n, iterate_skew(&build_example(id, n).unwrap(), n, &config).unwrap().fiber_coeff_err))
            .collect();
        let slope = fit_log_log(&pairs).unwrap().slope;
        if !(slope <= -0.5) {
            misses.push(format!("Ex{id}: slope {slope:.3}, values {pairs:?}"));
        }
    }
    assert!(misses.is_empty(), "{}", misses.join("\n"));
}

#[test]
fn csv_and_errors() {
    let config = LabConfig::default();
    let rows: Vec<(u8, SkewOrbitResult)> = (1..=5)
        .map(|id| (id, iterate_skew(&build_example(id, 100).unwrap(), 100, &config).unwrap()))
        .collect();
    let mut buf = Vec::new();
    write_skew_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), SKEW_CSV_HEADER);
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().nth(3).unwrap().starts_with("3,100,"));
    match build_example(6, 100) {
        Err(Error::InvalidSpec { field, .. }) => assert_eq!(field, "example"),
        other => panic!("{other:?}"),
    }
    assert!(build_example(1, 3).is_err());
}
