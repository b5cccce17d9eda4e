//! Deterministic N-sweeps: distance of the composed map from the identity,
//! checkpoint limits, and log-log decay fits.

use std::f64::consts::PI;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobius::{
    compose_chain, identity_distance, projective_coeff_error, projective_distance, Complex, EvalRegion,
    MoebiusCoeffs,
};
use crate::recurrences::{
    coefficients_from_qr, root_of_unity, run_recurrences_with, PerturbationSequences, QrsTriple, RecurrenceOptions,
};
use crate::schedules::{materialize, rng, Regime, ScheduleSpec};

pub const DEFAULT_ORACLE_LIMIT: usize = 512;

/// Relative projective disagreement tolerated between recurrence and chain.
pub const ORACLE_TOL: f64 = 1e-8;

pub const WRONSKIAN_TOL: f64 = 1e-9;

/// `N = 100 * 2^j`, `j = 0..=7`.
pub fn default_ladder() -> Vec<usize> {
    (0..8).map(|j| 100usize << j).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub coeff_err: f64,
    pub sup_err: f64,
    pub q_n_abs: f64,
    /// `|q_{N+1} - L|` with `L` the regime limit (`+1` rotation, `-1` additive).
    pub q_n1_err: f64,
    pub r_n_err: f64,
    pub r_n1_err: f64,
    pub wronskian_resid: f64,
    /// Grid points dropped by the pole guard.
    pub skipped_points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateField {
    CoeffErr,
    SupErr,
    QNAbs,
    QN1Err,
    RNErr,
    RN1Err,
    WronskianResid,
}

impl RateField {
    pub fn get(self, p: &RatePoint) -> f64 {
        match self {
            RateField::CoeffErr => p.coeff_err,
            RateField::SupErr => p.sup_err,
            RateField::QNAbs => p.q_n_abs,
            RateField::QN1Err => p.q_n1_err,
            RateField::RNErr => p.r_n_err,
            RateField::RN1Err => p.r_n1_err,
            RateField::WronskianResid => p.wronskian_resid,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RateField::CoeffErr => "coeff_err",
            RateField::SupErr => "sup_err",
            RateField::QNAbs => "qN_abs",
            RateField::QN1Err => "qN1_err",
            RateField::RNErr => "rN_err",
            RateField::RN1Err => "rN1_err",
            RateField::WronskianResid => "wronskian_resid",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabConfig {
    pub region: EvalRegion,
    /// Chain cross-check runs for `N <= oracle_limit`.
    pub oracle_limit: usize,
    pub compensated: bool,
}

impl Default for LabConfig {
    fn default() -> Self {
        LabConfig {
            region: EvalRegion::default(),
            oracle_limit: DEFAULT_ORACLE_LIMIT,
            compensated: false,
        }
    }
}

impl LabConfig {
    pub fn with_region(region: EvalRegion) -> Self {
        LabConfig {
            region,
            ..Default::default()
        }
    }
}

/// Everything computed for one sequence set.
#[derive(Clone, Debug)]
pub struct Measurement {
    pub point: RatePoint,
    pub coeffs: MoebiusCoeffs,
    pub triple: QrsTriple,
    pub regime: Regime,
}

/// Measures one composition. Fails on chain disagreement or Wronskian drift.
pub fn measure(seqs: &PerturbationSequences, config: &LabConfig) -> Result<Measurement> {
    let n = seqs.n();
    let triple = run_recurrences_with(
        seqs,
        RecurrenceOptions {
            compensated: config.compensated,
        },
    )?;
    let wronskian_resid = triple.wronskian_residual();
    if !(wronskian_resid <= WRONSKIAN_TOL) {
        return Err(Error::OracleMismatch {
            n,
            what: "wronskian residual",
            deviation: wronskian_resid,
        });
    }
    let coeffs = coefficients_from_qr(&triple, n)?;
    if n <= config.oracle_limit {
        let chain = compose_chain(&seqs.step_maps())?;
        let deviation = projective_distance(&chain, &coeffs);
        if !(deviation <= ORACLE_TOL) {
            return Err(Error::OracleMismatch {
                n,
                what: "projective coefficient distance",
                deviation,
            });
        }
    }
    let regime = Regime::of(seqs);
    let limit = regime.limit();
    let dist = identity_distance(&coeffs, &config.region)?;
    let point = RatePoint {
        n,
        coeff_err: projective_coeff_error(&coeffs)?,
        sup_err: dist.sup_error,
        q_n_abs: triple.q[n].norm(),
        q_n1_err: (triple.q[n + 1] - limit).norm(),
        r_n_err: (triple.r[n] - limit).norm(),
        r_n1_err: (triple.r[n + 1] - limit).norm(),
        wronskian_resid,
        skipped_points: dist.skipped,
    };
    Ok(Measurement {
        point,
        coeffs,
        triple,
        regime,
    })
}

pub fn run_point(spec: &ScheduleSpec, n: usize, region: &EvalRegion) -> Result<RatePoint> {
    run_point_with(spec, n, &LabConfig::with_region(*region))
}

pub fn run_point_with(spec: &ScheduleSpec, n: usize, config: &LabConfig) -> Result<RatePoint> {
    let seqs = materialize(spec, n)?;
    measure(&seqs, config).map(|m| m.point)
}

pub fn check_ladder(ns: &[usize]) -> Result<()> {
    if ns.is_empty() {
        return Err(Error::invalid("n", "ladder is empty"));
    }
    if let Some(&n) = ns.iter().find(|&&n| n < crate::schedules::MIN_N) {
        return Err(Error::invalid("n", format!("every N must be at least 4, got {n}")));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("n", "ladder must be strictly increasing"));
    }
    Ok(())
}

pub fn run_sweep(spec: &ScheduleSpec, ns: &[usize], region: &EvalRegion) -> Result<Vec<RatePoint>> {
    run_sweep_with(spec, ns, &LabConfig::with_region(*region))
}

/// One point per `N`, in input order. Failed points are collected, each
/// labelled with its `N`.
pub fn run_sweep_with(spec: &ScheduleSpec, ns: &[usize], config: &LabConfig) -> Result<Vec<RatePoint>> {
    check_ladder(ns)?;
    spec.validate()?;
    let results: Vec<Result<RatePoint>> = ns
        .par_iter()
        .map(|&n| run_point_with(spec, n, config).map_err(|e| Error::at(n, e)))
        .collect();
    collect_points(results)
}

pub(crate) fn collect_points<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    let mut ok = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(p) => ok.push(p),
            Err(e) => errors.push(e),
        }
    }
    if errors.is_empty() {
        Ok(ok)
    } else {
        Err(Error::Sweep(errors))
    }
}

pub fn fit_decay(points: &[RatePoint], field: RateField) -> Result<DecayFit> {
    let pairs: Vec<(usize, f64)> = points.iter().map(|p| (p.n, field.get(p))).collect();
    fit_log_log(&pairs)
}

/// Least squares of `ln(value)` against `ln(N)`.
pub fn fit_log_log(pairs: &[(usize, f64)]) -> Result<DecayFit> {
    if pairs.len() < 3 {
        return Err(Error::invalid("points", format!("need at least 3 points, got {}", pairs.len())));
    }
    if let Some(&(n, value)) = pairs.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::NonPositiveValue { n, value });
    }
    let xs: Vec<f64> = pairs.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|(_, v)| v.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("points", "all N are equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(DecayFit {
        slope,
        intercept,
        r_squared,
        n_points: pairs.len(),
    })
}

/// Sizes cycled through by the randomized oracle comparison.
pub const ORACLE_SIZES: [usize; 4] = [16, 64, 256, 512];

/// Randomized schedule around the rotation with `|b_k| <= 1/N^2` and
/// `|eps_k| <= 1/N^2`, drawn from lanes 1-4 of stream `(seed, trial)`.
pub fn oracle_schedule(seed: u64, trial: u64, n: usize) -> Result<PerturbationSequences> {
    let key = rng::stream_key(seed, trial);
    let inv = 1.0 / (n as f64 * n as f64);
    let draw = |k: usize, lane: u8| rng::unit_f64(rng::word_from_key(key, k as u64, lane));
    let base = root_of_unity(n);
    let mut rho = Vec::with_capacity(n + 1);
    let mut eps_sq = Vec::with_capacity(n + 1);
    for k in 1..=n + 1 {
        let b = Complex::from_polar(inv * draw(k, 1), 2.0 * PI * draw(k, 2));
        let e = Complex::from_polar(inv * draw(k, 3), 2.0 * PI * draw(k, 4));
        rho.push(base + b);
        eps_sq.push(e * e);
    }
    PerturbationSequences::new(n, rho, eps_sq)
}

/// Projective distance between the chain product and the recurrence
/// coefficients of one sequence set.
pub fn oracle_deviation(seqs: &PerturbationSequences) -> Result<f64> {
    let triple = run_recurrences_with(seqs, RecurrenceOptions::default())?;
    let coeffs = coefficients_from_qr(&triple, seqs.n())?;
    let chain = compose_chain(&seqs.step_maps())?;
    Ok(projective_distance(&chain, &coeffs))
}

/// 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub const RATE_CSV_HEADER: &str = "N,coeff_err,sup_err,qN_abs,qN1_err,rN_err,rN1_err,wronskian_resid";

pub fn write_rate_csv<W: Write>(points: &[RatePoint], mut out: W) -> io::Result<()> {
    writeln!(out, "{RATE_CSV_HEADER}")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.n,
            fmt_real(p.coeff_err),
            fmt_real(p.sup_err),
            fmt_real(p.q_n_abs),
            fmt_real(p.q_n1_err),
            fmt_real(p.r_n_err),
            fmt_real(p.r_n1_err),
            fmt_real(p.wronskian_resid),
        )?;
    }
    Ok(())
}
