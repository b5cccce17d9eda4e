//! Monte Carlo ensembles for the randomly perturbed additive schedule
//! `eps_k = pi/N + eta_k / N^{1+delta}`.

use std::f64::consts::PI;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lab::{check_ladder, fmt_real};
use crate::mobius::{projective_coeff_error, Complex};
use crate::recurrences::{additive_offsets, coefficients_from_qr, martingale_path, run_recurrences};
use crate::schedules::{materialize, RandomDist, ScheduleSpec};

pub const MIN_TRIALS: usize = 30;

/// Threshold for [`EnsembleSummary::coeff_exceed_count`].
pub const DEFAULT_COEFF_THRESHOLD: f64 = 0.1;

/// How `lambda_n` is chosen for the tail event `|delta_n| >= lambda_n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaRule {
    /// `lambda_n = factor * sqrt(2n) N^{-(3/2 + delta/2)}`; factor 1 is the
    /// choice made in the rate proof.
    Proof { factor: f64 },
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule::Proof { factor: 1.0 }
    }
}

impl LambdaRule {
    pub fn lambda(self, n: usize, big_n: usize, delta: f64) -> f64 {
        match self {
            LambdaRule::Proof { factor } => factor * (2.0 * n as f64).sqrt() * (big_n as f64).powf(-(1.5 + delta / 2.0)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: usize,
    pub delta: f64,
    pub seed: u64,
    pub trial: u64,
    pub q_n: Complex,
    pub q_n1: Complex,
    pub q_nm1: Complex,
    pub s_nm1: Complex,
    pub s_nm2: Complex,
    pub coeff_err: f64,
    /// `max_{1<=n<=N+1} |delta_n| / lambda_n`; the tail event is `>= 1`.
    pub max_lambda_ratio: f64,
    pub max_identity_residual: f64,
}

impl TrialRecord {
    /// `|q_{N-1} - 1|, |q_N|, |q_{N+1} + 1|, |s_{N-2} - 2cos(pi/N)|, |s_{N-1} - 1|`.
    pub fn checkpoint_errors(&self) -> [f64; 5] {
        let x = 2.0 * (PI / self.n as f64).cos();
        [
            (self.q_nm1 - 1.0).norm(),
            self.q_n.norm(),
            (self.q_n1 + 1.0).norm(),
            (self.s_nm2 - x).norm(),
            (self.s_nm1 - 1.0).norm(),
        ]
    }
}

pub const CHECKPOINT_NAMES: [&str; 5] = ["|q_(N-1) - 1|", "|q_N|", "|q_(N+1) + 1|", "|s_(N-2) - x|", "|s_(N-1) - 1|"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n: usize,
    pub delta: f64,
    pub trials: usize,
    pub median_qn: f64,
    pub q90_qn: f64,
    /// Trials in which `|delta_n| >= lambda_n` for some `n <= N+1`.
    pub exceed_count: usize,
    /// Single-`n` tail bound; the union over `n` is `(N+1)` times this.
    pub azuma_bound: f64,
    /// Trials with `coeff_err` above the configured threshold.
    pub coeff_exceed_count: usize,
    pub failed: usize,
    /// 90th percentiles of [`TrialRecord::checkpoint_errors`].
    pub q90_checkpoints: [f64; 5],
    pub azuma_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub delta: f64,
    pub dist: RandomDist,
    pub ns: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub lambda_rule: LambdaRule,
    #[serde(default = "default_threshold")]
    pub coeff_threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_COEFF_THRESHOLD
}

impl EnsembleConfig {
    pub fn new(delta: f64, dist: RandomDist, ns: Vec<usize>, trials: usize, seed: u64) -> Self {
        EnsembleConfig {
            delta,
            dist,
            ns,
            trials,
            seed,
            lambda_rule: LambdaRule::default(),
            coeff_threshold: DEFAULT_COEFF_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::invalid("delta", "must be positive"));
        }
        self.dist.validate()?;
        if self.trials < MIN_TRIALS {
            return Err(Error::invalid("trials", format!("need at least {MIN_TRIALS}")));
        }
        let LambdaRule::Proof { factor } = self.lambda_rule;
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::invalid("lambda_rule.factor", "must be positive"));
        }
        check_ladder(&self.ns)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialFailure {
    pub n: usize,
    pub trial: u64,
    pub error: Error,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub summaries: Vec<EnsembleSummary>,
    /// Grouped by `N` in ladder order, then by trial index.
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
}

/// `exp(-lambda^2 N^{2(1+delta)} / (2 M^2 n))`.
pub fn azuma_tail_bound(lambda: f64, n: usize, big_n: usize, delta: f64, m: f64) -> f64 {
    let growth = (2.0 * (1.0 + delta) * (big_n as f64).ln()).exp();
    (-(lambda * lambda) * growth / (2.0 * m * m * n as f64)).exp()
}

/// Offset `d(eta) = (2 - eps^2) - 2 cos(pi/N)` at a given `eta`.
fn offset(eta: f64, n: usize, delta: f64) -> f64 {
    let nf = n as f64;
    let e = PI / nf + eta / nf.powf(1.0 + delta);
    (2.0 - e * e) - 2.0 * (PI / nf).cos()
}

/// Almost-sure bound on `xi_k = N^{2+delta} d_k`. `d` is quadratic in `eta`,
/// so the extremes sit at `eta = +-bound`.
pub fn xi_bound(dist: &RandomDist, n: usize, delta: f64) -> f64 {
    let m = dist.bound();
    let scale = (n as f64).powf(2.0 + delta);
    scale * offset(m, n, delta).abs().max(offset(-m, n, delta).abs())
}

pub fn run_trial(delta: f64, dist: &RandomDist, n: usize, seed: u64, trial: u64, rule: LambdaRule) -> Result<TrialRecord> {
    let seqs = materialize(&ScheduleSpec::random(delta, *dist, seed, trial), n)?;
    let triple = run_recurrences(&seqs)?;
    let coeffs = coefficients_from_qr(&triple, n)?;
    let theta = PI / n as f64;
    let d = additive_offsets(&seqs, 2.0 * theta.cos())?;
    let path = martingale_path(&d, &triple, theta)?;
    let max_lambda_ratio = path
        .deltas
        .iter()
        .enumerate()
        .map(|(i, dn)| dn.norm() / rule.lambda(i + 1, n, delta))
        .fold(0.0, f64::max);
    Ok(TrialRecord {
        n,
        delta,
        seed,
        trial,
        q_n: triple.q[n],
        q_n1: triple.q[n + 1],
        q_nm1: triple.q[n - 1],
        s_nm1: triple.s[n - 1],
        s_nm2: triple.s[n - 2],
        coeff_err: projective_coeff_error(&coeffs)?,
        max_lambda_ratio,
        max_identity_residual: path.max_residual,
    })
}

/// Nearest-rank quantile of unsorted data; `None` when empty.
pub fn nearest_rank(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}

pub fn run_ensemble(delta: f64, dist: RandomDist, ns: &[usize], trials: usize, seed: u64) -> Result<Ensemble> {
    run_ensemble_with(&EnsembleConfig::new(delta, dist, ns.to_vec(), trials, seed))
}

pub fn run_ensemble_with(config: &EnsembleConfig) -> Result<Ensemble> {
    config.validate()?;
    let mut summaries = Vec::with_capacity(config.ns.len());
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for &n in &config.ns {
        let results: Vec<Result<TrialRecord>> = (0..config.trials as u64)
            .into_par_iter()
            .map(|t| run_trial(config.delta, &config.dist, n, config.seed, t, config.lambda_rule))
            .collect();
        let mut ok = Vec::with_capacity(config.trials);
        for (t, r) in results.into_iter().enumerate() {
            match r {
                Ok(rec) => ok.push(rec),
                Err(error) => failures.push(TrialFailure {
                    n,
                    trial: t as u64,
                    error,
                }),
            }
        }
        summaries.push(summarize(config, n, &ok));
        records.extend(ok);
    }
    Ok(Ensemble {
        summaries,
        records,
        failures,
    })
}

fn summarize(config: &EnsembleConfig, n: usize, ok: &[TrialRecord]) -> EnsembleSummary {
    let qn: Vec<f64> = ok.iter().map(|r| r.q_n.norm()).collect();
    let mut q90_checkpoints = [f64::NAN; 5];
    for (i, slot) in q90_checkpoints.iter_mut().enumerate() {
        let col: Vec<f64> = ok.iter().map(|r| r.checkpoint_errors()[i]).collect();
        *slot = nearest_rank(&col, 0.9).unwrap_or(f64::NAN);
    }
    let azuma_m = xi_bound(&config.dist, n, config.delta);
    // the proof's lambda_n makes the exponent independent of n; evaluate at n = 1
    let azuma_bound = azuma_tail_bound(config.lambda_rule.lambda(1, n, config.delta), 1, n, config.delta, azuma_m);
    EnsembleSummary {
        n,
        delta: config.delta,
        trials: config.trials,
        median_qn: nearest_rank(&qn, 0.5).unwrap_or(f64::NAN),
        q90_qn: nearest_rank(&qn, 0.9).unwrap_or(f64::NAN),
        exceed_count: ok.iter().filter(|r| r.max_lambda_ratio >= 1.0).count(),
        azuma_bound,
        coeff_exceed_count: ok.iter().filter(|r| r.coeff_err > config.coeff_threshold).count(),
        failed: config.trials - ok.len(),
        q90_checkpoints,
        azuma_m,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleCheck {
    pub max_identity_residual: f64,
    /// `|mean over trials of (delta_n - delta_{n-1})|` at `n = N/2`.
    pub mean_increment_abs: f64,
    /// Standard error of that mean.
    pub stderr: f64,
}

pub fn martingale_check(delta: f64, dist: RandomDist, n: usize, trials: usize, seed: u64) -> Result<MartingaleCheck> {
    EnsembleConfig::new(delta, dist, vec![n], trials, seed).validate()?;
    let theta = PI / n as f64;
    let at = n / 2;
    let per_trial: Vec<Result<(f64, Complex)>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let seqs = materialize(&ScheduleSpec::random(delta, dist, seed, t), n)?;
            let triple = run_recurrences(&seqs)?;
            let d = additive_offsets(&seqs, 2.0 * theta.cos())?;
            let path = martingale_path(&d, &triple, theta)?;
            Ok((path.max_residual, path.deltas[at - 1] - path.deltas[at - 2]))
        })
        .collect();
    let mut max_identity_residual: f64 = 0.0;
    let mut incs = Vec::with_capacity(trials);
    for r in per_trial {
        let (res, inc) = r?;
        max_identity_residual = max_identity_residual.max(res);
        incs.push(inc);
    }
    let m = incs.len() as f64;
    let mean: Complex = incs.iter().sum::<Complex>() / m;
    let var = incs.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (m - 1.0);
    Ok(MartingaleCheck {
        max_identity_residual,
        mean_increment_abs: mean.norm(),
        stderr: (var / m).sqrt(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceRow {
    pub n: usize,
    pub empirical: f64,
    /// `(N+1) * azuma_bound`
    pub bound: f64,
    pub vacuous: bool,
    /// `empirical <= bound + 3 sqrt(bound/trials) + 3/trials`; true when vacuous.
    pub within: bool,
}

pub fn exceedance_vs_bound(summaries: &[EnsembleSummary]) -> Vec<ExceedanceRow> {
    summaries
        .iter()
        .map(|s| {
            let trials = (s.trials - s.failed).max(1) as f64;
            let empirical = s.exceed_count as f64 / trials;
            let bound = (s.n as f64 + 1.0) * s.azuma_bound;
            let vacuous = bound >= 1.0;
            let within = vacuous || empirical <= bound + 3.0 * (bound / trials).sqrt() + 3.0 / trials;
            ExceedanceRow {
                n: s.n,
                empirical,
                bound,
                vacuous,
                within,
            }
        })
        .collect()
}

pub const TRIAL_CSV_HEADER: &str = "N,delta,seed,trial,qN_re,qN_im,qN1_re,qN1_im,coeff_err";
pub const SUMMARY_CSV_HEADER: &str = "N,delta,trials,median_qN,q90_qN,exceed_count,azuma_bound";

pub fn write_trial_csv<W: Write>(records: &[TrialRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRIAL_CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.n,
            fmt_real(r.delta),
            r.seed,
            r.trial,
            fmt_real(r.q_n.re),
            fmt_real(r.q_n.im),
            fmt_real(r.q_n1.re),
            fmt_real(r.q_n1.im),
            fmt_real(r.coeff_err),
        )?;
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(summaries: &[EnsembleSummary], mut out: W) -> io::Result<()> {
    writeln!(out, "{SUMMARY_CSV_HEADER}")?;
    for s in summaries {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.n,
            fmt_real(s.delta),
            s.trials,
            fmt_real(s.median_qn),
            fmt_real(s.q90_qn),
            s.exceed_count,
            fmt_real(s.azuma_bound),
        )?;
    }
    Ok(())
}
