//! Command-line front end. Every command first folds its flags into an
//! [`ExperimentConfig`] (flags win over the `--config` document) and then
//! runs from that merged document alone.

pub mod config;
pub mod svg;

use std::f64::consts::PI;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::error::Error;
use crate::lab::{self, LabConfig, RateField, RatePoint};
use crate::mobius::Complex;
use crate::random_lab::{self, EnsembleConfig, LambdaRule};
use crate::schedules::{self, CounterSide, RandomDist, ScheduleParams, ScheduleSpec, Variant};
use crate::skew;

pub use config::{parse_ladder, Band, ExperimentConfig, LadderSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_ASSERT: i32 = 3;

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "PARIMPLODE_THREADS";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Assert(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Assert(_) => EXIT_ASSERT,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) | CliError::Assert(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_usage() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

fn usage(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("invalid {field}: {reason}"))
}

#[derive(Parser, Debug)]
#[command(
    name = "parimplode",
    version,
    about = "Convergence experiments for long compositions of perturbed parabolic Moebius maps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Deterministic N-sweep of one schedule with a log-log decay fit.
    Sweep(SweepArgs),
    /// Seeded Monte Carlo ensemble of the randomly perturbed additive schedule.
    Random(RandomArgs),
    /// Both sides of the conjugate pair (f diverges, g converges) on one ladder.
    Counterexample(CounterArgs),
    /// Fiberwise convergence of the skew-product examples.
    Skew(SkewArgs),
    /// Recurrence coefficients against direct chain products on random schedules.
    Oracle(OracleArgs),
    /// N |sum_k a_k T_k| for a schedule.
    DiagnoseSum(DiagnoseArgs),
}

#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// JSON experiment document; flags override its fields.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// N ladder: start:end:xFACTOR, start:end:+STEP, a comma list, or one N.
    #[arg(long = "n", value_name = "LADDER")]
    pub n: Option<String>,
    /// Output CSV path (written atomically).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Output SVG plot path.
    #[arg(long, value_name = "FILE")]
    pub svg: Option<PathBuf>,
    /// Exit 3 unless the pre-registered checks pass.
    #[arg(long = "assert")]
    pub assert_band: bool,
    /// Print the merged configuration as JSON and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TheoremArg {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    F,
    G,
}

#[derive(Args, Debug, Default)]
pub struct ScheduleArgs {
    /// Schedule family.
    #[arg(long, value_enum, ignore_case = true)]
    pub theorem: Option<TheoremArg>,
    /// Case number within the theorem.
    #[arg(long)]
    pub case: Option<u8>,
    /// rho_k = e^{2 pi i/(N+1)}, eps = 0.
    #[arg(long)]
    pub quadratic_noncvg: bool,
    /// Side of the conjugate pair.
    #[arg(long, value_enum, ignore_case = true)]
    pub counterexample: Option<SideArg>,
    /// Remainder amplitude.
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Additive-term amplitude.
    #[arg(long)]
    pub eps_amp: Option<f64>,
    /// Pair-cancellation bound.
    #[arg(long)]
    pub pair_bound: Option<f64>,
    /// Rotating-schedule constant: RE or RE,IM.
    #[arg(long = "c", value_name = "RE[,IM]", value_parser = parse_complex)]
    pub c: Option<Complex>,
}

#[derive(Args, Debug, Default)]
pub struct RegionArgs {
    /// Radius of the evaluation disk (centre 0).
    #[arg(long)]
    pub radius: Option<f64>,
    /// Grid points per axis.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Chain cross-check for N up to this value.
    #[arg(long)]
    pub oracle_limit: Option<usize>,
    /// Compensated (TwoSum) accumulation in the recurrences.
    #[arg(long)]
    pub compensated: bool,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    pub region: RegionArgs,
    /// Field to fit.
    #[arg(long, value_enum)]
    pub field: Option<FieldArg>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FieldArg {
    CoeffErr,
    SupErr,
    QnAbs,
    Qn1Err,
    RnErr,
    Rn1Err,
}

impl From<FieldArg> for RateField {
    fn from(f: FieldArg) -> Self {
        match f {
            FieldArg::CoeffErr => RateField::CoeffErr,
            FieldArg::SupErr => RateField::SupErr,
            FieldArg::QnAbs => RateField::QNAbs,
            FieldArg::Qn1Err => RateField::QN1Err,
            FieldArg::RnErr => RateField::RNErr,
            FieldArg::Rn1Err => RateField::RN1Err,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DistArg {
    Uniform,
    Rademacher,
    Zero,
}

#[derive(Args, Debug)]
pub struct RandomArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Perturbation exponent; eps_k = pi/N + eta_k/N^(1+delta).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Distribution of eta_k.
    #[arg(long, value_enum)]
    pub dist: Option<DistArg>,
    /// Bound M of the uniform distribution.
    #[arg(long)]
    pub m: Option<f64>,
    /// Trials per N.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Multiplier on the proof's lambda_n.
    #[arg(long)]
    pub lambda_factor: Option<f64>,
    /// coeff_err threshold for the secondary exceedance count.
    #[arg(long)]
    pub coeff_threshold: Option<f64>,
    /// Summary CSV path (stdout when absent).
    #[arg(long, value_name = "FILE")]
    pub summary_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CounterArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub region: RegionArgs,
}

#[derive(Args, Debug)]
pub struct SkewArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub region: RegionArgs,
    /// Example id 1-5; repeat for several (default all).
    #[arg(long = "example")]
    pub examples: Vec<u8>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of random schedules.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Largest N in the size cycle.
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
}

fn parse_complex(s: &str) -> std::result::Result<Complex, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    match parts.as_slice() {
        [re] => Ok(Complex::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex::new(num(re)?, num(im)?)),
        _ => Err("expected RE or RE,IM".into()),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return EXIT_USAGE;
    }
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {value:?}"))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(command: Command) -> CliResult {
    match command {
        Command::Sweep(a) => cmd_sweep(a),
        Command::Random(a) => cmd_random(a),
        Command::Counterexample(a) => cmd_counterexample(a),
        Command::Skew(a) => cmd_skew(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::DiagnoseSum(a) => cmd_diagnose_sum(a),
    }
}

fn load_config(common: &CommonArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = &common.n {
        parse_ladder(n)?;
        cfg.n = Some(LadderSpec::Text(n.clone()));
    }
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    if common.svg.is_some() {
        cfg.svg = common.svg.clone();
    }
    if common.assert_band {
        cfg.assert_band = Some(true);
    }
    Ok(cfg)
}

fn apply_schedule(args: &ScheduleArgs, cfg: &mut ExperimentConfig) -> CliResult {
    let chosen = [args.theorem.is_some(), args.quadratic_noncvg, args.counterexample.is_some()]
        .iter()
        .filter(|b| **b)
        .count();
    if chosen > 1 {
        return Err(usage("schedule", "choose one of --theorem, --quadratic-noncvg, --counterexample"));
    }
    let variant = if let Some(t) = args.theorem {
        let case = match (args.case, cfg.schedule.as_ref().map(|s| &s.variant)) {
            (Some(c), _) => c,
            (None, Some(Variant::TheoremA { case })) if t == TheoremArg::A => *case,
            (None, Some(Variant::TheoremB { case })) if t == TheoremArg::B => *case,
            _ => return Err(usage("case", "--theorem needs --case")),
        };
        Some(match t {
            TheoremArg::A => Variant::TheoremA { case },
            TheoremArg::B => Variant::TheoremB { case },
        })
    } else if let Some(case) = args.case {
        match cfg.schedule.as_ref().map(|s| &s.variant) {
            Some(Variant::TheoremA { .. }) => Some(Variant::TheoremA { case }),
            Some(Variant::TheoremB { .. }) => Some(Variant::TheoremB { case }),
            _ => return Err(usage("case", "--case needs --theorem")),
        }
    } else if args.quadratic_noncvg {
        Some(Variant::QuadraticNonconvergent)
    } else {
        args.counterexample.map(|side| Variant::CounterexampleC {
            side: match side {
                SideArg::F => CounterSide::MultiplicativeF,
                SideArg::G => CounterSide::AdditiveG,
            },
        })
    };
    let has_param = args.amplitude.is_some() || args.eps_amp.is_some() || args.pair_bound.is_some() || args.c.is_some();
    let mut spec = match (variant, cfg.schedule.take()) {
        (Some(v), Some(old)) => ScheduleSpec {
            variant: v,
            params: old.params,
        },
        (Some(v), None) => ScheduleSpec::new(v),
        (None, Some(old)) => old,
        (None, None) if has_param => return Err(usage("schedule", "parameters given without a schedule")),
        (None, None) => return Err(usage("schedule", "no schedule given (use --theorem/--case, --quadratic-noncvg, --counterexample or --config)")),
    };
    let p: &mut ScheduleParams = &mut spec.params;
    if let Some(v) = args.amplitude {
        p.amplitude = v;
    }
    if let Some(v) = args.eps_amp {
        p.eps_amp = v;
    }
    if let Some(v) = args.pair_bound {
        p.pair_bound = v;
    }
    if let Some(v) = args.c {
        p.c = v;
    }
    spec.validate()?;
    cfg.schedule = Some(spec);
    Ok(())
}

fn apply_region(args: &RegionArgs, cfg: &mut ExperimentConfig) -> CliResult {
    if args.radius.is_some() || args.grid.is_some() {
        let mut region = cfg.region.unwrap_or_default();
        if let Some(r) = args.radius {
            region.radius = r;
            region.pole_guard = 1e-3 * r;
        }
        if let Some(g) = args.grid {
            region.grid_points = g;
        }
        cfg.region = Some(region);
    }
    if let Some(region) = &cfg.region {
        region.validate()?;
    }
    if args.oracle_limit.is_some() {
        cfg.oracle_limit = args.oracle_limit;
    }
    if args.compensated {
        cfg.compensated = Some(true);
    }
    Ok(())
}

fn lab_config(cfg: &ExperimentConfig) -> LabConfig {
    LabConfig {
        region: cfg.region.unwrap_or_default(),
        oracle_limit: cfg.oracle_limit.unwrap_or(lab::DEFAULT_ORACLE_LIMIT),
        compensated: cfg.compensated.unwrap_or(false),
    }
}

fn ladder(cfg: &ExperimentConfig, default: &str) -> CliResult<Vec<usize>> {
    match &cfg.n {
        Some(l) => Ok(l.resolve()?),
        None => Ok(parse_ladder(default)?),
    }
}

fn print_config(cfg: &ExperimentConfig) -> CliResult {
    let text = serde_json::to_string_pretty(cfg).map_err(|e| CliError::Numerical(e.to_string()))?;
    println!("{text}");
    Ok(())
}

/// Writes through a temp file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let fail = |e: std::io::Error| usage("output", format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn emit_csv(path: Option<&Path>, bytes: Vec<u8>) -> CliResult {
    match path {
        Some(p) => write_atomic(p, &bytes),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(&bytes).map_err(|e| CliError::Numerical(e.to_string()))
        }
    }
}

/// Status lines go to stdout unless stdout carries the CSV.
fn report(to_stdout: bool, text: &str) {
    if to_stdout {
        print!("{text}");
    } else {
        eprint!("{text}");
    }
}

/// Pre-registered bands.
pub fn default_band(spec: &ScheduleSpec) -> Option<Band> {
    match spec.variant {
        Variant::TheoremA { .. } => Some(Band {
            field: RateField::QNAbs,
            lo: -1.4,
            hi: -0.8,
        }),
        Variant::TheoremB { .. } => Some(Band {
            field: RateField::CoeffErr,
            lo: -1.4,
            hi: -0.6,
        }),
        Variant::CounterexampleC {
            side: CounterSide::AdditiveG,
        } => Some(Band {
            field: RateField::CoeffErr,
            lo: f64::NEG_INFINITY,
            hi: -0.6,
        }),
        _ => None,
    }
}

fn default_field(spec: &ScheduleSpec) -> RateField {
    default_band(spec).map_or(RateField::CoeffErr, |b| b.field)
}

fn fit_line(points: &[RatePoint], field: RateField) -> (String, Option<lab::DecayFit>) {
    match lab::fit_decay(points, field) {
        Ok(f) => (
            format!(
                "fit {}: slope {:.4} intercept {:.4} r^2 {:.4} ({} points)\n",
                field.name(),
                f.slope,
                f.intercept,
                f.r_squared,
                f.n_points
            ),
            Some(f),
        ),
        Err(Error::NonPositiveValue { n, .. }) => (
            format!("fit {}: undefined, value at N = {n} is below the floating-point floor\n", field.name()),
            None,
        ),
        Err(e) => (format!("fit {}: undefined ({e})\n", field.name()), None),
    }
}

fn write_svg(path: &Path, plot: &svg::Plot) -> CliResult {
    write_atomic(path, plot.render().as_bytes())
}

const COLORS: [&str; 5] = ["#c0392b", "#2471a3", "#229954", "#8e44ad", "#d68910"];

pub fn cmd_sweep(a: SweepArgs) -> CliResult {
    let mut cfg = load_config(&a.common)?;
    apply_schedule(&a.schedule, &mut cfg)?;
    apply_region(&a.region, &mut cfg)?;
    if let Some(f) = a.field {
        cfg.field = Some(f.into());
    }
    let spec = cfg.schedule.clone().expect("schedule resolved");
    if spec.is_random() {
        return Err(usage("schedule", "sweep needs a deterministic schedule; use the random command"));
    }
    let ns = ladder(&cfg, "100:12800:x2")?;
    if a.common.print_config {
        return print_config(&cfg);
    }
    let points = lab::run_sweep_with(&spec, &ns, &lab_config(&cfg))?;
    let mut csv = Vec::new();
    lab::write_rate_csv(&points, &mut csv).map_err(|e| CliError::Numerical(e.to_string()))?;
    emit_csv(cfg.out.as_deref(), csv)?;

    let band = cfg.band.or_else(|| default_band(&spec));
    let field = cfg.field.or(band.map(|b| b.field)).unwrap_or_else(|| default_field(&spec));
    let (line, fit) = fit_line(&points, field);
    let mut text = format!("schedule {} on {} points\n", spec.label(), points.len());
    text.push_str(&line);
    if let Some(b) = band.filter(|b| b.field == field) {
        let _ = writeln!(text, "band [{}, {}]", b.lo, b.hi);
    }
    report(cfg.out.is_some(), &text);

    if let Some(path) = &cfg.svg {
        let plot = svg::Plot {
            title: format!("{} sweep", spec.label()),
            x_label: "N".into(),
            y_label: field.name().into(),
            series: vec![svg::Series {
                label: field.name().into(),
                color: COLORS[0],
                points: points.iter().map(|p| (p.n as f64, field.get(p))).collect(),
                fit: fit.map(|f| (f.slope, f.intercept)),
            }],
            band: band.filter(|b| b.field == field).map(|b| (b.lo, b.hi)),
        };
        write_svg(path, &plot)?;
    }

    if cfg.assert_band.unwrap_or(false) {
        let b = band.ok_or_else(|| usage("band", "no pre-registered band for this schedule; set one in --config"))?;
        let slope = lab::fit_decay(&points, b.field)
            .map_err(|e| CliError::Assert(format!("band check on {}: {e}", b.field.name())))?
            .slope;
        if !b.contains(slope) {
            return Err(CliError::Assert(format!(
                "slope of {} is {slope:.4}, outside [{}, {}]",
                b.field.name(),
                b.lo,
                b.hi
            )));
        }
    }
    Ok(())
}

pub fn cmd_random(a: RandomArgs) -> CliResult {
    let mut cfg = load_config(&a.common)?;
    if a.delta.is_some() {
        cfg.delta = a.delta;
    }
    if let Some(d) = a.dist {
        cfg.dist = Some(match d {
            DistArg::Uniform => RandomDist::UniformSymmetric { m: a.m.unwrap_or(1.0) },
            DistArg::Rademacher => RandomDist::Rademacher,
            DistArg::Zero => RandomDist::Zero,
        });
    } else if let Some(m) = a.m {
        cfg.dist = Some(RandomDist::UniformSymmetric { m });
    }
    if a.trials.is_some() {
        cfg.trials = a.trials;
    }
    if a.seed.is_some() {
        cfg.seed = a.seed;
    }
    if a.lambda_factor.is_some() {
        cfg.lambda_factor = a.lambda_factor;
    }
    if a.coeff_threshold.is_some() {
        cfg.coeff_threshold = a.coeff_threshold;
    }
    if a.summary_out.is_some() {
        cfg.summary_out = a.summary_out.clone();
    }
    let delta = cfg.delta.ok_or_else(|| usage("delta", "required"))?;
    let ns = ladder(&cfg, "200:6400:x2")?;
    let ens_cfg = EnsembleConfig {
        delta,
        dist: cfg.dist.unwrap_or(RandomDist::UniformSymmetric { m: 1.0 }),
        ns,
        trials: cfg.trials.unwrap_or(200),
        seed: cfg.seed.unwrap_or(0),
        lambda_rule: LambdaRule::Proof {
            factor: cfg.lambda_factor.unwrap_or(1.0),
        },
        coeff_threshold: cfg.coeff_threshold.unwrap_or(random_lab::DEFAULT_COEFF_THRESHOLD),
    };
    ens_cfg.validate()?;
    if a.common.print_config {
        return print_config(&cfg);
    }
    let ens = random_lab::run_ensemble_with(&ens_cfg)?;
    if ens.records.is_empty() {
        return Err(CliError::Numerical(format!("all {} trials failed", ens.failures.len())));
    }
    if let Some(path) = &cfg.out {
        let mut csv = Vec::new();
        random_lab::write_trial_csv(&ens.records, &mut csv).map_err(|e| CliError::Numerical(e.to_string()))?;
        write_atomic(path, &csv)?;
    }
    let mut csv = Vec::new();
    random_lab::write_summary_csv(&ens.summaries, &mut csv).map_err(|e| CliError::Numerical(e.to_string()))?;
    emit_csv(cfg.summary_out.as_deref(), csv)?;

    let target = -(1.0 + delta) / 2.0;
    let medians: Vec<(usize, f64)> = ens.summaries.iter().map(|s| (s.n, s.median_qn)).collect();
    let q90s: Vec<(usize, f64)> = ens.summaries.iter().map(|s| (s.n, s.q90_qn)).collect();
    let median_fit = lab::fit_log_log(&medians);
    let q90_fit = lab::fit_log_log(&q90s);
    let mut text = format!(
        "random ensemble delta {delta}, {} trials, seed {}; {} failed trial(s)\n",
        ens_cfg.trials,
        ens_cfg.seed,
        ens.failures.len()
    );
    for (name, fit) in [("median |q_N|", &median_fit), ("q90 |q_N|", &q90_fit)] {
        match fit {
            Ok(f) => {
                let _ = writeln!(text, "fit {name}: slope {:.4} (target {target:.4} +- 0.2)", f.slope);
            }
            Err(e) => {
                let _ = writeln!(text, "fit {name}: undefined ({e})");
            }
        }
    }
    let rows = random_lab::exceedance_vs_bound(&ens.summaries);
    for r in &rows {
        let _ = writeln!(
            text,
            "N {}: exceedance {:.4} vs union bound {:.4e}{}",
            r.n,
            r.empirical,
            r.bound,
            if r.vacuous { " (vacuous)" } else { "" }
        );
    }
    report(cfg.summary_out.is_some(), &text);

    if let Some(path) = &cfg.svg {
        let fit_of = |f: &Result<lab::DecayFit, Error>| f.as_ref().ok().map(|f| (f.slope, f.intercept));
        let plot = svg::Plot {
            title: format!("random ensemble, delta = {delta}"),
            x_label: "N".into(),
            y_label: "|q_N| quantile".into(),
            series: vec![
                svg::Series {
                    label: "median".into(),
                    color: COLORS[0],
                    points: medians.iter().map(|(n, v)| (*n as f64, *v)).collect(),
                    fit: fit_of(&median_fit),
                },
                svg::Series {
                    label: "90th percentile".into(),
                    color: COLORS[1],
                    points: q90s.iter().map(|(n, v)| (*n as f64, *v)).collect(),
                    fit: fit_of(&q90_fit),
                },
            ],
            band: Some((target - 0.2, target + 0.2)),
        };
        write_svg(path, &plot)?;
    }

    if cfg.assert_band.unwrap_or(false) {
        let slope = median_fit
            .map_err(|e| CliError::Assert(format!("median fit: {e}")))?
            .slope;
        if (slope - target).abs() > 0.2 {
            return Err(CliError::Assert(format!(
                "median |q_N| slope {slope:.4} is not within 0.2 of {target:.4}"
            )));
        }
        if let Some(r) = rows.iter().find(|r| !r.within) {
            return Err(CliError::Assert(format!(
                "N {}: exceedance {:.4} above union bound {:.4e}",
                r.n, r.empirical, r.bound
            )));
        }
    }
    Ok(())
}

pub const COUNTER_CSV_HEADER: &str = "N,f_coeff_err,f_qN_abs,f_qN_limit_err,g_coeff_err,g_qN_abs";

/// `-2i/pi`, the limit of `q_N` on the divergent side.
pub fn counter_f_limit() -> Complex {
    Complex::new(0.0, -2.0 / PI)
}

pub fn cmd_counterexample(a: CounterArgs) -> CliResult {
    let mut cfg = load_config(&a.common)?;
    apply_region(&a.region, &mut cfg)?;
    let ns = ladder(&cfg, "100:12800:x2")?;
    if a.common.print_config {
        return print_config(&cfg);
    }
    let lab_cfg = lab_config(&cfg);
    let f_spec = ScheduleSpec::counterexample(CounterSide::MultiplicativeF);
    let g_spec = ScheduleSpec::counterexample(CounterSide::AdditiveG);
    let rows: Vec<_> = ns
        .par_iter()
        .map(|&n| -> crate::Result<_> {
            let f = lab::measure(&schedules::materialize(&f_spec, n)?, &lab_cfg).map_err(|e| Error::at(n, e))?;
            let g = lab::run_point_with(&g_spec, n, &lab_cfg).map_err(|e| Error::at(n, e))?;
            Ok((f.point, (f.triple.q[n] - counter_f_limit()).norm(), g))
        })
        .collect();
    let rows = lab::collect_points(rows)?;
    let mut csv = String::new();
    let _ = writeln!(csv, "{COUNTER_CSV_HEADER}");
    for (f, f_lim, g) in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            f.n,
            lab::fmt_real(f.coeff_err),
            lab::fmt_real(f.q_n_abs),
            lab::fmt_real(*f_lim),
            lab::fmt_real(g.coeff_err),
            lab::fmt_real(g.q_n_abs)
        );
    }
    emit_csv(cfg.out.as_deref(), csv.into_bytes())?;

    let g_points: Vec<RatePoint> = rows.iter().map(|r| r.2).collect();
    let f_points: Vec<RatePoint> = rows.iter().map(|r| r.0).collect();
    let (g_line, g_fit) = fit_line(&g_points, RateField::CoeffErr);
    let floor = 1.0 / PI - 0.07;
    let f_min = rows
        .iter()
        .filter(|r| r.0.n >= 500)
        .map(|r| r.0.coeff_err)
        .fold(f64::INFINITY, f64::min);
    let mut text = String::from("g side (converges): ");
    text.push_str(&g_line);
    let _ = writeln!(text, "f side (diverges): min coeff_err over N >= 500 is {f_min:.4} (floor {floor:.4})");
    if let Some(last) = rows.last() {
        let _ = writeln!(text, "f side at N = {}: |q_N + 2i/pi| = {:.4e}", last.0.n, last.1);
    }
    report(cfg.out.is_some(), &text);

    if let Some(path) = &cfg.svg {
        let plot = svg::Plot {
            title: "conjugate pair: f diverges, g converges".into(),
            x_label: "N".into(),
            y_label: "coeff_err".into(),
            series: vec![
                svg::Series {
                    label: "g (additive)".into(),
                    color: COLORS[1],
                    points: g_points.iter().map(|p| (p.n as f64, p.coeff_err)).collect(),
                    fit: g_fit.map(|f| (f.slope, f.intercept)),
                },
                svg::Series {
                    label: "f (multiplicative)".into(),
                    color: COLORS[0],
                    points: f_points.iter().map(|p| (p.n as f64, p.coeff_err)).collect(),
                    fit: None,
                },
            ],
            band: None,
        };
        write_svg(path, &plot)?;
    }

    if cfg.assert_band.unwrap_or(false) {
        let slope = lab::fit_decay(&g_points, RateField::CoeffErr)
            .map_err(|e| CliError::Assert(format!("g fit: {e}")))?
            .slope;
        if slope > -0.6 {
            return Err(CliError::Assert(format!("g-side slope {slope:.4} above -0.6")));
        }
        if f_min < floor {
            return Err(CliError::Assert(format!("f-side coeff_err {f_min:.4} below {floor:.4}")));
        }
    }
    Ok(())
}

pub fn cmd_skew(a: SkewArgs) -> CliResult {
    let mut cfg = load_config(&a.common)?;
    apply_region(&a.region, &mut cfg)?;
    if !a.examples.is_empty() {
        cfg.examples = Some(a.examples.clone());
    }
    let ids = cfg.examples.clone().unwrap_or_else(|| vec![1, 2, 3, 4, 5]);
    for &id in &ids {
        skew::build_example(id, schedules::MIN_N)?;
    }
    let ns = ladder(&cfg, "100:12800:x2")?;
    if a.common.print_config {
        return print_config(&cfg);
    }
    let lab_cfg = lab_config(&cfg);
    let jobs: Vec<(u8, usize)> = ids.iter().flat_map(|&id| ns.iter().map(move |&n| (id, n))).collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(id, n)| -> crate::Result<_> {
            let sys = skew::build_example(id, n)?;
            Ok((id, skew::iterate_skew(&sys, n, &lab_cfg).map_err(|e| Error::at(n, e))?))
        })
        .collect();
    let rows = lab::collect_points(results)?;
    let mut csv = Vec::new();
    skew::write_skew_csv(&rows, &mut csv).map_err(|e| CliError::Numerical(e.to_string()))?;
    emit_csv(cfg.out.as_deref(), csv)?;

    let mut text = String::new();
    let mut failures = Vec::new();
    let mut plot_series = Vec::new();
    for (i, &id) in ids.iter().enumerate() {
        let mine: Vec<_> = rows.iter().filter(|r| r.0 == id).map(|r| r.1).collect();
        let pairs: Vec<(usize, f64)> = mine.iter().map(|r| (r.n, r.fiber_coeff_err)).collect();
        let max_err = mine.iter().map(|r| r.fiber_coeff_err).fold(0.0, f64::max);
        let w_shrinks = mine.windows(2).all(|w| w[1].w_final.norm() < w[0].w_final.norm());
        let fit = if pairs.len() >= 3 { lab::fit_log_log(&pairs).ok() } else { None };
        match fit {
            Some(f) => {
                let _ = writeln!(text, "example {id}: fiber_coeff_err slope {:.4}, max {max_err:.3e}", f.slope);
            }
            None => {
                let _ = writeln!(text, "example {id}: no decay fit, max fiber_coeff_err {max_err:.3e}");
            }
        }
        if id == 1 {
            if max_err > 1e-9 {
                failures.push(format!("example 1 fiber_coeff_err {max_err:.3e} above 1e-9"));
            }
        } else {
            match fit {
                Some(f) if f.slope <= -0.5 => {}
                Some(f) => failures.push(format!("example {id} slope {:.4} above -0.5", f.slope)),
                None => failures.push(format!("example {id} has no decay fit")),
            }
            if !w_shrinks {
                failures.push(format!("example {id}: |w_N| does not decrease along the ladder"));
            }
        }
        plot_series.push(svg::Series {
            label: format!("example {id}"),
            color: COLORS[i % COLORS.len()],
            points: pairs.iter().map(|(n, v)| (*n as f64, *v)).collect(),
            fit: fit.map(|f| (f.slope, f.intercept)),
        });
    }
    report(cfg.out.is_some(), &text);
    if let Some(path) = &cfg.svg {
        let plot = svg::Plot {
            title: "skew products: fiber distance to the identity".into(),
            x_label: "N".into(),
            y_label: "fiber_coeff_err".into(),
            series: plot_series,
            band: None,
        };
        write_svg(path, &plot)?;
    }
    if cfg.assert_band.unwrap_or(false) && !failures.is_empty() {
        return Err(CliError::Assert(failures.join("; ")));
    }
    Ok(())
}

/// Relative tolerance of the randomized oracle comparison.
pub const ORACLE_CLI_TOL: f64 = 1e-9;

pub fn cmd_oracle(a: OracleArgs) -> CliResult {
    let mut cfg = load_config(&a.common)?;
    if a.trials.is_some() {
        cfg.trials = a.trials;
    }
    if a.n_max.is_some() {
        cfg.n_max = a.n_max;
    }
    if a.seed.is_some() {
        cfg.seed = a.seed;
    }
    let trials = cfg.trials.unwrap_or(200);
    let n_max = cfg.n_max.unwrap_or(512);
    let seed = cfg.seed.unwrap_or(1);
    if trials == 0 {
        return Err(usage("trials", "must be positive"));
    }
    if n_max < schedules::MIN_N {
        return Err(usage("n_max", "must be at least 4"));
    }
    if a.common.print_config {
        return print_config(&cfg);
    }
    let sizes: Vec<usize> = {
        let s: Vec<usize> = lab::ORACLE_SIZES.iter().copied().filter(|&n| n <= n_max).collect();
        if s.is_empty() {
            vec![n_max]
        } else {
            s
        }
    };
    let results: Vec<_> = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> crate::Result<(u64, usize, f64)> {
            let n = sizes[t as usize % sizes.len()];
            let seqs = lab::oracle_schedule(seed, t, n)?;
            Ok((t, n, lab::oracle_deviation(&seqs).map_err(|e| Error::at(n, e))?))
        })
        .collect();
    let rows = lab::collect_points(results)?;
    if let Some(path) = &cfg.out {
        let mut csv = String::from("trial,N,deviation\n");
        for (t, n, d) in &rows {
            let _ = writeln!(csv, "{t},{n},{}", lab::fmt_real(*d));
        }
        write_atomic(path, csv.as_bytes())?;
    }
    let (worst_t, worst_n, worst) = rows
        .iter()
        .copied()
        .fold((0, 0, 0.0f64), |acc, r| if r.2 > acc.2 { r } else { acc });
    println!("oracle: {trials} trials, N in {sizes:?}, max relative deviation {worst:.3e} (trial {worst_t}, N {worst_n})");
    if !(worst <= ORACLE_CLI_TOL) {
        return Err(CliError::Numerical(format!(
            "recurrence and chain disagree: {worst:.3e} > {ORACLE_CLI_TOL:e}"
        )));
    }
    Ok(())
}

pub fn cmd_diagnose_sum(a: DiagnoseArgs) -> CliResult {
    let mut cfg = load_config(&a.common)?;
    apply_schedule(&a.schedule, &mut cfg)?;
    let spec = cfg.schedule.clone().expect("schedule resolved");
    let ns = ladder(&cfg, "100:12800:x2")?;
    if a.common.print_config {
        return print_config(&cfg);
    }
    let rows: Vec<_> = ns
        .par_iter()
        .map(|&n| -> crate::Result<_> {
            let seqs = schedules::materialize(&spec, n).map_err(|e| Error::at(n, e))?;
            let (sum, scaled) = schedules::summation_diagnostic(&seqs);
            Ok((n, sum, scaled))
        })
        .collect();
    let rows = lab::collect_points(rows)?;
    let mut csv = String::from("N,sum_re,sum_im,scaled\n");
    for (n, sum, scaled) in &rows {
        let _ = writeln!(
            csv,
            "{n},{},{},{}",
            lab::fmt_real(sum.re),
            lab::fmt_real(sum.im),
            lab::fmt_real(*scaled)
        );
    }
    emit_csv(cfg.out.as_deref(), csv.into_bytes())?;
    if cfg.out.is_some() {
        for (n, _, scaled) in &rows {
            println!("N {n}: N |sum a_k T_k| = {scaled:.6e}");
        }
    }
    Ok(())
}
