//! Perturbation schedules: each [`ScheduleSpec`] materializes into concrete
//! `rho_k`, `eps_k^2` for a given `N`.

pub mod rng;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobius::Complex;
use crate::recurrences::{closed_form_t, root_of_unity, PerturbationSequences};

pub const MIN_N: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub variant: Variant,
    #[serde(default)]
    pub params: ScheduleParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Variant {
    TheoremA { case: u8 },
    TheoremB { case: u8 },
    QuadraticNonconvergent,
    CounterexampleC { side: CounterSide },
    Random {
        delta: f64,
        dist: RandomDist,
        seed: u64,
        trial: u64,
    },
    /// Explicit sequences for steps `1..=N+1`.
    Custom {
        rho: Vec<Complex>,
        eps_sq: Vec<Complex>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterSide {
    MultiplicativeF,
    AdditiveG,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleParams {
    /// Bound on the remainder coefficients `u_k`, `gamma_j`, `c_k`.
    pub amplitude: f64,
    /// `N^2 |eps_k|` in Theorem B cases 1-3.
    pub eps_amp: f64,
    /// `N |c_k + c_{k'}|` for the pair-cancelling generators.
    pub pair_bound: f64,
    /// Constant of the rotating schedule.
    pub c: Complex,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        ScheduleParams {
            amplitude: 1.0,
            eps_amp: 1.0,
            pair_bound: 1.0,
            c: Complex::new(1.0, 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RandomDist {
    /// Uniform on `[-m, m]`.
    UniformSymmetric { m: f64 },
    /// `+-1` with equal probability.
    Rademacher,
    /// Degenerate at 0.
    Zero,
}

impl RandomDist {
    /// Almost-sure bound on `|eta|`.
    pub fn bound(&self) -> f64 {
        match *self {
            RandomDist::UniformSymmetric { m } => m,
            RandomDist::Rademacher => 1.0,
            RandomDist::Zero => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let RandomDist::UniformSymmetric { m } = *self {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::invalid("dist.m", "must be positive and finite"));
            }
        }
        Ok(())
    }

    pub fn sample(&self, word: u64) -> f64 {
        match *self {
            RandomDist::UniformSymmetric { m } => m * (2.0 * rng::unit_f64(word) - 1.0),
            RandomDist::Rademacher => {
                if word >> 63 == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
            RandomDist::Zero => 0.0,
        }
    }
}

/// `eta_k` for steps `1..=n+1` of stream `(seed, trial)`, lane 0.
pub fn random_etas(dist: &RandomDist, seed: u64, trial: u64, n: usize) -> Vec<f64> {
    let key = rng::stream_key(seed, trial);
    (1..=n as u64 + 1)
        .map(|k| dist.sample(rng::word_from_key(key, k, 0)))
        .collect()
}

/// Which closed form the composition is compared against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `rho` near `e^{2 pi i / N}`; comparison `T_k`, limits `q_{N+1}, r_N, r_{N+1} -> 1`.
    Rotation,
    /// `rho == 1`; comparison `U_k(2 cos(pi/N))`, limits `q_{N+1}, r_N, r_{N+1} -> -1`.
    Additive,
}

impl Regime {
    pub fn of(seqs: &PerturbationSequences) -> Regime {
        if seqs.rho_values().iter().all(|r| *r == Complex::new(1.0, 0.0)) {
            Regime::Additive
        } else {
            Regime::Rotation
        }
    }

    pub fn limit(self) -> f64 {
        match self {
            Regime::Rotation => 1.0,
            Regime::Additive => -1.0,
        }
    }
}

impl ScheduleSpec {
    pub fn new(variant: Variant) -> Self {
        ScheduleSpec {
            variant,
            params: ScheduleParams::default(),
        }
    }

    pub fn with_params(mut self, params: ScheduleParams) -> Self {
        self.params = params;
        self
    }

    pub fn theorem_a(case: u8) -> Self {
        Self::new(Variant::TheoremA { case })
    }

    pub fn theorem_b(case: u8) -> Self {
        Self::new(Variant::TheoremB { case })
    }

    pub fn random(delta: f64, dist: RandomDist, seed: u64, trial: u64) -> Self {
        Self::new(Variant::Random {
            delta,
            dist,
            seed,
            trial,
        })
    }

    pub fn counterexample(side: CounterSide) -> Self {
        Self::new(Variant::CounterexampleC { side })
    }

    /// Parses and validates a JSON schedule document.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ScheduleSpec = serde_json::from_str(text).map_err(|e| Error::invalid("schedule", e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn is_random(&self) -> bool {
        matches!(self.variant, Variant::Random { .. })
    }

    /// Short identifier used in CSV names and log lines.
    pub fn label(&self) -> String {
        match &self.variant {
            Variant::TheoremA { case } => format!("A{case}"),
            Variant::TheoremB { case } => format!("B{case}"),
            Variant::QuadraticNonconvergent => "quadratic".into(),
            Variant::CounterexampleC { side: CounterSide::MultiplicativeF } => "C-f".into(),
            Variant::CounterexampleC { side: CounterSide::AdditiveG } => "C-g".into(),
            Variant::Random { delta, seed, trial, .. } => format!("random-d{delta}-s{seed}-t{trial}"),
            Variant::Custom { .. } => "custom".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        for (name, v) in [
            ("amplitude", p.amplitude),
            ("eps_amp", p.eps_amp),
            ("pair_bound", p.pair_bound),
            ("c", p.c.re),
            ("c", p.c.im),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        match &self.variant {
            Variant::TheoremA { case } if !(1..=3).contains(case) => {
                Err(Error::invalid("case", format!("Theorem A has cases 1-3, got {case}")))
            }
            Variant::TheoremB { case } if !(1..=5).contains(case) => {
                Err(Error::invalid("case", format!("Theorem B has cases 1-5, got {case}")))
            }
            Variant::Random { delta, dist, .. } => {
                if !(delta.is_finite() && *delta > 0.0) {
                    return Err(Error::invalid("delta", "must be positive"));
                }
                dist.validate()
            }
            _ => Ok(()),
        }
    }
}

/// `rho * e^{2 pi i dtheta}`, keeping the base angle exact.
fn rotate(base: Complex, dtheta: Complex) -> Complex {
    if dtheta == Complex::new(0.0, 0.0) {
        base
    } else {
        base * (Complex::new(0.0, 2.0 * PI) * dtheta).exp()
    }
}

fn real(x: f64) -> Complex {
    Complex::new(x, 0.0)
}

/// Steps `k = 1..=N+1` of the rotation-regime remainder `theta_k - 1/N` for
/// Theorem A/B cases 1-3.
fn rotation_offsets(case: u8, n: usize, p: &ScheduleParams) -> Vec<Complex> {
    let nf = n as f64;
    (1..=n + 1)
        .map(|k| match case {
            // u_k = amplitude cos(pi k/N)
            1 => real(p.amplitude * (PI * k as f64 / nf).cos() / (nf * nf * nf)),
            // c_{2j-1} = gamma, c_{2j} = -gamma + pair_bound/N
            2 => {
                let c = if k % 2 == 1 {
                    p.amplitude
                } else {
                    -p.amplitude + p.pair_bound / nf
                };
                real(c / (nf * nf))
            }
            _ => p.c * Complex::from_polar(1.0, 2.0 * PI * k as f64 / nf) / (nf * nf),
        })
        .collect()
}

fn counter_theta(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        PI / (n as f64 - 1.0)
    } else {
        PI / (n as f64 + 1.0)
    }
}

pub fn materialize(spec: &ScheduleSpec, n: usize) -> Result<PerturbationSequences> {
    spec.validate()?;
    if n < MIN_N {
        return Err(Error::invalid("n", format!("N must be at least {MIN_N}, got {n}")));
    }
    let p = &spec.params;
    let nf = n as f64;
    let zero = vec![Complex::new(0.0, 0.0); n + 1];
    let ones = vec![real(1.0); n + 1];
    let base = root_of_unity(n);
    let (rho, eps_sq) = match &spec.variant {
        Variant::TheoremA { case } => {
            let rho = rotation_offsets(*case, n, p).into_iter().map(|d| rotate(base, d)).collect();
            (rho, zero)
        }
        Variant::TheoremB { case: case @ 1..=3 } => {
            let rho = rotation_offsets(*case, n, p).into_iter().map(|d| rotate(base, d)).collect();
            let e = p.eps_amp / (nf * nf);
            (rho, vec![real(e * e); n + 1])
        }
        Variant::TheoremB { case } => {
            let eps_sq = (1..=n + 1)
                .map(|k| {
                    let cos = (PI * k as f64 / nf).cos();
                    let e = if *case == 4 {
                        PI / nf + p.amplitude * cos / (nf * nf * nf)
                    } else {
                        // c_k + c_{N-k} = pair_bound/N exactly
                        let c = p.amplitude * cos + p.pair_bound / (2.0 * nf);
                        PI / nf + c / (nf * nf)
                    };
                    real(e * e)
                })
                .collect();
            (ones, eps_sq)
        }
        Variant::QuadraticNonconvergent => (vec![root_of_unity(n + 1); n + 1], zero),
        Variant::CounterexampleC { side } => {
            if !n.is_multiple_of(2) {
                return Err(Error::invalid("n", format!("counterexample needs even N, got {n}")));
            }
            let thetas = (1..=n + 1).map(|k| counter_theta(k, n));
            match side {
                CounterSide::MultiplicativeF => (thetas.map(|t| Complex::from_polar(1.0, 2.0 * t)).collect(), zero),
                CounterSide::AdditiveG => (
                    ones,
                    thetas
                        .map(|t| {
                            let e = 2.0 * (t / 2.0).sin();
                            real(e * e)
                        })
                        .collect(),
                ),
            }
        }
        Variant::Random {
            delta,
            dist,
            seed,
            trial,
        } => {
            let scale = nf.powf(1.0 + delta);
            let eps_sq = random_etas(dist, *seed, *trial, n)
                .into_iter()
                .map(|eta| {
                    let e = PI / nf + eta / scale;
                    real(e * e)
                })
                .collect();
            (ones, eps_sq)
        }
        Variant::Custom { rho, eps_sq } => (rho.clone(), eps_sq.clone()),
    };
    PerturbationSequences::new(n, rho, eps_sq)
}

/// `(sum_{k=1}^{N-1} a_k T_k, N |sum|)`.
pub fn summation_diagnostic(seqs: &PerturbationSequences) -> (Complex, f64) {
    let n = seqs.n();
    let sum: Complex = (1..n).map(|k| seqs.a(k) * closed_form_t(k, n)).sum();
    (sum, n as f64 * sum.norm())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Conjugacy {
    pub rho: Complex,
    pub eps: f64,
    pub residual: f64,
}

/// `rho = e^{2 i theta}`, `eps = 2 sin(theta/2)` and the residual of
/// `sqrt(rho) + 1/sqrt(rho) = 2 - eps^2`, with the branch `sqrt(rho) = e^{i theta}`.
/// Meaningful for `|theta| < pi`.
pub fn conjugacy_check(theta: f64) -> Conjugacy {
    let rho = Complex::from_polar(1.0, 2.0 * theta);
    let root = Complex::from_polar(1.0, theta);
    let eps = 2.0 * (theta / 2.0).sin();
    let residual = (root + root.inv() - (2.0 - eps * eps)).norm();
    Conjugacy { rho, eps, residual }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_and_rejection() {
        let spec = ScheduleSpec::random(0.5, RandomDist::UniformSymmetric { m: 1.0 }, 42, 3);
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<ScheduleSpec>(&text).unwrap(), spec);
        let a: ScheduleSpec = serde_json::from_str(r#"{"variant":{"kind":"theorem_a","case":2}}"#).unwrap();
        assert_eq!(a, ScheduleSpec::theorem_a(2));
        let c: ScheduleSpec =
            serde_json::from_str(r#"{"variant":{"kind":"counterexample_c","side":"additive_g"},"params":{"amplitude":0.5}}"#)
                .unwrap();
        assert_eq!(c.params.amplitude, 0.5);
        assert_eq!(c.params.pair_bound, 1.0);
        for bad in [
            r#"{"variant":{"kind":"theorem_a","case":2,"extra":1}}"#,
            r#"{"variant":{"kind":"theorem_a","case":2},"extra":1}"#,
            r#"{"variant":{"kind":"theorem_a","case":2},"params":{"amp":1}}"#,
            r#"{"variant":{"kind":"theorem_z"}}"#,
        ] {
            assert!(serde_json::from_str::<ScheduleSpec>(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn case_range_is_checked() {
        for spec in [ScheduleSpec::theorem_a(0), ScheduleSpec::theorem_a(4), ScheduleSpec::theorem_b(6)] {
            match materialize(&spec, 100) {
                Err(Error::InvalidSpec { field, .. }) => assert_eq!(field, "case"),
                other => panic!("{other:?}"),
            }
        }
        assert!(materialize(&ScheduleSpec::theorem_a(1), 3).is_err());
        assert!(materialize(&ScheduleSpec::counterexample(CounterSide::AdditiveG), 101).is_err());
        assert!(materialize(&ScheduleSpec::random(0.0, RandomDist::Rademacher, 1, 0), 100).is_err());
    }

    #[test]
    fn zero_amplitude_a1_is_the_exact_rotation() {
        let spec = ScheduleSpec::theorem_a(1).with_params(ScheduleParams {
            amplitude: 0.0,
            ..Default::default()
        });
        let s = materialize(&spec, 100).unwrap();
        assert!(s.rho_values().iter().all(|r| *r == root_of_unity(100)));
        assert!(s.is_multiplicative_only());
    }

    #[test]
    fn counterexample_g_satisfies_conjugacy() {
        let n = 2000;
        let f = materialize(&ScheduleSpec::counterexample(CounterSide::MultiplicativeF), n).unwrap();
        let g = materialize(&ScheduleSpec::counterexample(CounterSide::AdditiveG), n).unwrap();
        for k in 1..=n + 1 {
            let rho = f.rho(k);
            let root = Complex::from_polar(1.0, rho.arg() / 2.0);
            let resid = (root + root.inv() - (2.0 - g.eps_sq(k))).norm();
            assert!(resid <= 1e-14, "k = {k}: {resid}");
        }
    }

    #[test]
    fn random_is_deterministic() {
        let spec = ScheduleSpec::random(0.5, RandomDist::UniformSymmetric { m: 1.0 }, 42, 0);
        let a = materialize(&spec, 500).unwrap();
        let b = materialize(&spec, 500).unwrap();
        assert_eq!(a, b);
        for (x, y) in a.eps_sq_values().iter().zip(b.eps_sq_values()) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
        }
        let c = materialize(&ScheduleSpec::random(0.5, RandomDist::UniformSymmetric { m: 1.0 }, 42, 1), 500).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn quadratic_uses_exact_angle() {
        let s = materialize(&ScheduleSpec::new(Variant::QuadraticNonconvergent), 1000).unwrap();
        assert_eq!(s.rho(1), Complex::from_polar(1.0, 2.0 * PI / 1001.0));
    }

    #[test]
    fn conjugacy_examples() {
        let c = conjugacy_check(0.0);
        assert_eq!((c.rho, c.eps, c.residual), (real(1.0), 0.0, 0.0));
        let c = conjugacy_check(PI / 1999.0);
        assert!(c.residual <= 1e-14);
        let c = conjugacy_check(PI / 2.0);
        assert!((c.rho + 1.0).norm() < 1e-15);
        assert!((c.eps - 2f64.sqrt()).abs() < 1e-15);
        assert!(c.residual <= 1e-14);
    }

    #[test]
    fn regimes() {
        let b4 = materialize(&ScheduleSpec::theorem_b(4), 64).unwrap();
        assert_eq!(Regime::of(&b4), Regime::Additive);
        let b1 = materialize(&ScheduleSpec::theorem_b(1), 64).unwrap();
        assert_eq!(Regime::of(&b1), Regime::Rotation);
    }

    #[test]
    fn rademacher_and_zero() {
        let etas = random_etas(&RandomDist::Rademacher, 9, 0, 1000);
        assert!(etas.iter().all(|e| e.abs() == 1.0));
        let plus = etas.iter().filter(|e| **e > 0.0).count();
        assert!((400..600).contains(&plus));
        assert!(random_etas(&RandomDist::Zero, 9, 0, 10).iter().all(|e| *e == 0.0));
    }
}
