//! Skew products `F(z, w) = (f_w(z), mu w)`: the base orbit `w_k = mu^k w_0`
//! supplies the fiber parameters, step `k` reading `w_{k-1}`.

use std::f64::consts::PI;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lab::{fmt_real, measure, LabConfig};
use crate::mobius::Complex;
use crate::recurrences::{root_of_unity, PerturbationSequences};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierRule {
    One,
    MinusOne,
    /// `e^{2 pi i / N}`
    RootOfUnity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaRule {
    /// `theta(w) = w`
    WItself,
    /// `theta(w) = 1/N + w`
    OffsetPlusW,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsSqRule {
    Zero,
    WSquared,
    WFourth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum W0Rule {
    /// `1/N`
    InverseN,
    /// `-1/N^2`
    MinusInverseNSquared,
    /// `e^{2 pi i/N} / N^2`
    RotatedInverseNSquared,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkewSystem {
    pub base_multiplier: MultiplierRule,
    pub fiber_theta_rule: ThetaRule,
    pub fiber_eps_sq_rule: EpsSqRule,
    pub w0_rule: W0Rule,
}

impl SkewSystem {
    /// `mu^k` for this `N`, exact for `mu = +-1`.
    pub fn multiplier_power(&self, k: usize, n: usize) -> Complex {
        match self.base_multiplier {
            MultiplierRule::One => Complex::new(1.0, 0.0),
            MultiplierRule::MinusOne => Complex::new(if k.is_multiple_of(2) { 1.0 } else { -1.0 }, 0.0),
            MultiplierRule::RootOfUnity => Complex::from_polar(1.0, 2.0 * PI * k as f64 / n as f64),
        }
    }

    pub fn multiplier(&self, n: usize) -> Complex {
        self.multiplier_power(1, n)
    }

    pub fn w0(&self, n: usize) -> Complex {
        let nf = n as f64;
        match self.w0_rule {
            W0Rule::InverseN => Complex::new(1.0 / nf, 0.0),
            W0Rule::MinusInverseNSquared => Complex::new(-1.0 / (nf * nf), 0.0),
            W0Rule::RotatedInverseNSquared => root_of_unity(n) / (nf * nf),
        }
    }

    /// Closed form `w_k = mu^k w_0`.
    pub fn w(&self, k: usize, n: usize) -> Complex {
        self.multiplier_power(k, n) * self.w0(n)
    }

    fn rho_of(&self, w: Complex, n: usize) -> Complex {
        let phase = Complex::new(0.0, 2.0 * PI) * w;
        match self.fiber_theta_rule {
            ThetaRule::WItself => phase.exp(),
            ThetaRule::OffsetPlusW => root_of_unity(n) * phase.exp(),
        }
    }

    fn eps_sq_of(&self, w: Complex) -> Complex {
        match self.fiber_eps_sq_rule {
            EpsSqRule::Zero => Complex::new(0.0, 0.0),
            EpsSqRule::WSquared => w * w,
            EpsSqRule::WFourth => (w * w) * (w * w),
        }
    }

    /// Fiber schedule for steps `1..=N+1`: `rho_k = e^{2 pi i theta(w_{k-1})}`,
    /// `eps_k^2 = eps^2(w_{k-1})`.
    pub fn fiber_sequences(&self, n: usize) -> Result<PerturbationSequences> {
        if n < crate::schedules::MIN_N {
            return Err(Error::invalid("n", "N must be at least 4"));
        }
        let ws: Vec<Complex> = (0..=n).map(|k| self.w(k, n)).collect();
        PerturbationSequences::new(
            n,
            ws.iter().map(|w| self.rho_of(*w, n)).collect(),
            ws.iter().map(|w| self.eps_sq_of(*w)).collect(),
        )
    }
}

pub fn build_example(id: u8, n: usize) -> Result<SkewSystem> {
    use EpsSqRule::*;
    use MultiplierRule::*;
    use ThetaRule::*;
    use W0Rule::*;
    if n < crate::schedules::MIN_N {
        return Err(Error::invalid("n", "N must be at least 4"));
    }
    let (base_multiplier, fiber_theta_rule, fiber_eps_sq_rule, w0_rule) = match id {
        1 => (One, WItself, Zero, InverseN),
        2 => (MinusOne, OffsetPlusW, Zero, MinusInverseNSquared),
        3 => (RootOfUnity, OffsetPlusW, Zero, RotatedInverseNSquared),
        4 => (One, WItself, WFourth, InverseN),
        5 => (MinusOne, OffsetPlusW, WSquared, MinusInverseNSquared),
        _ => return Err(Error::invalid("example", format!("examples are 1-5, got {id}"))),
    };
    Ok(SkewSystem {
        base_multiplier,
        fiber_theta_rule,
        fiber_eps_sq_rule,
        w0_rule,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkewOrbitResult {
    pub n: usize,
    pub w_final: Complex,
    pub fiber_coeff_err: f64,
    pub fiber_sup_err: f64,
}

pub fn iterate_skew(sys: &SkewSystem, n: usize, config: &LabConfig) -> Result<SkewOrbitResult> {
    let seqs = sys.fiber_sequences(n)?;
    let m = measure(&seqs, config)?;
    Ok(SkewOrbitResult {
        n,
        w_final: sys.w(n, n),
        fiber_coeff_err: m.point.coeff_err,
        fiber_sup_err: m.point.sup_err,
    })
}

pub const SKEW_CSV_HEADER: &str = "example_id,N,w_final_abs,fiber_coeff_err,fiber_sup_err";

pub fn write_skew_csv<W: Write>(rows: &[(u8, SkewOrbitResult)], mut out: W) -> io::Result<()> {
    writeln!(out, "{SKEW_CSV_HEADER}")?;
    for (id, r) in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            id,
            r.n,
            fmt_real(r.w_final.norm()),
            fmt_real(r.fiber_coeff_err),
            fmt_real(r.fiber_sup_err),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let e1 = build_example(1, 100).unwrap();
        assert_eq!(e1.multiplier(100), Complex::new(1.0, 0.0));
        assert_eq!(e1.w0(100), Complex::new(0.01, 0.0));
        assert_eq!(e1.fiber_eps_sq_rule, EpsSqRule::Zero);
        let e2 = build_example(2, 100).unwrap();
        assert_eq!(e2.multiplier(100), Complex::new(-1.0, 0.0));
        assert_eq!(e2.fiber_theta_rule, ThetaRule::OffsetPlusW);
        assert_eq!(e2.w0(100), Complex::new(-1e-4, 0.0));
        let e4 = build_example(4, 100).unwrap();
        assert_eq!(e4.fiber_eps_sq_rule, EpsSqRule::WFourth);
        assert_eq!(e4.fiber_theta_rule, ThetaRule::WItself);
        assert!(build_example(0, 100).is_err());
        assert!(build_example(6, 100).is_err());
    }

    #[test]
    fn step_k_reads_previous_base_point() {
        let sys = build_example(2, 10).unwrap();
        let s = sys.fiber_sequences(10).unwrap();
        // w_0 = -1/N^2 feeds step 1
        let expected = root_of_unity(10) * (Complex::new(0.0, 2.0 * PI) * Complex::new(-0.01, 0.0)).exp();
        assert_eq!(s.rho(1), expected);
        let expected = root_of_unity(10) * (Complex::new(0.0, 2.0 * PI) * Complex::new(0.01, 0.0)).exp();
        assert_eq!(s.rho(2), expected);
    }

    #[test]
    fn example_one_is_exact() {
        let sys = build_example(1, 1000).unwrap();
        let r = iterate_skew(&sys, 1000, &LabConfig::default()).unwrap();
        assert!(r.fiber_coeff_err <= 1e-9);
    }
}
