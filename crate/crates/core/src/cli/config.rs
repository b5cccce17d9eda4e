//! Experiment documents for `--config` and the N-ladder syntax.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lab::RateField;
use crate::mobius::EvalRegion;
use crate::schedules::{RandomDist, ScheduleSpec};

/// Parses `start:end:xFACTOR`, `start:end:+STEP`, a comma list, or a single N.
pub fn parse_ladder(text: &str) -> Result<Vec<usize>> {
    let bad = |reason: &str| Error::invalid("n", format!("{reason} in ladder {text:?}"));
    let parts: Vec<&str> = text.trim().split(':').collect();
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad("expected an integer"));
    let ns = match parts.as_slice() {
        [single] => single.split(',').map(num).collect::<Result<Vec<_>>>()?,
        [start, end, step] => {
            let (start, end) = (num(start)?, num(end)?);
            if start == 0 || start > end {
                return Err(bad("need 0 < start <= end"));
            }
            let mut out = Vec::new();
            if let Some(f) = step.strip_prefix('x') {
                let f = num(f)?;
                if f < 2 {
                    return Err(bad("factor must be at least 2"));
                }
                let mut n = start;
                while n <= end {
                    out.push(n);
                    n = n.checked_mul(f).ok_or_else(|| bad("overflow"))?;
                }
            } else if let Some(s) = step.strip_prefix('+') {
                let s = num(s)?;
                if s == 0 {
                    return Err(bad("step must be positive"));
                }
                out.extend((start..=end).step_by(s));
            } else {
                return Err(bad("step must start with 'x' or '+'"));
            }
            out
        }
        _ => return Err(bad("expected start:end:xF or start:end:+S")),
    };
    crate::lab::check_ladder(&ns)?;
    Ok(ns)
}

/// Ladder as written in a config document: the flag syntax or a list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LadderSpec {
    Text(String),
    List(Vec<usize>),
}

impl LadderSpec {
    pub fn resolve(&self) -> Result<Vec<usize>> {
        match self {
            LadderSpec::Text(t) => parse_ladder(t),
            LadderSpec::List(v) => {
                crate::lab::check_ladder(v)?;
                Ok(v.clone())
            }
        }
    }
}

/// Slope band `[lo, hi]` on a fitted field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub field: RateField,
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn contains(&self, slope: f64) -> bool {
        self.lo <= slope && slope <= self.hi
    }
}

/// Every field is optional; command-line flags take precedence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schedule: Option<ScheduleSpec>,
    pub n: Option<LadderSpec>,
    pub region: Option<EvalRegion>,
    pub oracle_limit: Option<usize>,
    pub compensated: Option<bool>,
    pub field: Option<RateField>,
    pub band: Option<Band>,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub summary_out: Option<PathBuf>,
    #[serde(rename = "assert")]
    pub assert_band: Option<bool>,
    pub delta: Option<f64>,
    pub dist: Option<RandomDist>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub lambda_factor: Option<f64>,
    pub coeff_threshold: Option<f64>,
    pub examples: Option<Vec<u8>>,
    pub n_max: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid("config", e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladders() {
        assert_eq!(parse_ladder("100:12800:x2").unwrap(), crate::lab::default_ladder());
        assert_eq!(parse_ladder("200:1000:+200").unwrap(), vec![200, 400, 600, 800, 1000]);
        assert_eq!(parse_ladder("1000").unwrap(), vec![1000]);
        assert_eq!(parse_ladder("16,64,256").unwrap(), vec![16, 64, 256]);
        assert_eq!(parse_ladder("100:150:x2").unwrap(), vec![100]);
        for bad in ["", "a:b:x2", "100:50:x2", "100:200:x1", "100:200:*2", "1:2:3:4", "2", "64,16", "100:200:+0"] {
            match parse_ladder(bad) {
                Err(Error::InvalidSpec { field, .. }) => assert_eq!(field, "n", "{bad}"),
                other => panic!("{bad}: {other:?}"),
            }
        }
    }

    #[test]
    fn documents() {
        let c = ExperimentConfig::from_json(
            r#"{"schedule":{"variant":{"kind":"theorem_b","case":4}},"n":"100:400:x2","assert":true,
                "band":{"field":"coeff_err","lo":-1.4,"hi":-0.6}}"#,
        )
        .unwrap();
        assert_eq!(c.n.unwrap().resolve().unwrap(), vec![100, 200, 400]);
        assert_eq!(c.assert_band, Some(true));
        let c = ExperimentConfig::from_json(r#"{"n":[8,16]}"#).unwrap();
        assert_eq!(c.n.unwrap().resolve().unwrap(), vec![8, 16]);
        assert!(ExperimentConfig::from_json(r#"{"ladder":"1:2:x2"}"#).is_err());
    }
}
