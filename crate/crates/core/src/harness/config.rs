//! Experiment configuration and its flat `key = value` file format.
//!
//! ```text
//! # comments and blank lines are ignored
//! n_values = 1000
//! d_values = 10, 50, 100, 200
//! gamma = 0.1
//! epsilon = 1
//! tau = 0.05
//! c_thresh = 1
//! trials = 20
//! base_seed = 7
//! methods = dp_robust, dp_plain, dp_winsorized
//! winsorize.alpha = 0.05
//! winsorize.range_bound = 10
//! adversary = constant_cluster:10
//! corrupt_baselines = false
//! record_timing = false
//! ```

use std::fmt;
use std::str::FromStr;

use crate::datagen::Adversary;
use crate::error::{Error, Result};
use crate::estimators::{Method, WinsorizeConfig};

/// Adversary used by the sweep, parameterized by a magnitude along `e_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdversarySpec {
    None,
    ConstantCluster(f64),
    DirectionalSpread(f64),
    SubtractiveOnly,
}

impl AdversarySpec {
    pub fn build(self, d: usize) -> Option<Adversary<f64>> {
        match self {
            AdversarySpec::None => None,
            AdversarySpec::ConstantCluster(m) => Some(Adversary::cluster_on_first_axis(d, m)),
            AdversarySpec::DirectionalSpread(m) => Some(Adversary::spread_on_first_axis(d, m)),
            AdversarySpec::SubtractiveOnly => Some(Adversary::SubtractiveOnly),
        }
    }
}

impl FromStr for AdversarySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let magnitude = |default: f64| -> Result<f64> {
            arg.map_or(Ok(default), |a| {
                a.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Parse(format!("bad adversary magnitude {a:?}")))
            })
        };
        match kind {
            "none" => Ok(AdversarySpec::None),
            "constant_cluster" => Ok(AdversarySpec::ConstantCluster(magnitude(10.0)?)),
            "directional_spread" => Ok(AdversarySpec::DirectionalSpread(magnitude(10.0)?)),
            "subtractive_only" => Ok(AdversarySpec::SubtractiveOnly),
            other => Err(Error::Parse(format!("unknown adversary {other:?}"))),
        }
    }
}

impl fmt::Display for AdversarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversarySpec::None => write!(f, "none"),
            AdversarySpec::ConstantCluster(m) => write!(f, "constant_cluster:{m}"),
            AdversarySpec::DirectionalSpread(m) => write!(f, "directional_spread:{m}"),
            AdversarySpec::SubtractiveOnly => write!(f, "subtractive_only"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_values: Vec<usize>,
    pub d_values: Vec<usize>,
    /// Corruption level of the data fed to `dp_robust`, and its filter gamma.
    pub gamma: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub c_thresh: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub methods: Vec<Method>,
    pub winsorize: WinsorizeConfig<f64>,
    pub adversary: AdversarySpec,
    /// Feed the corrupted sample to `dp_plain` and `dp_winsorized` as well.
    pub corrupt_baselines: bool,
    /// Write measured wall-clock times; off by default so output is
    /// byte-reproducible.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_values: Vec::new(),
            d_values: Vec::new(),
            gamma: 0.1,
            epsilon: 1.0,
            tau: 0.05,
            c_thresh: 1.0,
            trials: 1,
            base_seed: 0,
            methods: Method::ALL.to_vec(),
            winsorize: WinsorizeConfig::default(),
            adversary: AdversarySpec::ConstantCluster(10.0),
            corrupt_baselines: false,
            record_timing: false,
        }
    }
}

fn parse_scalar<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_scalar(key, s))
        .collect()
}

impl ExperimentConfig {
    /// Parses the flat key-value format. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "n_values" => cfg.n_values = parse_list(key, value)?,
                "d_values" => cfg.d_values = parse_list(key, value)?,
                "gamma" => cfg.gamma = parse_scalar(key, value)?,
                "epsilon" => cfg.epsilon = parse_scalar(key, value)?,
                "tau" => cfg.tau = parse_scalar(key, value)?,
                "c_thresh" => cfg.c_thresh = parse_scalar(key, value)?,
                "trials" => cfg.trials = parse_scalar(key, value)?,
                "base_seed" => cfg.base_seed = parse_scalar(key, value)?,
                "methods" => {
                    cfg.methods = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse::<Method>().map_err(|e| Error::Config(format!("{key}: {e}"))))
                        .collect::<Result<_>>()?
                }
                "winsorize.alpha" => cfg.winsorize.alpha = parse_scalar(key, value)?,
                "winsorize.range_bound" => cfg.winsorize.range_bound = parse_scalar(key, value)?,
                "adversary" => cfg.adversary = value.parse().map_err(|e| Error::Config(format!("{key}: {e}")))?,
                "corrupt_baselines" => cfg.corrupt_baselines = parse_scalar(key, value)?,
                "record_timing" => cfg.record_timing = parse_scalar(key, value)?,
                other => return Err(Error::Config(format!("line {}: unknown key {other:?}", lineno + 1))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_values.is_empty() || self.d_values.is_empty() {
            return fail("n_values and d_values must be non-empty".into());
        }
        if self.n_values.iter().any(|&n| n < 3) {
            return fail("every n must be at least 3".into());
        }
        if self.d_values.contains(&0) {
            return fail("every d must be at least 1".into());
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.methods.is_empty() {
            return fail("methods must be non-empty".into());
        }
        if !(self.gamma > 0.0 && self.gamma < 0.5) {
            return fail(format!("gamma must lie in (0, 0.5), got {}", self.gamma));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return fail(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return fail(format!("tau must lie in (0, 1), got {}", self.tau));
        }
        if !(self.c_thresh > 0.0 && self.c_thresh.is_finite()) {
            return fail(format!("c_thresh must be positive, got {}", self.c_thresh));
        }
        self.winsorize.validate().map_err(|e| Error::Config(e.to_string()))
    }
}
