//! JSON run configuration.
//!
//! ```json
//! {
//!   "schema": "fadecap.config.v1",
//!   "channel": {
//!     "paths": [{"kind": "ar1_gaussian", "alpha": 1.0, "a_re": 0.5, "a_im": 0.0}],
//!     "noise_variance": 1.0,
//!     "log_power": 6.9
//!   },
//!   "bounds": {"delta": 1.0, "eta": 0.5, "eps_const": 0.0},
//!   "grid": {"log10_snr_start": 20.0, "log10_snr_stop": 200.0, "points": 19},
//!   "tau_max": 1024,
//!   "seed": 1,
//!   "output_format": "csv"
//! }
//! ```
//!
//! Unknown keys are rejected at every level. `channel.log_power` is only used
//! by `verify`; sweeps set the power from the grid.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelConfig;
use crate::converse::BoundParams;
use crate::error::{Error, Result};
use crate::fading::PathGainSpec;

pub const SCHEMA: &str = "fadecap.config.v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    #[serde(default = "one")]
    pub delta: f64,
    #[serde(default = "half")]
    pub eta: f64,
    #[serde(default)]
    pub eps_const: f64,
    /// Fixed `xi`; overrides the closed-form choice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default)]
    pub optimize_xi: bool,
    #[serde(default)]
    pub constants_certified: bool,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            delta: 1.0,
            eta: 0.5,
            eps_const: 0.0,
            xi: None,
            optimize_xi: false,
            constants_certified: false,
        }
    }
}

impl BoundConfig {
    pub fn to_params(&self) -> Result<BoundParams> {
        let mut p = BoundParams::new(self.delta, self.eta)?
            .with_eps_const(self.eps_const)?
            .certified(self.constants_certified);
        match (self.xi, self.optimize_xi) {
            (Some(_), true) => {
                return Err(Error::Config("`xi` and `optimize_xi` are mutually exclusive".into()));
            }
            (Some(xi), false) => p = p.with_xi(xi)?,
            (None, true) => p = p.with_optimized_xi(),
            (None, false) => {}
        }
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub log10_snr_start: f64,
    pub log10_snr_stop: f64,
    pub points: usize,
}

impl GridConfig {
    /// Evenly spaced `ln SNR` values.
    pub fn log_snr(&self) -> Vec<f64> {
        let ln10 = std::f64::consts::LN_10;
        let step = (self.log10_snr_stop - self.log10_snr_start) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| (self.log10_snr_start + i as f64 * step) * ln10)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub schema: String,
    pub channel: ChannelConfig,
    #[serde(default)]
    pub bounds: BoundConfig,
    pub grid: GridConfig,
    #[serde(default = "default_tau_max")]
    pub tau_max: usize,
    /// Fixed block length; when absent the lower bound searches `1..=tau_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_format: OutputFormat,
}

fn default_tau_max() -> usize {
    1024
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Io { .. } => e,
            other => Error::Config(format!("{}: {other}", path.display())),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::Config(format!("unsupported schema {:?}, expected {SCHEMA:?}", self.schema)));
        }
        let g = &self.grid;
        if !(g.log10_snr_start.is_finite() && g.log10_snr_stop.is_finite() && g.log10_snr_start < g.log10_snr_stop) {
            return Err(Error::Config(format!(
                "grid needs start < stop, got [{}, {}]",
                g.log10_snr_start, g.log10_snr_stop
            )));
        }
        if g.points < 2 {
            return Err(Error::Config(format!("grid needs at least 2 points, got {}", g.points)));
        }
        if self.tau_max == 0 {
            return Err(Error::Config("tau_max must be at least 1".into()));
        }
        if self.tau == Some(0) {
            return Err(Error::Config("tau must be at least 1".into()));
        }
        self.bounds.to_params()?;
        Ok(())
    }

    /// Three-path channel (`alpha = 1, 0.5, 0.25`), the first tap Gauss-Markov
    /// with pole 0.5, unit noise, `log10 SNR` from 20 to 200 in 19 points.
    pub fn demo() -> Self {
        let paths = vec![
            PathGainSpec::Ar1Gaussian {
                alpha: 1.0,
                a: Complex64::new(0.5, 0.0),
            },
            PathGainSpec::IidGaussian { alpha: 0.5 },
            PathGainSpec::IidGaussian { alpha: 0.25 },
        ];
        Self {
            schema: SCHEMA.into(),
            channel: ChannelConfig::new(paths, 1.0, 1000f64.ln()).expect("demo channel is valid"),
            bounds: BoundConfig::default(),
            grid: GridConfig {
                log10_snr_start: 20.0,
                log10_snr_stop: 200.0,
                points: 19,
            },
            tau_max: 1024,
            tau: None,
            seed: 1,
            output_format: OutputFormat::Csv,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_roundtrips_through_json() {
        let demo = SweepConfig::demo();
        let text = serde_json::to_string_pretty(&demo).unwrap();
        assert_eq!(SweepConfig::from_json(&text).unwrap(), demo);
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = SweepConfig::from_json(
            r#"{"schema":"fadecap.config.v1",
                "channel":{"paths":[{"kind":"iid_gaussian","alpha":1.0}],"noise_variance":1.0},
                "grid":{"log10_snr_start":2,"log10_snr_stop":4,"points":3}}"#,
        )
        .unwrap();
        assert_eq!(cfg.bounds, BoundConfig::default());
        assert_eq!(cfg.tau_max, 1024);
        assert_eq!(cfg.output_format, OutputFormat::Csv);
        let grid = cfg.grid.log_snr();
        assert_eq!(grid.len(), 3);
        assert!((grid[1] - 3.0 * std::f64::consts::LN_10).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = serde_json::to_value(SweepConfig::demo()).unwrap();
        let with = |path: &[&str], v: serde_json::Value| {
            let mut b = base.clone();
            let mut cur = &mut b;
            for p in &path[..path.len() - 1] {
                cur = cur.get_mut(*p).unwrap();
            }
            cur[path[path.len() - 1]] = v;
            SweepConfig::from_json(&b.to_string())
        };
        assert!(with(&["schema"], "fadecap.config.v0".into()).is_err());
        assert!(with(&["unexpected"], 1.into()).is_err());
        assert!(with(&["bounds", "unexpected"], 1.into()).is_err());
        assert!(with(&["grid", "points"], 1.into()).is_err());
        assert!(with(&["grid", "log10_snr_stop"], 10.into()).is_err());
        assert!(with(&["tau_max"], 0.into()).is_err());
        assert!(with(&["tau"], 0.into()).is_err());
        assert!(with(&["bounds", "eta"], 1.0.into()).is_err());
        assert!(with(&["bounds", "xi"], 0.5.into()).is_ok());
        assert!(with(&["bounds", "optimize_xi"], true.into()).is_ok());
        let mut both = base.clone();
        both["bounds"]["xi"] = 0.5.into();
        both["bounds"]["optimize_xi"] = true.into();
        assert!(SweepConfig::from_json(&both.to_string()).is_err());
    }
}
