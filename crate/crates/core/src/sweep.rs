//! SNR sweeps, pre-loglog slope fits and output files.
//!
//! Nothing here evaluates a bound formula directly; points come from
//! [`converse::upper_bound`] and [`direct::lower_bound`] / [`direct::optimize_tau`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{OutputFormat, SweepConfig};
use crate::converse::{self, ConverseStats};
use crate::direct::{self, DirectStats};
use crate::error::{Error, Result};
use crate::par;

pub const CSV_HEADER: &str = "log_snr,upper,lower,tau_star,loglog_snr,ratio_upper,ratio_lower";

/// One grid point. All values in nats.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPoint {
    pub log_snr: f64,
    pub upper: f64,
    pub lower: f64,
    pub tau_star: usize,
    pub loglog_snr: f64,
    pub ratio_upper: f64,
    pub ratio_lower: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepMetadata {
    pub software: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub constants_certified: bool,
    /// Grid indices where the upper bound falls below the lower bound. Only
    /// meaningful when the converse constants are certified.
    pub upper_below_lower: Vec<usize>,
    pub config: SweepConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutput {
    pub points: Vec<SweepPoint>,
    pub metadata: SweepMetadata,
}

/// Evaluates both bounds on every grid point, in grid order.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutput> {
    config.validate()?;
    let grid = config.grid.log_snr();
    if let Some(bad) = grid.iter().find(|&&l| l <= 1.0) {
        return Err(Error::Domain(format!(
            "ln ln SNR needs SNR > e, but the grid contains ln SNR = {bad}"
        )));
    }
    let params = config.bounds.to_params()?;
    let upper_stats = ConverseStats::from_config(&config.channel)?;
    let lower_stats = DirectStats::from_config(&config.channel)?;

    let points = par::map_indexed(grid.len(), |i| -> Result<SweepPoint> {
        let log_snr = grid[i];
        let upper = converse::upper_bound(log_snr, &upper_stats, &params)?;
        let (tau_star, lower) = match config.tau {
            Some(tau) => (tau, direct::lower_bound(log_snr, tau, &lower_stats)?),
            None => direct::optimize_tau(log_snr, &lower_stats, config.tau_max)?,
        };
        let loglog_snr = log_snr.ln();
        Ok(SweepPoint {
            log_snr,
            upper,
            lower,
            tau_star,
            loglog_snr,
            ratio_upper: upper / loglog_snr,
            ratio_lower: lower / loglog_snr,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let upper_below_lower = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.upper < p.lower)
        .map(|(i, _)| i)
        .collect();
    Ok(SweepOutput {
        points,
        metadata: SweepMetadata {
            software: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            seed: config.seed,
            constants_certified: params.constants_certified(),
            upper_below_lower,
            config: config.clone(),
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Upper,
    Lower,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

/// Ordinary least squares of the chosen bound against `ln ln SNR`.
pub fn fit_preloglog_slope(points: &[SweepPoint], which: Which) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::Domain(format!("need at least 3 points, got {}", points.len())));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.loglog_snr).collect();
    let ys: Vec<f64> = points
        .iter()
        .map(|p| match which {
            Which::Upper => p.upper,
            Which::Lower => p.lower,
        })
        .collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= f64::EPSILON * mx.abs().max(1.0) {
        return Err(Error::Domain("degenerate grid: all ln ln SNR values coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(SlopeFit {
        slope,
        intercept,
        residual: (rss / n).sqrt(),
    })
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with [`CSV_HEADER`] and 17 significant digits per value.
pub fn to_csv(points: &[SweepPoint]) -> String {
    let mut out = String::with_capacity(64 * (points.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            num(p.log_snr),
            num(p.upper),
            num(p.lower),
            p.tau_star,
            num(p.loglog_snr),
            num(p.ratio_upper),
            num(p.ratio_lower)
        );
    }
    out
}

pub fn from_csv(text: &str) -> Result<Vec<SweepPoint>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Config("missing or unexpected CSV header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(Error::Config(format!("expected 7 fields, got {}: {line}", f.len())));
            }
            let p = |s: &str| s.parse::<f64>().map_err(|e| Error::Config(format!("{s}: {e}")));
            Ok(SweepPoint {
                log_snr: p(f[0])?,
                upper: p(f[1])?,
                lower: p(f[2])?,
                tau_star: f[3].parse().map_err(|e| Error::Config(format!("{}: {e}", f[3])))?,
                loglog_snr: p(f[4])?,
                ratio_upper: p(f[5])?,
                ratio_lower: p(f[6])?,
            })
        })
        .collect()
}

pub fn to_json(points: &[SweepPoint]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(points)?;
    s.push('\n');
    Ok(s)
}

/// Serialized points in `format`.
pub fn emit(points: &[SweepPoint], format: OutputFormat) -> Result<Vec<u8>> {
    if points.is_empty() {
        return Err(Error::Domain("nothing to emit".into()));
    }
    Ok(match format {
        OutputFormat::Csv => to_csv(points).into_bytes(),
        OutputFormat::Json => to_json(points)?.into_bytes(),
    })
}

/// Path of the metadata sidecar for an output file: `<output>.meta.json`.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

/// Writes the points to `path` and the metadata to its sidecar.
pub fn write_output(output: &SweepOutput, path: &Path, format: OutputFormat) -> Result<()> {
    write_file(path, &emit(&output.points, format)?)?;
    let mut meta = serde_json::to_string_pretty(&output.metadata)?;
    meta.push('\n');
    write_file(&sidecar_path(path), meta.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::GridConfig;

    fn synthetic(values: &[(f64, f64)]) -> Vec<SweepPoint> {
        values
            .iter()
            .map(|&(x, y)| SweepPoint {
                log_snr: x.exp(),
                upper: y,
                lower: y,
                tau_star: 1,
                loglog_snr: x,
                ratio_upper: y / x,
                ratio_lower: y / x,
            })
            .collect()
    }

    #[test]
    fn exact_line_has_unit_slope() {
        let pts = synthetic(&[(1.0, 1.0), (2.0, 2.0), (3.5, 3.5), (4.0, 4.0)]);
        let fit = fit_preloglog_slope(&pts, Which::Upper).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-14);
        assert!(fit.intercept.abs() < 1e-13);
        assert!(fit.residual < 1e-14);
    }

    #[test]
    fn fit_errors() {
        assert!(fit_preloglog_slope(&synthetic(&[(1.0, 1.0), (2.0, 2.0)]), Which::Lower).is_err());
        assert!(fit_preloglog_slope(&synthetic(&[(2.0, 1.0), (2.0, 2.0), (2.0, 3.0)]), Which::Lower).is_err());
    }

    #[test]
    fn two_point_grid() {
        let mut cfg = SweepConfig::demo();
        cfg.grid = GridConfig {
            log10_snr_start: 3.0,
            log10_snr_stop: 5.0,
            points: 2,
        };
        let out = run_sweep(&cfg).unwrap();
        assert_eq!(out.points.len(), 2);
        assert!(out.points[0].log_snr < out.points[1].log_snr);
        assert!(!out.metadata.constants_certified);
    }

    #[test]
    fn grid_must_clear_e() {
        let mut cfg = SweepConfig::demo();
        cfg.grid = GridConfig {
            log10_snr_start: 0.1,
            log10_snr_stop: 5.0,
            points: 4,
        };
        let err = run_sweep(&cfg).unwrap_err().to_string();
        assert!(err.contains("SNR > e"), "{err}");
    }

    #[test]
    fn fixed_tau_too_large_is_an_error() {
        let mut cfg = SweepConfig::demo();
        cfg.tau = Some(64);
        assert!(matches!(run_sweep(&cfg), Err(Error::Schedule(_))));
    }

    #[test]
    fn csv_one_point_two_lines() {
        let pts = synthetic(&[(1.5, 0.25)]);
        let csv = to_csv(&pts);
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv.lines().next(), Some(CSV_HEADER));
        assert!(emit(&[], OutputFormat::Csv).is_err());
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_path(Path::new("/tmp/out.csv")), PathBuf::from("/tmp/out.csv.meta.json"));
    }
}
