//! The discrete-time multipath fading channel
//!
//! ```text
//! Y_k = sum_{l=0}^{min(k-1, L)} H_k^(l) x_{k-l} + Z_k,   k = 1, 2, ...
//! ```
//!
//! with independent path-gain processes (uncorrelated scattering) and IID
//! `CN(0, sigma^2)` noise independent of the gains.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fading::{stats_of, PathGainSpec, PathSampler, PathStats};
use crate::rng;

/// One channel instance. Power is stored as `ln P`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelRecord", into = "ChannelRecord")]
pub struct ChannelConfig {
    paths: Vec<PathGainSpec>,
    noise_variance: f64,
    log_power: f64,
}

impl ChannelConfig {
    /// `paths[l]` is the law of the `l`-th delay tap, so `L = paths.len() - 1`.
    pub fn new(paths: Vec<PathGainSpec>, noise_variance: f64, log_power: f64) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidChannel("need at least one path".into()));
        }
        for (l, p) in paths.iter().enumerate() {
            p.validate()
                .map_err(|e| Error::InvalidChannel(format!("path {l}: {e}")))?;
        }
        if !paths[0].is_active() {
            return Err(Error::InvalidChannel("path 0 must have positive variance".into()));
        }
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::InvalidChannel(format!(
                "noise variance must be positive and finite, got {noise_variance}"
            )));
        }
        if !log_power.is_finite() {
            return Err(Error::InvalidChannel(format!("log power must be finite, got {log_power}")));
        }
        Ok(Self {
            paths,
            noise_variance,
            log_power,
        })
    }

    /// Same channel at a different power.
    pub fn with_log_power(&self, log_power: f64) -> Result<Self> {
        Self::new(self.paths.clone(), self.noise_variance, log_power)
    }

    /// Same channel with power set so that `ln SNR = log_snr`.
    pub fn with_log_snr(&self, log_snr: f64) -> Result<Self> {
        self.with_log_power(log_snr + self.noise_variance.ln())
    }

    pub fn paths(&self) -> &[PathGainSpec] {
        &self.paths
    }

    /// `L`, the channel memory.
    pub fn num_paths(&self) -> usize {
        self.paths.len() - 1
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn log_power(&self) -> f64 {
        self.log_power
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.paths.iter().map(PathGainSpec::alpha).collect()
    }

    /// Indices of paths with positive variance.
    pub fn active_set(&self) -> Vec<usize> {
        (0..self.paths.len()).filter(|&l| self.paths[l].is_active()).collect()
    }

    /// `(index, stats)` for each active path.
    pub fn path_stats(&self) -> Vec<(usize, PathStats)> {
        self.paths
            .iter()
            .enumerate()
            .filter_map(|(l, p)| stats_of(p).ok().flatten().map(|s| (l, s)))
            .collect()
    }
}

/// `ln SNR = ln P - ln sigma^2`.
pub fn snr_of(config: &ChannelConfig) -> f64 {
    config.log_power - config.noise_variance.ln()
}

/// Sum of path variances, zero-variance taps included.
pub fn aggregate_gain(config: &ChannelConfig) -> f64 {
    config.paths.iter().map(PathGainSpec::alpha).sum()
}

/// `(1/n) sum_k |x_k|^2` of a deterministic sequence.
pub fn average_power(input: &[Complex64]) -> f64 {
    if input.is_empty() {
        return 0.0;
    }
    input.iter().map(Complex64::norm_sqr).sum::<f64>() / input.len() as f64
}

/// `(1/n) sum_k E|X_k|^2` estimated from an ensemble of equal-length sequences.
pub fn ensemble_average_power(ensemble: &[Vec<Complex64>]) -> Result<f64> {
    let Some(first) = ensemble.first() else {
        return Ok(0.0);
    };
    let n = first.len();
    if ensemble.iter().any(|x| x.len() != n) {
        return Err(Error::Dimension("ensemble sequences differ in length".into()));
    }
    Ok(ensemble.iter().map(|x| average_power(x)).sum::<f64>() / ensemble.len() as f64)
}

/// Sampled path gains and noise for `n` channel uses.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    gains: Vec<Vec<Complex64>>,
    noise: Vec<Complex64>,
}

impl ChannelRealization {
    /// `gains[l][k]` is `H_{k+1}^(l)`; every row must match `noise.len()`.
    pub fn new(gains: Vec<Vec<Complex64>>, noise: Vec<Complex64>) -> Result<Self> {
        let n = noise.len();
        if let Some((l, row)) = gains.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Dimension(format!(
                "gain row {l} has length {} but noise has length {n}",
                row.len()
            )));
        }
        Ok(Self { gains, noise })
    }

    /// Draws gains and noise from independent streams derived from `seed`.
    pub fn sample(config: &ChannelConfig, n: usize, seed: u64, chunk: u64) -> Result<Self> {
        let gains = config
            .paths
            .iter()
            .enumerate()
            .map(|(l, spec)| {
                let mut sampler = PathSampler::new(*spec)?;
                let mut rng = rng::stream(seed, rng::path(l), chunk);
                Ok((0..n).map(|_| sampler.next(&mut rng)).collect())
            })
            .collect::<Result<Vec<Vec<_>>>>()?;
        let mut rng = rng::stream(seed, rng::NOISE, chunk);
        let noise = (0..n)
            .map(|_| rng::complex_normal(&mut rng, config.noise_variance))
            .collect();
        Ok(Self { gains, noise })
    }

    pub fn len(&self) -> usize {
        self.noise.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noise.is_empty()
    }

    pub fn gains(&self) -> &[Vec<Complex64>] {
        &self.gains
    }

    pub fn noise(&self) -> &[Complex64] {
        &self.noise
    }
}

/// Channel output for input `x_1..x_n` under a fixed realization.
pub fn simulate(
    config: &ChannelConfig,
    input: &[Complex64],
    realization: &ChannelRealization,
) -> Result<Vec<Complex64>> {
    let n = input.len();
    if realization.gains.len() != config.paths.len() {
        return Err(Error::Dimension(format!(
            "realization has {} paths, config has {}",
            realization.gains.len(),
            config.paths.len()
        )));
    }
    if realization.len() != n {
        return Err(Error::Dimension(format!(
            "realization has length {}, input has length {n}",
            realization.len()
        )));
    }
    let memory = config.num_paths();
    let out = (0..n)
        .map(|k| {
            // k is 0-based here: time k+1 sees taps 0..=min(k, L).
            let taps = if k < memory { k } else { memory };
            (0..=taps).fold(realization.noise[k], |acc, l| {
                acc + realization.gains[l][k] * input[k - l]
            })
        })
        .collect();
    Ok(out)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelRecord {
    paths: Vec<PathGainSpec>,
    noise_variance: f64,
    #[serde(default)]
    log_power: f64,
}

impl TryFrom<ChannelRecord> for ChannelConfig {
    type Error = Error;

    fn try_from(r: ChannelRecord) -> Result<Self> {
        Self::new(r.paths, r.noise_variance, r.log_power)
    }
}

impl From<ChannelConfig> for ChannelRecord {
    fn from(c: ChannelConfig) -> Self {
        Self {
            paths: c.paths,
            noise_variance: c.noise_variance,
            log_power: c.log_power,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn iid_config(alphas: &[f64]) -> ChannelConfig {
        let paths = alphas
            .iter()
            .map(|&a| if a == 0.0 { PathGainSpec::Zero } else { PathGainSpec::iid(a).unwrap() })
            .collect();
        ChannelConfig::new(paths, 1.0, 0.0).unwrap()
    }

    #[test]
    fn zero_input_passes_noise() {
        let cfg = iid_config(&[1.0, 0.5]);
        let real = ChannelRealization::sample(&cfg, 16, 3, 0).unwrap();
        let y = simulate(&cfg, &[c(0.0, 0.0); 16], &real).unwrap();
        assert_eq!(y, real.noise());
    }

    #[test]
    fn hand_evaluated_truncation() {
        let cfg = iid_config(&[1.0, 1.0]);
        let ones = vec![c(1.0, 0.0); 2];
        let real = ChannelRealization::new(vec![ones.clone(), ones.clone()], vec![c(0.0, 0.0); 2]).unwrap();
        let y = simulate(&cfg, &ones, &real).unwrap();
        assert_eq!(y, vec![c(1.0, 0.0), c(2.0, 0.0)]);
    }

    #[test]
    fn dimension_mismatch() {
        let cfg = iid_config(&[1.0, 1.0]);
        let real = ChannelRealization::sample(&cfg, 4, 0, 0).unwrap();
        assert!(matches!(simulate(&cfg, &[c(1.0, 0.0); 3], &real), Err(Error::Dimension(_))));
        let single = iid_config(&[1.0]);
        assert!(simulate(&single, &[c(1.0, 0.0); 4], &real).is_err());
        assert!(ChannelRealization::new(vec![vec![c(0.0, 0.0); 2]], vec![c(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn snr_bookkeeping() {
        let paths = vec![PathGainSpec::iid(1.0).unwrap()];
        let cfg = ChannelConfig::new(paths.clone(), 1.0, 100f64.ln()).unwrap();
        assert_abs_diff_eq!(snr_of(&cfg), 100f64.ln(), epsilon = 1e-15);
        assert_eq!(snr_of(&ChannelConfig::new(paths.clone(), 1.0, 0.0).unwrap()), 0.0);
        assert_eq!(snr_of(&ChannelConfig::new(paths.clone(), 1.0, 500.0).unwrap()), 500.0);
        let scaled = ChannelConfig::new(paths, 4.0, 0.0).unwrap().with_log_snr(7.0).unwrap();
        assert_abs_diff_eq!(snr_of(&scaled), 7.0, epsilon = 1e-14);
    }

    #[test]
    fn aggregate_gain_and_active_set() {
        assert_eq!(aggregate_gain(&iid_config(&[1.0])), 1.0);
        assert_eq!(aggregate_gain(&iid_config(&[1.0, 0.5, 0.25])), 1.75);
        let cfg = iid_config(&[1.0, 0.0, 2.0]);
        assert_eq!(aggregate_gain(&cfg), 3.0);
        assert_eq!(cfg.active_set(), vec![0, 2]);
        assert_eq!(cfg.num_paths(), 2);
    }

    #[test]
    fn config_validation() {
        let iid = PathGainSpec::iid(1.0).unwrap();
        assert!(ChannelConfig::new(vec![], 1.0, 0.0).is_err());
        assert!(ChannelConfig::new(vec![PathGainSpec::Zero, iid], 1.0, 0.0).is_err());
        assert!(ChannelConfig::new(vec![iid], 0.0, 0.0).is_err());
        assert!(ChannelConfig::new(vec![iid], 1.0, f64::NAN).is_err());
    }

    #[test]
    fn average_power_examples() {
        let p: f64 = 3.5;
        let x: Vec<_> = (0..10).map(|k| Complex64::from_polar(p.sqrt(), k as f64)).collect();
        assert_abs_diff_eq!(average_power(&x), p, epsilon = 1e-12);
        assert_eq!(average_power(&[c(0.0, 0.0); 4]), 0.0);
        assert_abs_diff_eq!(
            ensemble_average_power(&[vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 1.0), c(1.0, 1.0)]]).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert!(ensemble_average_power(&[vec![c(1.0, 0.0)], vec![]]).is_err());
    }

    #[test]
    fn json_roundtrip_and_strictness() {
        let json = r#"{"paths":[{"kind":"iid_gaussian","alpha":1.0},{"kind":"zero"}],"noise_variance":2.0,"log_power":3.0}"#;
        let cfg: ChannelConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.num_paths(), 1);
        let back: ChannelConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<ChannelConfig>(r#"{"paths":[{"kind":"zero"}],"noise_variance":1.0}"#).is_err());
        assert!(serde_json::from_str::<ChannelConfig>(
            r#"{"paths":[{"kind":"iid_gaussian","alpha":1.0}],"noise_variance":1.0,"extra":1}"#
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn linear_in_input_without_noise(
            scale_re in -3.0..3.0f64,
            scale_im in -3.0..3.0f64,
            seed in any::<u64>(),
        ) {
            let cfg = iid_config(&[1.0, 0.5, 0.25]);
            let n = 12;
            let real = ChannelRealization::sample(&cfg, n, seed, 0).unwrap();
            let real = ChannelRealization::new(real.gains().to_vec(), vec![c(0.0, 0.0); n]).unwrap();
            let mut rng = rng::stream(seed, rng::INPUT, 0);
            let x: Vec<_> = (0..n).map(|_| rng::complex_normal(&mut rng, 1.0)).collect();
            let s = c(scale_re, scale_im);
            let sx: Vec<_> = x.iter().map(|v| s * v).collect();
            let y = simulate(&cfg, &x, &real).unwrap();
            let ys = simulate(&cfg, &sx, &real).unwrap();
            for (a, b) in y.iter().zip(&ys) {
                prop_assert!((s * a - b).norm() <= 1e-12 * (1.0 + b.norm()));
            }
        }

        #[test]
        fn causal_with_finite_memory(j in 0usize..16, seed in any::<u64>()) {
            let cfg = iid_config(&[1.0, 0.0, 0.3]);
            let n = 16;
            let real = ChannelRealization::sample(&cfg, n, seed, 0).unwrap();
            let mut rng = rng::stream(seed, rng::INPUT, 0);
            let x: Vec<_> = (0..n).map(|_| rng::complex_normal(&mut rng, 1.0)).collect();
            let mut perturbed = x.clone();
            perturbed[j] += c(10.0, -5.0);
            let y = simulate(&cfg, &x, &real).unwrap();
            let yp = simulate(&cfg, &perturbed, &real).unwrap();
            for k in 0..n {
                if k < j || k > j + cfg.num_paths() {
                    prop_assert_eq!(y[k], yp[k]);
                }
            }
        }
    }
}
