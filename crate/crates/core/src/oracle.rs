//! Monte Carlo checks of the analytic ingredients.
//!
//! Sample budgets are split into fixed-size chunks, each drawing from its own
//! counter-based stream, and chunk summaries are merged in chunk order. An
//! estimate therefore depends only on `(seed, n_samples)`, never on the number
//! of worker threads.

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::{simulate, ChannelConfig, ChannelRealization};
use crate::direct::{block_average_power, lemma_bound_for_law, LogUniformLaw, SchemeParams};
use crate::error::{Error, Result};
use crate::fading::{entropy_rate_szego, stats_of, PathGainSpec, PathSampler};
use crate::par;
use crate::rng;
use crate::special::{log_sum_exp, EULER_GAMMA};

const CHUNK: usize = 4096;
/// Length of each independent path used by [`mc_log_gain`].
const BATCH: usize = 1000;
/// Acceptance threshold in standard errors.
pub const SIGMAS: f64 = 3.0;

/// Streaming mean and variance (Welford), mergeable in a fixed order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Self {
            n,
            mean: self.mean + d * other.n as f64 / n as f64,
            m2: self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64,
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self) -> McEstimate {
        McEstimate {
            value: self.mean,
            std_error: (self.variance() / self.n.max(1) as f64).sqrt(),
            n_samples: self.n,
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Self::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

fn merge_all<I: IntoIterator<Item = Moments>>(parts: I) -> Moments {
    parts.into_iter().fold(Moments::default(), Moments::merge)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
}

impl McEstimate {
    /// `|value - target| <= SIGMAS * std_error`.
    pub fn agrees_with(&self, target: f64) -> bool {
        (self.value - target).abs() <= SIGMAS * self.std_error
    }
}

/// One line of a verification report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub std_error: f64,
    pub pass: bool,
}

impl CheckReport {
    /// `lhs` and `rhs` agree within `SIGMAS * std_error`.
    pub fn equality(check: impl Into<String>, lhs: f64, rhs: f64, std_error: f64) -> Self {
        Self {
            check: check.into(),
            lhs,
            rhs,
            std_error,
            pass: (lhs - rhs).abs() <= SIGMAS * std_error,
        }
    }

    /// `lhs <= rhs + SIGMAS * std_error`.
    pub fn at_most(check: impl Into<String>, lhs: f64, rhs: f64, std_error: f64) -> Self {
        Self {
            check: check.into(),
            lhs,
            rhs,
            std_error,
            pass: lhs <= rhs + SIGMAS * std_error,
        }
    }

    /// `|lhs - rhs| <= tol` for deterministic quantities.
    pub fn within(check: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        Self {
            check: check.into(),
            lhs,
            rhs,
            std_error: 0.0,
            pass: (lhs - rhs).abs() <= tol,
        }
    }
}

/// Sample mean of `ln |H|^2` over `n_samples` draws.
///
/// Draws come from independent stationary paths of length 1000, so the
/// standard error is computed from batch means and stays honest for
/// correlated processes. `n_samples` is rounded up to whole batches.
pub fn mc_log_gain(spec: &PathGainSpec, n_samples: usize, seed: u64) -> Result<McEstimate> {
    spec.validate()?;
    if !spec.is_active() {
        return Err(Error::InvalidPath("log gain of a zero-variance path is undefined".into()));
    }
    let batches = n_samples.div_ceil(BATCH).max(2);
    let means = par::map_indexed(batches, |b| {
        let mut rng = rng::stream(seed, rng::path(0), b as u64);
        let mut sampler = PathSampler::new(*spec).expect("validated");
        (0..BATCH)
            .map(|_| sampler.next(&mut rng).norm_sqr().ln())
            .sum::<f64>()
            / BATCH as f64
    });
    let m: Moments = means.into_iter().collect();
    let est = m.estimate();
    Ok(McEstimate {
        n_samples: (batches * BATCH) as u64,
        ..est
    })
}

/// `I(X; HX + W)` for `H ~ CN(0, alpha0)`, `W ~ CN(0, w_variance)` and
/// circularly-symmetric `X` with log-uniform power.
///
/// Given `X = x`, `Y` is `CN(0, alpha0 |x|^2 + w_variance)`, so the
/// per-sample information density `ln f(Y|X) - ln f(Y)` is available with
/// `f(Y)` integrated over the law of `ln |X|^2` by Gauss-Legendre quadrature.
/// The estimate is the sample mean of that density over `n_samples` draws.
pub fn mi_scalar_gaussian(
    alpha0: f64,
    w_variance: f64,
    law: &LogUniformLaw,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if !(alpha0 > 0.0 && w_variance > 0.0) {
        return Err(Error::Domain(format!(
            "variances must be positive, got alpha0 = {alpha0}, w_variance = {w_variance}"
        )));
    }
    if n_samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let nodes = law.nodes();
    let log_weights: Vec<f64> = nodes.iter().map(|(_, w)| w.ln()).collect();
    let node_var: Vec<f64> = nodes.iter().map(|(u, _)| alpha0 * u.exp() + w_variance).collect();
    let log_cond = |r: f64, v: f64| -(std::f64::consts::PI * v).ln() - r / v;

    let parts = par::map_chunks(n_samples, CHUNK, |chunk, len| {
        let mut rng = rng::stream(seed, rng::INPUT, chunk);
        let mut terms = vec![0.0; nodes.len()];
        let mut m = Moments::default();
        for _ in 0..len {
            let x = law.sample(&mut rng);
            let h = rng::complex_normal(&mut rng, alpha0);
            let w = rng::complex_normal(&mut rng, w_variance);
            let r = (h * x + w).norm_sqr();
            let v = alpha0 * x.norm_sqr() + w_variance;
            for ((t, lw), nv) in terms.iter_mut().zip(&log_weights).zip(&node_var) {
                *t = lw + log_cond(r, *nv);
            }
            m.push(log_cond(r, v) - log_sum_exp(&terms));
        }
        m
    });
    Ok(merge_all(parts).estimate())
}

/// `E|Y_k|^2 = sigma^2 + sum_{l=0}^{min(k-1, L)} alpha_l E|X_{k-l}|^2`, with
/// `input_powers[j]` holding `E|X_{j+1}|^2`. `k` is 1-based.
pub fn output_power(config: &ChannelConfig, input_powers: &[f64], k: usize) -> f64 {
    let alphas = config.alphas();
    let taps = (k - 1).min(config.num_paths());
    config.noise_variance() + (0..=taps).map(|l| alphas[l] * input_powers[k - 1 - l]).sum::<f64>()
}

/// Empirical `E|Y_k|^2` for a fixed input sequence over independent realizations.
pub fn mc_output_power(
    config: &ChannelConfig,
    input: &[Complex64],
    k: usize,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if k == 0 || k > input.len() {
        return Err(Error::Domain(format!("time index {k} outside 1..={}", input.len())));
    }
    let x = &input[..k];
    let parts = par::map_chunks(n_samples, CHUNK, |chunk, len| -> Result<Moments> {
        let mut m = Moments::default();
        for i in 0..len {
            let real = ChannelRealization::sample(config, k, seed, chunk * CHUNK as u64 + i as u64)?;
            let y = simulate(config, x, &real)?;
            m.push(y[k - 1].norm_sqr());
        }
        Ok(m)
    });
    Ok(merge_all(parts.into_iter().collect::<Result<Vec<_>>>()?).estimate())
}

/// Results of [`verify_log_moment_bounds`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogMomentReport {
    pub k: usize,
    /// `E ln|Y_k|^2 <= E ln(sigma^2 + sum_l alpha_l |X_{k-l}|^2)`.
    pub log_moment: CheckReport,
    /// `ln E|Y_k|^2 = ln(sigma^2 + sum_l alpha_l E|X_{k-l}|^2)`.
    pub second_moment: CheckReport,
}

impl LogMomentReport {
    pub fn pass(&self) -> bool {
        self.log_moment.pass && self.second_moment.pass
    }
}

/// Draws `X_1..X_k` from the block scheme.
fn scheme_input<R: rand::Rng + ?Sized>(scheme: &SchemeParams, k: usize, rng: &mut R) -> Vec<Complex64> {
    (0..k)
        .map(|p| match scheme.law_at(p) {
            Some(law) => law.sample(rng),
            None => Complex64::new(0.0, 0.0),
        })
        .collect()
}

/// Monte Carlo audit of the two log-moment facts the upper bound rests on,
/// with inputs drawn from `scheme` and `Y_k` simulated through the channel.
///
/// The two sides of the inequality use independent input draws, so their
/// standard errors add in quadrature.
pub fn verify_log_moment_bounds(
    config: &ChannelConfig,
    scheme: &SchemeParams,
    k: usize,
    n_samples: usize,
    seed: u64,
) -> Result<LogMomentReport> {
    if k == 0 {
        return Err(Error::Domain("time index must be at least 1".into()));
    }
    if scheme.memory() != config.num_paths() {
        return Err(Error::Dimension(format!(
            "scheme guard {} does not match channel memory {}",
            scheme.memory(),
            config.num_paths()
        )));
    }
    let alphas = config.alphas();
    let sigma2 = config.noise_variance();
    let taps = (k - 1).min(config.num_paths());

    let parts = par::map_chunks(n_samples, CHUNK, |chunk, len| -> Result<(Moments, Moments, Moments)> {
        let mut input_rng = rng::stream(seed, rng::INPUT, chunk);
        let mut alt_rng = rng::stream(seed, rng::INPUT_ALT, chunk);
        let mut path_rngs: Vec<_> = (0..alphas.len()).map(|l| rng::stream(seed, rng::path(l), chunk)).collect();
        let mut noise_rng = rng::stream(seed, rng::NOISE, chunk);
        let (mut log_y, mut pow_y, mut log_rhs) = (Moments::default(), Moments::default(), Moments::default());
        for _ in 0..len {
            let x = scheme_input(scheme, k, &mut input_rng);
            let gains = config
                .paths()
                .iter()
                .zip(path_rngs.iter_mut())
                .map(|(spec, r)| {
                    let mut s = PathSampler::new(*spec)?;
                    Ok((0..k).map(|_| s.next(r)).collect())
                })
                .collect::<Result<Vec<Vec<_>>>>()?;
            let noise = (0..k).map(|_| rng::complex_normal(&mut noise_rng, sigma2)).collect();
            let y = simulate(config, &x, &ChannelRealization::new(gains, noise)?)?[k - 1].norm_sqr();
            log_y.push(y.ln());
            pow_y.push(y);

            let xa = scheme_input(scheme, k, &mut alt_rng);
            let rhs = sigma2 + (0..=taps).map(|l| alphas[l] * xa[k - 1 - l].norm_sqr()).sum::<f64>();
            log_rhs.push(rhs.ln());
        }
        Ok((log_y, pow_y, log_rhs))
    });
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    let log_y = merge_all(parts.iter().map(|p| p.0)).estimate();
    let pow_y = merge_all(parts.iter().map(|p| p.1)).estimate();
    let log_rhs = merge_all(parts.iter().map(|p| p.2)).estimate();

    let input_powers: Vec<f64> = (0..k)
        .map(|p| scheme.law_at(p).map_or(0.0, |law| law.log_mean_power().exp()))
        .collect();
    let analytic = output_power(config, &input_powers, k);

    Ok(LogMomentReport {
        k,
        log_moment: CheckReport::at_most(
            format!("log_moment_upper_bound[k={k}]"),
            log_y.value,
            log_rhs.value,
            log_y.std_error.hypot(log_rhs.std_error),
        ),
        second_moment: CheckReport::equality(
            format!("output_second_moment[k={k}]"),
            pow_y.value.ln(),
            analytic.ln(),
            pow_y.std_error / pow_y.value,
        ),
    })
}

/// Sample budgets for [`run_suite`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SuiteBudget {
    pub mi_samples: usize,
    pub moment_samples: usize,
}

impl Default for SuiteBudget {
    fn default() -> Self {
        Self {
            mi_samples: 100_000,
            moment_samples: 1_000_000,
        }
    }
}

/// Every oracle check that applies to `config` and `scheme`.
pub fn run_suite(config: &ChannelConfig, scheme: &SchemeParams, budget: SuiteBudget, seed: u64) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for (l, spec) in config.paths().iter().enumerate() {
        let Some(stats) = stats_of(spec)? else {
            continue;
        };
        let est = mc_log_gain(spec, budget.moment_samples, seed.wrapping_add(l as u64))?;
        out.push(CheckReport::equality(
            format!("mean_log_gain[path={l}]"),
            est.value,
            stats.mean_log_gain,
            est.std_error,
        ));
        let szego = entropy_rate_szego(|x| spec.spectral_density(x), 1 << 16)?;
        out.push(CheckReport::within(
            format!("entropy_rate_szego[path={l}]"),
            szego,
            stats.entropy_rate,
            1e-5,
        ));
    }

    let alpha0 = config.paths()[0].alpha();
    let mean_log_h2 = alpha0.ln() - EULER_GAMMA;
    for nu in 1..=scheme.tau() {
        let law = scheme.slot(nu).law();
        if law.width() == 0.0 {
            continue;
        }
        let w_var = config.noise_variance();
        let mi = mi_scalar_gaussian(alpha0, w_var, &law, budget.mi_samples, seed ^ nu as u64)?;
        let bound = lemma_bound_for_law(&law, mean_log_h2, alpha0.sqrt(), w_var.sqrt())?;
        // mi >= bound - 3 se
        out.push(CheckReport::at_most(format!("lemma_mi_lower_bound[slot={nu}]"), bound, mi.value, mi.std_error));
    }

    for k in config.num_paths() + 1..=scheme.block_len() {
        let report = verify_log_moment_bounds(config, scheme, k, budget.moment_samples, seed.wrapping_add(1000 + k as u64))?;
        out.push(report.log_moment);
        out.push(report.second_moment);
    }

    out.push(CheckReport::at_most(
        "block_average_power",
        block_average_power(scheme).ln(),
        scheme.log_power(),
        0.0,
    ));
    Ok(out)
}
