//! Achievable rate from zero-guarded blocks with log-uniform magnitudes.
//!
//! Inputs are sent in blocks of `L + tau` symbols: `L` zeros, then `tau`
//! independent circularly-symmetric symbols whose log-power
//! `ln |X_nu|^2` is uniform on `[ln x2_min(nu), ln x2_max(nu)]` with
//!
//! ```text
//! ln x2_max(nu) = (nu / tau) ln P
//! ln x2_min(nu) = ((nu - 1) / tau) ln P + ln ln P
//! ```
//!
//! Each slot then sees a scalar fading channel `H X + W`, with `W` collecting
//! noise and interference from earlier slots of the same block. Bounding those
//! per-slot rates and dividing by the block length gives
//!
//! ```text
//! C >= tau / (L + tau) * (ln ln(P^(1/tau) / ln P) + Xi_P)
//! ```

use std::f64::consts::{E, PI};

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::channel::{aggregate_gain, ChannelConfig};
use crate::error::{Error, Result};
use crate::quad::GaussLegendre;
use crate::rng;
use crate::special::{log_diff_exp, log_sum_exp};

const QUAD_ORDER: usize = 32;
const QUAD_PANELS: usize = 16;

/// Law of a circularly-symmetric `X` with `ln |X|^2` uniform on `[lo, hi]`.
/// `lo == hi` is a fixed magnitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogUniformLaw {
    lo: f64,
    hi: f64,
}

impl LogUniformLaw {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Domain(format!("need finite lo <= hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    /// `|X|^2` uniform in log between `x2_min` and `x2_max`.
    pub fn from_powers(x2_min: f64, x2_max: f64) -> Result<Self> {
        Self::new(x2_min.ln(), x2_max.ln())
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// `ln(x2_max / x2_min)`.
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// `E[ln |X|^2]`.
    pub fn mean_log_power(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// `ln E|X|^2 = ln((x2_max - x2_min) / ln(x2_max / x2_min))`.
    pub fn log_mean_power(&self) -> f64 {
        let w = self.width();
        if w == 0.0 {
            self.hi
        } else {
            log_diff_exp(self.hi, self.lo) - w.ln()
        }
    }

    /// Differential entropy `h(X) = E ln|X|^2 + h(ln|X|^2) + ln pi`; `-inf` for a fixed magnitude.
    pub fn entropy(&self) -> f64 {
        self.mean_log_power() + self.width().ln() + PI.ln()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let u = self.lo + self.width() * rng.random::<f64>();
        (0.5 * u).exp() * rng::unit_phasor(rng)
    }

    /// Quadrature nodes `(ln |x|^2, weight)` whose weights sum to one.
    /// A fixed magnitude yields one node.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        if self.width() == 0.0 {
            return vec![(self.lo, 1.0)];
        }
        let w = self.width();
        GaussLegendre::new(QUAD_ORDER)
            .composite(self.lo, self.hi, QUAD_PANELS)
            .into_iter()
            .map(|(u, wt)| (u, wt / w))
            .collect()
    }

    /// `E[f(ln |X|^2)]` by quadrature.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes().into_iter().map(|(u, w)| w * f(u)).sum()
    }
}

/// Per-slot bounds on `ln |X|^2`, as drawn from the schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlotBounds {
    pub log_min: f64,
    pub log_max: f64,
}

impl SlotBounds {
    /// The input law of the slot. An inverted interval is read as the law
    /// between its two endpoints.
    pub fn law(&self) -> LogUniformLaw {
        let (lo, hi) = if self.log_min <= self.log_max {
            (self.log_min, self.log_max)
        } else {
            (self.log_max, self.log_min)
        };
        LogUniformLaw { lo, hi }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchemeParams {
    tau: usize,
    log_power: f64,
    memory: usize,
    slots: Vec<SlotBounds>,
}

fn default_slots(tau: usize, log_power: f64) -> Vec<SlotBounds> {
    let loglog = log_power.ln();
    (1..=tau)
        .map(|nu| SlotBounds {
            log_min: (nu - 1) as f64 / tau as f64 * log_power + loglog,
            log_max: nu as f64 / tau as f64 * log_power,
        })
        .collect()
}

/// `P^(1/tau) > ln P`, i.e. every slot interval is nonempty.
pub fn schedule_is_valid(tau: usize, log_power: f64) -> bool {
    tau >= 1 && log_power > 0.0 && log_power / tau as f64 > log_power.ln()
}

/// The default schedule for block length `tau`, power `P = e^log_power` and memory `L`.
pub fn build_scheme(tau: usize, log_power: f64, memory: usize) -> Result<SchemeParams> {
    if tau == 0 {
        return Err(Error::Schedule("tau must be at least 1".into()));
    }
    if !(log_power > 0.0) || !log_power.is_finite() {
        return Err(Error::Schedule(format!("requires P > 1, got ln P = {log_power}")));
    }
    if !schedule_is_valid(tau, log_power) {
        return Err(Error::Schedule(format!(
            "P^(1/tau) > ln P violated: ln P / tau = {} <= ln ln P = {} (tau = {tau}); lower tau",
            log_power / tau as f64,
            log_power.ln()
        )));
    }
    Ok(SchemeParams {
        tau,
        log_power,
        memory,
        slots: default_slots(tau, log_power),
    })
}

impl SchemeParams {
    /// The default schedule without the `P^(1/tau) > ln P` check. Slots with
    /// inverted endpoints keep the law between the two endpoints. Only the
    /// input law is meaningful for such a scheme; [`lower_bound`] rejects it.
    pub fn default_schedule_unchecked(tau: usize, log_power: f64, memory: usize) -> Result<Self> {
        if tau == 0 || !(log_power > 0.0) || !log_power.is_finite() {
            return Err(Error::Schedule(format!(
                "requires tau >= 1 and P > 1, got tau = {tau}, ln P = {log_power}"
            )));
        }
        Ok(Self {
            tau,
            log_power,
            memory,
            slots: default_slots(tau, log_power),
        })
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn log_power(&self) -> f64 {
        self.log_power
    }

    pub fn block_len(&self) -> usize {
        self.memory + self.tau
    }

    pub fn slots(&self) -> &[SlotBounds] {
        &self.slots
    }

    pub fn is_valid(&self) -> bool {
        self.slots.iter().all(|s| s.log_min < s.log_max)
    }

    /// Slot `nu` in `1..=tau`.
    pub fn slot(&self, nu: usize) -> &SlotBounds {
        &self.slots[nu - 1]
    }

    /// Law of `X_k` for 0-based position `pos` in a block; `None` in the guard.
    pub fn law_at(&self, pos: usize) -> Option<LogUniformLaw> {
        let j = pos % self.block_len();
        (j >= self.memory).then(|| self.slots[j - self.memory].law())
    }

    /// `max_{l < nu} x2_max(l) / x2_min(nu)`, with `x2_max(0) = 0`.
    pub fn interference_ratio(&self, nu: usize) -> f64 {
        if nu == 1 {
            return 0.0;
        }
        let max_prev = self.slots[..nu - 1]
            .iter()
            .map(|s| s.log_max)
            .fold(f64::NEG_INFINITY, f64::max);
        (max_prev - self.slot(nu).log_min).exp()
    }
}

/// One block: `L` zeros followed by `tau` independent slots.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockInput(pub Vec<Complex64>);

pub fn sample_block_with<R: Rng + ?Sized>(params: &SchemeParams, rng: &mut R) -> BlockInput {
    let zero = Complex64::new(0.0, 0.0);
    let mut out = vec![zero; params.block_len()];
    for (x, slot) in out[params.memory..].iter_mut().zip(&params.slots) {
        *x = slot.law().sample(rng);
    }
    BlockInput(out)
}

pub fn sample_block(params: &SchemeParams, seed: u64) -> BlockInput {
    sample_block_with(params, &mut rng::stream(seed, rng::INPUT, 0))
}

/// `ln` of the average power per channel use over one block.
pub fn log_block_average_power(params: &SchemeParams) -> f64 {
    let logs: Vec<f64> = params.slots.iter().map(|s| s.law().log_mean_power()).collect();
    log_sum_exp(&logs) - (params.block_len() as f64).ln()
}

/// Average power per channel use over one block.
pub fn block_average_power(params: &SchemeParams) -> f64 {
    log_block_average_power(params).exp()
}

/// Whether the scheme meets `(1/n) sum E|X_k|^2 <= P`.
pub fn meets_power_constraint(params: &SchemeParams) -> bool {
    log_block_average_power(params) <= params.log_power
}

/// Lower bound on `I(X; HX + W)`:
///
/// `h(X) - E ln|X|^2 + E ln|H|^2 - E ln(pi e (sigma_h + sigma_w / |X|)^2)`,
///
/// with the last expectation taken by quadrature over `law`.
pub fn lemma_mi_lower_bound(
    h_x: f64,
    mean_log_x2: f64,
    mean_log_h2: f64,
    sigma_h: f64,
    sigma_w: f64,
    law: &LogUniformLaw,
) -> Result<f64> {
    if !(sigma_h > 0.0) {
        return Err(Error::Domain(format!("sigma_H must be positive, got {sigma_h}")));
    }
    if !(sigma_w >= 0.0) {
        return Err(Error::Domain(format!("sigma_W must be nonnegative, got {sigma_w}")));
    }
    let penalty = law.expect(|u| (PI * E).ln() + 2.0 * (sigma_h + sigma_w * (-0.5 * u).exp()).ln());
    Ok(h_x - mean_log_x2 + mean_log_h2 - penalty)
}

/// [`lemma_mi_lower_bound`] with `h(X)` and `E ln|X|^2` taken from `law`.
pub fn lemma_bound_for_law(law: &LogUniformLaw, mean_log_h2: f64, sigma_h: f64, sigma_w: f64) -> Result<f64> {
    lemma_mi_lower_bound(law.entropy(), law.mean_log_power(), mean_log_h2, sigma_h, sigma_w, law)
}

/// Channel statistics the lower bound depends on.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectStats {
    pub mean_log_gain_0: f64,
    pub alpha_0: f64,
    pub alpha_total: f64,
    pub noise_variance: f64,
    /// `L`.
    pub memory: usize,
}

impl DirectStats {
    pub fn from_config(config: &ChannelConfig) -> Result<Self> {
        let (_, s0) = config
            .path_stats()
            .into_iter()
            .find(|(l, _)| *l == 0)
            .ok_or_else(|| Error::InvalidChannel("path 0 is inactive".into()))?;
        Ok(Self {
            mean_log_gain_0: s0.mean_log_gain,
            alpha_0: s0.alpha,
            alpha_total: aggregate_gain(config),
            noise_variance: config.noise_variance(),
            memory: config.num_paths(),
        })
    }
}

/// `ln ln(P^(1/tau) / ln P)`, from `ln P`.
pub fn loglog_slot_ratio(log_power: f64, tau: usize) -> Result<f64> {
    if !schedule_is_valid(tau, log_power) {
        return Err(Error::Schedule(format!(
            "P^(1/tau) > ln P violated for ln P = {log_power}, tau = {tau}"
        )));
    }
    Ok((log_power / tau as f64 - log_power.ln()).ln())
}

/// `Xi_P = E ln|H^(0)|^2 - 1 - 2 ln(sqrt(alpha_0) + sqrt((a + sigma^2) / ln P))`.
pub fn xi_p(log_power: f64, stats: &DirectStats) -> Result<f64> {
    if !(log_power > 0.0) {
        return Err(Error::Domain(format!("requires P > 1, got ln P = {log_power}")));
    }
    let interference = ((stats.alpha_total + stats.noise_variance) / log_power).sqrt();
    Ok(stats.mean_log_gain_0 - 1.0 - 2.0 * (stats.alpha_0.sqrt() + interference).ln())
}

/// Per-slot rate bound, identical for every slot and block:
/// `ln ln(P^(1/tau) / ln P) + Xi_P`.
pub fn per_symbol_bound(log_power: f64, tau: usize, stats: &DirectStats) -> Result<f64> {
    Ok(loglog_slot_ratio(log_power, tau)? + xi_p(log_power, stats)?)
}

/// Sharper slot-dependent bound, evaluated from the actual schedule before
/// the interference and noise terms are relaxed uniformly over slots.
pub fn slot_bound(nu: usize, scheme: &SchemeParams, stats: &DirectStats) -> Result<f64> {
    if !scheme.is_valid() {
        return Err(Error::Schedule("slot intervals must be nonempty".into()));
    }
    if nu == 0 || nu > scheme.tau {
        return Err(Error::Domain(format!("slot index {nu} outside 1..={}", scheme.tau)));
    }
    let slot = scheme.slot(nu);
    let width = slot.log_max - slot.log_min;
    let leak = stats.alpha_total * scheme.interference_ratio(nu)
        + (stats.noise_variance.ln() - slot.log_min).exp();
    Ok(width.ln() + stats.mean_log_gain_0 - 1.0 - 2.0 * (stats.alpha_0.sqrt() + leak.sqrt()).ln())
}

/// Achievable rate in nats per channel use for block length `tau`.
pub fn lower_bound(log_snr: f64, tau: usize, stats: &DirectStats) -> Result<f64> {
    let log_power = log_snr + stats.noise_variance.ln();
    if !(log_power > 0.0) {
        return Err(Error::Schedule(format!("requires P > 1, got ln P = {log_power}")));
    }
    let weight = tau as f64 / (stats.memory + tau) as f64;
    Ok(weight * per_symbol_bound(log_power, tau, stats)?)
}

/// Best block length in `1..=tau_max`; ties go to the smaller `tau`.
pub fn optimize_tau(log_snr: f64, stats: &DirectStats, tau_max: usize) -> Result<(usize, f64)> {
    if tau_max == 0 {
        return Err(Error::Domain("tau_max must be at least 1".into()));
    }
    let mut best: Option<(usize, f64)> = None;
    for tau in 1..=tau_max {
        let Ok(v) = lower_bound(log_snr, tau, stats) else {
            continue;
        };
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((tau, v));
        }
    }
    best.ok_or_else(|| {
        Error::Schedule(format!(
            "no tau in 1..={tau_max} satisfies P > 1 and P^(1/tau) > ln P at ln SNR = {log_snr}"
        ))
    })
}
