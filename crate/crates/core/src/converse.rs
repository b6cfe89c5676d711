//! Capacity upper bound.
//!
//! Each term of the chain rule `I(X^n; Y^n) = sum_k I(X^n; Y_k | Y^{k-1})` is
//! bounded through the duality bound with free parameter `xi > 0`. After the
//! log-moment bounds and Jensen's inequality over `k` this gives, per symbol,
//!
//! ```text
//! C <= -g + xi (1 + ln(1 + a SNR) + Psi) + ln Gamma(xi) - xi ln xi + ln pi
//! ```
//!
//! where `g = min_{l active} (h_l - alpha_l)` and `a = sum_l alpha_l`.
//! `ln Gamma` is evaluated exactly, so no asymptotic remainder is dropped.

use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::channel::{aggregate_gain, ChannelConfig};
use crate::error::{Error, Result};
use crate::special::{ln_gamma, softplus};

/// `eps(delta, eta)` from the lower bound on `E[ln |Y_k|^2]`. Its form lives
/// outside this crate, so it is injected.
#[derive(Clone)]
pub enum Epsilon {
    Const(f64),
    Func(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl Epsilon {
    pub fn eval(&self, delta: f64, eta: f64) -> f64 {
        match self {
            Self::Const(c) => *c,
            Self::Func(f) => f(delta, eta),
        }
    }
}

impl fmt::Debug for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Const(c) => write!(f, "Const({c})"),
            Self::Func(_) => f.write_str("Func(..)"),
        }
    }
}

/// How `xi` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum XiChoice {
    /// `xi = 1 / (1 + ln(1 + a SNR))`.
    Default,
    Fixed(f64),
    /// Golden-section minimization of the bound over `(0, 1]`.
    Optimized,
}

#[derive(Clone, Debug)]
pub struct BoundParams {
    delta: f64,
    eta: f64,
    eps: Epsilon,
    xi: XiChoice,
    constants_certified: bool,
}

impl Default for BoundParams {
    /// `delta = 1`, `eta = 1/2`, `eps = 0`, closed-form `xi`, not certified.
    fn default() -> Self {
        Self {
            delta: 1.0,
            eta: 0.5,
            eps: Epsilon::Const(0.0),
            xi: XiChoice::Default,
            constants_certified: false,
        }
    }
}

impl BoundParams {
    pub fn new(delta: f64, eta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidParams(format!("delta must lie in (0, 1], got {delta}")));
        }
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidParams(format!("eta must lie in (0, 1), got {eta}")));
        }
        Ok(Self {
            delta,
            eta,
            ..Self::default()
        })
    }

    pub fn with_eps_const(mut self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParams(format!("eps must be finite and nonnegative, got {eps}")));
        }
        self.eps = Epsilon::Const(eps);
        Ok(self)
    }

    /// Injects `eps(delta, eta)`. The value at the configured point must be nonnegative.
    pub fn with_eps_fn<F>(mut self, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        let v = f(self.delta, self.eta);
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidParams(format!("eps(delta, eta) = {v} is not a finite nonnegative value")));
        }
        self.eps = Epsilon::Func(Arc::new(f));
        Ok(self)
    }

    pub fn with_xi(mut self, xi: f64) -> Result<Self> {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::InvalidParams(format!("xi must be positive, got {xi}")));
        }
        self.xi = XiChoice::Fixed(xi);
        Ok(self)
    }

    pub fn with_optimized_xi(mut self) -> Self {
        self.xi = XiChoice::Optimized;
        self
    }

    /// Marks the injected `eps` as a certified value.
    pub fn certified(mut self, yes: bool) -> Self {
        self.constants_certified = yes;
        self
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn eps(&self) -> f64 {
        self.eps.eval(self.delta, self.eta)
    }

    pub fn xi_choice(&self) -> XiChoice {
        self.xi
    }

    pub fn constants_certified(&self) -> bool {
        self.constants_certified
    }
}

/// Channel statistics the upper bound depends on.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConverseStats {
    /// `min over active l of (h_l - alpha_l)`.
    pub inf_gap: f64,
    pub alpha_total: f64,
    pub mean_log_gain_0: f64,
    /// `alpha_l` for `l = 0..=L`.
    pub alphas: Vec<f64>,
    pub noise_variance: f64,
}

impl ConverseStats {
    pub fn from_config(config: &ChannelConfig) -> Result<Self> {
        let stats = config.path_stats();
        let inf_gap = stats
            .iter()
            .map(|(_, s)| s.entropy_rate - s.alpha)
            .fold(f64::INFINITY, f64::min);
        if !inf_gap.is_finite() {
            return Err(Error::InvalidChannel("active set is empty".into()));
        }
        let mean_log_gain_0 = stats
            .iter()
            .find(|(l, _)| *l == 0)
            .map(|(_, s)| s.mean_log_gain)
            .ok_or_else(|| Error::InvalidChannel("path 0 is inactive".into()))?;
        Ok(Self {
            inf_gap,
            alpha_total: aggregate_gain(config),
            mean_log_gain_0,
            alphas: config.alphas(),
            noise_variance: config.noise_variance(),
        })
    }
}

/// `ln(1 + a SNR)` from `ln SNR`.
pub fn log1p_gain_snr(log_snr: f64, alpha_total: f64) -> f64 {
    softplus(alpha_total.ln() + log_snr)
}

/// `xi = 1 / (1 + ln(1 + a SNR))`.
pub fn xi_default(log_snr: f64, alpha_total: f64) -> Result<f64> {
    if !(alpha_total > 0.0) {
        return Err(Error::Domain(format!("aggregate gain must be positive, got {alpha_total}")));
    }
    if !log_snr.is_finite() {
        return Err(Error::Domain(format!("log SNR must be finite, got {log_snr}")));
    }
    Ok(1.0 / (1.0 + log1p_gain_snr(log_snr, alpha_total)))
}

/// `Psi = ln(1/delta^2) + 2 eps + (2/eta)(2/e + ln(pi e)) - (2/eta) g`.
pub fn psi(params: &BoundParams, inf_gap: f64) -> f64 {
    let scale = 2.0 / params.eta;
    -2.0 * params.delta.ln() + 2.0 * params.eps() + scale * (2.0 / E + (PI * E).ln()) - scale * inf_gap
}

/// The duality bound at a given `xi`, with `ln(1 + a SNR)` passed as `log_term`.
pub fn bound_at_xi(xi: f64, log_term: f64, psi: f64, inf_gap: f64) -> f64 {
    -inf_gap + xi * (1.0 + log_term + psi) + ln_gamma(xi) - xi * xi.ln() + PI.ln()
}

/// Minimizes [`bound_at_xi`] over `xi` in `(0, 1]` by golden-section search.
/// The objective is convex in `xi`.
pub fn optimize_xi(log_term: f64, psi: f64, inf_gap: f64) -> (f64, f64) {
    let f = |x: f64| bound_at_xi(x, log_term, psi, inf_gap);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    // Search over ln xi; the minimizer sits near 1 / (1 + log_term + Psi).
    let mut lo = -(2.0 + log_term + psi.abs()).ln() - 10.0;
    let mut hi = 0.0f64;
    let g = |t: f64| f(t.exp());
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..200 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = g(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = g(d);
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    let best = (t.exp(), g(t));
    let edge = (1.0, f(1.0));
    if edge.1 < best.1 {
        edge
    } else {
        best
    }
}

/// The `xi` used at `log_snr` and the resulting bound.
pub fn upper_bound_with_xi(log_snr: f64, stats: &ConverseStats, params: &BoundParams) -> Result<(f64, f64)> {
    let log_term = log1p_gain_snr(log_snr, stats.alpha_total);
    let psi = psi(params, stats.inf_gap);
    match params.xi {
        XiChoice::Default => {
            let xi = xi_default(log_snr, stats.alpha_total)?;
            // xi (1 + ln(1 + a SNR)) = 1 exactly
            let value = 1.0 + xi * psi + ln_gamma(xi) - xi * xi.ln() + PI.ln() - stats.inf_gap;
            Ok((xi, value))
        }
        XiChoice::Fixed(xi) => {
            if !(xi > 0.0) {
                return Err(Error::Domain(format!("xi must be positive, got {xi}")));
            }
            Ok((xi, bound_at_xi(xi, log_term, psi, stats.inf_gap)))
        }
        XiChoice::Optimized => Ok(optimize_xi(log_term, psi, stats.inf_gap)),
    }
}

/// Upper bound on capacity in nats per channel use.
pub fn upper_bound(log_snr: f64, stats: &ConverseStats, params: &BoundParams) -> Result<f64> {
    upper_bound_with_xi(log_snr, stats, params).map(|(_, v)| v)
}

/// `Upsilon_{n,P}` for per-symbol input powers `E|X_k|^2`, `k = 1..n`.
pub fn upsilon(powers: &[f64], log_snr: f64, stats: &ConverseStats, params: &BoundParams) -> Result<f64> {
    if powers.is_empty() {
        return Err(Error::Domain("need at least one symbol".into()));
    }
    if let Some(p) = powers.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
        return Err(Error::Domain(format!("powers must be finite and nonnegative, got {p}")));
    }
    let memory = stats.alphas.len() - 1;
    let inner: f64 = (0..powers.len())
        .map(|k| {
            let received: f64 = (0..=k.min(memory)).map(|l| stats.alphas[l] * powers[k - l]).sum();
            (received / stats.noise_variance).ln_1p()
        })
        .sum::<f64>()
        / powers.len() as f64;
    let log_term = log1p_gain_snr(log_snr, stats.alpha_total);
    let psi = psi(params, stats.inf_gap);
    Ok((1.0 + inner + psi) / (1.0 + log_term) - stats.inf_gap + PI.ln())
}

/// `1 + Psi - g + ln pi`, which dominates `Upsilon_{n,P}` for every admissible
/// allocation when `Psi >= 0`.
pub fn jensen_cap(stats: &ConverseStats, params: &BoundParams) -> f64 {
    1.0 + psi(params, stats.inf_gap) - stats.inf_gap + PI.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fading::PathGainSpec;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use proptest::prelude::*;

    const BRACKET: f64 = 2.0 / E + 1.0 + 1.144_729_885_849_400_2;

    fn demo() -> ChannelConfig {
        ChannelConfig::new(
            vec![
                PathGainSpec::ar1(1.0, Complex64::new(0.5, 0.0)).unwrap(),
                PathGainSpec::iid(0.5).unwrap(),
                PathGainSpec::iid(0.25).unwrap(),
            ],
            1.0,
            0.0,
        )
        .unwrap()
    }

    fn stats(gap: f64, alpha_total: f64) -> ConverseStats {
        ConverseStats {
            inf_gap: gap,
            alpha_total,
            mean_log_gain_0: 0.0,
            alphas: vec![alpha_total],
            noise_variance: 1.0,
        }
    }

    #[test]
    fn xi_examples() {
        // a SNR = e - 1
        let log_snr = (E - 1.0).ln();
        assert_abs_diff_eq!(xi_default(log_snr, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(xi_default(0.0, 1.0).unwrap(), 1.0 / (1.0 + 2f64.ln()), epsilon = 1e-15);
        let xi = xi_default(500.0, 1.0).unwrap();
        assert!(xi.is_finite());
        assert_abs_diff_eq!(xi, 1.0 / 501.0, epsilon = 1e-12);
        assert!(xi_default(1.0, 0.0).is_err());
    }

    #[test]
    fn xi_stable_path_matches_naive_at_moderate_snr() {
        for log_snr in [0.0, 5.0, 20.0, 40.0] {
            let naive = 1.0 / (1.0 + (1.0 + 1.75 * f64::exp(log_snr)).ln());
            assert_abs_diff_eq!(xi_default(log_snr, 1.75).unwrap(), naive, epsilon = 1e-15);
        }
    }

    #[test]
    fn psi_examples() {
        let p = BoundParams::default();
        assert_abs_diff_eq!(psi(&p, 0.0), 4.0 * BRACKET, epsilon = 1e-13);
        let p = BoundParams::new(0.5, 0.5).unwrap().with_eps_fn(|_, _| 0.1).unwrap();
        assert_abs_diff_eq!(psi(&p, 1.0), 4f64.ln() + 0.2 + 4.0 * BRACKET - 4.0, epsilon = 1e-13);
    }

    #[test]
    fn psi_decreasing_in_eta_when_gap_small() {
        let mut prev = f64::INFINITY;
        for i in 1..20 {
            let p = BoundParams::new(1.0, i as f64 / 20.0).unwrap();
            let v = psi(&p, 0.3);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn params_validation() {
        assert!(BoundParams::new(0.0, 0.5).is_err());
        assert!(BoundParams::new(1.5, 0.5).is_err());
        assert!(BoundParams::new(1.0, 1.0).is_err());
        assert!(BoundParams::new(1.0, 0.0).is_err());
        assert!(BoundParams::default().with_eps_const(-1.0).is_err());
        assert!(BoundParams::default().with_eps_fn(|d, _| -d).is_err());
        assert!(BoundParams::default().with_xi(0.0).is_err());
    }

    #[test]
    fn unit_xi_drops_gamma_terms() {
        let s = stats(0.4, 1.75);
        let p = BoundParams::default().with_xi(1.0).unwrap();
        let log_snr = 10.0;
        let expected = -0.4 + (1.0 + (1.0 + 1.75 * 10f64.exp()).ln() + psi(&p, 0.4)) + PI.ln();
        assert_abs_diff_eq!(upper_bound(log_snr, &s, &p).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn default_xi_is_the_collapsed_form() {
        let s = stats(0.4, 1.75);
        let p = BoundParams::default();
        for log_snr in [1.0, 10.0, 100.0] {
            let xi = xi_default(log_snr, 1.75).unwrap();
            let general = bound_at_xi(xi, log1p_gain_snr(log_snr, 1.75), psi(&p, 0.4), 0.4);
            assert_abs_diff_eq!(upper_bound(log_snr, &s, &p).unwrap(), general, epsilon = 1e-12);
        }
    }

    #[test]
    fn bound_minus_loglog_converges() {
        // Remainder ->  1 + ln pi - g.
        let s = stats(0.508, 1.75);
        let p = BoundParams::default();
        let limit = 1.0 + PI.ln() - 0.508;
        let mut prev = f64::INFINITY;
        for log10 in [1e2, 1e3, 1e4, 1e6, 1e8] {
            let log_snr = log10 * 10f64.ln();
            let rem = upper_bound(log_snr, &s, &p).unwrap() - log1p_gain_snr(log_snr, 1.75).ln_1p();
            assert!(rem > limit && rem < prev);
            prev = rem;
        }
        assert!(prev - limit < 1e-6);
    }

    #[test]
    fn loglog_increment_between_1e20_and_1e40() {
        // Frozen from an independent evaluation (scipy gammaln) of the default-xi
        // bound for the demo channel: the increment is about 0.552, short of
        // ln 2 because the xi * Psi term is still decaying.
        let s = ConverseStats::from_config(&demo()).unwrap();
        let p = BoundParams::default();
        let u = |l10: f64| upper_bound(l10 * 10f64.ln(), &s, &p).unwrap();
        assert_abs_diff_eq!(u(40.0) - u(20.0), 0.551_675_449_112_397_4, epsilon = 1e-9);
    }

    #[test]
    fn demo_stats() {
        let s = ConverseStats::from_config(&demo()).unwrap();
        // path 2: ln(pi e / 4) - 1/4
        assert_abs_diff_eq!(s.inf_gap, (PI * E * 0.25).ln() - 0.25, epsilon = 1e-14);
        assert_eq!(s.alpha_total, 1.75);
        assert_abs_diff_eq!(s.mean_log_gain_0, -crate::special::EULER_GAMMA, epsilon = 1e-15);
    }

    #[test]
    fn zero_paths_excluded_from_gap() {
        let cfg = ChannelConfig::new(
            vec![PathGainSpec::iid(1.0).unwrap(), PathGainSpec::Zero],
            1.0,
            0.0,
        )
        .unwrap();
        let s = ConverseStats::from_config(&cfg).unwrap();
        assert_abs_diff_eq!(s.inf_gap, (PI * E).ln() - 1.0, epsilon = 1e-14);
    }

    #[test]
    fn upsilon_zero_power() {
        let s = ConverseStats::from_config(&demo()).unwrap();
        let p = BoundParams::default();
        let log_snr = 30.0;
        let expected = (1.0 + psi(&p, s.inf_gap)) / (1.0 + log1p_gain_snr(log_snr, 1.75)) - s.inf_gap + PI.ln();
        assert_abs_diff_eq!(upsilon(&[0.0; 32], log_snr, &s, &p).unwrap(), expected, epsilon = 1e-14);
        assert!(upsilon(&[], log_snr, &s, &p).is_err());
        assert!(upsilon(&[-1.0], log_snr, &s, &p).is_err());
    }

    #[test]
    fn upsilon_constant_power_below_cap() {
        let s = ConverseStats::from_config(&demo()).unwrap();
        let p = BoundParams::default();
        let cap = jensen_cap(&s, &p);
        for log_snr in [3.0f64, 15.0, 60.0] {
            let power = log_snr.exp();
            let u = upsilon(&vec![power; 64], log_snr, &s, &p).unwrap();
            assert!(u <= cap);
            // slack is at most (1 + Psi) - (1 + Psi) / (1 + ln(1 + a SNR)) plus the Jensen gap
            assert!(cap - u <= 1.0 + psi(&p, s.inf_gap));
        }
    }

    #[test]
    fn jensen_cap_zero_psi() {
        let s = stats(0.0, 1.0);
        // Psi = 0 when the gap equals the bracket at delta = 1, eps = 0.
        let mut s2 = s.clone();
        s2.inf_gap = BRACKET;
        let p = BoundParams::default();
        assert_abs_diff_eq!(psi(&p, s2.inf_gap), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(jensen_cap(&s2, &p), 1.0 - BRACKET + PI.ln(), epsilon = 1e-13);
    }

    #[test]
    fn optimized_xi_never_worse_than_default() {
        let s = ConverseStats::from_config(&demo()).unwrap();
        let p = BoundParams::default();
        let po = BoundParams::default().with_optimized_xi();
        for l10 in [1.0, 5.0, 20.0, 100.0, 200.0] {
            let log_snr = l10 * 10f64.ln();
            let d = upper_bound(log_snr, &s, &p).unwrap();
            let (xi, o) = upper_bound_with_xi(log_snr, &s, &po).unwrap();
            assert!(xi > 0.0 && xi <= 1.0);
            assert!(o <= d + 1e-12, "{o} > {d} at {l10}");
        }
    }

    proptest! {
        #[test]
        fn scale_invariance(log_c in -20.0..20.0f64, log_p in 1.0..200.0f64) {
            let base = demo().with_log_power(log_p).unwrap();
            let s = ConverseStats::from_config(&base).unwrap();
            let paths = base.paths().to_vec();
            let scaled = ChannelConfig::new(paths, log_c.exp(), log_p + log_c).unwrap();
            let p = BoundParams::default();
            let a = upper_bound(crate::channel::snr_of(&base), &s, &p).unwrap();
            let mut ss = ConverseStats::from_config(&scaled).unwrap();
            ss.noise_variance = s.noise_variance;
            let b = upper_bound(crate::channel::snr_of(&scaled), &ss, &p).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn jensen_step_holds_for_random_allocations(
            weights in prop::collection::vec(0.0..1.0f64, 1..64),
            log_snr in 0.0..100.0f64,
        ) {
            let s = ConverseStats::from_config(&demo()).unwrap();
            let p = BoundParams::default();
            let total: f64 = weights.iter().sum();
            prop_assume!(total > 0.0);
            let n = weights.len() as f64;
            let power = log_snr.exp();
            let powers: Vec<f64> = weights.iter().map(|w| w / total * n * power).collect();
            prop_assert!(upsilon(&powers, log_snr, &s, &p).unwrap() <= jensen_cap(&s, &p));
        }
    }
}
