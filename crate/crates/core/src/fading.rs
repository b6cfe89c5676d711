//! Stationary path-gain processes.
//!
//! Every model is a zero-mean circularly-symmetric complex Gaussian process,
//! which gives closed forms for the two statistics the bounds consume: the
//! differential entropy rate and the mean log power gain `E[ln |H|^2]`.

use std::f64::consts::{E, PI};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::special::EULER_GAMMA;

/// Law of one path-gain process `{H_k}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathGainRecord", into = "PathGainRecord")]
pub enum PathGainSpec {
    /// IID `CN(0, alpha)`.
    IidGaussian { alpha: f64 },
    /// Gauss-Markov: `H_k = a H_{k-1} + sqrt(alpha (1 - |a|^2)) U_k`, stationary variance `alpha`.
    Ar1Gaussian { alpha: f64, a: Complex64 },
    /// A tap that is identically zero.
    Zero,
}

/// Statistics of a path with positive variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PathStats {
    /// `E|H_k|^2`.
    pub alpha: f64,
    /// Differential entropy rate in nats per symbol.
    pub entropy_rate: f64,
    /// `E[ln |H_k|^2]` in nats.
    pub mean_log_gain: f64,
}

impl PathGainSpec {
    pub fn iid(alpha: f64) -> Result<Self> {
        let spec = Self::IidGaussian { alpha };
        spec.validate()?;
        Ok(spec)
    }

    pub fn ar1(alpha: f64, a: Complex64) -> Result<Self> {
        let spec = Self::Ar1Gaussian { alpha, a };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Zero => Ok(()),
            Self::IidGaussian { alpha } => check_alpha(alpha),
            Self::Ar1Gaussian { alpha, a } => {
                check_alpha(alpha)?;
                if !(a.re.is_finite() && a.im.is_finite()) || a.norm() >= 1.0 {
                    return Err(Error::InvalidPath(format!(
                        "AR(1) pole must satisfy |a| < 1, got |a| = {}",
                        a.norm()
                    )));
                }
                Ok(())
            }
        }
    }

    /// `E|H_k|^2`.
    pub fn alpha(&self) -> f64 {
        match *self {
            Self::IidGaussian { alpha } | Self::Ar1Gaussian { alpha, .. } => alpha,
            Self::Zero => 0.0,
        }
    }

    /// Whether the path belongs to the active set (positive variance).
    pub fn is_active(&self) -> bool {
        self.alpha() > 0.0
    }

    /// Spectral density on `[-pi, pi]`, normalized so that its mean over the
    /// circle is the variance. Zero for inactive paths.
    pub fn spectral_density(&self, lambda: f64) -> f64 {
        match *self {
            Self::IidGaussian { alpha } => alpha,
            Self::Ar1Gaussian { alpha, a } => {
                let innovation = alpha * (1.0 - a.norm_sqr());
                let denom = (Complex64::new(1.0, 0.0) - a * Complex64::from_polar(1.0, -lambda)).norm_sqr();
                innovation / denom
            }
            Self::Zero => 0.0,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::InvalidPath(format!(
            "variance must be finite and nonnegative, got {alpha}"
        )));
    }
    Ok(())
}

/// Closed-form statistics. `Ok(None)` for zero-variance paths, which are
/// excluded from the active set.
pub fn stats_of(spec: &PathGainSpec) -> Result<Option<PathStats>> {
    spec.validate()?;
    if !spec.is_active() {
        return Ok(None);
    }
    let alpha = spec.alpha();
    // The marginal is CN(0, alpha), so |H|^2 / alpha is unit exponential.
    let mean_log_gain = alpha.ln() - EULER_GAMMA;
    let entropy_rate = match *spec {
        PathGainSpec::IidGaussian { .. } => (PI * E * alpha).ln(),
        PathGainSpec::Ar1Gaussian { a, .. } => (PI * E * alpha * (1.0 - a.norm_sqr())).ln(),
        PathGainSpec::Zero => unreachable!(),
    };
    Ok(Some(PathStats {
        alpha,
        entropy_rate,
        mean_log_gain,
    }))
}

/// Entropy rate of a stationary complex Gaussian process from its spectral
/// density: `ln(pi e) + (1/2pi) int ln S`. The integrand is periodic, so the
/// midpoint rule on `grid_points` nodes converges geometrically for smooth `S`.
pub fn entropy_rate_szego<S: Fn(f64) -> f64>(spectral_density: S, grid_points: usize) -> Result<f64> {
    if grid_points == 0 {
        return Err(Error::Domain("need at least one grid point".into()));
    }
    let step = 2.0 * PI / grid_points as f64;
    let mut acc = 0.0;
    for j in 0..grid_points {
        let lambda = -PI + (j as f64 + 0.5) * step;
        let value = spectral_density(lambda);
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositiveDensity { lambda, value });
        }
        acc += value.ln();
    }
    Ok((PI * E).ln() + acc / grid_points as f64)
}

/// Draws a stationary sample path. Owns its position in the process.
#[derive(Clone, Debug)]
pub struct PathSampler {
    spec: PathGainSpec,
    state: Option<Complex64>,
}

impl PathSampler {
    pub fn new(spec: PathGainSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, state: None })
    }

    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Complex64 {
        let h = match (self.spec, self.state) {
            (PathGainSpec::Zero, _) => Complex64::new(0.0, 0.0),
            (PathGainSpec::IidGaussian { alpha }, _) => rng::complex_normal(rng, alpha),
            (PathGainSpec::Ar1Gaussian { alpha, .. }, None) => rng::complex_normal(rng, alpha),
            (PathGainSpec::Ar1Gaussian { alpha, a }, Some(prev)) => {
                a * prev + rng::complex_normal(rng, alpha * (1.0 - a.norm_sqr()))
            }
        };
        self.state = Some(h);
        h
    }

    pub fn fill<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [Complex64]) {
        for h in out {
            *h = self.next(rng);
        }
    }
}

/// Length-`n` sample path of `spec`, reproducible from `seed`.
pub fn sample_path(spec: &PathGainSpec, n: usize, seed: u64) -> Result<Vec<Complex64>> {
    let mut sampler = PathSampler::new(*spec)?;
    let mut rng = rng::stream(seed, rng::path(0), 0);
    Ok((0..n).map(|_| sampler.next(&mut rng)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PathKind {
    IidGaussian,
    Ar1Gaussian,
    Zero,
}

/// Flat JSON form: `{kind, alpha, a_re, a_im}`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathGainRecord {
    kind: PathKind,
    #[serde(default)]
    alpha: f64,
    #[serde(default)]
    a_re: f64,
    #[serde(default)]
    a_im: f64,
}

impl TryFrom<PathGainRecord> for PathGainSpec {
    type Error = Error;

    fn try_from(r: PathGainRecord) -> Result<Self> {
        let spec = match r.kind {
            PathKind::IidGaussian => Self::IidGaussian { alpha: r.alpha },
            PathKind::Ar1Gaussian => Self::Ar1Gaussian {
                alpha: r.alpha,
                a: Complex64::new(r.a_re, r.a_im),
            },
            PathKind::Zero => {
                if r.alpha != 0.0 {
                    return Err(Error::InvalidPath("zero path must have alpha = 0".into()));
                }
                Self::Zero
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<PathGainSpec> for PathGainRecord {
    fn from(spec: PathGainSpec) -> Self {
        match spec {
            PathGainSpec::IidGaussian { alpha } => Self {
                kind: PathKind::IidGaussian,
                alpha,
                a_re: 0.0,
                a_im: 0.0,
            },
            PathGainSpec::Ar1Gaussian { alpha, a } => Self {
                kind: PathKind::Ar1Gaussian,
                alpha,
                a_re: a.re,
                a_im: a.im,
            },
            PathGainSpec::Zero => Self {
                kind: PathKind::Zero,
                alpha: 0.0,
                a_re: 0.0,
                a_im: 0.0,
            },
        }
    }
}
