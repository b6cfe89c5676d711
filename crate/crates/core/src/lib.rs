//! Capacity bounds for discrete-time noncoherent multipath fading channels.
//!
//! The channel output at time `k` is a sum of the current and the `L`
//! previous inputs, each scaled by a stationary random path gain, plus
//! circularly-symmetric Gaussian noise. Neither end knows the fading
//! realization. This crate evaluates, in exact finite-SNR form, a
//! duality-based capacity upper bound and an achievable-rate lower bound
//! built from zero-guarded blocks with log-uniform magnitudes. Both grow
//! like `log log SNR` with unit slope asymptotically, whatever `L` is.
//!
//! Module map:
//!
//! * [`fading`]: path-gain process models, samplers and closed-form statistics.
//! * [`channel`]: the multipath channel itself and SNR bookkeeping.
//! * [`converse`]: the upper bound.
//! * [`direct`]: the block coding scheme and the lower bound.
//! * [`oracle`]: Monte Carlo checks of the analytic ingredients.
//! * [`config`], [`sweep`]: JSON configuration, SNR sweeps, slope fits, output.
//!
//! All rates and entropies are in nats. Power and SNR are carried as natural
//! logarithms so that SNRs such as `10^200` stay representable.

pub mod channel;
pub mod config;
pub mod converse;
pub mod direct;
pub mod error;
pub mod fading;
pub mod oracle;
pub mod par;
pub mod quad;
pub mod rng;
pub mod special;
pub mod sweep;

pub use error::{Error, Result};
