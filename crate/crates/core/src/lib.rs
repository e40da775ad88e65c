//! Simulation and analysis toolkit for two-way communication with a single
//! photon held in superposition between two parties.
//!
//! The crate is organised bottom-up:
//!
//! - [`quantum`]: two-mode single-photon state algebra and port statistics
//!   under finite interferometric visibility.
//! - [`source`]: heralded probabilistic source, interval photon counts and
//!   the heralded g²(0) estimator.
//! - [`game`]: the guess-your-neighbour's-input game and visibility sweeps.
//! - [`protocol`]: the loss-robust interval protocol, its analytic error
//!   model and repetition-code majority voting.
//! - [`security`]: parity-only leakage, one-time pad and bitmap transmission.
//! - [`timing`]: arrival-time synthesis, Gaussian peak fitting and the
//!   round-trip significance test.
//!
//! Every stochastic routine takes an explicit random stream; see [`rng`] for
//! how streams are derived from a single seed.

pub mod error;
pub mod game;
pub mod protocol;
pub mod quantum;
pub mod rng;
pub mod security;
pub mod source;
pub mod stats;
pub mod timing;

pub use error::{Error, Result};
pub use quantum::{BitPair, ChannelParams, PhotonState, Port};
