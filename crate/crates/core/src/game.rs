//! The guess-your-neighbour's-input game played with batches of photons.
//!
//! A referee hands Alice `x` and Bob `y`. Each photon leaves the final beam
//! splitter at one port; both parties read the parity from whether the
//! photon showed up on their side and output the other party's bit as
//! `parity ⊕ own bit`. The game is won when `a = y` and `b = x`, which for a
//! single photon happens exactly when it exits at the port the parity
//! prescribes.
//!
//! Photon counts per setting are fixed batches. Settings draw from their own
//! indexed substreams so they can run in parallel and still reproduce
//! bit-for-bit.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{sample_port, BitPair, ChannelParams, Port};
use crate::rng;
use crate::stats::{self, LineFit};

/// Best winning probability of any classical one-way strategy.
pub const CLASSICAL_BOUND: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub n_settings: usize,
    pub photons_per_setting: u64,
    pub channel: ChannelParams,
    pub seed: u64,
}

impl GameConfig {
    pub fn new(
        n_settings: usize,
        photons_per_setting: u64,
        channel: ChannelParams,
        seed: u64,
    ) -> Result<Self> {
        if n_settings == 0 {
            return Err(Error::domain("at least one input setting is required"));
        }
        if photons_per_setting == 0 {
            return Err(Error::domain("at least one photon per setting is required"));
        }
        Ok(Self {
            n_settings,
            photons_per_setting,
            channel,
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameResult {
    pub success_probability: f64,
    /// Standard error of the mean over the input sequence.
    pub std_error: f64,
    pub per_setting_success: Vec<f64>,
}

/// Outputs `(a, b)` of Alice and Bob after one photon exits at `port`.
pub fn decode_outputs(bits: BitPair, port: Port) -> (bool, bool) {
    let parity_at_alice = port != Port::Alice;
    let parity_at_bob = port == Port::Bob;
    (parity_at_alice ^ bits.x, parity_at_bob ^ bits.y)
}

/// Fraction of `photons` for which both parties guess correctly.
pub fn play_setting<R: Rng + ?Sized>(
    bits: BitPair,
    photons: u64,
    channel: &ChannelParams,
    rng: &mut R,
) -> f64 {
    assert!(photons >= 1, "play_setting needs at least one photon");
    let wins = (0..photons)
        .filter(|_| {
            let (a, b) = decode_outputs(bits, sample_port(bits, channel, rng));
            a == bits.y && b == bits.x
        })
        .count();
    wins as f64 / photons as f64
}

/// Plays `n_settings` uniformly random input pairs and averages.
pub fn run_game(config: &GameConfig) -> GameResult {
    let mut inputs = rng::stream(config.seed, "game-inputs");
    let settings: Vec<BitPair> = (0..config.n_settings)
        .map(|_| BitPair::new(inputs.random(), inputs.random()))
        .collect();

    let per_setting_success: Vec<f64> = settings
        .par_iter()
        .enumerate()
        .map(|(i, &bits)| {
            let mut photons = rng::substream(config.seed, "game-setting", i as u64);
            play_setting(
                bits,
                config.photons_per_setting,
                &config.channel,
                &mut photons,
            )
        })
        .collect();

    GameResult {
        success_probability: stats::mean(&per_setting_success),
        std_error: stats::std_error(&per_setting_success),
        per_setting_success,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub visibility: f64,
    /// Seed the point was played with, derived from the template seed.
    pub seed: u64,
    pub result: GameResult,
}

/// Runs the game once per visibility, each with a fresh input sequence.
pub fn visibility_sweep(visibilities: &[f64], template: &GameConfig) -> Result<Vec<SweepPoint>> {
    visibilities
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let channel =
                ChannelParams::new(v)?.with_phase_noise(template.channel.phase_noise_sigma())?;
            let seed = rng::derive_seed(template.seed, "sweep-point", i as u64);
            let config = GameConfig {
                channel,
                seed,
                ..*template
            };
            Ok(SweepPoint {
                visibility: v,
                seed,
                result: run_game(&config),
            })
        })
        .collect()
}

/// Least-squares line of success probability against visibility.
pub fn fit_sweep(points: &[SweepPoint]) -> Option<LineFit> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.visibility, p.result.success_probability))
        .collect();
    stats::linear_fit(&xy)
}

/// Ideal law `(1 + V) / 2`.
pub fn predicted_success(visibility: f64) -> f64 {
    0.5 * (1.0 + visibility)
}

/// Winning probability of a mixture that signals Alice→Bob with weight
/// `lambda` and Bob→Alice otherwise, each side playing its best
/// deterministic strategy.
///
/// In a one-way strategy the receiver may know both inputs, but the sender's
/// guess can depend on its own input only. Enumerating the four guess
/// functions `f: {0,1} → {0,1}` against uniform inputs gives 1/2 for every
/// direction, hence for every mixture.
pub fn classical_baseline(lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::domain(format!(
            "mixture weight must lie in [0, 1], got {lambda}"
        )));
    }
    Ok(lambda * best_one_way(Direction::AliceToBob)
        + (1.0 - lambda) * best_one_way(Direction::BobToAlice))
}

#[derive(Clone, Copy)]
enum Direction {
    AliceToBob,
    BobToAlice,
}

fn best_one_way(direction: Direction) -> f64 {
    let inputs = [(false, false), (false, true), (true, false), (true, true)];
    // guess function encoded as a 2-bit truth table
    (0u8..4)
        .map(|table| {
            let guess = |own: bool| (table >> own as u8) & 1 == 1;
            let wins = inputs
                .iter()
                .filter(|&&(x, y)| match direction {
                    // Bob hears x; Alice must guess y from x alone
                    Direction::AliceToBob => guess(x) == y,
                    Direction::BobToAlice => guess(y) == x,
                })
                .count();
            wins as f64 / inputs.len() as f64
        })
        .fold(0.0, f64::max)
}
