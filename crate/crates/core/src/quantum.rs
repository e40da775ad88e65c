//! One photon in two spatial modes: Alice's location and Bob's location.
//!
//! The photon starts in an equal superposition of the two modes, each party
//! writes a bit into the phase of its own mode, and a balanced beam splitter
//! recombines the modes. With perfect interference the exit port is fixed by
//! the parity of the two bits: parity 0 exits towards Alice, parity 1 towards
//! Bob.
//!
//! Imperfect interference is described by the visibility `V`, which scales
//! the interference term linearly: `p_alice = (1 + (-1)^(x⊕y)·V) / 2`. An
//! optional Gaussian phase noise can be layered on top; its contrast loss is
//! `exp(-σ²/2)`, so a channel with `V = 1` and `σ = sqrt(-2 ln V')` has the
//! same port statistics as a pure contrast channel with visibility `V'`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NORM_TOLERANCE: f64 = 1e-12;

/// Output port of the final beam splitter, named after the party whose
/// detector sits behind it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Port {
    Alice,
    Bob,
}

/// The two input bits of one round: `x` is Alice's, `y` is Bob's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct BitPair {
    pub x: bool,
    pub y: bool,
}

impl BitPair {
    pub const fn new(x: bool, y: bool) -> Self {
        Self { x, y }
    }

    /// Builds a pair from numeric bits, rejecting anything other than 0 or 1.
    pub fn from_bits(x: u8, y: u8) -> Result<Self> {
        match (x, y) {
            (0 | 1, 0 | 1) => Ok(Self::new(x == 1, y == 1)),
            _ => Err(Error::domain(format!(
                "bits must be 0 or 1, got ({x}, {y})"
            ))),
        }
    }

    pub fn parity(self) -> bool {
        self.x ^ self.y
    }

    /// Port the photon leaves from under perfect interference.
    pub fn expected_port(self) -> Port {
        if self.parity() {
            Port::Bob
        } else {
            Port::Alice
        }
    }

    /// Same bits with the roles of the two parties exchanged.
    pub fn swapped(self) -> Self {
        Self::new(self.y, self.x)
    }
}

/// Amplitudes of the photon in Alice's mode and Bob's mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonState {
    pub amp_a: Complex64,
    pub amp_b: Complex64,
}

impl PhotonState {
    /// Normalizes the given amplitudes; both zero is rejected.
    pub fn new(amp_a: Complex64, amp_b: Complex64) -> Result<Self> {
        let norm = (amp_a.norm_sqr() + amp_b.norm_sqr()).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::UndefinedInput(
                "state with zero or non-finite norm".into(),
            ));
        }
        Ok(Self {
            amp_a: amp_a / norm,
            amp_b: amp_b / norm,
        })
    }

    /// Photon entirely in Alice's mode.
    pub fn alice() -> Self {
        Self {
            amp_a: Complex64::new(1.0, 0.0),
            amp_b: Complex64::new(0.0, 0.0),
        }
    }

    /// Equal-weight superposition of both locations, real positive amplitudes.
    pub fn prepare_superposition() -> Self {
        Self {
            amp_a: Complex64::new(FRAC_1_SQRT_2, 0.0),
            amp_b: Complex64::new(FRAC_1_SQRT_2, 0.0),
        }
    }

    /// Each party flips the sign of its own mode when its bit is 1.
    pub fn encode_phases(self, bits: BitPair) -> Self {
        let sign = |b: bool| if b { -1.0 } else { 1.0 };
        Self {
            amp_a: self.amp_a * sign(bits.x),
            amp_b: self.amp_b * sign(bits.y),
        }
    }

    /// Arbitrary phase shifts (radians) on the two modes.
    pub fn apply_phases(self, phase_a: f64, phase_b: f64) -> Self {
        Self {
            amp_a: self.amp_a * Complex64::from_polar(1.0, phase_a),
            amp_b: self.amp_b * Complex64::from_polar(1.0, phase_b),
        }
    }

    /// Balanced beam splitter `a → (a + b)/√2`, `b → (a − b)/√2`.
    /// The matrix is real symmetric and squares to the identity.
    pub fn beamsplitter(self) -> Self {
        Self {
            amp_a: (self.amp_a + self.amp_b) * FRAC_1_SQRT_2,
            amp_b: (self.amp_a - self.amp_b) * FRAC_1_SQRT_2,
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp_a.norm_sqr() + self.amp_b.norm_sqr()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOLERANCE
    }

    /// Born-rule probabilities of finding the photon in (Alice, Bob) mode.
    pub fn port_probabilities(&self) -> (f64, f64) {
        (self.amp_a.norm_sqr(), self.amp_b.norm_sqr())
    }

    /// True when `other = e^{iθ}·self` for some θ, within `tol` per amplitude.
    pub fn equal_up_to_global_phase(&self, other: &Self, tol: f64) -> bool {
        // overlap <self|other> carries the relative global phase
        let overlap = self.amp_a.conj() * other.amp_a + self.amp_b.conj() * other.amp_b;
        if overlap.norm() == 0.0 {
            return false;
        }
        let phase = overlap / overlap.norm();
        (self.amp_a * phase - other.amp_a).norm() <= tol
            && (self.amp_b * phase - other.amp_b).norm() <= tol
    }

    /// Full ideal round: prepare, encode, interfere.
    pub fn final_state(bits: BitPair) -> Self {
        Self::prepare_superposition()
            .encode_phases(bits)
            .beamsplitter()
    }
}

/// Interferometer quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    visibility: f64,
    phase_noise_sigma: f64,
}

impl ChannelParams {
    /// Pure contrast model with visibility `V ∈ [0, 1]`.
    pub fn new(visibility: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&visibility) {
            return Err(Error::domain(format!(
                "visibility must lie in [0, 1], got {visibility}"
            )));
        }
        Ok(Self {
            visibility,
            phase_noise_sigma: 0.0,
        })
    }

    pub fn ideal() -> Self {
        Self {
            visibility: 1.0,
            phase_noise_sigma: 0.0,
        }
    }

    /// Adds Gaussian relative-phase noise of standard deviation `sigma`
    /// radians. `f64::INFINITY` means a uniformly random phase.
    pub fn with_phase_noise(mut self, sigma: f64) -> Result<Self> {
        if sigma.is_nan() || sigma < 0.0 {
            return Err(Error::domain(format!(
                "phase noise sigma must be >= 0, got {sigma}"
            )));
        }
        self.phase_noise_sigma = sigma;
        Ok(self)
    }

    /// Channel whose whole contrast loss comes from phase noise, calibrated
    /// so that `E[cos φ] = visibility`.
    pub fn dephasing(visibility: f64) -> Result<Self> {
        Self::ideal().with_phase_noise(dephasing_sigma_for(visibility)?)
    }

    /// Per-photon probability of reaching the port the parity prescribes,
    /// given a correct-port probability `p_s ∈ [1/2, 1]`.
    pub fn from_correct_port_probability(p_s: f64) -> Result<Self> {
        if !(0.5..=1.0).contains(&p_s) {
            return Err(Error::domain(format!(
                "correct-port probability must lie in [1/2, 1], got {p_s}"
            )));
        }
        Self::new((2.0 * p_s - 1.0).clamp(0.0, 1.0))
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    pub fn phase_noise_sigma(&self) -> f64 {
        self.phase_noise_sigma
    }

    /// Contrast after both the linear visibility and the phase noise.
    pub fn effective_visibility(&self) -> f64 {
        if self.phase_noise_sigma.is_infinite() {
            return 0.0;
        }
        self.visibility * (-0.5 * self.phase_noise_sigma * self.phase_noise_sigma).exp()
    }

    /// `(1 + V_eff) / 2`, the same for either parity.
    pub fn correct_port_probability(&self) -> f64 {
        0.5 * (1.0 + self.effective_visibility())
    }
}

/// Phase-noise spread reproducing the contrast `visibility` on its own.
pub fn dephasing_sigma_for(visibility: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::domain(format!(
            "visibility must lie in [0, 1], got {visibility}"
        )));
    }
    if visibility == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((-2.0 * visibility.ln()).max(0.0).sqrt())
}

/// Probabilities `(p_alice_port, p_bob_port)` for one photon.
pub fn detection_probabilities(bits: BitPair, channel: &ChannelParams) -> (f64, f64) {
    let contrast = if bits.parity() { -1.0 } else { 1.0 } * channel.effective_visibility();
    let p_alice = 0.5 * (1.0 + contrast);
    (p_alice, 1.0 - p_alice)
}

/// Draws the exit port of a single photon.
///
/// Without phase noise this is a Bernoulli draw from
/// [`detection_probabilities`]. With phase noise, a relative phase is drawn
/// per photon and the encoded state is propagated through the beam splitter,
/// so the averaging over phases happens in the sampler.
pub fn sample_port<R: Rng + ?Sized>(bits: BitPair, channel: &ChannelParams, rng: &mut R) -> Port {
    let p_alice = if channel.phase_noise_sigma == 0.0 {
        detection_probabilities(bits, channel).0
    } else {
        let phase = if channel.phase_noise_sigma.is_infinite() {
            rng.random_range(0.0..2.0 * PI)
        } else {
            Normal::new(0.0, channel.phase_noise_sigma)
                .expect("validated sigma")
                .sample(rng)
        };
        let (ideal_a, ideal_b) = PhotonState::prepare_superposition()
            .encode_phases(bits)
            .apply_phases(0.0, phase)
            .beamsplitter()
            .port_probabilities();
        0.5 * (1.0 + channel.visibility * (ideal_a - ideal_b))
    };
    if rng.random::<f64>() < p_alice {
        Port::Alice
    } else {
        Port::Bob
    }
}

/// Interference contrast `(N_max − N_min) / (N_max + N_min)`.
pub fn visibility_from_counts(n_max: u64, n_min: u64) -> Result<f64> {
    if n_max == 0 && n_min == 0 {
        return Err(Error::UndefinedInput("visibility of zero counts".into()));
    }
    if n_min > n_max {
        return Err(Error::domain(format!(
            "n_min ({n_min}) exceeds n_max ({n_max})"
        )));
    }
    Ok((n_max - n_min) as f64 / (n_max + n_min) as f64)
}
