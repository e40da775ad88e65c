//! Interval protocol for a probabilistic source.
//!
//! Each bit pair owns one communication interval in which a Poisson number
//! of photons (mean `m`) is detected. Alice assumes parity 0 if she sees at
//! least one photon and parity 1 otherwise; Bob assumes parity 1 if he sees
//! at least one photon and parity 0 otherwise. Each then decodes the other
//! party's bit as `parity ⊕ own bit`.
//!
//! An interval fails when no photon is detected or when any photon reaches
//! the wrong port, so with per-photon success `p_s`
//!
//! ```text
//! p_err = e^{-m} + Σ_{n≥1} e^{-m} mⁿ/n! (1 − p_sⁿ) = 1 + e^{-m} − e^{-m(1−p_s)}
//! ```
//!
//! which is minimal at `m_opt = −ln(1 − p_s) / p_s`.
//!
//! Repetition coding sends every pair `r` times (odd); each party takes the
//! majority of its own decoded bits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{sample_port, BitPair, ChannelParams, Port};
use crate::rng;
use crate::source::{sample_interval_count, SourceModel};
use crate::stats;

/// Allowed mismatch between `p_s` and the channel's `(1 + V)/2`.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-9;

const SERIES_TERM_CUTOFF: f64 = 1e-15;
const SERIES_MAX_TERMS: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub mean_detections: f64,
    pub per_photon_success: f64,
    pub repetitions: u32,
}

impl ProtocolParams {
    pub fn new(mean_detections: f64, per_photon_success: f64, repetitions: u32) -> Result<Self> {
        if !(mean_detections > 0.0 && mean_detections.is_finite()) {
            return Err(Error::domain(format!(
                "mean detections must be > 0, got {mean_detections}"
            )));
        }
        if !(0.5..=1.0).contains(&per_photon_success) {
            return Err(Error::domain(format!(
                "per-photon success must lie in [1/2, 1], got {per_photon_success}"
            )));
        }
        if repetitions.is_multiple_of(2) {
            return Err(Error::contract(format!(
                "repetitions must be odd, got {repetitions}"
            )));
        }
        Ok(Self {
            mean_detections,
            per_photon_success,
            repetitions,
        })
    }

    /// Parameters with `p_s = (1 + V)/2`.
    pub fn from_visibility(
        mean_detections: f64,
        visibility: f64,
        repetitions: u32,
    ) -> Result<Self> {
        let channel = ChannelParams::new(visibility)?;
        Self::new(
            mean_detections,
            channel.correct_port_probability(),
            repetitions,
        )
    }

    pub fn error_probability(&self) -> f64 {
        analytic_error_probability(self.mean_detections, self.per_photon_success)
    }

    pub fn interval_success(&self) -> f64 {
        1.0 - self.error_probability()
    }
}

/// Protocol parameters bundled with the physical channel and source they
/// describe. Construction checks that the two descriptions agree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    params: ProtocolParams,
    channel: ChannelParams,
    source: SourceModel,
}

impl Link {
    pub fn new(
        params: ProtocolParams,
        channel: ChannelParams,
        source: SourceModel,
    ) -> Result<Self> {
        let p_channel = channel.correct_port_probability();
        if (params.per_photon_success - p_channel).abs() > CONSISTENCY_TOLERANCE {
            return Err(Error::contract(format!(
                "p_s = {} does not match the channel's (1+V)/2 = {p_channel}",
                params.per_photon_success
            )));
        }
        if (params.mean_detections - source.mean_detections).abs() > CONSISTENCY_TOLERANCE {
            return Err(Error::contract(format!(
                "m = {} does not match the source mean {}",
                params.mean_detections, source.mean_detections
            )));
        }
        Ok(Self {
            params,
            channel,
            source,
        })
    }

    /// Link with a pure-contrast channel and a neutral source derived from
    /// `params`.
    pub fn from_params(params: ProtocolParams) -> Result<Self> {
        let channel = ChannelParams::from_correct_port_probability(params.per_photon_success)?;
        let source = SourceModel::with_mean(params.mean_detections)?;
        Self::new(params, channel, source)
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn channel(&self) -> &ChannelParams {
        &self.channel
    }

    pub fn source(&self) -> &SourceModel {
        &self.source
    }
}

/// Everything that happened in one communication interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub bits: BitPair,
    pub photon_ports: Vec<Port>,
    pub inferred_parity_alice: bool,
    pub inferred_parity_bob: bool,
    /// Alice's estimate of `y`.
    pub decoded_bit_at_alice: bool,
    /// Bob's estimate of `x`.
    pub decoded_bit_at_bob: bool,
    pub success: bool,
}

impl IntervalRecord {
    /// Applies both parties' inference rules to a known set of exit ports.
    pub fn from_ports(bits: BitPair, photon_ports: Vec<Port>) -> Self {
        let alice_clicked = photon_ports.contains(&Port::Alice);
        let bob_clicked = photon_ports.contains(&Port::Bob);
        let inferred_parity_alice = !alice_clicked;
        let inferred_parity_bob = bob_clicked;
        let decoded_bit_at_alice = inferred_parity_alice ^ bits.x;
        let decoded_bit_at_bob = inferred_parity_bob ^ bits.y;
        let success = decoded_bit_at_alice == bits.y && decoded_bit_at_bob == bits.x;
        debug_assert_eq!(
            success,
            !photon_ports.is_empty() && photon_ports.iter().all(|&p| p == bits.expected_port()),
            "local decoding and the wrong-port failure rule must agree"
        );
        Self {
            bits,
            photon_ports,
            inferred_parity_alice,
            inferred_parity_bob,
            decoded_bit_at_alice,
            decoded_bit_at_bob,
            success,
        }
    }
}

/// Closed-form interval error probability for mean detections `m` and
/// per-photon success `p_s`.
pub fn analytic_error_probability(m: f64, p_s: f64) -> f64 {
    debug_assert!(m > 0.0 && (0.0..=1.0).contains(&p_s));
    1.0 + (-m).exp() - (-m * (1.0 - p_s)).exp()
}

/// The same probability summed term by term over detected-photon numbers.
/// Stops once the Poisson weight drops below 1e-15 past its peak, or after
/// 200 terms.
pub fn error_probability_series(m: f64, p_s: f64) -> f64 {
    let mut sum = 0.0;
    let mut weight = 1.0; // mⁿ/n!
    let mut p_s_pow = 1.0;
    for n in 1..=SERIES_MAX_TERMS {
        weight *= m / n as f64;
        p_s_pow *= p_s;
        sum += weight * (1.0 - p_s_pow);
        if n as f64 > m && weight < SERIES_TERM_CUTOFF {
            break;
        }
    }
    (-m).exp() * (1.0 + sum)
}

/// Mean detections per interval that minimise [`analytic_error_probability`].
pub fn optimal_mean_detections(p_s: f64) -> Result<f64> {
    if p_s.is_nan() || p_s <= 0.5 || p_s > 1.0 {
        return Err(Error::domain(format!(
            "p_s must lie in (1/2, 1), got {p_s}"
        )));
    }
    if p_s == 1.0 {
        return Err(Error::Divergence(
            "with p_s = 1 the error falls monotonically in m; no finite optimum".into(),
        ));
    }
    Ok(-(1.0 - p_s).ln() / p_s)
}

/// Simulates one interval: Poisson photon count, then one port per photon.
pub fn run_interval<R: Rng + ?Sized>(bits: BitPair, link: &Link, rng: &mut R) -> IntervalRecord {
    let n = sample_interval_count(&link.source, rng);
    run_interval_with_count(bits, n, link, rng)
}

/// Interval with a fixed number of detected photons.
pub fn run_interval_with_count<R: Rng + ?Sized>(
    bits: BitPair,
    photons: u64,
    link: &Link,
    rng: &mut R,
) -> IntervalRecord {
    let ports = (0..photons)
        .map(|_| sample_port(bits, &link.channel, rng))
        .collect();
    IntervalRecord::from_ports(bits, ports)
}

/// Majority of an odd number of bits.
pub fn majority_decode(outcomes: &[bool]) -> Result<bool> {
    if outcomes.len().is_multiple_of(2) {
        return Err(Error::contract(format!(
            "majority vote needs an odd number of outcomes, got {}",
            outcomes.len()
        )));
    }
    let ones = outcomes.iter().filter(|&&b| b).count();
    Ok(2 * ones > outcomes.len())
}

/// Probability that more than half of `r` independent intervals succeed,
/// each with probability `1 − p_err`.
pub fn repetition_protocol_success(params: &ProtocolParams) -> f64 {
    majority_of_successes(params.interval_success(), params.repetitions)
}

/// `Σ_{k > r/2} C(r,k) pᵏ (1 − p)^{r−k}`.
pub fn majority_of_successes(p: f64, repetitions: u32) -> f64 {
    let r = repetitions;
    (r / 2 + 1..=r)
        .map(|k| binomial_coefficient(r, k) * p.powi(k as i32) * (1.0 - p).powi((r - k) as i32))
        .sum()
}

/// Exact success probability when each party majority-votes its own
/// decoded bits, which is what [`run_message`] does.
///
/// Per interval there are four outcomes: both right, only the party
/// expecting a click on its side wrong (no photon), both wrong (every photon
/// at the wrong port), only the other party wrong (photons split). A pair
/// succeeds when each party is right in a strict majority of intervals.
/// This is never below [`repetition_protocol_success`].
pub fn per_party_majority_success(params: &ProtocolParams) -> f64 {
    let m = params.mean_detections;
    let p_s = params.per_photon_success;
    let both_right = 1.0 - analytic_error_probability(m, p_s);
    let none = (-m).exp();
    let all_wrong = (-m * p_s).exp() - (-m).exp();
    let split = (1.0 - both_right - none - all_wrong).max(0.0);
    // (probability, first party right, second party right)
    let classes = [
        (both_right, 1u32, 1u32),
        (none, 0, 1),
        (all_wrong, 0, 0),
        (split, 1, 0),
    ];

    let r = params.repetitions;
    let mut total = 0.0;
    for a in 0..=r {
        for b in 0..=r - a {
            for c in 0..=r - a - b {
                let d = r - a - b - c;
                let counts = [a, b, c, d];
                let first: u32 = counts.iter().zip(&classes).map(|(k, cl)| k * cl.1).sum();
                let second: u32 = counts.iter().zip(&classes).map(|(k, cl)| k * cl.2).sum();
                if 2 * first > r && 2 * second > r {
                    let coeff = binomial_coefficient(r, a)
                        * binomial_coefficient(r - a, b)
                        * binomial_coefficient(r - a - b, c);
                    let prob: f64 = counts
                        .iter()
                        .zip(&classes)
                        .map(|(&k, cl)| cl.0.powi(k as i32))
                        .product();
                    total += coeff * prob;
                }
            }
        }
    }
    total
}

fn binomial_coefficient(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// What each party decoded for one bit pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodedPair {
    /// Alice's majority estimate of `y`.
    pub at_alice: bool,
    /// Bob's majority estimate of `x`.
    pub at_bob: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageOutcome {
    pub decoded: Vec<DecodedPair>,
    pub pair_success: Vec<bool>,
    pub success_rate: f64,
    /// Every interval, `repetitions` consecutive entries per pair.
    pub records: Vec<IntervalRecord>,
}

/// Sends every pair through `repetitions` intervals and majority-decodes at
/// both ends.
pub fn run_message<R: Rng + ?Sized>(
    pairs: &[BitPair],
    link: &Link,
    rng: &mut R,
) -> Result<MessageOutcome> {
    if pairs.is_empty() {
        return Err(Error::contract(
            "message must contain at least one bit pair",
        ));
    }
    let reps = link.params.repetitions as usize;
    let mut decoded = Vec::with_capacity(pairs.len());
    let mut pair_success = Vec::with_capacity(pairs.len());
    let mut records = Vec::with_capacity(pairs.len() * reps);
    for &bits in pairs {
        let start = records.len();
        records.extend((0..reps).map(|_| run_interval(bits, link, rng)));
        let window = &records[start..];
        let at_alice: Vec<bool> = window.iter().map(|r| r.decoded_bit_at_alice).collect();
        let at_bob: Vec<bool> = window.iter().map(|r| r.decoded_bit_at_bob).collect();
        let pair = DecodedPair {
            at_alice: majority_decode(&at_alice)?,
            at_bob: majority_decode(&at_bob)?,
        };
        pair_success.push(pair.at_alice == bits.y && pair.at_bob == bits.x);
        decoded.push(pair);
    }
    let ok = pair_success.iter().filter(|&&s| s).count();
    Ok(MessageOutcome {
        success_rate: ok as f64 / pairs.len() as f64,
        decoded,
        pair_success,
        records,
    })
}

/// Uniformly random bit pairs.
pub fn random_pairs<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<BitPair> {
    (0..n)
        .map(|_| BitPair::new(rng.random(), rng.random()))
        .collect()
}

/// Result of one set of random pairs; one CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub set_id: usize,
    pub repetitions: u32,
    pub m: f64,
    pub p_s: f64,
    pub success_rate: f64,
}

/// Runs `n_sets` independent sets of `pairs_per_set` random pairs. Set `i`
/// uses its own substream, so results do not depend on the number of sets.
pub fn run_sets(
    n_sets: usize,
    pairs_per_set: usize,
    link: &Link,
    seed: u64,
) -> Result<Vec<SetSummary>> {
    (0..n_sets)
        .map(|i| {
            let mut r = rng::substream(seed, "protocol-set", i as u64);
            let pairs = random_pairs(pairs_per_set, &mut r);
            let outcome = run_message(&pairs, link, &mut r)?;
            Ok(SetSummary {
                set_id: i,
                repetitions: link.params.repetitions,
                m: link.params.mean_detections,
                p_s: link.params.per_photon_success,
                success_rate: outcome.success_rate,
            })
        })
        .collect()
}

/// Analytic predictions next to the Monte Carlo measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub m: f64,
    pub p_s: f64,
    pub repetitions: u32,
    pub analytic_error_probability: f64,
    pub analytic_interval_success: f64,
    /// Majority-of-successes prediction.
    pub analytic_repetition_success: f64,
    /// Exact prediction for per-party majority decoding.
    pub per_party_repetition_success: f64,
    pub m_opt: Option<f64>,
    pub sets: usize,
    pub pairs_per_set: usize,
    pub measured_success: f64,
    /// Standard error over sets.
    pub measured_std_error: f64,
    /// Binomial error of the pooled proportion.
    pub binomial_error: f64,
}

impl ProtocolReport {
    pub fn new(params: &ProtocolParams, sets: &[SetSummary], pairs_per_set: usize) -> Self {
        let rates: Vec<f64> = sets.iter().map(|s| s.success_rate).collect();
        let measured = if rates.is_empty() {
            f64::NAN
        } else {
            stats::mean(&rates)
        };
        let trials = (sets.len() * pairs_per_set) as u64;
        Self {
            m: params.mean_detections,
            p_s: params.per_photon_success,
            repetitions: params.repetitions,
            analytic_error_probability: params.error_probability(),
            analytic_interval_success: params.interval_success(),
            analytic_repetition_success: repetition_protocol_success(params),
            per_party_repetition_success: per_party_majority_success(params),
            m_opt: optimal_mean_detections(params.per_photon_success).ok(),
            sets: sets.len(),
            pairs_per_set,
            measured_success: measured,
            measured_std_error: stats::std_error(&rates),
            binomial_error: stats::binomial_std_error(measured, trials),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn link(m: f64, p_s: f64, reps: u32) -> Link {
        Link::from_params(ProtocolParams::new(m, p_s, reps).unwrap()).unwrap()
    }

    /// Power-series form truncated at a fixed 50 terms, written out
    /// independently of the implementation.
    fn series_oracle(m: f64, p_s: f64) -> f64 {
        let mut fact = 1.0;
        let mut sum = 0.0;
        for n in 1..=50 {
            fact *= n as f64;
            sum += m.powi(n) * (1.0 - p_s.powi(n)) / fact;
        }
        (-m).exp() * (1.0 + sum)
    }

    #[test]
    fn perfect_photons_fail_only_on_empty_intervals() {
        for m in [0.5, 2.0, 7.0] {
            assert_abs_diff_eq!(
                analytic_error_probability(m, 1.0),
                (-m).exp(),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn closed_form_matches_series() {
        for i in 1..=20 {
            let m = i as f64 * 0.5;
            for j in 0..=10 {
                let p_s = 0.5 + j as f64 * 0.05;
                let closed = analytic_error_probability(m, p_s);
                assert!(
                    (closed - series_oracle(m, p_s)).abs() < 1e-12,
                    "m {m} p_s {p_s}"
                );
                assert!((closed - error_probability_series(m, p_s)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn operating_points() {
        assert_abs_diff_eq!(
            1.0 - analytic_error_probability(2.919, 0.935),
            0.7732,
            epsilon = 1e-4
        );
        assert_abs_diff_eq!(
            1.0 - analytic_error_probability(3.34, 0.935),
            0.77,
            epsilon = 1e-2
        );
    }

    #[test]
    fn optimum() {
        assert_abs_diff_eq!(
            optimal_mean_detections(0.935).unwrap(),
            2.92,
            epsilon = 0.01
        );
        let m_opt = optimal_mean_detections(0.9).unwrap();
        assert_abs_diff_eq!(m_opt, -(0.1f64).ln() / 0.9, epsilon = 1e-15);
        // golden-section scan oracle over (0, 20]
        let f = |m: f64| analytic_error_probability(m, 0.9);
        let (mut lo, mut hi) = (1e-9, 20.0);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - g * (hi - lo);
            let b = lo + g * (hi - lo);
            if f(a) < f(b) {
                hi = b
            } else {
                lo = a
            }
        }
        assert!((0.5 * (lo + hi) - m_opt).abs() < 1e-6);

        assert!(matches!(
            optimal_mean_detections(1.0),
            Err(Error::Divergence(_))
        ));
        assert!(matches!(
            optimal_mean_detections(0.5),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            optimal_mean_detections(0.3),
            Err(Error::Domain(_))
        ));
        let mut prev = 0.0;
        for p in [0.6, 0.8, 0.9, 0.99, 0.999, 0.99999] {
            let m = optimal_mean_detections(p).unwrap();
            assert!(m > prev);
            prev = m;
        }
    }

    #[test]
    fn optimum_is_a_minimum() {
        for p_s in [0.6, 0.8, 0.935, 0.99] {
            let m = optimal_mean_detections(p_s).unwrap();
            let best = analytic_error_probability(m, p_s);
            for d in [0.01, 0.1, 0.5] {
                assert!(analytic_error_probability(m + d, p_s) >= best);
                if m - d > 0.0 {
                    assert!(analytic_error_probability(m - d, p_s) >= best);
                }
            }
        }
    }

    #[test]
    fn limits() {
        assert!(analytic_error_probability(1e-6, 0.9) > 0.999);
        assert!(analytic_error_probability(50.0, 0.9) > 0.99);
    }

    #[test]
    fn empty_interval_rule() {
        let rec = IntervalRecord::from_ports(BitPair::new(false, false), vec![]);
        assert!(rec.inferred_parity_alice);
        assert!(!rec.inferred_parity_bob);
        assert!(!rec.success);
        // parity 1 with no photon: Alice right, Bob wrong
        let rec = IntervalRecord::from_ports(BitPair::new(true, false), vec![]);
        assert!(!rec.decoded_bit_at_alice);
        assert!(!rec.decoded_bit_at_bob);
        assert!(!rec.success);
    }

    #[test]
    fn split_photons_fail_at_one_end() {
        let bits = BitPair::new(false, true); // parity 1, Bob's port
        let rec = IntervalRecord::from_ports(bits, vec![Port::Bob, Port::Alice, Port::Bob]);
        assert!(!rec.success);
        assert_eq!(rec.decoded_bit_at_bob, bits.x);
        assert_ne!(rec.decoded_bit_at_alice, bits.y);
    }

    #[test]
    fn perfect_visibility_intervals_succeed_when_photons_arrive() {
        let l = link(3.0, 1.0, 1);
        let mut r = rng::stream(1, "t");
        for bits in [
            BitPair::new(false, false),
            BitPair::new(true, false),
            BitPair::new(true, true),
        ] {
            for n in 1..6 {
                assert!(run_interval_with_count(bits, n, &l, &mut r).success);
            }
        }
        let forced = run_interval_with_count(BitPair::new(false, false), 0, &l, &mut r);
        assert!(forced.photon_ports.is_empty() && !forced.success);
    }

    #[test]
    fn monte_carlo_matches_analytic_on_grid() {
        for (i, m) in [1.0, 3.0, 6.0].into_iter().enumerate() {
            for (j, p_s) in [0.7, 0.9, 0.98].into_iter().enumerate() {
                let l = link(m, p_s, 1);
                let mut r = rng::substream(2, "grid", (3 * i + j) as u64);
                let n = 100_000u32;
                let mut pairs = rng::stream(2, "grid-pairs");
                let ok = (0..n)
                    .filter(|_| {
                        let bits = BitPair::new(pairs.random(), pairs.random());
                        run_interval(bits, &l, &mut r).success
                    })
                    .count();
                let p = 1.0 - analytic_error_probability(m, p_s);
                let f = ok as f64 / n as f64;
                assert!(
                    (f - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt(),
                    "m {m} p_s {p_s}: {f} vs {p}"
                );
            }
        }
    }

    #[test]
    fn majority() {
        assert!(!majority_decode(&[false, true, false]).unwrap());
        assert!(majority_decode(&[true, true, false, true, false]).unwrap());
        assert!(majority_decode(&[true]).unwrap());
        assert!(matches!(
            majority_decode(&[true, false]),
            Err(Error::Contract(_))
        ));
        assert!(majority_decode(&[]).is_err());
    }

    #[test]
    fn repetition_analytics() {
        // p³ + 3p²(1−p) at p = 0.8
        assert_abs_diff_eq!(majority_of_successes(0.8, 3), 0.896, epsilon = 1e-12);
        let p = 1.0 - analytic_error_probability(2.62, 0.948);
        assert_abs_diff_eq!(p, 0.80, epsilon = 0.005);
        let r3 = repetition_protocol_success(&ProtocolParams::new(2.62, 0.948, 3).unwrap());
        assert_abs_diff_eq!(r3, p.powi(3) + 3.0 * p * p * (1.0 - p), epsilon = 1e-12);
        assert_abs_diff_eq!(r3, 0.90, epsilon = 0.01);
        let r5 = repetition_protocol_success(&ProtocolParams::new(3.736, 0.960, 5).unwrap());
        assert_abs_diff_eq!(r5, 0.97, epsilon = 0.01);
        let one = ProtocolParams::new(3.0, 0.9, 1).unwrap();
        assert_abs_diff_eq!(
            repetition_protocol_success(&one),
            one.interval_success(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            per_party_majority_success(&one),
            one.interval_success(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn majority_is_monotone_in_repetitions() {
        for (m, p_s) in [(3.0, 0.935), (2.0, 0.99), (5.0, 0.97)] {
            let mut prev = 0.0;
            for r in [1, 3, 5, 7] {
                let params = ProtocolParams::new(m, p_s, r).unwrap();
                assert!(params.interval_success() > 0.5);
                let s = repetition_protocol_success(&params);
                assert!(s >= prev);
                assert!(per_party_majority_success(&params) >= s - 1e-12);
                prev = s;
            }
        }
    }

    #[test]
    fn per_party_prediction_matches_simulation() {
        let l = link(2.62, 0.948, 3);
        let mut r = rng::stream(8, "per-party");
        let pairs = random_pairs(20_000, &mut r);
        let out = run_message(&pairs, &l, &mut r).unwrap();
        let p = per_party_majority_success(l.params());
        let tol = 4.0 * stats::binomial_std_error(p, pairs.len() as u64);
        assert!(
            (out.success_rate - p).abs() < tol,
            "{} vs {p}",
            out.success_rate
        );
    }

    #[test]
    fn ideal_link_with_bright_source_is_perfect() {
        let l = link(10.0, 1.0, 1);
        let mut r = rng::stream(9, "bright");
        let pairs = random_pairs(10_000, &mut r);
        let out = run_message(&pairs, &l, &mut r).unwrap();
        // expected failures 10⁴·e^{-10} ≈ 0.45
        assert!(out.pair_success.iter().filter(|s| !**s).count() <= 3);
        assert_eq!(out.records.len(), 10_000);
    }

    #[test]
    fn message_contract_and_decoding() {
        let l = link(3.34, 0.935, 5);
        let mut r = rng::stream(10, "msg");
        assert!(run_message(&[], &l, &mut r).is_err());
        let pairs = random_pairs(50, &mut r);
        let out = run_message(&pairs, &l, &mut r).unwrap();
        assert_eq!(out.records.len(), 250);
        for ((bits, dec), ok) in pairs.iter().zip(&out.decoded).zip(&out.pair_success) {
            assert_eq!(*ok, dec.at_alice == bits.y && dec.at_bob == bits.x);
        }
    }

    #[test]
    fn link_consistency() {
        let params = ProtocolParams::new(3.0, 0.935, 1).unwrap();
        let wrong_channel = ChannelParams::new(0.9).unwrap();
        let source = SourceModel::with_mean(3.0).unwrap();
        assert!(matches!(
            Link::new(params, wrong_channel, source),
            Err(Error::Contract(_))
        ));
        let channel = ChannelParams::new(0.87).unwrap();
        assert!(Link::new(params, channel, source).is_ok());
        assert!(Link::new(params, channel, SourceModel::with_mean(2.0).unwrap()).is_err());
        assert!(ProtocolParams::new(3.0, 0.9, 2).is_err());
        assert!(ProtocolParams::new(0.0, 0.9, 1).is_err());
        assert!(ProtocolParams::new(1.0, 0.4, 1).is_err());
        let from_v = ProtocolParams::from_visibility(3.0, 0.87, 3).unwrap();
        assert_abs_diff_eq!(from_v.per_photon_success, 0.935, epsilon = 1e-12);
    }

    #[test]
    fn sets_are_reproducible_and_independent_of_count() {
        let l = link(3.34, 0.935, 1);
        let a = run_sets(3, 100, &l, 77).unwrap();
        let b = run_sets(5, 100, &l, 77).unwrap();
        assert_eq!(a[..], b[..3]);
        let report = ProtocolReport::new(l.params(), &b, 100);
        assert_eq!(report.sets, 5);
        assert!(report.m_opt.is_some());
    }
}
