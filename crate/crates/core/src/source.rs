//! Heralded probabilistic single-photon source.
//!
//! Two things are modelled here:
//!
//! - the number of photons detected during one communication interval,
//!   Poisson distributed with mean `m` (already net of every loss);
//! - a coincidence run in which each herald comes with one signal photon and,
//!   with probability `multiphoton_rate`, an independent second photon. Every
//!   photon is routed to detector A or B with probability 1/2. Coincidences
//!   are logical (same herald), there is no time axis.
//!
//! Under that generation model the expected rates per herald are
//! `HA = HB = 1/2 + q/4` and `HAB = q/2`, so the estimator
//! `g² = 2·C_H·CC_HAB / (CC_HA + CC_HB)²` tends to `q / (1 + q/2)²`.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    /// Mean detected photons per interval, `m`.
    pub mean_detections: f64,
    /// Probability that a heralded emission carries a second photon.
    pub multiphoton_rate: f64,
    /// Heralds per second.
    pub herald_rate: f64,
    /// Communication interval length in seconds.
    pub interval_seconds: f64,
}

impl SourceModel {
    pub fn new(
        mean_detections: f64,
        multiphoton_rate: f64,
        herald_rate: f64,
        interval_seconds: f64,
    ) -> Result<Self> {
        if !(mean_detections > 0.0 && mean_detections.is_finite()) {
            return Err(Error::domain(format!(
                "mean detections must be > 0, got {mean_detections}"
            )));
        }
        if !(0.0..1.0).contains(&multiphoton_rate) {
            return Err(Error::domain(format!(
                "multiphoton rate must lie in [0, 1), got {multiphoton_rate}"
            )));
        }
        if !(herald_rate > 0.0 && herald_rate.is_finite()) {
            return Err(Error::domain(format!(
                "herald rate must be > 0, got {herald_rate}"
            )));
        }
        if !(interval_seconds > 0.0 && interval_seconds.is_finite()) {
            return Err(Error::domain(format!(
                "interval must be > 0 s, got {interval_seconds}"
            )));
        }
        Ok(Self {
            mean_detections,
            multiphoton_rate,
            herald_rate,
            interval_seconds,
        })
    }

    /// Source with only a detected-photon mean; the coincidence parameters
    /// take neutral values (no contamination, 10⁵ heralds/s, 0.5 s slots).
    pub fn with_mean(mean_detections: f64) -> Result<Self> {
        Self::new(mean_detections, 0.0, 1e5, 0.5)
    }

    /// Mean emitted photons per interval `N = m / η` for an overall
    /// transmission `η`. Reporting only; simulations work with `m`.
    pub fn emitted_mean(&self, transmission: f64) -> Result<f64> {
        if !(transmission > 0.0 && transmission <= 1.0) {
            return Err(Error::domain(format!(
                "transmission must lie in (0, 1], got {transmission}"
            )));
        }
        Ok(self.mean_detections / transmission)
    }
}

/// Draws the number of photons detected in one interval.
pub fn sample_interval_count<R: Rng + ?Sized>(source: &SourceModel, rng: &mut R) -> u64 {
    Poisson::new(source.mean_detections)
        .expect("validated mean")
        .sample(rng) as u64
}

/// Herald singles, the two twofold and the threefold coincidence rates, in
/// counts per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceRates {
    pub c_h: f64,
    pub cc_ha: f64,
    pub cc_hb: f64,
    pub cc_hab: f64,
}

impl CoincidenceRates {
    pub fn new(c_h: f64, cc_ha: f64, cc_hb: f64, cc_hab: f64) -> Result<Self> {
        let rates = Self {
            c_h,
            cc_ha,
            cc_hb,
            cc_hab,
        };
        rates.validate()?;
        Ok(rates)
    }

    fn validate(&self) -> Result<()> {
        let all = [self.c_h, self.cc_ha, self.cc_hb, self.cc_hab];
        if all.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::domain(
                "coincidence rates must be finite and non-negative",
            ));
        }
        if self.cc_hab > self.cc_ha.min(self.cc_hb) {
            return Err(Error::domain("threefold rate exceeds a twofold rate"));
        }
        Ok(())
    }
}

/// Heralded second-order correlation at zero delay.
pub fn g2_zero(rates: &CoincidenceRates) -> Result<f64> {
    let twofold = rates.cc_ha + rates.cc_hb;
    if twofold <= 0.0 {
        return Err(Error::UndefinedInput("no twofold coincidences".into()));
    }
    Ok(2.0 * rates.c_h * rates.cc_hab / (twofold * twofold))
}

/// Expected value of the estimator under the generation model of
/// [`simulate_coincidence_run`], in the long-run limit.
pub fn expected_g2(multiphoton_rate: f64) -> f64 {
    expected_g2_with_efficiency(multiphoton_rate, 1.0)
}

/// [`expected_g2`] when each arm detects a photon with probability
/// `efficiency`: `q / (1 + q·(1 − η/2))²`. For small `q` the estimator does
/// not depend on `η`.
pub fn expected_g2_with_efficiency(multiphoton_rate: f64, efficiency: f64) -> f64 {
    let q = multiphoton_rate;
    let k = 1.0 + q * (1.0 - 0.5 * efficiency);
    q / (k * k)
}

/// Contamination that makes [`expected_g2`] equal `target`.
pub fn multiphoton_rate_for_g2(target: f64) -> Result<f64> {
    multiphoton_rate_for_g2_with_efficiency(target, 1.0)
}

/// Inverse of [`expected_g2_with_efficiency`] in `q`.
///
/// `q/(1 + c·q)²` with `c = 1 − η/2 ≤ 1` increases on `q ∈ [0, 1)`, so the
/// smaller root of `t·c²·q² + (2·t·c − 1)·q + t = 0` is the one to take.
pub fn multiphoton_rate_for_g2_with_efficiency(target: f64, efficiency: f64) -> Result<f64> {
    check_efficiency(efficiency)?;
    let ceiling = expected_g2_with_efficiency(1.0, efficiency);
    if !(0.0..ceiling).contains(&target) {
        return Err(Error::domain(format!(
            "g2 target {target} outside the reachable range [0, {ceiling})"
        )));
    }
    if target == 0.0 {
        return Ok(0.0);
    }
    let cq = 1.0 - 0.5 * efficiency;
    let (a, b, c) = (target * cq * cq, 2.0 * target * cq - 1.0, target);
    let disc = b * b - 4.0 * a * c;
    // b < 0, so the numerically stable small root is 2c / (−b + √disc)
    Ok(2.0 * c / (-b + disc.sqrt()))
}

fn check_efficiency(efficiency: f64) -> Result<()> {
    if efficiency > 0.0 && efficiency <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "detection efficiency must lie in (0, 1], got {efficiency}"
        )))
    }
}

/// Synthetic coincidence run of `duration_s` seconds with lossless detectors.
pub fn simulate_coincidence_run<R: Rng + ?Sized>(
    source: &SourceModel,
    duration_s: f64,
    rng: &mut R,
) -> Result<CoincidenceRates> {
    simulate_coincidence_run_with_efficiency(source, 1.0, duration_s, rng)
}

/// Synthetic coincidence run of `duration_s` seconds.
///
/// The herald count is Poisson with mean `herald_rate · duration`. Each
/// photon takes either arm with probability 1/2 and is detected there with
/// probability `efficiency`; detectors register at most one click per
/// herald. Events are aggregated per class (single photon, two photons on
/// the same side, two photons split) with binomial draws, which is
/// equivalent in distribution to walking the heralds one by one.
pub fn simulate_coincidence_run_with_efficiency<R: Rng + ?Sized>(
    source: &SourceModel,
    efficiency: f64,
    duration_s: f64,
    rng: &mut R,
) -> Result<CoincidenceRates> {
    check_efficiency(efficiency)?;
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::domain(format!(
            "duration must be > 0 s, got {duration_s}"
        )));
    }
    let heralds = Poisson::new(source.herald_rate * duration_s)
        .map_err(|e| Error::domain(e.to_string()))?
        .sample(rng) as u64;
    let binomial = |n: u64, p: f64, rng: &mut R| -> u64 {
        if n == 0 || p == 1.0 {
            return if p == 1.0 { n } else { 0 };
        }
        Binomial::new(n, p).expect("valid binomial").sample(rng)
    };
    let eta = efficiency;
    let either = 1.0 - (1.0 - eta) * (1.0 - eta);

    let multi = binomial(heralds, source.multiphoton_rate, rng);
    let single = heralds - multi;
    let single_a = binomial(single, 0.5, rng);
    let single_b = single - single_a;
    // two independent 50/50 routings: split with probability 1/2
    let split = binomial(multi, 0.5, rng);
    let same_side = multi - split;
    let both_a = binomial(same_side, 0.5, rng);
    let both_b = same_side - both_a;

    let click_a = binomial(single_a, eta, rng) + binomial(both_a, either, rng);
    let click_b = binomial(single_b, eta, rng) + binomial(both_b, either, rng);
    let split_a = binomial(split, eta, rng);
    let split_ab = binomial(split_a, eta, rng);
    let split_b_only = binomial(split - split_a, eta, rng);

    let per_s = |count: u64| count as f64 / duration_s;
    Ok(CoincidenceRates {
        c_h: per_s(heralds),
        cc_ha: per_s(click_a + split_a),
        cc_hb: per_s(click_b + split_ab + split_b_only),
        cc_hab: per_s(split_ab),
    })
}

/// First-order propagation of Poisson counting errors through [`g2_zero`].
///
/// Counts are `rate · duration_s`, each with variance equal to itself. A
/// threefold count of exactly zero is given a variance of one count, so a
/// clean run still reports a finite upper uncertainty.
pub fn g2_poisson_error(rates: &CoincidenceRates, duration_s: f64) -> Result<f64> {
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::domain(format!(
            "duration must be > 0 s, got {duration_s}"
        )));
    }
    rates.validate()?;
    let n_h = rates.c_h * duration_s;
    let n_twofold = (rates.cc_ha + rates.cc_hb) * duration_s;
    let n_hab = rates.cc_hab * duration_s;
    if n_twofold <= 0.0 {
        return Err(Error::UndefinedInput("no twofold coincidences".into()));
    }
    let var_hab = if n_hab == 0.0 { 1.0 } else { n_hab };

    // g = 2·N_H·N_HAB / S²
    let s2 = n_twofold * n_twofold;
    let d_h = 2.0 * n_hab / s2;
    let d_hab = 2.0 * n_h / s2;
    let d_s = -4.0 * n_h * n_hab / (s2 * n_twofold);
    let variance = d_h * d_h * n_h + d_hab * d_hab * var_hab + d_s * d_s * n_twofold;
    Ok(variance.sqrt())
}
