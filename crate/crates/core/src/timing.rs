//! Arrival-time analysis for the single-exchange claim.
//!
//! For a (mirror, detector) pair two arrival-time distributions are recorded
//! relative to the herald: reception at the mirror and final detection. Each
//! is fitted with a Gaussian; the exchange time is the difference of the
//! fitted means and its uncertainty is the quadrature sum of the fitted
//! widths. The exchange is called shorter than a round trip over the minimum
//! inter-party distance when it falls below `2·d/c` by at least three
//! standard deviations.
//!
//! All times are in nanoseconds and all distances in metres.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};

/// Speed of light in vacuum, metres per nanosecond.
pub const SPEED_OF_LIGHT_M_PER_NS: f64 = 0.299_792_458;

/// Significance needed to rule out a round trip.
pub const SIGNIFICANCE_THRESHOLD: f64 = 3.0;

/// Half-width of the fit window in units of the current width estimate.
pub const FIT_WINDOW_SIGMAS: f64 = 2.5;

const FIT_MAX_ITERATIONS: usize = 100;
const MAD_TO_SIGMA: f64 = 1.482_602_218_505_602;

/// Mirror and detector of a measured path, e.g. `AB` runs from Alice's
/// mirror to Bob's detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairLabel {
    AA,
    AB,
    BA,
    BB,
}

impl PairLabel {
    pub const ALL: [PairLabel; 4] = [PairLabel::AA, PairLabel::AB, PairLabel::BA, PairLabel::BB];

    fn sides(self) -> (Side, Side) {
        match self {
            PairLabel::AA => (Side::A, Side::A),
            PairLabel::AB => (Side::A, Side::B),
            PairLabel::BA => (Side::B, Side::A),
            PairLabel::BB => (Side::B, Side::B),
        }
    }
}

impl fmt::Display for PairLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PairLabel::AA => "AA",
            PairLabel::AB => "AB",
            PairLabel::BA => "BA",
            PairLabel::BB => "BB",
        };
        f.write_str(s)
    }
}

impl FromStr for PairLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "AA" => Ok(PairLabel::AA),
            "AB" => Ok(PairLabel::AB),
            "BA" => Ok(PairLabel::BA),
            "BB" => Ok(PairLabel::BB),
            other => Err(Error::domain(format!("unknown pair label {other:?}"))),
        }
    }
}

#[derive(Clone, Copy)]
enum Side {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingDataset {
    pub reception_samples: Vec<f64>,
    pub detection_samples: Vec<f64>,
    pub label: PairLabel,
}

impl TimingDataset {
    pub fn new(
        reception_samples: Vec<f64>,
        detection_samples: Vec<f64>,
        label: PairLabel,
    ) -> Result<Self> {
        for (name, samples) in [
            ("reception", &reception_samples),
            ("detection", &detection_samples),
        ] {
            if samples.is_empty() {
                return Err(Error::contract(format!("{name} samples are empty")));
            }
            if samples.iter().any(|t| !t.is_finite()) {
                return Err(Error::domain(format!(
                    "{name} samples contain non-finite times"
                )));
            }
        }
        Ok(Self {
            reception_samples,
            detection_samples,
            label,
        })
    }
}

/// A secondary peak, as produced by stray reflections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Satellite {
    /// Fraction of all events that land in this peak.
    pub fraction: f64,
    pub offset_ns: f64,
}

/// Parameters of a synthetic time-tag acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagSynthesis {
    pub label: PairLabel,
    /// Mean reception time after the herald.
    pub reception_ns: f64,
    /// Reception-to-detection delay.
    pub true_delay_ns: f64,
    /// Standard deviation of each detector's jitter.
    pub jitter_sigma_ns: f64,
    pub n_events: usize,
    /// Extra delay of the reception fibre, present in the raw reception tags.
    pub fiber_delay_ns: f64,
    pub satellites: Vec<Satellite>,
}

impl TagSynthesis {
    pub fn new(
        label: PairLabel,
        true_delay_ns: f64,
        jitter_sigma_ns: f64,
        n_events: usize,
    ) -> Self {
        Self {
            label,
            reception_ns: 30.0,
            true_delay_ns,
            jitter_sigma_ns,
            n_events,
            fiber_delay_ns: 0.0,
            satellites: Vec::new(),
        }
    }
}

/// Generates reception and detection tags. Every tag is its true time plus
/// two independent Gaussian jitters (herald detector and measuring
/// detector), so each peak has width `√2·jitter`.
pub fn synthesize_time_tags<R: Rng + ?Sized>(
    spec: &TagSynthesis,
    rng: &mut R,
) -> Result<TimingDataset> {
    if !(spec.jitter_sigma_ns >= 0.0 && spec.jitter_sigma_ns.is_finite()) {
        return Err(Error::domain(format!(
            "jitter must be >= 0, got {}",
            spec.jitter_sigma_ns
        )));
    }
    if spec.n_events < 2 {
        return Err(Error::contract("at least two events are required"));
    }
    let satellite_total: f64 = spec.satellites.iter().map(|s| s.fraction).sum();
    if spec.satellites.iter().any(|s| s.fraction < 0.0) || satellite_total >= 1.0 {
        return Err(Error::domain(
            "satellite fractions must be non-negative and sum below 1",
        ));
    }
    let jitter =
        Normal::new(0.0, spec.jitter_sigma_ns).map_err(|e| Error::domain(e.to_string()))?;

    let peak = |center: f64, rng: &mut R| -> Vec<f64> {
        (0..spec.n_events)
            .map(|_| {
                let mut offset = 0.0;
                let mut u: f64 = if spec.satellites.is_empty() {
                    1.0
                } else {
                    rng.random()
                };
                for s in &spec.satellites {
                    if u < s.fraction {
                        offset = s.offset_ns;
                        break;
                    }
                    u -= s.fraction;
                }
                center + offset + jitter.sample(rng) + jitter.sample(rng)
            })
            .collect()
    };
    let reception = peak(spec.reception_ns + spec.fiber_delay_ns, rng);
    let detection = peak(spec.reception_ns + spec.true_delay_ns, rng);
    TimingDataset::new(reception, detection, spec.label)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mean: f64,
    pub sigma: f64,
    /// Set when every sample is identical and the width is zero.
    pub degenerate: bool,
    /// Samples inside the final window.
    pub n_used: usize,
}

/// Fits the main peak of `samples` with a Gaussian.
///
/// Starts at the histogram mode with a MAD-based width, then iterates on a
/// window of ±[`FIT_WINDOW_SIGMAS`] widths: the window mean becomes the new
/// centre and the window standard deviation, corrected for truncation of a
/// normal at that half-width, becomes the new width. Peaks well outside the
/// window do not pull the estimate.
pub fn fit_gaussian(samples: &[f64]) -> Result<GaussianFit> {
    if samples.len() < 2 {
        return Err(Error::contract(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|t| !t.is_finite()) {
        return Err(Error::domain("samples contain non-finite times"));
    }
    let (_, all_std) = moments(samples.iter().copied());
    if samples.iter().all(|&t| t == samples[0]) {
        return Ok(GaussianFit {
            mean: samples[0],
            sigma: 0.0,
            degenerate: true,
            n_used: samples.len(),
        });
    }

    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = quantile_sorted(&sorted, 0.5);
    let mut deviations: Vec<f64> = sorted.iter().map(|t| (t - median).abs()).collect();
    deviations.sort_by(|a, b| a.total_cmp(b));
    let mut scale = MAD_TO_SIGMA * quantile_sorted(&deviations, 0.5);
    if scale == 0.0 {
        scale = all_std;
    }
    let mut center = histogram_mode(&sorted, median, scale);

    let correction = truncated_normal_variance_ratio(FIT_WINDOW_SIGMAS).sqrt();
    let mut n_used = samples.len();
    for _ in 0..FIT_MAX_ITERATIONS {
        let half = FIT_WINDOW_SIGMAS * scale;
        let lo = sorted.partition_point(|&t| t < center - half);
        let hi = sorted.partition_point(|&t| t <= center + half);
        if hi - lo < 2 {
            break;
        }
        let (m, s) = moments(sorted[lo..hi].iter().copied());
        let next_scale = if s > 0.0 { s / correction } else { scale };
        let converged =
            (m - center).abs() <= 1e-12 * scale && (next_scale - scale).abs() <= 1e-12 * scale;
        center = m;
        scale = next_scale;
        n_used = hi - lo;
        if converged {
            break;
        }
    }
    Ok(GaussianFit {
        mean: center,
        sigma: scale,
        degenerate: false,
        n_used,
    })
}

/// Var(Z | |Z| < k) for standard normal Z.
pub fn truncated_normal_variance_ratio(k: f64) -> f64 {
    let pdf = (-0.5 * k * k).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mass = erf(k / std::f64::consts::SQRT_2);
    1.0 - 2.0 * k * pdf / mass
}

fn moments(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = values
        .clone()
        .fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    let mean = sum / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

/// Centre of the fullest bin of width `scale/4` over median ± 6·scale.
fn histogram_mode(sorted: &[f64], median: f64, scale: f64) -> f64 {
    let width = scale / 4.0;
    let start = median - 6.0 * scale;
    let n_bins = 48;
    let mut counts = vec![0usize; n_bins];
    for &t in sorted {
        let idx = ((t - start) / width).floor();
        if idx >= 0.0 && (idx as usize) < n_bins {
            counts[idx as usize] += 1;
        }
    }
    let best = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap_or(n_bins / 2);
    start + (best as f64 + 0.5) * width
}

/// `√(a² + b²)`.
pub fn quadrature(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate {
    pub delta_t: f64,
    pub sigma: f64,
}

/// Difference of fitted means with the quadrature sum of fitted widths.
pub fn delay_with_error(dataset: &TimingDataset) -> Result<DelayEstimate> {
    let reception = fit_gaussian(&dataset.reception_samples)?;
    let detection = fit_gaussian(&dataset.detection_samples)?;
    Ok(DelayEstimate {
        delta_t: detection.mean - reception.mean,
        sigma: quadrature(reception.sigma, detection.sigma),
    })
}

/// Flight time through `length_m` of fibre with group index `group_index`.
pub fn fiber_delay_correction(length_m: f64, group_index: f64) -> Result<f64> {
    if !(length_m > 0.0 && length_m.is_finite()) {
        return Err(Error::domain(format!(
            "fibre length must be > 0, got {length_m}"
        )));
    }
    if !(group_index >= 1.0 && group_index.is_finite()) {
        return Err(Error::domain(format!(
            "group index must be >= 1, got {group_index}"
        )));
    }
    Ok(length_m * group_index / SPEED_OF_LIGHT_M_PER_NS)
}

/// Minimum distance between the parties and, optionally, its uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDistance {
    pub min_distance_m: f64,
    pub uncertainty_m: Option<f64>,
}

impl ReferenceDistance {
    pub fn new(min_distance_m: f64, uncertainty_m: Option<f64>) -> Result<Self> {
        if !(min_distance_m > 0.0 && min_distance_m.is_finite()) {
            return Err(Error::domain(format!(
                "minimum distance must be > 0, got {min_distance_m}"
            )));
        }
        if let Some(u) = uncertainty_m {
            if !(u >= 0.0 && u.is_finite()) {
                return Err(Error::domain(format!(
                    "distance uncertainty must be >= 0, got {u}"
                )));
            }
        }
        Ok(Self {
            min_distance_m,
            uncertainty_m,
        })
    }

    /// Round trip over the minimum distance at the vacuum speed of light.
    pub fn round_trip_ns(&self) -> f64 {
        2.0 * self.min_distance_m / SPEED_OF_LIGHT_M_PER_NS
    }

    pub fn round_trip_sigma_ns(&self) -> f64 {
        2.0 * self.uncertainty_m.unwrap_or(0.0) / SPEED_OF_LIGHT_M_PER_NS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingResult {
    pub delta_t: f64,
    pub sigma: f64,
    pub reference_time: f64,
    /// `|delta_t − reference_time| / sigma`; infinite when `sigma` is zero.
    pub significance: f64,
    /// Exchange completed faster than the round trip, at ≥ 3σ.
    pub verdict: bool,
    /// Whether the reference-time uncertainty was left out of `sigma`.
    pub reference_error_neglected: bool,
}

/// Compares a measured exchange time to the round-trip reference.
///
/// `fiber_correction_ns` is added to the raw delay when the reception tags
/// were taken through a fibre. The reference-time error is left out when its
/// relative size is more than four times below that of the delay; otherwise
/// it is added to `sigma` in quadrature.
pub fn causality_significance(
    delay: DelayEstimate,
    reference: &ReferenceDistance,
    fiber_correction_ns: Option<f64>,
) -> TimingResult {
    let delta_t = delay.delta_t + fiber_correction_ns.unwrap_or(0.0);
    let reference_time = reference.round_trip_ns();
    let ref_sigma = reference.round_trip_sigma_ns();

    let rel_ref = ref_sigma / reference_time;
    let rel_delay = if delta_t == 0.0 {
        f64::INFINITY
    } else {
        delay.sigma / delta_t.abs()
    };
    let neglect = ref_sigma == 0.0 || 4.0 * rel_ref < rel_delay;
    let sigma = if neglect {
        delay.sigma
    } else {
        quadrature(delay.sigma, ref_sigma)
    };

    let gap = (delta_t - reference_time).abs();
    let significance = if gap == 0.0 {
        0.0
    } else if sigma == 0.0 {
        f64::INFINITY
    } else {
        gap / sigma
    };
    TimingResult {
        delta_t,
        sigma,
        reference_time,
        significance,
        verdict: delta_t < reference_time && significance >= SIGNIFICANCE_THRESHOLD,
        reference_error_neglected: neglect,
    }
}

/// Fits a dataset and tests it against the reference in one go.
pub fn analyze_dataset(
    dataset: &TimingDataset,
    reference: &ReferenceDistance,
    fiber_correction_ns: Option<f64>,
) -> Result<TimingResult> {
    Ok(causality_significance(
        delay_with_error(dataset)?,
        reference,
        fiber_correction_ns,
    ))
}

/// Two-arm rectangular interferometer. Each party's detector is taken to sit
/// at its own mirror's distance from the recombining beam splitter, so the
/// flight from mirror X to detector Y is `(arm_X + arm_Y) / c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerGeometry {
    pub arm_a_m: f64,
    pub arm_b_m: f64,
}

impl InterferometerGeometry {
    pub fn new(arm_a_m: f64, arm_b_m: f64) -> Result<Self> {
        if !(arm_a_m > 0.0 && arm_b_m > 0.0 && arm_a_m.is_finite() && arm_b_m.is_finite()) {
            return Err(Error::domain("arm lengths must be positive"));
        }
        Ok(Self { arm_a_m, arm_b_m })
    }

    pub fn flight_time_ns(&self, label: PairLabel) -> f64 {
        let arm = |s: Side| match s {
            Side::A => self.arm_a_m,
            Side::B => self.arm_b_m,
        };
        let (mirror, detector) = label.sides();
        (arm(mirror) + arm(detector)) / SPEED_OF_LIGHT_M_PER_NS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagKind {
    Reception,
    Detection,
}

/// One CSV row: `event_id,kind,time_ns`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeTagRow {
    pub event_id: u64,
    pub kind: TagKind,
    pub time_ns: f64,
}

/// Reads time tags from CSV with header `event_id,kind,time_ns`.
pub fn read_time_tags<R: Read>(reader: R, label: PairLabel) -> Result<TimingDataset> {
    let mut reception = Vec::new();
    let mut detection = Vec::new();
    let mut rdr = csv::Reader::from_reader(reader);
    for row in rdr.deserialize::<TimeTagRow>() {
        let row = row?;
        match row.kind {
            TagKind::Reception => reception.push(row.time_ns),
            TagKind::Detection => detection.push(row.time_ns),
        }
    }
    TimingDataset::new(reception, detection, label)
}

/// Writes reception tags first, then detection tags, numbering events from 0.
pub fn write_time_tags<W: Write>(writer: W, dataset: &TimingDataset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let rows = dataset
        .reception_samples
        .iter()
        .map(|&t| (TagKind::Reception, t))
        .chain(
            dataset
                .detection_samples
                .iter()
                .map(|&t| (TagKind::Detection, t)),
        );
    for (event_id, (kind, time_ns)) in rows.enumerate() {
        wtr.serialize(TimeTagRow {
            event_id: event_id as u64,
            kind,
            time_ns,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;

    fn gaussian(mean: f64, sigma: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, "gauss");
        let d = Normal::new(mean, sigma).unwrap();
        (0..n).map(|_| d.sample(&mut r)).collect()
    }

    #[test]
    fn truncation_ratio_matches_numeric_integration() {
        // midpoint rule over [−k, k]
        for k in [1.0, 2.0, 3.0] {
            let steps = 200_000;
            let h = 2.0 * k / steps as f64;
            let (mut mass, mut second) = (0.0, 0.0);
            for i in 0..steps {
                let z = -k + (i as f64 + 0.5) * h;
                let w = (-0.5 * z * z).exp() * h;
                mass += w;
                second += z * z * w;
            }
            assert_abs_diff_eq!(
                truncated_normal_variance_ratio(k),
                second / mass,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn fit_recovers_clean_gaussian() {
        let samples = gaussian(5.0, 0.21, 100_000, 1);
        let fit = fit_gaussian(&samples).unwrap();
        assert!((fit.mean - 5.0).abs() < 0.003, "{fit:?}");
        assert!((fit.sigma - 0.21).abs() < 0.002, "{fit:?}");
        assert!(!fit.degenerate);
        let (m, s) = moments(samples.iter().copied());
        assert!((fit.mean - m).abs() < 0.01 * s);
        assert!((fit.sigma / s - 1.0).abs() < 0.01);
    }

    #[test]
    fn fit_is_consistent_across_seeds() {
        for seed in 0..20 {
            let samples = gaussian(12.5, 0.3, 100_000, 100 + seed);
            let fit = fit_gaussian(&samples).unwrap();
            assert!((fit.mean / 12.5 - 1.0).abs() < 0.01);
            assert!((fit.sigma / 0.3 - 1.0).abs() < 0.01, "seed {seed}: {fit:?}");
        }
    }

    #[test]
    fn constant_samples_are_degenerate() {
        let fit = fit_gaussian(&[3.0; 10]).unwrap();
        assert_eq!((fit.mean, fit.sigma, fit.degenerate), (3.0, 0.0, true));
        assert!(matches!(fit_gaussian(&[1.0]), Err(Error::Contract(_))));
        assert!(fit_gaussian(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn satellite_peak_is_excluded() {
        let sigma = 0.21;
        let clean = gaussian(0.0, sigma, 100_000, 7);
        let clean_fit = fit_gaussian(&clean).unwrap();
        for displacement in [3.0, 4.0, 6.0] {
            let mut dirty = clean.clone();
            dirty.extend(gaussian(displacement * sigma, sigma, 5_000, 8));
            let fit = fit_gaussian(&dirty).unwrap();
            assert!(
                (fit.mean - clean_fit.mean).abs() < 0.05 * sigma,
                "displacement {displacement}: {} vs {}",
                fit.mean,
                clean_fit.mean
            );
        }
        // a far satellite would drag plain moments by ~0.05·offset
        let mut far = clean.clone();
        far.extend(gaussian(10.0 * sigma, sigma, 5_000, 9));
        let (naive, _) = moments(far.iter().copied());
        assert!((naive - clean_fit.mean).abs() > 0.4 * sigma);
    }

    #[test]
    fn quadrature_and_delay() {
        assert_eq!(quadrature(3.0, 4.0), 5.0);
        assert_abs_diff_eq!(
            quadrature(0.21, 0.21),
            0.296_984_848_098_350_1,
            epsilon = 1e-15
        );
        let ds = TimingDataset::new(vec![1.0; 4], vec![5.2; 4], PairLabel::AB).unwrap();
        let d = delay_with_error(&ds).unwrap();
        assert_abs_diff_eq!(d.delta_t, 4.2, epsilon = 1e-12);
        assert_eq!(d.sigma, 0.0);
    }

    #[test]
    fn synthesis() {
        let mut r = rng::stream(3, "synth");
        let spec = TagSynthesis::new(PairLabel::AA, 4.2, 0.149, 100_000);
        let ds = synthesize_time_tags(&spec, &mut r).unwrap();
        let fit = fit_gaussian(&ds.detection_samples).unwrap();
        assert!((fit.sigma - 0.210).abs() < 0.003, "{fit:?}");
        let (mr, _) = moments(ds.reception_samples.iter().copied());
        let (md, _) = moments(ds.detection_samples.iter().copied());
        let peak = 2f64.sqrt() * 0.149;
        assert!(((md - mr) - 4.2).abs() < 4.0 * peak / (1e5f64).sqrt());
        let d = delay_with_error(&ds).unwrap();
        assert!((d.delta_t - 4.2).abs() < 4.0 * d.sigma / (1e5f64).sqrt());

        let exact = TagSynthesis::new(PairLabel::BB, 4.2, 0.0, 50);
        let ds = synthesize_time_tags(&exact, &mut r).unwrap();
        assert!(ds.reception_samples.iter().all(|&t| t == 30.0));
        assert!(ds.detection_samples.iter().all(|&t| t == 34.2));
        assert!(
            synthesize_time_tags(&TagSynthesis::new(PairLabel::AA, 1.0, -1.0, 10), &mut r).is_err()
        );
        assert!(
            synthesize_time_tags(&TagSynthesis::new(PairLabel::AA, 1.0, 0.1, 1), &mut r).is_err()
        );
    }

    #[test]
    fn reference_time_and_verdicts() {
        let reference = ReferenceDistance::new(1.56, None).unwrap();
        assert_abs_diff_eq!(reference.round_trip_ns(), 10.41, epsilon = 0.005);
        let at_ref = causality_significance(
            DelayEstimate {
                delta_t: reference.round_trip_ns(),
                sigma: 0.3,
            },
            &reference,
            None,
        );
        assert_eq!(at_ref.significance, 0.0);
        assert!(!at_ref.verdict);
        let fast = causality_significance(
            DelayEstimate {
                delta_t: 7.5,
                sigma: 0.3,
            },
            &reference,
            None,
        );
        assert!(fast.verdict);
        assert_abs_diff_eq!(
            fast.significance,
            (reference.round_trip_ns() - 7.5) / 0.3,
            epsilon = 1e-12
        );
        // slower than the round trip is never a positive verdict
        let slow = causality_significance(
            DelayEstimate {
                delta_t: 14.0,
                sigma: 0.3,
            },
            &reference,
            None,
        );
        assert!(slow.significance > 3.0 && !slow.verdict);
        let exact = causality_significance(
            DelayEstimate {
                delta_t: 7.5,
                sigma: 0.0,
            },
            &reference,
            None,
        );
        assert!(exact.significance.is_infinite() && exact.verdict);
        assert!(ReferenceDistance::new(0.0, None).is_err());
        assert!(ReferenceDistance::new(-1.0, None).is_err());
    }

    #[test]
    fn reference_error_rule() {
        // ±1 cm on 1.56 m is ~0.64 %; a 0.3 ns error on 7.5 ns is 4 %
        let reference = ReferenceDistance::new(1.56, Some(0.01)).unwrap();
        let r = causality_significance(
            DelayEstimate {
                delta_t: 7.5,
                sigma: 0.3,
            },
            &reference,
            None,
        );
        assert!(r.reference_error_neglected);
        assert_eq!(r.sigma, 0.3);
        let coarse = ReferenceDistance::new(1.56, Some(0.2)).unwrap();
        let r = causality_significance(
            DelayEstimate {
                delta_t: 7.5,
                sigma: 0.3,
            },
            &coarse,
            None,
        );
        assert!(!r.reference_error_neglected);
        assert_abs_diff_eq!(
            r.sigma,
            quadrature(0.3, coarse.round_trip_sigma_ns()),
            epsilon = 1e-15
        );
    }

    #[test]
    fn fiber_delay() {
        let vacuum = fiber_delay_correction(2.080, 1.0).unwrap();
        assert_abs_diff_eq!(vacuum, 2.080 / SPEED_OF_LIGHT_M_PER_NS, epsilon = 1e-15);
        let glass = fiber_delay_correction(2.080, 1.46).unwrap();
        assert_abs_diff_eq!(
            fiber_delay_correction(4.160, 1.46).unwrap(),
            2.0 * glass,
            epsilon = 1e-12
        );
        assert!(fiber_delay_correction(0.0, 1.46).is_err());
        assert!(fiber_delay_correction(1.0, 0.9).is_err());
    }

    #[test]
    fn fiber_correction_restores_delay() {
        let mut r = rng::stream(4, "fiber");
        let fiber = fiber_delay_correction(2.080, 1.46).unwrap();
        let mut spec = TagSynthesis::new(PairLabel::AB, 7.5, 0.149, 20_000);
        spec.fiber_delay_ns = fiber;
        let ds = synthesize_time_tags(&spec, &mut r).unwrap();
        let reference = ReferenceDistance::new(1.56, None).unwrap();
        let raw = analyze_dataset(&ds, &reference, None).unwrap();
        let fixed = analyze_dataset(&ds, &reference, Some(fiber)).unwrap();
        assert!((raw.delta_t - (7.5 - fiber)).abs() < 0.01);
        assert!((fixed.delta_t - 7.5).abs() < 0.01);
    }

    #[test]
    fn significance_falls_with_jitter() {
        let geometry = InterferometerGeometry::new(1.06, 1.19).unwrap();
        let reference = ReferenceDistance::new(1.56, None).unwrap();
        let mut prev = f64::INFINITY;
        for jitter in [0.05, 0.1, 0.149, 0.3, 0.6] {
            let spec = TagSynthesis::new(
                PairLabel::BB,
                geometry.flight_time_ns(PairLabel::BB),
                jitter,
                20_000,
            );
            let ds = synthesize_time_tags(&spec, &mut rng::stream(5, "mono")).unwrap();
            let res = analyze_dataset(&ds, &reference, None).unwrap();
            assert!(res.significance < prev, "jitter {jitter}");
            prev = res.significance;
        }
    }

    #[test]
    fn geometry_flight_times() {
        let g = InterferometerGeometry::new(1.06, 1.19).unwrap();
        assert_abs_diff_eq!(
            g.flight_time_ns(PairLabel::AB),
            2.25 / SPEED_OF_LIGHT_M_PER_NS,
            epsilon = 1e-12
        );
        assert_eq!(
            g.flight_time_ns(PairLabel::AB),
            g.flight_time_ns(PairLabel::BA)
        );
        assert!(g.flight_time_ns(PairLabel::AA) < g.flight_time_ns(PairLabel::BB));
        assert!(InterferometerGeometry::new(0.0, 1.0).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let ds =
            TimingDataset::new(vec![30.0, 30.25], vec![37.5, 37.125, 37.0], PairLabel::BA).unwrap();
        let mut buf = Vec::new();
        write_time_tags(&mut buf, &ds).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("event_id,kind,time_ns\n0,reception,30.0\n"));
        assert_eq!(read_time_tags(buf.as_slice(), PairLabel::BA).unwrap(), ds);
        let bad = "event_id,kind,time_ns\n0,arrival,1.0\n";
        assert!(read_time_tags(bad.as_bytes(), PairLabel::AA).is_err());
        let only_rx = "event_id,kind,time_ns\n0,reception,1.0\n";
        assert!(matches!(
            read_time_tags(only_rx.as_bytes(), PairLabel::AA),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn labels() {
        for l in PairLabel::ALL {
            assert_eq!(l.to_string().parse::<PairLabel>().unwrap(), l);
        }
        assert!("AC".parse::<PairLabel>().is_err());
    }
}
