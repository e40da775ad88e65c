use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use twoway_core::game::{self, GameConfig};
use twoway_core::protocol::{self, Link, ProtocolParams, ProtocolReport};
use twoway_core::security::{self, Message};
use twoway_core::source::{self, SourceModel};
use twoway_core::timing::{
    self, InterferometerGeometry, PairLabel, ReferenceDistance, TagSynthesis, TimingResult,
};
use twoway_core::{rng, ChannelParams};

use crate::{
    Cli, CliError, Command, G2Args, GameSweepArgs, LinkArgs, ProtocolArgs, TimingArgs, TransmitArgs,
};

/// Finite stand-in for an infinite significance in JSON.
pub const SIGNIFICANCE_CAP: f64 = 1e6;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::GameSweep(a) => game_sweep(a, cli.seed),
        Command::Protocol(a) => protocol_cmd(a, cli.seed),
        Command::Transmit(a) => transmit(a, cli.seed),
        Command::G2(a) => g2(a, cli.seed),
        Command::Timing(a) => timing_cmd(a, cli.seed),
    }
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn write_csv<T: Serialize>(path: Option<&Path>, rows: &[T]) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for row in rows {
        wtr.serialize(row)?;
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?;
    write_text(path, &String::from_utf8_lossy(&bytes))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Serialize)]
struct SweepRow {
    visibility: f64,
    success_probability: f64,
    std_error: f64,
    predicted: f64,
    n_settings: usize,
    photons_per_setting: u64,
    seed: u64,
}

fn game_sweep(args: &GameSweepArgs, seed: u64) -> Result<(), CliError> {
    if args.vis.is_empty() {
        return Err(CliError::Usage("--vis needs at least one value".into()));
    }
    let mut channel = ChannelParams::ideal();
    if let Some(sigma) = args.phase_noise {
        channel = channel.with_phase_noise(sigma)?;
    }
    // validate every point before running any
    for &v in &args.vis {
        ChannelParams::new(v)?;
    }
    let template = GameConfig::new(
        args.settings,
        args.photons,
        channel,
        rng::derive_seed(seed, "game-sweep", 0),
    )?;
    let points = game::visibility_sweep(&args.vis, &template)?;
    let rows: Vec<SweepRow> = points
        .iter()
        .map(|p| SweepRow {
            visibility: p.visibility,
            success_probability: p.result.success_probability,
            std_error: p.result.std_error,
            predicted: game::predicted_success(p.visibility),
            n_settings: args.settings,
            photons_per_setting: args.photons,
            seed: p.seed,
        })
        .collect();
    write_csv(args.out.as_deref(), &rows)?;

    let summary = match game::fit_sweep(&points) {
        Some(fit) => format!(
            "fit: slope {:.4} intercept {:.4} (ideal 0.5, 0.5)",
            fit.slope, fit.intercept
        ),
        None => "fit: needs at least two distinct visibilities".to_string(),
    };
    // keep stdout clean when it carries the CSV
    if args.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

fn resolve_ps(link: &LinkArgs) -> Result<f64, CliError> {
    match (link.ps, link.vis) {
        (Some(ps), None) => Ok(ps),
        (None, Some(v)) => Ok(ChannelParams::new(v)?.correct_port_probability()),
        _ => Err(CliError::Usage(
            "exactly one of --ps or --vis is required".into(),
        )),
    }
}

#[derive(Serialize)]
struct ProtocolOutput {
    seed: u64,
    #[serde(flatten)]
    report: ProtocolReport,
    /// Distance of the measurement from the per-party prediction in binomial errors.
    deviation_sigmas: f64,
}

fn protocol_cmd(args: &ProtocolArgs, seed: u64) -> Result<(), CliError> {
    let ps = resolve_ps(&args.link)?;
    let m = if args.optimize_m {
        protocol::optimal_mean_detections(ps)?
    } else {
        args.link
            .m
            .ok_or_else(|| CliError::Usage("--m or --optimize-m is required".into()))?
    };
    let params = ProtocolParams::new(m, ps, args.link.reps)?;
    if args.pairs == 0 || args.sets == 0 {
        return Err(CliError::Usage(
            "--pairs and --sets must be positive".into(),
        ));
    }
    let link = Link::from_params(params)?;
    let sets = protocol::run_sets(
        args.sets,
        args.pairs,
        &link,
        rng::derive_seed(seed, "protocol", 0),
    )?;
    if let Some(path) = &args.csv {
        write_csv(Some(path), &sets)?;
    }
    let report = ProtocolReport::new(&params, &sets, args.pairs);
    let deviation_sigmas = if report.binomial_error > 0.0 {
        (report.measured_success - report.per_party_repetition_success).abs()
            / report.binomial_error
    } else {
        0.0
    };
    write_json(
        args.out.as_deref(),
        &ProtocolOutput {
            seed,
            report,
            deviation_sigmas,
        },
    )
}

#[derive(Serialize)]
struct TransmitStats {
    seed: u64,
    width: usize,
    height: usize,
    m: f64,
    p_s: f64,
    repetitions: u32,
    /// Pixels decoded correctly at both ends.
    success_rate: f64,
    pixel_errors: usize,
    bob_pixel_accuracy: f64,
    /// Best single-pixel guess rate from the parity stream.
    eve_guess_accuracy: f64,
}

fn transmit(args: &TransmitArgs, seed: u64) -> Result<(), CliError> {
    let image = Message::parse_pbm(&read_text(&args.image)?)?;
    let ps = resolve_ps(&args.link)?;
    let m = match args.link.m {
        Some(m) => m,
        None => protocol::optimal_mean_detections(ps)?,
    };
    let params = ProtocolParams::new(m, ps, args.link.reps)?;
    let link = Link::from_params(params)?;
    let mut r = rng::stream(seed, "transmit");
    let result = security::transmit_image(&image, &link, &mut r)?;
    let (width, height) = image.shape().expect("parsed bitmaps carry a shape");

    if let Some(p) = &args.received {
        write_text(Some(p), &result.received.to_pbm()?)?;
    }
    if let Some(p) = &args.eve {
        write_text(Some(p), &result.eve.to_message(image.shape())?.to_pbm()?)?;
    }
    let pixels = image.len();
    write_json(
        args.out.as_deref(),
        &TransmitStats {
            seed,
            width,
            height,
            m,
            p_s: ps,
            repetitions: args.link.reps,
            success_rate: result.success_rate,
            pixel_errors: result.pixel_errors,
            bob_pixel_accuracy: 1.0 - result.pixel_errors as f64 / pixels as f64,
            eve_guess_accuracy: security::eve_guess_accuracy(&image, &result.eve)?,
        },
    )
}

#[derive(Serialize)]
struct G2Output {
    seed: u64,
    duration_s: f64,
    herald_rate_per_s: f64,
    multiphoton_rate: f64,
    detection_efficiency: f64,
    c_h_per_s: f64,
    cc_ha_per_s: f64,
    cc_hb_per_s: f64,
    cc_hab_per_s: f64,
    g2: f64,
    g2_error: f64,
    expected_g2: f64,
}

fn g2(args: &G2Args, seed: u64) -> Result<(), CliError> {
    let q = match args.target_g2 {
        Some(t) => source::multiphoton_rate_for_g2_with_efficiency(t, args.detection_efficiency)?,
        None => args.multiphoton_rate,
    };
    let model = SourceModel::new(1.0, q, args.herald_rate_per_s, 0.5)?;
    let mut r = rng::stream(seed, "g2");
    let rates = source::simulate_coincidence_run_with_efficiency(
        &model,
        args.detection_efficiency,
        args.duration_s,
        &mut r,
    )?;
    write_json(
        args.out.as_deref(),
        &G2Output {
            seed,
            duration_s: args.duration_s,
            herald_rate_per_s: args.herald_rate_per_s,
            multiphoton_rate: q,
            detection_efficiency: args.detection_efficiency,
            c_h_per_s: rates.c_h,
            cc_ha_per_s: rates.cc_ha,
            cc_hb_per_s: rates.cc_hb,
            cc_hab_per_s: rates.cc_hab,
            g2: source::g2_zero(&rates)?,
            g2_error: source::g2_poisson_error(&rates, args.duration_s)?,
            expected_g2: source::expected_g2_with_efficiency(q, args.detection_efficiency),
        },
    )
}

#[derive(Serialize)]
struct PairOutput {
    label: String,
    delta_t_ns: f64,
    sigma_ns: f64,
    reference_ns: f64,
    significance: f64,
    /// Set when the true significance was infinite and is reported as the cap.
    significance_capped: bool,
    verdict: bool,
    reference_error_neglected: bool,
}

impl PairOutput {
    fn new(label: PairLabel, r: &TimingResult) -> Self {
        let capped = r.significance > SIGNIFICANCE_CAP;
        Self {
            label: label.to_string(),
            delta_t_ns: r.delta_t,
            sigma_ns: r.sigma,
            reference_ns: r.reference_time,
            significance: if capped {
                SIGNIFICANCE_CAP
            } else {
                r.significance
            },
            significance_capped: capped,
            verdict: r.verdict,
            reference_error_neglected: r.reference_error_neglected,
        }
    }
}

#[derive(Serialize)]
struct TimingOutput {
    seed: u64,
    min_distance_m: f64,
    fiber_delay_ns: f64,
    pairs: Vec<PairOutput>,
    all_pairs_pass: bool,
}

fn timing_cmd(args: &TimingArgs, seed: u64) -> Result<(), CliError> {
    let reference = ReferenceDistance::new(args.min_distance_m, args.distance_uncertainty_m)?;
    let fiber_delay = match args.fiber_length_m {
        Some(len) => Some(timing::fiber_delay_correction(len, args.fiber_index)?),
        None => None,
    };

    let mut pairs = Vec::new();
    if let Some(path) = &args.tags {
        let label: PairLabel = args.label.parse()?;
        let file = fs::File::open(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        let dataset = timing::read_time_tags(file, label)?;
        pairs.push(PairOutput::new(
            label,
            &timing::analyze_dataset(&dataset, &reference, fiber_delay)?,
        ));
    } else {
        let geometry = InterferometerGeometry::new(args.arm_a_m, args.arm_b_m)?;
        if let Some(dir) = &args.tags_out {
            fs::create_dir_all(dir).map_err(|source| CliError::Io {
                path: dir.clone(),
                source,
            })?;
        }
        for (i, label) in PairLabel::ALL.into_iter().enumerate() {
            let mut spec = TagSynthesis::new(
                label,
                args.delay_ns
                    .unwrap_or_else(|| geometry.flight_time_ns(label)),
                args.jitter_ns,
                args.events,
            );
            spec.reception_ns = args.reception_ns;
            spec.fiber_delay_ns = fiber_delay.unwrap_or(0.0);
            let mut r = rng::substream(seed, "timing", i as u64);
            let dataset = timing::synthesize_time_tags(&spec, &mut r)?;
            if let Some(dir) = &args.tags_out {
                let path = dir.join(format!("tags_{label}.csv"));
                let file =
                    fs::File::create(&path).map_err(|source| CliError::Io { path, source })?;
                timing::write_time_tags(file, &dataset)?;
            }
            // the reception tags carry the fibre delay; the correction restores it
            let result = timing::analyze_dataset(&dataset, &reference, fiber_delay)?;
            pairs.push(PairOutput::new(label, &result));
        }
    }
    let all_pairs_pass = pairs.iter().all(|p| p.verdict);
    write_json(
        args.out.as_deref(),
        &TimingOutput {
            seed,
            min_distance_m: args.min_distance_m,
            fiber_delay_ns: fiber_delay.unwrap_or(0.0),
            pairs,
            all_pairs_pass,
        },
    )
}
