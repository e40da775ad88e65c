//! What an eavesdropper learns, and one-time-pad messaging on top of it.
//!
//! The encoded state is `(−1)^x (a† + (−1)^{x⊕y} b†)/√2`: apart from a global
//! phase only the parity `x ⊕ y` is physically accessible. Eve is modelled as
//! a noiseless parity observer. When one party sends a message and the other
//! a uniform pad, the parity stream is the one-time-pad ciphertext and says
//! nothing about who sent what.
//!
//! Bitmaps use the plain `P1` format: `P1`, then `W H`, then `W·H`
//! whitespace-separated `0`/`1` tokens; 1 is a black pixel, rows are stored
//! top to bottom.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::protocol::{run_message, IntervalRecord, Link};
use crate::quantum::{BitPair, Port};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    bits: Vec<bool>,
    shape: Option<(usize, usize)>,
}

impl Message {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits, shape: None }
    }

    /// Bitmap of `width × height` pixels in row-major order.
    pub fn bitmap(bits: Vec<bool>, width: usize, height: usize) -> Result<Self> {
        if width.checked_mul(height) != Some(bits.len()) {
            return Err(Error::contract(format!(
                "{width}×{height} bitmap needs {} bits, got {}",
                width.saturating_mul(height),
                bits.len()
            )));
        }
        Ok(Self {
            bits,
            shape: Some((width, height)),
        })
    }

    /// Parses a string of `0`/`1` characters.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        s.chars()
            .enumerate()
            .map(|(i, c)| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse {
                    line: 1,
                    token: other.to_string(),
                    message: format!("character {i} is not a bit"),
                }),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn shape(&self) -> Option<(usize, usize)> {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn to_bit_string(&self) -> String {
        self.bits
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }

    /// Same bits with another bitmap shape (or none).
    pub fn with_shape(self, shape: Option<(usize, usize)>) -> Result<Self> {
        match shape {
            Some((w, h)) => Self::bitmap(self.bits, w, h),
            None => Ok(Self::new(self.bits)),
        }
    }

    /// Uniformly random bits.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self::new((0..len).map(|_| rng.random()).collect())
    }

    /// Reads the plain `P1` bitmap format. `#` starts a comment running to
    /// the end of the line; pixels may be separated by whitespace or packed.
    pub fn parse_pbm(text: &str) -> Result<Self> {
        let parse_err = |line: usize, token: &str, message: &str| Error::Parse {
            line,
            token: token.to_string(),
            message: message.to_string(),
        };
        let mut tokens = text.lines().enumerate().flat_map(|(i, l)| {
            let content = l.split('#').next().unwrap_or("");
            content.split_whitespace().map(move |t| (i + 1, t))
        });
        let last_line = text.lines().count().max(1);

        let (line_no, magic) = tokens
            .next()
            .ok_or_else(|| parse_err(1, "", "empty bitmap"))?;
        if magic != "P1" {
            return Err(parse_err(line_no, magic, "expected header P1"));
        }
        let mut dim = || -> Result<(usize, usize)> {
            let (line_no, tok) = tokens
                .next()
                .ok_or_else(|| parse_err(last_line, "", "missing dimensions \"W H\""))?;
            let value = tok
                .parse::<usize>()
                .map_err(|_| parse_err(line_no, tok, "dimension is not a non-negative integer"))?;
            Ok((line_no, value))
        };
        let (_, width) = dim()?;
        let (dims_line, height) = dim()?;
        let expected = width
            .checked_mul(height)
            .ok_or_else(|| parse_err(dims_line, "", "dimensions overflow"))?;

        let mut bits = Vec::with_capacity(expected);
        for (line_no, tok) in tokens {
            for c in tok.chars() {
                let bit = match c {
                    '0' => false,
                    '1' => true,
                    _ => return Err(parse_err(line_no, tok, "pixel must be 0 or 1")),
                };
                if bits.len() == expected {
                    return Err(parse_err(line_no, tok, "more pixels than W·H"));
                }
                bits.push(bit);
            }
        }
        if bits.len() != expected {
            return Err(parse_err(
                last_line,
                "",
                &format!("expected {expected} pixels, found {}", bits.len()),
            ));
        }
        Self::bitmap(bits, width, height)
    }

    /// Writes the `P1` format, one pixel row per line.
    pub fn to_pbm(&self) -> Result<String> {
        let (width, height) = self
            .shape
            .ok_or_else(|| Error::contract("message has no bitmap shape"))?;
        let mut out = String::with_capacity(8 + 2 * self.bits.len());
        writeln!(out, "P1\n{width} {height}").expect("string write");
        for row in self.bits.chunks(width.max(1)).take(height) {
            let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        Ok(out)
    }
}

/// The parity stream, all Eve can extract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveView {
    pub parities: Vec<bool>,
}

impl EveView {
    pub fn to_message(&self, shape: Option<(usize, usize)>) -> Result<Message> {
        Message::new(self.parities.clone()).with_shape(shape)
    }
}

pub fn eve_observe(pairs: &[BitPair]) -> EveView {
    EveView {
        parities: pairs.iter().map(|p| p.parity()).collect(),
    }
}

/// Bitwise XOR of a message with a pad of the same length. The result keeps
/// the message's shape. Applying it twice with the same pad returns the
/// message.
pub fn otp_apply(message: &Message, pad: &Message) -> Result<Message> {
    if message.len() != pad.len() {
        return Err(Error::contract(format!(
            "pad length {} differs from message length {}",
            pad.len(),
            message.len()
        )));
    }
    let bits = message
        .bits
        .iter()
        .zip(&pad.bits)
        .map(|(m, k)| m ^ k)
        .collect();
    Ok(Message {
        bits,
        shape: message.shape,
    })
}

/// Pairs `(x, y)` with Alice holding `alice` and Bob holding `bob`.
pub fn pair_up(alice: &Message, bob: &Message) -> Result<Vec<BitPair>> {
    if alice.len() != bob.len() {
        return Err(Error::contract(
            "both parties must send the same number of bits",
        ));
    }
    Ok(alice
        .bits
        .iter()
        .zip(&bob.bits)
        .map(|(&x, &y)| BitPair::new(x, y))
        .collect())
}

/// Fraction of message bits Eve gets right with her best parity-based
/// guess. Without knowledge of the pad, guessing the parity itself and
/// guessing a constant are the candidate strategies; the better of the two is
/// reported.
pub fn eve_guess_accuracy(message: &Message, eve: &EveView) -> Result<f64> {
    if message.len() != eve.parities.len() || message.is_empty() {
        return Err(Error::contract(
            "Eve's view and the message must have equal, non-zero length",
        ));
    }
    let n = message.len() as f64;
    let frac = |guess: &dyn Fn(usize) -> bool| {
        message
            .bits
            .iter()
            .enumerate()
            .filter(|(i, &b)| guess(*i) == b)
            .count() as f64
            / n
    };
    let strategies: [&dyn Fn(usize) -> bool; 4] = [
        &|i| eve.parities[i],
        &|i| !eve.parities[i],
        &|_| false,
        &|_| true,
    ];
    Ok(strategies.iter().map(|s| frac(s)).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTransmission {
    /// Bob's majority-decoded picture.
    pub received: Message,
    pub eve: EveView,
    /// Fraction of pixels decoded correctly at both ends.
    pub success_rate: f64,
    /// Pixels where Bob's picture differs from the original.
    pub pixel_errors: usize,
}

/// Alice sends `image`, Bob sends a fresh uniform pad of the same length.
pub fn transmit_image<R: Rng + ?Sized>(
    image: &Message,
    link: &Link,
    rng: &mut R,
) -> Result<ImageTransmission> {
    let shape = image
        .shape
        .ok_or_else(|| Error::contract("image must carry a bitmap shape"))?;
    let pad = Message::random(image.len(), rng);
    let pairs = pair_up(image, &pad)?;
    let outcome = run_message(&pairs, link, rng)?;
    let received = Message::bitmap(
        outcome.decoded.iter().map(|d| d.at_bob).collect(),
        shape.0,
        shape.1,
    )?;
    let pixel_errors = received
        .bits
        .iter()
        .zip(&image.bits)
        .filter(|(a, b)| a != b)
        .count();
    Ok(ImageTransmission {
        received,
        eve: eve_observe(&pairs),
        success_rate: outcome.success_rate,
        pixel_errors,
    })
}

/// Which party carries the message (the other carries the pad).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    AliceSendsMessage,
    BobSendsMessage,
}

/// Everything a run exposes on the line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub role: Role,
    pub pairs: Vec<BitPair>,
    pub records: Vec<IntervalRecord>,
}

impl Transcript {
    pub fn eve_view(&self) -> EveView {
        eve_observe(&self.pairs)
    }

    /// Photon counts indexed by `[parity][port]`.
    pub fn port_counts(&self) -> [[u64; 2]; 2] {
        let mut counts = [[0u64; 2]; 2];
        for rec in &self.records {
            for port in &rec.photon_ports {
                let col = match port {
                    Port::Alice => 0,
                    Port::Bob => 1,
                };
                counts[rec.bits.parity() as usize][col] += 1;
            }
        }
        counts
    }
}

pub fn record_transcript<R: Rng + ?Sized>(
    message: &Message,
    pad: &Message,
    role: Role,
    link: &Link,
    rng: &mut R,
) -> Result<Transcript> {
    let pairs = match role {
        Role::AliceSendsMessage => pair_up(message, pad)?,
        Role::BobSendsMessage => pair_up(pad, message)?,
    };
    let outcome = run_message(&pairs, link, rng)?;
    Ok(Transcript {
        role,
        pairs,
        records: outcome.records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnonymityReport {
    pub parity_streams_identical: bool,
    /// Homogeneity statistic over the (parity, port) photon counts.
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Compares what Eve can see in two transcripts. Parity streams must match
/// exactly; photon-port statistics are compared with a chi-square test of
/// homogeneity over the (parity, port) cells that are populated.
pub fn direction_anonymity_check(first: &Transcript, second: &Transcript) -> AnonymityReport {
    let a = first.port_counts();
    let b = second.port_counts();
    let rows = [a.concat(), b.concat()];
    let cols: Vec<usize> = (0..4).filter(|&c| rows[0][c] + rows[1][c] > 0).collect();
    let row_totals: Vec<f64> = rows
        .iter()
        .map(|r| cols.iter().map(|&c| r[c] as f64).sum())
        .collect();
    let grand: f64 = row_totals.iter().sum();

    let mut chi_square = 0.0;
    if grand > 0.0 && row_totals.iter().all(|&t| t > 0.0) {
        for &c in &cols {
            let col_total = (rows[0][c] + rows[1][c]) as f64;
            for (r, row) in rows.iter().enumerate() {
                let expected = row_totals[r] * col_total / grand;
                let diff = row[c] as f64 - expected;
                chi_square += diff * diff / expected;
            }
        }
    }
    let dof = cols.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).expect("positive dof");
        1.0 - dist.cdf(chi_square)
    };
    AnonymityReport {
        parity_streams_identical: first.eve_view() == second.eve_view(),
        chi_square,
        degrees_of_freedom: dof,
        p_value,
    }
}
