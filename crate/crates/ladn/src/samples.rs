//! Plain-text export of labelled channel samples.
//!
//! ```text
//! # ladn-samples 1
//! # n=7 snr_convention=eb-n0 codeword_mode=all-zero seed=1
//! <snr_db> <label bits> <llr_1> ... <llr_N>
//! ```
//!
//! One sample per line, whitespace separated; the label is a bit string such
//! as `0110100`. Numbers use shortest round-trip formatting, so a reload is
//! bit-exact.

use std::fmt::Write as _;

use ladn_core::channel::{ChannelSample, CodewordMode, SampleSeed, SnrConvention};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const HEADER: &str = "# ladn-samples 1";

pub fn convention_tag(c: SnrConvention) -> &'static str {
    match c {
        SnrConvention::EbN0 => "eb-n0",
        SnrConvention::EsN0 => "es-n0",
    }
}

pub fn parse_convention(tag: &str) -> Option<SnrConvention> {
    match tag {
        "eb-n0" => Some(SnrConvention::EbN0),
        "es-n0" => Some(SnrConvention::EsN0),
        _ => None,
    }
}

pub fn mode_tag(m: CodewordMode) -> &'static str {
    match m {
        CodewordMode::AllZero => "all-zero",
        CodewordMode::RandomMessage => "random-message",
    }
}

pub fn parse_mode(tag: &str) -> Option<CodewordMode> {
    match tag {
        "all-zero" => Some(CodewordMode::AllZero),
        "random-message" => Some(CodewordMode::RandomMessage),
        _ => None,
    }
}

/// SHA-256 over labels and the exact bits of every LLR, in order.
pub fn fingerprint(samples: &[ChannelSample]) -> String {
    let mut h = Sha256::new();
    for s in samples {
        h.update(s.snr_db.to_le_bytes());
        h.update(&s.x);
        for v in &s.v {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Renders samples; `meta` goes into the second header line.
pub fn to_text(samples: &[ChannelSample], meta: &str) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    if !meta.is_empty() {
        let _ = writeln!(out, "# {meta}");
    }
    for s in samples {
        let _ = write!(out, "{} ", s.snr_db);
        out.extend(s.x.iter().map(|&b| if b == 0 { '0' } else { '1' }));
        for v in &s.v {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

/// Parses the format written by [`to_text`]. Seeds are not stored; each
/// sample gets `stream` = its line order.
pub fn from_text(text: &str, origin: &str) -> Result<Vec<ChannelSample>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == HEADER => {}
        _ => return Err(Error::format(origin, format!("line 1: expected \"{HEADER}\""))),
    }
    let mut out: Vec<ChannelSample> = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |m: String| Error::format(origin, format!("line {}: {m}", i + 1));
        let mut fields = line.split_whitespace();
        let snr: f64 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| err("bad SNR field".into()))?;
        let label = fields.next().ok_or_else(|| err("missing label".into()))?;
        let x: Vec<u8> = label
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(err(format!("label has non-bit character {c:?}"))),
            })
            .collect::<Result<_>>()?;
        let v: Vec<f64> = fields
            .map(|f| f.parse::<f64>().map_err(|_| err(format!("bad LLR {f:?}"))))
            .collect::<Result<_>>()?;
        if v.len() != x.len() {
            return Err(err(format!("{} LLRs for a {}-bit label", v.len(), x.len())));
        }
        if let Some(first) = out.first() {
            if first.x.len() != x.len() {
                return Err(err(format!("length {} differs from earlier samples ({})", x.len(), first.x.len())));
            }
        }
        let stream = out.len() as u64;
        out.push(ChannelSample { x, v, snr_db: snr, seed: SampleSeed { seed: 0, stream } });
    }
    Ok(out)
}
