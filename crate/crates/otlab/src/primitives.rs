//! The transfer primitives themselves: parameter records for weak OT,
//! samplers that realize a weak OT from simple fault models, and pluggable
//! ideal functionalities (chosen-input OT, randomized OT with optional
//! corruption, and the entropy-floor variant) for use as engine slots.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::engine::{Endpoint, EngineError, Functionality, Message, RandState, Role};
use crate::hashing::{min_entropy, HashError};
use crate::prob::{FiniteDist, ProbError};

/// Widest tape-friendly denominator scanned for when a probability has to be
/// realized from coin flips exactly.
const DYADIC_SCAN_BITS: u32 = 24;

/// Enumeration guard for adversary supports.
const SUPPORT_BIT_CAP: usize = 20;

#[derive(Debug, Error)]
pub enum PrimError {
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("min-entropy {have:.4} below required floor {need:.4}")]
    EntropyTooLow { have: f64, need: f64 },
    #[error("batch line {line}: {reason}")]
    BadBatchLine { line: usize, reason: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Hash(#[from] HashError),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// How a parameter triple was obtained. Exact values come from closed forms
/// or full enumeration, upper bounds from composition rules, estimates carry
/// a confidence radius.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Provenance {
    Exact,
    UpperBound,
    Estimated { radius: f64 },
}

/// The three fault measures of a weak erasure-prone OT: receiver-choice
/// leakage toward the sender (p), other-message leakage toward the receiver
/// (q), and transfer error rate (eps).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WotParams {
    pub p: f64,
    pub q: f64,
    pub eps: f64,
    pub provenance: Provenance,
}

impl WotParams {
    pub fn new(p: f64, q: f64, eps: f64, provenance: Provenance) -> Result<Self, PrimError> {
        for (name, v) in [("p", p), ("q", q), ("eps", eps)] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(PrimError::BadParam(format!("{name} = {v} outside [0,1]")));
            }
        }
        Ok(WotParams { p, q, eps, provenance })
    }

    pub fn exact(p: f64, q: f64, eps: f64) -> Result<Self, PrimError> {
        Self::new(p, q, eps, Provenance::Exact)
    }
}

/// What one party has learned about the other's secret: nothing, or the
/// concrete bit. Samples carry these in place of full transcripts; whenever a
/// sampler leaks anything beyond this bit, that extra data is independent
/// uniform padding and dropping it changes no prediction advantage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    Nothing,
    Known(u8),
}

impl View {
    /// Stable encoding for outcome tuples: 0 silent, 1 and 2 carry the bit.
    pub fn code(self) -> u32 {
        match self {
            View::Nothing => 0,
            View::Known(b) => 1 + b as u32,
        }
    }

    pub fn from_code(code: u32) -> Result<Self, PrimError> {
        match code {
            0 => Ok(View::Nothing),
            1 => Ok(View::Known(0)),
            2 => Ok(View::Known(1)),
            other => Err(PrimError::BadInput(format!("view code {other}"))),
        }
    }

    fn symbol(self) -> char {
        match self {
            View::Nothing => '-',
            View::Known(b) => char::from(b'0' + b),
        }
    }

    fn from_symbol(sym: &str) -> Option<Self> {
        match sym {
            "-" => Some(View::Nothing),
            "0" => Some(View::Known(0)),
            "1" => Some(View::Known(1)),
            _ => None,
        }
    }
}

/// One joint execution of a bit OT: sender strings, receiver choice and
/// received bit, plus each side's knowledge about the other.
/// `u` is what the sender learned about `c`; `v` is what the receiver
/// learned about the string it did not pick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WotSample {
    pub x0: u8,
    pub x1: u8,
    pub c: u8,
    pub y: u8,
    pub u: View,
    pub v: View,
}

impl WotSample {
    /// The transfer-error indicator, recomputed rather than stored.
    pub fn e(&self) -> u8 {
        self.y ^ if self.c == 0 { self.x0 } else { self.x1 }
    }

    /// The string the receiver did not choose.
    pub fn other(&self) -> u8 {
        if self.c == 0 {
            self.x1
        } else {
            self.x0
        }
    }

    /// Measurement tuple (x0, x1, c, y, u, v); the error bit is derivable.
    pub fn outcome(&self) -> Vec<u32> {
        vec![
            self.x0 as u32,
            self.x1 as u32,
            self.c as u32,
            self.y as u32,
            self.u.code(),
            self.v.code(),
        ]
    }

    pub fn check_bits(&self) -> Result<(), PrimError> {
        for (name, b) in [("x0", self.x0), ("x1", self.x1), ("c", self.c), ("y", self.y)] {
            if b > 1 {
                return Err(PrimError::BadInput(format!("{name} = {b} is not a bit")));
            }
        }
        Ok(())
    }
}

/// Batch line: "x0 x1 c y e u=<s> v=<s>" with view symbols -, 0, 1.
pub fn format_batch_line(s: &WotSample) -> String {
    format!(
        "{} {} {} {} {} u={} v={}",
        s.x0,
        s.x1,
        s.c,
        s.y,
        s.e(),
        s.u.symbol(),
        s.v.symbol()
    )
}

fn parse_bit(tok: &str) -> Option<u8> {
    match tok {
        "0" => Some(0),
        "1" => Some(1),
        _ => None,
    }
}

/// Parses one batch line. The view tags are optional and default to silence;
/// the error field is redundant and must agree with the other four bits.
pub fn parse_batch_line(text: &str, line_no: usize) -> Result<WotSample, PrimError> {
    let bad = |reason: &str| PrimError::BadBatchLine {
        line: line_no,
        reason: reason.into(),
    };
    let toks: Vec<&str> = text.split_whitespace().collect();
    if toks.len() != 5 && toks.len() != 7 {
        return Err(bad("expected 5 fields plus optional u=/v= tags"));
    }
    let bits: Vec<u8> = toks[..5]
        .iter()
        .map(|t| parse_bit(t))
        .collect::<Option<_>>()
        .ok_or_else(|| bad("fields must be 0 or 1"))?;
    let mut u = View::Nothing;
    let mut v = View::Nothing;
    if toks.len() == 7 {
        let utag = toks[5]
            .strip_prefix("u=")
            .and_then(View::from_symbol)
            .ok_or_else(|| bad("bad u= tag"))?;
        let vtag = toks[6]
            .strip_prefix("v=")
            .and_then(View::from_symbol)
            .ok_or_else(|| bad("bad v= tag"))?;
        u = utag;
        v = vtag;
    }
    let sample = WotSample {
        x0: bits[0],
        x1: bits[1],
        c: bits[2],
        y: bits[3],
        u,
        v,
    };
    if sample.e() != bits[4] {
        return Err(bad("error field disagrees with x, c, y"));
    }
    Ok(sample)
}

/// Parses a whole batch file; blank lines and '#' comments are skipped.
pub fn parse_batch(text: &str) -> Result<Vec<WotSample>, PrimError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_batch_line(line, idx + 1)?);
    }
    Ok(out)
}

pub fn format_batch(samples: &[WotSample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&format_batch_line(s));
        out.push('\n');
    }
    out
}

/// Finds the smallest power-of-two denominator representing every probability
/// exactly, if one exists within the scan limit.
fn dyadic_scale(probs: &[f64], max_bits: u32) -> Option<(u32, Vec<u64>)> {
    for m in 0..=max_bits {
        let scale = (1u64 << m) as f64;
        if probs.iter().all(|&p| (p * scale).fract() == 0.0) {
            let nums = probs.iter().map(|&p| (p * scale) as u64).collect();
            return Some((m, nums));
        }
    }
    None
}

/// Draws index i with probability probs[i], or probs.len() with the leftover
/// mass. Dyadic probabilities use an exact integer threshold draw, which is
/// the only form a tape can serve; anything else falls back to a 53-bit
/// uniform and is available with seeded randomness only.
fn draw_categorical(rng: &mut RandState, probs: &[f64]) -> Result<usize, PrimError> {
    for &p in probs {
        if !(0.0..=1.0).contains(&p) {
            return Err(PrimError::BadParam(format!("probability {p} outside [0,1]")));
        }
    }
    if probs.iter().sum::<f64>() > 1.0 + 1e-9 {
        return Err(PrimError::BadParam("probabilities exceed 1".into()));
    }
    match dyadic_scale(probs, DYADIC_SCAN_BITS) {
        Some((m, nums)) => {
            let v = rng.draw_range(Endpoint::Func, 1u64 << m)?;
            let mut acc = 0u64;
            for (i, &k) in nums.iter().enumerate() {
                acc += k;
                if v < acc {
                    return Ok(i);
                }
            }
            Ok(probs.len())
        }
        None => {
            let u = rng.draw_unit(Endpoint::Func)?;
            let mut acc = 0.0;
            for (i, &p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return Ok(i);
                }
            }
            Ok(probs.len())
        }
    }
}

fn draw_event(rng: &mut RandState, prob: f64) -> Result<bool, PrimError> {
    Ok(draw_categorical(rng, &[prob])? == 0)
}

/// Samples one execution of the two-message erasure protocol that realizes a
/// weak OT with choice leakage p, message leakage q, and error (1-p-q)/2:
/// with probability q the sender opens both strings, with probability p the
/// receiver opens choice and output, otherwise both stay silent and the
/// received bit is an independent coin.
///
/// The three branches are disjoint in the underlying protocol (the receiver
/// only speaks after a silent sender), so a single categorical draw with
/// masses (q, p, rest) reproduces the joint distribution exactly and keeps
/// dyadic p, q enumerable on a tape. Draw order: x0', x1', c', y', branch.
pub fn simwot_sample(p: f64, q: f64, rng: &mut RandState) -> Result<WotSample, PrimError> {
    if p + q > 1.0 + 1e-9 {
        return Err(PrimError::BadParam(format!("p + q = {} exceeds 1", p + q)));
    }
    let x0 = rng.draw_bit(Endpoint::Func)?;
    let x1 = rng.draw_bit(Endpoint::Func)?;
    let c = rng.draw_bit(Endpoint::Func)?;
    let y_free = rng.draw_bit(Endpoint::Func)?;
    let chosen = if c == 0 { x0 } else { x1 };
    let other = if c == 0 { x1 } else { x0 };
    Ok(match draw_categorical(rng, &[q, p])? {
        0 => WotSample {
            // sender announced (x0, x1); receiver outputs its pick exactly
            x0,
            x1,
            c,
            y: chosen,
            u: View::Nothing,
            v: View::Known(other),
        },
        1 => WotSample {
            // receiver announced (c, y); sender aligns the chosen string
            x0: if c == 0 { y_free } else { x0 },
            x1: if c == 1 { y_free } else { x1 },
            c,
            y: y_free,
            u: View::Known(c),
            v: View::Nothing,
        },
        _ => WotSample {
            // silence on both sides; y_free is an unaligned coin
            x0,
            x1,
            c,
            y: y_free,
            u: View::Nothing,
            v: View::Nothing,
        },
    })
}

/// Samples a weak OT directly from its fault-event definition: correct
/// transfer flipped by an eps-coin, choice revealed by a p-coin, the unpicked
/// string revealed by a q-coin, all independent. Draw order: x0, x1, c, then
/// the error, choice-leak, and message-leak events.
pub fn event_model_wot(
    p: f64,
    q: f64,
    eps: f64,
    rng: &mut RandState,
) -> Result<WotSample, PrimError> {
    let x0 = rng.draw_bit(Endpoint::Func)?;
    let x1 = rng.draw_bit(Endpoint::Func)?;
    let c = rng.draw_bit(Endpoint::Func)?;
    let chosen = if c == 0 { x0 } else { x1 };
    let other = if c == 0 { x1 } else { x0 };
    let flip = draw_event(rng, eps)?;
    let leak_c = draw_event(rng, p)?;
    let leak_x = draw_event(rng, q)?;
    Ok(WotSample {
        x0,
        x1,
        c,
        y: chosen ^ flip as u8,
        u: if leak_c { View::Known(c) } else { View::Nothing },
        v: if leak_x { View::Known(other) } else { View::Nothing },
    })
}

pub fn pack_bit_bytes(bits: &[u8]) -> u64 {
    bits.iter().fold(0u64, |acc, &b| (acc << 1) | (b & 1) as u64)
}

pub fn unpack_bit_bytes(v: u64, len: usize) -> Vec<u8> {
    (0..len).map(|i| ((v >> (len - 1 - i)) & 1) as u8).collect()
}

/// Shape of a one-out-of-n string transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct OtSpec {
    pub n_strings: usize,
    pub bit_len: usize,
}

impl OtSpec {
    pub fn new(n_strings: usize, bit_len: usize) -> Result<Self, PrimError> {
        if n_strings < 2 || n_strings > 256 {
            return Err(PrimError::BadParam(format!(
                "n_strings = {n_strings} outside 2..=256"
            )));
        }
        if bit_len == 0 || n_strings.saturating_mul(bit_len) > 1 << 16 {
            return Err(PrimError::BadParam(format!("bit_len = {bit_len} out of range")));
        }
        Ok(OtSpec { n_strings, bit_len })
    }

    /// The classic case: two one-bit strings.
    pub fn pair() -> Self {
        OtSpec {
            n_strings: 2,
            bit_len: 1,
        }
    }
}

/// Chosen-input one-out-of-n OT. The sender provides all strings as 0/1
/// bytes, the receiver provides a one-byte index; the receiver learns its
/// pick, the sender gets an empty acknowledgement.
pub struct OtFunctionality {
    spec: OtSpec,
    strings: Option<Vec<u8>>,
    choice: Option<usize>,
}

impl OtFunctionality {
    pub fn new(spec: OtSpec) -> Self {
        OtFunctionality {
            spec,
            strings: None,
            choice: None,
        }
    }

    fn ready(&self) -> bool {
        self.strings.is_some() && self.choice.is_some()
    }
}

impl Functionality for OtFunctionality {
    fn provide(
        &mut self,
        from: Role,
        payload: &[u8],
        _rng: &mut RandState,
    ) -> Result<(), EngineError> {
        let reject = |msg: &str| EngineError::BadMessage(msg.into());
        match from {
            Role::A => {
                if self.strings.is_some() {
                    return Err(reject("sender input already set"));
                }
                if payload.len() != self.spec.n_strings * self.spec.bit_len {
                    return Err(reject("sender payload length mismatch"));
                }
                if payload.iter().any(|&b| b > 1) {
                    return Err(reject("sender payload must be 0/1 bytes"));
                }
                self.strings = Some(payload.to_vec());
            }
            Role::B => {
                if self.choice.is_some() {
                    return Err(reject("receiver input already set"));
                }
                if payload.len() != 1 || (payload[0] as usize) >= self.spec.n_strings {
                    return Err(reject("receiver payload must be one index byte"));
                }
                self.choice = Some(payload[0] as usize);
            }
        }
        Ok(())
    }

    fn poll(&mut self, from: Role, _rng: &mut RandState) -> Result<Option<Message>, EngineError> {
        if !self.ready() {
            return Ok(None);
        }
        let strings = self.strings.as_ref().expect("checked ready");
        let c = self.choice.expect("checked ready");
        Ok(Some(match from {
            Role::A => Vec::new(),
            Role::B => {
                let l = self.spec.bit_len;
                strings[c * l..(c + 1) * l].to_vec()
            }
        }))
    }
}

/// Who, if anyone, dictates the randomized transfer's values instead of the
/// dealer. A corrupt sender fixes all strings; a corrupt receiver fixes its
/// choice and received string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotCorruption {
    Honest,
    ChosenByA,
    ChosenByB,
}

/// Randomized one-out-of-n transfer: the dealer draws the strings and the
/// choice, hands the sender all strings and the receiver its pick. Under
/// corruption one side's values are provided instead of drawn; the other
/// side's marginal is unchanged, which is exactly the randomized primitive's
/// security guarantee.
pub struct RotFunctionality {
    spec: OtSpec,
    corruption: RotCorruption,
    strings: Option<Vec<u8>>,
    choice: Option<usize>,
    chosen_y: Option<Vec<u8>>,
}

impl RotFunctionality {
    pub fn new(spec: OtSpec, corruption: RotCorruption) -> Self {
        RotFunctionality {
            spec,
            corruption,
            strings: None,
            choice: None,
            chosen_y: None,
        }
    }

    fn ensure_state(&mut self, rng: &mut RandState) -> Result<bool, EngineError> {
        let l = self.spec.bit_len;
        let n = self.spec.n_strings;
        match self.corruption {
            RotCorruption::Honest => {
                if self.strings.is_none() {
                    self.strings = Some(rng.draw_bits(Endpoint::Func, n * l)?);
                    self.choice = Some(rng.draw_range(Endpoint::Func, n as u64)? as usize);
                }
            }
            RotCorruption::ChosenByA => {
                if self.strings.is_none() {
                    return Ok(false);
                }
                if self.choice.is_none() {
                    self.choice = Some(rng.draw_range(Endpoint::Func, n as u64)? as usize);
                }
            }
            RotCorruption::ChosenByB => {
                let (Some(c), Some(y)) = (self.choice, self.chosen_y.clone()) else {
                    return Ok(false);
                };
                if self.strings.is_none() {
                    let mut strings = rng.draw_bits(Endpoint::Func, n * l)?;
                    strings[c * l..(c + 1) * l].copy_from_slice(&y);
                    self.strings = Some(strings);
                }
            }
        }
        Ok(true)
    }
}

impl Functionality for RotFunctionality {
    fn provide(
        &mut self,
        from: Role,
        payload: &[u8],
        _rng: &mut RandState,
    ) -> Result<(), EngineError> {
        let reject = |msg: &str| EngineError::BadMessage(msg.into());
        let l = self.spec.bit_len;
        match (self.corruption, from) {
            (RotCorruption::ChosenByA, Role::A) => {
                if self.strings.is_some() {
                    return Err(reject("sender input already set"));
                }
                if payload.len() != self.spec.n_strings * l || payload.iter().any(|&b| b > 1) {
                    return Err(reject("corrupt sender must supply all strings as bits"));
                }
                self.strings = Some(payload.to_vec());
            }
            (RotCorruption::ChosenByB, Role::B) => {
                if self.choice.is_some() {
                    return Err(reject("receiver input already set"));
                }
                if payload.len() != 1 + l
                    || (payload[0] as usize) >= self.spec.n_strings
                    || payload[1..].iter().any(|&b| b > 1)
                {
                    return Err(reject("corrupt receiver must supply index byte plus bits"));
                }
                self.choice = Some(payload[0] as usize);
                self.chosen_y = Some(payload[1..].to_vec());
            }
            _ => return Err(reject("this instance takes no input from that side")),
        }
        Ok(())
    }

    fn poll(&mut self, from: Role, rng: &mut RandState) -> Result<Option<Message>, EngineError> {
        if !self.ensure_state(rng)? {
            return Ok(None);
        }
        let strings = self.strings.as_ref().expect("state ensured");
        let c = self.choice.expect("state ensured");
        let l = self.spec.bit_len;
        Ok(Some(match (from, self.corruption) {
            // a corrupt party already holds its values; empty acknowledgement
            (Role::A, RotCorruption::ChosenByA) => Vec::new(),
            (Role::B, RotCorruption::ChosenByB) => Vec::new(),
            (Role::A, _) => strings.clone(),
            (Role::B, _) => {
                let mut out = vec![c as u8];
                out.extend_from_slice(&strings[c * l..(c + 1) * l]);
                out
            }
        }))
    }
}

/// A corrupt receiver's freedom in the entropy-floor transfer: any pair
/// distribution whose joint min-entropy clears the floor.
pub enum AdversaryDist {
    /// Joint given outright as a distribution over 2n-bit tuples, first
    /// string first.
    Explicit { n: usize, dist: FiniteDist },
    /// Some of the 2n positions pinned to constants, the rest i.i.d. uniform.
    FixedBits { n: usize, pinned: Vec<(usize, u8)> },
    /// Image of k uniform bits under an arbitrary map.
    SubsetFunction {
        n: usize,
        k: usize,
        f: Box<dyn Fn(u64) -> (u64, u64) + Send + Sync>,
    },
}

impl fmt::Debug for AdversaryDist {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversaryDist::Explicit { n, dist } => fm
                .debug_struct("Explicit")
                .field("n", n)
                .field("support", &dist.outcomes().len())
                .finish(),
            AdversaryDist::FixedBits { n, pinned } => fm
                .debug_struct("FixedBits")
                .field("n", n)
                .field("pinned", pinned)
                .finish(),
            AdversaryDist::SubsetFunction { n, k, .. } => fm
                .debug_struct("SubsetFunction")
                .field("n", n)
                .field("k", k)
                .finish(),
        }
    }
}

impl AdversaryDist {
    pub fn explicit(n: usize, dist: FiniteDist) -> Result<Self, PrimError> {
        if n == 0 || n > 32 {
            return Err(PrimError::BadParam(format!("string length {n} outside 1..=32")));
        }
        for outcome in dist.outcomes() {
            if outcome.len() != 2 * n || outcome.iter().any(|&b| b > 1) {
                return Err(PrimError::BadInput(format!(
                    "outcomes must be bit tuples of arity {}",
                    2 * n
                )));
            }
        }
        Ok(AdversaryDist::Explicit { n, dist })
    }

    pub fn fixed_bits(n: usize, pinned: Vec<(usize, u8)>) -> Result<Self, PrimError> {
        if n == 0 || n > 32 {
            return Err(PrimError::BadParam(format!("string length {n} outside 1..=32")));
        }
        let mut seen = vec![false; 2 * n];
        for &(pos, bit) in &pinned {
            if pos >= 2 * n || bit > 1 {
                return Err(PrimError::BadInput(format!("pin ({pos}, {bit}) out of range")));
            }
            if seen[pos] {
                return Err(PrimError::BadInput(format!("position {pos} pinned twice")));
            }
            seen[pos] = true;
        }
        Ok(AdversaryDist::FixedBits { n, pinned })
    }

    pub fn subset_function<F>(n: usize, k: usize, f: F) -> Result<Self, PrimError>
    where
        F: Fn(u64) -> (u64, u64) + Send + Sync + 'static,
    {
        if n == 0 || n > 32 {
            return Err(PrimError::BadParam(format!("string length {n} outside 1..=32")));
        }
        if k > SUPPORT_BIT_CAP {
            return Err(PrimError::BadParam(format!(
                "source width {k} above enumeration cap {SUPPORT_BIT_CAP}"
            )));
        }
        Ok(AdversaryDist::SubsetFunction { n, k, f: Box::new(f) })
    }

    pub fn string_len(&self) -> usize {
        match self {
            AdversaryDist::Explicit { n, .. }
            | AdversaryDist::FixedBits { n, .. }
            | AdversaryDist::SubsetFunction { n, .. } => *n,
        }
    }

    fn check_pair(&self, pair: (u64, u64)) -> Result<(u64, u64), PrimError> {
        let n = self.string_len();
        if n < 64 && (pair.0 >> n != 0 || pair.1 >> n != 0) {
            return Err(PrimError::BadInput(format!(
                "pair ({}, {}) does not fit {n} bits",
                pair.0, pair.1
            )));
        }
        Ok(pair)
    }

    /// Joint min-entropy of the pair, exact per variant.
    pub fn entropy(&self) -> Result<f64, PrimError> {
        match self {
            AdversaryDist::Explicit { dist, .. } => Ok(min_entropy(dist)),
            AdversaryDist::FixedBits { n, pinned } => Ok((2 * n - pinned.len()) as f64),
            AdversaryDist::SubsetFunction { k, f, n } => {
                let mut counts: BTreeMap<(u64, u64), u64> = BTreeMap::new();
                for v in 0..(1u64 << k) {
                    let pair = f(v);
                    let n = *n;
                    if n < 64 && (pair.0 >> n != 0 || pair.1 >> n != 0) {
                        return Err(PrimError::BadInput("map output does not fit".into()));
                    }
                    *counts.entry(pair).or_insert(0) += 1;
                }
                let max = *counts.values().max().expect("nonempty domain");
                Ok(*k as f64 - (max as f64).log2())
            }
        }
    }

    /// Draws one pair. Explicit masses must be dyadic for tape randomness.
    pub fn sample(&self, rng: &mut RandState) -> Result<(u64, u64), PrimError> {
        match self {
            AdversaryDist::Explicit { n, dist } => {
                let masses = dist.masses();
                let idx = draw_categorical(rng, masses)?.min(masses.len() - 1);
                let outcome = &dist.outcomes()[idx];
                let bits: Vec<u8> = outcome.iter().map(|&b| b as u8).collect();
                self.check_pair((pack_bit_bytes(&bits[..*n]), pack_bit_bytes(&bits[*n..])))
            }
            AdversaryDist::FixedBits { n, pinned } => {
                let mut bits = vec![0u8; 2 * n];
                let mut is_pinned = vec![false; 2 * n];
                for &(pos, bit) in pinned {
                    bits[pos] = bit;
                    is_pinned[pos] = true;
                }
                for pos in 0..2 * n {
                    if !is_pinned[pos] {
                        bits[pos] = rng.draw_bit(Endpoint::Func)?;
                    }
                }
                Ok((pack_bit_bytes(&bits[..*n]), pack_bit_bytes(&bits[*n..])))
            }
            AdversaryDist::SubsetFunction { k, f, .. } => {
                let v = pack_bit_bytes(&rng.draw_bits(Endpoint::Func, *k)?);
                self.check_pair(f(v))
            }
        }
    }

    /// Full support with masses, for exact downstream accounting.
    pub fn support(&self) -> Result<Vec<(u64, u64, f64)>, PrimError> {
        match self {
            AdversaryDist::Explicit { n, dist } => dist
                .iter()
                .map(|(outcome, mass)| {
                    let bits: Vec<u8> = outcome.iter().map(|&b| b as u8).collect();
                    let pair =
                        self.check_pair((pack_bit_bytes(&bits[..*n]), pack_bit_bytes(&bits[*n..])))?;
                    Ok((pair.0, pair.1, mass))
                })
                .collect(),
            AdversaryDist::FixedBits { n, pinned } => {
                let free = 2 * n - pinned.len();
                if free > SUPPORT_BIT_CAP {
                    return Err(PrimError::BadParam(format!(
                        "support of 2^{free} entries above cap"
                    )));
                }
                let mut template = vec![0u8; 2 * n];
                let mut is_pinned = vec![false; 2 * n];
                for &(pos, bit) in pinned {
                    template[pos] = bit;
                    is_pinned[pos] = true;
                }
                let free_pos: Vec<usize> = (0..2 * n).filter(|&i| !is_pinned[i]).collect();
                let mass = 1.0 / (1u64 << free) as f64;
                let mut out = Vec::with_capacity(1 << free);
                for v in 0..(1u64 << free) {
                    let mut bits = template.clone();
                    for (j, &pos) in free_pos.iter().enumerate() {
                        bits[pos] = ((v >> (free - 1 - j)) & 1) as u8;
                    }
                    out.push((pack_bit_bytes(&bits[..*n]), pack_bit_bytes(&bits[*n..]), mass));
                }
                Ok(out)
            }
            AdversaryDist::SubsetFunction { k, f, .. } => {
                let mut counts: BTreeMap<(u64, u64), u64> = BTreeMap::new();
                for v in 0..(1u64 << k) {
                    *counts.entry(self.check_pair(f(v))?).or_insert(0) += 1;
                }
                let total = (1u64 << k) as f64;
                Ok(counts
                    .into_iter()
                    .map(|((x0, x1), c)| (x0, x1, c as f64 / total))
                    .collect())
            }
        }
    }
}

/// Shape of the entropy-floor randomized transfer: two strings of bit_len
/// bits whose joint min-entropy may sink as low as alpha under a corrupt
/// receiver.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct UotSpec {
    pub bit_len: usize,
    pub alpha: f64,
}

impl UotSpec {
    pub fn new(bit_len: usize, alpha: f64) -> Result<Self, PrimError> {
        if bit_len == 0 || bit_len > 32 {
            return Err(PrimError::BadParam(format!(
                "bit_len = {bit_len} outside 1..=32"
            )));
        }
        if !(alpha > 0.0) || alpha > 2.0 * bit_len as f64 + 1e-9 {
            return Err(PrimError::BadParam(format!(
                "alpha = {alpha} outside (0, {}]",
                2 * bit_len
            )));
        }
        Ok(UotSpec { bit_len, alpha })
    }
}

pub enum UotMode {
    Honest,
    /// Corrupt receiver: the pair comes from its chosen distribution and the
    /// receiver port gets nothing, having bypassed honest use.
    AdversarialB(AdversaryDist),
}

/// Randomized transfer with an entropy floor instead of exact uniformity.
/// Honest runs equal the randomized transfer on bit_len-bit strings. The
/// adversarial mode checks the floor at construction and rejects
/// distributions below it.
pub struct UotFunctionality {
    spec: UotSpec,
    mode: UotMode,
    pair: Option<(u64, u64)>,
    choice: Option<u8>,
}

impl UotFunctionality {
    pub fn new(spec: UotSpec, mode: UotMode) -> Result<Self, PrimError> {
        if let UotMode::AdversarialB(dist) = &mode {
            if dist.string_len() != spec.bit_len {
                return Err(PrimError::BadParam(format!(
                    "adversary strings are {} bits, spec says {}",
                    dist.string_len(),
                    spec.bit_len
                )));
            }
            let have = dist.entropy()?;
            if have + 1e-9 < spec.alpha {
                return Err(PrimError::EntropyTooLow {
                    have,
                    need: spec.alpha,
                });
            }
        }
        Ok(UotFunctionality {
            spec,
            mode,
            pair: None,
            choice: None,
        })
    }

    fn ensure_state(&mut self, rng: &mut RandState) -> Result<(), EngineError> {
        if self.pair.is_some() {
            return Ok(());
        }
        let n = self.spec.bit_len;
        match &self.mode {
            UotMode::Honest => {
                let x0 = pack_bit_bytes(&rng.draw_bits(Endpoint::Func, n)?);
                let x1 = pack_bit_bytes(&rng.draw_bits(Endpoint::Func, n)?);
                self.pair = Some((x0, x1));
                self.choice = Some(rng.draw_bit(Endpoint::Func)?);
            }
            UotMode::AdversarialB(dist) => {
                let pair = dist
                    .sample(rng)
                    .map_err(|e| EngineError::BadMessage(format!("adversary sampling: {e}")))?;
                self.pair = Some(pair);
            }
        }
        Ok(())
    }
}

impl Functionality for UotFunctionality {
    fn provide(
        &mut self,
        _from: Role,
        _payload: &[u8],
        _rng: &mut RandState,
    ) -> Result<(), EngineError> {
        Err(EngineError::BadMessage(
            "entropy-floor transfer takes no runtime inputs".into(),
        ))
    }

    fn poll(&mut self, from: Role, rng: &mut RandState) -> Result<Option<Message>, EngineError> {
        self.ensure_state(rng)?;
        let (x0, x1) = self.pair.expect("state ensured");
        let n = self.spec.bit_len;
        Ok(Some(match (from, &self.mode) {
            (Role::A, _) => {
                let mut out = unpack_bit_bytes(x0, n);
                out.extend(unpack_bit_bytes(x1, n));
                out
            }
            (Role::B, UotMode::Honest) => {
                let c = self.choice.expect("state ensured");
                let mut out = vec![c];
                out.extend(unpack_bit_bytes(if c == 0 { x0 } else { x1 }, n));
                out
            }
            (Role::B, UotMode::AdversarialB(_)) => Vec::new(),
        }))
    }
}
