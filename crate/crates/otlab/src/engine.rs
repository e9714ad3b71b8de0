//! Deterministic two-party protocol runtime.
//!
//! Parties are step functions driven in strict alternation; they talk through
//! a message channel, call one-shot functionality slots, and draw randomness
//! from either seeded per-endpoint streams or one explicit bit tape. The tape
//! mode is what makes exact distribution oracles possible: `enumerate_runs`
//! exhausts every tape and weights each run uniformly.

use std::collections::VecDeque;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::prob::{FiniteDist, Outcome, ProbError};

/// Ceiling on tape width for exhaustive enumeration (2^bits runs).
pub const TAPE_BIT_CAP: usize = 24;

const STEP_CAP: usize = 100_000;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("protocol deadlock: both parties waiting, nothing in flight")]
    Deadlock,
    #[error("one-shot functionality used twice (slot {slot}, {side:?} side)")]
    OneShotReuse { slot: usize, side: Role },
    #[error("no functionality in slot {0}")]
    UnknownSlot(usize),
    #[error("random tape exhausted at bit {0}")]
    TapeExhausted(usize),
    #[error("draw over {0} values needs a power of two in tape mode")]
    NonDyadicDraw(u64),
    #[error("continuous draw unavailable in tape mode")]
    ContinuousDrawInTape,
    #[error("step budget exhausted, protocol does not terminate")]
    RunawayProtocol,
    #[error("malformed message: {0}")]
    BadMessage(String),
    #[error("enumeration over {bits} tape bits exceeds cap {cap}")]
    BitCapExceeded { bits: usize, cap: usize },
    #[error("need at least one trial")]
    NoTrials,
    #[error("malformed transcript line {0:?}")]
    BadTranscriptLine(String),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    A,
    B,
}

impl Role {
    pub fn other(self) -> Role {
        match self {
            Role::A => Role::B,
            Role::B => Role::A,
        }
    }

    fn index(self) -> usize {
        match self {
            Role::A => 0,
            Role::B => 1,
        }
    }
}

/// Messages are byte strings; bits travel as 0/1 bytes. The empty message is
/// a real notification (the protocol-level "nothing but a poke") and shows up
/// in the log like any other message.
pub type Message = Vec<u8>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    AtoB,
    BtoA,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptLine {
    pub dir: Direction,
    pub step: usize,
    pub payload: Message,
}

/// One recorded item of a party's semi-honest view: everything the party
/// touches (randomness, channel traffic, slot traffic, output) lands here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewItem {
    pub tag: String,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub lines: Vec<TranscriptLine>,
    pub view_a: Vec<ViewItem>,
    pub view_b: Vec<ViewItem>,
    pub output_a: Option<Vec<u8>>,
    pub output_b: Option<Vec<u8>>,
}

impl Transcript {
    pub fn view(&self, role: Role) -> &[ViewItem] {
        match role {
            Role::A => &self.view_a,
            Role::B => &self.view_b,
        }
    }

    pub fn output(&self, role: Role) -> Option<&[u8]> {
        match role {
            Role::A => self.output_a.as_deref(),
            Role::B => self.output_b.as_deref(),
        }
    }
}

/// Randomness for one run: independent seeded streams per endpoint, or one
/// shared bit tape consumed in draw order.
#[derive(Debug, Clone)]
pub enum RandSource {
    Seeded(u64),
    Tape(Vec<u8>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    PartyA,
    PartyB,
    Func,
}

pub enum RandState {
    Seeded { streams: [ChaCha20Rng; 3] },
    Tape { bits: Vec<u8>, pos: usize },
}

impl RandState {
    pub fn new(source: RandSource) -> Self {
        match source {
            RandSource::Seeded(seed) => {
                let mk = |stream: u64| {
                    let mut rng = ChaCha20Rng::seed_from_u64(seed);
                    rng.set_stream(stream);
                    rng
                };
                RandState::Seeded {
                    streams: [mk(1), mk(2), mk(3)],
                }
            }
            RandSource::Tape(bits) => RandState::Tape { bits, pos: 0 },
        }
    }

    pub fn draw_bit(&mut self, who: Endpoint) -> Result<u8, EngineError> {
        match self {
            RandState::Seeded { streams } => {
                Ok((streams[who as usize].next_u32() & 1) as u8)
            }
            RandState::Tape { bits, pos } => {
                let bit = *bits.get(*pos).ok_or(EngineError::TapeExhausted(*pos))?;
                *pos += 1;
                Ok(bit & 1)
            }
        }
    }

    pub fn draw_bits(&mut self, who: Endpoint, n: usize) -> Result<Vec<u8>, EngineError> {
        (0..n).map(|_| self.draw_bit(who)).collect()
    }

    /// Uniform in [0,1) with 53-bit resolution. Only meaningful for seeded
    /// randomness; a tape holds finitely many bits, so callers that need
    /// exact enumeration must stick to dyadic draws.
    pub fn draw_unit(&mut self, who: Endpoint) -> Result<f64, EngineError> {
        match self {
            RandState::Seeded { streams } => {
                let v = streams[who as usize].next_u64() >> 11;
                Ok(v as f64 / (1u64 << 53) as f64)
            }
            RandState::Tape { .. } => Err(EngineError::ContinuousDrawInTape),
        }
    }

    /// Uniform value in 0..n. Tape mode requires n to be a power of two so
    /// every tape stays equally likely.
    pub fn draw_range(&mut self, who: Endpoint, n: u64) -> Result<u64, EngineError> {
        match self {
            RandState::Seeded { streams } => Ok(streams[who as usize].gen_range(0..n)),
            RandState::Tape { .. } => {
                if !n.is_power_of_two() {
                    return Err(EngineError::NonDyadicDraw(n));
                }
                let mut v = 0u64;
                for _ in 0..n.trailing_zeros() {
                    v = (v << 1) | self.draw_bit(who)? as u64;
                }
                Ok(v)
            }
        }
    }
}

/// A pluggable ideal functionality. Ports are split: `provide` feeds a
/// party's input, `poll` asks for that party's output (`None` while the
/// counterpart input is still missing). The session enforces one-shot use.
pub trait Functionality {
    fn provide(
        &mut self,
        from: Role,
        payload: &[u8],
        rng: &mut RandState,
    ) -> Result<(), EngineError>;

    fn poll(&mut self, from: Role, rng: &mut RandState) -> Result<Option<Message>, EngineError>;
}

struct SlotState {
    f: Box<dyn Functionality>,
    provided: [bool; 2],
    delivered: [bool; 2],
}

/// What a party reports after one scheduling step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    /// More local work pending; step again immediately.
    Continue,
    /// Blocked on the peer (message or slot output).
    Waiting,
    /// Output set; never stepped again.
    Done,
}

pub trait Party {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> Result<StepOutcome, EngineError>;
}

impl<F> Party for F
where
    F: FnMut(&mut Ctx<'_>) -> Result<StepOutcome, EngineError>,
{
    fn step(&mut self, ctx: &mut Ctx<'_>) -> Result<StepOutcome, EngineError> {
        self(ctx)
    }
}

struct SessionCore {
    inboxes: [VecDeque<Message>; 2],
    slots: Vec<SlotState>,
    rng: RandState,
    lines: Vec<TranscriptLine>,
    views: [Vec<ViewItem>; 2],
    outputs: [Option<Vec<u8>>; 2],
    progress: u64,
}

/// A party's handle onto the session during its step.
pub struct Ctx<'s> {
    core: &'s mut SessionCore,
    role: Role,
}

fn hex_of(data: &[u8]) -> String {
    if data.is_empty() {
        "-".into()
    } else {
        hex::encode(data)
    }
}

impl<'s> Ctx<'s> {
    pub fn role(&self) -> Role {
        self.role
    }

    /// Pops the next delivered message, recording it in this party's view.
    pub fn recv(&mut self) -> Option<Message> {
        let msg = self.core.inboxes[self.role.index()].pop_front()?;
        self.core.views[self.role.index()].push(ViewItem {
            tag: "recv".into(),
            data: msg.clone(),
        });
        Some(msg)
    }

    pub fn send(&mut self, payload: Message) {
        let dir = match self.role {
            Role::A => Direction::AtoB,
            Role::B => Direction::BtoA,
        };
        let step = self.core.lines.len();
        self.core.views[self.role.index()].push(ViewItem {
            tag: "send".into(),
            data: payload.clone(),
        });
        self.core.inboxes[self.role.other().index()].push_back(payload.clone());
        self.core.lines.push(TranscriptLine { dir, step, payload });
        self.core.progress += 1;
    }

    fn endpoint(&self) -> Endpoint {
        match self.role {
            Role::A => Endpoint::PartyA,
            Role::B => Endpoint::PartyB,
        }
    }

    pub fn rand_bit(&mut self) -> Result<u8, EngineError> {
        let bit = self.core.rng.draw_bit(self.endpoint())?;
        self.core.views[self.role.index()].push(ViewItem {
            tag: "rand".into(),
            data: vec![bit],
        });
        Ok(bit)
    }

    pub fn rand_bits(&mut self, n: usize) -> Result<Vec<u8>, EngineError> {
        let bits = self.core.rng.draw_bits(self.endpoint(), n)?;
        self.core.views[self.role.index()].push(ViewItem {
            tag: "rand".into(),
            data: bits.clone(),
        });
        Ok(bits)
    }

    pub fn rand_range(&mut self, n: u64) -> Result<u64, EngineError> {
        let v = self.core.rng.draw_range(self.endpoint(), n)?;
        self.core.views[self.role.index()].push(ViewItem {
            tag: "rand".into(),
            data: vec![v as u8],
        });
        Ok(v)
    }

    /// Feeds this party's input into a slot; errors on reuse.
    pub fn slot_provide(&mut self, slot: usize, payload: &[u8]) -> Result<(), EngineError> {
        let role = self.role;
        let state = self
            .core
            .slots
            .get_mut(slot)
            .ok_or(EngineError::UnknownSlot(slot))?;
        if state.provided[role.index()] {
            return Err(EngineError::OneShotReuse { slot, side: role });
        }
        state.provided[role.index()] = true;
        state.f.provide(role, payload, &mut self.core.rng)?;
        self.core.views[role.index()].push(ViewItem {
            tag: format!("slot{slot}:in"),
            data: payload.to_vec(),
        });
        self.core.progress += 1;
        Ok(())
    }

    /// Asks a slot for this party's output. `None` means not ready yet;
    /// a delivered output cannot be asked for twice.
    pub fn slot_poll(&mut self, slot: usize) -> Result<Option<Message>, EngineError> {
        let role = self.role;
        let state = self
            .core
            .slots
            .get_mut(slot)
            .ok_or(EngineError::UnknownSlot(slot))?;
        if state.delivered[role.index()] {
            return Err(EngineError::OneShotReuse { slot, side: role });
        }
        match state.f.poll(role, &mut self.core.rng)? {
            None => Ok(None),
            Some(msg) => {
                state.delivered[role.index()] = true;
                self.core.views[role.index()].push(ViewItem {
                    tag: format!("slot{slot}:out"),
                    data: msg.clone(),
                });
                self.core.progress += 1;
                Ok(Some(msg))
            }
        }
    }

    /// Adds an explicit record (an input choice, a derived value) to this
    /// party's view.
    pub fn record(&mut self, tag: &str, data: &[u8]) {
        self.core.views[self.role.index()].push(ViewItem {
            tag: tag.into(),
            data: data.to_vec(),
        });
    }

    pub fn output(&mut self, data: Vec<u8>) {
        self.core.outputs[self.role.index()] = Some(data);
    }
}

/// Everything needed to run one session: the two parties and the slot table.
pub struct SessionParts {
    pub a: Box<dyn Party>,
    pub b: Box<dyn Party>,
    pub slots: Vec<Box<dyn Functionality>>,
}

/// Drives a session to completion. Scheduling is strict alternation starting
/// with A; a party runs until it waits or finishes. The run fails if both
/// parties wait with nothing in flight and no slot movement.
pub fn run_session(parts: SessionParts, rand: RandSource) -> Result<Transcript, EngineError> {
    let mut core = SessionCore {
        inboxes: [VecDeque::new(), VecDeque::new()],
        slots: parts
            .slots
            .into_iter()
            .map(|f| SlotState {
                f,
                provided: [false; 2],
                delivered: [false; 2],
            })
            .collect(),
        rng: RandState::new(rand),
        lines: Vec::new(),
        views: [Vec::new(), Vec::new()],
        outputs: [None, None],
        progress: 0,
    };
    let mut parties: [Box<dyn Party>; 2] = [parts.a, parts.b];
    let mut done = [false, false];
    // progress stamp at each party's last blocking step
    let mut stamp = [u64::MAX, u64::MAX];
    let mut current = Role::A;
    let mut steps = 0usize;
    while !(done[0] && done[1]) {
        let idx = current.index();
        if done[idx] {
            current = current.other();
            continue;
        }
        let runnable =
            stamp[idx] != core.progress || !core.inboxes[idx].is_empty() || stamp[idx] == u64::MAX;
        if !runnable {
            let other = current.other().index();
            let peer_blocked = done[other]
                || (stamp[other] == core.progress && core.inboxes[other].is_empty());
            if peer_blocked {
                return Err(EngineError::Deadlock);
            }
            current = current.other();
            continue;
        }
        loop {
            steps += 1;
            if steps > STEP_CAP {
                return Err(EngineError::RunawayProtocol);
            }
            let mut ctx = Ctx {
                core: &mut core,
                role: current,
            };
            match parties[idx].step(&mut ctx)? {
                StepOutcome::Continue => continue,
                StepOutcome::Waiting => {
                    stamp[idx] = core.progress;
                    break;
                }
                StepOutcome::Done => {
                    done[idx] = true;
                    break;
                }
            }
        }
        current = current.other();
    }
    let [view_a, view_b] = core.views;
    let [output_a, output_b] = core.outputs;
    Ok(Transcript {
        lines: core.lines,
        view_a,
        view_b,
        output_a,
        output_b,
    })
}

/// Exhausts every random tape of the given width and aggregates a projection
/// of each transcript into an exact (dyadic) distribution.
pub fn enumerate_runs<B, P>(
    build: B,
    bits: usize,
    project: P,
) -> Result<FiniteDist, EngineError>
where
    B: Fn() -> SessionParts,
    P: Fn(&Transcript) -> Outcome,
{
    if bits > TAPE_BIT_CAP {
        return Err(EngineError::BitCapExceeded {
            bits,
            cap: TAPE_BIT_CAP,
        });
    }
    let mut counts: std::collections::BTreeMap<Outcome, u64> = std::collections::BTreeMap::new();
    for tape_value in 0..(1u64 << bits) {
        let tape: Vec<u8> = (0..bits)
            .map(|i| ((tape_value >> (bits - 1 - i)) & 1) as u8)
            .collect();
        let transcript = run_session(build(), RandSource::Tape(tape))?;
        *counts.entry(project(&transcript)).or_insert(0) += 1;
    }
    Ok(FiniteDist::from_counts(counts)?)
}

// splitmix64, the standard 64-bit mix; used to spread a master seed into
// independent per-trial seeds in a way that does not depend on trial order.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed for Monte Carlo runs; pure in (master, index).
pub fn trial_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// Runs independent seeded sessions and collects one projected outcome per
/// trial. Trial i uses `trial_seed(master, i)`, so any sharding that covers
/// each index exactly once reproduces the same multiset.
pub fn monte_carlo_runs<B, P>(
    build: B,
    trials: u64,
    master_seed: u64,
    project: P,
) -> Result<Vec<Outcome>, EngineError>
where
    B: Fn() -> SessionParts,
    P: Fn(&Transcript) -> Outcome,
{
    if trials == 0 {
        return Err(EngineError::NoTrials);
    }
    let mut out = Vec::with_capacity(trials as usize);
    for i in 0..trials {
        let transcript = run_session(build(), RandSource::Seeded(trial_seed(master_seed, i)))?;
        out.push(project(&transcript));
    }
    Ok(out)
}

/// One line per message: direction, step index, hex payload ("-" when empty).
pub fn serialize_transcript(t: &Transcript) -> String {
    let mut s = String::new();
    for line in &t.lines {
        let dir = match line.dir {
            Direction::AtoB => "A->B",
            Direction::BtoA => "B->A",
        };
        s.push_str(&format!("{dir} {} {}\n", line.step, hex_of(&line.payload)));
    }
    s
}

pub fn parse_transcript_line(s: &str) -> Result<TranscriptLine, EngineError> {
    let bad = || EngineError::BadTranscriptLine(s.to_string());
    let mut parts = s.split_whitespace();
    let dir = match parts.next().ok_or_else(bad)? {
        "A->B" => Direction::AtoB,
        "B->A" => Direction::BtoA,
        _ => return Err(bad()),
    };
    let step: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let payload = match parts.next().ok_or_else(bad)? {
        "-" => Vec::new(),
        h => hex::decode(h).map_err(|_| bad())?,
    };
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok(TranscriptLine { dir, step, payload })
}

pub fn parse_transcript(s: &str) -> Result<Vec<TranscriptLine>, EngineError> {
    s.lines()
        .filter(|l| !l.trim().is_empty())
        .map(parse_transcript_line)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// A sends one random bit, B echoes it back, both output it.
    fn echo_parts() -> SessionParts {
        let mut sent = false;
        let a = move |ctx: &mut Ctx<'_>| {
            if !sent {
                let bit = ctx.rand_bit()?;
                ctx.send(vec![bit]);
                sent = true;
                return Ok(StepOutcome::Waiting);
            }
            match ctx.recv() {
                Some(msg) => {
                    ctx.output(msg);
                    Ok(StepOutcome::Done)
                }
                None => Ok(StepOutcome::Waiting),
            }
        };
        let b = move |ctx: &mut Ctx<'_>| match ctx.recv() {
            Some(msg) => {
                ctx.send(msg.clone());
                ctx.output(msg);
                Ok(StepOutcome::Done)
            }
            None => Ok(StepOutcome::Waiting),
        };
        SessionParts {
            a: Box::new(a),
            b: Box::new(b),
            slots: vec![],
        }
    }

    #[test]
    fn echo_protocol_logs_two_messages() {
        let t = run_session(echo_parts(), RandSource::Seeded(11)).unwrap();
        assert_eq!(t.lines.len(), 2);
        assert_eq!(t.lines[0].dir, Direction::AtoB);
        assert_eq!(t.lines[1].dir, Direction::BtoA);
        assert_eq!(t.output_a, t.output_b);
    }

    #[test]
    fn same_seed_gives_identical_transcripts() {
        let t1 = run_session(echo_parts(), RandSource::Seeded(42)).unwrap();
        let t2 = run_session(echo_parts(), RandSource::Seeded(42)).unwrap();
        assert_eq!(serialize_transcript(&t1), serialize_transcript(&t2));
        assert_eq!(t1, t2);
    }

    #[test]
    fn fair_coin_enumerates_to_a_half() {
        let dist = enumerate_runs(
            echo_parts,
            1,
            |t| vec![t.output_b.as_ref().unwrap()[0] as u32],
        )
        .unwrap();
        assert_eq!(dist.mass_of(&[0]), 0.5);
        assert_eq!(dist.mass_of(&[1]), 0.5);
    }

    #[test]
    fn enumeration_respects_the_bit_cap() {
        assert!(matches!(
            enumerate_runs(echo_parts, 30, |_| vec![0]),
            Err(EngineError::BitCapExceeded { bits: 30, .. })
        ));
    }

    #[test]
    fn tape_exhaustion_is_an_error() {
        assert!(matches!(
            run_session(echo_parts(), RandSource::Tape(vec![])),
            Err(EngineError::TapeExhausted(0))
        ));
    }

    #[test]
    fn non_dyadic_tape_draw_is_an_error() {
        let a = |ctx: &mut Ctx<'_>| {
            ctx.rand_range(3)?;
            ctx.output(vec![]);
            Ok(StepOutcome::Done)
        };
        let b = |ctx: &mut Ctx<'_>| {
            ctx.output(vec![]);
            Ok(StepOutcome::Done)
        };
        let parts = SessionParts {
            a: Box::new(a),
            b: Box::new(b),
            slots: vec![],
        };
        assert!(matches!(
            run_session(parts, RandSource::Tape(vec![0, 1])),
            Err(EngineError::NonDyadicDraw(3))
        ));
    }

    #[test]
    fn mutual_waiting_deadlocks() {
        let wait = |ctx: &mut Ctx<'_>| match ctx.recv() {
            Some(_) => Ok(StepOutcome::Done),
            None => Ok(StepOutcome::Waiting),
        };
        let parts = SessionParts {
            a: Box::new(wait),
            b: Box::new(wait),
            slots: vec![],
        };
        assert!(matches!(
            run_session(parts, RandSource::Seeded(0)),
            Err(EngineError::Deadlock)
        ));
    }

    /// A trivial one-shot slot: A provides a byte, B polls it out.
    struct Mailbox {
        stored: Option<Vec<u8>>,
    }

    impl Functionality for Mailbox {
        fn provide(
            &mut self,
            _from: Role,
            payload: &[u8],
            _rng: &mut RandState,
        ) -> Result<(), EngineError> {
            self.stored = Some(payload.to_vec());
            Ok(())
        }

        fn poll(
            &mut self,
            _from: Role,
            _rng: &mut RandState,
        ) -> Result<Option<Message>, EngineError> {
            Ok(self.stored.clone())
        }
    }

    #[test]
    fn slot_delivery_works_and_reuse_fails() {
        let a = |ctx: &mut Ctx<'_>| {
            ctx.slot_provide(0, &[7])?;
            ctx.output(vec![]);
            Ok(StepOutcome::Done)
        };
        let b = |ctx: &mut Ctx<'_>| match ctx.slot_poll(0)? {
            Some(v) => {
                ctx.output(v);
                Ok(StepOutcome::Done)
            }
            None => Ok(StepOutcome::Waiting),
        };
        let parts = SessionParts {
            a: Box::new(a),
            b: Box::new(b),
            slots: vec![Box::new(Mailbox { stored: None })],
        };
        let t = run_session(parts, RandSource::Seeded(0)).unwrap();
        assert_eq!(t.output_b, Some(vec![7]));

        // a second poll after delivery must raise
        let a2 = |ctx: &mut Ctx<'_>| {
            ctx.slot_provide(0, &[7])?;
            ctx.output(vec![]);
            Ok(StepOutcome::Done)
        };
        let mut polled = false;
        let b2 = move |ctx: &mut Ctx<'_>| {
            if !polled {
                if ctx.slot_poll(0)?.is_none() {
                    return Ok(StepOutcome::Waiting);
                }
                polled = true;
                return Ok(StepOutcome::Continue);
            }
            ctx.slot_poll(0)?;
            ctx.output(vec![]);
            Ok(StepOutcome::Done)
        };
        let parts = SessionParts {
            a: Box::new(a2),
            b: Box::new(b2),
            slots: vec![Box::new(Mailbox { stored: None })],
        };
        assert!(matches!(
            run_session(parts, RandSource::Seeded(0)),
            Err(EngineError::OneShotReuse { slot: 0, side: Role::B })
        ));
    }

    #[test]
    fn double_provide_fails() {
        let a = |ctx: &mut Ctx<'_>| {
            ctx.slot_provide(0, &[1])?;
            ctx.slot_provide(0, &[2])?;
            ctx.output(vec![]);
            Ok(StepOutcome::Done)
        };
        let b = |ctx: &mut Ctx<'_>| {
            ctx.output(vec![]);
            Ok(StepOutcome::Done)
        };
        let parts = SessionParts {
            a: Box::new(a),
            b: Box::new(b),
            slots: vec![Box::new(Mailbox { stored: None })],
        };
        assert!(matches!(
            run_session(parts, RandSource::Seeded(0)),
            Err(EngineError::OneShotReuse { slot: 0, side: Role::A })
        ));
    }

    #[test]
    fn every_message_lands_in_both_touching_views() {
        let t = run_session(echo_parts(), RandSource::Seeded(5)).unwrap();
        for line in &t.lines {
            let (sender, receiver) = match line.dir {
                Direction::AtoB => (&t.view_a, &t.view_b),
                Direction::BtoA => (&t.view_b, &t.view_a),
            };
            assert!(sender
                .iter()
                .any(|v| v.tag == "send" && v.data == line.payload));
            assert!(receiver
                .iter()
                .any(|v| v.tag == "recv" && v.data == line.payload));
        }
    }

    #[test]
    fn monte_carlo_rejects_zero_trials() {
        assert!(matches!(
            monte_carlo_runs(echo_parts, 0, 1, |_| vec![]),
            Err(EngineError::NoTrials)
        ));
    }

    #[test]
    fn monte_carlo_is_reproducible_and_seed_sensitive() {
        let project = |t: &Transcript| vec![t.output_b.as_ref().unwrap()[0] as u32];
        let one = monte_carlo_runs(echo_parts, 64, 9, project).unwrap();
        let two = monte_carlo_runs(echo_parts, 64, 9, project).unwrap();
        assert_eq!(one, two);
        let other = monte_carlo_runs(echo_parts, 64, 10, project).unwrap();
        assert_ne!(one, other);
        // both seeds give roughly fair coins
        for sample in [&one, &other] {
            let ones: usize = sample.iter().filter(|o| o[0] == 1).count();
            assert!(ones > 10 && ones < 54);
        }
    }

    #[test]
    fn transcript_lines_round_trip() {
        let t = run_session(echo_parts(), RandSource::Seeded(3)).unwrap();
        let text = serialize_transcript(&t);
        let parsed = parse_transcript(&text).unwrap();
        assert_eq!(parsed, t.lines);
    }

    #[test]
    fn transcript_parser_rejects_junk() {
        for bad in ["X->Y 0 00", "A->B x 00", "A->B 0 zz", "A->B 0 00 extra", ""] {
            assert!(parse_transcript_line(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn empty_payload_serializes_as_dash() {
        let line = TranscriptLine {
            dir: Direction::AtoB,
            step: 0,
            payload: vec![],
        };
        let t = Transcript {
            lines: vec![line.clone()],
            view_a: vec![],
            view_b: vec![],
            output_a: None,
            output_b: None,
        };
        let text = serialize_transcript(&t);
        assert_eq!(text, "A->B 0 -\n");
        assert_eq!(parse_transcript(&text).unwrap(), vec![line]);
    }

    proptest! {
        // randomized ping-pong protocols: same seed, same transcript
        #[test]
        fn determinism_over_random_protocols(
            rounds in 1usize..6,
            payload_bits in 1usize..5,
            seed in any::<u64>(),
        ) {
            let build = move || {
                let mut left = rounds;
                let a = move |ctx: &mut Ctx<'_>| {
                    if left == 0 {
                        ctx.output(vec![]);
                        return Ok(StepOutcome::Done);
                    }
                    if left < rounds && ctx.recv().is_none() {
                        return Ok(StepOutcome::Waiting);
                    }
                    let bits = ctx.rand_bits(payload_bits)?;
                    ctx.send(bits);
                    left -= 1;
                    Ok(StepOutcome::Waiting)
                };
                let mut seen = 0usize;
                let b = move |ctx: &mut Ctx<'_>| {
                    while let Some(msg) = ctx.recv() {
                        seen += 1;
                        ctx.send(msg);
                    }
                    if seen == rounds {
                        ctx.output(vec![seen as u8]);
                        Ok(StepOutcome::Done)
                    } else {
                        Ok(StepOutcome::Waiting)
                    }
                };
                SessionParts { a: Box::new(a), b: Box::new(b), slots: vec![] }
            };
            let t1 = run_session(build(), RandSource::Seeded(seed)).unwrap();
            let t2 = run_session(build(), RandSource::Seeded(seed)).unwrap();
            prop_assert_eq!(&t1, &t2);
            prop_assert_eq!(t1.lines.len(), 2 * rounds);
        }
    }
}
