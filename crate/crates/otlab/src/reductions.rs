//! The reduction protocols: perfect conversions between chosen-input and
//! randomized transfers, direction reversal, hashing a high-entropy pair
//! down to a short randomized transfer, and the three XOR-composition
//! protocols that trade instances for smaller choice leakage, message
//! leakage, or error rate.
//!
//! Every composition exists twice: as exact algebra on pre-sampled
//! [`WotSample`] values (the measurement path, where each side's knowledge
//! is tracked explicitly and every error indicator counts as known, the
//! conservative reading), and as live party pairs exchanging real messages
//! over the session engine (the transcript path). Both paths consume
//! randomness in the same order, so on a fixed tape they produce identical
//! values.

use thiserror::Error;

use crate::engine::{
    Ctx, EngineError, Functionality, Message, Party, RandState, Role, SessionParts, StepOutcome,
    Transcript,
};
use crate::hashing::{HashError, ToeplitzHash};
use crate::primitives::{
    pack_bit_bytes, simwot_sample, event_model_wot, OtFunctionality, OtSpec, PrimError,
    RotCorruption, RotFunctionality, UotFunctionality, UotMode, UotSpec, View, WotSample,
};

#[derive(Debug, Error)]
pub enum RedError {
    #[error("expected {expected} input samples, got {got}")]
    BadArity { expected: usize, got: usize },
    #[error("error-rate reduction needs an odd count, got {0}")]
    OddArityRequired(usize),
    #[error("bad step: {0}")]
    BadStep(String),
    #[error("hash length {ell} exceeds admissible limit {limit:.4}")]
    HashTooLong { ell: usize, limit: f64 },
    #[error(transparent)]
    Prim(#[from] PrimError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Hash(#[from] HashError),
}

/// Reverses a transfer's direction by pure relabeling: the receiver's pair
/// (c, y) becomes the new string pair (y, y xor c), the sender's pair turns
/// into choice x0 xor x1 and value x0. No message flows and the error
/// indicator is preserved; leakage swaps sides, so parameters (p, q) swap.
pub fn rotor_sample(s: &WotSample) -> WotSample {
    let e = s.e();
    let new_c = s.x0 ^ s.x1;
    let out = WotSample {
        x0: s.y,
        x1: s.y ^ s.c,
        c: new_c,
        y: s.x0,
        // the old receiver's knowledge of the unchosen string resolves the
        // new choice; the old sender's knowledge of the choice resolves the
        // new unchosen string (error indicators count as known)
        u: match s.v {
            View::Known(b) => View::Known(b ^ s.y ^ e),
            View::Nothing => View::Nothing,
        },
        v: match s.u {
            View::Known(c) => {
                debug_assert_eq!(c, s.c);
                let chosen = if c == 0 { s.x0 } else { s.x1 };
                View::Known(chosen ^ e ^ ((1 ^ new_c) & c))
            }
            View::Nothing => View::Nothing,
        },
    };
    debug_assert_eq!(out.e(), e);
    if let View::Known(b) = out.u {
        debug_assert_eq!(b, out.c);
    }
    if let View::Known(b) = out.v {
        debug_assert_eq!(b, out.other());
    }
    out
}

fn pick(s: &WotSample, j: u8) -> u8 {
    if j == 0 {
        s.x0
    } else {
        s.x1
    }
}

/// XOR-composes n instances to shrink choice leakage: the receiver aligns
/// every instance choice with its last one by publishing differences d_i,
/// the sender XORs the aligned rows into one pair, the receiver XORs its
/// received bits. The sender resolves the composed choice as soon as any
/// single instance leaked its choice (so p grows toward 1 - (1-p)^n), while
/// the receiver must learn every unchosen bit to assemble the composed one
/// (q shrinks to q^n). Errors XOR.
pub fn reduce_choice_leak(inputs: &[WotSample]) -> Result<WotSample, RedError> {
    let n = inputs.len();
    if n == 0 {
        return Err(RedError::BadArity {
            expected: 1,
            got: 0,
        });
    }
    let c = inputs[n - 1].c;
    // d_i = c xor c_i, with d_{n-1} pinned to 0
    let d: Vec<u8> = inputs.iter().map(|s| c ^ s.c).collect();
    let mut x0 = 0;
    let mut x1 = 0;
    let mut y = 0;
    for (s, &di) in inputs.iter().zip(&d) {
        x0 ^= pick(s, di);
        x1 ^= pick(s, di ^ 1);
        y ^= s.y;
    }
    let u = if inputs.iter().any(|s| s.u != View::Nothing) {
        // any leaked c_i plus the public d_i gives the composed choice
        View::Known(c)
    } else {
        View::Nothing
    };
    let v = {
        let mut acc = 0;
        let mut all = true;
        for s in inputs {
            match s.v {
                View::Known(b) => acc ^= b,
                View::Nothing => all = false,
            }
        }
        if all {
            View::Known(acc)
        } else {
            View::Nothing
        }
    };
    let out = WotSample { x0, x1, c, y, u, v };
    debug_assert_eq!(
        out.e(),
        inputs.iter().fold(0, |acc, s| acc ^ s.e()),
        "composed error must be the XOR of instance errors"
    );
    Ok(out)
}

/// The mirrored composition shrinking message leakage: reverse every
/// instance, run the choice-leak reduction in the reversed direction, and
/// reverse the result. Parameters swap twice, so p shrinks to p^n and q
/// grows toward 1 - (1-q)^n.
pub fn reduce_message_leak(inputs: &[WotSample]) -> Result<WotSample, RedError> {
    let reversed: Vec<WotSample> = inputs.iter().map(rotor_sample).collect();
    Ok(rotor_sample(&reduce_choice_leak(&reversed)?))
}

/// Majority-decodes n instances to shrink the error rate. The receiver
/// aligns choices as in the choice-leak reduction; the sender discloses, for
/// both rows, each aligned instance bit XORed with its last-instance bit.
/// That turns every received bit into an independent noisy copy of the last
/// instance's chosen bit, and the majority of n odd copies errs only when
/// more than half the instances erred. Both leakages compound toward
/// 1 - (1-.)^n since a single leaked instance now resolves either secret.
pub fn reduce_error_rate(inputs: &[WotSample]) -> Result<WotSample, RedError> {
    let n = inputs.len();
    if n == 0 {
        return Err(RedError::BadArity {
            expected: 1,
            got: 0,
        });
    }
    if n % 2 == 0 {
        return Err(RedError::OddArityRequired(n));
    }
    let last = &inputs[n - 1];
    let c = last.c;
    let d: Vec<u8> = inputs.iter().map(|s| c ^ s.c).collect();
    // disclosed rows: s_{j,i} = x_{d_i xor j, i} xor x_{j, n-1}
    let srow = |j: u8, i: usize| pick(&inputs[i], d[i] ^ j) ^ pick(last, j);
    let mut ones = 0usize;
    for (i, s) in inputs.iter().enumerate() {
        let aligned = if i == n - 1 { s.y } else { s.y ^ srow(c, i) };
        debug_assert_eq!(
            aligned,
            s.e() ^ pick(last, c),
            "every aligned bit is a noisy copy of the last chosen bit"
        );
        ones += aligned as usize;
    }
    let y = (ones * 2 > n) as u8;
    let u = if inputs.iter().any(|s| s.u != View::Nothing) {
        View::Known(c)
    } else {
        View::Nothing
    };
    // the disclosed rows convert any single unchosen-bit leak into the
    // composed unchosen bit: x_{1-c, n-1} = s_{1-c, i} xor x_{1-c_i, i}
    let v = match inputs.iter().enumerate().find(|(_, s)| s.v != View::Nothing) {
        Some((i, s)) => {
            let View::Known(b) = s.v else { unreachable!() };
            if i == n - 1 {
                View::Known(b)
            } else {
                View::Known(srow(1 ^ c, i) ^ b)
            }
        }
        None => View::Nothing,
    };
    let out = WotSample {
        x0: last.x0,
        x1: last.x1,
        c,
        y,
        u,
        v,
    };
    if let View::Known(b) = out.v {
        debug_assert_eq!(b, out.other());
    }
    Ok(out)
}

/// One node of an amplification pipeline. The first four consume a single
/// instance; the reduce family consumes n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind")]
pub enum ReductionStep {
    RotFromOt,
    OtFromRot,
    Rotor,
    RotFromUot { ell: usize },
    RReduce { n: usize },
    SReduce { n: usize },
    EReduce { n: usize },
}

impl ReductionStep {
    pub fn arity(&self) -> usize {
        match *self {
            ReductionStep::RotFromOt
            | ReductionStep::OtFromRot
            | ReductionStep::Rotor
            | ReductionStep::RotFromUot { .. } => 1,
            ReductionStep::RReduce { n }
            | ReductionStep::SReduce { n }
            | ReductionStep::EReduce { n } => n,
        }
    }

    /// Applies the step to pre-sampled instances. Only the weak-transfer
    /// family and the reversal act on samples; the perfect conversions and
    /// the hashing step need live functionalities.
    pub fn apply_batch(&self, inputs: &[WotSample]) -> Result<WotSample, RedError> {
        let need = self.arity();
        if inputs.len() != need {
            return Err(RedError::BadArity {
                expected: need,
                got: inputs.len(),
            });
        }
        match *self {
            ReductionStep::Rotor => Ok(rotor_sample(&inputs[0])),
            ReductionStep::RReduce { .. } => reduce_choice_leak(inputs),
            ReductionStep::SReduce { .. } => reduce_message_leak(inputs),
            ReductionStep::EReduce { .. } => reduce_error_rate(inputs),
            other => Err(RedError::BadStep(format!(
                "{other:?} does not operate on sample batches"
            ))),
        }
    }
}

/// Total leaf instances a step sequence consumes.
pub fn leaf_count(steps: &[ReductionStep]) -> usize {
    steps.iter().map(|s| s.arity()).product()
}

/// Evaluates a step sequence bottom-up over fresh leaf samples. Steps apply
/// in list order: steps[0] acts directly on leaves, each later step on the
/// previous step's outputs. Leaves are drawn left to right, so a fixed tape
/// pins the whole evaluation.
pub fn compose_steps(
    steps: &[ReductionStep],
    leaf: &mut dyn FnMut(&mut RandState) -> Result<WotSample, PrimError>,
    rng: &mut RandState,
) -> Result<WotSample, RedError> {
    match steps.split_last() {
        None => Ok(leaf(rng)?),
        Some((step, rest)) => {
            let inputs: Vec<WotSample> = (0..step.arity())
                .map(|_| compose_steps(rest, leaf, rng))
                .collect::<Result<_, _>>()?;
            step.apply_batch(&inputs)
        }
    }
}

/// A weak-transfer instance served as a slot: both parties poll their halves
/// of one sample, leakage included, drawn lazily at the first poll.
pub enum WotModel {
    /// The two-message erasure protocol: parameters (p, q, (1-p-q)/2).
    Erasure { p: f64, q: f64 },
    /// Independent fault events with all three parameters free.
    Event { p: f64, q: f64, eps: f64 },
}

impl WotModel {
    pub fn sample(&self, rng: &mut RandState) -> Result<WotSample, PrimError> {
        match *self {
            WotModel::Erasure { p, q } => simwot_sample(p, q, rng),
            WotModel::Event { p, q, eps } => event_model_wot(p, q, eps, rng),
        }
    }
}

pub struct WeakTransferSlot {
    model: WotModel,
    sample: Option<WotSample>,
}

impl WeakTransferSlot {
    pub fn new(model: WotModel) -> Self {
        WeakTransferSlot {
            model,
            sample: None,
        }
    }

    fn ensure(&mut self, rng: &mut RandState) -> Result<WotSample, EngineError> {
        if self.sample.is_none() {
            let s = self
                .model
                .sample(rng)
                .map_err(|e| EngineError::BadMessage(format!("weak transfer sampling: {e}")))?;
            self.sample = Some(s);
        }
        Ok(self.sample.expect("just set"))
    }
}

impl Functionality for WeakTransferSlot {
    fn provide(
        &mut self,
        _from: Role,
        _payload: &[u8],
        _rng: &mut RandState,
    ) -> Result<(), EngineError> {
        Err(EngineError::BadMessage(
            "weak transfer instances take no inputs".into(),
        ))
    }

    fn poll(&mut self, from: Role, rng: &mut RandState) -> Result<Option<Message>, EngineError> {
        let s = self.ensure(rng)?;
        Ok(Some(match from {
            Role::A => vec![s.x0, s.x1, s.u.code() as u8],
            Role::B => vec![s.c, s.y, s.v.code() as u8],
        }))
    }
}

fn parse_half(msg: &Message) -> Result<(u8, u8), EngineError> {
    if msg.len() != 3 || msg[0] > 1 || msg[1] > 1 || msg[2] > 2 {
        return Err(EngineError::BadMessage("bad weak transfer half".into()));
    }
    Ok((msg[0], msg[1]))
}

/// Polls slots `0..n` one at a time, stashing parsed halves; Ok(false)
/// means a slot was not ready and the party should wait.
fn poll_halves(
    ctx: &mut Ctx<'_>,
    n: usize,
    got: &mut Vec<(u8, u8)>,
) -> Result<bool, EngineError> {
    while got.len() < n {
        match ctx.slot_poll(got.len())? {
            Some(msg) => got.push(parse_half(&msg)?),
            None => return Ok(false),
        }
    }
    Ok(true)
}

struct RReduceA {
    n: usize,
    got: Vec<(u8, u8)>,
}

impl Party for RReduceA {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> Result<StepOutcome, EngineError> {
        if !poll_halves(ctx, self.n, &mut self.got)? {
            return Ok(StepOutcome::Waiting);
        }
        let Some(d) = ctx.recv() else {
            return Ok(StepOutcome::Waiting);
        };
        if d.len() != self.n - 1 || d.iter().any(|&b| b > 1) {
            return Err(EngineError::BadMessage("bad difference vector".into()));
        }
        let mut x0 = 0;
        let mut x1 = 0;
        for (i, &(a0, a1)) in self.got.iter().enumerate() {
            let di = if i == self.n - 1 { 0 } else { d[i] };
            x0 ^= if di == 0 { a0 } else { a1 };
            x1 ^= if di == 0 { a1 } else { a0 };
        }
        ctx.output(vec![x0, x1]);
        Ok(StepOutcome::Done)
    }
}

struct RReduceB {
    n: usize,
    got: Vec<(u8, u8)>,
}

impl Party for RReduceB {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> Result<StepOutcome, EngineError> {
        if !poll_halves(ctx, self.n, &mut self.got)? {
            return Ok(StepOutcome::Waiting);
        }
        let c = self.got[self.n - 1].0;
        let d: Vec<u8> = self.got[..self.n - 1].iter().map(|&(ci, _)| c ^ ci).collect();
        ctx.send(d);
        let y = self.got.iter().fold(0, |acc, &(_, yi)| acc ^ yi);
        ctx.output(vec![c, y]);
        Ok(StepOutcome::Done)
    }
}

/// Live choice-leak reduction over n weak-transfer slots: one receiver
/// message, sender output (x0', x1'), receiver output (c', y').
pub fn r_reduce_session(n: usize, models: Vec<WotModel>) -> Result<SessionParts, RedError> {
    if n == 0 || models.len() != n {
        return Err(RedError::BadArity {
            expected: n.max(1),
            got: models.len(),
        });
    }
    Ok(SessionParts {
        a: Box::new(RReduceA { n, got: Vec::new() }),
        b: Box::new(RReduceB { n, got: Vec::new() }),
        slots: models
            .into_iter()
            .map(|m| Box::new(WeakTransferSlot::new(m)) as Box<dyn Functionality>)
            .collect(),
    })
}

struct SReduceA {
    n: usize,
    got: Vec<(u8, u8)>,
}

impl Party for SReduceA {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> Result<StepOutcome, EngineError> {
        if !poll_halves(ctx, self.n, &mut self.got)? {
            return Ok(StepOutcome::Waiting);
        }
        // reversed view: this side's instance pairs act as receiver halves
        let diffs: Vec<u8> = self.got.iter().map(|&(a0, a1)| a0 ^ a1).collect();
        let last = diffs[self.n - 1];
        let d: Vec<u8> = diffs[..self.n - 1].iter().map(|&t| last ^ t).collect();
        ctx.send(d);
        let base = self.got.iter().fold(0, |acc, &(a0, _)| acc ^ a0);
        ctx.output(vec![base, base ^ last]);
        Ok(StepOutcome::Done)
    }
}

struct SReduceB {
    n: usize,
    got: Vec<(u8, u8)>,
}

impl Party for SReduceB {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> Result<StepOutcome, EngineError> {
        if !poll_halves(ctx, self.n, &mut self.got)? {
            return Ok(StepOutcome::Waiting);
        }
        let Some(d) = ctx.recv() else {
            return Ok(StepOutcome::Waiting);
        };
        if d.len() != self.n - 1 || d.iter().any(|&b| b > 1) {
            return Err(EngineError::BadMessage("bad difference vector".into()));
        }
        let mut z0 = 0;
        let mut z1 = 0;
        for (i, &(ci, yi)) in self.got.iter().enumerate() {
            let di = if i == self.n - 1 { 0 } else { d[i] };
            z0 ^= yi ^ (di & ci);
            z1 ^= yi ^ ((di ^ 1) & ci);
        }
        ctx.output(vec![z0 ^ z1, z0]);
        Ok(StepOutcome::Done)
    }
}

/// Live message-leak reduction: the reversed composition inlined, so the
/// single difference message now flows from the sender side.
pub fn s_reduce_session(n: usize, models: Vec<WotModel>) -> Result<SessionParts, RedError> {
    if n == 0 || models.len() != n {
        return Err(RedError::BadArity {
            expected: n.max(1),
            got: models.len(),
        });
    }
    Ok(SessionParts {
        a: Box::new(SReduceA { n, got: Vec::new() }),
        b: Box::new(SReduceB { n, got: Vec::new() }),
        slots: models
            .into_iter()
            .map(|m| Box::new(WeakTransferSlot::new(m)) as Box<dyn Functionality>)
            .collect(),
    })
}

struct EReduceA {
    n: usize,
    got: Vec<(u8, u8)>,
}

impl Party for EReduceA {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> Result<StepOutcome, EngineError> {
        if !poll_halves(ctx, self.n, &mut self.got)? {
            return Ok(StepOutcome::Waiting);
        }
        let Some(d) = ctx.recv() else {
            return Ok(StepOutcome::Waiting);
        };
        if d.len() != self.n - 1 || d.iter().any(|&b| b > 1) {
            return Err(EngineError::BadMessage("bad difference vector".into()));
        }
        let (l0, l1) = self.got[self.n - 1];
        // both aligned rows, offset by the last pair
        let mut rows = Vec::with_capacity(2 * (self.n - 1));
        for j in [0u8, 1] {
            for (i, &(a0, a1)) in self.got[..self.n - 1].iter().enumerate() {
                let aligned = if d[i] ^ j == 0 { a0 } else { a1 };
                rows.push(aligned ^ if j == 0 { l0 } else { l1 });
            }
        }
        ctx.send(rows);
        ctx.output(vec![l0, l1]);
        Ok(StepOutcome::Done)
    }
}

struct EReduceB {
    n: usize,
    got: Vec<(u8, u8)>,
    sent: bool,
}

impl Party for EReduceB {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> Result<StepOutcome, EngineError> {
        if !poll_halves(ctx, self.n, &mut self.got)? {
            return Ok(StepOutcome::Waiting);
        }
        let c = self.got[self.n - 1].0;
        if !self.sent {
            let d: Vec<u8> = self.got[..self.n - 1]
                .iter()
                .map(|&(ci, _)| c ^ ci)
                .collect();
            ctx.send(d);
            self.sent = true;
        }
        let Some(rows) = ctx.recv() else {
            return Ok(StepOutcome::Waiting);
        };
        if rows.len() != 2 * (self.n - 1) || rows.iter().any(|&b| b > 1) {
            return Err(EngineError::BadMessage("bad disclosure rows".into()));
        }
        let row = &rows[c as usize * (self.n - 1)..(c as usize + 1) * (self.n - 1)];
        let mut ones = self.got[self.n - 1].1 as usize;
        for (i, &(_, yi)) in self.got[..self.n - 1].iter().enumerate() {
            ones += (yi ^ row[i]) as usize;
        }
        ctx.output(vec![c, (ones * 2 > self.n) as u8]);
        Ok(StepOutcome::Done)
    }
}

/// Live error-rate reduction: two messages (differences, then disclosure
/// rows), majority decode at the receiver. Odd n only.
pub fn e_reduce_session(n: usize, models: Vec<WotModel>) -> Result<SessionParts, RedError> {
    if n == 0 || models.len() != n {
        return Err(RedError::BadArity {
            expected: n.max(1),
            got: models.len(),
        });
    }
    if n % 2 == 0 {
        return Err(RedError::OddArityRequired(n));
    }
    Ok(SessionParts {
        a: Box::new(EReduceA { n, got: Vec::new() }),
        b: Box::new(EReduceB {
            n,
            got: Vec::new(),
            sent: false,
        }),
        slots: models
            .into_iter()
            .map(|m| Box::new(WeakTransferSlot::new(m)) as Box<dyn Functionality>)
            .collect(),
    })
}

struct RotFromOtA {
    spec: OtSpec,
    strings: Option<Vec<u8>>,
}

impl Party for RotFromOtA {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> Result<StepOutcome, EngineError> {
        if self.strings.is_none() {
            let x = ctx.rand_bits(self.spec.n_strings * self.spec.bit_len)?;
            ctx.slot_provide(0, &x)?;
            self.strings = Some(x);
        }
        match ctx.slot_poll(0)? {
            None => Ok(StepOutcome::Waiting),
            Some(_ack) => {
                ctx.output(self.strings.clone().expect("set above"));
                Ok(StepOutcome::Done)
            }
        }
    }
}

struct RotFromOtB {
    spec: OtSpec,
    choice: Option<u8>,
}

impl Party for RotFromOtB {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> Result<StepOutcome, EngineError> {
        if self.choice.is_none() {
            let c = ctx.rand_range(self.spec.n_strings as u64)? as u8;
            ctx.slot_provide(0, &[c])?;
            self.choice = Some(c);
        }
        match ctx.slot_poll(0)? {
            None => Ok(StepOutcome::Waiting),
            Some(y) => {
                let mut out = vec![self.choice.expect("set above")];
                out.extend(y);
                ctx.output(out);
                Ok(StepOutcome::Done)
            }
        }
    }
}

/// Randomizes a chosen-input transfer: both sides feed fresh uniform inputs
/// into one chosen-input instance and output them. Zero messages.
pub fn rot_from_ot_session(spec: OtSpec) -> SessionParts {
    SessionParts {
        a: Box::new(RotFromOtA {
            spec,
            strings: None,
        }),
        b: Box::new(RotFromOtB { spec, choice: None }),
        slots: vec![Box::new(OtFunctionality::new(spec))],
    }
}

struct OtFromRotA {
    spec: OtSpec,
    inputs: Vec<u8>,
    xs: Option<Vec<u8>>,
}

impl Party for OtFromRotA {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> Result<StepOutcome, EngineError> {
        if self.xs.is_none() {
            match ctx.slot_poll(0)? {
                None => return Ok(StepOutcome::Waiting),
                Some(xs) => self.xs = Some(xs),
            }
        }
        let Some(t) = ctx.recv() else {
            return Ok(StepOutcome::Waiting);
        };
        let n = self.spec.n_strings;
        let l = self.spec.bit_len;
        if t.len() != 1 || (t[0] as usize) >= n {
            return Err(EngineError::BadMessage("shift out of range".into()));
        }
        let xs = self.xs.as_ref().expect("set above");
        let mut masked = Vec::with_capacity(n * l);
        for i in 0..n {
            let src = (i + t[0] as usize) % n;
            for k in 0..l {
                masked.push(self.inputs[i * l + k] ^ xs[src * l + k]);
            }
        }
        ctx.send(masked);
        ctx.output(Vec::new());
        Ok(StepOutcome::Done)
    }
}

struct OtFromRotB {
    spec: OtSpec,
    choice: u8,
    held: Option<(u8, Vec<u8>)>,
}

impl Party for OtFromRotB {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> Result<StepOutcome, EngineError> {
        let n = self.spec.n_strings;
        let l = self.spec.bit_len;
        if self.held.is_none() {
            match ctx.slot_poll(0)? {
                None => return Ok(StepOutcome::Waiting),
                Some(msg) => {
                    let d = msg[0];
                    let z = msg[1..].to_vec();
                    // shift aligning the instance's random choice onto ours
                    let t = ((d as usize + n - self.choice as usize) % n) as u8;
                    ctx.send(vec![t]);
                    self.held = Some((d, z));
                }
            }
        }
        let Some(masked) = ctx.recv() else {
            return Ok(StepOutcome::Waiting);
        };
        if masked.len() != n * l {
            return Err(EngineError::BadMessage("bad masked strings".into()));
        }
        let (_, z) = self.held.as_ref().expect("set above");
        let c = self.choice as usize;
        let y: Vec<u8> = (0..l).map(|k| masked[c * l + k] ^ z[k]).collect();
        let mut out = vec![self.choice];
        out.extend(y);
        ctx.output(out);
        Ok(StepOutcome::Done)
    }
}

/// Derandomizes one randomized transfer into a chosen-input one: the
/// receiver aligns the instance's choice onto its own with one public
/// shift, the sender one-time-pads its strings with the cyclically shifted
/// instance strings.
pub fn ot_from_rot_session(
    spec: OtSpec,
    sender_inputs: Vec<u8>,
    choice: u8,
) -> Result<SessionParts, RedError> {
    if sender_inputs.len() != spec.n_strings * spec.bit_len
        || sender_inputs.iter().any(|&b| b > 1)
    {
        return Err(RedError::BadStep("sender inputs must be n*l bits".into()));
    }
    if (choice as usize) >= spec.n_strings {
        return Err(RedError::BadStep("choice out of range".into()));
    }
    Ok(SessionParts {
        a: Box::new(OtFromRotA {
            spec,
            inputs: sender_inputs,
            xs: None,
        }),
        b: Box::new(OtFromRotB {
            spec,
            choice,
            held: None,
        }),
        slots: vec![Box::new(RotFunctionality::new(spec, RotCorruption::Honest))],
    })
}

struct RotorA;

impl Party for RotorA {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> Result<StepOutcome, EngineError> {
        match ctx.slot_poll(0)? {
            None => Ok(StepOutcome::Waiting),
            Some(xs) => {
                // old sender turns receiver: choice is the string XOR
                ctx.output(vec![xs[0] ^ xs[1], xs[0]]);
                Ok(StepOutcome::Done)
            }
        }
    }
}

struct RotorB;

impl Party for RotorB {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> Result<StepOutcome, EngineError> {
        match ctx.slot_poll(0)? {
            None => Ok(StepOutcome::Waiting),
            Some(msg) => {
                let (c, y) = (msg[0], msg[1]);
                ctx.output(vec![y, y ^ c]);
                Ok(StepOutcome::Done)
            }
        }
    }
}

/// Live direction reversal of one randomized bit transfer; the old sender
/// outputs (c, y), the old receiver outputs the new string pair. Zero
/// messages.
pub fn rotor_session() -> SessionParts {
    SessionParts {
        a: Box::new(RotorA),
        b: Box::new(RotorB),
        slots: vec![Box::new(RotFunctionality::new(
            OtSpec::pair(),
            RotCorruption::Honest,
        ))],
    }
}

/// Largest hash length the entropy floor supports at closeness target eps:
/// alpha/2 - 3 log2(1/eps).
pub fn uot_hash_limit(alpha: f64, eps: f64) -> f64 {
    alpha / 2.0 - 3.0 * (1.0 / eps).log2()
}

struct RotFromUotA {
    n: usize,
    ell: usize,
}

impl Party for RotFromUotA {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> Result<StepOutcome, EngineError> {
        match ctx.slot_poll(0)? {
            None => Ok(StepOutcome::Waiting),
            Some(xs) => {
                let seed_bits = ToeplitzHash::seed_bits(self.n, self.ell);
                let seeds = ctx.rand_bits(2 * seed_bits)?;
                ctx.send(seeds.clone());
                let hash = |value_bits: &[u8], seed_bits_v: &[u8]| -> Result<Vec<u8>, EngineError> {
                    let t = ToeplitzHash::new(self.n, self.ell, pack_bit_bytes(seed_bits_v))
                        .map_err(|e| EngineError::BadMessage(e.to_string()))?;
                    let h = t
                        .eval(pack_bit_bytes(value_bits))
                        .map_err(|e| EngineError::BadMessage(e.to_string()))?;
                    Ok(crate::primitives::unpack_bit_bytes(h, self.ell))
                };
                let mut out = hash(&xs[..self.n], &seeds[..seed_bits])?;
                out.extend(hash(&xs[self.n..], &seeds[seed_bits..])?);
                ctx.output(out);
                Ok(StepOutcome::Done)
            }
        }
    }
}

struct RotFromUotB {
    n: usize,
    ell: usize,
    honest: bool,
    held: Option<Message>,
}

impl Party for RotFromUotB {
    fn step(&mut self, ctx: &mut Ctx<'_>) -> Result<StepOutcome, EngineError> {
        if self.held.is_none() {
            match ctx.slot_poll(0)? {
                None => return Ok(StepOutcome::Waiting),
                Some(msg) => self.held = Some(msg),
            }
        }
        let Some(seeds) = ctx.recv() else {
            return Ok(StepOutcome::Waiting);
        };
        if !self.honest {
            // a corrupted receiver holds no instance output; it only records
            // the public seeds
            ctx.output(Vec::new());
            return Ok(StepOutcome::Done);
        }
        let msg = self.held.as_ref().expect("set above");
        let (c, xc) = (msg[0], &msg[1..]);
        let seed_bits = ToeplitzHash::seed_bits(self.n, self.ell);
        let seed = &seeds[c as usize * seed_bits..(c as usize + 1) * seed_bits];
        let t = ToeplitzHash::new(self.n, self.ell, pack_bit_bytes(seed))
            .map_err(|e| EngineError::BadMessage(e.to_string()))?;
        let h = t
            .eval(pack_bit_bytes(xc))
            .map_err(|e| EngineError::BadMessage(e.to_string()))?;
        let mut out = vec![c];
        out.extend(crate::primitives::unpack_bit_bytes(h, self.ell));
        ctx.output(out);
        Ok(StepOutcome::Done)
    }
}

/// Hashes an entropy-floor transfer down to an ell-bit randomized transfer:
/// the sender draws two public hash seeds and outputs the two hashed
/// strings; an honest receiver hashes its held string under the matching
/// seed. Admissibility of ell at the closeness target is checked up front.
pub fn rot_from_uot_session(
    spec: UotSpec,
    ell: usize,
    target_eps: f64,
    mode: UotMode,
) -> Result<SessionParts, RedError> {
    let limit = uot_hash_limit(spec.alpha, target_eps);
    if ell == 0 || (ell as f64) > limit + 1e-9 {
        return Err(RedError::HashTooLong { ell, limit });
    }
    let honest = matches!(mode, UotMode::Honest);
    let n = spec.bit_len;
    Ok(SessionParts {
        a: Box::new(RotFromUotA { n, ell }),
        b: Box::new(RotFromUotB {
            n,
            ell,
            honest,
            held: None,
        }),
        slots: vec![Box::new(UotFunctionality::new(spec, mode)?)],
    })
}

/// Pulls the two parties' bit-transfer outputs out of a finished transcript:
/// ((x0, x1), (c, y)).
pub fn wot_outputs(t: &Transcript) -> Result<((u8, u8), (u8, u8)), RedError> {
    let a = t
        .output_a
        .as_ref()
        .filter(|o| o.len() == 2)
        .ok_or_else(|| RedError::BadStep("missing sender output".into()))?;
    let b = t
        .output_b
        .as_ref()
        .filter(|o| o.len() == 2)
        .ok_or_else(|| RedError::BadStep("missing receiver output".into()))?;
    Ok(((a[0], a[1]), (b[0], b[1])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_session, RandSource};
    use crate::prob::{FiniteDist, JointBitDist};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn tape_of(v: u64, bits: usize) -> Vec<u8> {
        (0..bits).map(|i| ((v >> (bits - 1 - i)) & 1) as u8).collect()
    }

    fn enumerate_composed<F>(bits: usize, mut run: F) -> Vec<(WotSample, u64)>
    where
        F: FnMut(&mut RandState) -> WotSample,
    {
        let mut counts: BTreeMap<Vec<u32>, (WotSample, u64)> = BTreeMap::new();
        for v in 0..(1u64 << bits) {
            let mut rng = RandState::new(RandSource::Tape(tape_of(v, bits)));
            let s = run(&mut rng);
            counts.entry(s.outcome()).or_insert((s, 0)).1 += 1;
        }
        counts.into_values().collect()
    }

    fn measured(samples: &[(WotSample, u64)]) -> (f64, f64, f64) {
        let total: u64 = samples.iter().map(|(_, k)| k).sum();
        let eps = samples
            .iter()
            .filter(|(s, _)| s.e() == 1)
            .map(|(_, k)| *k)
            .sum::<u64>() as f64
            / total as f64;
        let p = JointBitDist::new(
            FiniteDist::from_counts(
                samples
                    .iter()
                    .map(|(s, k)| (vec![s.c as u32, s.u.code(), s.e() as u32], *k)),
            )
            .unwrap(),
        )
        .unwrap()
        .pred_adv();
        let q = JointBitDist::new(
            FiniteDist::from_counts(
                samples
                    .iter()
                    .map(|(s, k)| (vec![s.other() as u32, s.v.code(), s.e() as u32], *k)),
            )
            .unwrap(),
        )
        .unwrap()
        .pred_adv();
        (p, q, eps)
    }

    fn all_samples_with_views() -> Vec<WotSample> {
        let mut out = Vec::new();
        for bits in 0..16u8 {
            let (x0, x1, c, e) = (bits & 1, (bits >> 1) & 1, (bits >> 2) & 1, (bits >> 3) & 1);
            let y = e ^ if c == 0 { x0 } else { x1 };
            for u_known in [false, true] {
                for v_known in [false, true] {
                    let s = WotSample {
                        x0,
                        x1,
                        c,
                        y,
                        u: if u_known { View::Known(c) } else { View::Nothing },
                        v: if v_known {
                            View::Known(if c == 0 { x1 } else { x0 })
                        } else {
                            View::Nothing
                        },
                    };
                    out.push(s);
                }
            }
        }
        out
    }

    #[test]
    fn reversal_algebra_and_views() {
        for s in all_samples_with_views() {
            let r = rotor_sample(&s);
            assert_eq!(r.e(), s.e());
            assert_eq!(r.c, s.x0 ^ s.x1);
            assert_eq!(r.y, s.x0);
            assert_eq!(r.x0, s.y);
            assert_eq!(r.x1, s.y ^ s.c);
            assert_eq!(r.u != View::Nothing, s.v != View::Nothing);
            assert_eq!(r.v != View::Nothing, s.u != View::Nothing);
        }
    }

    #[test]
    fn reversal_is_an_involution() {
        for s in all_samples_with_views() {
            assert_eq!(rotor_sample(&rotor_sample(&s)), s);
        }
    }

    #[test]
    fn choice_leak_single_instance_is_identity() {
        for s in all_samples_with_views() {
            assert_eq!(reduce_choice_leak(&[s]).unwrap(), s);
        }
    }

    #[test]
    fn choice_leak_two_instances_closed_forms() {
        // p side: event model (1/2, 0, 0), 4 tape bits per instance
        let samples = enumerate_composed(8, |rng| {
            let steps = [ReductionStep::RReduce { n: 2 }];
            compose_steps(&steps, &mut |r| event_model_wot(0.5, 0.0, 0.0, r), rng).unwrap()
        });
        let (p, q, eps) = measured(&samples);
        assert_eq!(p, 0.75);
        assert_eq!(q, 0.0);
        assert_eq!(eps, 0.0);

        // q side: event model (0, 1/2, 0)
        let samples = enumerate_composed(8, |rng| {
            let steps = [ReductionStep::RReduce { n: 2 }];
            compose_steps(&steps, &mut |r| event_model_wot(0.0, 0.5, 0.0, r), rng).unwrap()
        });
        let (p, q, eps) = measured(&samples);
        assert_eq!(p, 0.0);
        assert_eq!(q, 0.25);
        assert_eq!(eps, 0.0);
    }

    #[test]
    fn choice_leak_error_xors() {
        // eps only: (0, 0, 1/4) over three instances, 5 bits each
        let samples = enumerate_composed(15, |rng| {
            let steps = [ReductionStep::RReduce { n: 3 }];
            compose_steps(&steps, &mut |r| event_model_wot(0.0, 0.0, 0.25, r), rng).unwrap()
        });
        let (_, _, eps) = measured(&samples);
        // (1 - (1 - 2/4)^3) / 2
        assert_eq!(eps, 0.4375);
    }

    #[test]
    fn message_leak_mirrors() {
        let samples = enumerate_composed(8, |rng| {
            let steps = [ReductionStep::SReduce { n: 2 }];
            compose_steps(&steps, &mut |r| event_model_wot(0.0, 0.5, 0.0, r), rng).unwrap()
        });
        let (p, q, eps) = measured(&samples);
        assert_eq!(p, 0.0);
        assert_eq!(q, 0.75);
        assert_eq!(eps, 0.0);

        let samples = enumerate_composed(8, |rng| {
            let steps = [ReductionStep::SReduce { n: 2 }];
            compose_steps(&steps, &mut |r| event_model_wot(0.5, 0.0, 0.0, r), rng).unwrap()
        });
        let (p, q, eps) = measured(&samples);
        assert_eq!(p, 0.25);
        assert_eq!(q, 0.0);
        assert_eq!(eps, 0.0);
    }

    #[test]
    fn error_rate_majority_closed_forms() {
        // binomial tail at n=3, eps=1/4: 3 * (1/16)(3/4) + 1/64 = 10/64
        let samples = enumerate_composed(15, |rng| {
            let steps = [ReductionStep::EReduce { n: 3 }];
            compose_steps(&steps, &mut |r| event_model_wot(0.0, 0.0, 0.25, r), rng).unwrap()
        });
        let (p, q, eps) = measured(&samples);
        assert_eq!(p, 0.0);
        assert_eq!(q, 0.0);
        assert_eq!(eps, 0.15625);

        // p side compounds: 1 - (1/2)^3
        let samples = enumerate_composed(12, |rng| {
            let steps = [ReductionStep::EReduce { n: 3 }];
            compose_steps(&steps, &mut |r| event_model_wot(0.5, 0.0, 0.0, r), rng).unwrap()
        });
        let (p, _, eps) = measured(&samples);
        assert_eq!(p, 0.875);
        assert_eq!(eps, 0.0);

        // q side compounds too
        let samples = enumerate_composed(12, |rng| {
            let steps = [ReductionStep::EReduce { n: 3 }];
            compose_steps(&steps, &mut |r| event_model_wot(0.0, 0.5, 0.0, r), rng).unwrap()
        });
        let (_, q, _) = measured(&samples);
        assert_eq!(q, 0.875);
    }

    #[test]
    fn error_rate_rejects_even_arity() {
        let inputs = vec![all_samples_with_views()[0]; 4];
        assert!(matches!(
            reduce_error_rate(&inputs),
            Err(RedError::OddArityRequired(4))
        ));
        assert!(e_reduce_session(2, vec![
            WotModel::Erasure { p: 0.0, q: 0.0 },
            WotModel::Erasure { p: 0.0, q: 0.0 },
        ])
        .is_err());
    }

    #[test]
    fn erasure_leaves_stay_below_closed_forms() {
        let samples = enumerate_composed(12, |rng| {
            let steps = [ReductionStep::RReduce { n: 2 }];
            compose_steps(&steps, &mut |r| simwot_sample(0.25, 0.25, r), rng).unwrap()
        });
        let (p, q, eps) = measured(&samples);
        assert!(p <= 1.0 - 0.75 * 0.75 + 1e-12);
        assert!(q <= 0.0625 + 1e-12);
        assert!(eps <= 0.375 + 1e-12);
    }

    #[test]
    fn live_and_batch_paths_agree_on_every_tape() {
        let cases: Vec<(ReductionStep, fn(usize) -> Vec<WotModel>, usize)> = vec![
            (
                ReductionStep::RReduce { n: 2 },
                |n| (0..n).map(|_| WotModel::Erasure { p: 0.25, q: 0.25 }).collect(),
                12,
            ),
            (
                ReductionStep::SReduce { n: 2 },
                |n| (0..n).map(|_| WotModel::Erasure { p: 0.25, q: 0.25 }).collect(),
                12,
            ),
            (
                ReductionStep::EReduce { n: 3 },
                |n| {
                    (0..n)
                        .map(|_| WotModel::Event {
                            p: 0.5,
                            q: 0.5,
                            eps: 0.25,
                        })
                        .collect()
                },
                21,
            ),
        ];
        for (step, models_of, bits) in cases {
            let n = step.arity();
            for v in 0..(1u64 << bits) {
                let session = match step {
                    ReductionStep::RReduce { .. } => r_reduce_session(n, models_of(n)).unwrap(),
                    ReductionStep::SReduce { .. } => s_reduce_session(n, models_of(n)).unwrap(),
                    ReductionStep::EReduce { .. } => e_reduce_session(n, models_of(n)).unwrap(),
                    _ => unreachable!(),
                };
                let t = run_session(session, RandSource::Tape(tape_of(v, bits))).unwrap();
                let ((x0, x1), (c, y)) = wot_outputs(&t).unwrap();

                let mut rng = RandState::new(RandSource::Tape(tape_of(v, bits)));
                let models = models_of(n);
                let mut idx = 0;
                let composed = compose_steps(
                    &[step],
                    &mut |r| {
                        let s = models[idx % n].sample(r);
                        idx += 1;
                        s
                    },
                    &mut rng,
                )
                .unwrap();
                assert_eq!((x0, x1, c, y), (composed.x0, composed.x1, composed.c, composed.y));
            }
        }
    }

    #[test]
    fn randomizing_chosen_transfer_matches_ideal() {
        let dist = crate::engine::enumerate_runs(
            || rot_from_ot_session(OtSpec::pair()),
            3,
            |t| {
                let a = t.output_a.as_ref().unwrap();
                let b = t.output_b.as_ref().unwrap();
                vec![a[0] as u32, a[1] as u32, b[0] as u32, b[1] as u32]
            },
        )
        .unwrap();
        assert_eq!(dist.outcomes().len(), 8);
        for (outcome, mass) in dist.iter() {
            assert_eq!(mass, 0.125);
            let (x0, x1, c, y) = (outcome[0], outcome[1], outcome[2], outcome[3]);
            assert_eq!(y, if c == 0 { x0 } else { x1 });
        }
    }

    #[test]
    fn randomizing_chosen_transfer_zero_tape() {
        let t = run_session(
            rot_from_ot_session(OtSpec::pair()),
            RandSource::Tape(vec![0, 0, 0]),
        )
        .unwrap();
        assert_eq!(t.output_a.as_deref(), Some(&[0u8, 0][..]));
        assert_eq!(t.output_b.as_deref(), Some(&[0u8, 0][..]));
    }

    #[test]
    fn derandomizing_transfer_delivers_chosen_string() {
        for m0 in 0..2u8 {
            for m1 in 0..2u8 {
                for c in 0..2u8 {
                    for v in 0..8u64 {
                        let t = run_session(
                            ot_from_rot_session(OtSpec::pair(), vec![m0, m1], c).unwrap(),
                            RandSource::Tape(tape_of(v, 3)),
                        )
                        .unwrap();
                        let b = t.output_b.unwrap();
                        assert_eq!(b[0], c);
                        assert_eq!(b[1], if c == 0 { m0 } else { m1 });
                        assert_eq!(t.output_a.as_deref(), Some(&[][..]));
                    }
                }
            }
        }
    }

    #[test]
    fn derandomizing_shift_is_uniform_and_choice_free() {
        for c in 0..2u8 {
            let dist = crate::engine::enumerate_runs(
                || ot_from_rot_session(OtSpec::pair(), vec![1, 0], c).unwrap(),
                3,
                |t| vec![t.lines[0].payload[0] as u32],
            )
            .unwrap();
            assert_eq!(dist.mass_of(&[0]), 0.5);
            assert_eq!(dist.mass_of(&[1]), 0.5);
        }
    }

    #[test]
    fn live_reversal_keeps_consistency() {
        for v in 0..8u64 {
            let t = run_session(rotor_session(), RandSource::Tape(tape_of(v, 3))).unwrap();
            let a = t.output_a.unwrap();
            let b = t.output_b.unwrap();
            let (c, y) = (a[0], a[1]);
            let (x0, x1) = (b[0], b[1]);
            assert_eq!(y, if c == 0 { x0 } else { x1 });
        }
    }

    #[test]
    fn reversal_chain_realizes_reversed_chosen_transfer() {
        // randomize, reverse, then derandomize against chosen inputs held by
        // the old receiver; pure algebra over every instance outcome
        for bits in 0..8u8 {
            let (x0, x1, c) = (bits & 1, (bits >> 1) & 1, (bits >> 2) & 1);
            let y = if c == 0 { x0 } else { x1 };
            let s = WotSample {
                x0,
                x1,
                c,
                y,
                u: View::Nothing,
                v: View::Nothing,
            };
            let r = rotor_sample(&s);
            for m0 in 0..2u8 {
                for m1 in 0..2u8 {
                    for want in 0..2u8 {
                        // new sender (the old receiver) masks with its pair
                        let t = r.c ^ want;
                        let a0 = m0 ^ if t == 0 { r.x0 } else { r.x1 };
                        let a1 = m1 ^ if t == 1 { r.x0 } else { r.x1 };
                        let got = (if want == 0 { a0 } else { a1 }) ^ r.y;
                        assert_eq!(got, if want == 0 { m0 } else { m1 });
                    }
                }
            }
        }
    }

    #[test]
    fn hashing_transfer_honest_small_enumeration() {
        // 4-bit strings, 1-bit output: 9 instance bits + 8 seed bits
        let spec = UotSpec::new(4, 8.0).unwrap();
        let dist = crate::engine::enumerate_runs(
            || rot_from_uot_session(spec, 1, 0.5, UotMode::Honest).unwrap(),
            17,
            |t| {
                let a = t.output_a.as_ref().unwrap();
                let b = t.output_b.as_ref().unwrap();
                vec![a[0] as u32, a[1] as u32, b[0] as u32, b[1] as u32]
            },
        )
        .unwrap();
        for (outcome, _) in dist.iter() {
            let (u0, u1, c, y) = (outcome[0], outcome[1], outcome[2], outcome[3]);
            assert_eq!(y, if c == 0 { u0 } else { u1 });
        }
    }

    #[test]
    fn hashing_transfer_honest_longer_strings() {
        let spec = UotSpec::new(8, 8.0).unwrap();
        let outcomes = crate::engine::monte_carlo_runs(
            || rot_from_uot_session(spec, 1, 0.5, UotMode::Honest).unwrap(),
            200,
            42,
            |t| {
                let a = t.output_a.as_ref().unwrap();
                let b = t.output_b.as_ref().unwrap();
                vec![a[0] as u32, a[1] as u32, b[0] as u32, b[1] as u32]
            },
        )
        .unwrap();
        for outcome in outcomes {
            let (u0, u1, c, y) = (outcome[0], outcome[1], outcome[2], outcome[3]);
            assert_eq!(y, if c == 0 { u0 } else { u1 });
        }
    }

    #[test]
    fn hashing_transfer_premise_gate() {
        let spec = UotSpec::new(8, 8.0).unwrap();
        // limit at closeness 1/2 is exactly 1
        assert_eq!(uot_hash_limit(8.0, 0.5), 1.0);
        assert!(rot_from_uot_session(spec, 2, 0.5, UotMode::Honest).is_err());
        assert!(rot_from_uot_session(spec, 1, 0.25, UotMode::Honest).is_err());
        assert!(rot_from_uot_session(spec, 1, 0.5, UotMode::Honest).is_ok());
    }

    #[test]
    fn step_arity_and_serde() {
        let steps = vec![
            ReductionStep::RReduce { n: 2 },
            ReductionStep::EReduce { n: 3 },
            ReductionStep::RotFromUot { ell: 1 },
            ReductionStep::Rotor,
        ];
        assert_eq!(leaf_count(&steps[..2]), 6);
        let json = serde_json::to_string(&steps).unwrap();
        assert!(json.contains(r#"{"kind":"RReduce","n":2}"#));
        assert!(json.contains(r#"{"kind":"Rotor"}"#));
        let back: Vec<ReductionStep> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, steps);
    }

    #[test]
    fn batch_step_rejects_wrong_shapes() {
        let s = all_samples_with_views()[0];
        assert!(matches!(
            ReductionStep::RReduce { n: 2 }.apply_batch(&[s]),
            Err(RedError::BadArity { expected: 2, got: 1 })
        ));
        assert!(matches!(
            ReductionStep::RotFromOt.apply_batch(&[s]),
            Err(RedError::BadStep(_))
        ));
    }

    proptest! {
        #[test]
        fn composed_samples_stay_consistent(seed in 0u64..5000) {
            let mut rng = RandState::new(RandSource::Seeded(seed));
            let steps = [
                ReductionStep::RReduce { n: 2 },
                ReductionStep::SReduce { n: 2 },
            ];
            let s = compose_steps(
                &steps,
                &mut |r| event_model_wot(0.3, 0.2, 0.1, r),
                &mut rng,
            ).unwrap();
            s.check_bits().unwrap();
            if let View::Known(b) = s.u {
                prop_assert_eq!(b, s.c);
            }
            if let View::Known(b) = s.v {
                prop_assert_eq!(b, s.other());
            }
        }
    }
}
