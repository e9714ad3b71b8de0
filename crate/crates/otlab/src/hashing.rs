//! Toeplitz hashing over GF(2), min-entropy accounting, and exhaustive
//! verifiers for the leftover hash lemma and its two-extractor variant.
//!
//! The verifiers enumerate every seed and build the exact output joint, so
//! they are oracles for small parameters, not estimators; anything past the
//! state cap is refused.

use crate::prob::{FiniteDist, ProbError};
use rand::Rng;
use thiserror::Error;

/// Hard ceiling on exhaustively enumerated joint states.
pub const STATE_CAP: usize = 1 << 24;

const TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum HashError {
    #[error("output length {m} exceeds input length {n}")]
    OutputTooWide { m: usize, n: usize },
    #[error("lengths n={n}, m={m} need {bits} seed bits, word limit is 63")]
    WordTooLong { n: usize, m: usize, bits: usize },
    #[error("length must be positive")]
    ZeroLength,
    #[error("seed {seed:#x} has bits beyond the {bits}-bit seed length")]
    SeedOutOfRange { seed: u64, bits: usize },
    #[error("input {x:#x} has bits beyond the {n}-bit input length")]
    InputOutOfRange { x: u64, n: usize },
    #[error("collision inputs must differ")]
    InputsEqual,
    #[error("declared floor {declared} exceeds computed min-entropy {computed}")]
    FloorTooHigh { declared: f64, computed: f64 },
    #[error("outcomes must be equal-arity bit tuples")]
    NotBitTuples,
    #[error("arity split {x_arity} does not leave both halves nonempty")]
    BadSplit { x_arity: usize },
    #[error("premise does not hold: {0}")]
    PremiseViolated(String),
    #[error("exhaustive joint needs {states} states, cap is {cap}")]
    StateCap { states: usize, cap: usize },
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// A Toeplitz matrix over GF(2), m rows by n columns, packed into one seed
/// word of n+m-1 bits. Row i, column j holds seed bit i-j+(n-1), so each row
/// is a one-bit shift of the previous one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToeplitzHash {
    input_len: usize,
    output_len: usize,
    seed: u64,
}

impl ToeplitzHash {
    pub fn seed_bits(n: usize, m: usize) -> usize {
        n + m - 1
    }

    pub fn new(n: usize, m: usize, seed: u64) -> Result<Self, HashError> {
        if n == 0 || m == 0 {
            return Err(HashError::ZeroLength);
        }
        if m > n {
            return Err(HashError::OutputTooWide { m, n });
        }
        let bits = Self::seed_bits(n, m);
        if bits > 63 {
            return Err(HashError::WordTooLong { n, m, bits });
        }
        if seed >> bits != 0 {
            return Err(HashError::SeedOutOfRange { seed, bits });
        }
        Ok(ToeplitzHash {
            input_len: n,
            output_len: m,
            seed,
        })
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    /// Matrix-vector product over GF(2). Output bit i is the parity of the
    /// seed window [i, i+n-1] ANDed with the bit-reversed input.
    pub fn eval(&self, x: u64) -> Result<u64, HashError> {
        let n = self.input_len;
        if x >> n != 0 {
            return Err(HashError::InputOutOfRange { x, n });
        }
        let mask = (1u64 << n) - 1;
        let xr = x.reverse_bits() >> (64 - n);
        let mut out = 0u64;
        for i in 0..self.output_len {
            let window = (self.seed >> i) & mask;
            out |= (((window & xr).count_ones() & 1) as u64) << i;
        }
        Ok(out)
    }
}

/// Unconditional min-entropy in bits, -log2 of the heaviest mass.
pub fn min_entropy(d: &FiniteDist) -> f64 {
    let max = d.masses().iter().copied().fold(0.0f64, f64::max);
    -max.log2()
}

/// Min-entropy of the first `x_arity` coordinates given the rest: the worst
/// -log2 of a conditional mass over supported pairs.
pub fn conditional_min_entropy(joint: &FiniteDist, x_arity: usize) -> Result<f64, ProbError> {
    let arity = joint.outcomes()[0].len();
    if x_arity == 0 || x_arity >= arity {
        return Err(ProbError::BadCoordinate(x_arity, arity));
    }
    let side_coords: Vec<usize> = (x_arity..arity).collect();
    let side = joint.project(&side_coords)?;
    let mut worst = f64::INFINITY;
    for (outcome, mass) in joint.iter() {
        if mass <= 0.0 {
            continue;
        }
        let side_mass = side.mass_of(&outcome[x_arity..]);
        let cond = mass / side_mass;
        worst = worst.min(-cond.log2());
    }
    Ok(worst.max(0.0))
}

/// A distribution over equal-length bit tuples with a declared min-entropy
/// floor, checked against the computed value at construction.
#[derive(Debug, Clone)]
pub struct EntropySource {
    dist: FiniteDist,
    floor: f64,
}

// Packs a bit tuple into a word, first coordinate most significant.
fn pack_bits(bits: &[u32]) -> u64 {
    bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
}

fn check_bit_tuples(dist: &FiniteDist) -> Result<usize, HashError> {
    let arity = dist.outcomes()[0].len();
    if arity == 0 || arity > 32 {
        return Err(HashError::NotBitTuples);
    }
    for outcome in dist.outcomes() {
        if outcome.len() != arity || outcome.iter().any(|&b| b > 1) {
            return Err(HashError::NotBitTuples);
        }
    }
    Ok(arity)
}

impl EntropySource {
    pub fn new(dist: FiniteDist, floor: f64) -> Result<Self, HashError> {
        check_bit_tuples(&dist)?;
        let computed = min_entropy(&dist);
        if floor > computed + TOL {
            return Err(HashError::FloorTooHigh {
                declared: floor,
                computed,
            });
        }
        Ok(EntropySource { dist, floor })
    }

    /// Declares exactly the computed min-entropy.
    pub fn with_computed_floor(dist: FiniteDist) -> Result<Self, HashError> {
        let floor = min_entropy(&dist);
        Self::new(dist, floor)
    }

    pub fn dist(&self) -> &FiniteDist {
        &self.dist
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn bit_len(&self) -> usize {
        self.dist.outcomes()[0].len()
    }
}

/// A distribution over concatenated bit-tuple pairs (X then Y), with declared
/// floors for X, Y, and the pair jointly.
#[derive(Debug, Clone)]
pub struct PairEntropySource {
    dist: FiniteDist,
    x_arity: usize,
    floor_x: f64,
    floor_y: f64,
    floor_joint: f64,
}

impl PairEntropySource {
    pub fn new(
        dist: FiniteDist,
        x_arity: usize,
        floor_x: f64,
        floor_y: f64,
        floor_joint: f64,
    ) -> Result<Self, HashError> {
        let arity = check_bit_tuples(&dist)?;
        if x_arity == 0 || x_arity >= arity {
            return Err(HashError::BadSplit { x_arity });
        }
        let x_coords: Vec<usize> = (0..x_arity).collect();
        let y_coords: Vec<usize> = (x_arity..arity).collect();
        let hx = min_entropy(&dist.project(&x_coords)?);
        let hy = min_entropy(&dist.project(&y_coords)?);
        let hxy = min_entropy(&dist);
        for (declared, computed) in [(floor_x, hx), (floor_y, hy), (floor_joint, hxy)] {
            if declared > computed + TOL {
                return Err(HashError::FloorTooHigh { declared, computed });
            }
        }
        Ok(PairEntropySource {
            dist,
            x_arity,
            floor_x,
            floor_y,
            floor_joint,
        })
    }

    pub fn with_computed_floors(dist: FiniteDist, x_arity: usize) -> Result<Self, HashError> {
        let arity = check_bit_tuples(&dist)?;
        if x_arity == 0 || x_arity >= arity {
            return Err(HashError::BadSplit { x_arity });
        }
        let x_coords: Vec<usize> = (0..x_arity).collect();
        let y_coords: Vec<usize> = (x_arity..arity).collect();
        let hx = min_entropy(&dist.project(&x_coords)?);
        let hy = min_entropy(&dist.project(&y_coords)?);
        let hxy = min_entropy(&dist);
        Self::new(dist, x_arity, hx, hy, hxy)
    }

    pub fn x_len(&self) -> usize {
        self.x_arity
    }

    pub fn y_len(&self) -> usize {
        self.dist.outcomes()[0].len() - self.x_arity
    }
}

/// Measured distance against the claimed bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractionReport {
    pub measured: f64,
    pub bound: f64,
    pub ok: bool,
}

/// Two-extractor variant reports both the proof constant and the plain bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributedExtractionReport {
    pub measured: f64,
    /// (sqrt(3)/2) eps, the constant the proof actually ends with.
    pub bound_tight: f64,
    /// The eps stated by the lemma.
    pub bound_stated: f64,
    pub ok: bool,
}

/// Enumerates every Toeplitz seed and checks that hashing the source down to
/// m bits lands within eps of uniform, jointly with the seed.
///
/// Premise: m <= declared floor - 2 log2(1/eps).
pub fn lhl_verify(src: &EntropySource, m: usize, eps: f64) -> Result<ExtractionReport, HashError> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(HashError::PremiseViolated(format!("eps {eps} not in (0,1]")));
    }
    let n = src.bit_len();
    if m == 0 || m > n {
        return Err(HashError::OutputTooWide { m, n });
    }
    let budget = src.floor() - 2.0 * (1.0 / eps).log2();
    if m as f64 > budget + TOL {
        return Err(HashError::PremiseViolated(format!(
            "output length {m} exceeds entropy budget {budget:.4}"
        )));
    }
    let seed_bits = ToeplitzHash::seed_bits(n, m);
    let states = 1usize
        .checked_shl((m + seed_bits) as u32)
        .filter(|&s| s <= STATE_CAP)
        .ok_or(HashError::StateCap {
            states: usize::MAX,
            cap: STATE_CAP,
        })?;
    let mut mass = vec![0.0f64; states];
    for (outcome, p) in src.dist().iter() {
        if p <= 0.0 {
            continue;
        }
        let x = pack_bits(outcome);
        for seed in 0..(1u64 << seed_bits) {
            let h = ToeplitzHash::new(n, m, seed)?.eval(x)?;
            mass[((h << seed_bits) | seed) as usize] += p;
        }
    }
    let seed_count = (1u64 << seed_bits) as f64;
    let target = 1.0 / (seed_count * (1u64 << m) as f64);
    let l1: f64 = mass
        .iter()
        .map(|&acc| (acc / seed_count - target).abs())
        .sum();
    let measured = l1 / 2.0;
    Ok(ExtractionReport {
        measured,
        bound: eps,
        ok: measured <= eps + TOL,
    })
}

/// Exhaustive check that two independently seeded extractors applied to the
/// two halves of a pair source produce jointly near-uniform output.
///
/// Premises: m and n_out each within their half's floor minus 2 log2(1/eps),
/// and m + n_out within the joint floor minus 2 log2(1/eps).
pub fn distributed_lhl_verify(
    src: &PairEntropySource,
    m: usize,
    n_out: usize,
    eps: f64,
) -> Result<DistributedExtractionReport, HashError> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(HashError::PremiseViolated(format!("eps {eps} not in (0,1]")));
    }
    let nx = src.x_len();
    let ny = src.y_len();
    if m == 0 || m > nx {
        return Err(HashError::OutputTooWide { m, n: nx });
    }
    if n_out == 0 || n_out > ny {
        return Err(HashError::OutputTooWide { m: n_out, n: ny });
    }
    let tax = 2.0 * (1.0 / eps).log2();
    let checks = [
        (m as f64, src.floor_x, "first half"),
        (n_out as f64, src.floor_y, "second half"),
        ((m + n_out) as f64, src.floor_joint, "joint"),
    ];
    for (len, floor, what) in checks {
        if len > floor - tax + TOL {
            return Err(HashError::PremiseViolated(format!(
                "{what}: output length {len} exceeds entropy budget {:.4}",
                floor - tax
            )));
        }
    }
    let sg_bits = ToeplitzHash::seed_bits(nx, m);
    let sh_bits = ToeplitzHash::seed_bits(ny, n_out);
    let total_bits = m + n_out + sg_bits + sh_bits;
    let states = 1usize
        .checked_shl(total_bits as u32)
        .filter(|&s| s <= STATE_CAP)
        .ok_or(HashError::StateCap {
            states: usize::MAX,
            cap: STATE_CAP,
        })?;
    let mut mass = vec![0.0f64; states];
    for (outcome, p) in src.dist.iter() {
        if p <= 0.0 {
            continue;
        }
        let x = pack_bits(&outcome[..nx]);
        let y = pack_bits(&outcome[nx..]);
        let h_of: Vec<u64> = (0..(1u64 << sh_bits))
            .map(|r| ToeplitzHash::new(ny, n_out, r).and_then(|t| t.eval(y)))
            .collect::<Result<_, _>>()?;
        for s in 0..(1u64 << sg_bits) {
            let g = ToeplitzHash::new(nx, m, s)?.eval(x)?;
            for (r, &h) in h_of.iter().enumerate() {
                let idx = ((((g << n_out) | h) << sg_bits | s) << sh_bits) | r as u64;
                mass[idx as usize] += p;
            }
        }
    }
    let seed_count = (1u64 << (sg_bits + sh_bits)) as f64;
    let target = 1.0 / (1u64 << total_bits) as f64;
    let l1: f64 = mass
        .iter()
        .map(|&acc| (acc / seed_count - target).abs())
        .sum();
    let measured = l1 / 2.0;
    let bound_tight = 3.0f64.sqrt() / 2.0 * eps;
    Ok(DistributedExtractionReport {
        measured,
        bound_tight,
        bound_stated: eps,
        ok: measured <= bound_tight + TOL,
    })
}

/// Exact collision rate of two fixed distinct inputs over every seed.
pub fn collision_rate_exhaustive(
    n: usize,
    m: usize,
    x0: u64,
    x1: u64,
) -> Result<f64, HashError> {
    if x0 == x1 {
        return Err(HashError::InputsEqual);
    }
    let seed_bits = ToeplitzHash::seed_bits(n, m);
    if 1usize.checked_shl(seed_bits as u32).map_or(true, |s| s > STATE_CAP) {
        return Err(HashError::StateCap {
            states: usize::MAX,
            cap: STATE_CAP,
        });
    }
    let mut collisions = 0u64;
    for seed in 0..(1u64 << seed_bits) {
        let h = ToeplitzHash::new(n, m, seed)?;
        if h.eval(x0)? == h.eval(x1)? {
            collisions += 1;
        }
    }
    Ok(collisions as f64 / (1u64 << seed_bits) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionReport {
    pub measured: f64,
    /// 2^-m, the family's collision ceiling.
    pub bound: f64,
    pub sigma: f64,
    pub ok: bool,
}

/// Samples random distinct input pairs under random seeds and compares the
/// collision rate against 2^-m plus three standard deviations.
pub fn collision_probability_test<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    trials: u64,
    rng: &mut R,
) -> Result<CollisionReport, HashError> {
    if trials == 0 {
        return Err(HashError::ZeroLength);
    }
    let seed_bits = ToeplitzHash::seed_bits(n, m);
    if seed_bits > 63 {
        return Err(HashError::WordTooLong { n, m, bits: seed_bits });
    }
    let mut collisions = 0u64;
    for _ in 0..trials {
        let x0 = rng.gen_range(0..(1u64 << n));
        let mut x1 = rng.gen_range(0..(1u64 << n));
        while x1 == x0 {
            x1 = rng.gen_range(0..(1u64 << n));
        }
        let seed = rng.gen_range(0..(1u64 << seed_bits));
        let h = ToeplitzHash::new(n, m, seed)?;
        if h.eval(x0)? == h.eval(x1)? {
            collisions += 1;
        }
    }
    let measured = collisions as f64 / trials as f64;
    let bound = (0.5f64).powi(m as i32);
    let sigma = (bound * (1.0 - bound) / trials as f64).sqrt();
    Ok(CollisionReport {
        measured,
        bound,
        sigma,
        ok: measured <= bound + 3.0 * sigma,
    })
}
