//! Security measurement. Everything here either computes a quantity exactly
//! from a finite joint distribution, or estimates it from samples with an
//! explicit Hoeffding radius. The closeness checkers certify the
//! information-theoretic conditions under which a weak transfer counts as a
//! secure randomized transfer; they never construct simulators.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::engine::{EngineError, RandSource, RandState};
use crate::hashing::{HashError, ToeplitzHash};
use crate::prob::{statistical_distance, FiniteDist, JointBitDist, Outcome, ProbError};
use crate::primitives::{AdversaryDist, PrimError, Provenance, WotParams, WotSample};

#[derive(Debug, Error)]
pub enum AnaError {
    #[error("bad joint layout: {0}")]
    BadLayout(String),
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("computation too large: {0}")]
    TooLarge(String),
    #[error("pair min-entropy {have:.4} below floor {need:.4}")]
    EntropyTooLow { have: f64, need: f64 },
    #[error("empty sample batch")]
    NoSamples,
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    Prim(#[from] PrimError),
    #[error(transparent)]
    Hash(#[from] HashError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

// Canonical six-coordinate layout (x0, x1, c, y, u, v), the same one
// `WotSample::outcome` produces; the error indicator is derived, never stored.
fn check_wot_layout(joint: &FiniteDist) -> Result<(), AnaError> {
    for outcome in joint.outcomes() {
        if outcome.len() != 6 {
            return Err(AnaError::BadLayout(format!(
                "expected arity 6, got {}",
                outcome.len()
            )));
        }
        if outcome[..4].iter().any(|&b| b > 1) || outcome[4] > 2 || outcome[5] > 2 {
            return Err(AnaError::BadLayout(format!("bad coordinates {outcome:?}")));
        }
    }
    Ok(())
}

fn err_bit(outcome: &[u32]) -> u32 {
    outcome[3] ^ if outcome[2] == 0 { outcome[0] } else { outcome[1] }
}

fn other_bit(outcome: &[u32]) -> u32 {
    if outcome[2] == 0 {
        outcome[1]
    } else {
        outcome[0]
    }
}

/// Exact parameters of a weak transfer given its full joint distribution:
/// the error rate, and both prediction advantages conditioned on the
/// respective view together with the error indicator.
pub fn measure_wot_params(joint: &FiniteDist) -> Result<WotParams, AnaError> {
    check_wot_layout(joint)?;
    let eps: f64 = joint
        .iter()
        .filter(|(o, _)| err_bit(o) == 1)
        .map(|(_, m)| m)
        .sum();
    let p = JointBitDist::from_weighted(
        joint
            .iter()
            .map(|(o, m)| (vec![o[2], o[4], err_bit(o)], m)),
    )?
    .pred_adv();
    let q = JointBitDist::from_weighted(
        joint
            .iter()
            .map(|(o, m)| (vec![other_bit(o), o[5], err_bit(o)], m)),
    )?
    .pred_adv();
    Ok(WotParams::new(
        p.min(1.0),
        q.min(1.0),
        // an empty mass sum is -0.0; adding +0.0 restores the sign
        (eps + 0.0).clamp(0.0, 1.0),
        Provenance::Exact,
    )?)
}

/// Exact joint of a sampler under exhaustive tape enumeration; the sampler
/// must consume at most `bits` tape bits per draw.
pub fn enumerate_sampler_joint<F>(bits: usize, mut draw: F) -> Result<FiniteDist, AnaError>
where
    F: FnMut(&mut RandState) -> Result<WotSample, PrimError>,
{
    if bits > 24 {
        return Err(AnaError::TooLarge(format!("{bits} tape bits")));
    }
    let mut counts: BTreeMap<Outcome, u64> = BTreeMap::new();
    for v in 0..(1u64 << bits) {
        let tape: Vec<u8> = (0..bits).map(|i| ((v >> (bits - 1 - i)) & 1) as u8).collect();
        let mut rng = RandState::new(RandSource::Tape(tape));
        let s = draw(&mut rng)?;
        *counts.entry(s.outcome()).or_insert(0) += 1;
    }
    Ok(FiniteDist::from_counts(counts)?)
}

#[derive(Debug, Clone, Copy)]
pub struct WotEstimate {
    pub params: WotParams,
    pub trials: usize,
    pub radius: f64,
    /// Every sample in the batch was identical; the estimate says nothing.
    pub degenerate: bool,
    /// View alphabet was large relative to the training half; the radius
    /// carries an extra slack term for predictor suboptimality.
    pub widened: bool,
}

fn majority_predictor(
    train: &[(u32, u32, u32)],
) -> (BTreeMap<(u32, u32), u32>, u32) {
    let mut votes: BTreeMap<(u32, u32), [u64; 2]> = BTreeMap::new();
    let mut global = [0u64; 2];
    for &(bit, view, e) in train {
        votes.entry((view, e)).or_insert([0, 0])[bit as usize] += 1;
        global[bit as usize] += 1;
    }
    let table = votes
        .into_iter()
        .map(|(k, v)| (k, (v[1] > v[0]) as u32))
        .collect();
    (table, (global[1] > global[0]) as u32)
}

fn predictor_advantage(
    train: &[(u32, u32, u32)],
    eval: &[(u32, u32, u32)],
) -> f64 {
    let (table, fallback) = majority_predictor(train);
    let correct = eval
        .iter()
        .filter(|&&(bit, view, e)| *table.get(&(view, e)).unwrap_or(&fallback) == bit)
        .count();
    (2.0 * correct as f64 / eval.len() as f64 - 1.0).clamp(0.0, 1.0)
}

/// Estimates (p, q, eps) from a sample batch. The error rate is a plain
/// count; the advantages use an empirical-majority predictor fit on the
/// first half and scored on the second, which avoids the optimism of the
/// plug-in optimal predictor. The advantages are affine in an empirical
/// accuracy with slope two, so the reported radius is twice the Hoeffding
/// radius at the requested failure probability.
pub fn estimate_wot_params(
    batch: &[WotSample],
    fail_prob: f64,
) -> Result<WotEstimate, AnaError> {
    if batch.len() < 4 {
        return Err(AnaError::NoSamples);
    }
    if !(fail_prob > 0.0 && fail_prob < 1.0) {
        return Err(AnaError::BadParam(format!(
            "failure probability {fail_prob} outside (0,1)"
        )));
    }
    let eps = batch.iter().filter(|s| s.e() == 1).count() as f64 / batch.len() as f64;
    let half = batch.len() / 2;
    let (train, eval) = batch.split_at(half);
    let choice = |s: &WotSample| (s.c as u32, s.u.code(), s.e() as u32);
    let hidden = |s: &WotSample| (s.other() as u32, s.v.code(), s.e() as u32);
    let train_p: Vec<_> = train.iter().map(choice).collect();
    let eval_p: Vec<_> = eval.iter().map(choice).collect();
    let train_q: Vec<_> = train.iter().map(hidden).collect();
    let eval_q: Vec<_> = eval.iter().map(hidden).collect();
    let p = predictor_advantage(&train_p, &eval_p);
    let q = predictor_advantage(&train_q, &eval_q);

    let mut radius = 2.0 * ((1.0 / fail_prob).ln() / (2.0 * eval.len() as f64)).sqrt();
    let alphabet = train_p
        .iter()
        .map(|&(_, v, e)| (v, e))
        .chain(train_q.iter().map(|&(_, v, e)| (v, e)))
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let widened = alphabet as f64 * 50.0 > train.len() as f64;
    if widened {
        // slack for the gap between the learned and the optimal predictor
        radius += (alphabet as f64 / train.len() as f64).sqrt();
    }
    let first = batch[0];
    let degenerate = batch.iter().all(|s| *s == first);
    let params = WotParams::new(
        p,
        q,
        eps,
        Provenance::Estimated { radius },
    )?;
    Ok(WotEstimate {
        params,
        trials: batch.len(),
        radius,
        degenerate,
        widened,
    })
}

/// Exact prediction advantage of X0 xor X1 given the rest of the outcome,
/// the quantity bounded by q in the malicious weak-transfer definition.
/// Layout: coordinates 0 and 1 are the strings, everything after is the
/// observer's view.
pub fn xor_security_value(joint: &FiniteDist) -> Result<f64, AnaError> {
    for o in joint.outcomes() {
        if o.len() < 2 || o[0] > 1 || o[1] > 1 {
            return Err(AnaError::BadLayout(
                "need two leading bit coordinates".into(),
            ));
        }
    }
    let xor = JointBitDist::from_weighted(joint.iter().map(|(o, m)| {
        let mut v = Vec::with_capacity(o.len() - 1);
        v.push(o[0] ^ o[1]);
        v.extend_from_slice(&o[2..]);
        (v, m)
    }))?;
    Ok(xor.pred_adv())
}

// Reweights each view group so the XOR of the two leading bits is exactly
// unbiased, moving the minimal mass. Empty parity classes receive the
// transferred mass split evenly over their two cells.
fn uniformize_xor(joint: &FiniteDist) -> Result<FiniteDist, AnaError> {
    let mut groups: BTreeMap<Vec<u32>, [f64; 4]> = BTreeMap::new();
    for (o, m) in joint.iter() {
        let cell = (o[0] * 2 + o[1]) as usize;
        groups.entry(o[2..].to_vec()).or_insert([0.0; 4])[cell] += m;
    }
    let mut table: Vec<(Outcome, f64)> = Vec::new();
    for (side, cells) in groups {
        let even = cells[0] + cells[3];
        let odd = cells[1] + cells[2];
        let target = (even + odd) / 2.0;
        let mut push = |x0: u32, x1: u32, m: f64| {
            let mut o = vec![x0, x1];
            o.extend_from_slice(&side);
            table.push((o, m));
        };
        for (sum, pair) in [(even, [(0u32, 0u32), (1, 1)]), (odd, [(0, 1), (1, 0)])] {
            if sum > 0.0 {
                let scale = target / sum;
                for (x0, x1) in pair {
                    push(x0, x1, cells[(x0 * 2 + x1) as usize] * scale);
                }
            } else if target > 0.0 {
                for (x0, x1) in pair {
                    push(x0, x1, target / 2.0);
                }
            }
        }
    }
    Ok(FiniteDist::from_weighted(table)?)
}

// The explicit choice kernel: given a pair distribution with unbiased XOR,
// Pr[C=0 | x0, x1] = min over x1' of P(x0, x1') divided by P(x0, x1) makes
// the unchosen string exactly unbiased given (C, X_C, view).
fn xor_choice_kernel(uniformized: &FiniteDist) -> BTreeMap<Outcome, f64> {
    let mut mass: BTreeMap<Outcome, f64> = BTreeMap::new();
    for (o, m) in uniformized.iter() {
        mass.insert(o.to_vec(), m);
    }
    let cell = |x0: u32, x1: u32, side: &[u32]| -> f64 {
        let mut o = vec![x0, x1];
        o.extend_from_slice(side);
        mass.get(&o).copied().unwrap_or(0.0)
    };
    let mut kernel = BTreeMap::new();
    for (o, m) in uniformized.iter() {
        if m <= 0.0 {
            continue;
        }
        let side = &o[2..];
        let k0 = (cell(o[0], 0, side).min(cell(o[0], 1, side)) / m).clamp(0.0, 1.0);
        kernel.insert(o.to_vec(), k0);
    }
    kernel
}

// Applies a choice kernel to a pair joint, producing the layout
// (X_{1-C}, C, X_C, view...).
fn apply_choice_kernel(
    joint: &FiniteDist,
    kernel: &BTreeMap<Outcome, f64>,
) -> Result<FiniteDist, AnaError> {
    let mut table: Vec<(Outcome, f64)> = Vec::new();
    for (o, m) in joint.iter() {
        if m <= 0.0 {
            continue;
        }
        let k0 = *kernel.get(o).ok_or_else(|| {
            AnaError::BadLayout("kernel undefined on a supported cell".into())
        })?;
        let side = &o[2..];
        let mut push = |hidden: u32, c: u32, shown: u32, mm: f64| {
            let mut v = vec![hidden, c, shown];
            v.extend_from_slice(side);
            table.push((v, mm));
        };
        push(o[1], 0, o[0], m * k0);
        push(o[0], 1, o[1], m * (1.0 - k0));
    }
    Ok(FiniteDist::from_weighted(table)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum CorruptSide {
    A,
    B,
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct MaliciousCheck {
    pub side: CorruptSide,
    /// Distance of X0 xor X1 from unbiased given the view (corrupt receiver
    /// only); the existence criterion for a hidden-choice variable.
    pub xor_closeness: Option<f64>,
    /// The certified condition value: distance of the protected quantity
    /// from uniform given everything the corrupted party holds.
    pub closeness: f64,
    /// Residual distance after the kernel is applied to the XOR-uniformized
    /// joint; zero up to rounding, a self-check of the construction.
    pub residual: Option<f64>,
    pub ok: bool,
}

/// Certifies the malicious-model conditions on an exact joint.
///
/// Corrupt A: layout (C, view...); the value is the distance of C from
/// uniform given the view. Corrupt B: layout (X0, X1, view...); the hidden
/// choice is constructed by the explicit kernel and the value is the
/// distance of X_{1-C} from uniform given (C, X_C, view).
pub fn check_rot_conditions_malicious(
    joint: &FiniteDist,
    side: CorruptSide,
    eps: f64,
) -> Result<MaliciousCheck, AnaError> {
    match side {
        CorruptSide::A => {
            for o in joint.outcomes() {
                if o.is_empty() || o[0] > 1 {
                    return Err(AnaError::BadLayout("coordinate 0 must be the choice bit".into()));
                }
            }
            let closeness = JointBitDist::new(joint.clone())?.pred_adv() / 2.0;
            Ok(MaliciousCheck {
                side,
                xor_closeness: None,
                closeness,
                residual: None,
                ok: closeness <= eps + 1e-12,
            })
        }
        CorruptSide::B => {
            let xor_closeness = xor_security_value(joint)? / 2.0;
            let uniformized = uniformize_xor(joint)?;
            let kernel = xor_choice_kernel(&uniformized);
            let residual =
                JointBitDist::new(apply_choice_kernel(&uniformized, &kernel)?)?.pred_adv() / 2.0;
            let closeness =
                JointBitDist::new(apply_choice_kernel(joint, &kernel)?)?.pred_adv() / 2.0;
            Ok(MaliciousCheck {
                side,
                xor_closeness: Some(xor_closeness),
                closeness,
                residual: Some(residual),
                ok: closeness <= eps + 1e-12,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SemiHonestCheck {
    /// Distance of (X0, X1, C, Y) from the ideal randomized transfer.
    pub correctness: f64,
    /// Distance of X_{1-C} from uniform given (C, Y, V).
    pub hidden_string: f64,
    /// Distance of C from uniform given (X0, X1, U).
    pub choice: f64,
    /// Three times the worst condition, the theorem's overall error.
    pub bound: f64,
    pub ok: bool,
}

/// Certifies the semi-honest conditions on an exact six-coordinate joint;
/// each condition must hold at eps for an overall error of 3 eps.
pub fn check_rot_conditions_semihonest(
    joint: &FiniteDist,
    eps: f64,
) -> Result<SemiHonestCheck, AnaError> {
    check_wot_layout(joint)?;
    let values = joint.project(&[0, 1, 2, 3])?;
    let mut ideal_table: Vec<(Outcome, f64)> = Vec::new();
    for v in 0..16u32 {
        let o = vec![v >> 3 & 1, v >> 2 & 1, v >> 1 & 1, v & 1];
        let m = if o[3] == if o[2] == 0 { o[0] } else { o[1] } {
            0.125
        } else {
            0.0
        };
        ideal_table.push((o, m));
    }
    let ideal = FiniteDist::from_weighted(ideal_table)?;
    let (a, b) = FiniteDist::align(&values, &ideal);
    let correctness = statistical_distance(&a, &b)?;
    let hidden_string = JointBitDist::from_weighted(
        joint
            .iter()
            .map(|(o, m)| (vec![other_bit(o), o[2], o[3], o[5]], m)),
    )?
    .pred_adv()
        / 2.0;
    let choice = JointBitDist::from_weighted(
        joint
            .iter()
            .map(|(o, m)| (vec![o[2], o[0], o[1], o[4]], m)),
    )?
    .pred_adv()
        / 2.0;
    let worst = correctness.max(hidden_string).max(choice);
    Ok(SemiHonestCheck {
        correctness,
        hidden_string,
        choice,
        bound: 3.0 * worst,
        ok: worst <= eps + 1e-12,
    })
}

/// JSON report for a parameter set: {epsilon, p, q, method, radius,
/// conditions}.
pub fn report_json(
    params: &WotParams,
    conditions: Option<serde_json::Value>,
) -> serde_json::Value {
    let (method, radius) = match params.provenance {
        Provenance::Exact => ("exact", None),
        Provenance::UpperBound => ("upper_bound", None),
        Provenance::Estimated { radius } => ("monte_carlo_optimal_predictor", Some(radius)),
    };
    serde_json::json!({
        "epsilon": params.eps,
        "p": params.p,
        "q": params.q,
        "method": method,
        "radius": radius,
        "conditions": conditions,
    })
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct UotClosenessReport {
    /// Exact distance of the hidden hashed string from uniform given
    /// (C, U_C, R0, R1), with the hidden choice built by the entropy
    /// case split.
    pub closeness: f64,
    /// The theorem's guarantee, twice the closeness target.
    pub bound: f64,
    pub ok: bool,
}

const UOT_HIST_CELL_CAP: usize = 1 << 22;
const UOT_WORK_CAP: u128 = 1 << 32;

struct HashTables {
    // per role, per distinct string value: output under every seed
    tables: [BTreeMap<u64, Vec<u8>>; 2],
}

impl HashTables {
    fn build(n: usize, ell: usize, values: [&std::collections::BTreeSet<u64>; 2]) -> Result<Self, AnaError> {
        let seed_bits = ToeplitzHash::seed_bits(n, ell);
        let seed_space = 1usize << seed_bits;
        let mut tables = [BTreeMap::new(), BTreeMap::new()];
        for role in 0..2 {
            for &x in values[role] {
                let mut per_seed = Vec::with_capacity(seed_space);
                for r in 0..seed_space {
                    let h = ToeplitzHash::new(n, ell, r as u64)?.eval(x)?;
                    per_seed.push(h as u8);
                }
                tables[role].insert(x, per_seed);
            }
        }
        Ok(HashTables { tables })
    }
}

// One resolved case-split branch: the constructed choice, the two strings by
// role, and the branch mass.
struct Branch {
    c: u8,
    x0: u64,
    x1: u64,
    mass: f64,
}

// Case split of the hashing theorem: a string value is light when its
// marginal probability is at most 2^(-alpha/2). Both light: C = 1. Exactly
// one light: C points at the heavy side, hiding the light string. Neither
// light: a fresh coin.
fn split_branches(
    support: &[(u64, u64, f64)],
    alpha: f64,
) -> (Vec<Branch>, [BTreeMap<u64, f64>; 2]) {
    let mut marginals: [BTreeMap<u64, f64>; 2] = [BTreeMap::new(), BTreeMap::new()];
    for &(x0, x1, m) in support {
        *marginals[0].entry(x0).or_insert(0.0) += m;
        *marginals[1].entry(x1).or_insert(0.0) += m;
    }
    let threshold = (-alpha / 2.0).exp2() * (1.0 + 1e-12);
    let mut branches = Vec::new();
    for &(x0, x1, m) in support {
        let light0 = marginals[0][&x0] <= threshold;
        let light1 = marginals[1][&x1] <= threshold;
        match (light0, light1) {
            (true, true) => branches.push(Branch { c: 1, x0, x1, mass: m }),
            (false, true) => branches.push(Branch { c: 0, x0, x1, mass: m }),
            (true, false) => branches.push(Branch { c: 1, x0, x1, mass: m }),
            (false, false) => {
                branches.push(Branch { c: 0, x0, x1, mass: m / 2.0 });
                branches.push(Branch { c: 1, x0, x1, mass: m / 2.0 });
            }
        }
    }
    (branches, marginals)
}

// Closeness from a histogram over (c, u_c, r0, r1, u_hidden) cells, the
// hidden output innermost.
fn histogram_closeness(hist: &[f64], out_space: usize) -> f64 {
    let mut total = 0.0;
    for group in hist.chunks(out_space) {
        let tot: f64 = group.iter().sum();
        if tot <= 0.0 {
            continue;
        }
        let flat = tot / out_space as f64;
        total += group.iter().map(|&m| (m - flat).abs()).sum::<f64>();
    }
    total / 2.0
}

/// Exact closeness of the hashed hidden string to uniform for one
/// adversarial pair distribution fed into the entropy-floor hashing
/// protocol: the hidden choice follows the theorem's case split, both hash
/// seeds are enumerated, and the histogram over (C, U_C, R0, R1, U_{1-C})
/// is folded into a statistical distance. The guarantee is 2 eps whenever
/// ell is admissible at eps.
pub fn uot_hash_closeness(
    dist: &AdversaryDist,
    alpha: f64,
    ell: usize,
    eps: f64,
) -> Result<UotClosenessReport, AnaError> {
    let n = dist.string_len();
    if ell == 0 || ell > n {
        return Err(AnaError::BadParam(format!("output length {ell} outside 1..={n}")));
    }
    if !(alpha > 0.0 && alpha <= 2.0 * n as f64) {
        return Err(AnaError::BadParam(format!("entropy floor {alpha} outside (0, {}]", 2 * n)));
    }
    let have = dist.entropy()?;
    if have + 1e-9 < alpha {
        return Err(AnaError::EntropyTooLow { have, need: alpha });
    }
    let seed_bits = ToeplitzHash::seed_bits(n, ell);
    let seed_space = 1usize << seed_bits;
    let out_space = 1usize << ell;
    let cells = 2 * out_space * out_space * seed_space * seed_space;
    if cells > UOT_HIST_CELL_CAP {
        return Err(AnaError::TooLarge(format!("{cells} histogram cells")));
    }

    let mut hist = vec![0.0f64; cells];
    let seed_mass = 1.0 / (seed_space * seed_space) as f64;
    let idx_of = |c: usize, uc: usize, r0: usize, r1: usize, uh: usize| {
        ((((c * out_space + uc) * seed_space + r0) * seed_space + r1) * out_space) + uh
    };

    if let AdversaryDist::FixedBits { .. } = dist {
        // the two strings are independent; work with per-role output
        // distributions instead of the full support
        let support = side_supports(dist)?;
        let sets: [std::collections::BTreeSet<u64>; 2] = [
            support[0].keys().copied().collect(),
            support[1].keys().copied().collect(),
        ];
        let tables = HashTables::build(n, ell, [&sets[0], &sets[1]])?;
        // per role, per seed: output distribution
        let mut role_dists = [
            vec![vec![0.0f64; out_space]; seed_space],
            vec![vec![0.0f64; out_space]; seed_space],
        ];
        for role in 0..2 {
            for (&x, &m) in &support[role] {
                let per_seed = &tables.tables[role][&x];
                for r in 0..seed_space {
                    role_dists[role][r][per_seed[r] as usize] += m;
                }
            }
        }
        let threshold = (-alpha / 2.0).exp2() * (1.0 + 1e-12);
        let light0 = support[0].values().next().copied().unwrap_or(0.0) <= threshold;
        let light1 = support[1].values().next().copied().unwrap_or(0.0) <= threshold;
        let branch_list: Vec<(usize, f64)> = match (light0, light1) {
            (true, true) | (true, false) => vec![(1, 1.0)],
            (false, true) => vec![(0, 1.0)],
            (false, false) => vec![(0, 0.5), (1, 0.5)],
        };
        for (c, bmass) in branch_list {
            for r0 in 0..seed_space {
                for r1 in 0..seed_space {
                    let (rc, rh) = if c == 0 { (r0, r1) } else { (r1, r0) };
                    let shown = &role_dists[c][rc];
                    let hidden = &role_dists[1 - c][rh];
                    for (uc, &ms) in shown.iter().enumerate() {
                        if ms <= 0.0 {
                            continue;
                        }
                        for (uh, &mh) in hidden.iter().enumerate() {
                            hist[idx_of(c, uc, r0, r1, uh)] += bmass * ms * mh * seed_mass;
                        }
                    }
                }
            }
        }
    } else {
        let support = dist.support()?;
        let work = support.len() as u128 * (seed_space as u128) * (seed_space as u128);
        if work > UOT_WORK_CAP {
            return Err(AnaError::TooLarge(format!("{work} accumulation steps")));
        }
        let (branches, _) = split_branches(&support, alpha);
        let mut sets: [std::collections::BTreeSet<u64>; 2] = Default::default();
        for b in &branches {
            sets[0].insert(b.x0);
            sets[1].insert(b.x1);
        }
        let tables = HashTables::build(n, ell, [&sets[0], &sets[1]])?;
        for b in &branches {
            let t0 = &tables.tables[0][&b.x0];
            let t1 = &tables.tables[1][&b.x1];
            let w = b.mass * seed_mass;
            let c = b.c as usize;
            for r0 in 0..seed_space {
                let u0 = t0[r0] as usize;
                let base = if c == 0 {
                    // shown is role 0 under r0
                    Some(u0)
                } else {
                    None
                };
                for r1 in 0..seed_space {
                    let u1 = t1[r1] as usize;
                    let (uc, uh) = match base {
                        Some(uc) => (uc, u1),
                        None => (u1, u0),
                    };
                    hist[idx_of(c, uc, r0, r1, uh)] += w;
                }
            }
        }
    }
    let closeness = histogram_closeness(&hist, out_space);
    Ok(UotClosenessReport {
        closeness,
        bound: 2.0 * eps,
        ok: closeness <= 2.0 * eps + 1e-12,
    })
}

// Per-role value distributions for a pinned-bits adversary; both sides are
// independent and uniform over their free bits.
fn side_supports(dist: &AdversaryDist) -> Result<[BTreeMap<u64, f64>; 2], AnaError> {
    let AdversaryDist::FixedBits { n, pinned } = dist else {
        return Err(AnaError::BadParam("pinned-bits family expected".into()));
    };
    let n = *n;
    let mut out: [BTreeMap<u64, f64>; 2] = [BTreeMap::new(), BTreeMap::new()];
    for role in 0..2 {
        let offset = role * n;
        let mut fixed = vec![None; n];
        for &(pos, bit) in pinned {
            if pos >= offset && pos < offset + n {
                fixed[pos - offset] = Some(bit);
            }
        }
        let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
        if free.len() > 24 {
            return Err(AnaError::TooLarge(format!("{} free bits on one side", free.len())));
        }
        let mass = 1.0 / (1u64 << free.len()) as f64;
        for v in 0..(1u64 << free.len()) {
            // position 0 is the most significant bit of the string
            let mut x = 0u64;
            for i in 0..n {
                let bit = match fixed[i] {
                    Some(b) => b as u64,
                    None => {
                        let j = free.iter().position(|&p| p == i).expect("free position");
                        (v >> (free.len() - 1 - j)) & 1
                    }
                };
                x = (x << 1) | bit;
            }
            *out[role].entry(x).or_insert(0.0) += mass;
        }
    }
    Ok(out)
}

pub struct UotCatalogEntry {
    pub label: String,
    pub dist: AdversaryDist,
}

/// Twenty adversarial pair distributions for the hashing-protocol check:
/// pinned-bit families, structured maps, and skewed explicit tables. All
/// have joint min-entropy at least n, so they are admissible at alpha = n.
/// Requires an even string length of at least 4.
pub fn uot_catalog(n: usize) -> Result<Vec<UotCatalogEntry>, AnaError> {
    if n < 4 || n % 2 != 0 || n > 16 {
        return Err(AnaError::BadParam(format!(
            "catalog needs an even string length in 4..=16, got {n}"
        )));
    }
    let mask = (1u64 << n) - 1;
    let half = n / 2;
    let mut out: Vec<UotCatalogEntry> = Vec::new();
    let mut push = |label: &str, dist: Result<AdversaryDist, PrimError>| -> Result<(), AnaError> {
        out.push(UotCatalogEntry {
            label: label.to_string(),
            dist: dist?,
        });
        Ok(())
    };

    push("uniform-pair", AdversaryDist::fixed_bits(n, vec![]))?;
    push(
        "first-string-zero",
        AdversaryDist::fixed_bits(n, (0..n).map(|i| (i, 0)).collect()),
    )?;
    push(
        "second-string-ones",
        AdversaryDist::fixed_bits(n, (n..2 * n).map(|i| (i, 1)).collect()),
    )?;
    push(
        "first-string-alternating",
        AdversaryDist::fixed_bits(n, (0..n).map(|i| (i, (i % 2) as u8)).collect()),
    )?;
    push(
        "half-pinned-each",
        AdversaryDist::fixed_bits(
            n,
            (0..half)
                .map(|i| (i, 0))
                .chain((2 * n - half..2 * n).map(|i| (i, 1)))
                .collect(),
        ),
    )?;
    push(
        "even-positions-pinned",
        AdversaryDist::fixed_bits(n, (0..n).map(|i| (2 * i, ((i / 2) % 2) as u8)).collect()),
    )?;
    push("copied-strings", AdversaryDist::subset_function(n, n, |s| (s, s)))?;
    push(
        "complement-strings",
        AdversaryDist::subset_function(n, n, move |s| (s, !s & mask)),
    )?;
    {
        let bits = n;
        push(
            "reversed-strings",
            AdversaryDist::subset_function(n, n, move |s| {
                let mut r = 0u64;
                for i in 0..bits {
                    r |= ((s >> i) & 1) << (bits - 1 - i);
                }
                (s, r)
            }),
        )?;
    }
    push(
        "xor-masked",
        AdversaryDist::subset_function(n, n, move |s| (s, (s ^ 0x5A) & mask)),
    )?;
    {
        let bits = n as u32;
        push(
            "rotated",
            AdversaryDist::subset_function(n, n, move |s| {
                (s, ((s << 1) | (s >> (bits - 1))) & mask)
            }),
        )?;
    }
    {
        let low = (1u64 << half) - 1;
        push(
            "first-string-coarse",
            AdversaryDist::subset_function(n, n, move |s| (s & !low & mask, s)),
        )?;
        push(
            "second-string-coarse",
            AdversaryDist::subset_function(n, n, move |s| (s, s >> half)),
        )?;
    }
    {
        // masses 2^-n on pairs with odd second string, 2^-(n+1) on pairs
        // with even second string; joint min-entropy exactly n
        let heavy = 1.0 / (1u64 << n) as f64;
        let mut table: Vec<(Outcome, f64)> = Vec::new();
        for i in 0..(1u64 << (n - 1)) {
            table.push((pair_outcome(i, (2 * i + 1) & mask, n), heavy));
        }
        for j in 0..(1u64 << n) {
            table.push((pair_outcome(j, (2 * j) & mask, n), heavy / 2.0));
        }
        push(
            "skewed-two-tier",
            AdversaryDist::explicit(n, FiniteDist::from_weighted(table)?),
        )?;
    }
    {
        // half the mass on a single heavy first string, the rest diagonal
        let light = 0.5 / (1u64 << n) as f64;
        let mut table: Vec<(Outcome, f64)> = Vec::new();
        for x1 in 0..(1u64 << n) {
            table.push((pair_outcome(0, x1, n), light));
        }
        for i in 0..(1u64 << n) {
            table.push((pair_outcome(i, i, n), light));
        }
        push(
            "heavy-row-plus-diagonal",
            AdversaryDist::explicit(n, FiniteDist::from_weighted(table)?),
        )?;
    }
    {
        // quarter of the mass at 2^-n, the rest at 2^-(n+2)
        let heavy = 1.0 / (1u64 << n) as f64;
        let mut table: Vec<(Outcome, f64)> = Vec::new();
        for i in 0..(1u64 << (n - 2)) {
            table.push((pair_outcome(i, i ^ 1, n), heavy));
        }
        let quarter = 1u64 << (n - 2);
        for j in 0..3 * (1u64 << n) {
            let x0 = quarter + (j % (mask + 1 - quarter));
            table.push((pair_outcome(x0, j & mask, n), heavy / 4.0));
        }
        push(
            "skewed-three-tier",
            AdversaryDist::explicit(n, FiniteDist::from_weighted(table)?),
        )?;
    }
    push(
        "first-high-half-ones",
        AdversaryDist::fixed_bits(n, (0..half).map(|i| (i, 1)).collect()),
    )?;
    push(
        "every-fourth-pinned",
        AdversaryDist::fixed_bits(n, (0..2 * n).step_by(4).map(|i| (i, 1)).collect()),
    )?;
    {
        let bits = n;
        push(
            "overlapping-windows",
            AdversaryDist::subset_function(n, n + 2, move |s| {
                (s & ((1 << bits) - 1), (s >> 2) & ((1 << bits) - 1))
            }),
        )?;
    }
    {
        let bits = n;
        push(
            "copy-or-complement",
            AdversaryDist::subset_function(n, n + 1, move |s| {
                let m = (1u64 << bits) - 1;
                let x = s & m;
                if s >> bits == 0 {
                    (x, x)
                } else {
                    (x, !x & m)
                }
            }),
        )?;
    }
    Ok(out)
}

// Bit-tuple outcome for an explicit pair table, first string first,
// most significant bit first.
fn pair_outcome(x0: u64, x1: u64, n: usize) -> Outcome {
    let mut o = Vec::with_capacity(2 * n);
    for i in (0..n).rev() {
        o.push(((x0 >> i) & 1) as u32);
    }
    for i in (0..n).rev() {
        o.push(((x1 >> i) & 1) as u32);
    }
    o
}
