//! Pipeline synthesis. Given weak-transfer parameters (p, q, eps) and a
//! security exponent k, the planner produces a schedule of reduction steps
//! whose closed-form parameter propagation lands every coordinate at or
//! below 2^-k, refuses provably impossible requests, and can execute a plan
//! against a leaf model to confirm the claims. The schedules follow fixed
//! recipes; optimal step selection is an open problem and out of scope.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{estimate_wot_params, measure_wot_params, AnaError};
use crate::engine::{trial_seed, RandSource, RandState};
use crate::prob::{FiniteDist, Outcome, ProbError};
use crate::primitives::{PrimError, Provenance, View, WotParams, WotSample};
use crate::reductions::{compose_steps, RedError, ReductionStep, WotModel};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("impossible request: p + q + 2*eps = {sum} reaches 1")]
    Impossible { sum: f64 },
    #[error("outside known-achievable region: p={p}, q={q}, eps={eps} fit no schedule")]
    OutsideKnownRegion { p: f64, q: f64, eps: f64 },
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("bad plan: {0}")]
    BadPlan(String),
    #[error("exact execution too large: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Red(#[from] RedError),
    #[error(transparent)]
    Prim(#[from] PrimError),
    #[error(transparent)]
    Ana(#[from] AnaError),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// A bare parameter triple as tracked through a plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub p: f64,
    pub q: f64,
    pub eps: f64,
}

impl Triple {
    pub fn new(p: f64, q: f64, eps: f64) -> Result<Self, PlanError> {
        for (name, v) in [("p", p), ("q", q), ("eps", eps)] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(PlanError::BadParam(format!("{name} = {v} outside [0,1]")));
            }
        }
        Ok(Triple { p, q, eps })
    }

    pub fn worst(&self) -> f64 {
        self.p.max(self.q).max(self.eps)
    }

    pub fn params(&self, provenance: Provenance) -> Result<WotParams, PlanError> {
        Ok(WotParams::new(self.p, self.q, self.eps, provenance)?)
    }
}

/// True iff no protocol at all can amplify the triple: the three faults
/// together already simulate the transfer from an open channel.
pub fn check_impossible(p: f64, q: f64, eps: f64) -> bool {
    p + q + 2.0 * eps >= 1.0
}

fn ensure_possible(t: Triple) -> Result<(), PlanError> {
    if check_impossible(t.p, t.q, t.eps) {
        return Err(PlanError::Impossible {
            sum: t.p + t.q + 2.0 * t.eps,
        });
    }
    Ok(())
}

// (1 - (1-2e)^n) / 2, the error map shared by both copy reductions.
fn flip_accumulate(eps: f64, n: usize) -> f64 {
    ((1.0 - (1.0 - 2.0 * eps).powi(n as i32)) / 2.0).clamp(0.0, 0.5)
}

// Majority-vote failure: upper tail of Binomial(n, eps) from ceil(n/2),
// accumulated in log space so large arities stay finite.
fn majority_tail(n: usize, eps: f64) -> f64 {
    if eps <= 0.0 {
        return 0.0;
    }
    if eps >= 1.0 {
        return 1.0;
    }
    let start = n.div_ceil(2);
    let (le, l1e) = (eps.ln(), (1.0 - eps).ln());
    let mut ln_binom = 0.0;
    for i in 0..start {
        ln_binom += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    let mut total = 0.0;
    for i in start..=n {
        total += (ln_binom + i as f64 * le + (n - i) as f64 * l1e).exp();
        if i < n {
            ln_binom += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        }
    }
    total.clamp(0.0, 1.0)
}

/// Closed-form parameter propagation for one reduction step. Only the
/// parameter-tracked steps are allowed in plans.
pub fn step_map(step: ReductionStep, t: Triple) -> Result<Triple, PlanError> {
    let one_minus = |v: f64, n: usize| 1.0 - (1.0 - v).powi(n as i32);
    match step {
        ReductionStep::RReduce { n } => {
            if n == 0 {
                return Err(PlanError::BadPlan("zero arity".into()));
            }
            Ok(Triple {
                p: one_minus(t.p, n),
                q: t.q.powi(n as i32),
                eps: flip_accumulate(t.eps, n),
            })
        }
        ReductionStep::SReduce { n } => {
            if n == 0 {
                return Err(PlanError::BadPlan("zero arity".into()));
            }
            Ok(Triple {
                p: t.p.powi(n as i32),
                q: one_minus(t.q, n),
                eps: flip_accumulate(t.eps, n),
            })
        }
        ReductionStep::EReduce { n } => {
            if n % 2 == 0 {
                return Err(PlanError::BadPlan(format!("even error-reduction arity {n}")));
            }
            Ok(Triple {
                p: one_minus(t.p, n),
                q: one_minus(t.q, n),
                eps: majority_tail(n, t.eps),
            })
        }
        ReductionStep::Rotor => Ok(Triple {
            p: t.q,
            q: t.p,
            eps: t.eps,
        }),
        other => Err(PlanError::BadPlan(format!(
            "step {other:?} has no closed-form parameter map"
        ))),
    }
}

/// One scheduled step together with the parameters claimed after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanNode {
    #[serde(flatten)]
    pub step: ReductionStep,
    pub claimed: Triple,
}

/// A full amplification schedule. Steps are listed innermost first: the
/// first entry consumes raw leaves, the last produces the root instance.
/// Claimed parameters are worst-case closed-form propagations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplificationPlan {
    pub target_k: u32,
    pub input: Triple,
    pub tree: Vec<PlanNode>,
    pub leaf_count: u64,
    pub theorem: String,
}

impl AmplificationPlan {
    pub fn steps(&self) -> Vec<ReductionStep> {
        self.tree.iter().map(|n| n.step).collect()
    }

    pub fn root(&self) -> Triple {
        self.tree.last().map(|n| n.claimed).unwrap_or(self.input)
    }

    pub fn target(&self) -> f64 {
        0.5f64.powi(self.target_k as i32)
    }

    /// Recomputes the propagation and leaf product; rejects tampered plans.
    pub fn validate(&self) -> Result<(), PlanError> {
        let mut cur = self.input;
        let mut leaves: u64 = 1;
        for node in &self.tree {
            cur = step_map(node.step, cur)?;
            for (have, want) in [
                (node.claimed.p, cur.p),
                (node.claimed.q, cur.q),
                (node.claimed.eps, cur.eps),
            ] {
                if (have - want).abs() > 1e-9 {
                    return Err(PlanError::BadPlan(format!(
                        "claimed {have} diverges from propagated {want}"
                    )));
                }
            }
            leaves = leaves.saturating_mul(node.step.arity() as u64);
        }
        if leaves != self.leaf_count {
            return Err(PlanError::BadPlan(format!(
                "leaf count {} but steps multiply to {leaves}",
                self.leaf_count
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PlanError> {
        let plan: AmplificationPlan = serde_json::from_str(text)
            .map_err(|e| PlanError::BadPlan(format!("unparsable plan: {e}")))?;
        plan.validate()?;
        Ok(plan)
    }
}

struct PlanBuilder {
    input: Triple,
    cur: Triple,
    tree: Vec<PlanNode>,
}

impl PlanBuilder {
    fn new(input: Triple) -> Self {
        PlanBuilder {
            input,
            cur: input,
            tree: Vec::new(),
        }
    }

    fn push(&mut self, step: ReductionStep) -> Result<(), PlanError> {
        self.cur = step_map(step, self.cur)?;
        self.tree.push(PlanNode {
            step,
            claimed: self.cur,
        });
        Ok(())
    }

    // one squaring round: two pair reduces, each shrinking the larger of
    // the two leak parameters
    fn squaring_round(&mut self) -> Result<(), PlanError> {
        for _ in 0..2 {
            let step = if self.cur.p >= self.cur.q {
                ReductionStep::SReduce { n: 2 }
            } else {
                ReductionStep::RReduce { n: 2 }
            };
            self.push(step)?;
        }
        Ok(())
    }

    fn finish(self, target_k: u32, theorem: &str) -> AmplificationPlan {
        let leaf_count = self
            .tree
            .iter()
            .fold(1u64, |acc, n| acc.saturating_mul(n.step.arity() as u64));
        AmplificationPlan {
            target_k,
            input: self.input,
            tree: self.tree,
            leaf_count,
            theorem: theorem.to_string(),
        }
    }
}

/// Error-free amplification: squaring rounds drive p + q below 2^-k using
/// at most 2 k^2 / (1-p-q)^4 leaves.
pub fn plan_zero_error(p: f64, q: f64, k: u32) -> Result<AmplificationPlan, PlanError> {
    let input = Triple::new(p, q, 0.0)?;
    ensure_possible(input)?;
    let mut b = PlanBuilder::new(input);
    let gap = 1.0 - p - q;
    let rounds = if p == 0.0 && q == 0.0 {
        0
    } else {
        let raw = (std::f64::consts::LN_2 * k as f64 / (gap * gap)).log2().ceil();
        raw.max(0.0) as u32
    };
    for _ in 0..rounds {
        b.squaring_round()?;
    }
    // the round count is chosen so this cannot trigger; guard anyway
    let target = 0.5f64.powi(k as i32);
    let mut extra = 0;
    while b.cur.p + b.cur.q > target {
        if extra >= 4 {
            return Err(PlanError::BadPlan(
                "squaring schedule failed to reach its target".into(),
            ));
        }
        b.squaring_round()?;
        extra += 1;
    }
    let theorem = if b.tree.is_empty() {
        "identity"
    } else {
        "zero_error_squaring"
    };
    Ok(b.finish(k, theorem))
}

/// One-sided amplification for p = 0 or q = 0: a copy reduce and a majority
/// round bring the errors to constants, a second pass drives them to 2^-k.
pub fn plan_one_sided(p: f64, q: f64, eps: f64, k: u32) -> Result<AmplificationPlan, PlanError> {
    let input = Triple::new(p, q, eps)?;
    ensure_possible(input)?;
    if p != 0.0 && q != 0.0 {
        return Err(PlanError::BadParam(
            "one of p and q must be exactly zero".into(),
        ));
    }
    let mirrored = p > 0.0;
    let leak = p.max(q);
    if leak.sqrt() + 2.0 * eps >= 1.0 {
        return Err(PlanError::OutsideKnownRegion { p, q, eps });
    }
    // the leak-side copy reduce: shrinks the nonzero parameter, leaves the
    // zero side at zero
    let copy = |n: usize| {
        if mirrored {
            ReductionStep::SReduce { n }
        } else {
            ReductionStep::RReduce { n }
        }
    };
    let odd = |n: usize| if n % 2 == 0 { n + 1 } else { n };

    let mut b = PlanBuilder::new(input);

    // phase one: constants. lambda balances the leak against the error
    // advantage alpha = 1 - 2 eps.
    let alpha = 1.0 - 2.0 * eps;
    let beta = leak.max(alpha * alpha / 2.0);
    let lambda = (1.0 / (alpha * alpha / beta).log2()).max(1.0);
    let s = (5.0 * lambda).ceil() as usize;
    if s > 1_000_000 {
        return Err(PlanError::TooLarge(format!(
            "constant-phase copy arity {s}; parameters sit too close to the boundary"
        )));
    }
    let r = odd((1.0 / (4.0 * beta.powi(s as i32))).ceil() as usize);
    if r > 10_000_000 {
        return Err(PlanError::TooLarge(format!(
            "constant-phase majority arity {r}; parameters sit too close to the boundary"
        )));
    }
    b.push(copy(s))?;
    b.push(ReductionStep::EReduce { n: r })?;
    let (leak1, eps1) = (if mirrored { b.cur.p } else { b.cur.q }, b.cur.eps);
    if leak1 >= 1.0 / 3.0 + 1e-12 || eps1 >= 0.02 + 1e-12 {
        return Err(PlanError::BadPlan(format!(
            "phase one landed at leak {leak1}, eps {eps1} instead of constants"
        )));
    }

    // phase two: exponential decay
    let kf = k.max(1) as f64;
    let ell = (4.0 * kf + 4.0 * kf.log2().max(0.0)).log2().ceil() as usize;
    let m = odd((3usize.pow(ell as u32) + 1) / 2);
    b.push(copy(ell.max(1)))?;
    b.push(ReductionStep::EReduce { n: m })?;
    b.push(copy(k.max(1) as usize))?;

    let target = 0.5f64.powi(k as i32) + 1e-12;
    if b.cur.worst() > target {
        return Err(PlanError::BadPlan(format!(
            "one-sided schedule stopped at {:?} above 2^-{k}",
            b.cur
        )));
    }
    Ok(b.finish(k, "one_sided_two_phase"))
}

const SMALL_BOX: f64 = 1.0 / 50.0;
const REGION_BUDGET: f64 = 0.24;

/// General amplification for p, q, eps all positive: an optional
/// preconditioning step, a walk through the achievable region to the
/// constant box, then the three-step loop squaring all parameters.
pub fn plan_general(p: f64, q: f64, eps: f64, k: u32) -> Result<AmplificationPlan, PlanError> {
    let input = Triple::new(p, q, eps)?;
    ensure_possible(input)?;
    let mut b = PlanBuilder::new(input);
    let theorem: &str;

    if input.worst() <= SMALL_BOX + 1e-15 {
        theorem = "general_small_box_loop";
    } else if p + q + 2.0 * eps <= REGION_BUDGET {
        walk_into_box(&mut b)?;
        theorem = "general_region_walk";
    } else if p + 22.0 * q + 44.0 * eps < 1.0 {
        let n = ((1.0f64 / 0.05).ln() / (1.0 - p)).ceil() as usize;
        b.push(ReductionStep::SReduce { n })?;
        walk_into_box(&mut b)?;
        theorem = "general_s_precondition";
    } else if 22.0 * p + q + 44.0 * eps < 1.0 {
        let n = ((1.0f64 / 0.05).ln() / (1.0 - q)).ceil() as usize;
        b.push(ReductionStep::RReduce { n })?;
        walk_into_box(&mut b)?;
        theorem = "general_r_precondition";
    } else if 7.0 * (p + q).sqrt() + 2.0 * eps < 1.0 {
        let n = ((1.0f64 / 0.02).ln() / (2.0 * (0.5 - eps) * (0.5 - eps))).ceil() as usize;
        let n = if n % 2 == 0 { n + 1 } else { n };
        if n > 10_000_000 {
            return Err(PlanError::TooLarge(format!(
                "majority precondition arity {n}; parameters sit too close to the boundary"
            )));
        }
        b.push(ReductionStep::EReduce { n })?;
        walk_into_box(&mut b)?;
        theorem = "general_e_precondition";
    } else if (1.0 - p - q).powi(4) > -178.0 * (1.0 - 2.0 * eps).log2() {
        // squaring rounds sized for five exponent bits; the accumulated
        // error stays small enough to re-enter the walk
        let gap = 1.0 - p - q;
        let rounds = (std::f64::consts::LN_2 * 5.0 / (gap * gap)).log2().ceil().max(0.0) as u32;
        for _ in 0..rounds {
            b.squaring_round()?;
        }
        walk_into_box(&mut b)?;
        theorem = "general_squaring_bridge";
    } else {
        return Err(PlanError::OutsideKnownRegion { p, q, eps });
    }

    // the loop: majority over three, then both pair reduces; all three
    // parameters square up to constants, so the box contracts
    let target = 0.5f64.powi(k as i32);
    let cap = (k as f64 / (50.0f64 / 36.0).log2()).log2().ceil().max(1.0) as usize + 8;
    let mut rounds = 0;
    while b.cur.worst() > target {
        if rounds >= cap {
            return Err(PlanError::BadPlan(format!(
                "loop stalled at {:?} after {rounds} rounds",
                b.cur
            )));
        }
        b.push(ReductionStep::EReduce { n: 3 })?;
        b.push(ReductionStep::RReduce { n: 2 })?;
        b.push(ReductionStep::SReduce { n: 2 })?;
        rounds += 1;
    }
    Ok(b.finish(k, theorem))
}

// Walks the current point down to the constant box; entry is justified by
// the caller (sum budget, a precondition lemma, or the squaring bridge), so
// a non-converging walk is an internal failure, not a refusal.
fn walk_into_box(b: &mut PlanBuilder) -> Result<(), PlanError> {
    if b.cur.worst() <= SMALL_BOX + 1e-15 {
        return Ok(());
    }
    let walk = region_walk(b.cur).ok_or_else(|| {
        PlanError::BadPlan(format!("walk stalled before the constant box at {:?}", b.cur))
    })?;
    for step in walk {
        b.push(step)?;
    }
    Ok(())
}

/// Picks a plan for any triple: zero-error and one-sided requests get their
/// dedicated schedules, everything else the general one.
pub fn plan(p: f64, q: f64, eps: f64, k: u32) -> Result<AmplificationPlan, PlanError> {
    let input = Triple::new(p, q, eps)?;
    ensure_possible(input)?;
    if eps == 0.0 {
        return plan_zero_error(p, q, k);
    }
    if p == 0.0 || q == 0.0 {
        match plan_one_sided(p, q, eps, k) {
            Err(PlanError::OutsideKnownRegion { .. }) => {}
            other => return other,
        }
    }
    plan_general(p, q, eps, k)
}

/// Achievable-region lower bounds: grid tables of l_i(p, q), the error rate
/// below which the constant box is certified reachable in i steps.
#[derive(Debug, Clone)]
pub struct RegionTable {
    resolution: usize,
    tables: Vec<Vec<f64>>,
}

fn seed_table(resolution: usize, offset: f64) -> Vec<f64> {
    let n = resolution + 1;
    let mut t = vec![0.0; n * n];
    for a in 0..n {
        for bq in 0..n {
            let p = a as f64 / resolution as f64;
            let q = bq as f64 / resolution as f64;
            t[a * n + bq] = (offset - p - q) / 2.0;
        }
    }
    t
}

// inverse of the pair-reduce error map 2e(1-e); negative arguments pass
// through so infeasible cells stay infeasible
fn pair_inv_eps(y: f64) -> f64 {
    if y >= 0.5 {
        return 0.5;
    }
    (1.0 - (1.0 - 2.0 * y).sqrt()) / 2.0
}

// inverse of the triple-majority error map 3e^2 - 2e^3 on [0, 1/2],
// bisected to 1e-12
fn majority_inv_eps(y: f64) -> f64 {
    if y <= 0.0 {
        return y;
    }
    if y >= 0.5 {
        return 0.5;
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    while hi - lo > 1e-12 {
        let mid = (lo + hi) / 2.0;
        if 3.0 * mid * mid - 2.0 * mid * mid * mid < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / 2.0
}

fn bilinear(table: &[f64], resolution: usize, p: f64, q: f64) -> f64 {
    let n = resolution + 1;
    let scale = resolution as f64;
    let x = (p.clamp(0.0, 1.0)) * scale;
    let y = (q.clamp(0.0, 1.0)) * scale;
    let (a, bq) = ((x.floor() as usize).min(resolution - 1), (y.floor() as usize).min(resolution - 1));
    let (tx, ty) = (x - a as f64, y - bq as f64);
    let v00 = table[a * n + bq];
    let v10 = table[(a + 1) * n + bq];
    let v01 = table[a * n + bq + 1];
    let v11 = table[(a + 1) * n + bq + 1];
    v00 * (1.0 - tx) * (1.0 - ty) + v10 * tx * (1.0 - ty) + v01 * (1.0 - tx) * ty + v11 * tx * ty
}

fn iterate_tables(resolution: usize, rounds: usize, seed: Vec<f64>) -> Vec<Vec<f64>> {
    let n = resolution + 1;
    let mut tables = vec![seed];
    for _ in 0..rounds {
        let prev = tables.last().expect("seeded");
        let mut next = vec![0.0; n * n];
        for a in 0..n {
            let p = a as f64 / resolution as f64;
            for bq in 0..n {
                let q = bq as f64 / resolution as f64;
                let here = prev[a * n + bq];
                let s = pair_inv_eps(bilinear(prev, resolution, p * p, 1.0 - (1.0 - q) * (1.0 - q)));
                let r = pair_inv_eps(bilinear(prev, resolution, 1.0 - (1.0 - p) * (1.0 - p), q * q));
                let e = majority_inv_eps(bilinear(
                    prev,
                    resolution,
                    1.0 - (1.0 - p).powi(3),
                    1.0 - (1.0 - q).powi(3),
                ));
                next[a * n + bq] = here.max(s).max(r).max(e);
            }
        }
        tables.push(next);
    }
    tables
}

/// Iterates the region recursion from the seed (0.02 - p - q)/2 on a
/// (resolution+1)^2 grid, keeping every intermediate table. Off-grid
/// lookups are bilinear; the identity branch makes the tables
/// non-decreasing in the round index.
pub fn region_iterate(resolution: usize, rounds: usize) -> Result<RegionTable, PlanError> {
    if resolution < 64 {
        return Err(PlanError::BadParam(format!(
            "region resolution {resolution} below 64"
        )));
    }
    if rounds > 64 {
        return Err(PlanError::BadParam(format!("region rounds {rounds} above 64")));
    }
    let tables = iterate_tables(resolution, rounds, seed_table(resolution, 0.02));
    Ok(RegionTable { resolution, tables })
}

impl RegionTable {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn rounds(&self) -> usize {
        self.tables.len() - 1
    }

    pub fn value(&self, round: usize, a: usize, b: usize) -> f64 {
        self.tables[round][a * (self.resolution + 1) + b]
    }

    pub fn lookup(&self, round: usize, p: f64, q: f64) -> f64 {
        bilinear(&self.tables[round], self.resolution, p, q)
    }

    /// CSV of one round's table, row per grid point.
    pub fn to_csv(&self, round: usize) -> String {
        let mut out = String::from("p,q,l_value\n");
        let n = self.resolution + 1;
        for a in 0..n {
            for b in 0..n {
                let p = a as f64 / self.resolution as f64;
                let q = b as f64 / self.resolution as f64;
                out.push_str(&format!("{p},{q},{}\n", self.value(round, a, b)));
            }
        }
        out
    }
}

/// The two published region checkpoints: after 8 rounds the 0.02 seed
/// covers the 0.15 budget, and 11 more rounds from the 0.15 seed cover the
/// 0.24 budget. Margins are minima over all grid points under the budget.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegionCheckpoints {
    pub first_margin: f64,
    pub second_margin: f64,
    pub ok: bool,
}

pub fn region_checkpoints(resolution: usize) -> Result<RegionCheckpoints, PlanError> {
    let first = region_iterate(resolution, 8)?;
    let second_tables = iterate_tables(resolution, 11, seed_table(resolution, 0.15));
    let n = resolution + 1;
    let mut first_margin = f64::INFINITY;
    let mut second_margin = f64::INFINITY;
    for a in 0..n {
        for b in 0..n {
            let p = a as f64 / resolution as f64;
            let q = b as f64 / resolution as f64;
            if p + q < 0.15 {
                first_margin = first_margin.min(first.value(8, a, b) - (0.15 - p - q) / 2.0);
            }
            if p + q < 0.24 {
                second_margin =
                    second_margin.min(second_tables[11][a * n + b] - (0.24 - p - q) / 2.0);
            }
        }
    }
    Ok(RegionCheckpoints {
        first_margin,
        second_margin,
        ok: first_margin >= 0.0 && second_margin >= 0.0,
    })
}

const WALK_STEP_BUDGET: usize = 200;
// pair reduces double the error rate, so it must be squared away by a
// majority step before it drifts toward the 1/2 fixed point
const WALK_ERR_CEILING: f64 = 0.03;

// Greedy descent into the constant box: square the error away when it
// dominates, otherwise pair-reduce the larger leak. Every path it emits is
// justified by closed-form propagation of the steps, so no certificate is
// consulted. Returns None when not converged within the step budget.
fn region_walk(start: Triple) -> Option<Vec<ReductionStep>> {
    let mut cur = start;
    let mut steps = Vec::new();
    while cur.worst() > SMALL_BOX {
        if steps.len() >= WALK_STEP_BUDGET {
            return None;
        }
        let step = if cur.eps > 0.0 && (cur.eps > WALK_ERR_CEILING || cur.eps >= cur.p.max(cur.q)) {
            ReductionStep::EReduce { n: 3 }
        } else if cur.p >= cur.q {
            ReductionStep::SReduce { n: 2 }
        } else {
            ReductionStep::RReduce { n: 2 }
        };
        cur = step_map(step, cur).ok()?;
        steps.push(step);
    }
    Some(steps)
}

/// How a plan execution draws and measures.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum ExecMode {
    /// Exact distribution propagation stage by stage.
    Exact,
    /// Seeded sampling; each stage is estimated with a confidence radius.
    /// Each trial derives its own stream from (seed, stage, trial), so the
    /// batch is identical however many jobs shard it.
    MonteCarlo { trials: usize, seed: u64, jobs: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub label: String,
    pub claimed: Triple,
    pub measured: Triple,
    pub radius: f64,
    pub within: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExecReport {
    pub stages: Vec<StageReport>,
    pub ok: bool,
}

/// Exact joint distribution of one leaf draw from a model, over the
/// canonical six-coordinate outcome.
pub fn model_joint(model: &WotModel) -> Result<FiniteDist, PlanError> {
    let mut table: Vec<(Outcome, f64)> = Vec::new();
    match *model {
        WotModel::Erasure { p, q } => {
            Triple::new(p, q, 0.0)?;
            if p + q > 1.0 {
                return Err(PlanError::BadParam(format!("erasure weights {p} + {q} exceed 1")));
            }
            for bits in 0..8u32 {
                let (x0, x1, c) = (bits & 1, (bits >> 1) & 1, (bits >> 2) & 1);
                let xc = if c == 0 { x0 } else { x1 };
                let other = if c == 0 { x1 } else { x0 };
                table.push((vec![x0, x1, c, xc, 0, 1 + other], q / 8.0));
                table.push((vec![x0, x1, c, xc, 1 + c, 0], p / 8.0));
                for y in 0..2u32 {
                    table.push((vec![x0, x1, c, y, 0, 0], (1.0 - p - q) / 16.0));
                }
            }
        }
        WotModel::Event { p, q, eps } => {
            Triple::new(p, q, eps)?;
            for bits in 0..8u32 {
                let (x0, x1, c) = (bits & 1, (bits >> 1) & 1, (bits >> 2) & 1);
                let xc = if c == 0 { x0 } else { x1 };
                let other = if c == 0 { x1 } else { x0 };
                for e in 0..2u32 {
                    let pe = if e == 1 { eps } else { 1.0 - eps };
                    for uk in 0..2u32 {
                        let pu = if uk == 1 { p } else { 1.0 - p };
                        for vk in 0..2u32 {
                            let pv = if vk == 1 { q } else { 1.0 - q };
                            let mass = pe * pu * pv / 8.0;
                            if mass > 0.0 {
                                table.push((
                                    vec![
                                        x0,
                                        x1,
                                        c,
                                        xc ^ e,
                                        if uk == 1 { 1 + c } else { 0 },
                                        if vk == 1 { 1 + other } else { 0 },
                                    ],
                                    mass,
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(FiniteDist::from_weighted(table)?)
}

fn sample_from_outcome(o: &[u32]) -> Result<WotSample, PlanError> {
    if o.len() != 6 {
        return Err(PlanError::BadPlan(format!("outcome arity {}", o.len())));
    }
    let s = WotSample {
        x0: o[0] as u8,
        x1: o[1] as u8,
        c: o[2] as u8,
        y: o[3] as u8,
        u: View::from_code(o[4])?,
        v: View::from_code(o[5])?,
    };
    s.check_bits()?;
    Ok(s)
}

const EXACT_TUPLE_CAP: u128 = 1 << 22;

// Pushes an exact stage distribution through one reduction step by
// enumerating input tuples from the support.
fn push_stage(dist: &FiniteDist, step: ReductionStep, cap: u128) -> Result<FiniteDist, PlanError> {
    let support: Vec<(WotSample, f64)> = dist
        .iter()
        .map(|(o, m)| Ok((sample_from_outcome(o)?, m)))
        .collect::<Result<_, PlanError>>()?;
    let n = step.arity();
    let combos = (support.len() as u128).pow(n as u32);
    if combos > cap {
        return Err(PlanError::TooLarge(format!(
            "{combos} input tuples for arity {n}; use Monte Carlo mode"
        )));
    }
    let mut acc: BTreeMap<Outcome, f64> = BTreeMap::new();
    let mut idx = vec![0usize; n];
    loop {
        let mut mass = 1.0;
        let tuple: Vec<WotSample> = idx
            .iter()
            .map(|&i| {
                mass *= support[i].1;
                support[i].0
            })
            .collect();
        let out = step.apply_batch(&tuple)?;
        *acc.entry(out.outcome()).or_insert(0.0) += mass;
        let mut pos = 0;
        loop {
            if pos == n {
                let total: Vec<(Outcome, f64)> = acc.into_iter().collect();
                return Ok(FiniteDist::from_weighted(total)?);
            }
            idx[pos] += 1;
            if idx[pos] < support.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

fn triple_of(params: &WotParams) -> Triple {
    Triple {
        p: params.p,
        q: params.q,
        eps: params.eps,
    }
}

fn within(measured: Triple, claimed: Triple, slack: f64) -> bool {
    measured.p <= claimed.p + slack
        && measured.q <= claimed.q + slack
        && measured.eps <= claimed.eps + slack
}

// Each trial owns a stream keyed by (stage_seed, trial index), so splitting
// the range over threads cannot change the batch.
fn draw_stage_batch(
    steps: &[ReductionStep],
    source: &WotModel,
    stage_seed: u64,
    trials: usize,
    jobs: usize,
) -> Result<Vec<WotSample>, PlanError> {
    let jobs = jobs.max(1).min(trials.max(1));
    let chunk = trials.div_ceil(jobs);
    let chunks: Result<Vec<Vec<WotSample>>, RedError> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|j| {
                let lo = j * chunk;
                let hi = ((j + 1) * chunk).min(trials);
                scope.spawn(move || {
                    (lo..hi)
                        .map(|i| {
                            let mut rng = RandState::new(RandSource::Seeded(trial_seed(
                                stage_seed, i as u64,
                            )));
                            compose_steps(steps, &mut |r| source.sample(r), &mut rng)
                        })
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("draw thread"))
            .collect()
    });
    Ok(chunks?.into_iter().flatten().collect())
}

/// Runs a plan against a leaf model and checks every stage's measured
/// parameters against the claims; the leaf stage is checked against the
/// plan input. Exceeding a claim makes the report not-ok, never an error.
pub fn execute_plan(
    plan: &AmplificationPlan,
    source: &WotModel,
    mode: ExecMode,
) -> Result<ExecReport, PlanError> {
    execute_plan_capped(plan, source, mode, EXACT_TUPLE_CAP)
}

/// Same, with the exact-mode state ceiling chosen by the caller.
pub fn execute_plan_capped(
    plan: &AmplificationPlan,
    source: &WotModel,
    mode: ExecMode,
    tuple_cap: u128,
) -> Result<ExecReport, PlanError> {
    plan.validate()?;
    let mut stages = Vec::new();
    match mode {
        ExecMode::Exact => {
            let mut dist = model_joint(source)?;
            let measured = triple_of(&measure_wot_params(&dist)?);
            stages.push(StageReport {
                label: "leaf".into(),
                claimed: plan.input,
                measured,
                radius: 0.0,
                within: within(measured, plan.input, 1e-9),
            });
            for node in &plan.tree {
                dist = push_stage(&dist, node.step, tuple_cap)?;
                let measured = triple_of(&measure_wot_params(&dist)?);
                stages.push(StageReport {
                    label: format!("{:?}", node.step),
                    claimed: node.claimed,
                    measured,
                    radius: 0.0,
                    within: within(measured, node.claimed, 1e-9),
                });
            }
        }
        ExecMode::MonteCarlo { trials, seed, jobs } => {
            if trials < 16 {
                return Err(PlanError::BadParam(format!("{trials} trials is too few")));
            }
            let steps = plan.steps();
            for stage in 0..=steps.len() {
                let stage_seed = trial_seed(seed, stage as u64);
                let batch = draw_stage_batch(&steps[..stage], source, stage_seed, trials, jobs)?;
                let est = estimate_wot_params(&batch, 1e-6)?;
                let claimed = if stage == 0 {
                    plan.input
                } else {
                    plan.tree[stage - 1].claimed
                };
                let measured = triple_of(&est.params);
                let label = if stage == 0 {
                    "leaf".to_string()
                } else {
                    format!("{:?}", steps[stage - 1])
                };
                stages.push(StageReport {
                    label,
                    claimed,
                    measured,
                    radius: est.radius,
                    within: within(measured, claimed, est.radius + 1e-9),
                });
            }
        }
    }
    let ok = stages.iter().all(|s| s.within);
    Ok(ExecReport { stages, ok })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(p: f64, q: f64, eps: f64) -> Triple {
        Triple::new(p, q, eps).unwrap()
    }

    #[test]
    fn step_map_matches_closed_forms() {
        let r = step_map(ReductionStep::RReduce { n: 2 }, t(0.5, 0.0, 0.0)).unwrap();
        assert_eq!((r.p, r.q, r.eps), (0.75, 0.0, 0.0));
        let s = step_map(ReductionStep::SReduce { n: 2 }, t(0.0, 0.5, 0.0)).unwrap();
        assert_eq!((s.p, s.q, s.eps), (0.0, 0.75, 0.0));
        let r3 = step_map(ReductionStep::RReduce { n: 3 }, t(0.0, 0.0, 0.1)).unwrap();
        assert!((r3.eps - 0.244).abs() < 1e-12, "errors accumulate as coin flips");
        let e3 = step_map(ReductionStep::EReduce { n: 3 }, t(0.0, 0.0, 0.1)).unwrap();
        assert!((e3.eps - 0.028).abs() < 1e-12, "majority of three at a tenth");
        let e = step_map(ReductionStep::EReduce { n: 3 }, t(0.5, 0.5, 0.25)).unwrap();
        assert!((e.p - 0.875).abs() < 1e-12);
        assert!((e.q - 0.875).abs() < 1e-12);
        assert!((e.eps - 0.15625).abs() < 1e-12);
        assert!(matches!(
            step_map(ReductionStep::EReduce { n: 2 }, t(0.1, 0.1, 0.1)),
            Err(PlanError::BadPlan(_))
        ));
        let rot = step_map(ReductionStep::Rotor, t(0.2, 0.3, 0.1)).unwrap();
        assert_eq!((rot.p, rot.q, rot.eps), (0.3, 0.2, 0.1));
    }

    #[test]
    fn majority_tail_small_cases() {
        assert!((majority_tail(3, 0.25) - 0.15625).abs() < 1e-12);
        assert_eq!(majority_tail(5, 0.0), 0.0);
        assert!((majority_tail(1, 0.3) - 0.3).abs() < 1e-12);
        // half stays half regardless of arity
        assert!((majority_tail(61, 0.5) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn impossibility_predicate() {
        assert!(check_impossible(0.5, 0.5, 0.0));
        assert!(check_impossible(0.0, 0.0, 0.5));
        assert!(!check_impossible(0.1, 0.1, 0.1));
        assert!(check_impossible(0.3, 0.3, 0.3));
    }

    #[test]
    fn zero_error_reference_plan() {
        let plan = plan_zero_error(0.2, 0.2, 5).unwrap();
        assert_eq!(plan.tree.len(), 8, "four squaring rounds");
        assert_eq!(plan.leaf_count, 256);
        assert!(plan.leaf_count as f64 <= 2.0 * 25.0 / 0.6f64.powi(4));
        let root = plan.root();
        assert!(root.p + root.q <= 0.5f64.powi(5));
        assert_eq!(root.eps, 0.0);
        plan.validate().unwrap();
        assert_eq!(plan.theorem, "zero_error_squaring");
    }

    #[test]
    fn zero_error_identity_and_refusal() {
        let plan = plan_zero_error(0.0, 0.0, 7).unwrap();
        assert!(plan.tree.is_empty());
        assert_eq!(plan.leaf_count, 1);
        assert_eq!(plan.theorem, "identity");
        assert!(matches!(
            plan_zero_error(0.5, 0.5, 3),
            Err(PlanError::Impossible { .. })
        ));
    }

    #[test]
    fn zero_error_extreme_input_still_plans() {
        let plan = plan_zero_error(0.5, 0.499, 1).unwrap();
        let root = plan.root();
        assert!(root.p + root.q <= 0.5);
        assert!(plan.leaf_count as f64 <= 2.0 / 0.001f64.powi(4));
    }

    #[test]
    fn squaring_round_invariant_on_grid() {
        for a in 0..20 {
            for b in 0..20 {
                let (p, q) = (a as f64 * 0.05, b as f64 * 0.05);
                let d = 1.0 - p - q;
                if d <= 0.05 {
                    continue;
                }
                let mut builder = PlanBuilder::new(t(p, q, 0.0));
                builder.squaring_round().unwrap();
                let d2 = 1.0 - builder.cur.p - builder.cur.q;
                let bound = (2.0 - d * d).sqrt() * d;
                assert!(
                    d2 >= bound - 1e-12,
                    "round at ({p},{q}): {d2} < {bound}"
                );
            }
        }
    }

    #[test]
    fn one_sided_constant_phase() {
        let plan = plan_one_sided(0.0, 0.25, 0.0, 3).unwrap();
        // first two steps are the constant phase
        let s = plan.tree[0].step.arity();
        let r = plan.tree[1].step.arity();
        assert_eq!(s, 5, "five-fold copy reduce at lambda one");
        assert!(s * r <= 128, "constant phase used {} leaves", s * r);
        assert!(plan.root().worst() <= 0.125 + 1e-12);
        plan.validate().unwrap();
    }

    #[test]
    fn one_sided_full_pipeline() {
        let plan = plan_one_sided(0.0, 1.0 / 3.0, 1.0 / 11.0, 4).unwrap();
        assert_eq!(plan.tree.len(), 5, "two phases, five steps");
        assert!(plan.root().worst() <= 0.5f64.powi(4) + 1e-12);
        assert_eq!(plan.root().p, 0.0, "silent side stays silent");
        assert_eq!(plan.theorem, "one_sided_two_phase");
    }

    #[test]
    fn one_sided_mirrored() {
        let plan = plan_one_sided(0.3, 0.0, 0.05, 4).unwrap();
        assert!(plan.root().worst() <= 0.5f64.powi(4) + 1e-12);
        assert_eq!(plan.root().q, 0.0);
        // mirrored plans lead with the sender-side pair reduce
        assert!(matches!(plan.tree[0].step, ReductionStep::SReduce { .. }));
    }

    #[test]
    fn one_sided_premise_boundary() {
        assert!(matches!(
            plan_one_sided(0.0, 0.25, 0.25, 3),
            Err(PlanError::OutsideKnownRegion { .. })
        ));
        assert!(matches!(
            plan_one_sided(0.1, 0.1, 0.1, 3),
            Err(PlanError::BadParam(_))
        ));
    }

    #[test]
    fn general_small_box() {
        let plan = plan_general(0.02, 0.02, 0.02, 8).unwrap();
        assert_eq!(plan.theorem, "general_small_box_loop");
        assert!(plan.root().worst() <= 0.5f64.powi(8));
        // every loop round costs twelve leaves
        assert_eq!(plan.tree.len() % 3, 0);
        let rounds = plan.tree.len() / 3;
        assert_eq!(plan.leaf_count, 12u64.pow(rounds as u32));
        assert!(plan.leaf_count as f64 <= 175.0 * 8f64.powf(3.6));
    }

    #[test]
    fn general_s_precondition_branch() {
        let plan = plan_general(0.9, 0.001, 0.001, 3).unwrap();
        assert_eq!(plan.theorem, "general_s_precondition");
        let first = plan.tree[0].step;
        assert!(matches!(first, ReductionStep::SReduce { .. }));
        let n = first.arity();
        assert!(n <= (4.0 / (1.0 - 0.9)) as usize, "arity {n} over budget");
        assert!(plan.root().worst() <= 0.125);
        plan.validate().unwrap();
    }

    #[test]
    fn general_r_precondition_branch() {
        let plan = plan_general(0.001, 0.9, 0.001, 3).unwrap();
        assert_eq!(plan.theorem, "general_r_precondition");
        assert!(matches!(plan.tree[0].step, ReductionStep::RReduce { .. }));
        assert!(plan.root().worst() <= 0.125);
    }

    #[test]
    fn general_e_precondition_branch() {
        // error dominant: the sum budget fails on 2 eps alone, the majority
        // precondition holds
        let plan = plan_general(0.005, 0.005, 0.13, 3).unwrap();
        assert_eq!(plan.theorem, "general_e_precondition");
        let first = plan.tree[0].step;
        assert!(matches!(first, ReductionStep::EReduce { .. }));
        assert_eq!(first.arity() % 2, 1);
        assert!(plan.root().worst() <= 0.125);
    }

    #[test]
    fn general_walk_branch() {
        // inside the 0.24 budget but outside the constant box
        let plan = plan_general(0.05, 0.03, 0.02, 4).unwrap();
        assert_eq!(plan.theorem, "general_region_walk");
        assert!(plan.root().worst() <= 0.5f64.powi(4));
    }

    #[test]
    fn general_squaring_bridge_branch() {
        // far over the sum budget with a tiny error rate: only the
        // quartic-gap criterion accepts
        let plan = plan_general(0.35, 0.35, 1e-5, 3).unwrap();
        assert_eq!(plan.theorem, "general_squaring_bridge");
        assert!(plan.root().worst() <= 0.125);
    }

    #[test]
    fn general_walk_succeeds_across_budget_region() {
        // the walk must convert the whole admitted sum budget
        for &(p, q) in &[
            (0.001, 0.001),
            (0.001, 0.115),
            (0.03, 0.03),
            (0.06, 0.02),
            (0.1, 0.1),
            (0.115, 0.001),
            (0.119, 0.119),
        ] {
            for &frac in &[0.3, 0.9] {
                let eps = frac * (REGION_BUDGET - p - q) / 2.0;
                if p.max(q).max(eps) <= SMALL_BOX {
                    continue;
                }
                let plan = plan_general(p, q, eps, 4)
                    .unwrap_or_else(|e| panic!("({p},{q},{eps}): {e}"));
                assert_eq!(plan.theorem, "general_region_walk");
                assert!(
                    plan.root().worst() <= 0.5f64.powi(4),
                    "root {:?} at ({p},{q},{eps})",
                    plan.root()
                );
            }
        }
    }

    #[test]
    fn general_refusals() {
        assert!(matches!(
            plan_general(0.25, 0.25, 0.2, 3),
            Err(PlanError::OutsideKnownRegion { .. })
        ));
        assert!(matches!(
            plan_general(0.3, 0.3, 0.3, 3),
            Err(PlanError::Impossible { .. })
        ));
    }

    #[test]
    fn dispatcher_routes() {
        assert_eq!(plan(0.2, 0.2, 0.0, 5).unwrap().theorem, "zero_error_squaring");
        assert_eq!(
            plan(0.0, 0.25, 0.01, 3).unwrap().theorem,
            "one_sided_two_phase"
        );
        assert_eq!(
            plan(0.02, 0.02, 0.02, 3).unwrap().theorem,
            "general_small_box_loop"
        );
        assert!(matches!(
            plan(0.45, 0.45, 0.05, 3),
            Err(PlanError::Impossible { .. })
        ));
    }

    #[test]
    fn plan_json_round_trip() {
        let plan = plan_zero_error(0.25, 0.125, 4).unwrap();
        let text = serde_json::to_string(&plan).unwrap();
        let back = AmplificationPlan::from_json(&text).unwrap();
        assert_eq!(back, plan);
        let v = plan.to_json();
        assert!(v["target_k"].is_number());
        assert!(v["input"]["eps"].is_number());
        assert_eq!(v["tree"][0]["kind"], "SReduce");
        assert!(v["tree"][0]["n"].is_number());
        assert!(v["tree"][0]["claimed"]["p"].is_number());
        assert!(v["leaf_count"].is_number());
        assert!(v["theorem"].is_string());
    }

    #[test]
    fn validate_rejects_tampering() {
        let mut plan = plan_zero_error(0.2, 0.2, 3).unwrap();
        plan.leaf_count += 1;
        assert!(matches!(plan.validate(), Err(PlanError::BadPlan(_))));
        let mut plan2 = plan_zero_error(0.2, 0.2, 3).unwrap();
        plan2.tree[0].claimed.p += 0.01;
        assert!(matches!(plan2.validate(), Err(PlanError::BadPlan(_))));
    }

    #[test]
    fn region_seed_and_monotonicity() {
        let table = region_iterate(64, 3).unwrap();
        assert!((table.lookup(0, 0.01, 0.005) - 0.0025).abs() < 1e-12);
        let n = table.resolution() + 1;
        for round in 0..3 {
            for a in 0..n {
                for b in 0..n {
                    assert!(
                        table.value(round + 1, a, b) >= table.value(round, a, b) - 1e-15,
                        "regression at round {round}, cell ({a},{b})"
                    );
                }
            }
        }
    }

    #[test]
    fn region_checkpoints_hold_at_base_resolution() {
        let cp = region_checkpoints(64).unwrap();
        assert!(
            cp.ok,
            "margins {} and {}",
            cp.first_margin, cp.second_margin
        );
    }

    #[test]
    fn region_csv_shape() {
        let table = region_iterate(64, 1).unwrap();
        let csv = table.to_csv(1);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("p,q,l_value"));
        assert_eq!(csv.lines().count(), 65 * 65 + 1);
    }

    #[test]
    fn execute_exact_zero_error() {
        let plan = plan_zero_error(0.2, 0.2, 3).unwrap();
        let model = WotModel::Event {
            p: 0.2,
            q: 0.2,
            eps: 0.0,
        };
        let report = execute_plan(&plan, &model, ExecMode::Exact).unwrap();
        assert!(report.ok, "{:?}", report.stages);
        assert_eq!(report.stages.len(), plan.tree.len() + 1);
        let root = report.stages.last().unwrap();
        assert!(root.measured.p <= 0.125 && root.measured.q <= 0.125);
        assert_eq!(root.measured.eps, 0.0);
    }

    #[test]
    fn execute_exact_on_many_seeded_plans() {
        let mut rng = RandState::new(RandSource::Seeded(41));
        for _ in 0..50 {
            let p = (rng.draw_range(crate::engine::Endpoint::Func, 16).unwrap() as f64 + 1.0) / 64.0;
            let q = (rng.draw_range(crate::engine::Endpoint::Func, 16).unwrap() as f64 + 1.0) / 64.0;
            let plan = plan_zero_error(p, q, 3).unwrap();
            let model = WotModel::Event { p, q, eps: 0.0 };
            let report = execute_plan(&plan, &model, ExecMode::Exact).unwrap();
            assert!(report.ok, "plan at ({p},{q}) exceeded claims");
        }
    }

    #[test]
    fn execute_monte_carlo_within_radius() {
        let input = t(0.2, 0.2, 0.1);
        let mut b = PlanBuilder::new(input);
        b.push(ReductionStep::RReduce { n: 2 }).unwrap();
        b.push(ReductionStep::SReduce { n: 2 }).unwrap();
        let plan = b.finish(1, "zero_error_squaring");
        let model = WotModel::Event {
            p: 0.2,
            q: 0.2,
            eps: 0.1,
        };
        let report = execute_plan(
            &plan,
            &model,
            ExecMode::MonteCarlo {
                trials: 20_000,
                seed: 7,
                jobs: 2,
            },
        )
        .unwrap();
        assert!(report.ok, "{:?}", report.stages);
        assert!(report.stages.iter().all(|s| s.radius > 0.0));
    }

    #[test]
    fn execute_monte_carlo_independent_of_jobs() {
        let plan = plan_zero_error(0.2, 0.2, 2).unwrap();
        let model = WotModel::Event {
            p: 0.2,
            q: 0.2,
            eps: 0.0,
        };
        let run = |jobs| {
            execute_plan(
                &plan,
                &model,
                ExecMode::MonteCarlo {
                    trials: 500,
                    seed: 11,
                    jobs,
                },
            )
            .unwrap()
        };
        let one = run(1);
        let three = run(3);
        for (a, b) in one.stages.iter().zip(&three.stages) {
            assert_eq!(a.measured, b.measured);
            assert_eq!(a.radius, b.radius);
        }
    }

    #[test]
    fn execute_flags_mismatched_source() {
        // erasure leaves carry error (1-p-q)/2, far above a zero claim
        let plan = plan_zero_error(0.25, 0.25, 2).unwrap();
        let model = WotModel::Erasure { p: 0.25, q: 0.25 };
        let report = execute_plan(&plan, &model, ExecMode::Exact).unwrap();
        assert!(!report.ok);
        assert!(!report.stages[0].within);
    }

    #[test]
    fn execute_rejects_corrupt_plan() {
        let mut plan = plan_zero_error(0.2, 0.2, 2).unwrap();
        plan.leaf_count = 3;
        let model = WotModel::Event {
            p: 0.2,
            q: 0.2,
            eps: 0.0,
        };
        assert!(execute_plan(&plan, &model, ExecMode::Exact).is_err());
    }

    #[test]
    fn erasure_joint_measures_to_its_triple() {
        let joint = model_joint(&WotModel::Erasure { p: 0.2, q: 0.3 }).unwrap();
        let params = measure_wot_params(&joint).unwrap();
        assert!((params.p - 0.2).abs() < 1e-12);
        assert!((params.q - 0.3).abs() < 1e-12);
        assert!((params.eps - 0.25).abs() < 1e-12);
    }
}

