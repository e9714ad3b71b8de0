//! Exact finite-distribution arithmetic: statistical distance, bit-prediction
//! advantage, and the leakage-event decomposition that the reduction analyses
//! are built on.
//!
//! Distributions are plain tables over tuples of small integers. Masses are
//! doubles; constructors that take integer counts produce exactly-rounded
//! masses, and when the total is a power of two every mass is exact. All
//! iteration orders are lexicographic so downstream output is reproducible.

use std::collections::BTreeMap;

use thiserror::Error;

/// One point of a distribution's domain, a tuple of small symbols (bits, view
/// tags, tape positions).
pub type Outcome = Vec<u32>;

/// Slack allowed on "sums to one" and on every equality the lemmas state.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Default ceiling on product-domain size; the exact oracles are meant for
/// small instances, larger ones go through Monte Carlo estimation instead.
pub const DEFAULT_DOMAIN_CAP: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum ProbError {
    #[error("distribution has no outcomes")]
    Empty,
    #[error("outcome {outcome:?} has negative mass {mass}")]
    NegativeMass { outcome: Outcome, mass: f64 },
    #[error("masses sum to {sum}, not 1")]
    BadTotal { sum: f64 },
    #[error("operands are over different domains")]
    DomainMismatch,
    #[error("product domain would hold {size} outcomes, cap is {cap}")]
    DomainTooLarge { size: usize, cap: usize },
    #[error("outcome {outcome:?}: coordinate {coord} is not a bit")]
    NotABit { outcome: Outcome, coord: usize },
    #[error("coordinate index {0} out of range for outcome arity {1}")]
    BadCoordinate(usize, usize),
    #[error("expected the full three-bit cube as domain")]
    NotTheCube,
}

/// A probability table over a finite set of tuples.
///
/// The domain is sorted and duplicate-free; zero-mass outcomes are kept, so a
/// domain can be wider than the support (point masses on a cube, aligned
/// operands for distance computations).
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDist {
    outcomes: Vec<Outcome>,
    masses: Vec<f64>,
}

impl FiniteDist {
    /// Builds a distribution from (outcome, mass) pairs, merging duplicates.
    pub fn from_weighted<I>(entries: I) -> Result<Self, ProbError>
    where
        I: IntoIterator<Item = (Outcome, f64)>,
    {
        let mut table: BTreeMap<Outcome, f64> = BTreeMap::new();
        for (outcome, mass) in entries {
            *table.entry(outcome).or_insert(0.0) += mass;
        }
        Self::from_table(table)
    }

    /// Builds a distribution from integer counts, normalizing by their total.
    /// Each mass is the correctly rounded double of count/total, and exact
    /// whenever the total is a power of two.
    pub fn from_counts<I>(entries: I) -> Result<Self, ProbError>
    where
        I: IntoIterator<Item = (Outcome, u64)>,
    {
        let mut table: BTreeMap<Outcome, u64> = BTreeMap::new();
        for (outcome, count) in entries {
            *table.entry(outcome).or_insert(0) += count;
        }
        let total: u64 = table.values().sum();
        if total == 0 {
            return Err(ProbError::BadTotal { sum: 0.0 });
        }
        let scaled = table
            .into_iter()
            .map(|(o, c)| (o, c as f64 / total as f64));
        Self::from_table(scaled.collect())
    }

    pub fn uniform(domain: Vec<Outcome>) -> Result<Self, ProbError> {
        let n = domain.len();
        if n == 0 {
            return Err(ProbError::Empty);
        }
        Self::from_weighted(domain.into_iter().map(|o| (o, 1.0 / n as f64)))
    }

    pub fn point_mass(at: Outcome) -> Self {
        FiniteDist {
            outcomes: vec![at],
            masses: vec![1.0],
        }
    }

    fn from_table(table: BTreeMap<Outcome, f64>) -> Result<Self, ProbError> {
        if table.is_empty() {
            return Err(ProbError::Empty);
        }
        let mut sum = 0.0;
        for (outcome, &mass) in &table {
            if mass < 0.0 {
                return Err(ProbError::NegativeMass {
                    outcome: outcome.clone(),
                    mass,
                });
            }
            sum += mass;
        }
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(ProbError::BadTotal { sum });
        }
        let (outcomes, masses) = table.into_iter().unzip();
        Ok(FiniteDist { outcomes, masses })
    }

    // Masses already known to be conserved; skips the sum check but keeps the
    // sorted-unique domain invariant.
    fn from_conserved(table: BTreeMap<Outcome, f64>) -> Self {
        let (outcomes, masses) = table.into_iter().unzip();
        FiniteDist { outcomes, masses }
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// Mass of one outcome, zero when absent from the domain.
    pub fn mass_of(&self, outcome: &[u32]) -> f64 {
        match self.outcomes.binary_search_by(|o| o.as_slice().cmp(outcome)) {
            Ok(i) => self.masses[i],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.outcomes
            .iter()
            .map(|o| o.as_slice())
            .zip(self.masses.iter().copied())
    }

    /// Marginal over the given coordinates, in the given order.
    pub fn project(&self, coords: &[usize]) -> Result<FiniteDist, ProbError> {
        let mut table: BTreeMap<Outcome, f64> = BTreeMap::new();
        for (outcome, mass) in self.iter() {
            let mut projected = Vec::with_capacity(coords.len());
            for &c in coords {
                let v = outcome
                    .get(c)
                    .ok_or(ProbError::BadCoordinate(c, outcome.len()))?;
                projected.push(*v);
            }
            *table.entry(projected).or_insert(0.0) += mass;
        }
        Ok(Self::from_conserved(table))
    }

    /// Pushes the distribution through a deterministic map, merging collisions.
    pub fn map_outcomes<F>(&self, f: F) -> FiniteDist
    where
        F: Fn(&[u32]) -> Outcome,
    {
        let mut table: BTreeMap<Outcome, f64> = BTreeMap::new();
        for (outcome, mass) in self.iter() {
            *table.entry(f(outcome)).or_insert(0.0) += mass;
        }
        Self::from_conserved(table)
    }

    /// Independent product; outcomes are tuple concatenations.
    pub fn product(&self, other: &FiniteDist, cap: usize) -> Result<FiniteDist, ProbError> {
        let size = self.len().saturating_mul(other.len());
        if size > cap {
            return Err(ProbError::DomainTooLarge { size, cap });
        }
        let mut table: BTreeMap<Outcome, f64> = BTreeMap::new();
        for (a, ma) in self.iter() {
            for (b, mb) in other.iter() {
                let mut joined = Vec::with_capacity(a.len() + b.len());
                joined.extend_from_slice(a);
                joined.extend_from_slice(b);
                table.insert(joined, ma * mb);
            }
        }
        Ok(Self::from_conserved(table))
    }

    /// Re-expresses both operands over the union of their domains so that
    /// distance computations apply; absent outcomes get mass zero.
    pub fn align(a: &FiniteDist, b: &FiniteDist) -> (FiniteDist, FiniteDist) {
        let mut union: Vec<Outcome> = a.outcomes.iter().chain(b.outcomes.iter()).cloned().collect();
        union.sort();
        union.dedup();
        let widen = |d: &FiniteDist| {
            let outcomes = union.clone();
            let masses = outcomes.iter().map(|o| d.mass_of(o)).collect();
            FiniteDist { outcomes, masses }
        };
        (widen(a), widen(b))
    }
}

/// Total-variation distance, half the L1 difference of the mass tables.
pub fn statistical_distance(a: &FiniteDist, b: &FiniteDist) -> Result<f64, ProbError> {
    if a.outcomes != b.outcomes {
        return Err(ProbError::DomainMismatch);
    }
    let l1: f64 = a
        .masses
        .iter()
        .zip(&b.masses)
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok(l1 / 2.0)
}

/// The best distinguishing advantage max over sets S of Pr_a[S] minus Pr_b[S],
/// together with the set attaining it (the outcomes where a outweighs b).
/// The value always equals the statistical distance.
pub fn max_set_advantage(
    a: &FiniteDist,
    b: &FiniteDist,
) -> Result<(f64, Vec<Outcome>), ProbError> {
    if a.outcomes != b.outcomes {
        return Err(ProbError::DomainMismatch);
    }
    let mut advantage = 0.0;
    let mut set = Vec::new();
    for ((outcome, ma), (_, mb)) in a.iter().zip(b.iter()) {
        if ma > mb {
            advantage += ma - mb;
            set.push(outcome.to_vec());
        }
    }
    Ok((advantage, set))
}

/// A joint distribution of one bit and arbitrary side information; the bit is
/// coordinate zero.
#[derive(Debug, Clone, PartialEq)]
pub struct JointBitDist {
    dist: FiniteDist,
}

impl JointBitDist {
    pub fn new(dist: FiniteDist) -> Result<Self, ProbError> {
        let arity = dist.outcomes[0].len();
        for outcome in dist.outcomes() {
            if outcome.is_empty() || outcome[0] > 1 {
                return Err(ProbError::NotABit {
                    outcome: outcome.clone(),
                    coord: 0,
                });
            }
            if outcome.len() != arity {
                // mixed arities would make the side marginal ambiguous
                return Err(ProbError::BadCoordinate(arity, outcome.len()));
            }
        }
        Ok(JointBitDist { dist })
    }

    pub fn from_weighted<I>(entries: I) -> Result<Self, ProbError>
    where
        I: IntoIterator<Item = (Outcome, f64)>,
    {
        Self::new(FiniteDist::from_weighted(entries)?)
    }

    pub fn dist(&self) -> &FiniteDist {
        &self.dist
    }

    pub fn arity(&self) -> usize {
        self.dist.outcomes[0].len()
    }

    pub fn bit_marginal(&self) -> FiniteDist {
        self.dist.project(&[0]).expect("coordinate 0 exists")
    }

    pub fn side_marginal(&self) -> FiniteDist {
        let coords: Vec<usize> = (1..self.arity()).collect();
        self.dist.project(&coords).expect("coordinates checked at construction")
    }

    // Groups masses by side value: side -> [mass with bit 0, mass with bit 1].
    fn by_side(&self) -> BTreeMap<&[u32], [f64; 2]> {
        let mut groups: BTreeMap<&[u32], [f64; 2]> = BTreeMap::new();
        for (outcome, mass) in self.dist.iter() {
            let entry = groups.entry(&outcome[1..]).or_insert([0.0, 0.0]);
            entry[outcome[0] as usize] += mass;
        }
        groups
    }

    /// Maximal bit-prediction advantage, 2 max_f Pr[f(side) = bit] minus 1.
    ///
    /// Computed division-free as 2 sum_y max(P(0,y), P(1,y)) minus 1, which is
    /// what the pointwise-optimal predictor achieves; it equals twice the
    /// statistical distance between the joint and (uniform bit) x (side
    /// marginal).
    pub fn pred_adv(&self) -> f64 {
        let best: f64 = self
            .by_side()
            .values()
            .map(|&[p0, p1]| p0.max(p1))
            .sum();
        (2.0 * best - 1.0).clamp(0.0, 1.0)
    }

    /// The product (uniform bit) x (side marginal) over this joint's sides,
    /// the comparison point in the distance form of the advantage.
    pub fn uniform_times_side(&self) -> FiniteDist {
        let mut table: BTreeMap<Outcome, f64> = BTreeMap::new();
        for (side, [p0, p1]) in self.by_side() {
            let half = (p0 + p1) / 2.0;
            for bit in 0..2u32 {
                let mut outcome = Vec::with_capacity(side.len() + 1);
                outcome.push(bit);
                outcome.extend_from_slice(side);
                table.insert(outcome, half);
            }
        }
        FiniteDist::from_conserved(table)
    }
}

/// Splits a joint into an event table: a hidden event bit B per outcome, with
/// B = 1 exactly as often as the prediction advantage, and the bit exactly
/// unbiased given the side information once B = 0.
#[derive(Debug, Clone)]
pub struct LeakageDecomposition {
    entries: Vec<LeakageEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeakageEntry {
    pub outcome: Outcome,
    /// Joint mass landing on B = 0, min(P(0,y), P(1,y)) for this outcome's side.
    pub keep_mass: f64,
    /// Joint mass landing on B = 1, the remainder.
    pub leak_mass: f64,
}

impl LeakageDecomposition {
    pub fn entries(&self) -> &[LeakageEntry] {
        &self.entries
    }

    /// Pr[B = 1]; equals the prediction advantage of the source joint.
    pub fn pr_leak(&self) -> f64 {
        self.entries.iter().map(|e| e.leak_mass).sum()
    }

    /// Pr[B = 0 | outcome], one entry per domain point; 1 on zero-mass points
    /// (the event never fires where nothing happens).
    pub fn b0_given(&self) -> Vec<(Outcome, f64)> {
        self.entries
            .iter()
            .map(|e| {
                let total = e.keep_mass + e.leak_mass;
                let p = if total > 0.0 { e.keep_mass / total } else { 1.0 };
                (e.outcome.clone(), p)
            })
            .collect()
    }

    /// The joint conditioned on B = 0; None when the advantage is 1 and
    /// nothing survives.
    pub fn kept(&self) -> Option<JointBitDist> {
        self.part(|e| e.keep_mass)
    }

    /// The joint conditioned on B = 1; None when the advantage is 0.
    pub fn leaked(&self) -> Option<JointBitDist> {
        self.part(|e| e.leak_mass)
    }

    fn part<F: Fn(&LeakageEntry) -> f64>(&self, pick: F) -> Option<JointBitDist> {
        let total: f64 = self.entries.iter().map(&pick).sum();
        if total <= 0.0 {
            return None;
        }
        let dist = FiniteDist::from_conserved(
            self.entries
                .iter()
                .map(|e| (e.outcome.clone(), pick(e) / total))
                .collect(),
        );
        Some(JointBitDist::new(dist).expect("outcomes come from a valid joint"))
    }

    /// Sums the two event branches back together; reproduces the original
    /// joint (exactly for dyadic masses, within rounding otherwise).
    pub fn reconstruct(&self) -> FiniteDist {
        FiniteDist::from_conserved(
            self.entries
                .iter()
                .map(|e| (e.outcome.clone(), e.keep_mass + e.leak_mass))
                .collect(),
        )
    }
}

/// Builds the leakage event for a joint: per side value y, mass
/// min(P(0,y), P(1,y)) of either bit row survives as B = 0 and the surplus of
/// the heavier row leaks as B = 1.
pub fn leakage_event_decompose(j: &JointBitDist) -> LeakageDecomposition {
    let mut minima: BTreeMap<&[u32], f64> = BTreeMap::new();
    for (side, [p0, p1]) in j.by_side() {
        minima.insert(side, p0.min(p1));
    }
    let entries = j
        .dist()
        .iter()
        .map(|(outcome, mass)| {
            let side_min = minima[&outcome[1..]];
            let keep_mass = mass.min(side_min);
            LeakageEntry {
                outcome: outcome.to_vec(),
                keep_mass,
                leak_mass: mass - keep_mass,
            }
        })
        .collect();
    LeakageDecomposition { entries }
}

/// Result of checking one of the prediction bounds: the exactly computed
/// advantage, the closed-form bound, and whether the bound held.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredBoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

// Product of independent joints as one distribution over
// (x_0..x_{n-1}, y_0..y_{n-1}), bits first, then the concatenated sides.
fn product_of_joints(
    dists: &[JointBitDist],
    cap: usize,
) -> Result<(FiniteDist, Vec<usize>), ProbError> {
    if dists.is_empty() {
        return Err(ProbError::Empty);
    }
    let mut size = 1usize;
    for d in dists {
        size = size.saturating_mul(d.dist().len());
        if size > cap {
            return Err(ProbError::DomainTooLarge { size, cap });
        }
    }
    let mut acc: Vec<(Vec<u32>, Vec<u32>, f64)> = vec![(vec![], vec![], 1.0)];
    for d in dists {
        let mut next = Vec::with_capacity(acc.len() * d.dist().len());
        for (bits, sides, mass) in &acc {
            for (outcome, m) in d.dist().iter() {
                let mut b = bits.clone();
                b.push(outcome[0]);
                let mut s = sides.clone();
                s.extend_from_slice(&outcome[1..]);
                next.push((b, s, mass * m));
            }
        }
        acc = next;
    }
    let arities: Vec<usize> = dists.iter().map(|d| d.arity() - 1).collect();
    let table: BTreeMap<Outcome, f64> = acc
        .into_iter()
        .map(|(bits, sides, mass)| {
            let mut o = bits;
            o.extend(sides);
            (o, mass)
        })
        .collect();
    Ok((FiniteDist::from_conserved(table), arities))
}

/// Exact check of the XOR bound: the advantage in predicting the XOR of
/// independent bits from all the side information is at most the product of
/// the individual advantages.
pub fn xor_pred_bound_check(
    dists: &[JointBitDist],
    cap: usize,
) -> Result<PredBoundCheck, ProbError> {
    let n = dists.len();
    let (product, _) = product_of_joints(dists, cap)?;
    let xored = product.map_outcomes(|o| {
        let xor = o[..n].iter().fold(0, |a, b| a ^ b);
        let mut mapped = Vec::with_capacity(o.len() - n + 1);
        mapped.push(xor);
        mapped.extend_from_slice(&o[n..]);
        mapped
    });
    let lhs = JointBitDist::new(xored)?.pred_adv();
    let rhs = dists.iter().map(|d| d.pred_adv()).product();
    Ok(PredBoundCheck {
        lhs,
        rhs,
        ok: lhs <= rhs + MASS_TOLERANCE,
    })
}

/// Exact check of the difference-disclosure bound: predicting the last bit
/// when every XOR difference with it is public costs at most
/// 1 - prod(1 - adv_i).
pub fn or_pred_bound_check(
    dists: &[JointBitDist],
    cap: usize,
) -> Result<PredBoundCheck, ProbError> {
    let n = dists.len();
    let (product, _) = product_of_joints(dists, cap)?;
    let disclosed = product.map_outcomes(|o| {
        let last = o[n - 1];
        let mut mapped = Vec::with_capacity(o.len());
        mapped.push(last);
        mapped.extend_from_slice(&o[n..]);
        for i in 0..n - 1 {
            mapped.push(o[i] ^ last);
        }
        mapped
    });
    let lhs = JointBitDist::new(disclosed)?.pred_adv();
    let rhs = 1.0
        - dists
            .iter()
            .map(|d| 1.0 - d.pred_adv())
            .product::<f64>();
    Ok(PredBoundCheck {
        lhs,
        rhs,
        ok: lhs <= rhs + MASS_TOLERANCE,
    })
}

/// Distance of a three-bit distribution from the uniform cube. The domain
/// must be all eight triples (zero masses are fine).
pub fn three_bit_uniformity_gap(d: &FiniteDist) -> Result<f64, ProbError> {
    if d.len() != 8 {
        return Err(ProbError::NotTheCube);
    }
    for (i, outcome) in d.outcomes().iter().enumerate() {
        let expected = vec![(i as u32 >> 2) & 1, (i as u32 >> 1) & 1, i as u32 & 1];
        if *outcome != expected {
            return Err(ProbError::NotTheCube);
        }
    }
    let l1: f64 = d.masses().iter().map(|m| (m - 0.125).abs()).sum();
    Ok(l1 / 2.0)
}
