//! Channel-assignment problem model, instance generators, penalty QUBO
//! construction and solution decoding.
//!
//! An instance has `U` users, `C` orthogonal channels and nonnegative
//! interference weights on user pairs; assigning both users of a weighted
//! pair to the same channel costs that weight. The objective is
//! `Σ_c Σ_{u<v} w^(c)_{u,v} X_{u,c} X_{v,c}` subject to one channel per user
//! (one-hot) and optional per-channel capacities `K_c`.
//!
//! [`build_qubo`] applies the standard penalty method: strength `A` on the
//! squared one-hot residuals and, when enabled, strength `B` on squared
//! capacity residuals with binary slack variables `y_{c,l}` of weight `2^l`.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ising::QuboInstance;
use crate::{Error, Result};

/// Interference weights, either one symmetric map shared by all channels or
/// a separate map per channel. Keys are ordered pairs `u < v`.
#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    Shared(BTreeMap<(usize, usize), f64>),
    PerChannel(BTreeMap<(usize, usize, usize), f64>),
}

impl Weights {
    fn validate(&self, num_users: usize, num_channels: usize) -> Result<()> {
        let check_pair = |u: usize, v: usize, w: f64| -> Result<()> {
            if u >= v {
                return Err(Error::InvalidParameter(format!(
                    "weight pair ({u},{v}) must satisfy u < v"
                )));
            }
            if v >= num_users {
                return Err(Error::InvalidParameter(format!(
                    "weight pair ({u},{v}) out of range for {num_users} users"
                )));
            }
            if w < 0.0 || !w.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "weight for pair ({u},{v}) must be finite and nonnegative, got {w}"
                )));
            }
            Ok(())
        };
        match self {
            Weights::Shared(map) => {
                for (&(u, v), &w) in map {
                    check_pair(u, v, w)?;
                }
            }
            Weights::PerChannel(map) => {
                for (&(u, v, c), &w) in map {
                    check_pair(u, v, w)?;
                    if c >= num_channels {
                        return Err(Error::InvalidParameter(format!(
                            "weight channel {c} out of range"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A `U`-user, `C`-channel interference-aware assignment problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelAssignmentInstance {
    num_users: usize,
    num_channels: usize,
    weights: Weights,
    capacities: Option<Vec<usize>>,
    seed: u64,
    metadata: String,
}

impl ChannelAssignmentInstance {
    pub fn new(
        num_users: usize,
        num_channels: usize,
        weights: Weights,
        capacities: Option<Vec<usize>>,
        seed: u64,
        metadata: impl Into<String>,
    ) -> Result<Self> {
        if num_users == 0 || num_channels == 0 {
            return Err(Error::InvalidParameter(
                "instance needs at least one user and one channel".into(),
            ));
        }
        weights.validate(num_users, num_channels)?;
        if let Some(caps) = &capacities {
            if caps.len() != num_channels {
                return Err(Error::InvalidParameter(format!(
                    "expected {num_channels} capacities, got {}",
                    caps.len()
                )));
            }
            let total: usize = caps.iter().sum();
            if total < num_users {
                return Err(Error::Infeasible(format!(
                    "total capacity {total} < {num_users} users"
                )));
            }
        }
        Ok(Self {
            num_users,
            num_channels,
            weights,
            capacities,
            seed,
            metadata: metadata.into(),
        })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn capacities(&self) -> Option<&[usize]> {
        self.capacities.as_deref()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn metadata(&self) -> &str {
        &self.metadata
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    /// Interference weight between `u` and `v` on channel `c`.
    pub fn weight(&self, u: usize, v: usize, c: usize) -> f64 {
        if u == v {
            return 0.0;
        }
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        match &self.weights {
            Weights::Shared(map) => map.get(&(a, b)).copied().unwrap_or(0.0),
            Weights::PerChannel(map) => map.get(&(a, b, c)).copied().unwrap_or(0.0),
        }
    }

    /// Worst-case weight of the pair over channels (equals the shared weight
    /// for channel-independent instances).
    pub fn pair_weight_max(&self, u: usize, v: usize) -> f64 {
        if u == v {
            return 0.0;
        }
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        match &self.weights {
            Weights::Shared(map) => map.get(&(a, b)).copied().unwrap_or(0.0),
            Weights::PerChannel(map) => (0..self.num_channels)
                .map(|c| map.get(&(a, b, c)).copied().unwrap_or(0.0))
                .fold(0.0, f64::max),
        }
    }

    /// All weighted pairs as `(u, v, max-over-channels weight)`.
    pub fn pair_weights_max(&self) -> BTreeMap<(usize, usize), f64> {
        let mut out = BTreeMap::new();
        match &self.weights {
            Weights::Shared(map) => {
                for (&(u, v), &w) in map {
                    out.insert((u, v), w);
                }
            }
            Weights::PerChannel(map) => {
                for (&(u, v, _), &w) in map {
                    let e = out.entry((u, v)).or_insert(0.0f64);
                    *e = e.max(w);
                }
            }
        }
        out
    }

    /// `Σ_v max_c w^(c)_{u,v}`, the interference score used for core
    /// selection and penalty sizing.
    pub fn weighted_degree(&self, u: usize) -> f64 {
        self.pair_weights_max()
            .iter()
            .filter(|(&(a, b), _)| a == u || b == u)
            .map(|(_, &w)| w)
            .sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut doc = serde_json::Map::new();
        doc.insert("num_users".into(), self.num_users.into());
        doc.insert("num_channels".into(), self.num_channels.into());
        if let Some(caps) = &self.capacities {
            doc.insert("capacities".into(), serde_json::json!(caps));
        }
        match &self.weights {
            Weights::Shared(map) => {
                let entries: Vec<(usize, usize, f64)> =
                    map.iter().map(|(&(u, v), &w)| (u, v, w)).collect();
                doc.insert("weights".into(), serde_json::json!(entries));
            }
            Weights::PerChannel(map) => {
                let entries: Vec<(usize, usize, usize, f64)> =
                    map.iter().map(|(&(u, v, c), &w)| (u, v, c, w)).collect();
                doc.insert("per_channel_weights".into(), serde_json::json!(entries));
            }
        }
        doc.insert("seed".into(), self.seed.into());
        doc.insert("metadata".into(), self.metadata.clone().into());
        serde_json::Value::Object(doc)
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            num_users: usize,
            num_channels: usize,
            capacities: Option<Vec<usize>>,
            weights: Option<Vec<(usize, usize, f64)>>,
            per_channel_weights: Option<Vec<(usize, usize, usize, f64)>>,
            #[serde(default)]
            seed: u64,
            #[serde(default)]
            metadata: String,
        }
        let doc: Doc = serde_json::from_value(v.clone())?;
        let weights = match (doc.weights, doc.per_channel_weights) {
            (Some(w), None) => {
                Weights::Shared(w.into_iter().map(|(u, v, x)| ((u, v), x)).collect())
            }
            (None, Some(w)) => Weights::PerChannel(
                w.into_iter().map(|(u, v, c, x)| ((u, v, c), x)).collect(),
            ),
            (None, None) => Weights::Shared(BTreeMap::new()),
            (Some(_), Some(_)) => {
                return Err(Error::Json(
                    "instance carries both weights and per_channel_weights".into(),
                ))
            }
        };
        Self::new(
            doc.num_users,
            doc.num_channels,
            weights,
            doc.capacities,
            doc.seed,
            doc.metadata,
        )
    }
}

/// Penalty strengths for the QUBO encoding: `A` on the one-hot residuals,
/// `B` on the capacity residuals (0 disables capacity penalties).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub one_hot_a: f64,
    pub capacity_b: f64,
}

impl PenaltyConfig {
    pub fn new(one_hot_a: f64, capacity_b: f64) -> Result<Self> {
        if !(one_hot_a > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "one-hot penalty must be positive, got {one_hot_a}"
            )));
        }
        if capacity_b < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "capacity penalty must be nonnegative, got {capacity_b}"
            )));
        }
        Ok(Self { one_hot_a, capacity_b })
    }

    pub fn one_hot_only(a: f64) -> Result<Self> {
        Self::new(a, 0.0)
    }
}

/// `A = 1 + max_u Σ_{v≠u} w_{uv}` (per-pair maxima over channels), so any
/// one-hot violation costs more than the largest interference a single
/// reassignment could save. Capacity penalties stay off; the pipeline
/// enforces capacities classically.
pub fn auto_penalty(inst: &ChannelAssignmentInstance) -> PenaltyConfig {
    let max_degree = (0..inst.num_users())
        .map(|u| inst.weighted_degree(u))
        .fold(0.0, f64::max);
    PenaltyConfig { one_hot_a: 1.0 + max_degree, capacity_b: 0.0 }
}

/// Binary assignment matrix `X ∈ {0,1}^{U×C}` (row-major). Feasibility is a
/// checked property, not an invariant: rows may be empty or over-assigned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentMatrix {
    num_users: usize,
    num_channels: usize,
    entries: Vec<u8>,
}

impl AssignmentMatrix {
    pub fn zeros(num_users: usize, num_channels: usize) -> Self {
        Self { num_users, num_channels, entries: vec![0; num_users * num_channels] }
    }

    /// Build a one-hot matrix from a channel per user.
    pub fn from_channels(channels: &[usize], num_channels: usize) -> Self {
        let mut m = Self::zeros(channels.len(), num_channels);
        for (u, &c) in channels.iter().enumerate() {
            m.set(u, c, true);
        }
        m
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn get(&self, u: usize, c: usize) -> bool {
        self.entries[u * self.num_channels + c] != 0
    }

    pub fn set(&mut self, u: usize, c: usize, value: bool) {
        self.entries[u * self.num_channels + c] = value as u8;
    }

    /// Channels selected for `u` (0, 1 or more entries).
    pub fn channels_of(&self, u: usize) -> Vec<usize> {
        (0..self.num_channels).filter(|&c| self.get(u, c)).collect()
    }

    /// The unique channel of `u`, if the row is exactly one-hot.
    pub fn channel_of(&self, u: usize) -> Option<usize> {
        let mut found = None;
        for c in 0..self.num_channels {
            if self.get(u, c) {
                if found.is_some() {
                    return None;
                }
                found = Some(c);
            }
        }
        found
    }

    pub fn load(&self, c: usize) -> usize {
        (0..self.num_users).filter(|&u| self.get(u, c)).count()
    }

    /// Channel vector for a fully one-hot matrix.
    pub fn to_channels(&self) -> Option<Vec<usize>> {
        (0..self.num_users).map(|u| self.channel_of(u)).collect()
    }
}

/// Map from problem coordinates to qubit indices.
///
/// Assignment variables come first, `idx(u,c) = u*C + c` (0-based), followed
/// by capacity slack bits `y_{c,l}` with widths `L_c = ceil(log2(K_c + 1))`
/// when capacity penalties are enabled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableLayout {
    num_users: usize,
    num_channels: usize,
    slack_widths: Vec<usize>,
    total: usize,
}

impl VariableLayout {
    fn new(num_users: usize, num_channels: usize, slack_widths: Vec<usize>) -> Self {
        let total = num_users * num_channels + slack_widths.iter().sum::<usize>();
        Self { num_users, num_channels, slack_widths, total }
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    /// Total number of binary variables (assignment + slack).
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn assignment_count(&self) -> usize {
        self.num_users * self.num_channels
    }

    pub fn assignment_index(&self, u: usize, c: usize) -> usize {
        debug_assert!(u < self.num_users && c < self.num_channels);
        u * self.num_channels + c
    }

    pub fn slack_width(&self, c: usize) -> usize {
        self.slack_widths.get(c).copied().unwrap_or(0)
    }

    pub fn slack_index(&self, c: usize, l: usize) -> usize {
        debug_assert!(l < self.slack_widths[c]);
        let before: usize = self.slack_widths[..c].iter().sum();
        self.num_users * self.num_channels + before + l
    }

    /// Qubit indices of one user's channel block.
    pub fn user_block(&self, u: usize) -> Vec<usize> {
        (0..self.num_channels).map(|c| self.assignment_index(u, c)).collect()
    }

    /// All user blocks, in user order.
    pub fn user_blocks(&self) -> Vec<Vec<usize>> {
        (0..self.num_users).map(|u| self.user_block(u)).collect()
    }
}

/// Expand the penalized objective into an explicit QUBO.
///
/// Per user: linear `-A` on each assignment bit, `+2A` between bits of the
/// same user block, constant `+A`. Interference adds `w^(c)_{u,v}` between
/// same-channel bits. With `B > 0`, each channel's capacity residual
/// `Σ_u x_{u,c} + Σ_l 2^l y_{c,l} - K_c` is squared and expanded.
pub fn build_qubo(
    inst: &ChannelAssignmentInstance,
    pen: &PenaltyConfig,
) -> Result<(QuboInstance, VariableLayout)> {
    let (users, channels) = (inst.num_users(), inst.num_channels());
    let a = pen.one_hot_a;
    let b = pen.capacity_b;
    if b > 0.0 && inst.capacities().is_none() {
        return Err(Error::Config(
            "capacity penalty requires an instance with capacities".into(),
        ));
    }
    let slack_widths = if b > 0.0 {
        inst.capacities()
            .unwrap()
            .iter()
            .map(|&k| usize::BITS as usize - (k + 1).leading_zeros() as usize)
            .collect()
    } else {
        vec![0; channels]
    };
    let layout = VariableLayout::new(users, channels, slack_widths);
    let mut q = QuboInstance::new(layout.total());

    // one-hot penalties: A (Σ_c x_{u,c} - 1)^2
    for u in 0..users {
        q.add_offset(a);
        for c in 0..channels {
            q.add_linear(layout.assignment_index(u, c), -a);
        }
        for c1 in 0..channels {
            for c2 in (c1 + 1)..channels {
                q.add_quadratic(
                    layout.assignment_index(u, c1),
                    layout.assignment_index(u, c2),
                    2.0 * a,
                );
            }
        }
    }

    // interference objective
    match inst.weights() {
        Weights::Shared(map) => {
            for (&(u, v), &w) in map {
                if w == 0.0 {
                    continue;
                }
                for c in 0..channels {
                    q.add_quadratic(
                        layout.assignment_index(u, c),
                        layout.assignment_index(v, c),
                        w,
                    );
                }
            }
        }
        Weights::PerChannel(map) => {
            for (&(u, v, c), &w) in map {
                if w == 0.0 {
                    continue;
                }
                q.add_quadratic(
                    layout.assignment_index(u, c),
                    layout.assignment_index(v, c),
                    w,
                );
            }
        }
    }

    // capacity penalties: B (Σ_u x_{u,c} + Σ_l 2^l y_{c,l} - K_c)^2
    if b > 0.0 {
        let caps = inst.capacities().unwrap();
        for c in 0..channels {
            let k = caps[c] as f64;
            // terms with coefficient 1 (assignments) and 2^l (slacks)
            let mut terms: Vec<(usize, f64)> =
                (0..users).map(|u| (layout.assignment_index(u, c), 1.0)).collect();
            for l in 0..layout.slack_width(c) {
                terms.push((layout.slack_index(c, l), (1u64 << l) as f64));
            }
            q.add_offset(b * k * k);
            for &(i, coef) in &terms {
                q.add_linear(i, b * (coef * coef - 2.0 * k * coef));
            }
            for (p, &(i, ci)) in terms.iter().enumerate() {
                for &(j, cj) in &terms[p + 1..] {
                    q.add_quadratic(i, j, 2.0 * b * ci * cj);
                }
            }
        }
    }

    Ok((q, layout))
}

/// Extract the assignment matrix from a QUBO bitstring; slack bits are
/// discarded.
pub fn decode(bits: &[u8], layout: &VariableLayout) -> Result<AssignmentMatrix> {
    if bits.len() != layout.total() {
        return Err(Error::DecodeLength { expected: layout.total(), got: bits.len() });
    }
    let mut x = AssignmentMatrix::zeros(layout.num_users(), layout.num_channels());
    for u in 0..layout.num_users() {
        for c in 0..layout.num_channels() {
            if bits[layout.assignment_index(u, c)] != 0 {
                x.set(u, c, true);
            }
        }
    }
    Ok(x)
}

/// Inverse of [`decode`] for the assignment block; slack bits are zero.
pub fn encode(x: &AssignmentMatrix, layout: &VariableLayout) -> Vec<u8> {
    let mut bits = vec![0u8; layout.total()];
    for u in 0..layout.num_users() {
        for c in 0..layout.num_channels() {
            if x.get(u, c) {
                bits[layout.assignment_index(u, c)] = 1;
            }
        }
    }
    bits
}

/// Constraint violations of an assignment matrix.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// Users whose row is not one-hot, with the row sum.
    pub one_hot_violations: Vec<(usize, usize)>,
    /// Channels over capacity, with the overflow amount.
    pub capacity_violations: Vec<(usize, usize)>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.one_hot_violations.is_empty() && self.capacity_violations.is_empty()
    }
}

pub fn check_feasibility(
    x: &AssignmentMatrix,
    inst: &ChannelAssignmentInstance,
) -> FeasibilityReport {
    let mut report = FeasibilityReport::default();
    for u in 0..inst.num_users() {
        let count = x.channels_of(u).len();
        if count != 1 {
            report.one_hot_violations.push((u, count));
        }
    }
    if let Some(caps) = inst.capacities() {
        for (c, &k) in caps.iter().enumerate() {
            let load = x.load(c);
            if load > k {
                report.capacity_violations.push((c, load - k));
            }
        }
    }
    report
}

/// Objective `Σ_c Σ_{u<v} w^(c)_{u,v} X_{u,c} X_{v,c}`; defined for
/// infeasible matrices too.
pub fn objective_value(x: &AssignmentMatrix, inst: &ChannelAssignmentInstance) -> f64 {
    let mut total = 0.0;
    match inst.weights() {
        Weights::Shared(map) => {
            for (&(u, v), &w) in map {
                for c in 0..inst.num_channels() {
                    if x.get(u, c) && x.get(v, c) {
                        total += w;
                    }
                }
            }
        }
        Weights::PerChannel(map) => {
            for (&(u, v, c), &w) in map {
                if x.get(u, c) && x.get(v, c) {
                    total += w;
                }
            }
        }
    }
    total
}

/// Make an assignment feasible. Users with zero or multiple channels are
/// cleared and reassigned to the capacity-feasible channel with the least
/// incremental interference (ties: lowest load, then lowest channel index);
/// channels over capacity evict their highest-interference users first.
/// Already-feasible matrices pass through unchanged.
pub fn repair(
    x: &AssignmentMatrix,
    inst: &ChannelAssignmentInstance,
) -> Result<AssignmentMatrix> {
    let (users, channels) = (inst.num_users(), inst.num_channels());
    let caps = inst.capacities();
    let cap_of = |c: usize| caps.map_or(usize::MAX, |k| k[c]);

    let mut assigned: Vec<Option<usize>> = vec![None; users];
    let mut pool: Vec<usize> = Vec::new();
    for u in 0..users {
        match x.channel_of(u) {
            Some(c) => assigned[u] = Some(c),
            None => pool.push(u),
        }
    }

    let mut loads = vec![0usize; channels];
    for c in assigned.iter().flatten() {
        loads[*c] += 1;
    }

    // interference a user currently sees on its own channel
    let pressure = |u: usize, c: usize, assigned: &[Option<usize>]| -> f64 {
        (0..users)
            .filter(|&v| v != u && assigned[v] == Some(c))
            .map(|v| inst.weight(u, v, c))
            .sum()
    };

    // evict from over-capacity channels: heaviest contributor first, ties by
    // lowest user index
    for c in 0..channels {
        while loads[c] > cap_of(c) {
            let victim = (0..users)
                .filter(|&u| assigned[u] == Some(c))
                .max_by(|&a, &b| {
                    pressure(a, c, &assigned)
                        .partial_cmp(&pressure(b, c, &assigned))
                        .unwrap()
                        .then(b.cmp(&a))
                })
                .expect("over-capacity channel has users");
            assigned[victim] = None;
            loads[c] -= 1;
            pool.push(victim);
        }
    }

    pool.sort_unstable();
    for &u in &pool {
        let mut best: Option<(f64, usize, usize)> = None; // (cost, load, channel)
        for c in 0..channels {
            if loads[c] >= cap_of(c) {
                continue;
            }
            let cost: f64 = (0..users)
                .filter(|&v| v != u && assigned[v] == Some(c))
                .map(|v| inst.weight(u, v, c))
                .sum();
            let cand = (cost, loads[c], c);
            let better = match best {
                None => true,
                Some(b) => (cand.0, cand.1, cand.2) < b,
            };
            if better {
                best = Some(cand);
            }
        }
        let (_, _, c) = best.ok_or_else(|| {
            Error::Infeasible(format!("no channel with spare capacity for user {u}"))
        })?;
        assigned[u] = Some(c);
        loads[c] += 1;
    }

    let mut out = AssignmentMatrix::zeros(users, channels);
    for (u, c) in assigned.iter().enumerate() {
        out.set(u, c.expect("all users assigned after repair"), true);
    }
    Ok(out)
}

/// The 4-user, 4-channel demonstration instance: one shared integer weight
/// in `{0,..,5}` per user pair, drawn from the seeded generator in
/// lexicographic pair order.
pub fn generate_demo(seed: u64) -> ChannelAssignmentInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut map = BTreeMap::new();
    for u in 0..4usize {
        for v in (u + 1)..4 {
            let w: u32 = rng.gen_range(0..=5);
            if w > 0 {
                map.insert((u, v), w as f64);
            }
        }
    }
    ChannelAssignmentInstance::new(4, 4, Weights::Shared(map), None, seed, "demo")
        .expect("demo instance is always valid")
}

/// Geometry of the synthetic hotspot topologies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HotspotParams {
    /// Side of the square deployment area, meters.
    pub side: f64,
    /// Number of hotspot centers; `None` means `ceil(U / 8)`.
    pub num_hotspots: Option<usize>,
    /// Isotropic Gaussian spread of users around their center, meters.
    pub pos_sigma: f64,
    /// Pathloss exponent.
    pub alpha: f64,
    /// Pathloss reference distance, meters.
    pub ref_distance: f64,
    /// Distance clamp: pairs closer than this are treated as this far apart.
    pub min_distance: f64,
    /// Log-normal shadowing standard deviation, dB.
    pub shadow_sigma_db: f64,
    /// Weights below this are dropped from the interference graph.
    pub weight_floor: f64,
}

impl Default for HotspotParams {
    fn default() -> Self {
        Self {
            side: 100.0,
            num_hotspots: None,
            pos_sigma: 5.0,
            alpha: 3.5,
            ref_distance: 1.0,
            min_distance: 1.0,
            shadow_sigma_db: 6.0,
            weight_floor: 1e-3,
        }
    }
}

impl HotspotParams {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("side", self.side),
            ("alpha", self.alpha),
            ("ref_distance", self.ref_distance),
            ("min_distance", self.min_distance),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.pos_sigma < 0.0 || self.shadow_sigma_db < 0.0 || self.weight_floor < 0.0 {
            return Err(Error::InvalidParameter("sigmas and floor must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Hotspot topology generator: cluster centers uniform in the square, users
/// scattered around the centers (round-robin), pairwise weight
/// `(max(d, d_min)/d_0)^(-alpha) * 10^(chi/10)` with `chi ~ N(0, sigma_sh^2)`,
/// sparsified at the weight floor. Fully deterministic in `(params, seed)`.
pub fn generate_hotspot_with_positions(
    num_users: usize,
    num_channels: usize,
    params: &HotspotParams,
    seed: u64,
) -> Result<(ChannelAssignmentInstance, Vec<[f64; 2]>)> {
    if num_users == 0 || num_channels == 0 {
        return Err(Error::InvalidParameter(
            "hotspot instance needs at least one user and one channel".into(),
        ));
    }
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hotspots = params.num_hotspots.unwrap_or(num_users.div_ceil(8)).max(1);

    let centers: Vec<[f64; 2]> = (0..hotspots)
        .map(|_| [rng.gen_range(0.0..params.side), rng.gen_range(0.0..params.side)])
        .collect();

    let spread = Normal::new(0.0, params.pos_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let positions: Vec<[f64; 2]> = (0..num_users)
        .map(|u| {
            let c = centers[u % hotspots];
            [c[0] + spread.sample(&mut rng), c[1] + spread.sample(&mut rng)]
        })
        .collect();

    let shadow = Normal::new(0.0, params.shadow_sigma_db.max(f64::MIN_POSITIVE)).unwrap();
    let mut map = BTreeMap::new();
    for u in 0..num_users {
        for v in (u + 1)..num_users {
            let dx = positions[u][0] - positions[v][0];
            let dy = positions[u][1] - positions[v][1];
            let d = (dx * dx + dy * dy).sqrt().max(params.min_distance);
            let chi = shadow.sample(&mut rng);
            let w = (d / params.ref_distance).powf(-params.alpha) * 10f64.powf(chi / 10.0);
            if w >= params.weight_floor {
                map.insert((u, v), w);
            }
        }
    }

    let inst = ChannelAssignmentInstance::new(
        num_users,
        num_channels,
        Weights::Shared(map),
        None,
        seed,
        format!("hotspot side={} hotspots={}", params.side, hotspots),
    )?;
    Ok((inst, positions))
}

pub fn generate_hotspot(
    num_users: usize,
    num_channels: usize,
    params: &HotspotParams,
    seed: u64,
) -> Result<ChannelAssignmentInstance> {
    generate_hotspot_with_positions(num_users, num_channels, params, seed).map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::{qubo_to_ising, spins_from_bits};

    fn bits_of(value: usize, n: usize) -> Vec<u8> {
        (0..n).map(|i| ((value >> i) & 1) as u8).collect()
    }

    fn two_user_instance() -> ChannelAssignmentInstance {
        let mut w = BTreeMap::new();
        w.insert((0, 1), 1.0);
        ChannelAssignmentInstance::new(2, 2, Weights::Shared(w), None, 0, "").unwrap()
    }

    #[test]
    fn build_qubo_two_users_two_channels() {
        let inst = two_user_instance();
        let pen = PenaltyConfig::one_hot_only(2.0).unwrap();
        let (q, layout) = build_qubo(&inst, &pen).unwrap();
        assert_eq!(layout.total(), 4);
        for i in 0..4 {
            assert_eq!(q.linear(i), -2.0);
        }
        // +2A within each user's block
        assert_eq!(q.quadratic(layout.assignment_index(0, 0), layout.assignment_index(0, 1)), 4.0);
        assert_eq!(q.quadratic(layout.assignment_index(1, 0), layout.assignment_index(1, 1)), 4.0);
        // +w between same-channel bits
        assert_eq!(q.quadratic(layout.assignment_index(0, 0), layout.assignment_index(1, 0)), 1.0);
        assert_eq!(q.quadratic(layout.assignment_index(0, 1), layout.assignment_index(1, 1)), 1.0);
        assert_eq!(q.offset(), 4.0);

        // brute-force check: QUBO energy equals objective + penalty residuals
        for v in 0..16usize {
            let bits = bits_of(v, 4);
            let x = decode(&bits, &layout).unwrap();
            let mut expected = objective_value(&x, &inst);
            for u in 0..2 {
                let s = x.channels_of(u).len() as f64;
                expected += 2.0 * (s - 1.0) * (s - 1.0);
            }
            assert!((q.energy(&bits) - expected).abs() < 1e-9, "bitstring {v}");
        }
    }

    #[test]
    fn build_qubo_per_channel_weights() {
        let mut w = BTreeMap::new();
        w.insert((0, 1, 0), 2.0); // interference only on channel 0
        let inst =
            ChannelAssignmentInstance::new(2, 2, Weights::PerChannel(w), None, 0, "").unwrap();
        let pen = PenaltyConfig::one_hot_only(3.0).unwrap();
        let (q, layout) = build_qubo(&inst, &pen).unwrap();
        assert_eq!(
            q.quadratic(layout.assignment_index(0, 0), layout.assignment_index(1, 0)),
            2.0
        );
        assert_eq!(
            q.quadratic(layout.assignment_index(0, 1), layout.assignment_index(1, 1)),
            0.0
        );
        // sharing channel 1 is free, sharing channel 0 costs 2
        let shared0 = AssignmentMatrix::from_channels(&[0, 0], 2);
        let shared1 = AssignmentMatrix::from_channels(&[1, 1], 2);
        assert_eq!(objective_value(&shared0, &inst), 2.0);
        assert_eq!(objective_value(&shared1, &inst), 0.0);
        assert_eq!(q.energy(&encode(&shared1, &layout)), 0.0);
    }

    #[test]
    fn build_qubo_single_variable() {
        let inst =
            ChannelAssignmentInstance::new(1, 1, Weights::Shared(BTreeMap::new()), None, 0, "")
                .unwrap();
        let pen = PenaltyConfig::one_hot_only(10.0).unwrap();
        let (q, layout) = build_qubo(&inst, &pen).unwrap();
        assert_eq!(layout.total(), 1);
        assert_eq!(q.linear(0), -10.0);
        assert_eq!(q.offset(), 10.0);
        // minimizer is x = 1
        assert!(q.energy(&[1]) < q.energy(&[0]));
        assert_eq!(q.energy(&[1]), 0.0);
    }

    #[test]
    fn build_qubo_capacity_slack_widths() {
        let inst = ChannelAssignmentInstance::new(
            4,
            4,
            Weights::Shared(BTreeMap::new()),
            Some(vec![2; 4]),
            0,
            "",
        )
        .unwrap();
        let pen = PenaltyConfig::new(5.0, 1.0).unwrap();
        let (_, layout) = build_qubo(&inst, &pen).unwrap();
        // L_c = ceil(log2(K_c + 1)) = 2
        assert_eq!(layout.slack_width(0), 2);
        assert_eq!(layout.total(), 16 + 8);
    }

    #[test]
    fn build_qubo_capacity_residual_matches_expansion() {
        let inst = ChannelAssignmentInstance::new(
            3,
            2,
            Weights::Shared(BTreeMap::new()),
            Some(vec![2, 2]),
            0,
            "",
        )
        .unwrap();
        let pen = PenaltyConfig::new(3.0, 2.0).unwrap();
        let (q, layout) = build_qubo(&inst, &pen).unwrap();
        let n = layout.total();
        for v in 0..(1usize << n) {
            let bits = bits_of(v, n);
            let mut expected = 0.0;
            for u in 0..3 {
                let s: f64 =
                    (0..2).map(|c| bits[layout.assignment_index(u, c)] as f64).sum::<f64>() - 1.0;
                expected += 3.0 * s * s;
            }
            for c in 0..2 {
                let mut s: f64 =
                    (0..3).map(|u| bits[layout.assignment_index(u, c)] as f64).sum();
                for l in 0..layout.slack_width(c) {
                    s += (1u64 << l) as f64 * bits[layout.slack_index(c, l)] as f64;
                }
                let r = s - 2.0;
                expected += 2.0 * r * r;
            }
            assert!((q.energy(&bits) - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn capacity_penalty_without_capacities_is_config_error() {
        let inst = two_user_instance();
        let pen = PenaltyConfig::new(1.0, 1.0).unwrap();
        assert!(matches!(build_qubo(&inst, &pen), Err(Error::Config(_))));
    }

    #[test]
    fn decode_simple() {
        let layout = VariableLayout::new(2, 2, vec![0, 0]);
        let x = decode(&[1, 0, 0, 1], &layout).unwrap();
        assert!(x.get(0, 0) && !x.get(0, 1) && !x.get(1, 0) && x.get(1, 1));
        let zero = decode(&[0, 0, 0, 0], &layout).unwrap();
        assert_eq!(zero.channels_of(0), Vec::<usize>::new());
    }

    #[test]
    fn decode_length_mismatch() {
        let layout = VariableLayout::new(2, 2, vec![0, 0]);
        assert_eq!(
            decode(&[1, 0, 0], &layout),
            Err(Error::DecodeLength { expected: 4, got: 3 })
        );
    }

    #[test]
    fn encode_decode_round_trip() {
        let layout = VariableLayout::new(3, 2, vec![0, 0]);
        for v in 0..(1usize << 6) {
            let bits = bits_of(v, 6);
            let x = decode(&bits, &layout).unwrap();
            assert_eq!(encode(&x, &layout), bits);
        }
    }

    #[test]
    fn feasibility_report_cases() {
        let inst = two_user_instance();
        let ok = AssignmentMatrix::from_channels(&[0, 1], 2);
        assert!(check_feasibility(&ok, &inst).feasible());

        let mut bad = AssignmentMatrix::zeros(2, 2);
        bad.set(0, 0, true);
        bad.set(0, 1, true);
        let report = check_feasibility(&bad, &inst);
        assert_eq!(report.one_hot_violations, vec![(0, 2), (1, 0)]);
    }

    #[test]
    fn feasibility_capacity_violation() {
        let inst = ChannelAssignmentInstance::new(
            3,
            1,
            Weights::Shared(BTreeMap::new()),
            Some(vec![2]),
            0,
            "",
        );
        // sum of capacities < users is rejected at construction
        assert!(matches!(inst, Err(Error::Infeasible(_))));

        let inst = ChannelAssignmentInstance::new(
            3,
            2,
            Weights::Shared(BTreeMap::new()),
            Some(vec![2, 1]),
            0,
            "",
        )
        .unwrap();
        let x = AssignmentMatrix::from_channels(&[0, 0, 0], 2);
        let report = check_feasibility(&x, &inst);
        assert_eq!(report.capacity_violations, vec![(0, 1)]);
    }

    #[test]
    fn objective_cases() {
        let mut w = BTreeMap::new();
        w.insert((0, 1), 3.0);
        let inst = ChannelAssignmentInstance::new(2, 2, Weights::Shared(w), None, 0, "").unwrap();
        let apart = AssignmentMatrix::from_channels(&[0, 1], 2);
        assert_eq!(objective_value(&apart, &inst), 0.0);
        let together = AssignmentMatrix::from_channels(&[1, 1], 2);
        assert_eq!(objective_value(&together, &inst), 3.0);
    }

    #[test]
    fn objective_matches_triple_loop() {
        let inst = generate_demo(3);
        let x = AssignmentMatrix::from_channels(&[0, 0, 2, 2], 4);
        let mut naive = 0.0;
        for c in 0..4 {
            for u in 0..4 {
                for v in (u + 1)..4 {
                    if x.get(u, c) && x.get(v, c) {
                        naive += inst.weight(u, v, c);
                    }
                }
            }
        }
        assert_eq!(objective_value(&x, &inst), naive);
    }

    #[test]
    fn repair_over_assigned_user() {
        let inst = two_user_instance();
        let mut x = AssignmentMatrix::zeros(2, 2);
        x.set(0, 0, true);
        x.set(0, 1, true);
        x.set(1, 1, true);
        let fixed = repair(&x, &inst).unwrap();
        assert!(check_feasibility(&fixed, &inst).feasible());
        // user 1 untouched, user 0 lands on the empty channel
        assert_eq!(fixed.channel_of(1), Some(1));
        assert_eq!(fixed.channel_of(0), Some(0));
        assert_eq!(objective_value(&fixed, &inst), 0.0);
    }

    #[test]
    fn repair_is_identity_on_feasible() {
        let inst = two_user_instance();
        let x = AssignmentMatrix::from_channels(&[1, 0], 2);
        assert_eq!(repair(&x, &inst).unwrap(), x);
    }

    #[test]
    fn repair_all_zero_spreads_users() {
        let mut w = BTreeMap::new();
        w.insert((0, 1), 5.0);
        let inst = ChannelAssignmentInstance::new(2, 2, Weights::Shared(w), None, 0, "").unwrap();
        let fixed = repair(&AssignmentMatrix::zeros(2, 2), &inst).unwrap();
        assert!(check_feasibility(&fixed, &inst).feasible());
        assert_eq!(objective_value(&fixed, &inst), 0.0);
    }

    #[test]
    fn repair_respects_capacities() {
        let mut w = BTreeMap::new();
        w.insert((0, 1), 1.0);
        w.insert((0, 2), 2.0);
        w.insert((1, 2), 4.0);
        let inst =
            ChannelAssignmentInstance::new(3, 2, Weights::Shared(w), Some(vec![1, 2]), 0, "")
                .unwrap();
        let all_same = AssignmentMatrix::from_channels(&[0, 0, 0], 2);
        let fixed = repair(&all_same, &inst).unwrap();
        assert!(check_feasibility(&fixed, &inst).feasible());
        assert_eq!(repair(&fixed, &inst).unwrap(), fixed);
    }

    #[test]
    fn demo_generator_is_deterministic() {
        let a = generate_demo(7);
        let b = generate_demo(7);
        assert_eq!(a, b);
        assert_ne!(a, generate_demo(8));
        for u in 0..4 {
            for v in (u + 1)..4 {
                let w = a.weight(u, v, 0);
                assert!((0.0..=5.0).contains(&w));
                assert_eq!(w.fract(), 0.0, "demo weights are integers");
            }
        }
        let pen = PenaltyConfig::one_hot_only(10.0).unwrap();
        let (_, layout) = build_qubo(&a, &pen).unwrap();
        assert_eq!(layout.total(), 16);
    }

    #[test]
    fn hotspot_generator_is_deterministic() {
        let params = HotspotParams::default();
        let a = generate_hotspot(16, 2, &params, 42).unwrap();
        let b = generate_hotspot(16, 2, &params, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_hotspot(16, 2, &params, 43).unwrap());
    }

    #[test]
    fn hotspot_distance_clamp_and_floor() {
        // all users in one tight cluster: weights near the clamp cap, positive
        let params = HotspotParams {
            pos_sigma: 0.0,
            shadow_sigma_db: 0.0,
            ..HotspotParams::default()
        };
        let inst = generate_hotspot(2, 2, &params, 1).unwrap();
        let w = inst.weight(0, 1, 0);
        assert!(w > 0.0);
        assert!((w - 1.0).abs() < 1e-9, "clamped at (d_min/d_0)^-alpha = 1");

        // far-apart users with a positive floor produce no edge
        let params = HotspotParams {
            num_hotspots: Some(2),
            pos_sigma: 0.0,
            shadow_sigma_db: 0.0,
            side: 1e5,
            ..HotspotParams::default()
        };
        let inst = generate_hotspot(2, 2, &params, 5).unwrap();
        assert_eq!(inst.weight(0, 1, 0), 0.0);
    }

    #[test]
    fn hotspot_rejects_bad_params() {
        let params = HotspotParams { alpha: -1.0, ..HotspotParams::default() };
        assert!(matches!(
            generate_hotspot(4, 2, &params, 0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn auto_penalty_weighted_degree() {
        let mut w = BTreeMap::new();
        w.insert((0, 1), 5.0);
        w.insert((0, 2), 1.0);
        w.insert((1, 2), 1.0);
        let inst = ChannelAssignmentInstance::new(3, 2, Weights::Shared(w), None, 0, "").unwrap();
        assert_eq!(auto_penalty(&inst).one_hot_a, 7.0);

        let empty =
            ChannelAssignmentInstance::new(3, 2, Weights::Shared(BTreeMap::new()), None, 0, "")
                .unwrap();
        assert_eq!(auto_penalty(&empty).one_hot_a, 1.0);
    }

    /// With A = auto_penalty, the QUBO energy of any feasible assignment
    /// equals the objective, and every one-hot violator costs strictly more
    /// than the feasible optimum.
    #[test]
    fn penalty_dominance_small_instance() {
        let inst = two_user_instance();
        let pen = auto_penalty(&inst);
        let (q, layout) = build_qubo(&inst, &pen).unwrap();
        let mut best_feasible = f64::INFINITY;
        let mut worst_feasible = f64::NEG_INFINITY;
        for v in 0..16usize {
            let bits = bits_of(v, 4);
            let x = decode(&bits, &layout).unwrap();
            if check_feasibility(&x, &inst).feasible() {
                let e = q.energy(&bits);
                assert!((e - objective_value(&x, &inst)).abs() < 1e-9);
                best_feasible = best_feasible.min(e);
                worst_feasible = worst_feasible.max(e);
            }
        }
        for v in 0..16usize {
            let bits = bits_of(v, 4);
            let x = decode(&bits, &layout).unwrap();
            if !check_feasibility(&x, &inst).feasible() {
                assert!(q.energy(&bits) > best_feasible);
            }
        }
        assert!(best_feasible <= worst_feasible);
    }

    #[test]
    fn ising_image_matches_qubo() {
        let inst = generate_demo(1);
        let pen = PenaltyConfig::one_hot_only(10.0).unwrap();
        let (q, _) = build_qubo(&inst, &pen).unwrap();
        let ising = qubo_to_ising(&q);
        for v in [0usize, 5, 1 << 10, 0xffff, 0x8421] {
            let bits = bits_of(v, 16);
            let z = spins_from_bits(&bits);
            assert!((q.energy(&bits) - ising.energy(&z).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn instance_json_round_trip() {
        let inst = generate_demo(9);
        let v = inst.to_json();
        let back = ChannelAssignmentInstance::from_json(&v).unwrap();
        assert_eq!(back, inst);

        let caps = ChannelAssignmentInstance::new(
            3,
            2,
            Weights::PerChannel(BTreeMap::from([((0, 1, 0), 2.0), ((1, 2, 1), 0.5)])),
            Some(vec![2, 2]),
            3,
            "caps",
        )
        .unwrap();
        let back = ChannelAssignmentInstance::from_json(&caps.to_json()).unwrap();
        assert_eq!(back, caps);
    }

    /// On every feasible assignment of a 16-bit instance the penalty terms
    /// vanish exactly and the QUBO energy equals the interference objective.
    #[test]
    fn feasible_energy_equals_objective_at_sixteen_bits() {
        let inst = generate_demo(5);
        let pen = auto_penalty(&inst);
        let (q, layout) = build_qubo(&inst, &pen).unwrap();
        let mut feasible_count = 0;
        for v in 0..(1usize << 16) {
            let bits = bits_of(v, 16);
            let x = decode(&bits, &layout).unwrap();
            if check_feasibility(&x, &inst).feasible() {
                feasible_count += 1;
                let e = q.energy(&bits);
                assert!(
                    (e - objective_value(&x, &inst)).abs() < 1e-9,
                    "bitstring {v}: {e} vs objective"
                );
            }
        }
        assert_eq!(feasible_count, 4usize.pow(4));
    }

    #[test]
    fn instance_rejects_negative_weight() {
        let mut w = BTreeMap::new();
        w.insert((0, 1), -0.5);
        assert!(matches!(
            ChannelAssignmentInstance::new(2, 2, Weights::Shared(w), None, 0, ""),
            Err(Error::InvalidParameter(_))
        ));
    }
}
