//! Recursive QAOA: iterated QAOA, correlator scoring, variable elimination,
//! exact core solve, and back-substitution.
//!
//! Each round optimizes QAOA on the current instance, estimates `<Z_i>` and
//! `<Z_i Z_j>`, and eliminates the highest-scoring term: a pair `(i,j)` is
//! merged via `z_j = sign<Z_iZ_j> * z_i` (keeping the lower index), a single
//! `i` is fixed to `sign<Z_i>`. The recursion stops at `n_cutoff` (or when no
//! candidate reaches the threshold), the remaining core is solved by
//! exhaustive enumeration, and the elimination record is replayed to recover
//! a full assignment.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ising::{Elimination, EliminationRecord, IsingInstance, SpinAssignment};
use crate::qaoa::{optimize, OptimizerConfig, RoundSetup};
use crate::simulator::{QubitMap, StateVector};
use crate::{Error, Result};

/// Exhaustive core solves refuse beyond `max(n_cutoff, this)` spins.
pub const EXACT_SOLVE_CAP: usize = 22;

/// Which terms are scored each round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidatePolicy {
    /// Only terms present in the current Hamiltonian (h_i != 0, J_ij != 0).
    #[default]
    HamiltonianTerms,
    /// Every active single and every active pair.
    AllPairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RqaoaConfig {
    /// Stop eliminating once the active set is this small.
    pub n_cutoff: usize,
    /// Minimum absolute correlator needed to eliminate (0 = always proceed).
    pub threshold: f64,
    pub qaoa: OptimizerConfig,
    /// Estimate correlators from this many shots instead of exactly.
    pub shots: Option<usize>,
    pub policy: CandidatePolicy,
}

impl Default for RqaoaConfig {
    fn default() -> Self {
        Self {
            n_cutoff: 6,
            threshold: 0.0,
            qaoa: OptimizerConfig::default(),
            shots: None,
            policy: CandidatePolicy::HamiltonianTerms,
        }
    }
}

/// A candidate elimination, in global indices (pairs ordered `i < j`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Term {
    Single(usize),
    Pair(usize, usize),
}

impl Term {
    fn rank_key(&self) -> (u8, usize, usize) {
        // pairs sort before singles on equal scores
        match *self {
            Term::Pair(i, j) => (0, i, j),
            Term::Single(i) => (1, i, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTerm {
    pub term: Term,
    pub score: f64,
    pub sign: i8,
}

/// One row of the recursion trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub n_active: usize,
    pub term: Term,
    pub score: f64,
    pub sign: i8,
    pub f_p: f64,
    /// Probability mass inside the per-block one-hot subspace of this
    /// round's mixer blocks (XY mixers with one-hot initialization only).
    pub onehot_mass: Option<f64>,
    /// Set when every candidate scored exactly zero and the tie rule picked
    /// the eliminated term.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RqaoaTrace {
    pub rounds: Vec<RoundRecord>,
    /// Active-set size handed to the exact solver.
    pub core_size: usize,
    /// True when recursion ended on a below-threshold or empty candidate
    /// list rather than the cutoff.
    pub stopped_early: bool,
}

fn sign_of(x: f64) -> i8 {
    if x < 0.0 {
        -1
    } else {
        1
    }
}

fn rank(mut terms: Vec<ScoredTerm>) -> Vec<ScoredTerm> {
    terms.sort_by(|a, b| {
        b.score.total_cmp(&a.score).then_with(|| a.term.rank_key().cmp(&b.term.rank_key()))
    });
    terms
}

fn candidate_terms(ising: &IsingInstance, policy: CandidatePolicy) -> Vec<Term> {
    match policy {
        CandidatePolicy::HamiltonianTerms => {
            let mut terms: Vec<Term> =
                ising.couplings().map(|(i, j, _)| Term::Pair(i, j)).collect();
            terms.extend(ising.fields().map(|(i, _)| Term::Single(i)));
            terms
        }
        CandidatePolicy::AllPairs => {
            let active: Vec<usize> = ising.active().iter().copied().collect();
            let mut terms = Vec::new();
            for (p, &i) in active.iter().enumerate() {
                for &j in &active[p + 1..] {
                    terms.push(Term::Pair(i, j));
                }
            }
            terms.extend(active.iter().map(|&i| Term::Single(i)));
            terms
        }
    }
}

fn score_with(
    terms: Vec<Term>,
    z: &dyn Fn(usize) -> f64,
    zz: &dyn Fn(usize, usize) -> f64,
    map: &QubitMap,
) -> Vec<ScoredTerm> {
    let scored = terms
        .into_iter()
        .map(|term| {
            let value = match term {
                Term::Single(i) => z(map.position(i).expect("active index")),
                Term::Pair(i, j) => zz(
                    map.position(i).expect("active index"),
                    map.position(j).expect("active index"),
                ),
            };
            ScoredTerm { term, score: value.abs(), sign: sign_of(value) }
        })
        .collect();
    rank(scored)
}

/// Exact correlator scores for the candidate terms, ranked by descending
/// magnitude (pairs before singles on exact ties, then lexicographic).
/// An empty result signals that no candidates exist.
pub fn score_terms(
    psi: &StateVector,
    ising: &IsingInstance,
    map: &QubitMap,
    policy: CandidatePolicy,
) -> Vec<ScoredTerm> {
    score_with(
        candidate_terms(ising, policy),
        &|q| psi.expectation_z(q),
        &|a, b| psi.expectation_zz(a, b),
        map,
    )
}

/// Correlator scores estimated from sampled basis states.
pub fn score_terms_from_samples(
    samples: &[usize],
    ising: &IsingInstance,
    map: &QubitMap,
    policy: CandidatePolicy,
) -> Vec<ScoredTerm> {
    let m = samples.len().max(1) as f64;
    let spin = |b: usize, q: usize| if b & (1 << q) == 0 { 1.0 } else { -1.0 };
    score_with(
        candidate_terms(ising, policy),
        &|q| samples.iter().map(|&b| spin(b, q)).sum::<f64>() / m,
        &|a, b| samples.iter().map(|&s| spin(s, a) * spin(s, b)).sum::<f64>() / m,
        map,
    )
}

/// Outcome of one recursion round.
#[derive(Debug)]
pub enum RoundOutcome {
    Reduced { ising: IsingInstance, entry: Elimination, record: RoundRecord },
    Stop { reason: StopReason },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    NoCandidates,
    BelowThreshold,
}

/// Optimize QAOA on the instance, score candidates, and eliminate the top
/// term if it reaches the threshold.
pub fn rqaoa_round(
    ising: &IsingInstance,
    config: &RqaoaConfig,
    round: usize,
) -> Result<RoundOutcome> {
    let candidates = candidate_terms(ising, config.policy);
    if candidates.is_empty() {
        return Ok(RoundOutcome::Stop { reason: StopReason::NoCandidates });
    }

    // decorrelate restarts across rounds while staying seed-deterministic
    let mut qaoa_config = config.qaoa.clone();
    qaoa_config.seed = config.qaoa.seed ^ (round as u64).wrapping_mul(0xD1B54A32D192ED03);

    let outcome = optimize(ising, &qaoa_config)?;
    let setup = RoundSetup::new(ising, &qaoa_config)?;
    let psi = setup.prepare(&outcome.params)?;

    let onehot_mass = if qaoa_config.mixer.is_xy() && !setup.mixer.blocks().is_empty() {
        Some(psi.onehot_block_mass(setup.mixer.blocks()))
    } else {
        None
    };

    let scored = match config.shots {
        None => score_terms(&psi, ising, &setup.map, config.policy),
        Some(shots) => {
            let mut rng = ChaCha8Rng::seed_from_u64(qaoa_config.seed ^ 0x5A17_5A17);
            let samples = psi.sample(shots, &mut rng);
            score_terms_from_samples(&samples, ising, &setup.map, config.policy)
        }
    };

    let top = scored.first().expect("candidates are non-empty");
    if top.score < config.threshold {
        return Ok(RoundOutcome::Stop { reason: StopReason::BelowThreshold });
    }
    let degenerate = top.score == 0.0;
    if degenerate {
        log::warn!(
            "round {round}: all correlators are zero; eliminating {:?} with sign +1",
            top.term
        );
    }

    let (reduced, entry) = match top.term {
        Term::Pair(i, j) => ising.merge_pair(i.min(j), i.max(j), top.sign)?,
        Term::Single(i) => ising.fix_spin(i, top.sign)?,
    };
    let record = RoundRecord {
        round,
        n_active: ising.num_active(),
        term: top.term,
        score: top.score,
        sign: top.sign,
        f_p: outcome.value,
        onehot_mass,
        degenerate,
    };
    Ok(RoundOutcome::Reduced { ising: reduced, entry, record })
}

/// Minimize by exhaustive enumeration (Gray-code incremental energies).
/// Ties break toward the lowest integer encoding, where bit `k` of the
/// encoding is 1 iff the `k`-th smallest active index has spin -1.
pub fn exact_core_solve(ising: &IsingInstance, cap: usize) -> Result<SpinAssignment> {
    let n = ising.num_active();
    if n == 0 {
        return Ok(SpinAssignment::new());
    }
    let map = QubitMap::from_active(ising.active());
    if ising.num_terms() == 0 {
        // energy is constant; encoding 0 = all spins +1
        return Ok(SpinAssignment::from_pairs((0..n).map(|q| (map.global(q), 1))));
    }
    if n > cap {
        return Err(Error::TooLarge { size: n, cap });
    }

    let mut fields = vec![0.0f64; n];
    for (i, h) in ising.fields() {
        fields[map.position(i).unwrap()] = h;
    }
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, j, c) in ising.couplings() {
        let (pi, pj) = (map.position(i).unwrap(), map.position(j).unwrap());
        adj[pi].push((pj, c));
        adj[pj].push((pi, c));
    }

    let mut e = ising.offset() + fields.iter().sum::<f64>();
    for (_, _, c) in ising.couplings() {
        e += c;
    }
    let mut spins = vec![1.0f64; n];
    let (mut best_e, mut best_b) = (e, 0usize);
    for t in 1..(1usize << n) {
        let k = t.trailing_zeros() as usize;
        let mut local = fields[k];
        for &(j, c) in &adj[k] {
            local += c * spins[j];
        }
        e -= 2.0 * spins[k] * local;
        spins[k] = -spins[k];
        let b = t ^ (t >> 1);
        if e < best_e || (e == best_e && b < best_b) {
            best_e = e;
            best_b = b;
        }
    }
    Ok(SpinAssignment::from_pairs(
        (0..n).map(|q| (map.global(q), if (best_b >> q) & 1 == 1 { -1 } else { 1 })),
    ))
}

/// Run the full recursion and recover an assignment over every original
/// index.
pub fn run_rqaoa(
    ising: &IsingInstance,
    config: &RqaoaConfig,
) -> Result<(SpinAssignment, RqaoaTrace)> {
    if config.n_cutoff == 0 {
        return Err(Error::InvalidParameter("n_cutoff must be at least 1".into()));
    }
    if config.threshold < 0.0 {
        return Err(Error::InvalidParameter("threshold must be nonnegative".into()));
    }
    let mut current = ising.clone();
    let mut record = EliminationRecord::new();
    let mut trace = RqaoaTrace::default();
    let mut round = 0usize;

    while current.num_active() > config.n_cutoff {
        match rqaoa_round(&current, config, round)? {
            RoundOutcome::Reduced { ising: next, entry, record: row } => {
                record.push(entry);
                trace.rounds.push(row);
                current = next;
                round += 1;
            }
            RoundOutcome::Stop { .. } => {
                trace.stopped_early = true;
                break;
            }
        }
    }

    trace.core_size = current.num_active();
    let core = exact_core_solve(&current, config.n_cutoff.max(EXACT_SOLVE_CAP))?;
    let full = record.back_substitute(&core)?;
    Ok((full, trace))
}
