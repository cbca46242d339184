//! Classical pre-solver: optimality-preserving reductions and optional
//! heuristic freezing, applied before any quantum call.
//!
//! Deterministic rules: isolated spins (no couplings) are fixed by the sign
//! of their field, and any spin with `|h_i| >= Σ_j |J_ij|` (persistency) is
//! fixed to `sign(-h_i)`, iterated to a joint fixpoint. Heuristic freezing
//! runs seeded simulated-annealing descents, averages the per-spin
//! magnetizations, and fixes spins whose magnetization clears a threshold;
//! it does not preserve exactness and is reported separately.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::baselines::{simulated_annealing, SaSchedule};
use crate::ising::{Elimination, EliminationRecord, IsingInstance};
use crate::wireless::ChannelAssignmentInstance;
use crate::{Error, Result};

/// Settings for magnetization-based freezing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreezeConfig {
    /// Number of independent annealing descents.
    pub runs: usize,
    /// Freeze spins with `|m_i|` at or above this (in `(0, 1]`).
    pub threshold: f64,
    /// Sweeps per descent; `None` means `100 * n`.
    pub sweeps: Option<usize>,
    pub seed: u64,
}

impl Default for FreezeConfig {
    fn default() -> Self {
        Self { runs: 8, threshold: 0.9, sweeps: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresolveConfig {
    pub isolated: bool,
    pub persistency: bool,
    pub freeze: Option<FreezeConfig>,
}

impl Default for PresolveConfig {
    fn default() -> Self {
        Self { isolated: true, persistency: true, freeze: None }
    }
}

impl PresolveConfig {
    pub fn disabled() -> Self {
        Self { isolated: false, persistency: false, freeze: None }
    }
}

/// Counts per rule plus the frozen spins (freezing is not
/// exactness-preserving; downstream consumers must treat those fixes as
/// heuristic).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PresolveReport {
    pub isolated_fixed: usize,
    pub persistency_fixed: usize,
    pub frozen: Vec<usize>,
    pub residual_size: usize,
}

/// Fix every spin that has no couplings: `z_i = sign(-h_i)`, or `+1` when
/// the field is zero too.
pub fn reduce_isolated(ising: &IsingInstance) -> (IsingInstance, Vec<Elimination>) {
    let mut current = ising.clone();
    let mut entries = Vec::new();
    let mut coupled = BTreeSet::new();
    for (i, j, _) in current.couplings() {
        coupled.insert(i);
        coupled.insert(j);
    }
    let isolated: Vec<usize> =
        current.active().iter().copied().filter(|i| !coupled.contains(i)).collect();
    for i in isolated {
        let sign = if current.field(i) > 0.0 { -1 } else { 1 };
        let (next, entry) = current.fix_spin(i, sign).expect("index is active");
        entries.push(entry);
        current = next;
    }
    (current, entries)
}

/// Fix spins satisfying the dominance condition `|h_i| >= Σ_{j≠i} |J_ij|`
/// (with `|h_i| > 0`) to `sign(-h_i)`, rerunning until no spin qualifies;
/// each fix can newly qualify its neighbors.
pub fn reduce_persistency(ising: &IsingInstance) -> (IsingInstance, Vec<Elimination>) {
    let mut current = ising.clone();
    let mut entries = Vec::new();
    loop {
        let mut coupling_mass: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, j, c) in current.couplings() {
            *coupling_mass.entry(i).or_insert(0.0) += c.abs();
            *coupling_mass.entry(j).or_insert(0.0) += c.abs();
        }
        let candidate = current.active().iter().copied().find(|&i| {
            let h = current.field(i);
            h != 0.0 && h.abs() >= coupling_mass.get(&i).copied().unwrap_or(0.0)
        });
        match candidate {
            Some(i) => {
                let sign = if current.field(i) > 0.0 { -1 } else { 1 };
                let (next, entry) = current.fix_spin(i, sign).expect("index is active");
                entries.push(entry);
                current = next;
            }
            None => return (current, entries),
        }
    }
}

/// Externally imposed restrictions fed into [`wireless_prune`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PruneConstraints {
    /// `(user, channel)` pairs that must stay unassigned.
    pub forbidden: BTreeSet<(usize, usize)>,
    /// Users already committed to a channel.
    pub forced: BTreeMap<usize, usize>,
}

/// Deterministic wireless fixing: a user whose feasible channel set is a
/// singleton is committed to it (`x_{u,c*} = 1`, other bits 0), and a
/// channel saturated by commitments drops out of everyone else's feasible
/// set, to fixpoint. Returns the newly fixed assignment bits.
pub fn wireless_prune(
    inst: &ChannelAssignmentInstance,
    constraints: &PruneConstraints,
) -> Result<Vec<((usize, usize), bool)>> {
    let (users, channels) = (inst.num_users(), inst.num_channels());
    for &(u, c) in &constraints.forbidden {
        if u >= users || c >= channels {
            return Err(Error::InvalidParameter(format!("forbidden pair ({u},{c}) out of range")));
        }
    }
    let mut committed: BTreeMap<usize, usize> = constraints.forced.clone();
    for (&u, &c) in &committed {
        if u >= users || c >= channels {
            return Err(Error::InvalidParameter(format!("forced pair ({u},{c}) out of range")));
        }
    }
    let cap_of = |c: usize| inst.capacities().map_or(usize::MAX, |k| k[c]);

    let mut fixed_bits = Vec::new();
    loop {
        let mut loads = vec![0usize; channels];
        for &c in committed.values() {
            loads[c] += 1;
        }
        for (c, &load) in loads.iter().enumerate() {
            if load > cap_of(c) {
                return Err(Error::Infeasible(format!("channel {c} over capacity after pruning")));
            }
        }
        let mut changed = false;
        for u in 0..users {
            if committed.contains_key(&u) {
                continue;
            }
            let feasible: Vec<usize> = (0..channels)
                .filter(|&c| !constraints.forbidden.contains(&(u, c)) && loads[c] < cap_of(c))
                .collect();
            match feasible.len() {
                0 => {
                    return Err(Error::Infeasible(format!("user {u} has no feasible channel")))
                }
                1 => {
                    let star = feasible[0];
                    committed.insert(u, star);
                    for c in 0..channels {
                        fixed_bits.push(((u, c), c == star));
                    }
                    changed = true;
                    break; // loads changed; recompute saturation
                }
                _ => {}
            }
        }
        if !changed {
            return Ok(fixed_bits);
        }
    }
}

/// Run `K` annealing descents, average the resulting spins, and fix every
/// spin whose empirical magnetization clears the threshold. Returns the
/// reduced instance, the fix entries, and the magnetizations.
pub fn heuristic_freeze(
    ising: &IsingInstance,
    cfg: &FreezeConfig,
) -> (IsingInstance, Vec<Elimination>, BTreeMap<usize, f64>) {
    let n = ising.num_active();
    let mut magnetization: BTreeMap<usize, f64> =
        ising.active().iter().map(|&i| (i, 0.0)).collect();
    if n == 0 || cfg.runs == 0 {
        return (ising.clone(), Vec::new(), magnetization);
    }
    let schedule = SaSchedule {
        initial_temp: None,
        final_temp: None,
        sweeps: cfg.sweeps.unwrap_or(100 * n),
    };
    for k in 0..cfg.runs {
        let (z, _) = simulated_annealing(ising, &schedule, cfg.seed.wrapping_add(k as u64));
        for (i, s) in z.iter() {
            *magnetization.get_mut(&i).expect("active index") += s as f64;
        }
    }
    for m in magnetization.values_mut() {
        *m /= cfg.runs as f64;
    }

    let mut current = ising.clone();
    let mut entries = Vec::new();
    for (&i, &m) in &magnetization {
        if m.abs() >= cfg.threshold {
            let sign = if m < 0.0 { -1 } else { 1 };
            let (next, entry) = current.fix_spin(i, sign).expect("index is active");
            entries.push(entry);
            current = next;
        }
    }
    (current, entries, magnetization)
}

/// Deterministic reductions to a joint fixpoint, then optional freezing.
pub fn presolve_pipeline(
    ising: &IsingInstance,
    cfg: &PresolveConfig,
) -> (IsingInstance, EliminationRecord, PresolveReport) {
    let mut current = ising.clone();
    let mut record = EliminationRecord::new();
    let mut report = PresolveReport::default();

    loop {
        let mut changed = false;
        if cfg.isolated {
            let (next, entries) = reduce_isolated(&current);
            if !entries.is_empty() {
                changed = true;
                report.isolated_fixed += entries.len();
                record.extend(entries);
                current = next;
            }
        }
        if cfg.persistency {
            let (next, entries) = reduce_persistency(&current);
            if !entries.is_empty() {
                changed = true;
                report.persistency_fixed += entries.len();
                record.extend(entries);
                current = next;
            }
        }
        if !changed {
            break;
        }
    }

    if let Some(freeze) = &cfg.freeze {
        let (next, entries, _) = heuristic_freeze(&current, freeze);
        report.frozen = entries.iter().map(|e| e.removed_index()).collect();
        record.extend(entries);
        current = next;
    }

    report.residual_size = current.num_active();
    (current, record, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::tests::random_ising;
    use crate::ising::SpinAssignment;
    use crate::wireless::Weights;

    fn brute_minimum(ising: &IsingInstance) -> f64 {
        let active: Vec<usize> = ising.active().iter().copied().collect();
        let mut best = f64::INFINITY;
        for b in 0..(1usize << active.len()) {
            let z = SpinAssignment::from_pairs(
                active.iter().enumerate().map(|(q, &i)| (i, if (b >> q) & 1 == 1 { -1 } else { 1 })),
            );
            best = best.min(ising.energy(&z).unwrap());
        }
        best
    }

    /// All global minimizers, as (index -> spin) maps.
    fn brute_minimizers(ising: &IsingInstance) -> Vec<SpinAssignment> {
        let active: Vec<usize> = ising.active().iter().copied().collect();
        let minimum = brute_minimum(ising);
        let mut out = Vec::new();
        for b in 0..(1usize << active.len()) {
            let z = SpinAssignment::from_pairs(
                active.iter().enumerate().map(|(q, &i)| (i, if (b >> q) & 1 == 1 { -1 } else { 1 })),
            );
            if (ising.energy(&z).unwrap() - minimum).abs() <= 1e-9 * minimum.abs().max(1.0) {
                out.push(z);
            }
        }
        out
    }

    #[test]
    fn isolated_positive_field_fixed_down() {
        let mut ising = IsingInstance::with_active(0..1);
        ising.add_field(0, 3.0);
        let (reduced, entries) = reduce_isolated(&ising);
        assert_eq!(entries, vec![Elimination::Fix { index: 0, sign: -1 }]);
        assert_eq!(reduced.offset(), -3.0);
        assert_eq!(reduced.num_active(), 0);
    }

    #[test]
    fn isolated_zero_field_fixed_up_by_convention() {
        let ising = IsingInstance::with_active(0..1);
        let (reduced, entries) = reduce_isolated(&ising);
        assert_eq!(entries, vec![Elimination::Fix { index: 0, sign: 1 }]);
        assert_eq!(reduced.offset(), 0.0);
    }

    #[test]
    fn isolated_rule_ignores_coupled_spins() {
        let mut ising = IsingInstance::with_active(0..2);
        ising.add_coupling(0, 1, 1.0);
        ising.add_field(0, 4.0);
        let (reduced, entries) = reduce_isolated(&ising);
        assert!(entries.is_empty());
        assert_eq!(&reduced, &ising);
    }

    #[test]
    fn persistency_fix_and_cascade() {
        // |h_0| = 5 >= |J_01| = 2 fixes z_0 = -1; spin 1 then has h = -2 and
        // no couplings, so persistency claims it too.
        let mut ising = IsingInstance::with_active(0..2);
        ising.add_field(0, 5.0);
        ising.add_coupling(0, 1, 2.0);
        let (reduced, entries) = reduce_persistency(&ising);
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0], Elimination::Fix { index: 0, sign: -1 });
        assert_eq!(entries[1], Elimination::Fix { index: 1, sign: 1 });
        assert_eq!(reduced.num_active(), 0);
        assert_eq!(reduced.offset(), brute_minimum(&ising));
    }

    #[test]
    fn persistency_leaves_weak_fields() {
        let mut ising = IsingInstance::with_active(0..2);
        ising.add_field(0, 1.0);
        ising.add_coupling(0, 1, 2.0);
        let (reduced, entries) = reduce_persistency(&ising);
        assert!(entries.is_empty());
        assert_eq!(&reduced, &ising);
    }

    #[test]
    fn persistency_fixes_agree_with_some_global_minimizer() {
        for seed in 0..40 {
            let ising = random_ising(8, 3000 + seed);
            let (_, entries) = reduce_persistency(&ising);
            if entries.is_empty() {
                continue;
            }
            let minimizers = brute_minimizers(&ising);
            let compatible = minimizers.iter().any(|z| {
                entries.iter().all(|e| match *e {
                    Elimination::Fix { index, sign } => z.get(index) == Some(sign),
                    _ => unreachable!("persistency only fixes"),
                })
            });
            assert!(compatible, "seed {seed}: persistency fixes exclude every minimizer");
        }
    }

    #[test]
    fn prune_forbidden_channel_forces_the_other() {
        let inst = ChannelAssignmentInstance::new(
            2,
            2,
            Weights::Shared(Default::default()),
            None,
            0,
            "",
        )
        .unwrap();
        let constraints = PruneConstraints {
            forbidden: [(0usize, 0usize)].into_iter().collect(),
            forced: BTreeMap::new(),
        };
        let fixed = wireless_prune(&inst, &constraints).unwrap();
        assert_eq!(fixed, vec![((0, 0), false), ((0, 1), true)]);
    }

    #[test]
    fn prune_saturated_capacity_propagates() {
        let inst = ChannelAssignmentInstance::new(
            2,
            2,
            Weights::Shared(Default::default()),
            Some(vec![1, 1]),
            0,
            "",
        )
        .unwrap();
        let constraints = PruneConstraints {
            forbidden: BTreeSet::new(),
            forced: BTreeMap::from([(0, 0)]),
        };
        let fixed = wireless_prune(&inst, &constraints).unwrap();
        assert_eq!(fixed, vec![((1, 0), false), ((1, 1), true)]);
    }

    #[test]
    fn prune_without_constraints_fixes_nothing() {
        let inst = ChannelAssignmentInstance::new(
            3,
            2,
            Weights::Shared(Default::default()),
            None,
            0,
            "",
        )
        .unwrap();
        assert!(wireless_prune(&inst, &PruneConstraints::default()).unwrap().is_empty());
    }

    #[test]
    fn prune_empty_feasible_set_is_infeasible() {
        let inst = ChannelAssignmentInstance::new(
            1,
            2,
            Weights::Shared(Default::default()),
            None,
            0,
            "",
        )
        .unwrap();
        let constraints = PruneConstraints {
            forbidden: [(0, 0), (0, 1)].into_iter().collect(),
            forced: BTreeMap::new(),
        };
        assert!(matches!(wireless_prune(&inst, &constraints), Err(Error::Infeasible(_))));
    }

    #[test]
    fn freeze_unanimous_runs_fix_spin() {
        // strong field: every descent lands on z_0 = -1
        let mut ising = IsingInstance::with_active(0..2);
        ising.add_field(0, 10.0);
        ising.add_coupling(0, 1, 0.5);
        let cfg = FreezeConfig { runs: 8, threshold: 0.9, sweeps: Some(200), seed: 3 };
        let (reduced, entries, m) = heuristic_freeze(&ising, &cfg);
        assert_eq!(m.get(&0), Some(&-1.0));
        assert!(entries.contains(&Elimination::Fix { index: 0, sign: -1 }));
        assert!(reduced.num_active() < 2);
    }

    #[test]
    fn freeze_respects_threshold() {
        let mut ising = IsingInstance::with_active(0..1);
        ising.add_field(0, 1.0);
        let cfg = FreezeConfig { runs: 4, threshold: 0.9, sweeps: Some(50), seed: 1 };
        let (_, entries, m) = heuristic_freeze(&ising, &cfg);
        // magnetization below the threshold must leave the spin alone
        if m[&0].abs() < 0.9 {
            assert!(entries.is_empty());
        } else {
            assert_eq!(entries.len(), 1);
        }
    }

    /// A symmetric two-spin ferromagnet has two ground states; freezing must
    /// not break the symmetry even though each run is fully magnetized.
    #[test]
    fn freeze_does_not_break_ferromagnet_symmetry() {
        let mut ising = IsingInstance::with_active(0..2);
        ising.add_coupling(0, 1, -1.0);
        let cfg = FreezeConfig { runs: 16, threshold: 0.9, sweeps: Some(400), seed: 11 };
        let (_, entries, m) = heuristic_freeze(&ising, &cfg);
        // runs split between (+,+) and (-,-): per-spin magnetizations stay
        // far from +-1 while the pair correlation is perfect
        assert!(m[&0].abs() < 0.9, "magnetization {}", m[&0]);
        assert!(m[&1].abs() < 0.9, "magnetization {}", m[&1]);
        assert!(entries.is_empty());
    }

    #[test]
    fn pipeline_solves_diagonally_dominant_instance() {
        // every spin dominated by its field
        let mut ising = IsingInstance::with_active(0..6);
        for i in 0..6 {
            ising.add_field(i, if i % 2 == 0 { 4.0 } else { -4.0 });
        }
        for i in 0..5 {
            ising.add_coupling(i, i + 1, 0.5);
        }
        let expected = brute_minimum(&ising);
        let (reduced, record, report) = presolve_pipeline(&ising, &PresolveConfig::default());
        assert_eq!(reduced.num_active(), 0);
        assert_eq!(report.residual_size, 0);
        assert_eq!(record.len(), 6);
        assert!((reduced.offset() - expected).abs() < 1e-9);

        let full = record.back_substitute(&SpinAssignment::new()).unwrap();
        assert!((ising.energy(&full).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn pipeline_disabled_is_identity() {
        let ising = random_ising(6, 8);
        let (reduced, record, report) = presolve_pipeline(&ising, &PresolveConfig::disabled());
        assert_eq!(&reduced, &ising);
        assert!(record.is_empty());
        assert_eq!(report.residual_size, 6);
    }

    #[test]
    fn pipeline_is_idempotent_without_freezing() {
        for seed in 0..10 {
            let ising = random_ising(7, 4000 + seed);
            let cfg = PresolveConfig::default();
            let (once, _, _) = presolve_pipeline(&ising, &cfg);
            let (twice, record2, _) = presolve_pipeline(&once, &cfg);
            assert_eq!(&twice, &once, "seed {seed}");
            assert!(record2.is_empty());
        }
    }

    #[test]
    fn pipeline_preserves_optimal_value() {
        for seed in 0..20 {
            let ising = random_ising(8, 5000 + seed);
            let (reduced, _, _) = presolve_pipeline(&ising, &PresolveConfig::default());
            let original = brute_minimum(&ising);
            let after = brute_minimum(&reduced);
            assert!(
                (original - after).abs() <= 1e-9 * original.abs().max(1.0),
                "seed {seed}: {original} vs {after}"
            );
        }
    }

    #[test]
    fn pipeline_record_plus_core_is_total() {
        for seed in 0..10 {
            let ising = random_ising(8, 6000 + seed);
            let (reduced, record, _) = presolve_pipeline(&ising, &PresolveConfig::default());
            let core = SpinAssignment::from_pairs(reduced.active().iter().map(|&i| (i, 1)));
            let full = record.back_substitute(&core).unwrap();
            for i in 0..8 {
                assert!(full.contains(i));
            }
        }
    }
}
