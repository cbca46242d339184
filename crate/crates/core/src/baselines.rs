//! Classical reference solvers: greedy assignment, greedy extension of a
//! partial assignment, exhaustive enumeration, and simulated annealing.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ising::{IsingInstance, SpinAssignment};
use crate::simulator::QubitMap;
use crate::wireless::{objective_value, AssignmentMatrix, ChannelAssignmentInstance};
use crate::{Error, Result};

/// Enumeration refusal threshold for [`brute_force`]: `C^U` assignments.
pub const BRUTE_FORCE_CAP: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserOrder {
    /// Users sorted by descending weighted degree (ties: lowest index), so
    /// heavily interfering users are placed before lock-in.
    InterferenceScoreDesc,
    ByIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyConfig {
    pub order: UserOrder,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self { order: UserOrder::InterferenceScoreDesc }
    }
}

fn ordered_users(inst: &ChannelAssignmentInstance, cfg: &GreedyConfig) -> Vec<usize> {
    let mut users: Vec<usize> = (0..inst.num_users()).collect();
    if cfg.order == UserOrder::InterferenceScoreDesc {
        let mut degree = vec![0.0f64; inst.num_users()];
        for (&(u, v), &w) in &inst.pair_weights_max() {
            degree[u] += w;
            degree[v] += w;
        }
        users.sort_by(|&a, &b| degree[b].total_cmp(&degree[a]).then(a.cmp(&b)));
    }
    users
}

fn neighbor_lists(inst: &ChannelAssignmentInstance) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); inst.num_users()];
    for (&(u, v), _) in &inst.pair_weights_max() {
        adj[u].push(v);
        adj[v].push(u);
    }
    adj
}

/// Place `pending` users one at a time on the feasible channel with the
/// least incremental interference against everything already assigned
/// (ties: lowest channel index).
fn greedy_fill(
    inst: &ChannelAssignmentInstance,
    assigned: &mut [Option<usize>],
    loads: &mut [usize],
    pending: &[usize],
) -> Result<()> {
    let adj = neighbor_lists(inst);
    let cap_of =
        |c: usize| inst.capacities().map_or(usize::MAX, |k| k[c]);
    for &u in pending {
        let mut best: Option<(f64, usize)> = None;
        for c in 0..inst.num_channels() {
            if loads[c] >= cap_of(c) {
                continue;
            }
            let cost: f64 = adj[u]
                .iter()
                .filter(|&&v| assigned[v] == Some(c))
                .map(|&v| inst.weight(u, v, c))
                .sum();
            let cand = (cost, c);
            if best.is_none() || cand < best.unwrap() {
                best = Some(cand);
            }
        }
        let (_, c) = best.ok_or_else(|| {
            Error::Infeasible(format!("no feasible channel left for user {u}"))
        })?;
        assigned[u] = Some(c);
        loads[c] += 1;
    }
    Ok(())
}

/// Full-graph greedy heuristic.
pub fn greedy_assign(
    inst: &ChannelAssignmentInstance,
    cfg: &GreedyConfig,
) -> Result<AssignmentMatrix> {
    let mut assigned = vec![None; inst.num_users()];
    let mut loads = vec![0usize; inst.num_channels()];
    let order = ordered_users(inst, cfg);
    greedy_fill(inst, &mut assigned, &mut loads, &order)?;
    let channels: Vec<usize> = assigned.into_iter().map(|c| c.unwrap()).collect();
    Ok(AssignmentMatrix::from_channels(&channels, inst.num_channels()))
}

/// Keep the partial assignment verbatim and fill in the remaining users
/// greedily, counting interference against core and prior extensions alike.
pub fn greedy_extend(
    inst: &ChannelAssignmentInstance,
    partial: &AssignmentMatrix,
    cfg: &GreedyConfig,
) -> Result<AssignmentMatrix> {
    if partial.num_users() != inst.num_users() || partial.num_channels() != inst.num_channels()
    {
        return Err(Error::InvalidParameter("partial assignment shape mismatch".into()));
    }
    let mut assigned: Vec<Option<usize>> = Vec::with_capacity(inst.num_users());
    for u in 0..inst.num_users() {
        let channels = partial.channels_of(u);
        match channels.len() {
            0 => assigned.push(None),
            1 => assigned.push(Some(channels[0])),
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "partial assignment gives user {u} several channels"
                )))
            }
        }
    }
    let mut loads = vec![0usize; inst.num_channels()];
    for c in assigned.iter().flatten() {
        loads[*c] += 1;
    }
    if let Some(caps) = inst.capacities() {
        for (c, &k) in caps.iter().enumerate() {
            if loads[c] > k {
                return Err(Error::Infeasible(format!(
                    "partial assignment already exceeds capacity on channel {c}"
                )));
            }
        }
    }
    let pending: Vec<usize> =
        ordered_users(inst, cfg).into_iter().filter(|&u| assigned[u].is_none()).collect();
    greedy_fill(inst, &mut assigned, &mut loads, &pending)?;
    let channels: Vec<usize> = assigned.into_iter().map(|c| c.unwrap()).collect();
    Ok(AssignmentMatrix::from_channels(&channels, inst.num_channels()))
}

/// Minimum and maximum objective over all capacity-feasible one-hot
/// assignments, plus the (lexicographically first) minimizer.
#[derive(Debug, Clone)]
pub struct BruteForceExtrema {
    pub best: AssignmentMatrix,
    pub best_value: f64,
    pub worst_value: f64,
}

fn enumerate_assignments(inst: &ChannelAssignmentInstance) -> Result<BruteForceExtrema> {
    let (users, channels) = (inst.num_users(), inst.num_channels());
    if (channels as f64).powi(users as i32) > BRUTE_FORCE_CAP {
        return Err(Error::TooLarge {
            size: users,
            cap: (BRUTE_FORCE_CAP.ln() / (channels as f64).ln()) as usize,
        });
    }
    let cap_of = |c: usize| inst.capacities().map_or(usize::MAX, |k| k[c]);

    let mut channel_vec = vec![0usize; users];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut worst = f64::NEG_INFINITY;
    loop {
        let mut loads = vec![0usize; channels];
        let mut feasible = true;
        for &c in &channel_vec {
            loads[c] += 1;
            if loads[c] > cap_of(c) {
                feasible = false;
                break;
            }
        }
        if feasible {
            let x = AssignmentMatrix::from_channels(&channel_vec, channels);
            let value = objective_value(&x, inst);
            if best.as_ref().map_or(true, |(b, _)| value < *b) {
                best = Some((value, channel_vec.clone()));
            }
            worst = worst.max(value);
        }
        // lexicographic odometer
        let mut pos = users;
        loop {
            if pos == 0 {
                let (best_value, best_vec) =
                    best.ok_or_else(|| Error::Infeasible("no feasible assignment".into()))?;
                return Ok(BruteForceExtrema {
                    best: AssignmentMatrix::from_channels(&best_vec, channels),
                    best_value,
                    worst_value: worst,
                });
            }
            pos -= 1;
            channel_vec[pos] += 1;
            if channel_vec[pos] < channels {
                break;
            }
            channel_vec[pos] = 0;
        }
    }
}

/// Exhaustive search over one-hot assignments (`C^U`, refused above the
/// cap). Ties break toward the lexicographically smallest channel vector.
pub fn brute_force(inst: &ChannelAssignmentInstance) -> Result<(AssignmentMatrix, f64)> {
    enumerate_assignments(inst).map(|e| (e.best, e.best_value))
}

/// [`brute_force`] plus the worst feasible objective, for scaled ratios.
pub fn brute_force_extrema(inst: &ChannelAssignmentInstance) -> Result<BruteForceExtrema> {
    enumerate_assignments(inst)
}

/// Cooling schedule for [`simulated_annealing`]. `None` temperatures derive
/// from the instance: start at the largest coefficient magnitude, finish
/// three decades lower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaSchedule {
    pub initial_temp: Option<f64>,
    pub final_temp: Option<f64>,
    pub sweeps: usize,
}

impl Default for SaSchedule {
    fn default() -> Self {
        Self { initial_temp: None, final_temp: None, sweeps: 500 }
    }
}

/// Single-flip Metropolis with geometric cooling; returns the best
/// configuration seen and its energy. Deterministic per seed.
pub fn simulated_annealing(
    ising: &IsingInstance,
    schedule: &SaSchedule,
    seed: u64,
) -> (SpinAssignment, f64) {
    let n = ising.num_active();
    if n == 0 {
        return (SpinAssignment::new(), ising.offset());
    }
    let map = QubitMap::from_active(ising.active());
    let mut fields = vec![0.0f64; n];
    for (i, h) in ising.fields() {
        fields[map.position(i).unwrap()] = h;
    }
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut max_coeff = 0.0f64;
    for (i, h) in ising.fields() {
        let _ = i;
        max_coeff = max_coeff.max(h.abs());
    }
    for (i, j, c) in ising.couplings() {
        let (pi, pj) = (map.position(i).unwrap(), map.position(j).unwrap());
        adj[pi].push((pj, c));
        adj[pj].push((pi, c));
        max_coeff = max_coeff.max(c.abs());
    }

    let t0 = schedule.initial_temp.unwrap_or(max_coeff.max(1e-6));
    let tf = schedule.final_temp.unwrap_or(t0 * 1e-3).max(1e-12);
    let sweeps = schedule.sweeps.max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spins: Vec<f64> =
        (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();

    let mut energy = ising.offset();
    for (q, &h) in fields.iter().enumerate() {
        energy += h * spins[q];
    }
    for (i, j, c) in ising.couplings() {
        energy += c * spins[map.position(i).unwrap()] * spins[map.position(j).unwrap()];
    }

    let mut best_energy = energy;
    let mut best_spins = spins.clone();
    let ratio = (tf / t0).powf(1.0 / (sweeps.max(2) - 1) as f64);
    let mut temp = t0;
    for _ in 0..sweeps {
        for k in 0..n {
            let mut local = fields[k];
            for &(j, c) in &adj[k] {
                local += c * spins[j];
            }
            let delta = -2.0 * spins[k] * local;
            if delta <= 0.0 || rng.gen::<f64>() < (-delta / temp).exp() {
                spins[k] = -spins[k];
                energy += delta;
                if energy < best_energy {
                    best_energy = energy;
                    best_spins = spins.clone();
                }
            }
        }
        temp *= ratio;
    }

    let assignment = SpinAssignment::from_pairs(
        (0..n).map(|q| (map.global(q), if best_spins[q] < 0.0 { -1 } else { 1 })),
    );
    (assignment, best_energy)
}
