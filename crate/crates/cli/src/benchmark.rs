//! Benchmark sweeps: cross-product of instances, seeds and solvers, rows
//! streamed to CSV through one writer, resumable by key.
//!
//! CSV columns: instance_id, seed, U, C, solver, objective, feasible,
//! repaired, delta_norm, scaled_ratio (empty when not computed), the four
//! stage timings, n_qubits_core, and a trailing error column (empty on
//! success). Timings are the only nondeterministic content.

use std::collections::BTreeSet;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Instant;

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use chanmin_core::baselines::{brute_force_extrema, greedy_assign, BRUTE_FORCE_CAP};
use chanmin_core::pipeline::{delta_norm, scaled_ratio, StageTimings};
use chanmin_core::wireless::{
    check_feasibility, generate_demo, generate_hotspot, objective_value,
    ChannelAssignmentInstance, HotspotParams,
};

use crate::settings::{SolveSettings, SolverKind};
use crate::solve_for_benchmark;

pub const WORKERS_ENV: &str = "CHANMIN_WORKERS";

/// Scaled ratios need exhaustive enumeration; both gates must hold.
const SCALED_RATIO_QUBIT_GATE: usize = 18;

#[derive(Args)]
pub struct BenchmarkArgs {
    /// Sweep description (JSON, see README).
    #[arg(long)]
    spec: PathBuf,
    /// Output CSV; reruns skip keys already present.
    #[arg(long)]
    out: PathBuf,
    /// Worker pool width (default: CHANMIN_WORKERS or the CPU count).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    /// "hotspot" or "demo".
    pub kind: String,
    #[serde(default)]
    pub users: Vec<usize>,
    #[serde(default = "default_channels")]
    pub channels: usize,
    pub topology_seeds: Vec<u64>,
    #[serde(default = "default_run_seeds")]
    pub run_seeds: Vec<u64>,
    #[serde(default)]
    pub hotspot: Option<HotspotParams>,
    #[serde(default)]
    pub capacities: Option<Vec<usize>>,
    pub solvers: Vec<SolverSpec>,
    /// Compute per-instance best/worst feasible energies when small enough.
    #[serde(default)]
    pub scaled_ratio: bool,
}

fn default_channels() -> usize {
    2
}

fn default_run_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub id: String,
    pub solver: SolverKind,
    #[serde(default)]
    pub settings: SolveSettings,
}

struct InstanceEntry {
    id: String,
    instance: ChannelAssignmentInstance,
    greedy_reference: f64,
    extrema: Option<(f64, f64)>,
}

pub struct RowOutcome {
    pub objective: Option<f64>,
    pub feasible: bool,
    pub repaired: bool,
    pub timings: StageTimings,
    pub n_qubits_core: usize,
    pub error: Option<String>,
}

fn build_instances(spec: &BenchSpec) -> Result<Vec<InstanceEntry>, String> {
    let mut entries = Vec::new();
    let mut push = |id: String, inst: ChannelAssignmentInstance, scaled: bool| {
        let greedy_reference = greedy_assign(&inst, &Default::default())
            .map(|x| objective_value(&x, &inst))
            .map_err(|e| format!("greedy reference failed on {id}: {e}"))?;
        let qubits = inst.num_users() * inst.num_channels();
        let enumerable = (inst.num_channels() as f64).powi(inst.num_users() as i32)
            <= BRUTE_FORCE_CAP;
        let extrema = if scaled && qubits <= SCALED_RATIO_QUBIT_GATE && enumerable {
            let e = brute_force_extrema(&inst)
                .map_err(|e| format!("enumeration failed on {id}: {e}"))?;
            Some((e.best_value, e.worst_value))
        } else {
            None
        };
        entries.push(InstanceEntry { id, instance: inst, greedy_reference, extrema });
        Ok::<(), String>(())
    };
    match spec.kind.as_str() {
        "demo" => {
            for &seed in &spec.topology_seeds {
                let inst = generate_demo(seed);
                let inst = attach_capacities(inst, spec)?;
                push(format!("demo-s{seed}"), inst, spec.scaled_ratio)?;
            }
        }
        "hotspot" => {
            if spec.users.is_empty() {
                return Err("hotspot sweeps need a users list".into());
            }
            let params = spec.hotspot.unwrap_or_default();
            for &users in &spec.users {
                for &seed in &spec.topology_seeds {
                    let inst = generate_hotspot(users, spec.channels, &params, seed)
                        .map_err(|e| e.to_string())?;
                    let inst = attach_capacities(inst, spec)?;
                    push(
                        format!("hot-u{users}-c{}-s{seed}", spec.channels),
                        inst,
                        spec.scaled_ratio,
                    )?;
                }
            }
        }
        other => return Err(format!("unknown benchmark kind '{other}'")),
    }
    Ok(entries)
}

fn attach_capacities(
    inst: ChannelAssignmentInstance,
    spec: &BenchSpec,
) -> Result<ChannelAssignmentInstance, String> {
    match &spec.capacities {
        None => Ok(inst),
        Some(caps) => ChannelAssignmentInstance::new(
            inst.num_users(),
            inst.num_channels(),
            inst.weights().clone(),
            Some(caps.clone()),
            inst.seed(),
            inst.metadata(),
        )
        .map_err(|e| e.to_string()),
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn git_describe() -> Option<String> {
    let out = std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()?;
    if out.status.success() {
        Some(String::from_utf8_lossy(&out.stdout).trim().to_string())
    } else {
        None
    }
}

pub const CSV_HEADER: &str = "instance_id,seed,U,C,solver,objective,feasible,repaired,delta_norm,scaled_ratio,t_presolve_ms,t_core_ms,t_extend_ms,t_total_ms,n_qubits_core,error";

fn read_done_keys(path: &PathBuf) -> BTreeSet<(String, u64, String)> {
    let mut done = BTreeSet::new();
    let Ok(text) = std::fs::read_to_string(path) else {
        return done;
    };
    for line in text.lines().skip(1) {
        let mut fields = line.split(',');
        let (Some(id), Some(seed), _, _, Some(solver)) =
            (fields.next(), fields.next(), fields.next(), fields.next(), fields.next())
        else {
            continue;
        };
        if let Ok(seed) = seed.parse::<u64>() {
            done.insert((id.to_string(), seed, solver.to_string()));
        }
    }
    done
}

pub fn cmd_benchmark(args: &BenchmarkArgs) -> Result<(), String> {
    let spec_text = std::fs::read_to_string(&args.spec)
        .map_err(|e| format!("cannot read {}: {e}", args.spec.display()))?;
    let spec: BenchSpec =
        serde_json::from_str(&spec_text).map_err(|e| format!("bad spec: {e}"))?;
    for solver in &spec.solvers {
        if solver.id.contains(',') || solver.id.contains('\n') || solver.id.is_empty() {
            return Err(format!("solver id '{}' is not CSV-safe", solver.id));
        }
    }
    let workers = args
        .workers
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()))
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);

    let instances = build_instances(&spec)?;
    let done = read_done_keys(&args.out);

    // manifest with a deterministic run id derived from the spec snapshot
    let spec_snapshot = serde_json::to_value(&spec).expect("spec serializes");
    let run_id = format!("{:016x}", fnv1a(spec_snapshot.to_string().as_bytes()));
    let manifest = serde_json::json!({
        "run_id": run_id,
        "version": git_describe().unwrap_or_else(|| env!("CARGO_PKG_VERSION").to_string()),
        "created_unix_ms": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0),
        "csv": args.out.display().to_string(),
        "workers": workers,
        "spec": spec_snapshot,
    });
    let manifest_path = PathBuf::from(format!("{}.manifest.json", args.out.display()));
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).unwrap() + "\n")
        .map_err(|e| format!("cannot write {}: {e}", manifest_path.display()))?;

    let fresh = !args.out.exists();
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&args.out)
        .map_err(|e| format!("cannot open {}: {e}", args.out.display()))?;
    let writer = Mutex::new(file);
    if fresh {
        let mut f = writer.lock().unwrap();
        writeln!(f, "{CSV_HEADER}").map_err(|e| e.to_string())?;
    }

    // one task per (instance, run seed, solver) not already in the CSV
    let mut tasks = Vec::new();
    for (i, entry) in instances.iter().enumerate() {
        for &seed in &spec.run_seeds {
            for (s, solver) in spec.solvers.iter().enumerate() {
                if !done.contains(&(entry.id.clone(), seed, solver.id.clone())) {
                    tasks.push((i, seed, s));
                }
            }
        }
    }
    log::info!("{} tasks over {} workers (run {run_id})", tasks.len(), workers);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| e.to_string())?;
    pool.install(|| {
        tasks.par_iter().for_each(|&(i, seed, s)| {
            let entry = &instances[i];
            let solver = &spec.solvers[s];
            let outcome = run_task(entry, seed, solver);
            let row = render_row(entry, seed, solver, &outcome);
            let mut f = writer.lock().unwrap();
            let _ = writeln!(f, "{row}");
            let _ = f.flush();
        });
    });
    Ok(())
}

fn run_task(entry: &InstanceEntry, seed: u64, solver: &SolverSpec) -> RowOutcome {
    let mut settings = solver.settings.clone();
    settings.seed = seed;
    let started = Instant::now();
    match solve_for_benchmark(&entry.instance, solver.solver, &settings) {
        Ok((assignment, mut timings, repaired, n_qubits_core)) => {
            let feasible = check_feasibility(&assignment, &entry.instance).feasible();
            if timings.total_ms == 0.0 {
                timings.total_ms = started.elapsed().as_secs_f64() * 1e3;
            }
            RowOutcome {
                objective: Some(objective_value(&assignment, &entry.instance)),
                feasible,
                repaired,
                timings,
                n_qubits_core,
                error: None,
            }
        }
        Err(e) => RowOutcome {
            objective: None,
            feasible: false,
            repaired: false,
            timings: StageTimings::default(),
            n_qubits_core: 0,
            error: Some(e),
        },
    }
}

fn render_row(
    entry: &InstanceEntry,
    seed: u64,
    solver: &SolverSpec,
    outcome: &RowOutcome,
) -> String {
    let objective =
        outcome.objective.map(|o| format!("{o}")).unwrap_or_default();
    let delta = outcome
        .objective
        .map(|o| format!("{}", delta_norm(o, entry.greedy_reference).value))
        .unwrap_or_default();
    let ratio = match (outcome.objective, entry.extrema) {
        (Some(o), Some((best, worst))) => format!("{}", scaled_ratio(o, best, worst)),
        _ => String::new(),
    };
    let error = outcome.error.as_deref().unwrap_or("").replace(',', ";");
    format!(
        "{},{},{},{},{},{},{},{},{},{},{:.3},{:.3},{:.3},{:.3},{},{}",
        entry.id,
        seed,
        entry.instance.num_users(),
        entry.instance.num_channels(),
        solver.id,
        objective,
        outcome.feasible,
        outcome.repaired,
        delta,
        ratio,
        outcome.timings.presolve_ms,
        outcome.timings.core_ms,
        outcome.timings.extend_ms,
        outcome.timings.total_ms,
        outcome.n_qubits_core,
        error,
    )
}
