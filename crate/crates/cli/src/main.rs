//! Command-line entry point: generate instances, run solvers, and execute
//! benchmark sweeps that stream tidy CSV.
//!
//! Exit codes for `solve`: 0 = feasible result written, 2 = infeasible
//! result, 1 = any error.

mod benchmark;
mod settings;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chanmin_core::baselines::{brute_force, greedy_assign, simulated_annealing};
use chanmin_core::ising::qubo_to_ising;
use chanmin_core::pipeline::run_pipeline;
use chanmin_core::qaoa::{optimize_traced, EvalRecord, RoundSetup};
use chanmin_core::rqaoa::Term;
use chanmin_core::wireless::{
    auto_penalty, build_qubo, check_feasibility, decode, generate_demo, generate_hotspot,
    objective_value, repair, AssignmentMatrix, ChannelAssignmentInstance, HotspotParams, VariableLayout,
};

use settings::{SolveSettings, SolverKind};

#[derive(Parser)]
#[command(
    name = "chanmin",
    about = "Interference-aware wireless channel assignment via recursive QAOA",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic instance to a JSON file.
    Generate(GenerateArgs),
    /// Solve an instance file and write the assignment JSON.
    Solve(SolveArgs),
    /// Run a benchmark sweep described by a spec file, streaming CSV rows.
    Benchmark(benchmark::BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum InstanceKind {
    Demo,
    Hotspot,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    kind: InstanceKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of users (hotspot only; the demo is fixed at 4x4).
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Per-channel capacities, comma separated (e.g. "8,8").
    #[arg(long)]
    capacities: Option<String>,
    #[arg(long)]
    side: Option<f64>,
    #[arg(long)]
    hotspots: Option<usize>,
    #[arg(long)]
    pos_sigma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    ref_distance: Option<f64>,
    #[arg(long)]
    min_distance: Option<f64>,
    /// Log-normal shadowing sigma in dB.
    #[arg(long)]
    shadow_sigma: Option<f64>,
    #[arg(long)]
    weight_floor: Option<f64>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    solver: SolverKind,
    /// JSON config file; every key mirrors a flag, flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path for the assignment JSON (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// RQAOA round trace, one JSON object per line.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Presolve summary JSON.
    #[arg(long)]
    presolve_summary: Option<PathBuf>,
    /// Optimizer evaluation trace CSV (solver = qaoa only).
    #[arg(long)]
    opt_trace: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    penalty_a: Option<f64>,
    #[arg(long)]
    penalty_b: Option<f64>,
    #[arg(long)]
    depth: Option<usize>,
    /// Mixer family: transverse_x, transverse_y, ring_xy, clique_xy,
    /// matching_xy, star_xy.
    #[arg(long)]
    mixer: Option<String>,
    /// Initial state: plus, one_hot_basis, one_hot_superposition.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_evaluations: Option<usize>,
    #[arg(long)]
    gamma_max: Option<f64>,
    #[arg(long)]
    beta_max: Option<f64>,
    #[arg(long)]
    n_cutoff: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    shots: Option<usize>,
    /// Candidate policy: hamiltonian_terms, all_pairs.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    core_size: Option<usize>,
    #[arg(long, value_enum)]
    core_solver: Option<settings::CoreSolverKind>,
    #[arg(long)]
    sample_shots: Option<usize>,
    #[arg(long)]
    sa_sweeps: Option<usize>,
    /// Greedy user order: interference_score_desc, by_index.
    #[arg(long)]
    user_order: Option<String>,
}

impl SolveArgs {
    /// Config file first, then flag overrides.
    fn settings(&self) -> Result<SolveSettings, String> {
        let mut s = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
                serde_json::from_str::<SolveSettings>(&text)
                    .map_err(|e| format!("bad config {}: {e}", path.display()))?
            }
            None => SolveSettings::default(),
        };
        macro_rules! merge {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { s.$field = v; })*
            };
        }
        merge!(
            seed, depth, restarts, max_evaluations, gamma_max, beta_max,
            n_cutoff, threshold, core_solver, sample_shots, sa_sweeps
        );
        if let Some(v) = &self.mixer {
            s.mixer = parse_name(v, "mixer")?;
        }
        if let Some(v) = &self.init {
            s.init = parse_name(v, "init")?;
        }
        if let Some(v) = &self.policy {
            s.policy = parse_name(v, "policy")?;
        }
        if let Some(v) = &self.user_order {
            s.user_order = parse_name(v, "user order")?;
        }
        if let Some(a) = self.penalty_a {
            s.penalty_a = Some(a);
        }
        if let Some(b) = self.penalty_b {
            s.penalty_b = b;
        }
        if let Some(v) = self.shots {
            s.shots = Some(v);
        }
        if let Some(v) = self.core_size {
            s.core_size = Some(v);
        }
        Ok(s)
    }
}

/// Parse an enum flag by its snake_case config-file name.
fn parse_name<T: serde::de::DeserializeOwned>(value: &str, what: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| format!("unknown {what} '{value}'"))
}

fn parse_capacities(text: &str) -> Result<Vec<usize>, String> {
    text.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("bad capacity '{t}': {e}")))
        .collect()
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), String> {
    let capacities = args.capacities.as_deref().map(parse_capacities).transpose()?;
    let inst = match args.kind {
        InstanceKind::Demo => {
            if args.users.is_some_and(|u| u != 4) || args.channels.is_some_and(|c| c != 4) {
                return Err("the demo instance is fixed at 4 users x 4 channels".into());
            }
            let inst = generate_demo(args.seed);
            match capacities {
                None => inst,
                Some(caps) => ChannelAssignmentInstance::new(
                    4,
                    4,
                    inst.weights().clone(),
                    Some(caps),
                    args.seed,
                    inst.metadata(),
                )
                .map_err(|e| e.to_string())?,
            }
        }
        InstanceKind::Hotspot => {
            let users = args.users.ok_or("--users is required for hotspot instances")?;
            let channels = args.channels.ok_or("--channels is required for hotspot instances")?;
            let defaults = HotspotParams::default();
            let params = HotspotParams {
                side: args.side.unwrap_or(defaults.side),
                num_hotspots: args.hotspots.or(defaults.num_hotspots),
                pos_sigma: args.pos_sigma.unwrap_or(defaults.pos_sigma),
                alpha: args.alpha.unwrap_or(defaults.alpha),
                ref_distance: args.ref_distance.unwrap_or(defaults.ref_distance),
                min_distance: args.min_distance.unwrap_or(defaults.min_distance),
                shadow_sigma_db: args.shadow_sigma.unwrap_or(defaults.shadow_sigma_db),
                weight_floor: args.weight_floor.unwrap_or(defaults.weight_floor),
            };
            let inst =
                generate_hotspot(users, channels, &params, args.seed).map_err(|e| e.to_string())?;
            match capacities {
                None => inst,
                Some(caps) => ChannelAssignmentInstance::new(
                    users,
                    channels,
                    inst.weights().clone(),
                    Some(caps),
                    args.seed,
                    inst.metadata(),
                )
                .map_err(|e| e.to_string())?,
            }
        }
    };
    let text = serde_json::to_string_pretty(&inst.to_json()).expect("instance serializes");
    std::fs::write(&args.out, text + "\n")
        .map_err(|e| format!("cannot write {}: {e}", args.out.display()))?;
    Ok(())
}

struct SolveOutput {
    assignment: AssignmentMatrix,
    presolve_summary: Option<serde_json::Value>,
    trace_rows: Vec<serde_json::Value>,
}

fn term_json(term: &Term) -> serde_json::Value {
    match term {
        Term::Single(i) => serde_json::json!({ "single": i }),
        Term::Pair(i, j) => serde_json::json!({ "pair": [i, j] }),
    }
}

fn solve_instance(
    inst: &ChannelAssignmentInstance,
    solver: SolverKind,
    s: &SolveSettings,
    opt_trace: Option<&Path>,
) -> Result<SolveOutput, String> {
    let err = |e: chanmin_core::Error| e.to_string();
    match solver {
        SolverKind::Greedy => {
            let x = greedy_assign(inst, &s.greedy_config()).map_err(err)?;
            Ok(SolveOutput { assignment: x, presolve_summary: None, trace_rows: Vec::new() })
        }
        SolverKind::Exact => {
            let (x, _) = brute_force(inst).map_err(err)?;
            Ok(SolveOutput { assignment: x, presolve_summary: None, trace_rows: Vec::new() })
        }
        SolverKind::Sa => {
            let penalty =
                s.penalty().map_err(err)?.unwrap_or_else(|| auto_penalty(inst));
            let (qubo, layout) = build_qubo(inst, &penalty).map_err(err)?;
            let ising = qubo_to_ising(&qubo);
            let (z, _) = simulated_annealing(&ising, &s.sa_schedule(), s.seed);
            let bits: Vec<u8> = (0..layout.total())
                .map(|i| if z.get(i) == Some(-1) { 1 } else { 0 })
                .collect();
            let x = finish_decode(inst, &layout, &bits)?;
            Ok(SolveOutput { assignment: x, presolve_summary: None, trace_rows: Vec::new() })
        }
        SolverKind::Qaoa if opt_trace.is_some() => {
            // dedicated path so the evaluation trace can be streamed
            let penalty =
                s.penalty().map_err(err)?.unwrap_or_else(|| auto_penalty(inst));
            let (qubo, layout) = build_qubo(inst, &penalty).map_err(err)?;
            let ising = qubo_to_ising(&qubo);
            let mut config = s.optimizer_config();
            config.blocks = Some(layout.user_blocks());
            let mut trace: Vec<EvalRecord> = Vec::new();
            let outcome = optimize_traced(&ising, &config, Some(&mut trace)).map_err(err)?;
            write_opt_trace(opt_trace.unwrap(), &trace)?;
            let setup = RoundSetup::new(&ising, &config).map_err(err)?;
            let psi = setup.prepare(&outcome.params).map_err(err)?;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(s.seed ^ 0x0A0A_5E5E);
            let samples = psi.sample(s.sample_shots.max(1), &mut rng);
            let best = samples
                .into_iter()
                .min_by(|&a, &b| {
                    setup.cost.energy(a).total_cmp(&setup.cost.energy(b)).then(a.cmp(&b))
                })
                .expect("at least one shot");
            let bits: Vec<u8> =
                (0..layout.total()).map(|q| ((best >> q) & 1) as u8).collect();
            let x = finish_decode(inst, &layout, &bits)?;
            Ok(SolveOutput { assignment: x, presolve_summary: None, trace_rows: Vec::new() })
        }
        SolverKind::Qaoa | SolverKind::Rqaoa | SolverKind::Pipeline => {
            let cfg = s.pipeline_config(solver, inst.num_users()).map_err(err)?;
            let (x, result) = run_pipeline(inst, &cfg).map_err(err)?;
            let trace_rows = result
                .rqaoa_trace
                .as_ref()
                .map(|t| {
                    t.rounds
                        .iter()
                        .map(|r| {
                            serde_json::json!({
                                "round": r.round,
                                "n_active": r.n_active,
                                "term": term_json(&r.term),
                                "score": r.score,
                                "sign": r.sign,
                                "f_p": r.f_p,
                            })
                        })
                        .collect()
                })
                .unwrap_or_default();
            Ok(SolveOutput {
                assignment: x,
                presolve_summary: Some(
                    serde_json::to_value(&result.presolve_report).expect("report serializes"),
                ),
                trace_rows,
            })
        }
    }
}

/// Decode solver bits and repair one-hot/capacity violations if any.
fn finish_decode(
    inst: &ChannelAssignmentInstance,
    layout: &VariableLayout,
    bits: &[u8],
) -> Result<AssignmentMatrix, String> {
    let x = decode(bits, layout).map_err(|e| e.to_string())?;
    if check_feasibility(&x, inst).feasible() {
        Ok(x)
    } else {
        repair(&x, inst).map_err(|e| e.to_string())
    }
}

fn write_opt_trace(path: &Path, trace: &[EvalRecord]) -> Result<(), String> {
    let mut out = String::from("evaluation,value,params\n");
    for row in trace {
        let params: Vec<String> = row.params.iter().map(|p| format!("{p}")).collect();
        out.push_str(&format!("{},{},{}\n", row.index, row.value, params.join(";")));
    }
    std::fs::write(path, out).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn cmd_solve(args: &SolveArgs) -> Result<bool, String> {
    let settings = args.settings()?;
    let text = std::fs::read_to_string(&args.instance)
        .map_err(|e| format!("cannot read {}: {e}", args.instance.display()))?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| format!("instance parse error: {e}"))?;
    let inst = ChannelAssignmentInstance::from_json(&doc).map_err(|e| e.to_string())?;

    let output = solve_instance(&inst, args.solver, &settings, args.opt_trace.as_deref())?;
    let feasible = check_feasibility(&output.assignment, &inst).feasible();
    let channels: Vec<serde_json::Value> = (0..inst.num_users())
        .map(|u| match output.assignment.channel_of(u) {
            Some(c) => serde_json::json!(c),
            None => serde_json::Value::Null,
        })
        .collect();
    let mut doc = BTreeMap::new();
    doc.insert("assignment", serde_json::json!(channels));
    doc.insert("objective", serde_json::json!(objective_value(&output.assignment, &inst)));
    doc.insert("feasible", serde_json::json!(feasible));
    let rendered =
        serde_json::to_string_pretty(&serde_json::json!(doc)).expect("assignment serializes");
    match &args.out {
        Some(path) => std::fs::write(path, rendered + "\n")
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None => println!("{rendered}"),
    }

    if let Some(path) = &args.trace {
        let mut lines = String::new();
        for row in &output.trace_rows {
            lines.push_str(&row.to_string());
            lines.push('\n');
        }
        std::fs::write(path, lines)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    if let Some(path) = &args.presolve_summary {
        let summary = output
            .presolve_summary
            .unwrap_or_else(|| serde_json::json!({"note": "solver has no presolve stage"}));
        std::fs::write(path, summary.to_string() + "\n")
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    Ok(feasible)
}

/// Benchmark-facing solve: returns the assignment plus stage timings, the
/// repair flag, and the core qubit count (zero for classical solvers).
pub(crate) fn solve_for_benchmark(
    inst: &ChannelAssignmentInstance,
    solver: SolverKind,
    s: &SolveSettings,
) -> Result<(AssignmentMatrix, chanmin_core::pipeline::StageTimings, bool, usize), String> {
    use chanmin_core::pipeline::StageTimings;
    let err = |e: chanmin_core::Error| e.to_string();
    match solver {
        SolverKind::Greedy => {
            let x = greedy_assign(inst, &s.greedy_config()).map_err(err)?;
            Ok((x, StageTimings::default(), false, 0))
        }
        SolverKind::Exact => {
            let (x, _) = brute_force(inst).map_err(err)?;
            Ok((x, StageTimings::default(), false, 0))
        }
        SolverKind::Sa => {
            let penalty = s.penalty().map_err(err)?.unwrap_or_else(|| auto_penalty(inst));
            let (qubo, layout) = build_qubo(inst, &penalty).map_err(err)?;
            let ising = qubo_to_ising(&qubo);
            let (z, _) = simulated_annealing(&ising, &s.sa_schedule(), s.seed);
            let bits: Vec<u8> = (0..layout.total())
                .map(|i| if z.get(i) == Some(-1) { 1 } else { 0 })
                .collect();
            let x0 = decode(&bits, &layout).map_err(err)?;
            let feasible = check_feasibility(&x0, inst).feasible();
            let x = if feasible { x0 } else { repair(&x0, inst).map_err(err)? };
            Ok((x, StageTimings::default(), !feasible, 0))
        }
        SolverKind::Qaoa | SolverKind::Rqaoa | SolverKind::Pipeline => {
            let cfg = s.pipeline_config(solver, inst.num_users()).map_err(err)?;
            let (x, result) = run_pipeline(inst, &cfg).map_err(err)?;
            Ok((x, result.timings, result.repaired, result.n_qubits_core))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Generate(args) => match cmd_generate(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::Solve(args) => match cmd_solve(args) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(2),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::Benchmark(args) => match benchmark::cmd_benchmark(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}
