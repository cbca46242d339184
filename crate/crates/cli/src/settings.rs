//! Solver settings shared by the `solve` and `benchmark` commands.
//!
//! Every field mirrors a CLI flag; config files carry the same keys and
//! flags take precedence over the file.

use serde::{Deserialize, Serialize};

use chanmin_core::baselines::{GreedyConfig, SaSchedule, UserOrder};
use chanmin_core::pipeline::{CoreSolver, PipelineConfig};
use chanmin_core::presolve::{FreezeConfig, PresolveConfig};
use chanmin_core::qaoa::OptimizerConfig;
use chanmin_core::rqaoa::{CandidatePolicy, RqaoaConfig};
use chanmin_core::simulator::{InitState, MixerKind};
use chanmin_core::wireless::PenaltyConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Greedy,
    Sa,
    Exact,
    Qaoa,
    Rqaoa,
    Pipeline,
}

impl SolverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::Greedy => "greedy",
            SolverKind::Sa => "sa",
            SolverKind::Exact => "exact",
            SolverKind::Qaoa => "qaoa",
            SolverKind::Rqaoa => "rqaoa",
            SolverKind::Pipeline => "pipeline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CoreSolverKind {
    Rqaoa,
    Qaoa,
    Exact,
}

/// Flat bag of tunables; see the README for the flag-for-flag mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSettings {
    pub seed: u64,
    /// One-hot penalty A; `None` derives it from the instance.
    pub penalty_a: Option<f64>,
    pub penalty_b: f64,
    pub depth: usize,
    pub mixer: MixerKind,
    pub init: InitState,
    pub restarts: usize,
    pub max_evaluations: usize,
    pub gamma_max: f64,
    pub beta_max: f64,
    pub n_cutoff: usize,
    pub threshold: f64,
    pub shots: Option<usize>,
    pub policy: CandidatePolicy,
    /// Users handed to the quantum core; `None` means the full instance for
    /// qaoa/rqaoa and 10 for the pipeline solver.
    pub core_size: Option<usize>,
    pub core_solver: CoreSolverKind,
    /// Shots drawn when the core solver is QAOA sample-best.
    pub sample_shots: usize,
    pub sa_sweeps: usize,
    pub presolve_isolated: bool,
    pub presolve_persistency: bool,
    /// Enables magnetization freezing in the presolver when set.
    pub freeze_runs: Option<usize>,
    pub freeze_threshold: f64,
    pub user_order: UserOrder,
}

impl Default for SolveSettings {
    fn default() -> Self {
        let qaoa = OptimizerConfig::default();
        Self {
            seed: 0,
            penalty_a: None,
            penalty_b: 0.0,
            depth: qaoa.depth,
            mixer: qaoa.mixer,
            init: qaoa.init,
            restarts: qaoa.restarts,
            max_evaluations: qaoa.max_evaluations,
            gamma_max: qaoa.gamma_range.1,
            beta_max: qaoa.beta_range.1,
            n_cutoff: 6,
            threshold: 0.0,
            shots: None,
            policy: CandidatePolicy::HamiltonianTerms,
            core_size: None,
            core_solver: CoreSolverKind::Rqaoa,
            sample_shots: 1024,
            sa_sweeps: 500,
            presolve_isolated: true,
            presolve_persistency: true,
            freeze_runs: None,
            freeze_threshold: 0.9,
            user_order: UserOrder::InterferenceScoreDesc,
        }
    }
}

impl SolveSettings {
    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            depth: self.depth,
            mixer: self.mixer,
            blocks: None,
            init: self.init,
            restarts: self.restarts,
            max_evaluations: self.max_evaluations,
            gamma_range: (0.0, self.gamma_max),
            beta_range: (0.0, self.beta_max),
            seed: self.seed,
        }
    }

    pub fn rqaoa_config(&self) -> RqaoaConfig {
        RqaoaConfig {
            n_cutoff: self.n_cutoff,
            threshold: self.threshold,
            qaoa: self.optimizer_config(),
            shots: self.shots,
            policy: self.policy,
        }
    }

    pub fn presolve_config(&self) -> PresolveConfig {
        PresolveConfig {
            isolated: self.presolve_isolated,
            persistency: self.presolve_persistency,
            freeze: self.freeze_runs.map(|runs| FreezeConfig {
                runs,
                threshold: self.freeze_threshold,
                sweeps: None,
                seed: self.seed ^ 0x5EED_F12E,
            }),
        }
    }

    pub fn penalty(&self) -> Result<Option<PenaltyConfig>, chanmin_core::Error> {
        match self.penalty_a {
            Some(a) => Ok(Some(PenaltyConfig::new(a, self.penalty_b)?)),
            None => Ok(None),
        }
    }

    pub fn greedy_config(&self) -> GreedyConfig {
        GreedyConfig { order: self.user_order }
    }

    pub fn sa_schedule(&self) -> SaSchedule {
        SaSchedule { initial_temp: None, final_temp: None, sweeps: self.sa_sweeps }
    }

    fn build_core_solver(&self, kind: CoreSolverKind) -> CoreSolver {
        match kind {
            CoreSolverKind::Rqaoa => CoreSolver::Rqaoa(self.rqaoa_config()),
            CoreSolverKind::Qaoa => CoreSolver::QaoaSampleBest {
                qaoa: self.optimizer_config(),
                shots: self.sample_shots,
            },
            CoreSolverKind::Exact => CoreSolver::Exact,
        }
    }

    /// Pipeline wiring for the top-level solver choice. `qaoa`/`rqaoa` run
    /// on the whole instance (their core is every user); `pipeline` runs the
    /// configured core solver on a `core_size` core.
    pub fn pipeline_config(
        &self,
        solver: SolverKind,
        num_users: usize,
    ) -> Result<PipelineConfig, chanmin_core::Error> {
        let (core_size, core) = match solver {
            SolverKind::Qaoa => {
                (self.core_size.unwrap_or(num_users), self.build_core_solver(CoreSolverKind::Qaoa))
            }
            SolverKind::Rqaoa => {
                (self.core_size.unwrap_or(num_users), self.build_core_solver(CoreSolverKind::Rqaoa))
            }
            SolverKind::Pipeline => {
                (self.core_size.unwrap_or(10).min(num_users), self.build_core_solver(self.core_solver))
            }
            _ => {
                return Err(chanmin_core::Error::Config(format!(
                    "{} is not a pipeline solver",
                    solver.as_str()
                )))
            }
        };
        Ok(PipelineConfig {
            core_size,
            solver: core,
            presolve: self.presolve_config(),
            penalty: self.penalty()?,
            greedy: self.greedy_config(),
            seed: self.seed,
        })
    }
}
