//! Depth-p QAOA state preparation and derivative-free angle optimization.
//!
//! The ansatz alternates the diagonal cost phase and a mixer, cost first in
//! each layer, on top of a configured initial state. Angles are optimized by
//! a Nelder-Mead simplex search restarted from seeded random points; the
//! objective is the exact state-vector expectation `F_p = <psi|H_C|psi>`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ising::IsingInstance;
use crate::simulator::{DiagonalCost, InitState, MixerKind, MixerSpec, QubitMap, StateVector};
use crate::{Error, Result};

/// The variational angles, one `(gamma, beta)` pair per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaParams {
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl QaoaParams {
    pub fn new(gammas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() || gammas.len() != betas.len() {
            return Err(Error::InvalidParameter(format!(
                "need equal, nonzero angle counts, got {} gammas / {} betas",
                gammas.len(),
                betas.len()
            )));
        }
        Ok(Self { gammas, betas })
    }

    pub fn zeros(depth: usize) -> Self {
        Self { gammas: vec![0.0; depth], betas: vec![0.0; depth] }
    }

    pub fn depth(&self) -> usize {
        self.gammas.len()
    }

    fn from_flat(depth: usize, flat: &[f64]) -> Self {
        Self { gammas: flat[..depth].to_vec(), betas: flat[depth..].to_vec() }
    }
}

/// Outer-loop settings. `blocks` lists user blocks in *global* Ising
/// indices; each run intersects them with the current active set to derive
/// the register-level mixer blocks, which is what lets the same config drive
/// every RQAOA round as the instance shrinks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub depth: usize,
    pub mixer: MixerKind,
    pub blocks: Option<Vec<Vec<usize>>>,
    pub init: InitState,
    pub restarts: usize,
    pub max_evaluations: usize,
    /// Sampling interval for initial gamma angles.
    pub gamma_range: (f64, f64),
    /// Sampling interval for initial beta angles.
    pub beta_range: (f64, f64),
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            depth: 1,
            mixer: MixerKind::TransverseX,
            blocks: None,
            init: InitState::Plus,
            restarts: 3,
            max_evaluations: 200,
            gamma_range: (0.0, std::f64::consts::PI),
            beta_range: (0.0, std::f64::consts::FRAC_PI_2),
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::InvalidParameter("depth must be at least 1".into()));
        }
        if self.restarts == 0 || self.max_evaluations == 0 {
            return Err(Error::InvalidParameter(
                "restarts and max_evaluations must be at least 1".into(),
            ));
        }
        if (self.mixer.is_xy() || self.init != InitState::Plus) && self.blocks.is_none() {
            return Err(Error::Config(
                "XY mixers and one-hot initial states need a block structure".into(),
            ));
        }
        Ok(())
    }
}

/// Everything derived from (instance, config) that a round of QAOA needs:
/// the register map, the energy table, the mixer restricted to the active
/// set, and the initial state.
pub struct RoundSetup {
    pub map: QubitMap,
    pub cost: DiagonalCost,
    pub mixer: MixerSpec,
    /// Active parts of the configured blocks, register positions.
    pub init_blocks: Vec<Vec<usize>>,
    init: InitState,
    depth: usize,
}

impl RoundSetup {
    pub fn new(ising: &IsingInstance, config: &OptimizerConfig) -> Result<Self> {
        config.validate()?;
        let map = QubitMap::from_active(ising.active());
        let cost = DiagonalCost::from_ising(ising, &map)?;
        let init_blocks: Vec<Vec<usize>> = config
            .blocks
            .as_deref()
            .unwrap_or(&[])
            .iter()
            .map(|block| block.iter().filter_map(|&g| map.position(g)).collect::<Vec<usize>>())
            .filter(|b: &Vec<usize>| !b.is_empty())
            .collect();
        // XY mixing needs at least two qubits per block; smaller remnants
        // keep their initial state and are only driven by cost phases.
        let mixer_blocks: Vec<Vec<usize>> =
            init_blocks.iter().filter(|b| b.len() >= 2).cloned().collect();
        let mixer = MixerSpec::new(config.mixer, mixer_blocks)?;
        Ok(Self { map, cost, mixer, init_blocks, init: config.init, depth: config.depth })
    }

    pub fn initial_state(&self) -> Result<StateVector> {
        match self.init {
            InitState::Plus => StateVector::init_plus(self.map.len()),
            mode => StateVector::init_onehot_feasible(self.map.len(), &self.init_blocks, mode),
        }
    }

    pub fn prepare_from(&self, init: &StateVector, params: &QaoaParams) -> Result<StateVector> {
        if params.depth() != self.depth {
            return Err(Error::InvalidParameter(format!(
                "expected {} layers, got {}",
                self.depth,
                params.depth()
            )));
        }
        let mut psi = init.clone();
        for l in 0..params.depth() {
            psi.apply_cost_phase(&self.cost, params.gammas[l]);
            psi.apply_mixer(&self.mixer, params.betas[l])?;
        }
        Ok(psi)
    }

    pub fn prepare(&self, params: &QaoaParams) -> Result<StateVector> {
        self.prepare_from(&self.initial_state()?, params)
    }
}

/// Build the depth-p variational state for the given angles.
pub fn prepare_state(
    ising: &IsingInstance,
    config: &OptimizerConfig,
    params: &QaoaParams,
) -> Result<StateVector> {
    RoundSetup::new(ising, config)?.prepare(params)
}

/// `F_p(gamma, beta) = <psi_p|H_C|psi_p>`.
pub fn objective(
    ising: &IsingInstance,
    config: &OptimizerConfig,
    params: &QaoaParams,
) -> Result<f64> {
    let setup = RoundSetup::new(ising, config)?;
    let psi = setup.prepare(params)?;
    Ok(psi.expectation_energy(&setup.cost))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    pub params: QaoaParams,
    pub value: f64,
    pub evaluations: usize,
}

/// One objective evaluation, for optional optimizer traces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRecord {
    pub index: usize,
    pub params: Vec<f64>,
    pub value: f64,
}

/// Minimize `F_p` with restarted Nelder-Mead. Initial angles are drawn
/// uniformly from the configured ranges; the best `(value, restart index)`
/// wins. Deterministic in the config seed.
pub fn optimize(ising: &IsingInstance, config: &OptimizerConfig) -> Result<OptimizeOutcome> {
    optimize_traced(ising, config, None)
}

pub fn optimize_traced(
    ising: &IsingInstance,
    config: &OptimizerConfig,
    mut trace: Option<&mut Vec<EvalRecord>>,
) -> Result<OptimizeOutcome> {
    let setup = RoundSetup::new(ising, config)?;
    let init = setup.initial_state()?;
    let depth = config.depth;

    let mut total_evals = 0usize;
    let mut best: Option<(f64, QaoaParams)> = None;

    for restart in 0..config.restarts {
        let mut rng =
            ChaCha8Rng::seed_from_u64(config.seed ^ (restart as u64).wrapping_mul(0x9E3779B97F4A7C15));
        let mut x0 = Vec::with_capacity(2 * depth);
        for _ in 0..depth {
            x0.push(rng.gen_range(config.gamma_range.0..config.gamma_range.1));
        }
        for _ in 0..depth {
            x0.push(rng.gen_range(config.beta_range.0..config.beta_range.1));
        }
        let mut step = Vec::with_capacity(2 * depth);
        step.extend(std::iter::repeat((config.gamma_range.1 - config.gamma_range.0) / 4.0).take(depth));
        step.extend(std::iter::repeat((config.beta_range.1 - config.beta_range.0) / 4.0).take(depth));

        let mut evals_here = 0usize;
        let mut f = |x: &[f64]| -> f64 {
            let params = QaoaParams::from_flat(depth, x);
            let psi = setup
                .prepare_from(&init, &params)
                .expect("layer application cannot fail after setup");
            let value = psi.expectation_energy(&setup.cost);
            evals_here += 1;
            if let Some(t) = trace.as_deref_mut() {
                t.push(EvalRecord { index: t.len(), params: x.to_vec(), value });
            }
            value
        };

        let (x_best, f_best) = nelder_mead(&mut f, &x0, &step, config.max_evaluations);
        total_evals += evals_here;
        let candidate = (f_best, QaoaParams::from_flat(depth, &x_best));
        let replace = match &best {
            None => true,
            Some((v, _)) => f_best < *v,
        };
        if replace {
            best = Some(candidate);
        }
    }

    let (value, params) = best.expect("at least one restart");
    Ok(OptimizeOutcome { params, value, evaluations: total_evals })
}

/// Plain Nelder-Mead (reflect / expand / contract / shrink) with an
/// evaluation budget. Returns the best vertex seen.
fn nelder_mead(
    f: &mut impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: &[f64],
    budget: usize,
) -> (Vec<f64>, f64) {
    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    let dim = x0.len();
    let mut evals = 0usize;
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);

    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        f(x)
    };

    let v0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), v0));
    for d in 0..dim {
        if evals >= budget {
            break;
        }
        let mut x = x0.to_vec();
        x[d] += step[d];
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    while evals < budget && simplex.len() == dim + 1 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[dim].1 - simplex[0].1;
        let x_spread = (0..dim)
            .map(|d| {
                let lo = simplex.iter().map(|(x, _)| x[d]).fold(f64::INFINITY, f64::min);
                let hi = simplex.iter().map(|(x, _)| x[d]).fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            })
            .fold(0.0f64, f64::max);
        if spread.abs() < 1e-10 && x_spread < 1e-8 {
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|d| simplex[..dim].iter().map(|(x, _)| x[d]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();

        let reflected: Vec<f64> =
            (0..dim).map(|d| centroid[d] + ALPHA * (centroid[d] - worst.0[d])).collect();
        let fr = eval(&reflected, &mut evals);

        if fr < simplex[0].1 {
            if evals < budget {
                let expanded: Vec<f64> =
                    (0..dim).map(|d| centroid[d] + GAMMA * (reflected[d] - centroid[d])).collect();
                let fe = eval(&expanded, &mut evals);
                simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            } else {
                simplex[dim] = (reflected, fr);
            }
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
        } else if evals < budget {
            let contracted: Vec<f64> =
                (0..dim).map(|d| centroid[d] + RHO * (worst.0[d] - centroid[d])).collect();
            let fc = eval(&contracted, &mut evals);
            if fc < worst.1 {
                simplex[dim] = (contracted, fc);
            } else {
                // shrink toward the best vertex
                let best = simplex[0].0.clone();
                for k in 1..=dim {
                    if evals >= budget {
                        break;
                    }
                    let x: Vec<f64> = (0..dim)
                        .map(|d| best[d] + SIGMA * (simplex[k].0[d] - best[d]))
                        .collect();
                    let v = eval(&x, &mut evals);
                    simplex[k] = (x, v);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.into_iter().next().expect("non-empty simplex")
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn single_z() -> IsingInstance {
        let mut ising = IsingInstance::with_active(0..1);
        ising.add_field(0, 1.0);
        ising
    }

    #[test]
    fn zero_angles_return_initial_state() {
        let ising = crate::ising::tests::random_ising(4, 3);
        let config = OptimizerConfig::default();
        let psi = prepare_state(&ising, &config, &QaoaParams::zeros(1)).unwrap();
        let plus = StateVector::init_plus(4).unwrap();
        for (a, b) in psi.amplitudes().iter().zip(plus.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn depth_two_equals_sequential_layers() {
        let ising = crate::ising::tests::random_ising(3, 9);
        let params = QaoaParams::new(vec![0.3, 0.8], vec![0.5, 0.2]).unwrap();
        let config = OptimizerConfig { depth: 2, ..OptimizerConfig::default() };
        let two_layer = prepare_state(&ising, &config, &params).unwrap();

        let setup = RoundSetup::new(&ising, &config).unwrap();
        let mut manual = setup.initial_state().unwrap();
        for l in 0..2 {
            manual.apply_cost_phase(&setup.cost, params.gammas[l]);
            manual.apply_mixer(&setup.mixer, params.betas[l]).unwrap();
        }
        for (a, b) in two_layer.amplitudes().iter().zip(manual.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    /// Hand-multiplied 4x4 dense oracle for a 2-qubit, p=1 circuit.
    #[test]
    fn two_qubit_layer_matches_dense_oracle() {
        let mut ising = IsingInstance::with_active(0..2);
        ising.add_field(0, 0.7);
        ising.add_field(1, -1.1);
        ising.add_coupling(0, 1, 0.9);
        ising.add_offset(0.2);
        let (gamma, beta) = (0.37, 0.81);

        let config = OptimizerConfig::default();
        let params = QaoaParams::new(vec![gamma], vec![beta]).unwrap();
        let psi = prepare_state(&ising, &config, &params).unwrap();

        // basis energies in index order (z = +1 for bit 0)
        let z = [1.0f64, -1.0];
        let mut energies = [0.0f64; 4];
        for b in 0..4 {
            let (z0, z1) = (z[b & 1], z[(b >> 1) & 1]);
            energies[b] = 0.2 + 0.7 * z0 - 1.1 * z1 + 0.9 * z0 * z1;
        }
        // |+>^2, then diagonal phases, then exp(-i beta X) on each qubit
        let mut amps = [Complex64::new(0.5, 0.0); 4];
        for b in 0..4 {
            amps[b] *= Complex64::new(0.0, -gamma * energies[b]).exp();
        }
        let (s, c) = beta.sin_cos();
        let rx = [
            [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
            [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
        ];
        let mut out = [Complex64::new(0.0, 0.0); 4];
        for b_out in 0..4usize {
            for b_in in 0..4usize {
                let m0 = rx[b_out & 1][b_in & 1];
                let m1 = rx[(b_out >> 1) & 1][(b_in >> 1) & 1];
                out[b_out] += m0 * m1 * amps[b_in];
            }
        }
        for (a, b) in psi.amplitudes().iter().zip(out.iter()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn objective_at_zero_angles_is_offset_plus_nothing() {
        let ising = crate::ising::tests::random_ising(5, 4);
        let config = OptimizerConfig::default();
        let f = objective(&ising, &config, &QaoaParams::zeros(1)).unwrap();
        // |+>^n has vanishing <Z> and <ZZ>
        assert!((f - ising.offset()).abs() < 1e-9);
    }

    #[test]
    fn objective_shift_invariance() {
        let ising = crate::ising::tests::random_ising(4, 30);
        let mut shifted = ising.clone();
        shifted.add_offset(2.5);
        let config = OptimizerConfig::default();
        let params = QaoaParams::new(vec![0.4], vec![0.3]).unwrap();
        let a = objective(&ising, &config, &params).unwrap();
        let b = objective(&shifted, &config, &params).unwrap();
        assert!((b - (a + 2.5)).abs() < 1e-9);
    }

    #[test]
    fn objective_bounded_by_ground_energy() {
        for seed in 0..5 {
            let ising = crate::ising::tests::random_ising(6, 60 + seed);
            let map = QubitMap::from_active(ising.active());
            let cost = DiagonalCost::from_ising(&ising, &map).unwrap();
            let ground = cost.energies().iter().copied().fold(f64::INFINITY, f64::min);
            let config = OptimizerConfig { seed, ..OptimizerConfig::default() };
            let out = optimize(&ising, &config).unwrap();
            assert!(out.value >= ground - 1e-9);
        }
    }

    /// Dense grid oracle on the single-qubit H = Z landscape: the p=1
    /// optimum approaches -1.
    #[test]
    fn single_qubit_grid_and_optimize() {
        let ising = single_z();
        let config = OptimizerConfig::default();
        let mut grid_best = f64::INFINITY;
        for gi in 0..60 {
            for bi in 0..60 {
                let gamma = std::f64::consts::PI * gi as f64 / 59.0;
                let beta = std::f64::consts::FRAC_PI_2 * bi as f64 / 59.0;
                let params = QaoaParams::new(vec![gamma], vec![beta]).unwrap();
                grid_best = grid_best.min(objective(&ising, &config, &params).unwrap());
            }
        }
        assert!((grid_best + 1.0).abs() < 1e-2, "grid reaches {grid_best}");

        let out = optimize(&ising, &config).unwrap();
        assert!((out.value + 1.0).abs() < 1e-3, "optimize reaches {}", out.value);
    }

    #[test]
    fn optimize_is_deterministic_and_bounded() {
        let ising = crate::ising::tests::random_ising(5, 12);
        let config = OptimizerConfig { restarts: 2, max_evaluations: 80, ..Default::default() };
        let a = optimize(&ising, &config).unwrap();
        let b = optimize(&ising, &config).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.value, b.value);
        assert!(a.evaluations <= 2 * 80);

        let mut trace = Vec::new();
        let traced = optimize_traced(&ising, &config, Some(&mut trace)).unwrap();
        assert_eq!(traced.value, a.value);
        assert_eq!(trace.len(), traced.evaluations);
        // best returned value is the best evaluated value
        let best_eval = trace.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
        assert!(traced.value <= best_eval + 1e-15);
    }

    #[test]
    fn ring_xy_one_hot_keeps_feasible_mass() {
        // 2 users x 3 channels, blocks {0,1,2} and {3,4,5}
        let ising = crate::ising::tests::random_ising(6, 44);
        let blocks = vec![vec![0, 1, 2], vec![3, 4, 5]];
        let config = OptimizerConfig {
            mixer: MixerKind::RingXy,
            blocks: Some(blocks.clone()),
            init: InitState::OneHotSuperposition,
            depth: 2,
            ..OptimizerConfig::default()
        };
        for seed in 0..3 {
            let params = QaoaParams::new(
                vec![0.3 + seed as f64, 1.2],
                vec![0.7, 0.4 + seed as f64 * 0.3],
            )
            .unwrap();
            let psi = prepare_state(&ising, &config, &params).unwrap();
            assert!((psi.onehot_block_mass(&blocks) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn xy_without_blocks_is_config_error() {
        let ising = crate::ising::tests::random_ising(4, 2);
        let config = OptimizerConfig { mixer: MixerKind::RingXy, ..OptimizerConfig::default() };
        assert!(matches!(
            optimize(&ising, &config),
            Err(Error::Config(_))
        ));
    }
}
