//! Dense state-vector simulator for diagonal-cost QAOA circuits.
//!
//! Conventions: qubit `i` is bit `i` of the basis-state index (qubit 0 is
//! the least significant bit of the index and the leftmost character in
//! bitstring renderings); the spin image of a basis state is
//! `z_i = 1 - 2*bit_i`, so bit 1 corresponds to spin -1.
//!
//! The cost unitary `U_C(gamma) = exp(-i gamma H_C)` is applied from a
//! precomputed table of basis-state energies ([`DiagonalCost`]). Mixers come
//! in six families ([`MixerKind`]): single-qubit transverse rotations
//! (X or Y on every qubit) and four XY families acting on two-qubit edges
//! within user blocks. Each XY edge unitary `exp(-i beta (XX + YY)/2)` is
//! applied exactly on the `{01, 10}` subspace, so block excitation numbers
//! are conserved and norms stay exact.

use std::collections::BTreeSet;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ising::IsingInstance;
use crate::{Error, Result};

/// Hard cap on simulated qubits (dense vector of 2^26 complex doubles).
pub const MAX_QUBITS: usize = 26;

/// Mapping between global Ising indices and contiguous register positions.
///
/// Register position `p` holds the `p`-th smallest active global index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QubitMap {
    qubits: Vec<usize>,
}

impl QubitMap {
    pub fn from_active(active: &BTreeSet<usize>) -> Self {
        Self { qubits: active.iter().copied().collect() }
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    /// Global index held at a register position.
    pub fn global(&self, position: usize) -> usize {
        self.qubits[position]
    }

    /// Register position of a global index, if present.
    pub fn position(&self, global: usize) -> Option<usize> {
        self.qubits.binary_search(&global).ok()
    }
}

/// Precomputed basis-state energies of an Ising instance on a register.
///
/// `energies[b]` equals the Ising energy of the spin image of `b`.
#[derive(Debug, Clone)]
pub struct DiagonalCost {
    num_qubits: usize,
    energies: Vec<f64>,
}

impl DiagonalCost {
    /// Tabulate all `2^n` energies with a Gray-code walk (one spin flip per
    /// step, O(degree) incremental update).
    pub fn from_ising(ising: &IsingInstance, map: &QubitMap) -> Result<Self> {
        let n = map.len();
        if n != ising.num_active() {
            return Err(Error::Config(format!(
                "qubit map covers {n} qubits but instance has {} active spins",
                ising.num_active()
            )));
        }
        if n > MAX_QUBITS {
            return Err(Error::TooLarge { size: n, cap: MAX_QUBITS });
        }
        let mut fields = vec![0.0f64; n];
        for (i, h) in ising.fields() {
            fields[map.position(i).ok_or(Error::InvalidIndex { index: i })?] = h;
        }
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, c) in ising.couplings() {
            let pi = map.position(i).ok_or(Error::InvalidIndex { index: i })?;
            let pj = map.position(j).ok_or(Error::InvalidIndex { index: j })?;
            adj[pi].push((pj, c));
            adj[pj].push((pi, c));
        }

        let size = 1usize << n;
        let mut energies = vec![0.0f64; size];
        // all bits 0 <=> all spins +1
        let mut e = ising.offset();
        for &h in &fields {
            e += h;
        }
        for (_, _, c) in ising.couplings() {
            e += c;
        }
        let mut spins = vec![1.0f64; n];
        energies[0] = e;
        for t in 1..size {
            let k = t.trailing_zeros() as usize;
            let mut local = fields[k];
            for &(j, c) in &adj[k] {
                local += c * spins[j];
            }
            e -= 2.0 * spins[k] * local;
            spins[k] = -spins[k];
            energies[t ^ (t >> 1)] = e;
        }
        Ok(Self { num_qubits: n, energies })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn energy(&self, basis_state: usize) -> f64 {
        self.energies[basis_state]
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }
}

/// The six mixer families. Transverse kinds rotate every qubit; XY kinds act
/// on edges within each user block and conserve the block excitation number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixerKind {
    /// `exp(-i beta X_i)` on every qubit (RX mixer).
    TransverseX,
    /// `exp(-i beta Y_i)` on every qubit (RY mixer).
    TransverseY,
    /// XY edges around a cycle within each block.
    RingXy,
    /// XY edges on all pairs within each block.
    CliqueXy,
    /// Ring edges regrouped into two rounds of disjoint pairings.
    MatchingXy,
    /// XY edges from the block's lowest qubit to every other member.
    StarXy,
}

impl MixerKind {
    pub fn is_xy(self) -> bool {
        matches!(
            self,
            MixerKind::RingXy | MixerKind::CliqueXy | MixerKind::MatchingXy | MixerKind::StarXy
        )
    }
}

/// A mixer kind plus the block structure it acts on (register positions).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixerSpec {
    kind: MixerKind,
    blocks: Vec<Vec<usize>>,
}

impl MixerSpec {
    /// XY kinds require disjoint blocks of size >= 2; transverse kinds
    /// ignore the block structure.
    pub fn new(kind: MixerKind, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if kind.is_xy() {
            let mut seen = BTreeSet::new();
            for block in &blocks {
                if block.len() < 2 {
                    return Err(Error::Config(format!(
                        "XY mixer block must have at least 2 qubits, got {}",
                        block.len()
                    )));
                }
                for &q in block {
                    if !seen.insert(q) {
                        return Err(Error::Config(format!("qubit {q} appears in two blocks")));
                    }
                }
            }
        }
        Ok(Self { kind, blocks })
    }

    pub fn transverse_x() -> Self {
        Self { kind: MixerKind::TransverseX, blocks: Vec::new() }
    }

    pub fn kind(&self) -> MixerKind {
        self.kind
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Full ordered edge sequence (block-major) this XY mixer applies;
    /// empty for transverse kinds.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.blocks.iter().flat_map(|b| self.block_edges(b)).collect()
    }

    /// Edge sequence of one block for this XY kind, in application order.
    fn block_edges(&self, block: &[usize]) -> Vec<(usize, usize)> {
        let m = block.len();
        match self.kind {
            MixerKind::RingXy => {
                if m == 2 {
                    vec![(block[0], block[1])]
                } else {
                    (0..m).map(|i| (block[i], block[(i + 1) % m])).collect()
                }
            }
            MixerKind::CliqueXy => {
                let mut edges = Vec::new();
                for i in 0..m {
                    for j in (i + 1)..m {
                        edges.push((block[i], block[j]));
                    }
                }
                edges
            }
            MixerKind::MatchingXy => {
                // ring edges, even-indexed round first, then odd-indexed;
                // for odd blocks the wrap edge trails the first round
                let ring: Vec<(usize, usize)> = if m == 2 {
                    vec![(block[0], block[1])]
                } else {
                    (0..m).map(|i| (block[i], block[(i + 1) % m])).collect()
                };
                let mut edges: Vec<(usize, usize)> =
                    ring.iter().copied().step_by(2).collect();
                edges.extend(ring.iter().copied().skip(1).step_by(2));
                edges
            }
            MixerKind::StarXy => {
                let anchor = *block.iter().min().expect("non-empty block");
                block.iter().filter(|&&q| q != anchor).map(|&q| (anchor, q)).collect()
            }
            MixerKind::TransverseX | MixerKind::TransverseY => Vec::new(),
        }
    }
}

/// How the register is initialized before the QAOA layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitState {
    /// Uniform superposition `|+>^n`.
    Plus,
    /// Basis state with the first qubit of every block set.
    OneHotBasis,
    /// Per-block uniform superposition over the one-hot states (W states);
    /// unblocked qubits and singleton blocks get `|+>`.
    OneHotSuperposition,
}

/// Dense register of `2^n` complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    fn check_size(n: usize) -> Result<()> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::TooLarge { size: n, cap: MAX_QUBITS });
        }
        Ok(())
    }

    /// `|+>^n`, every amplitude `2^(-n/2)`.
    pub fn init_plus(n: usize) -> Result<Self> {
        Self::check_size(n)?;
        let size = 1usize << n;
        let a = Complex64::new((size as f64).sqrt().recip(), 0.0);
        Ok(Self { num_qubits: n, amps: vec![a; size] })
    }

    /// The computational basis state `|b>`.
    pub fn basis(n: usize, b: usize) -> Result<Self> {
        Self::check_size(n)?;
        let size = 1usize << n;
        if b >= size {
            return Err(Error::InvalidParameter(format!("basis index {b} out of range")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); size];
        amps[b] = Complex64::new(1.0, 0.0);
        Ok(Self { num_qubits: n, amps })
    }

    /// Constraint-satisfying initial state over user blocks (register
    /// positions). See [`InitState`] for the per-mode semantics.
    pub fn init_onehot_feasible(n: usize, blocks: &[Vec<usize>], mode: InitState) -> Result<Self> {
        Self::check_size(n)?;
        let mut in_block = vec![false; n];
        for block in blocks {
            for &q in block {
                if q >= n {
                    return Err(Error::InvalidParameter(format!("block qubit {q} out of range")));
                }
                if in_block[q] {
                    return Err(Error::Config(format!("qubit {q} appears in two blocks")));
                }
                in_block[q] = true;
            }
        }
        match mode {
            InitState::Plus => Self::init_plus(n),
            InitState::OneHotBasis => {
                let mut b = 0usize;
                for block in blocks {
                    b |= 1 << block[0];
                }
                Self::basis(n, b)
            }
            InitState::OneHotSuperposition => {
                // product of W states per block (>= 2 qubits), |+> elsewhere
                let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
                let units: Vec<&[usize]> =
                    blocks.iter().filter(|b| b.len() >= 2).map(|b| b.as_slice()).collect();
                let loose: Vec<usize> = (0..n)
                    .filter(|&q| !in_block[q] || blocks.iter().any(|b| b.len() == 1 && b[0] == q))
                    .collect();
                let mut weight = 1.0f64;
                for unit in &units {
                    weight /= unit.len() as f64;
                }
                weight /= (1usize << loose.len()) as f64;
                let amp = Complex64::new(weight.sqrt(), 0.0);

                let mut choice = vec![0usize; units.len()];
                loop {
                    let mut base = 0usize;
                    for (k, unit) in units.iter().enumerate() {
                        base |= 1 << unit[choice[k]];
                    }
                    // spread over all subsets of the loose qubits
                    let mut subset = 0usize;
                    loop {
                        let mut idx = base;
                        for (pos, &q) in loose.iter().enumerate() {
                            if (subset >> pos) & 1 == 1 {
                                idx |= 1 << q;
                            }
                        }
                        amps[idx] = amp;
                        subset += 1;
                        if subset >= (1 << loose.len()) {
                            break;
                        }
                    }
                    // odometer over per-block choices
                    let mut k = 0;
                    loop {
                        if k == units.len() {
                            return Ok(Self { num_qubits: n, amps });
                        }
                        choice[k] += 1;
                        if choice[k] < units[k].len() {
                            break;
                        }
                        choice[k] = 0;
                        k += 1;
                    }
                }
            }
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probability(&self, basis_state: usize) -> f64 {
        self.amps[basis_state].norm_sqr()
    }

    /// `U_C(gamma)`: multiply each amplitude by `exp(-i gamma E_b)`.
    pub fn apply_cost_phase(&mut self, cost: &DiagonalCost, gamma: f64) {
        debug_assert_eq!(cost.num_qubits(), self.num_qubits);
        for (a, &e) in self.amps.iter_mut().zip(cost.energies.iter()) {
            let (s, c) = (gamma * e).sin_cos();
            *a *= Complex64::new(c, -s);
        }
    }

    /// `U_M(beta)` for the given mixer family.
    pub fn apply_mixer(&mut self, spec: &MixerSpec, beta: f64) -> Result<()> {
        match spec.kind() {
            MixerKind::TransverseX => {
                let (s, c) = beta.sin_cos();
                for q in 0..self.num_qubits {
                    self.rotate_pairs(q, |a0, a1| {
                        (
                            c * a0 - Complex64::i() * s * a1,
                            -Complex64::i() * s * a0 + c * a1,
                        )
                    });
                }
            }
            MixerKind::TransverseY => {
                let (s, c) = beta.sin_cos();
                for q in 0..self.num_qubits {
                    self.rotate_pairs(q, |a0, a1| (c * a0 - s * a1, s * a0 + c * a1));
                }
            }
            _ => {
                for block in spec.blocks() {
                    for &(a, b) in &spec.block_edges(block) {
                        self.apply_xy_edge(a, b, beta)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn rotate_pairs(
        &mut self,
        q: usize,
        f: impl Fn(Complex64, Complex64) -> (Complex64, Complex64),
    ) {
        let mask = 1usize << q;
        let size = self.amps.len();
        let mut base = 0usize;
        while base < size {
            for low in base..base + mask {
                let high = low | mask;
                let (a0, a1) = (self.amps[low], self.amps[high]);
                let (b0, b1) = f(a0, a1);
                self.amps[low] = b0;
                self.amps[high] = b1;
            }
            base += mask << 1;
        }
    }

    /// `exp(-i beta (X_aX_b + Y_aY_b)/2)`: rotation on the `{01,10}`
    /// subspace, identity on `{00,11}`.
    fn apply_xy_edge(&mut self, qa: usize, qb: usize, beta: f64) -> Result<()> {
        if qa == qb || qa >= self.num_qubits || qb >= self.num_qubits {
            return Err(Error::Config(format!("invalid XY edge ({qa},{qb})")));
        }
        let (s, c) = beta.sin_cos();
        let ma = 1usize << qa;
        let mb = 1usize << qb;
        for b in 0..self.amps.len() {
            // visit each {01,10} pair once, from the bit_a=1,bit_b=0 side
            if b & ma != 0 && b & mb == 0 {
                let partner = b ^ ma ^ mb;
                let (a10, a01) = (self.amps[b], self.amps[partner]);
                self.amps[b] = c * a10 - Complex64::i() * s * a01;
                self.amps[partner] = -Complex64::i() * s * a10 + c * a01;
            }
        }
        Ok(())
    }

    /// `<Z_q>` over the register.
    pub fn expectation_z(&self, q: usize) -> f64 {
        let mask = 1usize << q;
        let mut e = 0.0;
        for (b, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            e += if b & mask == 0 { p } else { -p };
        }
        e
    }

    /// `<Z_i Z_j>` over the register.
    pub fn expectation_zz(&self, qi: usize, qj: usize) -> f64 {
        let mi = 1usize << qi;
        let mj = 1usize << qj;
        let mut e = 0.0;
        for (b, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            let same = (b & mi == 0) == (b & mj == 0);
            e += if same { p } else { -p };
        }
        e
    }

    /// `<H_C> = Σ_b |amp_b|^2 E_b`, the QAOA objective `F_p`.
    pub fn expectation_energy(&self, cost: &DiagonalCost) -> f64 {
        debug_assert_eq!(cost.num_qubits(), self.num_qubits);
        self.amps
            .iter()
            .zip(cost.energies.iter())
            .map(|(a, &e)| a.norm_sqr() * e)
            .sum()
    }

    /// Probability mass of states where every listed block holds exactly one
    /// set bit.
    pub fn onehot_block_mass(&self, blocks: &[Vec<usize>]) -> f64 {
        let masks: Vec<usize> = blocks
            .iter()
            .map(|block| block.iter().fold(0usize, |m, &q| m | (1 << q)))
            .collect();
        let mut mass = 0.0;
        for (b, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            if masks.iter().all(|&m| (b & m).count_ones() == 1) {
                mass += p;
            }
        }
        mass
    }

    /// Draw `shots` basis states i.i.d. from `|amp|^2`.
    pub fn sample(&self, shots: usize, rng: &mut impl Rng) -> Vec<usize> {
        let mut cumulative = Vec::with_capacity(self.amps.len());
        let mut acc = 0.0f64;
        for a in &self.amps {
            acc += a.norm_sqr();
            cumulative.push(acc);
        }
        let total = acc;
        (0..shots)
            .map(|_| {
                let u: f64 = rng.gen::<f64>() * total;
                cumulative.partition_point(|&c| c <= u).min(self.amps.len() - 1)
            })
            .collect()
    }

    /// Debug dump of the raw amplitudes; refused above 10 qubits.
    pub fn dump_json(&self) -> Result<String> {
        if self.num_qubits > 10 {
            return Err(Error::TooLarge { size: self.num_qubits, cap: 10 });
        }
        let amps: Vec<[f64; 2]> = self.amps.iter().map(|a| [a.re, a.im]).collect();
        Ok(serde_json::json!({ "num_qubits": self.num_qubits, "amplitudes": amps }).to_string())
    }
}

/// Render a basis index with qubit 0 leftmost.
pub fn render_bits(b: usize, n: usize) -> String {
    (0..n).map(|q| if b & (1 << q) != 0 { '1' } else { '0' }).collect()
}
