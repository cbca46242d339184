//! QUBO and Ising representations and the elimination algebra.
//!
//! A QUBO minimizes `x^T Q x + q^T x + c` over bits `x_i ∈ {0,1}`; the
//! equivalent Ising form minimizes
//! `E(z) = const + Σ_i h_i z_i + Σ_{i<j} J_ij z_i z_j` over spins
//! `z_i ∈ {-1,+1}`, related by `x_i = (1 - z_i)/2`.
//!
//! [`IsingInstance`] keeps a sparse view over a set of *active* global
//! indices. Variable elimination ([`IsingInstance::fix_spin`],
//! [`IsingInstance::merge_pair`]) rewrites the instance on the remaining
//! spins and emits an [`Elimination`] entry; replaying a record backwards
//! ([`EliminationRecord::back_substitute`]) recovers a full assignment from a
//! solved core. Global indices are preserved through reductions, so the
//! record never needs index translation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Coefficients with magnitude at or below this are pruned from the sparse
/// maps after every update.
pub const PRUNE_EPS: f64 = 1e-12;

/// Sign of a spin value, encoded as `+1` / `-1`.
pub type Spin = i8;

fn norm_pair(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Quadratic unconstrained binary optimization instance.
///
/// `quadratic` keys are strictly ordered pairs `(i, j)` with `i < j`; stored
/// coefficients are never exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboInstance {
    num_vars: usize,
    quadratic: BTreeMap<(usize, usize), f64>,
    linear: Vec<f64>,
    offset: f64,
}

impl QuboInstance {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            quadratic: BTreeMap::new(),
            linear: vec![0.0; num_vars],
            offset: 0.0,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn linear(&self, i: usize) -> f64 {
        self.linear[i]
    }

    pub fn quadratic(&self, i: usize, j: usize) -> f64 {
        self.quadratic.get(&norm_pair(i, j)).copied().unwrap_or(0.0)
    }

    pub fn quadratic_terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.quadratic.iter().map(|(&(i, j), &c)| (i, j, c))
    }

    pub fn add_offset(&mut self, c: f64) {
        self.offset += c;
    }

    pub fn add_linear(&mut self, i: usize, c: f64) {
        assert!(i < self.num_vars, "linear index {i} out of range");
        self.linear[i] += c;
    }

    /// Accumulate a quadratic coefficient; `i != j` (squares fold into the
    /// linear part because `x^2 = x`).
    pub fn add_quadratic(&mut self, i: usize, j: usize, c: f64) {
        assert!(i != j, "quadratic term requires distinct indices");
        assert!(i < self.num_vars && j < self.num_vars);
        let key = norm_pair(i, j);
        let entry = self.quadratic.entry(key).or_insert(0.0);
        *entry += c;
        if entry.abs() <= PRUNE_EPS {
            self.quadratic.remove(&key);
        }
    }

    /// Evaluate `x^T Q x + q^T x + c` for a bitstring (one entry per
    /// variable, values 0/1).
    pub fn energy(&self, bits: &[u8]) -> f64 {
        assert_eq!(bits.len(), self.num_vars);
        let mut e = self.offset;
        for (i, &b) in bits.iter().enumerate() {
            if b != 0 {
                e += self.linear[i];
            }
        }
        for (&(i, j), &c) in &self.quadratic {
            if bits[i] != 0 && bits[j] != 0 {
                e += c;
            }
        }
        e
    }
}

/// A complete or partial assignment of spins to global indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinAssignment {
    values: BTreeMap<usize, Spin>,
}

impl SpinAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, Spin)>) -> Self {
        let mut a = Self::new();
        for (i, s) in pairs {
            a.set(i, s);
        }
        a
    }

    pub fn get(&self, index: usize) -> Option<Spin> {
        self.values.get(&index).copied()
    }

    pub fn set(&mut self, index: usize, sign: Spin) {
        debug_assert!(sign == 1 || sign == -1);
        self.values.insert(index, sign);
    }

    pub fn contains(&self, index: usize) -> bool {
        self.values.contains_key(&index)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Spin)> + '_ {
        self.values.iter().map(|(&i, &s)| (i, s))
    }
}

/// One recorded elimination: either a spin fixed to a constant or a spin
/// merged into a kept partner via `z_removed = sign * z_kept`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Elimination {
    Fix { index: usize, sign: Spin },
    Merge { keep: usize, removed: usize, sign: Spin },
}

impl Elimination {
    /// The global index this entry eliminates.
    pub fn removed_index(&self) -> usize {
        match *self {
            Elimination::Fix { index, .. } => index,
            Elimination::Merge { removed, .. } => removed,
        }
    }
}

/// Ordered log of eliminations, appended in the order they are applied.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EliminationRecord {
    entries: Vec<Elimination>,
}

impl EliminationRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, e: Elimination) {
        debug_assert!(
            !self.entries.iter().any(|p| p.removed_index() == e.removed_index()),
            "index {} eliminated twice",
            e.removed_index()
        );
        self.entries.push(e);
    }

    pub fn extend(&mut self, entries: impl IntoIterator<Item = Elimination>) {
        for e in entries {
            self.push(e);
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Elimination] {
        &self.entries
    }

    /// Recover values for every recorded index from a solved core.
    ///
    /// Entries are replayed in reverse application order, so each merge finds
    /// its kept spin already valued (by the core or by a later-round entry).
    pub fn back_substitute(&self, core: &SpinAssignment) -> Result<SpinAssignment> {
        let mut out = core.clone();
        for e in self.entries.iter().rev() {
            match *e {
                Elimination::Fix { index, sign } => out.set(index, sign),
                Elimination::Merge { keep, removed, sign } => {
                    let base = out.get(keep).ok_or(Error::InconsistentRecord { index: keep })?;
                    out.set(removed, sign * base);
                }
            }
        }
        Ok(out)
    }
}

/// Sparse Ising instance over an active set of global indices.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingInstance {
    active: BTreeSet<usize>,
    couplings: BTreeMap<(usize, usize), f64>,
    fields: BTreeMap<usize, f64>,
    offset: f64,
}

impl Default for IsingInstance {
    fn default() -> Self {
        Self::empty()
    }
}

impl IsingInstance {
    pub fn empty() -> Self {
        Self {
            active: BTreeSet::new(),
            couplings: BTreeMap::new(),
            fields: BTreeMap::new(),
            offset: 0.0,
        }
    }

    pub fn with_active(indices: impl IntoIterator<Item = usize>) -> Self {
        Self {
            active: indices.into_iter().collect(),
            ..Self::empty()
        }
    }

    pub fn num_active(&self) -> usize {
        self.active.len()
    }

    pub fn active(&self) -> &BTreeSet<usize> {
        &self.active
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active.contains(&i)
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn add_offset(&mut self, c: f64) {
        self.offset += c;
    }

    pub fn field(&self, i: usize) -> f64 {
        self.fields.get(&i).copied().unwrap_or(0.0)
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings.get(&norm_pair(i, j)).copied().unwrap_or(0.0)
    }

    pub fn fields(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.fields.iter().map(|(&i, &h)| (i, h))
    }

    pub fn couplings(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.couplings.iter().map(|(&(i, j), &c)| (i, j, c))
    }

    pub fn num_terms(&self) -> usize {
        self.fields.len() + self.couplings.len()
    }

    /// Coupled neighbors of `i` with their coupling strengths.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.couplings.iter().filter_map(move |(&(a, b), &c)| {
            if a == i {
                Some((b, c))
            } else if b == i {
                Some((a, c))
            } else {
                None
            }
        })
    }

    pub fn add_field(&mut self, i: usize, h: f64) {
        assert!(self.active.contains(&i), "field on inactive index {i}");
        let entry = self.fields.entry(i).or_insert(0.0);
        *entry += h;
        if entry.abs() <= PRUNE_EPS {
            self.fields.remove(&i);
        }
    }

    pub fn add_coupling(&mut self, i: usize, j: usize, c: f64) {
        assert!(i != j, "coupling requires distinct indices");
        assert!(
            self.active.contains(&i) && self.active.contains(&j),
            "coupling on inactive pair ({i},{j})"
        );
        let key = norm_pair(i, j);
        let entry = self.couplings.entry(key).or_insert(0.0);
        *entry += c;
        if entry.abs() <= PRUNE_EPS {
            self.couplings.remove(&key);
        }
    }

    /// `E(z) = const + Σ h_i z_i + Σ_{i<j} J_ij z_i z_j` over the active set.
    pub fn energy(&self, z: &SpinAssignment) -> Result<f64> {
        let mut e = self.offset;
        for (&i, &h) in &self.fields {
            let s = z.get(i).ok_or(Error::IncompleteAssignment { index: i })? as f64;
            e += h * s;
        }
        for (&(i, j), &c) in &self.couplings {
            let si = z.get(i).ok_or(Error::IncompleteAssignment { index: i })? as f64;
            let sj = z.get(j).ok_or(Error::IncompleteAssignment { index: j })? as f64;
            e += c * si * sj;
        }
        Ok(e)
    }

    /// Fix `z_k = sign` and reduce onto the remaining spins.
    pub fn fix_spin(&self, k: usize, sign: Spin) -> Result<(IsingInstance, Elimination)> {
        if !self.active.contains(&k) {
            return Err(Error::InvalidIndex { index: k });
        }
        let s = sign as f64;
        let mut out = self.clone();
        out.offset += out.fields.remove(&k).unwrap_or(0.0) * s;
        let touching: Vec<((usize, usize), f64)> = out
            .couplings
            .range((k, 0)..=(k, usize::MAX))
            .map(|(&p, &c)| (p, c))
            .chain(
                out.couplings
                    .iter()
                    .filter(|(&(a, b), _)| b == k && a != k)
                    .map(|(&p, &c)| (p, c)),
            )
            .collect();
        for ((a, b), c) in touching {
            out.couplings.remove(&(a, b));
            let other = if a == k { b } else { a };
            out.add_field(other, c * s);
        }
        out.active.remove(&k);
        Ok((out, Elimination::Fix { index: k, sign }))
    }

    /// Impose `z_remove = sign * z_keep`, eliminate `remove`, and rewire its
    /// field and couplings onto `keep` (using `z^2 = 1`).
    pub fn merge_pair(
        &self,
        keep: usize,
        remove: usize,
        sign: Spin,
    ) -> Result<(IsingInstance, Elimination)> {
        if keep == remove || !self.active.contains(&keep) || !self.active.contains(&remove) {
            return Err(Error::InvalidMerge { keep, remove });
        }
        let s = sign as f64;
        let mut out = self.clone();
        if let Some(c) = out.couplings.remove(&norm_pair(keep, remove)) {
            out.offset += c * s;
        }
        if let Some(h) = out.fields.remove(&remove) {
            out.add_field(keep, s * h);
        }
        let touching: Vec<((usize, usize), f64)> = out
            .couplings
            .iter()
            .filter(|(&(a, b), _)| a == remove || b == remove)
            .map(|(&p, &c)| (p, c))
            .collect();
        for ((a, b), c) in touching {
            out.couplings.remove(&(a, b));
            let other = if a == remove { b } else { a };
            out.add_coupling(keep, other, s * c);
        }
        out.active.remove(&remove);
        Ok((out, Elimination::Merge { keep, removed: remove, sign }))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let fields: Vec<(usize, f64)> = self.fields.iter().map(|(&i, &h)| (i, h)).collect();
        let couplings: Vec<(usize, usize, f64)> =
            self.couplings.iter().map(|(&(i, j), &c)| (i, j, c)).collect();
        serde_json::json!({
            "offset": self.offset,
            "fields": fields,
            "couplings": couplings,
        })
    }

    /// Parse the `{offset, fields, couplings}` document. The active set is
    /// the set of indices appearing in any term.
    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            offset: f64,
            fields: Vec<(usize, f64)>,
            couplings: Vec<(usize, usize, f64)>,
        }
        let doc: Doc = serde_json::from_value(v.clone())?;
        let mut active = BTreeSet::new();
        for &(i, _) in &doc.fields {
            active.insert(i);
        }
        for &(i, j, _) in &doc.couplings {
            if i == j {
                return Err(Error::Json(format!("self-coupling on index {i}")));
            }
            active.insert(i);
            active.insert(j);
        }
        let mut out = IsingInstance::with_active(active);
        out.offset = doc.offset;
        for (i, h) in doc.fields {
            out.add_field(i, h);
        }
        for (i, j, c) in doc.couplings {
            out.add_coupling(i, j, c);
        }
        Ok(out)
    }
}

/// Map a QUBO to the equivalent Ising instance via `x_i = (1 - z_i)/2`.
/// Every QUBO variable becomes an active spin, coefficients of magnitude
/// `<= PRUNE_EPS` are dropped.
pub fn qubo_to_ising(q: &QuboInstance) -> IsingInstance {
    let mut out = IsingInstance::with_active(0..q.num_vars());
    out.offset = q.offset();
    for i in 0..q.num_vars() {
        let c = q.linear(i);
        if c != 0.0 {
            out.offset += c / 2.0;
            out.add_field(i, -c / 2.0);
        }
    }
    for (i, j, c) in q.quadratic_terms() {
        out.offset += c / 4.0;
        out.add_field(i, -c / 4.0);
        out.add_field(j, -c / 4.0);
        out.add_coupling(i, j, c / 4.0);
    }
    out
}

/// Inverse of [`qubo_to_ising`]. The QUBO is sized to the largest active
/// index plus one; inactive slots in between get zero coefficients.
pub fn ising_to_qubo(ising: &IsingInstance) -> QuboInstance {
    let num_vars = ising.active().iter().next_back().map_or(0, |&m| m + 1);
    let mut q = QuboInstance::new(num_vars);
    q.add_offset(ising.offset());
    for (i, h) in ising.fields() {
        q.add_offset(h);
        q.add_linear(i, -2.0 * h);
    }
    for (i, j, c) in ising.couplings() {
        q.add_offset(c);
        q.add_linear(i, -2.0 * c);
        q.add_linear(j, -2.0 * c);
        q.add_quadratic(i, j, 4.0 * c);
    }
    q
}

/// Spin image of a bitstring under `x_i = (1 - z_i)/2`: bit 1 maps to spin
/// -1, bit 0 to spin +1.
pub fn spins_from_bits(bits: &[u8]) -> SpinAssignment {
    SpinAssignment::from_pairs(
        bits.iter().enumerate().map(|(i, &b)| (i, if b != 0 { -1 } else { 1 })),
    )
}
