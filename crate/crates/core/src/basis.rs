//! Excitation-number restricted bases for systems of periodic chains.
//!
//! A configuration stores, for every chain, the set of occupied sites as a
//! bit mask (site `j` is bit `j`). Per-chain configuration lists are ordered
//! by excitation count and then lexicographically by the occupied-site
//! tuple; the product over chains is taken with the first chain most
//! significant. This order is part of the on-disk contract.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::operators::GateBlock;

/// Occupied sites of one chain.
pub type Mask = u64;

/// Rings longer than this do not fit in a [`Mask`].
pub const MAX_SITES: usize = 64;

/// Default refusal threshold for [`enumerate_basis`].
pub const DEFAULT_CAPACITY: usize = 1 << 24;

#[derive(Debug, Error)]
pub enum BasisError {
    #[error("ring length {0} outside [3, {MAX_SITES}]")]
    RingLength(usize),
    #[error("unknown chain `{0}`")]
    UnknownChain(String),
    #[error("duplicate chain id `{0}`")]
    DuplicateChain(String),
    #[error("qubit {qubit} already owns a {role:?} chain")]
    DuplicateRail { qubit: usize, role: ChainRole },
    #[error("sector spec has {got} constraints for {expected} chains")]
    SpecArity { expected: usize, got: usize },
    #[error("constraint k = {k} exceeds ring length {n}")]
    ConstraintRange { k: usize, n: usize },
    #[error("basis dimension {dim} exceeds capacity {cap}")]
    Capacity { dim: u128, cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainRole {
    Rail0,
    Rail1,
    Ancilla,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub id: String,
    pub role: ChainRole,
    /// Owning dual-rail qubit; `None` for ancillas.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubit: Option<usize>,
}

/// A set of equal-length periodic chains and the gate blocks placed on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainLayout {
    pub n: usize,
    pub chains: Vec<Chain>,
    #[serde(default)]
    pub blocks: Vec<GateBlock>,
}

impl ChainLayout {
    pub fn new(n: usize) -> Result<Self, BasisError> {
        if !(3..=MAX_SITES).contains(&n) {
            return Err(BasisError::RingLength(n));
        }
        Ok(Self { n, chains: Vec::new(), blocks: Vec::new() })
    }

    pub fn with_chain(
        mut self,
        id: impl Into<String>,
        role: ChainRole,
        qubit: Option<usize>,
    ) -> Result<Self, BasisError> {
        let id = id.into();
        if self.chains.iter().any(|c| c.id == id) {
            return Err(BasisError::DuplicateChain(id));
        }
        if let (Some(q), ChainRole::Rail0 | ChainRole::Rail1) = (qubit, role) {
            if self.chains.iter().any(|c| c.qubit == Some(q) && c.role == role) {
                return Err(BasisError::DuplicateRail { qubit: q, role });
            }
        }
        self.chains.push(Chain { id, role, qubit });
        Ok(self)
    }

    pub fn with_block(mut self, block: GateBlock) -> Self {
        self.blocks.push(block);
        self
    }

    /// Layout with `qubits` dual-rail pairs named `q{i}.r0` / `q{i}.r1`.
    pub fn dual_rail(n: usize, qubits: usize) -> Result<Self, BasisError> {
        let mut layout = Self::new(n)?;
        for q in 0..qubits {
            layout = layout
                .with_chain(rail_id(q, ChainRole::Rail0), ChainRole::Rail0, Some(q))?
                .with_chain(rail_id(q, ChainRole::Rail1), ChainRole::Rail1, Some(q))?;
        }
        Ok(layout)
    }

    pub fn chain_index(&self, id: &str) -> Result<usize, BasisError> {
        self.chains
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| BasisError::UnknownChain(id.to_string()))
    }

    /// Index of the chain with `role` belonging to `qubit`.
    pub fn rail(&self, qubit: usize, role: ChainRole) -> Option<usize> {
        self.chains.iter().position(|c| c.qubit == Some(qubit) && c.role == role)
    }

    pub fn qubits(&self) -> Vec<usize> {
        let mut qs: Vec<usize> = self.chains.iter().filter_map(|c| c.qubit).collect();
        qs.sort_unstable();
        qs.dedup();
        qs
    }

    pub fn ancillas(&self) -> Vec<usize> {
        (0..self.chains.len()).filter(|&c| self.chains[c].role == ChainRole::Ancilla).collect()
    }
}

/// Canonical chain id for a rail of a dual-rail qubit.
pub fn rail_id(qubit: usize, role: ChainRole) -> String {
    match role {
        ChainRole::Rail0 => format!("q{qubit}.r0"),
        ChainRole::Rail1 => format!("q{qubit}.r1"),
        ChainRole::Ancilla => format!("anc{qubit}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constraint {
    Exactly(usize),
    AtMost(usize),
}

impl Constraint {
    pub fn allows(self, k: usize) -> bool {
        match self {
            Constraint::Exactly(e) => k == e,
            Constraint::AtMost(m) => k <= m,
        }
    }

    fn max(self) -> usize {
        match self {
            Constraint::Exactly(k) | Constraint::AtMost(k) => k,
        }
    }

    fn counts(self) -> std::ops::RangeInclusive<usize> {
        match self {
            Constraint::Exactly(k) => k..=k,
            Constraint::AtMost(k) => 0..=k,
        }
    }
}

/// Fixed total excitation count over a group of chains (e.g. the two rails
/// of one dual-rail qubit).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointConstraint {
    pub chains: Vec<usize>,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorSpec {
    pub constraints: Vec<Constraint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub joint: Vec<JointConstraint>,
}

impl SectorSpec {
    pub fn new(constraints: Vec<Constraint>) -> Self {
        Self { constraints, joint: Vec::new() }
    }

    pub fn with_joint(mut self, chains: Vec<usize>, total: usize) -> Self {
        self.joint.push(JointConstraint { chains, total });
        self
    }

    /// Replace the constraint of one chain.
    pub fn with(mut self, chain: usize, c: Constraint) -> Self {
        self.constraints[chain] = c;
        self
    }
}

/// SHA-256 of a basis enumeration; identifies the space an operator or
/// state lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisHash(pub [u8; 32]);

impl BasisHash {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl std::fmt::Display for BasisHash {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex()[..16])
    }
}

/// Canonical JSON description of a basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisDescriptor {
    pub n: usize,
    pub chains: Vec<Chain>,
    pub spec: SectorSpec,
    pub dimension: usize,
    pub hash: String,
}

#[derive(Debug, Clone)]
pub struct SectorBasis {
    layout: ChainLayout,
    spec: SectorSpec,
    n_chains: usize,
    configs: Vec<Mask>,
    index: HashMap<Box<[Mask]>, u32>,
    hash: BasisHash,
}

/// All `k`-subsets of `0..n` as masks, lexicographic in the sorted site tuple.
fn subsets(n: usize, k: usize, out: &mut Vec<Mask>) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().fold(0, |m, &s| m | (1 << s)));
        // advance to the next combination
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if i == 0 {
                return;
            }
        }
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Dimension predicted by the per-chain constraints alone.
pub fn product_dimension(n: usize, spec: &SectorSpec) -> u128 {
    spec.constraints
        .iter()
        .map(|c| c.counts().map(|k| binomial(n, k)).sum::<u128>())
        .product()
}

pub fn enumerate_basis(layout: &ChainLayout, spec: &SectorSpec) -> Result<SectorBasis, BasisError> {
    enumerate_basis_with_capacity(layout, spec, DEFAULT_CAPACITY)
}

pub fn enumerate_basis_with_capacity(
    layout: &ChainLayout,
    spec: &SectorSpec,
    cap: usize,
) -> Result<SectorBasis, BasisError> {
    let n = layout.n;
    let nc = layout.chains.len();
    if spec.constraints.len() != nc {
        return Err(BasisError::SpecArity { expected: nc, got: spec.constraints.len() });
    }
    for c in &spec.constraints {
        if c.max() > n {
            return Err(BasisError::ConstraintRange { k: c.max(), n });
        }
    }
    for j in &spec.joint {
        if let Some(&bad) = j.chains.iter().find(|&&c| c >= nc) {
            return Err(BasisError::UnknownChain(format!("#{bad}")));
        }
    }
    let product = product_dimension(n, spec);
    // joint constraints only prune; a product far beyond the cap is refused up front
    let guard = if spec.joint.is_empty() { cap as u128 } else { (cap as u128) * 64 };
    if product > guard {
        return Err(BasisError::Capacity { dim: product, cap });
    }

    let per_chain: Vec<Vec<Mask>> = spec
        .constraints
        .iter()
        .map(|c| {
            let mut v = Vec::new();
            for k in c.counts() {
                subsets(n, k, &mut v);
            }
            v
        })
        .collect();

    let mut configs = Vec::with_capacity(product.min(cap as u128) as usize * nc);
    let mut dim = 0usize;
    if per_chain.iter().all(|v| !v.is_empty()) {
        let mut odo = vec![0usize; nc];
        let mut current = vec![0 as Mask; nc];
        'outer: loop {
            for c in 0..nc {
                current[c] = per_chain[c][odo[c]];
            }
            let ok = spec.joint.iter().all(|j| {
                j.chains.iter().map(|&c| current[c].count_ones() as usize).sum::<usize>() == j.total
            });
            if ok {
                dim += 1;
                if dim > cap {
                    return Err(BasisError::Capacity { dim: dim as u128, cap });
                }
                configs.extend_from_slice(&current);
            }
            let mut c = nc;
            loop {
                if c == 0 {
                    break 'outer;
                }
                c -= 1;
                odo[c] += 1;
                if odo[c] < per_chain[c].len() {
                    break;
                }
                odo[c] = 0;
            }
            if nc == 0 {
                break;
            }
        }
    }

    let mut index = HashMap::with_capacity(dim);
    if nc > 0 {
        for (i, cfg) in configs.chunks_exact(nc).enumerate() {
            index.insert(cfg.to_vec().into_boxed_slice(), i as u32);
        }
    } else {
        index.insert(Vec::new().into_boxed_slice(), 0);
    }

    let mut layout = layout.clone();
    layout.blocks.clear();
    let hash = hash_enumeration(&layout, spec, &configs);
    Ok(SectorBasis { layout, spec: spec.clone(), n_chains: nc, configs, index, hash })
}

fn hash_enumeration(layout: &ChainLayout, spec: &SectorSpec, configs: &[Mask]) -> BasisHash {
    let mut h = Sha256::new();
    h.update(b"xyqc-basis-v1");
    h.update((layout.n as u64).to_le_bytes());
    let header = serde_json::to_vec(&(&layout.chains, spec)).expect("serializable");
    h.update((header.len() as u64).to_le_bytes());
    h.update(&header);
    for m in configs {
        h.update(m.to_le_bytes());
    }
    BasisHash(h.finalize().into())
}

impl SectorBasis {
    pub fn dim(&self) -> usize {
        if self.n_chains == 0 {
            1
        } else {
            self.configs.len() / self.n_chains
        }
    }

    pub fn n(&self) -> usize {
        self.layout.n
    }

    pub fn layout(&self) -> &ChainLayout {
        &self.layout
    }

    pub fn spec(&self) -> &SectorSpec {
        &self.spec
    }

    pub fn n_chains(&self) -> usize {
        self.n_chains
    }

    pub fn hash(&self) -> BasisHash {
        self.hash
    }

    pub fn chain_index(&self, id: &str) -> Result<usize, BasisError> {
        self.layout.chain_index(id)
    }

    /// Occupation masks of state `i`, one per chain.
    pub fn config(&self, i: usize) -> &[Mask] {
        &self.configs[i * self.n_chains..(i + 1) * self.n_chains]
    }

    pub fn mask(&self, i: usize, chain: usize) -> Mask {
        self.configs[i * self.n_chains + chain]
    }

    pub fn count(&self, i: usize, chain: usize) -> usize {
        self.mask(i, chain).count_ones() as usize
    }

    pub fn lookup(&self, config: &[Mask]) -> Option<usize> {
        self.index.get(config).map(|&i| i as usize)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[Mask])> + '_ {
        (0..self.dim()).map(move |i| (i, self.config(i)))
    }

    /// Whether the spec admits `k` excitations on `chain`.
    pub fn allows(&self, chain: usize, k: usize) -> bool {
        self.spec.constraints[chain].allows(k)
    }

    /// Index of the configuration obtained by shifting every occupied site
    /// of every chain by +1 mod N.
    pub fn translate_config(&self, i: usize) -> usize {
        let n = self.layout.n;
        let shifted: Vec<Mask> = self.config(i).iter().map(|&m| rotate(m, n, 1)).collect();
        self.lookup(&shifted).expect("translation preserves excitation counts")
    }

    pub fn translation_permutation(&self) -> Vec<usize> {
        (0..self.dim()).map(|i| self.translate_config(i)).collect()
    }

    pub fn descriptor(&self) -> BasisDescriptor {
        BasisDescriptor {
            n: self.layout.n,
            chains: self.layout.chains.clone(),
            spec: self.spec.clone(),
            dimension: self.dim(),
            hash: self.hash.to_hex(),
        }
    }

    pub fn descriptor_json(&self) -> String {
        serde_json::to_string_pretty(&self.descriptor()).expect("serializable")
    }
}

/// Rotate a ring mask by `by` sites towards higher indices.
pub fn rotate(m: Mask, n: usize, by: usize) -> Mask {
    let by = by % n;
    if by == 0 {
        return m;
    }
    let full = if n == 64 { Mask::MAX } else { (1 << n) - 1 };
    ((m << by) | (m >> (n - by))) & full
}

/// Occupied sites of a mask in increasing order.
pub fn sites(m: Mask) -> impl Iterator<Item = usize> {
    let mut m = m;
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let s = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(s)
        }
    })
}
