//! Momentum eigenstates, wrapped Gaussian packets, dual-rail logical states
//! and number-operator readout.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{sites, BasisError, BasisHash, ChainRole, Mask, SectorBasis};
use crate::sparse::{SparseOperator, C64};

/// Added image weight below which the wrapped sums stop.
pub const IMAGE_TOL: f64 = 1e-16;

/// Resultant length below which a ring distribution has no center.
pub const RESULTANT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum StateError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("basis mismatch: state on {expected}, got {got}")]
    BasisMismatch { expected: BasisHash, got: BasisHash },
    #[error("sector cannot host this state: {0}")]
    Sector(String),
    #[error("zero-norm state")]
    ZeroNorm,
    #[error("chain `{0}` carries no excitation weight")]
    NoWeight(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    basis_hash: BasisHash,
    amps: Vec<C64>,
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

impl StateVector {
    /// Normalizes `amps`.
    pub fn new(basis_hash: BasisHash, mut amps: Vec<C64>) -> Result<Self, StateError> {
        let n = norm(&amps);
        if n == 0.0 || !n.is_finite() {
            return Err(StateError::ZeroNorm);
        }
        amps.iter_mut().for_each(|a| *a /= n);
        Ok(Self { basis_hash, amps })
    }

    /// Keeps `amps` as given; used for propagated and projected vectors.
    pub fn from_raw(basis_hash: BasisHash, amps: Vec<C64>) -> Self {
        Self { basis_hash, amps }
    }

    pub fn basis_state(basis: &SectorBasis, i: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
        amps[i] = C64::new(1.0, 0.0);
        Self { basis_hash: basis.hash(), amps }
    }

    pub fn basis_hash(&self) -> BasisHash {
        self.basis_hash
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amps)
    }

    pub fn normalized(&self) -> Result<Self, StateError> {
        Self::new(self.basis_hash, self.amps.clone())
    }

    fn check(&self, other: &StateVector) -> Result<(), StateError> {
        if self.basis_hash != other.basis_hash {
            return Err(StateError::BasisMismatch { expected: self.basis_hash, got: other.basis_hash });
        }
        Ok(())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64, StateError> {
        self.check(other)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn fidelity(&self, other: &StateVector) -> Result<f64, StateError> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// `‖self − other‖`.
    pub fn distance(&self, other: &StateVector) -> Result<f64, StateError> {
        self.check(other)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt())
    }

    pub fn apply(&self, op: &SparseOperator) -> Result<StateVector, StateError> {
        if op.basis_hash() != self.basis_hash {
            return Err(StateError::BasisMismatch { expected: self.basis_hash, got: op.basis_hash() });
        }
        Ok(Self::from_raw(self.basis_hash, op.matvec(&self.amps)))
    }

    pub fn expectation(&self, op: &SparseOperator) -> Result<f64, StateError> {
        Ok(self.inner(&self.apply(op)?)?.re)
    }

    /// Linear combination `Σ c_k ψ_k`, normalized.
    pub fn superpose(terms: &[(C64, &StateVector)]) -> Result<StateVector, StateError> {
        let first = terms.first().ok_or(StateError::ZeroNorm)?.1;
        let mut amps = vec![C64::new(0.0, 0.0); first.dim()];
        for (c, s) in terms {
            first.check(s)?;
            for (a, b) in amps.iter_mut().zip(&s.amps) {
                *a += c * b;
            }
        }
        Self::new(first.basis_hash, amps)
    }

    pub fn to_json(&self) -> String {
        let doc = StateDocument {
            basis_hash: self.basis_hash.to_hex(),
            amplitudes: self.amps.iter().map(|a| [a.re, a.im]).collect(),
        };
        serde_json::to_string(&doc).expect("serializable")
    }

    pub fn from_json(s: &str, basis: &SectorBasis) -> Result<Self, StateError> {
        let doc: StateDocument = serde_json::from_str(s)?;
        if doc.basis_hash != basis.hash().to_hex() {
            return Err(StateError::Sector(format!("state file belongs to basis {}", doc.basis_hash)));
        }
        if doc.amplitudes.len() != basis.dim() {
            return Err(StateError::Sector("amplitude count differs from basis dimension".into()));
        }
        Self::new(basis.hash(), doc.amplitudes.into_iter().map(|[re, im]| C64::new(re, im)).collect())
    }

    /// Per-chain marginal rows `(chain, site, probability, phase)`; the
    /// phase is that of the largest amplitude with an excitation there.
    pub fn write_csv(&self, basis: &SectorBasis, w: impl Write) -> Result<(), StateError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["chain", "site", "probability", "phase"]).map_err(csv_io)?;
        for (c, chain) in basis.layout().chains.iter().enumerate() {
            let mut prob = vec![0.0; basis.n()];
            let mut best = vec![C64::new(0.0, 0.0); basis.n()];
            for (i, cfg) in basis.iter() {
                for s in sites(cfg[c]) {
                    prob[s] += self.amps[i].norm_sqr();
                    if self.amps[i].norm() > best[s].norm() {
                        best[s] = self.amps[i];
                    }
                }
            }
            for s in 0..basis.n() {
                out.write_record([
                    chain.id.clone(),
                    s.to_string(),
                    format!("{:.12e}", prob[s]),
                    format!("{:.12}", best[s].arg()),
                ])
                .map_err(csv_io)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> StateError {
    StateError::Io(std::io::Error::other(e))
}

#[derive(Serialize, Deserialize)]
struct StateDocument {
    basis_hash: String,
    amplitudes: Vec<[f64; 2]>,
}

/// One factor of a product state: a group of chains and its amplitudes.
#[derive(Debug, Clone)]
pub struct Factor {
    pub chains: Vec<usize>,
    pub terms: Vec<(Vec<Mask>, C64)>,
}

impl Factor {
    /// A single chain in the given superposition of masks.
    pub fn chain(chain: usize, terms: Vec<(Mask, C64)>) -> Self {
        Self { chains: vec![chain], terms: terms.into_iter().map(|(m, a)| (vec![m], a)).collect() }
    }

    /// Single-excitation amplitudes `amps[x]` on one chain.
    pub fn single_particle(chain: usize, amps: &[C64]) -> Self {
        Self::chain(
            chain,
            amps.iter().enumerate().filter(|(_, a)| a.norm() > 0.0).map(|(x, &a)| (1 << x, a)).collect(),
        )
    }
}

/// Product of factors; chains not mentioned are in their vacuum.
pub fn product_state(basis: &SectorBasis, factors: &[Factor]) -> Result<StateVector, StateError> {
    let nc = basis.n_chains();
    let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
    let mut cfg = vec![0 as Mask; nc];
    let mut lost = 0.0;
    fn rec(
        basis: &SectorBasis,
        factors: &[Factor],
        k: usize,
        cfg: &mut Vec<Mask>,
        amp: C64,
        amps: &mut [C64],
        lost: &mut f64,
    ) {
        if k == factors.len() {
            match basis.lookup(cfg) {
                Some(i) => amps[i] += amp,
                None => *lost += amp.norm_sqr(),
            }
            return;
        }
        let f = &factors[k];
        for (masks, a) in &f.terms {
            for (&c, &m) in f.chains.iter().zip(masks) {
                cfg[c] = m;
            }
            rec(basis, factors, k + 1, cfg, amp * a, amps, lost);
        }
        for &c in &f.chains {
            cfg[c] = 0;
        }
    }
    rec(basis, factors, 0, &mut cfg, C64::new(1.0, 0.0), &mut amps, &mut lost);
    if lost > 1e-24 {
        return Err(StateError::Sector(format!("product state leaves the sector (weight {lost:.3e})")));
    }
    StateVector::new(basis.hash(), amps)
}

/// `e^{2πipx/N}/√N`.
pub fn momentum_amplitudes(n: usize, p: i64) -> Vec<C64> {
    let s = 1.0 / (n as f64).sqrt();
    (0..n).map(|x| C64::from_polar(s, 2.0 * PI * (p as f64) * x as f64 / n as f64)).collect()
}

fn require_single(basis: &SectorBasis, c: usize) -> Result<(), StateError> {
    if !basis.allows(c, 1) {
        return Err(StateError::Sector(format!("chain #{c} cannot hold one excitation")));
    }
    Ok(())
}

/// `|p̃⟩` on one chain, every other chain in vacuum.
pub fn momentum_eigenstate(basis: &SectorBasis, chain_id: &str, p: i64) -> Result<StateVector, StateError> {
    let c = basis.chain_index(chain_id)?;
    require_single(basis, c)?;
    let n = basis.n();
    if p < 0 || p as usize >= n {
        return Err(StateError::Parameter(format!("momentum {p} outside [0, {n})")));
    }
    product_state(basis, &[Factor::single_particle(c, &momentum_amplitudes(n, p))])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketParams {
    /// Center site, mod N.
    pub x0: f64,
    /// Carrier momentum index.
    pub p0: i64,
    /// Position width in sites.
    pub dx: f64,
}

impl PacketParams {
    /// `p₀ = N/4` and `Δx = ⌈N^{1/3}⌉`.
    pub fn default_for(n: usize, x0: f64) -> Self {
        Self { x0, p0: (n / 4) as i64, dx: default_width(n) }
    }

    /// `Δp = N/(2πΔx)`.
    pub fn dp(&self, n: usize) -> f64 {
        n as f64 / (2.0 * PI * self.dx)
    }

    /// `v_g = −2 sin(2πp₀/N)`.
    pub fn group_velocity(&self, n: usize) -> f64 {
        -2.0 * (2.0 * PI * self.p0 as f64 / n as f64).sin()
    }
}

/// `⌈N^{1/3}⌉`, guarded against the cube root landing a hair above an integer.
pub fn default_width(n: usize) -> f64 {
    let r = (n as f64).cbrt();
    let k = r.round();
    if (r - k).abs() < 1e-9 {
        k
    } else {
        r.ceil()
    }
}

/// Σ over images `α` of `f(α)` until the added weight drops below the
/// tolerance on both sides.
fn image_sum(f: impl Fn(f64) -> f64) -> f64 {
    let mut s = f(0.0);
    for a in 1.. {
        let add = f(a as f64) + f(-(a as f64));
        s += add;
        if add * add < IMAGE_TOL * IMAGE_TOL.max(s * s) && a > 1 {
            break;
        }
    }
    s
}

/// Wrapped Gaussian amplitudes in the position representation.
pub fn gaussian_amplitudes(n: usize, params: &PacketParams) -> Vec<C64> {
    let nf = n as f64;
    let amps: Vec<C64> = (0..n)
        .map(|x| {
            let xf = x as f64;
            let env = image_sum(|a| (-(a * nf + xf - params.x0).powi(2) / (2.0 * params.dx * params.dx)).exp());
            C64::from_polar(env, 2.0 * PI * params.p0 as f64 * xf / nf)
        })
        .collect();
    let s = norm(&amps);
    amps.into_iter().map(|a| a / s).collect()
}

/// Coefficients `⟨p̃|G⟩` built in momentum space: wrapped Gaussians of
/// width Δp around p₀ with phase `e^{−2πi(p+αN−p₀)x₀/N}` per image.
pub fn gaussian_momentum_coefficients(n: usize, params: &PacketParams) -> Vec<C64> {
    let nf = n as f64;
    let dp = params.dp(n);
    let coeffs: Vec<C64> = (0..n)
        .map(|p| {
            let mut acc = C64::new(0.0, 0.0);
            let term = |a: f64| {
                let k = a * nf + p as f64 - params.p0 as f64;
                C64::from_polar((-(k * k) / (2.0 * dp * dp)).exp(), -2.0 * PI * k * params.x0 / nf)
            };
            acc += term(0.0);
            for a in 1.. {
                let add = term(a as f64) + term(-(a as f64));
                acc += add;
                if add.norm_sqr() < IMAGE_TOL * IMAGE_TOL.max(acc.norm_sqr()) && a > 1 {
                    break;
                }
            }
            acc
        })
        .collect();
    let s = norm(&coeffs);
    coeffs.into_iter().map(|c| c / s).collect()
}

/// Position amplitudes of the momentum-space construction.
pub fn gaussian_amplitudes_from_momentum(n: usize, params: &PacketParams) -> Vec<C64> {
    let coeffs = gaussian_momentum_coefficients(n, params);
    let mut amps = vec![C64::new(0.0, 0.0); n];
    for (p, c) in coeffs.iter().enumerate() {
        for (x, a) in momentum_amplitudes(n, p as i64).into_iter().enumerate() {
            amps[x] += c * a;
        }
    }
    amps
}

/// `|G⟩` on one chain, every other chain in vacuum.
pub fn gaussian_packet(basis: &SectorBasis, chain_id: &str, params: &PacketParams) -> Result<StateVector, StateError> {
    let c = basis.chain_index(chain_id)?;
    require_single(basis, c)?;
    if !(params.dx >= 1.0) {
        return Err(StateError::Parameter(format!("packet width {} below one site", params.dx)));
    }
    product_state(basis, &[Factor::single_particle(c, &gaussian_amplitudes(basis.n(), params))])
}

/// Per-qubit amplitudes `(c₀, c₁)` of `c₀|𝟎⟩ + c₁|𝟏⟩`.
pub type QubitAmplitudes = (C64, C64);

fn qubit_factor(basis: &SectorBasis, qubit: usize, amps: QubitAmplitudes, packet: &[C64]) -> Result<Factor, StateError> {
    let layout = basis.layout();
    let r0 = layout
        .rail(qubit, ChainRole::Rail0)
        .ok_or_else(|| StateError::Sector(format!("qubit {qubit} has no rail-0 chain")))?;
    let r1 = layout
        .rail(qubit, ChainRole::Rail1)
        .ok_or_else(|| StateError::Sector(format!("qubit {qubit} has no rail-1 chain")))?;
    let mut terms = Vec::new();
    for (x, &g) in packet.iter().enumerate() {
        if g.norm() == 0.0 {
            continue;
        }
        if amps.0.norm() > 0.0 {
            terms.push((vec![1 << x, 0], amps.0 * g));
        }
        if amps.1.norm() > 0.0 {
            terms.push((vec![0, 1 << x], amps.1 * g));
        }
    }
    Ok(Factor { chains: vec![r0, r1], terms })
}

/// Dual-rail product state: for each listed qubit `c₀|G⟩⊗|Ω⟩ + c₁|Ω⟩⊗|G⟩`
/// on its (rail 0, rail 1) pair; all other chains in vacuum.
pub fn logical_product(
    basis: &SectorBasis,
    qubits: &[(usize, QubitAmplitudes)],
    params: &PacketParams,
) -> Result<StateVector, StateError> {
    let packet = gaussian_amplitudes(basis.n(), params);
    let factors: Vec<Factor> =
        qubits.iter().map(|&(q, a)| qubit_factor(basis, q, a, &packet)).collect::<Result<_, _>>()?;
    product_state(basis, &factors)
}

/// `|𝟎⟩ = |G⟩⊗|Ω⟩` or `|𝟏⟩ = |Ω⟩⊗|G⟩` on one qubit.
pub fn logical_state(basis: &SectorBasis, qubit: usize, bit: u8, params: &PacketParams) -> Result<StateVector, StateError> {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let amps = match bit {
        0 => (one, zero),
        1 => (zero, one),
        _ => return Err(StateError::Parameter(format!("logical bit must be 0 or 1, got {bit}"))),
    };
    logical_product(basis, &[(qubit, amps)], params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketStats {
    /// Circular mean position; `None` when the distribution has no direction.
    pub center: Option<f64>,
    pub width: f64,
    pub weight: f64,
}

/// Circular statistics of a site distribution.
pub fn circular_stats(prob: &[f64]) -> PacketStats {
    let n = prob.len() as f64;
    let weight: f64 = prob.iter().sum();
    let z: C64 = prob.iter().enumerate().map(|(x, &w)| C64::from_polar(w, 2.0 * PI * x as f64 / n)).sum::<C64>() / weight;
    let r = z.norm().min(1.0);
    let center = (r >= RESULTANT_TOL).then(|| (z.arg() * n / (2.0 * PI)).rem_euclid(n));
    PacketStats { center, width: (2.0 * (1.0 - r)).sqrt() * n / (2.0 * PI), weight }
}

/// Excitation-position distribution of one chain.
pub fn site_distribution(state: &StateVector, basis: &SectorBasis, chain: usize) -> Vec<f64> {
    let mut prob = vec![0.0; basis.n()];
    for (i, cfg) in basis.iter() {
        let w = state.amps[i].norm_sqr();
        for s in sites(cfg[chain]) {
            prob[s] += w;
        }
    }
    prob
}

pub fn packet_center(state: &StateVector, basis: &SectorBasis, chain_id: &str) -> Result<PacketStats, StateError> {
    let c = basis.chain_index(chain_id)?;
    let prob = site_distribution(state, basis, c);
    if prob.iter().sum::<f64>() <= 1e-300 {
        return Err(StateError::NoWeight(chain_id.to_string()));
    }
    Ok(circular_stats(&prob))
}

/// Shortest signed arc from `a` to `b` on a ring of `n` sites.
pub fn ring_displacement(a: f64, b: f64, n: usize) -> f64 {
    let n = n as f64;
    let d = (b - a).rem_euclid(n);
    if d > n / 2.0 {
        d - n
    } else {
        d
    }
}

/// Ground-doublet projection of ancilla chain `anc`, applied to raw amplitudes.
pub fn project_doublet(basis: &SectorBasis, amps: &[C64], anc: usize) -> Vec<C64> {
    let n = basis.n() as f64;
    let mut sums: HashMap<Vec<Mask>, C64> = HashMap::new();
    for (i, cfg) in basis.iter() {
        if cfg[anc].count_ones() == 1 {
            let mut key = cfg.to_vec();
            key[anc] = 0;
            *sums.entry(key).or_default() += amps[i];
        }
    }
    basis
        .iter()
        .map(|(i, cfg)| match cfg[anc].count_ones() {
            0 => amps[i],
            1 => {
                let mut key = cfg.to_vec();
                key[anc] = 0;
                sums[&key] / n
            }
            _ => C64::new(0.0, 0.0),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitReadout {
    pub qubit: usize,
    pub p0: f64,
    pub p1: f64,
    pub p_leak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RailReadout {
    pub chain: String,
    pub stats: Option<PacketStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalReadout {
    pub qubits: Vec<QubitReadout>,
    pub rails: Vec<RailReadout>,
    /// Weight on the ancilla vacuum, per ancilla chain.
    pub ancilla_return: Vec<(String, f64)>,
}

/// Logical probabilities inside the valid subspace (one excitation per
/// qubit, every ancilla in its ground doublet); the rest is leakage.
pub fn readout(state: &StateVector, basis: &SectorBasis) -> Result<LogicalReadout, StateError> {
    if state.basis_hash != basis.hash() {
        return Err(StateError::BasisMismatch { expected: basis.hash(), got: state.basis_hash });
    }
    let layout = basis.layout();
    let total = state.norm().powi(2);
    let mut valid = state.amps.clone();
    for a in layout.ancillas() {
        if basis.allows(a, 0) && basis.allows(a, 1) {
            valid = project_doublet(basis, &valid, a);
        } else {
            for (i, cfg) in basis.iter() {
                if cfg[a] != 0 {
                    valid[i] = C64::new(0.0, 0.0);
                }
            }
        }
    }
    let qubits = layout.qubits();
    let rails: Vec<(usize, usize)> = qubits
        .iter()
        .map(|&q| (layout.rail(q, ChainRole::Rail0).unwrap_or(usize::MAX), layout.rail(q, ChainRole::Rail1).unwrap_or(usize::MAX)))
        .collect();
    let count = |cfg: &[Mask], c: usize| if c == usize::MAX { 0 } else { cfg[c].count_ones() };
    let mut p = vec![(0.0, 0.0); qubits.len()];
    for (i, cfg) in basis.iter() {
        let ok = rails.iter().all(|&(r0, r1)| count(cfg, r0) + count(cfg, r1) == 1);
        if !ok {
            continue;
        }
        let w = valid[i].norm_sqr();
        for (k, &(_, r1)) in rails.iter().enumerate() {
            if count(cfg, r1) == 1 {
                p[k].1 += w;
            } else {
                p[k].0 += w;
            }
        }
    }
    let qubits = qubits
        .iter()
        .zip(&p)
        .map(|(&q, &(p0, p1))| QubitReadout { qubit: q, p0: p0 / total, p1: p1 / total, p_leak: 1.0 - (p0 + p1) / total })
        .collect();
    let rails = layout
        .chains
        .iter()
        .enumerate()
        .filter(|(_, c)| c.role != ChainRole::Ancilla)
        .map(|(i, c)| {
            let prob = site_distribution(state, basis, i);
            let stats = (prob.iter().sum::<f64>() > 1e-300).then(|| circular_stats(&prob));
            RailReadout { chain: c.id.clone(), stats }
        })
        .collect();
    let ancilla_return = layout
        .ancillas()
        .into_iter()
        .map(|a| {
            let w: f64 = basis.iter().filter(|(_, cfg)| cfg[a] == 0).map(|(i, _)| state.amps[i].norm_sqr()).sum();
            (layout.chains[a].id.clone(), w / total)
        })
        .collect();
    Ok(LogicalReadout { qubits, rails, ancilla_return })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{enumerate_basis, ChainLayout, Constraint, SectorSpec};

    fn ring(n: usize) -> SectorBasis {
        let layout = ChainLayout::new(n).unwrap().with_chain("c", ChainRole::Rail1, Some(0)).unwrap();
        enumerate_basis(&layout, &SectorSpec::new(vec![Constraint::Exactly(1)])).unwrap()
    }

    #[test]
    fn flat_momentum_state() {
        let b = ring(4);
        let s = momentum_eigenstate(&b, "c", 0).unwrap();
        for a in s.amplitudes() {
            assert!((a - C64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn momentum_states_orthonormal() {
        let b = ring(8);
        for p in 0..8 {
            for q in 0..8 {
                let ov = momentum_eigenstate(&b, "c", p).unwrap().inner(&momentum_eigenstate(&b, "c", q).unwrap()).unwrap();
                let want = if p == q { 1.0 } else { 0.0 };
                assert!((ov - C64::new(want, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn packet_center_and_norm() {
        let b = ring(64);
        let g = gaussian_packet(&b, "c", &PacketParams { x0: 10.0, p0: 16, dx: 4.0 }).unwrap();
        assert!((g.norm() - 1.0).abs() < 1e-12);
        let st = packet_center(&g, &b, "c").unwrap();
        assert!((st.center.unwrap() - 10.0).abs() < 0.05);
        // |ψ|² has standard deviation Δx/√2
        assert!((st.width - 4.0 / 2f64.sqrt()).abs() < 0.05);
    }

    #[test]
    fn uniform_state_has_no_center() {
        let b = ring(12);
        let s = momentum_eigenstate(&b, "c", 3).unwrap();
        let st = packet_center(&s, &b, "c").unwrap();
        assert!(st.center.is_none());
        assert!((st.width - 12.0 * 2f64.sqrt() / (2.0 * PI)).abs() < 1e-9);
    }

    #[test]
    fn default_width_is_cube_root_ceiling() {
        assert_eq!(default_width(64), 4.0);
        assert_eq!(default_width(27), 3.0);
        assert_eq!(default_width(32), 4.0);
        assert_eq!(default_width(16), 3.0);
    }

    #[test]
    fn displacement_wraps() {
        assert_eq!(ring_displacement(60.0, 2.0, 64), 6.0);
        assert_eq!(ring_displacement(2.0, 60.0, 64), -6.0);
    }

    #[test]
    fn product_state_outside_sector_is_refused() {
        let b = ring(5);
        let f = Factor::chain(0, vec![(0, C64::new(1.0, 0.0))]);
        assert!(matches!(product_state(&b, &[f]), Err(StateError::Sector(_))));
    }
}
