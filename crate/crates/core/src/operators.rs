//! Hamiltonians and couplings of the chain circuit, assembled on a
//! [`SectorBasis`].
//!
//! Conventions: a site holds an excitation when its spin is down, so
//! `n_j = (1 − z_j)/2`. `x_j` flips the site with amplitude 1 and `y_j`
//! flips it with amplitude `+i` when creating an excitation and `−i` when
//! removing one. Terms that would leave the enumerated sector are dropped,
//! so every operator is the sector projection of its full-space form.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{sites, BasisError, ChainLayout, ChainRole, Mask, SectorBasis};
use crate::sparse::{OperatorError, SparseOperator, TripletBuilder, C64};

#[derive(Debug, Error)]
pub enum OpError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("sector cannot host this operator: {0}")]
    Sector(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateKind {
    ZGate,
    XGate,
    VxBlock,
    VyBlock,
    NonlocalCphase,
}

/// Sites a block acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum SiteRange {
    FullRing,
    /// Sites `start, start+1, …` up to but excluding `end`, taken mod N.
    Span { start: usize, end: usize },
}

impl SiteRange {
    pub fn span(start: usize, end: usize) -> Self {
        SiteRange::Span { start, end }
    }

    pub fn sites(&self, n: usize) -> Vec<usize> {
        match *self {
            SiteRange::FullRing => (0..n).collect(),
            SiteRange::Span { start, end } => {
                let len = (end + n - start % n) % n;
                let len = if len == 0 && end != start { n } else { len };
                (0..len).map(|k| (start + k) % n).collect()
            }
        }
    }

    pub fn mask(&self, n: usize) -> Mask {
        self.sites(n).into_iter().fold(0, |m, s| m | (1 << s))
    }

    pub fn len(&self, n: usize) -> usize {
        self.sites(n).len()
    }

    pub fn is_empty(&self, n: usize) -> bool {
        self.len(n) == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateBlock {
    pub kind: GateKind,
    /// Chain ids: `[rail1]` for Z, `[rail0, rail1]` for X, `[rail1, ancilla]`
    /// for the V blocks, `[rail1_a, rail1_b]` for the non-local CPHASE.
    pub chains: Vec<String>,
    pub site_range: SiteRange,
    /// φ for phase and rung gates, e for the ancilla couplings.
    pub strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AncillaParams {
    pub m: f64,
    pub e: f64,
}

impl AncillaParams {
    pub fn new(m: f64, e: f64) -> Result<Self, OpError> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(OpError::Parameter(format!("m must be positive, got {m}")));
        }
        Ok(Self { m, e })
    }

    /// `1/m = 2N² + 1` and `e/√N = c·N^{-2/3}`.
    pub fn scaling_rule(n: usize, c: f64) -> Self {
        let nf = n as f64;
        Self { m: 1.0 / (2.0 * nf * nf + 1.0), e: c * nf.powf(-2.0 / 3.0) * nf.sqrt() }
    }

    /// Whether `1/m > 2N²`.
    pub fn gap_regime(&self, n: usize) -> bool {
        1.0 / self.m > 2.0 * (n as f64).powi(2)
    }

    /// Effective coupling `e/√N` on the ground doublet.
    pub fn effective_coupling(&self, n: usize) -> f64 {
        self.e / (n as f64).sqrt()
    }
}

impl GateBlock {
    pub fn z_gate(rail1: &str, phi: f64, site_range: SiteRange) -> Self {
        Self { kind: GateKind::ZGate, chains: vec![rail1.into()], site_range, strength: phi }
    }

    pub fn x_gate(rail0: &str, rail1: &str, phi: f64, site_range: SiteRange) -> Self {
        Self { kind: GateKind::XGate, chains: vec![rail0.into(), rail1.into()], site_range, strength: phi }
    }

    pub fn v_block(axis: Axis, rail1: &str, anc: &str, e: f64, site_range: SiteRange) -> Self {
        let kind = match axis {
            Axis::X => GateKind::VxBlock,
            Axis::Y => GateKind::VyBlock,
        };
        Self { kind, chains: vec![rail1.into(), anc.into()], site_range, strength: e }
    }

    pub fn nonlocal_cphase(a: &str, b: &str, phi: f64, site_range: SiteRange) -> Self {
        Self { kind: GateKind::NonlocalCphase, chains: vec![a.into(), b.into()], site_range, strength: phi }
    }

    fn expected_chains(&self) -> usize {
        match self.kind {
            GateKind::ZGate => 1,
            _ => 2,
        }
    }

    /// Structural check against a layout; returns advisory warnings.
    pub fn validate(&self, layout: &ChainLayout) -> Result<Vec<String>, OpError> {
        if self.chains.len() != self.expected_chains() {
            return Err(OpError::Parameter(format!(
                "{:?} takes {} chains, got {}",
                self.kind,
                self.expected_chains(),
                self.chains.len()
            )));
        }
        let idx: Vec<usize> =
            self.chains.iter().map(|c| layout.chain_index(c)).collect::<Result<_, _>>()?;
        if idx.len() == 2 && idx[0] == idx[1] {
            return Err(OpError::Parameter("block chains must be distinct".into()));
        }
        let role = |i: usize| layout.chains[idx[i]].role;
        let mut warnings = Vec::new();
        match self.kind {
            GateKind::ZGate if role(0) != ChainRole::Rail1 => {
                warnings.push(format!("Z block on non-rail-1 chain `{}`", self.chains[0]))
            }
            GateKind::XGate => {
                let q0 = layout.chains[idx[0]].qubit;
                if role(0) != ChainRole::Rail0 || role(1) != ChainRole::Rail1 || q0 != layout.chains[idx[1]].qubit {
                    warnings.push("X block chains are not the two rails of one qubit".into());
                }
            }
            GateKind::VxBlock | GateKind::VyBlock => {
                if role(0) != ChainRole::Rail1 || role(1) != ChainRole::Ancilla {
                    return Err(OpError::Parameter("V blocks couple a rail-1 chain to an ancilla".into()));
                }
            }
            GateKind::NonlocalCphase if role(0) != ChainRole::Rail1 || role(1) != ChainRole::Rail1 => {
                warnings.push("non-local CPHASE expects two rail-1 chains".into())
            }
            _ => {}
        }
        if self.site_range.is_empty(layout.n) {
            warnings.push("empty site range".into());
        }
        Ok(warnings)
    }
}

/// Sparse operator from a per-configuration action. `act` receives the
/// current configuration and a scratch copy it may modify before calling
/// `emit(amplitude)` with the scratch holding the target configuration.
fn assemble<F>(basis: &SectorBasis, mut act: F) -> SparseOperator
where
    F: FnMut(&[Mask], &mut Vec<Mask>, &mut dyn FnMut(&[Mask], C64)),
{
    let mut b = TripletBuilder::new(basis.dim(), basis.hash());
    let mut scratch = Vec::with_capacity(basis.n_chains());
    for (i, cfg) in basis.iter() {
        scratch.clear();
        scratch.extend_from_slice(cfg);
        let mut emit = |target: &[Mask], amp: C64| {
            if let Some(j) = basis.lookup(target) {
                b.push(j, i, amp);
            }
        };
        act(cfg, &mut scratch, &mut emit);
    }
    b.build()
}

fn diagonal(basis: &SectorBasis, f: impl Fn(&[Mask]) -> f64) -> SparseOperator {
    let d: Vec<f64> = basis.iter().map(|(_, c)| f(c)).collect();
    SparseOperator::diagonal(basis.hash(), &d)
}

fn ring_hop(basis: &SectorBasis, c: usize, amp: f64) -> SparseOperator {
    let n = basis.n();
    assemble(basis, |cfg, scratch, emit| {
        let m = cfg[c];
        for j in 0..n {
            let k = (j + 1) % n;
            let pair = (1 << j) | (1 << k);
            if (m & pair).count_ones() == 1 {
                scratch[c] = m ^ pair;
                emit(scratch, C64::new(amp, 0.0));
            }
        }
    })
}

/// `½ Σ_j (x_j x_{j+1} + y_j y_{j+1})` on one chain.
pub fn h_xy_ring(basis: &SectorBasis, chain_id: &str) -> Result<SparseOperator, OpError> {
    let c = basis.chain_index(chain_id)?;
    Ok(ring_hop(basis, c, 1.0))
}

/// Number of excitations of `chain_id` inside `range`.
pub fn number_operator(basis: &SectorBasis, chain_id: &str, range: SiteRange) -> Result<SparseOperator, OpError> {
    let c = basis.chain_index(chain_id)?;
    let mask = range.mask(basis.n());
    Ok(diagonal(basis, |cfg| (cfg[c] & mask).count_ones() as f64))
}

/// `φ Σ_{j∈range} (1 − z_j)/2`.
pub fn h_z_gate(basis: &SectorBasis, chain_id: &str, phi: f64, range: SiteRange) -> Result<SparseOperator, OpError> {
    Ok(number_operator(basis, chain_id, range)?.scaled(phi))
}

/// Rung coupling `½φ Σ_{j∈range} (x⁰_j x¹_j + y⁰_j y¹_j)`.
pub fn h_x_gate(
    basis: &SectorBasis,
    rail0: &str,
    rail1: &str,
    phi: f64,
    range: SiteRange,
) -> Result<SparseOperator, OpError> {
    let a = basis.chain_index(rail0)?;
    let b = basis.chain_index(rail1)?;
    if a == b {
        return Err(OpError::Parameter("X gate needs two distinct chains".into()));
    }
    let js = range.sites(basis.n());
    Ok(assemble(basis, |cfg, scratch, emit| {
        for &j in &js {
            let bit = 1 << j;
            if (cfg[a] & bit != 0) != (cfg[b] & bit != 0) {
                scratch[a] = cfg[a] ^ bit;
                scratch[b] = cfg[b] ^ bit;
                emit(scratch, C64::new(phi, 0.0));
                scratch[a] = cfg[a];
                scratch[b] = cfg[b];
            }
        }
    }))
}

/// `φ Σ_{i,j∈range} n^a_i n^b_j = φ N̂^a N̂^b`: both packets inside the
/// range pick up energy φ regardless of their relative position.
pub fn h_cphase_nonlocal(
    basis: &SectorBasis,
    rail_a: &str,
    rail_b: &str,
    phi: f64,
    range: SiteRange,
) -> Result<SparseOperator, OpError> {
    let a = basis.chain_index(rail_a)?;
    let b = basis.chain_index(rail_b)?;
    if a == b {
        return Err(OpError::Parameter("CPHASE needs two distinct chains".into()));
    }
    let mask = range.mask(basis.n());
    Ok(diagonal(basis, |cfg| {
        phi * ((cfg[a] & mask).count_ones() * (cfg[b] & mask).count_ones()) as f64
    }))
}

/// Ordered half sum `φ Σ_{i≤j} n^a_i n^b_j`: a diagonal that depends on
/// whether the `a` excitation sits at or before the `b` one.
pub fn h_cphase_ordered(basis: &SectorBasis, rail_a: &str, rail_b: &str, phi: f64) -> Result<SparseOperator, OpError> {
    let a = basis.chain_index(rail_a)?;
    let b = basis.chain_index(rail_b)?;
    Ok(diagonal(basis, |cfg| {
        let pairs: usize = sites(cfg[a]).map(|i| sites(cfg[b]).filter(|&j| i <= j).count()).sum();
        phi * pairs as f64
    }))
}

/// `(1/4m) Σ_j (1 − z_j − (x_j x_{j+1} + y_j y_{j+1})/2)`.
pub fn h_ancilla(basis: &SectorBasis, anc_id: &str, m: f64) -> Result<SparseOperator, OpError> {
    if !(m > 0.0) {
        return Err(OpError::Parameter(format!("m must be positive, got {m}")));
    }
    let c = basis.chain_index(anc_id)?;
    let diag = diagonal(basis, |cfg| cfg[c].count_ones() as f64 / (2.0 * m));
    Ok(diag.add(&ring_hop(basis, c, -1.0 / (4.0 * m)))?)
}

/// `e Σ_{j∈range} n^{rail}_j ⊗ σ^{anc}_j` with σ = x or y.
pub fn v_site_coupling(
    basis: &SectorBasis,
    rail_id: &str,
    anc_id: &str,
    e: f64,
    axis: Axis,
    range: SiteRange,
) -> Result<SparseOperator, OpError> {
    let r = basis.chain_index(rail_id)?;
    let a = basis.chain_index(anc_id)?;
    if r == a {
        return Err(OpError::Parameter("rail and ancilla must differ".into()));
    }
    let js = range.sites(basis.n());
    Ok(assemble(basis, |cfg, scratch, emit| {
        for &j in &js {
            let bit = 1 << j;
            if cfg[r] & bit == 0 {
                continue;
            }
            let creating = cfg[a] & bit == 0;
            scratch[a] = cfg[a] ^ bit;
            let amp = match (axis, creating) {
                (Axis::X, _) => C64::new(e, 0.0),
                (Axis::Y, true) => C64::new(0.0, e),
                (Axis::Y, false) => C64::new(0.0, -e),
            };
            emit(scratch, amp);
        }
        scratch[a] = cfg[a];
    }))
}

fn require_doublet(basis: &SectorBasis, a: usize) -> Result<(), OpError> {
    if !(basis.allows(a, 0) && basis.allows(a, 1)) {
        return Err(OpError::Sector("ancilla sector must admit 0 and 1 excitations".into()));
    }
    Ok(())
}

/// Ancilla ground-doublet operator `1 ⊗ A` where `A` is given by its
/// matrix in the (Ω, Ψ) basis.
fn doublet_operator(basis: &SectorBasis, anc_id: &str, a: [[C64; 2]; 2]) -> Result<SparseOperator, OpError> {
    let c = basis.chain_index(anc_id)?;
    require_doublet(basis, c)?;
    let n = basis.n();
    let inv = 1.0 / (n as f64).sqrt();
    Ok(assemble(basis, |cfg, scratch, emit| {
        // column in the doublet: vacuum (Ω) or one uniform component of Ψ
        let col = match cfg[c].count_ones() {
            0 => (0, 1.0),
            1 => (1, inv),
            _ => return,
        };
        scratch[c] = 0;
        let v = a[0][col.0] * col.1;
        if v != C64::new(0.0, 0.0) {
            emit(scratch, v);
        }
        let v = a[1][col.0] * col.1 * inv;
        if v != C64::new(0.0, 0.0) {
            for s in 0..n {
                scratch[c] = 1 << s;
                emit(scratch, v);
            }
        }
        scratch[c] = cfg[c];
    }))
}

/// `P₀ = |Ω⟩⟨Ω| + |Ψ⟩⟨Ψ|` on the ancilla, identity elsewhere.
pub fn projector_ground_doublet(basis: &SectorBasis, anc_id: &str) -> Result<SparseOperator, OpError> {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    doublet_operator(basis, anc_id, [[one, zero], [zero, one]])
}

/// Logical Pauli operator of the ancilla ground doublet (`Ω` ↔ `|0⟩`).
pub fn ancilla_pauli(basis: &SectorBasis, anc_id: &str, p: Pauli) -> Result<SparseOperator, OpError> {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let m = match p {
        Pauli::X => [[zero, one], [one, zero]],
        Pauli::Y => [[zero, -i], [i, zero]],
        Pauli::Z => [[one, zero], [zero, -one]],
    };
    doublet_operator(basis, anc_id, m)
}

/// `(1 ⊗ P₀) H (1 ⊗ P₀)`.
pub fn h_effective(basis: &SectorBasis, h_total: &SparseOperator, anc_id: &str) -> Result<SparseOperator, OpError> {
    let p0 = projector_ground_doublet(basis, anc_id)?;
    Ok(p0.matmul(h_total)?.matmul(&p0)?)
}

/// Ring terms of every chain: XY hopping on rails, the ancilla Hamiltonian
/// (scale `m`) on ancillas.
pub fn h_free(basis: &SectorBasis, m: Option<f64>) -> Result<SparseOperator, OpError> {
    let mut terms = Vec::new();
    for (c, chain) in basis.layout().chains.iter().enumerate() {
        match chain.role {
            ChainRole::Rail0 | ChainRole::Rail1 => terms.push(ring_hop(basis, c, 1.0)),
            ChainRole::Ancilla => {
                let m = m.ok_or_else(|| OpError::Parameter("ancilla chain present but no m given".into()))?;
                terms.push(h_ancilla(basis, &chain.id, m)?);
            }
        }
    }
    if terms.is_empty() {
        return Ok(SparseOperator::zero(basis.dim(), basis.hash()));
    }
    Ok(SparseOperator::sum(&terms)?)
}

/// Operator of a single gate block.
pub fn block_operator(basis: &SectorBasis, block: &GateBlock) -> Result<SparseOperator, OpError> {
    block.validate(basis.layout())?;
    let ch = |i: usize| block.chains[i].as_str();
    let r = block.site_range;
    match block.kind {
        GateKind::ZGate => h_z_gate(basis, ch(0), block.strength, r),
        GateKind::XGate => h_x_gate(basis, ch(0), ch(1), block.strength, r),
        GateKind::VxBlock => v_site_coupling(basis, ch(0), ch(1), block.strength, Axis::X, r),
        GateKind::VyBlock => v_site_coupling(basis, ch(0), ch(1), block.strength, Axis::Y, r),
        GateKind::NonlocalCphase => h_cphase_nonlocal(basis, ch(0), ch(1), block.strength, r),
    }
}

/// Doublet-projected form of a V block: `(e/√N) N̂_range ⊗ X̂` (or `Ŷ`).
pub fn v_effective(basis: &SectorBasis, block: &GateBlock) -> Result<SparseOperator, OpError> {
    let pauli = match block.kind {
        GateKind::VxBlock => Pauli::X,
        GateKind::VyBlock => Pauli::Y,
        _ => return Err(OpError::Parameter("only V blocks have a doublet projection".into())),
    };
    block.validate(basis.layout())?;
    let num = number_operator(basis, &block.chains[0], block.site_range)?;
    let p = ancilla_pauli(basis, &block.chains[1], pauli)?;
    let s = block.strength / (basis.n() as f64).sqrt();
    Ok(num.matmul(&p)?.scaled(s))
}

/// `H_free + Σ blocks`.
pub fn h_total(basis: &SectorBasis, blocks: &[GateBlock], m: Option<f64>) -> Result<SparseOperator, OpError> {
    let mut terms = vec![h_free(basis, m)?];
    for b in blocks {
        terms.push(block_operator(basis, b)?);
    }
    Ok(SparseOperator::sum(&terms)?)
}

/// `H̃₀ = H_free + V_eff`: every V block replaced by its doublet form.
pub fn h_tilde0(basis: &SectorBasis, blocks: &[GateBlock], m: Option<f64>) -> Result<SparseOperator, OpError> {
    let mut terms = vec![h_free(basis, m)?];
    for b in blocks {
        terms.push(match b.kind {
            GateKind::VxBlock | GateKind::VyBlock => v_effective(basis, b)?,
            _ => block_operator(basis, b)?,
        });
    }
    Ok(SparseOperator::sum(&terms)?)
}

/// The simultaneous one-site shift of all chains.
pub fn translation_operator(basis: &SectorBasis) -> SparseOperator {
    SparseOperator::permutation(basis.hash(), &basis.translation_permutation())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{enumerate_basis, ChainLayout, Constraint, SectorSpec};
    use nalgebra::DMatrix;

    fn eig(op: &SparseOperator) -> Vec<f64> {
        let d = op.to_dense();
        let re: DMatrix<f64> = d.map(|z| z.re);
        assert!(d.map(|z| z.im).norm() < 1e-14);
        let mut ev: Vec<f64> = re.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    fn one_chain(n: usize, c: Constraint, role: ChainRole) -> SectorBasis {
        let layout = ChainLayout::new(n).unwrap().with_chain("c", role, None).unwrap();
        enumerate_basis(&layout, &SectorSpec::new(vec![c])).unwrap()
    }

    #[test]
    fn ring_spectrum_n4() {
        let b = one_chain(4, Constraint::Exactly(1), ChainRole::Rail1);
        let ev = eig(&h_xy_ring(&b, "c").unwrap());
        let want = [-2.0, 0.0, 0.0, 2.0];
        for (a, w) in ev.iter().zip(want) {
            assert!((a - w).abs() < 1e-12);
        }
    }

    #[test]
    fn vacuum_ring_is_zero() {
        let b = one_chain(5, Constraint::Exactly(0), ChainRole::Rail1);
        let h = h_xy_ring(&b, "c").unwrap();
        assert_eq!(h.dim(), 1);
        assert_eq!(h.nnz(), 0);
    }

    #[test]
    fn ancilla_single_particle_spectrum() {
        let n = 7;
        let m = 0.3;
        let b = one_chain(n, Constraint::Exactly(1), ChainRole::Ancilla);
        let ev = eig(&h_ancilla(&b, "c", m).unwrap());
        let mut want: Vec<f64> =
            (0..n).map(|p| (std::f64::consts::PI * p as f64 / n as f64).sin().powi(2) / m).collect();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, w) in ev.iter().zip(want) {
            assert!((a - w).abs() < 1e-12);
        }
    }

    #[test]
    fn half_ring_z_gate() {
        let b = one_chain(8, Constraint::Exactly(1), ChainRole::Rail1);
        let h = h_z_gate(&b, "c", 0.7, SiteRange::span(0, 4)).unwrap();
        for (i, cfg) in b.iter() {
            let site = cfg[0].trailing_zeros();
            let want = if site < 4 { 0.7 } else { 0.0 };
            assert_eq!(h.get(i, i).re, want);
        }
    }

    #[test]
    fn wrapped_span() {
        assert_eq!(SiteRange::span(6, 2).sites(8), vec![6, 7, 0, 1]);
        assert_eq!(SiteRange::span(0, 8).sites(8).len(), 8);
        assert!(SiteRange::span(3, 3).is_empty(8));
    }

    #[test]
    fn ordered_cphase_is_not_uniform() {
        let layout = ChainLayout::dual_rail(3, 2).unwrap();
        let spec = SectorSpec::new(vec![
            Constraint::Exactly(0),
            Constraint::Exactly(1),
            Constraint::Exactly(0),
            Constraint::Exactly(1),
        ]);
        let b = enumerate_basis(&layout, &spec).unwrap();
        let full = h_cphase_nonlocal(&b, "q0.r1", "q1.r1", 1.0, SiteRange::FullRing).unwrap();
        let ord = h_cphase_ordered(&b, "q0.r1", "q1.r1", 1.0).unwrap();
        assert!(full.add_scaled(&SparseOperator::identity(b.dim(), b.hash()), -1.0).unwrap().max_abs() < 1e-15);
        assert!((ord.to_dense().trace().re - 6.0).abs() < 1e-12);
    }

    #[test]
    fn scaling_rule_is_in_gap_regime() {
        for n in [4, 8, 16, 32] {
            let p = AncillaParams::scaling_rule(n, 1.0);
            assert!(p.gap_regime(n));
            assert!((p.effective_coupling(n) - (n as f64).powf(-2.0 / 3.0)).abs() < 1e-14);
        }
    }
}
