//! Static circuits: a schedule of gate blocks on M dual-rail qubits.
//!
//! FullRing mode runs every gate as its own experiment and composes the
//! measured logical maps; the blocks conserve each rail's particle number,
//! so a gate's logical action does not depend on what ran before it, and
//! weight that leaves the logical space is dropped rather than carried
//! forward. Finite mode lays all blocks out along the ring and evolves the
//! whole register once.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{enumerate_basis, ChainLayout, ChainRole, Constraint, SectorBasis, SectorSpec};
use crate::operators::{h_free, AncillaParams, GateBlock, SiteRange};
use crate::propagate::{embed, evolve, evolve_with_truncation, EvolveConfig, Segment, TruncatedProblem, TruncationEscalation};
use crate::sparse::C64;
use crate::states::{logical_product, LogicalReadout, PacketParams, QubitReadout, StateVector};

use super::decompose::{decompose_single_qubit, U2};
use super::gates::{
    finite_margin, lambda_schedule, run_entangling_gate, run_x_gate, run_z_gate, EntangleOptions, ExperimentConfig,
    GateMode, GateResult,
};
use super::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "kebab-case")]
pub enum GateSpec {
    /// `diag(1, e^{−iφt})`.
    Z { qubit: usize, phi: f64, t: f64 },
    /// `e^{−iφtX}`.
    X { qubit: usize, phi: f64, t: f64 },
    /// Any single-qubit unitary, rows of `[re, im]`; expanded into Z, X, Z.
    Unitary { qubit: usize, matrix: [[[f64; 2]; 2]; 2] },
    /// `Λ_φ` between two qubits through a dedicated ancilla chain.
    Lambda { a: usize, b: usize, phi: f64 },
}

fn default_scale() -> f64 {
    1.0
}

fn default_truncation() -> TruncationEscalation {
    EntangleOptions::default().escalation
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub schema_version: u32,
    pub n: usize,
    pub qubits: usize,
    #[serde(default)]
    pub packet: Option<PacketParams>,
    #[serde(default = "default_mode")]
    pub mode: GateMode,
    /// Per-qubit `(c₀, c₁)` as `[[re, im], [re, im]]`; all `|𝟎⟩` if absent.
    #[serde(default)]
    pub initial: Option<Vec<[[f64; 2]; 2]>>,
    #[serde(default)]
    pub gates: Vec<GateSpec>,
    /// Ancilla `(m, e)`; the scaling rule with `coupling_scale` if absent.
    #[serde(default)]
    pub ancilla: Option<AncillaParams>,
    #[serde(default = "default_scale")]
    pub coupling_scale: f64,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default = "default_truncation")]
    pub truncation: TruncationEscalation,
    /// Free propagation before read-out, checked against the translated packets.
    #[serde(default)]
    pub transit_time: f64,
}

fn default_mode() -> GateMode {
    GateMode::FullRing
}

impl CircuitSpec {
    pub fn new(n: usize, qubits: usize, gates: Vec<GateSpec>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n,
            qubits,
            packet: None,
            mode: GateMode::FullRing,
            initial: None,
            gates,
            ancilla: None,
            coupling_scale: 1.0,
            evolve: EvolveConfig::default(),
            truncation: default_truncation(),
            transit_time: 0.0,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, HarnessError> {
        let spec: Self = toml::from_str(s).map_err(|e| HarnessError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json_str(s: &str) -> Result<Self, HarnessError> {
        let spec: Self = serde_json::from_str(s).map_err(|e| HarnessError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// TOML unless the extension is `.json`.
    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            _ => Self::from_toml_str(&text),
        }
    }

    pub fn to_toml_string(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Spec(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Spec(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.n < 4 || self.n > crate::basis::MAX_SITES {
            return Err(HarnessError::Spec(format!("N = {} outside 4..=64", self.n)));
        }
        if self.qubits == 0 || self.qubits > 8 {
            return Err(HarnessError::Spec(format!("qubit count {} outside 1..=8", self.qubits)));
        }
        if let Some(init) = &self.initial {
            if init.len() != self.qubits {
                return Err(HarnessError::Spec(format!("{} initial states for {} qubits", init.len(), self.qubits)));
            }
        }
        let check = |q: usize| {
            if q >= self.qubits {
                Err(HarnessError::Spec(format!("gate references undefined qubit {q}")))
            } else {
                Ok(())
            }
        };
        for g in &self.gates {
            match *g {
                GateSpec::Z { qubit, .. } | GateSpec::X { qubit, .. } | GateSpec::Unitary { qubit, .. } => check(qubit)?,
                GateSpec::Lambda { a, b, .. } => {
                    check(a)?;
                    check(b)?;
                    if a == b {
                        return Err(HarnessError::Spec("Lambda needs two distinct qubits".into()));
                    }
                }
            }
        }
        self.truncation.validate()?;
        Ok(())
    }

    fn ancilla_params(&self) -> AncillaParams {
        self.ancilla.unwrap_or_else(|| AncillaParams::scaling_rule(self.n, self.coupling_scale))
    }

    fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig { evolve: self.evolve, packet: self.packet }
    }

    fn initial_amplitudes(&self) -> Vec<(C64, C64)> {
        match &self.initial {
            Some(v) => v.iter().map(|[a, b]| (C64::new(a[0], a[1]), C64::new(b[0], b[1]))).collect(),
            None => vec![(C64::new(1.0, 0.0), C64::new(0.0, 0.0)); self.qubits],
        }
    }
}

/// Single-qubit gates that realise `U` up to global phase: with
/// `U ≅ e^{iθ₁Z}e^{iθ₂X}e^{iθ₃Z}`, Z(θ₃) runs first. A Z block of `φt`
/// equals `e^{iφtZ/2}`, an X block `e^{−iφtX}`, so unit strength with
/// `t = 2θ` and `t = π − θ₂` reproduces each factor.
pub fn expand_unitary(qubit: usize, u: &U2) -> Result<Vec<GateSpec>, HarnessError> {
    let (t1, t2, t3) = decompose_single_qubit(u)?;
    let mut out = Vec::new();
    let pi = std::f64::consts::PI;
    if t3 != 0.0 {
        out.push(GateSpec::Z { qubit, phi: 1.0, t: 2.0 * t3 });
    }
    if t2 != 0.0 {
        out.push(GateSpec::X { qubit, phi: 1.0, t: pi - t2 });
    }
    if t1 != 0.0 {
        out.push(GateSpec::Z { qubit, phi: 1.0, t: 2.0 * t1 });
    }
    Ok(out)
}

fn matrix_of(m: &[[[f64; 2]; 2]; 2]) -> U2 {
    U2::new(
        C64::new(m[0][0][0], m[0][0][1]),
        C64::new(m[0][1][0], m[0][1][1]),
        C64::new(m[1][0][0], m[1][0][1]),
        C64::new(m[1][1][0], m[1][1][1]),
    )
}

/// Gates with every `Unitary` replaced by its Z/X expansion.
pub fn expanded_gates(spec: &CircuitSpec) -> Result<Vec<GateSpec>, HarnessError> {
    let mut out = Vec::new();
    for g in &spec.gates {
        match g {
            GateSpec::Unitary { qubit, matrix } => out.extend(expand_unitary(*qubit, &matrix_of(matrix))?),
            other => out.push(other.clone()),
        }
    }
    Ok(out)
}

/// Index of a logical basis state; qubit 0 is the most significant bit.
fn bit(index: usize, q: usize, m: usize) -> usize {
    (index >> (m - 1 - q)) & 1
}

fn lift(m: usize, qubits: &[usize], op: &[Vec<C64>]) -> DMatrix<C64> {
    let dim = 1 << m;
    DMatrix::from_fn(dim, dim, |i, j| {
        let same = (0..m).filter(|q| !qubits.contains(q)).all(|q| bit(i, q, m) == bit(j, q, m));
        if !same {
            return C64::new(0.0, 0.0);
        }
        let sub = |x: usize| qubits.iter().fold(0, |acc, &q| (acc << 1) | bit(x, q, m));
        op[sub(i)][sub(j)]
    })
}

fn product_vector(amps: &[(C64, C64)]) -> DVector<C64> {
    let m = amps.len();
    DVector::from_fn(1 << m, |i, _| {
        (0..m).map(|q| if bit(i, q, m) == 0 { amps[q].0 } else { amps[q].1 }).product()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitResult {
    pub mode: GateMode,
    /// One entry per executed gate (FullRing mode only).
    pub gates: Vec<GateResult>,
    pub final_readout: LogicalReadout,
    /// Logical amplitudes after the circuit, qubit 0 most significant.
    pub final_amplitudes: Vec<C64>,
    pub ideal_amplitudes: Vec<C64>,
    /// `|⟨ideal|final⟩|²`.
    pub state_fidelity: f64,
    /// `|tr(U_ideal† U_measured)|²/d²` of the composed maps (FullRing mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process_fidelity: Option<f64>,
    /// Overlap of the freely transported register with its translated
    /// initial packets, when `transit_time > 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transit_fidelity: Option<f64>,
    pub warnings: Vec<String>,
}

fn logical_readout(m: usize, amps: &DVector<C64>) -> LogicalReadout {
    let total: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    let qubits = (0..m)
        .map(|q| {
            let p1: f64 = amps.iter().enumerate().filter(|(i, _)| bit(*i, q, m) == 1).map(|(_, z)| z.norm_sqr()).sum();
            QubitReadout { qubit: q, p0: total - p1, p1, p_leak: 1.0 - total }
        })
        .collect();
    LogicalReadout { qubits, rails: Vec::new(), ancilla_return: Vec::new() }
}

/// Register basis: one excitation per qubit over its two rails, ancillas
/// (if any) truncated to `AtMost(k)` by the caller.
fn register_spec(layout: &ChainLayout) -> SectorSpec {
    let mut spec = SectorSpec::new(
        layout.chains.iter().map(|c| if c.role == ChainRole::Ancilla { Constraint::AtMost(0) } else { Constraint::AtMost(1) }).collect(),
    );
    for q in layout.qubits() {
        let r0 = layout.rail(q, ChainRole::Rail0).expect("dual rail");
        let r1 = layout.rail(q, ChainRole::Rail1).expect("dual rail");
        spec = spec.with_joint(vec![r0, r1], 1);
    }
    spec
}

/// Largest register kept for the transit check.
const TRANSIT_MAX_DIM: usize = 1 << 18;

fn transit_check(spec: &CircuitSpec, amps: &[(C64, C64)]) -> Result<Option<f64>, HarnessError> {
    if spec.transit_time <= 0.0 {
        return Ok(None);
    }
    let layout = ChainLayout::dual_rail(spec.n, spec.qubits)?;
    let dim = (2 * spec.n).pow(spec.qubits as u32);
    if dim > TRANSIT_MAX_DIM {
        return Err(HarnessError::BudgetOverflow(format!("register dimension {dim} for the transit check")));
    }
    let basis = enumerate_basis(&layout, &register_spec(&layout))?;
    let params = spec.packet.unwrap_or_else(|| PacketParams::default_for(spec.n, 0.0));
    let q: Vec<(usize, (C64, C64))> = amps.iter().copied().enumerate().collect();
    let psi = logical_product(&basis, &q, &params)?;
    let out = evolve(&h_free(&basis, None)?, &psi, spec.transit_time, &spec.evolve)?;
    let moved = PacketParams { x0: params.x0 + params.group_velocity(spec.n) * spec.transit_time, ..params };
    let ideal = logical_product(&basis, &q, &moved)?;
    Ok(Some(ideal.fidelity(&out)?))
}

pub fn run_circuit(spec: &CircuitSpec) -> Result<CircuitResult, HarnessError> {
    spec.validate()?;
    match spec.mode {
        GateMode::FullRing => run_full_ring(spec),
        GateMode::Finite => run_finite(spec),
    }
}

fn run_full_ring(spec: &CircuitSpec) -> Result<CircuitResult, HarnessError> {
    let m = spec.qubits;
    let dim = 1 << m;
    let gates = expanded_gates(spec)?;
    let cfg = spec.experiment();
    let mut measured = DMatrix::<C64>::identity(dim, dim);
    let mut ideal = DMatrix::<C64>::identity(dim, dim);
    let mut results = Vec::new();
    let mut warnings = Vec::new();
    let mut cache: HashMap<String, GateResult> = HashMap::new();
    for g in &gates {
        let key = serde_json::to_string(&(g, spec.n))?;
        let (qubits, res) = match *g {
            GateSpec::Z { qubit, phi, t } => {
                let r = match cache.get(&key) {
                    Some(r) => r.clone(),
                    None => run_z_gate(spec.n, phi, t, GateMode::FullRing, &cfg)?,
                };
                (vec![qubit], r)
            }
            GateSpec::X { qubit, phi, t } => {
                let r = match cache.get(&key) {
                    Some(r) => r.clone(),
                    None => run_x_gate(spec.n, phi, t, GateMode::FullRing, &cfg)?,
                };
                (vec![qubit], r)
            }
            GateSpec::Lambda { a, b, phi } => {
                let r = match cache.get(&key) {
                    Some(r) => r.clone(),
                    None => {
                        let opts = EntangleOptions {
                            coupling_scale: spec.coupling_scale,
                            params: Some(spec.ancilla_params()),
                            escalation: spec.truncation.clone(),
                            experiment: cfg,
                            allow_outside_gap: false,
                        };
                        run_entangling_gate(spec.n, phi, &opts)?.0
                    }
                };
                (vec![a, b], r)
            }
            GateSpec::Unitary { .. } => unreachable!("expanded above"),
        };
        cache.insert(key, res.clone());
        warnings.extend(res.warnings.iter().cloned());
        measured = lift(m, &qubits, &res.measured) * measured;
        ideal = lift(m, &qubits, &res.target) * ideal;
        results.push(res);
    }
    let amps = spec.initial_amplitudes();
    let v0 = product_vector(&amps);
    let v0 = &v0 / C64::new(v0.norm(), 0.0);
    let fin = &measured * &v0;
    let want = &ideal * &v0;
    let overlap = want.dotc(&fin);
    let process = (ideal.adjoint() * &measured).trace().norm_sqr() / (dim * dim) as f64;
    Ok(CircuitResult {
        mode: GateMode::FullRing,
        gates: results,
        final_readout: logical_readout(m, &fin),
        final_amplitudes: fin.iter().copied().collect(),
        ideal_amplitudes: want.iter().copied().collect(),
        state_fidelity: overlap.norm_sqr(),
        process_fidelity: Some(process),
        transit_fidelity: transit_check(spec, &amps)?,
        warnings,
    })
}

/// Sites a gate occupies in finite mode, as consecutive blocks.
fn finite_segments(spec: &CircuitSpec, g: &GateSpec, v: f64) -> Vec<(Vec<GateBlock>, usize, f64)> {
    let len = |t: f64| (v.abs() * t).round() as usize;
    let placeholder = SiteRange::FullRing;
    match *g {
        GateSpec::Z { qubit, phi, t } => {
            vec![(vec![GateBlock::z_gate(&format!("q{qubit}.r1"), phi, placeholder)], len(t), phi * len(t) as f64 / v.abs())]
        }
        GateSpec::X { qubit, phi, t } => vec![(
            vec![GateBlock::x_gate(&format!("q{qubit}.r0"), &format!("q{qubit}.r1"), phi, placeholder)],
            len(t),
            phi * len(t) as f64 / v.abs(),
        )],
        GateSpec::Lambda { a, b, phi } => {
            let p = spec.ancilla_params();
            let anc = format!("anc{a}_{b}");
            lambda_schedule(spec.n, p.e, phi, &format!("q{a}.r1"), &anc, &format!("q{b}.r1"), placeholder)
                .into_iter()
                .map(|Segment { blocks, duration }| (blocks, len(duration), 0.0))
                .collect()
        }
        GateSpec::Unitary { .. } => unreachable!("expanded before layout"),
    }
}

fn ideal_single(g: &GateSpec, eff: f64) -> (Vec<usize>, Vec<Vec<C64>>) {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    match *g {
        GateSpec::Z { qubit, .. } => (vec![qubit], vec![vec![one, zero], vec![zero, C64::from_polar(1.0, -eff)]]),
        GateSpec::X { qubit, .. } => {
            let c = C64::new(eff.cos(), 0.0);
            let s = C64::new(0.0, -eff.sin());
            (vec![qubit], vec![vec![c, s], vec![s, c]])
        }
        GateSpec::Lambda { a, b, phi } => {
            let e = C64::from_polar(1.0, -phi);
            let d = [one, e, e, one];
            (vec![a, b], (0..4).map(|i| (0..4).map(|j| if i == j { d[i] } else { zero }).collect()).collect())
        }
        GateSpec::Unitary { .. } => unreachable!(),
    }
}

fn run_finite(spec: &CircuitSpec) -> Result<CircuitResult, HarnessError> {
    let n = spec.n;
    let m = spec.qubits;
    let params = spec.packet.unwrap_or_else(|| PacketParams::default_for(n, 0.0));
    let v = params.group_velocity(n);
    if v.abs() < 1e-12 {
        return Err(HarnessError::Parameter("finite mode needs a moving packet".into()));
    }
    let gates = expanded_gates(spec)?;
    let margin = finite_margin(&params) as i64;
    let dir: i64 = if v < 0.0 { -1 } else { 1 };
    let mut layout = ChainLayout::dual_rail(n, m)?;
    let mut blocks = Vec::new();
    let mut ideal = DMatrix::<C64>::identity(1 << m, 1 << m);
    let mut cursor = margin;
    for g in &gates {
        if let GateSpec::Lambda { a, b, .. } = *g {
            let id = format!("anc{a}_{b}");
            if layout.chain_index(&id).is_err() {
                layout = layout.with_chain(&id, ChainRole::Ancilla, None)?;
            }
        }
        let mut eff_total = 0.0;
        for (bs, len, eff) in finite_segments(spec, g, v) {
            let (lo, hi) = if dir < 0 {
                (params.x0 as i64 - cursor - len as i64, params.x0 as i64 - cursor)
            } else {
                (params.x0 as i64 + cursor + 1, params.x0 as i64 + cursor + 1 + len as i64)
            };
            let range = SiteRange::span(lo.rem_euclid(n as i64) as usize, hi.rem_euclid(n as i64) as usize);
            for mut b in bs {
                b.site_range = range;
                blocks.push(b);
            }
            cursor += len as i64;
            eff_total += eff;
        }
        let (qs, op) = ideal_single(g, eff_total);
        ideal = lift(m, &qs, &op) * ideal;
    }
    let span = cursor + 2 * margin;
    if span > n as i64 {
        return Err(HarnessError::BudgetOverflow(format!(
            "blocks and margins need {span} sites on a ring of {n}; raise N or the coupling scale"
        )));
    }
    let duration = (cursor + margin) as f64 / v.abs();
    let spec_sector = register_spec(&layout);
    let amps = spec.initial_amplitudes();
    let q: Vec<(usize, (C64, C64))> = amps.iter().copied().enumerate().collect();
    let initial = |basis: &SectorBasis| Ok(logical_product(basis, &q, &params)?);
    let schedule = [Segment { blocks, duration }];
    let anc = spec.ancilla.map(|a| a.m).or_else(|| (!layout.ancillas().is_empty()).then(|| spec.ancilla_params().m));
    let problem = TruncatedProblem { layout: &layout, spec: spec_sector, schedule: &schedule, m: anc, initial: &initial };
    let mut esc = spec.truncation.clone();
    if layout.ancillas().is_empty() {
        esc.k_max = vec![0];
    }
    let out = evolve_with_truncation(&problem, &spec.evolve, &esc)?;
    let small = problem.basis(0)?;
    let h0 = h_free(&small, anc)?;
    let mut fin = DVector::<C64>::zeros(1 << m);
    for (i, slot) in fin.iter_mut().enumerate() {
        let basis_amps: Vec<(usize, (C64, C64))> = (0..m)
            .map(|qb| {
                let one = C64::new(1.0, 0.0);
                let zero = C64::new(0.0, 0.0);
                (qb, if bit(i, qb, m) == 0 { (one, zero) } else { (zero, one) })
            })
            .collect();
        let r = logical_product(&small, &basis_amps, &params)?;
        let r = evolve(&h0, &r, duration, &spec.evolve)?;
        let r: StateVector = embed(&r, &small, &out.basis);
        *slot = r.inner(&out.state)?;
    }
    let v0 = product_vector(&amps);
    let v0 = &v0 / C64::new(v0.norm(), 0.0);
    let want = &ideal * &v0;
    let mut warnings = Vec::new();
    if !out.converged && !layout.ancillas().is_empty() {
        warnings.push(format!("truncation not converged at k = {}", out.achieved_k));
    }
    Ok(CircuitResult {
        mode: GateMode::Finite,
        gates: Vec::new(),
        final_readout: logical_readout(m, &fin),
        state_fidelity: want.dotc(&fin).norm_sqr(),
        final_amplitudes: fin.iter().copied().collect(),
        ideal_amplitudes: want.iter().copied().collect(),
        process_fidelity: None,
        transit_fidelity: transit_check(spec, &amps)?,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_schedule_is_identity() {
        let mut spec = CircuitSpec::new(16, 1, vec![]);
        spec.transit_time = 4.0;
        let r = run_circuit(&spec).unwrap();
        assert!(r.state_fidelity > 1.0 - 1e-12);
        // the packet itself disperses slightly at this size
        assert!(r.transit_fidelity.unwrap() > 0.99);
    }

    #[test]
    fn toml_round_trip() {
        let spec = CircuitSpec::new(16, 2, vec![GateSpec::Z { qubit: 0, phi: 0.5, t: 1.0 }, GateSpec::Lambda { a: 0, b: 1, phi: 0.3 }]);
        let text = spec.to_toml_string().unwrap();
        assert_eq!(CircuitSpec::from_toml_str(&text).unwrap(), spec);
    }

    #[test]
    fn undefined_qubit_rejected() {
        let spec = CircuitSpec::new(16, 1, vec![GateSpec::X { qubit: 3, phi: 1.0, t: 1.0 }]);
        assert!(matches!(run_circuit(&spec), Err(HarnessError::Spec(_))));
    }

    #[test]
    fn wrong_schema_rejected() {
        let mut spec = CircuitSpec::new(16, 1, vec![]);
        spec.schema_version = 99;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn finite_lambda_overflows_small_ring() {
        let mut spec = CircuitSpec::new(16, 2, vec![GateSpec::Lambda { a: 0, b: 1, phi: 1.0 }]);
        spec.mode = GateMode::Finite;
        assert!(matches!(run_circuit(&spec), Err(HarnessError::BudgetOverflow(_))));
    }
}
