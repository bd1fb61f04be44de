//! End-to-end gate experiments on packet-encoded qubits.
//!
//! Logical amplitudes are overlaps with the freely evolved reference
//! packets, so the free transit phase is divided out and only the phase
//! the block adds is reported.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::basis::{enumerate_basis, ChainLayout, ChainRole, Constraint, SectorBasis, SectorSpec};
use crate::operators::{h_free, h_total, AncillaParams, Axis, GateBlock, SiteRange};
use crate::propagate::{
    embed, evolve, evolve_with_truncation, EvolveConfig, Segment, TruncatedProblem, TruncationEscalation,
};
use crate::sparse::C64;
use crate::states::{
    gaussian_amplitudes, logical_product, product_state, readout, Factor, PacketParams, StateVector,
};

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateMode {
    /// The block covers the whole ring and is switched on for time `t`.
    FullRing,
    /// A block of `round(|v_g| t)` sites sits ahead of the packet, which
    /// crosses it completely.
    Finite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    pub gate: String,
    pub n: usize,
    /// Ideal logical unitary, rows of `[re, im]` pairs.
    pub target: Vec<Vec<C64>>,
    /// `⟨ref_i| U |j⟩` with `ref_i` the free evolution of logical input `i`.
    pub measured: Vec<Vec<C64>>,
    /// Phases the gate is meant to imprint, one per probed input.
    pub phases: Vec<f64>,
    pub phase_errors: Vec<f64>,
    /// Populations on rail 1 per probed input (single-qubit gates).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub populations: Vec<f64>,
    /// `|tr(T†M)|²/d²`.
    pub process_fidelity: f64,
    /// Weight left on the ancilla vacuum, per logical input.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ancilla_return: Vec<f64>,
    /// Largest weight outside the ideal output, `1 − |M_jj|²` over inputs
    /// for diagonal gates, `1 − Σ_i |M_ij|²` otherwise.
    pub leakage: f64,
    /// Entropy in bits of one qubit after acting on `|+⟩|+⟩`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entanglement_entropy: Option<f64>,
    pub converged: bool,
    pub warnings: Vec<String>,
}

/// `arg` mapped to `(−π, π]`.
pub fn wrap_phase(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

pub fn process_fidelity(target: &[Vec<C64>], measured: &[Vec<C64>]) -> f64 {
    let d = target.len() as f64;
    let tr: C64 = target.iter().zip(measured).flat_map(|(tr, mr)| tr.iter().zip(mr).map(|(t, m)| t.conj() * m)).sum();
    tr.norm_sqr() / (d * d)
}

fn column_leakage(measured: &[Vec<C64>]) -> f64 {
    let d = measured.len();
    (0..d).map(|j| 1.0 - (0..d).map(|i| measured[i][j].norm_sqr()).sum::<f64>()).fold(0.0, f64::max)
}

/// Packet setup shared by all experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub evolve: EvolveConfig,
    /// Defaults to `x₀ = 0`, `p₀ = N/4`, `Δx = ⌈N^{1/3}⌉`.
    #[serde(default)]
    pub packet: Option<PacketParams>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { evolve: EvolveConfig::default(), packet: None }
    }
}

impl ExperimentConfig {
    pub fn packet(&self, n: usize) -> PacketParams {
        self.packet.unwrap_or_else(|| PacketParams::default_for(n, 0.0))
    }
}

/// The one-qubit dual-rail sector: exactly one excitation on `q0.r0`/`q0.r1`.
pub fn single_qubit_basis(n: usize) -> Result<SectorBasis, HarnessError> {
    let layout = ChainLayout::dual_rail(n, 1)?;
    let spec = SectorSpec::new(vec![Constraint::AtMost(1); 2]).with_joint(vec![0, 1], 1);
    Ok(enumerate_basis(&layout, &spec)?)
}

/// Distance, in sites, kept between the packet peak and a finite block.
pub fn finite_margin(params: &PacketParams) -> usize {
    (4.0 * params.dx).ceil() as usize + 2
}

/// Site range and crossing time of a finite block of `len` sites.
pub fn finite_placement(n: usize, params: &PacketParams, len: usize) -> Result<(SiteRange, f64), HarnessError> {
    let margin = finite_margin(params);
    let v = params.group_velocity(n);
    if v.abs() < 1e-12 {
        return Err(HarnessError::Parameter("packet does not move; finite blocks need p₀ ≠ 0, N/2".into()));
    }
    if len == 0 || len + 3 * margin > n {
        return Err(HarnessError::BudgetOverflow(format!(
            "block of {len} sites plus margins {margin} does not fit a ring of {n} sites"
        )));
    }
    let x0 = params.x0.round() as i64;
    let nn = n as i64;
    // ahead of the packet in the direction it moves
    let (start, end) = if v < 0.0 {
        (x0 - margin as i64 - len as i64, x0 - margin as i64)
    } else {
        (x0 + margin as i64 + 1, x0 + margin as i64 + 1 + len as i64)
    };
    let range = SiteRange::span(start.rem_euclid(nn) as usize, end.rem_euclid(nn) as usize);
    Ok((range, (len + 2 * margin) as f64 / v.abs()))
}

struct SingleQubitRun {
    measured: Vec<Vec<C64>>,
    /// `⟨ref_i|ψ⟩` for each extra input state.
    extra: Vec<[C64; 2]>,
    populations: Vec<f64>,
}

fn run_single_qubit(
    n: usize,
    block: impl Fn(SiteRange) -> GateBlock,
    t: f64,
    mode: GateMode,
    extra_inputs: &[(C64, C64)],
    cfg: &ExperimentConfig,
) -> Result<(SingleQubitRun, f64), HarnessError> {
    let basis = single_qubit_basis(n)?;
    let params = cfg.packet(n);
    let (range, duration, effective_t) = match mode {
        GateMode::FullRing => (SiteRange::FullRing, t, t),
        GateMode::Finite => {
            let len = (params.group_velocity(n).abs() * t).round() as usize;
            let (r, d) = finite_placement(n, &params, len)?;
            (r, d, len as f64 / params.group_velocity(n).abs())
        }
    };
    let h = h_total(&basis, &[block(range)], None)?;
    let h0 = h_free(&basis, None)?;
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let refs: Vec<StateVector> = [(one, zero), (zero, one)]
        .iter()
        .map(|&a| Ok(evolve(&h0, &logical_product(&basis, &[(0, a)], &params)?, duration, &cfg.evolve)?))
        .collect::<Result<_, HarnessError>>()?;
    let mut inputs = vec![(one, zero), (zero, one)];
    inputs.extend_from_slice(extra_inputs);
    let mut cols = Vec::new();
    let mut populations = Vec::new();
    for &a in &inputs {
        let psi = logical_product(&basis, &[(0, a)], &params)?;
        let out = evolve(&h, &psi, duration, &cfg.evolve)?;
        populations.push(readout(&out, &basis)?.qubits[0].p1);
        cols.push([refs[0].inner(&out)?, refs[1].inner(&out)?]);
    }
    let measured = vec![vec![cols[0][0], cols[1][0]], vec![cols[0][1], cols[1][1]]];
    Ok((SingleQubitRun { measured, extra: cols[2..].to_vec(), populations }, effective_t))
}

/// Phase gate `φ N̂¹` on rail 1. The target is `diag(1, e^{−iφt})`, i.e.
/// `e^{iφtZ/2}` up to global phase; the reported phase is `φt`.
pub fn run_z_gate(n: usize, phi: f64, t: f64, mode: GateMode, cfg: &ExperimentConfig) -> Result<GateResult, HarnessError> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = (C64::new(s, 0.0), C64::new(s, 0.0));
    let (run, te) = run_single_qubit(n, |r| GateBlock::z_gate("q0.r1", phi, r), t, mode, &[plus], cfg)?;
    let want = phi * te;
    let target = vec![vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)], vec![C64::new(0.0, 0.0), C64::from_polar(1.0, -want)]];
    let [a0, a1] = run.extra[0];
    let phase = -(a1 / a0).arg();
    let err = wrap_phase(phase - want).abs();
    let leakage = (0..2).map(|j| 1.0 - run.measured[j][j].norm_sqr()).fold(0.0, f64::max);
    Ok(GateResult {
        gate: "z".into(),
        n,
        process_fidelity: process_fidelity(&target, &run.measured),
        target,
        measured: run.measured,
        phases: vec![phase.rem_euclid(2.0 * PI)],
        phase_errors: vec![err],
        populations: run.populations,
        ancilla_return: Vec::new(),
        leakage,
        entanglement_entropy: None,
        converged: true,
        warnings: Vec::new(),
    })
}

/// Rung gate between the two rails. The target is `e^{−iφtX}`: rail-1
/// population `sin²(φt)` from `|𝟎⟩`, and `|±⟩` pick up `e^{∓iφt}`.
pub fn run_x_gate(n: usize, phi: f64, t: f64, mode: GateMode, cfg: &ExperimentConfig) -> Result<GateResult, HarnessError> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = (C64::new(s, 0.0), C64::new(s, 0.0));
    let minus = (C64::new(s, 0.0), C64::new(-s, 0.0));
    let (run, te) =
        run_single_qubit(n, |r| GateBlock::x_gate("q0.r0", "q0.r1", phi, r), t, mode, &[plus, minus], cfg)?;
    let th = phi * te;
    let c = C64::new(th.cos(), 0.0);
    let is = C64::new(0.0, -th.sin());
    let target = vec![vec![c, is], vec![is, c]];
    // eigenphases of |±⟩: project the output back on the same superposition
    let proj = |a: [C64; 2], sign: f64| (a[0] + sign * a[1]) * s;
    let ph_plus = proj(run.extra[0], 1.0).arg();
    let ph_minus = proj(run.extra[1], -1.0).arg();
    let phases = vec![ph_plus, ph_minus];
    let phase_errors = vec![wrap_phase(ph_plus + th).abs(), wrap_phase(ph_minus - th).abs()];
    Ok(GateResult {
        gate: "x".into(),
        n,
        process_fidelity: process_fidelity(&target, &run.measured),
        leakage: column_leakage(&run.measured),
        target,
        measured: run.measured,
        phases,
        phase_errors,
        populations: run.populations,
        ancilla_return: Vec::new(),
        entanglement_entropy: None,
        converged: true,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntangleOptions {
    /// `c` in `e/√N = c·N^{−2/3}`; ignored when `params` is given.
    pub coupling_scale: f64,
    #[serde(default)]
    pub params: Option<AncillaParams>,
    pub escalation: TruncationEscalation,
    pub experiment: ExperimentConfig,
    /// Run even when `1/m ≤ 2N²`.
    #[serde(default)]
    pub allow_outside_gap: bool,
}

impl Default for EntangleOptions {
    fn default() -> Self {
        Self {
            coupling_scale: 1.0,
            params: None,
            escalation: TruncationEscalation { k_max: vec![1, 2], threshold: 2e-2, max_dim: Some(40_000) },
            experiment: ExperimentConfig::default(),
            allow_outside_gap: false,
        }
    }
}

impl EntangleOptions {
    pub fn params(&self, n: usize) -> AncillaParams {
        self.params.unwrap_or_else(|| AncillaParams::scaling_rule(n, self.coupling_scale))
    }
}

/// The three-stage doublet sequence realising `Λ_φ` between the rail-1
/// chains `a` and `b` through ancilla `anc`. Rail `b` always sees the
/// opposite coupling, so only `N̂ᵃ − N̂ᵇ` matters; stage durations follow
/// `(|e|/√N)·t = π/4, |φ|, π/4`.
pub fn lambda_schedule(n: usize, e: f64, phi: f64, a: &str, anc: &str, b: &str, range: SiteRange) -> Vec<Segment> {
    let e = e.abs();
    let g = e / (n as f64).sqrt();
    let pair = |axis: Axis, s: f64| vec![GateBlock::v_block(axis, a, anc, s, range), GateBlock::v_block(axis, b, anc, -s, range)];
    let quarter = PI / 4.0 / g;
    let sgn = if phi < 0.0 { -1.0 } else { 1.0 };
    vec![
        Segment { blocks: pair(Axis::Y, -e), duration: quarter },
        Segment { blocks: pair(Axis::X, -sgn * e), duration: phi.abs() / g },
        Segment { blocks: pair(Axis::Y, e), duration: quarter },
    ]
}

/// Total duration of [`lambda_schedule`].
pub fn lambda_duration(n: usize, e: f64, phi: f64) -> f64 {
    let g = e.abs() / (n as f64).sqrt();
    (PI / 2.0 + phi.abs()) / g
}

/// Outcome of one rail-1 occupation sector `(a, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorOutcome {
    pub occupation: (usize, usize),
    pub dimension: usize,
    pub amplitude: C64,
    pub ancilla_return: f64,
    pub achieved_k: usize,
    pub converged: bool,
    pub budget_limited: bool,
    pub differences: Vec<(usize, f64)>,
    pub matvecs: usize,
}

fn entangling_layout(n: usize) -> Result<ChainLayout, HarnessError> {
    Ok(ChainLayout::new(n)?
        .with_chain("q0.r1", ChainRole::Rail1, Some(0))?
        .with_chain("anc", ChainRole::Ancilla, None)?
        .with_chain("q1.r1", ChainRole::Rail1, Some(1))?)
}

/// Evolves one occupation sector of the two rail-1 chains. Rail-0 chains
/// only ever evolve freely, so they drop out of the logical amplitude.
pub fn run_lambda_sector(
    n: usize,
    occupation: (usize, usize),
    schedule: &[Segment],
    m: f64,
    opts: &EntangleOptions,
) -> Result<SectorOutcome, HarnessError> {
    let layout = entangling_layout(n)?;
    let (a, b) = occupation;
    if a > 1 || b > 1 {
        return Err(HarnessError::Parameter("rail occupations are 0 or 1".into()));
    }
    let spec = SectorSpec::new(vec![Constraint::Exactly(a), Constraint::AtMost(0), Constraint::Exactly(b)]);
    let params = opts.experiment.packet(n);
    let packet = gaussian_amplitudes(n, &params);
    let factors: Vec<Factor> = [(0, a), (2, b)]
        .iter()
        .filter(|&&(_, k)| k == 1)
        .map(|&(c, _)| Factor::single_particle(c, &packet))
        .collect();
    let initial = |basis: &SectorBasis| Ok(product_state(basis, &factors)?);
    let problem = TruncatedProblem { layout: &layout, spec: spec.clone(), schedule, m: Some(m), initial: &initial };
    let outcome = evolve_with_truncation(&problem, &opts.experiment.evolve, &opts.escalation)?;
    // reference: free rails, ancilla in its vacuum
    let small = problem.basis(0)?;
    let t: f64 = schedule.iter().map(|s| s.duration).sum();
    let free = evolve(&h_free(&small, Some(m))?, &initial(&small)?, t, &opts.experiment.evolve)?;
    let reference = embed(&free, &small, &outcome.basis);
    let amplitude = reference.inner(&outcome.state)?;
    let ro = readout(&outcome.state, &outcome.basis)?;
    Ok(SectorOutcome {
        occupation,
        dimension: outcome.basis.dim(),
        amplitude,
        ancilla_return: ro.ancilla_return[0].1,
        achieved_k: outcome.achieved_k,
        converged: outcome.converged,
        budget_limited: outcome.budget_limited,
        differences: outcome.differences,
        matvecs: outcome.stats.matvecs,
    })
}

/// Von Neumann entropy (bits) of qubit 0 for two-qubit amplitudes `c[ab]`.
pub fn entanglement_entropy(c: &[C64; 4]) -> f64 {
    let norm: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    if norm == 0.0 {
        return 0.0;
    }
    // ρ_A = C C† with C[a][b] = c[2a+b]
    let r00 = (c[0].norm_sqr() + c[1].norm_sqr()) / norm;
    let r11 = (c[2].norm_sqr() + c[3].norm_sqr()) / norm;
    let r01 = (c[0] * c[2].conj() + c[1] * c[3].conj()) / norm;
    let tr = r00 + r11;
    let det = r00 * r11 - r01.norm_sqr();
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    [tr / 2.0 + disc, tr / 2.0 - disc]
        .iter()
        .filter(|&&l| l > 1e-15)
        .map(|&l| -l * l.log2())
        .sum()
}

/// Entangling gate `Λ_φ = diag(1, e^{−iφ}, e^{−iφ}, 1)` through a shared
/// ancilla chain, FullRing blocks staged in time.
pub fn run_entangling_gate(n: usize, phi: f64, opts: &EntangleOptions) -> Result<(GateResult, Vec<SectorOutcome>), HarnessError> {
    let p = opts.params(n);
    let mut warnings = Vec::new();
    if !p.gap_regime(n) {
        if !opts.allow_outside_gap {
            return Err(HarnessError::GapRegime { n, inv_m: 1.0 / p.m });
        }
        warnings.push(format!("outside the gap regime: 1/m = {} ≤ 2N² = {}", 1.0 / p.m, 2 * n * n));
    }
    let schedule = lambda_schedule(n, p.e, phi, "q0.r1", "anc", "q1.r1", SiteRange::FullRing);
    let mut sectors = Vec::new();
    for occ in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        sectors.push(run_lambda_sector(n, occ, &schedule, p.m, opts)?);
    }
    let c: [C64; 4] = [sectors[0].amplitude, sectors[1].amplitude, sectors[2].amplitude, sectors[3].amplitude];
    let diag_target = [0.0, -phi, -phi, 0.0];
    let zero = C64::new(0.0, 0.0);
    let target: Vec<Vec<C64>> =
        (0..4).map(|i| (0..4).map(|j| if i == j { C64::from_polar(1.0, diag_target[i]) } else { zero }).collect()).collect();
    let measured: Vec<Vec<C64>> = (0..4).map(|i| (0..4).map(|j| if i == j { c[i] } else { zero }).collect()).collect();
    let phases: Vec<f64> = c.iter().map(|z| z.arg()).collect();
    let phase_errors = phases.iter().zip(&diag_target).map(|(a, b)| wrap_phase(a - b).abs()).collect();
    let plus: [C64; 4] = [c[0] * 0.5, c[1] * 0.5, c[2] * 0.5, c[3] * 0.5];
    for s in &sectors {
        if !s.converged {
            warnings.push(format!(
                "sector {:?}: truncation not converged at k = {}{}",
                s.occupation,
                s.achieved_k,
                if s.budget_limited { " (dimension budget reached)" } else { "" }
            ));
        }
    }
    let result = GateResult {
        gate: format!("lambda({phi})"),
        n,
        process_fidelity: process_fidelity(&target, &measured),
        leakage: c.iter().map(|z| 1.0 - z.norm_sqr()).fold(0.0, f64::max),
        target,
        measured,
        phases,
        phase_errors,
        populations: Vec::new(),
        ancilla_return: sectors.iter().map(|s| s.ancilla_return).collect(),
        entanglement_entropy: Some(entanglement_entropy(&plus)),
        converged: sectors.iter().all(|s| s.converged),
        warnings,
    };
    Ok((result, sectors))
}

/// Non-local oracle `φ_c N̂ᵃN̂ᵇ` for time `t` on the four rail-1 sectors.
pub fn run_nonlocal_cphase(n: usize, phi_c: f64, t: f64, cfg: &ExperimentConfig) -> Result<GateResult, HarnessError> {
    let layout = ChainLayout::new(n)?
        .with_chain("q0.r1", ChainRole::Rail1, Some(0))?
        .with_chain("q1.r1", ChainRole::Rail1, Some(1))?;
    let params = cfg.packet(n);
    let packet = gaussian_amplitudes(n, &params);
    let block = GateBlock::nonlocal_cphase("q0.r1", "q1.r1", phi_c, SiteRange::FullRing);
    let mut c = [C64::new(0.0, 0.0); 4];
    for (i, (a, b)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
        let basis = enumerate_basis(&layout, &SectorSpec::new(vec![Constraint::Exactly(a), Constraint::Exactly(b)]))?;
        let factors: Vec<Factor> =
            [(0, a), (1, b)].iter().filter(|&&(_, k)| k == 1).map(|&(ch, _)| Factor::single_particle(ch, &packet)).collect();
        let psi = product_state(&basis, &factors)?;
        let out = evolve(&h_total(&basis, &[block.clone()], None)?, &psi, t, &cfg.evolve)?;
        let free = evolve(&h_free(&basis, None)?, &psi, t, &cfg.evolve)?;
        c[i] = free.inner(&out)?;
    }
    let diag_target = [0.0, 0.0, 0.0, -phi_c * t];
    let zero = C64::new(0.0, 0.0);
    let target: Vec<Vec<C64>> =
        (0..4).map(|i| (0..4).map(|j| if i == j { C64::from_polar(1.0, diag_target[i]) } else { zero }).collect()).collect();
    let measured: Vec<Vec<C64>> = (0..4).map(|i| (0..4).map(|j| if i == j { c[i] } else { zero }).collect()).collect();
    let phases: Vec<f64> = c.iter().map(|z| z.arg()).collect();
    let plus = [c[0] * 0.5, c[1] * 0.5, c[2] * 0.5, c[3] * 0.5];
    Ok(GateResult {
        gate: format!("cphase({phi_c})"),
        n,
        process_fidelity: process_fidelity(&target, &measured),
        leakage: c.iter().map(|z| 1.0 - z.norm_sqr()).fold(0.0, f64::max),
        phase_errors: phases.iter().zip(&diag_target).map(|(a, b)| wrap_phase(a - b).abs()).collect(),
        target,
        measured,
        phases,
        populations: Vec::new(),
        ancilla_return: Vec::new(),
        entanglement_entropy: Some(entanglement_entropy(&plus)),
        converged: true,
        warnings: Vec::new(),
    })
}

/// `Λ_φ` equals local phases `e^{−iφ(a+b)}` times a CPHASE of `+2φ` on
/// `|𝟏𝟏⟩`. Runs the non-local oracle with `φ_c t = −2φ`, applies the local
/// phases and returns the largest per-input phase difference to `lambda`.
pub fn compare_lambda_with_cphase(
    n: usize,
    phi: f64,
    lambda: &GateResult,
    cfg: &ExperimentConfig,
) -> Result<f64, HarnessError> {
    let oracle = run_nonlocal_cphase(n, -2.0 * phi, 1.0, cfg)?;
    let local = [0.0, -phi, -phi, -2.0 * phi];
    Ok((0..4)
        .map(|i| wrap_phase(lambda.phases[i] - oracle.phases[i] - local[i]).abs())
        .fold(0.0, f64::max))
}
