//! Closed forms of the free-fermion ancilla and of the perturbative error
//! analysis of one V_X block acting on a packet on rail 1 (rail 1′ empty).

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{enumerate_basis, BasisError, ChainLayout, ChainRole, Constraint, SectorBasis, SectorSpec};
use crate::operators::{h_total, h_tilde0, Axis, GateBlock, OpError, SiteRange};
use crate::sparse::{SparseOperator, C64};
use crate::states::{product_state, Factor, StateError};
use crate::symmetry::MomentumBlock;

#[derive(Debug, Error)]
pub enum AnalyticError {
    #[error("mode index {p} outside [0, {n})")]
    ModeRange { p: usize, n: usize },
    #[error("malformed Fock label: {0}")]
    Label(String),
    #[error("perturbed eigenvector selection is ambiguous (overlaps {0:.4} and {1:.4})")]
    Ambiguous(f64, f64),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    State(#[from] StateError),
}

/// Jordan–Wigner parity sector of the ancilla: `P̂ = +1` (even particle
/// number) quantizes momenta at half-integers, `P̂ = −1` (odd) at integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParitySector {
    Even,
    Odd,
}

impl ParitySector {
    pub fn of_count(k: usize) -> Self {
        if k % 2 == 0 {
            ParitySector::Even
        } else {
            ParitySector::Odd
        }
    }

    pub fn sign(self) -> i32 {
        match self {
            ParitySector::Even => 1,
            ParitySector::Odd => -1,
        }
    }

    /// Momentum of mode `p`: `p + ½` or `p`.
    pub fn momentum(self, p: usize) -> f64 {
        match self {
            ParitySector::Even => p as f64 + 0.5,
            ParitySector::Odd => p as f64,
        }
    }
}

/// `ω^±_p = sin²(π·momentum/N)/m`.
pub fn jw_mode_energy(n: usize, m: f64, sector: ParitySector, p: usize) -> Result<f64, AnalyticError> {
    if p >= n {
        return Err(AnalyticError::ModeRange { p, n });
    }
    Ok((PI * sector.momentum(p) / n as f64).sin().powi(2) / m)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockLabel {
    pub sector: ParitySector,
    /// Strictly increasing mode indices.
    pub modes: Vec<usize>,
}

impl FockLabel {
    pub fn new(n: usize, modes: Vec<usize>) -> Result<Self, AnalyticError> {
        if modes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AnalyticError::Label("modes must be strictly increasing".into()));
        }
        if let Some(&p) = modes.iter().find(|&&p| p >= n) {
            return Err(AnalyticError::ModeRange { p, n });
        }
        Ok(Self { sector: ParitySector::of_count(modes.len()), modes })
    }

    pub fn vacuum() -> Self {
        Self { sector: ParitySector::Even, modes: Vec::new() }
    }

    pub fn energy(&self, n: usize, m: f64) -> f64 {
        self.modes.iter().map(|&p| jw_mode_energy(n, m, self.sector, p).expect("validated")).sum()
    }

    /// Total momentum `Σ momenta` (an integer for every sector).
    pub fn total_momentum(&self) -> f64 {
        self.modes.iter().map(|&p| self.sector.momentum(p)).sum()
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for p in start..n {
            cur.push(p);
            rec(p + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Every Fock state with exactly `k` fermions, in the parity sector fixed by `k`.
pub fn fock_labels(n: usize, k: usize) -> Vec<FockLabel> {
    subsets(n, k).into_iter().map(|modes| FockLabel { sector: ParitySector::of_count(k), modes }).collect()
}

/// Sorted `k`-particle ancilla spectrum.
pub fn fock_spectrum(n: usize, m: f64, k: usize) -> Vec<f64> {
    let mut e: Vec<f64> = fock_labels(n, k).iter().map(|l| l.energy(n, m)).collect();
    e.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    e
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapCertificate {
    /// `2 sin²(π/2N)/m − 4 − |e|/√N`.
    pub min_gap_lower_bound: f64,
    /// `1/m > 2N²`.
    pub hypothesis_holds: bool,
}

pub fn gap_certificate(n: usize, m: f64, e: f64) -> GapCertificate {
    let nf = n as f64;
    let bound = 2.0 * (PI / (2.0 * nf)).sin().powi(2) / m - 4.0 - e.abs() / nf.sqrt();
    GapCertificate { min_gap_lower_bound: bound, hypothesis_holds: 1.0 / m > 2.0 * nf * nf }
}

/// Reference state `|p̃, Ω, ±⟩` of the single-packet sector and the block
/// coupling `e` on rail 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationContext {
    pub n: usize,
    pub m: f64,
    pub e: f64,
    pub p: usize,
    /// `+1` for `|+⟩ = (|Ω⟩+|Ψ⟩)/√2`, `−1` for `|−⟩`.
    pub sign: i8,
    pub axis: AxisLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisLabel {
    X,
    Y,
}

impl PerturbationContext {
    pub fn new(n: usize, m: f64, e: f64, p: usize, sign: i8) -> Self {
        Self { n, m, e, p: p % n, sign, axis: AxisLabel::X }
    }

    pub fn gap_regime(&self) -> bool {
        1.0 / self.m > 2.0 * (self.n as f64).powi(2)
    }

    /// `E⁰_n = 2cos(2πp/N) ± e/√N`.
    pub fn reference_energy(&self) -> f64 {
        let nf = self.n as f64;
        2.0 * (2.0 * PI * self.p as f64 / nf).cos() + self.sign as f64 * self.e / nf.sqrt()
    }

    /// `E⁰_k = 2cos(2πq/N) + E_α`.
    pub fn final_energy(&self, q: usize, anc: &FockLabel) -> f64 {
        2.0 * (2.0 * PI * q as f64 / self.n as f64).cos() + anc.energy(self.n, self.m)
    }
}

fn momentum_conserved(n: usize, total: f64) -> bool {
    let r = total.rem_euclid(n as f64);
    r.abs() < 1e-9 || (r - n as f64).abs() < 1e-9
}

/// `⟨q̃, α|V′|p̃, Ω, ±⟩` for a final state with ancilla outside the doublet.
///
/// One fermion (integer α ≠ 0): `e/√(2N)·δ(α+q−p)`. Two fermions at
/// half-integer momenta α₁ < α₂: `∓i·e/√(2N³)·(cot(πα₂/N) − cot(πα₁/N))·δ(α₁+α₂+q−p)`,
/// with `|α₁α₂⟩ = Σ_{x₁<x₂} (e^{2πi(α₁x₁+α₂x₂)/N} − e^{2πi(α₁x₂+α₂x₁)/N})/N |x₁x₂⟩`.
/// The Y block multiplies the one-fermion element by `i` and the
/// two-fermion element by `i` as well (both are creations). Other particle
/// numbers and the doublet itself give zero.
pub fn vprime_element(ctx: &PerturbationContext, q: usize, anc: &FockLabel) -> C64 {
    let n = ctx.n;
    let nf = n as f64;
    let rot = match ctx.axis {
        AxisLabel::X => C64::new(1.0, 0.0),
        AxisLabel::Y => C64::new(0.0, 1.0),
    };
    match (anc.modes.len(), anc.sector) {
        (1, ParitySector::Odd) => {
            let a = anc.modes[0];
            if a == 0 || !momentum_conserved(n, (a + q) as f64 - ctx.p as f64) {
                return C64::new(0.0, 0.0);
            }
            rot * ctx.e / (2.0 * nf).sqrt()
        }
        (2, ParitySector::Even) => {
            let a1 = anc.sector.momentum(anc.modes[0]);
            let a2 = anc.sector.momentum(anc.modes[1]);
            if !momentum_conserved(n, a1 + a2 + q as f64 - ctx.p as f64) {
                return C64::new(0.0, 0.0);
            }
            let cot = |a: f64| 1.0 / (PI * a / nf).tan();
            let mag = ctx.e / (2.0 * nf.powi(3)).sqrt() * (cot(a2) - cot(a1));
            rot * C64::new(0.0, -(ctx.sign as f64) * mag)
        }
        _ => C64::new(0.0, 0.0),
    }
}

/// Final states reachable from `|n₀⟩` with a non-zero element.
pub fn coupled_final_states(ctx: &PerturbationContext) -> Vec<(usize, FockLabel, C64)> {
    let n = ctx.n;
    let mut out = Vec::new();
    for k in 1..=2 {
        for label in fock_labels(n, k) {
            let tm = label.total_momentum().round() as i64;
            let q = (ctx.p as i64 - tm).rem_euclid(n as i64) as usize;
            let v = vprime_element(ctx, q, &label);
            if v.norm() > 0.0 {
                out.push((q, label, v));
            }
        }
    }
    out
}

/// `Σ_k |⟨k₀|V′|n₀⟩| / |E⁰_n − E⁰_k|` over one- and two-fermion final states.
pub fn sum_bound(ctx: &PerturbationContext) -> f64 {
    let en = ctx.reference_energy();
    coupled_final_states(ctx).iter().map(|(q, l, v)| v.norm() / (en - ctx.final_energy(*q, l)).abs()).sum()
}

/// Second-order estimates `(√Σ|V′|²/ΔE², Σ|V′|²/ΔE)` of the defect and shift.
pub fn second_order(ctx: &PerturbationContext) -> (f64, f64) {
    let en = ctx.reference_energy();
    let (mut d2, mut shift) = (0.0, 0.0);
    for (q, l, v) in coupled_final_states(ctx) {
        let de = en - ctx.final_energy(q, &l);
        d2 += v.norm_sqr() / (de * de);
        shift += v.norm_sqr() / de;
    }
    (d2.sqrt(), shift)
}

/// Rail `a` (one excitation) and ancilla `anc` (at most `k_max`).
pub fn single_packet_basis(n: usize, k_max: usize) -> Result<SectorBasis, AnalyticError> {
    let layout = ChainLayout::new(n)?
        .with_chain("a", ChainRole::Rail1, Some(0))?
        .with_chain("anc", ChainRole::Ancilla, None)?;
    Ok(enumerate_basis(&layout, &SectorSpec::new(vec![Constraint::Exactly(1), Constraint::AtMost(k_max)]))?)
}

pub fn single_packet_block(ctx: &PerturbationContext) -> GateBlock {
    let axis = match ctx.axis {
        AxisLabel::X => Axis::X,
        AxisLabel::Y => Axis::Y,
    };
    GateBlock::v_block(axis, "a", "anc", ctx.e, SiteRange::FullRing)
}

/// `(H, H̃₀)` on [`single_packet_basis`].
pub fn single_packet_hamiltonians(
    ctx: &PerturbationContext,
    basis: &SectorBasis,
) -> Result<(SparseOperator, SparseOperator), AnalyticError> {
    let blocks = [single_packet_block(ctx)];
    Ok((h_total(basis, &blocks, Some(ctx.m))?, h_tilde0(basis, &blocks, Some(ctx.m))?))
}

/// `|p̃⟩ ⊗ (|Ω⟩ ± |Ψ⟩)/√2` on [`single_packet_basis`].
pub fn reference_state_amplitudes(ctx: &PerturbationContext, basis: &SectorBasis) -> Result<Vec<C64>, AnalyticError> {
    let n = ctx.n;
    let rail = crate::states::momentum_amplitudes(n, ctx.p as i64);
    let s = 1.0 / (2.0f64).sqrt();
    let psi = 1.0 / (n as f64).sqrt();
    let mut anc = vec![(0u64, C64::new(s, 0.0))];
    anc.extend((0..n).map(|x| (1u64 << x, C64::new(ctx.sign as f64 * s * psi, 0.0))));
    let st = product_state(basis, &[Factor::single_particle(0, &rail), Factor::chain(1, anc)])?;
    Ok(st.into_amplitudes())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbedKet {
    /// `√(1 − |⟨n₀|n⟩|²)`.
    pub defect: f64,
    /// `E_n − E⁰_n`.
    pub energy_shift: f64,
    pub overlap: f64,
    pub runner_up_overlap: f64,
}

/// Exact eigenvector of `H = H̃₀ + V′` (ancilla truncated at `k_max`) with
/// the largest overlap with `|n₀⟩`, found inside the momentum-`p` block.
pub fn perturbed_overlap_and_shift(ctx: &PerturbationContext, k_max: usize) -> Result<PerturbedKet, AnalyticError> {
    let basis = single_packet_basis(ctx.n, k_max)?;
    let (h, _) = single_packet_hamiltonians(ctx, &basis)?;
    let n0 = reference_state_amplitudes(ctx, &basis)?;
    let block = MomentumBlock::new(&basis, ctx.p);
    let hb = block.project(&h);
    let n0b: DVector<C64> = block.restrict(&n0);
    let eig = hb.symmetric_eigen();
    let mut best = (0.0, 0.0, 0usize);
    for l in 0..eig.eigenvalues.len() {
        let ov = eig.eigenvectors.column(l).dotc(&n0b).norm_sqr();
        if ov > best.0 {
            best = (ov, best.0.max(best.1), l);
        } else if ov > best.1 {
            best.1 = ov;
        }
    }
    if best.0 - best.1 < 0.01 {
        return Err(AnalyticError::Ambiguous(best.0, best.1));
    }
    Ok(PerturbedKet {
        defect: (1.0 - best.0).max(0.0).sqrt(),
        energy_shift: eig.eigenvalues[best.2] - ctx.reference_energy(),
        overlap: best.0,
        runner_up_overlap: best.1,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_mode_and_small_table() {
        assert_eq!(jw_mode_energy(7, 0.1, ParitySector::Odd, 0).unwrap(), 0.0);
        let e: Vec<f64> = (0..4).map(|p| jw_mode_energy(4, 1.0, ParitySector::Odd, p).unwrap()).collect();
        for (a, b) in e.iter().zip([0.0, 0.5, 1.0, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(jw_mode_energy(4, 1.0, ParitySector::Odd, 4).is_err());
    }

    #[test]
    fn even_sector_has_no_zero_mode() {
        for n in 3..12 {
            assert!((0..n).all(|p| jw_mode_energy(n, 1.0, ParitySector::Even, p).unwrap() > 0.0));
        }
    }

    #[test]
    fn certificate_regimes() {
        let n = 8;
        let p = crate::operators::AncillaParams::scaling_rule(n, 1.0);
        let c = gap_certificate(n, p.m, p.e);
        assert!(c.hypothesis_holds && c.min_gap_lower_bound > 1.0);
        let c = gap_certificate(n, 1.0, p.e);
        assert!(!c.hypothesis_holds && c.min_gap_lower_bound < 0.0);
    }

    #[test]
    fn selection_rules() {
        let ctx = PerturbationContext::new(8, 0.01, 0.5, 2, 1);
        let psi = FockLabel::new(8, vec![0]).unwrap();
        assert_eq!(vprime_element(&ctx, 2, &psi), C64::new(0.0, 0.0));
        let one = FockLabel::new(8, vec![3]).unwrap();
        assert_eq!(vprime_element(&ctx, 0, &one), C64::new(0.0, 0.0));
        assert!((vprime_element(&ctx, 7, &one).norm() - 0.5 / 4.0).abs() < 1e-15);
        let three = FockLabel::new(8, vec![0, 1, 2]).unwrap();
        assert_eq!(vprime_element(&ctx, 5, &three), C64::new(0.0, 0.0));
    }

    #[test]
    fn zero_coupling_sum_vanishes() {
        let ctx = PerturbationContext::new(8, 0.01, 0.0, 2, 1);
        assert_eq!(sum_bound(&ctx), 0.0);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.7)).collect();
        assert!((loglog_slope(&xs, &ys) + 0.7).abs() < 1e-12);
    }
}
