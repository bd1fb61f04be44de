//! `e^{−iHt}` on sparse Hermitian operators: Lanczos–Krylov stepping with
//! a posteriori error control, plus a dense spectral oracle.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{enumerate_basis, BasisError, ChainLayout, Constraint, SectorBasis, SectorSpec};
use crate::operators::{h_tilde0, h_total, GateBlock, OpError};
use crate::sparse::{SparseOperator, C64};
use crate::states::{StateError, StateVector};

#[derive(Debug, Error)]
pub enum PropagateError {
    #[error("operator and state live on different bases")]
    BasisMismatch,
    #[error("operator is not Hermitian (defect {0:.3e})")]
    NonHermitian(f64),
    #[error("Krylov step did not converge after {0} halvings at t = {1}")]
    StepUnderflow(usize, f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    /// Target 2-norm error per unit time.
    pub tolerance: f64,
    pub max_krylov_dim: usize,
    /// Dimension below which callers may cross-check against [`DenseEvolver`].
    pub oracle_threshold: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_krylov_dim: 48, oracle_threshold: 1024 }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<(), PropagateError> {
        if !(self.tolerance > 0.0) {
            return Err(PropagateError::Config("tolerance must be positive".into()));
        }
        if self.max_krylov_dim < 4 {
            return Err(PropagateError::Config("max_krylov_dim must be at least 4".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolveStats {
    pub steps: usize,
    pub matvecs: usize,
    pub rejected: usize,
    /// Sum of accepted per-step error estimates.
    pub error_estimate: f64,
}

const MAX_HALVINGS: usize = 60;

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn nrm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Krylov propagator bound to one operator; reusable across calls.
pub struct Propagator<'a> {
    h: &'a SparseOperator,
    cfg: EvolveConfig,
    /// Row-sum bound on the spectral radius.
    gershgorin: f64,
    /// Spectral half-width estimate, refined from Ritz values.
    half_width: f64,
}

impl<'a> Propagator<'a> {
    pub fn new(h: &'a SparseOperator, cfg: EvolveConfig) -> Result<Self, PropagateError> {
        cfg.validate()?;
        let defect = h.hermiticity_defect();
        if defect > crate::sparse::HERMITIAN_TOL {
            return Err(PropagateError::NonHermitian(defect));
        }
        let g = h.gershgorin_bound();
        Ok(Self { h, cfg, gershgorin: g, half_width: g })
    }

    /// `e^{−iHt}ψ`.
    pub fn evolve(&mut self, psi: &StateVector, t: f64) -> Result<(StateVector, EvolveStats), PropagateError> {
        if psi.basis_hash() != self.h.basis_hash() || psi.dim() != self.h.dim() {
            return Err(PropagateError::BasisMismatch);
        }
        let mut stats = EvolveStats::default();
        let mut v = psi.amplitudes().to_vec();
        if t == 0.0 || self.h.nnz() == 0 {
            if self.h.nnz() == 0 {
                stats.steps = 1;
            }
            return Ok((StateVector::from_raw(psi.basis_hash(), v), stats));
        }
        let dir = t.signum();
        let mut remaining = t.abs();
        let hn = self.half_width.max(1e-300);
        let mut tau_next = (1.0 / hn).min(remaining);
        let m_max = self.cfg.max_krylov_dim.min(self.h.dim().max(1));
        // Krylov basis storage, reused between steps
        let mut vs: Vec<Vec<C64>> = Vec::with_capacity(m_max + 1);
        let mut w = vec![C64::new(0.0, 0.0); v.len()];
        while remaining > 0.0 {
            let beta0 = nrm(&v);
            if beta0 == 0.0 {
                break;
            }
            let (alpha, beta, breakdown) = self.lanczos(&v, beta0, m_max, &mut vs, &mut w);
            stats.matvecs += alpha.len();
            let k = alpha.len();
            let mut t_mat = DMatrix::<f64>::zeros(k, k);
            for i in 0..k {
                t_mat[(i, i)] = alpha[i];
                if i + 1 < k {
                    t_mat[(i, i + 1)] = beta[i];
                    t_mat[(i + 1, i)] = beta[i];
                }
            }
            let eig = SymmetricEigen::new(t_mat);
            let (lo, hi) = eig.eigenvalues.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
            let centre = 0.5 * (lo + hi);
            if k >= 8 {
                self.half_width = (0.5 * (hi - lo) * 1.05).min(self.gershgorin).max(1e-300);
            }
            let b_last = if breakdown { 0.0 } else { beta[k - 1] };
            let coeffs = |tau: f64| -> DVector<C64> {
                let mut y = DVector::<C64>::zeros(k);
                for l in 0..k {
                    let q0 = eig.eigenvectors[(0, l)];
                    let ph = C64::from_polar(q0, -dir * tau * (eig.eigenvalues[l] - centre));
                    for i in 0..k {
                        y[i] += ph * eig.eigenvectors[(i, l)];
                    }
                }
                y
            };
            // Lanczos is unreliable far outside the resolved polynomial degree
            let cap = if breakdown { remaining } else { 1.5 * k as f64 / self.half_width.max(1e-300) };
            let mut tau = if breakdown { remaining } else { tau_next.max(cap.min(remaining) * 0.25).min(cap).min(remaining) };
            let mut halvings = 0;
            let (y, err) = loop {
                let y = coeffs(tau);
                let err = beta0 * b_last * y[k - 1].norm();
                if err <= self.cfg.tolerance * tau || breakdown {
                    break (y, err);
                }
                halvings += 1;
                stats.rejected += 1;
                if halvings > MAX_HALVINGS {
                    return Err(PropagateError::StepUnderflow(halvings, t.abs() - remaining));
                }
                tau *= 0.5;
            };
            // v ← β₀ e^{−iτc} V y
            let phase = C64::from_polar(beta0, -dir * tau * centre);
            w.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
            for (i, vi) in vs.iter().take(k).enumerate() {
                axpy(&mut w, phase * y[i], vi);
            }
            std::mem::swap(&mut v, &mut w);
            stats.steps += 1;
            stats.error_estimate += err;
            remaining -= tau;
            if remaining < 1e-14 * t.abs() {
                remaining = 0.0;
            }
            // grow when the error budget was barely touched
            tau_next = if halvings == 0 { (2.0 * tau).min(cap) } else { tau };
        }
        Ok((StateVector::from_raw(psi.basis_hash(), v), stats))
    }

    /// Three-term Lanczos with one local re-orthogonalization pass.
    fn lanczos(
        &self,
        v0: &[C64],
        beta0: f64,
        m: usize,
        vs: &mut Vec<Vec<C64>>,
        w: &mut Vec<C64>,
    ) -> (Vec<f64>, Vec<f64>, bool) {
        let dim = v0.len();
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        if vs.is_empty() {
            vs.push(vec![C64::new(0.0, 0.0); dim]);
        }
        for (a, b) in vs[0].iter_mut().zip(v0) {
            *a = b / beta0;
        }
        let scale = self.half_width.max(1.0);
        for j in 0..m {
            self.h.matvec_into(&vs[j], w);
            let a = dot(&vs[j], w).re;
            axpy(w, C64::new(-a, 0.0), &vs[j]);
            if j > 0 {
                axpy(w, C64::new(-beta[j - 1], 0.0), &vs[j - 1]);
            }
            let c = dot(&vs[j], w);
            axpy(w, -c, &vs[j]);
            if j > 0 {
                let c = dot(&vs[j - 1], w);
                axpy(w, -c, &vs[j - 1]);
            }
            alpha.push(a + c.re);
            let b = nrm(w);
            beta.push(b);
            if b <= 1e-13 * scale {
                return (alpha, beta, true);
            }
            if j + 1 < m {
                if vs.len() <= j + 1 {
                    vs.push(vec![C64::new(0.0, 0.0); dim]);
                }
                let inv = 1.0 / b;
                for (x, y) in vs[j + 1].iter_mut().zip(w.iter()) {
                    *x = y * inv;
                }
            }
        }
        (alpha, beta, false)
    }
}

/// `e^{−iHt}ψ` with default stepping.
pub fn evolve(h: &SparseOperator, psi: &StateVector, t: f64, cfg: &EvolveConfig) -> Result<StateVector, PropagateError> {
    Ok(Propagator::new(h, *cfg)?.evolve(psi, t)?.0)
}

/// Piecewise-constant schedule: `H₁` for `t₁`, then `H₂` for `t₂`, …
pub fn evolve_schedule(
    segments: &[(&SparseOperator, f64)],
    psi: &StateVector,
    cfg: &EvolveConfig,
) -> Result<(StateVector, EvolveStats), PropagateError> {
    let mut state = psi.clone();
    let mut total = EvolveStats::default();
    for &(h, t) in segments {
        let (s, st) = Propagator::new(h, *cfg)?.evolve(&state, t)?;
        state = s;
        total.steps += st.steps;
        total.matvecs += st.matvecs;
        total.rejected += st.rejected;
        total.error_estimate += st.error_estimate;
    }
    Ok((state, total))
}

/// Full spectral decomposition of a small Hermitian operator.
pub struct DenseEvolver {
    basis_hash: crate::basis::BasisHash,
    values: DVector<f64>,
    vectors: DMatrix<C64>,
}

impl DenseEvolver {
    pub fn new(h: &SparseOperator) -> Result<Self, PropagateError> {
        let defect = h.hermiticity_defect();
        if defect > crate::sparse::HERMITIAN_TOL {
            return Err(PropagateError::NonHermitian(defect));
        }
        let eig = SymmetricEigen::new(h.to_dense());
        Ok(Self { basis_hash: h.basis_hash(), values: eig.eigenvalues, vectors: eig.eigenvectors })
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.vectors
    }

    pub fn evolve(&self, psi: &StateVector, t: f64) -> Result<StateVector, PropagateError> {
        if psi.basis_hash() != self.basis_hash {
            return Err(PropagateError::BasisMismatch);
        }
        let x = DVector::from_column_slice(psi.amplitudes());
        let mut c = self.vectors.adjoint() * x;
        for (ci, &l) in c.iter_mut().zip(self.values.iter()) {
            *ci *= C64::from_polar(1.0, -l * t);
        }
        let y = &self.vectors * c;
        Ok(StateVector::from_raw(self.basis_hash, y.iter().copied().collect()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationEscalation {
    pub k_max: Vec<usize>,
    pub threshold: f64,
    /// Largest basis dimension the escalation may enumerate; a step whose
    /// basis would exceed it is skipped and the outcome marked budget-limited.
    #[serde(default)]
    pub max_dim: Option<usize>,
}

impl Default for TruncationEscalation {
    fn default() -> Self {
        Self { k_max: vec![1, 2, 3], threshold: 1e-6, max_dim: None }
    }
}

impl TruncationEscalation {
    pub fn validate(&self) -> Result<(), PropagateError> {
        if self.k_max.is_empty() || self.k_max.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PropagateError::Config("k_max sequence must be non-empty and strictly increasing".into()));
        }
        if !(self.threshold > 0.0) {
            return Err(PropagateError::Config("threshold must be positive".into()));
        }
        Ok(())
    }
}

/// Blocks held for a fixed duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub blocks: Vec<GateBlock>,
    pub duration: f64,
}

/// A system whose ancilla chains are truncated by particle number, driven
/// by a piecewise-constant schedule.
pub struct TruncatedProblem<'a> {
    pub layout: &'a ChainLayout,
    /// Constraints for non-ancilla chains; ancilla entries are overwritten.
    pub spec: SectorSpec,
    pub schedule: &'a [Segment],
    pub m: Option<f64>,
    pub initial: &'a dyn Fn(&SectorBasis) -> Result<StateVector, StateError>,
}

impl TruncatedProblem<'_> {
    fn truncated_spec(&self, k: usize) -> SectorSpec {
        let mut spec = self.spec.clone();
        for a in self.layout.ancillas() {
            spec.constraints[a] = Constraint::AtMost(k);
        }
        spec
    }

    pub fn basis(&self, k: usize) -> Result<SectorBasis, PropagateError> {
        Ok(enumerate_basis(self.layout, &self.truncated_spec(k))?)
    }

    pub fn dimension(&self, k: usize) -> u128 {
        crate::basis::product_dimension(self.layout.n, &self.truncated_spec(k))
    }

    /// Runs the schedule in the truncation-`k` basis.
    pub fn run(&self, basis: &SectorBasis, cfg: &EvolveConfig) -> Result<(StateVector, EvolveStats), PropagateError> {
        let hs: Vec<SparseOperator> =
            self.schedule.iter().map(|s| h_total(basis, &s.blocks, self.m)).collect::<Result<_, _>>()?;
        let segs: Vec<(&SparseOperator, f64)> = hs.iter().zip(self.schedule).map(|(h, s)| (h, s.duration)).collect();
        evolve_schedule(&segs, &(self.initial)(basis)?, cfg)
    }
}

#[derive(Debug, Clone)]
pub struct EscalationOutcome {
    pub basis: SectorBasis,
    pub state: StateVector,
    /// Smallest truncation whose result agrees with the next one, or the
    /// last one run when no pair agreed.
    pub achieved_k: usize,
    pub converged: bool,
    /// Set when a larger truncation was skipped for exceeding `max_dim`.
    pub budget_limited: bool,
    /// `(k, ‖ψ_k − ψ_{k'}‖)` for each consecutive pair tried.
    pub differences: Vec<(usize, f64)>,
    pub stats: EvolveStats,
}

/// Amplitudes of `state` (on `small`) re-indexed into `large`.
pub fn embed(state: &StateVector, small: &SectorBasis, large: &SectorBasis) -> StateVector {
    let mut amps = vec![C64::new(0.0, 0.0); large.dim()];
    for (i, cfg) in small.iter() {
        if let Some(j) = large.lookup(cfg) {
            amps[j] = state.amplitudes()[i];
        }
    }
    StateVector::from_raw(large.hash(), amps)
}

/// Re-runs the schedule at increasing ancilla truncation until two
/// consecutive truncations agree within the threshold.
pub fn evolve_with_truncation(
    problem: &TruncatedProblem<'_>,
    cfg: &EvolveConfig,
    esc: &TruncationEscalation,
) -> Result<EscalationOutcome, PropagateError> {
    esc.validate()?;
    let mut prev: Option<(usize, SectorBasis, StateVector)> = None;
    let mut differences = Vec::new();
    let mut stats = EvolveStats::default();
    let mut budget_limited = false;
    for &k in &esc.k_max {
        if let Some(cap) = esc.max_dim {
            if problem.dimension(k) > cap as u128 {
                if prev.is_some() {
                    budget_limited = true;
                    break;
                }
                return Err(PropagateError::Config(format!(
                    "smallest truncation k = {k} already needs dimension {} > budget {cap}",
                    problem.dimension(k)
                )));
            }
        }
        let basis = problem.basis(k)?;
        let (out, st) = problem.run(&basis, cfg)?;
        stats.steps += st.steps;
        stats.matvecs += st.matvecs;
        stats.rejected += st.rejected;
        stats.error_estimate += st.error_estimate;
        if let Some((pk, pb, ps)) = prev.take() {
            let d = embed(&ps, &pb, &basis).distance(&out)?;
            differences.push((pk, d));
            if d < esc.threshold {
                return Ok(EscalationOutcome {
                    basis,
                    state: out,
                    achieved_k: pk,
                    converged: true,
                    budget_limited,
                    differences,
                    stats,
                });
            }
        }
        prev = Some((k, basis, out));
    }
    let (k, basis, state) = prev.expect("non-empty sequence");
    Ok(EscalationOutcome { basis, state, achieved_k: k, converged: false, budget_limited, differences, stats })
}

/// `‖e^{−iHΔt}ψ − e^{−iH̃₀Δt}ψ‖` in the given truncated basis.
pub fn leakage_norm(
    basis: &SectorBasis,
    blocks: &[GateBlock],
    psi: &StateVector,
    dt: f64,
    m: Option<f64>,
    cfg: &EvolveConfig,
) -> Result<f64, PropagateError> {
    let h = h_total(basis, blocks, m)?;
    let h0 = h_tilde0(basis, blocks, m)?;
    let full = evolve(&h, psi, dt, cfg)?;
    let eff = evolve(&h0, psi, dt, cfg)?;
    Ok(full.distance(&eff)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{ChainRole, Constraint};
    use crate::operators::h_xy_ring;
    use crate::states::momentum_eigenstate;

    fn ring(n: usize) -> SectorBasis {
        let layout = ChainLayout::new(n).unwrap().with_chain("c", ChainRole::Rail1, Some(0)).unwrap();
        enumerate_basis(&layout, &SectorSpec::new(vec![Constraint::Exactly(1)])).unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        let b = ring(8);
        let h = h_xy_ring(&b, "c").unwrap();
        let s = momentum_eigenstate(&b, "c", 3).unwrap();
        let out = evolve(&h, &s, 0.0, &EvolveConfig::default()).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn eigenstate_picks_up_phase() {
        let n = 16;
        let b = ring(n);
        let h = h_xy_ring(&b, "c").unwrap();
        for p in 0..n as i64 {
            let s = momentum_eigenstate(&b, "c", p).unwrap();
            let t = 3.7;
            let out = evolve(&h, &s, t, &EvolveConfig::default()).unwrap();
            let e = 2.0 * (2.0 * std::f64::consts::PI * p as f64 / n as f64).cos();
            let want = C64::from_polar(1.0, -e * t);
            assert!((s.inner(&out).unwrap() - want).norm() < 1e-10);
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let b = ring(4);
        let mut tb = crate::sparse::TripletBuilder::new(4, b.hash());
        tb.push(0, 1, C64::new(1.0, 0.0));
        let h = tb.build();
        assert!(matches!(Propagator::new(&h, EvolveConfig::default()), Err(PropagateError::NonHermitian(_))));
    }

    #[test]
    fn escalation_sequence_must_increase() {
        let esc = TruncationEscalation { k_max: vec![2, 2], threshold: 1e-6, max_dim: None };
        assert!(esc.validate().is_err());
    }
}
