//! Free rails: the one-excitation spectrum and packet transport.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::basis::{enumerate_basis, ChainLayout, ChainRole, Constraint, SectorSpec};
use crate::analytic::fock_spectrum;
use crate::operators::{h_ancilla, h_xy_ring};
use crate::propagate::{evolve, EvolveConfig};
use crate::states::{gaussian_packet, packet_center, ring_displacement, PacketParams};
use crate::symmetry::MomentumBlock;

use super::HarnessError;

/// `(numeric, 2cos(2πp/N))` sorted by `p`, from the momentum-`p` block of
/// the one-excitation ring.
pub fn single_excitation_spectrum(n: usize) -> Result<Vec<(f64, f64)>, HarnessError> {
    let layout = ChainLayout::new(n)?.with_chain("c", ChainRole::Rail1, Some(0))?;
    let basis = enumerate_basis(&layout, &SectorSpec::new(vec![Constraint::Exactly(1)]))?;
    let h = h_xy_ring(&basis, "c")?;
    Ok((0..n)
        .map(|p| {
            let hb = MomentumBlock::new(&basis, p).project(&h);
            (hb[(0, 0)].re, 2.0 * (2.0 * PI * p as f64 / n as f64).cos())
        })
        .collect())
}

/// Sorted `(numeric, Fock sum)` pairs for `k` excitations on an ancilla chain.
pub fn ancilla_spectrum(n: usize, m: f64, k: usize) -> Result<Vec<(f64, f64)>, HarnessError> {
    let layout = ChainLayout::new(n)?.with_chain("anc", ChainRole::Ancilla, None)?;
    let basis = enumerate_basis(&layout, &SectorSpec::new(vec![Constraint::Exactly(k)]))?;
    let d = h_ancilla(&basis, "anc", m)?.to_dense();
    let mut num: Vec<f64> = d.symmetric_eigen().eigenvalues.iter().copied().collect();
    num.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(num.into_iter().zip(fock_spectrum(n, m, k)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportResult {
    pub n: usize,
    pub t: f64,
    pub params: PacketParams,
    /// Signed center displacement, in sites.
    pub shift: f64,
    /// `v_g t`.
    pub expected_shift: f64,
    /// `|⟨G(x₀ + v_g t)|ψ(t)⟩|²`.
    pub fidelity: f64,
    pub width_start: f64,
    pub width_end: f64,
}

/// Gaussian packet on one ring, evolved freely for `t`.
pub fn packet_transport(n: usize, params: PacketParams, t: f64, cfg: &EvolveConfig) -> Result<TransportResult, HarnessError> {
    let layout = ChainLayout::new(n)?.with_chain("c", ChainRole::Rail1, Some(0))?;
    let basis = enumerate_basis(&layout, &SectorSpec::new(vec![Constraint::Exactly(1)]))?;
    let h = h_xy_ring(&basis, "c")?;
    let psi = gaussian_packet(&basis, "c", &params)?;
    let out = evolve(&h, &psi, t, cfg)?;
    let s0 = packet_center(&psi, &basis, "c")?;
    let s1 = packet_center(&out, &basis, "c")?;
    let shift = match (s0.center, s1.center) {
        (Some(a), Some(b)) => ring_displacement(a, b, n),
        _ => f64::NAN,
    };
    let v = params.group_velocity(n);
    let moved = PacketParams { x0: params.x0 + v * t, ..params };
    let ideal = gaussian_packet(&basis, "c", &moved)?;
    Ok(TransportResult {
        n,
        t,
        params,
        shift,
        expected_shift: v * t,
        fidelity: ideal.fidelity(&out)?,
        width_start: s0.width,
        width_end: s1.width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_n8() {
        for (a, b) in single_excitation_spectrum(8).unwrap() {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn packet_moves_toward_negative_x() {
        let p = PacketParams { x0: 16.0, p0: 8, dx: 3.0 };
        let r = packet_transport(32, p, 2.0, &EvolveConfig::default()).unwrap();
        assert!((r.shift + 4.0).abs() < 0.2, "{}", r.shift);
    }
}
