//! Block-diagonalization by the simultaneous one-site translation `T̂`.
//!
//! Block vectors are `v = Σ_{s<L} e^{2πiks/N} T̂^s|r⟩ / √L` over the
//! translation orbit of a representative `|r⟩` of length `L`; they exist when
//! `e^{2πikL/N} = 1` and satisfy `T̂v = e^{−2πik/N} v`, the same eigenvalue
//! as a single-particle `|p̃⟩` with `p = k`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::basis::SectorBasis;
use crate::sparse::{SparseOperator, C64};
use crate::states::StateVector;

#[derive(Debug, Clone)]
pub struct Orbit {
    /// Members in shift order: `members[s] = T̂^s r`.
    pub members: Vec<usize>,
}

/// Translation orbits of the basis, ordered by smallest member.
pub fn orbits(basis: &SectorBasis) -> Vec<Orbit> {
    let perm = basis.translation_permutation();
    let mut seen = vec![false; basis.dim()];
    let mut out = Vec::new();
    for i in 0..basis.dim() {
        if seen[i] {
            continue;
        }
        let mut members = vec![i];
        seen[i] = true;
        let mut j = perm[i];
        while j != i {
            seen[j] = true;
            members.push(j);
            j = perm[j];
        }
        out.push(Orbit { members });
    }
    out
}

/// Orthonormal basis of the `T̂ = e^{−2πik/N}` eigenspace.
#[derive(Debug, Clone)]
pub struct MomentumBlock {
    pub k: usize,
    n: usize,
    basis_dim: usize,
    orbits: Vec<Orbit>,
    /// For every basis index: (block column, shift) when its orbit belongs.
    slot: Vec<Option<(u32, u32)>>,
}

impl MomentumBlock {
    pub fn new(basis: &SectorBasis, k: usize) -> Self {
        Self::from_orbits(basis, &orbits(basis), k)
    }

    pub fn from_orbits(basis: &SectorBasis, all: &[Orbit], k: usize) -> Self {
        let n = basis.n();
        let k = k % n;
        let mut slot = vec![None; basis.dim()];
        let mut kept = Vec::new();
        for o in all {
            if (k * o.members.len()) % n != 0 {
                continue;
            }
            let col = kept.len() as u32;
            for (s, &i) in o.members.iter().enumerate() {
                slot[i] = Some((col, s as u32));
            }
            kept.push(o.clone());
        }
        Self { k, n, basis_dim: basis.dim(), orbits: kept, slot }
    }

    pub fn dim(&self) -> usize {
        self.orbits.len()
    }

    fn phase(&self, s: usize) -> C64 {
        C64::from_polar(1.0, 2.0 * PI * (self.k * s) as f64 / self.n as f64)
    }

    /// Block coordinates `⟨v_c|ψ⟩`.
    pub fn restrict(&self, amps: &[C64]) -> DVector<C64> {
        let mut out = DVector::zeros(self.dim());
        for (i, a) in amps.iter().enumerate() {
            if let Some((c, s)) = self.slot[i] {
                let l = self.orbits[c as usize].members.len() as f64;
                out[c as usize] += self.phase(s as usize).conj() * a / l.sqrt();
            }
        }
        out
    }

    /// `Σ_c x_c v_c` as full-basis amplitudes.
    pub fn lift(&self, x: &DVector<C64>) -> Vec<C64> {
        let mut amps = vec![C64::new(0.0, 0.0); self.basis_dim];
        for (c, o) in self.orbits.iter().enumerate() {
            let norm = 1.0 / (o.members.len() as f64).sqrt();
            for (s, &i) in o.members.iter().enumerate() {
                amps[i] += x[c] * self.phase(s) * norm;
            }
        }
        amps
    }

    /// Dense `V†HV`; exact when `H` commutes with `T̂`.
    pub fn project(&self, h: &SparseOperator) -> DMatrix<C64> {
        let d = self.dim();
        let mut out = DMatrix::zeros(d, d);
        for (c, o) in self.orbits.iter().enumerate() {
            let norm = 1.0 / (o.members.len() as f64).sqrt();
            // column c of V†HV from H v_c, using H's Hermiticity for column access
            let mut acc: Vec<(usize, C64)> = Vec::new();
            for (s, &i) in o.members.iter().enumerate() {
                let a = self.phase(s) * norm;
                for (j, v) in h.row(i) {
                    acc.push((j, v.conj() * a));
                }
            }
            for (j, w) in acc {
                if let Some((r, s)) = self.slot[j] {
                    let l = self.orbits[r as usize].members.len() as f64;
                    out[(r as usize, c)] += self.phase(s as usize).conj() * w / l.sqrt();
                }
            }
        }
        out
    }

    pub fn lift_state(&self, basis: &SectorBasis, x: &DVector<C64>) -> StateVector {
        StateVector::from_raw(basis.hash(), self.lift(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{enumerate_basis, ChainLayout, ChainRole, Constraint, SectorSpec};
    use crate::operators::h_xy_ring;
    use crate::states::momentum_eigenstate;

    #[test]
    fn block_dimensions_sum_to_basis_dimension() {
        let layout = ChainLayout::new(6)
            .unwrap()
            .with_chain("a", ChainRole::Rail1, Some(0))
            .unwrap()
            .with_chain("anc", ChainRole::Ancilla, None)
            .unwrap();
        let b = enumerate_basis(&layout, &SectorSpec::new(vec![Constraint::Exactly(1), Constraint::AtMost(2)])).unwrap();
        let all = orbits(&b);
        let total: usize = (0..6).map(|k| MomentumBlock::from_orbits(&b, &all, k).dim()).sum();
        assert_eq!(total, b.dim());
    }

    #[test]
    fn single_particle_block_is_the_fourier_mode() {
        let layout = ChainLayout::new(8).unwrap().with_chain("c", ChainRole::Rail1, Some(0)).unwrap();
        let b = enumerate_basis(&layout, &SectorSpec::new(vec![Constraint::Exactly(1)])).unwrap();
        let blk = MomentumBlock::new(&b, 3);
        assert_eq!(blk.dim(), 1);
        let v = blk.lift(&DVector::from_element(1, C64::new(1.0, 0.0)));
        let p = momentum_eigenstate(&b, "c", 3).unwrap();
        let ov: C64 = p.amplitudes().iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
        assert!((ov.norm() - 1.0).abs() < 1e-14);
        let h = blk.project(&h_xy_ring(&b, "c").unwrap());
        assert!((h[(0, 0)].re - 2.0 * (2.0 * PI * 3.0 / 8.0).cos()).abs() < 1e-14);
    }
}
