//! Sector operators checked against Pauli strings in the full 2^q tensor
//! space. Bit `j` of a chain mask is qubit `j`; a set bit is an excitation,
//! i.e. `z = −1`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use xyqc::basis::{enumerate_basis, ChainLayout, ChainRole, Constraint, SectorBasis, SectorSpec};
use xyqc::operators::{h_total, Axis, GateBlock, SiteRange};

#[derive(Clone, Copy)]
enum P {
    X,
    Y,
    Z,
}

/// Dense Pauli string on `q` qubits, `ops` as (qubit, Pauli).
fn pauli(q: usize, ops: &[(usize, P)]) -> DMatrix<C64> {
    let d = 1usize << q;
    let mut m = DMatrix::zeros(d, d);
    for col in 0..d {
        let (mut row, mut amp) = (col, C64::new(1.0, 0.0));
        for &(k, p) in ops {
            let up = row >> k & 1 == 0;
            match p {
                P::X => row ^= 1 << k,
                P::Y => {
                    amp *= if up { C64::new(0.0, 1.0) } else { C64::new(0.0, -1.0) };
                    row ^= 1 << k;
                }
                P::Z => {
                    if !up {
                        amp = -amp;
                    }
                }
            }
        }
        m[(row, col)] += amp;
    }
    m
}

fn identity(q: usize) -> DMatrix<C64> {
    DMatrix::identity(1 << q, 1 << q)
}

/// `½ Σ_j (x_j x_{j+1} + y_j y_{j+1})` around a ring occupying qubits `off..off+n`.
fn ring(q: usize, off: usize, n: usize) -> DMatrix<C64> {
    let mut h = DMatrix::zeros(1 << q, 1 << q);
    for j in 0..n {
        let (a, b) = (off + j, off + (j + 1) % n);
        h += (pauli(q, &[(a, P::X), (b, P::X)]) + pauli(q, &[(a, P::Y), (b, P::Y)])) * C64::new(0.5, 0.0);
    }
    h
}

fn number(q: usize, k: usize) -> DMatrix<C64> {
    (identity(q) - pauli(q, &[(k, P::Z)])) * C64::new(0.5, 0.0)
}

/// Tensor index of basis state `i`: chain `c` occupies qubits `c·n..(c+1)·n`.
fn tensor_index(basis: &SectorBasis, i: usize) -> usize {
    let n = basis.n();
    basis.config(i).iter().enumerate().map(|(c, &m)| (m as usize) << (c * n)).sum()
}

fn assert_matches(basis: &SectorBasis, blocks: &[GateBlock], m: Option<f64>, oracle: &DMatrix<C64>) {
    let h = h_total(basis, blocks, m).unwrap().to_dense();
    assert_eq!(basis.dim(), oracle.nrows(), "full sector expected");
    let mut worst = 0.0f64;
    for i in 0..basis.dim() {
        for j in 0..basis.dim() {
            let o = oracle[(tensor_index(basis, i), tensor_index(basis, j))];
            worst = worst.max((h[(i, j)] - o).norm());
        }
    }
    assert!(worst < 1e-12, "max deviation {worst:e}");
}

fn full(chains: usize, n: usize) -> SectorSpec {
    SectorSpec::new(vec![Constraint::AtMost(n); chains])
}

#[test]
fn xy_ring_matches_pauli_sum() {
    for n in 3..=4 {
        let layout = ChainLayout::new(n).unwrap().with_chain("c", ChainRole::Rail1, Some(0)).unwrap();
        let basis = enumerate_basis(&layout, &full(1, n)).unwrap();
        assert_matches(&basis, &[], None, &ring(n, 0, n));
    }
}

#[test]
fn z_and_x_gates_match_pauli_sum() {
    for n in 3..=4 {
        let q = 2 * n;
        let basis = enumerate_basis(&ChainLayout::dual_rail(n, 1).unwrap(), &full(2, n)).unwrap();
        let (phi_z, phi_x) = (0.7, -1.3);
        let range = SiteRange::span(1, 3);
        let blocks =
            [GateBlock::z_gate("q0.r1", phi_z, range), GateBlock::x_gate("q0.r0", "q0.r1", phi_x, SiteRange::FullRing)];
        let mut oracle = ring(q, 0, n) + ring(q, n, n);
        for j in range.sites(n) {
            oracle += number(q, n + j) * C64::new(phi_z, 0.0);
        }
        for j in 0..n {
            let (a, b) = (j, n + j);
            oracle +=
                (pauli(q, &[(a, P::X), (b, P::X)]) + pauli(q, &[(a, P::Y), (b, P::Y)])) * C64::new(0.5 * phi_x, 0.0);
        }
        assert_matches(&basis, &blocks, None, &oracle);
    }
}

#[test]
fn ancilla_coupling_matches_pauli_sum() {
    let m = 0.37;
    for n in 3..=4 {
        let q = 2 * n;
        let layout = ChainLayout::new(n)
            .unwrap()
            .with_chain("a", ChainRole::Rail1, Some(0))
            .unwrap()
            .with_chain("anc", ChainRole::Ancilla, None)
            .unwrap();
        let basis = enumerate_basis(&layout, &full(2, n)).unwrap();
        for (axis, p) in [(Axis::X, P::X), (Axis::Y, P::Y)] {
            let e = 0.45;
            let range = SiteRange::span(n - 1, 2);
            let blocks = [GateBlock::v_block(axis, "a", "anc", e, range)];
            let mut anc = DMatrix::zeros(1 << q, 1 << q);
            for j in 0..n {
                anc += (identity(q) - pauli(q, &[(n + j, P::Z)])) * C64::new(1.0 / (4.0 * m), 0.0);
            }
            anc -= ring(q, n, n) * C64::new(1.0 / (4.0 * m), 0.0);
            let mut oracle = ring(q, 0, n) + anc;
            for j in range.sites(n) {
                oracle += number(q, j) * pauli(q, &[(n + j, p)]) * C64::new(e, 0.0);
            }
            assert_matches(&basis, &blocks, Some(m), &oracle);
        }
    }
}

#[test]
fn nonlocal_cphase_matches_number_product() {
    let n = 3;
    let q = 2 * n;
    let layout = ChainLayout::new(n)
        .unwrap()
        .with_chain("a", ChainRole::Rail1, Some(0))
        .unwrap()
        .with_chain("b", ChainRole::Rail1, Some(1))
        .unwrap();
    let basis = enumerate_basis(&layout, &full(2, n)).unwrap();
    let phi = 0.9;
    let blocks = [GateBlock::nonlocal_cphase("a", "b", phi, SiteRange::FullRing)];
    let na: DMatrix<C64> = (0..n).map(|j| number(q, j)).fold(DMatrix::zeros(1 << q, 1 << q), |a, b| a + b);
    let nb: DMatrix<C64> = (0..n).map(|j| number(q, n + j)).fold(DMatrix::zeros(1 << q, 1 << q), |a, b| a + b);
    let oracle = ring(q, 0, n) + ring(q, n, n) + na * nb * C64::new(phi, 0.0);
    assert_matches(&basis, &blocks, None, &oracle);
}
