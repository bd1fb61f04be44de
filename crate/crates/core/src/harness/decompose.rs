//! `U ≅ e^{iθ₁Z} e^{iθ₂X} e^{iθ₃Z}` up to global phase.
//!
//! With `U′ = U/√det U`, `U′₀₀ = e^{i(θ₁+θ₃)} cos θ₂` and
//! `U′₀₁ = i e^{i(θ₁−θ₃)} sin θ₂`. Each angle is only defined mod π (a shift
//! by π flips the overall sign), so all three are reduced to `[0, π)`. When
//! θ₂ is 0 or π/2 only θ₁ ± θ₃ is determined and θ₃ is set to zero.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use thiserror::Error;

use crate::sparse::C64;

pub type U2 = Matrix2<C64>;

#[derive(Debug, Error)]
pub enum DecomposeError {
    #[error("input is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),
}

const DEGENERATE: f64 = 1e-12;

pub fn rz(theta: f64) -> U2 {
    U2::new(C64::from_polar(1.0, theta), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::from_polar(1.0, -theta))
}

pub fn rx(theta: f64) -> U2 {
    let c = C64::new(theta.cos(), 0.0);
    let s = C64::new(0.0, theta.sin());
    U2::new(c, s, s, c)
}

/// `e^{iθ₁Z} e^{iθ₂X} e^{iθ₃Z}`.
pub fn compose_zxz(t1: f64, t2: f64, t3: f64) -> U2 {
    rz(t1) * rx(t2) * rz(t3)
}

/// `min_γ ‖U − e^{iγ}V‖_F`, attained at `e^{iγ} = tr(V†U)/|tr(V†U)|`.
pub fn phase_distance(u: &U2, v: &U2) -> f64 {
    let tr = (v.adjoint() * u).trace();
    let w = if tr.norm() > 0.0 { tr / tr.norm() } else { C64::new(1.0, 0.0) };
    (u - v * w).norm()
}

fn reduce(a: f64) -> f64 {
    let r = a.rem_euclid(PI);
    if PI - r < 1e-14 {
        0.0
    } else {
        r
    }
}

pub fn decompose_single_qubit(u: &U2) -> Result<(f64, f64, f64), DecomposeError> {
    let dev = (u.adjoint() * u - U2::identity()).norm();
    if dev > 1e-8 {
        return Err(DecomposeError::NotUnitary(dev));
    }
    let det = u.determinant();
    let up = u / det.sqrt();
    let (alpha, beta) = (up[(0, 0)], up[(0, 1)]);
    let b = beta.norm().atan2(alpha.norm());
    let (a, c) = if beta.norm() < DEGENERATE {
        (alpha.arg(), 0.0)
    } else if alpha.norm() < DEGENERATE {
        ((beta / C64::i()).arg(), 0.0)
    } else {
        let s = alpha.arg();
        let d = (beta / C64::i()).arg();
        (0.5 * (s + d), 0.5 * (s - d))
    };
    Ok((reduce(a), reduce(b), reduce(c)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_zero_angles() {
        assert_eq!(decompose_single_qubit(&U2::identity()).unwrap(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn pure_z_rotation() {
        let (a, b, c) = decompose_single_qubit(&rz(0.4)).unwrap();
        assert!((a - 0.4).abs() < 1e-12 && b.abs() < 1e-12 && c.abs() < 1e-12);
    }

    #[test]
    fn rejects_non_unitary() {
        let m = U2::new(C64::new(2.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        assert!(decompose_single_qubit(&m).is_err());
    }

    #[test]
    fn round_trip_fixed_angles() {
        for &(a, b, c) in &[(0.3, 1.1, 2.0), (3.0, 0.2, 0.1), (0.0, PI / 2.0, 0.7), (1.0, 1e-13, 0.5)] {
            let u = compose_zxz(a, b, c) * C64::from_polar(1.0, 0.77);
            let (x, y, z) = decompose_single_qubit(&u).unwrap();
            assert!(phase_distance(&u, &compose_zxz(x, y, z)) < 1e-10);
        }
    }
}
