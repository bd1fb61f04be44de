//! End-to-end circuits and sweep reproducibility.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use xyqc::harness::circuit::{run_circuit, CircuitSpec, GateSpec};
use xyqc::harness::sweep::{leakage_point, write_sweep_csv, SweepRules};

/// `[[re, im]; 2]` rows of a unitary.
fn hadamard() -> [[[f64; 2]; 2]; 2] {
    let s = FRAC_1_SQRT_2;
    [[[s, 0.0], [s, 0.0]], [[s, 0.0], [-s, 0.0]]]
}

#[test]
fn arbitrary_unitary_via_zxz_at_n32() {
    // a generic element of U(2), written out by hand
    let (c, s) = (0.6f64, 0.8f64);
    let (p, q) = ((0.4f64).cos(), (0.4f64).sin());
    let matrix = [[[c * p, c * q], [-s, 0.0]], [[s * p, s * q], [c, 0.0]]];
    let spec = CircuitSpec::new(32, 1, vec![GateSpec::Unitary { qubit: 0, matrix }]);
    let r = run_circuit(&spec).unwrap();
    assert_eq!(r.gates.len(), 3, "expanded into Z, X, Z");
    let f = r.process_fidelity.unwrap();
    assert!(f >= 0.999, "process fidelity {f}");
}

#[test]
fn bell_pair_from_lambda() {
    let plus = [[FRAC_1_SQRT_2, 0.0], [FRAC_1_SQRT_2, 0.0]];
    let mut spec = CircuitSpec::new(16, 2, vec![GateSpec::Lambda { a: 0, b: 1, phi: PI / 2.0 }]);
    spec.initial = Some(vec![plus, plus]);
    let r = run_circuit(&spec).unwrap();
    let a = &r.final_amplitudes;
    let concurrence = 2.0 * (a[0] * a[3] - a[1] * a[2]).norm();
    assert!(concurrence > 0.95, "concurrence {concurrence}, amplitudes {a:?}");
    assert!(r.state_fidelity > 0.95, "fidelity {}", r.state_fidelity);
}

#[test]
fn hadamard_then_transit_reads_out_evenly() {
    let mut spec = CircuitSpec::new(16, 1, vec![GateSpec::Unitary { qubit: 0, matrix: hadamard() }]);
    spec.transit_time = 2.0;
    let r = run_circuit(&spec).unwrap();
    let q = &r.final_readout.qubits[0];
    assert!((q.p0 - 0.5).abs() < 1e-6 && (q.p1 - 0.5).abs() < 1e-6, "{q:?}");
    assert!(r.state_fidelity > 1.0 - 1e-9);
}

#[test]
fn spec_files_round_trip_through_json_and_toml() {
    let spec = CircuitSpec::new(24, 2, vec![GateSpec::Unitary { qubit: 1, matrix: hadamard() }, GateSpec::Lambda { a: 1, b: 0, phi: 0.2 }]);
    let json = serde_json::to_string(&spec).unwrap();
    assert_eq!(CircuitSpec::from_json_str(&json).unwrap(), spec);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, spec.to_toml_string().unwrap()).unwrap();
    assert_eq!(CircuitSpec::from_path(&path).unwrap(), spec);
}

#[test]
fn leakage_sweep_is_reproducible() {
    let rules = SweepRules::default();
    let a = leakage_point(16, &rules).unwrap();
    let b = leakage_point(16, &rules).unwrap();
    let csv = |r| {
        let mut buf = Vec::new();
        write_sweep_csv(&[r], false, &mut buf).unwrap();
        buf
    };
    assert_eq!(a.leakage.to_bits(), b.leakage.to_bits());
    assert_eq!(csv(a), csv(b));
}

#[test]
fn leakage_is_converged_in_ancilla_truncation() {
    let k2 = leakage_point(16, &SweepRules::default()).unwrap();
    let k3 = leakage_point(16, &SweepRules { k_max: 3, ..Default::default() }).unwrap();
    assert!(k2.converged && k3.converged);
    let rel = (k3.leakage - k2.leakage).abs() / k3.leakage;
    assert!(rel < 1e-3, "k=2 {} vs k=3 {}", k2.leakage, k3.leakage);
}
