use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use xyqc::harness::wires::packet_transport;
use xyqc::propagate::EvolveConfig;
use xyqc::states::{gaussian_amplitudes, momentum_amplitudes, PacketParams};

/// Mean displacement from the momentum distribution, independent of the
/// propagator: `t Σ_p |c_p|² (−2 sin(2πp/N))`.
fn mean_displacement(n: usize, params: &PacketParams, t: f64) -> f64 {
    let g = gaussian_amplitudes(n, params);
    let norm: f64 = g.iter().map(|z| z.norm_sqr()).sum();
    (0..n as i64)
        .map(|p| {
            let c: C64 = momentum_amplitudes(n, p).iter().zip(&g).map(|(a, b)| a.conj() * b).sum();
            c.norm_sqr() / norm * -2.0 * (2.0 * PI * p as f64 / n as f64).sin() * t
        })
        .sum()
}

#[test]
fn center_follows_mean_group_velocity() {
    for (n, dx, t) in [(64, 4.0, 8.0), (64, 6.0, 8.0), (48, 5.0, 6.0)] {
        let p = PacketParams { x0: n as f64 / 2.0, p0: (n / 4) as i64, dx };
        let r = packet_transport(n, p, t, &EvolveConfig::default()).unwrap();
        let want = mean_displacement(n, &p, t);
        assert!((r.shift - want).abs() < 0.02, "N={n} Δx={dx}: shift {} vs {want}", r.shift);
        // narrower momentum spread, closer to the central velocity
        assert!(want.abs() < 2.0 * t && want.abs() > 2.0 * t * (-1.0 / (4.0 * dx * dx)).exp() - 0.02);
    }
}

#[test]
fn wider_packets_approach_the_central_velocity() {
    let shift = |dx: f64| {
        let p = PacketParams { x0: 32.0, p0: 16, dx };
        packet_transport(64, p, 4.0, &EvolveConfig::default()).unwrap().shift.abs()
    };
    let (a, b) = (shift(3.0), shift(9.0));
    assert!(a < b && (b - 8.0).abs() < 0.05, "{a} {b}");
}
