use xyqc_web::{packet_frames, spectrum_comparison, x_gate_populations};

#[test]
fn frames_are_normalized() {
    let f = packet_frames(32, 8, 3.0, 4.0, 5).unwrap_or_else(|_| panic!("packet_frames failed"));
    assert_eq!(f.len(), 5 * 32);
    for row in f.chunks(32) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn spectrum_pairs_agree() {
    let s = spectrum_comparison(16).unwrap_or_else(|_| panic!("spectrum failed"));
    for pair in s.chunks(2) {
        assert!((pair[0] - pair[1]).abs() < 1e-12);
    }
}

#[test]
fn populations_follow_sine_squared() {
    let t_max = std::f64::consts::PI;
    let p = x_gate_populations(16, 0.5, t_max, 9).unwrap_or_else(|_| panic!("populations failed"));
    for (k, v) in p.iter().enumerate() {
        let t = t_max * k as f64 / 8.0;
        assert!((v - (0.5 * t).sin().powi(2)).abs() < 1e-8);
    }
}
