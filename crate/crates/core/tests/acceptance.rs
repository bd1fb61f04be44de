//! Exit-gate criteria, one PASS/FAIL line each (`cargo test -p xyqc --test
//! acceptance`). A plain binary rather than libtest, so the lines are never
//! captured and criteria run one at a time with honest runtimes.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xyqc::basis::{enumerate_basis, ChainLayout, ChainRole, Constraint, SectorBasis, SectorSpec};
use xyqc::harness::gates::{run_entangling_gate, run_x_gate, run_z_gate, EntangleOptions, ExperimentConfig, GateMode};
use xyqc::harness::sweep::{sweep_leakage, SweepRules};
use xyqc::harness::verify::{gap_rows, jordan_wigner_rows, momentum_rows, verify_appendix, vprime_rows, VerifyRow};
use xyqc::harness::wires::packet_transport;
use xyqc::operators::{h_total, h_xy_ring, AncillaParams, Axis, GateBlock, SiteRange};
use xyqc::propagate::{evolve, DenseEvolver, EvolveConfig};
use xyqc::sparse::C64;
use xyqc::states::{gaussian_amplitudes, momentum_amplitudes, PacketParams, StateVector};

/// Criteria expected to fail, with the reason recorded in the decisions
/// ledger. The suite still asserts that they fail, so a fix shows up.
const KNOWN_FAILURES: &[(usize, &str)] = &[
    (
        4,
        "a Δx = 4 packet's mean speed is 2·e^{-1/(4Δx²)}, so its center moves 15.75 sites in t = 8, outside 16 ± 0.2",
    ),
    (10, "leakage decays like N^-0.7 under the scaling rule at desk sizes, steeper than the [-0.5, 0] window"),
];

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn timed(id: usize, name: &'static str, limit: Option<Duration>, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (ok, mut detail) = f();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed < l);
    if let Some(l) = limit {
        detail.push_str(&format!("; runtime {:.2}s (limit {:.0}s)", elapsed.as_secs_f64(), l.as_secs_f64()));
    }
    let o = Outcome { id, name, pass: ok && in_time, detail, elapsed };
    println!("{} criterion {:>2} [{}]: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.name, o.detail);
    o
}

fn rows_pass(rows: &[VerifyRow]) -> (bool, String) {
    let bad: Vec<String> = rows.iter().filter(|r| !r.pass).map(|r| format!("{} N={} {}", r.check, r.n, r.case)).collect();
    let worst = rows.iter().map(|r| r.error).fold(0.0, f64::max);
    (bad.is_empty(), format!("{} rows, worst error {worst:.2e}, failing {:?}", rows.len(), bad))
}

fn c1_spectrum() -> (bool, String) {
    let mut worst = 0.0f64;
    for n in [4usize, 8, 16, 64] {
        let layout = ChainLayout::new(n).unwrap().with_chain("c", ChainRole::Rail1, Some(0)).unwrap();
        let b = enumerate_basis(&layout, &SectorSpec::new(vec![Constraint::Exactly(1)])).unwrap();
        let mut num: Vec<f64> = SymmetricEigen::new(h_xy_ring(&b, "c").unwrap().to_dense()).eigenvalues.iter().copied().collect();
        let mut want: Vec<f64> = (0..n).map(|p| 2.0 * (2.0 * PI * p as f64 / n as f64).cos()).collect();
        num.sort_by(|a, b| a.partial_cmp(b).unwrap());
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        worst = worst.max(num.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    (worst <= 1e-10, format!("max |E − 2cos(2πp/N)| = {worst:.2e} over N ∈ {{4, 8, 16, 64}} (tol 1e-10)"))
}

fn c2_jordan_wigner() -> (bool, String) {
    let mut rows = Vec::new();
    for n in 3..=10usize {
        let m = AncillaParams::scaling_rule(n, 1.0).m;
        rows.extend(jordan_wigner_rows(&[n], 3, m).unwrap());
        rows.extend(jordan_wigner_rows(&[n], 3, 0.1).unwrap());
    }
    rows_pass(&rows)
}

fn c3_gap() -> (bool, String) {
    let rows: Vec<VerifyRow> = gap_rows(&[4, 5, 6, 7, 8]).unwrap().into_iter().filter(|r| r.case == "numeric").collect();
    let min = rows.iter().map(|r| r.numeric).fold(f64::INFINITY, f64::min);
    let (ok, d) = rows_pass(&rows);
    (ok, format!("smallest measured gap {min:.4} (> 1 required); {d}"))
}

/// Exact mean displacement of the packet: `t Σ_p |⟨p̃|G⟩|² v(p)`. A packet
/// of finite width is slower on average than its central component.
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

fn c4_transport() -> (bool, String) {
    let p = PacketParams { x0: 32.0, p0: 16, dx: 4.0 };
    let r = packet_transport(64, p, 8.0, &EvolveConfig::default()).unwrap();
    let exact = mean_displacement(64, &p, 8.0);
    let ok = (r.shift.abs() - 16.0).abs() <= 0.2 && r.fidelity >= 0.99;
    (
        ok,
        format!(
            "center shift {:.4} sites (|shift| 16 ± 0.2; moves toward −x), exact mean displacement {exact:.4}, fidelity {:.5} (≥ 0.99)",
            r.shift, r.fidelity
        ),
    )
}

fn c5_z_gate() -> (bool, String) {
    let grid = [(0.3, 1.0), (1.0, 2.5), (-0.7, 3.0), (2.0, 4.0), (0.05, 7.5)];
    let cfg = ExperimentConfig::default();
    let errs: Vec<f64> =
        grid.iter().map(|&(phi, t)| run_z_gate(32, phi, t, GateMode::FullRing, &cfg).unwrap().phase_errors[0]).collect();
    let worst = errs.iter().copied().fold(0.0, f64::max);
    (worst < 1e-6, format!("max |phase − φt mod 2π| = {worst:.2e} over 5 (φ, t) points (tol 1e-6)"))
}

fn c6_x_gate() -> (bool, String) {
    let grid = [(0.3, 1.0), (1.0, PI / 2.0), (0.5, 2.2), (-0.8, 1.3), (2.0, 3.1)];
    let cfg = ExperimentConfig::default();
    let (mut pop, mut ph) = (0.0f64, 0.0f64);
    for &(phi, t) in &grid {
        let r = run_x_gate(32, phi, t, GateMode::FullRing, &cfg).unwrap();
        // input |𝟎⟩ stays put with probability cos²(φt)
        pop = pop.max((r.measured[0][0].norm_sqr() - (phi * t).cos().powi(2)).abs());
        ph = ph.max(r.phase_errors.iter().copied().fold(0.0, f64::max));
    }
    (pop < 1e-6 && ph < 1e-8, format!("population error {pop:.2e} (tol 1e-6), |±⟩ eigenphase error {ph:.2e} (tol 1e-8)"))
}

fn c7_entangling() -> (bool, String) {
    let (r, sectors) = run_entangling_gate(32, PI / 2.0, &EntangleOptions::default()).unwrap();
    let worst = r.phase_errors.iter().copied().fold(0.0, f64::max);
    let ret = r.ancilla_return.iter().copied().fold(1.0, f64::min);
    let s = r.entanglement_entropy.unwrap();
    let ok = worst <= 0.1 && ret >= 0.99 && s > 0.0;
    let ks: Vec<usize> = sectors.iter().map(|s| s.achieved_k).collect();
    (
        ok,
        format!(
            "phase errors {:?} rad (≤ 0.1), ancilla return ≥ {ret:.5} (≥ 0.99), entropy {s:.4} bits (> 0); ancilla truncation k per sector {ks:?}",
            r.phase_errors.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>()
        ),
    )
}

fn c8_vprime() -> (bool, String) {
    rows_pass(&vprime_rows(&[4, 5, 6, 7, 8]).unwrap())
}

fn c9_momentum() -> (bool, String) {
    let mut rows = momentum_rows(8, 5.0).unwrap();
    rows.extend(momentum_rows(8, 17.3).unwrap());
    let worst = rows.iter().map(|r| r.numeric).fold(0.0, f64::max);
    (rows.iter().all(|r| r.pass), format!("max off-diagonal amplitude {worst:.2e} (< 1e-10)"))
}

fn c10_leakage() -> (bool, String) {
    let ns = [16usize, 24, 32, 48];
    let out = sweep_leakage(&ns, &SweepRules::default()).unwrap();
    let l: Vec<f64> = out.rows.iter().map(|r| r.leakage).collect();
    let positive = l.iter().all(|&x| x > 0.0);
    let decreasing = l.windows(2).all(|w| w[1] < w[0]);
    let all_below_one = l.iter().all(|&x| x < 1.0);
    let slope = out.slope.unwrap_or(f64::NAN);
    let in_window = (-0.5..=0.0).contains(&slope);
    let zero = sweep_leakage(&[16], &SweepRules { coupling_scale: 0.0, ..Default::default() }).unwrap().rows[0].leakage;
    let ok = positive && decreasing && all_below_one && in_window && zero < 1e-9 && out.excluded.is_empty();
    (
        ok,
        format!(
            "leakage {:?}; positive {positive}, strictly decreasing {decreasing}, slope {slope:.3} (window [−0.5, 0]: {in_window}), leakage(e=0) {zero:.1e} (< 1e-9), excluded {:?}",
            l.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>(),
            out.excluded
        ),
    )
}

fn random_case(rng: &mut ChaCha8Rng) -> (SectorBasis, Vec<GateBlock>, Option<f64>) {
    let n = rng.gen_range(4..=8usize);
    let span = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.5) {
            SiteRange::FullRing
        } else {
            let s = rng.gen_range(0..n);
            SiteRange::span(s, (s + rng.gen_range(1..n)) % n)
        }
    };
    match rng.gen_range(0..3) {
        0 => {
            let layout = ChainLayout::dual_rail(n, 1).unwrap();
            let spec = SectorSpec::new(vec![Constraint::AtMost(1); 2]).with_joint(vec![0, 1], 1);
            let b = enumerate_basis(&layout, &spec).unwrap();
            let blocks = vec![
                GateBlock::z_gate("q0.r1", rng.gen_range(-2.0..2.0), span(rng)),
                GateBlock::x_gate("q0.r0", "q0.r1", rng.gen_range(-2.0..2.0), span(rng)),
            ];
            (b, blocks, None)
        }
        1 => {
            let layout = ChainLayout::new(n)
                .unwrap()
                .with_chain("a", ChainRole::Rail1, Some(0))
                .unwrap()
                .with_chain("anc", ChainRole::Ancilla, None)
                .unwrap();
            let k = rng.gen_range(1..=3usize);
            let b = enumerate_basis(&layout, &SectorSpec::new(vec![Constraint::Exactly(1), Constraint::AtMost(k)])).unwrap();
            let axis = if rng.gen_bool(0.5) { Axis::X } else { Axis::Y };
            let blocks = vec![GateBlock::v_block(axis, "a", "anc", rng.gen_range(-1.5..1.5), span(rng))];
            (b, blocks, Some(rng.gen_range(0.05..1.0)))
        }
        _ => {
            let layout = ChainLayout::new(n)
                .unwrap()
                .with_chain("a", ChainRole::Rail1, Some(0))
                .unwrap()
                .with_chain("b", ChainRole::Rail1, Some(1))
                .unwrap();
            let spec = SectorSpec::new(vec![Constraint::AtMost(2), Constraint::AtMost(2)]);
            let b = enumerate_basis(&layout, &spec).unwrap();
            let blocks = vec![GateBlock::nonlocal_cphase("a", "b", rng.gen_range(-2.0..2.0), span(rng))];
            (b, blocks, None)
        }
    }
}

fn c11_oracle() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_611);
    let mut worst = 0.0f64;
    let mut dims = Vec::new();
    while dims.len() < 20 {
        let (basis, blocks, m) = random_case(&mut rng);
        if basis.dim() > 1024 {
            continue;
        }
        let h = h_total(&basis, &blocks, m).unwrap();
        let amps: Vec<C64> = (0..basis.dim()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let psi = StateVector::new(basis.hash(), amps).unwrap();
        let t = rng.gen_range(0.1..5.0);
        let krylov = evolve(&h, &psi, t, &EvolveConfig::default()).unwrap();
        let dense = DenseEvolver::new(&h).unwrap().evolve(&psi, t).unwrap();
        worst = worst.max(krylov.distance(&dense).unwrap());
        dims.push(basis.dim());
    }
    (worst <= 1e-9, format!("max ‖Krylov − dense‖ = {worst:.2e} over 20 configurations, dims {dims:?} (tol 1e-9)"))
}

fn c12_determinism() -> (bool, String) {
    let csv = || {
        let mut buf = Vec::new();
        verify_appendix().unwrap().write_csv(&mut buf).unwrap();
        buf
    };
    let (a, b) = (csv(), csv());
    (a == b, format!("two verify-appendix runs: {} and {} bytes, identical {}", a.len(), b.len(), a == b))
}

fn main() -> ExitCode {
    let min = |m: u64| Some(Duration::from_secs(60 * m));
    let outcomes = vec![
        timed(1, "spectrum", Some(Duration::from_secs(1)), c1_spectrum),
        timed(2, "jordan-wigner", Some(Duration::from_secs(30)), c2_jordan_wigner),
        timed(3, "gap certificate", None, c3_gap),
        timed(4, "packet transport", Some(Duration::from_secs(10)), c4_transport),
        timed(5, "z gate", None, c5_z_gate),
        timed(6, "x gate", None, c6_x_gate),
        timed(7, "entangling truth table", min(10), c7_entangling),
        timed(8, "v' matrix elements", None, c8_vprime),
        timed(9, "momentum conservation", None, c9_momentum),
        timed(10, "leakage scaling", min(60), c10_leakage),
        timed(11, "oracle equivalence", None, c11_oracle),
        timed(12, "determinism", None, c12_determinism),
    ];
    let total: f64 = outcomes.iter().map(|o| o.elapsed.as_secs_f64()).sum();
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("{passed}/{} criteria pass ({total:.1}s)", outcomes.len());
    let mut unexpected = Vec::new();
    for o in &outcomes {
        let known = KNOWN_FAILURES.iter().find(|(id, _)| *id == o.id);
        match (o.pass, known) {
            (false, Some((_, why))) => println!("known failure {}: {why}", o.id),
            (false, None) => unexpected.push(format!("criterion {} ({}) failed", o.id, o.name)),
            (true, Some(_)) => unexpected.push(format!("criterion {} ({}) now passes; update KNOWN_FAILURES", o.id, o.name)),
            (true, None) => {}
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("{unexpected:#?}");
        ExitCode::FAILURE
    }
}
