//! Leakage of one packet under a FullRing V_X block, across ring sizes.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analytic::{loglog_slope, single_packet_basis};
use crate::operators::{h_tilde0, h_total, AncillaParams, Axis, GateBlock, SiteRange};
use crate::propagate::{evolve, EvolveConfig};
use crate::states::{gaussian_packet, PacketParams};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRules {
    /// `c` in `e/√N = c·N^{−2/3}`, with `1/m = 2N² + 1`.
    pub coupling_scale: f64,
    /// Ancilla truncation.
    pub k_max: usize,
    /// Phase `Φ = (e/√N)·Δt` accumulated by the block; `Δt = Φ√N/e`.
    pub phase: f64,
    /// A row is flagged non-converged when the weight on the top ancilla
    /// shell exceeds this. At k_max = 2 that shell is part of the physical
    /// leakage; 1e-3 keeps the k = 3 correction to the leakage below ~1e-3
    /// relative (checked directly at N = 16 and 24).
    pub shell_threshold: f64,
    pub evolve: EvolveConfig,
}

impl Default for SweepRules {
    fn default() -> Self {
        Self { coupling_scale: 1.0, k_max: 2, phase: 1.0, shell_threshold: 1e-3, evolve: EvolveConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub m: f64,
    pub e: f64,
    pub dt: f64,
    pub k_max: usize,
    pub leakage: f64,
    /// Weight of the full evolution on ancilla states with `k_max` particles.
    pub shell_weight: f64,
    pub wall_time_s: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// Log-log slope over converged rows with `e ≠ 0`; `None` with < 2 such rows.
    pub slope: Option<f64>,
    pub excluded: Vec<usize>,
}

/// `‖e^{−iHΔt}ψ − e^{−iH̃₀Δt}ψ‖` for one ring size. `coupling_scale = 0`
/// gives the `e = 0` control row, run for the `c = 1` duration.
pub fn leakage_point(n: usize, rules: &SweepRules) -> Result<SweepRow, HarnessError> {
    let start = Instant::now();
    let p = AncillaParams::scaling_rule(n, rules.coupling_scale);
    let g = if p.e == 0.0 { AncillaParams::scaling_rule(n, 1.0).effective_coupling(n) } else { p.effective_coupling(n) };
    let dt = rules.phase / g;
    let basis = single_packet_basis(n, rules.k_max)?;
    let blocks = [GateBlock::v_block(Axis::X, "a", "anc", p.e, SiteRange::FullRing)];
    let psi = gaussian_packet(&basis, "a", &PacketParams::default_for(n, 0.0))?;
    let full = evolve(&h_total(&basis, &blocks, Some(p.m))?, &psi, dt, &rules.evolve)?;
    let eff = evolve(&h_tilde0(&basis, &blocks, Some(p.m))?, &psi, dt, &rules.evolve)?;
    let leakage = full.distance(&eff)?;
    let anc = basis.chain_index("anc")?;
    let shell_weight: f64 = basis
        .iter()
        .filter(|(_, cfg)| cfg[anc].count_ones() as usize == rules.k_max)
        .map(|(i, _)| full.amplitudes()[i].norm_sqr())
        .sum();
    Ok(SweepRow {
        n,
        m: p.m,
        e: p.e,
        dt,
        k_max: rules.k_max,
        leakage,
        shell_weight,
        wall_time_s: start.elapsed().as_secs_f64(),
        converged: shell_weight <= rules.shell_threshold,
    })
}

fn run_points(ns: &[usize], rules: &SweepRules) -> Result<Vec<SweepRow>, HarnessError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ns.par_iter().map(|&n| leakage_point(n, rules)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ns.iter().map(|&n| leakage_point(n, rules)).collect()
    }
}

pub fn sweep_leakage(ns: &[usize], rules: &SweepRules) -> Result<SweepOutcome, HarnessError> {
    let rows = run_points(ns, rules)?;
    let excluded: Vec<usize> = rows.iter().filter(|r| !r.converged).map(|r| r.n).collect();
    let fit: Vec<&SweepRow> = rows.iter().filter(|r| r.converged && r.e != 0.0 && r.leakage > 0.0).collect();
    let slope = (fit.len() >= 2).then(|| {
        let xs: Vec<f64> = fit.iter().map(|r| r.n as f64).collect();
        let ys: Vec<f64> = fit.iter().map(|r| r.leakage).collect();
        loglog_slope(&xs, &ys)
    });
    Ok(SweepOutcome { rows, slope, excluded })
}

/// CSV with one row per point; `include_timing = false` drops the only
/// non-deterministic column.
pub fn write_sweep_csv(rows: &[SweepRow], include_timing: bool, w: impl Write) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["N", "m", "e", "dt", "k_max", "leakage", "shell_weight", "converged"];
    if include_timing {
        header.push("wall_time_s");
    }
    out.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.n.to_string(),
            format!("{:e}", r.m),
            format!("{:e}", r.e),
            format!("{:e}", r.dt),
            r.k_max.to_string(),
            format!("{:e}", r.leakage),
            format!("{:e}", r.shell_weight),
            r.converged.to_string(),
        ];
        if include_timing {
            rec.push(format!("{:.3}", r.wall_time_s));
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coupling_has_no_leakage() {
        let rules = SweepRules { coupling_scale: 0.0, ..Default::default() };
        let row = leakage_point(8, &rules).unwrap();
        assert!(row.leakage < 1e-9);
    }

    #[test]
    fn small_ring_leaks_a_little() {
        let row = leakage_point(8, &SweepRules::default()).unwrap();
        assert!(row.leakage > 0.0 && row.leakage < 1.0);
    }
}
