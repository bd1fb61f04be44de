//! Browser bindings: packet transport frames, the one-excitation spectrum
//! and X-gate rail populations. Results are flat `f64` arrays so the page
//! can draw them without a serializer.

use wasm_bindgen::prelude::*;

use xyqc::basis::{enumerate_basis, ChainLayout, ChainRole, Constraint, SectorSpec};
use xyqc::harness::gates::single_qubit_basis;
use xyqc::harness::wires::single_excitation_spectrum;
use xyqc::operators::{h_total, h_xy_ring, GateBlock, SiteRange};
use xyqc::propagate::{EvolveConfig, Propagator};
use xyqc::states::{gaussian_packet, logical_state, readout, site_distribution, PacketParams};

fn fail(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Site probabilities of a packet at `frames` equally spaced times in
/// `[0, t_max]`, row-major `frames × n`.
#[wasm_bindgen]
pub fn packet_frames(n: usize, p0: i32, dx: f64, t_max: f64, frames: usize) -> Result<Vec<f64>, JsError> {
    let layout = ChainLayout::new(n).map_err(fail)?.with_chain("c", ChainRole::Rail1, Some(0)).map_err(fail)?;
    let basis = enumerate_basis(&layout, &SectorSpec::new(vec![Constraint::Exactly(1)])).map_err(fail)?;
    let h = h_xy_ring(&basis, "c").map_err(fail)?;
    let params = PacketParams { x0: (n / 2) as f64, p0: p0 as i64, dx };
    let mut psi = gaussian_packet(&basis, "c", &params).map_err(fail)?;
    let mut prop = Propagator::new(&h, EvolveConfig::default()).map_err(fail)?;
    let dt = if frames > 1 { t_max / (frames - 1) as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(frames * n);
    for f in 0..frames {
        if f > 0 {
            psi = prop.evolve(&psi, dt).map_err(fail)?.0;
        }
        out.extend(site_distribution(&psi, &basis, 0));
    }
    Ok(out)
}

/// `[numeric₀, exact₀, numeric₁, exact₁, …]` for momenta `p = 0..N`.
#[wasm_bindgen]
pub fn spectrum_comparison(n: usize) -> Result<Vec<f64>, JsError> {
    Ok(single_excitation_spectrum(n).map_err(fail)?.into_iter().flat_map(|(a, b)| [a, b]).collect())
}

/// Rail-1 population of a `|𝟎⟩` packet under a FullRing X block, sampled
/// at `steps` times in `[0, t_max]`.
#[wasm_bindgen]
pub fn x_gate_populations(n: usize, phi: f64, t_max: f64, steps: usize) -> Result<Vec<f64>, JsError> {
    let basis = single_qubit_basis(n).map_err(fail)?;
    let h = h_total(&basis, &[GateBlock::x_gate("q0.r0", "q0.r1", phi, SiteRange::FullRing)], None).map_err(fail)?;
    let mut psi = logical_state(&basis, 0, 0, &PacketParams::default_for(n, 0.0)).map_err(fail)?;
    let mut prop = Propagator::new(&h, EvolveConfig::default()).map_err(fail)?;
    let dt = if steps > 1 { t_max / (steps - 1) as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(steps);
    for s in 0..steps {
        if s > 0 {
            psi = prop.evolve(&psi, dt).map_err(fail)?.0;
        }
        out.push(readout(&psi, &basis).map_err(fail)?.qubits[0].p1);
    }
    Ok(out)
}
