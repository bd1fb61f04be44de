use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use xyqc::harness::circuit::{run_circuit, CircuitSpec};
use xyqc::harness::gates::{run_entangling_gate, run_x_gate, run_z_gate, EntangleOptions, ExperimentConfig, GateMode};
use xyqc::harness::record::ExperimentRecord;
use xyqc::harness::sweep::{sweep_leakage, write_sweep_csv, SweepRules};
use xyqc::harness::verify::verify_appendix;
use xyqc::harness::wires::{ancilla_spectrum, packet_transport, single_excitation_spectrum};
use xyqc::harness::HarnessError;
use xyqc::propagate::{EvolveConfig, TruncationEscalation};
use xyqc::states::PacketParams;

#[derive(Parser)]
#[command(name = "xyqc", version, about = "Packet-qubit circuits on XY spin rings")]
struct Cli {
    /// Write the JSON summary here instead of stdout.
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    FullRing,
    Finite,
}

impl From<Mode> for GateMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::FullRing => GateMode::FullRing,
            Mode::Finite => GateMode::Finite,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SpectrumKind {
    /// One excitation on a bare ring.
    Rail,
    /// Ancilla chain with `k` excitations.
    Ancilla,
}

#[derive(clap::Args)]
struct PacketArgs {
    /// Packet center (default 0).
    #[arg(long)]
    x0: Option<f64>,
    /// Carrier momentum index (default N/4).
    #[arg(long)]
    p0: Option<i64>,
    /// Width in sites (default ⌈N^{1/3}⌉).
    #[arg(long)]
    dx: Option<f64>,
}

impl PacketArgs {
    fn params(&self, n: usize) -> PacketParams {
        let d = PacketParams::default_for(n, self.x0.unwrap_or(0.0));
        PacketParams { p0: self.p0.unwrap_or(d.p0), dx: self.dx.unwrap_or(d.dx), ..d }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Numeric spectrum against the closed form.
    Spectrum {
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "rail")]
        kind: SpectrumKind,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0.1)]
        m: f64,
    },
    /// Free transport of one Gaussian packet.
    Packet {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: f64,
        #[command(flatten)]
        packet: PacketArgs,
    },
    /// Phase gate on one qubit.
    GateZ {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        phi: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum, default_value = "full-ring")]
        mode: Mode,
        #[command(flatten)]
        packet: PacketArgs,
    },
    /// Rung gate between the two rails of one qubit.
    GateX {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        phi: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum, default_value = "full-ring")]
        mode: Mode,
        #[command(flatten)]
        packet: PacketArgs,
    },
    /// Ancilla-mediated entangling gate on the four logical inputs.
    Entangle {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        phi: f64,
        /// c in e/√N = c·N^{-2/3}.
        #[arg(long, default_value_t = 1.0)]
        coupling_scale: f64,
        /// Override m (breaks the scaling rule).
        #[arg(long)]
        m: Option<f64>,
        /// Override e.
        #[arg(long)]
        e: Option<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        k_max: Vec<usize>,
        #[arg(long, default_value_t = 2e-2)]
        threshold: f64,
        #[arg(long, default_value_t = 40_000)]
        max_dim: usize,
        #[arg(long)]
        allow_outside_gap: bool,
    },
    /// Leakage of one packet across ring sizes, with the fitted log-log slope.
    LeakageSweep {
        #[arg(long, value_delimiter = ',', default_value = "16,24,32,48")]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        coupling_scale: f64,
        #[arg(long, default_value_t = 2)]
        k_max: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Omit the wall-time column so the CSV is reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// Run a circuit described by a TOML or JSON file.
    Circuit {
        spec: PathBuf,
    },
    /// Analytic-vs-numeric suite; exits nonzero if any row fails.
    VerifyAppendix {
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn emit(path: &Option<PathBuf>, record: &ExperimentRecord) -> Result<(), HarnessError> {
    match path {
        Some(p) => record.write_json(BufWriter::new(File::create(p)?)),
        None => record.write_json(io::stdout().lock()),
    }
}

fn run(cli: Cli) -> Result<bool, HarnessError> {
    let cfg = EvolveConfig::default();
    match cli.cmd {
        Cmd::Spectrum { n, kind, k, m } => {
            let rows: Vec<(f64, f64)> = match kind {
                SpectrumKind::Rail => single_excitation_spectrum(n)?,
                SpectrumKind::Ancilla => ancilla_spectrum(n, m, k)?,
            };
            let worst = rows.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let kind = match kind {
                SpectrumKind::Rail => "rail",
                SpectrumKind::Ancilla => "ancilla",
            };
            let config = json!({"n": n, "kind": kind, "k": k, "m": m});
            emit(&cli.json, &ExperimentRecord::new("spectrum", &config, &json!({"eigenvalues": rows, "max_deviation": worst}))?)?;
            Ok(true)
        }
        Cmd::Packet { n, t, packet } => {
            let r = packet_transport(n, packet.params(n), t, &cfg)?;
            emit(&cli.json, &ExperimentRecord::new("packet", &json!({"n": n, "t": t}), &r)?)?;
            Ok(true)
        }
        Cmd::GateZ { n, phi, t, mode, packet } => {
            let ec = ExperimentConfig { evolve: cfg, packet: Some(packet.params(n)) };
            let r = run_z_gate(n, phi, t, mode.into(), &ec)?;
            emit(&cli.json, &ExperimentRecord::new("gate-z", &json!({"n": n, "phi": phi, "t": t, "config": ec}), &r)?)?;
            Ok(true)
        }
        Cmd::GateX { n, phi, t, mode, packet } => {
            let ec = ExperimentConfig { evolve: cfg, packet: Some(packet.params(n)) };
            let r = run_x_gate(n, phi, t, mode.into(), &ec)?;
            emit(&cli.json, &ExperimentRecord::new("gate-x", &json!({"n": n, "phi": phi, "t": t, "config": ec}), &r)?)?;
            Ok(true)
        }
        Cmd::Entangle { n, phi, coupling_scale, m, e, k_max, threshold, max_dim, allow_outside_gap } => {
            let mut opts = EntangleOptions {
                coupling_scale,
                escalation: TruncationEscalation { k_max, threshold, max_dim: Some(max_dim) },
                allow_outside_gap,
                ..Default::default()
            };
            if m.is_some() || e.is_some() {
                let base = opts.params(n);
                opts.params = Some(xyqc::operators::AncillaParams::new(m.unwrap_or(base.m), e.unwrap_or(base.e))?);
            }
            let (r, sectors) = run_entangling_gate(n, phi, &opts)?;
            emit(&cli.json, &ExperimentRecord::new("entangle", &json!({"n": n, "phi": phi, "options": opts}), &json!({"gate": r, "sectors": sectors}))?)?;
            Ok(true)
        }
        Cmd::LeakageSweep { ns, coupling_scale, k_max, csv, no_timing } => {
            let rules = SweepRules { coupling_scale, k_max, ..Default::default() };
            let out = sweep_leakage(&ns, &rules)?;
            if let Some(p) = csv {
                write_sweep_csv(&out.rows, !no_timing, BufWriter::new(File::create(p)?))?;
            }
            emit(&cli.json, &ExperimentRecord::new("leakage-sweep", &json!({"ns": ns, "rules": rules}), &out)?)?;
            Ok(true)
        }
        Cmd::Circuit { spec } => {
            let s = CircuitSpec::from_path(&spec)?;
            let r = run_circuit(&s)?;
            emit(&cli.json, &ExperimentRecord::new("circuit", &s, &r)?)?;
            Ok(true)
        }
        Cmd::VerifyAppendix { csv } => {
            let report = verify_appendix()?;
            match csv {
                Some(p) => report.write_csv(BufWriter::new(File::create(p)?))?,
                None => report.write_csv(io::stdout().lock())?,
            }
            let failed: Vec<_> = report.failures().collect();
            for f in &failed {
                eprintln!("FAIL {} N={} {}: numeric {} reference {}", f.check, f.n, f.case, f.numeric, f.reference);
            }
            eprintln!("{} rows, {} failed", report.rows.len(), failed.len());
            Ok(failed.is_empty())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {e}");
            ExitCode::from(2)
        }
    }
}
