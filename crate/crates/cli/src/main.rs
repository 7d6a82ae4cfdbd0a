//! `foldra` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 coverage,
//! synthesis or mesh error, 4 I/O error. Failures print one
//! machine-readable `FOLDRA_ERROR` line followed by a human message on
//! stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use foldra::layout::{import_design, DesignedAperture};
use foldra::pipeline::{self, RunConfig};
use foldra::{Error, Result};

/// Environment variable overriding the configured output directory.
const OUT_ENV: &str = "FOLDRA_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "foldra",
    version,
    about = "Folded metasurface reflectarray design toolkit"
)]
struct Cli {
    /// Run configuration (JSON); defaults describe the reference prototype.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides FOLDRA_OUT_DIR and the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a unit-cell sweep table and write its normalized form.
    Ingest {
        csv: PathBuf,
        #[arg(long, default_value_t = foldra::unitcell::DEFAULT_MIN_CROSS_MAG)]
        min_cross_mag: f64,
    },
    /// Lay out the aperture and assign cell geometries.
    Synthesize,
    /// Radiation pattern and metrics at one frequency.
    Analyze {
        #[arg(long)]
        design: Option<PathBuf>,
        /// Frequency in GHz; defaults to the configured analysis frequency.
        #[arg(long)]
        freq: Option<f64>,
    },
    /// Metrics over the configured band and gain bandwidths.
    Sweep {
        #[arg(long)]
        design: Option<PathBuf>,
    },
    /// Binary STL meshes of the surface and the polarizer panel.
    ExportStl {
        #[arg(long)]
        design: Option<PathBuf>,
        /// Write meshes even if they fail the watertight check.
        #[arg(long)]
        force: bool,
    },
    /// Human-readable summary with the efficiency decomposition.
    Report {
        #[arg(long)]
        design: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 4,
        Error::Coverage { .. } | Error::Unresolved(_) | Error::Mesh(_) => 3,
        _ => 2,
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_path(p),
        None => {
            let c = RunConfig::default();
            c.validate()?;
            Ok(c)
        }
    }
}

fn out_dir(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| {
            std::env::var_os(OUT_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        })
        .unwrap_or_else(|| cfg.output_dir.clone())
}

/// Loads `--design` or synthesizes a fresh one into `out`.
fn design_for(cfg: &RunConfig, design: Option<&Path>, out: &Path) -> Result<DesignedAperture> {
    match design {
        Some(p) => import_design(p),
        None => pipeline::cmd_synthesize(cfg, out),
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    }
    let cfg = load_config(cli.config.as_deref())?;
    let out = out_dir(cli, &cfg);
    match &cli.command {
        Command::Ingest { csv, min_cross_mag } => {
            let s = pipeline::cmd_ingest(csv, *min_cross_mag, &out)?;
            println!(
                "ingested {} entries at {} frequencies",
                s.entries,
                s.coverage.len()
            );
            for c in &s.coverage {
                match c.qualifying_span_deg {
                    Some(span) => println!("  {:.3} GHz: coverage {span:.1} deg", c.freq_ghz),
                    None => println!("  {:.3} GHz: too few qualifying entries", c.freq_ghz),
                }
            }
        }
        Command::Synthesize => {
            let d = pipeline::cmd_synthesize(&cfg, &out)?;
            let r = d.report();
            println!(
                "{} sites ({} omitted), rms phase error {:.3} deg -> {}",
                r.element_count,
                r.omitted_count,
                r.rms_phase_error_deg,
                out.join("design.json").display()
            );
        }
        Command::Analyze { design, freq } => {
            let d = design_for(&cfg, design.as_deref(), &out)?;
            let a = pipeline::cmd_analyze(&cfg, &d, *freq, &out)?;
            let m = &a.metrics;
            println!(
                "{:.3} GHz: gain {:.2} dBi, directivity {:.2} dBi, HPBW {:.2}/{:.2} deg, SLL {:.2} dB, X-pol {:.2} dB",
                m.freq_ghz, m.realized_gain_dbi, m.directivity_dbi, m.hpbw_xoz_deg, m.hpbw_yoz_deg, m.sll_db, m.xpol_level_db
            );
        }
        Command::Sweep { design } => {
            let d = design_for(&cfg, design.as_deref(), &out)?;
            let s = pipeline::cmd_sweep(&cfg, &d, &out)?.sweep;
            println!(
                "peak {:.2} dBi at {:.3} GHz; 1 dB bandwidth {:.2} %, 3 dB bandwidth {:.2} %",
                s.peak_gain_dbi, s.peak_freq_ghz, s.bw_1db.percent, s.bw_3db.percent
            );
        }
        Command::ExportStl { design, force } => {
            let d = design_for(&cfg, design.as_deref(), &out)?;
            let s = pipeline::cmd_export_stl(&cfg, &d, *force, &out)?;
            println!(
                "rms.stl {} triangles, mpg.stl {} triangles ({} strips)",
                s.rms.triangles, s.mpg.triangles, s.mpg_strips
            );
        }
        Command::Report { design } => {
            let d = design_for(&cfg, design.as_deref(), &out)?;
            print!("{}", pipeline::cmd_report(&cfg, &d, &out)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            let msg = serde_json::to_string(&e.to_string()).unwrap_or_default();
            eprintln!("FOLDRA_ERROR kind={} code={code} message={msg}", e.kind());
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}
