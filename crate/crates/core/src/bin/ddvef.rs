use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ddvef_core::benchmark::run_benchmark;
use ddvef_core::config::{DiffusionModelKind, RunConfig};
use ddvef_core::diffusion::run_diffusion_model;
use ddvef_core::io;
use ddvef_core::metrics::compare_runs;
use ddvef_core::moments::LoState;
use ddvef_core::transport::run_fom;
use ddvef_core::vef::{fused_pipeline, offline_phase, online_phase};
use ddvef_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ddvef",
    version,
    about = "Multigroup thermal radiative transfer with data-driven VEF closures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Ci,
    Full,
}

#[derive(Args)]
struct Common {
    /// Configuration file; overrides --scale.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Built-in problem size when no configuration file is given.
    #[arg(long, value_enum, default_value = "full")]
    scale: Scale,
    /// Output directory (default: config value, or $DDVEF_OUTPUT_DIR).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => match self.scale {
                Scale::Ci => RunConfig::ci_scale(),
                Scale::Full => RunConfig::default(),
            },
        };
        if let Some(dir) = &self.output {
            cfg.output_dir = dir.clone();
        } else {
            cfg.output_dir = cfg.resolved_output_dir();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the full-order transport model.
    Fom(Common),
    /// Run a diffusion model and write its history.
    Diffusion {
        #[command(flatten)]
        common: Common,
        /// p1, p13 or fld (default: config value).
        #[arg(long, short)]
        model: Option<DiffusionModelKind>,
    },
    /// Compute closure data from a temperature dataset.
    Offline {
        #[command(flatten)]
        common: Common,
        /// Dataset holding a temperature record.
        #[arg(long, short)]
        temperatures: PathBuf,
    },
    /// Solve the VEF model with stored closure data.
    Online {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        closure: PathBuf,
    },
    /// Offline and online phases without storing the closure.
    Fused {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        temperatures: PathBuf,
    },
    /// Compare a run with a reference and write CSV tables.
    Compare {
        #[command(flatten)]
        common: Common,
        run: PathBuf,
        reference: PathBuf,
        /// Prefix of the CSV file names.
        #[arg(long, default_value = "compare")]
        name: String,
    },
    /// Run every model and write error tables against the FOM.
    Benchmark(Common),
}

fn write_history(cfg: &RunConfig, name: &str, states: &[LoState]) -> Result<PathBuf> {
    let path = cfg.output_dir.join(name);
    io::write_file(&path, &io::history_records(&cfg.mesh()?, states))?;
    Ok(path)
}

fn read_history(path: &Path) -> Result<(io::SpatialMeshDims, Vec<LoState>)> {
    io::history_from_records(&io::read_file(path)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fom(common) => {
            let cfg = common.config()?;
            let states: Vec<LoState> = run_fom(&cfg)?.iter().map(LoState::from).collect();
            println!(
                "wrote {}",
                write_history(&cfg, "fom.ddvef", &states)?.display()
            );
        }
        Command::Diffusion { common, model } => {
            let cfg = common.config()?;
            let kind = model.unwrap_or(cfg.model);
            let states = run_diffusion_model(kind, &cfg)?;
            let name = format!("diffusion_{}.ddvef", kind.name());
            println!("wrote {}", write_history(&cfg, &name, &states)?.display());
        }
        Command::Offline {
            common,
            temperatures,
        } => {
            let cfg = common.config()?;
            let data = io::temperature_from_records(&io::read_file(&temperatures)?)?;
            let closure = offline_phase(&data, &cfg)?;
            let path = cfg.output_dir.join("closure.ddvef");
            io::write_file(&path, &io::closure_records(&closure))?;
            println!("wrote {}", path.display());
        }
        Command::Online { common, closure } => {
            let cfg = common.config()?;
            let data = io::closure_from_records(&io::read_file(&closure)?)?;
            let states = online_phase(&data, &cfg)?;
            println!(
                "wrote {}",
                write_history(&cfg, "vef.ddvef", &states)?.display()
            );
        }
        Command::Fused {
            common,
            temperatures,
        } => {
            let cfg = common.config()?;
            let data = io::temperature_from_records(&io::read_file(&temperatures)?)?;
            let states = fused_pipeline(&data, &cfg)?;
            println!(
                "wrote {}",
                write_history(&cfg, "vef.ddvef", &states)?.display()
            );
        }
        Command::Compare {
            common,
            run,
            reference,
            name,
        } => {
            let cfg = common.config()?;
            let (da, a) = read_history(&run)?;
            let (db, b) = read_history(&reference)?;
            if da != db {
                return Err(Error::Dimension(format!(
                    "run is {}x{}, reference is {}x{}",
                    da.nx, da.ny, db.nx, db.ny
                )));
            }
            let mesh = ddvef_core::grid::SpatialMesh::new(da.nx, da.ny, cfg.lx, cfg.ly)?;
            let report = compare_runs(&mesh, &a, &b)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            let open = |suffix: &str| -> Result<BufWriter<File>> {
                let path = cfg.output_dir.join(format!("{name}_{suffix}.csv"));
                println!("wrote {}", path.display());
                Ok(BufWriter::new(File::create(path)?))
            };
            report.write_errors_csv(open("errors")?)?;
            report.write_boundary_csv(open("boundary")?)?;
            report.write_group_csv(open("groups")?, &cfg.frequency_grid()?)?;
        }
        Command::Benchmark(common) => {
            let cfg = common.config()?;
            let results = run_benchmark(&cfg)?;
            for path in results.write_artifacts(&cfg.output_dir)? {
                println!("wrote {}", path.display());
            }
            print!("{}", results.summary()?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
