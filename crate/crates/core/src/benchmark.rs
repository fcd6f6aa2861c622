//! The full comparison pipeline: FOM, the three diffusion models and the
//! VEF model driven by each of them.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::{DiffusionModelKind, RunConfig};
use crate::diffusion::{run_diffusion_model, TemperatureDataset};
use crate::error::Result;
use crate::grid::SpatialMesh;
use crate::metrics::{compare_runs, group_spectrum, ErrorReport, Probe};
use crate::moments::LoState;
use crate::transport::run_fom;
use crate::vef::fused_pipeline;

/// Histories of every model on one configuration.
#[derive(Debug, Clone)]
pub struct BenchmarkResults {
    pub config: RunConfig,
    pub mesh: SpatialMesh,
    pub fom: Vec<LoState>,
    pub diffusion: Vec<(DiffusionModelKind, Vec<LoState>)>,
    /// VEF histories keyed by the diffusion model that supplied the
    /// temperatures.
    pub vef: Vec<(DiffusionModelKind, Vec<LoState>)>,
}

/// Run every model on `cfg`.
pub fn run_benchmark(cfg: &RunConfig) -> Result<BenchmarkResults> {
    let mesh = cfg.mesh()?;
    log::info!("running the full-order model");
    let fom: Vec<LoState> = run_fom(cfg)?.iter().map(LoState::from).collect();
    let mut diffusion = Vec::new();
    let mut vef = Vec::new();
    for kind in DiffusionModelKind::ALL {
        log::info!("running {kind}");
        let states = run_diffusion_model(kind, cfg)?;
        log::info!("running DD-VEF({kind})");
        let data = TemperatureDataset::from_states(&mesh, &states);
        vef.push((kind, fused_pipeline(&data, cfg)?));
        diffusion.push((kind, states));
    }
    Ok(BenchmarkResults {
        config: cfg.clone(),
        mesh,
        fom,
        diffusion,
        vef,
    })
}

impl BenchmarkResults {
    /// Named histories: diffusion models first, then the VEF runs.
    pub fn runs(&self) -> Vec<(String, &[LoState])> {
        let mut out: Vec<(String, &[LoState])> = self
            .diffusion
            .iter()
            .map(|(k, s)| (k.name().to_string(), s.as_slice()))
            .collect();
        out.extend(
            self.vef
                .iter()
                .map(|(k, s)| (format!("vef_{}", k.name()), s.as_slice())),
        );
        out
    }

    /// Error reports of every run against the FOM.
    pub fn reports(&self) -> Result<Vec<(String, ErrorReport)>> {
        self.runs()
            .into_iter()
            .map(|(name, states)| Ok((name, compare_runs(&self.mesh, states, &self.fom)?)))
            .collect()
    }

    /// Write the CSV tables into `dir` and return the paths written.
    pub fn write_artifacts(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let groups = self.config.frequency_grid()?;
        let mut written = Vec::new();
        let mut create = |name: String| -> Result<(PathBuf, BufWriter<File>)> {
            let path = dir.join(name);
            let file = BufWriter::new(File::create(&path)?);
            written.push(path.clone());
            Ok((path, file))
        };
        for (name, report) in self.reports()? {
            report.write_errors_csv(create(format!("{name}_errors.csv"))?.1)?;
            report.write_boundary_csv(create(format!("{name}_boundary.csv"))?.1)?;
            report.write_group_csv(create(format!("{name}_groups.csv"))?.1, &groups)?;
        }
        let (_, mut out) = create("spectrum.csv".into())?;
        let mut runs = vec![("fom".to_string(), self.fom.as_slice())];
        runs.extend(self.runs());
        write!(out, "probe,group,nu_center")?;
        for (name, _) in &runs {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for probe in Probe::ALL {
            let spectra = runs
                .iter()
                .map(|(_, s)| {
                    let last = s.last().expect("initial state");
                    group_spectrum(&probe.energies(&self.mesh, &last.moments), &groups)
                })
                .collect::<Result<Vec<_>>>()?;
            for g in 0..groups.num_groups() {
                write!(out, "{},{g},{:.6e}", probe.name(), groups.center(g))?;
                for s in &spectra {
                    write!(out, ",{:.10e}", s[g])?;
                }
                writeln!(out)?;
            }
        }
        out.flush()?;
        Ok(written)
    }

    /// One line per run: maximum and final errors in `T` and `E`.
    pub fn summary(&self) -> Result<String> {
        let mut s = format!(
            "{:<10} {:>12} {:>12} {:>12} {:>12}\n",
            "run", "max T err", "final T err", "max E err", "final E err"
        );
        for (name, r) in self.reports()? {
            let max = |v: &[f64]| v.iter().skip(1).fold(0.0_f64, |m, x| m.max(*x));
            s.push_str(&format!(
                "{:<10} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e}\n",
                name,
                max(&r.temperature),
                r.temperature.last().copied().unwrap_or(0.0),
                max(&r.energy),
                r.energy.last().copied().unwrap_or(0.0)
            ));
        }
        Ok(s)
    }
}
