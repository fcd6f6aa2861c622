//! Error norms, right-boundary averages and spectra used to compare a run
//! against a reference.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fields::MomentField;
use crate::grid::{FrequencyGrid, SpatialMesh};
use crate::moments::LoState;
use crate::transport::FomState;

/// `|a - b|_2 / |b|_2` with cell-volume weights.
pub fn spatial_rel_2norm(mesh: &SpatialMesh, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() != mesh.num_cells() {
        return Err(Error::Dimension(format!(
            "fields of length {} and {} on a mesh of {} cells",
            a.len(),
            b.len(),
            mesh.num_cells()
        )));
    }
    let v = mesh.cell_volume();
    let num: f64 = a.iter().zip(b).map(|(x, y)| v * (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| v * y * y).sum();
    if den == 0.0 {
        return Err(Error::UndefinedNorm);
    }
    Ok((num / den).sqrt())
}

/// `sqrt(sum (x^n - r^n)^2 dt_n) / sqrt(sum (r^n)^2 dt_n)` over the levels
/// `n >= 1` of `times`, with `dt_n = t_n - t_{n-1}`.
pub fn temporal_rel_2norm(x: &[f64], r: &[f64], times: &[f64]) -> Result<f64> {
    if x.len() != r.len() || x.len() != times.len() {
        return Err(Error::Dimension(
            "series and time grid lengths differ".into(),
        ));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for n in 1..times.len() {
        let dt = times[n] - times[n - 1];
        num += (x[n] - r[n]).powi(2) * dt;
        den += r[n] * r[n] * dt;
    }
    if den == 0.0 {
        return Err(Error::UndefinedNorm);
    }
    Ok((num / den).sqrt())
}

/// Max-norm counterpart of [`temporal_rel_2norm`].
pub fn temporal_rel_max_norm(x: &[f64], r: &[f64]) -> Result<f64> {
    if x.len() != r.len() {
        return Err(Error::Dimension("series lengths differ".into()));
    }
    let num = x
        .iter()
        .zip(r)
        .skip(1)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let den = r.iter().skip(1).fold(0.0_f64, |m, b| m.max(b.abs()));
    if den == 0.0 {
        return Err(Error::UndefinedNorm);
    }
    Ok(num / den)
}

/// Averages over the right boundary at one time level.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BoundaryAverage {
    /// Group-summed `F_x` on the boundary faces.
    pub flux: f64,
    /// Group-summed `E` in the boundary cells.
    pub energy: f64,
    /// Material temperature in the boundary cells.
    pub temperature: f64,
}

/// Face-weighted right-boundary averages of one state.
pub fn boundary_average(
    mesh: &SpatialMesh,
    temperature: &[f64],
    moments: &MomentField,
) -> BoundaryAverage {
    let i = mesh.nx - 1;
    let mut out = BoundaryAverage::default();
    for j in 0..mesh.ny {
        let cell = mesh.cell(i, j);
        let face = mesh.x_face(mesh.nx, j);
        for g in 0..moments.groups() {
            out.flux += moments.flux_x.get(g, face);
            out.energy += moments.energy.get(g, cell);
        }
        out.temperature += temperature[cell];
    }
    let n = mesh.ny as f64;
    out.flux /= n;
    out.energy /= n;
    out.temperature /= n;
    out
}

/// [`boundary_average`] for every state of a history.
pub fn boundary_averages(mesh: &SpatialMesh, history: &[LoState]) -> Vec<BoundaryAverage> {
    history
        .iter()
        .map(|s| boundary_average(mesh, &s.temperature, &s.moments))
        .collect()
}

/// Probe locations of the spectral diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    /// Right boundary at mid-height: the mean of the two cells that straddle
    /// `y = ly / 2`, or the middle cell when `ny` is odd.
    RightMidpoint,
    /// Bottom-right corner cell.
    Corner,
}

impl Probe {
    pub const ALL: [Probe; 2] = [Probe::RightMidpoint, Probe::Corner];

    pub fn name(self) -> &'static str {
        match self {
            Probe::RightMidpoint => "right_midpoint",
            Probe::Corner => "corner",
        }
    }

    /// Cells whose mean is the probe value.
    pub fn cells(self, mesh: &SpatialMesh) -> Vec<usize> {
        let i = mesh.nx - 1;
        match self {
            Probe::RightMidpoint if mesh.ny.is_multiple_of(2) => {
                vec![mesh.cell(i, mesh.ny / 2 - 1), mesh.cell(i, mesh.ny / 2)]
            }
            Probe::RightMidpoint => vec![mesh.cell(i, mesh.ny / 2)],
            Probe::Corner => vec![mesh.cell(i, 0)],
        }
    }

    /// Group energy densities at the probe.
    pub fn energies(self, mesh: &SpatialMesh, moments: &MomentField) -> Vec<f64> {
        let cells = self.cells(mesh);
        (0..moments.groups())
            .map(|g| {
                cells.iter().map(|&c| moments.energy.get(g, c)).sum::<f64>() / cells.len() as f64
            })
            .collect()
    }
}

/// Group-averaged densities `E_g / (nu_g - nu_{g-1})`.
pub fn group_spectrum(energies: &[f64], groups: &FrequencyGrid) -> Result<Vec<f64>> {
    if energies.len() != groups.num_groups() {
        return Err(Error::Dimension(format!(
            "{} group values for {} groups",
            energies.len(),
            groups.num_groups()
        )));
    }
    Ok(energies
        .iter()
        .enumerate()
        .map(|(g, e)| e / groups.width(g))
        .collect())
}

/// A FOM state without its intensities.
impl From<&FomState> for LoState {
    fn from(s: &FomState) -> Self {
        LoState {
            time: s.time,
            temperature: s.temperature.clone(),
            moments: s.moments.clone(),
        }
    }
}

/// Temporal relative 2-norm and max-norm errors of `E_g` per group, `None`
/// where the reference vanishes.
pub type GroupErrors = Vec<Option<(f64, f64)>>;

/// Errors of one run against a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub times: Vec<f64>,
    /// Spatial relative 2-norm error of `T` per time level (level 0 first).
    pub temperature: Vec<f64>,
    /// Spatial relative 2-norm error of the group-summed `E` per time level.
    pub energy: Vec<f64>,
    pub boundary: Vec<BoundaryAverage>,
    pub reference_boundary: Vec<BoundaryAverage>,
    pub group_errors: Vec<(Probe, GroupErrors)>,
}

impl ErrorReport {
    /// Relative errors of the right-boundary averages per time level:
    /// `(F, E, T)`.
    pub fn boundary_errors(&self) -> Vec<[f64; 3]> {
        self.boundary
            .iter()
            .zip(&self.reference_boundary)
            .map(|(a, r)| {
                let rel = |x: f64, y: f64| {
                    if y != 0.0 {
                        (x - y).abs() / y.abs()
                    } else {
                        (x - y).abs()
                    }
                };
                [
                    rel(a.flux, r.flux),
                    rel(a.energy, r.energy),
                    rel(a.temperature, r.temperature),
                ]
            })
            .collect()
    }

    /// Per-level errors as CSV.
    pub fn write_errors_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,time,temperature_error,energy_error,flux_r_error,energy_r_error,temperature_r_error")?;
        for (n, ((t, (et, ee)), b)) in self
            .times
            .iter()
            .zip(self.temperature.iter().zip(&self.energy))
            .zip(self.boundary_errors())
            .enumerate()
        {
            writeln!(
                out,
                "{n},{t:.10e},{et:.10e},{ee:.10e},{:.10e},{:.10e},{:.10e}",
                b[0], b[1], b[2]
            )?;
        }
        Ok(())
    }

    /// Right-boundary averages of both runs as CSV.
    pub fn write_boundary_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "step,time,flux_r,energy_r,temperature_r,ref_flux_r,ref_energy_r,ref_temperature_r"
        )?;
        for (n, (t, (a, r))) in self
            .times
            .iter()
            .zip(self.boundary.iter().zip(&self.reference_boundary))
            .enumerate()
        {
            writeln!(
                out,
                "{n},{t:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
                a.flux, a.energy, a.temperature, r.flux, r.energy, r.temperature
            )?;
        }
        Ok(())
    }

    /// Group-wise temporal errors at the probes as CSV.
    pub fn write_group_csv<W: Write>(&self, mut out: W, groups: &FrequencyGrid) -> Result<()> {
        writeln!(out, "probe,group,nu_center,temporal_2norm,temporal_max")?;
        for (probe, errs) in &self.group_errors {
            for (g, e) in errs.iter().enumerate() {
                let (a, b) = e.map_or((f64::NAN, f64::NAN), |v| v);
                writeln!(
                    out,
                    "{},{g},{:.6e},{a:.10e},{b:.10e}",
                    probe.name(),
                    groups.center(g)
                )?;
            }
        }
        Ok(())
    }
}

/// Compare `run` with `reference` level by level.
pub fn compare_runs(
    mesh: &SpatialMesh,
    run: &[LoState],
    reference: &[LoState],
) -> Result<ErrorReport> {
    if run.len() != reference.len() {
        return Err(Error::Dimension(format!(
            "runs have {} and {} time levels",
            run.len(),
            reference.len()
        )));
    }
    let cells = mesh.num_cells();
    for (a, b) in run.iter().zip(reference) {
        if a.temperature.len() != cells || b.temperature.len() != cells {
            return Err(Error::Dimension("run does not match the mesh".into()));
        }
        if a.moments.groups() != b.moments.groups() {
            return Err(Error::Dimension("runs have different group counts".into()));
        }
        if (a.time - b.time).abs() > 1e-9 * b.time.abs().max(1.0) {
            return Err(Error::Dimension(format!(
                "time levels {} and {} differ",
                a.time, b.time
            )));
        }
    }
    let mut temperature = Vec::with_capacity(run.len());
    let mut energy = Vec::with_capacity(run.len());
    for (a, b) in run.iter().zip(reference) {
        temperature.push(spatial_rel_2norm(mesh, &a.temperature, &b.temperature)?);
        energy.push(spatial_rel_2norm(
            mesh,
            &a.moments.total_energy(),
            &b.moments.total_energy(),
        )?);
    }
    let times: Vec<f64> = reference.iter().map(|s| s.time).collect();
    let groups = reference.first().map_or(0, |s| s.moments.groups());
    let mut group_errors = Vec::new();
    for probe in Probe::ALL {
        let a: Vec<Vec<f64>> = run
            .iter()
            .map(|s| probe.energies(mesh, &s.moments))
            .collect();
        let r: Vec<Vec<f64>> = reference
            .iter()
            .map(|s| probe.energies(mesh, &s.moments))
            .collect();
        let errs = (0..groups)
            .map(|g| {
                let x: Vec<f64> = a.iter().map(|v| v[g]).collect();
                let y: Vec<f64> = r.iter().map(|v| v[g]).collect();
                match (
                    temporal_rel_2norm(&x, &y, &times),
                    temporal_rel_max_norm(&x, &y),
                ) {
                    (Ok(two), Ok(max)) => Some((two, max)),
                    _ => None,
                }
            })
            .collect();
        group_errors.push((probe, errs));
    }
    Ok(ErrorReport {
        times,
        temperature,
        energy,
        boundary: boundary_averages(mesh, run),
        reference_boundary: boundary_averages(mesh, reference),
        group_errors,
    })
}
