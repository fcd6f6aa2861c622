//! Data-driven variable Eddington factor model.
//!
//! The offline phase sweeps a linear transport problem whose opacities and
//! emission are frozen at a given temperature history and records the
//! Eddington tensor and boundary factors of its solution. The online phase
//! solves the moment system closed by those records, coupled to the
//! material energy balance.

use crate::config::RunConfig;
use crate::coupling::CouplingOptions;
use crate::diffusion::TemperatureDataset;
use crate::error::{Error, Result};
use crate::fields::{GroupField, IntensityField, MomentField};
use crate::grid::{AngularQuadrature, SpatialMesh};
use crate::moments::{moment_step, BoundarySource, LoClosure, LoState, LoStepReport, MomentSolver};
use crate::physics::{GroupCoefficients, Material};
use crate::transport::{scaled_intensity, BoundaryInflow, BoundarySums, SweepTallies, Sweeper};

/// Densities below this fraction of the group's peak fall back to the
/// isotropic closure.
pub const DENSITY_FLOOR: f64 = 1e-30;

/// Eddington tensor `sum w O O I / sum w I` per (group, cell), components
/// `xx, xy, yy, zz`.
pub fn eddington_tensor(
    intensity: &IntensityField,
    quadrature: &AngularQuadrature,
) -> [GroupField; 4] {
    let groups = intensity.groups();
    let cells = intensity.cells();
    let mut second: [GroupField; 4] = std::array::from_fn(|_| GroupField::zeros(groups, cells));
    let mut energy = GroupField::zeros(groups, cells);
    for g in 0..groups {
        for (m, o) in quadrature.ordinates().iter().enumerate() {
            let [x, y, z] = o.omega;
            let w = [x * x, x * y, y * y, z * z];
            for (c, &i) in intensity.angle(g, m).iter().enumerate() {
                let wi = o.weight * i;
                energy.group_mut(g)[c] += wi;
                for (k, comp) in second.iter_mut().enumerate() {
                    comp.group_mut(g)[c] += w[k] * wi;
                }
            }
        }
    }
    tensor_from_sums(&second, &energy)
}

fn tensor_from_sums(second: &[GroupField; 4], energy: &GroupField) -> [GroupField; 4] {
    let groups = energy.groups();
    let cells = energy.sites();
    let mut out: [GroupField; 4] = std::array::from_fn(|_| GroupField::zeros(groups, cells));
    for g in 0..groups {
        let e = energy.group(g);
        let peak = e.iter().fold(0.0_f64, |m, v| m.max(*v));
        for c in 0..cells {
            let iso = !(e[c] > DENSITY_FLOOR * peak && e[c] > 0.0);
            for (k, comp) in out.iter_mut().enumerate() {
                let v = if iso {
                    if k == 1 {
                        0.0
                    } else {
                        1.0 / 3.0
                    }
                } else {
                    second[k].get(g, c) / e[c]
                };
                comp.set(g, c, v);
            }
        }
    }
    out
}

/// `C = sum_{n.O > 0} w (n.O) I / sum_{n.O > 0} w I` on one boundary face,
/// `1/2` when nothing leaves.
pub fn boundary_factor(sums: &BoundarySums) -> f64 {
    if sums.out_density > 0.0 && sums.out_flux > 0.0 {
        (sums.out_flux / sums.out_density).clamp(0.0, 1.0)
    } else {
        0.5
    }
}

/// Closure of one time level from the tallies of a full sweep.
pub fn closure_from_tallies(tallies: &SweepTallies) -> LoClosure {
    let [xx, xy, yy, _] = tensor_from_sums(&tallies.second, &tallies.moments.energy);
    let groups = tallies.boundary.len();
    let faces = tallies.boundary.first().map_or(0, |b| b.len());
    let mut factor = GroupField::zeros(groups, faces);
    for (g, sums) in tallies.boundary.iter().enumerate() {
        for (b, s) in sums.iter().enumerate() {
            factor.set(g, b, boundary_factor(s));
        }
    }
    LoClosure {
        tensor: [xx, xy, yy],
        boundary_factor: factor,
        correction: None,
    }
}

/// Face consistency coefficients that make the moment discretization
/// reproduce the face fluxes of a transport solution exactly.
///
/// `prev` and `next` are the transport moments at the old and new time
/// levels and `kappa` the opacities of the new level.
#[allow(clippy::too_many_arguments)]
pub fn face_correction(
    mesh: &SpatialMesh,
    closure: &LoClosure,
    source: &BoundarySource,
    prev: &MomentField,
    next: &MomentField,
    kappa: &GroupField,
    c: f64,
    dt: f64,
) -> Result<[GroupField; 2]> {
    let plain = LoClosure {
        correction: None,
        ..closure.clone()
    };
    let solver = MomentSolver::new(mesh, &plain, source, prev, c, dt, 1.0)?;
    let groups = closure.groups();
    let mut dx = GroupField::zeros(groups, mesh.num_x_faces());
    let mut dy = GroupField::zeros(groups, mesh.num_y_faces());
    for g in 0..groups {
        let (fx, fy) = solver.face_system(g, kappa.group(g));
        let e = next.energy.group(g);
        for j in 0..mesh.ny {
            for i in 0..=mesh.nx {
                let f = mesh.x_face(i, j);
                let (l, r) = mesh.x_face_cells(i, j);
                let weight: f64 = l.into_iter().chain(r).map(|k| e[k]).sum();
                let miss = next.flux_x.get(g, f) - fx[f].eval(e);
                dx.set(g, f, if weight > 0.0 { miss / weight } else { 0.0 });
            }
        }
        for j in 0..=mesh.ny {
            for i in 0..mesh.nx {
                let f = mesh.y_face(i, j);
                let (b, t) = mesh.y_face_cells(i, j);
                let weight: f64 = b.into_iter().chain(t).map(|k| e[k]).sum();
                let miss = next.flux_y.get(g, f) - fy[f].eval(e);
                dy.set(g, f, if weight > 0.0 { miss / weight } else { 0.0 });
            }
        }
    }
    Ok([dx, dy])
}

/// Closure records for time levels `1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosureDataset {
    pub nx: usize,
    pub ny: usize,
    pub times: Vec<f64>,
    pub records: Vec<LoClosure>,
}

impl ClosureDataset {
    pub fn groups(&self) -> usize {
        self.records.first().map_or(0, LoClosure::groups)
    }

    /// Check that the records cover `steps` steps of `dt` on the mesh.
    pub fn check_grid(
        &self,
        mesh: &SpatialMesh,
        groups: usize,
        dt: f64,
        steps: usize,
    ) -> Result<()> {
        if self.nx != mesh.nx || self.ny != mesh.ny {
            return Err(Error::Dimension(format!(
                "closure data is {}x{}, mesh is {}x{}",
                self.nx, self.ny, mesh.nx, mesh.ny
            )));
        }
        if self.records.len() < steps {
            return Err(Error::MissingClosure(self.records.len() + 1));
        }
        if self.records.len() != steps || self.times.len() != steps {
            return Err(Error::Config(format!(
                "closure data has {} time levels, expected {steps}",
                self.records.len()
            )));
        }
        for (n, t) in self.times.iter().enumerate() {
            let want = (n + 1) as f64 * dt;
            if (t - want).abs() > 1e-9 * want {
                return Err(Error::Config(format!(
                    "closure level {} is at {t}, expected {want}",
                    n + 1
                )));
            }
        }
        if self.records.iter().any(|r| r.groups() != groups) {
            return Err(Error::Dimension(format!(
                "closure data must have {groups} groups"
            )));
        }
        Ok(())
    }
}

/// The auxiliary linear transport problem of the offline phase, advanced one
/// time level at a time.
#[derive(Debug, Clone)]
pub struct AuxiliaryTransport {
    sweeper: Sweeper,
    material: Material,
    inflow: BoundaryInflow,
    intensity: IntensityField,
    moments: MomentField,
    kappa: GroupField,
    dt: f64,
}

impl AuxiliaryTransport {
    /// Start from Planckian intensity at the initial temperatures.
    pub fn new(
        sweeper: Sweeper,
        material: Material,
        inflow: BoundaryInflow,
        initial_temperature: &[f64],
        dt: f64,
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!(
                "time step must be positive (got {dt})"
            )));
        }
        let cells = sweeper.mesh().num_cells();
        if initial_temperature.len() != cells {
            return Err(Error::Dimension(
                "initial temperature does not match the mesh".into(),
            ));
        }
        let groups = material.num_groups();
        let mut planck = GroupField::zeros(groups, cells);
        for (c, &t) in initial_temperature.iter().enumerate() {
            for g in 0..groups {
                planck.set(g, c, material.planck(t, g));
            }
        }
        let intensity = IntensityField::isotropic(sweeper.quadrature().len(), &planck);
        let mut moments = MomentField::zeros(sweeper.mesh(), groups);
        let four_pi_c = 4.0 * std::f64::consts::PI / material.constants.c;
        for (e, b) in moments
            .energy
            .as_mut_slice()
            .iter_mut()
            .zip(planck.as_slice())
        {
            *e = four_pi_c * b;
        }
        Ok(Self {
            sweeper,
            material,
            inflow,
            intensity,
            moments,
            kappa: GroupField::zeros(groups, cells),
            dt,
        })
    }

    pub fn intensity(&self) -> &IntensityField {
        &self.intensity
    }

    /// Sweep to the next time level with coefficients frozen at
    /// `temperature` and return its tallies.
    pub fn advance(&mut self, temperature: &[f64]) -> Result<SweepTallies> {
        let cells = self.sweeper.mesh().num_cells();
        if temperature.len() != cells {
            return Err(Error::Dimension(
                "temperature does not match the mesh".into(),
            ));
        }
        let groups = self.material.num_groups();
        let c = self.material.constants.c;
        let inv = 1.0 / (c * self.dt);
        let mut sigma = GroupField::zeros(groups, cells);
        let mut source = GroupField::zeros(groups, cells);
        let mut buf = vec![GroupCoefficients::default(); groups];
        for (cell, &t) in temperature.iter().enumerate() {
            self.material.coefficients(t, &mut buf);
            for (g, k) in buf.iter().enumerate() {
                self.kappa.set(g, cell, k.kappa);
                sigma.set(g, cell, k.kappa + inv);
                source.set(g, cell, k.kappa * k.planck);
            }
        }
        let prev = scaled_intensity(&self.intensity, inv);
        let (intensity, tallies) =
            self.sweeper
                .sweep_full(&sigma, &source, Some(&prev), &self.inflow, c)?;
        self.intensity = intensity;
        Ok(tallies)
    }

    /// Sweep to the next time level and return its closure, with face
    /// consistency coefficients when `source` is given.
    pub fn advance_closure(
        &mut self,
        temperature: &[f64],
        source: Option<&BoundarySource>,
    ) -> Result<LoClosure> {
        let tallies = self.advance(temperature)?;
        let mut closure = closure_from_tallies(&tallies);
        if let Some(source) = source {
            let correction = face_correction(
                self.sweeper.mesh(),
                &closure,
                source,
                &self.moments,
                &tallies.moments,
                &self.kappa,
                self.material.constants.c,
                self.dt,
            )?;
            closure.correction = Some(correction);
        }
        self.moments = tallies.moments;
        Ok(closure)
    }
}

/// Problem pieces shared by the offline and online phases.
#[derive(Debug, Clone)]
pub struct VefProblem {
    pub mesh: SpatialMesh,
    pub quadrature: AngularQuadrature,
    pub material: Material,
    pub inflow: BoundaryInflow,
    pub source: BoundarySource,
    pub options: CouplingOptions,
}

impl VefProblem {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let mesh = cfg.mesh()?;
        let quadrature = cfg.quadrature()?;
        let material = cfg.material()?;
        let inflow = cfg.inflow(&material);
        let source = BoundarySource::quadrature(&mesh, &quadrature, &inflow, material.constants.c);
        Ok(Self {
            mesh,
            quadrature,
            material,
            inflow,
            source,
            options: cfg.coupling(),
        })
    }

    fn auxiliary(&self, initial_temperature: &[f64], dt: f64) -> Result<AuxiliaryTransport> {
        AuxiliaryTransport::new(
            Sweeper::new(self.mesh.clone(), self.quadrature.clone()),
            self.material.clone(),
            self.inflow.clone(),
            initial_temperature,
            dt,
        )
    }

    pub fn initial_state(&self, t0: f64) -> Result<LoState> {
        LoState::equilibrium(&self.mesh, &self.material, t0)
    }

    /// One backward-Euler step of the moment system closed by `closure`.
    pub fn step(
        &self,
        closure: &LoClosure,
        state: &LoState,
        dt: f64,
    ) -> Result<(LoState, LoStepReport)> {
        vef_step(
            &self.mesh,
            &self.material,
            closure,
            &self.source,
            state,
            dt,
            &self.options,
        )
    }
}

/// Advance the VEF moment system one step with the closure of the new time
/// level.
pub fn vef_step(
    mesh: &SpatialMesh,
    material: &Material,
    closure: &LoClosure,
    source: &BoundarySource,
    state: &LoState,
    dt: f64,
    options: &CouplingOptions,
) -> Result<(LoState, LoStepReport)> {
    moment_step(mesh, material, closure, source, 1.0, state, dt, options)
}

/// Offline phase: closure records of the auxiliary transport problem driven
/// by a temperature history.
pub fn offline_phase(temperatures: &TemperatureDataset, cfg: &RunConfig) -> Result<ClosureDataset> {
    let problem = VefProblem::from_config(cfg)?;
    temperatures.check_grid(&problem.mesh, cfg.dt, cfg.steps)?;
    let mut aux = problem.auxiliary(&temperatures.temperatures[0], cfg.dt)?;
    let correct = cfg.vef_consistency;
    let mut records = Vec::with_capacity(cfg.steps);
    for n in 1..=cfg.steps {
        let closure = aux
            .advance_closure(
                &temperatures.temperatures[n],
                correct.then_some(&problem.source),
            )
            .map_err(|e| e.at_step(n))?;
        records.push(closure);
    }
    Ok(ClosureDataset {
        nx: problem.mesh.nx,
        ny: problem.mesh.ny,
        times: temperatures.times[1..].to_vec(),
        records,
    })
}

/// Online phase: the VEF solution history, initial state included.
pub fn online_phase(closures: &ClosureDataset, cfg: &RunConfig) -> Result<Vec<LoState>> {
    let problem = VefProblem::from_config(cfg)?;
    closures.check_grid(
        &problem.mesh,
        problem.material.num_groups(),
        cfg.dt,
        cfg.steps,
    )?;
    let mut states = vec![problem.initial_state(cfg.t0)?];
    for (n, closure) in closures.records.iter().enumerate() {
        let prev = states.last().expect("initial state");
        let (next, report) = problem
            .step(closure, prev, cfg.dt)
            .map_err(|e| e.at_step(n + 1))?;
        log::debug!(
            "vef step {}: {} iterations, energy residual {:.2e}",
            n + 1,
            report.coupling.iterations,
            report.energy_residual
        );
        states.push(next);
    }
    Ok(states)
}

/// Offline and online phases interleaved step by step without storing the
/// closure.
pub fn fused_pipeline(temperatures: &TemperatureDataset, cfg: &RunConfig) -> Result<Vec<LoState>> {
    let problem = VefProblem::from_config(cfg)?;
    temperatures.check_grid(&problem.mesh, cfg.dt, cfg.steps)?;
    let mut aux = problem.auxiliary(&temperatures.temperatures[0], cfg.dt)?;
    let correct = cfg.vef_consistency;
    let mut states = vec![problem.initial_state(cfg.t0)?];
    for n in 1..=cfg.steps {
        let closure = aux
            .advance_closure(
                &temperatures.temperatures[n],
                correct.then_some(&problem.source),
            )
            .map_err(|e| e.at_step(n))?;
        let prev = states.last().expect("initial state");
        let (next, _) = problem
            .step(&closure, prev, cfg.dt)
            .map_err(|e| e.at_step(n))?;
        states.push(next);
    }
    Ok(states)
}
