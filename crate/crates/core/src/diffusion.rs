//! Radiation-diffusion models: P1, P1/3 and flux-limited diffusion.
//!
//! P1 and P1/3 are the moment system of [`crate::moments`] with the
//! isotropic closure and the exact half-range integrals of the drive. FLD
//! solves `dE/dt - div(c D grad E) + c kappa E = q` on a five-point stencil
//! with the Larsen coefficient lagged one coupling iteration, and the
//! Marshak condition `n.F = (c/2)(E_b - E_in) + F_in` on the boundary.

use crate::config::{DiffusionModelKind, RunConfig};
use crate::coupling::{solve_coupled_step, CouplingOptions, FrozenCoefficients, RadiationSolver};
use crate::error::{Error, Result};
use crate::fields::{GroupField, MomentField};
use crate::grid::SpatialMesh;
use crate::linalg::{Anderson, BandLu};
use crate::moments::{
    assemble_balance, balance_constants, d_dx, d_dy, moment_step, Affine, BoundarySource,
    CellOrdering, LoClosure, LoState, LoStepReport,
};
use crate::physics::Material;
use crate::transport::{energy_balance_residual, BoundaryInflow};

/// Energy densities below this are treated as zero by the limiter.
pub const ENERGY_FLOOR: f64 = 1e-30;

/// Larsen's flux-limited diffusion coefficient
/// `D = [(3 kappa)^2 + (|grad E| / E)^2]^(-1/2)`.
pub fn larsen_coefficient(kappa: f64, energy: f64, grad: [f64; 2]) -> f64 {
    let e = energy.max(ENERGY_FLOOR);
    let r = grad[0].hypot(grad[1]) / e;
    let k3 = 3.0 * kappa;
    let s = k3.hypot(r);
    if s > 0.0 {
        1.0 / s
    } else {
        f64::MAX
    }
}

/// Lagged diffusion coefficients of one group.
#[derive(Debug, Clone)]
struct FldGroup {
    lu: BandLu,
    fx: Vec<Affine>,
    fy: Vec<Affine>,
    constants: Vec<f64>,
}

/// Flux-limited diffusion for one time step as a [`RadiationSolver`].
#[derive(Debug, Clone)]
pub struct FldSolver<'a> {
    mesh: &'a SpatialMesh,
    source: &'a BoundarySource,
    prev: &'a MomentField,
    c: f64,
    dt: f64,
    ordering: CellOrdering,
    /// Energies the coefficients are evaluated at: cell values, then
    /// boundary-face values.
    lag_cells: GroupField,
    lag_faces: GroupField,
    last: Option<(GroupField, GroupField)>,
    mixer: Anderson,
    kappa: GroupField,
    systems: Vec<FldGroup>,
}

impl<'a> FldSolver<'a> {
    pub fn new(
        mesh: &'a SpatialMesh,
        source: &'a BoundarySource,
        prev: &'a MomentField,
        c: f64,
        dt: f64,
    ) -> Self {
        let groups = prev.groups();
        let mut lag_faces = GroupField::zeros(groups, mesh.boundary_faces().len());
        for g in 0..groups {
            for (b, f) in mesh.boundary_faces().iter().enumerate() {
                lag_faces.set(g, b, prev.energy.get(g, f.cell));
            }
        }
        Self {
            mesh,
            source,
            prev,
            c,
            dt,
            ordering: CellOrdering::new(mesh),
            lag_cells: prev.energy.clone(),
            lag_faces,
            last: None,
            mixer: Anderson::new(ANDERSON_DEPTH),
            kappa: GroupField::zeros(0, 0),
            systems: Vec::new(),
        }
    }

    fn tangential(stencil: Vec<(usize, f64)>, e: &[f64]) -> f64 {
        stencil.into_iter().map(|(k, w)| w * e[k]).sum()
    }

    /// Interior x-face coefficient from lagged energies.
    fn x_face_coefficient(&self, g: usize, i: usize, j: usize) -> f64 {
        let mesh = self.mesh;
        let e = self.lag_cells.group(g);
        let kap = self.kappa.group(g);
        let (l, r) = (mesh.cell(i - 1, j), mesh.cell(i, j));
        let normal = (e[r] - e[l]) / mesh.dx;
        let tang = 0.5
            * (Self::tangential(d_dy(mesh, i - 1, j), e) + Self::tangential(d_dy(mesh, i, j), e));
        larsen_coefficient(0.5 * (kap[l] + kap[r]), 0.5 * (e[l] + e[r]), [normal, tang])
    }

    fn y_face_coefficient(&self, g: usize, i: usize, j: usize) -> f64 {
        let mesh = self.mesh;
        let e = self.lag_cells.group(g);
        let kap = self.kappa.group(g);
        let (b, t) = (mesh.cell(i, j - 1), mesh.cell(i, j));
        let normal = (e[t] - e[b]) / mesh.dy;
        let tang = 0.5
            * (Self::tangential(d_dx(mesh, i, j - 1), e) + Self::tangential(d_dx(mesh, i, j), e));
        larsen_coefficient(0.5 * (kap[b] + kap[t]), 0.5 * (e[b] + e[t]), [normal, tang])
    }

    /// Boundary-face coefficient and the cell width normal to the face. Only
    /// the normal half-cell gradient enters the limiter on the boundary.
    fn boundary_coefficient(&self, g: usize, b: usize, cells: &[f64], faces: &[f64]) -> (f64, f64) {
        let mesh = self.mesh;
        let face = &mesh.boundary_faces()[b];
        let (nx, _) = face.side.normal();
        let h = if nx != 0.0 { mesh.dx } else { mesh.dy };
        let normal = (faces[b] - cells[face.cell]) / (0.5 * h);
        let d = larsen_coefficient(self.kappa.get(g, face.cell), faces[b], [normal, 0.0]);
        (d, h)
    }

    fn build_group(&self, g: usize) -> Result<FldGroup> {
        let mesh = self.mesh;
        let c = self.c;
        let kap = self.kappa.group(g);
        let mut fx = vec![Affine::default(); mesh.num_x_faces()];
        let mut fy = vec![Affine::default(); mesh.num_y_faces()];
        for j in 0..mesh.ny {
            for i in 1..mesh.nx {
                let d = self.x_face_coefficient(g, i, j);
                let w = c * d / mesh.dx;
                fx[mesh.x_face(i, j)] = Affine {
                    constant: 0.0,
                    terms: vec![(mesh.cell(i, j), -w), (mesh.cell(i - 1, j), w)],
                };
            }
        }
        for j in 1..mesh.ny {
            for i in 0..mesh.nx {
                let d = self.y_face_coefficient(g, i, j);
                let w = c * d / mesh.dy;
                fy[mesh.y_face(i, j)] = Affine {
                    constant: 0.0,
                    terms: vec![(mesh.cell(i, j), -w), (mesh.cell(i, j - 1), w)],
                };
            }
        }
        let cells = self.lag_cells.group(g);
        let faces = self.lag_faces.group(g);
        for (b, face) in mesh.boundary_faces().iter().enumerate() {
            let (d, h) = self.boundary_coefficient(g, b, cells, faces);
            let (beta, gamma) = (2.0 * c * d / h, 0.5 * c);
            let ein = self.source.energy.get(g, b);
            let fin = self.source.flux.get(g, b);
            // n.F = beta (gamma E_c - gamma E_in + F_in) / (beta + gamma)
            let k = beta / (beta + gamma);
            let (nx, ny) = face.side.normal();
            let sign = nx + ny;
            let aff = Affine {
                constant: sign * k * (fin - gamma * ein),
                terms: vec![(face.cell, sign * k * gamma)],
            };
            if nx != 0.0 {
                fx[face.face] = aff;
            } else {
                fy[face.face] = aff;
            }
        }
        let _ = kap;
        let diagonal: Vec<f64> = self
            .kappa
            .group(g)
            .iter()
            .map(|k| 1.0 / self.dt + c * k)
            .collect();
        let lu = assemble_balance(mesh, &self.ordering, &diagonal, &fx, &fy)
            .map_err(|e| Error::LinearSolve(format!("group {g}: {e}")))?;
        let constants = balance_constants(mesh, &fx, &fy);
        Ok(FldGroup {
            lu,
            fx,
            fy,
            constants,
        })
    }

    fn solve_rows(&self, g: usize, rhs: &[f64], out: &mut [f64]) {
        let mut rows = vec![0.0; rhs.len()];
        self.ordering.gather(rhs, &mut rows);
        self.systems[g].lu.solve_in_place(&mut rows);
        self.ordering.scatter(&rows, out);
    }

    /// Boundary-face energies implied by the Marshak condition with the
    /// current coefficients.
    fn face_energies(&self, g: usize, cells: &[f64], out: &mut [f64]) {
        let lagc = self.lag_cells.group(g);
        let lagf = self.lag_faces.group(g);
        for (b, face) in self.mesh.boundary_faces().iter().enumerate() {
            let (d, h) = self.boundary_coefficient(g, b, lagc, lagf);
            let (beta, gamma) = (2.0 * self.c * d / h, 0.5 * self.c);
            let ein = self.source.energy.get(g, b);
            let fin = self.source.flux.get(g, b);
            out[b] = (beta * cells[face.cell] + gamma * ein - fin) / (beta + gamma);
        }
    }

    /// Fluxes `-c D grad E` with `D` evaluated at the given energies, so
    /// that `|F| <= c E` holds to roundoff.
    pub fn limited_fluxes(
        &self,
        cells: &GroupField,
        faces: &GroupField,
    ) -> (GroupField, GroupField) {
        let mesh = self.mesh;
        let groups = cells.groups();
        let mut fx = GroupField::zeros(groups, mesh.num_x_faces());
        let mut fy = GroupField::zeros(groups, mesh.num_y_faces());
        let mut probe = self.clone();
        probe.lag_cells = cells.clone();
        probe.lag_faces = faces.clone();
        for g in 0..groups {
            let e = cells.group(g);
            for j in 0..mesh.ny {
                for i in 1..mesh.nx {
                    let d = probe.x_face_coefficient(g, i, j);
                    fx.set(
                        g,
                        mesh.x_face(i, j),
                        -self.c * d * (e[mesh.cell(i, j)] - e[mesh.cell(i - 1, j)]) / mesh.dx,
                    );
                }
            }
            for j in 1..mesh.ny {
                for i in 0..mesh.nx {
                    let d = probe.y_face_coefficient(g, i, j);
                    fy.set(
                        g,
                        mesh.y_face(i, j),
                        -self.c * d * (e[mesh.cell(i, j)] - e[mesh.cell(i, j - 1)]) / mesh.dy,
                    );
                }
            }
            let fe = faces.group(g);
            for (b, face) in mesh.boundary_faces().iter().enumerate() {
                let (d, h) = probe.boundary_coefficient(g, b, e, fe);
                let fnorm = -self.c * d * (fe[b] - e[face.cell]) / (0.5 * h);
                let (nx, ny) = face.side.normal();
                if nx != 0.0 {
                    fx.set(g, face.face, nx * fnorm);
                } else {
                    fy.set(g, face.face, ny * fnorm);
                }
            }
        }
        (fx, fy)
    }

    /// Energies of the most recent full solve: cells and boundary faces.
    pub fn last_energies(&self) -> Option<&(GroupField, GroupField)> {
        self.last.as_ref()
    }
}

/// History length of the Anderson mixing applied to the lagged energies.
const ANDERSON_DEPTH: usize = 5;

/// Energies below this fraction of their group's peak are measured in
/// absolute terms when checking the lagged coefficients.
const LAG_FLOOR: f64 = 1e-6;

fn log_energies(cells: &GroupField, faces: &GroupField) -> Vec<f64> {
    cells
        .as_slice()
        .iter()
        .chain(faces.as_slice())
        .map(|e| e.max(ENERGY_FLOOR).ln())
        .collect()
}

fn relative_change(new: &GroupField, old: &GroupField) -> f64 {
    let mut worst = 0.0_f64;
    for g in 0..new.groups() {
        let (a, b) = (new.group(g), old.group(g));
        let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            continue;
        }
        let floor = LAG_FLOOR * scale;
        for (x, y) in a.iter().zip(b) {
            worst = worst.max((x - y).abs() / (x.abs() + floor));
        }
    }
    worst
}

impl RadiationSolver for FldSolver<'_> {
    type Output = MomentField;

    fn freeze(&mut self, coefficients: &FrozenCoefficients) -> Result<()> {
        if let Some((cells, faces)) = self.last.take() {
            let x = log_energies(&self.lag_cells, &self.lag_faces);
            let gx = log_energies(&cells, &faces);
            let mut next = self.mixer.mix(&x, &gx);
            // Keep the mixed iterate within a factor e of the bracket of the
            // last two.
            for ((n, a), b) in next.iter_mut().zip(&x).zip(&gx) {
                *n = n.clamp(a.min(*b) - 1.0, a.max(*b) + 1.0);
            }
            let (nc, nf) = next.split_at(cells.as_slice().len());
            for (l, v) in self.lag_cells.as_mut_slice().iter_mut().zip(nc) {
                *l = v.exp();
            }
            for (l, v) in self.lag_faces.as_mut_slice().iter_mut().zip(nf) {
                *l = v.exp();
            }
        }
        self.kappa = coefficients.kappa.clone();
        self.systems = (0..self.prev.groups())
            .map(|g| self.build_group(g))
            .collect::<Result<_>>()?;
        Ok(())
    }

    fn solve(&mut self, emission: &GroupField) -> Result<MomentField> {
        let groups = self.prev.groups();
        let mesh = self.mesh;
        let cells = mesh.num_cells();
        let mut out = MomentField::zeros(mesh, groups);
        let mut faces = GroupField::zeros(groups, mesh.boundary_faces().len());
        let mut rhs = vec![0.0; cells];
        let mut energy = vec![0.0; cells];
        for g in 0..groups {
            let sys = &self.systems[g];
            let src = emission.group(g);
            let ep = self.prev.energy.group(g);
            for c in 0..cells {
                rhs[c] = src[c] + ep[c] / self.dt - sys.constants[c];
            }
            self.solve_rows(g, &rhs, &mut energy);
            for (f, a) in out.flux_x.group_mut(g).iter_mut().zip(&sys.fx) {
                *f = a.eval(&energy);
            }
            for (f, a) in out.flux_y.group_mut(g).iter_mut().zip(&sys.fy) {
                *f = a.eval(&energy);
            }
            self.face_energies(g, &energy, faces.group_mut(g));
            out.energy.group_mut(g).copy_from_slice(&energy);
        }
        self.last = Some((out.energy.clone(), faces));
        Ok(out)
    }

    fn solve_homogeneous(&mut self, emission: &GroupField, energy: &mut GroupField) -> Result<()> {
        let mut e = vec![0.0; self.mesh.num_cells()];
        for g in 0..self.prev.groups() {
            self.solve_rows(g, emission.group(g), &mut e);
            energy.group_mut(g).copy_from_slice(&e);
        }
        Ok(())
    }

    fn energy<'o>(&self, output: &'o MomentField) -> &'o GroupField {
        &output.energy
    }

    fn lag_change(&self) -> f64 {
        match &self.last {
            Some((cells, faces)) => {
                relative_change(cells, &self.lag_cells).max(relative_change(faces, &self.lag_faces))
            }
            None => f64::INFINITY,
        }
    }
}

/// A diffusion model bound to a problem.
#[derive(Debug, Clone)]
pub struct DiffusionModel {
    pub kind: DiffusionModelKind,
    pub mesh: SpatialMesh,
    pub material: Material,
    pub source: BoundarySource,
    pub options: CouplingOptions,
    closure: LoClosure,
}

impl DiffusionModel {
    pub fn new(
        kind: DiffusionModelKind,
        mesh: SpatialMesh,
        material: Material,
        inflow: &BoundaryInflow,
        options: CouplingOptions,
    ) -> Self {
        let source = BoundarySource::analytic(&mesh, inflow, material.constants.c);
        let closure = LoClosure::isotropic(&mesh, material.num_groups());
        Self {
            kind,
            mesh,
            material,
            source,
            options,
            closure,
        }
    }

    pub fn from_config(kind: DiffusionModelKind, cfg: &RunConfig) -> Result<Self> {
        let material = cfg.material()?;
        let inflow = cfg.inflow(&material);
        Ok(Self::new(
            kind,
            cfg.mesh()?,
            material,
            &inflow,
            cfg.coupling(),
        ))
    }

    pub fn initial_state(&self, t0: f64) -> Result<LoState> {
        LoState::equilibrium(&self.mesh, &self.material, t0)
    }

    /// Advance one backward-Euler step.
    pub fn step(&self, state: &LoState, dt: f64) -> Result<(LoState, LoStepReport)> {
        match self.kind {
            DiffusionModelKind::P1 | DiffusionModelKind::P1Over3 => {
                let alpha = if self.kind == DiffusionModelKind::P1 {
                    1.0
                } else {
                    1.0 / 3.0
                };
                moment_step(
                    &self.mesh,
                    &self.material,
                    &self.closure,
                    &self.source,
                    alpha,
                    state,
                    dt,
                    &self.options,
                )
            }
            DiffusionModelKind::Fld => self.fld_step(state, dt),
        }
    }

    fn fld_step(&self, state: &LoState, dt: f64) -> Result<(LoState, LoStepReport)> {
        let c = self.material.constants.c;
        let mut solver = FldSolver::new(&self.mesh, &self.source, &state.moments, c, dt);
        let (temperature, mut moments, coupling) = solve_coupled_step(
            &mut solver,
            &self.material,
            &state.temperature,
            &state.temperature,
            dt,
            &self.options,
        )?;
        let mut flux_ratio = None;
        if let Some((cells, faces)) = solver.last_energies() {
            let (fx, fy) = solver.limited_fluxes(cells, faces);
            flux_ratio = Some(max_flux_ratio(&self.mesh, c, cells, faces, &fx, &fy));
            moments.flux_x = fx;
            moments.flux_y = fy;
        }
        let energy_residual = energy_balance_residual(
            &self.mesh,
            self.material.eos.cv,
            (&state.temperature, &state.moments),
            (&temperature, &moments),
            dt,
        );
        Ok((
            LoState {
                time: state.time + dt,
                temperature,
                moments,
            },
            LoStepReport {
                coupling,
                energy_residual,
                flux_ratio,
            },
        ))
    }
}

/// Largest `|F| / (c E)` over all faces: interior faces use the mean of the
/// two cell energies, boundary faces their own energy.
pub fn max_flux_ratio(
    mesh: &SpatialMesh,
    c: f64,
    cells: &GroupField,
    faces: &GroupField,
    fx: &GroupField,
    fy: &GroupField,
) -> f64 {
    let ratio = |f: f64, e: f64| {
        if f == 0.0 {
            0.0
        } else {
            f.abs() / (c * e.max(ENERGY_FLOOR))
        }
    };
    let mut worst = 0.0_f64;
    for g in 0..cells.groups() {
        let e = cells.group(g);
        for j in 0..mesh.ny {
            for i in 1..mesh.nx {
                let em = 0.5 * (e[mesh.cell(i - 1, j)] + e[mesh.cell(i, j)]);
                worst = worst.max(ratio(fx.get(g, mesh.x_face(i, j)), em));
            }
        }
        for j in 1..mesh.ny {
            for i in 0..mesh.nx {
                let em = 0.5 * (e[mesh.cell(i, j - 1)] + e[mesh.cell(i, j)]);
                worst = worst.max(ratio(fy.get(g, mesh.y_face(i, j)), em));
            }
        }
        for (b, face) in mesh.boundary_faces().iter().enumerate() {
            let f = if face.side.normal().0 != 0.0 {
                fx.get(g, face.face)
            } else {
                fy.get(g, face.face)
            };
            worst = worst.max(ratio(f, faces.get(g, b)));
        }
    }
    worst
}

/// Material temperature history of a diffusion run, one field per time
/// level including the initial one.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureDataset {
    pub nx: usize,
    pub ny: usize,
    pub times: Vec<f64>,
    pub temperatures: Vec<Vec<f64>>,
}

impl TemperatureDataset {
    pub fn from_states(mesh: &SpatialMesh, states: &[LoState]) -> Self {
        Self {
            nx: mesh.nx,
            ny: mesh.ny,
            times: states.iter().map(|s| s.time).collect(),
            temperatures: states.iter().map(|s| s.temperature.clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Check that the time grid matches `steps` steps of `dt` on the mesh.
    pub fn check_grid(&self, mesh: &SpatialMesh, dt: f64, steps: usize) -> Result<()> {
        if self.nx != mesh.nx || self.ny != mesh.ny {
            return Err(Error::Dimension(format!(
                "temperature data is {}x{}, mesh is {}x{}",
                self.nx, self.ny, mesh.nx, mesh.ny
            )));
        }
        if self.times.len() != steps + 1 {
            return Err(Error::Config(format!(
                "temperature data has {} time levels, expected {}",
                self.times.len(),
                steps + 1
            )));
        }
        for (n, t) in self.times.iter().enumerate() {
            let want = n as f64 * dt;
            if (t - want).abs() > 1e-9 * dt.max(want) {
                return Err(Error::Config(format!(
                    "time level {n} is at {t}, expected {want}"
                )));
            }
        }
        if self.temperatures.iter().flatten().any(|t| !(*t > 0.0)) {
            return Err(Error::Domain("temperature data must be positive".into()));
        }
        Ok(())
    }
}

/// Run a diffusion model over the configured time grid and return every
/// state including the initial one.
pub fn run_diffusion_model(kind: DiffusionModelKind, cfg: &RunConfig) -> Result<Vec<LoState>> {
    let model = DiffusionModel::from_config(kind, cfg)?;
    let mut states = vec![model.initial_state(cfg.t0)?];
    for n in 1..=cfg.steps {
        let prev = states.last().expect("initial state");
        let (next, report) = model.step(prev, cfg.dt).map_err(|e| e.at_step(n))?;
        log::debug!(
            "{kind} step {n}: {} iterations, energy residual {:.2e}",
            report.coupling.iterations,
            report.energy_residual
        );
        states.push(next);
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn larsen_coefficient_limits() {
        assert_relative_eq!(
            larsen_coefficient(2.0, 1.0, [0.0, 0.0]),
            1.0 / 6.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            larsen_coefficient(0.0, 2.0, [3.0, 4.0]),
            0.4,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            larsen_coefficient(1.0, 1.0, [4.0, 0.0]),
            0.2,
            max_relative = 1e-15
        );
        let d = larsen_coefficient(0.7, 1.3, [0.2, -0.9]);
        let r2 = (0.2f64.powi(2) + 0.9f64.powi(2)) / 1.69;
        assert_relative_eq!(d.powi(-2), 4.41 + r2, max_relative = 1e-13);
    }

    #[test]
    fn flux_magnitude_never_exceeds_streaming() {
        for &(k, e, gx, gy) in &[
            (0.0, 1.0, 1e6, 0.0),
            (1e-6, 1e-3, -5.0, 7.0),
            (3.0, 2.0, 1.0, 1.0),
        ] {
            let d = larsen_coefficient(k, e, [gx, gy]);
            assert!(d * f64::hypot(gx, gy) <= e * (1.0 + 1e-14));
        }
    }

    fn small_config() -> RunConfig {
        RunConfig {
            nx: 4,
            ny: 3,
            lx: 2.0,
            ly: 1.5,
            group_bounds: vec![0.5, 2.0, 8.0],
            dt: 0.05,
            steps: 3,
            t0: 0.05,
            ..RunConfig::default()
        }
    }

    #[test]
    fn equilibrium_is_stationary_for_every_model() {
        let cfg = small_config();
        let material = cfg.material().unwrap();
        let inflow = BoundaryInflow::planckian(&material, [Some(0.3); 4]);
        for kind in DiffusionModelKind::ALL {
            let model = DiffusionModel::new(
                kind,
                cfg.mesh().unwrap(),
                material.clone(),
                &inflow,
                cfg.coupling(),
            );
            let s0 = model.initial_state(0.3).unwrap();
            let (s1, rep) = model.step(&s0, 0.1).unwrap();
            for t in &s1.temperature {
                assert_relative_eq!(*t, 0.3, max_relative = 1e-10);
            }
            for (a, b) in s1
                .moments
                .energy
                .as_slice()
                .iter()
                .zip(s0.moments.energy.as_slice())
            {
                assert_relative_eq!(*a, *b, max_relative = 1e-9);
            }
            let e = s1
                .moments
                .energy
                .as_slice()
                .iter()
                .fold(0.0_f64, |m, v| m.max(*v));
            for f in s1
                .moments
                .flux_x
                .as_slice()
                .iter()
                .chain(s1.moments.flux_y.as_slice())
            {
                assert!(
                    f.abs() < 1e-8 * material.constants.c * e,
                    "{kind}: flux {f}"
                );
            }
            assert!(
                rep.energy_residual < 1e-10,
                "{kind}: {}",
                rep.energy_residual
            );
        }
    }

    #[test]
    fn driven_run_heats_and_conserves_energy() {
        let cfg = small_config();
        for kind in DiffusionModelKind::ALL {
            let model = DiffusionModel::from_config(kind, &cfg).unwrap();
            let mut state = model.initial_state(cfg.t0).unwrap();
            for _ in 0..cfg.steps {
                let (next, rep) = model.step(&state, cfg.dt).unwrap();
                assert!(
                    rep.energy_residual < 1e-8,
                    "{kind}: residual {}",
                    rep.energy_residual
                );
                for (a, b) in next.temperature.iter().zip(&state.temperature) {
                    assert!(a >= &(b * (1.0 - 1e-12)), "{kind}: cooling {a} < {b}");
                }
                state = next;
            }
            let mesh = cfg.mesh().unwrap();
            assert!(state.temperature[mesh.cell(0, 1)] > state.temperature[mesh.cell(3, 1)]);
        }
    }

    #[test]
    fn fld_fluxes_respect_the_limiter() {
        let cfg = RunConfig {
            t0: 1e-3,
            ..small_config()
        };
        let model = DiffusionModel::from_config(DiffusionModelKind::Fld, &cfg).unwrap();
        let s0 = model.initial_state(cfg.t0).unwrap();
        let (s1, _) = model.step(&s0, cfg.dt).unwrap();
        let mesh = &model.mesh;
        let c = model.material.constants.c;
        for g in 0..s1.moments.groups() {
            let e = s1.moments.energy.group(g);
            for j in 0..mesh.ny {
                for i in 1..mesh.nx {
                    let f = s1.moments.flux_x.get(g, mesh.x_face(i, j));
                    let emax = e[mesh.cell(i, j)].max(e[mesh.cell(i - 1, j)]);
                    assert!(
                        f.abs() <= c * emax * (1.0 + 1e-10),
                        "group {g}: {f} vs {}",
                        c * emax
                    );
                }
            }
        }
    }

    #[test]
    fn run_includes_initial_state() {
        let cfg = RunConfig {
            steps: 2,
            ..small_config()
        };
        let states = run_diffusion_model(DiffusionModelKind::P1, &cfg).unwrap();
        assert_eq!(states.len(), 3);
        let data = TemperatureDataset::from_states(&cfg.mesh().unwrap(), &states);
        data.check_grid(&cfg.mesh().unwrap(), cfg.dt, 2).unwrap();
        assert!(data.check_grid(&cfg.mesh().unwrap(), cfg.dt, 3).is_err());
        let none =
            run_diffusion_model(DiffusionModelKind::Fld, &RunConfig { steps: 0, ..cfg }).unwrap();
        assert_eq!(none.len(), 1);
    }
}
