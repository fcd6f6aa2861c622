//! Mixed finite-volume solver for the first two angular moment equations
//!
//! ```text
//! dE/dt + div F + c kappa E = q
//! (alpha / c) dF/dt + c div(f E) + kappa F = 0
//! ```
//!
//! with cell-centered `E` and face-normal `F`. The face fluxes are
//! eliminated, leaving a nine-point system for `E` per group (the cross
//! term `f_xy` couples diagonal neighbors). `alpha = 1` gives the P1 and
//! VEF models and `alpha = 1/3` the P1/3 model. On the boundary the closure
//!
//! ```text
//! n.F = c C (E_b - E_in) + F_in
//! ```
//!
//! is imposed, where `E_in` and `F_in <= 0` are the half-range density and
//! normal flux of the incoming intensity.

use std::f64::consts::PI;

use crate::coupling::{
    solve_coupled_step, CouplingOptions, CouplingStats, FrozenCoefficients, RadiationSolver,
};
use crate::error::{Error, Result};
use crate::fields::{GroupField, MomentField};
use crate::grid::{AngularQuadrature, Side, SpatialMesh};
use crate::linalg::{BandLu, BandMatrix};
use crate::physics::Material;
use crate::transport::{energy_balance_residual, BoundaryInflow};

/// Eddington tensor per cell and boundary factor per boundary face for
/// every group at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct LoClosure {
    /// `f_xx`, `f_xy`, `f_yy` per (group, cell).
    pub tensor: [GroupField; 3],
    /// `C_g` per (group, boundary face).
    pub boundary_factor: GroupField,
    /// Optional face consistency coefficients on x-faces and y-faces. When
    /// present, a face flux gains `d (E_L + E_R)` on interior faces and
    /// `d E_c` on boundary faces.
    pub correction: Option<[GroupField; 2]>,
}

impl LoClosure {
    /// `f = I/3`, `C = 1/2`.
    pub fn isotropic(mesh: &SpatialMesh, groups: usize) -> Self {
        let cells = mesh.num_cells();
        Self {
            tensor: [
                GroupField::filled(groups, cells, 1.0 / 3.0),
                GroupField::zeros(groups, cells),
                GroupField::filled(groups, cells, 1.0 / 3.0),
            ],
            boundary_factor: GroupField::filled(groups, mesh.boundary_faces().len(), 0.5),
            correction: None,
        }
    }

    pub fn groups(&self) -> usize {
        self.tensor[0].groups()
    }
}

/// Half-range incoming density `E_in` and normal flux `F_in` per
/// (group, boundary face).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySource {
    pub energy: GroupField,
    pub flux: GroupField,
}

impl BoundarySource {
    /// Exact angular integrals of an isotropic inflow: `E_in = 2 pi B / c`,
    /// `F_in = -pi B`.
    pub fn analytic(mesh: &SpatialMesh, inflow: &BoundaryInflow, c: f64) -> Self {
        let groups = inflow.groups();
        let faces = mesh.boundary_faces();
        let mut energy = GroupField::zeros(groups, faces.len());
        let mut flux = GroupField::zeros(groups, faces.len());
        for g in 0..groups {
            for (b, f) in faces.iter().enumerate() {
                let v = inflow.value(f.side, g);
                energy.set(g, b, 2.0 * PI * v / c);
                flux.set(g, b, -PI * v);
            }
        }
        Self { energy, flux }
    }

    /// Quadrature sums of an isotropic inflow.
    pub fn quadrature(
        mesh: &SpatialMesh,
        quadrature: &AngularQuadrature,
        inflow: &BoundaryInflow,
        c: f64,
    ) -> Self {
        let groups = inflow.groups();
        let faces = mesh.boundary_faces();
        let mut energy = GroupField::zeros(groups, faces.len());
        let mut flux = GroupField::zeros(groups, faces.len());
        let mut half = [(0.0, 0.0); 4];
        for side in Side::ALL {
            let (nx, ny) = side.normal();
            for o in quadrature.ordinates() {
                let mu = nx * o.omega[0] + ny * o.omega[1];
                if mu < 0.0 {
                    half[side.index()].0 += o.weight;
                    half[side.index()].1 += o.weight * mu;
                }
            }
        }
        for g in 0..groups {
            for (b, f) in faces.iter().enumerate() {
                let v = inflow.value(f.side, g);
                let (w, wmu) = half[f.side.index()];
                energy.set(g, b, w * v / c);
                flux.set(g, b, wmu * v);
            }
        }
        Self { energy, flux }
    }
}

/// Row numbering of cells that keeps the bandwidth at `min(nx, ny) + 1`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CellOrdering {
    nx: usize,
    ny: usize,
    transpose: bool,
}

impl CellOrdering {
    pub(crate) fn new(mesh: &SpatialMesh) -> Self {
        Self {
            nx: mesh.nx,
            ny: mesh.ny,
            transpose: mesh.ny < mesh.nx,
        }
    }

    #[inline]
    pub(crate) fn row(&self, cell: usize) -> usize {
        if self.transpose {
            let (i, j) = (cell % self.nx, cell / self.nx);
            j + i * self.ny
        } else {
            cell
        }
    }

    pub(crate) fn bandwidth(&self) -> usize {
        self.nx.min(self.ny) + 1
    }

    pub(crate) fn matrix(&self) -> BandMatrix {
        let b = self.bandwidth();
        BandMatrix::zeros(self.nx * self.ny, b, b)
    }

    /// Permute a cell-ordered vector into row order.
    pub(crate) fn gather(&self, cells: &[f64], rows: &mut [f64]) {
        for (c, v) in cells.iter().enumerate() {
            rows[self.row(c)] = *v;
        }
    }

    pub(crate) fn scatter(&self, rows: &[f64], cells: &mut [f64]) {
        for (c, v) in cells.iter_mut().enumerate() {
            *v = rows[self.row(c)];
        }
    }
}

/// Face flux as an affine function of the cell energies.
#[derive(Debug, Clone, Default)]
pub(crate) struct Affine {
    /// Part that vanishes in the homogeneous problem.
    pub(crate) constant: f64,
    pub(crate) terms: Vec<(usize, f64)>,
}

impl Affine {
    pub(crate) fn eval(&self, energy: &[f64]) -> f64 {
        self.constant + self.linear(energy)
    }

    fn linear(&self, energy: &[f64]) -> f64 {
        self.terms.iter().map(|(k, w)| w * energy[*k]).sum()
    }
}

/// Central difference along y of a cell quantity in column `i` at row `j`,
/// one-sided at the ends: `(cell, weight)` pairs.
pub(crate) fn d_dy(mesh: &SpatialMesh, i: usize, j: usize) -> Vec<(usize, f64)> {
    let ny = mesh.ny;
    if ny == 1 {
        Vec::new()
    } else if j == 0 {
        vec![
            (mesh.cell(i, 1), 1.0 / mesh.dy),
            (mesh.cell(i, 0), -1.0 / mesh.dy),
        ]
    } else if j == ny - 1 {
        vec![
            (mesh.cell(i, j), 1.0 / mesh.dy),
            (mesh.cell(i, j - 1), -1.0 / mesh.dy),
        ]
    } else {
        let h = 0.5 / mesh.dy;
        vec![(mesh.cell(i, j + 1), h), (mesh.cell(i, j - 1), -h)]
    }
}

pub(crate) fn d_dx(mesh: &SpatialMesh, i: usize, j: usize) -> Vec<(usize, f64)> {
    let nx = mesh.nx;
    if nx == 1 {
        Vec::new()
    } else if i == 0 {
        vec![
            (mesh.cell(1, j), 1.0 / mesh.dx),
            (mesh.cell(0, j), -1.0 / mesh.dx),
        ]
    } else if i == nx - 1 {
        vec![
            (mesh.cell(i, j), 1.0 / mesh.dx),
            (mesh.cell(i - 1, j), -1.0 / mesh.dx),
        ]
    } else {
        let h = 0.5 / mesh.dx;
        vec![(mesh.cell(i + 1, j), h), (mesh.cell(i - 1, j), -h)]
    }
}

/// Assemble the balance rows from face representations and factor them.
pub(crate) fn assemble_balance(
    mesh: &SpatialMesh,
    ordering: &CellOrdering,
    diagonal: &[f64],
    fx: &[Affine],
    fy: &[Affine],
) -> Result<BandLu> {
    let mut a = ordering.matrix();
    for (c, d) in diagonal.iter().enumerate() {
        a.add(ordering.row(c), ordering.row(c), *d);
    }
    for j in 0..mesh.ny {
        for i in 0..mesh.nx {
            let c = mesh.cell(i, j);
            let r = ordering.row(c);
            let faces = [
                (&fx[mesh.x_face(i + 1, j)], 1.0 / mesh.dx),
                (&fx[mesh.x_face(i, j)], -1.0 / mesh.dx),
                (&fy[mesh.y_face(i, j + 1)], 1.0 / mesh.dy),
                (&fy[mesh.y_face(i, j)], -1.0 / mesh.dy),
            ];
            for (face, s) in faces {
                for (k, w) in &face.terms {
                    a.add(r, ordering.row(*k), s * w);
                }
            }
        }
    }
    a.factor()
}

/// Constant contribution of the face fluxes to the balance of each cell.
pub(crate) fn balance_constants(mesh: &SpatialMesh, fx: &[Affine], fy: &[Affine]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.num_cells()];
    for j in 0..mesh.ny {
        for i in 0..mesh.nx {
            out[mesh.cell(i, j)] = (fx[mesh.x_face(i + 1, j)].constant
                - fx[mesh.x_face(i, j)].constant)
                / mesh.dx
                + (fy[mesh.y_face(i, j + 1)].constant - fy[mesh.y_face(i, j)].constant) / mesh.dy;
        }
    }
    out
}

#[derive(Debug, Clone)]
struct GroupSystem {
    lu: BandLu,
    fx: Vec<Affine>,
    fy: Vec<Affine>,
    constants: Vec<f64>,
}

/// The moment system of one time step as a [`RadiationSolver`].
#[derive(Debug, Clone)]
pub struct MomentSolver<'a> {
    mesh: &'a SpatialMesh,
    closure: &'a LoClosure,
    source: &'a BoundarySource,
    prev: &'a MomentField,
    c: f64,
    dt: f64,
    alpha: f64,
    ordering: CellOrdering,
    systems: Vec<GroupSystem>,
}

impl<'a> MomentSolver<'a> {
    pub fn new(
        mesh: &'a SpatialMesh,
        closure: &'a LoClosure,
        source: &'a BoundarySource,
        prev: &'a MomentField,
        c: f64,
        dt: f64,
        alpha: f64,
    ) -> Result<Self> {
        let groups = prev.groups();
        if closure.groups() != groups || source.energy.groups() != groups {
            return Err(Error::Dimension(
                "closure, boundary data and state disagree on group count".into(),
            ));
        }
        if closure.tensor[0].sites() != mesh.num_cells()
            || closure.boundary_factor.sites() != mesh.boundary_faces().len()
        {
            return Err(Error::Dimension("closure does not match the mesh".into()));
        }
        Ok(Self {
            mesh,
            closure,
            source,
            prev,
            c,
            dt,
            alpha,
            ordering: CellOrdering::new(mesh),
            systems: Vec::new(),
        })
    }

    pub(crate) fn face_system(&self, g: usize, kappa: &[f64]) -> (Vec<Affine>, Vec<Affine>) {
        let (mut fx, mut fy) = self.closure_face_system(g, kappa);
        if let Some([dx, dy]) = &self.closure.correction {
            let mesh = self.mesh;
            for j in 0..mesh.ny {
                for i in 0..=mesh.nx {
                    let f = mesh.x_face(i, j);
                    let (l, r) = mesh.x_face_cells(i, j);
                    fx[f]
                        .terms
                        .extend(l.into_iter().chain(r).map(|k| (k, dx.get(g, f))));
                }
            }
            for j in 0..=mesh.ny {
                for i in 0..mesh.nx {
                    let f = mesh.y_face(i, j);
                    let (b, t) = mesh.y_face_cells(i, j);
                    fy[f]
                        .terms
                        .extend(b.into_iter().chain(t).map(|k| (k, dy.get(g, f))));
                }
            }
        }
        (fx, fy)
    }

    fn closure_face_system(&self, g: usize, kappa: &[f64]) -> (Vec<Affine>, Vec<Affine>) {
        let mesh = self.mesh;
        let (c, dt, alpha) = (self.c, self.dt, self.alpha);
        let inertia = alpha / (c * dt);
        let fxx = self.closure.tensor[0].group(g);
        let fxy = self.closure.tensor[1].group(g);
        let fyy = self.closure.tensor[2].group(g);
        let cfac = self.closure.boundary_factor.group(g);
        let ein = self.source.energy.group(g);
        let fin = self.source.flux.group(g);
        let px = self.prev.flux_x.group(g);
        let py = self.prev.flux_y.group(g);
        let mut fx = vec![Affine::default(); mesh.num_x_faces()];
        let mut fy = vec![Affine::default(); mesh.num_y_faces()];

        for j in 0..mesh.ny {
            for i in 1..mesh.nx {
                let (l, r) = (mesh.cell(i - 1, j), mesh.cell(i, j));
                let tau = 0.5 * (kappa[l] + kappa[r]) + inertia;
                let f = mesh.x_face(i, j);
                let s = -c / tau;
                let mut terms = vec![(r, s * fxx[r] / mesh.dx), (l, -s * fxx[l] / mesh.dx)];
                for ic in [i - 1, i] {
                    for (k, w) in d_dy(mesh, ic, j) {
                        terms.push((k, 0.5 * s * w * fxy[k]));
                    }
                }
                fx[f] = Affine {
                    constant: inertia * px[f] / tau,
                    terms,
                };
            }
        }
        for j in 1..mesh.ny {
            for i in 0..mesh.nx {
                let (b, t) = (mesh.cell(i, j - 1), mesh.cell(i, j));
                let tau = 0.5 * (kappa[b] + kappa[t]) + inertia;
                let f = mesh.y_face(i, j);
                let s = -c / tau;
                let mut terms = vec![(t, s * fyy[t] / mesh.dy), (b, -s * fyy[b] / mesh.dy)];
                for jc in [j - 1, j] {
                    for (k, w) in d_dx(mesh, i, jc) {
                        terms.push((k, 0.5 * s * w * fxy[k]));
                    }
                }
                fy[f] = Affine {
                    constant: inertia * py[f] / tau,
                    terms,
                };
            }
        }
        for (bidx, face) in mesh.boundary_faces().iter().enumerate() {
            let cell = face.cell;
            let (i, j) = (cell % mesh.nx, cell / mesh.nx);
            let (nx, ny) = face.side.normal();
            let horizontal = nx != 0.0;
            let (h, fnn, sign) = if horizontal {
                (mesh.dx, fxx[cell], nx)
            } else {
                (mesh.dy, fyy[cell], ny)
            };
            let cb = cfac[bidx];
            let k = 2.0 * fnn / (h * cb);
            let den = kappa[cell] + inertia + k;
            let g2 = 2.0 * c * fnn / h;
            let fprev = if horizontal {
                px[face.face]
            } else {
                py[face.face]
            };
            // n.F for the normal component; stored flux is sign * n.F
            let constant = (inertia * sign * fprev + k * fin[bidx] - g2 * ein[bidx]) / den;
            let mut terms = vec![(cell, g2 / den)];
            let cross = if horizontal {
                d_dy(mesh, i, j)
            } else {
                d_dx(mesh, i, j)
            };
            for (kc, w) in cross {
                terms.push((kc, -c * sign * w * fxy[kc] / den));
            }
            let aff = Affine {
                constant: sign * constant,
                terms: terms.into_iter().map(|(kc, w)| (kc, sign * w)).collect(),
            };
            if horizontal {
                fx[face.face] = aff;
            } else {
                fy[face.face] = aff;
            }
        }
        (fx, fy)
    }

    fn solve_group(&self, g: usize, rhs_cells: &[f64], energy: &mut [f64]) {
        let n = rhs_cells.len();
        let mut rows = vec![0.0; n];
        self.ordering.gather(rhs_cells, &mut rows);
        self.systems[g].lu.solve_in_place(&mut rows);
        self.ordering.scatter(&rows, energy);
    }
}

impl RadiationSolver for MomentSolver<'_> {
    type Output = MomentField;

    fn freeze(&mut self, coefficients: &FrozenCoefficients) -> Result<()> {
        let groups = self.prev.groups();
        let mut systems = Vec::with_capacity(groups);
        for g in 0..groups {
            let kappa = coefficients.kappa.group(g);
            let (fx, fy) = self.face_system(g, kappa);
            let diagonal: Vec<f64> = kappa.iter().map(|k| 1.0 / self.dt + self.c * k).collect();
            let lu = assemble_balance(self.mesh, &self.ordering, &diagonal, &fx, &fy)
                .map_err(|e| Error::LinearSolve(format!("group {g}: {e}")))?;
            let constants = balance_constants(self.mesh, &fx, &fy);
            systems.push(GroupSystem {
                lu,
                fx,
                fy,
                constants,
            });
        }
        self.systems = systems;
        Ok(())
    }

    fn solve(&mut self, emission: &GroupField) -> Result<MomentField> {
        let mut out = MomentField::zeros(self.mesh, self.prev.groups());
        let cells = self.mesh.num_cells();
        let mut rhs = vec![0.0; cells];
        for g in 0..self.prev.groups() {
            let sys = &self.systems[g];
            let src = emission.group(g);
            let ep = self.prev.energy.group(g);
            for c in 0..cells {
                rhs[c] = src[c] + ep[c] / self.dt - sys.constants[c];
            }
            let mut energy = vec![0.0; cells];
            self.solve_group(g, &rhs, &mut energy);
            for (f, a) in out.flux_x.group_mut(g).iter_mut().zip(&sys.fx) {
                *f = a.eval(&energy);
            }
            for (f, a) in out.flux_y.group_mut(g).iter_mut().zip(&sys.fy) {
                *f = a.eval(&energy);
            }
            out.energy.group_mut(g).copy_from_slice(&energy);
        }
        Ok(out)
    }

    fn solve_homogeneous(&mut self, emission: &GroupField, energy: &mut GroupField) -> Result<()> {
        for g in 0..self.prev.groups() {
            let src = emission.group(g).to_vec();
            let mut e = vec![0.0; src.len()];
            self.solve_group(g, &src, &mut e);
            energy.group_mut(g).copy_from_slice(&e);
        }
        Ok(())
    }

    fn energy<'o>(&self, output: &'o MomentField) -> &'o GroupField {
        &output.energy
    }
}

/// Material temperature and radiation moments of a low-order model.
#[derive(Debug, Clone, PartialEq)]
pub struct LoState {
    pub time: f64,
    pub temperature: Vec<f64>,
    pub moments: MomentField,
}

impl LoState {
    /// Material at `t0` with Planckian radiation and zero flux.
    pub fn equilibrium(mesh: &SpatialMesh, material: &Material, t0: f64) -> Result<Self> {
        if !(t0 > 0.0) {
            return Err(Error::Domain(format!(
                "initial temperature must be positive (got {t0})"
            )));
        }
        let groups = material.num_groups();
        let mut moments = MomentField::zeros(mesh, groups);
        let c = material.constants.c;
        for g in 0..groups {
            let e = 4.0 * PI * material.planck(t0, g) / c;
            moments.energy.group_mut(g).fill(e);
        }
        Ok(Self {
            time: 0.0,
            temperature: vec![t0; mesh.num_cells()],
            moments,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoStepReport {
    pub coupling: CouplingStats,
    pub energy_residual: f64,
    /// Largest `|F_g| / (c E_g)` over all faces and groups, with `E_g` the
    /// face energy seen by the flux limiter. Only set by flux-limited models.
    pub flux_ratio: Option<f64>,
}

/// Advance a low-order state one step with any [`RadiationSolver`] producing
/// moment fields.
pub fn lo_step<S: RadiationSolver<Output = MomentField>>(
    solver: &mut S,
    mesh: &SpatialMesh,
    material: &Material,
    state: &LoState,
    dt: f64,
    options: &CouplingOptions,
) -> Result<(LoState, LoStepReport)> {
    let (temperature, moments, coupling) = solve_coupled_step(
        solver,
        material,
        &state.temperature,
        &state.temperature,
        dt,
        options,
    )?;
    let energy_residual = energy_balance_residual(
        mesh,
        material.eos.cv,
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
            flux_ratio: None,
        },
    ))
}

/// One backward-Euler step of the moment system closed by `closure`.
#[allow(clippy::too_many_arguments)]
pub fn moment_step(
    mesh: &SpatialMesh,
    material: &Material,
    closure: &LoClosure,
    source: &BoundarySource,
    alpha: f64,
    state: &LoState,
    dt: f64,
    options: &CouplingOptions,
) -> Result<(LoState, LoStepReport)> {
    let mut solver = MomentSolver::new(
        mesh,
        closure,
        source,
        &state.moments,
        material.constants.c,
        dt,
        alpha,
    )?;
    lo_step(&mut solver, mesh, material, state, dt, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::physics::OpacityModel;
    use approx::assert_relative_eq;

    fn strip(opacity: f64) -> RunConfig {
        RunConfig {
            nx: 12,
            ny: 2,
            lx: 1.2,
            ly: 0.2,
            group_bounds: vec![1.0, 4.0],
            opacity: OpacityModel::Constant(opacity),
            dt: 0.05,
            steps: 4,
            t0: 0.1,
            ..RunConfig::default()
        }
    }

    fn run(cfg: &RunConfig, alpha: f64) -> LoState {
        let mesh = cfg.mesh().unwrap();
        let material = cfg.material().unwrap();
        let inflow = cfg.inflow(&material);
        let closure = LoClosure::isotropic(&mesh, material.num_groups());
        let source = BoundarySource::analytic(&mesh, &inflow, material.constants.c);
        let mut state = LoState::equilibrium(&mesh, &material, cfg.t0).unwrap();
        for _ in 0..cfg.steps {
            let (next, rep) = moment_step(
                &mesh,
                &material,
                &closure,
                &source,
                alpha,
                &state,
                cfg.dt,
                &cfg.coupling(),
            )
            .unwrap();
            assert!(
                rep.energy_residual < 1e-9,
                "residual {}",
                rep.energy_residual
            );
            state = next;
        }
        state
    }

    #[test]
    fn p1_and_p13_agree_in_the_thick_limit() {
        let cfg = strip(2000.0);
        let (a, b) = (run(&cfg, 1.0), run(&cfg, 1.0 / 3.0));
        let num: f64 = a
            .moments
            .energy
            .as_slice()
            .iter()
            .zip(b.moments.energy.as_slice())
            .map(|(x, y)| (x - y).powi(2))
            .sum();
        let den: f64 = a.moments.energy.as_slice().iter().map(|x| x * x).sum();
        assert!((num / den).sqrt() < 1e-2, "{}", (num / den).sqrt());
    }

    #[test]
    fn p1_and_p13_differ_in_thin_media() {
        let cfg = strip(0.01);
        let (a, b) = (run(&cfg, 1.0), run(&cfg, 1.0 / 3.0));
        let d = a
            .temperature
            .iter()
            .zip(&b.temperature)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(d > 1e-6);
    }

    #[test]
    fn analytic_source_is_half_range_planckian() {
        let cfg = strip(1.0);
        let mesh = cfg.mesh().unwrap();
        let material = cfg.material().unwrap();
        let inflow = cfg.inflow(&material);
        let c = material.constants.c;
        let src = BoundarySource::analytic(&mesh, &inflow, c);
        let quad = BoundarySource::quadrature(&mesh, &cfg.quadrature().unwrap(), &inflow, c);
        for g in 0..material.num_groups() {
            let b = material.planck(cfg.t_in, g);
            for (k, face) in mesh.boundary_faces().iter().enumerate() {
                let (e, f) = if face.side == crate::grid::Side::Left {
                    (2.0 * PI * b / c, -PI * b)
                } else {
                    (0.0, 0.0)
                };
                assert_relative_eq!(src.energy.get(g, k), e, max_relative = 1e-14);
                assert_relative_eq!(src.flux.get(g, k), f, max_relative = 1e-14);
                assert_relative_eq!(quad.energy.get(g, k), e, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn cell_ordering_round_trips() {
        let mesh = SpatialMesh::new(5, 3, 1.0, 1.0).unwrap();
        let ord = CellOrdering::new(&mesh);
        let v: Vec<f64> = (0..15).map(|x| x as f64).collect();
        let mut rows = vec![0.0; 15];
        let mut back = vec![0.0; 15];
        ord.gather(&v, &mut rows);
        ord.scatter(&rows, &mut back);
        assert_eq!(v, back);
        assert_eq!(ord.bandwidth(), 4);
    }
}
