//! Discrete-ordinates transport on the rectangular mesh.
//!
//! Each cell is integrated with step characteristics: along every ordinate
//! the intensity entering through the upwind faces decays exponentially
//! toward `q / sigma` with the source and total opacity constant per cell.
//! Face and cell averages are closed-form integrals of that pointwise
//! solution, so the cell balance holds identically and all weights are
//! nonnegative.
//!
//! Backward Euler is folded into the sweep: `sigma = kappa + 1/(c dt)` and
//! `q = kappa B + I_prev / (c dt)`.

use std::f64::consts::PI;

use crate::config::RunConfig;
use crate::coupling::{
    solve_coupled_step, CouplingOptions, CouplingStats, FrozenCoefficients, RadiationSolver,
};
use crate::error::{Error, Result};
use crate::fields::{GroupField, IntensityField, MomentField};
use crate::grid::{AngularQuadrature, PhaseSpaceGrid, Side, SpatialMesh};
use crate::physics::Material;

/// Isotropic incoming intensity per side and group.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryInflow {
    sides: [Vec<f64>; 4],
}

impl BoundaryInflow {
    pub fn vacuum(groups: usize) -> Self {
        Self {
            sides: std::array::from_fn(|_| vec![0.0; groups]),
        }
    }

    /// Planckian inflow at the given temperature on each side, vacuum where
    /// `None`.
    pub fn planckian(material: &Material, temperatures: [Option<f64>; 4]) -> Self {
        let groups = material.num_groups();
        Self {
            sides: std::array::from_fn(|s| match temperatures[s] {
                Some(t) => (0..groups).map(|g| material.planck(t, g)).collect(),
                None => vec![0.0; groups],
            }),
        }
    }

    pub fn from_sides(sides: [Vec<f64>; 4]) -> Result<Self> {
        let groups = sides[0].len();
        if sides.iter().any(|s| s.len() != groups) {
            return Err(Error::Dimension(
                "inflow sides disagree on group count".into(),
            ));
        }
        if sides.iter().flatten().any(|v| !(*v >= 0.0)) {
            return Err(Error::Domain("inflow intensity must be nonnegative".into()));
        }
        Ok(Self { sides })
    }

    pub fn groups(&self) -> usize {
        self.sides[0].len()
    }

    pub fn value(&self, side: Side, g: usize) -> f64 {
        self.sides[side.index()][g]
    }

    fn group(&self, g: usize) -> [f64; 4] {
        std::array::from_fn(|s| self.sides[s][g])
    }

    pub fn is_vacuum(&self) -> bool {
        self.sides.iter().flatten().all(|v| *v == 0.0)
    }
}

/// `(1 - e^-z) / z`, `(z - 1 + e^-z) / z^2` and `1 - 2 (z - 1 + e^-z) / z^2`.
#[inline]
fn chord_factors(z: f64) -> (f64, f64, f64, f64) {
    if z < 1e-2 {
        // sum_k (-z)^k / (k + n)!
        let m = 1.0
            - z * (1.0 / 2.0
                - z * (1.0 / 6.0
                    - z * (1.0 / 24.0 - z * (1.0 / 120.0 - z * (1.0 / 720.0 - z / 5040.0)))));
        let p = 1.0 / 2.0
            - z * (1.0 / 6.0
                - z * (1.0 / 24.0 - z * (1.0 / 120.0 - z * (1.0 / 720.0 - z / 5040.0))));
        let s3 = 1.0 / 6.0
            - z * (1.0 / 24.0
                - z * (1.0 / 120.0 - z * (1.0 / 720.0 - z * (1.0 / 5040.0 - z / 40320.0))));
        let e = (-z).exp();
        (e, m, p, 2.0 * z * s3)
    } else {
        let em1 = (-z).exp_m1();
        let m = -em1 / z;
        let p = (z + em1) / (z * z);
        (1.0 + em1, m, p, 1.0 - 2.0 * p)
    }
}

/// Step-characteristic update of one cell for a direction with positive
/// components `(a, b)` in the local frame. `psi_x` enters through the
/// x-face and `psi_y` through the y-face. Returns the outgoing x-face and
/// y-face averages and the cell average.
#[inline]
#[allow(clippy::too_many_arguments)]
pub fn characteristic_cell(
    sigma: f64,
    q: f64,
    psi_x: f64,
    psi_y: f64,
    a: f64,
    b: f64,
    dx: f64,
    dy: f64,
) -> (f64, f64, f64) {
    let qh = q / sigma;
    let sx = dx / a;
    let sy = dy / b;
    if sx <= sy {
        // the x-face outflow is partly fed from the y-face
        let z = sigma * sx;
        let (e, m, p, qq) = chord_factors(z);
        let u = (b * sx / dy).min(1.0);
        let zp = 1.0 - m;
        let out_x = qh * (u * zp + (1.0 - u) * (1.0 - e)) + psi_y * u * m + psi_x * (1.0 - u) * e;
        let out_y = qh * zp + psi_x * m;
        let kl = (1.0 - u) * m + u * p;
        let kb = u * p;
        let w = (1.0 - u) * zp + u * qq;
        (out_x, out_y, qh * w + psi_x * kl + psi_y * kb)
    } else {
        let z = sigma * sy;
        let (e, m, p, qq) = chord_factors(z);
        let v = (a * sy / dx).min(1.0);
        let zp = 1.0 - m;
        let out_y = qh * (v * zp + (1.0 - v) * (1.0 - e)) + psi_x * v * m + psi_y * (1.0 - v) * e;
        let out_x = qh * zp + psi_y * m;
        let kb = (1.0 - v) * m + v * p;
        let kl = v * p;
        let w = (1.0 - v) * zp + v * qq;
        (out_x, out_y, qh * w + psi_x * kl + psi_y * kb)
    }
}

/// Per-boundary-face half-range sums of one group.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BoundarySums {
    /// `sum_{n.O > 0} w (n.O) I`.
    pub out_flux: f64,
    /// `sum_{n.O > 0} w I`.
    pub out_density: f64,
    /// `sum_{n.O < 0} w (n.O) I` (nonpositive).
    pub in_flux: f64,
    /// `sum_{n.O < 0} w I`.
    pub in_density: f64,
}

/// Angular sums accumulated during a sweep of one group.
#[derive(Debug, Clone)]
struct GroupAccumulator {
    phi: Vec<f64>,
    fx: Vec<f64>,
    fy: Vec<f64>,
    full: Option<FullAccumulator>,
}

#[derive(Debug, Clone)]
struct FullAccumulator {
    second: Vec<[f64; 4]>,
    boundary: Vec<BoundarySums>,
    face_x: Vec<f64>,
    face_y: Vec<f64>,
}

impl GroupAccumulator {
    fn new(mesh: &SpatialMesh, full: bool) -> Self {
        Self {
            phi: vec![0.0; mesh.num_cells()],
            fx: vec![0.0; mesh.num_x_faces()],
            fy: vec![0.0; mesh.num_y_faces()],
            full: full.then(|| FullAccumulator {
                second: vec![[0.0; 4]; mesh.num_cells()],
                boundary: vec![BoundarySums::default(); mesh.boundary_faces().len()],
                face_x: vec![0.0; mesh.num_x_faces()],
                face_y: vec![0.0; mesh.num_y_faces()],
            }),
        }
    }
}

/// Everything a full sweep produces besides the intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTallies {
    /// Energy density and upwind face fluxes.
    pub moments: MomentField,
    /// `(1/c) sum_m w O_a O_b I` per cell for `ab = xx, xy, yy, zz`.
    pub second: [GroupField; 4],
    /// Half-range sums per boundary face, group-major.
    pub boundary: Vec<Vec<BoundarySums>>,
    /// `(1/c) sum_m w I` on x-faces and y-faces.
    pub face_energy_x: GroupField,
    pub face_energy_y: GroupField,
}

/// Sweep machinery bound to a mesh and quadrature.
#[derive(Debug, Clone)]
pub struct Sweeper {
    mesh: SpatialMesh,
    quadrature: AngularQuadrature,
    /// Ordinates swept when the solution is even in `O_z`, with the index of
    /// the mirror image.
    half: Vec<(usize, Option<usize>)>,
}

impl Sweeper {
    pub fn new(mesh: SpatialMesh, quadrature: AngularQuadrature) -> Self {
        let ords = quadrature.ordinates();
        let mut half = Vec::new();
        let mut taken = vec![false; ords.len()];
        for (m, o) in ords.iter().enumerate() {
            if taken[m] {
                continue;
            }
            taken[m] = true;
            let mirror = ords.iter().enumerate().position(|(k, p)| {
                !taken[k]
                    && p.omega[0] == o.omega[0]
                    && p.omega[1] == o.omega[1]
                    && p.omega[2] == -o.omega[2]
                    && p.weight == o.weight
            });
            if let Some(k) = mirror {
                taken[k] = true;
            }
            half.push((m, mirror));
        }
        Self {
            mesh,
            quadrature,
            half,
        }
    }

    pub fn mesh(&self) -> &SpatialMesh {
        &self.mesh
    }

    pub fn quadrature(&self) -> &AngularQuadrature {
        &self.quadrature
    }

    fn boundary_index(&self, side: Side, k: usize) -> usize {
        let (nx, ny) = (self.mesh.nx, self.mesh.ny);
        match side {
            Side::Left => k,
            Side::Right => ny + k,
            Side::Bottom => 2 * ny + k,
            Side::Top => 2 * ny + nx + k,
        }
    }

    /// Whether the previous-time intensities of a group are even in `O_z`.
    fn prev_is_even(&self, prev: &[f64], cells: usize) -> bool {
        self.half.iter().all(|&(m, mirror)| match mirror {
            Some(k) => prev[m * cells..(m + 1) * cells] == prev[k * cells..(k + 1) * cells],
            None => true,
        })
    }

    /// Sweep all ordinates of one group.
    ///
    /// `sigma` is the total opacity and `source` the isotropic source per
    /// steradian, both per cell; `prev` holds `I_prev / (c dt)` per
    /// (direction, cell). Intensities are written to `store` when given.
    #[allow(clippy::too_many_arguments)]
    fn sweep_group(
        &self,
        sigma: &[f64],
        source: &[f64],
        prev: Option<&[f64]>,
        inflow: [f64; 4],
        acc: &mut GroupAccumulator,
        mut store: Option<&mut [f64]>,
    ) {
        let cells = self.mesh.num_cells();
        let even = prev.is_none_or(|p| self.prev_is_even(p, cells));
        let ords = self.quadrature.ordinates();
        let mut scratch = vec![0.0; cells];
        let run = |m: usize, weight: f64, acc: &mut GroupAccumulator, out: &mut [f64]| {
            let prev_m = prev.map(|p| &p[m * cells..(m + 1) * cells]);
            self.sweep_direction(m, weight, sigma, source, prev_m, inflow, acc, out);
        };
        if even {
            for &(m, mirror) in &self.half {
                let w = ords[m].weight + mirror.map_or(0.0, |k| ords[k].weight);
                match store.as_deref_mut() {
                    Some(st) => {
                        let (lo, hi) = st.split_at_mut(m * cells + cells);
                        let out = &mut lo[m * cells..];
                        run(m, w, acc, out);
                        if let Some(k) = mirror {
                            hi[(k - m - 1) * cells..(k - m) * cells].copy_from_slice(out);
                        }
                    }
                    None => run(m, w, acc, &mut scratch),
                }
            }
        } else {
            for m in 0..ords.len() {
                let w = ords[m].weight;
                match store.as_deref_mut() {
                    Some(st) => run(m, w, acc, &mut st[m * cells..(m + 1) * cells]),
                    None => run(m, w, acc, &mut scratch),
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn sweep_direction(
        &self,
        m: usize,
        w: f64,
        sigma: &[f64],
        source: &[f64],
        prev: Option<&[f64]>,
        inflow: [f64; 4],
        acc: &mut GroupAccumulator,
        out: &mut [f64],
    ) {
        let mesh = &self.mesh;
        let (nx, ny, dx, dy) = (mesh.nx, mesh.ny, mesh.dx, mesh.dy);
        let omega = self.quadrature.get(m).omega;
        let (ox, oy) = (omega[0], omega[1]);
        let (a, b) = (ox.abs(), oy.abs());
        let (x_in_side, x_out_side) = if ox >= 0.0 {
            (Side::Left, Side::Right)
        } else {
            (Side::Right, Side::Left)
        };
        let (y_in_side, y_out_side) = if oy >= 0.0 {
            (Side::Bottom, Side::Top)
        } else {
            (Side::Top, Side::Bottom)
        };
        let second_w = [
            w * ox * ox,
            w * ox * oy,
            w * oy * oy,
            w * omega[2] * omega[2],
        ];
        let mut y_in = vec![inflow[y_in_side.index()]; nx];
        for jj in 0..ny {
            let j = if oy >= 0.0 { jj } else { ny - 1 - jj };
            let mut x_in = inflow[x_in_side.index()];
            for ii in 0..nx {
                let i = if ox >= 0.0 { ii } else { nx - 1 - ii };
                let c = i + j * nx;
                let (xf_in, xf_out) = if ox >= 0.0 {
                    (mesh.x_face(i, j), mesh.x_face(i + 1, j))
                } else {
                    (mesh.x_face(i + 1, j), mesh.x_face(i, j))
                };
                let (yf_in, yf_out) = if oy >= 0.0 {
                    (mesh.y_face(i, j), mesh.y_face(i, j + 1))
                } else {
                    (mesh.y_face(i, j + 1), mesh.y_face(i, j))
                };
                let q = source[c] + prev.map_or(0.0, |p| p[c]);
                let psi_y = y_in[i];
                let (px, py, avg) = characteristic_cell(sigma[c], q, x_in, psi_y, a, b, dx, dy);
                out[c] = avg;
                acc.phi[c] += w * avg;
                acc.fx[xf_out] += w * ox * px;
                acc.fy[yf_out] += w * oy * py;
                if ii == 0 {
                    acc.fx[xf_in] += w * ox * x_in;
                }
                if jj == 0 {
                    acc.fy[yf_in] += w * oy * psi_y;
                }
                if let Some(full) = acc.full.as_mut() {
                    for (s, sw) in full.second[c].iter_mut().zip(&second_w) {
                        *s += sw * avg;
                    }
                    full.face_x[xf_out] += w * px;
                    full.face_y[yf_out] += w * py;
                    if ii == 0 {
                        full.face_x[xf_in] += w * x_in;
                        let bf = &mut full.boundary[self.boundary_index(x_in_side, j)];
                        bf.in_flux -= w * a * x_in;
                        bf.in_density += w * x_in;
                    }
                    if ii == nx - 1 {
                        let bf = &mut full.boundary[self.boundary_index(x_out_side, j)];
                        bf.out_flux += w * a * px;
                        bf.out_density += w * px;
                    }
                    if jj == 0 {
                        full.face_y[yf_in] += w * psi_y;
                        let bf = &mut full.boundary[self.boundary_index(y_in_side, i)];
                        bf.in_flux -= w * b * psi_y;
                        bf.in_density += w * psi_y;
                    }
                    if jj == ny - 1 {
                        let bf = &mut full.boundary[self.boundary_index(y_out_side, i)];
                        bf.out_flux += w * b * py;
                        bf.out_density += w * py;
                    }
                }
                x_in = px;
                y_in[i] = py;
            }
        }
    }

    fn check_inputs(&self, sigma: &GroupField, source: &GroupField) -> Result<()> {
        let cells = self.mesh.num_cells();
        if sigma.sites() != cells || source.sites() != cells || sigma.groups() != source.groups() {
            return Err(Error::Dimension(
                "sweep coefficients do not match the mesh".into(),
            ));
        }
        if sigma
            .as_slice()
            .iter()
            .any(|s| !(*s > 0.0 && s.is_finite()))
        {
            return Err(Error::Domain(
                "total opacity must be positive and finite".into(),
            ));
        }
        Ok(())
    }

    /// Full sweep of every group. `prev_scaled` holds `I_prev / (c dt)`.
    pub fn sweep_full(
        &self,
        sigma: &GroupField,
        source: &GroupField,
        prev_scaled: Option<&IntensityField>,
        inflow: &BoundaryInflow,
        c: f64,
    ) -> Result<(IntensityField, SweepTallies)> {
        self.check_inputs(sigma, source)?;
        let groups = sigma.groups();
        let cells = self.mesh.num_cells();
        let dirs = self.quadrature.len();
        let mut intensity = IntensityField::zeros(groups, dirs, cells);
        let mut moments = MomentField::zeros(&self.mesh, groups);
        let mut second: [GroupField; 4] = std::array::from_fn(|_| GroupField::zeros(groups, cells));
        let mut face_energy_x = GroupField::zeros(groups, self.mesh.num_x_faces());
        let mut face_energy_y = GroupField::zeros(groups, self.mesh.num_y_faces());
        let mut boundary = Vec::with_capacity(groups);
        for g in 0..groups {
            let mut acc = GroupAccumulator::new(&self.mesh, true);
            self.sweep_group(
                sigma.group(g),
                source.group(g),
                prev_scaled.map(|p| p.group(g)),
                inflow.group(g),
                &mut acc,
                Some(intensity.group_mut(g)),
            );
            for (e, p) in moments.energy.group_mut(g).iter_mut().zip(&acc.phi) {
                *e = p / c;
            }
            moments.flux_x.group_mut(g).copy_from_slice(&acc.fx);
            moments.flux_y.group_mut(g).copy_from_slice(&acc.fy);
            let full = acc.full.expect("full accumulator");
            for (k, comp) in second.iter_mut().enumerate() {
                for (s, v) in comp.group_mut(g).iter_mut().zip(&full.second) {
                    *s = v[k] / c;
                }
            }
            for (e, v) in face_energy_x.group_mut(g).iter_mut().zip(&full.face_x) {
                *e = v / c;
            }
            for (e, v) in face_energy_y.group_mut(g).iter_mut().zip(&full.face_y) {
                *e = v / c;
            }
            boundary.push(full.boundary);
        }
        Ok((
            intensity,
            SweepTallies {
                moments,
                second,
                boundary,
                face_energy_x,
                face_energy_y,
            },
        ))
    }

    /// Energy densities only, without storing intensities.
    pub fn sweep_energy(
        &self,
        sigma: &GroupField,
        source: &GroupField,
        prev_scaled: Option<&IntensityField>,
        inflow: &BoundaryInflow,
        c: f64,
        energy: &mut GroupField,
    ) -> Result<()> {
        self.check_inputs(sigma, source)?;
        for g in 0..sigma.groups() {
            let mut acc = GroupAccumulator::new(&self.mesh, false);
            self.sweep_group(
                sigma.group(g),
                source.group(g),
                prev_scaled.map(|p| p.group(g)),
                inflow.group(g),
                &mut acc,
                None,
            );
            for (e, p) in energy.group_mut(g).iter_mut().zip(&acc.phi) {
                *e = p / c;
            }
        }
        Ok(())
    }
}

/// Solve `(O.grad + kappa + 1/(c dt)) I = emission + I_prev/(c dt)` for every
/// group and ordinate. `emission` is the isotropic source per steradian
/// `kappa_g B_g` per (group, cell).
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    mesh: &SpatialMesh,
    quadrature: &AngularQuadrature,
    kappa: &GroupField,
    emission: &GroupField,
    prev: &IntensityField,
    dt: f64,
    inflow: &BoundaryInflow,
    c: f64,
) -> Result<IntensityField> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!(
            "time step must be positive (got {dt})"
        )));
    }
    if kappa.as_slice().iter().any(|k| !(*k >= 0.0)) {
        return Err(Error::Domain("opacity must be nonnegative".into()));
    }
    let sweeper = Sweeper::new(mesh.clone(), quadrature.clone());
    let inv = 1.0 / (c * dt);
    let mut sigma = kappa.clone();
    sigma.as_mut_slice().iter_mut().for_each(|s| *s += inv);
    let prev_scaled = scaled_intensity(prev, inv);
    let (intensity, _) = sweeper.sweep_full(&sigma, emission, Some(&prev_scaled), inflow, c)?;
    Ok(intensity)
}

pub(crate) fn scaled_intensity(field: &IntensityField, factor: f64) -> IntensityField {
    let mut out = field.clone();
    for g in 0..out.groups() {
        out.group_mut(g).iter_mut().for_each(|v| *v *= factor);
    }
    out
}

/// Angular moments of cell-average intensities. Face fluxes use the upwind
/// cell value on interior faces and the outgoing cell value on boundary
/// faces (incoming intensities are not part of the field).
pub fn angular_moments(
    intensity: &IntensityField,
    mesh: &SpatialMesh,
    quadrature: &AngularQuadrature,
    c: f64,
) -> Result<MomentField> {
    if intensity.cells() != mesh.num_cells() || intensity.directions() != quadrature.len() {
        return Err(Error::Dimension(
            "intensity field does not match the grid".into(),
        ));
    }
    let groups = intensity.groups();
    let mut out = MomentField::zeros(mesh, groups);
    for g in 0..groups {
        for (m, o) in quadrature.ordinates().iter().enumerate() {
            let psi = intensity.angle(g, m);
            let (ox, oy) = (o.omega[0], o.omega[1]);
            for (e, p) in out.energy.group_mut(g).iter_mut().zip(psi) {
                *e += o.weight * p / c;
            }
            let fx = out.flux_x.group_mut(g);
            for j in 0..mesh.ny {
                for i in 0..=mesh.nx {
                    let (l, r) = mesh.x_face_cells(i, j);
                    let up = if ox >= 0.0 { l.or(r) } else { r.or(l) };
                    if let Some(cell) = up {
                        fx[mesh.x_face(i, j)] += o.weight * ox * psi[cell];
                    }
                }
            }
            let fy = out.flux_y.group_mut(g);
            for j in 0..=mesh.ny {
                for i in 0..mesh.nx {
                    let (b, t) = mesh.y_face_cells(i, j);
                    let up = if oy >= 0.0 { b.or(t) } else { t.or(b) };
                    if let Some(cell) = up {
                        fy[mesh.y_face(i, j)] += o.weight * oy * psi[cell];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Cell-centered flux components `sum_m w O I` of cell-average
/// intensities.
pub fn cell_fluxes(intensity: &IntensityField, quadrature: &AngularQuadrature) -> [GroupField; 2] {
    let (groups, cells) = (intensity.groups(), intensity.cells());
    let mut out = [
        GroupField::zeros(groups, cells),
        GroupField::zeros(groups, cells),
    ];
    for g in 0..groups {
        for (m, o) in quadrature.ordinates().iter().enumerate() {
            let psi = intensity.angle(g, m);
            for (k, comp) in out.iter_mut().enumerate() {
                for (f, p) in comp.group_mut(g).iter_mut().zip(psi) {
                    *f += o.weight * o.omega[k] * p;
                }
            }
        }
    }
    out
}

/// State of the full-order model at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct FomState {
    pub time: f64,
    pub temperature: Vec<f64>,
    pub intensity: IntensityField,
    pub moments: MomentField,
}

/// Diagnostics of one full-order time step.
#[derive(Debug, Clone, PartialEq)]
pub struct FomStepReport {
    pub coupling: CouplingStats,
    pub energy_residual: f64,
    pub min_intensity: f64,
}

/// Full-order model: discrete-ordinates transport coupled to the material
/// energy balance.
#[derive(Debug, Clone)]
pub struct FomSolver {
    pub grid: PhaseSpaceGrid,
    pub material: Material,
    pub inflow: BoundaryInflow,
    pub options: CouplingOptions,
    sweeper: Sweeper,
}

impl FomSolver {
    pub fn new(
        grid: PhaseSpaceGrid,
        material: Material,
        inflow: BoundaryInflow,
        options: CouplingOptions,
    ) -> Result<Self> {
        if grid.groups.num_groups() != material.num_groups()
            || inflow.groups() != material.num_groups()
        {
            return Err(Error::Dimension(
                "group counts of grid, material and inflow differ".into(),
            ));
        }
        let sweeper = Sweeper::new(grid.mesh.clone(), grid.quadrature.clone());
        Ok(Self {
            grid,
            material,
            inflow,
            options,
            sweeper,
        })
    }

    pub fn sweeper(&self) -> &Sweeper {
        &self.sweeper
    }

    /// Material at `t0` everywhere with Planckian, isotropic radiation.
    pub fn initial_state(&self, t0: f64) -> Result<FomState> {
        if !(t0 > 0.0) {
            return Err(Error::Domain(format!(
                "initial temperature must be positive (got {t0})"
            )));
        }
        let mesh = &self.grid.mesh;
        let groups = self.material.num_groups();
        let cells = mesh.num_cells();
        let mut b = GroupField::zeros(groups, cells);
        for g in 0..groups {
            b.group_mut(g).fill(self.material.planck(t0, g));
        }
        let intensity = IntensityField::isotropic(self.grid.quadrature.len(), &b);
        let moments = angular_moments(
            &intensity,
            mesh,
            &self.grid.quadrature,
            self.material.constants.c,
        )?;
        Ok(FomState {
            time: 0.0,
            temperature: vec![t0; cells],
            intensity,
            moments,
        })
    }

    /// Advance one backward-Euler step.
    pub fn step(&self, state: &FomState, dt: f64) -> Result<(FomState, FomStepReport)> {
        let (next, _, report) = self.step_with_tallies(state, dt)?;
        Ok((next, report))
    }

    /// Advance and also return the full sweep tallies of the new time level.
    pub fn step_with_tallies(
        &self,
        state: &FomState,
        dt: f64,
    ) -> Result<(FomState, SweepTallies, FomStepReport)> {
        let c = self.material.constants.c;
        let mut op = TransportOperator::new(&self.sweeper, &self.inflow, &state.intensity, dt, c);
        let (temperature, (intensity, tallies), coupling) = solve_coupled_step(
            &mut op,
            &self.material,
            &state.temperature,
            &state.temperature,
            dt,
            &self.options,
        )?;
        let min_intensity = intensity.min();
        let next = FomState {
            time: state.time + dt,
            temperature,
            intensity,
            moments: tallies.moments.clone(),
        };
        let energy_residual = energy_balance_residual(
            &self.grid.mesh,
            self.material.eos.cv,
            (&state.temperature, &state.moments),
            (&next.temperature, &next.moments),
            dt,
        );
        Ok((
            next,
            tallies,
            FomStepReport {
                coupling,
                energy_residual,
                min_intensity,
            },
        ))
    }
}

impl FomSolver {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let material = cfg.material()?;
        let inflow = cfg.inflow(&material);
        Self::new(cfg.grid()?, material, inflow, cfg.coupling())
    }
}

/// Run the full-order model over the configured time grid and return every
/// state including the initial one.
pub fn run_fom(cfg: &RunConfig) -> Result<Vec<FomState>> {
    let solver = FomSolver::from_config(cfg)?;
    let mut states = vec![solver.initial_state(cfg.t0)?];
    for n in 1..=cfg.steps {
        let prev = states.last().expect("initial state");
        let (next, report) = solver.step(prev, cfg.dt).map_err(|e| e.at_step(n))?;
        log::debug!(
            "fom step {n}: {} iterations, energy residual {:.2e}",
            report.coupling.iterations,
            report.energy_residual
        );
        states.push(next);
    }
    Ok(states)
}

/// The transport sweep as a [`RadiationSolver`].
pub(crate) struct TransportOperator<'a> {
    sweeper: &'a Sweeper,
    inflow: &'a BoundaryInflow,
    prev_scaled: IntensityField,
    c: f64,
    inv_c_dt: f64,
    sigma: GroupField,
    zero_inflow: BoundaryInflow,
    source: GroupField,
}

impl<'a> TransportOperator<'a> {
    pub(crate) fn new(
        sweeper: &'a Sweeper,
        inflow: &'a BoundaryInflow,
        prev: &IntensityField,
        dt: f64,
        c: f64,
    ) -> Self {
        let inv_c_dt = 1.0 / (c * dt);
        Self {
            sweeper,
            inflow,
            prev_scaled: scaled_intensity(prev, inv_c_dt),
            c,
            inv_c_dt,
            sigma: GroupField::zeros(0, 0),
            zero_inflow: BoundaryInflow::vacuum(inflow.groups()),
            source: GroupField::zeros(0, 0),
        }
    }

    fn per_steradian(&mut self, emission: &GroupField) {
        self.source.clone_from(emission);
        self.source
            .as_mut_slice()
            .iter_mut()
            .for_each(|v| *v /= 4.0 * PI);
    }
}

impl RadiationSolver for TransportOperator<'_> {
    type Output = (IntensityField, SweepTallies);

    fn freeze(&mut self, coefficients: &FrozenCoefficients) -> Result<()> {
        self.sigma.clone_from(&coefficients.kappa);
        let inv = self.inv_c_dt;
        self.sigma.as_mut_slice().iter_mut().for_each(|s| *s += inv);
        Ok(())
    }

    fn solve(&mut self, emission: &GroupField) -> Result<Self::Output> {
        self.per_steradian(emission);
        self.sweeper.sweep_full(
            &self.sigma,
            &self.source,
            Some(&self.prev_scaled),
            self.inflow,
            self.c,
        )
    }

    fn solve_homogeneous(&mut self, emission: &GroupField, energy: &mut GroupField) -> Result<()> {
        self.per_steradian(emission);
        self.sweeper.sweep_energy(
            &self.sigma,
            &self.source,
            None,
            &self.zero_inflow,
            self.c,
            energy,
        )
    }

    fn energy<'o>(&self, output: &'o Self::Output) -> &'o GroupField {
        &output.1.moments.energy
    }
}

/// Relative global energy imbalance of a backward-Euler step: change of
/// radiation plus material energy plus net outflow times `dt`, divided by
/// the total energy after the step.
pub fn energy_balance_residual(
    mesh: &SpatialMesh,
    cv: f64,
    before: (&[f64], &MomentField),
    after: (&[f64], &MomentField),
    dt: f64,
) -> f64 {
    let v = mesh.cell_volume();
    let total = |t: &[f64], m: &MomentField| -> f64 {
        let e = m.total_energy();
        v * t.iter().zip(&e).map(|(t, e)| cv * t + e).sum::<f64>()
    };
    let e0 = total(before.0, before.1);
    let e1 = total(after.0, after.1);
    let outflow = after.1.boundary_outflow(mesh);
    (e1 - e0 + dt * outflow).abs() / e1.abs().max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FrequencyGrid;
    use crate::physics::{LinearEos, OpacityModel, PhysicalConstants};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fc_material() -> Material {
        let k = PhysicalConstants::default();
        Material::new(
            k,
            FrequencyGrid::fleck_cummings(),
            OpacityModel::FleckCummings,
            LinearEos::scaled(0.5917, k.a_r, 1.0),
        )
    }

    fn small_grid(nx: usize, ny: usize) -> PhaseSpaceGrid {
        PhaseSpaceGrid {
            mesh: SpatialMesh::new(nx, ny, 6.0, 6.0).unwrap(),
            quadrature: AngularQuadrature::product(4, 8).unwrap(),
            groups: FrequencyGrid::fleck_cummings(),
        }
    }

    #[test]
    fn chord_with_unit_optical_depth() {
        // beam along x through a unit cell: sigma * dx = 1, no inflow, q/sigma = 1
        let (out_x, _, _) = characteristic_cell(1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0);
        assert_relative_eq!(out_x, 1.0 - (-1.0_f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(out_x, 0.632_120_558_828_557_7, max_relative = 1e-14);
    }

    #[test]
    fn chord_factor_series_matches_closed_form() {
        for &z in &[9.9e-3, 5e-3, 1e-3] {
            let (e, m, p, q) = chord_factors(z);
            let em1 = (-z).exp_m1();
            let p_direct = (z + em1) / (z * z);
            assert_relative_eq!(e, (-z).exp(), max_relative = 1e-15);
            assert_relative_eq!(m, -em1 / z, max_relative = 1e-14);
            assert_relative_eq!(p, p_direct, max_relative = 1e-10);
            assert_relative_eq!(q, 1.0 - 2.0 * p_direct, max_relative = 1e-8);
        }
    }

    /// Cell average by brute-force midpoint integration of the pointwise
    /// characteristic solution.
    #[allow(clippy::too_many_arguments)]
    fn brute_cell(
        sigma: f64,
        q: f64,
        px: f64,
        py: f64,
        a: f64,
        b: f64,
        dx: f64,
        dy: f64,
    ) -> (f64, f64, f64) {
        let point = |x: f64, y: f64| {
            let (s, inflow) = if x / a < y / b {
                (x / a, px)
            } else {
                (y / b, py)
            };
            let e = (-sigma * s).exp();
            q / sigma * (1.0 - e) + inflow * e
        };
        let n = 800;
        let (hx, hy) = (dx / n as f64, dy / n as f64);
        let mut avg = 0.0;
        for i in 0..n {
            let x = (i as f64 + 0.5) * hx;
            for j in 0..n {
                let y = (j as f64 + 0.5) * hy;
                avg += point(x, y);
            }
        }
        let nf = 200_000;
        let mut right = 0.0;
        let mut top = 0.0;
        for k in 0..nf {
            let t = (k as f64 + 0.5) / nf as f64;
            right += point(dx, t * dy) / nf as f64;
            top += point(t * dx, dy) / nf as f64;
        }
        (right, top, avg / (n * n) as f64)
    }

    #[test]
    fn cell_update_matches_brute_force_integration() {
        for &(sigma, a, b) in &[
            (0.7, 0.8, 0.3),
            (2.5, 0.2, 0.9),
            (0.05, 0.5, 0.5),
            (4.0, 0.6, 0.1),
        ] {
            let got = characteristic_cell(sigma, 1.3, 2.0, 0.4, a, b, 0.6, 0.9);
            let want = brute_cell(sigma, 1.3, 2.0, 0.4, a, b, 0.6, 0.9);
            assert_relative_eq!(got.0, want.0, max_relative = 1e-4);
            assert_relative_eq!(got.1, want.1, max_relative = 1e-4);
            assert_relative_eq!(got.2, want.2, max_relative = 1e-4);
        }
    }

    proptest! {
        #[test]
        fn cell_update_is_conservative_and_positive(
            sigma in 1e-6f64..1e3,
            q in 0.0f64..10.0,
            px in 0.0f64..10.0,
            py in 0.0f64..10.0,
            phi in 0.01f64..1.56,
            dx in 0.01f64..2.0,
            dy in 0.01f64..2.0,
        ) {
            let (a, b) = (phi.cos(), phi.sin());
            let (ox, oy, avg) = characteristic_cell(sigma, q, px, py, a, b, dx, dy);
            prop_assert!(ox >= 0.0 && oy >= 0.0 && avg >= 0.0);
            let v = dx * dy;
            let lhs = a * dy * (ox - px) + b * dx * (oy - py) + sigma * v * avg;
            let scale = q * v + a * dy * (ox + px) + b * dx * (oy + py) + 1e-300;
            prop_assert!((lhs - q * v).abs() <= 1e-12 * scale, "imbalance {}", (lhs - q * v) / scale);
        }
    }

    #[test]
    fn free_streaming_preserves_inflow() {
        let grid = small_grid(4, 3);
        let groups = 2;
        let cells = grid.mesh.num_cells();
        let kappa = GroupField::zeros(groups, cells);
        let q = GroupField::zeros(groups, cells);
        let prev = IntensityField::zeros(groups, grid.quadrature.len(), cells);
        let inflow = BoundaryInflow::from_sides(std::array::from_fn(|_| vec![3.0, 0.5])).unwrap();
        let i = sweep(
            &grid.mesh,
            &grid.quadrature,
            &kappa,
            &q,
            &prev,
            1e12,
            &inflow,
            SPEED,
        )
        .unwrap();
        for g in 0..groups {
            let want = [3.0, 0.5][g];
            for m in 0..grid.quadrature.len() {
                for v in i.angle(g, m) {
                    assert_relative_eq!(*v, want, max_relative = 1e-9);
                }
            }
        }
    }

    const SPEED: f64 = crate::physics::SPEED_OF_LIGHT;

    #[test]
    fn equilibrium_is_a_fixed_point_of_the_sweep() {
        let grid = small_grid(3, 4);
        let mat = fc_material();
        let t = 0.7;
        let groups = mat.num_groups();
        let cells = grid.mesh.num_cells();
        let mut kappa = GroupField::zeros(groups, cells);
        let mut q = GroupField::zeros(groups, cells);
        let mut b = GroupField::zeros(groups, cells);
        for g in 0..groups {
            let (k, bg) = (mat.group_opacity(t, g), mat.planck(t, g));
            kappa.group_mut(g).fill(k);
            q.group_mut(g).fill(k * bg);
            b.group_mut(g).fill(bg);
        }
        let prev = IntensityField::isotropic(grid.quadrature.len(), &b);
        let inflow = BoundaryInflow::planckian(&mat, [Some(t); 4]);
        let i = sweep(
            &grid.mesh,
            &grid.quadrature,
            &kappa,
            &q,
            &prev,
            0.02,
            &inflow,
            SPEED,
        )
        .unwrap();
        for g in 0..groups {
            for m in 0..grid.quadrature.len() {
                for v in i.angle(g, m) {
                    assert_relative_eq!(*v, b.get(g, 0), max_relative = 1e-12);
                }
            }
        }
        let mom = angular_moments(&i, &grid.mesh, &grid.quadrature, SPEED).unwrap();
        for g in 0..groups {
            for e in mom.energy.group(g) {
                assert_relative_eq!(*e, 4.0 * PI * b.get(g, 0) / SPEED, max_relative = 1e-12);
            }
        }
        let [fx, fy] = cell_fluxes(&i, &grid.quadrature);
        let scale = 4.0 * PI * b.as_slice().iter().cloned().fold(0.0, f64::max);
        assert!(fx
            .as_slice()
            .iter()
            .chain(fy.as_slice())
            .all(|f| f.abs() < 1e-13 * scale));
    }

    #[test]
    fn single_ordinate_beam_moments() {
        let grid = small_grid(2, 2);
        let cells = grid.mesh.num_cells();
        let m0 = 5;
        let mut i = IntensityField::zeros(1, grid.quadrature.len(), cells);
        i.angle_mut(0, m0).fill(2.5);
        let mom = angular_moments(&i, &grid.mesh, &grid.quadrature, SPEED).unwrap();
        let [fx, fy] = cell_fluxes(&i, &grid.quadrature);
        let o = grid.quadrature.get(m0).omega;
        for c in 0..cells {
            let ce = SPEED * mom.energy.get(0, c);
            assert_relative_eq!(fx.get(0, c) / ce, o[0], max_relative = 1e-14);
            assert_relative_eq!(fy.get(0, c) / ce, o[1], max_relative = 1e-14);
        }
    }

    proptest! {
        #[test]
        fn flux_never_exceeds_c_times_energy(values in proptest::collection::vec(0.0f64..5.0, 32 * 4)) {
            let grid = small_grid(2, 2);
            let mut i = IntensityField::zeros(1, 32, 4);
            for m in 0..32 {
                i.angle_mut(0, m).copy_from_slice(&values[m * 4..(m + 1) * 4]);
            }
            let mom = angular_moments(&i, &grid.mesh, &grid.quadrature, SPEED).unwrap();
            let [fx, fy] = cell_fluxes(&i, &grid.quadrature);
            for c in 0..4 {
                let f = fx.get(0, c).hypot(fy.get(0, c));
                prop_assert!(f <= SPEED * mom.energy.get(0, c) * (1.0 + 1e-14));
            }
        }
    }

    #[test]
    fn sweep_rejects_bad_input() {
        let grid = small_grid(2, 2);
        let kappa = GroupField::zeros(1, 4);
        let prev = IntensityField::zeros(1, grid.quadrature.len(), 4);
        let inflow = BoundaryInflow::vacuum(1);
        assert!(matches!(
            sweep(
                &grid.mesh,
                &grid.quadrature,
                &kappa,
                &kappa,
                &prev,
                0.0,
                &inflow,
                SPEED
            ),
            Err(Error::Domain(_))
        ));
        let neg = GroupField::filled(1, 4, -1.0);
        assert!(sweep(
            &grid.mesh,
            &grid.quadrature,
            &neg,
            &kappa,
            &prev,
            0.1,
            &inflow,
            SPEED
        )
        .is_err());
        assert!(BoundaryInflow::from_sides(std::array::from_fn(|_| vec![-1.0])).is_err());
    }

    #[test]
    fn asymmetric_previous_data_is_swept_in_full() {
        let grid = small_grid(3, 3);
        let cells = 9;
        let dirs = grid.quadrature.len();
        let kappa = GroupField::filled(1, cells, 0.3);
        let q = GroupField::zeros(1, cells);
        let mut prev = IntensityField::zeros(1, dirs, cells);
        // only upward-polar ordinates carry energy
        for m in 0..dirs {
            if grid.quadrature.get(m).omega[2] > 0.0 {
                prev.angle_mut(0, m).fill(1.0);
            }
        }
        let i = sweep(
            &grid.mesh,
            &grid.quadrature,
            &kappa,
            &q,
            &prev,
            0.05,
            &BoundaryInflow::vacuum(1),
            SPEED,
        )
        .unwrap();
        for m in 0..dirs {
            let up = grid.quadrature.get(m).omega[2] > 0.0;
            assert_eq!(i.angle(0, m).iter().all(|v| *v > 0.0), up);
        }
    }

    #[test]
    fn fom_equilibrium_is_stationary() {
        let mat = fc_material();
        let t = 1.0;
        let inflow = BoundaryInflow::planckian(&mat, [Some(t); 4]);
        let fom =
            FomSolver::new(small_grid(3, 3), mat, inflow, CouplingOptions::default()).unwrap();
        let mut state = fom.initial_state(t).unwrap();
        let e0 = state.moments.energy.clone();
        for _ in 0..3 {
            let (next, report) = fom.step(&state, 0.02).unwrap();
            assert!(report.energy_residual < 1e-12);
            state = next;
        }
        for v in &state.temperature {
            assert_relative_eq!(*v, t, max_relative = 1e-10);
        }
        for (a, b) in state.moments.energy.as_slice().iter().zip(e0.as_slice()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-10, epsilon = 1e-300);
        }
    }

    #[test]
    fn fom_heats_monotonically_and_conserves_energy() {
        let mat = fc_material();
        let inflow = BoundaryInflow::planckian(&mat, [Some(1.0), None, None, None]);
        let fom =
            FomSolver::new(small_grid(4, 4), mat, inflow, CouplingOptions::default()).unwrap();
        let mut state = fom.initial_state(1e-3).unwrap();
        for _ in 0..5 {
            let (next, report) = fom.step(&state, 0.1).unwrap();
            assert!(
                report.energy_residual < 1e-8,
                "residual {}",
                report.energy_residual
            );
            assert!(report.min_intensity >= 0.0);
            for (a, b) in next.temperature.iter().zip(&state.temperature) {
                assert!(a >= b);
            }
            state = next;
        }
        assert!(state.temperature[0] > 0.3);
    }
}
