//! Flat storage for group-indexed fields.

use crate::grid::SpatialMesh;

/// Values per (group, site), group-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupField {
    groups: usize,
    sites: usize,
    data: Vec<f64>,
}

impl GroupField {
    pub fn zeros(groups: usize, sites: usize) -> Self {
        Self {
            groups,
            sites,
            data: vec![0.0; groups * sites],
        }
    }

    pub fn from_vec(groups: usize, sites: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), groups * sites, "group field size mismatch");
        Self {
            groups,
            sites,
            data,
        }
    }

    pub fn filled(groups: usize, sites: usize, value: f64) -> Self {
        Self {
            groups,
            sites,
            data: vec![value; groups * sites],
        }
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn group(&self, g: usize) -> &[f64] {
        &self.data[g * self.sites..(g + 1) * self.sites]
    }

    pub fn group_mut(&mut self, g: usize) -> &mut [f64] {
        &mut self.data[g * self.sites..(g + 1) * self.sites]
    }

    #[inline]
    pub fn get(&self, g: usize, site: usize) -> f64 {
        self.data[g * self.sites + site]
    }

    #[inline]
    pub fn set(&mut self, g: usize, site: usize, v: f64) {
        self.data[g * self.sites + site] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Sum over groups at each site.
    pub fn group_sum(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.sites];
        for g in 0..self.groups {
            for (o, v) in out.iter_mut().zip(self.group(g)) {
                *o += v;
            }
        }
        out
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }
}

/// Group energy densities on cells and normal fluxes on faces.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentField {
    /// `E_g` [Jerk/cm^3] per cell.
    pub energy: GroupField,
    /// `e_x . F_g` [Jerk cm^-2 ns^-1] on x-faces.
    pub flux_x: GroupField,
    /// `e_y . F_g` on y-faces.
    pub flux_y: GroupField,
}

impl MomentField {
    pub fn zeros(mesh: &SpatialMesh, groups: usize) -> Self {
        Self {
            energy: GroupField::zeros(groups, mesh.num_cells()),
            flux_x: GroupField::zeros(groups, mesh.num_x_faces()),
            flux_y: GroupField::zeros(groups, mesh.num_y_faces()),
        }
    }

    pub fn groups(&self) -> usize {
        self.energy.groups()
    }

    pub fn total_energy(&self) -> Vec<f64> {
        self.energy.group_sum()
    }

    /// Cell-centered flux vector of group `g`: average of the two faces in
    /// each direction.
    pub fn cell_flux(&self, mesh: &SpatialMesh, g: usize) -> Vec<[f64; 2]> {
        let fx = self.flux_x.group(g);
        let fy = self.flux_y.group(g);
        (0..mesh.num_cells())
            .map(|c| {
                let (i, j) = (c % mesh.nx, c / mesh.nx);
                [
                    0.5 * (fx[mesh.x_face(i, j)] + fx[mesh.x_face(i + 1, j)]),
                    0.5 * (fy[mesh.y_face(i, j)] + fy[mesh.y_face(i, j + 1)]),
                ]
            })
            .collect()
    }

    /// Net energy leaving the domain per unit time, `sum_b A_b n.F`.
    pub fn boundary_outflow(&self, mesh: &SpatialMesh) -> f64 {
        let mut total = 0.0;
        for g in 0..self.groups() {
            total += group_boundary_outflow(mesh, self.flux_x.group(g), self.flux_y.group(g));
        }
        total
    }
}

pub(crate) fn group_boundary_outflow(mesh: &SpatialMesh, fx: &[f64], fy: &[f64]) -> f64 {
    mesh.boundary_faces()
        .iter()
        .map(|f| {
            let (nx, ny) = f.side.normal();
            let fnorm = if nx != 0.0 {
                nx * fx[f.face]
            } else {
                ny * fy[f.face]
            };
            f.area * fnorm
        })
        .sum()
}

/// Cell-average specific intensity per (group, direction, cell).
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityField {
    groups: usize,
    directions: usize,
    cells: usize,
    data: Vec<f64>,
}

impl IntensityField {
    pub fn zeros(groups: usize, directions: usize, cells: usize) -> Self {
        Self {
            groups,
            directions,
            cells,
            data: vec![0.0; groups * directions * cells],
        }
    }

    /// Isotropic field with value `values[g][cell]` in every direction.
    pub fn isotropic(directions: usize, values: &GroupField) -> Self {
        let (groups, cells) = (values.groups(), values.sites());
        let mut out = Self::zeros(groups, directions, cells);
        for g in 0..groups {
            for m in 0..directions {
                out.angle_mut(g, m).copy_from_slice(values.group(g));
            }
        }
        out
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn directions(&self) -> usize {
        self.directions
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn angle(&self, g: usize, m: usize) -> &[f64] {
        let start = (g * self.directions + m) * self.cells;
        &self.data[start..start + self.cells]
    }

    pub fn angle_mut(&mut self, g: usize, m: usize) -> &mut [f64] {
        let start = (g * self.directions + m) * self.cells;
        &mut self.data[start..start + self.cells]
    }

    /// All directions of group `g`, direction-major.
    pub fn group(&self, g: usize) -> &[f64] {
        let n = self.directions * self.cells;
        &self.data[g * n..(g + 1) * n]
    }

    pub fn group_mut(&mut self, g: usize) -> &mut [f64] {
        let n = self.directions * self.cells;
        &mut self.data[g * n..(g + 1) * n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
