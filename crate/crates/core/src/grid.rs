//! Phase-space discretization: uniform orthogonal spatial mesh, product
//! angular quadrature on the unit sphere, and frequency groups.
//!
//! Cells are numbered row-major, `cell = i + j * nx`, with `i` along x and
//! `j` along y. Faces normal to x ("x-faces") are numbered
//! `i + j * (nx + 1)` for `i in 0..=nx`; faces normal to y are numbered
//! `i + j * nx` for `j in 0..=ny`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Upper group boundaries [KeV] of the 17-group structure used by the
/// Fleck-Cummings benchmark.
pub const FC_GROUP_BOUNDS: [f64; 17] = [
    0.7075, 1.415, 2.123, 2.830, 3.538, 4.245, 5.129, 6.014, 6.898, 7.783, 8.667, 9.551, 10.44,
    11.32, 12.20, 13.09, 1.0e7,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    /// Outward unit normal (x, y).
    pub fn normal(self) -> (f64, f64) {
        match self {
            Side::Left => (-1.0, 0.0),
            Side::Right => (1.0, 0.0),
            Side::Bottom => (0.0, -1.0),
            Side::Top => (0.0, 1.0),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// A face on the domain boundary together with the cell it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub side: Side,
    pub cell: usize,
    /// Index into the x-face or y-face numbering.
    pub face: usize,
    /// Face length [cm].
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMesh {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub dx: f64,
    pub dy: f64,
    boundary: Vec<BoundaryFace>,
}

impl SpatialMesh {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Config(format!(
                "mesh cell counts must be positive (nx = {nx}, ny = {ny})"
            )));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::Config(format!(
                "mesh extents must be positive and finite (lx = {lx}, ly = {ly})"
            )));
        }
        let dx = lx / nx as f64;
        let dy = ly / ny as f64;
        let mut boundary = Vec::with_capacity(2 * (nx + ny));
        for j in 0..ny {
            boundary.push(BoundaryFace {
                side: Side::Left,
                cell: j * nx,
                face: j * (nx + 1),
                area: dy,
            });
        }
        for j in 0..ny {
            boundary.push(BoundaryFace {
                side: Side::Right,
                cell: nx - 1 + j * nx,
                face: nx + j * (nx + 1),
                area: dy,
            });
        }
        for i in 0..nx {
            boundary.push(BoundaryFace {
                side: Side::Bottom,
                cell: i,
                face: i,
                area: dx,
            });
        }
        for i in 0..nx {
            boundary.push(BoundaryFace {
                side: Side::Top,
                cell: i + (ny - 1) * nx,
                face: i + ny * nx,
                area: dx,
            });
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            dx,
            dy,
            boundary,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn num_x_faces(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn num_y_faces(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        i + j * self.nx
    }

    #[inline]
    pub fn x_face(&self, i: usize, j: usize) -> usize {
        i + j * (self.nx + 1)
    }

    #[inline]
    pub fn y_face(&self, i: usize, j: usize) -> usize {
        i + j * self.nx
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn cell_center(&self, cell: usize) -> (f64, f64) {
        let i = cell % self.nx;
        let j = cell / self.nx;
        ((i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy)
    }

    /// Cells adjacent to x-face `(i, j)`: `(left, right)`, either may be absent.
    pub fn x_face_cells(&self, i: usize, j: usize) -> (Option<usize>, Option<usize>) {
        let left = (i > 0).then(|| self.cell(i - 1, j));
        let right = (i < self.nx).then(|| self.cell(i, j));
        (left, right)
    }

    /// Cells adjacent to y-face `(i, j)`: `(below, above)`.
    pub fn y_face_cells(&self, i: usize, j: usize) -> (Option<usize>, Option<usize>) {
        let below = (j > 0).then(|| self.cell(i, j - 1));
        let above = (j < self.ny).then(|| self.cell(i, j));
        (below, above)
    }

    /// All boundary faces ordered left (bottom to top), right, bottom
    /// (left to right), top.
    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary
    }

    pub fn boundary_faces_on(&self, side: Side) -> impl Iterator<Item = (usize, &BoundaryFace)> {
        self.boundary
            .iter()
            .enumerate()
            .filter(move |(_, f)| f.side == side)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ordinate {
    pub omega: [f64; 3],
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngularQuadrature {
    ordinates: Vec<Ordinate>,
}

impl AngularQuadrature {
    /// Gauss-Legendre in the polar cosine times an equally weighted
    /// azimuthal rule with nodes at the midpoints of `n_azimuthal` sectors.
    pub fn product(n_polar: usize, n_azimuthal: usize) -> Result<Self> {
        if n_polar < 2 || !n_polar.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "polar order must be even and at least 2 (got {n_polar})"
            )));
        }
        if n_azimuthal < 4 || !n_azimuthal.is_multiple_of(4) {
            return Err(Error::Config(format!(
                "azimuthal order must be a positive multiple of 4 (got {n_azimuthal})"
            )));
        }
        let (mus, wmus) = gauss_legendre(n_polar);
        let dphi = 2.0 * PI / n_azimuthal as f64;
        let mut ordinates = Vec::with_capacity(n_polar * n_azimuthal);
        for (&mu, &wmu) in mus.iter().zip(&wmus) {
            let sin_theta = (1.0 - mu * mu).sqrt();
            for k in 0..n_azimuthal {
                let phi = (k as f64 + 0.5) * dphi;
                ordinates.push(Ordinate {
                    omega: [sin_theta * phi.cos(), sin_theta * phi.sin(), mu],
                    weight: wmu * dphi,
                });
            }
        }
        let quad = Self { ordinates };
        quad.check_moments()?;
        Ok(quad)
    }

    pub fn len(&self) -> usize {
        self.ordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordinates.is_empty()
    }

    pub fn ordinates(&self) -> &[Ordinate] {
        &self.ordinates
    }

    pub fn get(&self, m: usize) -> &Ordinate {
        &self.ordinates[m]
    }

    /// Zeroth, first and second moments of the weights.
    pub fn moments(&self) -> (f64, [f64; 3], [[f64; 3]; 3]) {
        let mut zeroth = 0.0;
        let mut first = [0.0; 3];
        let mut second = [[0.0; 3]; 3];
        for o in &self.ordinates {
            zeroth += o.weight;
            for a in 0..3 {
                first[a] += o.weight * o.omega[a];
                for b in 0..3 {
                    second[a][b] += o.weight * o.omega[a] * o.omega[b];
                }
            }
        }
        (zeroth, first, second)
    }

    fn check_moments(&self) -> Result<()> {
        let four_pi = 4.0 * PI;
        let (zeroth, first, second) = self.moments();
        let mut worst: f64 = ((zeroth - four_pi) / four_pi).abs();
        for a in 0..3 {
            worst = worst.max(first[a].abs());
            for b in 0..3 {
                let target = if a == b { four_pi / 3.0 } else { 0.0 };
                worst = worst.max((second[a][b] - target).abs());
            }
        }
        for o in &self.ordinates {
            let norm = o.omega.iter().map(|v| v * v).sum::<f64>().sqrt();
            worst = worst.max((norm - 1.0).abs());
        }
        if worst > 1e-12 {
            return Err(Error::Config(format!(
                "angular quadrature violates moment identities (worst deviation {worst:.3e})"
            )));
        }
        Ok(())
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    /// `G + 1` boundaries, the first being 0.
    bounds: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(upper_bounds: &[f64]) -> Result<Self> {
        if upper_bounds.is_empty() {
            return Err(Error::Config(
                "at least one frequency group is required".into(),
            ));
        }
        let mut bounds = Vec::with_capacity(upper_bounds.len() + 1);
        bounds.push(0.0);
        for &b in upper_bounds {
            let last = *bounds.last().unwrap();
            if !(b > last) || !b.is_finite() {
                return Err(Error::Config(format!(
                    "group boundaries must be finite and strictly increasing ({b} after {last})"
                )));
            }
            bounds.push(b);
        }
        Ok(Self { bounds })
    }

    pub fn fleck_cummings() -> Self {
        Self::new(&FC_GROUP_BOUNDS).expect("built-in group structure is valid")
    }

    pub fn num_groups(&self) -> usize {
        self.bounds.len() - 1
    }

    /// Group `g` (zero-based) spans `[lower, upper]`.
    pub fn group(&self, g: usize) -> (f64, f64) {
        (self.bounds[g], self.bounds[g + 1])
    }

    pub fn width(&self, g: usize) -> f64 {
        self.bounds[g + 1] - self.bounds[g]
    }

    pub fn center(&self, g: usize) -> f64 {
        0.5 * (self.bounds[g] + self.bounds[g + 1])
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.bounds[1..]
    }
}

/// The full discretization shared by every solver.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    pub mesh: SpatialMesh,
    pub quadrature: AngularQuadrature,
    pub groups: FrequencyGrid,
}
