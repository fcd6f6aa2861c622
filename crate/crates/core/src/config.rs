//! Run configuration and its text format.
//!
//! The grammar is line oriented: `[section]` headers, `key = value` pairs,
//! and `#` comments. Keys may be written fully qualified (`mesh.nx = 10`)
//! or inside a section (`[mesh]` then `nx = 10`). Every key has a default
//! taken from the Fleck-Cummings benchmark, so an empty file is a valid
//! configuration.
//!
//! | key | default |
//! |-----|---------|
//! | `mesh.nx`, `mesh.ny` | 20, 20 |
//! | `mesh.lx`, `mesh.ly` | 6.0, 6.0 cm |
//! | `quadrature.polar`, `quadrature.azimuthal` | 12, 12 |
//! | `groups.bounds` | 17 Fleck-Cummings upper edges, comma separated |
//! | `time.dt`, `time.steps` | 0.02 ns, 300 |
//! | `problem.t_in`, `problem.t0` | 1.0, 0.001 KeV |
//! | `problem.drive` | `left` (`left`, `right`, `bottom`, `top` or `none`) |
//! | `physics.c`, `physics.a_r` | 29.9792458, 0.01372 |
//! | `physics.cv_factor` | 0.5917 |
//! | `physics.opacity` | `fleck-cummings` or a constant in 1/cm |
//! | `solver.tol`, `solver.max_iter` | 1e-10, 200 |
//! | `model.kind` | `fld` (`p1`, `p13`, `fld`) |
//! | `output.dir` | `output` (overridden by `DDVEF_OUTPUT_DIR`) |
//! | `vef.consistency` | `false` |

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::coupling::CouplingOptions;
use crate::error::{Error, Result};
use crate::grid::{
    AngularQuadrature, FrequencyGrid, PhaseSpaceGrid, Side, SpatialMesh, FC_GROUP_BOUNDS,
};
use crate::physics::{
    LinearEos, Material, OpacityModel, PhysicalConstants, RADIATION_CONSTANT, SPEED_OF_LIGHT,
};
use crate::transport::BoundaryInflow;

pub const OUTPUT_DIR_ENV: &str = "DDVEF_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffusionModelKind {
    P1,
    P1Over3,
    Fld,
}

impl DiffusionModelKind {
    pub const ALL: [DiffusionModelKind; 3] = [Self::P1, Self::P1Over3, Self::Fld];

    pub fn name(self) -> &'static str {
        match self {
            Self::P1 => "p1",
            Self::P1Over3 => "p13",
            Self::Fld => "fld",
        }
    }
}

impl FromStr for DiffusionModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "p1" => Ok(Self::P1),
            "p13" | "p1/3" | "p1over3" => Ok(Self::P1Over3),
            "fld" => Ok(Self::Fld),
            other => Err(Error::Config(format!(
                "unknown diffusion model '{other}' (expected p1, p13 or fld)"
            ))),
        }
    }
}

impl std::fmt::Display for DiffusionModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub polar: usize,
    pub azimuthal: usize,
    pub group_bounds: Vec<f64>,
    pub dt: f64,
    pub steps: usize,
    pub t_in: f64,
    pub t0: f64,
    pub drive: Option<Side>,
    pub c: f64,
    pub a_r: f64,
    pub cv_factor: f64,
    pub opacity: OpacityModel,
    pub tol: f64,
    pub max_iter: usize,
    pub model: DiffusionModelKind,
    pub output_dir: PathBuf,
    pub vef_consistency: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            nx: 20,
            ny: 20,
            lx: 6.0,
            ly: 6.0,
            polar: 12,
            azimuthal: 12,
            group_bounds: FC_GROUP_BOUNDS.to_vec(),
            dt: 0.02,
            steps: 300,
            t_in: 1.0,
            t0: 1e-3,
            drive: Some(Side::Left),
            c: SPEED_OF_LIGHT,
            a_r: RADIATION_CONSTANT,
            cv_factor: 0.5917,
            opacity: OpacityModel::FleckCummings,
            tol: 1e-10,
            max_iter: 200,
            model: DiffusionModelKind::Fld,
            output_dir: PathBuf::from("output"),
            vef_consistency: false,
        }
    }
}

impl RunConfig {
    /// The reduced benchmark used by the test suite: 10x10 cells, 72
    /// directions, 60 steps of 0.1 ns.
    pub fn ci_scale() -> Self {
        Self {
            nx: 10,
            ny: 10,
            polar: 6,
            azimuthal: 12,
            dt: 0.1,
            steps: 60,
            ..Self::default()
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section = String::new();
        let mut lines: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!("unterminated section header '{line}'"),
                })?;
                section = name.trim().to_string();
                if section.is_empty() || section.contains(char::is_whitespace) {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("invalid section name '{name}'"),
                    });
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected 'key = value', found '{line}'"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: "missing key".into(),
                });
            }
            let full = if key.contains('.') || section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            lines.insert(full.clone(), line_no);
            cfg.set(&full, value).map_err(|e| Error::Parse {
                line: line_no,
                message: match e {
                    Error::Config(m) => m,
                    other => other.to_string(),
                },
            })?;
        }
        cfg.check().map_err(|(key, message)| Error::Parse {
            line: lines.get(key).copied().unwrap_or(0),
            message,
        })?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "mesh.nx" => self.nx = parse_value(key, value)?,
            "mesh.ny" => self.ny = parse_value(key, value)?,
            "mesh.lx" => self.lx = parse_value(key, value)?,
            "mesh.ly" => self.ly = parse_value(key, value)?,
            "quadrature.polar" => self.polar = parse_value(key, value)?,
            "quadrature.azimuthal" => self.azimuthal = parse_value(key, value)?,
            "groups.bounds" => {
                self.group_bounds = value
                    .split(',')
                    .map(|v| parse_value::<f64>(key, v.trim()))
                    .collect::<Result<_>>()?
            }
            "time.dt" => self.dt = parse_value(key, value)?,
            "time.steps" => self.steps = parse_value(key, value)?,
            "problem.t_in" => self.t_in = parse_value(key, value)?,
            "problem.t0" => self.t0 = parse_value(key, value)?,
            "problem.drive" => {
                self.drive = match value.to_ascii_lowercase().as_str() {
                    "left" => Some(Side::Left),
                    "right" => Some(Side::Right),
                    "bottom" => Some(Side::Bottom),
                    "top" => Some(Side::Top),
                    "none" => None,
                    other => {
                        return Err(Error::Config(format!("invalid value '{other}' for {key}")))
                    }
                }
            }
            "physics.c" => self.c = parse_value(key, value)?,
            "physics.a_r" => self.a_r = parse_value(key, value)?,
            "physics.cv_factor" => self.cv_factor = parse_value(key, value)?,
            "physics.opacity" => {
                self.opacity = if value.eq_ignore_ascii_case("fleck-cummings") {
                    OpacityModel::FleckCummings
                } else {
                    OpacityModel::Constant(parse_value(key, value)?)
                }
            }
            "solver.tol" => self.tol = parse_value(key, value)?,
            "solver.max_iter" => self.max_iter = parse_value(key, value)?,
            "model.kind" => self.model = value.parse()?,
            "output.dir" => self.output_dir = PathBuf::from(value),
            "vef.consistency" => self.vef_consistency = parse_value(key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|(_, m)| Error::Config(m))
    }

    /// Invariant check reporting the offending key.
    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        let positive = [
            ("mesh.lx", self.lx),
            ("mesh.ly", self.ly),
            ("time.dt", self.dt),
            ("problem.t_in", self.t_in),
            ("problem.t0", self.t0),
            ("physics.c", self.c),
            ("physics.a_r", self.a_r),
            ("physics.cv_factor", self.cv_factor),
            ("solver.tol", self.tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err((name, format!("{name} must be positive (got {v})")));
            }
        }
        let counts = [
            ("mesh.nx", self.nx),
            ("mesh.ny", self.ny),
            ("time.steps", self.steps),
            ("solver.max_iter", self.max_iter),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err((name, format!("{name} must be at least 1")));
            }
        }
        if let OpacityModel::Constant(k) = self.opacity {
            if !(k >= 0.0 && k.is_finite()) {
                return Err((
                    "physics.opacity",
                    format!("constant opacity must be nonnegative (got {k})"),
                ));
            }
        }
        if let Err(e) = AngularQuadrature::product(self.polar, self.azimuthal) {
            let key = if self.polar < 2 || !self.polar.is_multiple_of(2) {
                "quadrature.polar"
            } else {
                "quadrature.azimuthal"
            };
            return Err((key, e.to_string()));
        }
        if let Err(e) = FrequencyGrid::new(&self.group_bounds) {
            return Err(("groups.bounds", e.to_string()));
        }
        Ok(())
    }

    /// Output directory with the environment override applied.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }

    pub fn mesh(&self) -> Result<SpatialMesh> {
        SpatialMesh::new(self.nx, self.ny, self.lx, self.ly)
    }

    pub fn quadrature(&self) -> Result<AngularQuadrature> {
        AngularQuadrature::product(self.polar, self.azimuthal)
    }

    pub fn frequency_grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::new(&self.group_bounds)
    }

    pub fn grid(&self) -> Result<PhaseSpaceGrid> {
        Ok(PhaseSpaceGrid {
            mesh: self.mesh()?,
            quadrature: self.quadrature()?,
            groups: self.frequency_grid()?,
        })
    }

    pub fn material(&self) -> Result<Material> {
        Ok(Material::new(
            PhysicalConstants {
                c: self.c,
                a_r: self.a_r,
            },
            self.frequency_grid()?,
            self.opacity,
            LinearEos::scaled(self.cv_factor, self.a_r, self.t_in),
        ))
    }

    pub fn inflow(&self, material: &Material) -> BoundaryInflow {
        let mut temps = [None; 4];
        if let Some(side) = self.drive {
            temps[side.index()] = Some(self.t_in);
        }
        BoundaryInflow::planckian(material, temps)
    }

    pub fn coupling(&self) -> CouplingOptions {
        CouplingOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            ..CouplingOptions::default()
        }
    }

    /// `t^n = n dt` for `n = 0..=steps`.
    pub fn time_grid(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| n as f64 * self.dt).collect()
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_benchmark_defaults() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!((cfg.nx, cfg.ny, cfg.steps), (20, 20, 300));
        assert_eq!(cfg.group_bounds.len(), 17);
        assert_eq!(cfg.dt, 0.02);
        assert_eq!((cfg.t_in, cfg.t0), (1.0, 1e-3));
        assert_eq!(cfg.polar * cfg.azimuthal, 144);
    }

    #[test]
    fn overrides_and_sections() {
        let cfg = RunConfig::parse(
            "# comment\nmesh.nx = 10\n[time]\nsteps = 5 # trailing\n[physics]\nopacity = 2.5\n[model]\nkind = p13\n",
        )
        .unwrap();
        assert_eq!(cfg.nx, 10);
        assert_eq!(cfg.ny, 20);
        assert_eq!(cfg.steps, 5);
        assert_eq!(cfg.opacity, OpacityModel::Constant(2.5));
        assert_eq!(cfg.model, DiffusionModelKind::P1Over3);
    }

    #[test]
    fn zero_steps_is_rejected() {
        assert!(matches!(
            RunConfig::parse("# x\ntime.steps = 0"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn errors_carry_line_numbers() {
        match RunConfig::parse("mesh.nx = 4\n\nmesh.bogus = 1\n") {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("unknown key"));
            }
            other => panic!("unexpected {other:?}"),
        }
        match RunConfig::parse("mesh.nx = ten") {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            RunConfig::parse("[mesh\nnx=1"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            RunConfig::parse("just words"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn invalid_quadrature_is_rejected() {
        assert!(RunConfig::parse("quadrature.polar = 3").is_err());
    }

    #[test]
    fn model_names_round_trip() {
        for kind in DiffusionModelKind::ALL {
            assert_eq!(kind.name().parse::<DiffusionModelKind>().unwrap(), kind);
        }
        assert!("p2".parse::<DiffusionModelKind>().is_err());
    }
}
