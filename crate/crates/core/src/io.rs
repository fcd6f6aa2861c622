//! Binary dataset files.
//!
//! A file is a sequence of records. Each record is
//!
//! ```text
//! magic      6 bytes  "DDVEF1"
//! version    u32
//! kind       u32      see FieldKind
//! nx, ny     u64
//! groups     u64
//! levels     u64      number of time levels N
//! components u64
//! times      N x f64
//! payload    N x groups x components x sites x f64
//! ```
//!
//! with every number little-endian. The payload is time-major, then group,
//! then component, then site. Sites are row-major cells for cell fields,
//! `(nx + 1) x ny` x-faces and `nx x (ny + 1)` y-faces for face fields and
//! the boundary faces in mesh order for boundary fields.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::diffusion::TemperatureDataset;
use crate::error::{Error, Result};
use crate::fields::{GroupField, MomentField};
use crate::grid::SpatialMesh;
use crate::moments::{LoClosure, LoState};
use crate::vef::ClosureDataset;

pub const MAGIC: &[u8; 6] = b"DDVEF1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Temperature = 1,
    Energy = 2,
    FluxX = 3,
    FluxY = 4,
    /// `f_xx, f_xy, f_yy` per cell.
    Eddington = 5,
    BoundaryFactor = 6,
    CorrectionX = 7,
    CorrectionY = 8,
}

impl FieldKind {
    fn from_tag(tag: u32) -> Result<Self> {
        Ok(match tag {
            1 => Self::Temperature,
            2 => Self::Energy,
            3 => Self::FluxX,
            4 => Self::FluxY,
            5 => Self::Eddington,
            6 => Self::BoundaryFactor,
            7 => Self::CorrectionX,
            8 => Self::CorrectionY,
            other => return Err(Error::Format(format!("unknown field kind {other}"))),
        })
    }

    /// Number of sites per component on an `nx x ny` mesh.
    pub fn sites(self, nx: usize, ny: usize) -> usize {
        match self {
            Self::Temperature | Self::Energy | Self::Eddington => nx * ny,
            Self::FluxX | Self::CorrectionX => (nx + 1) * ny,
            Self::FluxY | Self::CorrectionY => nx * (ny + 1),
            Self::BoundaryFactor => 2 * (nx + ny),
        }
    }
}

/// One record: a field history on a fixed mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRecord {
    pub kind: FieldKind,
    pub nx: usize,
    pub ny: usize,
    pub groups: usize,
    pub components: usize,
    pub times: Vec<f64>,
    pub data: Vec<f64>,
}

impl FieldRecord {
    fn level_len(&self) -> usize {
        self.groups * self.components * self.kind.sites(self.nx, self.ny)
    }

    fn check(&self) -> Result<()> {
        if self.data.len() != self.times.len() * self.level_len() {
            return Err(Error::Format(format!(
                "{:?} record holds {} values, expected {}",
                self.kind,
                self.data.len(),
                self.times.len() * self.level_len()
            )));
        }
        Ok(())
    }

    /// Values of time level `n`.
    pub fn level(&self, n: usize) -> &[f64] {
        let len = self.level_len();
        &self.data[n * len..(n + 1) * len]
    }

    /// Component `k` of time level `n` as a group field.
    pub fn group_field(&self, n: usize, k: usize) -> GroupField {
        let sites = self.kind.sites(self.nx, self.ny);
        let level = self.level(n);
        let mut out = GroupField::zeros(self.groups, sites);
        for g in 0..self.groups {
            let start = (g * self.components + k) * sites;
            out.group_mut(g)
                .copy_from_slice(&level[start..start + sites]);
        }
        out
    }

    fn from_levels(
        kind: FieldKind,
        nx: usize,
        ny: usize,
        times: Vec<f64>,
        levels: &[Vec<&GroupField>],
    ) -> Self {
        let components = levels.first().map_or(1, Vec::len);
        let groups = levels
            .first()
            .and_then(|l| l.first())
            .map_or(0, |f| f.groups());
        let mut data = Vec::new();
        for level in levels {
            for g in 0..groups {
                for comp in level {
                    data.extend_from_slice(comp.group(g));
                }
            }
        }
        Self {
            kind,
            nx,
            ny,
            groups,
            components,
            times,
            data,
        }
    }
}

fn put_u32(out: &mut impl Write, v: u32) -> Result<()> {
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_u64(out: &mut impl Write, v: usize) -> Result<()> {
    out.write_all(&(v as u64).to_le_bytes())?;
    Ok(())
}

/// Serialize records to a writer.
pub fn write_records<W: Write>(mut out: W, records: &[FieldRecord]) -> Result<()> {
    for r in records {
        r.check()?;
        out.write_all(MAGIC)?;
        put_u32(&mut out, VERSION)?;
        put_u32(&mut out, r.kind as u32)?;
        for v in [r.nx, r.ny, r.groups, r.times.len(), r.components] {
            put_u64(&mut out, v)?;
        }
        for v in r.times.iter().chain(&r.data) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn take<const N: usize>(input: &mut impl Read, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated {what}")),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

fn take_u64(input: &mut impl Read, what: &str) -> Result<usize> {
    let v = u64::from_le_bytes(take::<8>(input, what)?);
    usize::try_from(v).map_err(|_| Error::Format(format!("{what} out of range")))
}

fn take_f64s(input: &mut impl Read, n: usize, what: &str) -> Result<Vec<f64>> {
    let mut bytes = vec![
        0u8;
        n.checked_mul(8)
            .ok_or_else(|| Error::Format(format!("{what} too large")))?
    ];
    input.read_exact(&mut bytes).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated {what}")),
        _ => Error::Io(e),
    })?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

/// Read every record from a reader.
pub fn read_records<R: Read>(input: R) -> Result<Vec<FieldRecord>> {
    let mut input = BufReader::new(input);
    let mut records = Vec::new();
    loop {
        let mut first = [0u8; 1];
        if input.read(&mut first)? == 0 {
            break;
        }
        let rest = take::<5>(&mut input, "record header")?;
        if first[0] != MAGIC[0] || rest != MAGIC[1..] {
            return Err(Error::Format("bad magic, not a DDVEF1 dataset".into()));
        }
        let version = u32::from_le_bytes(take::<4>(&mut input, "record header")?);
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported format version {version}"
            )));
        }
        let kind =
            FieldKind::from_tag(u32::from_le_bytes(take::<4>(&mut input, "record header")?))?;
        let nx = take_u64(&mut input, "record header")?;
        let ny = take_u64(&mut input, "record header")?;
        let groups = take_u64(&mut input, "record header")?;
        let levels = take_u64(&mut input, "record header")?;
        let components = take_u64(&mut input, "record header")?;
        let times = take_f64s(&mut input, levels, "time grid")?;
        let len = levels
            .checked_mul(groups)
            .and_then(|v| v.checked_mul(components))
            .and_then(|v| v.checked_mul(kind.sites(nx, ny)))
            .ok_or_else(|| Error::Format("payload size overflows".into()))?;
        let data = take_f64s(&mut input, len, "payload")?;
        records.push(FieldRecord {
            kind,
            nx,
            ny,
            groups,
            components,
            times,
            data,
        });
    }
    Ok(records)
}

pub fn write_file(path: &Path, records: &[FieldRecord]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_records(BufWriter::new(File::create(path)?), records)
}

pub fn read_file(path: &Path) -> Result<Vec<FieldRecord>> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    read_records(file)
}

fn find(records: &[FieldRecord], kind: FieldKind) -> Result<&FieldRecord> {
    records
        .iter()
        .find(|r| r.kind == kind)
        .ok_or_else(|| Error::Format(format!("dataset has no {kind:?} record")))
}

/// Temperature history as one record.
pub fn temperature_records(data: &TemperatureDataset) -> Vec<FieldRecord> {
    let cells = data.nx * data.ny;
    let fields: Vec<GroupField> = data
        .temperatures
        .iter()
        .map(|t| GroupField::from_vec(1, cells, t.clone()))
        .collect();
    let levels: Vec<Vec<&GroupField>> = fields.iter().map(|f| vec![f]).collect();
    vec![FieldRecord::from_levels(
        FieldKind::Temperature,
        data.nx,
        data.ny,
        data.times.clone(),
        &levels,
    )]
}

pub fn temperature_from_records(records: &[FieldRecord]) -> Result<TemperatureDataset> {
    let r = find(records, FieldKind::Temperature)?;
    Ok(TemperatureDataset {
        nx: r.nx,
        ny: r.ny,
        times: r.times.clone(),
        temperatures: (0..r.times.len()).map(|n| r.level(n).to_vec()).collect(),
    })
}

/// Solution history: temperature, energy and face fluxes.
pub fn history_records(mesh: &SpatialMesh, states: &[LoState]) -> Vec<FieldRecord> {
    let times: Vec<f64> = states.iter().map(|s| s.time).collect();
    let mut out = temperature_records(&TemperatureDataset::from_states(mesh, states));
    let pick = |f: fn(&MomentField) -> &GroupField| -> Vec<Vec<&GroupField>> {
        states.iter().map(|s| vec![f(&s.moments)]).collect()
    };
    out.push(FieldRecord::from_levels(
        FieldKind::Energy,
        mesh.nx,
        mesh.ny,
        times.clone(),
        &pick(|m| &m.energy),
    ));
    out.push(FieldRecord::from_levels(
        FieldKind::FluxX,
        mesh.nx,
        mesh.ny,
        times.clone(),
        &pick(|m| &m.flux_x),
    ));
    out.push(FieldRecord::from_levels(
        FieldKind::FluxY,
        mesh.nx,
        mesh.ny,
        times,
        &pick(|m| &m.flux_y),
    ));
    out
}

pub fn history_from_records(records: &[FieldRecord]) -> Result<(SpatialMeshDims, Vec<LoState>)> {
    let t = temperature_from_records(records)?;
    let e = find(records, FieldKind::Energy)?;
    let fx = find(records, FieldKind::FluxX)?;
    let fy = find(records, FieldKind::FluxY)?;
    for r in [e, fx, fy] {
        if (r.nx, r.ny) != (t.nx, t.ny) || r.times != t.times {
            return Err(Error::Format(
                "history records disagree on mesh or time grid".into(),
            ));
        }
    }
    if fx.groups != e.groups || fy.groups != e.groups {
        return Err(Error::Format(
            "history records disagree on group count".into(),
        ));
    }
    let states = (0..t.times.len())
        .map(|n| LoState {
            time: t.times[n],
            temperature: t.temperatures[n].clone(),
            moments: MomentField {
                energy: e.group_field(n, 0),
                flux_x: fx.group_field(n, 0),
                flux_y: fy.group_field(n, 0),
            },
        })
        .collect();
    Ok((SpatialMeshDims { nx: t.nx, ny: t.ny }, states))
}

/// Cell counts stored in a dataset header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpatialMeshDims {
    pub nx: usize,
    pub ny: usize,
}

/// Closure dataset: Eddington tensor, boundary factors and, when present,
/// face consistency coefficients.
pub fn closure_records(data: &ClosureDataset) -> Vec<FieldRecord> {
    let (nx, ny) = (data.nx, data.ny);
    let tensor: Vec<Vec<&GroupField>> = data
        .records
        .iter()
        .map(|r| r.tensor.iter().collect())
        .collect();
    let factor: Vec<Vec<&GroupField>> = data
        .records
        .iter()
        .map(|r| vec![&r.boundary_factor])
        .collect();
    let mut out = vec![
        FieldRecord::from_levels(FieldKind::Eddington, nx, ny, data.times.clone(), &tensor),
        FieldRecord::from_levels(
            FieldKind::BoundaryFactor,
            nx,
            ny,
            data.times.clone(),
            &factor,
        ),
    ];
    if data.records.iter().all(|r| r.correction.is_some()) && !data.records.is_empty() {
        for (k, kind) in [FieldKind::CorrectionX, FieldKind::CorrectionY]
            .into_iter()
            .enumerate()
        {
            let levels: Vec<Vec<&GroupField>> = data
                .records
                .iter()
                .map(|r| vec![&r.correction.as_ref().expect("checked")[k]])
                .collect();
            out.push(FieldRecord::from_levels(
                kind,
                nx,
                ny,
                data.times.clone(),
                &levels,
            ));
        }
    }
    out
}

pub fn closure_from_records(records: &[FieldRecord]) -> Result<ClosureDataset> {
    let f = find(records, FieldKind::Eddington)?;
    let c = find(records, FieldKind::BoundaryFactor)?;
    if f.components != 3 || c.components != 1 {
        return Err(Error::Format(
            "closure records have the wrong component counts".into(),
        ));
    }
    if (c.nx, c.ny, c.groups) != (f.nx, f.ny, f.groups) || c.times != f.times {
        return Err(Error::Format(
            "closure records disagree on mesh, groups or time grid".into(),
        ));
    }
    let corr = match (
        records.iter().find(|r| r.kind == FieldKind::CorrectionX),
        records.iter().find(|r| r.kind == FieldKind::CorrectionY),
    ) {
        (Some(x), Some(y)) => Some((x, y)),
        (None, None) => None,
        _ => {
            return Err(Error::Format(
                "closure has only one correction record".into(),
            ))
        }
    };
    let levels = (0..f.times.len())
        .map(|n| LoClosure {
            tensor: std::array::from_fn(|k| f.group_field(n, k)),
            boundary_factor: c.group_field(n, 0),
            correction: corr.map(|(x, y)| [x.group_field(n, 0), y.group_field(n, 0)]),
        })
        .collect();
    Ok(ClosureDataset {
        nx: f.nx,
        ny: f.ny,
        times: f.times.clone(),
        records: levels,
    })
}
