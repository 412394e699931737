//! Field dumps (flat little-endian binary plus a JSON sidecar) and probe CSV.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tdse::field::Field;
use crate::tdse::lattice::LatticeSpec;
use crate::tdse::solver::ProbeRecord;
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DumpKind {
    /// One real |ψ|² per site.
    Density,
    /// Re, Im pairs per site.
    ComplexInterleaved,
}

/// Sidecar header describing a `.bin` dump. `shape` is `[ny, nx]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub shape: [usize; 2],
    pub spacing: f64,
    pub origin: Vec2,
    pub time: f64,
    pub kind: DumpKind,
}

/// Paths of a dump: `<stem>.bin` and `<stem>.json`.
pub fn dump_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

fn write_dump(stem: &Path, header: &DumpHeader, reals: impl Iterator<Item = f64>) -> Result<(PathBuf, PathBuf)> {
    let (bin, json) = dump_paths(stem);
    let bytes: Vec<u8> = reals.flat_map(f64::to_le_bytes).collect();
    fs::write(&bin, bytes)?;
    fs::write(&json, serde_json::to_string_pretty(header)?)?;
    Ok((bin, json))
}

/// Writes |ψ|² row-major (x fastest).
pub fn write_density(stem: &Path, field: &Field, origin: Vec2) -> Result<(PathBuf, PathBuf)> {
    let (nx, ny) = field.shape();
    let header = DumpHeader {
        shape: [ny, nx],
        spacing: field.spacing(),
        origin,
        time: field.time,
        kind: DumpKind::Density,
    };
    write_dump(stem, &header, field.values().iter().map(|v| v.norm_sqr()))
}

/// Writes precomputed densities on the grid of `spec`.
pub fn write_density_values(stem: &Path, spec: &LatticeSpec, time: f64, density: &[f64]) -> Result<(PathBuf, PathBuf)> {
    if density.len() != spec.len() {
        return Err(Error::GridMismatch("density length differs from the grid".into()));
    }
    let header = DumpHeader {
        shape: [spec.ny, spec.nx],
        spacing: spec.spacing,
        origin: spec.origin,
        time,
        kind: DumpKind::Density,
    };
    write_dump(stem, &header, density.iter().copied())
}

/// Writes ψ as interleaved (Re, Im) pairs.
pub fn write_complex(stem: &Path, field: &Field, origin: Vec2) -> Result<(PathBuf, PathBuf)> {
    let (nx, ny) = field.shape();
    let header = DumpHeader {
        shape: [ny, nx],
        spacing: field.spacing(),
        origin,
        time: field.time,
        kind: DumpKind::ComplexInterleaved,
    };
    write_dump(stem, &header, field.values().iter().flat_map(|v| [v.re, v.im]))
}

/// Reads a dump back as its header and raw reals.
pub fn read_dump(stem: &Path) -> Result<(DumpHeader, Vec<f64>)> {
    let (bin, json) = dump_paths(stem);
    let header: DumpHeader = serde_json::from_str(&fs::read_to_string(json)?)?;
    let bytes = fs::read(bin)?;
    let per_site = match header.kind {
        DumpKind::Density => 1,
        DumpKind::ComplexInterleaved => 2,
    };
    let expected = header.shape[0] * header.shape[1] * per_site * 8;
    if bytes.len() != expected {
        return Err(Error::Data(format!(
            "dump holds {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let reals = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((header, reals))
}

/// Reads a complex dump into a field on `spec`.
pub fn read_complex(stem: &Path, spec: &LatticeSpec) -> Result<Field> {
    let (header, reals) = read_dump(stem)?;
    if header.kind != DumpKind::ComplexInterleaved {
        return Err(Error::Data("dump is not complex".into()));
    }
    if header.shape != [spec.ny, spec.nx] || header.spacing != spec.spacing {
        return Err(Error::GridMismatch("dump grid differs from the lattice".into()));
    }
    let values = reals.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    Field::from_values(spec, values, header.time)
}

/// Writes probe readings as `step,time,probe_name,value`.
pub fn write_probe_csv(path: &Path, records: &[ProbeRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["step", "time", "probe_name", "value"]).map_err(csv_err)?;
    for r in records {
        w.write_record([r.step.to_string(), r.time.to_string(), r.probe_name.clone(), r.value.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_probe_csv(path: &Path) -> Result<Vec<ProbeRecord>> {
    let mut rd = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = rd.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["step", "time", "probe_name", "value"] {
        return Err(Error::Data("unexpected probe CSV header".into()));
    }
    let mut out = vec![];
    for row in rd.records() {
        let row = row.map_err(csv_err)?;
        let num = |i: usize| row[i].parse::<f64>().map_err(|e| Error::Data(e.to_string()));
        out.push(ProbeRecord {
            step: row[0].parse().map_err(|e: std::num::ParseIntError| Error::Data(e.to_string()))?,
            time: num(1)?,
            probe_name: row[2].to_string(),
            value: num(3)?,
        });
    }
    Ok(out)
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
