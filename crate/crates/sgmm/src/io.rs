//! Data-matrix file formats.
//!
//! Two formats are supported and detected automatically when reading:
//!
//! * CSV: header row `d0,...,d{D-1}` (plus a final `weight` column for
//!   weighted data), one datapoint per line, decimal floats. Floats are
//!   written shortest-round-trip, so a read-back is lossless.
//! * Binary (`.bin` / `.sgmm`): magic `SGMM`, version u16, flags u16 (bit 0:
//!   weights present), point count u64, dimension u32, row-major f64
//!   little-endian values, then the weights when flagged.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::data::DataMatrix;
use crate::error::{Result, SgmmError};

const MAGIC: &[u8; 4] = b"SGMM";
const VERSION: u16 = 1;
const FLAG_WEIGHTS: u16 = 1;

/// Writes a matrix in the format implied by the path extension (`.bin` or
/// `.sgmm` for binary, CSV otherwise).
pub fn write_data(path: &Path, data: &DataMatrix) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    if is_binary_path(path) {
        write_data_binary(&mut w, data)
    } else {
        write_data_csv(&mut w, data)
    }
}

/// Reads a matrix, sniffing the format from the leading magic bytes.
pub fn read_data(path: &Path) -> Result<DataMatrix> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        read_data_binary_body(&mut &bytes[MAGIC.len()..])
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| SgmmError::Format("CSV file is not valid UTF-8".into()))?;
        parse_data_csv(&text)
    }
}

fn is_binary_path(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("bin") | Some("sgmm")
    )
}

pub fn write_data_csv(w: &mut impl Write, data: &DataMatrix) -> Result<()> {
    let mut header: Vec<String> = (0..data.dim()).map(|d| format!("d{d}")).collect();
    if data.is_weighted() {
        header.push("weight".into());
    }
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for n in 0..data.n_points() {
        line.clear();
        for (i, v) in data.row(n).iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v}"));
        }
        if data.is_weighted() {
            line.push(',');
            line.push_str(&format!("{}", data.weight(n)));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_data_csv(r: &mut impl Read) -> Result<DataMatrix> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    parse_data_csv(&text)
}

fn parse_data_csv(text: &str) -> Result<DataMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| SgmmError::Format("empty CSV".into()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let weighted = columns.last() == Some(&"weight");
    let dim = if weighted {
        columns.len() - 1
    } else {
        columns.len()
    };
    if dim == 0 {
        return Err(SgmmError::Format("CSV has no value columns".into()));
    }

    let mut values = Vec::new();
    let mut weights = Vec::new();
    for (idx, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(SgmmError::Format(format!(
                "row {} has {} fields, expected {}",
                idx + 1,
                fields.len(),
                columns.len()
            )));
        }
        for field in &fields[..dim] {
            values.push(parse_float(field, idx + 1)?);
        }
        if weighted {
            weights.push(parse_float(fields[dim], idx + 1)?);
        }
    }
    let n_points = values.len() / dim;
    if weighted {
        DataMatrix::with_weights(n_points, dim, values, weights)
            .map_err(|e| SgmmError::Format(e.to_string()))
    } else {
        DataMatrix::new(n_points, dim, values).map_err(|e| SgmmError::Format(e.to_string()))
    }
}

fn parse_float(field: &str, row: usize) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| SgmmError::Format(format!("row {row}: cannot parse '{field}' as a float")))
}

pub fn write_data_binary(w: &mut impl Write, data: &DataMatrix) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u16::<LittleEndian>(VERSION)?;
    let flags = if data.is_weighted() { FLAG_WEIGHTS } else { 0 };
    w.write_u16::<LittleEndian>(flags)?;
    w.write_u64::<LittleEndian>(data.n_points() as u64)?;
    w.write_u32::<LittleEndian>(data.dim() as u32)?;
    for &v in data.values() {
        w.write_f64::<LittleEndian>(v)?;
    }
    if let Some(weights) = data.weights() {
        for &v in weights {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

pub fn read_data_binary(r: &mut impl Read) -> Result<DataMatrix> {
    let mut head = [0u8; 4];
    r.read_exact(&mut head)?;
    if &head != MAGIC {
        return Err(SgmmError::Format(
            "bad magic; not a binary matrix file".into(),
        ));
    }
    read_data_binary_body(r)
}

fn read_data_binary_body(r: &mut impl Read) -> Result<DataMatrix> {
    let version = r.read_u16::<LittleEndian>()?;
    if version != VERSION {
        return Err(SgmmError::Format(format!(
            "unsupported binary version {version}"
        )));
    }
    let flags = r.read_u16::<LittleEndian>()?;
    let n_points = r.read_u64::<LittleEndian>()? as usize;
    let dim = r.read_u32::<LittleEndian>()? as usize;
    let count = n_points
        .checked_mul(dim)
        .ok_or_else(|| SgmmError::Format("matrix shape overflows".into()))?;
    let mut values = vec![0.0; count];
    r.read_f64_into::<LittleEndian>(&mut values)?;
    if flags & FLAG_WEIGHTS != 0 {
        let mut weights = vec![0.0; n_points];
        r.read_f64_into::<LittleEndian>(&mut weights)?;
        DataMatrix::with_weights(n_points, dim, values, weights)
            .map_err(|e| SgmmError::Format(e.to_string()))
    } else {
        DataMatrix::new(n_points, dim, values).map_err(|e| SgmmError::Format(e.to_string()))
    }
}

/// Writes a centre matrix (M x D, unweighted) using the same formats.
pub fn write_centers(path: &Path, centers: &[f64], n_clusters: usize, dim: usize) -> Result<()> {
    let data = DataMatrix::new(n_clusters, dim, centers.to_vec())
        .map_err(|e| SgmmError::Config(format!("invalid centers: {e}")))?;
    write_data(path, &data)
}

/// Reads a centre matrix; returns (centers, M, D).
pub fn read_centers(path: &Path) -> Result<(Vec<f64>, usize, usize)> {
    let data = read_data(path)?;
    if data.is_weighted() {
        return Err(SgmmError::Format("center files must be unweighted".into()));
    }
    let m = data.n_points();
    let dim = data.dim();
    Ok((data.values().to_vec(), m, dim))
}
