//! Field snapshot files.
//!
//! Binary layout, all little-endian:
//!
//! | offset | size | content                       |
//! |--------|------|-------------------------------|
//! | 0      | 8    | magic `b"KZKFIELD"`           |
//! | 8      | 4    | format version (u32, = 1)     |
//! | 12     | 4    | reserved (u32, = 0)           |
//! | 16     | 8    | `n_rho` (u64)                 |
//! | 24     | 8    | `n_theta` (u64)               |
//! | 32     | 8    | `d_rho` (f64)                 |
//! | 40     | 8    | `d_theta` (f64)               |
//! | 48     | 8    | `sigma` (f64)                 |
//! | 56     | 8·n  | values (f64), rho-major       |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Field2D;

pub const MAGIC: &[u8; 8] = b"KZKFIELD";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 56;

/// A field together with the metadata stored in the snapshot header.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRecord {
    pub sigma: f64,
    pub d_rho: f64,
    pub d_theta: f64,
    pub field: Field2D,
}

pub fn write_snapshot<W: Write>(mut w: W, snap: &SnapshotRecord) -> Result<()> {
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    header.extend_from_slice(&0u32.to_le_bytes());
    header.extend_from_slice(&(snap.field.n_rho() as u64).to_le_bytes());
    header.extend_from_slice(&(snap.field.n_theta() as u64).to_le_bytes());
    header.extend_from_slice(&snap.d_rho.to_le_bytes());
    header.extend_from_slice(&snap.d_theta.to_le_bytes());
    header.extend_from_slice(&snap.sigma.to_le_bytes());
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(8 * snap.field.n_theta());
    for j in 0..snap.field.n_rho() {
        buf.clear();
        for v in snap.field.row(j) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<SnapshotRecord> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)?;
    if &header[0..8] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n_rho = usize::try_from(u64_at(16)).map_err(|_| Error::Format("n_rho".into()))?;
    let n_theta = usize::try_from(u64_at(24)).map_err(|_| Error::Format("n_theta".into()))?;
    let count = n_rho
        .checked_mul(n_theta)
        .ok_or_else(|| Error::Format("extent overflow".into()))?;
    let mut raw = vec![0u8; count * 8];
    r.read_exact(&mut raw)?;
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(SnapshotRecord {
        d_rho: f64_at(32),
        d_theta: f64_at(40),
        sigma: f64_at(48),
        field: Field2D::from_vec(n_rho, n_theta, values)?,
    })
}

pub fn save_snapshot(path: &Path, snap: &SnapshotRecord) -> Result<()> {
    write_snapshot(BufWriter::new(File::create(path)?), snap)
}

pub fn load_snapshot(path: &Path) -> Result<SnapshotRecord> {
    read_snapshot(BufReader::new(File::open(path)?))
}

/// `rho,theta,V` rows for the given node coordinates.
pub fn write_field_csv<W: Write>(
    mut w: W,
    field: &Field2D,
    rho_nodes: &[f64],
    theta_nodes: &[f64],
) -> Result<()> {
    if rho_nodes.len() != field.n_rho() || theta_nodes.len() != field.n_theta() {
        return Err(Error::ShapeMismatch("csv coordinates".into()));
    }
    writeln!(w, "rho,theta,V")?;
    for (j, rho) in rho_nodes.iter().enumerate() {
        for (k, theta) in theta_nodes.iter().enumerate() {
            writeln!(w, "{rho},{theta},{:e}", field.get(j, k))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns `theta,<label_1>,<label_2>,...`, one row per theta node.
pub fn write_traces_csv<W: Write>(
    mut w: W,
    theta_nodes: &[f64],
    traces: &[(String, Vec<f64>)],
) -> Result<()> {
    write!(w, "theta")?;
    for (label, trace) in traces {
        if trace.len() != theta_nodes.len() {
            return Err(Error::ShapeMismatch(format!("trace `{label}`")));
        }
        write!(w, ",{label}")?;
    }
    writeln!(w)?;
    for (k, theta) in theta_nodes.iter().enumerate() {
        write!(w, "{theta}")?;
        for (_, trace) in traces {
            write!(w, ",{:e}", trace[k])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
