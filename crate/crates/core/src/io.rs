//! Field snapshots.
//!
//! Binary layout (little endian): magic `KSNS1`, `nx: u32`, `ny: u32`,
//! `h: f64`, the mask as `ceil(nx·ny/8)` bytes (bit `j·nx + i`, least
//! significant bit first), then one `f64` per active cell in row-major
//! order. The CSV form has columns `i,j,x,y,value`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::scalar::Real;

pub const MAGIC: &[u8; 5] = b"KSNS1";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SnapshotFormat {
    #[default]
    Binary,
    Csv,
}

impl SnapshotFormat {
    pub fn name(&self) -> &'static str {
        match self {
            SnapshotFormat::Binary => "binary",
            SnapshotFormat::Csv => "csv",
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            SnapshotFormat::Binary => "ksns",
            SnapshotFormat::Csv => "csv",
        }
    }
}

/// Decoded snapshot, independent of any in-memory grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    /// Row-major activity flags.
    pub mask: Vec<bool>,
    /// Active-cell values in row-major order.
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn from_field<T: Real>(f: &ScalarField<T>) -> Self {
        let g = f.grid();
        let mut values = Vec::with_capacity(g.num_cells());
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                if let Some(k) = g.cell_index(i, j) {
                    values.push(f.values[k].as_f64());
                }
            }
        }
        Self {
            nx: g.nx(),
            ny: g.ny(),
            h: g.h().as_f64(),
            mask: g.mask().to_vec(),
            values,
        }
    }

    /// Rebuilds a field on `grid`, which must match the stored layout.
    pub fn to_field<T: Real>(&self, grid: &std::sync::Arc<Grid<T>>) -> Result<ScalarField<T>> {
        if grid.nx() != self.nx || grid.ny() != self.ny || grid.mask() != self.mask.as_slice() {
            return Err(Error::Config("snapshot layout does not match the grid".into()));
        }
        let mut out = vec![T::zero(); grid.num_cells()];
        let mut it = self.values.iter();
        for j in 0..self.ny {
            for i in 0..self.nx {
                if let Some(k) = grid.cell_index(i, j) {
                    out[k] = T::of(*it.next().expect("value count checked at decode"));
                }
            }
        }
        Ok(ScalarField::from_values(grid, out))
    }

    pub fn encode(&self) -> Vec<u8> {
        let cells = self.nx * self.ny;
        let mut buf = Vec::with_capacity(21 + cells.div_ceil(8) + 8 * self.values.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(self.nx as u32).to_le_bytes());
        buf.extend_from_slice(&(self.ny as u32).to_le_bytes());
        buf.extend_from_slice(&self.h.to_le_bytes());
        let mut bits = vec![0u8; cells.div_ceil(8)];
        for (idx, &on) in self.mask.iter().enumerate() {
            if on {
                bits[idx / 8] |= 1 << (idx % 8);
            }
        }
        buf.extend_from_slice(&bits);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Config(format!("malformed snapshot: {msg}"));
        if bytes.len() < 21 || &bytes[..5] != MAGIC {
            return Err(bad("missing KSNS1 header"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let nx = u32_at(5);
        let ny = u32_at(9);
        let h = f64::from_le_bytes(bytes[13..21].try_into().unwrap());
        let cells = nx.checked_mul(ny).ok_or_else(|| bad("grid too large"))?;
        let mask_len = cells.div_ceil(8);
        let body = &bytes[21..];
        if body.len() < mask_len {
            return Err(bad("truncated mask"));
        }
        let mask: Vec<bool> = (0..cells).map(|k| body[k / 8] >> (k % 8) & 1 == 1).collect();
        let active = mask.iter().filter(|&&m| m).count();
        let data = &body[mask_len..];
        if data.len() != 8 * active {
            return Err(bad("value count does not match mask"));
        }
        let values = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            nx,
            ny,
            h,
            mask,
            values,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,j,x,y,value\n");
        let mut it = self.values.iter();
        for j in 0..self.ny {
            for i in 0..self.nx {
                if self.mask[j * self.nx + i] {
                    let v = it.next().copied().unwrap_or(f64::NAN);
                    let x = (i as f64 + 0.5) * self.h;
                    let y = (j as f64 + 0.5) * self.h;
                    s.push_str(&format!("{i},{j},{x:.16e},{y:.16e},{v:.16e}\n"));
                }
            }
        }
        s
    }
}

pub fn write_snapshot<T: Real>(path: &Path, f: &ScalarField<T>, format: SnapshotFormat) -> Result<()> {
    let snap = Snapshot::from_field(f);
    let bytes = match format {
        SnapshotFormat::Binary => snap.encode(),
        SnapshotFormat::Csv => snap.to_csv().into_bytes(),
    };
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Snapshot::decode(&bytes)
}
