//! The `LGAS` binary snapshot format.
//!
//! Layout, all little-endian: the magic bytes `LGAS`, `u32` version 1,
//! `u32` dimension `d`, `d` values of `u32` points per axis, `f64` time,
//! then the samples as `f64` in row-major order.

use crate::error::{Error, Result};
use crate::field::FourierField;
use crate::grid::Grid;
use std::io::{Read, Write};

const MAGIC: &[u8; 4] = b"LGAS";
const VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(mut out: W, field: &FourierField, time: f64) -> Result<()> {
    let grid = field.grid();
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(grid.dim() as u32).to_le_bytes())?;
    for _ in 0..grid.dim() {
        out.write_all(&(grid.n() as u32).to_le_bytes())?;
    }
    out.write_all(&time.to_le_bytes())?;
    for v in field.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<(FourierField, f64)> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let d = read_u32(&mut input)? as usize;
    if d == 0 || d > 8 {
        return Err(Error::Format(format!("bad dimension {d}")));
    }
    let sizes: Vec<usize> = (0..d).map(|_| read_u32(&mut input).map(|v| v as usize)).collect::<Result<_>>()?;
    if sizes.iter().any(|&s| s != sizes[0]) {
        return Err(Error::Format("only cubic grids are supported".into()));
    }
    let grid = Grid::new(d, sizes[0]).map_err(|e| Error::Format(e.to_string()))?;
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    let time = f64::from_le_bytes(buf);
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        input.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    Ok((FourierField::from_values(grid, values)?, time))
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
