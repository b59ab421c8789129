//! Binary field snapshots.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic   4 bytes  "KGSQ"
//! version u32      1
//! kmax    u32
//! flags   u32      bit 0: phase point (position block then velocity block)
//!                  bit 1: coefficients are real-valued
//! body    f64 pairs (re, im) per coefficient, lexicographic k over [-kmax, kmax]³
//! ```

use super::{CoefficientConvention, FourierField, PhasePoint, SpectralGrid};
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"KGSQ";
pub const VERSION: u32 = 1;
pub const FLAG_PHASE_POINT: u32 = 1;
pub const FLAG_REAL_COEFFS: u32 = 2;

fn write_header<W: Write>(w: &mut W, kmax: usize, flags: u32) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(kmax as u32).to_le_bytes())?;
    w.write_all(&flags.to_le_bytes())?;
    Ok(())
}

fn write_body<W: Write>(w: &mut W, f: &FourierField) -> Result<()> {
    let mut buf = Vec::with_capacity(16 * f.coeffs().len());
    for c in f.coeffs() {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn real_flag(fields: &[&FourierField]) -> u32 {
    if fields.iter().all(|f| f.coeffs().iter().all(|c| c.im == 0.0)) {
        FLAG_REAL_COEFFS
    } else {
        0
    }
}

pub fn write_field<W: Write>(w: &mut W, f: &FourierField) -> Result<()> {
    write_header(w, f.grid().kmax(), real_flag(&[f]))?;
    write_body(w, f)
}

pub fn write_phase_point<W: Write>(w: &mut W, p: &PhasePoint) -> Result<()> {
    write_header(
        w,
        p.grid().kmax(),
        FLAG_PHASE_POINT | real_flag(&[&p.pos, &p.vel]),
    )?;
    write_body(w, &p.pos)?;
    write_body(w, &p.vel)
}

struct Header {
    kmax: usize,
    flags: u32,
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_header<R: Read>(r: &mut R) -> Result<Header> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot(format!("bad magic {magic:?}")));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let kmax = read_u32(r)? as usize;
    let flags = read_u32(r)?;
    Ok(Header { kmax, flags })
}

fn read_body<R: Read>(r: &mut R, grid: SpectralGrid) -> Result<FourierField> {
    let mut bytes = vec![0u8; 16 * grid.len()];
    r.read_exact(&mut bytes)?;
    let coeffs = bytes
        .chunks_exact(16)
        .map(|ch| {
            let re = f64::from_le_bytes(ch[..8].try_into().unwrap());
            let im = f64::from_le_bytes(ch[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    let f = FourierField::from_coeffs(grid, coeffs, CoefficientConvention::Complex)?;
    Ok(f)
}

/// Reads a single-field snapshot; `grid` fixes the physical resolution.
pub fn read_field<R: Read>(r: &mut R, n_phys: Option<usize>) -> Result<FourierField> {
    let h = read_header(r)?;
    if h.flags & FLAG_PHASE_POINT != 0 {
        return Err(Error::Snapshot("expected a field, found a phase point".into()));
    }
    read_body(r, grid_for(h.kmax, n_phys)?)
}

pub fn read_phase_point<R: Read>(r: &mut R, n_phys: Option<usize>) -> Result<PhasePoint> {
    let h = read_header(r)?;
    if h.flags & FLAG_PHASE_POINT == 0 {
        return Err(Error::Snapshot("expected a phase point, found a field".into()));
    }
    let grid = grid_for(h.kmax, n_phys)?;
    let pos = read_body(r, grid)?;
    let vel = read_body(r, grid)?;
    PhasePoint::new(pos, vel)
}

fn grid_for(kmax: usize, n_phys: Option<usize>) -> Result<SpectralGrid> {
    match n_phys {
        Some(n) => SpectralGrid::with_resolution(kmax, n),
        None => SpectralGrid::new(kmax),
    }
}

pub fn save_phase_point(path: &Path, p: &PhasePoint) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_phase_point(&mut f, p)?;
    f.flush()?;
    Ok(())
}

pub fn load_phase_point(path: &Path, n_phys: Option<usize>) -> Result<PhasePoint> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_phase_point(&mut f, n_phys)
}

pub fn save_field(path: &Path, field: &FourierField) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_field(&mut f, field)?;
    f.flush()?;
    Ok(())
}

pub fn load_field(path: &Path, n_phys: Option<usize>) -> Result<FourierField> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_field(&mut f, n_phys)
}
