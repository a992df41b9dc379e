//! Binary density matrix snapshots.
//!
//! Layout: the 8-byte magic `CTQWRHO1`, the dimension as a little-endian
//! `u32`, a precision flag byte (0 single, 1 double) and three zero bytes,
//! followed by the packed lower triangle row-major as little-endian
//! `(re, im)` pairs in that precision.

use std::io::{Read, Write};
use std::path::Path;

use ctqw::{Complex64, DensityMatrix, Error, Precision, Result};

pub const MAGIC: &[u8; 8] = b"CTQWRHO1";
pub const HEADER_LEN: usize = 16;

fn flag(precision: Precision) -> u8 {
    match precision {
        Precision::Single => 0,
        Precision::Double => 1,
    }
}

pub fn encode_density(rho: &DensityMatrix, precision: Precision) -> Result<Vec<u8>> {
    let dim = u32::try_from(rho.dim())
        .map_err(|_| Error::Capacity(format!("dimension {} does not fit the snapshot header", rho.dim())))?;
    let mut buf = Vec::with_capacity(HEADER_LEN + rho.packed().len() * precision.complex_bytes());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&dim.to_le_bytes());
    buf.push(flag(precision));
    buf.extend_from_slice(&[0; 3]);
    for z in rho.packed() {
        match precision {
            Precision::Single => {
                buf.extend_from_slice(&(z.re as f32).to_le_bytes());
                buf.extend_from_slice(&(z.im as f32).to_le_bytes());
            }
            Precision::Double => {
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
        }
    }
    Ok(buf)
}

pub fn decode_density(bytes: &[u8]) -> Result<(DensityMatrix, Precision)> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(Error::Format("not a density snapshot (bad magic)".into()));
    }
    let dim = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let precision = match bytes[12] {
        0 => Precision::Single,
        1 => Precision::Double,
        f => return Err(Error::Format(format!("unknown precision flag {f}"))),
    };
    let payload = &bytes[HEADER_LEN..];
    let entries = dim * (dim + 1) / 2;
    let expected = entries * precision.complex_bytes();
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "header dimension {dim} implies {expected} payload bytes, found {}",
            payload.len()
        )));
    }
    let packed: Vec<Complex64> = match precision {
        Precision::Single => payload
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes(c[..4].try_into().expect("4 bytes"));
                let im = f32::from_le_bytes(c[4..].try_into().expect("4 bytes"));
                Complex64::new(re as f64, im as f64)
            })
            .collect(),
        Precision::Double => payload
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                Complex64::new(re, im)
            })
            .collect(),
    };
    // sample count and time are not part of the format
    Ok((DensityMatrix::from_packed(dim, packed, 0, f64::NAN)?, precision))
}

pub fn write_density_snapshot(rho: &DensityMatrix, precision: Precision, path: &Path) -> Result<()> {
    let bytes = encode_density(rho, precision)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_density_snapshot(path: &Path) -> Result<(DensityMatrix, Precision)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_density(&bytes)
}
