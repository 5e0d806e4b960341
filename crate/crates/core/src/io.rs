//! Little-endian binary dumps: a header of `u64` fields followed by `f64`s.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use std::io::{Read, Write};

pub fn write_header(w: &mut impl Write, fields: &[u64]) -> Result<()> {
    for f in fields {
        w.write_all(&f.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_f64s(w: &mut impl Write, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_header<const K: usize>(r: &mut impl Read) -> Result<[u64; K]> {
    let mut out = [0u64; K];
    let mut buf = [0u8; 8];
    for f in out.iter_mut() {
        r.read_exact(&mut buf)?;
        *f = u64::from_le_bytes(buf);
    }
    Ok(out)
}

pub fn read_f64s(r: &mut impl Read, count: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

fn to_usize(v: u64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Parse { line: 0, msg: format!("header field {v} too large") })
}

/// Header `S, j`, then the `S^j` entries.
pub fn write_tensor(w: &mut impl Write, t: &Tensor) -> Result<()> {
    write_header(w, &[t.states() as u64, t.order() as u64])?;
    write_f64s(w, t.data())
}

pub fn read_tensor(r: &mut impl Read) -> Result<Tensor> {
    let [s, j] = read_header::<2>(r)?;
    let (s, j) = (to_usize(s)?, to_usize(j)?);
    let len = crate::tensor::checked_len(s, j)
        .ok_or_else(|| Error::Parse { line: 0, msg: format!("S^j overflows for S = {s}, j = {j}") })?;
    Tensor::from_vec(s, j, read_f64s(r, len)?)
}
