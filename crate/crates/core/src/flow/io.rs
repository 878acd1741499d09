//! Orbit dumps: CSV text and the `HFLX1` binary checkpoint.

use std::io::{Read, Write};

use super::{OrbitSegment, TangentState};
use crate::error::{Error, Result};
use crate::symplectic::{Mat4, Vec4};
use crate::system::HamiltonianSystem;

pub const MAGIC: &[u8; 5] = b"HFLX1";

pub fn orbit_csv_header() -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=4).map(|i| format!("y{i}")));
    cols.push("H".into());
    for i in 1..=4 {
        for j in 1..=4 {
            cols.push(format!("F{i}{j}"));
        }
    }
    cols.push("sympl_residual".into());
    cols.join(",")
}

pub fn write_orbit_csv<W: Write + ?Sized>(out: &mut W, sys: &HamiltonianSystem, seg: &OrbitSegment) -> Result<()> {
    writeln!(out, "{}", orbit_csv_header())?;
    for s in &seg.states {
        let mut row = vec![s.t];
        row.extend(s.y.iter());
        row.push(sys.energy(&s.y)?);
        for i in 0..4 {
            for j in 0..4 {
                row.push(s.f[(i, j)]);
            }
        }
        row.push(s.symplectic_residual());
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Layout: magic, u64 record count, then per record `t, y[4], F[16]` row-major,
/// all little-endian.
pub fn write_checkpoint<W: Write + ?Sized>(out: &mut W, seg: &OrbitSegment) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(seg.states.len() as u64).to_le_bytes())?;
    for s in &seg.states {
        out.write_all(&s.t.to_le_bytes())?;
        for v in s.y.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
        for i in 0..4 {
            for j in 0..4 {
                out.write_all(&s.f[(i, j)].to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(input: &mut R) -> Result<OrbitSegment> {
    let mut magic = [0u8; 5];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Config("not an HFLX1 checkpoint".into()));
    }
    let mut n = [0u8; 8];
    input.read_exact(&mut n)?;
    let n = u64::from_le_bytes(n) as usize;
    let mut next = || -> Result<f64> {
        let mut b = [0u8; 8];
        input.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    };
    let mut seg = OrbitSegment::default();
    for _ in 0..n {
        let t = next()?;
        let mut y = Vec4::zeros();
        for k in 0..4 {
            y[k] = next()?;
        }
        let mut f = Mat4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                f[(i, j)] = next()?;
            }
        }
        seg.times.push(t);
        seg.states.push(TangentState { y, f, t });
    }
    Ok(seg)
}
