//! File formats: grid and cut CSVs, cross-ambiguity CSV and binary stacks.
//!
//! Every file starts with a header naming its contents and the hash of the
//! configuration (or input) that produced it.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::ambiguity::{AfGrid, AxisKind, ComplexGrid, CrossAfStack, Normalization, SurfaceKind};
use crate::error::{Error, Result};
use crate::tb_core::{Cut, DB_FLOOR};

pub const STACK_MAGIC: &[u8; 8] = b"TBAFXAF1";

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn kebab<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn unkebab<T: serde::de::DeserializeOwned>(s: &str, what: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Error::param(format!("unknown {what} {s:?}")))
}

/// Grid as CSV: first row holds the second axis, first column the first axis.
pub fn grid_csv(grid: &AfGrid, hash: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# tbaf-grid v1 surface={} axis1={} axis2={} normalization={} config={hash}",
        kebab(&grid.kind),
        kebab(&grid.axis1_kind),
        kebab(&grid.axis2_kind),
        kebab(&grid.normalization),
    );
    let _ = write!(s, "{}\\{}", kebab(&grid.axis1_kind), kebab(&grid.axis2_kind));
    for v in &grid.axis2 {
        let _ = write!(s, ",{v:e}");
    }
    s.push('\n');
    for (i, a) in grid.axis1.iter().enumerate() {
        let _ = write!(s, "{a:e}");
        for v in grid.values.row(i) {
            let _ = write!(s, ",{v:e}");
        }
        s.push('\n');
    }
    s
}

pub fn write_grid_csv(path: impl AsRef<Path>, grid: &AfGrid, hash: &str) -> Result<()> {
    std::fs::write(path, grid_csv(grid, hash))?;
    Ok(())
}

fn header_field<'a>(header: &'a str, key: &str) -> Result<&'a str> {
    header
        .split_whitespace()
        .find_map(|t| t.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .ok_or_else(|| Error::param(format!("grid header lacks {key}")))
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::param(format!("line {line}: bad number {s:?}")))
}

/// Reads a grid written by [`write_grid_csv`]. Returns the grid and its
/// configuration hash.
pub fn read_grid_csv(path: impl AsRef<Path>) -> Result<(AfGrid, String)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if !header.starts_with("# tbaf-grid v1") {
        return Err(Error::param("not a grid file"));
    }
    let kind: SurfaceKind = unkebab(header_field(header, "surface")?, "surface")?;
    let a1: AxisKind = unkebab(header_field(header, "axis1")?, "axis")?;
    let a2: AxisKind = unkebab(header_field(header, "axis2")?, "axis")?;
    let norm: Normalization = unkebab(header_field(header, "normalization")?, "normalization")?;
    let hash = header_field(header, "config")?.to_string();
    let axis2 = lines
        .next()
        .ok_or_else(|| Error::param("grid file has no axis row"))?
        .split(',')
        .skip(1)
        .map(|v| parse_f64(v, 2))
        .collect::<Result<Vec<_>>>()?;
    let mut axis1 = Vec::new();
    let mut flat = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut cells = line.split(',');
        axis1.push(parse_f64(cells.next().unwrap_or_default(), i + 3)?);
        let row = cells.map(|v| parse_f64(v, i + 3)).collect::<Result<Vec<_>>>()?;
        if row.len() != axis2.len() {
            return Err(Error::param(format!("line {}: expected {} values", i + 3, axis2.len())));
        }
        flat.extend(row);
    }
    let values = ndarray::Array2::from_shape_vec((axis1.len(), axis2.len()), flat)
        .map_err(|e| Error::param(e.to_string()))?;
    let mut g = AfGrid::new(axis1, a1, axis2, a2, values, kind)?;
    g.normalization = norm;
    Ok((g, hash))
}

pub fn cut_csv(cut: &Cut, surface: SurfaceKind, db_floor: f64, hash: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# tbaf-cut v1 surface={} axis={} fixed={}@{:e} config={hash}",
        kebab(&surface),
        kebab(&cut.axis_kind),
        kebab(&cut.fixed_kind),
        cut.fixed_value
    );
    let _ = writeln!(s, "{},value,value_db", kebab(&cut.axis_kind));
    for ((a, v), d) in cut.axis.iter().zip(&cut.values).zip(&cut.values_db) {
        let d = if *d <= DB_FLOOR { db_floor } else { d.max(db_floor) };
        let _ = writeln!(s, "{a:e},{v:e},{d:e}");
    }
    s
}

/// Long-form CSV: one row per node, `re, im` pairs for every `(j, k)` entry.
pub fn stack_csv(stack: &CrossAfStack, hash: &str) -> String {
    let k = stack.count();
    let mut s = String::new();
    let _ = writeln!(s, "# tbaf-cross-af v1 count={k} source={hash}");
    s.push_str("lag,delay,doppler");
    for j in 0..k {
        for i in 0..k {
            let _ = write!(s, ",x{j}_{i}_re,x{j}_{i}_im");
        }
    }
    s.push('\n');
    for (di, lag) in stack.lags.iter().enumerate() {
        for (fi, f) in stack.dopplers.iter().enumerate() {
            let _ = write!(s, "{lag},{:e},{f:e}", stack.delays[di]);
            for z in stack.matrix(di, fi).iter() {
                let _ = write!(s, ",{:e},{:e}", z.re, z.im);
            }
            s.push('\n');
        }
    }
    s
}

/// Little-endian binary stack: magic, source hash (64 hex bytes), count,
/// lag count, Doppler count, sample rate, lags, Dopplers, then `re, im`
/// for every `(delay, Doppler, j, k)` in row-major order.
pub fn write_stack_bin(mut w: impl Write, stack: &CrossAfStack, sample_rate: f64, hash: &str) -> Result<()> {
    let mut h = [b'0'; 64];
    let hb = hash.as_bytes();
    h[..hb.len().min(64)].copy_from_slice(&hb[..hb.len().min(64)]);
    w.write_all(STACK_MAGIC)?;
    w.write_all(&h)?;
    for n in [stack.count(), stack.lags.len(), stack.dopplers.len()] {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    w.write_all(&sample_rate.to_le_bytes())?;
    for l in &stack.lags {
        w.write_all(&l.to_le_bytes())?;
    }
    for f in &stack.dopplers {
        w.write_all(&f.to_le_bytes())?;
    }
    for z in stack.data().iter() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_stack_bin(r: impl Read) -> Result<(CrossAfStack, f64, String)> {
    let mut r = BufReader::new(r);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != STACK_MAGIC {
        return Err(Error::param("not a cross-ambiguity stack"));
    }
    let mut h = [0u8; 64];
    r.read_exact(&mut h)?;
    let mut b8 = [0u8; 8];
    let mut u = |r: &mut BufReader<_>| -> Result<[u8; 8]> {
        r.read_exact(&mut b8)?;
        Ok(b8)
    };
    let k = u64::from_le_bytes(u(&mut r)?) as usize;
    let nd = u64::from_le_bytes(u(&mut r)?) as usize;
    let nf = u64::from_le_bytes(u(&mut r)?) as usize;
    let fs = f64::from_le_bytes(u(&mut r)?);
    if k.checked_mul(k).and_then(|x| x.checked_mul(nd)).and_then(|x| x.checked_mul(nf)).is_none() {
        return Err(Error::param("stack dimensions overflow"));
    }
    let lags = (0..nd).map(|_| Ok(i64::from_le_bytes(u(&mut r)?))).collect::<Result<Vec<_>>>()?;
    let dopplers = (0..nf).map(|_| Ok(f64::from_le_bytes(u(&mut r)?))).collect::<Result<Vec<_>>>()?;
    let mut flat = Vec::with_capacity(nd * nf * k * k);
    for _ in 0..nd * nf * k * k {
        let re = f64::from_le_bytes(u(&mut r)?);
        let im = f64::from_le_bytes(u(&mut r)?);
        flat.push(Complex64::new(re, im));
    }
    let values = ndarray::Array4::from_shape_vec((nd, nf, k, k), flat)
        .map_err(|e| Error::param(e.to_string()))?;
    let hash = String::from_utf8_lossy(&h).into_owned();
    Ok((CrossAfStack::from_parts(lags, dopplers, fs, values)?, fs, hash))
}

/// One part of a complex grid; written as a `_re` / `_im` file pair.
pub fn complex_grid_csv(grid: &ComplexGrid, imag: bool, hash: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# tbaf-complex v1 part={} config={hash}", if imag { "im" } else { "re" });
    s.push_str("delay\\doppler");
    for v in &grid.dopplers {
        let _ = write!(s, ",{v:e}");
    }
    s.push('\n');
    for (i, a) in grid.delays.iter().enumerate() {
        let _ = write!(s, "{a:e}");
        for z in grid.values.row(i) {
            let _ = write!(s, ",{:e}", if imag { z.im } else { z.re });
        }
        s.push('\n');
    }
    s
}

/// First line of a file, for hash checks.
pub fn first_line(path: impl AsRef<Path>) -> Result<String> {
    let mut line = String::new();
    BufReader::new(std::fs::File::open(path)?).read_line(&mut line)?;
    Ok(line.trim_end().to_string())
}
