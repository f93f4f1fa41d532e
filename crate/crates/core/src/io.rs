//! Binary and CSV layouts for paths, samples and codebooks.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! offset 0   u64  d      coordinate dimension
//! offset 8   u64  m      grid nodes
//! offset 16  u64  N      number of paths
//! offset 24  u64  seed   generating seed (0 when not applicable)
//! offset 32  f64  N * d * m values, path-major, then coordinate, then node
//! ```
//!
//! CSV layout: a header `path,coord,<t_0>,...,<t_{m-1}>` followed by one row
//! per (path, coordinate) pair. Lines starting with `#` are comments.

use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};
use crate::space::{Path, PathSample};

pub const HEADER_BYTES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryHeader {
    pub d: u64,
    pub m: u64,
    pub n: u64,
    pub seed: u64,
}

pub fn write_paths_binary<W: Write>(mut w: W, paths: &[Path], seed: u64) -> Result<()> {
    let first = paths.first().ok_or(Error::EmptySample)?;
    let header = BinaryHeader {
        d: first.d() as u64,
        m: first.m() as u64,
        n: paths.len() as u64,
        seed,
    };
    for v in [header.d, header.m, header.n, header.seed] {
        w.write_all(&v.to_le_bytes())?;
    }
    for p in paths {
        if p.d() != first.d() || p.m() != first.m() {
            return Err(Error::DimensionMismatch {
                expected_d: first.d(),
                expected_m: first.m(),
                found_d: p.d(),
                found_m: p.m(),
            });
        }
        for v in p.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_paths_binary<R: Read>(mut r: R) -> Result<(BinaryHeader, Vec<Path>)> {
    let mut word = [0u8; 8];
    let mut next = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut word)?;
        Ok(u64::from_le_bytes(word))
    };
    let header = BinaryHeader {
        d: next(&mut r)?,
        m: next(&mut r)?,
        n: next(&mut r)?,
        seed: next(&mut r)?,
    };
    let (d, m, n) = (header.d as usize, header.m as usize, header.n as usize);
    if d == 0 || m == 0 || n == 0 {
        return Err(Error::Format(format!("degenerate header {header:?}")));
    }
    let mut buf = vec![0u8; d * m * 8];
    let mut paths = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        let values = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        paths.push(Path::new(d, m, values)?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after the last path".into()));
    }
    Ok((header, paths))
}

impl PathSample {
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        write_paths_binary(w, self.paths(), self.seed())
    }

    /// Reads a sample back; the process tag is not part of the layout and is supplied by the caller.
    pub fn read_binary<R: Read>(r: R, process_tag: &str) -> Result<Self> {
        let (header, paths) = read_paths_binary(r)?;
        PathSample::new(paths, header.seed, process_tag)
    }
}

pub fn write_paths_csv<W: Write>(mut w: W, grid: &[f64], paths: &[Path], comment: Option<&str>) -> Result<()> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    write!(w, "path,coord")?;
    for t in grid {
        write!(w, ",{t}")?;
    }
    writeln!(w)?;
    for (i, p) in paths.iter().enumerate() {
        if p.m() != grid.len() {
            return Err(Error::Format(format!("path {i} has {} nodes, grid has {}", p.m(), grid.len())));
        }
        for j in 0..p.d() {
            write!(w, "{i},{j}")?;
            for v in p.row(j) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parses the CSV layout back into `(grid, paths)`.
pub fn read_paths_csv<R: BufRead>(r: R) -> Result<(Vec<f64>, Vec<Path>)> {
    let mut grid: Option<Vec<f64>> = None;
    let mut rows: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',');
        let bad = |what: &str| Error::Format(format!("line {}: {what}", lineno + 1));
        let (a, b) = (fields.next().ok_or_else(|| bad("empty"))?, fields.next().ok_or_else(|| bad("missing coord"))?);
        let nums: std::result::Result<Vec<f64>, _> = fields.map(str::parse::<f64>).collect();
        let nums = nums.map_err(|e| bad(&e.to_string()))?;
        match &grid {
            None => {
                if a != "path" || b != "coord" {
                    return Err(bad("expected header `path,coord,...`"));
                }
                grid = Some(nums);
            }
            Some(g) => {
                if nums.len() != g.len() {
                    return Err(bad("row length differs from header"));
                }
                let i = a.parse().map_err(|_| bad("bad path index"))?;
                let j = b.parse().map_err(|_| bad("bad coord index"))?;
                rows.push((i, j, nums));
            }
        }
    }
    let grid = grid.ok_or_else(|| Error::Format("missing header".into()))?;
    let m = grid.len();
    let n = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    let d = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
    if rows.len() != n * d {
        return Err(Error::Format(format!("expected {} rows for {n} paths of dimension {d}, found {}", n * d, rows.len())));
    }
    let mut values = vec![vec![f64::NAN; d * m]; n];
    for (i, j, row) in rows {
        values[i][j * m..(j + 1) * m].copy_from_slice(&row);
    }
    let paths = values.into_iter().map(|v| Path::new(d, m, v)).collect::<Result<Vec<_>>>()?;
    Ok((grid, paths))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_little_endian() {
        let p = Path::new(1, 2, vec![1.0, -2.0]).unwrap();
        let mut buf = Vec::new();
        write_paths_binary(&mut buf, &[p], 7).unwrap();
        assert_eq!(buf.len(), HEADER_BYTES + 16);
        assert_eq!(&buf[0..8], &1u64.to_le_bytes());
        assert_eq!(&buf[8..16], &2u64.to_le_bytes());
        assert_eq!(&buf[16..24], &1u64.to_le_bytes());
        assert_eq!(&buf[24..32], &7u64.to_le_bytes());
        assert_eq!(&buf[32..40], &1.0f64.to_le_bytes());
        assert_eq!(&buf[40..48], &(-2.0f64).to_le_bytes());
    }

    #[test]
    fn truncated_and_trailing_input_rejected() {
        let p = Path::new(1, 2, vec![1.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        write_paths_binary(&mut buf, &[p], 0).unwrap();
        assert!(read_paths_binary(&buf[..buf.len() - 1]).is_err());
        buf.push(0);
        assert!(read_paths_binary(&buf[..]).is_err());
    }

    proptest! {
        #[test]
        fn binary_and_csv_round_trip(d in 1usize..3, m in 2usize..6, n in 1usize..4, seed in any::<u64>(),
                                     raw in proptest::collection::vec(-1e6f64..1e6, 3 * 6 * 4)) {
            let paths: Vec<Path> = (0..n)
                .map(|i| Path::new(d, m, raw[i * d * m..(i + 1) * d * m].to_vec()).unwrap())
                .collect();
            let mut buf = Vec::new();
            write_paths_binary(&mut buf, &paths, seed).unwrap();
            let (h, back) = read_paths_binary(&buf[..]).unwrap();
            prop_assert_eq!(h, BinaryHeader { d: d as u64, m: m as u64, n: n as u64, seed });
            prop_assert_eq!(&back, &paths);

            let grid: Vec<f64> = (0..m).map(|k| k as f64 / 3.0).collect();
            let mut text = Vec::new();
            write_paths_csv(&mut text, &grid, &paths, Some("note")).unwrap();
            let (g, back) = read_paths_csv(&text[..]).unwrap();
            prop_assert_eq!(g, grid);
            prop_assert_eq!(back, paths);
        }
    }
}
