//! 16-bit binary PGM previews with the value range in a JSON sidecar.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::grid::RealGrid;

use super::atomic::{write_atomic, write_json_atomic};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PgmSidecar {
    /// Value mapped to grey level 0.
    pub min: f64,
    /// Value mapped to grey level 65535.
    pub max: f64,
    pub width: usize,
    pub height: usize,
}

/// Encode a 2D grid; values outside `mask` (and non-finite values) map to 0
/// and are excluded from the range.
pub fn encode_pgm16(grid: &RealGrid, mask: Option<&[bool]>) -> Result<(Vec<u8>, PgmSidecar)> {
    let dims = grid.geom().dims();
    if dims.len() != 2 {
        return Err(shape_err("PGM previews need a 2D grid"));
    }
    let (h, w) = (dims[0], dims[1]);
    let valid = |i: usize, v: f64| v.is_finite() && mask.is_none_or(|m| m[i]);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &v) in grid.data().iter().enumerate() {
        if valid(i, v) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo > hi {
        (lo, hi) = (0.0, 0.0);
    }
    let mut out = format!("P5\n{w} {h}\n65535\n").into_bytes();
    let span = hi - lo;
    for (i, &v) in grid.data().iter().enumerate() {
        let level = if valid(i, v) && span > 0.0 {
            (((v - lo) / span) * 65535.0).round() as u16
        } else {
            0
        };
        out.extend_from_slice(&level.to_be_bytes());
    }
    Ok((out, PgmSidecar { min: lo, max: hi, width: w, height: h }))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Write `path` and `path.json`.
pub fn write_pgm16(path: &Path, grid: &RealGrid, mask: Option<&[bool]>) -> Result<PgmSidecar> {
    let (bytes, meta) = encode_pgm16(grid, mask)?;
    write_atomic(path, |w| Ok(w.write_all(&bytes)?))?;
    write_json_atomic(&sidecar_path(path), &meta)?;
    Ok(meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, GridGeom};

    #[test]
    fn levels_span_the_range() {
        let g = Grid::from_vec(GridGeom::square(2, 3, 1.0).unwrap(), vec![1.0, 2.0, 3.0, 1.5, 2.5, f64::NAN]).unwrap();
        let (bytes, meta) = encode_pgm16(&g, None).unwrap();
        assert_eq!((meta.min, meta.max, meta.width, meta.height), (1.0, 3.0, 3, 2));
        let head = b"P5\n3 2\n65535\n";
        assert_eq!(&bytes[..head.len()], head);
        let px: Vec<u16> = bytes[head.len()..].chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
        assert_eq!(px, vec![0, 32768, 65535, 16384, 49151, 0]);
    }

    #[test]
    fn writes_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.pgm");
        let g = Grid::filled(GridGeom::square(4, 4, 1.0).unwrap(), 2.0);
        write_pgm16(&p, &g, None).unwrap();
        let meta: PgmSidecar = serde_json::from_slice(&std::fs::read(sidecar_path(&p)).unwrap()).unwrap();
        assert_eq!((meta.min, meta.max), (2.0, 2.0));
        assert!(encode_pgm16(&Grid::filled(GridGeom::new(vec![2, 2, 2], vec![1.0; 3]).unwrap(), 0.0), None).is_err());
    }
}
