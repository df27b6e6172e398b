//! `.cgrid` files: one JSON header line, then row-major little-endian f64
//! values. Complex kinds interleave (re, im); masks store 0.0 or 1.0.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, FormatError, Result};
use crate::grid::{ComplexGrid, Grid, GridGeom, RealGrid, C64};
use crate::synth::PhaseOffsetSeries;

use super::atomic::write_atomic;
use super::format::{read_f64s, read_header, write_f64s, write_header};

pub const CGRID_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Displacement,
    MrImage,
    WavenumberRe,
    WavenumberIm,
    ModulusRe,
    ModulusIm,
    Mask,
}

impl GridKind {
    pub fn is_complex(self) -> bool {
        matches!(self, GridKind::Displacement | GridKind::MrImage)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CGridHeader {
    pub format_version: u32,
    pub dims: Vec<usize>,
    pub spacing_mm: Vec<f64>,
    pub kind: GridKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction_label: Option<String>,
    /// Phase offsets of an image stack whose first axis indexes the offset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_offsets: Option<Vec<f64>>,
}

impl CGridHeader {
    pub fn new(geom: &GridGeom, kind: GridKind) -> Self {
        Self {
            format_version: CGRID_FORMAT_VERSION,
            dims: geom.dims().to_vec(),
            spacing_mm: geom.spacing_mm().to_vec(),
            kind,
            frequency_hz: None,
            direction_label: None,
            phase_offsets: None,
        }
    }

    pub fn with_frequency(mut self, hz: f64) -> Self {
        self.frequency_hz = Some(hz);
        self
    }

    pub fn with_direction(mut self, label: Option<String>) -> Self {
        self.direction_label = label;
        self
    }

    pub fn geom(&self) -> Result<GridGeom> {
        GridGeom::new(self.dims.clone(), self.spacing_mm.clone())
    }

    fn value_count(&self) -> usize {
        self.dims.iter().product::<usize>() * if self.kind.is_complex() { 2 } else { 1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GridPayload {
    Complex(ComplexGrid),
    Real(RealGrid),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CGridFile {
    pub header: CGridHeader,
    pub payload: GridPayload,
}

impl CGridFile {
    pub fn complex(grid: ComplexGrid, header: CGridHeader) -> Self {
        Self { header, payload: GridPayload::Complex(grid) }
    }

    pub fn real(grid: RealGrid, header: CGridHeader) -> Self {
        Self { header, payload: GridPayload::Real(grid) }
    }

    pub fn mask(mask: &[bool], geom: &GridGeom) -> Self {
        let g = Grid::from_fn(geom.clone(), |i| if mask[i] { 1.0 } else { 0.0 });
        Self::real(g, CGridHeader::new(geom, GridKind::Mask))
    }

    pub fn into_complex(self) -> Result<ComplexGrid> {
        match self.payload {
            GridPayload::Complex(g) => Ok(g),
            GridPayload::Real(_) => Err(shape_err(format!("expected a complex grid, found {:?}", self.header.kind))),
        }
    }

    pub fn into_real(self) -> Result<RealGrid> {
        match self.payload {
            GridPayload::Real(g) => Ok(g),
            GridPayload::Complex(_) => Err(shape_err(format!("expected a real grid, found {:?}", self.header.kind))),
        }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let (dims, complex) = match &self.payload {
            GridPayload::Complex(g) => (g.geom().dims(), true),
            GridPayload::Real(g) => (g.geom().dims(), false),
        };
        if dims != self.header.dims.as_slice() || complex != self.header.kind.is_complex() {
            return Err(shape_err("cgrid header does not describe its payload"));
        }
        write_header(w, &self.header)?;
        match &self.payload {
            GridPayload::Complex(g) => write_f64s(w, g.data().iter().flat_map(|z| [z.re, z.im])),
            GridPayload::Real(g) => write_f64s(w, g.data().iter().copied()),
        }
    }

    pub fn read_from<R: BufRead>(r: &mut R) -> Result<Self> {
        let header = read_cgrid_header(r)?;
        let geom = header.geom()?;
        let values = read_f64s(r, header.value_count())?;
        let payload = if header.kind.is_complex() {
            let data = values.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
            GridPayload::Complex(Grid::from_vec(geom, data)?)
        } else {
            GridPayload::Real(Grid::from_vec(geom, values)?)
        };
        Ok(Self { header, payload })
    }
}

pub fn read_cgrid_header<R: BufRead>(r: &mut R) -> Result<CGridHeader> {
    let header: CGridHeader = read_header(r)?;
    if header.format_version != CGRID_FORMAT_VERSION {
        return Err(FormatError::VersionMismatch {
            found: header.format_version,
            supported: CGRID_FORMAT_VERSION,
        }
        .into());
    }
    header.geom().map_err(|e| FormatError::MalformedHeader(e.to_string()))?;
    Ok(header)
}

pub fn write_cgrid(path: &Path, file: &CGridFile) -> Result<()> {
    write_atomic(path, |w| file.write_to(w))
}

pub fn read_cgrid(path: &Path) -> Result<CGridFile> {
    CGridFile::read_from(&mut BufReader::new(File::open(path)?))
}

pub fn read_cgrid_header_file(path: &Path) -> Result<CGridHeader> {
    read_cgrid_header(&mut BufReader::new(File::open(path)?))
}

/// Stack the images of a series along a new first axis.
pub fn series_to_cgrid(series: &PhaseOffsetSeries, frequency_hz: Option<f64>) -> Result<CGridFile> {
    let g = series.images()[0].geom();
    let mut dims = vec![series.len()];
    dims.extend_from_slice(g.dims());
    let mut spacing = vec![1.0];
    spacing.extend_from_slice(g.spacing_mm());
    let geom = GridGeom::new(dims, spacing)?;
    let data = series.images().iter().flat_map(|img| img.data().iter().copied()).collect();
    let mut header = CGridHeader::new(&geom, GridKind::MrImage);
    header.frequency_hz = frequency_hz;
    header.phase_offsets = Some(series.offsets().to_vec());
    Ok(CGridFile::complex(Grid::from_vec(geom, data)?, header))
}

/// Inverse of [`series_to_cgrid`].
pub fn series_from_cgrid(file: CGridFile) -> Result<PhaseOffsetSeries> {
    let offsets = file
        .header
        .phase_offsets
        .clone()
        .ok_or_else(|| shape_err("image stack has no phase_offsets in its header"))?;
    if file.header.kind != GridKind::MrImage || file.header.dims.len() < 3 {
        return Err(shape_err("expected a stacked mr_image grid"));
    }
    let geom = GridGeom::new(file.header.dims[1..].to_vec(), file.header.spacing_mm[1..].to_vec())?;
    let grid = file.into_complex()?;
    let images = grid
        .data()
        .chunks(geom.len())
        .map(|c| Grid::from_vec(geom.clone(), c.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    PhaseOffsetSeries::new(images, offsets)
}
