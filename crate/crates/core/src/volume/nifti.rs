//! NIfTI-1 reading and writing.
//!
//! Reads single-file (`n+1`) images and header/image pairs (`ni1`), plain or
//! gzip-compressed, in either byte order. Writes little-endian single-file
//! images with the payload at offset 352. Only the voxel grid and spacing
//! are interpreted; orientation fields are carried through untouched on
//! read and written as an identity quaternion.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::{BinaryMask, Grid, LabelVolume, RealVolume};
use crate::error::{Error, Result};

pub const HEADER_SIZE: usize = 348;
pub const SINGLE_FILE_OFFSET: usize = 352;
pub const MAGIC_SINGLE: &[u8; 4] = b"n+1\0";
pub const MAGIC_PAIR: &[u8; 4] = b"ni1\0";

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_FLOAT32: i16 = 16;

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// What to write: integer labels, a mask, or a real-valued map.
#[derive(Debug, Clone, Copy)]
pub enum NiftiPayload<'a> {
    Labels(&'a LabelVolume),
    Mask(&'a BinaryMask),
    Real(&'a RealVolume),
}

impl<'a> From<&'a LabelVolume> for NiftiPayload<'a> {
    fn from(v: &'a LabelVolume) -> Self {
        NiftiPayload::Labels(v)
    }
}

impl<'a> From<&'a BinaryMask> for NiftiPayload<'a> {
    fn from(v: &'a BinaryMask) -> Self {
        NiftiPayload::Mask(v)
    }
}

impl<'a> From<&'a RealVolume> for NiftiPayload<'a> {
    fn from(v: &'a RealVolume) -> Self {
        NiftiPayload::Real(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endian {
    Little,
    Big,
}

/// The header fields this crate consumes.
#[derive(Debug, Clone)]
struct Header {
    endian: Endian,
    dims: [usize; 3],
    spacing: [f64; 3],
    datatype: i16,
    vox_offset: usize,
    scl_slope: f32,
    scl_inter: f32,
    single_file: bool,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    endian: Endian,
}

impl Cursor<'_> {
    fn i16(&self, at: usize) -> i16 {
        let b = [self.bytes[at], self.bytes[at + 1]];
        match self.endian {
            Endian::Little => i16::from_le_bytes(b),
            Endian::Big => i16::from_be_bytes(b),
        }
    }

    fn f32(&self, at: usize) -> f32 {
        let b = [
            self.bytes[at],
            self.bytes[at + 1],
            self.bytes[at + 2],
            self.bytes[at + 3],
        ];
        match self.endian {
            Endian::Little => f32::from_le_bytes(b),
            Endian::Big => f32::from_be_bytes(b),
        }
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::Truncated {
            expected: HEADER_SIZE,
            found: bytes.len(),
        });
    }
    let magic = &bytes[344..348];
    let single_file = if magic == MAGIC_SINGLE {
        true
    } else if magic == MAGIC_PAIR {
        false
    } else {
        return Err(Error::Format(format!("bad NIfTI-1 magic {magic:?}")));
    };

    let dim0_le = i16::from_le_bytes([bytes[40], bytes[41]]);
    let dim0_be = i16::from_be_bytes([bytes[40], bytes[41]]);
    let endian = if (1..=7).contains(&dim0_le) {
        Endian::Little
    } else if (1..=7).contains(&dim0_be) {
        Endian::Big
    } else {
        return Err(Error::Format(format!(
            "dim[0] = {dim0_le} is not a valid rank"
        )));
    };
    let c = Cursor { bytes, endian };

    let rank = c.i16(40) as usize;
    let mut dims = [1usize; 3];
    let mut spacing = [1.0f64; 3];
    for axis in 1..=7 {
        let d = c.i16(40 + 2 * axis);
        if axis > rank {
            continue;
        }
        if d < 1 {
            return Err(Error::Format(format!("dim[{axis}] = {d} must be positive")));
        }
        if axis <= 3 {
            dims[axis - 1] = d as usize;
            spacing[axis - 1] = (c.f32(76 + 4 * axis) as f64).abs();
        } else if d != 1 {
            return Err(Error::Unsupported(format!(
                "only 3-D images are supported, dim[{axis}] = {d}"
            )));
        }
    }

    let vox_offset = c.f32(108);
    if !vox_offset.is_finite() || vox_offset < 0.0 {
        return Err(Error::Format(format!("invalid vox_offset {vox_offset}")));
    }
    let vox_offset = vox_offset as usize;
    if single_file && vox_offset < HEADER_SIZE {
        return Err(Error::Format(format!(
            "vox_offset {vox_offset} overlaps the header"
        )));
    }

    Ok(Header {
        endian,
        dims,
        spacing,
        datatype: c.i16(70),
        vox_offset,
        scl_slope: c.f32(112),
        scl_inter: c.f32(116),
        single_file,
    })
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        MultiGzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn image_file_for(header_path: &Path) -> Result<PathBuf> {
    let name = header_path.to_string_lossy();
    let stem = name
        .strip_suffix(".hdr.gz")
        .or_else(|| name.strip_suffix(".hdr"))
        .ok_or_else(|| Error::Format(format!("`{name}` has ni1 magic but is not a .hdr file")))?;
    [".img", ".img.gz"]
        .iter()
        .map(|ext| PathBuf::from(format!("{stem}{ext}")))
        .find(|p| p.exists())
        .ok_or_else(|| {
            Error::io(
                header_path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "missing .img file"),
            )
        })
}

/// Decoded voxel values as f64 plus the grid.
fn read_values(path: &Path) -> Result<(Grid, Header, Vec<f64>)> {
    let bytes = read_maybe_gz(path)?;
    let header = parse_header(&bytes)?;
    let grid = Grid::new(header.dims, header.spacing)?;

    let width = match header.datatype {
        DT_UINT8 => 1,
        DT_INT16 => 2,
        DT_FLOAT32 => 4,
        other => return Err(Error::Unsupported(format!("NIfTI datatype code {other}"))),
    };
    let needed = grid.len() * width;

    let image;
    let payload: &[u8] = if header.single_file {
        let end = header.vox_offset + needed;
        if bytes.len() < end {
            return Err(Error::Truncated {
                expected: end,
                found: bytes.len(),
            });
        }
        &bytes[header.vox_offset..end]
    } else {
        image = read_maybe_gz(&image_file_for(path)?)?;
        let end = header.vox_offset + needed;
        if image.len() < end {
            return Err(Error::Truncated {
                expected: end,
                found: image.len(),
            });
        }
        &image[header.vox_offset..end]
    };

    let c = Cursor {
        bytes: payload,
        endian: header.endian,
    };
    let mut values: Vec<f64> = match header.datatype {
        DT_UINT8 => payload.iter().map(|&b| b as f64).collect(),
        DT_INT16 => (0..grid.len()).map(|i| c.i16(2 * i) as f64).collect(),
        _ => (0..grid.len()).map(|i| c.f32(4 * i) as f64).collect(),
    };

    let slope = header.scl_slope as f64;
    let inter = header.scl_inter as f64;
    if slope != 0.0 && slope.is_finite() && (slope != 1.0 || inter != 0.0) {
        for v in &mut values {
            *v = *v * slope + inter;
        }
    }
    Ok((grid, header, values))
}

/// Reads a label image. Real-valued voxels are rounded to the nearest
/// integer (ties away from zero); negative or non-finite values are rejected.
pub fn read_nifti(path: impl AsRef<Path>) -> Result<LabelVolume> {
    let (grid, _, values) = read_values(path.as_ref())?;
    let mut labels = Vec::with_capacity(values.len());
    for (i, v) in values.into_iter().enumerate() {
        let r = v.round();
        if !r.is_finite() || r < 0.0 || r > u32::MAX as f64 {
            let [x, y, z] = grid.coord(i);
            return Err(Error::InvalidLabel {
                value: if r.is_finite() { r as i64 } else { i64::MIN },
                x,
                y,
                z,
            });
        }
        labels.push(r as u32);
    }
    LabelVolume::new(grid, labels)
}

/// Reads any supported image as a real-valued map.
pub fn read_nifti_real(path: impl AsRef<Path>) -> Result<RealVolume> {
    let (grid, _, values) = read_values(path.as_ref())?;
    RealVolume::new(grid, values.into_iter().map(|v| v as f32).collect())
}

fn encode_header(
    grid: &Grid,
    datatype: i16,
    bitpix: i16,
    cal: (f32, f32),
) -> [u8; SINGLE_FILE_OFFSET] {
    let mut h = [0u8; SINGLE_FILE_OFFSET];
    let put_i32 = |h: &mut [u8], at: usize, v: i32| h[at..at + 4].copy_from_slice(&v.to_le_bytes());
    let put_i16 = |h: &mut [u8], at: usize, v: i16| h[at..at + 2].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |h: &mut [u8], at: usize, v: f32| h[at..at + 4].copy_from_slice(&v.to_le_bytes());

    put_i32(&mut h, 0, HEADER_SIZE as i32);
    h[38] = b'r';
    let dim = [
        3,
        grid.dims[0] as i16,
        grid.dims[1] as i16,
        grid.dims[2] as i16,
        1,
        1,
        1,
        1,
    ];
    for (k, d) in dim.iter().enumerate() {
        put_i16(&mut h, 40 + 2 * k, *d);
    }
    put_i16(&mut h, 70, datatype);
    put_i16(&mut h, 72, bitpix);
    let pixdim = [
        1.0,
        grid.spacing[0] as f32,
        grid.spacing[1] as f32,
        grid.spacing[2] as f32,
        1.0,
        0.0,
        0.0,
        0.0,
    ];
    for (k, p) in pixdim.iter().enumerate() {
        put_f32(&mut h, 76 + 4 * k, *p);
    }
    put_f32(&mut h, 108, SINGLE_FILE_OFFSET as f32);
    put_f32(&mut h, 112, 1.0);
    put_f32(&mut h, 116, 0.0);
    h[123] = 2; // NIFTI_UNITS_MM
    put_f32(&mut h, 124, cal.1);
    put_f32(&mut h, 128, cal.0);
    put_i16(&mut h, 252, 1); // qform_code: scanner anatomical
    h[344..348].copy_from_slice(MAGIC_SINGLE);
    // bytes 348..352: extension flag, all zero
    h
}

fn encode(payload: NiftiPayload<'_>) -> Result<Vec<u8>> {
    let (grid, datatype, bitpix, body, cal): (&Grid, i16, i16, Vec<u8>, (f32, f32)) = match payload
    {
        NiftiPayload::Labels(v) => {
            let max = v.max_label();
            if max <= u8::MAX as u32 {
                let body = v.data().iter().map(|&l| l as u8).collect();
                (v.grid(), DT_UINT8, 8, body, (0.0, max as f32))
            } else if max <= i16::MAX as u32 {
                let body = v
                    .data()
                    .iter()
                    .flat_map(|&l| (l as i16).to_le_bytes())
                    .collect();
                (v.grid(), DT_INT16, 16, body, (0.0, max as f32))
            } else {
                return Err(Error::Unsupported(format!(
                    "label {max} does not fit a 16-bit NIfTI datatype"
                )));
            }
        }
        NiftiPayload::Mask(m) => {
            let body = m.data().iter().map(|&b| b as u8).collect();
            (m.grid(), DT_UINT8, 8, body, (0.0, 1.0))
        }
        NiftiPayload::Real(r) => {
            let body = r.data().iter().flat_map(|v| v.to_le_bytes()).collect();
            (r.grid(), DT_FLOAT32, 32, body, (0.0, 0.0))
        }
    };
    if grid.dims.iter().any(|&d| d > i16::MAX as usize) {
        return Err(Error::Unsupported(format!(
            "dimensions {:?} exceed NIfTI-1 limits",
            grid.dims
        )));
    }
    let mut out = Vec::with_capacity(SINGLE_FILE_OFFSET + body.len());
    out.extend_from_slice(&encode_header(grid, datatype, bitpix, cal));
    out.extend_from_slice(&body);
    Ok(out)
}

/// Writes a single-file NIfTI-1 image; a `.gz` suffix selects gzip.
pub fn write_nifti<'a>(payload: impl Into<NiftiPayload<'a>>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(payload.into())?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let gz = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("gz"));
    let result = if gz {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::default());
        enc.write_all(&bytes)
            .and_then(|_| enc.finish())
            .and_then(|mut w| w.flush())
    } else {
        let mut w = BufWriter::new(file);
        w.write_all(&bytes).and_then(|_| w.flush())
    };
    result.map_err(|e| Error::io(path, e))
}
