//! Minimal single-file NIfTI-1 (`.nii` / `.nii.gz`) reader and writer.
//!
//! Only 3D volumes with datatype uint8 (2), int16 (4) or float32 (16) are
//! supported. Geometry comes from `dim`, `pixdim` and `qoffset_*`; rotation
//! quaternions and sform matrices are ignored with a recorded warning.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, CountMap, VolumeGeometry};

pub const HEADER_SIZE: usize = 348;
/// Header plus the 4-byte extension flag.
pub const VOX_OFFSET: usize = 352;
pub const MAGIC: &[u8; 4] = b"n+1\0";

pub const DT_UINT8: i16 = 2;
pub const DT_INT16: i16 = 4;
pub const DT_FLOAT32: i16 = 16;

const NIFTI_UNITS_MM: u8 = 2;
const NIFTI_XFORM_SCANNER_ANAT: i16 = 1;

/// Voxel payload in its on-disk type.
#[derive(Debug, Clone, PartialEq)]
pub enum VolumeData {
    U8(Vec<u8>),
    I16(Vec<i16>),
    F32(Vec<f32>),
}

impl VolumeData {
    pub fn len(&self) -> usize {
        match self {
            VolumeData::U8(v) => v.len(),
            VolumeData::I16(v) => v.len(),
            VolumeData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn datatype(&self) -> i16 {
        match self {
            VolumeData::U8(_) => DT_UINT8,
            VolumeData::I16(_) => DT_INT16,
            VolumeData::F32(_) => DT_FLOAT32,
        }
    }

    fn bitpix(&self) -> i16 {
        match self {
            VolumeData::U8(_) => 8,
            VolumeData::I16(_) => 16,
            VolumeData::F32(_) => 32,
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            VolumeData::U8(v) => v.iter().map(|&x| x as f64).collect(),
            VolumeData::I16(v) => v.iter().map(|&x| x as f64).collect(),
            VolumeData::F32(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }

    /// Any nonzero value is lesioned; NaN counts as background.
    pub fn to_bools(&self) -> Vec<bool> {
        match self {
            VolumeData::U8(v) => v.iter().map(|&x| x != 0).collect(),
            VolumeData::I16(v) => v.iter().map(|&x| x != 0).collect(),
            VolumeData::F32(v) => v.iter().map(|&x| x != 0.0 && !x.is_nan()).collect(),
        }
    }

    pub fn from_mask(mask: &BinaryMask) -> Self {
        VolumeData::U8(mask.voxels().iter().map(|&v| v as u8).collect())
    }

    pub fn from_counts(map: &CountMap) -> Result<Self> {
        map.counts
            .iter()
            .map(|&c| {
                i16::try_from(c)
                    .map_err(|_| Error::nifti("datatype", format!("count {c} exceeds int16 range")))
            })
            .collect::<Result<Vec<_>>>()
            .map(VolumeData::I16)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NiftiVolume {
    pub geometry: VolumeGeometry,
    pub data: VolumeData,
    /// Non-fatal header oddities, e.g. ignored rotations.
    pub warnings: Vec<String>,
}

impl NiftiVolume {
    pub fn into_mask(self) -> Result<BinaryMask> {
        BinaryMask::new(self.geometry, self.data.to_bools())
    }
}

pub fn read_nifti(path: impl AsRef<Path>) -> Result<NiftiVolume> {
    let path = path.as_ref();
    let mut raw = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut raw)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut inflated = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut inflated)?;
        raw = inflated;
    }
    parse_nifti(&raw)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    read_nifti(path)?.into_mask()
}

fn le_i16(b: &[u8], at: usize) -> i16 {
    i16::from_le_bytes([b[at], b[at + 1]])
}

fn le_i32(b: &[u8], at: usize) -> i32 {
    i32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn le_f32(b: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

/// Parses an uncompressed single-file NIfTI-1 image.
pub fn parse_nifti(bytes: &[u8]) -> Result<NiftiVolume> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::nifti(
            "sizeof_hdr",
            format!("file has {} bytes, header needs {HEADER_SIZE}", bytes.len()),
        ));
    }
    let sizeof_hdr = le_i32(bytes, 0);
    if sizeof_hdr != HEADER_SIZE as i32 {
        let hint = if sizeof_hdr.swap_bytes() == HEADER_SIZE as i32 {
            " (big-endian files are not supported)"
        } else {
            ""
        };
        return Err(Error::nifti("sizeof_hdr", format!("expected 348, found {sizeof_hdr}{hint}")));
    }
    if &bytes[344..348] != MAGIC {
        return Err(Error::nifti("magic", format!("bad magic {:?}", &bytes[344..348])));
    }

    let dim: Vec<i16> = (0..8).map(|k| le_i16(bytes, 40 + 2 * k)).collect();
    if dim[0] != 3 {
        return Err(Error::nifti("dim", format!("dim[0] must be 3, found {}", dim[0])));
    }
    if dim[1..4].iter().any(|&d| d < 1) {
        return Err(Error::nifti("dim", format!("non-positive extent in {:?}", &dim[1..4])));
    }
    let dims = [dim[1] as usize, dim[2] as usize, dim[3] as usize];

    let datatype = le_i16(bytes, 70);
    let bytes_per_voxel = match datatype {
        DT_UINT8 => 1,
        DT_INT16 => 2,
        DT_FLOAT32 => 4,
        other => {
            return Err(Error::nifti("datatype", format!("unsupported datatype code {other}")))
        }
    };

    let pixdim: Vec<f32> = (0..8).map(|k| le_f32(bytes, 76 + 4 * k)).collect();
    let spacing = [pixdim[1] as f64, pixdim[2] as f64, pixdim[3] as f64];
    let origin = [le_f32(bytes, 268) as f64, le_f32(bytes, 272) as f64, le_f32(bytes, 276) as f64];
    let geometry = VolumeGeometry::new(dims, spacing, origin)
        .map_err(|e| Error::nifti("pixdim", e.to_string()))?;

    let mut warnings = Vec::new();
    let quatern = [le_f32(bytes, 256), le_f32(bytes, 260), le_f32(bytes, 264)];
    if quatern.iter().any(|&q| q != 0.0) {
        warnings.push(format!("ignoring qform rotation quaternion {quatern:?}"));
    }
    if le_i16(bytes, 254) > 0 {
        warnings.push("ignoring sform matrix; geometry taken from pixdim and qoffset".into());
    }

    let vox_offset = le_f32(bytes, 108);
    if !(vox_offset >= HEADER_SIZE as f32) || vox_offset.fract() != 0.0 {
        return Err(Error::nifti("vox_offset", format!("invalid offset {vox_offset}")));
    }
    let start = vox_offset as usize;
    let n = geometry.len();
    let end = start + n * bytes_per_voxel;
    if bytes.len() < end {
        return Err(Error::nifti(
            "vox_offset",
            format!("truncated payload: need {end} bytes, file has {}", bytes.len()),
        ));
    }
    let payload = &bytes[start..end];
    let mut data = match datatype {
        DT_UINT8 => VolumeData::U8(payload.to_vec()),
        DT_INT16 => VolumeData::I16(
            payload.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])).collect(),
        ),
        _ => VolumeData::F32(
            payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect(),
        ),
    };

    let slope = le_f32(bytes, 112);
    let inter = le_f32(bytes, 116);
    let identity = (slope == 0.0 || slope == 1.0) && inter == 0.0;
    if !identity && slope.is_finite() && inter.is_finite() {
        warnings.push(format!("applied scl_slope {slope} and scl_inter {inter}"));
        data = VolumeData::F32(data.to_f64().iter().map(|&v| (v as f32) * slope + inter).collect());
    }

    Ok(NiftiVolume { geometry, data, warnings })
}

/// Serializes a volume as header, zeroed extension flag, then payload.
pub fn encode_nifti(geometry: &VolumeGeometry, data: &VolumeData) -> Result<Vec<u8>> {
    if data.len() != geometry.len() {
        return Err(Error::VolumeLength { expected: geometry.len(), actual: data.len() });
    }
    let mut dims = [0i16; 3];
    for (out, &d) in dims.iter_mut().zip(&geometry.dims) {
        *out = i16::try_from(d)
            .map_err(|_| Error::nifti("dim", format!("extent {d} exceeds int16 range")))?;
    }

    let mut h = vec![0u8; VOX_OFFSET];
    let put_i16 = |h: &mut [u8], at: usize, v: i16| h[at..at + 2].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |h: &mut [u8], at: usize, v: f32| h[at..at + 4].copy_from_slice(&v.to_le_bytes());

    h[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    h[38] = b'r';
    let dim = [3, dims[0], dims[1], dims[2], 1, 1, 1, 1];
    for (k, &d) in dim.iter().enumerate() {
        put_i16(&mut h, 40 + 2 * k, d);
    }
    put_i16(&mut h, 70, data.datatype());
    put_i16(&mut h, 72, data.bitpix());
    // pixdim[0] is qfac
    put_f32(&mut h, 76, 1.0);
    for axis in 0..3 {
        put_f32(&mut h, 80 + 4 * axis, geometry.spacing[axis] as f32);
    }
    put_f32(&mut h, 108, VOX_OFFSET as f32);
    put_f32(&mut h, 112, 1.0);
    put_f32(&mut h, 116, 0.0);
    h[123] = NIFTI_UNITS_MM;
    put_i16(&mut h, 252, NIFTI_XFORM_SCANNER_ANAT);
    for axis in 0..3 {
        put_f32(&mut h, 268 + 4 * axis, geometry.origin[axis] as f32);
    }
    h[344..348].copy_from_slice(MAGIC);

    let mut out = h;
    out.reserve(data.len() * (data.bitpix() as usize / 8));
    match data {
        VolumeData::U8(v) => out.extend_from_slice(v),
        VolumeData::I16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        VolumeData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    Ok(out)
}

/// Writes a volume; paths ending in `.gz` are gzip-compressed.
pub fn write_nifti(
    geometry: &VolumeGeometry,
    data: &VolumeData,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_nifti(geometry, data)?;
    let file = BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|e| e == "gz") {
        let mut gz = GzEncoder::new(file, Compression::default());
        gz.write_all(&bytes)?;
        gz.finish()?.flush()?;
    } else {
        let mut file = file;
        file.write_all(&bytes)?;
        file.flush()?;
    }
    Ok(())
}

pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    write_nifti(mask.geometry(), &VolumeData::from_mask(mask), path)
}

/// Float map with `NaN` wherever `values` is undefined.
pub fn write_f32_map(geometry: &VolumeGeometry, values: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let data = VolumeData::F32(values.iter().map(|&v| v as f32).collect());
    write_nifti(geometry, &data, path)
}
