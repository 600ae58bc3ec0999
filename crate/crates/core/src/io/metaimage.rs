//! Reader and writer for a MetaImage (`.mhd`/`.raw`, `.mha`) subset: 3-D,
//! uncompressed, little-endian `MET_SHORT` or `MET_FLOAT`, x varying fastest.
//!
//! Slice `i` of a volume read from disk sits at `Offset[z] + i * ElementSpacing[z]`,
//! negated along z when the `TransformMatrix` flips the z axis. Volumes are
//! stored in memory as `(z, y, x)`, so row spacing is `ElementSpacing[y]`
//! and column spacing is `ElementSpacing[x]`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::volume::{IntensityDomain, Volume, VolumeError};

/// `ElementDataFile` value for data appended to the header file.
pub const LOCAL_DATA: &str = "LOCAL";

/// Non-standard key recording whether float data is in HU or `[0, 1]`.
pub const DOMAIN_KEY: &str = "IntensityDomain";

#[derive(Debug, Error)]
pub enum MetaImageError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("header line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },
    #[error("dimensions {0:?} overflow the addressable byte count")]
    DimensionOverflow([usize; 3]),
    #[error("raw data has {actual} bytes, header implies {expected}")]
    TruncatedData { expected: usize, actual: usize },
    #[error("value {value} at voxel {index} does not fit in Int16 after rounding")]
    Range { value: f32, index: usize },
    #[error("container stores uniform slice spacing only; slice locations are not uniform")]
    NonUniformSpacing,
    #[error("Int16 output requires HU data, volume is {0}")]
    DomainMismatch(IntensityDomain),
    #[error("unsupported MetaImage feature: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MetaImageError + '_ {
    move |source| MetaImageError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementType {
    Int16,
    Float32,
}

impl ElementType {
    pub fn size(self) -> usize {
        match self {
            ElementType::Int16 => 2,
            ElementType::Float32 => 4,
        }
    }

    pub fn met_name(self) -> &'static str {
        match self {
            ElementType::Int16 => "MET_SHORT",
            ElementType::Float32 => "MET_FLOAT",
        }
    }

    fn from_met_name(name: &str) -> Option<Self> {
        match name {
            "MET_SHORT" => Some(ElementType::Int16),
            "MET_FLOAT" => Some(ElementType::Float32),
            _ => None,
        }
    }
}

/// Parsed header fields.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeHeader {
    /// `(nx, ny, nz)`.
    pub dims: [usize; 3],
    pub element_type: ElementType,
    /// `(x, y, z)` spacing in mm.
    pub element_spacing_mm: [f64; 3],
    pub offset_mm: [f64; 3],
    /// Slice order along z: `false` when the transform flips z.
    pub z_ascending: bool,
    pub intensity_domain: Option<IntensityDomain>,
    /// Relative path to the raw payload, or [`LOCAL_DATA`].
    pub data_file: String,
}

impl VolumeHeader {
    pub fn parse(text: &str) -> Result<Self, MetaImageError> {
        let mut dims = None;
        let mut element_type = None;
        let mut spacing = [1.0; 3];
        let mut offset = [0.0; 3];
        let mut z_ascending = true;
        let mut domain = None;
        let mut data_file = None;
        let mut ndims_seen = false;

        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim();
            if line.is_empty() {
                continue;
            }
            if data_file.is_some() {
                return Err(parse_err(
                    line_no,
                    "ElementDataFile",
                    "must be the last header field",
                ));
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(line_no, line, "expected `Key = Value`"))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "ObjectType" => {
                    if value != "Image" {
                        return Err(parse_err(
                            line_no,
                            key,
                            "only `Image` objects are supported",
                        ));
                    }
                }
                "NDims" => {
                    if value != "3" {
                        return Err(parse_err(line_no, key, "only 3-D volumes are supported"));
                    }
                    ndims_seen = true;
                }
                "DimSize" => {
                    let v: [usize; 3] = parse_triple(line_no, key, value)?;
                    if v.contains(&0) {
                        return Err(parse_err(line_no, key, "dimensions must be at least 1"));
                    }
                    dims = Some(v);
                }
                "ElementType" => {
                    element_type = Some(ElementType::from_met_name(value).ok_or_else(|| {
                        parse_err(line_no, key, "expected MET_SHORT or MET_FLOAT")
                    })?);
                }
                "ElementSpacing" | "ElementSize" => {
                    let v: [f64; 3] = parse_triple(line_no, key, value)?;
                    if v.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                        return Err(parse_err(line_no, key, "spacing must be positive"));
                    }
                    spacing = v;
                }
                "Offset" | "Position" | "Origin" => {
                    let v: [f64; 3] = parse_triple(line_no, key, value)?;
                    if v.iter().any(|o| !o.is_finite()) {
                        return Err(parse_err(line_no, key, "offset must be finite"));
                    }
                    offset = v;
                }
                "TransformMatrix" | "Rotation" | "Orientation" => {
                    z_ascending = parse_axis_flips(line_no, key, value)?;
                }
                "BinaryData" => {
                    if !value.eq_ignore_ascii_case("true") {
                        return Err(parse_err(line_no, key, "ASCII data is not supported"));
                    }
                }
                "BinaryDataByteOrderMSB" | "ElementByteOrderMSB" => {
                    if !value.eq_ignore_ascii_case("false") {
                        return Err(parse_err(line_no, key, "big-endian data is not supported"));
                    }
                }
                "CompressedData" => {
                    if !value.eq_ignore_ascii_case("false") {
                        return Err(parse_err(line_no, key, "compressed data is not supported"));
                    }
                }
                "ElementNumberOfChannels" => {
                    if value != "1" {
                        return Err(parse_err(
                            line_no,
                            key,
                            "only single-channel data is supported",
                        ));
                    }
                }
                DOMAIN_KEY => {
                    domain = Some(match value {
                        "HU" => IntensityDomain::Hu,
                        "Normalized01" => IntensityDomain::Normalized01,
                        _ => return Err(parse_err(line_no, key, "expected HU or Normalized01")),
                    });
                }
                "ElementDataFile" => {
                    if value.is_empty() {
                        return Err(parse_err(line_no, key, "missing file name"));
                    }
                    if value.starts_with("LIST") || value.contains('%') {
                        return Err(parse_err(line_no, key, "multi-file data is not supported"));
                    }
                    data_file = Some(value.to_string());
                }
                _ => {}
            }
        }

        let missing = |field: &str| parse_err(0, field, "required field is missing");
        if !ndims_seen {
            return Err(missing("NDims"));
        }
        Ok(Self {
            dims: dims.ok_or_else(|| missing("DimSize"))?,
            element_type: element_type.ok_or_else(|| missing("ElementType"))?,
            element_spacing_mm: spacing,
            offset_mm: offset,
            z_ascending,
            intensity_domain: domain,
            data_file: data_file.ok_or_else(|| missing("ElementDataFile"))?,
        })
    }

    /// Header text, `ElementDataFile` last, newline terminated.
    pub fn to_text(&self) -> String {
        let z_sign = if self.z_ascending { 1 } else { -1 };
        let [nx, ny, nz] = self.dims;
        let [sx, sy, sz] = self.element_spacing_mm;
        let [ox, oy, oz] = self.offset_mm;
        let mut out = String::new();
        let _ = writeln!(out, "ObjectType = Image");
        let _ = writeln!(out, "NDims = 3");
        let _ = writeln!(out, "BinaryData = True");
        let _ = writeln!(out, "BinaryDataByteOrderMSB = False");
        let _ = writeln!(out, "CompressedData = False");
        let _ = writeln!(out, "TransformMatrix = 1 0 0 0 1 0 0 0 {z_sign}");
        let _ = writeln!(out, "Offset = {ox} {oy} {oz}");
        let _ = writeln!(out, "ElementSpacing = {sx} {sy} {sz}");
        let _ = writeln!(out, "DimSize = {nx} {ny} {nz}");
        if let Some(domain) = self.intensity_domain {
            let _ = writeln!(out, "{DOMAIN_KEY} = {domain}");
        }
        let _ = writeln!(out, "ElementType = {}", self.element_type.met_name());
        let _ = writeln!(out, "ElementDataFile = {}", self.data_file);
        out
    }

    /// Payload size in bytes.
    pub fn data_len(&self) -> Result<usize, MetaImageError> {
        let [nx, ny, nz] = self.dims;
        nx.checked_mul(ny)
            .and_then(|v| v.checked_mul(nz))
            .and_then(|v| v.checked_mul(self.element_type.size()))
            .ok_or(MetaImageError::DimensionOverflow(self.dims))
    }
}

fn parse_err(line: usize, field: &str, message: &str) -> MetaImageError {
    MetaImageError::Parse {
        line,
        field: field.to_string(),
        message: message.to_string(),
    }
}

fn parse_triple<T: std::str::FromStr>(
    line: usize,
    key: &str,
    value: &str,
) -> Result<[T; 3], MetaImageError> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(parse_err(line, key, "expected three values"));
    }
    let mut out = Vec::with_capacity(3);
    for p in parts {
        out.push(
            p.parse::<T>()
                .map_err(|_| parse_err(line, key, &format!("cannot parse `{p}`")))?,
        );
    }
    out.try_into()
        .map_err(|_| parse_err(line, key, "expected three values"))
}

/// Only axis-aligned matrices with an optional z flip are accepted.
fn parse_axis_flips(line: usize, key: &str, value: &str) -> Result<bool, MetaImageError> {
    let m: Vec<f64> = value
        .split_whitespace()
        .map(|p| p.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| parse_err(line, key, "cannot parse matrix"))?;
    if m.len() != 9 {
        return Err(parse_err(line, key, "expected nine values"));
    }
    let off_diagonal_zero = [1, 2, 3, 5, 6, 7].iter().all(|&i| m[i] == 0.0);
    if !off_diagonal_zero || m[0] != 1.0 || m[4] != 1.0 || m[8].abs() != 1.0 {
        return Err(parse_err(
            line,
            key,
            "only identity orientation or a z flip is supported",
        ));
    }
    Ok(m[8] > 0.0)
}

/// Read a volume from a `.mhd` or `.mha` header.
///
/// `Int16` data is interpreted as HU. Float data uses the
/// `IntensityDomain` header key when present, otherwise it is taken as
/// `Normalized01` if every value lies in `[0, 1]` and HU if not.
pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume, MetaImageError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    let header_end = header_length(&bytes);
    let text = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| parse_err(0, "header", "header is not valid UTF-8"))?;
    let header = VolumeHeader::parse(text)?;
    let expected = header.data_len()?;

    let payload = if header.data_file == LOCAL_DATA {
        bytes[header_end..].to_vec()
    } else {
        let data_path = path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&header.data_file);
        fs::read(&data_path).map_err(io_err(&data_path))?
    };
    if payload.len() != expected {
        return Err(MetaImageError::TruncatedData {
            expected,
            actual: payload.len(),
        });
    }
    volume_from_payload(&header, &payload)
}

/// Byte length of the header: everything up to and including the line
/// holding `ElementDataFile`, or the whole input if there is none.
fn header_length(bytes: &[u8]) -> usize {
    let mut start = 0;
    while start < bytes.len() {
        let end = bytes[start..]
            .iter()
            .position(|&b| b == b'\n')
            .map_or(bytes.len(), |p| start + p + 1);
        let line = String::from_utf8_lossy(&bytes[start..end]);
        if line.trim_start().starts_with("ElementDataFile") {
            return end;
        }
        start = end;
    }
    bytes.len()
}

fn volume_from_payload(header: &VolumeHeader, payload: &[u8]) -> Result<Volume, MetaImageError> {
    let [nx, ny, nz] = header.dims;
    let values: Vec<f32> = match header.element_type {
        ElementType::Int16 => payload
            .chunks_exact(2)
            .map(|c| f32::from(i16::from_le_bytes([c[0], c[1]])))
            .collect(),
        ElementType::Float32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
    };
    let domain = match (header.element_type, header.intensity_domain) {
        (ElementType::Int16, _) => IntensityDomain::Hu,
        (ElementType::Float32, Some(d)) => d,
        (ElementType::Float32, None) => {
            if values.iter().all(|v| (0.0..=1.0).contains(v)) {
                IntensityDomain::Normalized01
            } else {
                IntensityDomain::Hu
            }
        }
    };
    let voxels = Array3::from_shape_vec((nz, ny, nx), values)
        .expect("payload length checked against header dimensions");
    let [sx, sy, sz] = header.element_spacing_mm;
    let step = if header.z_ascending { sz } else { -sz };
    let oz = header.offset_mm[2];
    let locations = (0..nz).map(|i| oz + i as f64 * step).collect();
    Ok(Volume::new(voxels, (sy, sx), locations, domain)?)
}

/// Write `volume` as a header plus payload.
///
/// A `.mha` path gets the payload appended to the header; anything else
/// gets a sibling `.raw` file. Slice locations must be uniform.
pub fn write_volume(
    volume: &Volume,
    path: impl AsRef<Path>,
    element_type: ElementType,
) -> Result<(), MetaImageError> {
    let path = path.as_ref();
    let locations = volume.slice_locations_mm();
    let (z_step, z_ascending) = match volume.uniform_increment_mm() {
        Some(step) => (step.abs(), step > 0.0),
        None if locations.len() == 1 => (1.0, true),
        None => return Err(MetaImageError::NonUniformSpacing),
    };
    let payload = encode_payload(volume, element_type)?;

    let local = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("mha"));
    let data_file = if local {
        LOCAL_DATA.to_string()
    } else {
        let stem = path.file_stem().ok_or_else(|| {
            MetaImageError::Unsupported(format!("no file name in {}", path.display()))
        })?;
        format!("{}.raw", stem.to_string_lossy())
    };
    let (rows, cols) = volume.in_plane_dims();
    let (row_spacing, col_spacing) = volume.pixel_spacing_mm();
    let header = VolumeHeader {
        dims: [cols, rows, volume.n_slices()],
        element_type,
        element_spacing_mm: [col_spacing, row_spacing, z_step],
        offset_mm: [0.0, 0.0, locations[0]],
        z_ascending,
        intensity_domain: match element_type {
            ElementType::Int16 => None,
            ElementType::Float32 => Some(volume.intensity_domain()),
        },
        data_file: data_file.clone(),
    };
    let text = header.to_text();

    if local {
        let mut bytes = text.into_bytes();
        bytes.extend_from_slice(&payload);
        fs::write(path, bytes).map_err(io_err(path))?;
    } else {
        let data_path = path.with_file_name(&data_file);
        fs::write(&data_path, &payload).map_err(io_err(&data_path))?;
        fs::write(path, text).map_err(io_err(path))?;
    }
    Ok(())
}

fn encode_payload(volume: &Volume, element_type: ElementType) -> Result<Vec<u8>, MetaImageError> {
    let voxels = volume.voxels();
    let mut out = Vec::with_capacity(voxels.len() * element_type.size());
    match element_type {
        ElementType::Float32 => {
            for &v in voxels.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        ElementType::Int16 => {
            if volume.intensity_domain() != IntensityDomain::Hu {
                return Err(MetaImageError::DomainMismatch(volume.intensity_domain()));
            }
            for (index, &v) in voxels.iter().enumerate() {
                let r = v.round();
                if !(f32::from(i16::MIN)..=f32::from(i16::MAX)).contains(&r) {
                    return Err(MetaImageError::Range { value: v, index });
                }
                out.extend_from_slice(&(r as i16).to_le_bytes());
            }
        }
    }
    Ok(out)
}
