//! The on-disk tensor container: little-endian, magic "SART", version 1,
//! a one-byte domain tag (0 linear, 1 log, 2 normalized log, 3 complex),
//! a one-byte rank, u32 dimensions, then a float32 payload, row-major and
//! channel-last. Complex values are interleaved re/im pairs. Reductions
//! elsewhere stay in f64; only storage is 32-bit.

use std::path::Path;

use num_complex::Complex64;
use sarad_core::detect::{normalize_map, AnomalyMap};
use sarad_core::{ComplexSlcImage, Domain, SarImage};

use crate::error::{format_err, io_err, Result};

pub const TENSOR_MAGIC: [u8; 4] = *b"SART";
pub const TENSOR_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorTag {
    Linear = 0,
    Log = 1,
    NormLog = 2,
    Complex = 3,
}

impl TensorTag {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Self::Linear),
            1 => Some(Self::Log),
            2 => Some(Self::NormLog),
            3 => Some(Self::Complex),
            _ => None,
        }
    }

    pub fn from_domain(domain: Domain) -> Self {
        match domain {
            Domain::LinearIntensity => Self::Linear,
            Domain::LogIntensity => Self::Log,
            Domain::NormalizedLog => Self::NormLog,
        }
    }

    pub fn to_domain(self) -> Option<Domain> {
        match self {
            Self::Linear => Some(Domain::LinearIntensity),
            Self::Log => Some(Domain::LogIntensity),
            Self::NormLog => Some(Domain::NormalizedLog),
            Self::Complex => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorPayload {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl TensorPayload {
    pub fn len(&self) -> usize {
        match self {
            Self::Real(v) => v.len(),
            Self::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One tensor as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub tag: TensorTag,
    pub dims: Vec<usize>,
    pub payload: TensorPayload,
}

impl TensorFile {
    pub fn from_image(img: &SarImage) -> Self {
        Self {
            tag: TensorTag::from_domain(img.domain()),
            dims: vec![img.height(), img.width(), img.channels()],
            payload: TensorPayload::Real(img.data().to_vec()),
        }
    }

    pub fn from_slc(img: &ComplexSlcImage) -> Self {
        Self {
            tag: TensorTag::Complex,
            dims: vec![img.height(), img.width(), img.channels()],
            payload: TensorPayload::Complex(img.data().to_vec()),
        }
    }

    /// Maps are rank 2; normalized maps keep the normalized-log tag.
    pub fn from_map(map: &AnomalyMap) -> Self {
        Self {
            tag: if map.is_normalized() {
                TensorTag::NormLog
            } else {
                TensorTag::Linear
            },
            dims: vec![map.height(), map.width()],
            payload: TensorPayload::Real(map.scores().to_vec()),
        }
    }
}

fn written_err(path: &Path, message: String) -> crate::error::CliError {
    format_err(path, message)
}

/// Serializes to the SART layout. Values are narrowed to f32.
pub fn write_tensor(path: &Path, tensor: &TensorFile) -> Result<()> {
    if tensor.dims.len() > u8::MAX as usize {
        return Err(written_err(
            path,
            format!("rank {} exceeds the format limit of 255", tensor.dims.len()),
        ));
    }
    let mut count = 1usize;
    for &d in &tensor.dims {
        if u32::try_from(d).is_err() {
            return Err(written_err(path, format!("dimension {d} overflows u32")));
        }
        count = count.checked_mul(d).ok_or_else(|| {
            written_err(path, "element count overflows".to_string())
        })?;
    }
    if count != tensor.payload.len() {
        return Err(written_err(
            path,
            format!(
                "dims {:?} imply {count} values, payload has {}",
                tensor.dims,
                tensor.payload.len()
            ),
        ));
    }
    let payload_bytes = match &tensor.payload {
        TensorPayload::Real(_) => count * 4,
        TensorPayload::Complex(_) => count * 8,
    };
    let mut buf = Vec::with_capacity(12 + 4 * tensor.dims.len() + payload_bytes);
    buf.extend_from_slice(&TENSOR_MAGIC);
    buf.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
    buf.push(tensor.tag as u8);
    buf.push(tensor.dims.len() as u8);
    for &d in &tensor.dims {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    match &tensor.payload {
        TensorPayload::Real(values) => {
            for &v in values {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        TensorPayload::Complex(values) => {
            for z in values {
                buf.extend_from_slice(&(z.re as f32).to_le_bytes());
                buf.extend_from_slice(&(z.im as f32).to_le_bytes());
            }
        }
    }
    std::fs::write(path, buf).map_err(|e| io_err(path, e))
}

pub fn read_tensor(path: &Path) -> Result<TensorFile> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() < 8 {
        return Err(format_err(path, "file shorter than the tensor header"));
    }
    if bytes[0..4] != TENSOR_MAGIC {
        return Err(format_err(path, "wrong magic bytes, not a SART tensor"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != TENSOR_VERSION {
        return Err(format_err(path, format!("unsupported format version {version}")));
    }
    let tag = TensorTag::from_byte(bytes[6])
        .ok_or_else(|| format_err(path, format!("unknown domain tag {}", bytes[6])))?;
    let rank = bytes[7] as usize;
    let header = 8 + 4 * rank;
    if bytes.len() < header {
        return Err(format_err(path, "header truncated inside the dimension list"));
    }
    let mut dims = Vec::with_capacity(rank);
    let mut count = 1usize;
    for i in 0..rank {
        let off = 8 + 4 * i;
        let d = u32::from_le_bytes([bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]])
            as usize;
        count = count
            .checked_mul(d)
            .ok_or_else(|| format_err(path, "element count overflows"))?;
        dims.push(d);
    }
    let value_bytes = if tag == TensorTag::Complex { 8 } else { 4 };
    let expected = count
        .checked_mul(value_bytes)
        .ok_or_else(|| format_err(path, "payload size overflows"))?;
    let body = &bytes[header..];
    if body.len() < expected {
        return Err(format_err(
            path,
            format!("truncated payload: {} bytes, expected {expected}", body.len()),
        ));
    }
    if body.len() > expected {
        return Err(format_err(
            path,
            format!("{} trailing bytes after the payload", body.len() - expected),
        ));
    }
    let f32_at = |i: usize| {
        f32::from_le_bytes([body[4 * i], body[4 * i + 1], body[4 * i + 2], body[4 * i + 3]]) as f64
    };
    let payload = if tag == TensorTag::Complex {
        let values = (0..count)
            .map(|i| Complex64::new(f32_at(2 * i), f32_at(2 * i + 1)))
            .collect();
        TensorPayload::Complex(values)
    } else {
        TensorPayload::Real((0..count).map(f32_at).collect())
    };
    Ok(TensorFile { tag, dims, payload })
}

pub fn write_image(path: &Path, img: &SarImage) -> Result<()> {
    write_tensor(path, &TensorFile::from_image(img))
}

pub fn read_image(path: &Path) -> Result<SarImage> {
    let t = read_tensor(path)?;
    let domain = t
        .tag
        .to_domain()
        .ok_or_else(|| format_err(path, "expected a real image, found complex data"))?;
    let [h, w, c] = rank3(path, &t)?;
    let TensorPayload::Real(values) = t.payload else {
        return Err(format_err(path, "real tag with complex payload"));
    };
    Ok(SarImage::new(h, w, c, values, domain)?)
}

pub fn write_slc(path: &Path, img: &ComplexSlcImage) -> Result<()> {
    write_tensor(path, &TensorFile::from_slc(img))
}

pub fn read_slc(path: &Path) -> Result<ComplexSlcImage> {
    let t = read_tensor(path)?;
    if t.tag != TensorTag::Complex {
        return Err(format_err(path, "expected a complex tensor"));
    }
    let [h, w, c] = rank3(path, &t)?;
    let TensorPayload::Complex(values) = t.payload else {
        return Err(format_err(path, "complex tag with real payload"));
    };
    Ok(ComplexSlcImage::new(h, w, c, values)?)
}

pub fn write_map(path: &Path, map: &AnomalyMap) -> Result<()> {
    write_tensor(path, &TensorFile::from_map(map))
}

/// Reads a rank-2 map; the normalized-log tag restores the normalized
/// state (renormalizing a normalized map is the identity).
pub fn read_map(path: &Path) -> Result<AnomalyMap> {
    let t = read_tensor(path)?;
    if t.dims.len() != 2 {
        return Err(format_err(path, format!("map must be rank 2, got {}", t.dims.len())));
    }
    let TensorPayload::Real(values) = t.payload else {
        return Err(format_err(path, "anomaly maps are real-valued"));
    };
    let raw = AnomalyMap::new_raw(t.dims[0], t.dims[1], values)?;
    match t.tag {
        TensorTag::NormLog => Ok(normalize_map(&raw)),
        TensorTag::Linear => Ok(raw),
        _ => Err(format_err(path, "maps use the linear or normalized tag")),
    }
}

/// Labels ride in the container as a rank-2 grid of 0/1 values.
pub fn write_labels(path: &Path, labels: &[bool], height: usize, width: usize) -> Result<()> {
    let values: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    write_tensor(
        path,
        &TensorFile {
            tag: TensorTag::Linear,
            dims: vec![height, width],
            payload: TensorPayload::Real(values),
        },
    )
}

pub fn read_labels(path: &Path) -> Result<(Vec<bool>, usize, usize)> {
    let t = read_tensor(path)?;
    if t.dims.len() != 2 || t.tag != TensorTag::Linear {
        return Err(format_err(path, "labels must be a rank-2 linear tensor"));
    }
    let TensorPayload::Real(values) = t.payload else {
        return Err(format_err(path, "labels are real-valued"));
    };
    let mut labels = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        match *v {
            v if v == 0.0 => labels.push(false),
            v if v == 1.0 => labels.push(true),
            v => {
                return Err(format_err(path, format!("label {v} at index {i} is not 0 or 1")));
            }
        }
    }
    Ok((labels, t.dims[0], t.dims[1]))
}

fn rank3(path: &Path, t: &TensorFile) -> Result<[usize; 3]> {
    if t.dims.len() != 3 {
        return Err(format_err(
            path,
            format!("expected a rank-3 image, got rank {}", t.dims.len()),
        ));
    }
    Ok([t.dims[0], t.dims[1], t.dims[2]])
}
