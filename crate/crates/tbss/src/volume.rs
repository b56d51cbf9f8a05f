//! Dense voxel containers and their on-disk formats.
//!
//! Volumes are stored row-major within a slice and slice-major across the
//! artery axis, so `index = (slice * rows + row) * cols + col`. The binary
//! `.tbv` format is little-endian: magic `TBV1`, a payload-kind byte, three
//! reserved zero bytes, `N, H, W` as `u32`, then the raw voxel values.
//! Loading validates every value and never clamps.

use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Label value for voxels outside both boundaries.
pub const BACKGROUND: u8 = 0;
/// Label value for the inner (lumen) boundary.
pub const INNER: u8 = 1;
/// Label value for the outer wall boundary.
pub const OUTER: u8 = 2;

const MAGIC: [u8; 4] = *b"TBV1";

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic {found:?}, expected \"TBV1\"")]
    BadMagic { found: [u8; 4] },
    #[error("unknown payload kind {0}")]
    UnknownKind(u8),
    #[error("payload kind is {found}, expected {expected}")]
    KindMismatch { expected: PayloadKind, found: PayloadKind },
    #[error("reserved header bytes must be zero")]
    BadReserved,
    #[error("payload truncated: expected {expected_voxels} voxels, got {found_bytes} payload bytes")]
    Truncated { expected_voxels: usize, found_bytes: usize },
    #[error("trailing bytes after {expected_voxels} voxels")]
    TrailingBytes { expected_voxels: usize },
    #[error("data length {len} does not match dims {dims}")]
    LengthMismatch { len: usize, dims: Dims },
    #[error("dims {0} exceed the u32 header range")]
    DimsTooLarge(Dims),
    #[error("probability {value} at index {index} outside [0, 1]")]
    ProbabilityOutOfRange { index: usize, value: f64 },
    #[error("label {value} at index {index} not in {{0, 1, 2}}")]
    BadLabel { index: usize, value: u8 },
    #[error("mask value {value} at index {index} not in {{0, 1}}")]
    BadMaskValue { index: usize, value: u8 },
    #[error("bad json: {0}")]
    BadJson(#[from] serde_json::Error),
    #[error("spacing field {field} must be finite and positive, got {value}")]
    BadSpacing { field: &'static str, value: f64 },
}

/// Payload kind byte stored in the `.tbv` header.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PayloadKind {
    Probability = 0,
    Label = 1,
    Mask = 2,
}

impl PayloadKind {
    fn from_byte(b: u8) -> Result<Self, VolumeError> {
        match b {
            0 => Ok(PayloadKind::Probability),
            1 => Ok(PayloadKind::Label),
            2 => Ok(PayloadKind::Mask),
            other => Err(VolumeError::UnknownKind(other)),
        }
    }
}

impl fmt::Display for PayloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PayloadKind::Probability => "probability (f32)",
            PayloadKind::Label => "label (u8)",
            PayloadKind::Mask => "mask (u8)",
        };
        f.write_str(name)
    }
}

/// Volume shape: `slices` along the artery, then `rows x cols` per slice.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Dims {
    pub slices: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Dims {
    pub fn new(slices: usize, rows: usize, cols: usize) -> Self {
        Dims { slices, rows, cols }
    }

    pub fn voxels(&self) -> usize {
        self.slices * self.rows * self.cols
    }

    pub fn slice_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn index(&self, slice: usize, row: usize, col: usize) -> usize {
        debug_assert!(slice < self.slices && row < self.rows && col < self.cols);
        (slice * self.rows + row) * self.cols + col
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.slices, self.rows, self.cols)
    }
}

/// One voxel position as `(slice, row, col)`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct VoxelCoord {
    pub slice: usize,
    pub row: usize,
    pub col: usize,
}

impl VoxelCoord {
    pub fn new(slice: usize, row: usize, col: usize) -> Self {
        VoxelCoord { slice, row, col }
    }
}

/// Per-boundary probability map with values in `[0, 1]`.
#[derive(Clone, PartialEq, Debug)]
pub struct ProbabilityVolume {
    dims: Dims,
    data: Vec<f32>,
}

impl ProbabilityVolume {
    pub fn new(dims: Dims, data: Vec<f32>) -> Result<Self, VolumeError> {
        if data.len() != dims.voxels() {
            return Err(VolumeError::LengthMismatch { len: data.len(), dims });
        }
        for (index, &v) in data.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(VolumeError::ProbabilityOutOfRange { index, value: v as f64 });
            }
        }
        Ok(ProbabilityVolume { dims, data })
    }

    pub fn zeros(dims: Dims) -> Self {
        ProbabilityVolume { dims, data: vec![0.0; dims.voxels()] }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn slice(&self, slice: usize) -> &[f32] {
        let len = self.dims.slice_len();
        &self.data[slice * len..(slice + 1) * len]
    }

    pub fn get(&self, slice: usize, row: usize, col: usize) -> f32 {
        self.data[self.dims.index(slice, row, col)]
    }

    /// Sets one voxel; `value` must already be a valid probability.
    pub fn set(&mut self, slice: usize, row: usize, col: usize, value: f32) {
        assert!((0.0..=1.0).contains(&value), "probability {value} outside [0, 1]");
        let i = self.dims.index(slice, row, col);
        self.data[i] = value;
    }
}

/// Voxel labels: 0 background, 1 inner boundary, 2 outer boundary.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LabelVolume {
    dims: Dims,
    data: Vec<u8>,
}

impl LabelVolume {
    pub fn new(dims: Dims, data: Vec<u8>) -> Result<Self, VolumeError> {
        if data.len() != dims.voxels() {
            return Err(VolumeError::LengthMismatch { len: data.len(), dims });
        }
        for (index, &v) in data.iter().enumerate() {
            if v > OUTER {
                return Err(VolumeError::BadLabel { index, value: v });
            }
        }
        Ok(LabelVolume { dims, data })
    }

    pub fn zeros(dims: Dims) -> Self {
        LabelVolume { dims, data: vec![0; dims.voxels()] }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn slice(&self, slice: usize) -> &[u8] {
        let len = self.dims.slice_len();
        &self.data[slice * len..(slice + 1) * len]
    }

    pub fn get(&self, slice: usize, row: usize, col: usize) -> u8 {
        self.data[self.dims.index(slice, row, col)]
    }

    pub fn set(&mut self, slice: usize, row: usize, col: usize, value: u8) {
        assert!(value <= OUTER, "label {value} not in {{0, 1, 2}}");
        let i = self.dims.index(slice, row, col);
        self.data[i] = value;
    }

    pub(crate) fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    /// Extracts one slice of one channel as a 2-d mask.
    pub fn channel_slice(&self, slice: usize, label: u8) -> SliceMask {
        let src = self.slice(slice);
        let data = src.iter().map(|&v| u8::from(v == label)).collect();
        SliceMask { rows: self.dims.rows, cols: self.dims.cols, data }
    }
}

/// Binary voxel mask over a full volume, values 0 or 1.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BinaryMask {
    dims: Dims,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(dims: Dims, data: Vec<u8>) -> Result<Self, VolumeError> {
        if data.len() != dims.voxels() {
            return Err(VolumeError::LengthMismatch { len: data.len(), dims });
        }
        for (index, &v) in data.iter().enumerate() {
            if v > 1 {
                return Err(VolumeError::BadMaskValue { index, value: v });
            }
        }
        Ok(BinaryMask { dims, data })
    }

    pub fn zeros(dims: Dims) -> Self {
        BinaryMask { dims, data: vec![0; dims.voxels()] }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn slice(&self, slice: usize) -> &[u8] {
        let len = self.dims.slice_len();
        &self.data[slice * len..(slice + 1) * len]
    }

    pub fn get(&self, slice: usize, row: usize, col: usize) -> bool {
        self.data[self.dims.index(slice, row, col)] != 0
    }

    pub fn set(&mut self, slice: usize, row: usize, col: usize, value: bool) {
        let i = self.dims.index(slice, row, col);
        self.data[i] = u8::from(value);
    }

    pub(crate) fn slice_mut(&mut self, slice: usize) -> &mut [u8] {
        let len = self.dims.slice_len();
        &mut self.data[slice * len..(slice + 1) * len]
    }

    pub fn any_in_slice(&self, slice: usize) -> bool {
        self.slice(slice).iter().any(|&v| v != 0)
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// Copies one slice out as a 2-d mask.
    pub fn slice_mask(&self, slice: usize) -> SliceMask {
        SliceMask {
            rows: self.dims.rows,
            cols: self.dims.cols,
            data: self.slice(slice).to_vec(),
        }
    }
}

/// Single-slice binary mask, values 0 or 1.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SliceMask {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl SliceMask {
    pub fn new(rows: usize, cols: usize, data: Vec<u8>) -> Result<Self, VolumeError> {
        if data.len() != rows * cols {
            return Err(VolumeError::LengthMismatch {
                len: data.len(),
                dims: Dims::new(1, rows, cols),
            });
        }
        for (index, &v) in data.iter().enumerate() {
            if v > 1 {
                return Err(VolumeError::BadMaskValue { index, value: v });
            }
        }
        Ok(SliceMask { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        SliceMask { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.cols + col] != 0
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.cols + col] = u8::from(value);
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }
}

/// Splits a label volume into per-channel binary masks `(inner, outer)`.
pub fn split_channels(labels: &LabelVolume) -> (BinaryMask, BinaryMask) {
    let dims = labels.dims();
    let inner = labels.data().iter().map(|&v| u8::from(v == INNER)).collect();
    let outer = labels.data().iter().map(|&v| u8::from(v == OUTER)).collect();
    (
        BinaryMask { dims, data: inner },
        BinaryMask { dims, data: outer },
    )
}

fn write_header(w: &mut impl Write, kind: PayloadKind, dims: Dims) -> Result<(), VolumeError> {
    let to_u32 = |v: usize| u32::try_from(v).map_err(|_| VolumeError::DimsTooLarge(dims));
    w.write_all(&MAGIC)?;
    w.write_all(&[kind as u8, 0, 0, 0])?;
    w.write_all(&to_u32(dims.slices)?.to_le_bytes())?;
    w.write_all(&to_u32(dims.rows)?.to_le_bytes())?;
    w.write_all(&to_u32(dims.cols)?.to_le_bytes())?;
    Ok(())
}

fn read_header(r: &mut impl Read, expected: PayloadKind) -> Result<Dims, VolumeError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(VolumeError::BadMagic { found: magic });
    }
    let mut kind_reserved = [0u8; 4];
    r.read_exact(&mut kind_reserved)?;
    let kind = PayloadKind::from_byte(kind_reserved[0])?;
    if kind_reserved[1..] != [0, 0, 0] {
        return Err(VolumeError::BadReserved);
    }
    if kind != expected {
        return Err(VolumeError::KindMismatch { expected, found: kind });
    }
    let mut dim = [0u8; 4];
    let mut next = || -> Result<usize, VolumeError> {
        r.read_exact(&mut dim)?;
        Ok(u32::from_le_bytes(dim) as usize)
    };
    Ok(Dims::new(next()?, next()?, next()?))
}

/// Reads the full payload, demanding exactly `expected_voxels * bytes_per` bytes.
fn read_payload(
    r: &mut impl Read,
    expected_voxels: usize,
    bytes_per: usize,
) -> Result<Vec<u8>, VolumeError> {
    let want = expected_voxels
        .checked_mul(bytes_per)
        .ok_or(VolumeError::Truncated { expected_voxels, found_bytes: 0 })?;
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() < want {
        return Err(VolumeError::Truncated { expected_voxels, found_bytes: buf.len() });
    }
    if buf.len() > want {
        return Err(VolumeError::TrailingBytes { expected_voxels });
    }
    Ok(buf)
}

/// Reads only the header of a `.tbv` file to learn which payload it holds.
pub fn peek_kind(path: impl AsRef<Path>) -> Result<PayloadKind, VolumeError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(VolumeError::BadMagic { found: magic });
    }
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind)?;
    PayloadKind::from_byte(kind[0])
}

pub fn save_probability_volume(
    vol: &ProbabilityVolume,
    path: impl AsRef<Path>,
) -> Result<(), VolumeError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, PayloadKind::Probability, vol.dims)?;
    for v in &vol.data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_probability_volume(path: impl AsRef<Path>) -> Result<ProbabilityVolume, VolumeError> {
    let mut r = BufReader::new(File::open(path)?);
    let dims = read_header(&mut r, PayloadKind::Probability)?;
    let bytes = read_payload(&mut r, dims.voxels(), 4)?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    ProbabilityVolume::new(dims, data)
}

pub fn save_label_volume(vol: &LabelVolume, path: impl AsRef<Path>) -> Result<(), VolumeError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, PayloadKind::Label, vol.dims)?;
    w.write_all(&vol.data)?;
    w.flush()?;
    Ok(())
}

pub fn load_label_volume(path: impl AsRef<Path>) -> Result<LabelVolume, VolumeError> {
    let mut r = BufReader::new(File::open(path)?);
    let dims = read_header(&mut r, PayloadKind::Label)?;
    let data = read_payload(&mut r, dims.voxels(), 1)?;
    LabelVolume::new(dims, data)
}

pub fn save_binary_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<(), VolumeError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, PayloadKind::Mask, mask.dims)?;
    w.write_all(&mask.data)?;
    w.flush()?;
    Ok(())
}

pub fn load_binary_mask(path: impl AsRef<Path>) -> Result<BinaryMask, VolumeError> {
    let mut r = BufReader::new(File::open(path)?);
    let dims = read_header(&mut r, PayloadKind::Mask)?;
    let data = read_payload(&mut r, dims.voxels(), 1)?;
    BinaryMask::new(dims, data)
}

/// Per-slice health flags, stored as `{"healthy": [...]}`.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SliceMeta {
    pub healthy: Vec<bool>,
}

pub fn save_slice_meta(meta: &SliceMeta, path: impl AsRef<Path>) -> Result<(), VolumeError> {
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(w, meta)?;
    Ok(())
}

pub fn load_slice_meta(path: impl AsRef<Path>) -> Result<SliceMeta, VolumeError> {
    let r = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(r)?)
}

/// Physical voxel spacing in millimetres.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct VoxelSpacing {
    pub in_plane_mm: f64,
    pub between_slice_mm: f64,
}

impl VoxelSpacing {
    pub fn validate(&self) -> Result<(), VolumeError> {
        if !(self.in_plane_mm.is_finite() && self.in_plane_mm > 0.0) {
            return Err(VolumeError::BadSpacing { field: "in_plane_mm", value: self.in_plane_mm });
        }
        if !(self.between_slice_mm.is_finite() && self.between_slice_mm > 0.0) {
            return Err(VolumeError::BadSpacing {
                field: "between_slice_mm",
                value: self.between_slice_mm,
            });
        }
        Ok(())
    }
}

pub fn save_spacing(spacing: &VoxelSpacing, path: impl AsRef<Path>) -> Result<(), VolumeError> {
    spacing.validate()?;
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(w, spacing)?;
    Ok(())
}

pub fn load_spacing(path: impl AsRef<Path>) -> Result<VoxelSpacing, VolumeError> {
    let r = BufReader::new(File::open(path)?);
    let spacing: VoxelSpacing = serde_json::from_reader(r)?;
    spacing.validate()?;
    Ok(spacing)
}
