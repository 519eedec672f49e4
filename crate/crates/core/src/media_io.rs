//! Raw video frames and weight-map rasters.
//!
//! Video is headerless planar 4:2:0 with 8-bit samples; only the luma plane
//! is ever loaded. Weight maps use the OVWM layout:
//!
//! ```text
//! "OVWM" | width u32le | height u32le | frame_index u32le | width*height f32le
//! ```

use std::io::{Read, Seek, SeekFrom, Write};

use crate::error::{Error, Result};
use crate::projection::ProjectionKind;

/// Peak intensity of 8-bit content.
pub const Y_MAX: f64 = 255.0;

/// Single-channel 8-bit raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePlane {
    width: usize,
    height: usize,
    samples: Vec<u8>,
}

impl FramePlane {
    pub fn new(width: usize, height: usize, samples: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("frame dimensions must be positive"));
        }
        if samples.len() != width * height {
            return Err(Error::dims(
                format!("{} samples", width * height),
                format!("{}", samples.len()),
            ));
        }
        Ok(FramePlane {
            width,
            height,
            samples,
        })
    }

    /// A frame filled with `value`.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self> {
        let samples = (0..width * height)
            .map(|i| f(i % width, i / width))
            .collect();
        Self::new(width, height, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.samples[y * self.width + x]
    }

    pub(crate) fn same_size(&self, other: &FramePlane) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::dims(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", other.width, other.height),
            ));
        }
        Ok(())
    }
}

/// Geometry and timing of a raw video.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VideoMeta {
    pub width: usize,
    pub height: usize,
    pub frame_rate: f64,
    pub frame_count: usize,
    pub projection: ProjectionKind,
}

impl VideoMeta {
    pub fn new(
        width: usize,
        height: usize,
        frame_rate: f64,
        frame_count: usize,
        projection: ProjectionKind,
    ) -> Result<Self> {
        let meta = VideoMeta {
            width,
            height,
            frame_rate,
            frame_count,
            projection,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1.0..=240.0).contains(&self.frame_rate) {
            return Err(Error::invalid(format!(
                "frame rate {} outside [1, 240]",
                self.frame_rate
            )));
        }
        if self.frame_count == 0 {
            return Err(Error::invalid("frame count must be positive"));
        }
        self.projection.check_dims(self.width, self.height)
    }

    /// Bytes per 4:2:0 frame: luma plus two quarter-size chroma planes.
    pub fn frame_bytes(&self) -> usize {
        frame_bytes(self.width, self.height)
    }

    pub fn duration_seconds(&self) -> f64 {
        self.frame_count as f64 / self.frame_rate
    }
}

pub fn frame_bytes(width: usize, height: usize) -> usize {
    width * height + 2 * width.div_ceil(2) * height.div_ceil(2)
}

/// Reads the luma plane of frame `index` from a raw 4:2:0 stream.
pub fn read_frame<R: Read + Seek>(
    source: &mut R,
    meta: &VideoMeta,
    index: usize,
) -> Result<FramePlane> {
    if index >= meta.frame_count {
        return Err(Error::invalid(format!(
            "frame {index} out of range (video has {} frames)",
            meta.frame_count
        )));
    }
    let offset = (index * meta.frame_bytes()) as u64;
    source.seek(SeekFrom::Start(offset))?;
    let mut samples = vec![0u8; meta.width * meta.height];
    source
        .read_exact(&mut samples)
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => {
                Error::Format(format!("stream truncated inside frame {index}"))
            }
            _ => Error::Io(e),
        })?;
    FramePlane::new(meta.width, meta.height, samples)
}

/// Appends one 4:2:0 frame with the given luma and neutral (128) chroma.
pub fn write_frame<W: Write>(sink: &mut W, frame: &FramePlane) -> Result<()> {
    sink.write_all(frame.samples())?;
    let chroma = frame.width.div_ceil(2) * frame.height.div_ceil(2);
    sink.write_all(&vec![128u8; 2 * chroma])?;
    Ok(())
}

/// Anything frames can be pulled from by index.
pub trait FrameSource {
    fn frame_count(&self) -> usize;
    fn frame(&mut self, index: usize) -> Result<FramePlane>;
}

impl FrameSource for Vec<FramePlane> {
    fn frame_count(&self) -> usize {
        self.len()
    }

    fn frame(&mut self, index: usize) -> Result<FramePlane> {
        self.get(index)
            .cloned()
            .ok_or_else(|| Error::invalid(format!("frame {index} out of range")))
    }
}

/// A raw 4:2:0 video backed by any seekable reader.
pub struct RawVideo<R> {
    reader: R,
    meta: VideoMeta,
}

impl<R: Read + Seek> RawVideo<R> {
    pub fn new(reader: R, meta: VideoMeta) -> Self {
        RawVideo { reader, meta }
    }

    pub fn meta(&self) -> &VideoMeta {
        &self.meta
    }
}

impl RawVideo<std::io::BufReader<std::fs::File>> {
    /// Opens a raw file; the frame count is derived from the file length when
    /// `meta.frame_count` is 0.
    pub fn open(path: &std::path::Path, mut meta: VideoMeta) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let len = file.metadata()?.len() as usize;
        let per_frame = meta.frame_bytes();
        if meta.frame_count == 0 {
            meta.frame_count = len / per_frame;
        }
        if len < meta.frame_count * per_frame || meta.frame_count == 0 {
            return Err(Error::Format(format!(
                "{} holds {len} bytes, fewer than {} frames of {per_frame} bytes",
                path.display(),
                meta.frame_count.max(1)
            )));
        }
        meta.validate()?;
        Ok(RawVideo::new(std::io::BufReader::new(file), meta))
    }
}

impl<R: Read + Seek> FrameSource for RawVideo<R> {
    fn frame_count(&self) -> usize {
        self.meta.frame_count
    }

    fn frame(&mut self, index: usize) -> Result<FramePlane> {
        read_frame(&mut self.reader, &self.meta, index)
    }
}

/// Non-negative per-pixel weights aligned to a frame raster.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    frame_index: u32,
}

impl WeightMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("weight map dimensions must be positive"));
        }
        if values.len() != width * height {
            return Err(Error::dims(
                format!("{} values", width * height),
                format!("{}", values.len()),
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(format!(
                "weight {v} is negative or not finite"
            )));
        }
        Ok(WeightMap {
            width,
            height,
            values,
            frame_index: 0,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn with_frame_index(mut self, frame_index: u32) -> Self {
        self.frame_index = frame_index;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frame_index(&self) -> u32 {
        self.frame_index
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Total mass.
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn matches(&self, frame: &FramePlane) -> Result<()> {
        if self.width != frame.width() || self.height != frame.height() {
            return Err(Error::dims(
                format!("{}x{} weight map", frame.width(), frame.height()),
                format!("{}x{}", self.width, self.height),
            ));
        }
        Ok(())
    }
}

const OVWM_MAGIC: &[u8; 4] = b"OVWM";
pub const OVWM_HEADER_BYTES: usize = 16;

/// Serializes a map in OVWM format. Values are stored as 32-bit floats.
pub fn write_weight_map<W: Write>(map: &WeightMap, sink: &mut W) -> Result<()> {
    let dim = |v: usize| {
        u32::try_from(v).map_err(|_| Error::invalid(format!("dimension {v} exceeds u32")))
    };
    let mut buf = Vec::with_capacity(OVWM_HEADER_BYTES + 4 * map.values.len());
    buf.extend_from_slice(OVWM_MAGIC);
    buf.extend_from_slice(&dim(map.width)?.to_le_bytes());
    buf.extend_from_slice(&dim(map.height)?.to_le_bytes());
    buf.extend_from_slice(&map.frame_index.to_le_bytes());
    for v in &map.values {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    sink.write_all(&buf)?;
    Ok(())
}

/// Parses one OVWM map, requiring the source to end right after it.
pub fn read_weight_map<R: Read>(source: &mut R) -> Result<WeightMap> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    if bytes.len() < OVWM_HEADER_BYTES {
        return Err(Error::Format("OVWM header truncated".into()));
    }
    if &bytes[..4] != OVWM_MAGIC {
        return Err(Error::Format("bad OVWM magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let (width, height, frame_index) = (word(4) as usize, word(8) as usize, word(12));
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("OVWM dimensions overflow".into()))?;
    if bytes.len() - OVWM_HEADER_BYTES != expected {
        return Err(Error::Format(format!(
            "OVWM payload is {} bytes, expected {expected} for {width}x{height}",
            bytes.len() - OVWM_HEADER_BYTES
        )));
    }
    let values: Vec<f64> = bytes[OVWM_HEADER_BYTES..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    if values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::Format(
            "OVWM map holds a negative or non-finite weight".into(),
        ));
    }
    Ok(WeightMap::new(width, height, values)
        .map_err(|e| Error::Format(e.to_string()))?
        .with_frame_index(frame_index))
}
