use crate::error::{Error, Result};
use crate::media_io::{FramePlane, FrameSource, WeightMap, Y_MAX};
use crate::projection::sample_bilinear;

/// Normalized absolute luma error `|Y - Y'| / 255`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ErrorMap {
    pub fn between(reference: &FramePlane, impaired: &FramePlane) -> Result<Self> {
        reference.same_size(impaired)?;
        let values = reference
            .samples()
            .iter()
            .zip(impaired.samples())
            .map(|(&a, &b)| (a as f64 - b as f64).abs() / Y_MAX)
            .collect();
        Ok(ErrorMap {
            width: reference.width(),
            height: reference.height(),
            values,
        })
    }

    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::dims(
                format!("{} values", width * height),
                values.len().to_string(),
            ));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("error map values must lie in [0, 1]"));
        }
        Ok(ErrorMap {
            width,
            height,
            values,
        })
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

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreprocessConfig {
    pub target_width: usize,
    /// Keep frames `0, interval, 2 * interval, ...`.
    pub frame_interval: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            target_width: 960,
            frame_interval: 45,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedFrame {
    /// Index in the original sequence.
    pub index: usize,
    pub reference: FramePlane,
    pub impaired: FramePlane,
    pub error: ErrorMap,
}

fn scaled_height(width: usize, height: usize, target: usize) -> usize {
    ((height as f64 * target as f64 / width as f64).round() as usize).max(1)
}

fn resize_values<T: Copy + Into<f64>>(
    values: &[T],
    w: usize,
    h: usize,
    tw: usize,
    th: usize,
) -> Vec<f64> {
    let (sx, sy) = (w as f64 / tw as f64, h as f64 / th as f64);
    (0..tw * th)
        .map(|i| {
            let (x, y) = (i % tw, i / tw);
            sample_bilinear(
                values,
                w,
                h,
                (x as f64 + 0.5) * sx,
                (y as f64 + 0.5) * sy,
                false,
            )
        })
        .collect()
}

/// Bilinear resize to `width`, keeping the aspect ratio.
pub fn downsample_to_width(frame: &FramePlane, width: usize) -> Result<FramePlane> {
    if width == 0 {
        return Err(Error::invalid("target width must be positive"));
    }
    if width == frame.width() {
        return Ok(frame.clone());
    }
    let height = scaled_height(frame.width(), frame.height(), width);
    let values = resize_values(
        frame.samples(),
        frame.width(),
        frame.height(),
        width,
        height,
    );
    FramePlane::new(
        width,
        height,
        values
            .iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8)
            .collect(),
    )
}

/// Bilinear resize of a weight map to `width` x `height`.
pub fn resize_weight_map(map: &WeightMap, width: usize, height: usize) -> Result<WeightMap> {
    if (width, height) == (map.width(), map.height()) {
        return Ok(map.clone());
    }
    let values = resize_values(map.values(), map.width(), map.height(), width, height);
    Ok(WeightMap::new(width, height, values)?.with_frame_index(map.frame_index()))
}

/// Downsamples both sequences and keeps every `frame_interval`-th frame,
/// reading only the frames that are kept.
pub fn preprocess<R: FrameSource, I: FrameSource>(
    reference: &mut R,
    impaired: &mut I,
    config: &PreprocessConfig,
) -> Result<Vec<PreparedFrame>> {
    if config.frame_interval == 0 {
        return Err(Error::invalid("frame interval must be positive"));
    }
    let n = reference.frame_count();
    if impaired.frame_count() != n {
        return Err(Error::dims(
            format!("{n} frames"),
            format!("{} frames", impaired.frame_count()),
        ));
    }
    (0..n)
        .step_by(config.frame_interval)
        .map(|index| {
            let r = reference.frame(index)?;
            let i = impaired.frame(index)?;
            r.same_size(&i)?;
            let r = downsample_to_width(&r, config.target_width)?;
            let i = downsample_to_width(&i, config.target_width)?;
            let error = ErrorMap::between(&r, &i)?;
            Ok(PreparedFrame {
                index,
                reference: r,
                impaired: i,
                error,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Synthesizes frames on demand so that large sequences cost nothing
    /// unless read.
    struct Synthetic {
        width: usize,
        height: usize,
        count: usize,
        offset: u8,
        reads: Vec<usize>,
    }

    impl FrameSource for Synthetic {
        fn frame_count(&self) -> usize {
            self.count
        }

        fn frame(&mut self, index: usize) -> Result<FramePlane> {
            self.reads.push(index);
            let off = self.offset;
            FramePlane::from_fn(self.width, self.height, |x, y| {
                ((x / 7 + y / 5 + index) % 200) as u8 + off
            })
        }
    }

    fn synthetic(width: usize, height: usize, count: usize, offset: u8) -> Synthetic {
        Synthetic {
            width,
            height,
            count,
            offset,
            reads: Vec::new(),
        }
    }

    #[test]
    fn uhd_sequence_is_reduced() {
        let mut r = synthetic(3840, 1920, 90, 0);
        let mut i = synthetic(3840, 1920, 90, 3);
        let out = preprocess(&mut r, &mut i, &PreprocessConfig::default()).unwrap();
        assert_eq!(out.iter().map(|f| f.index).collect::<Vec<_>>(), vec![0, 45]);
        for f in &out {
            assert_eq!((f.reference.width(), f.reference.height()), (960, 480));
            assert_eq!((f.error.width(), f.error.height()), (960, 480));
        }
        assert_eq!(r.reads, vec![0, 45]);
    }

    #[test]
    fn identical_sequences_have_no_error() {
        let mut r = synthetic(200, 100, 3, 0);
        let mut i = synthetic(200, 100, 3, 0);
        let out = preprocess(&mut r, &mut i, &PreprocessConfig::default()).unwrap();
        assert!(out[0].error.values().iter().all(|&e| e == 0.0));
    }

    #[test]
    fn single_frame_is_kept() {
        let mut r = synthetic(1920, 960, 1, 0);
        let mut i = synthetic(1920, 960, 1, 1);
        let out = preprocess(&mut r, &mut i, &PreprocessConfig::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0]
            .error
            .values()
            .iter()
            .all(|&e| (0.0..=1.0).contains(&e)));
    }

    #[test]
    fn frame_counts_must_match() {
        let mut r = synthetic(64, 32, 3, 0);
        let mut i = synthetic(64, 32, 4, 0);
        assert!(preprocess(&mut r, &mut i, &PreprocessConfig::default()).is_err());
    }

    #[test]
    fn resizing_keeps_constants() {
        let f = FramePlane::filled(3840, 1920, 77).unwrap();
        let d = downsample_to_width(&f, 960).unwrap();
        assert!(d.samples().iter().all(|&v| v == 77));
        let m = WeightMap::filled(40, 20, 0.25).unwrap().with_frame_index(3);
        let r = resize_weight_map(&m, 10, 5).unwrap();
        assert!(r.values().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert_eq!(r.frame_index(), 3);
    }
}
