use rayon::prelude::*;

use super::{direction_to_pixel, point_to_direction, ProjectionKind};
use crate::error::Result;
use crate::media_io::FramePlane;

/// Bilinear sample of a row-major raster at continuous position `(cx, cy)`.
///
/// Horizontal coordinates wrap around when `wrap_x` is set (ERP longitude);
/// otherwise, and always vertically, they clamp to the border.
pub fn sample_bilinear<T: Copy + Into<f64>>(
    values: &[T],
    width: usize,
    height: usize,
    cx: f64,
    cy: f64,
    wrap_x: bool,
) -> f64 {
    let px = cx - 0.5;
    let py = cy - 0.5;
    let x0 = px.floor();
    let y0 = py.floor();
    let fx = px - x0;
    let fy = py - y0;
    let col = |i: i64| -> usize {
        if wrap_x {
            i.rem_euclid(width as i64) as usize
        } else {
            i.clamp(0, width as i64 - 1) as usize
        }
    };
    let row = |j: i64| -> usize { j.clamp(0, height as i64 - 1) as usize };
    let (x0, y0) = (x0 as i64, y0 as i64);
    let (c0, c1) = (col(x0), col(x0 + 1));
    let (r0, r1) = (row(y0), row(y0 + 1));
    let at = |r: usize, c: usize| -> f64 { values[r * width + c].into() };
    let top = at(r0, c0) * (1.0 - fx) + at(r0, c1) * fx;
    let bottom = at(r1, c0) * (1.0 - fx) + at(r1, c1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Bilinear sample that ignores taps where `valid` is false and renormalizes
/// the rest. Falls back to the plain sample when no tap is valid.
fn sample_bilinear_masked<T: Copy + Into<f64>>(
    values: &[T],
    valid: &[bool],
    width: usize,
    height: usize,
    cx: f64,
    cy: f64,
) -> f64 {
    let (px, py) = (cx - 0.5, cy - 0.5);
    let (x0, y0) = (px.floor(), py.floor());
    let (fx, fy) = (px - x0, py - y0);
    let col = |i: i64| i.clamp(0, width as i64 - 1) as usize;
    let row = |j: i64| j.clamp(0, height as i64 - 1) as usize;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let taps = [
        (row(y0), col(x0), (1.0 - fx) * (1.0 - fy)),
        (row(y0), col(x0 + 1), fx * (1.0 - fy)),
        (row(y0 + 1), col(x0), (1.0 - fx) * fy),
        (row(y0 + 1), col(x0 + 1), fx * fy),
    ];
    let (mut sum, mut mass) = (0.0, 0.0);
    for (r, c, w) in taps {
        let i = r * width + c;
        if valid[i] {
            sum += w * values[i].into();
            mass += w;
        }
    }
    if mass > 0.0 {
        sum / mass
    } else {
        sample_bilinear(values, width, height, cx, cy, false)
    }
}

/// Precomputed source positions for converting frames between projections.
#[derive(Debug, Clone)]
pub struct ResampleMap {
    src_width: usize,
    src_height: usize,
    src_kind: ProjectionKind,
    dst_width: usize,
    dst_height: usize,
    /// Source position per destination pixel; `None` for destination padding.
    positions: Vec<Option<(f64, f64)>>,
    /// Which source pixels have a sphere image, when some do not (CPP).
    src_valid: Option<Vec<bool>>,
}

impl ResampleMap {
    pub fn new(
        src_width: usize,
        src_height: usize,
        src_kind: ProjectionKind,
        dst_width: usize,
        dst_height: usize,
        dst_kind: ProjectionKind,
    ) -> Result<Self> {
        src_kind.check_dims(src_width, src_height)?;
        dst_kind.check_dims(dst_width, dst_height)?;
        let positions = (0..dst_height)
            .into_par_iter()
            .flat_map_iter(|y| {
                (0..dst_width).map(move |x| {
                    let d = point_to_direction(
                        x as f64 + 0.5,
                        y as f64 + 0.5,
                        dst_width,
                        dst_height,
                        dst_kind,
                    )?;
                    direction_to_pixel(&d, src_width, src_height, src_kind)
                })
            })
            .collect();
        let src_valid = (src_kind == ProjectionKind::Cpp).then(|| {
            (0..src_width * src_height)
                .map(|i| {
                    let (x, y) = (i % src_width, i / src_width);
                    point_to_direction(
                        x as f64 + 0.5,
                        y as f64 + 0.5,
                        src_width,
                        src_height,
                        src_kind,
                    )
                    .is_some()
                })
                .collect()
        });
        Ok(ResampleMap {
            src_width,
            src_height,
            src_kind,
            dst_width,
            dst_height,
            positions,
            src_valid,
        })
    }

    pub fn dst_width(&self) -> usize {
        self.dst_width
    }

    pub fn dst_height(&self) -> usize {
        self.dst_height
    }

    /// Whether destination pixel `index` has a sphere image.
    pub fn is_valid(&self, index: usize) -> bool {
        self.positions[index].is_some()
    }

    /// Resamples `src` without rounding; padding pixels read `fill`. Source
    /// padding never contributes to a destination pixel.
    pub fn apply<T: Copy + Into<f64> + Sync>(&self, src: &[T], fill: f64) -> Vec<f64> {
        assert_eq!(
            src.len(),
            self.src_width * self.src_height,
            "source raster size"
        );
        let wrap = self.src_kind == ProjectionKind::Erp;
        self.positions
            .par_iter()
            .map(|p| match p {
                Some((cx, cy)) => match &self.src_valid {
                    Some(valid) => sample_bilinear_masked(
                        src,
                        valid,
                        self.src_width,
                        self.src_height,
                        *cx,
                        *cy,
                    ),
                    None => sample_bilinear(src, self.src_width, self.src_height, *cx, *cy, wrap),
                },
                None => fill,
            })
            .collect()
    }
}

/// Converts a frame to another projection and size.
///
/// Each destination pixel center is mapped to the sphere, back into the
/// source, and bilinearly interpolated; destination padding becomes 0.
pub fn resample_frame(
    src: &FramePlane,
    src_kind: ProjectionKind,
    dst_kind: ProjectionKind,
    dst_width: usize,
    dst_height: usize,
) -> Result<FramePlane> {
    let map = ResampleMap::new(
        src.width(),
        src.height(),
        src_kind,
        dst_width,
        dst_height,
        dst_kind,
    )?;
    let values = map.apply(src.samples(), 0.0);
    let samples = values
        .iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    FramePlane::new(dst_width, dst_height, samples)
}
