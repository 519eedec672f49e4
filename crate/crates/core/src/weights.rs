//! Behavior weight maps: per-subject head-movement viewports (I-HM), their
//! normalized union over subjects (O-HM), and gaze-centered Gaussians inside
//! the viewport (I-EM). Also the split-half consistency and viewport coverage
//! statistics used to characterize viewing behavior.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::media_io::{VideoMeta, WeightMap};
use crate::projection::{pixel_directions, ProjectionKind};
use crate::sphere::{direction_to_viewport_point, in_viewport, Direction, Fov, Pose};
use crate::subjective::pearson;
use crate::traces::{FrameSamples, GazeSample};

/// Sphere direction of every pixel center of a frame raster, computed once
/// and shared by all maps of that raster.
#[derive(Debug, Clone)]
pub struct PixelGrid {
    width: usize,
    height: usize,
    kind: ProjectionKind,
    dirs: Vec<Option<Direction>>,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize, kind: ProjectionKind) -> Result<Self> {
        Ok(PixelGrid {
            width,
            height,
            kind,
            dirs: pixel_directions(width, height, kind)?,
        })
    }

    pub fn for_video(meta: &VideoMeta) -> Result<Self> {
        Self::new(meta.width, meta.height, meta.projection)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn kind(&self) -> ProjectionKind {
        self.kind
    }

    pub fn directions(&self) -> &[Option<Direction>] {
        &self.dirs
    }

    fn map_with(&self, f: impl Fn(&Direction) -> f64 + Sync) -> WeightMap {
        let values = self
            .dirs
            .par_iter()
            .map(|d| d.as_ref().map_or(0.0, &f))
            .collect();
        WeightMap::new(self.width, self.height, values)
            .expect("weights are finite and non-negative")
    }
}

/// Width of the gaze Gaussian in normalized viewport units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeParams {
    sigma: f64,
}

impl GazeParams {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!(
                "gaze sigma {sigma} must be positive and finite"
            )));
        }
        Ok(GazeParams { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Default for GazeParams {
    fn default() -> Self {
        GazeParams { sigma: 0.1 }
    }
}

/// Binary viewport mask: 1 where the pixel direction is inside the viewport.
pub fn i_hm_map(pose: &Pose, fov: &Fov, grid: &PixelGrid) -> WeightMap {
    grid.map_with(|d| if in_viewport(d, pose, fov) { 1.0 } else { 0.0 })
}

/// Weight of one direction under the gaze Gaussian; 0 outside the viewport.
pub fn em_weight(
    dir: &Direction,
    pose: &Pose,
    gaze: GazeSample,
    params: &GazeParams,
    fov: &Fov,
) -> f64 {
    match direction_to_viewport_point(dir, pose, fov) {
        Some((u, v)) => {
            let d2 = (u - gaze.u).powi(2) + (v - gaze.v).powi(2);
            (-d2 / (2.0 * params.sigma * params.sigma)).exp()
        }
        None => 0.0,
    }
}

pub fn i_em_map(
    pose: &Pose,
    gaze: GazeSample,
    params: &GazeParams,
    fov: &Fov,
    grid: &PixelGrid,
) -> Result<WeightMap> {
    if !((0.0..=1.0).contains(&gaze.u) && (0.0..=1.0).contains(&gaze.v)) {
        return Err(Error::invalid(format!(
            "gaze ({}, {}) outside the viewport",
            gaze.u, gaze.v
        )));
    }
    Ok(grid.map_with(|d| em_weight(d, pose, gaze, params, fov)))
}

fn check_same_size(maps: &[WeightMap]) -> Result<(usize, usize)> {
    let first = maps
        .first()
        .ok_or_else(|| Error::invalid("no weight maps given"))?;
    let (w, h) = (first.width(), first.height());
    for m in maps {
        if (m.width(), m.height()) != (w, h) {
            return Err(Error::dims(
                format!("{w}x{h}"),
                format!("{}x{}", m.width(), m.height()),
            ));
        }
    }
    Ok((w, h))
}

fn pixel_sum(maps: &[WeightMap]) -> Result<Vec<f64>> {
    let (w, h) = check_same_size(maps)?;
    let mut acc = vec![0.0; w * h];
    for m in maps {
        for (a, v) in acc.iter_mut().zip(m.values()) {
            *a += v;
        }
    }
    Ok(acc)
}

/// Overall map: pixel-wise sum over subjects divided by the total mass.
pub fn o_hm_map(maps: &[WeightMap]) -> Result<WeightMap> {
    let acc = pixel_sum(maps)?;
    let total: f64 = acc.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("all input weight maps are empty".into()));
    }
    let values = acc.into_iter().map(|v| v / total).collect();
    let m = &maps[0];
    Ok(WeightMap::new(m.width(), m.height(), values)?.with_frame_index(m.frame_index()))
}

/// Pixel-wise mean of the maps.
pub fn mean_map(maps: &[WeightMap]) -> Result<WeightMap> {
    let n = maps.len() as f64;
    let values = pixel_sum(maps)?.into_iter().map(|v| v / n).collect();
    let m = &maps[0];
    Ok(WeightMap::new(m.width(), m.height(), values)?.with_frame_index(m.frame_index()))
}

/// How per-frame maps are built when a frame holds several samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleChoice {
    #[default]
    First,
    /// Pixel-wise mean of the maps of every sample in the frame.
    Average,
}

/// One I-HM map per frame for a subject.
pub fn subject_hm_maps(
    samples: &FrameSamples,
    fov: &Fov,
    grid: &PixelGrid,
    choice: SampleChoice,
) -> Result<Vec<Option<WeightMap>>> {
    samples
        .frames
        .iter()
        .enumerate()
        .map(|(f, slot)| {
            let map = match choice {
                SampleChoice::First => slot.first_pose().map(|p| i_hm_map(&p, fov, grid)),
                SampleChoice::Average if slot.samples.is_empty() => None,
                SampleChoice::Average => {
                    let maps: Vec<WeightMap> = slot
                        .samples
                        .iter()
                        .map(|s| i_hm_map(&s.pose, fov, grid))
                        .collect();
                    Some(mean_map(&maps)?)
                }
            };
            Ok(map.map(|m| m.with_frame_index(f as u32)))
        })
        .collect()
}

/// One I-EM map per frame for a subject; frames without valid gaze get `None`.
pub fn subject_em_maps(
    samples: &FrameSamples,
    params: &GazeParams,
    fov: &Fov,
    grid: &PixelGrid,
    choice: SampleChoice,
) -> Result<Vec<Option<WeightMap>>> {
    samples
        .frames
        .iter()
        .enumerate()
        .map(|(f, slot)| {
            let map = match choice {
                SampleChoice::First => match slot.first_gaze() {
                    Some((pose, gaze)) => Some(i_em_map(&pose, gaze, params, fov, grid)?),
                    None => None,
                },
                SampleChoice::Average => {
                    let maps = slot
                        .samples
                        .iter()
                        .filter_map(|s| s.gaze.map(|g| i_em_map(&s.pose, g, params, fov, grid)))
                        .collect::<Result<Vec<_>>>()?;
                    if maps.is_empty() {
                        None
                    } else {
                        Some(mean_map(&maps)?)
                    }
                }
            };
            Ok(map.map(|m| m.with_frame_index(f as u32)))
        })
        .collect()
}

/// How a group of subject maps is combined before comparing groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// Normalized union, as for head-movement maps.
    OverallHm,
    /// Pixel-wise mean, as for eye-movement maps.
    Mean,
}

fn aggregate(maps: &[WeightMap], how: Aggregation) -> Result<Option<WeightMap>> {
    match how {
        Aggregation::Mean => mean_map(maps).map(Some),
        Aggregation::OverallHm => match o_hm_map(maps) {
            Ok(m) => Ok(Some(m)),
            Err(Error::Degenerate(_)) => Ok(None),
            Err(e) => Err(e),
        },
    }
}

/// Pearson correlation, per frame, between the aggregated maps of two subject
/// groups. `group_a[f]` holds the maps of group A for frame `f`. Frames where
/// either aggregate is constant yield `None`.
pub fn split_half_consistency(
    group_a: &[Vec<WeightMap>],
    group_b: &[Vec<WeightMap>],
    how: Aggregation,
) -> Result<Vec<Option<f64>>> {
    if group_a.len() != group_b.len() {
        return Err(Error::dims(
            format!("{} frames", group_a.len()),
            format!("{} frames", group_b.len()),
        ));
    }
    group_a
        .par_iter()
        .zip(group_b.par_iter())
        .map(|(a, b)| {
            let (Some(ma), Some(mb)) = (aggregate(a, how)?, aggregate(b, how)?) else {
                return Ok(None);
            };
            if (ma.width(), ma.height()) != (mb.width(), mb.height()) {
                return Err(Error::dims(
                    format!("{}x{}", ma.width(), ma.height()),
                    format!("{}x{}", mb.width(), mb.height()),
                ));
            }
            Ok(pearson(ma.values(), mb.values()))
        })
        .collect()
}

/// Mean over the defined entries; `None` when no frame is defined.
pub fn mean_defined(values: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Randomly splits subject indices `0..n` into two halves of equal size (the
/// odd one out, if any, is dropped).
pub fn random_halves(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let half = n / 2;
    let mut a = idx[..half].to_vec();
    let mut b = idx[half..2 * half].to_vec();
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

/// Solid-angle fraction of the sphere covered by the union of the viewports.
///
/// Supported for ERP (pixels weighted by the cosine of their latitude) and CPP
/// (equal-area, so valid pixels count equally).
pub fn viewport_coverage(maps: &[WeightMap], kind: ProjectionKind) -> Result<f64> {
    let (w, h) = check_same_size(maps)?;
    let covered = |i: usize| maps.iter().any(|m| m.values()[i] > 0.0);
    match kind {
        ProjectionKind::Erp => {
            let mut num = 0.0;
            let mut den = 0.0;
            for y in 0..h {
                let lat = (0.5 - (y as f64 + 0.5) / h as f64) * std::f64::consts::PI;
                let c = lat.cos();
                for x in 0..w {
                    den += c;
                    if covered(y * w + x) {
                        num += c;
                    }
                }
            }
            Ok(num / den)
        }
        ProjectionKind::Cpp => {
            let dirs = pixel_directions(w, h, kind)?;
            let valid: Vec<usize> = (0..w * h).filter(|&i| dirs[i].is_some()).collect();
            let hit = valid.iter().filter(|&&i| covered(i)).count();
            Ok(hit as f64 / valid.len() as f64)
        }
        other => Err(Error::invalid(format!(
            "viewport coverage needs an ERP or CPP raster, not {other}"
        ))),
    }
}
