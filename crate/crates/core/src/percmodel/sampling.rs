use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::preprocess::{ErrorMap, PreparedFrame};
use crate::error::{Error, Result};
use crate::media_io::{FramePlane, WeightMap};

pub const PATCH_SIZE: usize = 112;
/// Spacing of candidate patch positions (half a patch).
pub const PATCH_STRIDE: usize = 56;

/// One sampled patch of an impaired frame and its error map.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    /// Index of the source frame in the original sequence.
    pub frame: usize,
    pub x: usize,
    pub y: usize,
    /// Impaired luma, row-major `PATCH_SIZE * PATCH_SIZE`.
    pub intensity: Vec<u8>,
    pub error: Vec<f64>,
    /// Head-movement mass under the patch footprint.
    pub hm_weight: f64,
    /// Eye-movement mass under the patch footprint.
    pub em_weight: f64,
}

impl Patch {
    /// Cuts the patch at `(x, y)` out of a frame and its error map.
    pub fn cut(
        frame_index: usize,
        impaired: &FramePlane,
        error: &ErrorMap,
        x: usize,
        y: usize,
    ) -> Result<Self> {
        if x + PATCH_SIZE > impaired.width() || y + PATCH_SIZE > impaired.height() {
            return Err(Error::invalid(format!(
                "patch at ({x}, {y}) leaves the frame"
            )));
        }
        if (error.width(), error.height()) != (impaired.width(), impaired.height()) {
            return Err(Error::dims(
                format!("{}x{} error map", impaired.width(), impaired.height()),
                format!("{}x{}", error.width(), error.height()),
            ));
        }
        let mut intensity = Vec::with_capacity(PATCH_SIZE * PATCH_SIZE);
        let mut err = Vec::with_capacity(PATCH_SIZE * PATCH_SIZE);
        for row in y..y + PATCH_SIZE {
            for col in x..x + PATCH_SIZE {
                intensity.push(impaired.get(col, row));
                err.push(error.get(col, row));
            }
        }
        Ok(Patch {
            frame: frame_index,
            x,
            y,
            intensity,
            error: err,
            hm_weight: 0.0,
            em_weight: 0.0,
        })
    }
}

/// Top-left corners of the candidate patches, on a `PATCH_STRIDE` grid.
pub fn candidate_positions(width: usize, height: usize) -> Vec<(usize, usize)> {
    if width < PATCH_SIZE || height < PATCH_SIZE {
        return Vec::new();
    }
    let xs: Vec<usize> = (0..=width - PATCH_SIZE).step_by(PATCH_STRIDE).collect();
    (0..=height - PATCH_SIZE)
        .step_by(PATCH_STRIDE)
        .flat_map(|y| xs.iter().map(move |&x| (x, y)))
        .collect()
}

/// Summed-area table with a zero border row and column.
fn integral(map: &WeightMap) -> Vec<f64> {
    let (w, h) = (map.width(), map.height());
    let mut s = vec![0.0; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += map.get(x, y);
            s[(y + 1) * (w + 1) + x + 1] = s[y * (w + 1) + x + 1] + row;
        }
    }
    s
}

fn window_sum(table: &[f64], w: usize, x: usize, y: usize) -> f64 {
    let stride = w + 1;
    let (x1, y1) = (x + PATCH_SIZE, y + PATCH_SIZE);
    let v = table[y1 * stride + x1] - table[y * stride + x1] - table[y1 * stride + x]
        + table[y * stride + x];
    v.max(0.0)
}

/// Map mass under the footprint of the patch at `(x, y)`.
pub fn footprint_sum(map: &WeightMap, x: usize, y: usize) -> f64 {
    let mut s = 0.0;
    for row in y..(y + PATCH_SIZE).min(map.height()) {
        for col in x..(x + PATCH_SIZE).min(map.width()) {
            s += map.get(col, row);
        }
    }
    s
}

/// Draws `n` distinct candidates, each draw with probability proportional to
/// the remaining candidates' weights.
fn draw_without_replacement(weights: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..weights.len()).collect();
    let mut picked = Vec::with_capacity(n);
    for _ in 0..n {
        let total: f64 = remaining.iter().map(|&i| weights[i]).sum();
        let slot = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = None;
            for (k, &i) in remaining.iter().enumerate() {
                if weights[i] <= 0.0 {
                    continue;
                }
                chosen = Some(k);
                target -= weights[i];
                if target < 0.0 {
                    break;
                }
            }
            chosen.expect("positive total implies a positive weight")
        } else {
            // the weighted candidates are exhausted; continue uniformly
            rng.random_range(0..remaining.len())
        };
        picked.push(remaining.remove(slot));
    }
    picked
}

/// Samples `n` patches of one frame with probabilities proportional to the
/// head-movement mass under each candidate. An all-zero map falls back to
/// uniform sampling.
pub fn sample_patches(
    frame_index: usize,
    impaired: &FramePlane,
    error: &ErrorMap,
    hm: &WeightMap,
    n: usize,
    seed: u64,
) -> Result<Vec<Patch>> {
    let (w, h) = (impaired.width(), impaired.height());
    if w < PATCH_SIZE || h < PATCH_SIZE {
        return Err(Error::invalid(format!(
            "{w}x{h} frame is smaller than a {PATCH_SIZE}x{PATCH_SIZE} patch"
        )));
    }
    if (hm.width(), hm.height()) != (w, h) {
        return Err(Error::dims(
            format!("{w}x{h} HM map"),
            format!("{}x{}", hm.width(), hm.height()),
        ));
    }
    let candidates = candidate_positions(w, h);
    if n == 0 || n > candidates.len() {
        return Err(Error::invalid(format!(
            "cannot draw {n} patches from {} candidates",
            candidates.len()
        )));
    }
    let table = integral(hm);
    let mut weights: Vec<f64> = candidates
        .iter()
        .map(|&(x, y)| window_sum(&table, w, x, y))
        .collect();
    if weights.iter().all(|&v| v <= 0.0) {
        log::warn!("frame {frame_index}: HM map has no mass, sampling patches uniformly");
        weights.iter_mut().for_each(|v| *v = 1.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_without_replacement(&weights, n, &mut rng)
        .into_iter()
        .map(|k| {
            let (x, y) = candidates[k];
            let mut p = Patch::cut(frame_index, impaired, error, x, y)?;
            p.hm_weight = weights[k];
            Ok(p)
        })
        .collect()
}

/// Normalized eye-movement weights of the patches: footprint sums of `em`
/// divided by their total. Zero total mass gives uniform weights.
pub fn em_weight_vector(patches: &[Patch], em: &WeightMap) -> Result<Vec<f64>> {
    if patches.is_empty() {
        return Err(Error::invalid("no patches to weight"));
    }
    let raw: Vec<f64> = patches
        .iter()
        .map(|p| footprint_sum(em, p.x, p.y))
        .collect();
    Ok(normalize_or_uniform(raw))
}

fn normalize_or_uniform(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    let n = raw.len() as f64;
    if total > 0.0 {
        raw.into_iter().map(|v| v / total).collect()
    } else {
        log::warn!("patches carry no EM mass, using uniform weights");
        vec![1.0 / n; raw.len()]
    }
}

/// Samples `n` patches from a preprocessed sequence, split as evenly as
/// possible over its frames (earlier frames take the remainder), and returns
/// them with their normalized EM weights. `hm[f]` and `em[f]` belong to
/// `frames[f]` and are resized to the frame raster when needed.
pub fn sample_sequence(
    frames: &[PreparedFrame],
    hm: &[WeightMap],
    em: &[WeightMap],
    n: usize,
    seed: u64,
) -> Result<(Vec<Patch>, Vec<f64>)> {
    if frames.is_empty() {
        return Err(Error::invalid("no frames to sample"));
    }
    if hm.len() != frames.len() || em.len() != frames.len() {
        return Err(Error::dims(
            format!("{} HM and EM maps", frames.len()),
            format!("{} HM, {} EM", hm.len(), em.len()),
        ));
    }
    let f = frames.len();
    let mut patches = Vec::with_capacity(n);
    for (k, frame) in frames.iter().enumerate() {
        let count = n / f + usize::from(k < n % f);
        if count == 0 {
            continue;
        }
        let (w, h) = (frame.impaired.width(), frame.impaired.height());
        let hm_map = super::preprocess::resize_weight_map(&hm[k], w, h)?;
        let em_map = super::preprocess::resize_weight_map(&em[k], w, h)?;
        let frame_seed = seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut drawn = sample_patches(
            frame.index,
            &frame.impaired,
            &frame.error,
            &hm_map,
            count,
            frame_seed,
        )?;
        for p in &mut drawn {
            p.em_weight = footprint_sum(&em_map, p.x, p.y);
        }
        patches.extend(drawn);
    }
    let weights = normalize_or_uniform(patches.iter().map(|p| p.em_weight).collect());
    Ok((patches, weights))
}
