//! Training loss: squared score error, a total-variation penalty on the
//! sensitivity maps and an L2 penalty on all parameters:
//!
//! `l1 * |s - g|^2 + l2 / (n H W) * sum_k sum_p (Gh^2 + Gv^2)^e + l3 * |beta|^2`
//!
//! where `Gh`, `Gv` are 3x3 Sobel responses of map `k` and `e` defaults to 3/2.

use super::scorer::SensitivityMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    /// Power applied to the squared Sobel magnitude.
    pub tv_exponent: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda1: 1e3,
            lambda2: 1.0,
            lambda3: 5e-3,
            tv_exponent: 1.5,
        }
    }
}

const KH: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
const KV: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

/// Neighbor index with the border mirrored about the edge pixel
/// (`-1 -> 0`, `n -> n - 1`).
fn mirror(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Horizontal and vertical Sobel responses of a map. Each response is a
/// weighted sum of differences between opposite neighbors, so constant
/// regions give exactly zero.
pub fn sobel(map: &SensitivityMap) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (map.width(), map.height());
    let mut gh = vec![0.0; w * h];
    let mut gv = vec![0.0; w * h];
    const SMOOTH: [f64; 3] = [1.0, 2.0, 1.0];
    for y in 0..h {
        let (up, down) = (mirror(y as isize - 1, h), mirror(y as isize + 1, h));
        for x in 0..w {
            let (left, right) = (mirror(x as isize - 1, w), mirror(x as isize + 1, w));
            let (mut a, mut b) = (0.0, 0.0);
            for k in 0..3 {
                let yy = mirror(y as isize + k as isize - 1, h);
                let xx = mirror(x as isize + k as isize - 1, w);
                a += SMOOTH[k] * (map.get(right, yy) - map.get(left, yy));
                b += SMOOTH[k] * (map.get(xx, down) - map.get(xx, up));
            }
            gh[y * w + x] = a;
            gv[y * w + x] = b;
        }
    }
    (gh, gv)
}

fn check_maps(maps: &[SensitivityMap]) -> Result<(usize, usize)> {
    let first = maps
        .first()
        .ok_or_else(|| Error::invalid("no sensitivity maps"))?;
    let (w, h) = (first.width(), first.height());
    if let Some(m) = maps.iter().find(|m| (m.width(), m.height()) != (w, h)) {
        return Err(Error::dims(
            format!("{w}x{h} maps"),
            format!("{}x{}", m.width(), m.height()),
        ));
    }
    Ok((w, h))
}

fn map_tv_sum(map: &SensitivityMap, exponent: f64) -> f64 {
    let (gh, gv) = sobel(map);
    gh.iter()
        .zip(&gv)
        .map(|(a, b)| (a * a + b * b).powf(exponent))
        .sum()
}

/// The total-variation term without its weight: the mean over maps and
/// pixels of `(Gh^2 + Gv^2)^exponent`.
pub fn tv_term(maps: &[SensitivityMap], exponent: f64) -> Result<f64> {
    let (w, h) = check_maps(maps)?;
    let total: f64 = maps.iter().map(|m| map_tv_sum(m, exponent)).sum();
    Ok(total / (maps.len() * w * h) as f64)
}

/// Gradient of `scale * sum_p (Gh^2 + Gv^2)^exponent` with respect to the
/// map values. Pixels with zero response contribute nothing (the derivative
/// there is 0 for exponents of at least 1/2 and is taken as 0 otherwise).
pub fn tv_gradient(map: &SensitivityMap, exponent: f64, scale: f64) -> Vec<f64> {
    let (w, h) = (map.width(), map.height());
    let (gh, gv) = sobel(map);
    let mut grad = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let s = gh[p] * gh[p] + gv[p] * gv[p];
            if s <= 0.0 {
                continue;
            }
            let common = scale * exponent * s.powf(exponent - 1.0) * 2.0;
            let (da, db) = (common * gh[p], common * gv[p]);
            for j in 0..3 {
                let yy = mirror(y as isize + j as isize - 1, h);
                for i in 0..3 {
                    let xx = mirror(x as isize + i as isize - 1, w);
                    grad[yy * w + xx] += da * KH[j][i] + db * KV[j][i];
                }
            }
        }
    }
    grad
}

/// Full loss for a batch of predictions `s` against targets `targets`, the
/// sensitivity maps of every patch in the batch and all parameters `beta`.
pub fn loss(
    s: &[f64],
    targets: &[f64],
    maps: &[SensitivityMap],
    beta: &[f64],
    weights: &LossWeights,
) -> Result<f64> {
    if s.len() != targets.len() {
        return Err(Error::dims(
            format!("{} targets", s.len()),
            targets.len().to_string(),
        ));
    }
    if s.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mse: f64 = s.iter().zip(targets).map(|(a, b)| (a - b).powi(2)).sum();
    let tv = tv_term(maps, weights.tv_exponent)?;
    let l2: f64 = beta.iter().map(|b| b * b).sum();
    Ok(weights.lambda1 * mse + weights.lambda2 * tv + weights.lambda3 * l2)
}
