use super::sampling::{Patch, PATCH_SIZE};
use crate::error::{Error, Result};

/// Per-pixel perceptual weighting emitted by a local scorer for one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SensitivityMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::dims(
                format!("{} values", width * height),
                values.len().to_string(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "sensitivity map holds a non-finite value".into(),
            ));
        }
        Ok(SensitivityMap {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
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

/// Gradients returned by [`LocalScorer::backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerGrad {
    /// With respect to the scorer parameters.
    pub params: Vec<f64>,
    /// With respect to the patch error map, row-major.
    pub input: Vec<f64>,
}

/// A trainable map from a patch to a local quality score and a sensitivity
/// map. Implementations must be deterministic.
pub trait LocalScorer: Sync {
    /// Whatever the scorer precomputes from a patch; reused every epoch.
    type Prepared: Send + Sync;

    fn param_count(&self) -> usize;

    /// `(width, height)` of the emitted sensitivity maps.
    fn map_size(&self) -> (usize, usize);

    fn init_params(&self) -> Vec<f64>;

    fn prepare(&self, patch: &Patch) -> Self::Prepared;

    fn evaluate(&self, params: &[f64], input: &Self::Prepared) -> (f64, SensitivityMap);

    /// Chain rule through one evaluation, given the loss gradient with
    /// respect to the score and to every sensitivity-map value.
    fn backward(
        &self,
        params: &[f64],
        input: &Self::Prepared,
        d_score: f64,
        d_map: &[f64],
    ) -> ScorerGrad;
}

/// Affine scorer over patch error statistics.
///
/// The patch is split into `GRID x GRID` cells. Cell `c` gets sensitivity
/// `M_c = a_c + b * mu_c`, with `mu_c` the cell's mean impaired intensity in
/// [0, 1]. The local score is
/// `SCALE * (w0 + w1 * mean_err + w2 * max_err + w3 * mean_c(M_c * err_c))`.
///
/// Parameter layout: `a` (GRID^2 values), `b`, `w0..w3`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearScorer;

impl LinearScorer {
    pub const GRID: usize = 8;
    /// Brings the statistics (fractions of full scale) to DMOS units.
    pub const SCALE: f64 = 100.0;
    const CELLS: usize = Self::GRID * Self::GRID;
    const CELL: usize = PATCH_SIZE / Self::GRID;
}

/// Precomputed statistics of one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFeatures {
    cell_err: Vec<f64>,
    cell_mu: Vec<f64>,
    mean_err: f64,
    max_err: f64,
    argmax: usize,
}

impl LocalScorer for LinearScorer {
    type Prepared = LinearFeatures;

    fn param_count(&self) -> usize {
        Self::CELLS + 5
    }

    fn map_size(&self) -> (usize, usize) {
        (Self::GRID, Self::GRID)
    }

    fn init_params(&self) -> Vec<f64> {
        let mut p = vec![1.0; Self::CELLS];
        p.extend([0.0; 5]);
        p
    }

    fn prepare(&self, patch: &Patch) -> LinearFeatures {
        let mut cell_err = vec![0.0; Self::CELLS];
        let mut cell_mu = vec![0.0; Self::CELLS];
        let mut max_err = f64::NEG_INFINITY;
        let mut argmax = 0;
        for (i, (&e, &y)) in patch.error.iter().zip(&patch.intensity).enumerate() {
            let c = cell_of(i);
            cell_err[c] += e;
            cell_mu[c] += y as f64 / 255.0;
            if e > max_err {
                max_err = e;
                argmax = i;
            }
        }
        let per_cell = (Self::CELL * Self::CELL) as f64;
        cell_err.iter_mut().for_each(|v| *v /= per_cell);
        cell_mu.iter_mut().for_each(|v| *v /= per_cell);
        LinearFeatures {
            mean_err: cell_err.iter().sum::<f64>() / Self::CELLS as f64,
            cell_err,
            cell_mu,
            max_err,
            argmax,
        }
    }

    fn evaluate(&self, params: &[f64], f: &LinearFeatures) -> (f64, SensitivityMap) {
        let (a, rest) = params.split_at(Self::CELLS);
        let (b, w) = (rest[0], &rest[1..5]);
        let m: Vec<f64> = a
            .iter()
            .zip(&f.cell_mu)
            .map(|(ac, mu)| ac + b * mu)
            .collect();
        let weighted =
            m.iter().zip(&f.cell_err).map(|(mc, e)| mc * e).sum::<f64>() / Self::CELLS as f64;
        let q = Self::SCALE * (w[0] + w[1] * f.mean_err + w[2] * f.max_err + w[3] * weighted);
        let map = SensitivityMap::new(Self::GRID, Self::GRID, m)
            .expect("finite parameters give a finite map");
        (q, map)
    }

    fn backward(
        &self,
        params: &[f64],
        f: &LinearFeatures,
        d_score: f64,
        d_map: &[f64],
    ) -> ScorerGrad {
        let (a, rest) = params.split_at(Self::CELLS);
        let (b, w) = (rest[0], &rest[1..5]);
        let n = Self::CELLS as f64;
        let ds = d_score * Self::SCALE;
        let mut g = vec![0.0; self.param_count()];
        let mut weighted = 0.0;
        let mut db = 0.0;
        for c in 0..Self::CELLS {
            let mc = a[c] + b * f.cell_mu[c];
            weighted += mc * f.cell_err[c] / n;
            // score path plus direct map path
            g[c] = ds * w[3] * f.cell_err[c] / n + d_map[c];
            db += ds * w[3] * f.cell_mu[c] * f.cell_err[c] / n + d_map[c] * f.cell_mu[c];
        }
        g[Self::CELLS] = db;
        g[Self::CELLS + 1] = ds;
        g[Self::CELLS + 2] = ds * f.mean_err;
        g[Self::CELLS + 3] = ds * f.max_err;
        g[Self::CELLS + 4] = ds * weighted;

        let pixels = (PATCH_SIZE * PATCH_SIZE) as f64;
        let per_cell = (Self::CELL * Self::CELL) as f64;
        let mut input: Vec<f64> = (0..PATCH_SIZE * PATCH_SIZE)
            .map(|i| {
                let c = cell_of(i);
                let mc = a[c] + b * f.cell_mu[c];
                ds * (w[1] / pixels + w[3] * mc / (n * per_cell))
            })
            .collect();
        input[f.argmax] += ds * w[2];
        ScorerGrad { params: g, input }
    }
}

fn cell_of(pixel: usize) -> usize {
    let (x, y) = (pixel % PATCH_SIZE, pixel / PATCH_SIZE);
    (y / LinearScorer::CELL) * LinearScorer::GRID + x / LinearScorer::CELL
}
