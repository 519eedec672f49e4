//! Objective quality metrics on luma planes.
//!
//! PSNR-family scores are in dB and capped at [`PSNR_CAP`] when the error is
//! zero. SSIM is unitless.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::media_io::{FramePlane, WeightMap, Y_MAX};
use crate::projection::{sample_bilinear, sphere_to_pixel, ProjectionKind, ResampleMap, SampleSet};

/// Score reported for identical content.
pub const PSNR_CAP: f64 = 100.0;

fn check_dims(a: &FramePlane, b: &FramePlane) -> Result<()> {
    a.same_size(b)
}

/// `10 log10(Ymax^2 / mse)`, capped.
pub fn mse_to_psnr(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP;
    }
    (10.0 * (Y_MAX * Y_MAX / mse).log10()).min(PSNR_CAP)
}

pub fn mse(reference: &FramePlane, impaired: &FramePlane) -> Result<f64> {
    check_dims(reference, impaired)?;
    let sum: f64 = reference
        .samples()
        .iter()
        .zip(impaired.samples())
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok(sum / reference.samples().len() as f64)
}

pub fn psnr(reference: &FramePlane, impaired: &FramePlane) -> Result<f64> {
    Ok(mse_to_psnr(mse(reference, impaired)?))
}

/// PSNR with per-pixel weights.
///
/// With `normalize` the weighted squared error is divided by the weight mass
/// (so any constant map reproduces plain PSNR); without it the map is taken
/// to be normalized already.
pub fn weighted_psnr(
    reference: &FramePlane,
    impaired: &FramePlane,
    weights: &WeightMap,
    normalize: bool,
) -> Result<f64> {
    check_dims(reference, impaired)?;
    weights.matches(reference)?;
    let mut mass = 0.0;
    let mut err = 0.0;
    for ((&a, &b), &w) in reference
        .samples()
        .iter()
        .zip(impaired.samples())
        .zip(weights.values())
    {
        let d = a as f64 - b as f64;
        mass += w;
        err += w * d * d;
    }
    if normalize {
        if mass <= 0.0 {
            return Err(Error::Degenerate("weight map has no mass".into()));
        }
        Ok(mse_to_psnr(err / mass))
    } else {
        Ok(mse_to_psnr(err))
    }
}

/// Mean over subjects of the per-subject weighted PSNR. Maps without mass
/// (for instance frames where a subject had no valid gaze) are skipped.
pub fn mean_subject_psnr(
    reference: &FramePlane,
    impaired: &FramePlane,
    maps: &[WeightMap],
) -> Result<f64> {
    let mut total = 0.0;
    let mut used = 0usize;
    for m in maps {
        if m.sum() > 0.0 {
            total += weighted_psnr(reference, impaired, m, true)?;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::Degenerate(
            "no subject weight map with positive mass".into(),
        ));
    }
    Ok(total / used as f64)
}

/// PSNR weighted by each subject's head-movement viewport, averaged over subjects.
pub fn psnr_i_hm(reference: &FramePlane, impaired: &FramePlane, maps: &[WeightMap]) -> Result<f64> {
    mean_subject_psnr(reference, impaired, maps)
}

/// PSNR weighted by each subject's gaze map, averaged over subjects with valid gaze.
pub fn psnr_i_em(reference: &FramePlane, impaired: &FramePlane, maps: &[WeightMap]) -> Result<f64> {
    mean_subject_psnr(reference, impaired, maps)
}

/// PSNR weighted by the overall (normalized) head-movement map.
pub fn psnr_o_hm(
    reference: &FramePlane,
    impaired: &FramePlane,
    overall: &WeightMap,
) -> Result<f64> {
    let s = overall.sum();
    if (s - 1.0).abs() > 1e-4 {
        return Err(Error::invalid(format!("overall map sums to {s}, not 1")));
    }
    weighted_psnr(reference, impaired, overall, false)
}

/// Cosine-latitude weights of an ERP raster.
pub fn ws_weights(width: usize, height: usize) -> Result<WeightMap> {
    ProjectionKind::Erp.check_dims(width, height)?;
    let h = height as f64;
    let values = (0..width * height)
        .map(|i| {
            let y = (i / width) as f64;
            ((y + 0.5 - h / 2.0) * std::f64::consts::PI / h).cos()
        })
        .collect();
    WeightMap::new(width, height, values)
}

/// Weighted-to-spherically-uniform PSNR; ERP input only.
pub fn ws_psnr(reference: &FramePlane, impaired: &FramePlane, kind: ProjectionKind) -> Result<f64> {
    if kind != ProjectionKind::Erp {
        return Err(Error::invalid(format!(
            "WS-PSNR needs ERP frames, got {kind}; convert first"
        )));
    }
    check_dims(reference, impaired)?;
    let w = ws_weights(reference.width(), reference.height())?;
    weighted_psnr(reference, impaired, &w, true)
}

/// Spherical PSNR over a fixed set of sphere points, with the sample
/// positions precomputed for one raster geometry.
#[derive(Debug, Clone)]
pub struct SPsnr {
    width: usize,
    height: usize,
    wrap: bool,
    positions: Vec<(f64, f64)>,
}

impl SPsnr {
    pub fn new(
        samples: &SampleSet,
        width: usize,
        height: usize,
        kind: ProjectionKind,
    ) -> Result<Self> {
        kind.check_dims(width, height)?;
        if samples.is_empty() {
            return Err(Error::invalid("S-PSNR needs at least one sample point"));
        }
        let positions = samples
            .points()
            .iter()
            .map(|p| {
                sphere_to_pixel(p, width, height, kind).expect("every sphere point has an image")
            })
            .collect();
        Ok(SPsnr {
            width,
            height,
            wrap: kind == ProjectionKind::Erp,
            positions,
        })
    }

    pub fn score(&self, reference: &FramePlane, impaired: &FramePlane) -> Result<f64> {
        check_dims(reference, impaired)?;
        if reference.width() != self.width || reference.height() != self.height {
            return Err(Error::dims(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", reference.width(), reference.height()),
            ));
        }
        let (w, h) = (self.width, self.height);
        let sum: f64 = self
            .positions
            .iter()
            .map(|&(cx, cy)| {
                let a = sample_bilinear(reference.samples(), w, h, cx, cy, self.wrap);
                let b = sample_bilinear(impaired.samples(), w, h, cx, cy, self.wrap);
                (a - b) * (a - b)
            })
            .sum();
        Ok(mse_to_psnr(sum / self.positions.len() as f64))
    }
}

pub fn s_psnr(
    reference: &FramePlane,
    impaired: &FramePlane,
    kind: ProjectionKind,
    samples: &SampleSet,
) -> Result<f64> {
    SPsnr::new(samples, reference.width(), reference.height(), kind)?.score(reference, impaired)
}

/// PSNR after resampling both frames to a Craster parabolic raster whose
/// width equals the reference width.
#[derive(Debug, Clone)]
pub struct CppPsnr {
    ref_map: ResampleMap,
    imp_map: ResampleMap,
}

impl CppPsnr {
    pub fn new(
        ref_dims: (usize, usize),
        ref_kind: ProjectionKind,
        imp_dims: (usize, usize),
        imp_kind: ProjectionKind,
    ) -> Result<Self> {
        let w = ref_dims.0;
        let h = ProjectionKind::Cpp.height_for_width(w)?;
        let ref_map =
            ResampleMap::new(ref_dims.0, ref_dims.1, ref_kind, w, h, ProjectionKind::Cpp)?;
        let imp_map =
            ResampleMap::new(imp_dims.0, imp_dims.1, imp_kind, w, h, ProjectionKind::Cpp)?;
        Ok(CppPsnr { ref_map, imp_map })
    }

    pub fn score(&self, reference: &FramePlane, impaired: &FramePlane) -> Result<f64> {
        let a = self.ref_map.apply(reference.samples(), 0.0);
        let b = self.imp_map.apply(impaired.samples(), 0.0);
        let mut sum = 0.0;
        let mut n = 0usize;
        for (i, (x, y)) in a.iter().zip(&b).enumerate() {
            if self.ref_map.is_valid(i) {
                sum += (x - y) * (x - y);
                n += 1;
            }
        }
        Ok(mse_to_psnr(sum / n as f64))
    }
}

pub fn cpp_psnr(
    reference: &FramePlane,
    ref_kind: ProjectionKind,
    impaired: &FramePlane,
    imp_kind: ProjectionKind,
) -> Result<f64> {
    CppPsnr::new(
        (reference.width(), reference.height()),
        ref_kind,
        (impaired.width(), impaired.height()),
        imp_kind,
    )?
    .score(reference, impaired)
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Separable valid-region filtering of a row-major plane.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = k
                .iter()
                .zip(&line[x..x + SSIM_WINDOW])
                .map(|(a, b)| a * b)
                .sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k
                .iter()
                .enumerate()
                .map(|(j, a)| a * rows[(y + j) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM with an 11x11 Gaussian window over the fully covered region.
pub fn ssim(reference: &FramePlane, impaired: &FramePlane) -> Result<f64> {
    check_dims(reference, impaired)?;
    let (w, h) = (reference.width(), reference.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "SSIM needs frames of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let c1 = (0.01 * Y_MAX).powi(2);
    let c2 = (0.03 * Y_MAX).powi(2);
    let a: Vec<f64> = reference.samples().iter().map(|&v| v as f64).collect();
    let b: Vec<f64> = impaired.samples().iter().map(|&v| v as f64).collect();
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    let k = gaussian_kernel();
    let [ma, mb, saa, sbb, sab] = [&a, &b, &aa, &bb, &ab].map(|p| filter_valid(p, w, h, &k));
    let n = ma.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (mx, my) = (ma[i], mb[i]);
            let vx = saa[i] - mx * mx;
            let vy = sbb[i] - my * my;
            let cxy = sab[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / n as f64)
}

/// Sequence score from per-frame scores: their arithmetic mean.
pub fn pool_sequence(per_frame: &[f64]) -> Result<f64> {
    if per_frame.is_empty() {
        return Err(Error::invalid("cannot pool an empty score list"));
    }
    Ok(per_frame.iter().sum::<f64>() / per_frame.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Psnr,
    Ssim,
    WsPsnr,
    SPsnr,
    CppPsnr,
    PsnrIHm,
    PsnrOHm,
    PsnrIEm,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::Psnr,
        Metric::Ssim,
        Metric::WsPsnr,
        Metric::SPsnr,
        Metric::CppPsnr,
        Metric::PsnrIHm,
        Metric::PsnrOHm,
        Metric::PsnrIEm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Psnr => "psnr",
            Metric::Ssim => "ssim",
            Metric::WsPsnr => "ws-psnr",
            Metric::SPsnr => "s-psnr",
            Metric::CppPsnr => "cpp-psnr",
            Metric::PsnrIHm => "psnr-i-hm",
            Metric::PsnrOHm => "psnr-o-hm",
            Metric::PsnrIEm => "psnr-i-em",
        }
    }

    /// Whether the metric needs head-movement weight maps.
    pub fn needs_hm(&self) -> bool {
        matches!(self, Metric::PsnrIHm | Metric::PsnrOHm)
    }

    pub fn needs_em(&self) -> bool {
        matches!(self, Metric::PsnrIEm)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| Error::invalid(format!("unknown metric '{s}'")))
    }
}

/// One output row; `frame` is `None` for the pooled sequence value.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub sequence: String,
    pub frame: Option<usize>,
    pub metric: Metric,
    pub value: f64,
}

/// Writes rows as `sequence,frame,metric,value`; pooled rows carry `pooled`
/// in the frame column.
pub fn write_metric_csv<W: Write>(rows: &[MetricRow], sink: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(sink);
    out.write_record(["sequence", "frame", "metric", "value"])?;
    for r in rows {
        let frame = r
            .frame
            .map_or_else(|| "pooled".to_string(), |f| f.to_string());
        out.write_record([
            r.sequence.as_str(),
            &frame,
            r.metric.name(),
            &format!("{}", r.value),
        ])?;
    }
    out.flush()?;
    Ok(())
}
