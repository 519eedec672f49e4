use crate::error::{Error, Result};

/// Pearson correlation; `None` when either side has no variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "pearson needs equal lengths");
    let n = a.len() as f64;
    if a.len() < 2 {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing their average rank.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut out = vec![0.0; values.len()];
    let mut k = 0;
    while k < order.len() {
        let mut end = k;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[k]] {
            end += 1;
        }
        let avg = (k + end) as f64 / 2.0 + 1.0;
        for &i in &order[k..=end] {
            out[i] = avg;
        }
        k = end + 1;
    }
    out
}

/// Spearman rank correlation.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    pearson(&ranks(a), &ranks(b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationReport {
    /// `None` when undefined (a constant input).
    pub pcc: Option<f64>,
    pub srcc: Option<f64>,
    pub rmse: f64,
    pub mae: f64,
    pub n: usize,
}

pub fn correlate(fitted: &[f64], dmos: &[f64]) -> Result<CorrelationReport> {
    if fitted.len() != dmos.len() {
        return Err(Error::dims(
            format!("{} scores", dmos.len()),
            format!("{}", fitted.len()),
        ));
    }
    if fitted.len() < 2 {
        return Err(Error::invalid("correlation needs at least two scores"));
    }
    if fitted.iter().chain(dmos).any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "non-finite score in correlation input".into(),
        ));
    }
    let n = fitted.len() as f64;
    let rmse = (fitted
        .iter()
        .zip(dmos)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let mae = fitted
        .iter()
        .zip(dmos)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n;
    Ok(CorrelationReport {
        pcc: pearson(fitted, dmos),
        srcc: spearman(fitted, dmos),
        rmse,
        mae,
        n: fitted.len(),
    })
}
