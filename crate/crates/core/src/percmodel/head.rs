//! Aggregation head: weighted inner product of the local scores followed by
//! two affine layers (1 -> `HEAD_WIDTH` -> 1) with a rectifier between them.
//!
//! Parameter layout: `u` (HEAD_WIDTH), `c` (HEAD_WIDTH), `v` (HEAD_WIDTH), `d`.

use crate::error::{Error, Result};

pub const HEAD_WIDTH: usize = 8;
pub const HEAD_PARAMS: usize = 3 * HEAD_WIDTH + 1;

fn split(params: &[f64]) -> (&[f64], &[f64], &[f64], f64) {
    assert_eq!(params.len(), HEAD_PARAMS, "head parameter count");
    let (u, rest) = params.split_at(HEAD_WIDTH);
    let (c, rest) = rest.split_at(HEAD_WIDTH);
    let (v, d) = rest.split_at(HEAD_WIDTH);
    (u, c, v, d[0])
}

/// Parameters for which the head passes its input through unchanged:
/// `relu(p + 1) - relu(-p - 1) - 1 = p`. The kink sits at `p = -1` so that a
/// scorer starting at zero output begins inside an active unit.
pub fn identity_head() -> Vec<f64> {
    let mut p = vec![0.0; HEAD_PARAMS];
    p[0] = 1.0;
    p[1] = -1.0;
    p[HEAD_WIDTH] = 1.0;
    p[HEAD_WIDTH + 1] = -1.0;
    p[2 * HEAD_WIDTH] = 1.0;
    p[2 * HEAD_WIDTH + 1] = -1.0;
    p[3 * HEAD_WIDTH] = -1.0;
    p
}

pub fn head_forward(params: &[f64], p: f64) -> f64 {
    let (u, c, v, d) = split(params);
    (0..HEAD_WIDTH)
        .map(|k| v[k] * (u[k] * p + c[k]).max(0.0))
        .sum::<f64>()
        + d
}

/// Returns `(ds/dp, ds/dparams)` scaled by `d_s`.
pub fn head_backward(params: &[f64], p: f64, d_s: f64) -> (f64, Vec<f64>) {
    let (u, c, v, _) = split(params);
    let mut g = vec![0.0; HEAD_PARAMS];
    let mut dp = 0.0;
    for k in 0..HEAD_WIDTH {
        let pre = u[k] * p + c[k];
        let active = pre > 0.0;
        g[2 * HEAD_WIDTH + k] = d_s * pre.max(0.0);
        if active {
            let dh = d_s * v[k];
            g[k] = dh * p;
            g[HEAD_WIDTH + k] = dh;
            dp += dh * u[k];
        }
    }
    g[3 * HEAD_WIDTH] = d_s;
    (dp, g)
}

/// Sequence score from local scores and their (normalized) weights.
pub fn aggregate(scores: &[f64], weights: &[f64], head: &[f64]) -> Result<f64> {
    if scores.len() != weights.len() {
        return Err(Error::dims(
            format!("{} weights", scores.len()),
            weights.len().to_string(),
        ));
    }
    if scores.is_empty() {
        return Err(Error::invalid("no local scores to aggregate"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "patch weights sum to {total}, not 1"
        )));
    }
    if head.len() != HEAD_PARAMS {
        return Err(Error::dims(
            format!("{HEAD_PARAMS} head parameters"),
            head.len().to_string(),
        ));
    }
    let p: f64 = scores.iter().zip(weights).map(|(s, w)| s * w).sum();
    Ok(head_forward(head, p))
}
