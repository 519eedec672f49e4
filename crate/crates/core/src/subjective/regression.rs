//! Monotonic four-parameter logistic mapping from objective scores to DMOS:
//! `f(x) = b2 + (b1 - b2) / (1 + exp(-(x - b3) / |b4|))`.
//!
//! Internally the curve is evaluated as `m + (d / 2) tanh((x - b3) / (2|b4|))`
//! with `m = (b1 + b2) / 2` and `d = b1 - b2`, which stays accurate when the
//! curve is stretched into its near-linear regime (huge `b4` and `d`).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    mid: f64,
    span: f64,
    center: f64,
    scale: f64,
    /// `f(x_i)` for the fitted inputs.
    pub fitted: Vec<f64>,
    pub rmse: f64,
    pub iterations: usize,
    /// Whether the best start stopped on a small step rather than the
    /// iteration limit.
    pub converged: bool,
}

impl RegressionFit {
    pub fn beta1(&self) -> f64 {
        self.mid + self.span / 2.0
    }

    pub fn beta2(&self) -> f64 {
        self.mid - self.span / 2.0
    }

    pub fn beta3(&self) -> f64 {
        self.center
    }

    pub fn beta4(&self) -> f64 {
        self.scale
    }

    pub fn predict(&self, x: f64) -> f64 {
        eval([self.mid, self.span, self.center, self.scale], x)
    }

    /// Whether the curve increases with the objective score.
    pub fn increasing(&self) -> bool {
        self.span >= 0.0
    }
}

type Params = [f64; 4];

fn eval(p: Params, x: f64) -> f64 {
    let [m, d, c, s] = p;
    m + 0.5 * d * ((x - c) / (2.0 * s.abs())).tanh()
}

/// Value and gradient with respect to `(m, d, c, s)`.
fn eval_grad(p: Params, x: f64) -> (f64, Params) {
    let [m, d, c, s] = p;
    let a = s.abs();
    let t = (x - c) / (2.0 * a);
    let th = t.tanh();
    let sech2 = 1.0 - th * th;
    let g = [
        1.0,
        0.5 * th,
        -0.5 * d * sech2 / (2.0 * a),
        -0.5 * d * sech2 * t / a * s.signum(),
    ];
    (m + 0.5 * d * th, g)
}

fn sse(p: Params, x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| (eval(p, xi) - yi).powi(2))
        .sum()
}

/// Solves the 4x4 system `a z = b` by Gaussian elimination with partial
/// pivoting; `None` when singular.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut z = [0.0; 4];
    for row in (0..4).rev() {
        let mut acc = b[row];
        for k in row + 1..4 {
            acc -= a[row][k] * z[k];
        }
        z[row] = acc / a[row][row];
    }
    z.iter().all(|v| v.is_finite()).then_some(z)
}

/// Best `(m, d)` for a fixed center and scale: linear least squares on the
/// basis `{1, tanh(.)/2}`.
fn fit_linear_part(center: f64, scale: f64, x: &[f64], y: &[f64]) -> Params {
    let n = x.len() as f64;
    let basis: Vec<f64> = x
        .iter()
        .map(|&xi| 0.5 * ((xi - center) / (2.0 * scale)).tanh())
        .collect();
    let mb = basis.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sbb: f64 = basis.iter().map(|b| (b - mb).powi(2)).sum();
    let sby: f64 = basis.iter().zip(y).map(|(b, v)| (b - mb) * (v - my)).sum();
    let d = if sbb > 0.0 { sby / sbb } else { 0.0 };
    [my - d * mb, d, center, scale]
}

struct Outcome {
    params: Params,
    sse: f64,
    iterations: usize,
    converged: bool,
}

/// Levenberg-Marquardt refinement from one start.
fn refine(start: Params, x: &[f64], y: &[f64]) -> Outcome {
    const MAX_ITER: usize = 400;
    let mut p = start;
    let mut cost = sse(p, x, y);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..MAX_ITER {
        iterations = it + 1;
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for (&xi, &yi) in x.iter().zip(y) {
            let (f, g) = eval_grad(p, xi);
            let r = yi - f;
            for a in 0..4 {
                jtr[a] += g[a] * r;
                for b in 0..4 {
                    jtj[a][b] += g[a] * g[b];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut damped = jtj;
            for (k, row) in damped.iter_mut().enumerate() {
                row[k] += lambda * jtj[k][k].max(1e-12);
            }
            let Some(step) = solve4(damped, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p;
            for k in 0..4 {
                trial[k] += step[k];
            }
            if trial[3].abs() < 1e-300 {
                lambda *= 10.0;
                continue;
            }
            let c = sse(trial, x, y);
            if c.is_finite() && c <= cost {
                let small = step
                    .iter()
                    .zip(&p)
                    .all(|(s, v)| s.abs() <= 1e-12 * (v.abs() + 1e-12));
                let flat = cost - c <= 1e-15 * cost.max(1e-300);
                p = trial;
                cost = c;
                lambda = (lambda / 10.0).max(1e-15);
                improved = true;
                if small || flat {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Outcome {
        params: p,
        sse: cost,
        iterations,
        converged,
    }
}

/// Least-squares logistic fit from several deterministic starts.
///
/// Starts place the curve center at four positions across the data range
/// with both orientations, plus a stretched near-linear start and a flat
/// start; the best refined result wins, so the fit is never worse than the
/// best straight line (to rounding) or the best constant.
pub fn logistic_fit(objective: &[f64], dmos: &[f64]) -> Result<RegressionFit> {
    if objective.len() != dmos.len() {
        return Err(Error::dims(
            format!("{} DMOS values", objective.len()),
            format!("{}", dmos.len()),
        ));
    }
    if objective.len() < 5 {
        return Err(Error::invalid("logistic fit needs at least five points"));
    }
    if objective.iter().chain(dmos).any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "non-finite value in regression input".into(),
        ));
    }
    let lo = objective.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = objective.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range <= 0.0 {
        return Err(Error::Degenerate("objective scores are all equal".into()));
    }
    let ylo = dmos.iter().copied().fold(f64::INFINITY, f64::min);
    let yhi = dmos.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ymid = dmos.iter().sum::<f64>() / dmos.len() as f64;
    let yspan = (yhi - ylo).max(1e-6);
    let xmean = objective.iter().sum::<f64>() / objective.len() as f64;

    let mut starts: Vec<Params> = Vec::new();
    for k in 0..4 {
        let c = lo + (k as f64 + 0.5) / 4.0 * range;
        for sign in [1.0, -1.0] {
            starts.push([ymid, sign * yspan, c, range / 8.0]);
        }
    }
    starts.push(fit_linear_part(xmean, 1e6 * range, objective, dmos));
    starts.push([ymid, 0.0, xmean, range]);
    let mut starts_vp: Vec<Params> = starts[..8]
        .iter()
        .map(|s| fit_linear_part(s[2], s[3], objective, dmos))
        .collect();
    starts.append(&mut starts_vp);

    let best = starts
        .iter()
        .map(|&s| refine(s, objective, dmos))
        .min_by(|a, b| a.sse.total_cmp(&b.sse))
        .expect("at least one start");
    if !best.sse.is_finite() {
        return Err(Error::Numeric("logistic fit diverged".into()));
    }
    let [mid, span, center, scale] = best.params;
    let fitted: Vec<f64> = objective.iter().map(|&x| eval(best.params, x)).collect();
    Ok(RegressionFit {
        mid,
        span,
        center,
        scale: scale.abs(),
        fitted,
        rmse: (best.sse / objective.len() as f64).sqrt(),
        iterations: best.iterations,
        converged: best.converged,
    })
}

/// Ordinary least-squares line `(intercept, slope)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("linear fit needs two or more paired values"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Degenerate("constant regressor".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}
