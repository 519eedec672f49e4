use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::head::{head_backward, head_forward, identity_head, HEAD_PARAMS};
use super::loss::{tv_gradient, LossWeights};
use super::sampling::Patch;
use super::scorer::LocalScorer;
use crate::error::{Error, Result};

/// One impaired sequence: its sampled patches, their normalized EM weights
/// and the subjective target.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingItem {
    pub patches: Vec<Patch>,
    pub weights: Vec<f64>,
    pub dmos: f64,
}

impl TrainingItem {
    fn check(&self, index: usize) -> Result<()> {
        if self.patches.is_empty() {
            return Err(Error::invalid(format!(
                "training item {index} has no patches"
            )));
        }
        if self.weights.len() != self.patches.len() {
            return Err(Error::dims(
                format!("{} weights in item {index}", self.patches.len()),
                self.weights.len().to_string(),
            ));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "weights of item {index} sum to {total}"
            )));
        }
        if !self.dmos.is_finite() {
            return Err(Error::invalid(format!(
                "item {index} has a non-finite target"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Nesterov-corrected first moment (Nadam) instead of plain Adam.
    pub nesterov: bool,
    /// Items per optimizer step; 0 means the whole dataset.
    pub batch_size: usize,
    /// Seeds the mini-batch shuffling.
    pub seed: u64,
    pub loss: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-4,
            epochs: 80,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            nesterov: true,
            batch_size: 0,
            seed: 0,
            loss: LossWeights::default(),
        }
    }
}

impl TrainConfig {
    /// Parses `key = value` lines on top of the defaults. Blank lines and
    /// `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = TrainConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                line: n + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let float = || value.parse::<f64>().map_err(|e| err(format!("{key}: {e}")));
            let int = || value.parse::<u64>().map_err(|e| err(format!("{key}: {e}")));
            match key {
                "learning_rate" | "lr" => c.learning_rate = float()?,
                "epochs" => c.epochs = int()? as usize,
                "beta1" => c.beta1 = float()?,
                "beta2" => c.beta2 = float()?,
                "epsilon" => c.epsilon = float()?,
                "nesterov" => c.nesterov = value.parse().map_err(|e| err(format!("{key}: {e}")))?,
                "batch_size" => c.batch_size = int()? as usize,
                "seed" => c.seed = int()?,
                "lambda1" => c.loss.lambda1 = float()?,
                "lambda2" => c.loss.lambda2 = float()?,
                "lambda3" => c.loss.lambda3 = float()?,
                "tv_exponent" => c.loss.tv_exponent = float()?,
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        let rates = [self.learning_rate, self.epsilon];
        if rates.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::invalid("learning rate and epsilon must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("moment decay rates must lie in [0, 1)"));
        }
        let l = self.loss;
        if [l.lambda1, l.lambda2, l.lambda3, l.tv_exponent]
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::invalid(
                "loss weights must be finite and non-negative",
            ));
        }
        Ok(())
    }
}

/// Trained parameters: scorer parameters followed by head parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub beta: Vec<f64>,
    pub scorer_params: usize,
    pub head_params: usize,
    pub loss: LossWeights,
}

impl ModelParams {
    /// Scorer initialization followed by the identity head.
    pub fn initial<S: LocalScorer>(scorer: &S, loss: LossWeights) -> Self {
        let mut beta = scorer.init_params();
        beta.extend(identity_head());
        ModelParams {
            beta,
            scorer_params: scorer.param_count(),
            head_params: HEAD_PARAMS,
            loss,
        }
    }

    pub fn scorer(&self) -> &[f64] {
        &self.beta[..self.scorer_params]
    }

    pub fn head(&self) -> &[f64] {
        &self.beta[self.scorer_params..]
    }

    fn manifest_path(path: &Path) -> PathBuf {
        path.with_extension("manifest")
    }

    /// Writes the values as little-endian f64 to `path` and the shapes and
    /// loss weights to `path` with extension `manifest`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.beta.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(path, bytes)?;
        let mut m = String::from("format f64le\n");
        let _ = writeln!(m, "scorer {}", self.scorer_params);
        let _ = writeln!(m, "head {}", self.head_params);
        let _ = writeln!(m, "lambda1 {}", self.loss.lambda1);
        let _ = writeln!(m, "lambda2 {}", self.loss.lambda2);
        let _ = writeln!(m, "lambda3 {}", self.loss.lambda3);
        let _ = writeln!(m, "tv_exponent {}", self.loss.tv_exponent);
        fs::write(Self::manifest_path(path), m)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(Self::manifest_path(path))?;
        let mut loss = LossWeights::default();
        let (mut scorer, mut head) = (None, None);
        for (n, line) in text.lines().enumerate() {
            let err = |message: String| Error::Parse {
                line: n + 1,
                message,
            };
            let mut parts = line.split_whitespace();
            let (Some(key), Some(value)) = (parts.next(), parts.next()) else {
                continue;
            };
            let float = || value.parse::<f64>().map_err(|e| err(format!("{key}: {e}")));
            let count = || {
                value
                    .parse::<usize>()
                    .map_err(|e| err(format!("{key}: {e}")))
            };
            match key {
                "format" if value != "f64le" => {
                    return Err(err(format!("unsupported format {value}")))
                }
                "format" => {}
                "scorer" => scorer = Some(count()?),
                "head" => head = Some(count()?),
                "lambda1" => loss.lambda1 = float()?,
                "lambda2" => loss.lambda2 = float()?,
                "lambda3" => loss.lambda3 = float()?,
                "tv_exponent" => loss.tv_exponent = float()?,
                _ => return Err(err(format!("unknown manifest key `{key}`"))),
            }
        }
        let (Some(scorer_params), Some(head_params)) = (scorer, head) else {
            return Err(Error::Format("manifest lacks scorer or head shape".into()));
        };
        let bytes = fs::read(path)?;
        if bytes.len() != 8 * (scorer_params + head_params) {
            return Err(Error::Format(format!(
                "expected {} parameter bytes, found {}",
                8 * (scorer_params + head_params),
                bytes.len()
            )));
        }
        let beta: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite parameter value".into()));
        }
        Ok(ModelParams {
            beta,
            scorer_params,
            head_params,
            loss,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub params: ModelParams,
    /// Objective over the whole dataset before training (index 0) and
    /// after every epoch.
    pub losses: Vec<f64>,
}

struct Prepared<P> {
    features: Vec<P>,
    weights: Vec<f64>,
    dmos: f64,
}

fn prepare_all<S: LocalScorer>(
    scorer: &S,
    items: &[TrainingItem],
) -> Result<Vec<Prepared<S::Prepared>>> {
    if items.is_empty() {
        return Err(Error::invalid("no training items"));
    }
    for (i, item) in items.iter().enumerate() {
        item.check(i)?;
    }
    Ok(items
        .par_iter()
        .map(|item| Prepared {
            features: item.patches.iter().map(|p| scorer.prepare(p)).collect(),
            weights: item.weights.clone(),
            dmos: item.dmos,
        })
        .collect())
}

/// Squared error, summed TV of the item's maps, and the item's share of the
/// gradient (without the L2 term).
fn item_terms<S: LocalScorer>(
    scorer: &S,
    beta: &[f64],
    item: &Prepared<S::Prepared>,
    lw: &LossWeights,
    tv_scale: f64,
) -> (f64, f64, Vec<f64>) {
    let np = scorer.param_count();
    let (sp, hp) = beta.split_at(np);
    let outputs: Vec<_> = item
        .features
        .iter()
        .map(|f| scorer.evaluate(sp, f))
        .collect();
    let p: f64 = outputs
        .iter()
        .zip(&item.weights)
        .map(|((q, _), w)| q * w)
        .sum();
    let s = head_forward(hp, p);
    let err = s - item.dmos;
    let (dp, head_grad) = head_backward(hp, p, 2.0 * lw.lambda1 * err);

    let mut grad = vec![0.0; beta.len()];
    grad[np..].copy_from_slice(&head_grad);
    let mut tv = 0.0;
    for ((f, (_, map)), w) in item.features.iter().zip(&outputs).zip(&item.weights) {
        tv += super::loss::tv_term(std::slice::from_ref(map), lw.tv_exponent)
            .expect("scorer maps have the declared size")
            * (map.width() * map.height()) as f64;
        let d_map = tv_gradient(map, lw.tv_exponent, tv_scale);
        let g = scorer.backward(sp, f, dp * w, &d_map);
        grad[..np]
            .iter_mut()
            .zip(&g.params)
            .for_each(|(a, b)| *a += b);
    }
    (err * err, tv, grad)
}

fn objective<S: LocalScorer>(
    scorer: &S,
    beta: &[f64],
    items: &[&Prepared<S::Prepared>],
    lw: &LossWeights,
) -> (f64, Vec<f64>) {
    let (w, h) = scorer.map_size();
    let patches: usize = items.iter().map(|i| i.features.len()).sum();
    let norm = (patches * w * h) as f64;
    let tv_scale = lw.lambda2 / norm;
    // per-item terms in parallel, reduced in item order
    let terms: Vec<_> = items
        .par_iter()
        .map(|it| item_terms(scorer, beta, it, lw, tv_scale))
        .collect();
    let mut grad: Vec<f64> = beta.iter().map(|b| 2.0 * lw.lambda3 * b).collect();
    let (mut sq, mut tv) = (0.0, 0.0);
    for (e, t, g) in terms {
        sq += e;
        tv += t;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    let l2: f64 = beta.iter().map(|b| b * b).sum();
    (
        lw.lambda1 * sq + lw.lambda2 * tv / norm + lw.lambda3 * l2,
        grad,
    )
}

fn check_beta<S: LocalScorer>(scorer: &S, beta: &[f64]) -> Result<()> {
    let expect = scorer.param_count() + HEAD_PARAMS;
    if beta.len() != expect {
        return Err(Error::dims(
            format!("{expect} parameters"),
            beta.len().to_string(),
        ));
    }
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite parameter".into()));
    }
    Ok(())
}

/// Loss over all `items` treated as one batch, and its gradient with respect
/// to `beta` (scorer parameters followed by head parameters).
pub fn evaluate_objective<S: LocalScorer>(
    scorer: &S,
    items: &[TrainingItem],
    beta: &[f64],
    weights: &LossWeights,
) -> Result<(f64, Vec<f64>)> {
    check_beta(scorer, beta)?;
    let prepared = prepare_all(scorer, items)?;
    let refs: Vec<_> = prepared.iter().collect();
    Ok(objective(scorer, beta, &refs, weights))
}

/// Sequence-level score of one item.
pub fn predict<S: LocalScorer>(
    scorer: &S,
    params: &ModelParams,
    item: &TrainingItem,
) -> Result<f64> {
    check_beta(scorer, &params.beta)?;
    item.check(0)?;
    let local: Vec<f64> = item
        .patches
        .par_iter()
        .map(|p| scorer.evaluate(params.scorer(), &scorer.prepare(p)).0)
        .collect();
    super::head::aggregate(&local, &item.weights, params.head())
}

/// Minimizes the loss with Adam (or Nadam), starting from the scorer's
/// initialization and the identity head.
pub fn train<S: LocalScorer>(
    scorer: &S,
    items: &[TrainingItem],
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    let prepared = prepare_all(scorer, items)?;
    let all: Vec<_> = prepared.iter().collect();
    let mut params = ModelParams::initial(scorer, config.loss);
    let lw = config.loss;
    let n = params.beta.len();
    let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
    let (b1, b2) = (config.beta1, config.beta2);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let batch = if config.batch_size == 0 {
        prepared.len()
    } else {
        config.batch_size
    };

    let (first, _) = objective(scorer, &params.beta, &all, &lw);
    let mut losses = vec![first];
    let mut step = 0i32;
    for epoch in 0..config.epochs {
        if batch < prepared.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let items: Vec<_> = chunk.iter().map(|&i| &prepared[i]).collect();
            let (l, g) = objective(scorer, &params.beta, &items, &lw);
            if !l.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "loss {l} at epoch {epoch}, step {step}"
                )));
            }
            step += 1;
            let (c1, c2) = (1.0 - b1.powi(step), 1.0 - b2.powi(step));
            for k in 0..n {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                let m_hat = if config.nesterov {
                    b1 * m[k] / (1.0 - b1.powi(step + 1)) + (1.0 - b1) * g[k] / c1
                } else {
                    m[k] / c1
                };
                params.beta[k] -=
                    config.learning_rate * m_hat / ((v[k] / c2).sqrt() + config.epsilon);
            }
        }
        let (l, _) = objective(scorer, &params.beta, &all, &lw);
        if !l.is_finite() {
            return Err(Error::Numeric(format!("loss {l} after epoch {epoch}")));
        }
        log::debug!("epoch {epoch}: loss {l}");
        losses.push(l);
    }
    Ok(TrainReport { params, losses })
}
