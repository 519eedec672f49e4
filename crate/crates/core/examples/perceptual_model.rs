//! Training the patch-based model with the bundled linear scorer.
//!
//! Each synthetic sequence is preprocessed, patches are drawn where the
//! head-movement map has mass, and the target score grows with the
//! gaze-weighted patch error.
//!
//! `cargo run --release --example perceptual_model`

use odvqa::percmodel::{
    predict, preprocess, sample_sequence, train, LinearScorer, PreprocessConfig, TrainConfig,
    TrainingItem,
};
use odvqa::{FramePlane, WeightMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blob(w: usize, h: usize, cx: f64, cy: f64) -> odvqa::Result<WeightMap> {
    let values = (0..w * h)
        .map(|i| {
            let d2 = ((i % w) as f64 - cx).powi(2) + ((i / w) as f64 - cy).powi(2);
            (-d2 / 5000.0).exp()
        })
        .collect();
    WeightMap::new(w, h, values)
}

fn main() -> odvqa::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (w, h) = (448, 224);
    let config = PreprocessConfig {
        target_width: 336,
        frame_interval: 2,
    };
    let mut items = Vec::new();
    for s in 0..16 {
        let amp = rng.random_range(2.0..50.0);
        let mut reference = Vec::new();
        let mut impaired = Vec::new();
        for f in 0..4 {
            let r =
                FramePlane::from_fn(w, h, |x, y| ((x * 3 + y * 5 + f * 7 + s) % 160 + 40) as u8)?;
            let samples = r
                .samples()
                .iter()
                .map(|&v| (v as f64 + rng.random_range(-amp..=amp)).clamp(0.0, 255.0) as u8)
                .collect();
            impaired.push(FramePlane::new(w, h, samples)?);
            reference.push(r);
        }
        let frames = preprocess(&mut reference, &mut impaired, &config)?;
        let (fw, fh) = (frames[0].impaired.width(), frames[0].impaired.height());
        let hm: Vec<WeightMap> = frames
            .iter()
            .map(|_| blob(fw, fh, 170.0, 110.0))
            .collect::<Result<_, _>>()?;
        let em = hm.clone();
        let (patches, weights) = sample_sequence(&frames, &hm, &em, 6, s as u64)?;
        let err: f64 = patches
            .iter()
            .zip(&weights)
            .map(|(p, w)| w * p.error.iter().sum::<f64>() / p.error.len() as f64)
            .sum();
        items.push(TrainingItem {
            patches,
            weights,
            dmos: 5.0 + 300.0 * err,
        });
    }

    let scorer = LinearScorer;
    let cfg = TrainConfig {
        learning_rate: 5e-3,
        beta1: 0.5,
        epochs: 400,
        ..TrainConfig::default()
    };
    let report = train(&scorer, &items, &cfg)?;
    println!(
        "loss {:.3e} -> {:.3e} over {} epochs",
        report.losses[0],
        report.losses.last().unwrap(),
        cfg.epochs
    );
    for item in items.iter().take(5) {
        println!(
            "target {:6.2}  predicted {:6.2}",
            item.dmos,
            predict(&scorer, &report.params, item)?
        );
    }

    let dir = std::env::temp_dir().join("odvqa_model_example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("linear.params");
    report.params.save(&path)?;
    println!("parameters saved to {}", path.display());
    Ok(())
}
