//! Raw opinion scores to DMOS, then a logistic fit of an objective metric
//! and the usual correlation report.
//!
//! `cargo run --example subjective_pipeline`

use odvqa::subjective::{
    correlate, logistic_fit, quality_scores, read_score_table, reject_subjects, SequenceInfo,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> odvqa::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // two sources with five impaired versions each; one careless subject
    let quality = [90.0, 75.0, 60.0, 45.0, 30.0, 15.0];
    let mut csv = String::from("subject,sequence,score\n");
    for s in 0..20 {
        for src in ["harbor", "ski"] {
            for (k, q) in quality.iter().enumerate() {
                let score = if s == 19 {
                    rng.random_range(0.0..100.0)
                } else {
                    (q + rng.random_range(-8.0..8.0f64)).clamp(0.0, 100.0)
                };
                csv.push_str(&format!("s{s:02},{src}{k},{score:.0}\n"));
            }
        }
    }
    let table = read_score_table(csv.as_bytes())?;
    let (kept, dropped) = reject_subjects(&table)?;
    println!("rejected subjects: {dropped:?}");

    let mut infos = Vec::new();
    for src in ["harbor", "ski"] {
        infos.push(SequenceInfo::reference(format!("{src}0")).with_group(src));
        for k in 1..quality.len() {
            infos.push(
                SequenceInfo::impaired(format!("{src}{k}"), format!("{src}0")).with_group(src),
            );
        }
    }
    let scores = quality_scores(&kept, &infos)?;
    let mut objective = Vec::new();
    let mut dmos = Vec::new();
    for (j, name) in scores.sequences.iter().enumerate() {
        println!(
            "{name:>8}  MOS {:5.1}  DMOS {:6.2}",
            scores.mos[j], scores.dmos[j]
        );
        if !scores.is_reference[j] {
            // a made-up objective score that saturates at both ends
            let k = name.chars().last().unwrap().to_digit(10).unwrap() as f64;
            objective.push(48.0 - 4.0 * k + rng.random_range(-1.0..1.0));
            dmos.push(scores.dmos[j]);
        }
    }

    let fit = logistic_fit(&objective, &dmos)?;
    let report = correlate(&fit.fitted, &dmos)?;
    println!(
        "logistic fit: beta = ({:.2}, {:.2}, {:.2}, {:.2})",
        fit.beta1(),
        fit.beta2(),
        fit.beta3(),
        fit.beta4()
    );
    println!(
        "PCC {:.3}  SRCC {:.3}  RMSE {:.2}  MAE {:.2}  n {}",
        report.pcc.unwrap_or(f64::NAN),
        report.srcc.unwrap_or(f64::NAN),
        report.rmse,
        report.mae,
        report.n
    );
    Ok(())
}
