//! How consistent are viewers? Split them into random halves, correlate the
//! halves' overall maps frame by frame, and report viewport coverage.
//!
//! `cargo run --release --example split_half`

use odvqa::traces::{align_to_frames, parse_trace, TimestampMode};
use odvqa::weights::{
    mean_defined, random_halves, split_half_consistency, subject_hm_maps, viewport_coverage,
    Aggregation, PixelGrid, SampleChoice,
};
use odvqa::{Fov, ProjectionKind, VideoMeta, WeightMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> odvqa::Result<()> {
    let meta = VideoMeta::new(256, 128, 30.0, 8, ProjectionKind::Erp)?;
    let grid = PixelGrid::for_video(&meta)?;
    let fov = Fov::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    for spread in [5.0, 60.0, 170.0] {
        // every subject's maps, indexed [subject][frame]
        let mut per_subject: Vec<Vec<WeightMap>> = Vec::new();
        for s in 0..12 {
            let yaw0: f64 = rng.random_range(-spread..=spread);
            let text: String = (0..10)
                .map(|i| {
                    let t = if i == 0 { 0.0 } else { 33.3 };
                    format!(
                        "{t} {} {} 0 0.5 0.5 1\n",
                        rng.random_range(-10.0..10.0),
                        yaw0 + i as f64
                    )
                })
                .collect();
            let trace = parse_trace(&format!("s{s}"), &text, TimestampMode::Interval)?;
            let frames = align_to_frames(&trace, &meta)?;
            let maps = subject_hm_maps(&frames, &fov, &grid, SampleChoice::First)?;
            per_subject.push(maps.into_iter().flatten().collect());
        }

        let (a, b) = random_halves(per_subject.len(), 42);
        let by_frame = |group: &[usize]| -> Vec<Vec<WeightMap>> {
            (0..meta.frame_count)
                .map(|f| group.iter().map(|&s| per_subject[s][f].clone()).collect())
                .collect()
        };
        let consistency =
            split_half_consistency(&by_frame(&a), &by_frame(&b), Aggregation::OverallHm)?;
        let all_first: Vec<WeightMap> = per_subject.iter().map(|m| m[0].clone()).collect();
        println!(
            "yaw spread +-{spread:>5}: mean split-half correlation {:.3}, coverage {:.1}%",
            mean_defined(&consistency).unwrap_or(f64::NAN),
            100.0 * viewport_coverage(&all_first, ProjectionKind::Erp)?
        );
    }
    Ok(())
}
