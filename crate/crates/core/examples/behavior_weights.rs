//! From head/eye traces to weight maps and behavior-weighted PSNR.
//!
//! Three viewers look roughly ahead while the impaired frame is damaged
//! only behind them: plain PSNR drops, the behavior-weighted scores do not.
//!
//! `cargo run --release --example behavior_weights`

use odvqa::media_io::{read_weight_map, write_weight_map};
use odvqa::metrics::{psnr, psnr_i_em, psnr_i_hm, psnr_o_hm};
use odvqa::traces::{align_to_frames, parse_trace, TimestampMode};
use odvqa::weights::{
    o_hm_map, subject_em_maps, subject_hm_maps, GazeParams, PixelGrid, SampleChoice,
};
use odvqa::{Fov, FramePlane, ProjectionKind, VideoMeta};

fn trace_text(pitch: f64, yaw: f64, u: f64, v: f64) -> String {
    // interval timestamps in ms, one sample per ~frame
    (0..6)
        .map(|i| {
            let t = if i == 0 { 0.0 } else { 33.3 };
            format!("{t} {pitch} {} 0 {u} {v} 1\n", yaw + i as f64)
        })
        .collect()
}

fn main() -> odvqa::Result<()> {
    let meta = VideoMeta::new(256, 128, 30.0, 4, ProjectionKind::Erp)?;
    let grid = PixelGrid::for_video(&meta)?;
    let fov = Fov::default();
    let gaze = GazeParams::default();

    let viewers = [
        ("ana", 0.0, -10.0, 0.5, 0.5),
        ("ben", 10.0, 15.0, 0.4, 0.55),
        ("kai", -5.0, 30.0, 0.6, 0.5),
    ];
    let mut hm = Vec::new();
    let mut em = Vec::new();
    for (name, pitch, yaw, u, v) in viewers {
        let trace = parse_trace(name, &trace_text(pitch, yaw, u, v), TimestampMode::Interval)?;
        let frames = align_to_frames(&trace, &meta)?;
        // frame 0 only
        hm.extend(subject_hm_maps(&frames, &fov, &grid, SampleChoice::First)?.remove(0));
        em.extend(subject_em_maps(&frames, &gaze, &fov, &grid, SampleChoice::First)?.remove(0));
    }
    let overall = o_hm_map(&hm)?;
    println!(
        "{} viewers; overall map mass {:.6}, {:.1}% of pixels seen by someone",
        hm.len(),
        overall.sum(),
        100.0 * overall.values().iter().filter(|&&v| v > 0.0).count() as f64
            / overall.values().len() as f64
    );

    let mut buf = Vec::new();
    write_weight_map(&overall, &mut buf)?;
    let back = read_weight_map(&mut buf.as_slice())?;
    println!(
        "OVWM round trip: {} bytes, {}x{}",
        buf.len(),
        back.width(),
        back.height()
    );

    let reference = FramePlane::from_fn(256, 128, |x, y| ((x + 2 * y) % 200) as u8 + 20)?;
    let impaired = FramePlane::from_fn(256, 128, |x, y| {
        let behind = !(64..192).contains(&x);
        let v = reference.get(x, y);
        if behind {
            v.saturating_add(((x * 13 + y * 7) % 50) as u8)
        } else {
            v
        }
    })?;
    println!("psnr       {:6.2} dB", psnr(&reference, &impaired)?);
    println!(
        "psnr-i-hm  {:6.2} dB",
        psnr_i_hm(&reference, &impaired, &hm)?
    );
    println!(
        "psnr-o-hm  {:6.2} dB",
        psnr_o_hm(&reference, &impaired, &overall)?
    );
    println!(
        "psnr-i-em  {:6.2} dB",
        psnr_i_em(&reference, &impaired, &em)?
    );
    Ok(())
}
