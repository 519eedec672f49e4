//! Plain and sphere-aware PSNR variants on one distorted ERP frame.
//!
//! Distortion near the poles is heavily over-represented in an ERP raster,
//! so plain PSNR penalizes it more than the spherical metrics do.
//!
//! `cargo run --release --example spherical_metrics`

use odvqa::metrics::{cpp_psnr, psnr, s_psnr, ssim, ws_psnr};
use odvqa::projection::uniform_samples;
use odvqa::{FramePlane, ProjectionKind};

fn main() -> odvqa::Result<()> {
    let (w, h) = (512, 256);
    let reference = FramePlane::from_fn(w, h, |x, y| ((x / 8 + y / 8) % 2 * 100 + 70) as u8)?;
    let samples = uniform_samples(100_000)?;
    let erp = ProjectionKind::Erp;

    for (label, band) in [("polar band", 0..32), ("equator band", 112..144)] {
        let impaired = FramePlane::from_fn(w, h, |x, y| {
            let v = reference.get(x, y);
            if band.contains(&y) {
                v.saturating_add(((x * 37 + y * 11) % 31) as u8)
            } else {
                v
            }
        })?;
        println!("noise in the {label}:");
        println!("  psnr     {:6.2}", psnr(&reference, &impaired)?);
        println!("  ws-psnr  {:6.2}", ws_psnr(&reference, &impaired, erp)?);
        println!(
            "  s-psnr   {:6.2}",
            s_psnr(&reference, &impaired, erp, &samples)?
        );
        println!(
            "  cpp-psnr {:6.2}",
            cpp_psnr(&reference, erp, &impaired, erp)?
        );
        println!("  ssim     {:6.4}", ssim(&reference, &impaired)?);
    }
    Ok(())
}
