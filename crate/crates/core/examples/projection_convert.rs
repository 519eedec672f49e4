//! Resampling a frame between ERP, RCMP, TSP and CPP and measuring what the
//! round trip costs.
//!
//! `cargo run --release --example projection_convert`

use odvqa::metrics::psnr;
use odvqa::projection::{pixel_to_sphere, resample_frame, sphere_to_pixel};
use odvqa::{FramePlane, ProjectionKind};

fn test_card(w: usize, h: usize) -> odvqa::Result<FramePlane> {
    FramePlane::from_fn(w, h, |x, y| {
        let lon = (x as f64 + 0.5) / w as f64 * std::f64::consts::TAU;
        let lat = (y as f64 + 0.5) / h as f64 * std::f64::consts::PI;
        (128.0 + 60.0 * (3.0 * lon).sin() * lat.sin() + 30.0 * (4.0 * lat).cos()) as u8
    })
}

fn main() -> odvqa::Result<()> {
    let (w, h) = (1024, 512);
    let erp = test_card(w, h)?;

    let p = pixel_to_sphere(700, 100, w, h, ProjectionKind::Erp)?;
    println!(
        "ERP pixel (700, 100) is lat {:.3}, lon {:.3}",
        p.latitude(),
        p.longitude()
    );

    for kind in [
        ProjectionKind::Rcmp,
        ProjectionKind::Tsp,
        ProjectionKind::Cpp,
    ] {
        let tw = if kind == ProjectionKind::Rcmp { 768 } else { w };
        let th = kind.height_for_width(tw)?;
        let there = resample_frame(&erp, ProjectionKind::Erp, kind, tw, th)?;
        let back = resample_frame(&there, kind, ProjectionKind::Erp, w, h)?;
        let at = sphere_to_pixel(&p, tw, th, kind);
        println!(
            "{:>4} {tw}x{th}: same point at {:?}, ERP round trip PSNR {:.2} dB",
            kind.name(),
            at.map(|(x, y)| (x.round(), y.round())),
            psnr(&erp, &back)?
        );
    }
    Ok(())
}
