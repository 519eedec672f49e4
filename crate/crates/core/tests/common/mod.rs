#![allow(dead_code)]

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use odvqa::media_io::write_frame;
use odvqa::FramePlane;

pub fn write_raw(path: &Path, frames: &[FramePlane]) {
    let mut out = BufWriter::new(File::create(path).unwrap());
    for f in frames {
        write_frame(&mut out, f).unwrap();
    }
    out.flush().unwrap();
}

/// One trace line: interval (ms), pitch, yaw, roll, gaze u, gaze v, gaze flag.
pub type TraceLine = (f64, f64, f64, f64, f64, f64, u8);

pub fn write_trace(path: &Path, lines: &[TraceLine]) {
    let mut text = String::new();
    for (t, p, y, r, u, v, f) in lines {
        text.push_str(&format!("{t} {p} {y} {r} {u} {v} {f}\n"));
    }
    std::fs::write(path, text).unwrap();
}

/// Smooth ERP content, periodic in longitude.
pub fn smooth_erp(w: usize, h: usize, phase: f64) -> FramePlane {
    FramePlane::from_fn(w, h, |x, y| {
        let lon = (x as f64 + 0.5) / w as f64 * std::f64::consts::TAU;
        let lat = (y as f64 + 0.5) / h as f64 * std::f64::consts::PI;
        (128.0 + 50.0 * (lon + phase).cos() * lat.sin() + 20.0 * (3.0 * lat).cos()).round() as u8
    })
    .unwrap()
}

/// Latitude and longitude in degrees of ERP pixel centers.
pub fn erp_lat_lon(x: usize, y: usize, w: usize, h: usize) -> (f64, f64) {
    let lat = 90.0 - (y as f64 + 0.5) / h as f64 * 180.0;
    let lon = (x as f64 + 0.5) / w as f64 * 360.0 - 180.0;
    (lat, lon)
}

/// Great-circle angle in degrees between two latitude/longitude pairs.
pub fn angle_between(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (la, lo) = (a.0.to_radians(), a.1.to_radians());
    let (lb, lob) = (b.0.to_radians(), b.1.to_radians());
    let c = la.sin() * lb.sin() + la.cos() * lb.cos() * (lo - lob).cos();
    c.clamp(-1.0, 1.0).acos().to_degrees()
}
