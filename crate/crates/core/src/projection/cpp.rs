//! Craster parabolic (equal-area) projection.
//!
//! Forward equations in radians:
//! `X = lon * (2 cos(2 lat / 3) - 1)`, `Y = pi * sin(lat / 3)`, so
//! `X` spans `[-pi, pi]` on the equator and `Y` spans `[-pi/2, pi/2]`. The
//! frame maps `X` linearly onto its width and `Y` onto its height; pixels
//! outside the parabolic outline are padding.

use std::f64::consts::PI;

pub(super) fn cpp_to_sphere(cx: f64, cy: f64, w: f64, h: f64) -> Option<(f64, f64)> {
    let x = (cx / w - 0.5) * 2.0 * PI;
    let y = (0.5 - cy / h) * PI;
    let s = y / PI;
    if !(-0.5..=0.5).contains(&s) {
        return None;
    }
    let lat = 3.0 * s.asin();
    let scale = 2.0 * (2.0 * lat / 3.0).cos() - 1.0;
    if scale <= 0.0 {
        // the poles are single points
        return if x == 0.0 {
            Some((lat.to_degrees(), 0.0))
        } else {
            None
        };
    }
    let lon = x / scale;
    if lon.abs() > PI {
        return None;
    }
    Some((lat.to_degrees(), lon.to_degrees()))
}

pub(super) fn sphere_to_cpp(lat_deg: f64, lon_deg: f64, w: f64, h: f64) -> (f64, f64) {
    let lat = lat_deg.to_radians();
    let lon = lon_deg.to_radians();
    let x = lon * (2.0 * (2.0 * lat / 3.0).cos() - 1.0);
    let y = PI * (lat / 3.0).sin();
    ((x / (2.0 * PI) + 0.5) * w, (0.5 - y / PI) * h)
}
