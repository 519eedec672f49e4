//! Truncated square pyramid layout.
//!
//! The left half of the frame is the undistorted front face (the 90 degree
//! cube face around `+X`). The right half packs the remaining faces: the back
//! face is a small square at its center and the four side faces are the
//! trapezoids between that square and the outer border. A trapezoid's outer
//! edge touches the matching edge of the front face and its inner edge touches
//! the back face, so the layout is continuous across every internal seam.

use crate::sphere::Direction;

/// Half-width of the back square in right-half coordinates (`[-1, 1]`).
pub(super) const BACK_HALF: f64 = 0.25;

/// Which piece of the right half a point belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Piece {
    Back,
    Right,
    Left,
    Top,
    Bottom,
}

fn piece_of(s: f64, t: f64) -> Piece {
    if s.abs() <= BACK_HALF && t.abs() <= BACK_HALF {
        Piece::Back
    } else if s >= t.abs() {
        Piece::Right
    } else if -s >= t.abs() {
        Piece::Left
    } else if t > 0.0 {
        Piece::Top
    } else {
        Piece::Bottom
    }
}

/// Maps a trapezoid point to `(depth, lateral)` cube-face coordinates.
/// `depth` runs from -1 at the front edge to +1 at the back edge.
fn trapezoid_local(radial: f64, lateral: f64) -> (f64, f64) {
    let w = (1.0 - radial) / (1.0 - BACK_HALF);
    (2.0 * w - 1.0, lateral / radial)
}

fn front_local(cx: f64, cy: f64, h: f64) -> (f64, f64) {
    (2.0 * cx / h - 1.0, 1.0 - 2.0 * cy / h)
}

fn right_half_local(cx: f64, cy: f64, h: f64) -> (f64, f64) {
    (2.0 * (cx - h) / h - 1.0, 1.0 - 2.0 * cy / h)
}

pub(super) fn tsp_to_direction(cx: f64, cy: f64, _w: f64, h: f64) -> Direction {
    let v = if cx < h {
        let (a, b) = front_local(cx, cy, h);
        [1.0, a, b]
    } else {
        let (s, t) = right_half_local(cx, cy, h);
        match piece_of(s, t) {
            Piece::Back => [-1.0, s / BACK_HALF, t / BACK_HALF],
            Piece::Right => {
                let (depth, lat) = trapezoid_local(s, t);
                [-depth, 1.0, lat]
            }
            Piece::Left => {
                let (depth, lat) = trapezoid_local(-s, t);
                [-depth, -1.0, lat]
            }
            Piece::Top => {
                let (depth, lat) = trapezoid_local(t, s);
                [-depth, lat, 1.0]
            }
            Piece::Bottom => {
                let (depth, lat) = trapezoid_local(-t, s);
                [-depth, lat, -1.0]
            }
        }
    };
    Direction::new(v).expect("pyramid face point is never the origin")
}

pub(super) fn tsp_face_coordinates(cx: f64, cy: f64, _w: f64, h: f64) -> (&'static str, f64, f64) {
    if cx < h {
        let (a, b) = front_local(cx, cy, h);
        return ("front", a, b);
    }
    let (s, t) = right_half_local(cx, cy, h);
    match piece_of(s, t) {
        Piece::Back => ("back", s / BACK_HALF, t / BACK_HALF),
        Piece::Right => {
            let (d, l) = trapezoid_local(s, t);
            ("right", d, l)
        }
        Piece::Left => {
            let (d, l) = trapezoid_local(-s, t);
            ("left", d, l)
        }
        Piece::Top => {
            let (d, l) = trapezoid_local(t, s);
            ("top", d, l)
        }
        Piece::Bottom => {
            let (d, l) = trapezoid_local(-t, s);
            ("bottom", d, l)
        }
    }
}

/// Inverse of [`trapezoid_local`]: right-half `(radial, lateral)`.
fn trapezoid_position(depth: f64, lateral: f64) -> (f64, f64) {
    let w = (depth + 1.0) / 2.0;
    let radial = 1.0 - w * (1.0 - BACK_HALF);
    (radial, lateral * radial)
}

pub(super) fn direction_to_tsp(d: &Direction, _w: f64, h: f64) -> (f64, f64) {
    let [x, y, z] = d.as_array();
    let (ax, ay, az) = (x.abs(), y.abs(), z.abs());
    let right_half = |s: f64, t: f64| (h + (s + 1.0) / 2.0 * h, (1.0 - t) / 2.0 * h);
    if ax >= ay && ax >= az {
        if x > 0.0 {
            let (a, b) = (y / x, z / x);
            ((a + 1.0) / 2.0 * h, (1.0 - b) / 2.0 * h)
        } else {
            right_half(-y / x * BACK_HALF, -z / x * BACK_HALF)
        }
    } else if ay >= az {
        let depth = -x / ay;
        let (radial, lat) = trapezoid_position(depth, z / ay);
        if y > 0.0 {
            right_half(radial, lat)
        } else {
            right_half(-radial, lat)
        }
    } else {
        let depth = -x / az;
        let (radial, lat) = trapezoid_position(depth, y / az);
        if z > 0.0 {
            right_half(lat, radial)
        } else {
            right_half(lat, -radial)
        }
    }
}
