//! Reshaped cubemap (3x2) layout.
//!
//! ```text
//! +--------+--------+--------+
//! |  left  | front  | right  |
//! +--------+--------+--------+
//! | bottom |  back  |  top   |   (bottom row rotated by 90 degrees)
//! +--------+--------+--------+
//! ```

use crate::sphere::Direction;

type Vec3 = [f64; 3];

const X: Vec3 = [1.0, 0.0, 0.0];
const Y: Vec3 = [0.0, 1.0, 0.0];
const Z: Vec3 = [0.0, 0.0, 1.0];

fn dot(a: Vec3, b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// One face slot: its label, outward axis, and the world axes of the slot's
/// rightward and upward pixel directions.
pub(super) struct Face {
    pub name: &'static str,
    pub center: Vec3,
    pub right: Vec3,
    pub up: Vec3,
}

impl Face {
    const fn new(name: &'static str, center: Vec3, right: Vec3, up: Vec3) -> Self {
        Face {
            name,
            center,
            right,
            up,
        }
    }

    /// Rotates the slot's pixel grid by 90 degrees.
    const fn rotated(name: &'static str, center: Vec3, right: Vec3, up: Vec3) -> Self {
        Face {
            name,
            center,
            right: [-up[0], -up[1], -up[2]],
            up: right,
        }
    }

    pub fn direction(&self, a: f64, b: f64) -> Direction {
        let v = [
            self.center[0] + a * self.right[0] + b * self.up[0],
            self.center[1] + a * self.right[1] + b * self.up[1],
            self.center[2] + a * self.right[2] + b * self.up[2],
        ];
        Direction::new(v).expect("cube face point is never the origin")
    }

    /// Tangent-plane coordinates of `d`, assumed to project onto this face.
    pub fn coordinates(&self, d: &Direction) -> (f64, f64) {
        let v = d.as_array();
        let c = dot(self.center, &v);
        (dot(self.right, &v) / c, dot(self.up, &v) / c)
    }
}

// [row][col]
const SLOTS: [[Face; 3]; 2] = [
    [
        Face::new("left", [0.0, -1.0, 0.0], X, Z),
        Face::new("front", X, Y, Z),
        Face::new("right", Y, [-1.0, 0.0, 0.0], Z),
    ],
    [
        Face::rotated("bottom", [0.0, 0.0, -1.0], Y, X),
        Face::rotated("back", [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], Z),
        Face::rotated("top", Z, Y, [-1.0, 0.0, 0.0]),
    ],
];

fn slot_of(cx: f64, cy: f64, face: f64) -> (usize, usize) {
    let col = ((cx / face).floor().max(0.0) as usize).min(2);
    let row = ((cy / face).floor().max(0.0) as usize).min(1);
    (row, col)
}

fn local(cx: f64, cy: f64, face: f64, row: usize, col: usize) -> (f64, f64) {
    let a = 2.0 * (cx - col as f64 * face) / face - 1.0;
    let b = 1.0 - 2.0 * (cy - row as f64 * face) / face;
    (a, b)
}

pub(super) fn rcmp_to_direction(cx: f64, cy: f64, w: f64, _h: f64) -> Direction {
    let face = w / 3.0;
    let (row, col) = slot_of(cx, cy, face);
    let (a, b) = local(cx, cy, face, row, col);
    SLOTS[row][col].direction(a, b)
}

pub(super) fn rcmp_face_coordinates(cx: f64, cy: f64, w: f64, _h: f64) -> (&'static str, f64, f64) {
    let face = w / 3.0;
    let (row, col) = slot_of(cx, cy, face);
    let (a, b) = local(cx, cy, face, row, col);
    (SLOTS[row][col].name, a, b)
}

pub(super) fn direction_to_rcmp(d: &Direction, w: f64, _h: f64) -> (f64, f64) {
    let face = w / 3.0;
    let v = d.as_array();
    let (row, col) = SLOTS
        .iter()
        .enumerate()
        .flat_map(|(r, faces)| faces.iter().enumerate().map(move |(c, f)| (r, c, f)))
        .max_by(|(_, _, f), (_, _, g)| dot(f.center, &v).total_cmp(&dot(g.center, &v)))
        .map(|(r, c, _)| (r, c))
        .expect("six faces");
    let (a, b) = SLOTS[row][col].coordinates(d);
    (
        col as f64 * face + (a + 1.0) / 2.0 * face,
        row as f64 * face + (1.0 - b) / 2.0 * face,
    )
}
