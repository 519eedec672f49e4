//! Spherical geometry for head poses and viewports.
//!
//! Conventions: latitude 0 / longitude 0 is `+X`, longitude +90 is `+Y` and
//! latitude +90 is `+Z`. A pose places the viewport center at
//! (latitude = pitch, longitude = yaw); roll spins the image plane about the
//! viewing axis. The viewport is a rectilinear frustum whose horizontal axis
//! points toward increasing longitude and whose vertical axis points toward
//! increasing latitude.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Wraps an angle in degrees into `[-180, 180)`.
pub fn wrap_degrees(angle: f64) -> f64 {
    let wrapped = (angle + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if wrapped >= 180.0 {
        wrapped - 360.0
    } else {
        wrapped
    }
}

/// One head-movement sample: Euler angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pitch: f64,
    yaw: f64,
    roll: f64,
}

impl Pose {
    /// Builds a pose; yaw and roll are wrapped, pitch must lie in `[-90, 90]`.
    pub fn new(pitch: f64, yaw: f64, roll: f64) -> Result<Self> {
        if !(pitch.is_finite() && yaw.is_finite() && roll.is_finite()) {
            return Err(Error::invalid("pose angles must be finite"));
        }
        if !(-90.0..=90.0).contains(&pitch) {
            return Err(Error::invalid(format!(
                "pitch {pitch} outside [-90, 90] degrees"
            )));
        }
        Ok(Pose {
            pitch,
            yaw: wrap_degrees(yaw),
            roll: wrap_degrees(roll),
        })
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn roll(&self) -> f64 {
        self.roll
    }

    /// Orthonormal viewport basis `(forward, right, up)` before roll.
    fn basis(&self) -> (Direction, Direction, Direction) {
        let (sp, cp) = self.pitch.to_radians().sin_cos();
        let (sy, cy) = self.yaw.to_radians().sin_cos();
        let forward = Direction([cp * cy, cp * sy, sp]);
        let right = Direction([-sy, cy, 0.0]);
        let up = Direction([-sp * cy, -sp * sy, cp]);
        (forward, right, up)
    }
}

/// A unit vector on the sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction([f64; 3]);

impl Direction {
    /// Normalizes `v`; fails on zero or non-finite input.
    pub fn new(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::invalid(
                "cannot normalize a zero or non-finite vector",
            ));
        }
        Ok(Direction([v[0] / norm, v[1] / norm, v[2] / norm]))
    }

    /// Direction at the given latitude/longitude (degrees).
    pub fn from_lat_lon(latitude: f64, longitude: f64) -> Self {
        let (sl, cl) = latitude.to_radians().sin_cos();
        let (so, co) = longitude.to_radians().sin_cos();
        Direction([cl * co, cl * so, sl])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn z(&self) -> f64 {
        self.0[2]
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Latitude in `[-90, 90]` degrees.
    pub fn latitude(&self) -> f64 {
        self.0[2].clamp(-1.0, 1.0).asin().to_degrees()
    }

    /// Longitude in `[-180, 180)` degrees.
    pub fn longitude(&self) -> f64 {
        wrap_degrees(self.0[1].atan2(self.0[0]).to_degrees())
    }

    /// Great-circle angle to `other`, in radians.
    pub fn angle_to(&self, other: &Direction) -> f64 {
        let cross = [
            self.0[1] * other.0[2] - self.0[2] * other.0[1],
            self.0[2] * other.0[0] - self.0[0] * other.0[2],
            self.0[0] * other.0[1] - self.0[1] * other.0[0],
        ];
        let s = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        s.atan2(self.dot(other))
    }
}

impl Add for Direction {
    type Output = [f64; 3];
    fn add(self, rhs: Direction) -> [f64; 3] {
        [
            self.0[0] + rhs.0[0],
            self.0[1] + rhs.0[1],
            self.0[2] + rhs.0[2],
        ]
    }
}

impl Sub for Direction {
    type Output = [f64; 3];
    fn sub(self, rhs: Direction) -> [f64; 3] {
        [
            self.0[0] - rhs.0[0],
            self.0[1] - rhs.0[1],
            self.0[2] - rhs.0[2],
        ]
    }
}

impl Mul<f64> for Direction {
    type Output = [f64; 3];
    fn mul(self, k: f64) -> [f64; 3] {
        [self.0[0] * k, self.0[1] * k, self.0[2] * k]
    }
}

/// Viewport field of view in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fov {
    horizontal: f64,
    vertical: f64,
}

impl Fov {
    pub fn new(horizontal: f64, vertical: f64) -> Result<Self> {
        let ok = |a: f64| a.is_finite() && a > 0.0 && a < 180.0;
        if !ok(horizontal) || !ok(vertical) {
            return Err(Error::invalid(format!(
                "field of view {horizontal}x{vertical} must lie in (0, 180) degrees"
            )));
        }
        Ok(Fov {
            horizontal,
            vertical,
        })
    }

    pub fn horizontal(&self) -> f64 {
        self.horizontal
    }

    pub fn vertical(&self) -> f64 {
        self.vertical
    }

    /// Half-extent of the image plane at unit focal distance.
    fn half_tangents(&self) -> (f64, f64) {
        (
            (self.horizontal.to_radians() / 2.0).tan(),
            (self.vertical.to_radians() / 2.0).tan(),
        )
    }
}

impl Default for Fov {
    /// 110 x 110 degrees, the nominal HMD viewport.
    fn default() -> Self {
        Fov {
            horizontal: 110.0,
            vertical: 110.0,
        }
    }
}

/// Relative slack on the frustum boundary so that directions generated from
/// the viewport edges test as inside.
const FRUSTUM_SLACK: f64 = 1e-12;

pub fn pose_to_direction(pose: &Pose) -> Direction {
    Direction::from_lat_lon(pose.pitch, pose.yaw)
}

/// Image-plane coordinates of `dir` in the (rolled) viewport of `pose`,
/// as `(x / z, y / z)` with `x` rightward and `y` upward. `None` when the
/// direction is not in front of the viewer.
fn image_plane_coords(dir: &Direction, pose: &Pose) -> Option<(f64, f64)> {
    let (forward, right, up) = pose.basis();
    let z = dir.dot(&forward);
    if z <= 0.0 {
        return None;
    }
    let xr = dir.dot(&right) / z;
    let yr = dir.dot(&up) / z;
    // undo the roll applied to the image plane
    let (sr, cr) = pose.roll.to_radians().sin_cos();
    Some((xr * cr + yr * sr, -xr * sr + yr * cr))
}

/// Whether `dir` falls inside the rectilinear viewport frustum of `pose`.
pub fn in_viewport(dir: &Direction, pose: &Pose, fov: &Fov) -> bool {
    let Some((x, y)) = image_plane_coords(dir, pose) else {
        return false;
    };
    let (tx, ty) = fov.half_tangents();
    x.abs() <= tx * (1.0 + FRUSTUM_SLACK) && y.abs() <= ty * (1.0 + FRUSTUM_SLACK)
}

/// Maps normalized viewport coordinates (`u` rightward, `v` downward, both in
/// `[0, 1]`) through the pinhole image plane onto the sphere.
pub fn viewport_point_to_direction(u: f64, v: f64, pose: &Pose, fov: &Fov) -> Result<Direction> {
    if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
        return Err(Error::invalid(format!(
            "viewport coordinates ({u}, {v}) outside [0, 1]"
        )));
    }
    let (tx, ty) = fov.half_tangents();
    let x = (2.0 * u - 1.0) * tx;
    let y = (1.0 - 2.0 * v) * ty;
    let (sr, cr) = pose.roll.to_radians().sin_cos();
    let xr = x * cr - y * sr;
    let yr = x * sr + y * cr;
    let (forward, right, up) = pose.basis();
    let f = forward.as_array();
    let r = right.as_array();
    let w = up.as_array();
    Direction::new([
        f[0] + xr * r[0] + yr * w[0],
        f[1] + xr * r[1] + yr * w[1],
        f[2] + xr * r[2] + yr * w[2],
    ])
}

/// Inverse of [`viewport_point_to_direction`]: normalized viewport position of
/// `dir`, or `None` when it lies outside the frustum.
pub fn direction_to_viewport_point(dir: &Direction, pose: &Pose, fov: &Fov) -> Option<(f64, f64)> {
    if !in_viewport(dir, pose, fov) {
        return None;
    }
    let (x, y) = image_plane_coords(dir, pose)?;
    let (tx, ty) = fov.half_tangents();
    let u = ((x / tx + 1.0) / 2.0).clamp(0.0, 1.0);
    let v = ((1.0 - y / ty) / 2.0).clamp(0.0, 1.0);
    Some((u, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pose(p: f64, y: f64, r: f64) -> Pose {
        Pose::new(p, y, r).unwrap()
    }

    #[test]
    fn pose_wraps_and_validates() {
        let p = pose(10.0, 190.0, -540.0);
        assert_abs_diff_eq!(p.yaw(), -170.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.roll(), -180.0, epsilon = 1e-12);
        assert_eq!(pose(0.0, 180.0, 0.0).yaw(), -180.0);
        assert!(Pose::new(90.5, 0.0, 0.0).is_err());
        assert!(Pose::new(f64::NAN, 0.0, 0.0).is_err());
    }

    #[test]
    fn fov_bounds() {
        assert!(Fov::new(0.0, 90.0).is_err());
        assert!(Fov::new(90.0, 180.0).is_err());
        assert!(Fov::new(179.9, 0.1).is_ok());
    }

    #[test]
    fn direction_anchors() {
        let d = pose_to_direction(&pose(0.0, 0.0, 77.0));
        assert_abs_diff_eq!(d.x(), 1.0, epsilon = 1e-15);
        let d = pose_to_direction(&pose(90.0, 0.0, 0.0));
        assert_abs_diff_eq!(d.z(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.x(), 0.0, epsilon = 1e-15);
        let d = pose_to_direction(&pose(0.0, 90.0, 0.0));
        assert_abs_diff_eq!(d.y(), 1.0, epsilon = 1e-15);
        // closed-form trig oracle
        let d = pose_to_direction(&pose(30.0, 45.0, 0.0));
        assert_abs_diff_eq!(d.x(), 0.612_372_435_695_794_5, epsilon = 1e-12);
        assert_abs_diff_eq!(d.y(), 0.612_372_435_695_794_5, epsilon = 1e-12);
        assert_abs_diff_eq!(d.z(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn frustum_edges() {
        let p = pose(0.0, 0.0, 0.0);
        let fov = Fov::default();
        assert!(!in_viewport(&Direction::from_lat_lon(0.0, 56.0), &p, &fov));
        assert!(in_viewport(&Direction::from_lat_lon(0.0, 54.0), &p, &fov));
        assert!(!in_viewport(&Direction::from_lat_lon(0.0, 180.0), &p, &fov));
        let q = pose(-20.0, 100.0, 30.0);
        let anti = pose_to_direction(&q) * -1.0;
        assert!(!in_viewport(&Direction::new(anti).unwrap(), &q, &fov));
    }

    #[test]
    fn viewport_left_edge_is_minus_half_fov() {
        let d =
            viewport_point_to_direction(0.0, 0.5, &pose(0.0, 0.0, 0.0), &Fov::default()).unwrap();
        assert_abs_diff_eq!(d.longitude(), -55.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d.latitude(), 0.0, epsilon = 1e-9);
        // v grows downward
        let d =
            viewport_point_to_direction(0.5, 0.0, &pose(0.0, 0.0, 0.0), &Fov::default()).unwrap();
        assert_abs_diff_eq!(d.latitude(), 55.0, epsilon = 1e-9);
    }

    #[test]
    fn roll_half_turn_swaps_corners() {
        let fov = Fov::new(100.0, 70.0).unwrap();
        let p0 = pose(12.0, -40.0, 25.0);
        let p180 = pose(12.0, -40.0, 205.0);
        let a = viewport_point_to_direction(0.0, 0.0, &p180, &fov).unwrap();
        let b = viewport_point_to_direction(1.0, 1.0, &p0, &fov).unwrap();
        for (x, y) in a.as_array().iter().zip(b.as_array()) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn viewport_point_rejects_out_of_range() {
        let p = pose(0.0, 0.0, 0.0);
        assert!(viewport_point_to_direction(-0.01, 0.5, &p, &Fov::default()).is_err());
        assert!(viewport_point_to_direction(0.5, 1.01, &p, &Fov::default()).is_err());
    }

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (-90.0..=90.0f64, -180.0..180.0f64, -180.0..180.0f64)
            .prop_map(|(p, y, r)| Pose::new(p, y, r).unwrap())
    }

    fn arb_fov() -> impl Strategy<Value = Fov> {
        (1.0..179.0f64, 1.0..179.0f64).prop_map(|(h, v)| Fov::new(h, v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn pose_direction_is_unit(p in arb_pose()) {
            prop_assert!((pose_to_direction(&p).norm() - 1.0).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn center_always_inside(p in arb_pose(), f in arb_fov()) {
            prop_assert!(in_viewport(&pose_to_direction(&p), &p, &f));
        }

        #[test]
        fn viewport_points_are_inside(p in arb_pose(), f in arb_fov(), u in 0.0..=1.0f64, v in 0.0..=1.0f64) {
            let d = viewport_point_to_direction(u, v, &p, &f).unwrap();
            prop_assert!(in_viewport(&d, &p, &f));
            let (bu, bv) = direction_to_viewport_point(&d, &p, &f).unwrap();
            prop_assert!((bu - u).abs() < 1e-9 && (bv - v).abs() < 1e-9);
        }

        #[test]
        fn center_fixation(p in arb_pose(), f in arb_fov()) {
            let d = viewport_point_to_direction(0.5, 0.5, &p, &f).unwrap();
            let c = pose_to_direction(&p);
            prop_assert!(d.angle_to(&c) < 1e-12);
        }

        #[test]
        fn square_frustum_roll_invariance(
            pitch in -90.0..=90.0f64,
            yaw in -180.0..180.0f64,
            roll in -180.0..180.0f64,
            side in 5.0..175.0f64,
            lat in -90.0..=90.0f64,
            lon in -180.0..180.0f64,
        ) {
            let fov = Fov::new(side, side).unwrap();
            let dir = Direction::from_lat_lon(lat, lon);
            let base = in_viewport(&dir, &Pose::new(pitch, yaw, roll).unwrap(), &fov);
            for k in 1..4 {
                let turned = Pose::new(pitch, yaw, roll + 90.0 * k as f64).unwrap();
                let (x, y) = image_plane_coords(&dir, &turned).unwrap_or((f64::NAN, f64::NAN));
                let t = (side.to_radians() / 2.0).tan();
                // skip directions sitting on the frustum boundary
                let near_edge = ((x.abs() - t) / t).abs() < 1e-9 || ((y.abs() - t) / t).abs() < 1e-9;
                if !near_edge {
                    prop_assert_eq!(in_viewport(&dir, &turned, &fov), base);
                }
            }
        }
    }
}
