//! Pixel/sphere mappings for the supported map projections.
//!
//! All mappings work in continuous pixel coordinates where pixel `(x, y)`
//! covers `[x, x + 1) x [y, y + 1)`; the center of pixel `(x, y)` is therefore
//! `(x + 0.5, y + 0.5)`.

mod cpp;
mod cube;
mod resample;
mod tsp;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sphere::{wrap_degrees, Direction};

pub use resample::{resample_frame, sample_bilinear, ResampleMap};

/// Map projection of an omnidirectional frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProjectionKind {
    /// Equirectangular, 2:1.
    Erp,
    /// Reshaped cubemap, six 90 degree faces packed 3x2.
    Rcmp,
    /// Truncated square pyramid, 2:1 with the front face on the left half.
    Tsp,
    /// Craster parabolic equal-area map, 2:1 with padding outside the
    /// parabolic outline.
    Cpp,
}

impl ProjectionKind {
    pub const ALL: [ProjectionKind; 4] = [
        ProjectionKind::Erp,
        ProjectionKind::Rcmp,
        ProjectionKind::Tsp,
        ProjectionKind::Cpp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ProjectionKind::Erp => "erp",
            ProjectionKind::Rcmp => "rcmp",
            ProjectionKind::Tsp => "tsp",
            ProjectionKind::Cpp => "cpp",
        }
    }

    /// Checks the frame geometry required by this projection.
    pub fn check_dims(&self, width: usize, height: usize) -> Result<()> {
        let ok = width > 0
            && height > 0
            && match self {
                ProjectionKind::Rcmp => 2 * width == 3 * height,
                _ => width == 2 * height,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::AspectRatio {
                width,
                height,
                projection: self.name(),
            })
        }
    }

    /// Height matching `width` under this projection's aspect ratio.
    pub fn height_for_width(&self, width: usize) -> Result<usize> {
        let height = match self {
            ProjectionKind::Rcmp => width * 2 / 3,
            _ => width / 2,
        };
        self.check_dims(width, height)?;
        Ok(height)
    }
}

impl fmt::Display for ProjectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProjectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "erp" => Ok(ProjectionKind::Erp),
            "rcmp" => Ok(ProjectionKind::Rcmp),
            "tsp" => Ok(ProjectionKind::Tsp),
            "cpp" => Ok(ProjectionKind::Cpp),
            other => Err(Error::invalid(format!("unknown projection '{other}'"))),
        }
    }
}

/// A point on the sphere in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    latitude: f64,
    longitude: f64,
}

impl SpherePoint {
    pub fn new(latitude: f64, longitude: f64) -> Result<Self> {
        if !latitude.is_finite() || !longitude.is_finite() || !(-90.0..=90.0).contains(&latitude) {
            return Err(Error::invalid(format!(
                "invalid sphere point ({latitude}, {longitude})"
            )));
        }
        Ok(SpherePoint {
            latitude,
            longitude: wrap_degrees(longitude),
        })
    }

    pub fn latitude(&self) -> f64 {
        self.latitude
    }

    pub fn longitude(&self) -> f64 {
        self.longitude
    }

    pub fn to_direction(&self) -> Direction {
        Direction::from_lat_lon(self.latitude, self.longitude)
    }

    pub fn from_direction(dir: &Direction) -> Self {
        SpherePoint {
            latitude: dir.latitude(),
            longitude: dir.longitude(),
        }
    }
}

/// Ordered set of sample points on the sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    points: Vec<SpherePoint>,
}

impl SampleSet {
    pub fn points(&self) -> &[SpherePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Sample count used by S-PSNR unless overridden.
pub const DEFAULT_SPSNR_POINTS: usize = 655_362;

/// Near-uniform points from the spherical Fibonacci lattice.
///
/// Point `i` sits at `z = 1 - (2i + 1) / n` and longitude `i` times the golden
/// angle. The set is symmetric in `z`, so hemispheres are balanced.
pub fn uniform_samples(n: usize) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    let golden_angle = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let points = (0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let lon = wrap_degrees((i as f64 * golden_angle).to_degrees());
            SpherePoint {
                latitude: z.asin().to_degrees(),
                longitude: lon,
            }
        })
        .collect();
    Ok(SampleSet { points })
}

/// Direction of an arbitrary continuous frame position, or `None` for
/// padding (only CPP has padding).
pub fn point_to_direction(
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
    kind: ProjectionKind,
) -> Option<Direction> {
    let (w, h) = (width as f64, height as f64);
    match kind {
        ProjectionKind::Erp => Some(Direction::from_lat_lon(
            (0.5 - cy / h) * 180.0,
            (cx / w - 0.5) * 360.0,
        )),
        ProjectionKind::Rcmp => Some(cube::rcmp_to_direction(cx, cy, w, h)),
        ProjectionKind::Tsp => Some(tsp::tsp_to_direction(cx, cy, w, h)),
        ProjectionKind::Cpp => {
            cpp::cpp_to_sphere(cx, cy, w, h).map(|(lat, lon)| Direction::from_lat_lon(lat, lon))
        }
    }
}

/// Sphere point of an arbitrary continuous frame position.
pub fn point_to_sphere(
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
    kind: ProjectionKind,
) -> Option<SpherePoint> {
    let (w, h) = (width as f64, height as f64);
    match kind {
        ProjectionKind::Erp => Some(SpherePoint {
            latitude: (0.5 - cy / h) * 180.0,
            longitude: wrap_degrees((cx / w - 0.5) * 360.0),
        }),
        ProjectionKind::Cpp => cpp::cpp_to_sphere(cx, cy, w, h).map(|(lat, lon)| SpherePoint {
            latitude: lat,
            longitude: wrap_degrees(lon),
        }),
        _ => {
            point_to_direction(cx, cy, width, height, kind).map(|d| SpherePoint::from_direction(&d))
        }
    }
}

/// Sphere point at the center of pixel `(x, y)`.
pub fn pixel_to_sphere(
    x: usize,
    y: usize,
    width: usize,
    height: usize,
    kind: ProjectionKind,
) -> Result<SpherePoint> {
    kind.check_dims(width, height)?;
    if x >= width || y >= height {
        return Err(Error::invalid(format!(
            "pixel ({x}, {y}) outside a {width}x{height} frame"
        )));
    }
    point_to_sphere(x as f64 + 0.5, y as f64 + 0.5, width, height, kind).ok_or(
        Error::OutsideProjection {
            x,
            y,
            projection: kind.name(),
        },
    )
}

/// Continuous frame position of a sphere point; `None` when the point has no
/// image under `kind`.
pub fn sphere_to_pixel(
    p: &SpherePoint,
    width: usize,
    height: usize,
    kind: ProjectionKind,
) -> Option<(f64, f64)> {
    let (w, h) = (width as f64, height as f64);
    match kind {
        ProjectionKind::Erp => Some((
            (p.longitude / 360.0 + 0.5) * w,
            (0.5 - p.latitude / 180.0) * h,
        )),
        ProjectionKind::Cpp => Some(cpp::sphere_to_cpp(p.latitude, p.longitude, w, h)),
        _ => direction_to_pixel(&p.to_direction(), width, height, kind),
    }
}

/// Continuous frame position of a direction.
pub fn direction_to_pixel(
    d: &Direction,
    width: usize,
    height: usize,
    kind: ProjectionKind,
) -> Option<(f64, f64)> {
    let (w, h) = (width as f64, height as f64);
    match kind {
        ProjectionKind::Rcmp => Some(cube::direction_to_rcmp(d, w, h)),
        ProjectionKind::Tsp => Some(tsp::direction_to_tsp(d, w, h)),
        _ => sphere_to_pixel(&SpherePoint::from_direction(d), width, height, kind),
    }
}

/// Face-local coordinates of a pixel center, for the piecewise projections.
///
/// Returns the face label and the in-face tangent-plane coordinates, both of
/// which lie in `[-1, 1]` for every pixel.
pub fn face_coordinates(
    x: usize,
    y: usize,
    width: usize,
    height: usize,
    kind: ProjectionKind,
) -> Option<(&'static str, f64, f64)> {
    let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
    let (w, h) = (width as f64, height as f64);
    match kind {
        ProjectionKind::Rcmp => Some(cube::rcmp_face_coordinates(cx, cy, w, h)),
        ProjectionKind::Tsp => Some(tsp::tsp_face_coordinates(cx, cy, w, h)),
        _ => None,
    }
}

/// Direction of every pixel center of a frame, row-major; `None` marks
/// padding pixels.
pub fn pixel_directions(
    width: usize,
    height: usize,
    kind: ProjectionKind,
) -> Result<Vec<Option<Direction>>> {
    kind.check_dims(width, height)?;
    Ok((0..width * height)
        .map(|i| {
            let (x, y) = (i % width, i / width);
            point_to_direction(x as f64 + 0.5, y as f64 + 0.5, width, height, kind)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn erp_pixel_convention() {
        let p = pixel_to_sphere(1, 0, 4, 2, ProjectionKind::Erp).unwrap();
        assert_abs_diff_eq!(p.longitude(), -45.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.latitude(), 45.0, epsilon = 1e-12);
        let origin = SpherePoint::new(0.0, 0.0).unwrap();
        let (x, y) = sphere_to_pixel(&origin, 4, 2, ProjectionKind::Erp).unwrap();
        assert_abs_diff_eq!(x, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rcmp_front_center() {
        // 3x2 faces of 4 pixels; the front face center is the corner shared by
        // its four central pixels, so test the continuous center directly.
        let p = point_to_sphere(6.0, 2.0, 12, 8, ProjectionKind::Rcmp).unwrap();
        assert_abs_diff_eq!(p.latitude(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.longitude(), 0.0, epsilon = 1e-12);
        // odd face size puts a pixel center exactly on the axis
        let p = pixel_to_sphere(4, 1, 9, 6, ProjectionKind::Rcmp).unwrap();
        assert_abs_diff_eq!(p.latitude(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.longitude(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn tsp_front_center() {
        let p = pixel_to_sphere(2, 2, 10, 5, ProjectionKind::Tsp).unwrap();
        assert_abs_diff_eq!(p.latitude(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.longitude(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cpp_central_meridian() {
        // 2:1 frames have an even width, so the centerline falls between columns
        for y in 0..32 {
            let p = point_to_sphere(32.0, y as f64 + 0.5, 64, 32, ProjectionKind::Cpp).unwrap();
            assert_abs_diff_eq!(p.longitude(), 0.0, epsilon = 1e-12);
        }
        let p = point_to_sphere(32.0, 16.0, 64, 32, ProjectionKind::Cpp).unwrap();
        assert_abs_diff_eq!(p.latitude(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.longitude(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cpp_has_padding() {
        assert!(matches!(
            pixel_to_sphere(0, 0, 64, 32, ProjectionKind::Cpp),
            Err(Error::OutsideProjection { .. })
        ));
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(pixel_to_sphere(0, 0, 10, 10, ProjectionKind::Erp).is_err());
        assert!(pixel_to_sphere(0, 0, 8, 4, ProjectionKind::Rcmp).is_err());
        assert!(pixel_to_sphere(8, 0, 8, 4, ProjectionKind::Erp).is_err());
        assert!(ProjectionKind::Rcmp.check_dims(12, 8).is_ok());
    }

    #[test]
    fn projection_names_round_trip() {
        for k in ProjectionKind::ALL {
            assert_eq!(k.name().parse::<ProjectionKind>().unwrap(), k);
        }
        assert!("octahedral".parse::<ProjectionKind>().is_err());
    }

    #[test]
    fn fibonacci_small_counts() {
        let one = uniform_samples(1).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one, uniform_samples(1).unwrap());
        assert!(uniform_samples(0).is_err());
    }

    #[test]
    fn fibonacci_hemisphere_balance() {
        let s = uniform_samples(DEFAULT_SPSNR_POINTS).unwrap();
        assert_eq!(s.len(), 655_362);
        let north = s.points().iter().filter(|p| p.latitude() > 0.0).count() as i64;
        let south = s.points().iter().filter(|p| p.latitude() < 0.0).count() as i64;
        assert!((north - south).abs() <= 1);
    }

    #[test]
    fn fibonacci_mean_z() {
        let s = uniform_samples(10_000).unwrap();
        let mean: f64 = s.points().iter().map(|p| p.to_direction().z()).sum::<f64>() / 10_000.0;
        assert!(mean.abs() < 0.01);
        let mean_x: f64 = s.points().iter().map(|p| p.to_direction().x()).sum::<f64>() / 10_000.0;
        assert!(mean_x.abs() < 0.01);
    }

    #[test]
    fn fibonacci_points_distinct() {
        let s = uniform_samples(5_000).unwrap();
        for pair in s.points().windows(2) {
            assert!(pair[0].latitude() > pair[1].latitude());
        }
    }

    #[test]
    fn fibonacci_nearest_neighbor_spread() {
        let n = 10_000;
        let dirs: Vec<Direction> = uniform_samples(n)
            .unwrap()
            .points()
            .iter()
            .map(|p| p.to_direction())
            .collect();
        // points are sorted by z; scan outward until the z gap exceeds the best chord
        let nn: Vec<f64> = (0..n)
            .map(|i| {
                let mut best = f64::INFINITY;
                for step in [1isize, -1] {
                    let mut j = i as isize + step;
                    while j >= 0 && (j as usize) < n {
                        let q = &dirs[j as usize];
                        if (q.z() - dirs[i].z()).abs() > best {
                            break;
                        }
                        let d = dirs[i] - *q;
                        best = best.min((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt());
                        j += step;
                    }
                }
                best
            })
            .collect();
        let mean = nn.iter().sum::<f64>() / n as f64;
        let var = nn.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(var.sqrt() / mean < 0.25, "cv = {}", var.sqrt() / mean);
    }

    fn max_round_trip_error(
        kind: ProjectionKind,
        width: usize,
        height: usize,
        trials: usize,
    ) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst = 0.0f64;
        let mut tested = 0;
        while tested < trials {
            let x = rng.random_range(0..width);
            let y = rng.random_range(0..height);
            let Ok(p) = pixel_to_sphere(x, y, width, height, kind) else {
                continue;
            };
            tested += 1;
            let (cx, cy) = sphere_to_pixel(&p, width, height, kind).unwrap();
            let mut dx = (cx - (x as f64 + 0.5)).abs();
            if kind == ProjectionKind::Erp {
                dx = dx.min(width as f64 - dx);
            }
            worst = worst.max(dx.max((cy - (y as f64 + 0.5)).abs()));
        }
        worst
    }

    #[test]
    fn erp_round_trip() {
        assert!(max_round_trip_error(ProjectionKind::Erp, 512, 256, 10_000) < 1e-6);
    }

    #[test]
    fn piecewise_round_trips() {
        assert!(max_round_trip_error(ProjectionKind::Rcmp, 384, 256, 10_000) < 0.51);
        assert!(max_round_trip_error(ProjectionKind::Tsp, 512, 256, 10_000) < 0.51);
        assert!(max_round_trip_error(ProjectionKind::Cpp, 512, 256, 10_000) < 0.51);
    }

    #[test]
    fn face_coordinates_stay_in_bounds() {
        for (kind, w, h) in [
            (ProjectionKind::Rcmp, 96, 64),
            (ProjectionKind::Tsp, 128, 64),
        ] {
            for y in 0..h {
                for x in 0..w {
                    let (_, a, b) = face_coordinates(x, y, w, h, kind).unwrap();
                    assert!(
                        a.abs() <= 1.0 && b.abs() <= 1.0,
                        "{kind} ({x},{y}) -> {a},{b}"
                    );
                }
            }
        }
    }

    #[test]
    fn rcmp_covers_all_faces() {
        let (w, h) = (96, 64);
        let mut axes = std::collections::HashSet::new();
        for y in (0..h).step_by(32) {
            for x in (0..w).step_by(32) {
                let d = point_to_direction(
                    x as f64 + 16.0,
                    y as f64 + 16.0,
                    w,
                    h,
                    ProjectionKind::Rcmp,
                )
                .unwrap();
                let a = d.as_array();
                let k = (0..3)
                    .max_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs()))
                    .unwrap();
                axes.insert((k, a[k] > 0.0));
            }
        }
        assert_eq!(axes.len(), 6);
    }
}
