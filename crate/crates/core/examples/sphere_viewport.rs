//! Head poses, viewing directions and viewport membership.
//!
//! `cargo run --example sphere_viewport`

use odvqa::sphere::{
    direction_to_viewport_point, in_viewport, pose_to_direction, viewport_point_to_direction,
};
use odvqa::{Direction, Fov, Pose};

fn main() -> odvqa::Result<()> {
    let fov = Fov::new(110.0, 110.0)?;
    let pose = Pose::new(20.0, -45.0, 0.0)?;
    let ahead = pose_to_direction(&pose);
    println!(
        "pose (pitch 20, yaw -45) looks at lat {:.1}, lon {:.1}",
        ahead.latitude(),
        ahead.longitude()
    );

    // the corners of the viewport and a point just outside it
    for (u, v) in [(0.0, 0.0), (1.0, 0.0), (0.5, 0.5), (0.0, 1.0), (1.0, 1.0)] {
        let d = viewport_point_to_direction(u, v, &pose, &fov)?;
        println!(
            "viewport ({u:.1}, {v:.1}) -> lat {:6.1} lon {:7.1}, {:.1} deg off axis",
            d.latitude(),
            d.longitude(),
            d.angle_to(&ahead).to_degrees()
        );
    }

    for (lat, lon) in [(20.0, -45.0), (0.0, 0.0), (60.0, -45.0), (0.0, 135.0)] {
        let d = Direction::from_lat_lon(lat, lon);
        match direction_to_viewport_point(&d, &pose, &fov) {
            Some((u, v)) => println!("lat {lat}, lon {lon}: visible at ({u:.3}, {v:.3})"),
            None => {
                assert!(!in_viewport(&d, &pose, &fov));
                println!("lat {lat}, lon {lon}: outside the viewport");
            }
        }
    }

    // yaw wraps, pitch does not
    let wrapped = Pose::new(0.0, 270.0, 0.0)?;
    println!("yaw 270 is stored as {}", wrapped.yaw());
    if let Err(e) = Pose::new(95.0, 0.0, 0.0) {
        println!("pitch 95 rejected: {e}");
    }
    Ok(())
}
