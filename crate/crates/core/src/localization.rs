//! Ground-plane person localization from the foot point of a panorama box.

use std::fmt;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::boxes::PanoBox;
use crate::camera::PixelCoord;
use crate::equirect::EquirectSpec;
use crate::error::{invalid, Error, Result};

/// Upper edges of the near and mid distance bins, meters.
pub const NEAR_LIMIT_M: f64 = 10.0;
pub const MID_LIMIT_M: f64 = 20.0;

/// Horizontal position relative to the point below the camera, meters.
/// `x` follows azimuth 0 and `y` azimuth 90°.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPosition {
    pub x_m: f64,
    pub y_m: f64,
    pub distance_m: f64,
}

impl GroundPosition {
    pub fn new(x_m: f64, y_m: f64) -> Self {
        Self {
            x_m,
            y_m,
            distance_m: x_m.hypot(y_m),
        }
    }

    pub fn from_polar(distance_m: f64, azimuth: f64) -> Self {
        let (s, c) = azimuth.sin_cos();
        Self {
            x_m: distance_m * c,
            y_m: distance_m * s,
            distance_m,
        }
    }
}

/// Intersects the ray through the bottom-center of `b` with the ground plane
/// `camera_height_m` below the camera.
pub fn locate_from_box(b: &PanoBox, spec: &EquirectSpec, camera_height_m: f64) -> Result<GroundPosition> {
    if !(camera_height_m.is_finite() && camera_height_m > 0.0) {
        return Err(invalid(format!("camera height must be positive, got {camera_height_m}")));
    }
    let w = f64::from(spec.width());
    let foot = PixelCoord::new(b.center_u(w), b.v_max);
    let p = spec.pano_to_sphere(foot)?;
    let d = camera_height_m * p.theta().tan();
    if p.theta() >= FRAC_PI_2 || !d.is_finite() {
        return Err(Error::Horizon {
            theta_deg: p.theta().to_degrees(),
        });
    }
    Ok(GroundPosition::from_polar(d, p.phi()))
}

/// Worst-case distance error from a one-row shift of the foot edge at
/// incident angle `theta`: `c * (tan(theta + row) - tan(theta))`.
pub fn row_error_bound(spec: &EquirectSpec, camera_height_m: f64, theta: f64) -> f64 {
    let row = FRAC_PI_2 / f64::from(spec.height());
    let hi = (theta + row).min(FRAC_PI_2);
    camera_height_m * (hi.tan() - theta.tan())
}

pub fn position_error(est: &GroundPosition, gt: &GroundPosition) -> f64 {
    (est.x_m - gt.x_m).hypot(est.y_m - gt.y_m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceBin {
    Near,
    Mid,
    Far,
}

impl DistanceBin {
    pub const ALL: [DistanceBin; 3] = [DistanceBin::Near, DistanceBin::Mid, DistanceBin::Far];

    pub fn as_str(&self) -> &'static str {
        match self {
            DistanceBin::Near => "near",
            DistanceBin::Mid => "mid",
            DistanceBin::Far => "far",
        }
    }
}

impl fmt::Display for DistanceBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Left-closed bins: `[0, 10)`, `[10, 20)`, `[20, inf)` meters.
pub fn distance_bin(d_m: f64) -> Result<DistanceBin> {
    if !(d_m >= 0.0) {
        return Err(invalid(format!("distance must be non-negative, got {d_m}")));
    }
    Ok(if d_m < NEAR_LIMIT_M {
        DistanceBin::Near
    } else if d_m < MID_LIMIT_M {
        DistanceBin::Mid
    } else {
        DistanceBin::Far
    })
}
