//! Stereographic fisheye camera model.
//!
//! A viewing direction is described by its incident angle `theta` (0 on the
//! optical axis, which points straight down for an overhead camera, and π/2
//! at the horizon) and its azimuth `phi`. The radial image distance follows
//! `gamma = 2 f tan(theta / 2)`.
//!
//! Azimuth convention, shared by every module of the crate: `phi = 0` points
//! along `+u`, and a direction maps to `(c_u + gamma cos phi, c_v + gamma sin phi)`.
//! Angles grow from `+u` towards `+v`, i.e. counterclockwise in the math
//! orientation when `v` is read as the second axis.
//!
//! Pixel coordinates are continuous: pixel `(i, j)` covers `[i, i+1) x [j, j+1)`
//! and its center sits at `(i + 0.5, j + 0.5)`.

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Slack allowed when a pixel is tested against the image circle.
pub const CIRCLE_TOLERANCE_PX: f64 = 0.5;

/// Continuous image coordinate, origin top-left, `u` rightward, `v` downward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

impl PixelCoord {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(&self, other: &PixelCoord) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }

    pub fn midpoint(&self, other: &PixelCoord) -> PixelCoord {
        PixelCoord::new(0.5 * (self.u + other.u), 0.5 * (self.v + other.v))
    }
}

/// Normalizes an angle into `[0, 2π)`.
pub fn normalize_azimuth(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    // rem_euclid of a tiny negative value rounds up to exactly TAU
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Viewing direction on the lower hemisphere of the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    theta: f64,
    phi: f64,
}

impl SpherePoint {
    /// Builds a direction, normalizing the azimuth. The incident angle must
    /// lie in `[0, π/2]`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(invalid("sphere point must be finite"));
        }
        if !(0.0..=FRAC_PI_2).contains(&theta) {
            return Err(invalid(format!("incident angle {theta} outside [0, pi/2]")));
        }
        Ok(Self::from_parts(theta, phi))
    }

    /// Caller guarantees `theta` is in range.
    pub(crate) fn from_parts(theta: f64, phi: f64) -> Self {
        let phi = if theta == 0.0 { 0.0 } else { normalize_azimuth(phi) };
        Self { theta, phi }
    }

    /// Incident angle in radians.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Azimuth in radians, `[0, 2π)`.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Unit vector in the camera frame, `z` along the optical axis.
    pub fn to_unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

/// Focal length (pixels) of a stereographic lens whose 90° incident angle
/// lands on the image circle of the given radius.
pub fn fit_focal_from_circle(radius_px: f64) -> Result<f64> {
    if !(radius_px.is_finite() && radius_px > 0.0) {
        return Err(invalid(format!("circle radius must be positive, got {radius_px}")));
    }
    // 2 f tan(45°) = radius
    Ok(radius_px / (2.0 * std::f64::consts::FRAC_PI_4.tan()))
}

/// Stereographic fisheye intrinsics. Sensor pitch is folded into a
/// pixel-unit focal length and extrinsics are the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StereographicCamera {
    focal_length_px: f64,
    principal_point: PixelCoord,
    width: u32,
    height: u32,
    circle_radius_px: f64,
}

impl StereographicCamera {
    /// Camera for a `width x height` image. The circle radius defaults to
    /// half the shorter side and the principal point to the image center.
    pub fn new(
        width: u32,
        height: u32,
        circle_radius_px: Option<f64>,
        principal_point: Option<PixelCoord>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("camera image size must be positive"));
        }
        let half_short = f64::from(width.min(height)) / 2.0;
        let radius = circle_radius_px.unwrap_or(half_short);
        if radius > half_short + CIRCLE_TOLERANCE_PX {
            return Err(invalid(format!(
                "circle radius {radius} exceeds half the short image side {half_short}"
            )));
        }
        let focal = fit_focal_from_circle(radius)?;
        let pp = principal_point
            .unwrap_or_else(|| PixelCoord::new(f64::from(width) / 2.0, f64::from(height) / 2.0));
        if !(pp.u.is_finite()
            && pp.v.is_finite()
            && (0.0..=f64::from(width)).contains(&pp.u)
            && (0.0..=f64::from(height)).contains(&pp.v))
        {
            return Err(invalid(format!(
                "principal point ({}, {}) outside the image",
                pp.u, pp.v
            )));
        }
        Ok(Self {
            focal_length_px: focal,
            principal_point: pp,
            width,
            height,
            circle_radius_px: radius,
        })
    }

    pub fn focal_length_px(&self) -> f64 {
        self.focal_length_px
    }

    pub fn principal_point(&self) -> PixelCoord {
        self.principal_point
    }

    pub fn image_size(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn circle_radius_px(&self) -> f64 {
        self.circle_radius_px
    }

    /// Radial image distance for an incident angle.
    pub fn radial_distance(&self, theta: f64) -> f64 {
        2.0 * self.focal_length_px * (0.5 * theta).tan()
    }

    pub fn project(&self, p: SpherePoint) -> PixelCoord {
        let gamma = self.radial_distance(p.theta);
        let (s, c) = p.phi.sin_cos();
        PixelCoord::new(
            self.principal_point.u + gamma * c,
            self.principal_point.v + gamma * s,
        )
    }

    /// Inverse of [`project`](Self::project). Pixels farther than the circle
    /// radius plus [`CIRCLE_TOLERANCE_PX`] are rejected; those inside the
    /// tolerance band clamp to the horizon.
    pub fn backproject(&self, px: PixelCoord) -> Result<SpherePoint> {
        let du = px.u - self.principal_point.u;
        let dv = px.v - self.principal_point.v;
        let gamma = du.hypot(dv);
        if !gamma.is_finite() || gamma > self.circle_radius_px + CIRCLE_TOLERANCE_PX {
            return Err(Error::OutOfCircle { u: px.u, v: px.v });
        }
        if gamma == 0.0 {
            return Ok(SpherePoint::from_parts(0.0, 0.0));
        }
        let theta = (2.0 * (gamma / (2.0 * self.focal_length_px)).atan()).min(FRAC_PI_2);
        Ok(SpherePoint::from_parts(theta, dv.atan2(du)))
    }

    pub fn contains(&self, px: PixelCoord) -> bool {
        px.distance(&self.principal_point) <= self.circle_radius_px + CIRCLE_TOLERANCE_PX
    }
}

/// Camera description as stored in JSON configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circle_radius_px: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub principal_point: Option<[f64; 2]>,
}

impl CameraConfig {
    pub fn to_camera(&self) -> Result<StereographicCamera> {
        StereographicCamera::new(
            self.width,
            self.height,
            self.circle_radius_px,
            self.principal_point.map(|[u, v]| PixelCoord::new(u, v)),
        )
    }
}
