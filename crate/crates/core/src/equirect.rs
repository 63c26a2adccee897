//! Equirectangular panorama geometry for the lower hemisphere.
//!
//! Columns span azimuth `[0, 2π)` starting at `azimuth_origin`; rows span the
//! incident angle from 90° at the top edge (`v = 0`) down to 0° at the bottom
//! edge (`v = height`). Coordinates are continuous like fisheye pixels, so the
//! center of row `j` sits at `v = j + 0.5`.

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};

use crate::camera::{normalize_azimuth, PixelCoord, SpherePoint};
use crate::error::{invalid, Result};

/// Panorama width used for 1024x1024 fisheye inputs, close to the image
/// circle circumference `π · 1024 ≈ 3217`.
pub const DEFAULT_PANORAMA_WIDTH: u32 = 3072;

/// Panorama widths evaluated for 1024x1024 inputs.
pub const STANDARD_PANORAMA_WIDTHS: [u32; 3] = [2048, 2560, 3072];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquirectSpec {
    width: u32,
    height: u32,
    azimuth_origin: f64,
}

impl EquirectSpec {
    /// A hemispherical panorama must be four times wider than tall.
    pub fn new(width: u32, height: u32, azimuth_origin: f64) -> Result<Self> {
        if height == 0 || width != 4 * height {
            return Err(invalid(format!(
                "panorama must satisfy width = 4 * height, got {width}x{height}"
            )));
        }
        if !azimuth_origin.is_finite() {
            return Err(invalid("azimuth origin must be finite"));
        }
        Ok(Self {
            width,
            height,
            azimuth_origin: normalize_azimuth(azimuth_origin),
        })
    }

    /// Panorama of the given width with its height derived as `width / 4`.
    pub fn from_width(width: u32) -> Result<Self> {
        if width == 0 || !width.is_multiple_of(4) {
            return Err(invalid(format!("panorama width {width} is not a positive multiple of 4")));
        }
        Self::new(width, width / 4, 0.0)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn azimuth_origin(&self) -> f64 {
        self.azimuth_origin
    }

    /// Pixels per radian along both axes.
    pub fn lambda_px_per_rad(&self) -> f64 {
        f64::from(self.height) / FRAC_PI_2
    }

    /// Continuous coordinate of the center of pixel `(col, row)`.
    pub fn pixel_center(col: u32, row: u32) -> PixelCoord {
        PixelCoord::new(f64::from(col) + 0.5, f64::from(row) + 0.5)
    }

    /// Azimuth origin expressed in columns. Snapped to the nearest integer
    /// when it is one up to rounding, so that column-aligned origin shifts
    /// reproduce an exact circular shift.
    fn origin_columns(&self) -> f64 {
        let cols = self.azimuth_origin / TAU * f64::from(self.width);
        let snapped = cols.round();
        if (cols - snapped).abs() < 1e-9 {
            snapped
        } else {
            cols
        }
    }

    /// Viewing direction of a continuous panorama coordinate with
    /// `0 <= u <= width`, `0 <= v <= height`.
    pub fn pano_to_sphere(&self, px: PixelCoord) -> Result<SpherePoint> {
        let (w, h) = (f64::from(self.width), f64::from(self.height));
        if !(px.u.is_finite() && px.v.is_finite())
            || !(0.0..=w).contains(&px.u)
            || !(0.0..=h).contains(&px.v)
        {
            return Err(invalid(format!(
                "panorama coordinate ({}, {}) outside {}x{}",
                px.u, px.v, self.width, self.height
            )));
        }
        Ok(self.sphere_at(px.u, px.v))
    }

    /// Same mapping as [`pano_to_sphere`](Self::pano_to_sphere) with `u` taken
    /// modulo the width and `v` clamped to the panorama.
    pub(crate) fn sphere_at(&self, u: f64, v: f64) -> SpherePoint {
        let w = f64::from(self.width);
        let h = f64::from(self.height);
        let theta = FRAC_PI_2 * (1.0 - v.clamp(0.0, h) / h);
        let col = (u + self.origin_columns()).rem_euclid(w);
        SpherePoint::from_parts(theta, TAU * col / w)
    }

    /// Inverse mapping; `u` lands in `[0, width)`.
    pub fn sphere_to_pano(&self, p: SpherePoint) -> PixelCoord {
        let w = f64::from(self.width);
        let h = f64::from(self.height);
        let v = h * (1.0 - p.theta() / FRAC_PI_2);
        let mut u = (p.phi() / TAU * w - self.origin_columns()).rem_euclid(w);
        if u >= w {
            u = 0.0;
        }
        PixelCoord::new(u, v)
    }

    /// Column of a world azimuth, in `[0, width)`.
    pub fn azimuth_to_column(&self, phi: f64) -> f64 {
        let w = f64::from(self.width);
        let u = (normalize_azimuth(phi) / TAU * w - self.origin_columns()).rem_euclid(w);
        if u >= w {
            0.0
        } else {
            u
        }
    }

    /// Same panorama with the world azimuth at column 0 moved by `delta`.
    /// Remapping under the result equals the original panorama circularly
    /// shifted left by `delta / 2π · width` columns.
    pub fn shift_azimuth_origin(&self, delta: f64) -> Self {
        self.with_azimuth_origin(self.azimuth_origin + delta)
    }

    pub fn with_azimuth_origin(&self, azimuth_origin: f64) -> Self {
        Self {
            azimuth_origin: normalize_azimuth(azimuth_origin),
            ..*self
        }
    }
}
