//! Person box height versus incident angle, ground footprint of angular
//! bins, and the binned box-size distribution of an annotation set.
//!
//! Elevation angles (`phi_head`, `phi_foot`) are measured from the camera's
//! horizontal plane, i.e. `phi = 90° - theta`. In the panorama, the row
//! coordinate of an elevation angle is `lambda * phi` with
//! `lambda = height / (π/2)`.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::boxes::PanoBox;
use crate::equirect::EquirectSpec;
use crate::error::{invalid, Error, Result};

/// Camera height `c`, person height `s` and horizontal distance `d`, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub camera_height_m: f64,
    pub person_height_m: f64,
    pub distance_m: f64,
}

impl SceneConfig {
    pub fn new(camera_height_m: f64, person_height_m: f64, distance_m: f64) -> Result<Self> {
        let scene = Self {
            camera_height_m,
            person_height_m,
            distance_m,
        };
        scene.validate()?;
        Ok(scene)
    }

    /// `c > s >= 0` and `d > 0`. A zero-height person is accepted as a
    /// degenerate limit.
    pub fn validate(&self) -> Result<()> {
        let Self {
            camera_height_m: c,
            person_height_m: s,
            distance_m: d,
        } = *self;
        if !(c.is_finite() && s.is_finite() && d.is_finite()) {
            return Err(invalid("scene values must be finite"));
        }
        if !(c > 0.0 && d > 0.0 && s >= 0.0 && c > s) {
            return Err(invalid(format!(
                "scene requires c > s >= 0 and d > 0, got c={c}, s={s}, d={d}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxAngles {
    pub phi_head: f64,
    pub phi_foot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxHeightResult {
    pub phi_foot: f64,
    pub phi_head: f64,
    pub exact_height: f64,
    pub linearized_height: f64,
}

pub fn box_angles(scene: &SceneConfig) -> Result<BoxAngles> {
    scene.validate()?;
    let c = scene.camera_height_m;
    let d = scene.distance_m;
    Ok(BoxAngles {
        phi_head: ((c - scene.person_height_m) / d).atan(),
        phi_foot: (c / d).atan(),
    })
}

fn check_lambda(lambda_px_per_rad: f64) -> Result<()> {
    if lambda_px_per_rad.is_finite() && lambda_px_per_rad > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("lambda must be positive, got {lambda_px_per_rad}")))
    }
}

/// Box height in panorama pixels, `lambda * (phi_foot - phi_head)`.
pub fn exact_box_height(scene: &SceneConfig, lambda_px_per_rad: f64) -> Result<f64> {
    check_lambda(lambda_px_per_rad)?;
    let a = box_angles(scene)?;
    Ok(lambda_px_per_rad * (a.phi_foot - a.phi_head))
}

/// Small-angle approximation `s / (c - s) * lambda * phi_head`.
pub fn linearized_box_height(scene: &SceneConfig, lambda_px_per_rad: f64) -> Result<f64> {
    if scene.camera_height_m == scene.person_height_m {
        return Err(Error::DegenerateScene(
            "person height equals camera height".into(),
        ));
    }
    check_lambda(lambda_px_per_rad)?;
    let a = box_angles(scene)?;
    let c = scene.camera_height_m;
    let s = scene.person_height_m;
    Ok(s / (c - s) * lambda_px_per_rad * a.phi_head)
}

pub fn box_height(scene: &SceneConfig, lambda_px_per_rad: f64) -> Result<BoxHeightResult> {
    let a = box_angles(scene)?;
    Ok(BoxHeightResult {
        phi_foot: a.phi_foot,
        phi_head: a.phi_head,
        exact_height: exact_box_height(scene, lambda_px_per_rad)?,
        linearized_height: linearized_box_height(scene, lambda_px_per_rad)?,
    })
}

/// Ground distance covered by the incident-angle bin
/// `[theta - delta/2, theta + delta/2]` for a camera at height `c`.
pub fn ground_interval_width(camera_height_m: f64, theta: f64, delta_theta: f64) -> Result<f64> {
    if !(camera_height_m.is_finite() && camera_height_m > 0.0) {
        return Err(invalid("camera height must be positive"));
    }
    if !(delta_theta.is_finite() && delta_theta >= 0.0) {
        return Err(invalid("angular bin size must be non-negative"));
    }
    let lo = theta - 0.5 * delta_theta;
    let hi = theta + 0.5 * delta_theta;
    if !(lo > 0.0 && hi < FRAC_PI_2) {
        return Err(invalid(format!(
            "bin [{lo}, {hi}] must lie strictly inside (0, pi/2)"
        )));
    }
    Ok(camera_height_m * (hi.tan() - lo.tan()))
}

/// Panorama box of a standing person seen at world azimuth `azimuth`, with
/// the given box width in pixels.
pub fn render_person_box(
    scene: &SceneConfig,
    spec: &EquirectSpec,
    azimuth: f64,
    width_px: f64,
) -> Result<PanoBox> {
    let a = box_angles(scene)?;
    let lambda = spec.lambda_px_per_rad();
    let w = f64::from(spec.width());
    let center = spec.azimuth_to_column(azimuth);
    PanoBox::from_span(
        center - 0.5 * width_px,
        width_px,
        lambda * a.phi_head,
        lambda * a.phi_foot,
        w,
    )
}

/// Running mean and variance (Welford), mergeable across partitions.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }

    /// Sample standard deviation, defined from two observations on.
    pub fn std(&self) -> Option<f64> {
        (self.count >= 2).then(|| (self.m2 / (self.count - 1) as f64).max(0.0).sqrt())
    }
}

pub const DISTRIBUTION_BINS: usize = 90;

/// Box statistics over 1° incident-angle bins `[k°, k+1°)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionStats {
    pub heights: Vec<RunningStats>,
    pub widths: Vec<RunningStats>,
}

/// One CSV row of [`DistributionStats`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionRow {
    pub theta_deg: u32,
    pub count: u64,
    pub mean_h: Option<f64>,
    pub std_h: Option<f64>,
    pub mean_w: Option<f64>,
    pub std_w: Option<f64>,
}

impl Default for DistributionStats {
    fn default() -> Self {
        Self {
            heights: vec![RunningStats::default(); DISTRIBUTION_BINS],
            widths: vec![RunningStats::default(); DISTRIBUTION_BINS],
        }
    }
}

impl DistributionStats {
    pub fn count(&self, bin: usize) -> u64 {
        self.heights[bin].count()
    }

    pub fn total(&self) -> u64 {
        self.heights.iter().map(RunningStats::count).sum()
    }

    pub fn merge(&mut self, other: &DistributionStats) {
        for (a, b) in self.heights.iter_mut().zip(&other.heights) {
            a.merge(b);
        }
        for (a, b) in self.widths.iter_mut().zip(&other.widths) {
            a.merge(b);
        }
    }

    pub fn rows(&self) -> Vec<DistributionRow> {
        (0..DISTRIBUTION_BINS)
            .map(|k| DistributionRow {
                theta_deg: k as u32,
                count: self.heights[k].count(),
                mean_h: self.heights[k].mean(),
                std_h: self.heights[k].std(),
                mean_w: self.widths[k].mean(),
                std_w: self.widths[k].std(),
            })
            .collect()
    }
}

/// Incident-angle bin of a panorama row coordinate.
pub fn theta_bin(spec: &EquirectSpec, v: f64) -> usize {
    let h = f64::from(spec.height());
    let theta_deg = 90.0 * (1.0 - v / h);
    (theta_deg.floor().max(0.0) as usize).min(DISTRIBUTION_BINS - 1)
}

/// Bins boxes by the incident angle of their center row and accumulates
/// height and width in panorama pixels.
pub fn annotation_distribution(boxes: &[PanoBox], spec: &EquirectSpec) -> Result<DistributionStats> {
    let mut stats = DistributionStats::default();
    let w = f64::from(spec.width());
    for b in boxes {
        b.validate(spec)?;
        let k = theta_bin(spec, b.center_v());
        stats.heights[k].push(b.height());
        stats.widths[k].push(b.width(w));
    }
    Ok(stats)
}
