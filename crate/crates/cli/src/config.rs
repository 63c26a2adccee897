use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

use fishpano::camera::CameraConfig;
use fishpano::equirect::{EquirectSpec, DEFAULT_PANORAMA_WIDTH};
use fishpano::StereographicCamera;

use crate::PanoArgs;

/// Bad flag or config value; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Values accepted by `--config`. Relative paths resolve against the config
/// file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    pub camera: Option<PathBuf>,
    pub width: Option<u32>,
    pub azimuth_origin_deg: Option<f64>,
    pub regions: Option<usize>,
    pub division_factor: Option<u32>,
    pub alpha: Option<f64>,
    pub camera_height_m: Option<f64>,
    pub confidence_threshold: Option<f64>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl ToolConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: ToolConfig = serde_json::from_str(&text)
            .map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.camera, &mut cfg.input, &mut cfg.output].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn input(&self, flag: &Option<PathBuf>) -> anyhow::Result<PathBuf> {
        flag.clone()
            .or_else(|| self.input.clone())
            .ok_or_else(|| usage("missing input path"))
    }

    pub fn output(&self, flag: &Option<PathBuf>) -> anyhow::Result<PathBuf> {
        flag.clone()
            .or_else(|| self.output.clone())
            .ok_or_else(|| usage("missing output path"))
    }

    pub fn camera_config(&self, pano: &PanoArgs) -> anyhow::Result<Option<CameraConfig>> {
        let Some(path) = pano.camera.as_ref().or(self.camera.as_ref()) else {
            return Ok(None);
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading camera {}", path.display()))?;
        let cfg: CameraConfig = serde_json::from_str(&text)
            .map_err(|e| usage(format!("camera {}: {e}", path.display())))?;
        Ok(Some(cfg))
    }

    pub fn camera(&self, pano: &PanoArgs) -> anyhow::Result<Option<StereographicCamera>> {
        match self.camera_config(pano)? {
            Some(c) => Ok(Some(c.to_camera().map_err(|e| usage(e.to_string()))?)),
            None => Ok(None),
        }
    }

    /// Panorama spec from flags, then config, then `fallback_origin_deg`.
    pub fn spec(&self, pano: &PanoArgs, fallback_origin_deg: Option<f64>) -> anyhow::Result<EquirectSpec> {
        let width = pano.width.or(self.width).unwrap_or(DEFAULT_PANORAMA_WIDTH);
        let origin = pano
            .azimuth_origin
            .or(self.azimuth_origin_deg)
            .or(fallback_origin_deg)
            .unwrap_or(0.0);
        let spec = EquirectSpec::from_width(width).map_err(|e| usage(e.to_string()))?;
        if !origin.is_finite() {
            return Err(usage("azimuth origin must be finite"));
        }
        Ok(spec.with_azimuth_origin(origin.to_radians()))
    }

    /// Whether the origin was set explicitly by a flag or the config.
    pub fn explicit_origin(&self, pano: &PanoArgs) -> bool {
        pano.azimuth_origin.or(self.azimuth_origin_deg).is_some()
    }
}
