//! JSON annotation and detection files.
//!
//! ```json
//! {
//!   "images": [{"id": 1, "file": "a.png", "width": 1024, "height": 1024,
//!               "camera_height_m": 3.0, "split": "seen"}],
//!   "annotations": [{"image_id": 1, "rbox": [cx, cy, w, h, angle_deg]},
//!                   {"image_id": 1, "pano_box": [u_min, v_min, u_max, v_max], "score": 0.8}]
//! }
//! ```
//!
//! `rbox` entries are rotated rectangles in fisheye pixels and need a camera
//! to reach the panorama; `pano_box` entries are already panorama
//! rectangles. `position` (`[x_m, y_m]`) optionally carries a surveyed
//! ground-truth location.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boxes::{fisheye_rect_to_pano_box, PanoBox, RotatedRect};
use crate::camera::StereographicCamera;
use crate::equirect::EquirectSpec;
use crate::error::{invalid, Error, Result};
use crate::eval::{Detection, GroundTruth, ImageMeta};
use crate::localization::GroundPosition;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera_height_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoxGeometry {
    Rotated { rbox: [f64; 5] },
    Panorama { pano_box: [f64; 4] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub image_id: u64,
    #[serde(flatten)]
    pub geometry: BoxGeometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 2]>,
    /// Projected trapezoid corners (head-left, head-right, foot-right,
    /// foot-left), written when converting panorama boxes to the fisheye.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad: Option<[[f64; 2]; 4]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// Azimuth of panorama column 0 for `pano_box` entries, degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub azimuth_origin_deg: Option<f64>,
    #[serde(default)]
    pub images: Vec<ImageEntry>,
    pub annotations: Vec<Annotation>,
}

impl Dataset {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn image_meta(&self) -> BTreeMap<u64, ImageMeta> {
        self.images
            .iter()
            .map(|im| {
                (
                    im.id,
                    ImageMeta {
                        camera_height_m: im.camera_height_m,
                        split: im.split.clone(),
                    },
                )
            })
            .collect()
    }

    /// Camera of an image: `fallback` when given, otherwise one built from
    /// the listed image size.
    pub fn camera_for(
        &self,
        image_id: u64,
        fallback: Option<&StereographicCamera>,
    ) -> Result<Option<StereographicCamera>> {
        let entry = self.images.iter().find(|im| im.id == image_id);
        match (entry.and_then(|e| e.width.zip(e.height)), fallback) {
            (_, Some(cam)) => Ok(Some(*cam)),
            (Some((w, h)), None) => Ok(Some(StereographicCamera::new(w, h, None, None)?)),
            (None, None) => Ok(None),
        }
    }

    /// Panorama box of every annotation, in file order.
    pub fn pano_boxes(
        &self,
        spec: &EquirectSpec,
        camera: Option<&StereographicCamera>,
    ) -> Result<Vec<PanoBox>> {
        let mut cache: BTreeMap<u64, Option<StereographicCamera>> = BTreeMap::new();
        let mut out = Vec::with_capacity(self.annotations.len());
        for a in &self.annotations {
            let b = match a.geometry {
                BoxGeometry::Panorama { pano_box: [u0, v0, u1, v1] } => PanoBox::new(u0, v0, u1, v1)?,
                BoxGeometry::Rotated { rbox } => {
                    let cam = match cache.entry(a.image_id) {
                        std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                        std::collections::btree_map::Entry::Vacant(e) => e.insert(self.camera_for(a.image_id, camera)?),
                    };
                    let cam = cam.as_ref().ok_or_else(|| {
                        Error::Configuration(format!(
                            "image {} has a fisheye box but no camera; pass a camera config or list the image size",
                            a.image_id
                        ))
                    })?;
                    fisheye_rect_to_pano_box(&RotatedRect::from_degrees(rbox)?, cam, spec)?
                }
            };
            b.validate(spec)?;
            out.push(b);
        }
        Ok(out)
    }

    pub fn ground_truth(
        &self,
        spec: &EquirectSpec,
        camera: Option<&StereographicCamera>,
    ) -> Result<Vec<GroundTruth>> {
        Ok(self
            .pano_boxes(spec, camera)?
            .into_iter()
            .zip(&self.annotations)
            .map(|(bbox, a)| GroundTruth {
                image_id: a.image_id,
                bbox,
                position: a.position.map(|[x, y]| GroundPosition::new(x, y)),
            })
            .collect())
    }

    pub fn detections(
        &self,
        spec: &EquirectSpec,
        camera: Option<&StereographicCamera>,
    ) -> Result<Vec<Detection>> {
        self.pano_boxes(spec, camera)?
            .into_iter()
            .zip(&self.annotations)
            .map(|(bbox, a)| {
                let score = a
                    .score
                    .ok_or_else(|| invalid(format!("detection on image {} has no score", a.image_id)))?;
                Detection::new(a.image_id, bbox, score)
            })
            .collect()
    }
}
