//! Geometry toolkit for person detection in overhead fisheye images.
//!
//! The pipeline runs fisheye image → equirectangular panorama
//! ([`remap`]), builds the distortion-aware tiling of a feature map
//! ([`tiling`]) and boosts per-tile significance maxima ([`significance`]).
//! Detected panorama boxes are carried back to the fisheye frame
//! ([`boxes`]), placed on the ground plane ([`localization`]) and scored
//! ([`eval`]). [`analysis`] holds the closed-form box-size model behind the
//! tile sizes.

pub mod analysis;
pub mod boxes;
pub mod camera;
pub mod dataset;
pub mod equirect;
pub mod error;
pub mod eval;
pub mod image_io;
pub mod localization;
pub mod remap;
pub mod significance;
pub mod tiling;

pub use boxes::{FisheyeQuad, PanoBox, RotatedRect};
pub use camera::{CameraConfig, PixelCoord, SpherePoint, StereographicCamera};
pub use equirect::{EquirectSpec, DEFAULT_PANORAMA_WIDTH};
pub use error::{Error, Result};
pub use localization::{DistanceBin, GroundPosition};
pub use remap::{Image, RemapTable};
pub use significance::{ScaleConfig, SignificanceMap};
pub use tiling::{Tile, TilingSpec};
