//! Per-tile max boosting of a significance map.
//!
//! Each tile of a [`TilingSpec`] contributes one designated entry, the first
//! maximum in row-major order, whose value is multiplied by `alpha`. The
//! remaining entries pass through untouched.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::tiling::{Tile, TilingSpec};

pub const DEFAULT_ALPHA: f64 = 2.0;

/// Scale factors above this value are accepted but logged.
pub const ALPHA_WARN_ABOVE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl SignificanceMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(invalid("significance map must be non-empty"));
        }
        if values.len() != height * width {
            return Err(invalid(format!(
                "{} values do not fill a {height}x{width} map",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid(format!(
                "entry ({}, {}) = {} is not a finite non-negative value",
                pos / width,
                pos % width,
                values[pos]
            )));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleConfig {
    alpha: f64,
}

impl ScaleConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 1.0) {
            return Err(invalid(format!("scale factor must be >= 1, got {alpha}")));
        }
        if alpha > ALPHA_WARN_ABOVE {
            log::warn!("scale factor {alpha} is above {ALPHA_WARN_ABOVE}; large factors unbalance the boosted map");
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for ScaleConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
        }
    }
}

/// Maximum of one tile and where it was found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TileMax {
    pub tile: Tile,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

fn check_dims(map: &SignificanceMap, tiling: &TilingSpec) -> Result<()> {
    if map.height != tiling.feature_height || map.width != tiling.feature_width {
        return Err(invalid(format!(
            "map is {}x{} but the tiling covers {}x{}",
            map.height, map.width, tiling.feature_height, tiling.feature_width
        )));
    }
    Ok(())
}

fn tile_max(map: &SignificanceMap, tile: Tile) -> TileMax {
    let b = tile.bounds;
    let mut best = TileMax {
        tile,
        row: b.row_start,
        col: b.col_start,
        value: map.get(b.row_start, b.col_start),
    };
    for r in b.row_start..b.row_end {
        let line = &map.values[r * map.width..(r + 1) * map.width];
        for (c, &v) in line.iter().enumerate().take(b.col_end).skip(b.col_start) {
            if v > best.value {
                best.row = r;
                best.col = c;
                best.value = v;
            }
        }
    }
    best
}

/// Location and value of each tile's maximum, in [`TilingSpec::tiles`]
/// order. Ties resolve to the first cell in row-major order.
pub fn per_tile_argmax(map: &SignificanceMap, tiling: &TilingSpec) -> Result<Vec<TileMax>> {
    check_dims(map, tiling)?;
    let tiles: Vec<Tile> = tiling.tiles().collect();
    Ok(tiles.into_par_iter().map(|t| tile_max(map, t)).collect())
}

/// Multiplies the designated maximum of every tile by `alpha`.
pub fn pdat_scale(
    map: &SignificanceMap,
    tiling: &TilingSpec,
    cfg: &ScaleConfig,
) -> Result<SignificanceMap> {
    Ok(pdat_scale_with_maxima(map, tiling, cfg)?.0)
}

/// [`pdat_scale`] that also reports the boosted entries (values before
/// scaling).
pub fn pdat_scale_with_maxima(
    map: &SignificanceMap,
    tiling: &TilingSpec,
    cfg: &ScaleConfig,
) -> Result<(SignificanceMap, Vec<TileMax>)> {
    let maxima = per_tile_argmax(map, tiling)?;
    let mut out = map.clone();
    for m in &maxima {
        out.values[m.row * out.width + m.col] *= cfg.alpha;
    }
    Ok((out, maxima))
}
