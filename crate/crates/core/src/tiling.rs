//! Self-similar square tiling of a panoramic feature map.
//!
//! The bottom three quarters of the map form the last region, tiled with
//! three rows of squares of side `H/4`. The top quarter is split into
//! horizontal strips whose tile sides halve from one strip to the next going
//! up. Every strip holds one row of tiles, except the topmost one which holds
//! two rows of its (smallest) side so that the strips fill the quarter
//! exactly: `2 a_1 + a_2 + ... + a_{K-1} = a_K = H/4`.
//!
//! When a side is fractional, strip boundaries are rounded to the nearest
//! row; the topmost tile row of region 1 absorbs what is left.

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{invalid, Error, Result};

pub const DEFAULT_NUM_REGIONS: usize = 5;
pub const DEFAULT_DIVISION_FACTOR: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct TileBounds {
    pub row_start: usize,
    pub row_end: usize,
    pub col_start: usize,
    pub col_end: usize,
}

impl TileBounds {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row_start..self.row_end).contains(&row) && (self.col_start..self.col_end).contains(&col)
    }

    pub fn area(&self) -> usize {
        (self.row_end - self.row_start) * (self.col_end - self.col_start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Tile {
    /// 1-based region index, top to bottom.
    pub region_index: usize,
    pub row_index: usize,
    pub col_index: usize,
    pub bounds: TileBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionSpec {
    /// 1-based, top to bottom.
    pub index: usize,
    pub row_start: usize,
    pub row_end: usize,
    /// Tile side after rounding; also the horizontal stride.
    pub tile_side: usize,
    pub rows_of_tiles: usize,
    /// Tile side before rounding.
    pub nominal_side: f64,
    /// Row span of each tile row, top to bottom.
    pub tile_rows: Vec<(usize, usize)>,
}

impl RegionSpec {
    pub fn height(&self) -> usize {
        self.row_end - self.row_start
    }

    pub fn tiles_per_row(&self, feature_width: usize) -> usize {
        feature_width.div_ceil(self.tile_side)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TilingSpec {
    pub feature_height: usize,
    pub feature_width: usize,
    pub num_regions: usize,
    pub division_factor: u32,
    pub regions: Vec<RegionSpec>,
}

pub fn build_tiling(
    feature_height: usize,
    feature_width: usize,
    num_regions: usize,
    division_factor: u32,
) -> Result<TilingSpec> {
    if feature_height == 0 || feature_width == 0 {
        return Err(invalid("feature map must be non-empty"));
    }
    if !feature_height.is_multiple_of(4) {
        return Err(invalid(format!(
            "feature height {feature_height} is not divisible by 4"
        )));
    }
    if division_factor != 2 {
        return Err(Error::UnsupportedConfiguration(format!(
            "division factor {division_factor}; only 2 is supported"
        )));
    }
    if num_regions < 2 {
        return Err(Error::UnsupportedConfiguration(format!(
            "{num_regions} regions; at least 2 are required"
        )));
    }
    let quarter = feature_height / 4;
    // smallest nominal side a_K / 2^(K-1) must cover at least one row
    let halvings = (num_regions - 1) as u32;
    if halvings >= usize::BITS || quarter < (1usize << halvings) {
        return Err(Error::UnsupportedConfiguration(format!(
            "{num_regions} regions need a feature height of at least {}",
            4u128 << halvings.min(120)
        )));
    }

    let nominal = |k: usize| quarter as f64 / f64::powi(2.0, (num_regions - k) as i32);
    let mut regions = Vec::with_capacity(num_regions);

    // real-valued strip boundaries of the top quarter, rounded per strip
    let mut real_end = 2.0 * nominal(1);
    let mut end = (real_end.round() as usize).min(quarter);
    let side_1 = (nominal(1).round() as usize).clamp(1, end.saturating_sub(1).max(1));
    let mut tile_rows = Vec::with_capacity(2);
    if end > side_1 {
        tile_rows.push((0, end - side_1));
    }
    tile_rows.push((end - side_1, end));
    regions.push(RegionSpec {
        index: 1,
        row_start: 0,
        row_end: end,
        tile_side: side_1,
        rows_of_tiles: tile_rows.len(),
        nominal_side: nominal(1),
        tile_rows,
    });
    for k in 2..num_regions {
        let start = end;
        real_end += nominal(k);
        end = if k == num_regions - 1 {
            quarter
        } else {
            real_end.round() as usize
        };
        regions.push(RegionSpec {
            index: k,
            row_start: start,
            row_end: end,
            tile_side: end - start,
            rows_of_tiles: 1,
            nominal_side: nominal(k),
            tile_rows: vec![(start, end)],
        });
    }
    regions.push(RegionSpec {
        index: num_regions,
        row_start: quarter,
        row_end: feature_height,
        tile_side: quarter,
        rows_of_tiles: 3,
        nominal_side: quarter as f64,
        tile_rows: (0..3)
            .map(|i| (quarter * (i + 1), quarter * (i + 2)))
            .collect(),
    });

    Ok(TilingSpec {
        feature_height,
        feature_width,
        num_regions,
        division_factor,
        regions,
    })
}

impl TilingSpec {
    /// Tile sides per region after rounding, top to bottom.
    pub fn tile_sides(&self) -> Vec<usize> {
        self.regions.iter().map(|r| r.tile_side).collect()
    }

    pub fn region_heights(&self) -> Vec<usize> {
        self.regions.iter().map(RegionSpec::height).collect()
    }

    pub fn num_tiles(&self) -> usize {
        self.regions
            .iter()
            .map(|r| r.rows_of_tiles * r.tiles_per_row(self.feature_width))
            .sum()
    }

    /// All tiles, region by region, row-major inside each region.
    pub fn tiles(&self) -> impl Iterator<Item = Tile> + '_ {
        let width = self.feature_width;
        self.regions.iter().flat_map(move |region| {
            region
                .tile_rows
                .iter()
                .enumerate()
                .flat_map(move |(row_index, &(r0, r1))| {
                    (0..region.tiles_per_row(width)).map(move |col_index| {
                        let c0 = col_index * region.tile_side;
                        Tile {
                            region_index: region.index,
                            row_index,
                            col_index,
                            bounds: TileBounds {
                                row_start: r0,
                                row_end: r1,
                                col_start: c0,
                                col_end: (c0 + region.tile_side).min(width),
                            },
                        }
                    })
                })
        })
    }

    /// The tile containing feature cell `(row, col)`.
    pub fn tile_of(&self, row: usize, col: usize) -> Result<Tile> {
        if row >= self.feature_height || col >= self.feature_width {
            return Err(invalid(format!(
                "cell ({row}, {col}) outside the {}x{} feature map",
                self.feature_height, self.feature_width
            )));
        }
        let ri = self.regions.partition_point(|r| r.row_end <= row);
        let region = &self.regions[ri];
        let row_index = region.tile_rows.partition_point(|&(_, end)| end <= row);
        let (r0, r1) = region.tile_rows[row_index];
        let col_index = col / region.tile_side;
        let c0 = col_index * region.tile_side;
        Ok(Tile {
            region_index: region.index,
            row_index,
            col_index,
            bounds: TileBounds {
                row_start: r0,
                row_end: r1,
                col_start: c0,
                col_end: (c0 + region.tile_side).min(self.feature_width),
            },
        })
    }
}

/// Slope `(M - 1) / (M + 1)` of the line through the centers of adjacent
/// tiles whose sides differ by the division factor `M`.
pub fn w_coefficient(division_factor: u64) -> Result<Ratio<u64>> {
    if division_factor < 2 {
        return Err(invalid(format!(
            "division factor must be at least 2, got {division_factor}"
        )));
    }
    Ok(Ratio::new(division_factor - 1, division_factor + 1))
}
