use std::collections::BTreeMap;

use anyhow::Context;
use serde::Serialize;

use fishpano::analysis::annotation_distribution;
use fishpano::boxes::{choose_seam_azimuth, pano_box_to_fisheye_quad, quad_to_rotated_rect};
use fishpano::camera::CameraConfig;
use fishpano::dataset::{BoxGeometry, Dataset};
use fishpano::eval::{evaluate, EvalConfig, EvalReport};
use fishpano::image_io::read_image;
use fishpano::localization::{distance_bin, locate_from_box};
use fishpano::remap::{build_remap_table, normalize_input, remap_image, NormalizedFrame};
use fishpano::significance::{pdat_scale_with_maxima, ScaleConfig, DEFAULT_ALPHA};
use fishpano::tiling::{build_tiling, w_coefficient, TilingSpec, DEFAULT_DIVISION_FACTOR, DEFAULT_NUM_REGIONS};
use fishpano::{Error, Image, RotatedRect, StereographicCamera};

use crate::config::{usage, ToolConfig};
use crate::io::{read_map, sibling, write_csv, write_image, write_json, write_map};
use crate::{AnalyzeArgs, Direction, EvalArgs, LocalizeArgs, PdatScaleArgs, ProjectArgs, RemapArgs, TileVizArgs};

pub fn remap(a: &RemapArgs, cfg: &ToolConfig) -> anyhow::Result<()> {
    let input = cfg.input(&a.input)?;
    let output = cfg.output(&a.output)?;
    let spec = cfg.spec(&a.pano, None)?;
    let img = read_image(&input).with_context(|| format!("reading {}", input.display()))?;
    let mut cam_cfg = cfg.camera_config(&a.pano)?.unwrap_or(CameraConfig {
        width: img.width(),
        height: img.height(),
        circle_radius_px: None,
        principal_point: None,
    });
    if (cam_cfg.width, cam_cfg.height) != (img.width(), img.height()) {
        return Err(usage(format!(
            "camera is calibrated for {}x{} but {} is {}x{}",
            cam_cfg.width,
            cam_cfg.height,
            input.display(),
            img.width(),
            img.height()
        )));
    }
    if a.circle_radius.is_some() {
        cam_cfg.circle_radius_px = a.circle_radius;
    }
    let frame = NormalizedFrame::new(img.width(), img.height(), cam_cfg.circle_radius_px);
    let cam = frame.camera(&cam_cfg).map_err(|e| usage(e.to_string()))?;
    let square = normalize_input(&img, cam_cfg.circle_radius_px);
    let table = build_remap_table(&cam, &spec);
    let pano = remap_image(&square, &table)?;
    log::info!(
        "{}x{} fisheye -> {}x{} panorama, {} samples outside the image",
        img.width(),
        img.height(),
        pano.width(),
        pano.height(),
        table.sentinel_count()
    );
    write_image(&output, &pano)
}

#[derive(Serialize)]
struct TilingDump<'a> {
    #[serde(flatten)]
    tiling: &'a TilingSpec,
    tile_sides: Vec<usize>,
    num_tiles: usize,
    w_coefficient: String,
}

fn tiling_from(hf: usize, wf: usize, k: Option<usize>, m: Option<u32>, cfg: &ToolConfig) -> anyhow::Result<TilingSpec> {
    let k = k.or(cfg.regions).unwrap_or(DEFAULT_NUM_REGIONS);
    let m = m.or(cfg.division_factor).unwrap_or(DEFAULT_DIVISION_FACTOR);
    build_tiling(hf, wf, k, m).map_err(|e| usage(e.to_string()))
}

const REGION_COLORS: [[u8; 3]; 6] = [
    [230, 97, 1],
    [253, 184, 99],
    [178, 171, 210],
    [94, 60, 153],
    [27, 158, 119],
    [102, 166, 30],
];

/// Region colors blended over `background`, with white tile borders.
fn draw_tiling(tiling: &TilingSpec, background: Option<&Image>, scale: u32) -> anyhow::Result<Image> {
    let (w, h) = match background {
        Some(bg) => (bg.width(), bg.height()),
        None => (tiling.feature_width as u32 * scale, tiling.feature_height as u32 * scale),
    };
    let mut img = Image::zeros(w, h, 3)?;
    let to_x = |c: usize| (c as u64 * u64::from(w) / tiling.feature_width as u64) as u32;
    let to_y = |r: usize| (r as u64 * u64::from(h) / tiling.feature_height as u64) as u32;
    for y in 0..h {
        let row = (u64::from(y) * tiling.feature_height as u64 / u64::from(h)) as usize;
        for x in 0..w {
            let col = (u64::from(x) * tiling.feature_width as u64 / u64::from(w)) as usize;
            let tile = tiling.tile_of(row, col)?;
            let color = REGION_COLORS[(tile.region_index - 1) % REGION_COLORS.len()];
            // checkerboard shading separates neighbouring tiles of a region
            let shade = if (tile.row_index + tile.col_index) % 2 == 0 { 1.0 } else { 0.75 };
            let base: [u8; 3] = match background {
                Some(bg) => {
                    let p = bg.pixel(x, y);
                    if p.len() == 1 {
                        [p[0]; 3]
                    } else {
                        [p[0], p[1], p[2]]
                    }
                }
                None => [0, 0, 0],
            };
            let alpha = if background.is_some() { 0.35 } else { 1.0 };
            let px = img.pixel_mut(x, y);
            for ch in 0..3 {
                let c = f64::from(color[ch]) * shade;
                px[ch] = (alpha * c + (1.0 - alpha) * f64::from(base[ch])).round() as u8;
            }
        }
    }
    for t in tiling.tiles() {
        let b = t.bounds;
        let (x0, x1) = (to_x(b.col_start), to_x(b.col_end).saturating_sub(1));
        let (y0, y1) = (to_y(b.row_start), to_y(b.row_end).saturating_sub(1));
        for x in x0..=x1.min(w - 1) {
            img.pixel_mut(x, y0).copy_from_slice(&[255; 3]);
        }
        for y in y0..=y1.min(h - 1) {
            img.pixel_mut(x0, y).copy_from_slice(&[255; 3]);
        }
    }
    Ok(img)
}

pub fn tile_viz(a: &TileVizArgs, cfg: &ToolConfig) -> anyhow::Result<()> {
    if a.scale == 0 {
        return Err(usage("--scale must be positive"));
    }
    let tiling = tiling_from(a.hf, a.wf, a.k, a.m, cfg)?;
    let background = a
        .background
        .as_ref()
        .map(|p| read_image(p).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    let overlay = draw_tiling(&tiling, background.as_ref(), a.scale)?;
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    write_image(&a.out_dir.join("tiles.png"), &overlay)?;
    let dump = TilingDump {
        tiling: &tiling,
        tile_sides: tiling.tile_sides(),
        num_tiles: tiling.num_tiles(),
        w_coefficient: w_coefficient(u64::from(tiling.division_factor))?.to_string(),
    };
    write_json(&a.out_dir.join("tiles.json"), &dump)
}

#[derive(Serialize)]
struct BoostedEntry {
    region: usize,
    tile_row: usize,
    tile_col: usize,
    row: usize,
    col: usize,
    value: f64,
    boosted: f64,
}

pub fn pdat_scale(a: &PdatScaleArgs, cfg: &ToolConfig) -> anyhow::Result<()> {
    let input = cfg.input(&a.input)?;
    let output = cfg.output(&a.output)?;
    let alpha = a.alpha.or(cfg.alpha).unwrap_or(DEFAULT_ALPHA);
    let scale = ScaleConfig::new(alpha).map_err(|e| usage(e.to_string()))?;
    let map = read_map(&input)?;
    let tiling = tiling_from(map.height(), map.width(), a.k, a.m, cfg)?;
    let (scaled, maxima) = pdat_scale_with_maxima(&map, &tiling, &scale)?;
    let boosted: Vec<BoostedEntry> = maxima
        .iter()
        .map(|m| BoostedEntry {
            region: m.tile.region_index,
            tile_row: m.tile.row_index,
            tile_col: m.tile.col_index,
            row: m.row,
            col: m.col,
            value: m.value,
            boosted: scaled.get(m.row, m.col),
        })
        .collect();
    write_map(&output, &scaled)?;
    let boosted_path = a.boosted.clone().unwrap_or_else(|| sibling(&output, ".boosted.json"));
    write_json(&boosted_path, &boosted)
}

/// Camera shared by every image that carries `rbox` annotations.
fn single_camera(ds: &Dataset, fallback: Option<&StereographicCamera>) -> anyhow::Result<Option<StereographicCamera>> {
    let mut cam: Option<StereographicCamera> = None;
    for ann in &ds.annotations {
        if !matches!(ann.geometry, BoxGeometry::Rotated { .. }) {
            continue;
        }
        let Some(c) = ds.camera_for(ann.image_id, fallback)? else {
            return Err(Error::Configuration(format!("image {} has no camera", ann.image_id)).into());
        };
        match cam {
            Some(prev) if prev != c => {
                return Err(usage("--auto-seam needs every image to share one camera"));
            }
            _ => cam = Some(c),
        }
    }
    Ok(cam)
}

pub fn project_boxes(a: &ProjectArgs, cfg: &ToolConfig) -> anyhow::Result<()> {
    let input = cfg.input(&a.input)?;
    let output = cfg.output(&a.output)?;
    let ds = Dataset::load(&input).with_context(|| format!("reading {}", input.display()))?;
    let camera = cfg.camera(&a.pano)?;
    let mut out = ds.clone();
    match a.direction {
        Direction::ToPano => {
            let mut spec = cfg.spec(&a.pano, None)?;
            if a.auto_seam {
                if cfg.explicit_origin(&a.pano) {
                    return Err(usage("--auto-seam and an explicit azimuth origin are exclusive"));
                }
                if let Some(cam) = single_camera(&ds, camera.as_ref())? {
                    let rects = ds
                        .annotations
                        .iter()
                        .filter_map(|ann| match ann.geometry {
                            BoxGeometry::Rotated { rbox } => Some(RotatedRect::from_degrees(rbox)),
                            BoxGeometry::Panorama { .. } => None,
                        })
                        .collect::<fishpano::Result<Vec<_>>>()?;
                    spec = spec.with_azimuth_origin(choose_seam_azimuth(&rects, &cam)?);
                }
            }
            if ds.annotations.iter().any(|ann| matches!(ann.geometry, BoxGeometry::Panorama { .. }))
                && ds.azimuth_origin_deg.is_some_and(|o| (o.to_radians() - spec.azimuth_origin()).abs() > 1e-9)
            {
                return Err(usage("input already holds panorama boxes for a different azimuth origin"));
            }
            let boxes = ds.pano_boxes(&spec, camera.as_ref())?;
            for (ann, b) in out.annotations.iter_mut().zip(boxes) {
                ann.geometry = BoxGeometry::Panorama {
                    pano_box: [b.u_min, b.v_min, b.u_max, b.v_max],
                };
                ann.quad = None;
            }
            out.azimuth_origin_deg = Some(spec.azimuth_origin().to_degrees());
            let wrapped = out
                .annotations
                .iter()
                .filter(|ann| matches!(ann.geometry, BoxGeometry::Panorama { pano_box } if pano_box[0] > pano_box[2]))
                .count();
            if wrapped > 0 {
                log::warn!("{wrapped} boxes cross the panorama seam");
            }
        }
        Direction::ToFisheye => {
            if a.auto_seam {
                return Err(usage("--auto-seam only applies to --direction to-pano"));
            }
            let spec = cfg.spec(&a.pano, ds.azimuth_origin_deg)?;
            for ann in &mut out.annotations {
                let BoxGeometry::Panorama { pano_box: [u0, v0, u1, v1] } = ann.geometry else {
                    continue;
                };
                let cam = ds.camera_for(ann.image_id, camera.as_ref())?.ok_or_else(|| {
                    Error::Configuration(format!("image {} has no camera; pass --camera or list the image size", ann.image_id))
                })?;
                let b = fishpano::PanoBox::new(u0, v0, u1, v1)?;
                b.validate(&spec)?;
                let q = pano_box_to_fisheye_quad(&b, &cam, &spec);
                let r = quad_to_rotated_rect(&q)?;
                ann.geometry = BoxGeometry::Rotated { rbox: r.to_degrees() };
                ann.quad = Some(q.corners().map(|p| [p.u, p.v]));
            }
            out.azimuth_origin_deg = None;
        }
    }
    write_json(&output, &out)
}

pub fn analyze_dist(a: &AnalyzeArgs, cfg: &ToolConfig) -> anyhow::Result<()> {
    let input = cfg.input(&a.input)?;
    let ds = Dataset::load(&input).with_context(|| format!("reading {}", input.display()))?;
    let spec = cfg.spec(&a.pano, ds.azimuth_origin_deg)?;
    let boxes = ds.pano_boxes(&spec, cfg.camera(&a.pano)?.as_ref())?;
    let stats = annotation_distribution(&boxes, &spec)?;
    write_csv(&a.output, stats.rows())
}

#[derive(Serialize)]
struct PositionRow {
    image_id: u64,
    det_id: usize,
    x_m: f64,
    y_m: f64,
    d_m: f64,
    bin: &'static str,
}

pub fn localize(a: &LocalizeArgs, cfg: &ToolConfig) -> anyhow::Result<()> {
    let input = cfg.input(&a.input)?;
    let ds = Dataset::load(&input).with_context(|| format!("reading {}", input.display()))?;
    let spec = cfg.spec(&a.pano, ds.azimuth_origin_deg)?;
    let boxes = ds.pano_boxes(&spec, cfg.camera(&a.pano)?.as_ref())?;
    let meta = ds.image_meta();
    let fallback = a.camera_height.or(cfg.camera_height_m);
    let mut per_image: BTreeMap<u64, usize> = BTreeMap::new();
    let mut rows = Vec::with_capacity(boxes.len());
    for (ann, b) in ds.annotations.iter().zip(&boxes) {
        let det_id = {
            let n = per_image.entry(ann.image_id).or_default();
            *n += 1;
            *n - 1
        };
        let c = meta
            .get(&ann.image_id)
            .and_then(|m| m.camera_height_m)
            .or(fallback)
            .ok_or_else(|| {
                Error::Configuration(format!(
                    "image {} has no camera height; pass --camera-height",
                    ann.image_id
                ))
            })?;
        match locate_from_box(b, &spec, c) {
            Ok(p) => rows.push(PositionRow {
                image_id: ann.image_id,
                det_id,
                x_m: p.x_m,
                y_m: p.y_m,
                d_m: p.distance_m,
                bin: distance_bin(p.distance_m)?.as_str(),
            }),
            Err(Error::Horizon { theta_deg }) => {
                log::warn!(
                    "image {} detection {det_id}: foot ray at {theta_deg:.3} deg misses the ground; skipped",
                    ann.image_id
                );
            }
            Err(e) => return Err(e.into()),
        }
    }
    write_csv(&a.output, rows)
}

fn report_rows(r: &EvalReport) -> Vec<(String, Option<f64>)> {
    let mut rows = vec![
        ("mAP".to_string(), Some(r.map)),
        ("AP50".to_string(), Some(r.ap50)),
        ("AP75".to_string(), Some(r.ap75)),
    ];
    for (bin, v) in &r.ap_by_distance {
        rows.push((format!("AP_{bin}"), Some(v.ap)));
    }
    rows.push(("precision".to_string(), Some(r.precision)));
    rows.push(("recall".to_string(), Some(r.recall)));
    rows.push(("F1".to_string(), Some(r.f1)));
    if !r.pe_by_distance.is_empty() {
        rows.push(("mPE".to_string(), r.mpe));
        for (bin, v) in &r.pe_by_distance {
            rows.push((format!("PE_{bin}"), *v));
        }
    }
    for (split, v) in &r.map_by_split {
        rows.push((format!("mAP_{split}"), Some(*v)));
    }
    rows
}

pub fn eval(a: &EvalArgs, cfg: &ToolConfig) -> anyhow::Result<()> {
    let gt = Dataset::load(&a.gt).with_context(|| format!("reading {}", a.gt.display()))?;
    let dets = Dataset::load(&a.dets).with_context(|| format!("reading {}", a.dets.display()))?;
    if let (Some(g), Some(d)) = (gt.azimuth_origin_deg, dets.azimuth_origin_deg) {
        if (g - d).abs() > 1e-9 {
            return Err(usage(format!(
                "ground truth uses azimuth origin {g} deg but detections use {d} deg"
            )));
        }
    }
    let spec = cfg.spec(&a.pano, gt.azimuth_origin_deg.or(dets.azimuth_origin_deg))?;
    let camera = cfg.camera(&a.pano)?;
    let gts = gt.ground_truth(&spec, camera.as_ref())?;
    let det_records = dets.detections(&spec, camera.as_ref())?;
    let mut images = gt.image_meta();
    for (id, m) in dets.image_meta() {
        images.entry(id).or_insert(m);
    }
    let mut eval_cfg = EvalConfig::new(spec);
    if let Some(t) = a.confidence_threshold.or(cfg.confidence_threshold) {
        if !(0.0..=1.0).contains(&t) {
            return Err(usage(format!("confidence threshold {t} outside [0, 1]")));
        }
        eval_cfg.confidence_threshold = t;
    }
    let fallback = a.camera_height.or(cfg.camera_height_m);
    if fallback.is_some() || images.values().any(|m| m.camera_height_m.is_some()) {
        eval_cfg = eval_cfg.with_distance_metrics(fallback);
    }
    let report = evaluate(&det_records, &gts, &images, &eval_cfg)?;
    for flag in &report.flags {
        log::warn!("{flag}");
    }
    write_json(&a.report, &report)?;
    let csv_path = a.report_csv.clone().unwrap_or_else(|| a.report.with_extension("csv"));
    #[derive(Serialize)]
    struct MetricRow {
        metric: String,
        value: Option<f64>,
    }
    let rows = report_rows(&report)
        .into_iter()
        .map(|(metric, value)| MetricRow { metric, value });
    write_csv(&csv_path, rows)
}
