//! Detection and localization scoring on panorama rectangles.
//!
//! Matching follows the COCO evaluator: detections of an image are visited
//! by descending confidence and each takes the best still-unmatched ground
//! truth at or above the IoU threshold, preferring ground truth that is not
//! ignored. Precision is read off a 101-point recall grid.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::boxes::PanoBox;
use crate::equirect::EquirectSpec;
use crate::error::{invalid, Error, Result};
use crate::localization::{distance_bin, locate_from_box, position_error, DistanceBin, GroundPosition};

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_iou_thresholds() -> Vec<f64> {
    (0..10).map(|i| f64::from(50 + 5 * i) / 100.0).collect()
}

pub const RECALL_POINTS: usize = 101;
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.3;
pub const DEFAULT_PE_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Detection {
    pub image_id: u64,
    pub bbox: PanoBox,
    pub confidence: f64,
}

impl Detection {
    pub fn new(image_id: u64, bbox: PanoBox, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(invalid(format!("confidence {confidence} outside [0, 1]")));
        }
        Ok(Self {
            image_id,
            bbox,
            confidence,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroundTruth {
    pub image_id: u64,
    pub bbox: PanoBox,
    /// Surveyed position; derived from the box when absent.
    pub position: Option<GroundPosition>,
}

impl GroundTruth {
    pub fn new(image_id: u64, bbox: PanoBox) -> Self {
        Self {
            image_id,
            bbox,
            position: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImageMeta {
    pub camera_height_m: Option<f64>,
    pub split: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub spec: EquirectSpec,
    pub confidence_threshold: f64,
    pub pe_iou_threshold: f64,
    /// Distance-binned AP and position errors. Needs a camera height for
    /// every image.
    pub distance_metrics: bool,
    /// Used for images without their own camera height.
    pub default_camera_height_m: Option<f64>,
}

impl EvalConfig {
    pub fn new(spec: EquirectSpec) -> Self {
        Self {
            spec,
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            pe_iou_threshold: DEFAULT_PE_IOU_THRESHOLD,
            distance_metrics: false,
            default_camera_height_m: None,
        }
    }

    pub fn with_distance_metrics(mut self, default_camera_height_m: Option<f64>) -> Self {
        self.distance_metrics = true;
        self.default_camera_height_m = default_camera_height_m;
        self
    }
}

/// Intersection over union with circular overlap along the azimuth axis.
pub fn iou_axis_aligned(a: &PanoBox, b: &PanoBox, pano_width: f64) -> f64 {
    let (a1, a2) = (a.u_min, a.unwrapped_u_max(pano_width));
    let (b1, b2) = (b.u_min, b.unwrapped_u_max(pano_width));
    let mut du = 0.0;
    for k in [-1.0, 0.0, 1.0] {
        let shift = k * pano_width;
        du += (a2.min(b2 + shift) - a1.max(b1 + shift)).max(0.0);
    }
    let du = du.min(a2 - a1).min(b2 - b1);
    let dv = (a.v_max.min(b.v_max) - a.v_min.max(b.v_min)).max(0.0);
    let inter = du * dv;
    let union = a.area(pano_width) + b.area(pano_width) - inter;
    if union > 0.0 {
        (inter / union).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// AP at one threshold. `defined` is false when no ground truth counted,
/// in which case `ap` is reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApValue {
    pub ap: f64,
    pub num_gt: usize,
    pub defined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    TruePositive,
    FalsePositive,
    Ignored,
}

/// One detection after matching, keyed for the global ranking.
#[derive(Debug, Clone, Copy)]
struct Scored {
    confidence: f64,
    image_id: u64,
    index: usize,
    outcome: Outcome,
}

/// Ground truth and detections of one image, with indices into the caller's
/// slices so ties can be broken by input order.
struct ImageGroup<'a> {
    image_id: u64,
    gts: Vec<(usize, &'a GroundTruth)>,
    dets: Vec<(usize, &'a Detection)>,
}

fn group_by_image<'a>(dets: &'a [Detection], gts: &'a [GroundTruth]) -> Vec<ImageGroup<'a>> {
    fn entry<'m, 'a>(map: &'m mut BTreeMap<u64, ImageGroup<'a>>, id: u64) -> &'m mut ImageGroup<'a> {
        map.entry(id).or_insert_with(|| ImageGroup {
            image_id: id,
            gts: Vec::new(),
            dets: Vec::new(),
        })
    }
    let mut map = BTreeMap::new();
    for (i, g) in gts.iter().enumerate() {
        entry(&mut map, g.image_id).gts.push((i, g));
    }
    for (i, d) in dets.iter().enumerate() {
        entry(&mut map, d.image_id).dets.push((i, d));
    }
    map.into_values().collect()
}

/// Per-image greedy matching. `gt_ignored` and `det_outside` are indexed
/// by position within the group. Returns the outcome of every detection and
/// the matched ground truth position within the group.
fn match_image(
    group: &ImageGroup<'_>,
    gt_ignored: &[bool],
    det_outside: &[bool],
    threshold: f64,
    pano_width: f64,
) -> (Vec<Scored>, Vec<Option<usize>>) {
    // non-ignored ground truth first, stable otherwise
    let mut gt_order: Vec<usize> = (0..group.gts.len()).collect();
    gt_order.sort_by_key(|&g| gt_ignored[g]);
    let mut det_order: Vec<usize> = (0..group.dets.len()).collect();
    det_order.sort_by(|&a, &b| group.dets[b].1.confidence.total_cmp(&group.dets[a].1.confidence));

    let mut gt_taken = vec![false; group.gts.len()];
    let mut det_match = vec![None; group.dets.len()];
    let mut scored = Vec::with_capacity(group.dets.len());
    for &d in &det_order {
        let (det_index, det) = group.dets[d];
        let mut best_iou = threshold.min(1.0 - 1e-10);
        let mut best: Option<usize> = None;
        for &g in &gt_order {
            if gt_taken[g] {
                continue;
            }
            if let Some(m) = best {
                if !gt_ignored[m] && gt_ignored[g] {
                    break;
                }
            }
            let iou = iou_axis_aligned(&det.bbox, &group.gts[g].1.bbox, pano_width);
            if iou < best_iou {
                continue;
            }
            best_iou = iou;
            best = Some(g);
        }
        let outcome = match best {
            Some(g) => {
                gt_taken[g] = true;
                det_match[d] = Some(g);
                if gt_ignored[g] {
                    Outcome::Ignored
                } else {
                    Outcome::TruePositive
                }
            }
            None if det_outside[d] => Outcome::Ignored,
            None => Outcome::FalsePositive,
        };
        scored.push(Scored {
            confidence: det.confidence,
            image_id: group.image_id,
            index: det_index,
            outcome,
        });
    }
    (scored, det_match)
}

/// Area under the 101-point interpolated precision/recall curve.
fn accumulate(mut scored: Vec<Scored>, num_gt: usize) -> ApValue {
    if num_gt == 0 {
        return ApValue {
            ap: 0.0,
            num_gt,
            defined: false,
        };
    }
    scored.retain(|s| s.outcome != Outcome::Ignored);
    scored.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(a.image_id.cmp(&b.image_id))
            .then(a.index.cmp(&b.index))
    });
    let n = scored.len();
    let mut recall = Vec::with_capacity(n);
    let mut precision = Vec::with_capacity(n);
    let (mut tp, mut fp) = (0usize, 0usize);
    for s in &scored {
        match s.outcome {
            Outcome::TruePositive => tp += 1,
            _ => fp += 1,
        }
        recall.push(tp as f64 / num_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    for i in (1..n).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let mut sum = 0.0;
    for k in 0..RECALL_POINTS {
        let r = k as f64 / (RECALL_POINTS - 1) as f64;
        let idx = recall.partition_point(|&x| x < r);
        if idx < n {
            sum += precision[idx];
        }
    }
    ApValue {
        ap: sum / RECALL_POINTS as f64,
        num_gt,
        defined: true,
    }
}

fn ap_with_masks(
    groups: &[ImageGroup<'_>],
    masks: &[(Vec<bool>, Vec<bool>)],
    threshold: f64,
    pano_width: f64,
) -> ApValue {
    let scored: Vec<Scored> = groups
        .par_iter()
        .zip(masks.par_iter())
        .flat_map_iter(|(g, (gi, dout))| match_image(g, gi, dout, threshold, pano_width).0)
        .collect();
    let num_gt = masks.iter().map(|(gi, _)| gi.iter().filter(|&&x| !x).count()).sum();
    accumulate(scored, num_gt)
}

fn no_masks(groups: &[ImageGroup<'_>]) -> Vec<(Vec<bool>, Vec<bool>)> {
    groups
        .iter()
        .map(|g| (vec![false; g.gts.len()], vec![false; g.dets.len()]))
        .collect()
}

/// COCO-style AP over all images at one IoU threshold.
pub fn average_precision(
    dets: &[Detection],
    gts: &[GroundTruth],
    iou_threshold: f64,
    pano_width: f64,
) -> Result<ApValue> {
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(invalid(format!("IoU threshold {iou_threshold} outside [0, 1]")));
    }
    let groups = group_by_image(dets, gts);
    if gts.is_empty() {
        log::warn!("no ground truth; AP reported as 0");
    }
    Ok(ap_with_masks(&groups, &no_masks(&groups), iou_threshold, pano_width))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    #[serde(rename = "mAP")]
    pub map: f64,
    #[serde(rename = "AP50")]
    pub ap50: f64,
    #[serde(rename = "AP75")]
    pub ap75: f64,
    /// AP at each threshold of [`coco_iou_thresholds`].
    pub ap_per_threshold: Vec<ApValue>,
    /// AP50:95 restricted to ground truth of one distance bin.
    pub ap_by_distance: BTreeMap<DistanceBin, ApValue>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Mean position error over matched pairs, meters.
    #[serde(rename = "mPE")]
    pub mpe: Option<f64>,
    pub pe_by_distance: BTreeMap<DistanceBin, Option<f64>>,
    pub pe_pairs: usize,
    #[serde(rename = "mAP_by_split")]
    pub map_by_split: BTreeMap<String, f64>,
    pub num_images: usize,
    pub num_ground_truth: usize,
    pub num_detections: usize,
    /// Conditions under which a value above was reported as 0.
    pub flags: Vec<String>,
}

fn camera_height(
    image_id: u64,
    images: &BTreeMap<u64, ImageMeta>,
    cfg: &EvalConfig,
) -> Result<f64> {
    images
        .get(&image_id)
        .and_then(|m| m.camera_height_m)
        .or(cfg.default_camera_height_m)
        .ok_or_else(|| {
            Error::Configuration(format!(
                "image {image_id} has no camera height; distance metrics need one"
            ))
        })
}

/// Bin of a box by its foot-point distance. Foot rays that miss the ground
/// count as far.
fn box_bin(b: &PanoBox, spec: &EquirectSpec, c: f64) -> Result<DistanceBin> {
    match locate_from_box(b, spec, c) {
        Ok(p) => distance_bin(p.distance_m),
        Err(Error::Horizon { .. }) => Ok(DistanceBin::Far),
        Err(e) => Err(e),
    }
}

fn gt_position(g: &GroundTruth, spec: &EquirectSpec, c: f64) -> Result<Option<GroundPosition>> {
    if let Some(p) = g.position {
        return Ok(Some(p));
    }
    match locate_from_box(&g.bbox, spec, c) {
        Ok(p) => Ok(Some(p)),
        Err(Error::Horizon { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn map_over(groups: &[ImageGroup<'_>], masks: &[(Vec<bool>, Vec<bool>)], w: f64) -> Vec<ApValue> {
    coco_iou_thresholds()
        .into_iter()
        .map(|t| ap_with_masks(groups, masks, t, w))
        .collect()
}

fn mean_ap(values: &[ApValue]) -> f64 {
    values.iter().map(|v| v.ap).sum::<f64>() / values.len() as f64
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Full report: AP over the COCO thresholds, distance-binned AP,
/// precision/recall/F1 and position errors at the confidence threshold,
/// and mAP per split tag.
pub fn evaluate(
    dets: &[Detection],
    gts: &[GroundTruth],
    images: &BTreeMap<u64, ImageMeta>,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if !(0.0..=1.0).contains(&cfg.confidence_threshold) {
        return Err(invalid("confidence threshold outside [0, 1]"));
    }
    if !images.is_empty() {
        let ids = dets.iter().map(|d| d.image_id).chain(gts.iter().map(|g| g.image_id));
        for id in ids {
            if !images.contains_key(&id) {
                return Err(invalid(format!("image id {id} is not listed among the images")));
            }
        }
    }
    let spec = &cfg.spec;
    let w = f64::from(spec.width());
    for b in dets.iter().map(|d| &d.bbox).chain(gts.iter().map(|g| &g.bbox)) {
        b.validate(spec)?;
    }
    let groups = group_by_image(dets, gts);
    let mut flags = Vec::new();
    if gts.is_empty() {
        flags.push("no ground truth: AP, recall and position error reported as 0 or empty".to_string());
    }

    let plain = no_masks(&groups);
    let ap_per_threshold = map_over(&groups, &plain, w);
    let map = mean_ap(&ap_per_threshold);

    // distance bins of ground truth and detections
    let mut ap_by_distance = BTreeMap::new();
    let mut gt_bins: Vec<Vec<DistanceBin>> = Vec::new();
    let mut gt_positions: Vec<Vec<Option<GroundPosition>>> = Vec::new();
    if cfg.distance_metrics {
        let mut det_bins = Vec::with_capacity(groups.len());
        for g in &groups {
            let c = camera_height(g.image_id, images, cfg)?;
            let mut bins = Vec::with_capacity(g.gts.len());
            let mut positions = Vec::with_capacity(g.gts.len());
            for (_, gt) in &g.gts {
                let pos = gt_position(gt, spec, c)?;
                bins.push(match pos {
                    Some(p) => distance_bin(p.distance_m)?,
                    None => DistanceBin::Far,
                });
                positions.push(pos);
            }
            gt_bins.push(bins);
            gt_positions.push(positions);
            det_bins.push(
                g.dets
                    .iter()
                    .map(|(_, d)| box_bin(&d.bbox, spec, c))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        for bin in DistanceBin::ALL {
            let masks: Vec<_> = gt_bins
                .iter()
                .zip(&det_bins)
                .map(|(gb, db)| {
                    (
                        gb.iter().map(|b| *b != bin).collect(),
                        db.iter().map(|b| *b != bin).collect(),
                    )
                })
                .collect();
            let per = map_over(&groups, &masks, w);
            let defined = per.iter().all(|v| v.defined);
            if !defined {
                flags.push(format!("no ground truth in the {bin} bin: AP reported as 0"));
            }
            ap_by_distance.insert(
                bin,
                ApValue {
                    ap: mean_ap(&per),
                    num_gt: per[0].num_gt,
                    defined,
                },
            );
        }
    }

    // operating point: confident detections matched at the PE threshold
    let mut tp = 0usize;
    let mut kept = 0usize;
    let mut errors: Vec<f64> = Vec::new();
    let mut errors_by_bin: BTreeMap<DistanceBin, Vec<f64>> = BTreeMap::new();
    let mut unlocated = 0usize;
    for (gi, g) in groups.iter().enumerate() {
        let confident = ImageGroup {
            image_id: g.image_id,
            gts: g.gts.clone(),
            dets: g
                .dets
                .iter()
                .copied()
                .filter(|(_, d)| d.confidence >= cfg.confidence_threshold)
                .collect(),
        };
        kept += confident.dets.len();
        let (scored, matches) = match_image(
            &confident,
            &vec![false; confident.gts.len()],
            &vec![false; confident.dets.len()],
            cfg.pe_iou_threshold,
            w,
        );
        tp += scored.iter().filter(|s| s.outcome == Outcome::TruePositive).count();
        if !cfg.distance_metrics {
            continue;
        }
        let c = camera_height(g.image_id, images, cfg)?;
        for (d, m) in matches.iter().enumerate() {
            let Some(gt) = *m else { continue };
            let est = match locate_from_box(&confident.dets[d].1.bbox, spec, c) {
                Ok(p) => p,
                Err(Error::Horizon { .. }) => {
                    unlocated += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let Some(truth) = gt_positions[gi][gt] else {
                unlocated += 1;
                continue;
            };
            let e = position_error(&est, &truth);
            errors.push(e);
            errors_by_bin.entry(gt_bins[gi][gt]).or_default().push(e);
        }
    }
    let precision = if kept > 0 {
        tp as f64 / kept as f64
    } else {
        flags.push("no detections at the confidence threshold: precision reported as 0".to_string());
        0.0
    };
    let recall = if gts.is_empty() { 0.0 } else { tp as f64 / gts.len() as f64 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    if unlocated > 0 {
        flags.push(format!("{unlocated} matched pairs had a foot ray above the horizon and were left out of PE"));
    }
    let mpe = mean(&errors);
    let mut pe_by_distance = BTreeMap::new();
    if cfg.distance_metrics {
        if mpe.is_none() {
            flags.push("no matched pairs: mPE undefined".to_string());
        }
        for bin in DistanceBin::ALL {
            pe_by_distance.insert(bin, errors_by_bin.get(&bin).and_then(|v| mean(v)));
        }
    }

    let splits: BTreeSet<&str> = images.values().filter_map(|m| m.split.as_deref()).collect();
    let mut map_by_split = BTreeMap::new();
    for split in splits {
        let in_split = |id: u64| images.get(&id).and_then(|m| m.split.as_deref()) == Some(split);
        let d: Vec<Detection> = dets.iter().copied().filter(|x| in_split(x.image_id)).collect();
        let g: Vec<GroundTruth> = gts.iter().copied().filter(|x| in_split(x.image_id)).collect();
        let sub = group_by_image(&d, &g);
        let values = map_over(&sub, &no_masks(&sub), w);
        map_by_split.insert(split.to_string(), mean_ap(&values));
    }

    Ok(EvalReport {
        map,
        ap50: ap_per_threshold[0].ap,
        ap75: ap_per_threshold[5].ap,
        ap_per_threshold,
        ap_by_distance,
        precision,
        recall,
        f1,
        mpe,
        pe_by_distance,
        pe_pairs: errors.len(),
        map_by_split,
        num_images: groups.len().max(images.len()),
        num_ground_truth: gts.len(),
        num_detections: dets.len(),
        flags,
    })
}
