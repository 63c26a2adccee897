//! Bounding boxes in the panorama and fisheye frames, and projections
//! between them.
//!
//! A panorama box projects to a rotated trapezoid in the fisheye image: its
//! top edge (larger incident angle) becomes the long side near the image
//! circle and its bottom edge the short side nearer the principal point.
//! Only the four corners are projected; the arcs between them are treated
//! as straight segments.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::camera::{normalize_azimuth, PixelCoord, SpherePoint, StereographicCamera};
use crate::equirect::EquirectSpec;
use crate::error::{invalid, Error, Result};

/// Axis-aligned panorama box in continuous coordinates.
///
/// A box crossing the azimuth seam is stored with `u_min > u_max`; it covers
/// `[u_min, width)` followed by `[0, u_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanoBox {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl PanoBox {
    pub fn new(u_min: f64, v_min: f64, u_max: f64, v_max: f64) -> Result<Self> {
        let b = Self {
            u_min,
            v_min,
            u_max,
            v_max,
        };
        if ![u_min, v_min, u_max, v_max].iter().all(|x| x.is_finite() && *x >= 0.0) {
            return Err(invalid(format!("box {b:?} must have finite non-negative coordinates")));
        }
        if v_min > v_max {
            return Err(invalid(format!("box {b:?} has v_min > v_max")));
        }
        Ok(b)
    }

    /// Box covering `[u_start, u_start + span]` modulo the panorama width.
    pub fn from_span(u_start: f64, span: f64, v_min: f64, v_max: f64, pano_width: f64) -> Result<Self> {
        if !(0.0..=pano_width).contains(&span) {
            return Err(invalid(format!("azimuth span {span} outside [0, {pano_width}]")));
        }
        let start = u_start.rem_euclid(pano_width);
        let end = start + span;
        let u_max = if end > pano_width { end - pano_width } else { end };
        Self::new(start, v_min, u_max, v_max)
    }

    pub fn wrapped(&self) -> bool {
        self.u_min > self.u_max
    }

    /// `u_max` continued past the seam for wrapped boxes.
    pub fn unwrapped_u_max(&self, pano_width: f64) -> f64 {
        if self.wrapped() {
            self.u_max + pano_width
        } else {
            self.u_max
        }
    }

    pub fn width(&self, pano_width: f64) -> f64 {
        self.unwrapped_u_max(pano_width) - self.u_min
    }

    pub fn height(&self) -> f64 {
        self.v_max - self.v_min
    }

    pub fn area(&self, pano_width: f64) -> f64 {
        self.width(pano_width) * self.height()
    }

    /// Horizontal center in `[0, width)`.
    pub fn center_u(&self, pano_width: f64) -> f64 {
        (0.5 * (self.u_min + self.unwrapped_u_max(pano_width))).rem_euclid(pano_width)
    }

    pub fn center_v(&self) -> f64 {
        0.5 * (self.v_min + self.v_max)
    }

    pub fn validate(&self, spec: &EquirectSpec) -> Result<()> {
        let w = f64::from(spec.width());
        let h = f64::from(spec.height());
        if self.u_min > w || self.u_max > w || self.v_max > h {
            return Err(invalid(format!(
                "box {self:?} exceeds the {}x{} panorama",
                spec.width(),
                spec.height()
            )));
        }
        Ok(())
    }
}

/// Projected box corners in the fisheye frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisheyeQuad {
    pub head_left: PixelCoord,
    pub head_right: PixelCoord,
    pub foot_right: PixelCoord,
    pub foot_left: PixelCoord,
}

impl FisheyeQuad {
    pub fn corners(&self) -> [PixelCoord; 4] {
        [self.head_left, self.head_right, self.foot_right, self.foot_left]
    }
}

/// Rotated rectangle in the fisheye frame. `angle` is the direction of the
/// height axis (foot towards head) measured from `+u` under the crate's
/// azimuth convention, so a radius-aligned box has `angle` equal to the
/// azimuth of its center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatedRect {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub angle: f64,
}

impl RotatedRect {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, angle: f64) -> Result<Self> {
        if ![cx, cy, angle].iter().all(|x| x.is_finite()) {
            return Err(invalid("rotated rect must be finite"));
        }
        if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
            return Err(invalid(format!("rotated rect size {w}x{h} must be positive")));
        }
        Ok(Self { cx, cy, w, h, angle })
    }

    /// Builds from `[cx, cy, w, h, angle_deg]` as stored in annotation files.
    pub fn from_degrees(values: [f64; 5]) -> Result<Self> {
        let [cx, cy, w, h, deg] = values;
        Self::new(cx, cy, w, h, deg.to_radians())
    }

    pub fn to_degrees(&self) -> [f64; 5] {
        [self.cx, self.cy, self.w, self.h, self.angle.to_degrees()]
    }

    pub fn center(&self) -> PixelCoord {
        PixelCoord::new(self.cx, self.cy)
    }

    /// Corners in head-left, head-right, foot-right, foot-left order.
    pub fn to_quad(&self) -> FisheyeQuad {
        let (s, c) = self.angle.sin_cos();
        // height axis and its +90° normal ("right")
        let (hu, hv) = (c * self.h / 2.0, s * self.h / 2.0);
        let (nu, nv) = (-s * self.w / 2.0, c * self.w / 2.0);
        let p = |a: f64, b: f64| PixelCoord::new(self.cx + a * hu + b * nu, self.cy + a * hv + b * nv);
        FisheyeQuad {
            head_left: p(1.0, -1.0),
            head_right: p(1.0, 1.0),
            foot_right: p(-1.0, 1.0),
            foot_left: p(-1.0, -1.0),
        }
    }

    /// Whether a point lies inside the rectangle (boundary included).
    pub fn contains(&self, p: PixelCoord) -> bool {
        let (s, c) = self.angle.sin_cos();
        let (du, dv) = (p.u - self.cx, p.v - self.cy);
        let along = du * c + dv * s;
        let across = -du * s + dv * c;
        along.abs() <= self.h / 2.0 && across.abs() <= self.w / 2.0
    }
}

pub fn pano_box_to_fisheye_quad(
    b: &PanoBox,
    cam: &StereographicCamera,
    spec: &EquirectSpec,
) -> FisheyeQuad {
    let u_max = b.unwrapped_u_max(f64::from(spec.width()));
    let p = |u: f64, v: f64| cam.project(spec.sphere_at(u, v));
    FisheyeQuad {
        head_left: p(b.u_min, b.v_min),
        head_right: p(u_max, b.v_min),
        foot_right: p(u_max, b.v_max),
        foot_left: p(b.u_min, b.v_max),
    }
}

/// Reduces a trapezoid to a rectangle: width is the mean of the two parallel
/// sides, height the distance between their midpoints.
pub fn quad_to_rotated_rect(q: &FisheyeQuad) -> Result<RotatedRect> {
    let head_mid = q.head_left.midpoint(&q.head_right);
    let foot_mid = q.foot_left.midpoint(&q.foot_right);
    let h = head_mid.distance(&foot_mid);
    if !(h > 0.0) {
        return Err(Error::DegenerateBox("trapezoid has zero height".into()));
    }
    let top = q.head_left.distance(&q.head_right);
    let bottom = q.foot_left.distance(&q.foot_right);
    let w = 0.5 * (top + bottom);
    let center = head_mid.midpoint(&foot_mid);
    let angle = (head_mid.v - foot_mid.v).atan2(head_mid.u - foot_mid.u);
    if !(w > 0.0) {
        return Err(Error::DegenerateBox("trapezoid has zero width".into()));
    }
    Ok(RotatedRect {
        cx: center.u,
        cy: center.v,
        w,
        h,
        angle,
    })
}

/// Smallest circular arc covering a set of azimuths, as `(start, span)` in
/// radians with `start` in `[0, 2π)`. Returns `None` for an empty set.
pub fn azimuth_hull(phis: &[f64]) -> Option<(f64, f64)> {
    let mut sorted: Vec<f64> = phis.iter().map(|&p| normalize_azimuth(p)).collect();
    if sorted.is_empty() {
        return None;
    }
    sorted.sort_by(f64::total_cmp);
    // the hull starts right after the largest gap between neighbours
    let n = sorted.len();
    let mut best_gap = sorted[0] + TAU - sorted[n - 1];
    let mut start_idx = 0;
    for i in 1..n {
        let gap = sorted[i] - sorted[i - 1];
        if gap > best_gap {
            best_gap = gap;
            start_idx = i;
        }
    }
    Some((sorted[start_idx], TAU - best_gap))
}

/// Azimuth interval covered by a fisheye rectangle, `None` when the
/// rectangle contains the principal point (it spans every azimuth).
fn rect_azimuth_arc(
    r: &RotatedRect,
    cam: &StereographicCamera,
) -> Result<(Option<(f64, f64)>, Vec<SpherePoint>)> {
    let q = r.to_quad();
    let c = q.corners();
    let samples = [
        c[0],
        c[1],
        c[2],
        c[3],
        c[0].midpoint(&c[1]),
        c[1].midpoint(&c[2]),
        c[2].midpoint(&c[3]),
        c[3].midpoint(&c[0]),
    ];
    let points = samples
        .iter()
        .map(|&p| cam.backproject(p))
        .collect::<Result<Vec<_>>>()?;
    if r.contains(cam.principal_point()) {
        return Ok((None, points));
    }
    let phis: Vec<f64> = points.iter().filter(|p| p.theta() > 0.0).map(|p| p.phi()).collect();
    Ok((azimuth_hull(&phis), points))
}

/// Panorama box covering a fisheye rectangle: the hull of its four corners
/// and four edge midpoints after backprojection. Sets the wrap layout when
/// the tightest azimuth interval crosses the seam.
pub fn fisheye_rect_to_pano_box(
    r: &RotatedRect,
    cam: &StereographicCamera,
    spec: &EquirectSpec,
) -> Result<PanoBox> {
    let (arc, points) = rect_azimuth_arc(r, cam)?;
    let w = f64::from(spec.width());
    let h = f64::from(spec.height());
    let vs = points.iter().map(|&p| spec.sphere_to_pano(p).v);
    let v_min = vs.clone().fold(f64::INFINITY, f64::min).max(0.0);
    let mut v_max = vs.fold(f64::NEG_INFINITY, f64::max).min(h);
    let Some((start, span)) = arc else {
        // the nadir is inside the rectangle
        v_max = h;
        return PanoBox::new(0.0, v_min, w, v_max);
    };
    let u_start = spec.azimuth_to_column(start);
    PanoBox::from_span(u_start, span / TAU * w, v_min, v_max, w)
}

/// Azimuth origin that keeps every box off the panorama seam.
///
/// When free azimuths exist, returns the midpoint of the widest gap between
/// box intervals. Otherwise returns the origin crossing the fewest boxes,
/// preferring the smallest angle on ties. Rectangles containing the
/// principal point cross every origin.
pub fn choose_seam_azimuth(boxes: &[RotatedRect], cam: &StereographicCamera) -> Result<f64> {
    let mut arcs = Vec::with_capacity(boxes.len());
    for r in boxes {
        if let Some(arc) = rect_azimuth_arc(r, cam)?.0 {
            arcs.push(arc);
        }
    }
    if arcs.is_empty() {
        return Ok(0.0);
    }
    if let Some(gap_mid) = widest_free_gap(&arcs) {
        return Ok(gap_mid);
    }
    let mut candidates: Vec<f64> = vec![0.0];
    for &(start, span) in &arcs {
        candidates.push(start);
        candidates.push(normalize_azimuth(start + span));
    }
    candidates.sort_by(f64::total_cmp);
    let mut best = (usize::MAX, 0.0);
    for &o in &candidates {
        let n = arcs.iter().filter(|&&a| arc_strictly_contains(a, o)).count();
        if n < best.0 {
            best = (n, o);
        }
    }
    Ok(best.1)
}

/// Whether `phi` lies strictly inside the arc.
pub fn arc_strictly_contains((start, span): (f64, f64), phi: f64) -> bool {
    let offset = normalize_azimuth(phi - start);
    offset > 0.0 && offset < span
}

fn widest_free_gap(arcs: &[(f64, f64)]) -> Option<f64> {
    // split arcs at 2π and merge them into covered segments of [0, 2π]
    let mut segments = Vec::with_capacity(arcs.len() * 2);
    for &(start, span) in arcs {
        let end = start + span;
        if end > TAU {
            segments.push((start, TAU));
            segments.push((0.0, end - TAU));
        } else {
            segments.push((start, end));
        }
    }
    segments.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (s, e) in segments {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    let n = merged.len();
    let mut best: Option<(f64, f64)> = None;
    for i in 0..n {
        let gap_start = merged[i].1;
        let gap_end = if i + 1 < n { merged[i + 1].0 } else { merged[0].0 + TAU };
        let len = gap_end - gap_start;
        if len > 0.0 && best.is_none_or(|(_, l)| len > l) {
            best = Some((gap_start + len / 2.0, len));
        }
    }
    best.map(|(mid, _)| normalize_azimuth(mid))
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const W: f64 = 3072.0;

    fn setup() -> (StereographicCamera, EquirectSpec) {
        (
            StereographicCamera::new(1024, 1024, None, None).unwrap(),
            EquirectSpec::from_width(3072).unwrap(),
        )
    }

    /// Radially aligned rectangle centered at azimuth `phi`, `r` pixels from
    /// the principal point.
    fn radial_rect(cam: &StereographicCamera, phi: f64, r: f64, w: f64, h: f64) -> RotatedRect {
        let pp = cam.principal_point();
        RotatedRect::new(pp.u + r * phi.cos(), pp.v + r * phi.sin(), w, h, phi).unwrap()
    }

    #[test]
    fn pano_box_wrapping() {
        let b = PanoBox::from_span(3060.0, 30.0, 10.0, 20.0, W).unwrap();
        assert!(b.wrapped());
        assert_eq!((b.u_min, b.u_max), (3060.0, 18.0));
        assert_eq!(b.width(W), 30.0);
        assert_eq!(b.center_u(W), 3.0);
        assert!(PanoBox::new(0.0, 5.0, 1.0, 4.0).is_err());
        assert!(PanoBox::new(-1.0, 0.0, 1.0, 4.0).is_err());
    }

    #[test]
    fn quad_corners_are_projected_box_corners() {
        let (cam, spec) = setup();
        let b = PanoBox::new(1000.0, 200.0, 1040.0, 330.0).unwrap();
        let q = pano_box_to_fisheye_quad(&b, &cam, &spec);
        let expect = |u, v| cam.project(spec.pano_to_sphere(PixelCoord::new(u, v)).unwrap());
        let pairs = [
            (q.head_left, expect(1000.0, 200.0)),
            (q.head_right, expect(1040.0, 200.0)),
            (q.foot_right, expect(1040.0, 330.0)),
            (q.foot_left, expect(1000.0, 330.0)),
        ];
        for (got, want) in pairs {
            assert_abs_diff_eq!(got.u, want.u, epsilon = 1e-9);
            assert_abs_diff_eq!(got.v, want.v, epsilon = 1e-9);
        }
        // the head edge lies closer to the image circle and is longer
        let pp = cam.principal_point();
        assert!(q.head_left.distance(&pp) > q.foot_left.distance(&pp));
        assert!(q.head_left.distance(&q.head_right) > q.foot_left.distance(&q.foot_right));
    }

    #[test]
    fn isosceles_trapezoid_reduces_to_mean_width() {
        let q = FisheyeQuad {
            head_left: PixelCoord::new(-5.0, 4.0),
            head_right: PixelCoord::new(5.0, 4.0),
            foot_right: PixelCoord::new(3.0, 0.0),
            foot_left: PixelCoord::new(-3.0, 0.0),
        };
        let r = quad_to_rotated_rect(&q).unwrap();
        assert_eq!(r.w, 8.0);
        assert_eq!(r.h, 4.0);
        assert_eq!((r.cx, r.cy), (0.0, 2.0));
        assert_abs_diff_eq!(r.angle, std::f64::consts::FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_quad_rejected() {
        let p = PixelCoord::new(1.0, 1.0);
        let q = FisheyeQuad {
            head_left: p,
            head_right: p,
            foot_right: p,
            foot_left: p,
        };
        assert!(matches!(quad_to_rotated_rect(&q), Err(Error::DegenerateBox(_))));
    }

    #[test]
    fn rect_containment() {
        let r = RotatedRect::new(10.0, 10.0, 4.0, 8.0, 0.0).unwrap();
        assert!(r.contains(PixelCoord::new(13.9, 11.9)));
        assert!(!r.contains(PixelCoord::new(10.0, 12.5)));
        assert!(RotatedRect::new(0.0, 0.0, 0.0, 1.0, 0.0).is_err());
        let d = RotatedRect::from_degrees([1.0, 2.0, 3.0, 4.0, 90.0]).unwrap();
        assert_abs_diff_eq!(d.to_degrees()[4], 90.0, epsilon = 1e-12);
    }

    #[test]
    fn pano_round_trip_keeps_overlap_for_steep_angles() {
        let (cam, spec) = setup();
        let v = |theta_deg: f64| 768.0 * (1.0 - theta_deg / 90.0);
        // 5° x 5° boxes with the foot edge anywhere in 60°..80°
        for foot in 60..=80 {
            let foot = f64::from(foot);
            for az in [0.0, 37.0, 135.0, 250.0, 357.0] {
                let b = PanoBox::from_span(az / 360.0 * W, 5.0 / 360.0 * W, v(foot + 5.0), v(foot), W).unwrap();
                let r = quad_to_rotated_rect(&pano_box_to_fisheye_quad(&b, &cam, &spec)).unwrap();
                let back = fisheye_rect_to_pano_box(&r, &cam, &spec).unwrap();
                let iou = crate::eval::iou_axis_aligned(&b, &back, W);
                assert!(iou >= 0.9, "foot {foot} az {az}: IoU {iou}");
            }
        }
    }

    #[test]
    fn straddling_rect_becomes_wrapped_box() {
        let (cam, spec) = setup();
        let r = radial_rect(&cam, 0.0, 300.0, 60.0, 80.0);
        let b = fisheye_rect_to_pano_box(&r, &cam, &spec).unwrap();
        assert!(b.wrapped());
        let origin = choose_seam_azimuth(&[r], &cam).unwrap();
        let b2 = fisheye_rect_to_pano_box(&r, &cam, &spec.with_azimuth_origin(origin)).unwrap();
        assert!(!b2.wrapped());
        assert_abs_diff_eq!(b.width(W), b2.width(W), epsilon = 1e-6);
    }

    #[test]
    fn seam_goes_opposite_a_single_box() {
        let (cam, _) = setup();
        // covers azimuths [10°, 20°] exactly at its corners
        let arc_mid = 15f64.to_radians();
        let r0 = 250.0;
        let half = r0 * 5f64.to_radians().tan();
        let rect = RotatedRect::new(
            cam.principal_point().u + r0 * arc_mid.cos(),
            cam.principal_point().v + r0 * arc_mid.sin(),
            2.0 * half,
            1.0,
            arc_mid,
        )
        .unwrap();
        let origin = choose_seam_azimuth(&[rect], &cam).unwrap();
        assert_abs_diff_eq!(origin.to_degrees(), 195.0, epsilon = 0.2);
    }

    #[test]
    fn rect_over_principal_point_is_full_width() {
        let (cam, spec) = setup();
        let r = RotatedRect::new(512.0, 512.0, 40.0, 40.0, 0.3).unwrap();
        let b = fisheye_rect_to_pano_box(&r, &cam, &spec).unwrap();
        assert_eq!((b.u_min, b.u_max, b.v_max), (0.0, W, 768.0));
    }

    #[test]
    fn fully_covered_azimuth_minimizes_crossings() {
        let (cam, _) = setup();
        // ring of overlapping boxes leaves no free azimuth
        let rects: Vec<RotatedRect> = (0..16)
            .map(|i| radial_rect(&cam, f64::from(i) * 22.5f64.to_radians(), 300.0, 140.0, 60.0))
            .collect();
        let arcs: Vec<(f64, f64)> = rects.iter().map(|r| rect_azimuth_arc(r, &cam).unwrap().0.unwrap()).collect();
        let crossings = |o: f64| arcs.iter().filter(|&&a| arc_strictly_contains(a, o)).count();
        let grid_min = (0..360).map(|d| crossings(f64::from(d).to_radians())).min().unwrap();
        assert!(grid_min > 0);
        let origin = choose_seam_azimuth(&rects, &cam).unwrap();
        assert!(crossings(origin) <= grid_min);
    }

    #[test]
    fn hull_of_azimuths() {
        assert_eq!(azimuth_hull(&[]), None);
        let (s, span) = azimuth_hull(&[0.1, 6.2, 0.3]).unwrap();
        assert_abs_diff_eq!(s, 6.2, epsilon = 1e-12);
        assert_abs_diff_eq!(span, 0.3 + TAU - 6.2, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn rect_quad_rect_identity(cx in 0.0f64..1024.0, cy in 0.0f64..1024.0, w in 1.0f64..200.0,
                                   h in 1.0f64..200.0, a in -PI..PI) {
            let r = RotatedRect::new(cx, cy, w, h, a).unwrap();
            let back = quad_to_rotated_rect(&r.to_quad()).unwrap();
            prop_assert!((back.cx - cx).abs() < 1e-9 && (back.cy - cy).abs() < 1e-9);
            prop_assert!((back.w - w).abs() < 1e-9 && (back.h - h).abs() < 1e-9);
            prop_assert!(wrap_angle(back.angle - a).abs() < 1e-9);
        }

        #[test]
        fn seam_choice_unwraps_every_box(n in 1usize..6, seed in proptest::collection::vec((0.0f64..TAU, 150.0f64..450.0), 6)) {
            let (cam, spec) = setup();
            // narrow boxes spread over the annulus leave free azimuths
            let rects: Vec<RotatedRect> = seed[..n].iter().map(|&(phi, r)| radial_rect(&cam, phi, r, 20.0, 50.0)).collect();
            let origin = choose_seam_azimuth(&rects, &cam).unwrap();
            let rotated = spec.with_azimuth_origin(origin);
            let gaps_exist = widest_free_gap(&rects.iter().map(|r| rect_azimuth_arc(r, &cam).unwrap().0.unwrap()).collect::<Vec<_>>()).is_some();
            prop_assume!(gaps_exist);
            for r in &rects {
                prop_assert!(!fisheye_rect_to_pano_box(r, &cam, &rotated).unwrap().wrapped());
            }
        }
    }
}
