//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use fishpano::analysis::{box_height, ground_interval_width, render_person_box, SceneConfig};
use fishpano::boxes::{choose_seam_azimuth, fisheye_rect_to_pano_box, quad_to_rotated_rect};
use fishpano::equirect::STANDARD_PANORAMA_WIDTHS;
use fishpano::eval::{average_precision, evaluate, Detection, EvalConfig, GroundTruth, ImageMeta};
use fishpano::image_io::{encode_png, read_image};
use fishpano::localization::{locate_from_box, row_error_bound};
use fishpano::significance::{pdat_scale, ScaleConfig};
use fishpano::tiling::{build_tiling, w_coefficient};
use fishpano::{
    EquirectSpec, FisheyeQuad, Image, PanoBox, PixelCoord, RotatedRect, SignificanceMap, SpherePoint,
    StereographicCamera, DEFAULT_PANORAMA_WIDTH,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn projection_round_trip() -> Outcome {
    let cam = StereographicCamera::new(1024, 1024, None, None).unwrap();
    let mut rng = StdRng::seed_from_u64(1);
    let points: Vec<SpherePoint> = (0..10_000)
        .map(|_| SpherePoint::new(rng.random_range(1e-4..FRAC_PI_2 - 1e-4), rng.random_range(-PI..PI)).unwrap())
        .collect();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for p in &points {
        let q = cam.backproject(cam.project(*p)).map_err(|e| e.to_string())?;
        let dphi = (q.phi() - p.phi()).rem_euclid(2.0 * PI);
        worst = worst.max((q.theta() - p.theta()).abs()).max(dphi.min(2.0 * PI - dphi));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure!(worst <= 1e-9, "max angular error {worst:e} rad");
    ensure!(elapsed < 1.0, "took {elapsed:.3} s");
    Ok(format!("max error {worst:.2e} rad, {elapsed:.4} s"))
}

fn panorama_width() -> Outcome {
    let circumference = PI * 1024.0;
    ensure!((circumference - 3216.99).abs() < 0.005, "circumference {circumference}");
    ensure!(circumference.round() == 3217.0, "rounded circumference {}", circumference.round());
    ensure!(DEFAULT_PANORAMA_WIDTH == 3072, "default width {DEFAULT_PANORAMA_WIDTH}");
    let nearest = STANDARD_PANORAMA_WIDTHS
        .iter()
        .min_by(|a, b| (f64::from(**a) - circumference).abs().total_cmp(&(f64::from(**b) - circumference).abs()))
        .unwrap();
    ensure!(*nearest == 3072, "nearest standard width {nearest}");

    let dir = tempfile::tempdir().unwrap();
    let img = Image::new(1024, 1024, 1, vec![128; 1024 * 1024]).unwrap();
    std::fs::write(dir.path().join("f.png"), encode_png(&img).unwrap()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fishpano"))
        .args(["remap", "f.png", "p.png"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    ensure!(out.status.success(), "remap failed: {}", String::from_utf8_lossy(&out.stderr));
    let pano = read_image(dir.path().join("p.png")).unwrap();
    ensure!((pano.width(), pano.height()) == (3072, 768), "CLI produced {}x{}", pano.width(), pano.height());
    Ok(format!("pi*1024 = {circumference:.2}, CLI default 3072x768"))
}

fn tiling_exactness() -> Outcome {
    let mut details = Vec::new();
    for (h, w, sides) in [(192, 768, [3, 6, 12, 24, 48]), (128, 512, [2, 4, 8, 16, 32])] {
        let start = Instant::now();
        let t = build_tiling(h, w, 5, 2).map_err(|e| e.to_string())?;
        ensure!(t.tile_sides() == sides, "{h}x{w}: sides {:?}", t.tile_sides());
        let mut hits = vec![0u32; h * w];
        for tile in t.tiles() {
            let b = tile.bounds;
            for r in b.row_start..b.row_end {
                for c in b.col_start..b.col_end {
                    hits[r * w + c] += 1;
                }
            }
        }
        let bad = hits.iter().filter(|&&n| n != 1).count();
        ensure!(bad == 0, "{h}x{w}: {bad} cells not covered exactly once");
        for r in 0..h {
            for c in 0..w {
                let tile = t.tile_of(r, c).map_err(|e| e.to_string())?;
                ensure!(tile.bounds.contains(r, c), "{h}x{w}: tile_of({r}, {c}) misses the cell");
            }
        }
        let elapsed = start.elapsed().as_secs_f64();
        ensure!(elapsed < 1.0, "{h}x{w}: took {elapsed:.3} s");
        details.push(format!("{}x{} cells once in {:.3} s", h, w, elapsed));
    }
    Ok(details.join(", "))
}

fn w_values() -> Outcome {
    let w2 = w_coefficient(2).map_err(|e| e.to_string())?;
    let w3 = w_coefficient(3).map_err(|e| e.to_string())?;
    ensure!((*w2.numer(), *w2.denom()) == (1, 3), "w(2) = {w2}");
    ensure!((*w3.numer(), *w3.denom()) == (1, 2), "w(3) = {w3}");
    let argmin = (2..=100u64).min_by_key(|&m| w_coefficient(m).unwrap()).unwrap();
    ensure!(argmin == 2, "argmin {argmin}");
    Ok(format!("w(2) = {w2}, w(3) = {w3}, argmin over 2..=100 is {argmin}"))
}

fn rel_error(d: f64, lambda: f64) -> (f64, f64, f64) {
    let r = box_height(&SceneConfig::new(3.0, 1.7, d).unwrap(), lambda).unwrap();
    (r.exact_height, r.linearized_height, (r.linearized_height - r.exact_height).abs() / r.exact_height)
}

fn linearization() -> Outcome {
    let lambda = EquirectSpec::from_width(3072).unwrap().lambda_px_per_rad();
    // 50-digit reference values
    let reference = [
        (10.0, 79.29456730025295282, 82.65354252105445208),
        (20.0, 41.06045130060876987, 41.50015838765077087),
        (50.0, 16.59115209300584536, 16.61967120500433573),
        (100.0, 8.30766782583801930, 8.31123956930040939),
        (200.0, 4.155348664557566799, 4.155795347223825629),
        (17.013845458853128593, 48.04790206401222576, 48.75787165988144836),
    ];
    for (d, exact, lin) in reference {
        let (e, l, _) = rel_error(d, lambda);
        ensure!((e - exact).abs() <= 1e-12 * exact, "d {d}: exact {e} vs {exact}");
        ensure!((l - lin).abs() <= 1e-12 * lin, "d {d}: linearized {l} vs {lin}");
    }
    let d_min = 3.0 / 10f64.to_radians().tan();
    let mut worst: f64 = 0.0;
    let mut n = 0;
    let mut d = d_min * (1.0 + 1e-12);
    while d < 1e5 {
        worst = worst.max(rel_error(d, lambda).2);
        d *= 1.0001;
        n += 1;
    }
    ensure!(worst < 0.02, "max relative error {worst}");
    let errs: Vec<f64> = [10.0, 20.0, 50.0, 100.0, 200.0].iter().map(|&d| rel_error(d, lambda).2).collect();
    ensure!(errs.windows(2).all(|p| p[1] < p[0]), "errors not decreasing: {errs:?}");
    Ok(format!("max error {:.3}% over {n} distances beyond {d_min:.3} m, reference values match", 100.0 * worst))
}

fn delta_d_monotone() -> Outcome {
    let delta = 1f64.to_radians();
    let mut prev = f64::NEG_INFINITY;
    let mut n = 0;
    for k in 10..=880 {
        let theta = (f64::from(k) / 10.0).to_radians();
        let dd = ground_interval_width(3.0, theta, delta).map_err(|e| e.to_string())?;
        ensure!(dd > prev, "not increasing at {:.1} deg", f64::from(k) / 10.0);
        prev = dd;
        n += 1;
    }
    let at80 = ground_interval_width(3.0, 80f64.to_radians(), delta).unwrap();
    ensure!((at80 - 1.74074157034178313769).abs() < 1e-12, "width at 80 deg {at80}");
    Ok(format!("{n} grid points strictly increasing, 80 deg bin {at80:.6} m"))
}

fn pdat_operator() -> Outcome {
    let (h, w) = (192, 768);
    let tiling = build_tiling(h, w, 5, 2).unwrap();
    let double = ScaleConfig::new(2.0).unwrap();
    let identity = ScaleConfig::new(1.0).unwrap();
    let mut rng = StdRng::seed_from_u64(7);
    let mut operator_time = 0.0;
    let total = Instant::now();
    for i in 0..1000 {
        let values: Vec<f64> = (0..h * w).map(|_| rng.random_range(1e-6..1.0)).collect();
        let map = SignificanceMap::new(h, w, values).unwrap();
        let start = Instant::now();
        let scaled = pdat_scale(&map, &tiling, &double).unwrap();
        let same = pdat_scale(&map, &tiling, &identity).unwrap();
        operator_time += start.elapsed().as_secs_f64();

        let mut expected: Vec<u64> = map.values().iter().map(|v| v.to_bits()).collect();
        for tile in tiling.tiles() {
            let b = tile.bounds;
            let mut best = (b.row_start, b.col_start);
            for r in b.row_start..b.row_end {
                for c in b.col_start..b.col_end {
                    if map.get(r, c) > map.get(best.0, best.1) {
                        best = (r, c);
                    }
                }
            }
            expected[best.0 * w + best.1] = (2.0 * map.get(best.0, best.1)).to_bits();
        }
        let changed = map.values().iter().zip(scaled.values()).filter(|(a, b)| a.to_bits() != b.to_bits()).count();
        ensure!(changed == tiling.num_tiles(), "map {i}: {changed} entries changed, {} tiles", tiling.num_tiles());
        let got: Vec<u64> = scaled.values().iter().map(|v| v.to_bits()).collect();
        ensure!(got == expected, "map {i}: differs from the per-tile scan");
        let ident = same.values().iter().zip(map.values()).all(|(a, b)| a.to_bits() == b.to_bits());
        ensure!(ident, "map {i}: alpha 1 changed the map");
    }
    ensure!(operator_time < 5.0, "operator took {operator_time:.2} s");
    Ok(format!(
        "1000 maps, {} tiles each, operator {operator_time:.2} s (whole check {:.2} s)",
        tiling.num_tiles(),
        total.elapsed().as_secs_f64()
    ))
}

fn localization_consistency() -> Outcome {
    let spec = EquirectSpec::from_width(3072).unwrap();
    let mut worst_ratio: f64 = 0.0;
    for c in [2.5, 3.0, 4.0] {
        for d in [5.0, 15.0, 30.0] {
            for az in [0.3, 2.0, 4.5] {
                let scene = SceneConfig::new(c, 1.7, d).unwrap();
                let b = render_person_box(&scene, &spec, az, 30.0).unwrap();
                let exact = locate_from_box(&b, &spec, c).unwrap();
                ensure!((exact.distance_m - d).abs() <= 1e-9 * d, "c {c} d {d}: exact box gives {}", exact.distance_m);
                let snapped = PanoBox::new(b.u_min, b.v_min.round(), b.u_max, b.v_max.round()).unwrap();
                let p = locate_from_box(&snapped, &spec, c).unwrap();
                let bound = row_error_bound(&spec, c, (d / c).atan());
                let err = (p.distance_m - d).abs();
                ensure!(err <= bound, "c {c} d {d}: error {err} above bound {bound}");
                worst_ratio = worst_ratio.max(err / bound);
            }
        }
    }
    let v = f64::from(spec.height()) * (1.0 - FRAC_PI_4 / FRAC_PI_2);
    let b = PanoBox::new(100.0, v - 50.0, 120.0, v).unwrap();
    let p = locate_from_box(&b, &spec, 3.0).unwrap();
    ensure!((p.distance_m - 3.0).abs() < 1e-12, "45 deg foot gives {}", p.distance_m);
    Ok(format!("27 scenes exact, snapped rows use at most {:.0}% of the bound, 45 deg -> {} m", 100.0 * worst_ratio, p.distance_m))
}

fn trapezoid_reduction() -> Outcome {
    let q = FisheyeQuad {
        head_left: PixelCoord::new(95.0, 40.0),
        head_right: PixelCoord::new(105.0, 40.0),
        foot_right: PixelCoord::new(103.0, 60.0),
        foot_left: PixelCoord::new(97.0, 60.0),
    };
    let r = quad_to_rotated_rect(&q).map_err(|e| e.to_string())?;
    ensure!(r.w == 8.0, "width {}", r.w);
    Ok(format!("width {}", r.w))
}

fn evaluation_oracle() -> Outcome {
    const W: f64 = 3072.0;
    let gt_boxes = [
        PanoBox::new(100.0, 300.0, 140.0, 400.0).unwrap(),
        PanoBox::new(800.0, 300.0, 840.0, 400.0).unwrap(),
        PanoBox::new(1600.0, 300.0, 1640.0, 400.0).unwrap(),
    ];
    let gts: Vec<GroundTruth> = gt_boxes.iter().map(|b| GroundTruth::new(1, *b)).collect();
    let dets = vec![
        Detection::new(1, gt_boxes[0], 0.9).unwrap(),
        Detection::new(1, PanoBox::new(2500.0, 300.0, 2540.0, 400.0).unwrap(), 0.85).unwrap(),
        Detection::new(1, gt_boxes[1], 0.8).unwrap(),
    ];
    // precision 1, 1/2, 2/3 at recall 1/3, 1/3, 2/3: 34 points at 1, 33 at 2/3
    let hand = 56.0 / 101.0;
    let ap = average_precision(&dets, &gts, 0.5, W).map_err(|e| e.to_string())?.ap;
    ensure!((ap - hand).abs() < 1e-9, "AP {ap} vs {hand}");

    let spec = EquirectSpec::from_width(3072).unwrap();
    let perfect: Vec<Detection> = gt_boxes.iter().map(|b| Detection::new(1, *b, 0.95).unwrap()).collect();
    let images = BTreeMap::from([(1, ImageMeta { camera_height_m: Some(3.0), split: None })]);
    let report = evaluate(&perfect, &gts, &images, &EvalConfig::new(spec).with_distance_metrics(None))
        .map_err(|e| e.to_string())?;
    ensure!(report.map == 1.0, "perfect mAP {}", report.map);
    ensure!(report.mpe == Some(0.0), "perfect mPE {:?}", report.mpe);
    Ok(format!("AP {ap:.12} = 56/101, perfect mAP 1 and mPE 0"))
}

fn seam_handling() -> Outcome {
    let cam = StereographicCamera::new(1024, 1024, None, None).unwrap();
    let spec = EquirectSpec::from_width(3072).unwrap();
    let pp = cam.principal_point();
    let placed = [(0.0, 300.0), (70.0, 250.0), (130.0, 350.0), (200.0, 280.0), (290.0, 400.0)];
    let rects: Vec<RotatedRect> = placed
        .iter()
        .map(|&(deg, r): &(f64, f64)| {
            let phi = deg.to_radians();
            RotatedRect::new(pp.u + r * phi.cos(), pp.v + r * phi.sin(), 50.0, 80.0, phi).unwrap()
        })
        .collect();
    let wrapped_at = |origin: f64| -> usize {
        let s = spec.with_azimuth_origin(origin);
        rects.iter().filter(|r| fisheye_rect_to_pano_box(r, &cam, &s).unwrap().wrapped()).count()
    };
    ensure!(wrapped_at(0.0) == 1, "{} boxes wrap at origin 0", wrapped_at(0.0));
    let origin = choose_seam_azimuth(&rects, &cam).map_err(|e| e.to_string())?;
    let chosen = wrapped_at(origin);
    let grid_min = (0..360).map(|k| wrapped_at(f64::from(k).to_radians())).min().unwrap();
    ensure!(grid_min == 0, "1 deg grid finds no split-free origin");
    ensure!(chosen == 0, "{chosen} boxes wrap at the chosen origin {:.2} deg", origin.to_degrees());

    let dir = tempfile::tempdir().unwrap();
    let annotations: Vec<serde_json::Value> = rects
        .iter()
        .map(|r| serde_json::json!({ "image_id": 1, "rbox": r.to_degrees() }))
        .collect();
    let doc = serde_json::json!({
        "images": [{ "id": 1, "width": 1024, "height": 1024 }],
        "annotations": annotations,
    });
    std::fs::write(dir.path().join("a.json"), doc.to_string()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fishpano"))
        .args(["project-boxes", "--direction", "to-pano", "--auto-seam", "a.json", "p.json"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    ensure!(out.status.success(), "CLI failed: {}", String::from_utf8_lossy(&out.stderr));
    let p: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("p.json")).unwrap()).unwrap();
    let cli_wrapped = p["annotations"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|a| a["pano_box"][0].as_f64().unwrap() > a["pano_box"][2].as_f64().unwrap())
        .count();
    ensure!(cli_wrapped == 0, "CLI output has {cli_wrapped} wrapped boxes");
    Ok(format!("origin {:.2} deg, 0 wrapped (grid minimum {grid_min}), CLI agrees", origin.to_degrees()))
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 11] = [
        ("projection round trip", projection_round_trip),
        ("panorama width", panorama_width),
        ("tiling exactness", tiling_exactness),
        ("w_M values", w_values),
        ("linearization", linearization),
        ("delta-d monotonicity", delta_d_monotone),
        ("PDAT operator", pdat_operator),
        ("localization consistency", localization_consistency),
        ("trapezoid reduction", trapezoid_reduction),
        ("evaluation oracle", evaluation_oracle),
        ("seam handling", seam_handling),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
