//! Bilinear remapping against a nearest-neighbour remapper written directly
//! from the projection formulas.

use std::f64::consts::{FRAC_PI_2, TAU};

use fishpano::remap::{build_remap_table, remap_image};
use fishpano::{EquirectSpec, Image, StereographicCamera};

/// Smooth radial chart: angular stripes plus slow radial rings.
fn chart(side: u32) -> Image {
    let c = f64::from(side) / 2.0;
    let mut data = Vec::with_capacity((side * side) as usize);
    for y in 0..side {
        for x in 0..side {
            let (du, dv) = (f64::from(x) + 0.5 - c, f64::from(y) + 0.5 - c);
            let phi = dv.atan2(du);
            let r = du.hypot(dv);
            let value = 128.0 + 90.0 * (8.0 * phi).sin() * (r / 60.0).min(1.0) + 30.0 * (r / 40.0).cos();
            data.push(value.round().clamp(0.0, 255.0) as u8);
        }
    }
    Image::new(side, side, 1, data).unwrap()
}

fn nearest_oracle(img: &Image, side: u32, width: u32, origin: f64) -> Vec<u8> {
    let height = width / 4;
    let f = f64::from(side) / 4.0;
    let c = f64::from(side) / 2.0;
    let mut out = Vec::with_capacity((width * height) as usize);
    for row in 0..height {
        let theta = FRAC_PI_2 * (1.0 - (f64::from(row) + 0.5) / f64::from(height));
        let gamma = 2.0 * f * (theta / 2.0).tan();
        for col in 0..width {
            let phi = origin + TAU * (f64::from(col) + 0.5) / f64::from(width);
            let (u, v) = (c + gamma * phi.cos(), c + gamma * phi.sin());
            let (x, y) = (u.floor(), v.floor());
            let inside = x >= 0.0 && y >= 0.0 && x < f64::from(side) && y < f64::from(side);
            out.push(if inside { img.pixel(x as u32, y as u32)[0] } else { 0 });
        }
    }
    out
}

#[test]
fn bilinear_matches_nearest_neighbour_oracle() {
    let side = 512;
    let img = chart(side);
    let cam = StereographicCamera::new(side, side, None, None).unwrap();
    for (width, origin) in [(1536u32, 0.0), (2048, 0.7)] {
        let spec = EquirectSpec::new(width, width / 4, origin).unwrap();
        let pano = remap_image(&img, &build_remap_table(&cam, &spec)).unwrap();
        let oracle = nearest_oracle(&img, side, width, origin);
        let total: f64 = pano
            .data()
            .iter()
            .zip(&oracle)
            .map(|(&a, &b)| (f64::from(a) - f64::from(b)).abs())
            .sum();
        let mad = total / oracle.len() as f64 / 255.0;
        assert!(mad <= 2.0 / 255.0, "width {width}: mean abs diff {mad}");
    }
}

#[test]
fn angular_stripes_become_columns() {
    // a chart depending on azimuth only maps to a panorama constant along columns
    let side = 256;
    let c = f64::from(side) / 2.0;
    let data = (0..side * side)
        .map(|i| {
            let (x, y) = (f64::from(i % side) + 0.5 - c, f64::from(i / side) + 0.5 - c);
            if (4.0 * y.atan2(x)).sin() >= 0.0 { 200 } else { 40 }
        })
        .collect();
    let img = Image::new(side, side, 1, data).unwrap();
    let cam = StereographicCamera::new(side, side, None, None).unwrap();
    let spec = EquirectSpec::from_width(1024).unwrap();
    let pano = remap_image(&img, &build_remap_table(&cam, &spec)).unwrap();
    // away from the stripe edges and the center, columns are constant
    let col = 1024 / 16;
    let values: Vec<u8> = (10..200).map(|row| pano.pixel(col, row)[0]).collect();
    assert!(values.iter().all(|&v| v == 200), "{values:?}");
}
