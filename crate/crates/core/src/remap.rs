//! Fisheye to panorama resampling.

use rayon::prelude::*;

use crate::camera::{CameraConfig, PixelCoord, StereographicCamera};
use crate::equirect::EquirectSpec;
use crate::error::{invalid, Result};

/// 8-bit interleaved image with one or three channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("image must be non-empty"));
        }
        if channels != 1 && channels != 3 {
            return Err(invalid(format!("unsupported channel count {channels}")));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(invalid(format!(
                "image data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn zeros(width: u32, height: u32, channels: u8) -> Result<Self> {
        let len = width as usize * height as usize * channels as usize;
        Self::new(width, height, channels, vec![0; len])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let o = self.offset(x, y);
        &self.data[o..o + self.channels as usize]
    }

    pub fn pixel_mut(&mut self, x: u32, y: u32) -> &mut [u8] {
        let o = self.offset(x, y);
        let c = self.channels as usize;
        &mut self.data[o..o + c]
    }

    fn row_bytes(&self) -> usize {
        self.width as usize * self.channels as usize
    }
}

/// Square frame produced by [`normalize_input`] and where the source image
/// sits inside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormalizedFrame {
    pub side: u32,
    /// Signed position of the source origin inside the square frame.
    pub offset_x: i64,
    pub offset_y: i64,
}

impl NormalizedFrame {
    pub fn new(width: u32, height: u32, circle_radius_px: Option<f64>) -> Self {
        let short = width.min(height);
        let side = match circle_radius_px {
            Some(r) if r.is_finite() && r > 0.0 => short.max((2.0 * r).round() as u32),
            _ => short,
        };
        Self {
            side,
            offset_x: (i64::from(side) - i64::from(width)).div_euclid(2),
            offset_y: (i64::from(side) - i64::from(height)).div_euclid(2),
        }
    }

    /// Camera of the normalized frame for a camera calibrated on the
    /// original image.
    pub fn camera(&self, cfg: &CameraConfig) -> Result<StereographicCamera> {
        let pp = cfg
            .principal_point
            .map(|[u, v]| PixelCoord::new(u + self.offset_x as f64, v + self.offset_y as f64));
        StereographicCamera::new(self.side, self.side, cfg.circle_radius_px, pp)
    }
}

/// Squares an input frame around its center.
///
/// Without a circle radius the longer axis is center-cropped to the shorter
/// one. With a radius whose diameter exceeds the short side (the circle is
/// truncated), the short axis is zero-padded symmetrically to the diameter.
pub fn normalize_input(img: &Image, circle_radius_px: Option<f64>) -> Image {
    let frame = NormalizedFrame::new(img.width, img.height, circle_radius_px);
    let side = frame.side;
    if img.width == side && img.height == side {
        return img.clone();
    }
    let c = img.channels as usize;
    let mut out = vec![0u8; side as usize * side as usize * c];
    let (off_x, off_y) = (frame.offset_x, frame.offset_y);
    let copy_x0 = off_x.max(0) as usize;
    let src_x0 = (-off_x).max(0) as usize;
    let copy_w = (img.width as usize - src_x0).min(side as usize - copy_x0);
    for y in 0..side as i64 {
        let sy = y - off_y;
        if sy < 0 || sy >= i64::from(img.height) {
            continue;
        }
        let src = img.offset(src_x0 as u32, sy as u32);
        let dst = (y as usize * side as usize + copy_x0) * c;
        out[dst..dst + copy_w * c].copy_from_slice(&img.data[src..src + copy_w * c]);
    }
    Image {
        width: side,
        height: side,
        channels: img.channels,
        data: out,
    }
}

/// Fisheye sampling position of every panorama pixel.
#[derive(Debug, Clone)]
pub struct RemapTable {
    spec: EquirectSpec,
    source_size: (u32, u32),
    samples: Vec<Option<PixelCoord>>,
}

impl RemapTable {
    pub fn spec(&self) -> &EquirectSpec {
        &self.spec
    }

    /// Size of the fisheye image the table samples from.
    pub fn source_size(&self) -> (u32, u32) {
        self.source_size
    }

    /// Sample for panorama pixel `(col, row)`; `None` is the out-of-circle
    /// sentinel.
    pub fn sample(&self, col: u32, row: u32) -> Option<PixelCoord> {
        self.samples[row as usize * self.spec.width() as usize + col as usize]
    }

    pub fn samples(&self) -> &[Option<PixelCoord>] {
        &self.samples
    }

    pub fn sentinel_count(&self) -> usize {
        self.samples.iter().filter(|s| s.is_none()).count()
    }
}

pub fn build_remap_table(cam: &StereographicCamera, spec: &EquirectSpec) -> RemapTable {
    let w = spec.width() as usize;
    let mut samples = vec![None; w * spec.height() as usize];
    samples
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(row, line)| {
            for (col, slot) in line.iter_mut().enumerate() {
                let p = spec.sphere_at(col as f64 + 0.5, row as f64 + 0.5);
                let px = cam.project(p);
                *slot = cam.contains(px).then_some(px);
            }
        });
    RemapTable {
        spec: *spec,
        source_size: cam.image_size(),
        samples,
    }
}

/// Resamples a normalized fisheye image into the table's panorama with
/// bilinear interpolation. Sentinels and samples outside the image are zero.
pub fn remap_image(img: &Image, table: &RemapTable) -> Result<Image> {
    if (img.width, img.height) != table.source_size {
        return Err(invalid(format!(
            "image is {}x{} but the remap table expects {}x{}",
            img.width, img.height, table.source_size.0, table.source_size.1
        )));
    }
    let w = table.spec.width();
    let h = table.spec.height();
    let c = img.channels as usize;
    let mut out = Image::zeros(w, h, img.channels)?;
    let row_bytes = out.row_bytes();
    out.data
        .par_chunks_mut(row_bytes)
        .zip(table.samples.par_chunks(w as usize))
        .for_each(|(line, samples)| {
            let mut acc = [0.0f64; 3];
            for (px, sample) in line.chunks_exact_mut(c).zip(samples) {
                if let Some(s) = sample {
                    if bilinear(img, *s, &mut acc[..c]) {
                        for (dst, v) in px.iter_mut().zip(&acc[..c]) {
                            *dst = v.round().clamp(0.0, 255.0) as u8;
                        }
                    }
                }
            }
        });
    Ok(out)
}

/// Bilinear sample at a continuous coordinate. Taps beyond the border
/// replicate the edge; points outside the image return `false`.
fn bilinear(img: &Image, at: PixelCoord, out: &mut [f64]) -> bool {
    let (w, h) = (f64::from(img.width), f64::from(img.height));
    if !(0.0..=w).contains(&at.u) || !(0.0..=h).contains(&at.v) {
        return false;
    }
    let x = at.u - 0.5;
    let y = at.v - 0.5;
    let x0f = x.floor();
    let y0f = y.floor();
    let fx = x - x0f;
    let fy = y - y0f;
    let max_x = i64::from(img.width) - 1;
    let max_y = i64::from(img.height) - 1;
    let x0 = (x0f as i64).clamp(0, max_x) as u32;
    let x1 = (x0f as i64 + 1).clamp(0, max_x) as u32;
    let y0 = (y0f as i64).clamp(0, max_y) as u32;
    let y1 = (y0f as i64 + 1).clamp(0, max_y) as u32;
    let (p00, p10, p01, p11) = (
        img.pixel(x0, y0),
        img.pixel(x1, y0),
        img.pixel(x0, y1),
        img.pixel(x1, y1),
    );
    for (ch, o) in out.iter_mut().enumerate() {
        let top = f64::from(p00[ch]) * (1.0 - fx) + f64::from(p10[ch]) * fx;
        let bottom = f64::from(p01[ch]) * (1.0 - fx) + f64::from(p11[ch]) * fx;
        *o = top * (1.0 - fy) + bottom * fy;
    }
    true
}
