//! PNG (and PPM/PGM fallback) decoding and encoding for [`Image`].

use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};

use crate::error::Result;
use crate::remap::Image;

/// Loads an 8-bit gray or RGB image. Alpha is dropped and other layouts are
/// converted to RGB.
pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let dynamic = image::open(path)?;
    from_dynamic(dynamic)
}

pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    from_dynamic(image::load_from_memory(bytes)?)
}

fn from_dynamic(dynamic: DynamicImage) -> Result<Image> {
    let (w, h) = (dynamic.width(), dynamic.height());
    match dynamic {
        DynamicImage::ImageLuma8(buf) => Image::new(w, h, 1, buf.into_raw()),
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => {
            Image::new(w, h, 1, dynamic.to_luma8().into_raw())
        }
        other => Image::new(w, h, 3, other.to_rgb8().into_raw()),
    }
}

pub fn encode_png(img: &Image) -> Result<Vec<u8>> {
    encode(img, ImageFormat::Png)
}

/// Encodes as binary PGM (gray) or PPM (RGB).
pub fn encode_pnm(img: &Image) -> Result<Vec<u8>> {
    let (subtype, color) = if img.channels() == 1 {
        (PnmSubtype::Graymap(SampleEncoding::Binary), ExtendedColorType::L8)
    } else {
        (PnmSubtype::Pixmap(SampleEncoding::Binary), ExtendedColorType::Rgb8)
    };
    let mut out = Vec::new();
    PnmEncoder::new(&mut out)
        .with_subtype(subtype)
        .write_image(img.data(), img.width(), img.height(), color)?;
    Ok(out)
}

fn encode(img: &Image, format: ImageFormat) -> Result<Vec<u8>> {
    let color = if img.channels() == 1 {
        ExtendedColorType::L8
    } else {
        ExtendedColorType::Rgb8
    };
    let mut out = Cursor::new(Vec::new());
    image::write_buffer_with_format(&mut out, img.data(), img.width(), img.height(), color, format)?;
    Ok(out.into_inner())
}
