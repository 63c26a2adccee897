use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use fishpano::image_io::{encode_png, encode_pnm};
use fishpano::{Image, SignificanceMap};

use crate::config::usage;

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| e.error)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    write_atomic(path, &w.into_inner()?)
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

pub fn write_image(path: &Path, img: &Image) -> anyhow::Result<()> {
    let bytes = match extension(path).as_str() {
        "png" => encode_png(img)?,
        "pgm" | "ppm" | "pnm" => encode_pnm(img)?,
        other => return Err(usage(format!("unsupported image extension {other:?}; use png, pgm or ppm"))),
    };
    write_atomic(path, &bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFormat {
    Csv,
    Image,
}

pub fn map_format(path: &Path) -> anyhow::Result<MapFormat> {
    match extension(path).as_str() {
        "csv" => Ok(MapFormat::Csv),
        "png" | "pgm" => Ok(MapFormat::Image),
        other => Err(usage(format!("unsupported significance map extension {other:?}; use csv or png"))),
    }
}

pub fn read_map(path: &Path) -> anyhow::Result<SignificanceMap> {
    match map_format(path)? {
        MapFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .trim(csv::Trim::All)
                .from_path(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let mut values = Vec::new();
            let mut width = None;
            let mut height = 0;
            for record in reader.records() {
                let record = record?;
                if width.is_some_and(|w| w != record.len()) {
                    anyhow::bail!("{}: row {} has {} values, expected {}", path.display(), height + 1, record.len(), width.unwrap());
                }
                width = Some(record.len());
                for field in record.iter() {
                    let v: f64 = field
                        .parse()
                        .with_context(|| format!("{}: row {}: {field:?} is not a number", path.display(), height + 1))?;
                    values.push(v);
                }
                height += 1;
            }
            Ok(SignificanceMap::new(height, width.unwrap_or(0), values)?)
        }
        MapFormat::Image => {
            let img = fishpano::image_io::read_image(path)?;
            if img.channels() != 1 {
                anyhow::bail!("{}: significance map images must be single-channel", path.display());
            }
            let values = img.data().iter().map(|&b| f64::from(b)).collect();
            Ok(SignificanceMap::new(img.height() as usize, img.width() as usize, values)?)
        }
    }
}

pub fn write_map(path: &Path, map: &SignificanceMap) -> anyhow::Result<()> {
    match map_format(path)? {
        MapFormat::Csv => {
            let mut out = String::new();
            for row in map.values().chunks(map.width()) {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                out.push_str(&line.join(","));
                out.push('\n');
            }
            write_atomic(path, out.as_bytes())
        }
        MapFormat::Image => {
            let saturated = map.values().iter().filter(|&&v| v > 255.0).count();
            if saturated > 0 {
                log::warn!("{saturated} values above 255 saturate in {}", path.display());
            }
            let data = map.values().iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect();
            let img = Image::new(map.width() as u32, map.height() as u32, 1, data)?;
            write_image(path, &img)
        }
    }
}

/// `out.csv` → `out.boosted.json`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("output");
    path.with_file_name(format!("{stem}{suffix}"))
}
