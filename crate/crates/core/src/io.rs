//! File formats: endmember CSV, header + raw band-sequential images,
//! PGM detection maps and ground-truth tables.
//!
//! Endmember CSV has no header: one line per band, one comma-separated
//! field per endmember, dot decimal separator. Values are written with the
//! shortest representation that parses back to the same `f64`.
//!
//! An image is a text header of `key: value` lines
//!
//! ```text
//! samples: 2
//! bands: 3
//! data_type: float32
//! byte_order: little
//! interleave: bsq
//! ```
//!
//! next to a raw file with the same stem and a `.raw` extension holding
//! `samples * bands` little-endian `f32` values, band after band. Optional
//! `width` and `height` keys record the spatial layout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scene::{DetectionMap, EndmemberMatrix, GroundTruth, MixLabel, SceneImage};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Parse headerless endmember CSV text.
pub fn parse_endmembers(text: &str, context: &str) -> Result<EndmemberMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|e| Error::Format {
                    context: context.to_string(),
                    line: i + 1,
                    message: format!("bad number `{}`: {e}", f.trim()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Format {
                    context: context.to_string(),
                    line: i + 1,
                    message: format!("row {} has {} fields, expected {}", i + 1, row.len(), first.len()),
                });
            }
        }
        if let Some(v) = row.iter().find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::Validation(format!(
                "{context}: row {} holds invalid reflectance {v}",
                i + 1
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Format {
            context: context.to_string(),
            line: 1,
            message: "empty endmember file".into(),
        });
    }
    let cols = rows[0].len();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    EndmemberMatrix::new(DMatrix::from_row_slice(rows.len(), cols, &flat))
}

pub fn load_endmembers(path: impl AsRef<Path>) -> Result<EndmemberMatrix> {
    let path = path.as_ref();
    parse_endmembers(&read_text(path)?, &path.display().to_string())
}

pub fn format_endmembers(m: &EndmemberMatrix) -> String {
    let mut out = String::new();
    for row in m.matrix().row_iter() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn save_endmembers(m: &EndmemberMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), format_endmembers(m).as_bytes())
}

/// Companion raw-data path for an image header.
pub fn raw_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("raw")
}

fn parse_header(text: &str, context: &str) -> Result<BTreeMap<String, String>> {
    let mut keys = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once(':').ok_or_else(|| Error::Format {
            context: context.to_string(),
            line: i + 1,
            message: format!("expected `key: value`, got `{line}`"),
        })?;
        keys.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
    }
    Ok(keys)
}

fn header_usize(keys: &BTreeMap<String, String>, key: &str, context: &str) -> Result<usize> {
    let v = keys.get(key).ok_or_else(|| Error::MissingKey(key.to_string()))?;
    v.parse().map_err(|_| Error::Format {
        context: context.to_string(),
        line: 0,
        message: format!("`{key}` is not a nonnegative integer: `{v}`"),
    })
}

/// Load an image from its header path; the raw data sit next to it.
pub fn load_image(header_path: impl AsRef<Path>) -> Result<SceneImage> {
    let header_path = header_path.as_ref();
    let context = header_path.display().to_string();
    let keys = parse_header(&read_text(header_path)?, &context)?;
    let samples = header_usize(&keys, "samples", &context)?;
    let bands = header_usize(&keys, "bands", &context)?;
    for (key, expected) in [("data_type", "float32"), ("byte_order", "little"), ("interleave", "bsq")] {
        let v = keys.get(key).ok_or_else(|| Error::MissingKey(key.to_string()))?;
        if !v.eq_ignore_ascii_case(expected) {
            return Err(Error::Unsupported {
                key: key.to_string(),
                value: v.clone(),
            });
        }
    }
    let raw = raw_path(header_path);
    let bytes = fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
    let expected = (samples * bands * 4) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            expected,
            found: bytes.len() as u64,
        });
    }
    // band-sequential: all pixels of band 0, then band 1, ...
    let mut pixels = DMatrix::zeros(bands, samples);
    for (k, chunk) in bytes.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        pixels[(k / samples, k % samples)] = f64::from(v);
    }
    let (width, height) = match (keys.get("width"), keys.get("height")) {
        (Some(_), Some(_)) => (
            header_usize(&keys, "width", &context)?,
            header_usize(&keys, "height", &context)?,
        ),
        _ => (samples, 1),
    };
    SceneImage::with_layout(pixels, width, height)
}

pub fn format_header(image: &SceneImage) -> String {
    let mut h = String::new();
    let _ = writeln!(h, "samples: {}", image.pixel_count());
    let _ = writeln!(h, "bands: {}", image.band_count());
    let _ = writeln!(h, "data_type: float32");
    let _ = writeln!(h, "byte_order: little");
    let _ = writeln!(h, "interleave: bsq");
    let _ = writeln!(h, "width: {}", image.width());
    let _ = writeln!(h, "height: {}", image.height());
    h
}

/// Write the header and its `.raw` companion. Values are narrowed to `f32`.
pub fn save_image(image: &SceneImage, header_path: impl AsRef<Path>) -> Result<()> {
    let header_path = header_path.as_ref();
    let px = image.pixels();
    let mut bytes = Vec::with_capacity(px.len() * 4);
    for band in 0..image.band_count() {
        for n in 0..image.pixel_count() {
            bytes.extend_from_slice(&(px[(band, n)] as f32).to_le_bytes());
        }
    }
    write_bytes(header_path, format_header(image).as_bytes())?;
    write_bytes(&raw_path(header_path), &bytes)
}

/// Objects whose spectral axis can be subsampled.
pub trait Decimate: Sized {
    /// Keep bands `0, factor, 2*factor, ...`; the result has `ceil(L / factor)` bands.
    fn decimate_bands(&self, factor: usize) -> Result<Self>;
}

fn kept_bands(bands: usize, factor: usize) -> Result<Vec<usize>> {
    if factor == 0 {
        return Err(Error::Argument("decimation factor must be positive".into()));
    }
    Ok((0..bands).step_by(factor).collect())
}

fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

impl Decimate for DMatrix<f64> {
    /// Rows are bands.
    fn decimate_bands(&self, factor: usize) -> Result<Self> {
        Ok(select_rows(self, &kept_bands(self.nrows(), factor)?))
    }
}

impl Decimate for EndmemberMatrix {
    fn decimate_bands(&self, factor: usize) -> Result<Self> {
        EndmemberMatrix::new(self.matrix().decimate_bands(factor)?)
    }
}

impl Decimate for SceneImage {
    fn decimate_bands(&self, factor: usize) -> Result<Self> {
        let pixels = self.pixels().decimate_bands(factor)?;
        let mut out = SceneImage::with_layout(pixels, self.width(), self.height())?;
        if let Some(gt) = &self.ground_truth {
            out = out.with_ground_truth(GroundTruth {
                labels: gt.labels.clone(),
                abundances: gt.abundances.clone(),
                endmembers: gt.endmembers.decimate_bands(factor)?,
                eta: gt.eta.clone(),
            })?;
        }
        Ok(out)
    }
}

/// Binary PGM (P5, maxval 255), row-major: linear 255, nonlinear 0, unclassified 128.
pub fn encode_detection_map(map: &DetectionMap, width: usize, height: usize) -> Result<Vec<u8>> {
    if width * height != map.len() {
        return Err(Error::Argument(format!(
            "{width}x{height} map cannot hold {} pixels",
            map.len()
        )));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(map.labels.iter().map(|l| l.pgm_level()));
    Ok(out)
}

pub fn save_detection_map(
    map: &DetectionMap,
    width: usize,
    height: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let bytes = encode_detection_map(map, width, height)?;
    write_bytes(path.as_ref(), &bytes)
}

/// Ground truth as CSV with header `pixel_index,label,eta_d,alpha_1..alpha_R`.
pub fn format_ground_truth(gt: &GroundTruth) -> String {
    let r = gt.abundances.nrows();
    let mut out = String::from("pixel_index,label,eta_d");
    for k in 1..=r {
        let _ = write!(out, ",alpha_{k}");
    }
    out.push('\n');
    for (n, label) in gt.labels.iter().enumerate() {
        let _ = write!(out, "{n},{label},{}", gt.eta[n]);
        for k in 0..r {
            let _ = write!(out, ",{}", gt.abundances[(k, n)]);
        }
        out.push('\n');
    }
    out
}

pub fn save_ground_truth(gt: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), format_ground_truth(gt).as_bytes())
}

/// Only the label column of a ground-truth table.
pub fn load_mix_labels(path: impl AsRef<Path>) -> Result<Vec<MixLabel>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let field = line.split(',').nth(1).ok_or_else(|| Error::Format {
            context: path.display().to_string(),
            line: i + 1,
            message: "missing label field".into(),
        })?;
        labels.push(field.trim().parse::<MixLabel>()?);
    }
    Ok(labels)
}

/// Read a ground-truth table; the endmember matrix comes from its own file.
pub fn load_ground_truth(path: impl AsRef<Path>, endmembers: EndmemberMatrix) -> Result<GroundTruth> {
    let path = path.as_ref();
    let context = path.display().to_string();
    let text = read_text(path)?;
    let r = endmembers.endmember_count();
    let mut labels = Vec::new();
    let mut eta = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = |message: String| Error::Format {
            context: context.clone(),
            line: i + 1,
            message,
        };
        if fields.len() != 3 + r {
            return Err(bad(format!("expected {} fields, found {}", 3 + r, fields.len())));
        }
        if fields[0].parse::<usize>().ok() != Some(labels.len()) {
            return Err(bad(format!("pixel index `{}` out of sequence", fields[0])));
        }
        labels.push(fields[1].parse::<MixLabel>()?);
        eta.push(fields[2].parse::<f64>().map_err(|e| bad(e.to_string()))?);
        for f in &fields[3..] {
            alphas.push(f.parse::<f64>().map_err(|e| bad(e.to_string()))?);
        }
    }
    let n = labels.len();
    Ok(GroundTruth {
        labels,
        abundances: DMatrix::from_column_slice(r, n, &alphas),
        endmembers,
        eta,
    })
}
