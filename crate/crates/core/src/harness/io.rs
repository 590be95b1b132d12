//! Binary PPM/PGM input and output.
//!
//! Colour frames are 8-bit P6. Depth maps and error heatmaps are 16-bit P5
//! (big-endian samples) with a sidecar `<file>.scale` text file holding
//! `meters_per_unit = <value>`. Label maps are 16-bit P5 with 0 for
//! background and `id + 1` for instances.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{DepthMap, ErrorMap, Grid, Image, PixelMask};
use crate::temporal::InstanceSet;

/// Default depth quantization: 2 mm per unit, 131 m range.
pub const DEPTH_METERS_PER_UNIT: f64 = 0.002;

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Header fields and the offset of the first sample byte.
fn parse_header(bytes: &[u8], magic: &[u8; 2], path: &Path) -> Result<(usize, usize, u32, usize)> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(format_err(
            path,
            format!("expected magic {}", String::from_utf8_lossy(magic)),
        ));
    }
    let mut pos = 2;
    let mut fields = [0u64; 3];
    for f in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|b| *b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(format_err(path, "truncated or non-numeric header"));
        }
        *f = std::str::from_utf8(&bytes[start..pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| format_err(path, "header value out of range"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(format_err(path, "missing whitespace after header"));
    }
    let [w, h, maxval] = fields;
    if w == 0 || h == 0 || maxval == 0 || maxval > 65535 {
        return Err(format_err(path, format!("invalid header {w}x{h} maxval {maxval}")));
    }
    Ok((w as usize, h as usize, maxval as u32, pos + 1))
}

fn quantize8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// P6 with maxval 255; invalid pixels are written black.
pub fn encode_ppm(img: &Image) -> Vec<u8> {
    let (w, h) = img.dims();
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    for (p, v) in img.pixels.as_slice().iter().zip(img.valid.as_slice()) {
        for c in p {
            out.push(if *v { quantize8(*c) } else { 0 });
        }
    }
    out
}

pub fn decode_ppm(bytes: &[u8], path: &Path) -> Result<Image> {
    let (w, h, maxval, start) = parse_header(bytes, b"P6", path)?;
    if maxval > 255 {
        return Err(format_err(path, "only 8-bit PPM is supported"));
    }
    let body = &bytes[start..];
    if body.len() != w * h * 3 {
        return Err(format_err(
            path,
            format!("expected {} sample bytes, found {}", w * h * 3, body.len()),
        ));
    }
    let m = maxval as f64;
    let px = body
        .chunks_exact(3)
        .map(|c| [c[0] as f64 / m, c[1] as f64 / m, c[2] as f64 / m])
        .collect();
    Ok(Image::new(Grid::from_vec(w, h, px)?))
}

pub fn write_ppm(path: &Path, img: &Image) -> Result<()> {
    Ok(fs::write(path, encode_ppm(img))?)
}

pub fn read_ppm(path: &Path) -> Result<Image> {
    decode_ppm(&read_bytes(path)?, path)
}

/// P5 with maxval 65535.
pub fn encode_pgm16(width: usize, height: usize, samples: &[u16]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for s in samples {
        out.extend_from_slice(&s.to_be_bytes());
    }
    out
}

pub fn decode_pgm16(bytes: &[u8], path: &Path) -> Result<Grid<u16>> {
    let (w, h, maxval, start) = parse_header(bytes, b"P5", path)?;
    let body = &bytes[start..];
    let samples: Vec<u16> = if maxval < 256 {
        body.iter().map(|b| *b as u16).collect()
    } else {
        if body.len() % 2 != 0 {
            return Err(format_err(path, "odd number of 16-bit sample bytes"));
        }
        body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    };
    if samples.len() != w * h {
        return Err(format_err(
            path,
            format!("expected {} samples, found {}", w * h, samples.len()),
        ));
    }
    Grid::from_vec(w, h, samples)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| format_err(path, format!("cannot read: {e}")))
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".scale");
    PathBuf::from(s)
}

fn write_scaled(path: &Path, width: usize, height: usize, samples: &[u16], meters_per_unit: f64) -> Result<()> {
    fs::write(path, encode_pgm16(width, height, samples))?;
    fs::write(sidecar(path), format!("meters_per_unit = {meters_per_unit:?}\n"))?;
    Ok(())
}

fn read_scale(path: &Path) -> Result<f64> {
    let p = sidecar(path);
    let text = fs::read_to_string(&p).map_err(|e| format_err(&p, format!("cannot read scale sidecar: {e}")))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| format_err(&p, e.to_string()))?;
    match table.get("meters_per_unit").and_then(|v| v.as_float()) {
        Some(s) if s > 0.0 && s.is_finite() => Ok(s),
        _ => Err(format_err(&p, "missing or non-positive meters_per_unit")),
    }
}

/// Depth as 16-bit samples of `meters_per_unit`; values outside the representable range are a domain error.
pub fn write_depth_pgm(path: &Path, depth: &DepthMap, meters_per_unit: f64) -> Result<()> {
    if !(meters_per_unit > 0.0 && meters_per_unit.is_finite()) {
        return Err(Error::domain(format!(
            "meters_per_unit must be positive, got {meters_per_unit}"
        )));
    }
    let samples = depth
        .as_slice()
        .iter()
        .map(|d| {
            let u = (d / meters_per_unit).round();
            if (0.0..=65535.0).contains(&u) {
                Ok(u as u16)
            } else {
                Err(Error::domain(format!(
                    "depth {d} m not representable at {meters_per_unit} m per unit"
                )))
            }
        })
        .collect::<Result<Vec<u16>>>()?;
    write_scaled(path, depth.width(), depth.height(), &samples, meters_per_unit)
}

/// Depth map and its scale; zero samples are returned as 0 m.
pub fn read_depth_pgm(path: &Path) -> Result<(DepthMap, f64)> {
    let scale = read_scale(path)?;
    let g = decode_pgm16(&read_bytes(path)?, path)?;
    Ok((g.map(|u| *u as f64 * scale), scale))
}

/// Heatmap of an error map over `[0, max_error]`; invalid pixels are 0.
pub fn write_error_pgm(path: &Path, error: &ErrorMap, max_error: f64) -> Result<()> {
    if !(max_error > 0.0) {
        return Err(Error::domain("max_error must be positive"));
    }
    let (w, h) = error.dims();
    let unit = max_error / 65535.0;
    let samples: Vec<u16> = error
        .values
        .as_slice()
        .iter()
        .zip(error.valid.as_slice())
        .map(|(e, v)| {
            if *v {
                (e / unit).round().clamp(0.0, 65535.0) as u16
            } else {
                0
            }
        })
        .collect();
    write_scaled(path, w, h, &samples, unit)
}

/// 0 for background, `id + 1` for each instance (later instances win on overlap).
pub fn label_map(width: usize, height: usize, instances: &InstanceSet) -> Grid<u16> {
    let mut out = Grid::filled(width, height, 0u16);
    for inst in instances.iter() {
        for (o, m) in out.as_mut_slice().iter_mut().zip(inst.mask.as_slice()) {
            if *m {
                *o = (inst.id + 1).min(65535) as u16;
            }
        }
    }
    out
}

pub fn write_labels_pgm(path: &Path, labels: &Grid<u16>) -> Result<()> {
    Ok(fs::write(
        path,
        encode_pgm16(labels.width(), labels.height(), labels.as_slice()),
    )?)
}

pub fn write_mask_pgm(path: &Path, mask: &PixelMask) -> Result<()> {
    let labels = mask.map(|m| u16::from(*m));
    write_labels_pgm(path, &labels)
}
