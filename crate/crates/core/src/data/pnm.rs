//! Binary netpbm: 8-bit grayscale PGM (P5) and RGB PPM (P6).

use std::fs;
use std::path::Path;

use super::{DataError, Result};

/// Round-to-nearest 8-bit quantization of a `[0, 1]` value.
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_pgm(width: usize, height: usize, pixels: &[f32]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(pixels.iter().map(|&v| quantize(v)));
    out
}

pub fn encode_ppm(width: usize, height: usize, rgb: &[[u8; 3]]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    for px in rgb {
        out.extend_from_slice(px);
    }
    out
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: usize,
    offset: usize,
}

fn parse_header(bytes: &[u8]) -> std::result::Result<Header, String> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err("missing netpbm magic".into());
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(format!("header field {} is not a number", ["width", "height", "maxval"][i]));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| "header number out of range".to_string())?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("missing whitespace after maxval".into());
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(format!("bad dimensions {width}x{height}"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    Ok(Header { magic, width, height, maxval, offset: pos + 1 })
}

/// Decodes a P5 image into `[0, 1]` floats (value / maxval).
pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<f32>), String> {
    let h = parse_header(bytes)?;
    if &h.magic != b"P5" {
        return Err(format!("expected P5, found {}", String::from_utf8_lossy(&h.magic)));
    }
    let n = h.width * h.height;
    let payload = &bytes[h.offset..];
    if payload.len() != n {
        return Err(format!("payload has {} bytes, expected {n}", payload.len()));
    }
    let scale = h.maxval as f32;
    Ok((h.width, h.height, payload.iter().map(|&b| b as f32 / scale).collect()))
}

pub fn decode_ppm(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<[u8; 3]>), String> {
    let h = parse_header(bytes)?;
    if &h.magic != b"P6" {
        return Err(format!("expected P6, found {}", String::from_utf8_lossy(&h.magic)));
    }
    let n = h.width * h.height;
    let payload = &bytes[h.offset..];
    if payload.len() != 3 * n {
        return Err(format!("payload has {} bytes, expected {}", payload.len(), 3 * n));
    }
    Ok((h.width, h.height, payload.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()))
}

pub fn save_pgm(path: &Path, width: usize, height: usize, pixels: &[f32]) -> Result<()> {
    write(path, &encode_pgm(width, height, pixels))
}

pub fn save_ppm(path: &Path, width: usize, height: usize, rgb: &[[u8; 3]]) -> Result<()> {
    write(path, &encode_ppm(width, height, rgb))
}

pub fn load_pgm(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let bytes = read(path)?;
    decode_pgm(&bytes).map_err(|msg| DataError::Image { path: path.to_path_buf(), msg })
}

pub fn load_ppm(path: &Path) -> Result<(usize, usize, Vec<[u8; 3]>)> {
    let bytes = read(path)?;
    decode_ppm(&bytes).map_err(|msg| DataError::Image { path: path.to_path_buf(), msg })
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}
