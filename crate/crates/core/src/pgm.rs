//! Binary 8-bit PGM (P5) reading and writing.
//!
//! Pixels are mapped to `[0, 1]` by dividing by 255; writing clamps to
//! `[0, 1]` and rounds half up.

use std::fs;
use std::path::Path;

use crate::error::{Error, PgmError, Result};
use crate::tensor::Tensor;

/// Decodes a P5 byte stream into an `[h, w]` tensor.
pub fn decode_pgm(bytes: &[u8]) -> Result<Tensor, PgmError> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos).ok_or_else(|| PgmError::MalformedHeader("missing magic number".into()))?;
    if magic != b"P5" {
        return Err(PgmError::UnsupportedVariant(String::from_utf8_lossy(magic).into_owned()));
    }
    let mut field = |name: &str| -> Result<u32, PgmError> {
        let tok = next_token(bytes, &mut pos).ok_or_else(|| PgmError::MalformedHeader(format!("missing {name}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| PgmError::MalformedHeader(format!("{name} is not an integer: {:?}", String::from_utf8_lossy(tok))))
    };
    let width = field("width")? as usize;
    let height = field("height")? as usize;
    let maxval = field("maxval")?;
    if width == 0 || height == 0 {
        return Err(PgmError::MalformedHeader(format!("zero extent {width}x{height}")));
    }
    if maxval != 255 {
        return Err(PgmError::UnsupportedMaxval(maxval));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(PgmError::MalformedHeader("missing whitespace after maxval".into())),
    }
    let expected = width * height;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(PgmError::Truncated {
            expected,
            found: payload.len(),
        });
    }
    let data = payload[..expected].iter().map(|&b| b as f64 / 255.0).collect();
    Ok(Tensor::new(&[height, width], data).expect("extents checked above"))
}

/// Header tokens are whitespace separated; `#` starts a comment to end of line.
fn next_token<'b>(bytes: &'b [u8], pos: &mut usize) -> Option<&'b [u8]> {
    loop {
        match bytes.get(*pos)? {
            b if b.is_ascii_whitespace() => *pos += 1,
            b'#' => {
                while *bytes.get(*pos)? != b'\n' {
                    *pos += 1;
                }
            }
            _ => break,
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
        *pos += 1;
    }
    Some(&bytes[start..*pos])
}

/// 8-bit code for an intensity: clamp to `[0, 1]`, scale, round half up.
pub fn quantize_byte(v: f64) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * 255.0 + 0.5).floor() as u8
}

/// Rounds every value to the nearest of the 256 levels a P5 file can hold.
pub fn quantize(image: &Tensor) -> Tensor {
    image.map(|v| quantize_byte(v) as f64 / 255.0)
}

/// Encodes an `[h, w]` tensor as P5.
pub fn encode_pgm(image: &Tensor) -> Result<Vec<u8>> {
    let (h, w) = match image.shape() {
        [h, w] => (*h, *w),
        other => return Err(Error::shape("encode_pgm", format!("expected [h, w], got {other:?}"))),
    };
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(image.data().iter().map(|&v| quantize_byte(v)));
    Ok(out)
}

pub fn load_pgm(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_pgm(&bytes)?)
}

pub fn save_pgm(image: &Tensor, path: &Path) -> Result<()> {
    let bytes = encode_pgm(image)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
