//! Frame transport: each row run-length encoded as `(count, palette index)`
//! byte pairs (runs never cross rows, count 1..=255), rows concatenated,
//! then standard base64.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use thiserror::Error;

use ramhack::Frame;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RleError {
    #[error("invalid base64: {0}")]
    Base64(String),
    #[error("odd byte count {0}")]
    OddLength(usize),
    #[error("zero-length run at byte {0}")]
    ZeroRun(usize),
    #[error("run crosses the end of row {0}")]
    RowOverflow(usize),
    #[error("decoded {got} rows, expected {expected}")]
    RowCount { got: usize, expected: usize },
}

pub fn encode_rows(pixels: &[u8], width: usize) -> Vec<u8> {
    let mut out = Vec::new();
    for row in pixels.chunks(width) {
        let mut i = 0;
        while i < row.len() {
            let v = row[i];
            let mut n = 1;
            while i + n < row.len() && row[i + n] == v && n < 255 {
                n += 1;
            }
            out.push(n as u8);
            out.push(v);
            i += n;
        }
    }
    out
}

pub fn decode_rows(bytes: &[u8], width: usize, height: usize) -> Result<Vec<u8>, RleError> {
    if !bytes.len().is_multiple_of(2) {
        return Err(RleError::OddLength(bytes.len()));
    }
    let mut out = Vec::with_capacity(width * height);
    let mut in_row = 0;
    for (k, pair) in bytes.chunks(2).enumerate() {
        let (n, v) = (pair[0] as usize, pair[1]);
        if n == 0 {
            return Err(RleError::ZeroRun(2 * k));
        }
        if in_row + n > width {
            return Err(RleError::RowOverflow(out.len() / width));
        }
        out.extend(std::iter::repeat_n(v, n));
        in_row = (in_row + n) % width;
    }
    let rows = out.len() / width;
    if in_row != 0 || rows != height {
        return Err(RleError::RowCount {
            got: rows,
            expected: height,
        });
    }
    Ok(out)
}

pub fn encode_frame(frame: &Frame) -> String {
    STANDARD.encode(encode_rows(frame.pixels(), frame.width()))
}

/// Palette indices, row-major.
pub fn decode_frame(text: &str, width: usize, height: usize) -> Result<Vec<u8>, RleError> {
    let bytes = STANDARD.decode(text).map_err(|e| RleError::Base64(e.to_string()))?;
    decode_rows(&bytes, width, height)
}
