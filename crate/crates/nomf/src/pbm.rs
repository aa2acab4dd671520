//! PBM serialization of binary frames.
//!
//! Both P1 (ASCII) and P4 (packed, MSB-first within a byte, rows padded to a
//! byte boundary) are supported. The frame window is carried in a header
//! comment so a written frame reads back identically.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::framer::{EbbiFrame, DEFAULT_WINDOW_LEN_US};
use crate::geom::SensorGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbmFormat {
    /// ASCII `P1`.
    Plain,
    /// Packed-bit `P4`.
    Raw,
}

#[derive(Debug, Error)]
pub enum PbmError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a PBM file: bad magic `{0}`")]
    BadMagic(String),
    #[error("malformed PBM header")]
    BadHeader,
    #[error("unexpected end of pixel data")]
    ShortData,
    #[error("invalid pixel character `{0}`")]
    BadPixel(char),
}

fn window_comment(frame: &EbbiFrame) -> String {
    format!("# window_start={} window_len={}\n", frame.window_start, frame.window_len)
}

pub fn write_pbm<W: Write>(
    writer: &mut W,
    frame: &EbbiFrame,
    format: PbmFormat,
) -> Result<(), PbmError> {
    match format {
        PbmFormat::Plain => write_p1(writer, frame),
        PbmFormat::Raw => write_p4(writer, frame),
    }
}

fn write_p1<W: Write>(writer: &mut W, frame: &EbbiFrame) -> Result<(), PbmError> {
    write!(writer, "P1\n{}{} {}\n", window_comment(frame), frame.width(), frame.height())?;
    for y in 0..frame.height() {
        let mut line = String::with_capacity(frame.width() as usize * 2);
        for x in 0..frame.width() {
            if x > 0 {
                line.push(' ');
            }
            line.push(if frame.get(x, y) == 1 { '1' } else { '0' });
        }
        line.push('\n');
        writer.write_all(line.as_bytes())?;
    }
    Ok(())
}

fn write_p4<W: Write>(writer: &mut W, frame: &EbbiFrame) -> Result<(), PbmError> {
    write!(writer, "P4\n{}{} {}\n", window_comment(frame), frame.width(), frame.height())?;
    let row_bytes = (frame.width() as usize).div_ceil(8);
    let mut row = vec![0u8; row_bytes];
    for y in 0..frame.height() {
        row.fill(0);
        for x in 0..frame.width() {
            if frame.get(x, y) == 1 {
                row[x as usize / 8] |= 0x80 >> (x % 8);
            }
        }
        writer.write_all(&row)?;
    }
    Ok(())
}

/// Read a P1 or P4 frame, restoring the window metadata when present.
pub fn read_pbm<R: BufRead>(reader: &mut R) -> Result<EbbiFrame, PbmError> {
    let mut data = Vec::new();
    reader.read_to_end(&mut data)?;
    let mut pos = 0usize;

    let magic = next_token(&data, &mut pos, &mut None).ok_or(PbmError::BadHeader)?;
    let format = match magic.as_str() {
        "P1" => PbmFormat::Plain,
        "P4" => PbmFormat::Raw,
        other => return Err(PbmError::BadMagic(other.to_string())),
    };

    let mut window: Option<(u32, u32)> = None;
    let width: u16 = next_token(&data, &mut pos, &mut window)
        .ok_or(PbmError::BadHeader)?
        .parse()
        .map_err(|_| PbmError::BadHeader)?;
    let height: u16 = next_token(&data, &mut pos, &mut window)
        .ok_or(PbmError::BadHeader)?
        .parse()
        .map_err(|_| PbmError::BadHeader)?;
    let geometry = SensorGeometry::new(width, height);
    let (window_start, window_len) = window.unwrap_or((0, DEFAULT_WINDOW_LEN_US));

    let mut bits = vec![0u8; geometry.pixel_count()];
    match format {
        PbmFormat::Plain => {
            let mut idx = 0;
            let mut i = pos;
            while i < data.len() {
                let c = data[i] as char;
                i += 1;
                match c {
                    '0' | '1' => {
                        if idx >= bits.len() {
                            return Err(PbmError::BadHeader);
                        }
                        bits[idx] = (c == '1') as u8;
                        idx += 1;
                    }
                    '#' => {
                        while i < data.len() && data[i] != b'\n' {
                            i += 1;
                        }
                    }
                    c if c.is_whitespace() => {}
                    c => return Err(PbmError::BadPixel(c)),
                }
            }
            if idx != bits.len() {
                return Err(PbmError::ShortData);
            }
        }
        PbmFormat::Raw => {
            // exactly one whitespace byte separates the header from the data
            pos += 1;
            let row_bytes = (width as usize).div_ceil(8);
            if data.len() < pos + row_bytes * height as usize {
                return Err(PbmError::ShortData);
            }
            for y in 0..height as usize {
                let row = &data[pos + y * row_bytes..pos + (y + 1) * row_bytes];
                for x in 0..width as usize {
                    bits[y * width as usize + x] = (row[x / 8] >> (7 - x % 8)) & 1;
                }
            }
        }
    }
    Ok(EbbiFrame::from_bits(geometry, bits, window_start, window_len))
}

/// Scan the next whitespace-delimited header token, capturing window
/// metadata from comment lines along the way. Leaves `pos` at the byte after
/// the token.
fn next_token(data: &[u8], pos: &mut usize, window: &mut Option<(u32, u32)>) -> Option<String> {
    let mut token = String::new();
    while *pos < data.len() {
        let c = data[*pos] as char;
        if c == '#' && token.is_empty() {
            let start = *pos;
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
            let comment = String::from_utf8_lossy(&data[start..*pos]);
            parse_window_comment(&comment, window);
            continue;
        }
        if c.is_whitespace() {
            if token.is_empty() {
                *pos += 1;
                continue;
            }
            return Some(token);
        }
        token.push(c);
        *pos += 1;
    }
    if token.is_empty() {
        None
    } else {
        Some(token)
    }
}

fn parse_window_comment(comment: &str, window: &mut Option<(u32, u32)>) {
    let mut start = None;
    let mut len = None;
    for part in comment.trim_start_matches('#').split_whitespace() {
        if let Some(v) = part.strip_prefix("window_start=") {
            start = v.parse().ok();
        } else if let Some(v) = part.strip_prefix("window_len=") {
            len = v.parse().ok();
        }
    }
    if let (Some(s), Some(l)) = (start, len) {
        *window = Some((s, l));
    }
}
