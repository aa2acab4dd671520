//! Software reference filters: overlapping binary median, non-overlap median
//! (NOMF), and the nearest-neighbour event filter (NN-filt).
//!
//! For a binary image the median of an `n x n` window is a majority vote: the
//! output is 1 iff the window holds at least `ceil(n^2 / 2)` ones. The
//! overlapping filter applies that vote per center pixel with stride 1; NOMF
//! partitions the image into `n x n` tiles (stride `n`) and writes the vote
//! of each tile to all of its pixels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event_io::Event;
use crate::framer::EbbiFrame;
use crate::geom::SensorGeometry;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("kernel side must be odd, got {0}")]
    EvenKernel(usize),
    #[error("NOMF kernel side must be 3 or 5, got {0}")]
    UnsupportedKernel(usize),
    #[error("frame geometries differ")]
    GeometryMismatch,
    #[error("events are not sorted by timestamp (index {index})")]
    Unsorted { index: usize },
    #[error("correlation window tau must be positive")]
    ZeroTau,
}

/// Kernel sides the hardware supports.
pub const SUPPORTED_KERNELS: [usize; 2] = [3, 5];

/// Majority threshold for a window of `count` pixels: `ceil(count / 2)`.
#[inline]
pub fn majority_threshold(count: usize) -> usize {
    count.div_ceil(2)
}

/// Overlapping binary median filter, stride 1, zero padding at the borders
/// (out-of-image pixels count as 0 against the full `n^2` threshold).
pub fn median_overlap(frame: &EbbiFrame, n: usize) -> Result<EbbiFrame, FilterError> {
    if n.is_multiple_of(2) {
        return Err(FilterError::EvenKernel(n));
    }
    let w = frame.width() as i32;
    let h = frame.height() as i32;
    let r = (n / 2) as i32;
    let threshold = majority_threshold(n * n);
    let mut out = EbbiFrame::zeros(frame.geometry(), frame.window_start, frame.window_len);
    for y in 0..h {
        for x in 0..w {
            let mut ones = 0usize;
            for dy in -r..=r {
                let yy = y + dy;
                if yy < 0 || yy >= h {
                    continue;
                }
                for dx in -r..=r {
                    let xx = x + dx;
                    if xx < 0 || xx >= w {
                        continue;
                    }
                    ones += frame.get(xx as u16, yy as u16) as usize;
                }
            }
            if ones >= threshold {
                out.set(x as u16, y as u16, 1);
            }
        }
    }
    Ok(out)
}

/// Iterator over the `n`-stride tiles of a frame, anchored at (0,0). Edge
/// tiles are truncated when the width or height is not divisible by `n`.
pub(crate) fn tiles(
    geometry: SensorGeometry,
    n: usize,
) -> impl Iterator<Item = (u16, u16, u16, u16)> {
    let w = geometry.width;
    let h = geometry.height;
    let n = n as u16;
    (0..h)
        .step_by(n as usize)
        .flat_map(move |y0| {
            (0..w).step_by(n as usize).map(move |x0| {
                (x0, y0, (x0 + n).min(w) - x0, (y0 + n).min(h) - y0)
            })
        })
}

pub(crate) fn count_tile_ones(frame: &EbbiFrame, x0: u16, y0: u16, tw: u16, th: u16) -> usize {
    let mut ones = 0usize;
    for y in y0..y0 + th {
        for x in x0..x0 + tw {
            ones += frame.get(x, y) as usize;
        }
    }
    ones
}

/// Non-overlap median filter: each tile is set uniformly to the majority of
/// its own pixels. Partial edge tiles vote over their actual pixel count,
/// with ties resolving to 1 via the ceiling threshold.
pub fn nomf(frame: &EbbiFrame, n: usize) -> Result<EbbiFrame, FilterError> {
    if !SUPPORTED_KERNELS.contains(&n) {
        return Err(FilterError::UnsupportedKernel(n));
    }
    let mut out = EbbiFrame::zeros(frame.geometry(), frame.window_start, frame.window_len);
    for (x0, y0, tw, th) in tiles(frame.geometry(), n) {
        let ones = count_tile_ones(frame, x0, y0, tw, th);
        let bit = (ones >= majority_threshold(tw as usize * th as usize)) as u8;
        if bit == 1 {
            for y in y0..y0 + th {
                for x in x0..x0 + tw {
                    out.set(x, y, 1);
                }
            }
        }
    }
    Ok(out)
}

/// Nearest-neighbour event filter configuration.
///
/// `timestamp_bits` is the storage width the cost model charges per pixel
/// (the paper's beta_t); filtering itself compares full timestamps.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NnFiltConfig {
    /// Correlation window, microseconds.
    pub tau_us: u32,
    pub timestamp_bits: u8,
}

impl NnFiltConfig {
    pub fn new(tau_us: u32) -> Self {
        Self { tau_us, timestamp_bits: 16 }
    }
}

impl Default for NnFiltConfig {
    fn default() -> Self {
        // tau defaults to the frame window length
        Self::new(crate::framer::DEFAULT_WINDOW_LEN_US)
    }
}

/// NN-filt: an event passes iff one of its 8 neighbors saw an event within
/// `tau`; its own pixel timestamp is updated either way.
pub fn nn_filt(
    events: &[Event],
    cfg: NnFiltConfig,
    geometry: SensorGeometry,
) -> Result<Vec<Event>, FilterError> {
    if cfg.tau_us == 0 {
        return Err(FilterError::ZeroTau);
    }
    let w = geometry.width as usize;
    let mut last_ts: Vec<Option<u32>> = vec![None; geometry.pixel_count()];
    let mut out = Vec::new();
    let mut prev_t = 0u32;
    for (index, ev) in events.iter().enumerate() {
        if ev.t < prev_t {
            return Err(FilterError::Unsorted { index });
        }
        prev_t = ev.t;
        let mut supported = false;
        'scan: for dy in -1i32..=1 {
            for dx in -1i32..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let nx = ev.x as i32 + dx;
                let ny = ev.y as i32 + dy;
                if nx < 0 || ny < 0 || nx >= geometry.width as i32 || ny >= geometry.height as i32
                {
                    continue;
                }
                if let Some(ts) = last_ts[ny as usize * w + nx as usize] {
                    if ev.t - ts <= cfg.tau_us {
                        supported = true;
                        break 'scan;
                    }
                }
            }
        }
        last_ts[ev.y as usize * w + ev.x as usize] = Some(ev.t);
        if supported {
            out.push(*ev);
        }
    }
    Ok(out)
}

/// Fraction of pixels whose value differs between the two frames (the
/// paper's alpha when `after` is the filter output of `before`).
pub fn flipped_fraction(before: &EbbiFrame, after: &EbbiFrame) -> Result<f64, FilterError> {
    let diff = before.diff_count(after).map_err(|_| FilterError::GeometryMismatch)?;
    Ok(diff as f64 / before.geometry().pixel_count() as f64)
}
