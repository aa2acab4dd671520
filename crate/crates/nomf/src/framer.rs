//! Accumulation of event streams into event-based binary image (EBBI) frames.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event_io::Event;
use crate::geom::SensorGeometry;

/// Default frame window, about 15 fps. The frame duration is a free
/// parameter of the pipeline and is exposed as a CLI flag.
pub const DEFAULT_WINDOW_LEN_US: u32 = 66_000;

/// A binary frame: a pixel is 1 iff at least one event fell on it during
/// `[window_start, window_start + window_len)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EbbiFrame {
    geometry: SensorGeometry,
    bits: Vec<u8>,
    pub window_start: u32,
    pub window_len: u32,
}

impl EbbiFrame {
    pub fn zeros(geometry: SensorGeometry, window_start: u32, window_len: u32) -> Self {
        Self { geometry, bits: vec![0; geometry.pixel_count()], window_start, window_len }
    }

    pub fn from_bits(
        geometry: SensorGeometry,
        bits: Vec<u8>,
        window_start: u32,
        window_len: u32,
    ) -> Self {
        assert_eq!(bits.len(), geometry.pixel_count());
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self { geometry, bits, window_start, window_len }
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn width(&self) -> u16 {
        self.geometry.width
    }

    pub fn height(&self) -> u16 {
        self.geometry.height
    }

    /// Index of this frame's window on the absolute time axis.
    pub fn frame_index(&self) -> u32 {
        self.window_start / self.window_len.max(1)
    }

    #[inline]
    pub fn get(&self, x: u16, y: u16) -> u8 {
        self.bits[y as usize * self.geometry.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u16, y: u16, value: u8) {
        debug_assert!(value <= 1);
        self.bits[y as usize * self.geometry.width as usize + x as usize] = value;
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// Number of pixels where the two frames differ.
    pub fn diff_count(&self, other: &EbbiFrame) -> Result<usize, FramerError> {
        if self.geometry != other.geometry {
            return Err(FramerError::GeometryMismatch);
        }
        Ok(self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count())
    }
}

/// Per-frame accumulation statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameStats {
    pub event_count: usize,
    pub active_pixel_count: usize,
    /// Events over pixel count; the paper's dataset averages about 0.15.
    pub gamma_estimate: f64,
}

#[derive(Debug, Error)]
pub enum FramerError {
    #[error("window length must be positive")]
    ZeroWindow,
    #[error("events are not sorted by timestamp (index {index})")]
    Unsorted { index: usize },
    #[error("event ({x},{y}) outside {width}x{height}")]
    OutOfBounds { x: u16, y: u16, width: u16, height: u16 },
    #[error("frame geometries differ")]
    GeometryMismatch,
}

/// OR-accumulate a time-sorted event stream into contiguous frames.
///
/// Windows are anchored at multiples of `window_len` on the absolute time
/// axis; output starts at the window containing the first event and empty
/// windows in between are kept, so frame indices stay aligned with
/// generator ground truth.
pub fn accumulate(
    events: &[Event],
    geometry: SensorGeometry,
    window_len: u32,
) -> Result<Vec<(EbbiFrame, FrameStats)>, FramerError> {
    if window_len == 0 {
        return Err(FramerError::ZeroWindow);
    }
    let mut frames: Vec<(EbbiFrame, FrameStats)> = Vec::new();
    if events.is_empty() {
        return Ok(frames);
    }
    let first_window = events[0].t / window_len;
    let mut prev_t = events[0].t;
    for (index, ev) in events.iter().enumerate() {
        if ev.t < prev_t {
            return Err(FramerError::Unsorted { index });
        }
        prev_t = ev.t;
        if !geometry.contains(ev.x, ev.y) {
            return Err(FramerError::OutOfBounds {
                x: ev.x,
                y: ev.y,
                width: geometry.width,
                height: geometry.height,
            });
        }
        let window = ev.t / window_len;
        while frames.len() <= (window - first_window) as usize {
            let start = (first_window + frames.len() as u32) * window_len;
            frames.push((
                EbbiFrame::zeros(geometry, start, window_len),
                FrameStats { event_count: 0, active_pixel_count: 0, gamma_estimate: 0.0 },
            ));
        }
        let (frame, stats) = frames.last_mut().unwrap();
        stats.event_count += 1;
        if frame.get(ev.x, ev.y) == 0 {
            frame.set(ev.x, ev.y, 1);
            stats.active_pixel_count += 1;
        }
    }
    let d = geometry.pixel_count() as f64;
    for (_, stats) in &mut frames {
        stats.gamma_estimate = stats.event_count as f64 / d;
    }
    Ok(frames)
}
