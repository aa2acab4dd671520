//! AER event stream parsing, serialization, and synthetic scene generation.
//!
//! Two on-disk encodings are supported:
//!
//! * CSV lines of `t_us,x,y,p` with `p` in `{0,1}`, optional header line.
//! * Binary: 9-byte little-endian records `(t: u32, x: u16, y: u16, p: u8)`,
//!   no header, no padding.

use std::io::{BufRead, Read, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{BoundingBox, SensorGeometry};

/// Event polarity: contrast increase (`On`) or decrease (`Off`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Off,
    On,
}

impl Polarity {
    pub fn from_bit(bit: u8) -> Option<Polarity> {
        match bit {
            0 => Some(Polarity::Off),
            1 => Some(Polarity::On),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Polarity::Off => 0,
            Polarity::On => 1,
        }
    }
}

/// One address-event: timestamp in microseconds plus pixel address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Event {
    pub t: u32,
    pub x: u16,
    pub y: u16,
    pub polarity: Polarity,
}

pub const BINARY_RECORD_LEN: usize = 9;

#[derive(Debug, Error)]
pub enum EventIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed field `{field}`")]
    MalformedField { line: usize, field: String },
    #[error("line {line}: expected 4 comma-separated fields, got {got}")]
    FieldCount { line: usize, got: usize },
    #[error("event at line {line} out of bounds: ({x},{y}) for {width}x{height}")]
    OutOfBounds { line: usize, x: u16, y: u16, width: u16, height: u16 },
    #[error("timestamps decrease at line {line}: {t} after {prev}")]
    NonMonotonic { line: usize, t: u32, prev: u32 },
    #[error("truncated binary stream: {extra} trailing bytes (records are {BINARY_RECORD_LEN} bytes)")]
    Truncated { extra: usize },
    #[error("synthetic object box leaves sensor bounds at t=0")]
    ObjectOutOfBounds,
}

fn check_bounds(ev: &Event, geometry: SensorGeometry, line: usize) -> Result<(), EventIoError> {
    if !geometry.contains(ev.x, ev.y) {
        return Err(EventIoError::OutOfBounds {
            line,
            x: ev.x,
            y: ev.y,
            width: geometry.width,
            height: geometry.height,
        });
    }
    Ok(())
}

/// Parse CSV events. `strict_time` rejects streams with decreasing timestamps;
/// by default out-of-order events are passed through unchanged.
pub fn parse_csv<R: BufRead>(
    reader: R,
    geometry: SensorGeometry,
    strict_time: bool,
) -> Result<Vec<Event>, EventIoError> {
    let mut events = Vec::new();
    let mut prev_t: Option<u32> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 4 {
            return Err(EventIoError::FieldCount { line: line_no, got: fields.len() });
        }
        let parse =
            |f: &str| -> Result<u64, EventIoError> {
                f.trim().parse::<u64>().map_err(|_| EventIoError::MalformedField {
                    line: line_no,
                    field: f.trim().to_string(),
                })
            };
        let t = match parse(fields[0]) {
            Ok(v) => v,
            // A single leading non-numeric line is treated as a header.
            Err(_) if line_no == 1 => continue,
            Err(e) => return Err(e),
        };
        let x = parse(fields[1])?;
        let y = parse(fields[2])?;
        let p = parse(fields[3])?;
        let field_err = |field: &str| EventIoError::MalformedField {
            line: line_no,
            field: field.to_string(),
        };
        let ev = Event {
            t: u32::try_from(t).map_err(|_| field_err(fields[0]))?,
            x: u16::try_from(x).map_err(|_| field_err(fields[1]))?,
            y: u16::try_from(y).map_err(|_| field_err(fields[2]))?,
            polarity: Polarity::from_bit(u8::try_from(p).map_err(|_| field_err(fields[3]))?)
                .ok_or_else(|| field_err(fields[3]))?,
        };
        check_bounds(&ev, geometry, line_no)?;
        if strict_time {
            if let Some(prev) = prev_t {
                if ev.t < prev {
                    return Err(EventIoError::NonMonotonic { line: line_no, t: ev.t, prev });
                }
            }
        }
        prev_t = Some(ev.t);
        events.push(ev);
    }
    Ok(events)
}

pub fn write_csv<W: Write>(writer: &mut W, events: &[Event]) -> Result<(), EventIoError> {
    for ev in events {
        writeln!(writer, "{},{},{},{}", ev.t, ev.x, ev.y, ev.polarity.bit())?;
    }
    Ok(())
}

/// Parse the 9-byte binary record format.
pub fn parse_binary<R: Read>(
    mut reader: R,
    geometry: SensorGeometry,
    strict_time: bool,
) -> Result<Vec<Event>, EventIoError> {
    let mut buf = Vec::new();
    reader.read_to_end(&mut buf)?;
    if buf.len() % BINARY_RECORD_LEN != 0 {
        return Err(EventIoError::Truncated { extra: buf.len() % BINARY_RECORD_LEN });
    }
    let mut events = Vec::with_capacity(buf.len() / BINARY_RECORD_LEN);
    let mut prev_t: Option<u32> = None;
    for (rec_idx, rec) in buf.chunks_exact(BINARY_RECORD_LEN).enumerate() {
        let line = rec_idx + 1;
        let t = u32::from_le_bytes(rec[0..4].try_into().unwrap());
        let x = u16::from_le_bytes(rec[4..6].try_into().unwrap());
        let y = u16::from_le_bytes(rec[6..8].try_into().unwrap());
        let polarity = Polarity::from_bit(rec[8]).ok_or(EventIoError::MalformedField {
            line,
            field: format!("polarity byte {}", rec[8]),
        })?;
        let ev = Event { t, x, y, polarity };
        check_bounds(&ev, geometry, line)?;
        if strict_time {
            if let Some(prev) = prev_t {
                if t < prev {
                    return Err(EventIoError::NonMonotonic { line, t, prev });
                }
            }
        }
        prev_t = Some(t);
        events.push(ev);
    }
    Ok(events)
}

pub fn write_binary<W: Write>(writer: &mut W, events: &[Event]) -> Result<(), EventIoError> {
    for ev in events {
        writer.write_all(&ev.t.to_le_bytes())?;
        writer.write_all(&ev.x.to_le_bytes())?;
        writer.write_all(&ev.y.to_le_bytes())?;
        writer.write_all(&[ev.polarity.bit()])?;
    }
    Ok(())
}

/// A moving box emitting events along its boundary, stand-in for a vehicle
/// or pedestrian in a traffic recording.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ObjectSpec {
    /// Top-left corner at t = 0, pixels.
    pub x0: f64,
    pub y0: f64,
    pub width: u16,
    pub height: u16,
    /// Velocity in pixels per second.
    pub vx: f64,
    pub vy: f64,
    /// Events per boundary pixel per second.
    pub event_rate: f64,
}

impl ObjectSpec {
    fn boundary_pixel_count(&self) -> u64 {
        let w = u64::from(self.width);
        let h = u64::from(self.height);
        if w <= 1 || h <= 1 {
            w * h
        } else {
            2 * w + 2 * h - 4
        }
    }

    /// Integer box at time `t_s`, clipped to the sensor; `None` once fully
    /// outside.
    fn box_at(&self, t_s: f64, geometry: SensorGeometry) -> Option<BoundingBox> {
        let x = (self.x0 + self.vx * t_s).round() as i64;
        let y = (self.y0 + self.vy * t_s).round() as i64;
        let x_max = x + i64::from(self.width) - 1;
        let y_max = y + i64::from(self.height) - 1;
        let gx_max = i64::from(geometry.width) - 1;
        let gy_max = i64::from(geometry.height) - 1;
        if x_max < 0 || y_max < 0 || x > gx_max || y > gy_max {
            return None;
        }
        Some(BoundingBox::new(
            x.clamp(0, gx_max) as u16,
            y.clamp(0, gy_max) as u16,
            x_max.clamp(0, gx_max) as u16,
            y_max.clamp(0, gy_max) as u16,
        ))
    }
}

/// Configuration for the synthetic scene generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSceneConfig {
    pub geometry: SensorGeometry,
    pub objects: Vec<ObjectSpec>,
    /// Background events per pixel per second (homogeneous Poisson).
    pub noise_rate: f64,
    pub duration_s: f64,
    /// Frame window used to report ground-truth boxes, microseconds.
    pub window_len_us: u32,
    pub seed: u64,
}

impl Default for SyntheticSceneConfig {
    fn default() -> Self {
        Self {
            geometry: SensorGeometry::qvga(),
            objects: Vec::new(),
            noise_rate: 0.0,
            duration_s: 1.0,
            window_len_us: crate::framer::DEFAULT_WINDOW_LEN_US,
            seed: 0,
        }
    }
}

/// Ground-truth boxes for one frame window.
pub type GroundTruth = Vec<(u32, Vec<BoundingBox>)>;

fn sample_poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

fn boundary_pixel(bbox: &BoundingBox, index: u64) -> (u16, u16) {
    let w = u64::from(bbox.width());
    let h = u64::from(bbox.height());
    debug_assert!(index < if w <= 1 || h <= 1 { w * h } else { 2 * w + 2 * h - 4 });
    if w == 1 {
        return (bbox.x_min, bbox.y_min + index as u16);
    }
    if h == 1 {
        return (bbox.x_min + index as u16, bbox.y_min);
    }
    // top row, bottom row, left column interior, right column interior
    if index < w {
        (bbox.x_min + index as u16, bbox.y_min)
    } else if index < 2 * w {
        (bbox.x_min + (index - w) as u16, bbox.y_max)
    } else if index < 2 * w + (h - 2) {
        (bbox.x_min, bbox.y_min + 1 + (index - 2 * w) as u16)
    } else {
        (bbox.x_max, bbox.y_min + 1 + (index - 2 * w - (h - 2)) as u16)
    }
}

/// Generate a reproducible event stream plus per-frame ground truth.
///
/// Noise events form a homogeneous Poisson process over all pixels. Each
/// object emits events at `event_rate` per boundary pixel of its (clipped)
/// box; objects leaving the sensor are clipped, never an error. Ground-truth
/// boxes are sampled at each frame window's midpoint.
pub fn generate_synthetic(
    cfg: &SyntheticSceneConfig,
) -> Result<(Vec<Event>, GroundTruth), EventIoError> {
    let duration_us = (cfg.duration_s * 1e6).round() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut events = Vec::new();

    for obj in &cfg.objects {
        let full_area = u64::from(obj.width) * u64::from(obj.height);
        match obj.box_at(0.0, cfg.geometry) {
            Some(b) if b.area() == full_area => {}
            _ => return Err(EventIoError::ObjectOutOfBounds),
        }
    }

    // Background noise.
    let noise_mean = cfg.noise_rate * cfg.geometry.pixel_count() as f64 * cfg.duration_s;
    let n_noise = sample_poisson(&mut rng, noise_mean);
    for _ in 0..n_noise {
        let t = rng.gen_range(0..duration_us.max(1)) as u32;
        let x = rng.gen_range(0..cfg.geometry.width);
        let y = rng.gen_range(0..cfg.geometry.height);
        let polarity = if rng.gen_bool(0.5) { Polarity::On } else { Polarity::Off };
        events.push(Event { t, x, y, polarity });
    }

    // Object boundary events via thinning: sample at the unclipped boundary
    // rate, then accept proportionally to the clipped boundary size.
    for obj in &cfg.objects {
        let b_max = obj.boundary_pixel_count();
        let mean = obj.event_rate * b_max as f64 * cfg.duration_s;
        let n_obj = sample_poisson(&mut rng, mean);
        for _ in 0..n_obj {
            let t_us = rng.gen_range(0..duration_us.max(1));
            let t_s = t_us as f64 / 1e6;
            let Some(bbox) = obj.box_at(t_s, cfg.geometry) else { continue };
            let w = u64::from(bbox.width());
            let h = u64::from(bbox.height());
            let b_cur = if w <= 1 || h <= 1 { w * h } else { 2 * w + 2 * h - 4 };
            if b_cur < b_max && !rng.gen_bool(b_cur as f64 / b_max as f64) {
                continue;
            }
            let (x, y) = boundary_pixel(&bbox, rng.gen_range(0..b_cur));
            let polarity = if rng.gen_bool(0.5) { Polarity::On } else { Polarity::Off };
            events.push(Event { t: t_us as u32, x, y, polarity });
        }
    }

    events.sort_unstable();

    // Ground truth per frame window, box taken at the window midpoint.
    let window = u64::from(cfg.window_len_us.max(1));
    let n_frames = duration_us.div_ceil(window);
    let mut ground_truth = Vec::new();
    for frame in 0..n_frames {
        let t_mid = (frame * window + window / 2) as f64 / 1e6;
        let boxes: Vec<BoundingBox> = cfg
            .objects
            .iter()
            .filter_map(|obj| obj.box_at(t_mid, cfg.geometry))
            .collect();
        ground_truth.push((frame as u32, boxes));
    }
    Ok((events, ground_truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geo() -> SensorGeometry {
        SensorGeometry::qvga()
    }

    #[test]
    fn parses_simple_line() {
        let evts = parse_csv("100,5,7,1".as_bytes(), geo(), false).unwrap();
        assert_eq!(evts, vec![Event { t: 100, x: 5, y: 7, polarity: Polarity::On }]);
    }

    #[test]
    fn empty_input_gives_empty_list() {
        assert!(parse_csv("".as_bytes(), geo(), false).unwrap().is_empty());
        assert!(parse_binary("".as_bytes(), geo(), false).unwrap().is_empty());
    }

    #[test]
    fn header_line_is_skipped() {
        let evts = parse_csv("t_us,x,y,p\n100,5,7,1\n".as_bytes(), geo(), false).unwrap();
        assert_eq!(evts.len(), 1);
    }

    #[test]
    fn out_of_bounds_coordinate_is_rejected() {
        let err = parse_csv("100,400,7,1".as_bytes(), geo(), false).unwrap_err();
        assert!(matches!(err, EventIoError::OutOfBounds { x: 400, .. }));
    }

    #[test]
    fn malformed_field_reports_line_number() {
        let err = parse_csv("100,5,7,1\n200,zz,7,0\n".as_bytes(), geo(), false).unwrap_err();
        assert!(matches!(err, EventIoError::MalformedField { line: 2, .. }));
    }

    #[test]
    fn strict_mode_rejects_decreasing_time() {
        let input = "100,5,7,1\n50,5,7,1\n";
        assert!(parse_csv(input.as_bytes(), geo(), false).is_ok());
        let err = parse_csv(input.as_bytes(), geo(), true).unwrap_err();
        assert!(matches!(err, EventIoError::NonMonotonic { line: 2, .. }));
    }

    #[test]
    fn binary_decodes_single_record() {
        let mut buf = Vec::new();
        write_binary(&mut buf, &[Event { t: 100, x: 5, y: 7, polarity: Polarity::On }]).unwrap();
        assert_eq!(buf.len(), 9);
        let evts = parse_binary(buf.as_slice(), geo(), false).unwrap();
        assert_eq!(evts, vec![Event { t: 100, x: 5, y: 7, polarity: Polarity::On }]);
    }

    #[test]
    fn trailing_partial_record_is_an_error() {
        let buf = vec![0u8; 10];
        let err = parse_binary(buf.as_slice(), geo(), false).unwrap_err();
        assert!(matches!(err, EventIoError::Truncated { extra: 1 }));
    }

    #[test]
    fn same_seed_reproduces_stream_exactly() {
        let cfg = SyntheticSceneConfig {
            objects: vec![ObjectSpec {
                x0: 10.0,
                y0: 10.0,
                width: 30,
                height: 20,
                vx: 40.0,
                vy: 10.0,
                event_rate: 100.0,
            }],
            noise_rate: 1.0,
            duration_s: 0.5,
            seed: 42,
            ..Default::default()
        };
        let (a, gta) = generate_synthetic(&cfg).unwrap();
        let (b, gtb) = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(gta, gtb);
        assert!(!a.is_empty());
    }

    #[test]
    fn noiseless_static_box_events_lie_on_boundary() {
        let obj = ObjectSpec {
            x0: 50.0,
            y0: 60.0,
            width: 20,
            height: 10,
            vx: 0.0,
            vy: 0.0,
            event_rate: 200.0,
        };
        let cfg = SyntheticSceneConfig {
            objects: vec![obj],
            duration_s: 0.2,
            seed: 7,
            ..Default::default()
        };
        let (events, _) = generate_synthetic(&cfg).unwrap();
        assert!(!events.is_empty());
        for ev in &events {
            let on_x_edge = ev.x == 50 || ev.x == 69;
            let on_y_edge = ev.y == 60 || ev.y == 69;
            assert!((50..=69).contains(&ev.x) && (60..=69).contains(&ev.y));
            assert!(on_x_edge || on_y_edge, "interior event at ({},{})", ev.x, ev.y);
        }
    }

    #[test]
    fn noise_event_count_matches_poisson_mean() {
        // mean = r * W * H * T; check within 5 sigma.
        let cfg = SyntheticSceneConfig {
            noise_rate: 2.0,
            duration_s: 0.25,
            seed: 3,
            ..Default::default()
        };
        let mean: f64 = 2.0 * 320.0 * 240.0 * 0.25;
        let (events, _) = generate_synthetic(&cfg).unwrap();
        let sigma = mean.sqrt();
        let n = events.len() as f64;
        assert!((n - mean).abs() < 5.0 * sigma, "count {n} vs mean {mean}");
    }

    #[test]
    fn ground_truth_boxes_follow_motion() {
        let cfg = SyntheticSceneConfig {
            objects: vec![ObjectSpec {
                x0: 0.0,
                y0: 0.0,
                width: 10,
                height: 10,
                vx: 100.0,
                vy: 0.0,
                event_rate: 10.0,
            }],
            duration_s: 1.0,
            window_len_us: 100_000,
            seed: 1,
            ..Default::default()
        };
        let (_, gt) = generate_synthetic(&cfg).unwrap();
        assert_eq!(gt.len(), 10);
        // 100 px/s, midpoint of frame 5 is 0.55 s -> x_min = 55.
        assert_eq!(gt[5].1[0].x_min, 55);
    }

    proptest! {
        #[test]
        fn binary_round_trip(raw in proptest::collection::vec(
            (0u32..1_000_000, 0u16..320, 0u16..240, 0u8..2), 0..200)) {
            let mut events: Vec<Event> = raw.into_iter()
                .map(|(t, x, y, p)| Event { t, x, y, polarity: Polarity::from_bit(p).unwrap() })
                .collect();
            events.sort_unstable();
            let mut bin = Vec::new();
            write_binary(&mut bin, &events).unwrap();
            prop_assert_eq!(parse_binary(bin.as_slice(), geo(), true).unwrap(), events.clone());

            let mut csv = Vec::new();
            write_csv(&mut csv, &events).unwrap();
            prop_assert_eq!(parse_csv(csv.as_slice(), geo(), true).unwrap(), events);
        }
    }
}
