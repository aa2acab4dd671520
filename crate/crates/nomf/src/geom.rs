//! Sensor geometry and pixel-aligned bounding boxes.

use serde::{Deserialize, Serialize};

/// Pixel dimensions of the sensor array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorGeometry {
    pub width: u16,
    pub height: u16,
}

impl SensorGeometry {
    pub fn new(width: u16, height: u16) -> Self {
        assert!(width >= 1 && height >= 1, "sensor must be at least 1x1");
        Self { width, height }
    }

    /// QVGA, the array size the hardware model targets.
    pub fn qvga() -> Self {
        Self::new(320, 240)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn contains(&self, x: u16, y: u16) -> bool {
        x < self.width && y < self.height
    }
}

impl Default for SensorGeometry {
    fn default() -> Self {
        Self::qvga()
    }
}

/// Axis-aligned box with inclusive pixel coordinates: a 1x1 box has
/// `x_min == x_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: u16,
    pub y_min: u16,
    pub x_max: u16,
    pub y_max: u16,
}

impl BoundingBox {
    pub fn new(x_min: u16, y_min: u16, x_max: u16, y_max: u16) -> Self {
        assert!(x_min <= x_max && y_min <= y_max, "degenerate bounding box");
        Self { x_min, y_min, x_max, y_max }
    }

    pub fn width(&self) -> u32 {
        u32::from(self.x_max - self.x_min) + 1
    }

    pub fn height(&self) -> u32 {
        u32::from(self.y_max - self.y_min) + 1
    }

    /// Inclusive-pixel area.
    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let x_min = self.x_min.max(other.x_min);
        let y_min = self.y_min.max(other.y_min);
        let x_max = self.x_max.min(other.x_max);
        let y_max = self.y_max.min(other.y_max);
        if x_min <= x_max && y_min <= y_max {
            Some(BoundingBox { x_min, y_min, x_max, y_max })
        } else {
            None
        }
    }
}
