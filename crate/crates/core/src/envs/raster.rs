use crate::video::{Frame, FRAME_SIZE};

pub const BACKGROUND: f32 = 0.0;
pub const TARGET: f32 = 0.3;
pub const OBJECT: f32 = 0.6;
pub const GRIPPER: f32 = 1.0;

/// Half-width of the square gripper marker, in pixels (3x3 block).
pub const GRIPPER_HALF: i64 = 1;

/// Drawing surface for one 32x32 frame. Coordinates are `(row, col)` with
/// pixel centers on integers; anything outside the frame is clipped.
pub(crate) struct Canvas {
    frame: Frame,
}

impl Canvas {
    pub fn new() -> Self {
        Canvas { frame: Frame::zeros(FRAME_SIZE, FRAME_SIZE) }
    }

    fn put(&mut self, row: i64, col: i64, value: f32) {
        let n = FRAME_SIZE as i64;
        if (0..n).contains(&row) && (0..n).contains(&col) {
            self.frame.set(row as usize, col as usize, value);
        }
    }

    /// Inclusive pixel rectangle.
    pub fn fill_rect(&mut self, rows: (i64, i64), cols: (i64, i64), value: f32) {
        for r in rows.0..=rows.1 {
            for c in cols.0..=cols.1 {
                self.put(r, c, value);
            }
        }
    }

    /// Square block centered on the pixel nearest to `(row, col)`.
    pub fn block(&mut self, center: (f64, f64), half: i64, value: f32) {
        let (r, c) = (center.0.round() as i64, center.1.round() as i64);
        self.fill_rect((r - half, r + half), (c - half, c + half), value);
    }

    pub fn gripper(&mut self, center: (f64, f64)) {
        self.block(center, GRIPPER_HALF, GRIPPER);
    }

    /// Every pixel whose center lies within `radius` of segment `a`-`b`.
    pub fn segment(&mut self, a: (f64, f64), b: (f64, f64), radius: f64, value: f32) {
        let n = FRAME_SIZE as i64;
        let (dr, dc) = (b.0 - a.0, b.1 - a.1);
        let len2 = dr * dr + dc * dc;
        for r in 0..n {
            for c in 0..n {
                let (pr, pc) = (r as f64, c as f64);
                let t = if len2 > 0.0 {
                    (((pr - a.0) * dr + (pc - a.1) * dc) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (qr, qc) = (a.0 + t * dr, a.1 + t * dc);
                let d2 = (pr - qr).powi(2) + (pc - qc).powi(2);
                if d2 <= radius * radius + 1e-9 {
                    self.put(r, c, value);
                }
            }
        }
    }

    pub fn disk(&mut self, center: (f64, f64), radius: f64, value: f32) {
        self.segment(center, center, radius, value);
    }

    pub fn finish(self) -> Frame {
        self.frame
    }
}
