//! Log-domain wrapping for black-box denoisers.

use crate::tensor::Field;

/// Floor relative to the frame maximum.
pub const RELATIVE_FLOOR: f64 = 1e-12;

/// Parameters needed to undo [`log_forward`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogFrame {
    pub eps_floor: f64,
    pub lo: f64,
    pub hi: f64,
    /// Original value of a constant frame, restored verbatim.
    pub constant: Option<f64>,
}

/// Default floor for a frame: `1e-12` times its maximum.
pub fn frame_floor(image: &Field) -> f64 {
    let peak = image.max();
    if peak > 0.0 {
        RELATIVE_FLOOR * peak
    } else {
        RELATIVE_FLOOR
    }
}

/// `10 log10(max(x, 0) + eps)` affinely mapped to `[0, 1]` with the frame's own range.
///
/// A constant frame maps to all `0.5`.
pub fn log_forward(image: &Field, eps_floor: f64) -> (Field, LogFrame) {
    let db = image.map(|x| 10.0 * libm::log10(x.max(0.0) + eps_floor));
    let (lo, hi) = (db.min(), db.max());
    if hi <= lo {
        let first = image.as_slice()[0];
        let constant = image.as_slice().iter().all(|&v| v == first).then_some(first);
        let frame = LogFrame { eps_floor, lo, hi, constant };
        return (Field::filled(image.rows(), image.cols(), 0.5), frame);
    }
    let span = hi - lo;
    (db.map(|v| (v - lo) / span), LogFrame { eps_floor, lo, hi, constant: None })
}

pub fn log_inverse(image: &Field, frame: &LogFrame) -> Field {
    if frame.hi <= frame.lo {
        if let Some(c) = frame.constant {
            return Field::filled(image.rows(), image.cols(), c);
        }
        return image.map(|_| libm::pow(10.0, frame.lo / 10.0) - frame.eps_floor);
    }
    let span = frame.hi - frame.lo;
    image.map(|t| libm::pow(10.0, (frame.lo + t * span) / 10.0) - frame.eps_floor)
}
