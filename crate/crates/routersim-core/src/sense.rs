//! Per-port power sensing: instantaneous power from sampled voltage and
//! current, a fixed-window moving average of it, and the near-zero detector
//! that gates mode transitions.
//!
//! The moving average exists because instantaneous AC power oscillates at
//! twice the line frequency even in steady state; averaging over a whole
//! number of line periods cancels that ripple and leaves the transferred
//! power. Discrete sampling means the average almost never lands on exactly
//! zero, so "zero" is an epsilon band, not an equality test.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SenseError {
    #[error("averaging window must hold at least one sample")]
    EmptyWindow,
    #[error("window of {periods} periods at {fs_hz} Hz / {f_line_hz} Hz line is not a whole number of samples")]
    FractionalWindow {
        fs_hz: f64,
        f_line_hz: f64,
        periods: u32,
    },
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
}

/// One synchronized voltage/current sample at a port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortSample {
    pub t: f64,
    pub v: f64,
    pub i: f64,
}

impl PortSample {
    /// Instantaneous power `v * i`, positive when flowing into the router.
    pub fn power(&self) -> f64 {
        self.v * self.i
    }
}

/// Simple moving average over the last `n` instantaneous-power samples.
///
/// A ring buffer plus running sum keeps updates O(1); the sum is rebuilt from
/// the buffer once per full revolution so rounding error cannot accumulate
/// over long runs.
#[derive(Debug, Clone)]
pub struct PowerAverager {
    window: Vec<f64>,
    head: usize,
    filled: usize,
    sum: f64,
    since_resum: usize,
}

impl PowerAverager {
    pub fn new(window_len: usize) -> Result<Self, SenseError> {
        if window_len == 0 {
            return Err(SenseError::EmptyWindow);
        }
        Ok(Self {
            window: vec![0.0; window_len],
            head: 0,
            filled: 0,
            sum: 0.0,
            since_resum: 0,
        })
    }

    /// Window sized to `periods` whole line periods at sample rate `fs_hz`.
    ///
    /// The sample rate must be an integer multiple of the line frequency;
    /// otherwise no whole-sample window covers whole periods and the ripple
    /// would not cancel.
    pub fn for_line(fs_hz: f64, f_line_hz: f64, periods: u32) -> Result<Self, SenseError> {
        let per_period = fs_hz / f_line_hz;
        if !(per_period.is_finite() && (per_period - per_period.round()).abs() < 1e-9) {
            return Err(SenseError::FractionalWindow {
                fs_hz,
                f_line_hz,
                periods,
            });
        }
        let n = per_period.round() as usize * periods as usize;
        Self::new(n)
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn is_full(&self) -> bool {
        self.filled == self.window.len()
    }

    /// Push one instantaneous-power sample. Returns the window average once
    /// the window has filled, `None` while it is still priming.
    pub fn update(&mut self, p: f64) -> Option<f64> {
        let n = self.window.len();
        self.sum += p - self.window[self.head];
        self.window[self.head] = p;
        self.head = (self.head + 1) % n;
        if self.filled < n {
            self.filled += 1;
        }
        self.since_resum += 1;
        if self.since_resum >= n {
            self.sum = self.window.iter().sum();
            self.since_resum = 0;
        }
        if self.filled == n {
            Some(self.sum / n as f64)
        } else {
            None
        }
    }

    /// Forget all buffered samples and start priming again.
    pub fn reset(&mut self) {
        self.window.fill(0.0);
        self.head = 0;
        self.filled = 0;
        self.sum = 0.0;
        self.since_resum = 0;
    }
}

/// Epsilon-band zero crossing detector for averaged power.
///
/// The detector only reports while armed, so a port sitting at zero between
/// transfers does not retrigger mode changes.
#[derive(Debug, Clone)]
pub struct ZeroDetector {
    epsilon_w: f64,
    armed: bool,
}

impl ZeroDetector {
    pub fn new(epsilon_w: f64) -> Result<Self, SenseError> {
        if !(epsilon_w > 0.0) {
            return Err(SenseError::NonPositiveEpsilon(epsilon_w));
        }
        Ok(Self {
            epsilon_w,
            armed: false,
        })
    }

    pub fn epsilon_w(&self) -> f64 {
        self.epsilon_w
    }

    pub fn arm(&mut self) {
        self.armed = true;
    }

    pub fn disarm(&mut self) {
        self.armed = false;
    }

    pub fn is_armed(&self) -> bool {
        self.armed
    }

    /// True when armed and `avg_w` lies inside the zero band.
    pub fn detect(&self, avg_w: f64) -> bool {
        self.armed && avg_w.abs() < self.epsilon_w
    }
}
