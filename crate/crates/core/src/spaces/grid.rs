use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Uniform time grid `t0, t0 + h, …, t_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t_end: f64,
    pub step: f64,
    pub points: usize,
}

impl TimeGrid {
    /// The horizon must be an integer number of steps (1e-9 relative slack).
    pub fn new(t0: f64, t_end: f64, step: f64) -> Result<Self> {
        if !(t0.is_finite() && t_end.is_finite() && step.is_finite()) {
            return Err(invalid("time grid bounds must be finite"));
        }
        if !(t_end > t0) {
            return Err(invalid(format!("t_end ({t_end}) must exceed t0 ({t0})")));
        }
        if !(step > 0.0) {
            return Err(invalid("time step must be positive"));
        }
        let ratio = (t_end - t0) / step;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * n.max(1.0) {
            return Err(invalid(format!(
                "horizon {} is not an integer multiple of step {step}",
                t_end - t0
            )));
        }
        Ok(TimeGrid {
            t0,
            t_end,
            step,
            points: n as usize + 1,
        })
    }

    /// Grid covering `[t0, t_end]` with the largest step not exceeding `max_step`.
    pub fn covering(t0: f64, t_end: f64, max_step: f64) -> Result<Self> {
        if !(t_end > t0) || !(max_step > 0.0) {
            return Err(invalid("covering grid needs t_end > t0 and a positive step"));
        }
        let n = ((t_end - t0) / max_step * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Ok(TimeGrid {
            t0,
            t_end,
            step: (t_end - t0) / n as f64,
            points: n + 1,
        })
    }

    pub fn steps(&self) -> usize {
        self.points - 1
    }

    pub fn time(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.t_end
        } else {
            self.t0 + i as f64 * self.step
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(move |i| self.time(i))
    }

    /// Same horizon, `factor` times more steps.
    pub fn refined(&self, factor: usize) -> TimeGrid {
        TimeGrid {
            t0: self.t0,
            t_end: self.t_end,
            step: self.step / factor as f64,
            points: self.steps() * factor + 1,
        }
    }

    /// Index of the last grid point not after `t`.
    pub fn floor_index(&self, t: f64) -> usize {
        let i = ((t - self.t0) / self.step + 1e-9).floor();
        (i.max(0.0) as usize).min(self.points - 1)
    }
}
