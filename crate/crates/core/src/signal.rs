//! Desired control trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position, velocity and acceleration of the desired trajectory at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredState {
    pub x: f64,
    pub v: f64,
    pub a: f64,
}

/// Sinusoid `amplitude * sin(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesiredSignal {
    pub amplitude: f64,
}

impl DesiredSignal {
    pub fn new(amplitude: f64) -> Result<Self> {
        if amplitude.is_finite() && amplitude > 0.0 {
            Ok(Self { amplitude })
        } else {
            Err(Error::InvalidConfig(format!(
                "amplitude must be finite and > 0, got {amplitude}"
            )))
        }
    }

    #[inline]
    pub fn at(&self, t: f64) -> DesiredState {
        let (s, c) = t.sin_cos();
        DesiredState {
            x: self.amplitude * s,
            v: self.amplitude * c,
            a: -(self.amplitude * s),
        }
    }

    pub fn sample(&self, times: &[f64]) -> Vec<DesiredState> {
        times.iter().map(|&t| self.at(t)).collect()
    }
}
