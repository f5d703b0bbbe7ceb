use serde::{Deserialize, Serialize};

use super::LockError;

/// Discrete PID gains. Error and actuation are both in Hz of detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    /// 1/s
    pub ki: f64,
    /// s
    pub kd: f64,
    /// s
    pub sample_period: f64,
    pub output_min: f64,
    pub output_max: f64,
}

impl PidGains {
    pub fn validate(&self) -> Result<(), LockError> {
        if !(self.sample_period > 0.0) || !(self.output_min < self.output_max) {
            return Err(LockError::InvalidParameter(format!(
                "PID needs sample_period > 0 and output_min < output_max, got {self:?}"
            )));
        }
        if ![self.kp, self.ki, self.kd].iter().all(|g| g.is_finite()) {
            return Err(LockError::InvalidParameter(
                "PID gains must be finite".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
}

impl PidState {
    /// One controller update. The integrator is frozen while the output
    /// would leave `[output_min, output_max]`.
    pub fn step(self, error: f64, gains: &PidGains) -> (PidState, f64) {
        let p = gains.kp * error;
        let d = gains.kd * (error - self.prev_error) / gains.sample_period;
        let integral = self.integral + gains.ki * gains.sample_period * error;
        let raw = p + integral + d;
        let (integral, out) = if raw > gains.output_max || raw < gains.output_min {
            let held = p + self.integral + d;
            (
                self.integral,
                held.clamp(gains.output_min, gains.output_max),
            )
        } else {
            (integral, raw)
        };
        (
            PidState {
                integral,
                prev_error: error,
            },
            out,
        )
    }
}
