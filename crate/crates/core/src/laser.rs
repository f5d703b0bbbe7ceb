//! Steady-state output of the diode-pumped, intracavity frequency-doubled
//! laser.
//!
//! Two models share one [`LaserConfig`]: a piecewise-linear threshold/slope
//! law, and a gain-clamping model in which the circulating fundamental power
//! `P_c` solves
//!
//! ```text
//! g0(pump) / (1 + P_c / P_sat) = loss + κ P_c,   g0(pump) = loss * pump / threshold
//! ```
//!
//! and the green output is `κ P_c²`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LaserError {
    #[error("invalid laser parameter: {0}")]
    InvalidParameter(String),

    #[error("nonlinear model needs shg_coupling and saturation_power")]
    MissingNonlinearParameters,

    #[error("calibration infeasible: {0}")]
    Calibration(String),
}

/// Laser crystal at the pump wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainMedium {
    /// 1/cm
    pub absorption_per_cm: f64,
    pub length_cm: f64,
    /// cm², informational
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emission_cross_section_cm2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl GainMedium {
    pub fn validate(&self) -> Result<(), LaserError> {
        if !(self.absorption_per_cm > 0.0) || !(self.length_cm >= 0.0) {
            return Err(LaserError::InvalidParameter(format!(
                "gain medium needs absorption > 0 and length >= 0, got {} 1/cm, {} cm",
                self.absorption_per_cm, self.length_cm
            )));
        }
        Ok(())
    }

    /// Single-pass absorbed fraction `1 - exp(-α L)`.
    pub fn absorbed_fraction(&self) -> f64 {
        -(-self.absorption_per_cm * self.length_cm).exp_m1()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserConfig {
    /// Pump power incident on the rod at threshold, W.
    pub threshold_pump: f64,
    /// Green output per watt of pump above threshold.
    pub slope_efficiency: f64,
    pub round_trip_loss: f64,
    /// Nonlinear (SHG) loss coefficient κ, 1/W.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shg_coupling: Option<f64>,
    /// Gain saturation power, W.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation_power: Option<f64>,
}

impl LaserConfig {
    pub fn validate(&self) -> Result<(), LaserError> {
        let bad = |m: String| Err(LaserError::InvalidParameter(m));
        if !(self.threshold_pump > 0.0) {
            return bad(format!(
                "threshold_pump must be > 0, got {}",
                self.threshold_pump
            ));
        }
        if !(self.slope_efficiency > 0.0 && self.slope_efficiency < 1.0) {
            return bad(format!(
                "slope_efficiency must lie in (0, 1), got {}",
                self.slope_efficiency
            ));
        }
        if !(self.round_trip_loss > 0.0 && self.round_trip_loss < 1.0) {
            return bad(format!(
                "round_trip_loss must lie in (0, 1), got {}",
                self.round_trip_loss
            ));
        }
        for (name, v) in [
            ("shg_coupling", self.shg_coupling),
            ("saturation_power", self.saturation_power),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("{name} must be > 0, got {v}"));
                }
            }
        }
        Ok(())
    }

    /// Piecewise-linear output, `max(0, slope (pump - threshold))`.
    pub fn green_output_linear(&self, pump: f64) -> f64 {
        (self.slope_efficiency * (pump - self.threshold_pump)).max(0.0)
    }

    /// Circulating fundamental power from the gain-clamping condition.
    pub fn circulating_power(&self, pump: f64) -> Result<f64, LaserError> {
        let (kappa, p_sat) = self.nonlinear()?;
        let loss = self.round_trip_loss;
        let sigma = pump / self.threshold_pump;
        if sigma <= 1.0 {
            return Ok(0.0);
        }
        // (loss + κ P)(1 + P / P_sat) = loss σ  ->  a P² + b P - c = 0, c > 0
        let a = kappa / p_sat;
        let b = kappa + loss / p_sat;
        let c = loss * (sigma - 1.0);
        // positive root written without cancellation
        Ok(2.0 * c / (b + (b * b + 4.0 * a * c).sqrt()))
    }

    /// Green output of the gain-clamping model, `κ P_c²`.
    pub fn green_output_shg(&self, pump: f64) -> Result<f64, LaserError> {
        let (kappa, _) = self.nonlinear()?;
        let p_c = self.circulating_power(pump)?;
        Ok(kappa * p_c * p_c)
    }

    fn nonlinear(&self) -> Result<(f64, f64), LaserError> {
        match (self.shg_coupling, self.saturation_power) {
            (Some(k), Some(p)) if k > 0.0 && p > 0.0 => Ok((k, p)),
            _ => Err(LaserError::MissingNonlinearParameters),
        }
    }
}

/// Fit a config to a threshold and one above-threshold output point.
///
/// The nonlinear coupling is set to its optimum, `κ P_sat = loss`, which
/// leaves `P_c = P_sat (sqrt(pump / threshold) - 1)` and fixes `P_sat` from
/// the output anchor. The linear slope is the chord through both anchors.
pub fn calibrate_laser(
    threshold: f64,
    (pump, output): (f64, f64),
    round_trip_loss: f64,
) -> Result<LaserConfig, LaserError> {
    if !(threshold > 0.0) {
        return Err(LaserError::Calibration(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    if !(pump > threshold) {
        return Err(LaserError::Calibration(format!(
            "anchor pump {pump} W is not above threshold {threshold} W"
        )));
    }
    if !(output > 0.0) {
        return Err(LaserError::Calibration(format!(
            "output above threshold must be positive, got {output} W"
        )));
    }
    let slope = output / (pump - threshold);
    if slope >= 1.0 {
        return Err(LaserError::Calibration(format!(
            "anchor implies slope efficiency {slope:.3} >= 1"
        )));
    }
    if !(round_trip_loss > 0.0 && round_trip_loss < 1.0) {
        return Err(LaserError::Calibration(format!(
            "round_trip_loss must lie in (0, 1), got {round_trip_loss}"
        )));
    }
    let x = (pump / threshold).sqrt() - 1.0;
    let p_sat = output / (round_trip_loss * x * x);
    let config = LaserConfig {
        threshold_pump: threshold,
        slope_efficiency: slope,
        round_trip_loss,
        shg_coupling: Some(round_trip_loss / p_sat),
        saturation_power: Some(p_sat),
    };
    config
        .validate()
        .map_err(|e| LaserError::Calibration(e.to_string()))?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference_linear() -> LaserConfig {
        LaserConfig {
            threshold_pump: 0.36,
            slope_efficiency: 0.08,
            round_trip_loss: 0.03,
            shg_coupling: None,
            saturation_power: None,
        }
    }

    fn rod(alpha: f64, length: f64) -> GainMedium {
        GainMedium {
            absorption_per_cm: alpha,
            length_cm: length,
            emission_cross_section_cm2: Some(3.0e-19),
            note: None,
        }
    }

    #[test]
    fn absorbed_fraction_values() {
        let f = rod(14.0, 0.4).absorbed_fraction();
        assert!((f - (1.0 - (-5.6f64).exp())).abs() < 1e-15);
        assert!(f > 0.96);
        assert_eq!(rod(14.0, 0.0).absorbed_fraction(), 0.0);
        // series oracle: 1 - e^-x = x - x²/2 + x³/6 - ...
        let x: f64 = 2.8;
        let mut term = x;
        let mut series = 0.0;
        for n in 1..60 {
            series += term;
            term *= -x / (n as f64 + 1.0);
        }
        let f2 = rod(14.0, 0.2).absorbed_fraction();
        assert!((f2 - series).abs() < 1e-12);
        assert!((f2 - 0.9392).abs() < 1e-4);
    }

    #[test]
    fn linear_model_points() {
        let c = reference_linear();
        assert!((c.green_output_linear(1.8) - 0.1152).abs() < 1e-12);
        assert_eq!(c.green_output_linear(0.36), 0.0);
        assert_eq!(c.green_output_linear(0.0), 0.0);
        assert!((c.green_output_linear(1.0) - 0.0512).abs() < 1e-12);
    }

    #[test]
    fn shg_requires_nonlinear_parameters() {
        assert_eq!(
            reference_linear().green_output_shg(1.0),
            Err(LaserError::MissingNonlinearParameters)
        );
    }

    #[test]
    fn calibration_reproduces_anchors() {
        let c = calibrate_laser(0.36, (1.8, 0.110), 0.03).unwrap();
        assert!((c.green_output_shg(1.8).unwrap() / 0.110 - 1.0).abs() < 1e-6);
        assert_eq!(c.green_output_shg(0.36).unwrap(), 0.0);
        assert_eq!(c.green_output_shg(0.2).unwrap(), 0.0);
        assert!(c.green_output_shg(0.36 * (1.0 + 1e-6)).unwrap() > 0.0);
        assert!(c.green_output_shg(1.9).unwrap() > c.green_output_shg(1.8).unwrap());
    }

    #[test]
    fn calibration_rejects_degenerate_anchors() {
        assert!(calibrate_laser(0.36, (1.8, 0.0), 0.03).is_err());
        assert!(calibrate_laser(0.36, (0.30, 0.01), 0.03).is_err());
        assert!(calibrate_laser(0.36, (0.40, 0.05), 0.03).is_err());
    }

    #[test]
    fn circulating_power_matches_bisection() {
        let c = calibrate_laser(0.36, (1.8, 0.110), 0.03).unwrap();
        let (kappa, p_sat) = (c.shg_coupling.unwrap(), c.saturation_power.unwrap());
        for pump in [0.5, 1.0, 1.4, 1.8, 1.9, 2.5] {
            let g0 = c.round_trip_loss * pump / c.threshold_pump;
            let residual = |p: f64| g0 / (1.0 + p / p_sat) - (c.round_trip_loss + kappa * p);
            let (mut lo, mut hi) = (0.0, 1e3);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if residual(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let p = c.circulating_power(pump).unwrap();
            assert!((p / lo - 1.0).abs() < 1e-9, "pump {pump}: {p} vs {lo}");
        }
    }

    #[test]
    fn shg_curve_stays_close_to_linear_mid_range() {
        let c = calibrate_laser(0.36, (1.8, 0.110), 0.03).unwrap();
        let lin = reference_linear();
        let shg = c.green_output_shg(1.4).unwrap();
        let linear = lin.green_output_linear(1.4);
        assert!((shg / linear - 1.0).abs() < 0.25, "{shg} vs {linear}");
        let chord = (c.green_output_shg(1.8).unwrap() - c.green_output_shg(1.0).unwrap()) / 0.8;
        assert!(chord > 0.08 / 1.5 && chord < 0.08 * 1.5, "chord {chord}");
    }

    #[test]
    fn shg_is_superlinear_near_threshold() {
        let c = calibrate_laser(0.36, (1.8, 0.110), 0.03).unwrap();
        let p1 = c.green_output_shg(0.40).unwrap();
        let p2 = c.green_output_shg(0.44).unwrap();
        // doubling the excess pump more than doubles the output
        assert!(p2 > 2.0 * p1);
    }

    proptest! {
        #[test]
        fn outputs_monotone_in_pump(p1 in 0.0..3.0f64, dp in 0.0..1.0f64) {
            let c = calibrate_laser(0.36, (1.8, 0.110), 0.03).unwrap();
            let p2 = p1 + dp;
            prop_assert!(c.green_output_linear(p2) >= c.green_output_linear(p1));
            prop_assert!(c.green_output_shg(p2).unwrap() >= c.green_output_shg(p1).unwrap());
        }

        #[test]
        fn absorbed_fraction_monotone(a in 0.1..15.0f64, l in 0.0..1.0f64, da in 0.0..5.0f64, dl in 0.0..0.5f64) {
            let base = rod(a, l).absorbed_fraction();
            prop_assert!((0.0..1.0).contains(&base));
            prop_assert!(rod(a + da, l).absorbed_fraction() >= base);
            prop_assert!(rod(a, l + dl).absorbed_fraction() >= base);
        }
    }
}
