//! JSON scenario files.
//!
//! A scenario bundles the configuration of every stage of the chain. Parsing
//! is strict: unknown keys are rejected and the offending key path is
//! reported. Sections are optional; each command requires the sections it
//! uses.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::{AnalyzerSettings, ExcessNoise};
use crate::laser::{GainMedium, LaserConfig};
use crate::lock::{DisturbanceModel, ModulationSource, PidGains};
use crate::opo::{DetectionChain, OpoConfig};
use crate::optics::{OpticalElement, Plane, RingCavity, ThermalLensModel};
use crate::sweep::{Goal, SearchMethod};
use crate::{Error, Result};

/// The shipped laser/NOPO/detection scenario.
pub const PAPER_FIG1: &str = include_str!("../scenarios/paper_fig1.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub metadata: Metadata,
    /// Provenance note per key path.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sources: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laser: Option<LaserSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ring_cavity: Option<RingCavitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opo: Option<OpoSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<DetectionChain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lock: Option<LockSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub title: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserSection {
    pub config: LaserConfig,
    pub gain_medium: GainMedium,
    /// Pump powers reported individually, W.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pump_w: Vec<f64>,
    /// Pump range of the output table, W.
    #[serde(default = "default_pump_table")]
    pub table: PumpTable,
    /// Output anchor used to calibrate the gain-clamping model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shg_anchor: Option<ShgAnchor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpTable {
    pub min_w: f64,
    pub max_w: f64,
    pub steps: usize,
}

fn default_pump_table() -> PumpTable {
    PumpTable {
        min_w: 0.0,
        max_w: 2.0,
        steps: 21,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShgAnchor {
    pub pump_w: f64,
    pub output_w: f64,
}

/// Cavity element as written in a scenario; `thermal_lens` resolves to a thin
/// lens from the section's thermal-lens model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ElementSpec {
    FreeSpace {
        d: f64,
    },
    ThinLens {
        f: f64,
    },
    CurvedMirror {
        r: f64,
        #[serde(default)]
        incidence_angle: f64,
    },
    Slab {
        d: f64,
        n: f64,
    },
    ThermalLens,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamQuality {
    pub tangential: f64,
    pub sagittal: f64,
}

impl Default for BeamQuality {
    fn default() -> Self {
        Self {
            tangential: 1.0,
            sagittal: 1.0,
        }
    }
}

impl BeamQuality {
    pub fn get(&self, plane: Plane) -> f64 {
        match plane {
            Plane::Tangential => self.tangential,
            Plane::Sagittal => self.sagittal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalLensSection {
    /// W·m
    pub k_thermal: f64,
    pub absorbed_pump_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSpec {
    pub name: String,
    /// Number of elements between the reference plane and this plane.
    pub after: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceBeam {
    pub plane: String,
    /// 1/e² waist radius, m.
    pub waist: f64,
    /// Signed distance from the beam's waist to the plane, m.
    #[serde(default)]
    pub waist_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingCavitySection {
    pub wavelength: f64,
    #[serde(default)]
    pub m2: BeamQuality,
    pub elements: Vec<ElementSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal_lens: Option<ThermalLensSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub planes: Vec<PlaneSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_beam: Option<ReferenceBeam>,
}

impl RingCavitySection {
    pub fn thermal_model(&self) -> Result<Option<(ThermalLensModel, f64)>> {
        self.thermal_lens
            .map(|t| Ok((ThermalLensModel::new(t.k_thermal)?, t.absorbed_pump_w)))
            .transpose()
    }

    pub fn cavity(&self) -> Result<RingCavity> {
        let thermal = self.thermal_model()?;
        let elements = self
            .elements
            .iter()
            .enumerate()
            .map(|(i, el)| {
                Ok(match *el {
                    ElementSpec::FreeSpace { d } => OpticalElement::FreeSpace { d },
                    ElementSpec::ThinLens { f } => OpticalElement::ThinLens { f },
                    ElementSpec::CurvedMirror { r, incidence_angle } => {
                        OpticalElement::CurvedMirror { r, incidence_angle }
                    }
                    ElementSpec::Slab { d, n } => OpticalElement::Slab { d, n },
                    ElementSpec::ThermalLens => {
                        let (model, pump) = thermal.ok_or_else(|| {
                            Error::config(
                                format!("ring_cavity.elements.{i}"),
                                "thermal_lens element needs a ring_cavity.thermal_lens section",
                            )
                        })?;
                        model.lens(pump)?
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RingCavity::new(elements, self.wavelength)?)
    }

    pub fn plane(&self, name: &str) -> Result<&PlaneSpec> {
        self.planes
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::config("ring_cavity.planes", format!("no plane named `{name}`")))
    }

    fn validate(&self) -> Result<()> {
        self.cavity()?;
        for (i, p) in self.planes.iter().enumerate() {
            if p.after > self.elements.len() {
                return Err(Error::config(
                    format!("ring_cavity.planes.{i}.after"),
                    format!("exceeds element count {}", self.elements.len()),
                ));
            }
        }
        if let Some(r) = &self.reference_beam {
            self.plane(&r.plane)?;
        }
        for (name, m2) in [
            ("tangential", self.m2.tangential),
            ("sagittal", self.m2.sagittal),
        ] {
            if !(m2 >= 1.0) {
                return Err(Error::config(
                    format!("ring_cavity.m2.{name}"),
                    format!("beam quality must be >= 1, got {m2}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumGrid {
    pub max_hz: f64,
    pub steps: usize,
}

/// Measured values the model is compared against, without tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuredValues {
    /// Measured intensity-difference noise at the analysis frequency, dB.
    pub squeezing_db: f64,
    pub analysis_frequency_hz: f64,
    /// Inferred output squeezing as reported alongside the measurement, dB.
    pub reported_inferred_db: f64,
    /// Measured pump-to-twin-beam conversion.
    pub conversion: f64,
    pub conversion_pump_w: f64,
    /// Predicted squeezing reported for the design, dB.
    pub theoretical_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpoSection {
    pub config: OpoConfig,
    /// Pump power for the conversion report, W.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_w: Option<f64>,
    pub spectrum: SpectrumGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<MeasuredValues>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockSection {
    pub modulation: ModulationSource,
    pub gains: PidGains,
    pub disturbance: DisturbanceModel,
    /// s
    pub duration: f64,
    /// s
    pub settle_window: f64,
    /// Keep every n-th sample in the trace CSV.
    #[serde(default = "one")]
    pub trace_every: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub analyzer: AnalyzerSettings,
    /// Analysis band, Hz.
    pub band_hz: (f64, f64),
    pub analysis_frequency_hz: f64,
    pub analysis_window_hz: f64,
    pub excess: ExcessNoise,
    /// Mean optical power on each photodiode, W.
    pub power_per_detector_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    /// Squeezing below shot noise (positive dB) at a frequency.
    SqueezingDbAt {
        frequency_hz: f64,
        /// Include the detection chain efficiency.
        #[serde(default)]
        detected: bool,
    },
    /// OPO threshold relative to the unswept scenario.
    ThresholdScale,
    /// Conversion efficiency at a pump power, threshold rescaled with loss.
    Conversion { pump_w: f64 },
    /// Reported cavity beam radius at a named plane, m.
    Waist {
        plane: String,
        #[serde(default = "tangential")]
        transverse: Plane,
    },
}

fn tangential() -> Plane {
    Plane::Tangential
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Dotted key path of a numeric leaf, e.g. `opo.config.t1`.
    pub parameter: String,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    #[serde(default)]
    pub method: SearchMethod,
    #[serde(default)]
    pub goal: Goal,
    pub objective: ObjectiveSpec,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn paper_fig1() -> Self {
        Self::from_json(PAPER_FIG1).expect("shipped scenario is valid")
    }

    /// Canonical pretty-printed JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    /// Check every present section against its module invariants.
    pub fn validate(&self) -> Result<()> {
        if let Some(l) = &self.laser {
            l.config
                .validate()
                .map_err(|e| Error::in_section("laser.config", e))?;
            l.gain_medium
                .validate()
                .map_err(|e| Error::in_section("laser.gain_medium", e))?;
            if l.table.steps < 2 || !(l.table.min_w <= l.table.max_w) {
                return Err(Error::config(
                    "laser.table",
                    "need steps >= 2 and min_w <= max_w",
                ));
            }
        }
        if let Some(r) = &self.ring_cavity {
            r.validate()
                .map_err(|e| Error::in_section("ring_cavity", e))?;
        }
        if let Some(o) = &self.opo {
            o.config
                .validate()
                .map_err(|e| Error::in_section("opo.config", e))?;
            if o.spectrum.steps < 2 || !(o.spectrum.max_hz > 0.0) {
                return Err(Error::config(
                    "opo.spectrum",
                    "need steps >= 2 and max_hz > 0",
                ));
            }
        }
        if let Some(d) = &self.detection {
            d.validate()
                .map_err(|e| Error::in_section("detection", e))?;
        }
        if let Some(l) = &self.lock {
            let wrap = |e| Error::in_section("lock", crate::lock::LockError::InvalidParameter(e));
            l.modulation
                .validate()
                .map_err(|e| Error::in_section("lock.modulation", e))?;
            l.gains
                .validate()
                .map_err(|e| Error::in_section("lock.gains", e))?;
            l.disturbance
                .validate()
                .map_err(|e| Error::in_section("lock.disturbance", e))?;
            if !(l.duration > 0.0) || !(l.settle_window >= 0.0) {
                return Err(wrap("duration must be > 0 and settle_window >= 0".into()));
            }
        }
        if let Some(b) = &self.bench {
            b.analyzer
                .validate()
                .map_err(|e| Error::in_section("bench.analyzer", e))?;
            if !(b.band_hz.0 < b.band_hz.1) {
                return Err(Error::config("bench.band_hz", "band must be increasing"));
            }
        }
        if let Some(s) = &self.sweep {
            if s.steps < 2 || !(s.min <= s.max) {
                return Err(Error::config("sweep", "need steps >= 2 and min <= max"));
            }
        }
        Ok(())
    }

    /// Copy of the scenario with the numeric leaf at `path` replaced.
    pub fn with_parameter(&self, path: &str, value: f64) -> Result<Scenario> {
        let mut json = serde_json::to_value(self).expect("scenario serialises");
        let mut node = &mut json;
        for key in path.split('.') {
            node = match node {
                serde_json::Value::Object(map) => map.get_mut(key),
                serde_json::Value::Array(items) => {
                    key.parse::<usize>().ok().and_then(|i| items.get_mut(i))
                }
                _ => None,
            }
            .ok_or_else(|| Error::config(path, format!("no key `{key}`")))?;
        }
        if !node.is_number() {
            return Err(Error::config(path, "not a numeric leaf"));
        }
        *node = serde_json::Number::from_f64(value)
            .map(serde_json::Value::Number)
            .ok_or_else(|| Error::config(path, format!("value {value} is not finite")))?;
        let text = json.to_string();
        Scenario::from_json(&text)
    }

    pub fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T> {
        section
            .as_ref()
            .ok_or_else(|| Error::config(name, "section missing from scenario"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_scenario_parses_and_round_trips() {
        let s = Scenario::paper_fig1();
        let again = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(s, again);
        assert_eq!(again.to_json(), s.to_json());
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let mut v: serde_json::Value = serde_json::from_str(PAPER_FIG1).unwrap();
        v["opo"]["config"]["t_1"] = serde_json::json!(0.03);
        let err = Scenario::from_json(&v.to_string()).unwrap_err();
        match &err {
            Error::Config { path, message } => {
                assert!(path.starts_with("opo.config"), "{path}");
                assert!(message.contains("t_1"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn invariant_violation_is_a_validation_error() {
        let mut v: serde_json::Value = serde_json::from_str(PAPER_FIG1).unwrap();
        v["opo"]["config"]["t1"] = serde_json::json!(1.5);
        let err = Scenario::from_json(&v.to_string()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("opo.config"));
    }

    #[test]
    fn parameter_override() {
        let s = Scenario::paper_fig1();
        let t = s.with_parameter("opo.config.t1", 0.05).unwrap();
        assert_eq!(t.opo.unwrap().config.t1, 0.05);
        assert!(s.with_parameter("opo.config.nope", 0.05).is_err());
        assert!(s.with_parameter("metadata.title", 1.0).is_err());
        let r = s.with_parameter("ring_cavity.elements.0.d", 0.03).unwrap();
        assert_eq!(
            r.ring_cavity.unwrap().elements[0],
            ElementSpec::FreeSpace { d: 0.03 }
        );
    }
}
