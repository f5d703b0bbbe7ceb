//! The analyses behind each `twinbeam` subcommand.
//!
//! Every command takes a validated [`Scenario`] and returns a [`Report`]:
//! a JSON summary, the CSV files to write and the process exit code. Nothing
//! here touches the filesystem.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use crate::bench::{run_bench as bench_pipeline, BenchError, BenchRun, TwinBeamNoiseModel};
use crate::laser::calibrate_laser;
use crate::lock::{simulate_lock, CavityResponse};
use crate::opo::{detection_corrected, OpoConfig};
use crate::optics::{mode_match_overlap, BeamParameter, Plane};
use crate::scenario::{ObjectiveSpec, Scenario};
use crate::spectrum::{fmt_num, NoiseSpectrum};
use crate::sweep::{run_sweep as sweep_grid, SweepError};
use crate::units::{from_db, to_db};
use crate::{Error, Result};

/// Per-run overrides from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    pub seed: u64,
    /// mW
    pub pump_mw: Option<f64>,
    /// s
    pub duration: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub summary: Value,
    /// (file name, contents)
    pub files: Vec<(String, String)>,
    /// Lines for the terminal.
    pub messages: Vec<String>,
    pub exit_code: i32,
}

impl Report {
    fn ok(summary: Value) -> Self {
        Self {
            summary,
            files: Vec::new(),
            messages: Vec::new(),
            exit_code: 0,
        }
    }

    fn file(mut self, name: &str, contents: String) -> Self {
        self.files.push((name.to_string(), contents));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Laser,
    Cavity,
    Opo,
    Lock,
    Bench,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Laser => "laser",
            Command::Cavity => "cavity",
            Command::Opo => "opo",
            Command::Lock => "lock",
            Command::Bench => "bench",
            Command::Sweep => "sweep",
        }
    }
}

/// Dispatch one command and stamp the summary with run metadata.
pub fn run(command: Command, scenario: &Scenario, opts: &RunOptions) -> Result<Report> {
    let mut report = match command {
        Command::Laser => run_laser(scenario, opts),
        Command::Cavity => run_cavity(scenario),
        Command::Opo => run_opo(scenario, opts),
        Command::Lock => run_lock(scenario, opts),
        Command::Bench => run_bench(scenario, opts),
        Command::Sweep => run_sweep(scenario),
    }?;
    if let Value::Object(map) = &mut report.summary {
        map.insert("command".into(), json!(command.name()));
        map.insert("title".into(), json!(scenario.metadata.title));
        map.insert("seed".into(), json!(opts.seed));
    }
    Ok(report)
}

fn pump_override_w(opts: &RunOptions) -> Result<Option<f64>> {
    match opts.pump_mw {
        Some(p) if !(p >= 0.0 && p.is_finite()) => Err(Error::config(
            "--pump",
            format!("pump must be a non-negative power, got {p} mW"),
        )),
        Some(p) => Ok(Some(p * 1e-3)),
        None => Ok(None),
    }
}

fn csv_rows<const N: usize>(header: &str, rows: impl IntoIterator<Item = [f64; N]>) -> String {
    let mut out = format!("{header}\n");
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_num(*v)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

fn linspace(min: f64, max: f64, steps: usize) -> Vec<f64> {
    let h = (max - min) / (steps - 1) as f64;
    (0..steps)
        .map(|i| {
            if i == steps - 1 {
                max
            } else {
                min + h * i as f64
            }
        })
        .collect()
}

pub fn run_laser(scenario: &Scenario, opts: &RunOptions) -> Result<Report> {
    let section = Scenario::require(&scenario.laser, "laser")?;
    let mut config = section.config.clone();
    let mut shg_source = "config";
    if config.shg_coupling.is_none() || config.saturation_power.is_none() {
        if let Some(anchor) = section.shg_anchor {
            let fitted = calibrate_laser(
                config.threshold_pump,
                (anchor.pump_w, anchor.output_w),
                config.round_trip_loss,
            )
            .map_err(|e| Error::in_section("laser.shg_anchor", e))?;
            config.shg_coupling = fitted.shg_coupling;
            config.saturation_power = fitted.saturation_power;
            shg_source = "shg_anchor";
        } else {
            shg_source = "none";
        }
    }
    let has_shg = shg_source != "none";

    let pumps = match pump_override_w(opts)? {
        Some(p) => vec![p],
        None => section.pump_w.clone(),
    };
    let point = |p: f64| -> Result<Value> {
        let mut v = json!({ "pump_w": p, "green_linear_w": config.green_output_linear(p) });
        if has_shg {
            v["green_shg_w"] = json!(config.green_output_shg(p)?);
        }
        Ok(v)
    };
    let points = pumps
        .iter()
        .map(|&p| point(p))
        .collect::<Result<Vec<_>>>()?;

    let table = section.table;
    let grid = linspace(table.min_w, table.max_w, table.steps);
    let csv = if has_shg {
        let rows = grid
            .iter()
            .map(|&p| {
                Ok([
                    p,
                    config.green_output_linear(p),
                    config.green_output_shg(p)?,
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        csv_rows("pump_w,green_linear_w,green_shg_w", rows)
    } else {
        csv_rows(
            "pump_w,green_linear_w",
            grid.iter().map(|&p| [p, config.green_output_linear(p)]),
        )
    };

    let summary = json!({
        "threshold_pump_w": config.threshold_pump,
        "slope_efficiency": config.slope_efficiency,
        "absorbed_fraction": section.gain_medium.absorbed_fraction(),
        "shg_model": {
            "source": shg_source,
            "shg_coupling_per_w": config.shg_coupling,
            "saturation_power_w": config.saturation_power,
        },
        "points": points,
    });
    Ok(Report::ok(summary).file("laser_output.csv", csv))
}

#[derive(Debug, Serialize)]
struct PlaneReport {
    name: String,
    after: usize,
    transverse: Plane,
    radius_m: f64,
    waist_m: f64,
    distance_from_waist_m: f64,
}

pub fn run_cavity(scenario: &Scenario) -> Result<Report> {
    let section = Scenario::require(&scenario.ring_cavity, "ring_cavity")?;
    let cavity = section.cavity()?;
    let transverse = [Plane::Tangential, Plane::Sagittal];
    let mut stability = serde_json::Map::new();
    let mut unstable = Vec::new();
    for t in transverse {
        let m = cavity.stability(t)?;
        stability.insert(format!("{t:?}").to_lowercase(), json!(m));
        if !(m.abs() < 1.0) {
            unstable.push(format!("{t:?} plane unstable: |(a+d)/2| = {:.6}", m.abs()));
        }
    }
    let mut summary = json!({
        "round_trip_length_m": cavity.length(),
        "stability_half_trace": stability,
        "stable": unstable.is_empty(),
    });
    if !unstable.is_empty() {
        let mut report = Report::ok(summary);
        report.messages = unstable;
        report.exit_code = 3;
        return Ok(report);
    }
    if let Some((model, pump)) = section.thermal_model()? {
        summary["thermal_focal_length_m"] = json!(model.focal_length(pump)?);
    }

    let mut planes = Vec::new();
    for spec in &section.planes {
        for t in transverse {
            let embedded = cavity.beam_at(t, spec.after)?;
            let beam = BeamParameter::with_m2(embedded.q, embedded.wavelength, section.m2.get(t))?;
            planes.push(PlaneReport {
                name: spec.name.clone(),
                after: spec.after,
                transverse: t,
                radius_m: beam.reported_radius(),
                waist_m: beam.reported_waist_radius(),
                distance_from_waist_m: beam.distance_from_waist(),
            });
        }
    }
    let mut csv = String::from("plane,after,transverse,radius_m,waist_m,distance_from_waist_m\n");
    for p in &planes {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            p.name,
            p.after,
            format!("{:?}", p.transverse).to_lowercase(),
            fmt_num(p.radius_m),
            fmt_num(p.waist_m),
            fmt_num(p.distance_from_waist_m)
        );
    }
    summary["planes"] = serde_json::to_value(&planes).expect("plain data");

    if let Some(reference) = &section.reference_beam {
        let after = section.plane(&reference.plane)?.after;
        let pump =
            BeamParameter::from_waist(reference.waist, reference.waist_offset, section.wavelength)?;
        let mut overlap = serde_json::Map::new();
        for t in transverse {
            let mode = cavity.beam_at(t, after)?;
            overlap.insert(
                format!("{t:?}").to_lowercase(),
                json!(mode_match_overlap(&mode, &pump)?),
            );
        }
        summary["mode_match"] = json!({ "plane": reference.plane, "overlap": overlap });
    }
    Ok(Report::ok(summary).file("cavity_planes.csv", csv))
}

pub fn run_opo(scenario: &Scenario, opts: &RunOptions) -> Result<Report> {
    let section = Scenario::require(&scenario.opo, "opo")?;
    let detection = Scenario::require(&scenario.detection, "detection")?;
    let cfg = &section.config;
    let eta_det = detection.total_efficiency();
    let lw = cfg.linewidth();

    let grid = linspace(0.0, section.spectrum.max_hz, section.spectrum.steps);
    let intrinsic = cfg.spectrum(1.0, grid.clone())?;
    let detected = cfg.spectrum(eta_det, grid)?;

    let analysis_hz = section.measured.map_or(3e6, |m| m.analysis_frequency_hz);
    let mut summary = json!({
        "escape_efficiency": cfg.escape_efficiency(),
        "total_loss": cfg.total_loss(),
        "optical_length_m": cfg.optical_length(),
        "fsr_hz": lw.fsr,
        "finesse": lw.finesse,
        "fwhm_hz": lw.fwhm,
        "energy_conservation_error": cfg.energy_conservation_error(),
        "detection_efficiency": eta_det,
        "analysis_frequency_hz": analysis_hz,
        "squeezing_db": to_db(cfg.squeezing(1.0, analysis_hz)),
        "detected_squeezing_db": to_db(cfg.squeezing(eta_det, analysis_hz)),
        "zero_frequency_limit_db": to_db(cfg.squeezing(1.0, 0.0)),
    });

    let pump = pump_override_w(opts)?
        .or(section.pump_w)
        .or(section.measured.map(|m| m.conversion_pump_w));
    if let (Some(p), Some(p_th)) = (pump, cfg.p_threshold) {
        summary["threshold_w"] = json!(p_th);
        summary["conversion"] = json!({
            "pump_w": p,
            "pump_over_threshold": p / p_th,
            "efficiency": cfg.conversion_efficiency(p)?,
        });
        summary["effective_coupling"] = json!(cfg.effective_coupling()?);
    }

    let mut messages = Vec::new();
    if let Some(m) = section.measured {
        let s_meas = from_db(-m.squeezing_db);
        let inferred = detection_corrected(s_meas, eta_det)?;
        let inferred_db = -to_db(inferred);
        let conversion = cfg
            .p_threshold
            .map(|_| cfg.conversion_efficiency(m.conversion_pump_w))
            .transpose()?;
        let source = |key: &str| scenario.sources.get(key).cloned().unwrap_or_default();
        let mut non_repro = vec![json!({
            "quantity": "inferred output squeezing (dB below shot noise)",
            "reported": m.reported_inferred_db,
            "computed": inferred_db,
            "detection_efficiency": eta_det,
            "source": source("opo.measured.reported_inferred_db"),
        })];
        messages.push(format!(
            "not reproduced: inferred squeezing reported {:.1} dB, detection-corrected {:.2} dB from {:.1} dB measured at eta = {:.4}",
            m.reported_inferred_db, inferred_db, m.squeezing_db, eta_det
        ));
        if let Some(c) = conversion {
            non_repro.push(json!({
                "quantity": "pump to twin-beam power conversion",
                "reported": m.conversion,
                "computed": c,
                "pump_w": m.conversion_pump_w,
                "source": source("opo.measured.conversion"),
            }));
            messages.push(format!(
                "not reproduced: conversion reported {:.0}%, model {:.1}% at {:.1} mW pump",
                100.0 * m.conversion,
                100.0 * c,
                1e3 * m.conversion_pump_w
            ));
        }
        summary["measured"] = json!({
            "squeezing_db": m.squeezing_db,
            "theoretical_db": m.theoretical_db,
            "model_detected_db": -to_db(cfg.squeezing(eta_det, m.analysis_frequency_hz)),
            "model_theoretical_db": -to_db(cfg.squeezing(1.0, m.analysis_frequency_hz)),
        });
        summary["non_reproductions"] = Value::Array(non_repro);
    }

    let mut report = Report::ok(summary)
        .file("opo_spectrum.csv", intrinsic.to_csv())
        .file("opo_spectrum_detected.csv", detected.to_csv());
    report.messages = messages;
    Ok(report)
}

pub fn run_lock(scenario: &Scenario, opts: &RunOptions) -> Result<Report> {
    let section = Scenario::require(&scenario.lock, "lock")?;
    let opo = Scenario::require(&scenario.opo, "opo")?;
    let cavity = CavityResponse::from_opo(&opo.config)?;
    let duration = opts.duration.unwrap_or(section.duration);
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::config(
            "--duration",
            format!("must be positive, got {duration}"),
        ));
    }
    let mut disturbance = section.disturbance;
    disturbance.seed = opts.seed;
    let trace = simulate_lock(
        &cavity,
        &section.modulation,
        &section.gains,
        &disturbance,
        duration,
        section.settle_window,
    )?;
    let s = &trace.summary;
    let summary = json!({
        "duration_s": duration,
        "samples": trace.samples.len(),
        "fwhm_hz": s.fwhm,
        "rms_detuning_hz": s.rms_detuning,
        "rms_limit_hz": s.fwhm / 50.0,
        "max_abs_detuning_hz": s.max_abs_detuning,
        "final_detuning_hz": s.final_detuning,
        "settle_window_s": s.settle_window,
        "settle_time_s": s.settle_time,
        "locked": s.locked,
        "pdh_slope_per_hz": cavity.pdh_slope(&section.modulation, 0.0),
    });
    let mut report = Report::ok(summary).file("lock_trace.csv", trace.to_csv(section.trace_every));
    if !s.locked {
        report.exit_code = 3;
        report.messages.push(format!(
            "lock lost: |detuning| exceeded fwhm/2 = {:.3e} Hz for more than 10 ms",
            s.fwhm / 2.0
        ));
    }
    Ok(report)
}

/// Noise model of the bench from the OPO, detection and bench sections.
pub fn bench_model(scenario: &Scenario, seed: u64) -> Result<(TwinBeamNoiseModel, BenchRun)> {
    let section = Scenario::require(&scenario.bench, "bench")?;
    let opo = Scenario::require(&scenario.opo, "opo")?;
    let detection = Scenario::require(&scenario.detection, "detection")?;
    if section.power_per_detector_w > detection.saturation {
        return Err(BenchError::Saturation {
            power: section.power_per_detector_w,
            limit: detection.saturation,
        }
        .into());
    }
    let cfg: OpoConfig = opo.config.clone();
    let model = TwinBeamNoiseModel {
        diff_spectrum: Arc::new(move |f| cfg.squeezing(1.0, f)),
        excess: section.excess.clone(),
        eta_det: detection.total_efficiency(),
        cmrr_db: detection.cmrr_db,
        electronic_floor_db: detection.electronic_floor_db,
        seed,
        light_on: true,
    };
    let run = BenchRun {
        settings: section.analyzer,
        band: section.band_hz,
        analysis_frequency: section.analysis_frequency_hz,
        analysis_window: section.analysis_window_hz,
    };
    Ok((model, run))
}

pub fn run_bench(scenario: &Scenario, opts: &RunOptions) -> Result<Report> {
    let (model, run) = bench_model(scenario, opts.seed)?;
    let result = bench_pipeline(&model, &run)?;

    let shot_db = result.calibration.db();
    let diff_db = result.difference.db();
    let fig3 = csv_rows(
        "freq_hz,shot_db,diff_db",
        result
            .calibration
            .frequencies()
            .iter()
            .zip(shot_db.iter().zip(&diff_db))
            .map(|(&f, (&a, &b))| [f, a, b]),
    );
    let squeezing = csv_rows(
        "freq_hz,squeezing_db",
        result
            .squeezing
            .frequencies
            .iter()
            .zip(&result.squeezing.db)
            .map(|(&f, &d)| [f, d]),
    );
    let analytic = NoiseSpectrum::from_fn(result.difference.frequencies().to_vec(), |f| {
        model.analytic_difference_psd(f, false)
    })?;
    let flatness = shot_db.iter().fold(0.0_f64, |m, d| m.max(d.abs()));

    let summary = json!({
        "n_averages": result.averages,
        "segment_len": run.settings.segment_len(),
        "bins": result.difference.len(),
        "shot_level_raw": result.shot_level,
        "calibration_max_abs_db": flatness,
        "min_db": result.analysis_minimum.0,
        "freq_at_min": result.analysis_minimum.1,
        "analysis_window_hz": [
            run.analysis_frequency - run.analysis_window,
            run.analysis_frequency + run.analysis_window,
        ],
        "band_min_db": result.band_minimum.0,
        "band_freq_at_min": result.band_minimum.1,
        "min_db_with_cmrr_leakage": result.analysis_minimum_with_leakage.0,
        "analytic_db_at_analysis_frequency":
            to_db(model.analytic_difference_psd(run.analysis_frequency, false)),
        "eta_det": model.eta_det,
    });
    Ok(Report::ok(summary)
        .file("fig3.csv", fig3)
        .file("squeezing.csv", squeezing)
        .file("difference.csv", result.difference.to_csv())
        .file(
            "difference_cmrr.csv",
            result.difference_with_leakage.to_csv(),
        )
        .file("difference_analytic.csv", analytic.to_csv()))
}

/// Value of a sweep objective for one scenario.
pub fn evaluate_objective(
    objective: &ObjectiveSpec,
    scenario: &Scenario,
    reference: &Scenario,
) -> Result<f64> {
    match objective {
        ObjectiveSpec::SqueezingDbAt {
            frequency_hz,
            detected,
        } => {
            let opo = Scenario::require(&scenario.opo, "opo")?;
            let eta = if *detected {
                Scenario::require(&scenario.detection, "detection")?.total_efficiency()
            } else {
                1.0
            };
            Ok(-to_db(opo.config.squeezing(eta, *frequency_hz)))
        }
        ObjectiveSpec::ThresholdScale => {
            let opo = Scenario::require(&scenario.opo, "opo")?;
            let base = Scenario::require(&reference.opo, "opo")?;
            Ok(opo.config.threshold_scale(&base.config))
        }
        ObjectiveSpec::Conversion { pump_w } => {
            let opo = Scenario::require(&scenario.opo, "opo")?;
            let base = Scenario::require(&reference.opo, "opo")?;
            let p_th = base.config.threshold()? * opo.config.threshold_scale(&base.config);
            let cfg = OpoConfig {
                p_threshold: Some(p_th),
                ..opo.config.clone()
            };
            Ok(cfg.conversion_efficiency(*pump_w)?)
        }
        ObjectiveSpec::Waist { plane, transverse } => {
            let section = Scenario::require(&scenario.ring_cavity, "ring_cavity")?;
            let after = section.plane(plane)?.after;
            let beam = section.cavity()?.beam_at(*transverse, after)?;
            Ok(beam.radius() * section.m2.get(*transverse).sqrt())
        }
    }
}

pub fn run_sweep(scenario: &Scenario) -> Result<Report> {
    let spec = Scenario::require(&scenario.sweep, "sweep")?;
    // reject bad key paths before evaluating anything
    scenario
        .with_parameter(&spec.parameter, spec.min)
        .map_err(|e| match e {
            Error::Config { path, message } => SweepError::Parameter { path, message }.into(),
            other => other,
        })?;
    let outcome = sweep_grid(
        spec.min,
        spec.max,
        spec.steps,
        spec.method,
        spec.goal,
        |x| {
            let variant = scenario.with_parameter(&spec.parameter, x)?;
            evaluate_objective(&spec.objective, &variant, scenario)
        },
    )?;
    let csv = csv_rows(
        "parameter,objective",
        outcome.rows.iter().map(|&(x, y)| [x, y]),
    );
    let summary = json!({
        "parameter": spec.parameter,
        "objective": spec.objective,
        "goal": spec.goal,
        "method": outcome.method,
        "fell_back_to_grid": outcome.fell_back_to_grid,
        "evaluations": outcome.evaluations,
        "optimum": { "parameter": outcome.optimum.0, "objective": outcome.optimum.1 },
    });
    let mut report = Report::ok(summary).file("sweep.csv", csv);
    if outcome.fell_back_to_grid {
        report
            .messages
            .push("objective is not unimodal on the grid; reporting the grid optimum".into());
    }
    Ok(report)
}
