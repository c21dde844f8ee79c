//! Browser bindings: distance sweeps, array beam patterns and alignment
//! traces, each returned as JSON for the static page in `www/`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use deploynet::beam::{align, array_gain_db, AlignmentConfig, BearingHarness, TraceRow};
use deploynet::runner::{sweep, SweepRow, SweepSpec};
use deploynet::scenario::parse_scenario;

#[derive(Serialize)]
struct PatternPoint {
    offset_deg: f64,
    gain_db: f64,
}

#[derive(Serialize)]
struct AlignReport {
    orientation_deg: f64,
    coarse_orientation_deg: f64,
    error_deg: f64,
    rx_power_dbm: f64,
    trace: Vec<TraceRow>,
}

/// Sweep rows for `scenario_json` with the area moving toward `toward`.
/// `distances_km` empty means the default sweep.
pub fn sweep_rows(scenario_json: &str, toward: &str, distances_km: &[f64]) -> Result<Vec<SweepRow>, String> {
    let scenario = parse_scenario(scenario_json).map_err(|e| e.to_string())?;
    let mut spec = SweepSpec::new(toward);
    if !distances_km.is_empty() {
        spec.distances_km = distances_km.to_vec();
    }
    sweep(&scenario, &spec).map_err(|e| e.to_string())
}

/// Gain over offsets -180..=180 in `step_deg` steps.
pub fn pattern_points(n_active: u32, config: &AlignmentConfig, step_deg: f64) -> Result<Vec<(f64, f64)>, String> {
    if n_active == 0 || n_active > config.element_count {
        return Err(format!("active elements must be in 1..={}", config.element_count));
    }
    if !(step_deg > 0.0) {
        return Err("step must be positive".into());
    }
    let steps = (360.0 / step_deg).floor() as i64;
    Ok((0..=steps)
        .map(|i| {
            let o = -180.0 + i as f64 * step_deg;
            (o, array_gain_db(n_active, o, config))
        })
        .collect())
}

fn alignment(bearing_deg: f64, coarse_step_deg: f64, fine_step_deg: f64) -> Result<AlignReport, String> {
    let config = AlignmentConfig { coarse_step_deg, fine_step_deg, ..AlignmentConfig::default() };
    let v = config.violations();
    if !v.is_empty() {
        return Err(v.join("; "));
    }
    let harness = BearingHarness::new(bearing_deg, config.clone());
    let a = align(&config, |o, n| harness.measure(o, n)).map_err(|e| e.to_string())?;
    Ok(AlignReport {
        orientation_deg: a.state.orientation_deg,
        coarse_orientation_deg: a.coarse_orientation_deg,
        error_deg: deploynet::geometry::angular_offset_deg(a.state.orientation_deg, bearing_deg),
        rx_power_dbm: a.state.reference_rx_dbm,
        trace: a.trace,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

#[wasm_bindgen]
pub fn baseline_scenario_json() -> String {
    deploynet::BASELINE_SCENARIO_JSON.to_string()
}

#[wasm_bindgen]
pub fn sweep_curve(scenario_json: &str, toward: &str, distances_km: Vec<f64>) -> Result<String, JsError> {
    sweep_rows(scenario_json, toward, &distances_km).map(|r| to_json(&r)).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn array_pattern(n_active: u32, element_gain_dbi: f64, hpbw1_deg: f64) -> Result<String, JsError> {
    let config = AlignmentConfig { element_gain_dbi, hpbw1_deg, ..AlignmentConfig::default() };
    let points = pattern_points(n_active, &config, 1.0).map_err(|e| JsError::new(&e))?;
    Ok(to_json(&points.into_iter().map(|(offset_deg, gain_db)| PatternPoint { offset_deg, gain_db }).collect::<Vec<_>>()))
}

#[wasm_bindgen]
pub fn align_trace(bearing_deg: f64, coarse_step_deg: f64, fine_step_deg: f64) -> Result<String, JsError> {
    alignment(bearing_deg, coarse_step_deg, fine_step_deg).map(|r| to_json(&r)).map_err(|e| JsError::new(&e))
}
