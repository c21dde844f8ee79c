//! End-fire array gain and the two-step broad/narrow azimuth alignment of a
//! UAV backhaul antenna, with fallback to the broad beam when orientation
//! cannot be held.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angular_offset_deg, normalize_deg};

/// Maximum pattern attenuation relative to the peak.
pub const SIDELOBE_FLOOR_DB: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignmentConfig {
    pub element_count: u32,
    pub broad_subset: u32,
    pub element_gain_dbi: f64,
    /// Half-power beamwidth of a single element.
    pub hpbw1_deg: f64,
    pub coarse_step_deg: f64,
    pub fine_step_deg: f64,
    pub fallback_threshold_db: f64,
    pub fallback_count: u32,
    /// Measurements below this level count as no signal.
    pub noise_floor_dbm: f64,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig {
            element_count: 8,
            broad_subset: 2,
            element_gain_dbi: 5.0,
            hpbw1_deg: 90.0,
            coarse_step_deg: 10.0,
            fine_step_deg: 1.0,
            fallback_threshold_db: 3.0,
            fallback_count: 3,
            noise_floor_dbm: -110.0,
        }
    }
}

impl AlignmentConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(1 <= self.broad_subset && self.broad_subset < self.element_count) {
            v.push("alignment: broad_subset must satisfy 1 <= k < element_count".to_string());
        }
        if !(self.coarse_step_deg > 0.0) || !(self.fine_step_deg > 0.0) {
            v.push("alignment: scan steps must be > 0".to_string());
        }
        if !(self.fallback_threshold_db > 0.0) {
            v.push("alignment: fallback_threshold_db must be > 0".to_string());
        }
        if !(self.hpbw1_deg > 0.0) {
            v.push("alignment: hpbw1_deg must be > 0".to_string());
        }
        v
    }

    pub fn hpbw_deg(&self, n_active: u32) -> f64 {
        self.hpbw1_deg / f64::from(n_active).sqrt()
    }
}

/// Gain of `n_active` end-fire elements at `offset_deg` from the array axis.
pub fn endfire_gain_db(element_gain_dbi: f64, hpbw1_deg: f64, n_active: u32, offset_deg: f64) -> f64 {
    let n = f64::from(n_active.max(1));
    let hpbw = hpbw1_deg / n.sqrt();
    let offset = angular_offset_deg(offset_deg, 0.0);
    element_gain_dbi + 10.0 * n.log10() - (12.0 * (offset / hpbw).powi(2)).min(SIDELOBE_FLOOR_DB)
}

pub fn array_gain_db(n_active: u32, offset_deg: f64, config: &AlignmentConfig) -> f64 {
    debug_assert!(n_active >= 1 && n_active <= config.element_count);
    endfire_gain_db(config.element_gain_dbi, config.hpbw1_deg, n_active, offset_deg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamMode {
    Broad,
    Narrow,
}

impl BeamMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BeamMode::Broad => "broad",
            BeamMode::Narrow => "narrow",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentState {
    pub mode: BeamMode,
    pub active_elements: u32,
    pub orientation_deg: f64,
    /// Received power at the aligned narrow beam; the fallback reference.
    pub reference_rx_dbm: f64,
    pub consecutive_degraded: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: u8,
    pub orientation_deg: f64,
    pub n_active: u32,
    pub rx_power_dbm: f64,
    pub mode: BeamMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub state: AlignmentState,
    /// Orientation chosen by the broad scan.
    pub coarse_orientation_deg: f64,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("alignment failed: strongest measurement {best_dbm:.2} dBm is below the noise floor {floor_dbm:.2} dBm")]
    NoSignal { best_dbm: f64, floor_dbm: f64 },
    #[error("invalid alignment config: {0}")]
    Config(String),
}

/// Runs the broad scan with `broad_subset` elements over the full circle,
/// then a fine scan with all elements over `coarse ± hpbw(k)/2`.
///
/// `measure(orientation_deg, n_active)` returns received power in dBm.
pub fn align<M>(config: &AlignmentConfig, mut measure: M) -> Result<Alignment, AlignError>
where
    M: FnMut(f64, u32) -> f64,
{
    let problems = config.violations();
    if !problems.is_empty() {
        return Err(AlignError::Config(problems.join("; ")));
    }
    let k = config.broad_subset;
    let n = config.element_count;
    let mut trace = Vec::new();

    let mut best: Option<(f64, f64)> = None;
    let mut i = 0u32;
    loop {
        let orientation = f64::from(i) * config.coarse_step_deg;
        if orientation >= 360.0 {
            break;
        }
        let rx = measure(orientation, k);
        trace.push(TraceRow { step: 1, orientation_deg: orientation, n_active: k, rx_power_dbm: rx, mode: BeamMode::Broad });
        if best.is_none_or(|(_, b)| rx > b) {
            best = Some((orientation, rx));
        }
        i += 1;
    }
    let (coarse, coarse_rx) = best.expect("at least one coarse orientation");
    if coarse_rx < config.noise_floor_dbm {
        return Err(AlignError::NoSignal { best_dbm: coarse_rx, floor_dbm: config.noise_floor_dbm });
    }

    // Fine grid anchored on the coarse optimum.
    let half = config.hpbw_deg(k) / 2.0;
    let reach = (half / config.fine_step_deg + 1e-9).floor() as i64;
    let mut fine_best: Option<(f64, f64)> = None;
    for j in -reach..=reach {
        let orientation = normalize_deg(coarse + j as f64 * config.fine_step_deg);
        let rx = measure(orientation, n);
        trace.push(TraceRow { step: 2, orientation_deg: orientation, n_active: n, rx_power_dbm: rx, mode: BeamMode::Narrow });
        if fine_best.is_none_or(|(_, b)| rx > b) {
            fine_best = Some((orientation, rx));
        }
    }
    let (orientation, rx) = fine_best.expect("fine window contains the coarse optimum");

    Ok(Alignment {
        state: AlignmentState {
            mode: BeamMode::Narrow,
            active_elements: n,
            orientation_deg: orientation,
            reference_rx_dbm: rx,
            consecutive_degraded: 0,
        },
        coarse_orientation_deg: coarse,
        trace,
    })
}

/// One received-power report while holding the aligned orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSample {
    pub orientation_error_deg: f64,
    pub rx_power_dbm: f64,
}

impl AlignmentState {
    /// Feeds one sample; returns `true` when this sample triggered the
    /// switch to the broad beam. Samples received in broad mode are ignored.
    pub fn observe(&mut self, config: &AlignmentConfig, sample: TrackSample) -> bool {
        if self.mode == BeamMode::Broad {
            return false;
        }
        let drop = self.reference_rx_dbm - sample.rx_power_dbm;
        if drop > config.fallback_threshold_db {
            self.consecutive_degraded += 1;
            if self.consecutive_degraded >= config.fallback_count {
                self.mode = BeamMode::Broad;
                self.active_elements = config.broad_subset;
                self.consecutive_degraded = 0;
                return true;
            }
        } else {
            self.consecutive_degraded = 0;
        }
        false
    }
}

/// State after each sample of the stream.
pub fn track<I>(state: &AlignmentState, config: &AlignmentConfig, samples: I) -> Vec<AlignmentState>
where
    I: IntoIterator<Item = TrackSample>,
{
    let mut s = state.clone();
    samples
        .into_iter()
        .map(|sample| {
            s.observe(config, sample);
            s.clone()
        })
        .collect()
}

/// Noiseless measurement model: a donor at a fixed bearing seen through the
/// array pattern over a fixed link budget.
#[derive(Debug, Clone)]
pub struct BearingHarness {
    pub target_bearing_deg: f64,
    /// Received power excluding the array gain.
    pub link_budget_dbm: f64,
    pub config: AlignmentConfig,
}

impl BearingHarness {
    pub fn new(target_bearing_deg: f64, config: AlignmentConfig) -> Self {
        BearingHarness { target_bearing_deg, link_budget_dbm: -60.0, config }
    }

    pub fn measure(&self, orientation_deg: f64, n_active: u32) -> f64 {
        self.link_budget_dbm + array_gain_db(n_active, orientation_deg - self.target_bearing_deg, &self.config)
    }

    /// Sample for a given orientation error while holding the state's beam.
    pub fn sample(&self, state: &AlignmentState, orientation_error_deg: f64) -> TrackSample {
        let actual = state.orientation_deg + orientation_error_deg;
        TrackSample { orientation_error_deg, rx_power_dbm: self.measure(actual, state.active_elements) }
    }
}

pub const TRACE_CSV_HEADER: &str = "step,orientation_deg,n_active,rx_power_dbm,mode";

pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for r in trace {
        let _ = writeln!(
            out,
            "{},{:.6},{},{:.6},{}",
            r.step,
            r.orientation_deg,
            r.n_active,
            r.rx_power_dbm,
            r.mode.as_str()
        );
    }
    out
}
