//! Log-distance pathloss, sector/isotropic/end-fire antenna gains and the
//! dB-domain link budget.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beam;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Reference distance of the free-space anchor.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;
/// Thermal noise power spectral density at 290 K.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

#[derive(Debug, Error, PartialEq)]
pub enum PropagationError {
    #[error("non-finite {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },
}

/// Kind of radio link, selecting the pathloss exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkClass {
    TerrestrialBsUe,
    AerialBsUe,
    BsBs,
    UeUe,
    BackhaulLos,
}

impl LinkClass {
    pub const ALL: [LinkClass; 5] = [
        LinkClass::TerrestrialBsUe,
        LinkClass::AerialBsUe,
        LinkClass::BsBs,
        LinkClass::UeUe,
        LinkClass::BackhaulLos,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathlossExponents {
    pub terrestrial_bs_ue: f64,
    pub aerial_bs_ue: f64,
    pub bs_bs: f64,
    pub ue_ue: f64,
    pub backhaul_los: f64,
}

impl Default for PathlossExponents {
    fn default() -> Self {
        PathlossExponents {
            terrestrial_bs_ue: 3.5,
            aerial_bs_ue: 2.5,
            bs_bs: 3.0,
            ue_ue: 4.0,
            backhaul_los: 2.0,
        }
    }
}

impl PathlossExponents {
    pub fn exponent(&self, class: LinkClass) -> f64 {
        match class {
            LinkClass::TerrestrialBsUe => self.terrestrial_bs_ue,
            LinkClass::AerialBsUe => self.aerial_bs_ue,
            LinkClass::BsBs => self.bs_bs,
            LinkClass::UeUe => self.ue_ue,
            LinkClass::BackhaulLos => self.backhaul_los,
        }
    }
}

/// The `propagation` section of a scenario file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    pub exponents: PathlossExponents,
}

impl PropagationConfig {
    pub fn pathloss_db(&self, class: LinkClass, frequency_hz: f64, distance_m: f64) -> Result<f64, PropagationError> {
        pathloss_db_with(&self.exponents, class, frequency_hz, distance_m)
    }
}

/// Pathloss with the default exponent table.
pub fn pathloss_db(class: LinkClass, frequency_hz: f64, distance_m: f64) -> Result<f64, PropagationError> {
    pathloss_db_with(&PathlossExponents::default(), class, frequency_hz, distance_m)
}

/// `20·log10(4π·f·d0/c) + 10·n·log10(d/d0)`; distances below `d0` are clamped.
pub fn pathloss_db_with(
    exponents: &PathlossExponents,
    class: LinkClass,
    frequency_hz: f64,
    distance_m: f64,
) -> Result<f64, PropagationError> {
    if !frequency_hz.is_finite() {
        return Err(PropagationError::NonFinite { what: "frequency", value: frequency_hz });
    }
    if !distance_m.is_finite() {
        return Err(PropagationError::NonFinite { what: "distance", value: distance_m });
    }
    let d = distance_m.max(REFERENCE_DISTANCE_M);
    let free_space = 20.0 * (4.0 * std::f64::consts::PI * frequency_hz * REFERENCE_DISTANCE_M / SPEED_OF_LIGHT).log10();
    Ok(free_space + 10.0 * exponents.exponent(class) * (d / REFERENCE_DISTANCE_M).log10())
}

/// Radiation pattern of a sector or backhaul antenna.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AntennaPattern {
    Isotropic {
        #[serde(default)]
        max_gain_dbi: f64,
    },
    /// Parabolic horizontal pattern clipped at the front-to-back floor.
    Sector3gpp {
        max_gain_dbi: f64,
        #[serde(default = "default_hpbw")]
        hpbw_deg: f64,
        #[serde(default = "default_front_to_back")]
        front_to_back_db: f64,
    },
    EndfireArray {
        element_gain_dbi: f64,
        element_count: u32,
        /// Beamwidth of a single element.
        hpbw_deg: f64,
        /// Elements switched on; defaults to all of them.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        active_elements: Option<u32>,
    },
}

fn default_hpbw() -> f64 {
    65.0
}

fn default_front_to_back() -> f64 {
    30.0
}

impl AntennaPattern {
    pub fn sector(max_gain_dbi: f64) -> Self {
        AntennaPattern::Sector3gpp {
            max_gain_dbi,
            hpbw_deg: default_hpbw(),
            front_to_back_db: default_front_to_back(),
        }
    }

    pub fn max_gain_dbi(&self) -> f64 {
        match *self {
            AntennaPattern::Isotropic { max_gain_dbi } => max_gain_dbi,
            AntennaPattern::Sector3gpp { max_gain_dbi, .. } => max_gain_dbi,
            AntennaPattern::EndfireArray { element_gain_dbi, element_count, active_elements, .. } => {
                element_gain_dbi + 10.0 * f64::from(active_elements.unwrap_or(element_count)).log10()
            }
        }
    }

    /// Lists violated invariants, prefixed with `ctx`.
    pub fn violations(&self, ctx: &str) -> Vec<String> {
        let mut out = Vec::new();
        match *self {
            AntennaPattern::Isotropic { max_gain_dbi } => {
                if !max_gain_dbi.is_finite() {
                    out.push(format!("{ctx}: max_gain_dbi must be finite"));
                }
            }
            AntennaPattern::Sector3gpp { max_gain_dbi, hpbw_deg, front_to_back_db } => {
                if !max_gain_dbi.is_finite() {
                    out.push(format!("{ctx}: max_gain_dbi must be finite"));
                }
                if !(hpbw_deg > 0.0) {
                    out.push(format!("{ctx}: hpbw_deg must be > 0"));
                }
                if !(front_to_back_db > 0.0) {
                    out.push(format!("{ctx}: front_to_back_db must be > 0"));
                }
            }
            AntennaPattern::EndfireArray { element_count, hpbw_deg, active_elements, .. } => {
                if element_count < 1 {
                    out.push(format!("{ctx}: element_count must be >= 1"));
                }
                if !(hpbw_deg > 0.0) {
                    out.push(format!("{ctx}: hpbw_deg must be > 0"));
                }
                if let Some(a) = active_elements {
                    if a < 1 || a > element_count {
                        out.push(format!("{ctx}: active_elements must be in [1, element_count]"));
                    }
                }
            }
        }
        out
    }
}

/// Gain towards a target `offset_deg` away from boresight. Any angle is
/// accepted and folded into `[0, 180]`.
pub fn antenna_gain_db(pattern: &AntennaPattern, offset_deg: f64) -> f64 {
    let offset = crate::geometry::angular_offset_deg(offset_deg, 0.0);
    match *pattern {
        AntennaPattern::Isotropic { max_gain_dbi } => max_gain_dbi,
        AntennaPattern::Sector3gpp { max_gain_dbi, hpbw_deg, front_to_back_db } => {
            max_gain_dbi - (12.0 * (offset / hpbw_deg).powi(2)).min(front_to_back_db)
        }
        AntennaPattern::EndfireArray { element_gain_dbi, element_count, hpbw_deg, active_elements } => {
            beam::endfire_gain_db(element_gain_dbi, hpbw_deg, active_elements.unwrap_or(element_count), offset)
        }
    }
}

pub fn rx_power_dbm(tx_power_dbm: f64, tx_gain_dbi: f64, rx_gain_dbi: f64, pathloss_db: f64) -> f64 {
    tx_power_dbm + tx_gain_dbi + rx_gain_dbi - pathloss_db
}

pub fn thermal_noise_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    THERMAL_NOISE_DBM_PER_HZ + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1000.0).log10()
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}
