//! World description: networks, stations, users, spectrum and the
//! configuration-file schema that produces them.
//!
//! A scenario file is the JSON serialization of [`Scenario`] where every
//! optional field may be omitted (see [`DEFAULTS`]) plus an optional
//! `generate` block that places users deterministically at load time. A
//! loaded scenario serializes back to a file that loads to the same value.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{AllocationConfig, AllocationResult};
use crate::backhaul::BackhaulConfig;
use crate::beam::AlignmentConfig;
use crate::geometry::Position;
use crate::interference::RadioConfig;
use crate::propagation::{AntennaPattern, PropagationConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Every optional field of the scenario schema and the value it takes when
/// omitted.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("schema_version", "1"),
    ("seed", "0"),
    ("carrier_frequency_hz", "700e6"),
    ("bandwidth_dl_hz", "10e6"),
    ("bandwidth_ul_hz", "10e6"),
    ("noise_figure_bs_db", "5"),
    ("noise_figure_ue_db", "9"),
    ("networks[].duplex", "fdd"),
    ("networks[].tdd_dl_fraction", "0.5"),
    ("networks[].sync_group", "none (unsynchronized with every other network)"),
    ("networks[].carrier_frequency_hz", "scenario carrier"),
    ("networks[].reserved", "true for deployable_standalone, false otherwise"),
    ("networks[].backhaul", "{kind: none}"),
    ("backhaul satellite orbit", "geo"),
    ("backhaul satellite latency_ms", "300 (geo), 20 (leo)"),
    ("backhaul satellite capacity_mbps", "50"),
    ("backhaul microwave capacity_mbps", "1000"),
    ("backhaul microwave latency_ms", "0.1"),
    ("stations[].tx_power_w", "40 (macro), 10 (truck), 0.25 (uav)"),
    ("stations[].position z", "30 m (macro), 10 m (truck), 100 m (uav)"),
    ("stations[].sectors", "3x sector3gpp 15 dBi at 30/150/270 deg (macro, truck), 1x isotropic 2 dBi (uav)"),
    ("stations[].is_iab_donor / is_iab_node / local_core", "false"),
    ("users[].position z", "1.5 m"),
    ("users[].access_identity", "1 (mc), 10 (normal)"),
    ("users[].req_dl_mbps", "2 (mc), 1 (normal)"),
    ("users[].req_ul_mbps", "2 (mc), 0.5 (normal)"),
    ("users[].tx_power_max_dbm", "23"),
    ("users[].allowed_networks", "every network"),
    ("generate.normal_users_per_macro", "30"),
    ("generate.normal_radius_m", "2000"),
    ("generate.mc_networks", "every network"),
    ("generate.normal_networks", "every mobile network"),
    ("propagation.exponents", "terrestrial_bs_ue 3.5, aerial_bs_ue 2.5, bs_bs 3.0, ue_ue 4.0, backhaul_los 2.0"),
    ("radio.se_max", "7.4"),
    ("radio.sinr_min_db", "-6"),
    ("radio.acir_db", "30"),
    ("radio.tdd_overlap_mode", "worst_case"),
    ("radio.inter_network_interference", "true"),
    ("allocation.damping", "0.5"),
    ("allocation.tolerance", "1e-3"),
    ("allocation.max_iterations", "50"),
    ("allocation.power_control", "p0_dbm -85, alpha 0.8, p_max_dbm 23"),
    ("allocation.mc_allowed_on_mobile", "true"),
    ("allocation.cell_reserved", "per network"),
    ("allocation.barred_identities", "[]"),
    ("backhaul.bandwidth_hz", "100e6"),
    ("backhaul.frequency_hz", "scenario carrier"),
    ("backhaul.antenna_gain_dbi", "15"),
    ("backhaul.tx_power_dbm", "station tx power"),
    ("alignment", "N 8, k 2, element 5 dBi, hpbw1 90 deg, coarse 10 deg, fine 1 deg, threshold 3 dB, count 3, floor -110 dBm"),
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at line {line}, column {column} (field `{field}`): {message}")]
    Parse { line: usize, column: usize, field: String, message: String },
    #[error("invalid scenario: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("unknown user id {0}")]
    UnknownUser(UserId),
}

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }
    };
}

string_id!(NetworkId);
string_id!(StationId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index of a sector in station-then-sector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    Mobile,
    DeployableStandalone,
    DeployableIntegrated,
}

impl NetworkKind {
    pub fn is_deployable(&self) -> bool {
        !matches!(self, NetworkKind::Mobile)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Duplex {
    Fdd,
    Tdd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orbit {
    Geo,
    Leo,
}

/// How a network's stations reach a core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", from = "BackhaulRepr")]
#[derive(Default)]
pub enum Backhaul {
    #[default]
    None,
    Satellite { orbit: Orbit, capacity_mbps: f64, latency_ms: f64 },
    Microwave { capacity_mbps: f64, latency_ms: f64 },
    Iab,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum BackhaulRepr {
    None,
    Satellite {
        #[serde(default)]
        orbit: Option<Orbit>,
        #[serde(default)]
        capacity_mbps: Option<f64>,
        #[serde(default)]
        latency_ms: Option<f64>,
    },
    Microwave {
        #[serde(default)]
        capacity_mbps: Option<f64>,
        #[serde(default)]
        latency_ms: Option<f64>,
    },
    Iab,
}

impl From<BackhaulRepr> for Backhaul {
    fn from(r: BackhaulRepr) -> Self {
        match r {
            BackhaulRepr::None => Backhaul::None,
            BackhaulRepr::Iab => Backhaul::Iab,
            BackhaulRepr::Satellite { orbit, capacity_mbps, latency_ms } => {
                let orbit = orbit.unwrap_or(Orbit::Geo);
                let default_latency = match orbit {
                    Orbit::Geo => 300.0,
                    Orbit::Leo => 20.0,
                };
                Backhaul::Satellite {
                    orbit,
                    capacity_mbps: capacity_mbps.unwrap_or(50.0),
                    latency_ms: latency_ms.unwrap_or(default_latency),
                }
            }
            BackhaulRepr::Microwave { capacity_mbps, latency_ms } => Backhaul::Microwave {
                capacity_mbps: capacity_mbps.unwrap_or(1000.0),
                latency_ms: latency_ms.unwrap_or(0.1),
            },
        }
    }
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "NetworkRepr")]
pub struct NetworkConfig {
    pub id: NetworkId,
    pub kind: NetworkKind,
    pub duplex: Duplex,
    pub tdd_dl_fraction: f64,
    pub sync_group: Option<u32>,
    pub carrier_frequency_hz: Option<f64>,
    /// Cell reservation broadcast by this network's cells.
    pub reserved: bool,
    pub backhaul: Backhaul,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkRepr {
    id: NetworkId,
    kind: NetworkKind,
    #[serde(default)]
    duplex: Option<Duplex>,
    #[serde(default)]
    tdd_dl_fraction: Option<f64>,
    #[serde(default)]
    sync_group: Option<u32>,
    #[serde(default)]
    carrier_frequency_hz: Option<f64>,
    #[serde(default)]
    reserved: Option<bool>,
    #[serde(default)]
    backhaul: Backhaul,
}

impl From<NetworkRepr> for NetworkConfig {
    fn from(r: NetworkRepr) -> Self {
        NetworkConfig {
            reserved: r.reserved.unwrap_or(r.kind == NetworkKind::DeployableStandalone),
            id: r.id,
            kind: r.kind,
            duplex: r.duplex.unwrap_or(Duplex::Fdd),
            tdd_dl_fraction: r.tdd_dl_fraction.unwrap_or(0.5),
            sync_group: r.sync_group,
            carrier_frequency_hz: r.carrier_frequency_hz,
            backhaul: r.backhaul,
        }
    }
}

impl NetworkConfig {
    pub fn new(id: &str, kind: NetworkKind) -> Self {
        NetworkConfig {
            id: id.into(),
            kind,
            duplex: Duplex::Fdd,
            tdd_dl_fraction: 0.5,
            sync_group: None,
            carrier_frequency_hz: None,
            reserved: kind == NetworkKind::DeployableStandalone,
            backhaul: Backhaul::None,
        }
    }

    pub fn tdd(mut self, dl_fraction: f64, sync_group: Option<u32>) -> Self {
        self.duplex = Duplex::Tdd;
        self.tdd_dl_fraction = dl_fraction;
        self.sync_group = sync_group;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationKind {
    Macro,
    Truck,
    Uav,
}

impl StationKind {
    pub fn default_height_m(&self) -> f64 {
        match self {
            StationKind::Macro => 30.0,
            StationKind::Truck => 10.0,
            StationKind::Uav => 100.0,
        }
    }

    pub fn default_tx_power_w(&self) -> f64 {
        match self {
            StationKind::Macro => 40.0,
            StationKind::Truck => 10.0,
            StationKind::Uav => 0.25,
        }
    }

    pub fn default_sectors(&self) -> Vec<Sector> {
        match self {
            StationKind::Macro | StationKind::Truck => [30.0, 150.0, 270.0]
                .into_iter()
                .map(|azimuth_deg| Sector { azimuth_deg, pattern: AntennaPattern::sector(15.0) })
                .collect(),
            StationKind::Uav => vec![Sector { azimuth_deg: 0.0, pattern: AntennaPattern::Isotropic { max_gain_dbi: 2.0 } }],
        }
    }

    pub fn is_deployable(&self) -> bool {
        !matches!(self, StationKind::Macro)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sector {
    pub azimuth_deg: f64,
    pub pattern: AntennaPattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "StationRepr")]
pub struct BaseStation {
    pub id: StationId,
    #[serde(rename = "network")]
    pub network_id: NetworkId,
    pub kind: StationKind,
    pub position: Position,
    /// Total transmit power, split evenly over the sectors.
    pub tx_power_w: f64,
    pub sectors: Vec<Sector>,
    pub is_iab_donor: bool,
    pub is_iab_node: bool,
    pub local_core: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StationRepr {
    id: StationId,
    network: NetworkId,
    kind: StationKind,
    position: Position,
    #[serde(default)]
    tx_power_w: Option<f64>,
    #[serde(default)]
    sectors: Option<Vec<Sector>>,
    #[serde(default)]
    is_iab_donor: bool,
    #[serde(default)]
    is_iab_node: bool,
    #[serde(default)]
    local_core: bool,
}

impl From<StationRepr> for BaseStation {
    fn from(r: StationRepr) -> Self {
        let mut position = r.position;
        if position.z.is_nan() {
            position.z = r.kind.default_height_m();
        }
        BaseStation {
            id: r.id,
            network_id: r.network,
            tx_power_w: r.tx_power_w.unwrap_or(r.kind.default_tx_power_w()),
            sectors: r.sectors.unwrap_or_else(|| r.kind.default_sectors()),
            kind: r.kind,
            position,
            is_iab_donor: r.is_iab_donor,
            is_iab_node: r.is_iab_node,
            local_core: r.local_core,
        }
    }
}

impl BaseStation {
    /// A station with the per-kind defaults at `(x, y)`.
    pub fn new(id: &str, network: &str, kind: StationKind, x: f64, y: f64) -> Self {
        BaseStation {
            id: id.into(),
            network_id: network.into(),
            kind,
            position: Position::new(x, y, kind.default_height_m()),
            tx_power_w: kind.default_tx_power_w(),
            sectors: kind.default_sectors(),
            is_iab_donor: false,
            is_iab_node: false,
            local_core: false,
        }
    }

    pub fn tx_power_dbm(&self) -> f64 {
        crate::propagation::watts_to_dbm(self.tx_power_w)
    }

    pub fn sector_tx_power_dbm(&self) -> f64 {
        crate::propagation::watts_to_dbm(self.tx_power_w / self.sectors.len().max(1) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserKind {
    Mc,
    Normal,
}

impl UserKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            UserKind::Mc => "mc",
            UserKind::Normal => "normal",
        }
    }

    pub fn default_access_identity(&self) -> u32 {
        match self {
            UserKind::Mc => 1,
            UserKind::Normal => 10,
        }
    }

    pub fn default_req_dl_mbps(&self) -> f64 {
        match self {
            UserKind::Mc => 2.0,
            UserKind::Normal => 1.0,
        }
    }

    pub fn default_req_ul_mbps(&self) -> f64 {
        match self {
            UserKind::Mc => 2.0,
            UserKind::Normal => 0.5,
        }
    }
}

pub const UE_HEIGHT_M: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "UserRepr")]
pub struct User {
    pub id: UserId,
    pub kind: UserKind,
    /// Lower value means higher access priority.
    pub access_identity: u32,
    pub position: Position,
    pub req_dl_mbps: f64,
    pub req_ul_mbps: f64,
    pub tx_power_max_dbm: f64,
    /// Empty on input means every network; filled at load.
    pub allowed_networks: BTreeSet<NetworkId>,
    /// Moves with the emergency area.
    pub in_emergency_area: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UserRepr {
    id: UserId,
    kind: UserKind,
    #[serde(default)]
    access_identity: Option<u32>,
    position: Position,
    #[serde(default)]
    req_dl_mbps: Option<f64>,
    #[serde(default)]
    req_ul_mbps: Option<f64>,
    #[serde(default)]
    tx_power_max_dbm: Option<f64>,
    #[serde(default)]
    allowed_networks: BTreeSet<NetworkId>,
    #[serde(default)]
    in_emergency_area: bool,
}

impl From<UserRepr> for User {
    fn from(r: UserRepr) -> Self {
        let mut position = r.position;
        if position.z.is_nan() {
            position.z = UE_HEIGHT_M;
        }
        User {
            id: r.id,
            access_identity: r.access_identity.unwrap_or(r.kind.default_access_identity()),
            req_dl_mbps: r.req_dl_mbps.unwrap_or(r.kind.default_req_dl_mbps()),
            req_ul_mbps: r.req_ul_mbps.unwrap_or(r.kind.default_req_ul_mbps()),
            tx_power_max_dbm: r.tx_power_max_dbm.unwrap_or(23.0),
            kind: r.kind,
            position,
            allowed_networks: r.allowed_networks,
            in_emergency_area: r.in_emergency_area,
        }
    }
}

impl User {
    pub fn new(id: u32, kind: UserKind, x: f64, y: f64, allowed: &[&str]) -> Self {
        User {
            id: UserId(id),
            kind,
            access_identity: kind.default_access_identity(),
            position: Position::new(x, y, UE_HEIGHT_M),
            req_dl_mbps: kind.default_req_dl_mbps(),
            req_ul_mbps: kind.default_req_ul_mbps(),
            tx_power_max_dbm: 23.0,
            allowed_networks: allowed.iter().map(|&n| n.into()).collect(),
            in_emergency_area: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmergencyArea {
    pub center: [f64; 2],
    pub radius_m: f64,
    pub mc_user_count: u32,
}

/// Load-time user generation (input only; never serialized).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Population {
    pub normal_users_per_macro: u32,
    pub normal_radius_m: f64,
    pub mc_networks: Option<Vec<NetworkId>>,
    pub normal_networks: Option<Vec<NetworkId>>,
}

impl Default for Population {
    fn default() -> Self {
        Population { normal_users_per_macro: 30, normal_radius_m: 2000.0, mc_networks: None, normal_networks: None }
    }
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}
fn default_carrier() -> f64 {
    700e6
}
fn default_bandwidth() -> f64 {
    10e6
}
fn default_nf_bs() -> f64 {
    5.0
}
fn default_nf_ue() -> f64 {
    9.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_carrier")]
    pub carrier_frequency_hz: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_dl_hz: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_ul_hz: f64,
    #[serde(default = "default_nf_bs")]
    pub noise_figure_bs_db: f64,
    #[serde(default = "default_nf_ue")]
    pub noise_figure_ue_db: f64,
    pub networks: Vec<NetworkConfig>,
    pub stations: Vec<BaseStation>,
    #[serde(default)]
    pub users: Vec<User>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emergency_area: Option<EmergencyArea>,
    #[serde(default, skip_serializing)]
    pub generate: Option<Population>,
    #[serde(default)]
    pub propagation: PropagationConfig,
    #[serde(default)]
    pub radio: RadioConfig,
    #[serde(default)]
    pub allocation: AllocationConfig,
    #[serde(default)]
    pub backhaul: BackhaulConfig,
    #[serde(default)]
    pub alignment: AlignmentConfig,
}

/// One sector of one station.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub id: CellId,
    pub station: usize,
    pub sector: usize,
}

impl Scenario {
    /// An empty world with every scalar at its default.
    pub fn empty() -> Self {
        Scenario {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            carrier_frequency_hz: default_carrier(),
            bandwidth_dl_hz: default_bandwidth(),
            bandwidth_ul_hz: default_bandwidth(),
            noise_figure_bs_db: default_nf_bs(),
            noise_figure_ue_db: default_nf_ue(),
            networks: Vec::new(),
            stations: Vec::new(),
            users: Vec::new(),
            emergency_area: None,
            generate: None,
            propagation: PropagationConfig::default(),
            radio: RadioConfig::default(),
            allocation: AllocationConfig::default(),
            backhaul: BackhaulConfig::default(),
            alignment: AlignmentConfig::default(),
        }
    }

    pub fn network(&self, id: &NetworkId) -> Option<&NetworkConfig> {
        self.networks.iter().find(|n| &n.id == id)
    }

    pub fn network_index(&self, id: &NetworkId) -> Option<usize> {
        self.networks.iter().position(|n| &n.id == id)
    }

    pub fn station(&self, id: &StationId) -> Option<&BaseStation> {
        self.stations.iter().find(|s| &s.id == id)
    }

    pub fn user(&self, id: UserId) -> Option<&User> {
        self.users.iter().find(|u| u.id == id)
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for (si, st) in self.stations.iter().enumerate() {
            for sec in 0..st.sectors.len() {
                out.push(Cell { id: CellId(out.len()), station: si, sector: sec });
            }
        }
        out
    }

    /// `station:sector` label of a cell.
    pub fn cell_label(&self, id: CellId) -> String {
        self.cells()
            .get(id.0)
            .map(|c| format!("{}:{}", self.stations[c.station].id, c.sector))
            .unwrap_or_else(|| format!("#{}", id.0))
    }

    pub fn cell_station(&self, id: CellId) -> Option<&BaseStation> {
        self.cells().get(id.0).map(|c| &self.stations[c.station])
    }

    pub fn cell_network(&self, id: CellId) -> Option<&NetworkConfig> {
        self.cell_station(id).and_then(|s| self.network(&s.network_id))
    }

    pub fn carrier_of(&self, network: &NetworkConfig) -> f64 {
        network.carrier_frequency_hz.unwrap_or(self.carrier_frequency_hz)
    }

    /// Copy without any station of the listed kinds.
    pub fn without_station_kinds(&self, kinds: &[StationKind]) -> Scenario {
        let mut s = self.clone();
        s.stations.retain(|st| !kinds.contains(&st.kind));
        s
    }

    /// Moves the emergency area with its users and every deployable station.
    pub fn translate_emergency_area(&mut self, dx: f64, dy: f64) {
        if let Some(area) = &mut self.emergency_area {
            area.center = [area.center[0] + dx, area.center[1] + dy];
        }
        for u in self.users.iter_mut().filter(|u| u.in_emergency_area) {
            u.position = u.position.translated(dx, dy);
        }
        for st in self.stations.iter_mut().filter(|s| s.kind.is_deployable()) {
            st.position = st.position.translated(dx, dy);
        }
    }

    /// Lists every violated invariant.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            v.push(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.networks.is_empty() {
            v.push("at least one network is required".to_string());
        }
        if !(self.carrier_frequency_hz > 0.0) {
            v.push("carrier_frequency_hz must be > 0".to_string());
        }
        if !(self.bandwidth_dl_hz > 0.0) {
            v.push("bandwidth_dl_hz must be > 0".to_string());
        }
        if !(self.bandwidth_ul_hz > 0.0) {
            v.push("bandwidth_ul_hz must be > 0".to_string());
        }
        if !self.noise_figure_bs_db.is_finite() || !self.noise_figure_ue_db.is_finite() {
            v.push("noise figures must be finite".to_string());
        }
        let mut seen = BTreeSet::new();
        for n in &self.networks {
            if !seen.insert(&n.id) {
                v.push(format!("network {}: duplicate id", n.id));
            }
            if !(0.0..=1.0).contains(&n.tdd_dl_fraction) {
                v.push(format!("network {}: tdd_dl_fraction must be in [0, 1]", n.id));
            }
            if n.kind == NetworkKind::DeployableStandalone && !matches!(n.backhaul, Backhaul::None | Backhaul::Iab) {
                v.push(format!("network {}: deployable_standalone backhaul must be none or iab", n.id));
            }
            if let Some(f) = n.carrier_frequency_hz {
                if !(f > 0.0) {
                    v.push(format!("network {}: carrier_frequency_hz must be > 0", n.id));
                }
            }
            match n.backhaul {
                Backhaul::Satellite { capacity_mbps, latency_ms, .. } | Backhaul::Microwave { capacity_mbps, latency_ms } => {
                    if !(capacity_mbps >= 0.0) || !(latency_ms >= 0.0) {
                        v.push(format!("network {}: backhaul capacity and latency must be >= 0", n.id));
                    }
                }
                Backhaul::None | Backhaul::Iab => {}
            }
        }
        let mut seen = BTreeSet::new();
        for s in &self.stations {
            if !seen.insert(&s.id) {
                v.push(format!("station {}: duplicate id", s.id));
            }
            if self.network(&s.network_id).is_none() {
                v.push(format!("station {}: unknown network {}", s.id, s.network_id));
            }
            if !(s.tx_power_w > 0.0) {
                v.push(format!("station {}: tx_power must be > 0", s.id));
            }
            if s.sectors.is_empty() {
                v.push(format!("station {}: at least one sector is required", s.id));
            }
            if !(s.position.x.is_finite() && s.position.y.is_finite() && s.position.z.is_finite()) {
                v.push(format!("station {}: position must be finite", s.id));
            }
            if s.kind == StationKind::Uav && !(s.position.z > 0.0) {
                v.push(format!("station {}: uav altitude must be > 0", s.id));
            }
            let mut az = Vec::new();
            for (i, sec) in s.sectors.iter().enumerate() {
                if !(0.0..360.0).contains(&sec.azimuth_deg) {
                    v.push(format!("station {} sector {i}: azimuth must be in [0, 360)", s.id));
                }
                if az.contains(&sec.azimuth_deg) {
                    v.push(format!("station {}: sector azimuths must be distinct", s.id));
                }
                az.push(sec.azimuth_deg);
                v.extend(sec.pattern.violations(&format!("station {} sector {i}", s.id)));
            }
        }
        let mut seen = BTreeSet::new();
        for u in &self.users {
            if !seen.insert(u.id) {
                v.push(format!("user {}: duplicate id", u.id));
            }
            if !(u.req_dl_mbps >= 0.0) || !(u.req_ul_mbps >= 0.0) {
                v.push(format!("user {}: required rates must be >= 0", u.id));
            }
            if u.allowed_networks.is_empty() {
                v.push(format!("user {}: allowed_networks must be nonempty", u.id));
            }
            for n in &u.allowed_networks {
                if self.network(n).is_none() {
                    v.push(format!("user {}: unknown allowed network {n}", u.id));
                }
            }
            if !(u.position.x.is_finite() && u.position.y.is_finite() && u.position.z.is_finite()) {
                v.push(format!("user {}: position must be finite", u.id));
            }
        }
        if let Some(a) = &self.emergency_area {
            if !(a.radius_m > 0.0) {
                v.push("emergency_area: radius must be > 0".to_string());
            }
        }
        v.extend(self.radio.violations());
        v.extend(self.allocation.violations());
        v.extend(self.alignment.violations());
        v
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(v))
        }
    }

    /// Expands the `generate` block and empty `allowed_networks` lists.
    pub fn materialize(&mut self) {
        let all: BTreeSet<NetworkId> = self.networks.iter().map(|n| n.id.clone()).collect();
        for u in &mut self.users {
            if u.allowed_networks.is_empty() {
                u.allowed_networks = all.clone();
            }
        }
        let Some(pop) = self.generate.take() else { return };
        let mut next_id = self.users.iter().map(|u| u.id.0 + 1).max().unwrap_or(0);
        let pick = |list: &Option<Vec<NetworkId>>, fallback: BTreeSet<NetworkId>| -> BTreeSet<NetworkId> {
            list.as_ref().map(|l| l.iter().cloned().collect()).unwrap_or(fallback)
        };
        let mc_nets = pick(&pop.mc_networks, all.clone());
        let mobile: BTreeSet<NetworkId> =
            self.networks.iter().filter(|n| n.kind == NetworkKind::Mobile).map(|n| n.id.clone()).collect();
        let normal_nets = pick(&pop.normal_networks, mobile);

        if let Some(area) = self.emergency_area.clone() {
            for (x, y) in place_users(&area, self.seed) {
                let mut u = User::new(next_id, UserKind::Mc, x, y, &[]);
                u.allowed_networks = mc_nets.clone();
                u.in_emergency_area = true;
                self.users.push(u);
                next_id += 1;
            }
        }
        let macros: Vec<[f64; 2]> = self
            .stations
            .iter()
            .filter(|s| s.kind == StationKind::Macro)
            .map(|s| [s.position.x, s.position.y])
            .collect();
        for (i, center) in macros.into_iter().enumerate() {
            let ring = EmergencyArea { center, radius_m: pop.normal_radius_m, mc_user_count: pop.normal_users_per_macro };
            for (x, y) in place_users_on_stream(&ring, self.seed, 1 + i as u64) {
                let mut u = User::new(next_id, UserKind::Normal, x, y, &[]);
                u.allowed_networks = normal_nets.clone();
                self.users.push(u);
                next_id += 1;
            }
        }
    }
}

/// Uniform positions inside the disc, by rejection from the bounding
/// square. The generator is ChaCha8 (`rand_chacha`) seeded with
/// `seed_from_u64(seed)`; coordinates use 53-bit uniform doubles.
pub fn place_users(area: &EmergencyArea, seed: u64) -> Vec<(f64, f64)> {
    place_users_on_stream(area, seed, 0)
}

/// As [`place_users`], on an independent ChaCha stream.
pub fn place_users_on_stream(area: &EmergencyArea, seed: u64, stream: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let [cx, cy] = area.center;
    let r = area.radius_m;
    let mut out = Vec::with_capacity(area.mc_user_count as usize);
    while out.len() < area.mc_user_count as usize {
        let dx = r * (2.0 * rng.gen::<f64>() - 1.0);
        let dy = r * (2.0 * rng.gen::<f64>() - 1.0);
        if dx * dx + dy * dy <= r * r {
            out.push((cx + dx, cy + dy));
        }
    }
    out
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    parse_scenario_with_seed(text, None)
}

/// Parses, overrides the seed (before users are generated), fills defaults
/// and validates.
pub fn parse_scenario_with_seed(text: &str, seed: Option<u64>) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        ScenarioError::Parse { line: inner.line(), column: inner.column(), field, message: inner.to_string() }
    })?;
    if let Some(s) = seed {
        scenario.seed = s;
    }
    scenario.materialize();
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    load_scenario_with_seed(path, None)
}

pub fn load_scenario_with_seed(path: impl AsRef<Path>, seed: Option<u64>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    parse_scenario_with_seed(&text, seed)
}

pub fn to_json(scenario: &Scenario) -> String {
    serde_json::to_string_pretty(scenario).expect("scenario serializes")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CommunicationKind {
    LocalSameBs,
    LocalCrossBs,
    WideArea,
    Unreachable,
}

/// How traffic between two users would be carried, given where the
/// allocation placed them.
pub fn classify_communication(
    u1: UserId,
    u2: UserId,
    result: &AllocationResult,
    scenario: &Scenario,
) -> Result<CommunicationKind, ScenarioError> {
    let locate = |id: UserId| -> Result<Option<(&BaseStation, &NetworkConfig)>, ScenarioError> {
        let outcome = result.user(id).ok_or(ScenarioError::UnknownUser(id))?;
        if scenario.user(id).is_none() {
            return Err(ScenarioError::UnknownUser(id));
        }
        Ok(outcome.serving_cell.filter(|_| outcome.is_connected()).and_then(|c| {
            let st = scenario.cell_station(c)?;
            Some((st, scenario.network(&st.network_id)?))
        }))
    };
    let (Some((s1, n1)), Some((s2, n2))) = (locate(u1)?, locate(u2)?) else {
        return Ok(CommunicationKind::Unreachable);
    };
    if n1.kind.is_deployable() && s1.id == s2.id {
        return Ok(CommunicationKind::LocalSameBs);
    }
    if n1.kind.is_deployable() && n1.id == n2.id {
        return Ok(CommunicationKind::LocalCrossBs);
    }
    if n1.kind == NetworkKind::DeployableStandalone || n2.kind == NetworkKind::DeployableStandalone {
        return Ok(CommunicationKind::Unreachable);
    }
    Ok(CommunicationKind::WideArea)
}
