//! Interferer enumeration for every duplex/synchronization combination,
//! SINR and the Shannon-with-ceiling rate mapping.

use serde::{Deserialize, Serialize};

use crate::propagation::{self, antenna_gain_db, dbm_to_mw, LinkClass};
use crate::scenario::{BaseStation, CellId, Duplex, NetworkConfig, Scenario, StationKind, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkDirection {
    Dl,
    Ul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TddOverlapMode {
    /// Unsynchronized frames aligned to maximize the overlap.
    WorstCase,
    /// Frame phases independent: overlaps are products of fractions.
    Proportional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub se_max: f64,
    pub sinr_min_db: f64,
    pub acir_db: f64,
    pub tdd_overlap_mode: TddOverlapMode,
    /// When false, transmitters of other networks are ignored.
    pub inter_network_interference: bool,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            se_max: 7.4,
            sinr_min_db: -6.0,
            acir_db: 30.0,
            tdd_overlap_mode: TddOverlapMode::WorstCase,
            inter_network_interference: true,
        }
    }
}

impl RadioConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.se_max > 0.0) {
            v.push("radio: se_max must be > 0".to_string());
        }
        if !self.sinr_min_db.is_finite() || !self.acir_db.is_finite() {
            v.push("radio: sinr_min_db and acir_db must be finite".to_string());
        }
        v
    }

    /// `fraction × bandwidth × min(log2(1 + sinr), se_max)`, zero below
    /// the usability threshold.
    pub fn achievable_rate_mbps(&self, sinr_db: f64, bandwidth_hz: f64, resource_fraction: f64) -> f64 {
        if !(sinr_db >= self.sinr_min_db) {
            return 0.0;
        }
        let se = (1.0 + 10f64.powf(sinr_db / 10.0)).log2().min(self.se_max);
        resource_fraction * bandwidth_hz * se / 1e6
    }
}

pub fn achievable_rate_mbps(sinr_db: f64, bandwidth_hz: f64, resource_fraction: f64) -> f64 {
    RadioConfig::default().achievable_rate_mbps(sinr_db, bandwidth_hz, resource_fraction)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceKind {
    CoDirection,
    CliInterBs,
    CliInterUser,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Transmitter {
    Cell(CellId),
    User(UserId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterferenceTerm {
    pub source: Transmitter,
    pub kind: InterferenceKind,
    pub rx_power_dbm: f64,
    pub activity_weight: f64,
}

/// Time overlap between a victim network's transmission in one direction
/// and an aggressor network's transmissions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SyncRelation {
    pub overlap_same_direction: f64,
    pub overlap_cross_direction: f64,
}

impl SyncRelation {
    pub const ALIGNED: SyncRelation = SyncRelation { overlap_same_direction: 1.0, overlap_cross_direction: 0.0 };
}

/// Overlap seen by `victim` while it operates in `direction`.
pub fn sync_relation(
    victim: &NetworkConfig,
    aggressor: &NetworkConfig,
    direction: LinkDirection,
    mode: TddOverlapMode,
) -> SyncRelation {
    if victim.id == aggressor.id || victim.duplex == Duplex::Fdd || aggressor.duplex == Duplex::Fdd {
        return SyncRelation::ALIGNED;
    }
    if victim.sync_group.is_some() && victim.sync_group == aggressor.sync_group {
        return SyncRelation::ALIGNED;
    }
    let (victim_share, aggressor_same) = match direction {
        LinkDirection::Dl => (victim.tdd_dl_fraction, aggressor.tdd_dl_fraction),
        LinkDirection::Ul => (1.0 - victim.tdd_dl_fraction, 1.0 - aggressor.tdd_dl_fraction),
    };
    let aggressor_cross = 1.0 - aggressor_same;
    match mode {
        TddOverlapMode::WorstCase => SyncRelation {
            overlap_same_direction: victim_share.min(aggressor_same),
            overlap_cross_direction: victim_share.min(aggressor_cross),
        },
        TddOverlapMode::Proportional => SyncRelation {
            overlap_same_direction: victim_share * aggressor_same,
            overlap_cross_direction: victim_share * aggressor_cross,
        },
    }
}

/// `10·log10(S / (N + Σ wᵢ·Iᵢ))` in linear milliwatts.
pub fn sinr_db(signal_dbm: f64, terms: &[InterferenceTerm], noise_dbm: f64) -> f64 {
    let interference: f64 = terms.iter().map(|t| t.activity_weight * dbm_to_mw(t.rx_power_dbm)).sum();
    10.0 * (dbm_to_mw(signal_dbm) / (dbm_to_mw(noise_dbm) + interference)).log10()
}

/// Link class between a station and a terminal.
pub fn access_link_class(station: &BaseStation) -> LinkClass {
    match station.kind {
        StationKind::Uav => LinkClass::AerialBsUe,
        StationKind::Macro | StationKind::Truck => LinkClass::TerrestrialBsUe,
    }
}

#[derive(Debug, Clone)]
pub struct CellInfo {
    pub id: CellId,
    pub station: usize,
    pub sector: usize,
    pub network: usize,
    pub tx_power_dbm: f64,
}

/// Static link budgets of a scenario: every pathloss and antenna gain is
/// evaluated once here; only activity changes between iterations.
#[derive(Debug, Clone)]
pub struct RadioEnvironment<'a> {
    pub scenario: &'a Scenario,
    pub cells: Vec<CellInfo>,
    /// Network index of every station.
    station_network: Vec<usize>,
    /// `[cell][user]` pathloss.
    cell_user_pl: Vec<Vec<f64>>,
    /// `[cell][user]` sector gain towards the user.
    cell_user_gain: Vec<Vec<f64>>,
    /// `[victim cell][aggressor cell]` DL power received at the victim.
    cell_cell_rx: Vec<Vec<f64>>,
    /// `[user][user]` pathloss.
    user_user_pl: Vec<Vec<f64>>,
    /// `[network][network]` adjacent-channel attenuation.
    acir: Vec<Vec<f64>>,
    sync: [Vec<Vec<SyncRelation>>; 2],
}

/// Who transmits and how much, at one point of the allocation loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadState {
    pub serving: Vec<Option<CellId>>,
    pub ul_tx_dbm: Vec<f64>,
    pub cell_dl_activity: Vec<f64>,
    /// Granted UL resource fraction of every user.
    pub user_ul_activity: Vec<f64>,
}

impl LoadState {
    pub fn idle(env: &RadioEnvironment<'_>) -> Self {
        let users = env.scenario.users.len();
        LoadState {
            serving: vec![None; users],
            ul_tx_dbm: vec![f64::NEG_INFINITY; users],
            cell_dl_activity: vec![0.0; env.cells.len()],
            user_ul_activity: vec![0.0; users],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VictimLink {
    pub direction: LinkDirection,
    pub cell: CellId,
    /// Index into `scenario.users`.
    pub user: usize,
}

fn dir_index(d: LinkDirection) -> usize {
    match d {
        LinkDirection::Dl => 0,
        LinkDirection::Ul => 1,
    }
}

impl<'a> RadioEnvironment<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        let prop = &scenario.propagation;
        let f = scenario.carrier_frequency_hz;
        let station_network: Vec<usize> = scenario
            .stations
            .iter()
            .map(|s| scenario.network_index(&s.network_id).expect("validated scenario"))
            .collect();
        let cells: Vec<CellInfo> = scenario
            .cells()
            .into_iter()
            .map(|c| {
                let st = &scenario.stations[c.station];
                CellInfo {
                    id: c.id,
                    station: c.station,
                    sector: c.sector,
                    network: station_network[c.station],
                    tx_power_dbm: st.sector_tx_power_dbm(),
                }
            })
            .collect();
        let sector_gain_towards = |c: &CellInfo, target: &crate::geometry::Position| {
            let st = &scenario.stations[c.station];
            let sec = &st.sectors[c.sector];
            antenna_gain_db(&sec.pattern, st.position.bearing_to(target) - sec.azimuth_deg)
        };
        let pl = |class, d: f64| prop.pathloss_db(class, f, d).expect("finite geometry");

        let mut cell_user_pl = Vec::with_capacity(cells.len());
        let mut cell_user_gain = Vec::with_capacity(cells.len());
        for c in &cells {
            let st = &scenario.stations[c.station];
            let class = access_link_class(st);
            cell_user_pl.push(scenario.users.iter().map(|u| pl(class, st.position.distance(&u.position))).collect());
            cell_user_gain.push(scenario.users.iter().map(|u| sector_gain_towards(c, &u.position)).collect());
        }
        let cell_cell_rx = cells
            .iter()
            .map(|victim| {
                let vs = &scenario.stations[victim.station];
                cells
                    .iter()
                    .map(|agg| {
                        let a_st = &scenario.stations[agg.station];
                        agg.tx_power_dbm + sector_gain_towards(agg, &vs.position) + sector_gain_towards(victim, &a_st.position)
                            - pl(LinkClass::BsBs, vs.position.distance(&a_st.position))
                    })
                    .collect()
            })
            .collect();
        let user_user_pl = scenario
            .users
            .iter()
            .map(|a| scenario.users.iter().map(|b| pl(LinkClass::UeUe, a.position.distance(&b.position))).collect())
            .collect();
        let acir = scenario
            .networks
            .iter()
            .map(|a| {
                scenario
                    .networks
                    .iter()
                    .map(|b| if scenario.carrier_of(a) == scenario.carrier_of(b) { 0.0 } else { scenario.radio.acir_db })
                    .collect()
            })
            .collect();
        let sync_for = |dir| {
            scenario
                .networks
                .iter()
                .map(|a| {
                    scenario
                        .networks
                        .iter()
                        .map(|b| sync_relation(a, b, dir, scenario.radio.tdd_overlap_mode))
                        .collect()
                })
                .collect()
        };
        RadioEnvironment {
            scenario,
            cells,
            station_network,
            cell_user_pl,
            cell_user_gain,
            cell_cell_rx,
            user_user_pl,
            acir,
            sync: [sync_for(LinkDirection::Dl), sync_for(LinkDirection::Ul)],
        }
    }

    pub fn cell_network(&self, cell: CellId) -> usize {
        self.cells[cell.0].network
    }

    pub fn station_network(&self, station: usize) -> usize {
        self.station_network[station]
    }

    pub fn pathloss_db(&self, cell: CellId, user: usize) -> f64 {
        self.cell_user_pl[cell.0][user]
    }

    /// Received power of `cell`'s downlink at `user` (terminal gain 0 dBi).
    pub fn dl_rx_dbm(&self, cell: CellId, user: usize) -> f64 {
        let c = &self.cells[cell.0];
        c.tx_power_dbm + self.cell_user_gain[cell.0][user] - self.cell_user_pl[cell.0][user]
    }

    /// Power of `user`'s uplink at `cell` for a given terminal power.
    pub fn ul_rx_dbm(&self, cell: CellId, user: usize, tx_dbm: f64) -> f64 {
        tx_dbm + self.cell_user_gain[cell.0][user] - self.cell_user_pl[cell.0][user]
    }

    pub fn noise_dbm(&self, direction: LinkDirection) -> f64 {
        let s = self.scenario;
        match direction {
            LinkDirection::Dl => propagation::thermal_noise_dbm(s.bandwidth_dl_hz, s.noise_figure_ue_db),
            LinkDirection::Ul => propagation::thermal_noise_dbm(s.bandwidth_ul_hz, s.noise_figure_bs_db),
        }
    }

    pub fn relation(&self, victim_net: usize, aggressor_net: usize, direction: LinkDirection) -> SyncRelation {
        self.sync[dir_index(direction)][victim_net][aggressor_net]
    }

    fn admits(&self, victim_net: usize, aggressor_net: usize) -> bool {
        victim_net == aggressor_net || self.scenario.radio.inter_network_interference
    }

    /// Interferers of a victim link. Terms whose time overlap with the
    /// victim is zero are left out; zero-activity terms are kept.
    pub fn interferer_set(&self, victim: VictimLink, load: &LoadState) -> Vec<InterferenceTerm> {
        let a = self.cell_network(victim.cell);
        let u = victim.user;
        let users = &self.scenario.users;
        let mut terms = Vec::new();
        match victim.direction {
            LinkDirection::Dl => {
                for d in &self.cells {
                    if d.id == victim.cell || !self.admits(a, d.network) {
                        continue;
                    }
                    let rel = self.relation(a, d.network, LinkDirection::Dl);
                    if rel.overlap_same_direction > 0.0 {
                        terms.push(InterferenceTerm {
                            source: Transmitter::Cell(d.id),
                            kind: InterferenceKind::CoDirection,
                            rx_power_dbm: self.dl_rx_dbm(d.id, u) - self.acir[a][d.network],
                            activity_weight: load.cell_dl_activity[d.id.0] * rel.overlap_same_direction,
                        });
                    }
                }
                for (v, serving) in load.serving.iter().enumerate() {
                    let Some(e) = *serving else { continue };
                    let b = self.cell_network(e);
                    if v == u || !self.admits(a, b) {
                        continue;
                    }
                    let rel = self.relation(a, b, LinkDirection::Dl);
                    if rel.overlap_cross_direction > 0.0 {
                        terms.push(InterferenceTerm {
                            source: Transmitter::User(users[v].id),
                            kind: InterferenceKind::CliInterUser,
                            rx_power_dbm: load.ul_tx_dbm[v] - self.user_user_pl[u][v] - self.acir[a][b],
                            activity_weight: load.user_ul_activity[v] * rel.overlap_cross_direction,
                        });
                    }
                }
            }
            LinkDirection::Ul => {
                for (v, serving) in load.serving.iter().enumerate() {
                    let Some(e) = *serving else { continue };
                    let b = self.cell_network(e);
                    if v == u || e == victim.cell || !self.admits(a, b) {
                        continue;
                    }
                    let rel = self.relation(a, b, LinkDirection::Ul);
                    if rel.overlap_same_direction > 0.0 {
                        terms.push(InterferenceTerm {
                            source: Transmitter::User(users[v].id),
                            kind: InterferenceKind::CoDirection,
                            rx_power_dbm: self.ul_rx_dbm(victim.cell, v, load.ul_tx_dbm[v]) - self.acir[a][b],
                            activity_weight: load.user_ul_activity[v] * rel.overlap_same_direction,
                        });
                    }
                }
                for d in &self.cells {
                    if d.id == victim.cell || !self.admits(a, d.network) {
                        continue;
                    }
                    let rel = self.relation(a, d.network, LinkDirection::Ul);
                    if rel.overlap_cross_direction > 0.0 {
                        terms.push(InterferenceTerm {
                            source: Transmitter::Cell(d.id),
                            kind: InterferenceKind::CliInterBs,
                            rx_power_dbm: self.cell_cell_rx[victim.cell.0][d.id.0] - self.acir[a][d.network],
                            activity_weight: load.cell_dl_activity[d.id.0] * rel.overlap_cross_direction,
                        });
                    }
                }
            }
        }
        terms
    }
}
