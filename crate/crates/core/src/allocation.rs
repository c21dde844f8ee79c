//! Access control, cell selection, MC-first admission and the load-coupled
//! fixed-point allocation of radio resources.
//!
//! Each iteration evaluates every user's SINR under the current activity
//! factors, walks every cell's admitted users in priority order granting the
//! resource fraction each needs (a priority level that no longer fits
//! water-fills what is left; lower levels get nothing) and feeds
//! the granted fractions back as damped activity.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::interference::{sinr_db, LinkDirection, LoadState, RadioEnvironment, VictimLink};
use crate::scenario::{CellId, Duplex, NetworkConfig, NetworkKind, Scenario, User, UserId, UserKind};

/// Slack allowed on per-cell resource sums.
pub const CONSERVATION_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UplinkPowerControl {
    pub p0_dbm: f64,
    pub alpha: f64,
    pub p_max_dbm: f64,
}

impl Default for UplinkPowerControl {
    fn default() -> Self {
        UplinkPowerControl { p0_dbm: -85.0, alpha: 0.8, p_max_dbm: 23.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocationConfig {
    /// Weight of the previous activity in the damped update.
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: u32,
    pub power_control: UplinkPowerControl,
    pub mc_allowed_on_mobile: bool,
    /// Overrides the reservation flag of deployable networks.
    pub cell_reserved: Option<bool>,
    pub barred_identities: BTreeSet<u32>,
}

impl Default for AllocationConfig {
    fn default() -> Self {
        AllocationConfig {
            damping: 0.5,
            tolerance: 1e-3,
            max_iterations: 50,
            power_control: UplinkPowerControl::default(),
            mc_allowed_on_mobile: true,
            cell_reserved: None,
            barred_identities: BTreeSet::new(),
        }
    }
}

impl AllocationConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(0.0..1.0).contains(&self.damping) {
            v.push("allocation: damping must be in [0, 1)".to_string());
        }
        if !(self.tolerance > 0.0) {
            v.push("allocation: tolerance must be > 0".to_string());
        }
        if self.max_iterations == 0 {
            v.push("allocation: max_iterations must be >= 1".to_string());
        }
        if !(0.0..=1.0).contains(&self.power_control.alpha) {
            v.push("allocation: power_control.alpha must be in [0, 1]".to_string());
        }
        v
    }

    pub fn policy(&self) -> AccessPolicy {
        AccessPolicy {
            cell_reserved: self.cell_reserved,
            barred_identities: self.barred_identities.clone(),
            mc_allowed_on_mobile: self.mc_allowed_on_mobile,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AccessPolicy {
    pub cell_reserved: Option<bool>,
    pub barred_identities: BTreeSet<u32>,
    pub mc_allowed_on_mobile: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Allowed,
    Barred,
}

/// Whether `user` may camp on a cell of `network`. MC users form the
/// authorized group of reserved cells.
pub fn access_check(user: &User, network: &NetworkConfig, policy: &AccessPolicy) -> Access {
    let reserved = if network.kind.is_deployable() {
        policy.cell_reserved.unwrap_or(network.reserved)
    } else {
        network.reserved
    };
    let barred = (reserved && user.kind != UserKind::Mc)
        || policy.barred_identities.contains(&user.access_identity)
        || (network.kind == NetworkKind::Mobile && user.kind == UserKind::Mc && !policy.mc_allowed_on_mobile)
        || !user.allowed_networks.contains(&network.id);
    if barred {
        Access::Barred
    } else {
        Access::Allowed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Serving(CellId),
    DroppedLink,
}

/// Strongest allowed downlink, lowest cell id on ties; dropped when even the
/// interference-free SNR is unusable.
pub fn cell_selection(user: usize, env: &RadioEnvironment<'_>, policy: &AccessPolicy) -> Selection {
    let s = env.scenario;
    let u = &s.users[user];
    let mut best: Option<(CellId, f64)> = None;
    for c in &env.cells {
        let net = &s.networks[c.network];
        if access_check(u, net, policy) == Access::Barred {
            continue;
        }
        let rx = env.dl_rx_dbm(c.id, user);
        if best.is_none_or(|(_, b)| rx > b) {
            best = Some((c.id, rx));
        }
    }
    match best {
        Some((cell, rx)) if rx - env.noise_dbm(LinkDirection::Dl) >= s.radio.sinr_min_db => Selection::Serving(cell),
        _ => Selection::DroppedLink,
    }
}

/// Scheduling order of a cell: access identity, then user id.
pub fn admit<'u, I>(candidates: I) -> Vec<UserId>
where
    I: IntoIterator<Item = &'u User>,
{
    let mut v: Vec<&User> = candidates.into_iter().collect();
    v.sort_by_key(|u| (u.access_identity, u.id));
    v.into_iter().map(|u| u.id).collect()
}

/// Fractional open-loop power control towards the serving cell.
pub fn ul_tx_power_dbm(user: &User, pathloss_db: f64, pc: &UplinkPowerControl) -> f64 {
    let p_max = pc.p_max_dbm.min(user.tx_power_max_dbm);
    (pc.p0_dbm + pc.alpha * pathloss_db).min(p_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UserStatus {
    Served,
    PartiallyServed,
    BlockedResources,
    DroppedLink,
}

impl UserStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            UserStatus::Served => "served",
            UserStatus::PartiallyServed => "partially_served",
            UserStatus::BlockedResources => "blocked_resources",
            UserStatus::DroppedLink => "dropped_link",
        }
    }

    pub fn from_traffic(user: &User, served_dl: f64, served_ul: f64) -> UserStatus {
        if served_dl >= user.req_dl_mbps && served_ul >= user.req_ul_mbps {
            UserStatus::Served
        } else if served_dl > 0.0 || served_ul > 0.0 {
            UserStatus::PartiallyServed
        } else {
            UserStatus::BlockedResources
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserOutcome {
    pub user_id: UserId,
    pub kind: UserKind,
    pub serving_cell: Option<CellId>,
    pub status: UserStatus,
    pub served_dl_mbps: f64,
    pub served_ul_mbps: f64,
    pub dl_fraction: f64,
    pub ul_fraction: f64,
    pub sinr_dl_db: f64,
    pub sinr_ul_db: f64,
}

impl UserOutcome {
    pub fn is_connected(&self) -> bool {
        self.serving_cell.is_some() && self.status != UserStatus::DroppedLink
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellActivity {
    pub cell: CellId,
    pub activity_dl: f64,
    pub activity_ul: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationResult {
    /// In scenario user order.
    pub users: Vec<UserOutcome>,
    pub cells: Vec<CellActivity>,
    pub iterations_used: u32,
    pub converged: bool,
}

impl AllocationResult {
    pub fn user(&self, id: UserId) -> Option<&UserOutcome> {
        self.users.iter().find(|u| u.user_id == id)
    }
}

/// Grant of one user in one direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grant {
    pub fraction: f64,
    pub served_mbps: f64,
}

/// Walks `order` (already sorted by priority) one priority level at a time.
/// A level whose total need fits the remaining budget is served in full;
/// otherwise the remainder is water-filled over the level (every member gets
/// `min(need, λ)` with Σ = remainder) and lower levels receive nothing.
/// `full_rate` is the rate at fraction 1; entries with zero rate or zero
/// demand receive nothing.
pub fn priority_walk(order: &[usize], level: &[u32], demand_mbps: &[f64], full_rate_mbps: &[f64]) -> Vec<(usize, Grant)> {
    let none = Grant { fraction: 0.0, served_mbps: 0.0 };
    let needed = |i: usize| {
        let (demand, rate) = (demand_mbps[i], full_rate_mbps[i]);
        if rate > 0.0 && demand > 0.0 {
            demand / rate
        } else {
            0.0
        }
    };
    let mut out = Vec::with_capacity(order.len());
    let mut remaining = 1.0f64;
    let mut start = 0;
    while start < order.len() {
        let lvl = level[order[start]];
        let end = start + order[start..].iter().take_while(|&&i| level[i] == lvl).count();
        let group = &order[start..end];
        let total: f64 = group.iter().map(|&i| needed(i)).sum();
        if total <= remaining {
            for &i in group {
                let n = needed(i);
                out.push((i, if n > 0.0 { Grant { fraction: n, served_mbps: demand_mbps[i] } } else { none }));
            }
            remaining -= total;
        } else {
            let mut by_need: Vec<usize> = group.iter().copied().filter(|&i| needed(i) > 0.0).collect();
            by_need.sort_by(|&a, &b| needed(a).total_cmp(&needed(b)));
            let mut grant = vec![none; group.len()];
            let mut budget = remaining;
            for (k, &i) in by_need.iter().enumerate() {
                let level_share = budget / (by_need.len() - k) as f64;
                let n = needed(i);
                let fraction = n.min(level_share);
                budget -= fraction;
                let served = if fraction == n { demand_mbps[i] } else { (fraction * full_rate_mbps[i]).min(demand_mbps[i]) };
                grant[group.iter().position(|&g| g == i).unwrap()] = Grant { fraction, served_mbps: served };
            }
            out.extend(group.iter().copied().zip(grant));
            remaining = 0.0;
        }
        remaining = remaining.max(0.0);
        start = end;
    }
    out
}

/// Resource bandwidth of a network in one direction (TDD shares one carrier
/// by its DL fraction).
pub fn direction_bandwidth_hz(scenario: &Scenario, network: &NetworkConfig, direction: LinkDirection) -> f64 {
    match (network.duplex, direction) {
        (Duplex::Fdd, LinkDirection::Dl) => scenario.bandwidth_dl_hz,
        (Duplex::Fdd, LinkDirection::Ul) => scenario.bandwidth_ul_hz,
        (Duplex::Tdd, LinkDirection::Dl) => scenario.bandwidth_dl_hz * network.tdd_dl_fraction,
        (Duplex::Tdd, LinkDirection::Ul) => scenario.bandwidth_ul_hz * (1.0 - network.tdd_dl_fraction),
    }
}

pub fn allocate(scenario: &Scenario) -> AllocationResult {
    let env = RadioEnvironment::new(scenario);
    allocate_in(&env)
}

pub fn allocate_in(env: &RadioEnvironment<'_>) -> AllocationResult {
    let s = env.scenario;
    let cfg = &s.allocation;
    let policy = cfg.policy();
    let n_users = s.users.len();
    let n_cells = env.cells.len();

    let serving: Vec<Option<CellId>> = (0..n_users)
        .map(|u| match cell_selection(u, env, &policy) {
            Selection::Serving(c) => Some(c),
            Selection::DroppedLink => None,
        })
        .collect();

    let index_of: std::collections::HashMap<UserId, usize> = s.users.iter().enumerate().map(|(i, u)| (u.id, i)).collect();
    let admitted: Vec<Vec<usize>> = (0..n_cells)
        .map(|c| {
            let members = (0..n_users).filter(|&u| serving[u] == Some(CellId(c))).map(|u| &s.users[u]);
            admit(members).into_iter().map(|id| index_of[&id]).collect()
        })
        .collect();

    let ul_tx_dbm: Vec<f64> = (0..n_users)
        .map(|u| match serving[u] {
            Some(c) => ul_tx_power_dbm(&s.users[u], env.pathloss_db(c, u), &cfg.power_control),
            None => f64::NEG_INFINITY,
        })
        .collect();

    let bandwidth: Vec<[f64; 2]> = env
        .cells
        .iter()
        .map(|c| {
            let net = &s.networks[c.network];
            [direction_bandwidth_hz(s, net, LinkDirection::Dl), direction_bandwidth_hz(s, net, LinkDirection::Ul)]
        })
        .collect();
    let levels: Vec<u32> = s.users.iter().map(|u| u.access_identity).collect();
    let demand_dl: Vec<f64> = s.users.iter().map(|u| u.req_dl_mbps).collect();
    let demand_ul: Vec<f64> = s.users.iter().map(|u| u.req_ul_mbps).collect();
    let noise_dl = env.noise_dbm(LinkDirection::Dl);
    let noise_ul = env.noise_dbm(LinkDirection::Ul);

    let mut load = LoadState {
        serving: serving.clone(),
        ul_tx_dbm: ul_tx_dbm.clone(),
        cell_dl_activity: admitted.iter().map(|a| if a.is_empty() { 0.0 } else { 1.0 }).collect(),
        user_ul_activity: serving.iter().map(|c| if c.is_some() { 1.0 } else { 0.0 }).collect(),
    };

    let mut grants_dl = vec![Grant { fraction: 0.0, served_mbps: 0.0 }; n_users];
    let mut grants_ul = grants_dl.clone();
    let mut sinr = vec![[f64::NAN; 2]; n_users];
    let mut rate_dl = vec![0.0; n_users];
    let mut rate_ul = vec![0.0; n_users];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iterations {
        iterations += 1;
        for u in 0..n_users {
            let Some(c) = serving[u] else { continue };
            let dl_terms = env.interferer_set(VictimLink { direction: LinkDirection::Dl, cell: c, user: u }, &load);
            let ul_terms = env.interferer_set(VictimLink { direction: LinkDirection::Ul, cell: c, user: u }, &load);
            let dl = sinr_db(env.dl_rx_dbm(c, u), &dl_terms, noise_dl);
            let ul = sinr_db(env.ul_rx_dbm(c, u, ul_tx_dbm[u]), &ul_terms, noise_ul);
            sinr[u] = [dl, ul];
            rate_dl[u] = s.radio.achievable_rate_mbps(dl, bandwidth[c.0][0], 1.0);
            rate_ul[u] = s.radio.achievable_rate_mbps(ul, bandwidth[c.0][1], 1.0);
        }
        let mut next_cell_dl = vec![0.0; n_cells];
        let mut next_user_ul = vec![0.0; n_users];
        for (c, order) in admitted.iter().enumerate() {
            for (u, g) in priority_walk(order, &levels, &demand_dl, &rate_dl) {
                grants_dl[u] = g;
                next_cell_dl[c] += g.fraction;
            }
            let mut ul_sum = 0.0;
            for (u, g) in priority_walk(order, &levels, &demand_ul, &rate_ul) {
                grants_ul[u] = g;
                next_user_ul[u] = g.fraction;
                ul_sum += g.fraction;
            }
            debug_assert!(next_cell_dl[c] <= 1.0 + CONSERVATION_EPS && ul_sum <= 1.0 + CONSERVATION_EPS);
        }
        let delta = load
            .cell_dl_activity
            .iter()
            .zip(&next_cell_dl)
            .chain(load.user_ul_activity.iter().zip(&next_user_ul))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let d = cfg.damping;
        for (a, b) in load.cell_dl_activity.iter_mut().zip(&next_cell_dl) {
            *a = d * *a + (1.0 - d) * b;
        }
        for (a, b) in load.user_ul_activity.iter_mut().zip(&next_user_ul) {
            *a = d * *a + (1.0 - d) * b;
        }
        if delta < cfg.tolerance {
            converged = true;
            break;
        }
    }

    let users = s
        .users
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let (served_dl, served_ul) = (grants_dl[i].served_mbps, grants_ul[i].served_mbps);
            let status = match serving[i] {
                None => UserStatus::DroppedLink,
                Some(_) if rate_dl[i] <= 0.0 && rate_ul[i] <= 0.0 => UserStatus::DroppedLink,
                Some(_) => UserStatus::from_traffic(u, served_dl, served_ul),
            };
            UserOutcome {
                user_id: u.id,
                kind: u.kind,
                serving_cell: serving[i],
                status,
                served_dl_mbps: served_dl,
                served_ul_mbps: served_ul,
                dl_fraction: grants_dl[i].fraction,
                ul_fraction: grants_ul[i].fraction,
                sinr_dl_db: sinr[i][0],
                sinr_ul_db: sinr[i][1],
            }
        })
        .collect::<Vec<_>>();
    let cells = (0..n_cells)
        .map(|c| CellActivity {
            cell: CellId(c),
            activity_dl: admitted[c].iter().map(|&u| grants_dl[u].fraction).sum(),
            activity_ul: admitted[c].iter().map(|&u| grants_ul[u].fraction).sum(),
        })
        .collect();
    AllocationResult { users, cells, iterations_used: iterations, converged }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub user_id: UserId,
    pub kind: UserKind,
    pub serving_cell: String,
    pub status: UserStatus,
    pub served_dl_mbps: f64,
    pub served_ul_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrafficSummary {
    /// MC users first, each class by user id.
    pub rows: Vec<SummaryRow>,
    pub sum_mc_dl: f64,
    pub sum_normal_dl: f64,
    pub sum_mc_ul: f64,
    pub sum_normal_ul: f64,
    pub mc_users: usize,
    pub normal_users: usize,
    pub mc_fully_served: usize,
}

pub fn served_traffic_summary(result: &AllocationResult, scenario: &Scenario) -> TrafficSummary {
    let mut order: Vec<&UserOutcome> = result.users.iter().collect();
    order.sort_by_key(|o| (o.kind, o.user_id));
    let mut summary = TrafficSummary {
        rows: Vec::with_capacity(order.len()),
        sum_mc_dl: 0.0,
        sum_normal_dl: 0.0,
        sum_mc_ul: 0.0,
        sum_normal_ul: 0.0,
        mc_users: 0,
        normal_users: 0,
        mc_fully_served: 0,
    };
    for o in order {
        match o.kind {
            UserKind::Mc => {
                summary.sum_mc_dl += o.served_dl_mbps;
                summary.sum_mc_ul += o.served_ul_mbps;
                summary.mc_users += 1;
                if o.status == UserStatus::Served {
                    summary.mc_fully_served += 1;
                }
            }
            UserKind::Normal => {
                summary.sum_normal_dl += o.served_dl_mbps;
                summary.sum_normal_ul += o.served_ul_mbps;
                summary.normal_users += 1;
            }
        }
        summary.rows.push(SummaryRow {
            user_id: o.user_id,
            kind: o.kind,
            serving_cell: o.serving_cell.map(|c| scenario.cell_label(c)).unwrap_or_else(|| "-".to_string()),
            status: o.status,
            served_dl_mbps: o.served_dl_mbps,
            served_ul_mbps: o.served_ul_mbps,
        });
    }
    summary
}

pub const USERS_CSV_HEADER: &str = "user_id,kind,serving_cell,status,served_dl_mbps,served_ul_mbps";
pub const CELLS_CSV_HEADER: &str = "cell_id,station,sector,network,activity_dl,activity_ul";
pub const SUMMARY_CSV_HEADER: &str = "metric,value";

pub fn users_csv(summary: &TrafficSummary) -> String {
    let mut out = format!("{USERS_CSV_HEADER}\n");
    for r in &summary.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6}",
            r.user_id,
            r.kind.as_str(),
            r.serving_cell,
            r.status.as_str(),
            r.served_dl_mbps,
            r.served_ul_mbps
        );
    }
    out
}

pub fn cells_csv(result: &AllocationResult, scenario: &Scenario) -> String {
    let mut out = format!("{CELLS_CSV_HEADER}\n");
    let cells = scenario.cells();
    for a in &result.cells {
        let c = cells[a.cell.0];
        let st = &scenario.stations[c.station];
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6}",
            scenario.cell_label(a.cell),
            st.id,
            c.sector,
            st.network_id,
            a.activity_dl,
            a.activity_ul
        );
    }
    out
}

pub fn summary_csv(summary: &TrafficSummary, result: &AllocationResult) -> String {
    let mut out = format!("{SUMMARY_CSV_HEADER}\n");
    for (k, v) in [
        ("sum_mc_dl", summary.sum_mc_dl),
        ("sum_normal_dl", summary.sum_normal_dl),
        ("sum_mc_ul", summary.sum_mc_ul),
        ("sum_normal_ul", summary.sum_normal_ul),
    ] {
        let _ = writeln!(out, "{k},{v:.6}");
    }
    let _ = writeln!(out, "mc_users,{}", summary.mc_users);
    let _ = writeln!(out, "normal_users,{}", summary.normal_users);
    let _ = writeln!(out, "mc_fully_served,{}", summary.mc_fully_served);
    let _ = writeln!(out, "iterations_used,{}", result.iterations_used);
    let _ = writeln!(out, "converged,{}", result.converged);
    out
}
