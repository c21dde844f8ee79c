//! Scenario runs, deployment variants, distance sweeps and their CSV files.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::allocation::{
    allocate, cells_csv, served_traffic_summary, summary_csv, users_csv, AllocationResult, TrafficSummary,
};
use crate::backhaul::{apply_backhaul_cap, build_topology, BackhaulError, BackhaulTree};
use crate::scenario::{Backhaul, Scenario, StationId, StationKind, UserKind};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("backhaul: {0}")]
    Backhaul(#[from] BackhaulError),
    #[error("invalid sweep: {0}")]
    Sweep(String),
    #[error("writing {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    MacroOnly,
    MacroUav,
    MacroTruck,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::MacroOnly, Variant::MacroUav, Variant::MacroTruck];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::MacroOnly => "macro_only",
            Variant::MacroUav => "macro_uav",
            Variant::MacroTruck => "macro_truck",
        }
    }

    /// The scenario with the other deployable station kinds removed.
    pub fn apply(&self, scenario: &Scenario) -> Scenario {
        let drop: &[StationKind] = match self {
            Variant::MacroOnly => &[StationKind::Truck, StationKind::Uav],
            Variant::MacroUav => &[StationKind::Truck],
            Variant::MacroTruck => &[StationKind::Uav],
        };
        scenario.without_station_kinds(drop)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown variant `{s}` (expected macro_only, macro_uav or macro_truck)"))
    }
}

/// One backhaul tree per network that has a capacity-limited backhaul.
pub fn backhaul_trees(scenario: &Scenario) -> Result<Vec<BackhaulTree>, BackhaulError> {
    let mut trees = Vec::new();
    for net in &scenario.networks {
        let members: Vec<&crate::scenario::BaseStation> =
            scenario.stations.iter().filter(|s| s.network_id == net.id).collect();
        if members.is_empty() {
            continue;
        }
        match &net.backhaul {
            Backhaul::None => {}
            Backhaul::Satellite { capacity_mbps, .. } | Backhaul::Microwave { capacity_mbps, .. } => {
                let ids: Vec<StationId> = members.iter().map(|s| s.id.clone()).collect();
                trees.push(BackhaulTree::direct(StationId(format!("{}-core", net.id)), &ids, *capacity_mbps));
            }
            Backhaul::Iab => {
                let Some(donor) = members.iter().find(|s| s.is_iab_donor) else { continue };
                let nodes: Vec<StationId> =
                    members.iter().filter(|s| s.is_iab_node && !s.is_iab_donor).map(|s| s.id.clone()).collect();
                trees.push(build_topology(&donor.id, &nodes, scenario, scenario.backhaul.objective)?);
            }
        }
    }
    Ok(trees)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub result: AllocationResult,
    pub summary: TrafficSummary,
}

/// Allocates access resources, then caps traffic by each backhaul.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput, RunError> {
    let mut result = allocate(scenario);
    for tree in backhaul_trees(scenario)? {
        result = apply_backhaul_cap(&result, &tree, scenario);
    }
    let summary = served_traffic_summary(&result, scenario);
    Ok(RunOutput { result, summary })
}

/// Contents of `users.csv`, `cells.csv` and `summary.csv`.
pub fn run_files(scenario: &Scenario, out: &RunOutput) -> Vec<(&'static str, String)> {
    vec![
        ("users.csv", users_csv(&out.summary)),
        ("cells.csv", cells_csv(&out.result, scenario)),
        ("summary.csv", summary_csv(&out.summary, &out.result)),
    ]
}

/// Writes every file only once all contents are known.
pub fn write_files<S: AsRef<str>>(dir: &Path, files: &[(&str, S)]) -> Result<(), RunError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| RunError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body.as_ref()).map_err(io(&path))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub variants: Vec<Variant>,
    pub runs: Vec<RunOutput>,
}

pub fn compare(scenario: &Scenario, variants: &[Variant]) -> Result<Comparison, RunError> {
    let runs = variants
        .par_iter()
        .map(|v| run_scenario(&v.apply(scenario)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Comparison { variants: variants.to_vec(), runs })
}

impl Comparison {
    pub fn run(&self, variant: Variant) -> Option<&RunOutput> {
        self.variants.iter().position(|v| *v == variant).map(|i| &self.runs[i])
    }

    /// `user_id,kind,<variant>_dl_mbps,<variant>_ul_mbps,...`; MC users
    /// first.
    pub fn csv(&self) -> String {
        let mut out = String::from("user_id,kind");
        for v in &self.variants {
            let _ = write!(out, ",{v}_dl_mbps,{v}_ul_mbps");
        }
        out.push('\n');
        let Some(first) = self.runs.first() else { return out };
        for (i, row) in first.summary.rows.iter().enumerate() {
            let _ = write!(out, "{},{}", row.user_id, row.kind.as_str());
            for run in &self.runs {
                let r = &run.summary.rows[i];
                debug_assert_eq!(r.user_id, row.user_id);
                let _ = write!(out, ",{:.6},{:.6}", r.served_dl_mbps, r.served_ul_mbps);
            }
            out.push('\n');
        }
        out
    }
}

pub const DEFAULT_SWEEP_KM: [f64; 8] = [0.2, 0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0];

/// Moves the emergency area (with its users and deployable stations) to
/// each distance from `toward`, along the line joining their original
/// positions.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub toward: StationId,
    pub distances_km: Vec<f64>,
    /// Values of the MC-on-mobile toggle; empty means both.
    pub mc_allowed: Vec<bool>,
    pub variant: Variant,
}

impl SweepSpec {
    pub fn new(toward: impl Into<StationId>) -> Self {
        SweepSpec { toward: toward.into(), distances_km: DEFAULT_SWEEP_KM.to_vec(), mc_allowed: Vec::new(), variant: Variant::MacroUav }
    }

    pub fn toggles(&self) -> Vec<bool> {
        if self.mc_allowed.is_empty() {
            vec![true, false]
        } else {
            self.mc_allowed.clone()
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.distances_km.is_empty() {
            v.push("at least one distance is required".to_string());
        }
        if self.distances_km.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            v.push("distances must be positive".to_string());
        }
        if self.distances_km.windows(2).any(|w| w[0] >= w[1]) {
            v.push("distances must be strictly increasing".to_string());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub distance_km: f64,
    pub mc_allowed: bool,
    pub sum_mc_dl: f64,
    pub sum_normal_dl: f64,
    pub sum_mc_ul: f64,
    pub sum_normal_ul: f64,
    pub mc_served_count: usize,
    pub converged: bool,
    /// `sum_mc_dl` of the same point with inter-network interference off.
    pub isolated_sum_mc_dl: f64,
}

pub const SWEEP_CSV_HEADER: &str =
    "distance_km,mc_allowed,sum_mc_dl,sum_normal_dl,sum_mc_ul,sum_normal_ul,mc_served_count,converged,isolated_sum_mc_dl";

/// The scenario with the emergency area `distance_km` from `toward`.
pub fn place_area(scenario: &Scenario, toward: &StationId, distance_km: f64) -> Result<Scenario, RunError> {
    let target = scenario.station(toward).ok_or_else(|| RunError::Sweep(format!("unknown station {toward}")))?;
    let area = scenario.emergency_area.as_ref().ok_or_else(|| RunError::Sweep("scenario has no emergency_area".into()))?;
    let (tx, ty) = (target.position.x, target.position.y);
    let (vx, vy) = (area.center[0] - tx, area.center[1] - ty);
    let norm = vx.hypot(vy);
    if norm == 0.0 {
        return Err(RunError::Sweep(format!("emergency area is centred on {toward}")));
    }
    let d = distance_km * 1000.0;
    let mut s = scenario.clone();
    s.translate_emergency_area(tx + vx / norm * d - area.center[0], ty + vy / norm * d - area.center[1]);
    Ok(s)
}

pub fn sweep_point(scenario: &Scenario, spec: &SweepSpec, distance_km: f64, mc_allowed: bool) -> Result<SweepRow, RunError> {
    let mut s = place_area(&spec.variant.apply(scenario), &spec.toward, distance_km)?;
    s.allocation.mc_allowed_on_mobile = mc_allowed;
    let out = run_scenario(&s)?;
    let isolated = if s.radio.inter_network_interference {
        s.radio.inter_network_interference = false;
        run_scenario(&s)?.summary.sum_mc_dl
    } else {
        out.summary.sum_mc_dl
    };
    let sm = &out.summary;
    Ok(SweepRow {
        distance_km,
        mc_allowed,
        sum_mc_dl: sm.sum_mc_dl,
        sum_normal_dl: sm.sum_normal_dl,
        sum_mc_ul: sm.sum_mc_ul,
        sum_normal_ul: sm.sum_normal_ul,
        mc_served_count: sm.mc_fully_served,
        converged: out.result.converged,
        isolated_sum_mc_dl: isolated,
    })
}

/// Rows ordered by distance, then toggle (on before off).
pub fn sweep(scenario: &Scenario, spec: &SweepSpec) -> Result<Vec<SweepRow>, RunError> {
    let v = spec.violations();
    if !v.is_empty() {
        return Err(RunError::Sweep(v.join("; ")));
    }
    let mut toggles = spec.toggles();
    toggles.sort_by(|a, b| b.cmp(a));
    toggles.dedup();
    let points: Vec<(f64, bool)> =
        spec.distances_km.iter().flat_map(|&d| toggles.iter().map(move |&t| (d, t))).collect();
    points.par_iter().map(|&(d, t)| sweep_point(scenario, spec, d, t)).collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{},{},{:.6}",
            r.distance_km,
            r.mc_allowed,
            r.sum_mc_dl,
            r.sum_normal_dl,
            r.sum_mc_ul,
            r.sum_normal_ul,
            r.mc_served_count,
            r.converged,
            r.isolated_sum_mc_dl
        );
    }
    out
}

/// Mean served traffic of MC users, `(dl, ul)`.
pub fn mc_means(summary: &TrafficSummary) -> (f64, f64) {
    let n = summary.mc_users.max(1) as f64;
    (summary.sum_mc_dl / n, summary.sum_mc_ul / n)
}

/// Served `(dl, ul)` of every MC user in row order.
pub fn mc_rows(summary: &TrafficSummary) -> Vec<(f64, f64)> {
    summary
        .rows
        .iter()
        .filter(|r| r.kind == UserKind::Mc)
        .map(|r| (r.served_dl_mbps, r.served_ul_mbps))
        .collect()
}
