//! Donor-rooted IAB topologies: link capacities, objective-driven parent
//! selection, bottleneck caps on access traffic and make-before-break node
//! replacement.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{AllocationResult, UserStatus};
use crate::propagation::{thermal_noise_dbm, LinkClass};
use crate::scenario::{BaseStation, Scenario, StationId, UserKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Fewest hops to the donor.
    MinLatency,
    /// Largest end-to-end bottleneck capacity.
    MaxCapacity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackhaulConfig {
    pub bandwidth_hz: f64,
    pub frequency_hz: Option<f64>,
    /// Gain of the dedicated backhaul beam at each end.
    pub antenna_gain_dbi: f64,
    pub tx_power_dbm: Option<f64>,
    pub objective: Objective,
}

impl Default for BackhaulConfig {
    fn default() -> Self {
        BackhaulConfig {
            bandwidth_hz: 100e6,
            frequency_hz: None,
            antenna_gain_dbi: 15.0,
            tx_power_dbm: None,
            objective: Objective::MinLatency,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BackhaulError {
    #[error("node {node} cannot reach the donor (best candidate parent: {})", fmt_candidate(.best_candidate))]
    Unreachable { node: StationId, best_candidate: Option<(StationId, f64)> },
    #[error("node {0} is not in the tree")]
    NotInTree(StationId),
    #[error("unknown station {0}")]
    UnknownStation(StationId),
    #[error("the donor {0} cannot be replaced")]
    DonorReplacement(StationId),
    #[error("{node} has no backhaul link to {target}")]
    NoLink { node: StationId, target: StationId },
    #[error("replacement step {step} breaks continuity: {detail}")]
    Continuity { step: usize, detail: String },
}

fn fmt_candidate(c: &Option<(StationId, f64)>) -> String {
    match c {
        Some((id, cap)) => format!("{id} at {cap:.3} Mbps"),
        None => "none".to_string(),
    }
}

fn one_way_capacity(tx: &BaseStation, rx: &BaseStation, scenario: &Scenario) -> f64 {
    let cfg = &scenario.backhaul;
    let f = cfg.frequency_hz.unwrap_or(scenario.carrier_frequency_hz);
    let pl = scenario
        .propagation
        .pathloss_db(LinkClass::BackhaulLos, f, tx.position.distance(&rx.position))
        .expect("finite geometry");
    let p_tx = cfg.tx_power_dbm.unwrap_or_else(|| tx.tx_power_dbm());
    let snr = p_tx + 2.0 * cfg.antenna_gain_dbi - pl - thermal_noise_dbm(cfg.bandwidth_hz, scenario.noise_figure_bs_db);
    scenario.radio.achievable_rate_mbps(snr, cfg.bandwidth_hz, 1.0)
}

/// Interference-free capacity of a dedicated backhaul beam between two
/// stations; the weaker direction counts.
pub fn backhaul_link_capacity(a: &BaseStation, b: &BaseStation, scenario: &Scenario) -> f64 {
    one_way_capacity(a, b, scenario).min(one_way_capacity(b, a, scenario))
}

/// Symmetric capacity matrix over candidate backhaul nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityGraph {
    pub nodes: Vec<StationId>,
    pub capacity: Vec<Vec<f64>>,
}

impl CapacityGraph {
    pub fn new(nodes: Vec<StationId>) -> Self {
        let n = nodes.len();
        CapacityGraph { nodes, capacity: vec![vec![0.0; n]; n] }
    }

    pub fn from_scenario(scenario: &Scenario, members: &[StationId]) -> Result<Self, BackhaulError> {
        let stations = members
            .iter()
            .map(|id| scenario.station(id).ok_or_else(|| BackhaulError::UnknownStation(id.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let mut g = CapacityGraph::new(members.to_vec());
        for i in 0..stations.len() {
            for j in i + 1..stations.len() {
                g.set(i, j, backhaul_link_capacity(stations[i], stations[j], scenario));
            }
        }
        Ok(g)
    }

    pub fn set(&mut self, i: usize, j: usize, cap: f64) {
        self.capacity[i][j] = cap;
        self.capacity[j][i] = cap;
    }

    pub fn index(&self, id: &StationId) -> Option<usize> {
        self.nodes.iter().position(|n| n == id)
    }

    pub fn between(&self, a: &StationId, b: &StationId) -> f64 {
        match (self.index(a), self.index(b)) {
            (Some(i), Some(j)) if i != j => self.capacity[i][j],
            _ => 0.0,
        }
    }
}

/// Donor-rooted backhaul tree. Every non-donor node has exactly one parent.
#[derive(Debug, Clone, PartialEq)]
pub struct BackhaulTree {
    pub donor: StationId,
    pub parent: BTreeMap<StationId, StationId>,
    /// Capacity of the edge `(child, parent)`.
    pub link_capacity: BTreeMap<(StationId, StationId), f64>,
    pub objective: Objective,
}

impl BackhaulTree {
    pub fn alone(donor: StationId, objective: Objective) -> Self {
        BackhaulTree { donor, parent: BTreeMap::new(), link_capacity: BTreeMap::new(), objective }
    }

    /// Star of fixed-capacity links from a core to each station, standing in
    /// for satellite or microwave backhaul.
    pub fn direct(core: StationId, stations: &[StationId], capacity_mbps: f64) -> Self {
        let mut t = BackhaulTree::alone(core.clone(), Objective::MaxCapacity);
        for s in stations {
            t.attach(s.clone(), core.clone(), capacity_mbps);
        }
        t
    }

    pub fn attach(&mut self, child: StationId, parent: StationId, capacity: f64) {
        if let Some(old) = self.parent.insert(child.clone(), parent.clone()) {
            self.link_capacity.remove(&(child.clone(), old));
        }
        self.link_capacity.insert((child, parent), capacity);
    }

    pub fn detach(&mut self, node: &StationId) {
        if let Some(p) = self.parent.remove(node) {
            self.link_capacity.remove(&(node.clone(), p));
        }
    }

    pub fn contains(&self, node: &StationId) -> bool {
        node == &self.donor || self.parent.contains_key(node)
    }

    pub fn nodes(&self) -> Vec<StationId> {
        std::iter::once(self.donor.clone()).chain(self.parent.keys().cloned()).collect()
    }

    pub fn children(&self, node: &StationId) -> Vec<StationId> {
        self.parent.iter().filter(|(_, p)| *p == node).map(|(c, _)| c.clone()).collect()
    }

    /// `node` followed by every node whose donor path passes through it.
    pub fn subtree(&self, node: &StationId) -> Vec<StationId> {
        let mut out = vec![node.clone()];
        let mut i = 0;
        while i < out.len() {
            let kids = self.children(&out[i]);
            out.extend(kids);
            i += 1;
        }
        out
    }

    /// Path `node → … → donor`, or `None` if it is broken or cyclic.
    pub fn path_to_donor(&self, node: &StationId) -> Option<Vec<StationId>> {
        let mut path = vec![node.clone()];
        let mut cur = node.clone();
        while cur != self.donor {
            let p = self.parent.get(&cur)?.clone();
            if path.contains(&p) {
                return None;
            }
            path.push(p.clone());
            cur = p;
        }
        Some(path)
    }

    pub fn hops(&self, node: &StationId) -> Option<usize> {
        self.path_to_donor(node).map(|p| p.len() - 1)
    }

    /// Acyclic and every node donor-connected.
    pub fn is_valid(&self) -> bool {
        !self.parent.contains_key(&self.donor) && self.parent.keys().all(|n| self.path_to_donor(n).is_some())
    }
}

/// Minimum link capacity on the path `node → donor`; infinite for the donor.
pub fn bottleneck_capacity(tree: &BackhaulTree, node: &StationId) -> Result<f64, BackhaulError> {
    if !tree.contains(node) {
        return Err(BackhaulError::NotInTree(node.clone()));
    }
    let path = tree.path_to_donor(node).ok_or_else(|| BackhaulError::NotInTree(node.clone()))?;
    Ok(path
        .windows(2)
        .map(|w| tree.link_capacity[&(w[0].clone(), w[1].clone())])
        .fold(f64::INFINITY, f64::min))
}

pub fn build_topology(
    donor: &StationId,
    nodes: &[StationId],
    scenario: &Scenario,
    objective: Objective,
) -> Result<BackhaulTree, BackhaulError> {
    let mut members = vec![donor.clone()];
    members.extend(nodes.iter().filter(|n| *n != donor).cloned());
    let graph = CapacityGraph::from_scenario(scenario, &members)?;
    build_topology_on(&graph, donor, objective)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Width(f64);

impl Eq for Width {}

impl PartialOrd for Width {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Width {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Builds the tree over every node of `graph`. Links of zero capacity do
/// not exist.
pub fn build_topology_on(graph: &CapacityGraph, donor: &StationId, objective: Objective) -> Result<BackhaulTree, BackhaulError> {
    let root = graph.index(donor).ok_or_else(|| BackhaulError::UnknownStation(donor.clone()))?;
    let n = graph.nodes.len();
    let cap = &graph.capacity;
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut reached = vec![false; n];
    reached[root] = true;

    match objective {
        Objective::MinLatency => {
            let mut hops = vec![usize::MAX; n];
            hops[root] = 0;
            let mut queue = VecDeque::from([root]);
            let mut order = Vec::new();
            while let Some(u) = queue.pop_front() {
                order.push(u);
                for v in 0..n {
                    if cap[u][v] > 0.0 && hops[v] == usize::MAX {
                        hops[v] = hops[u] + 1;
                        reached[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            for &v in order.iter().filter(|&&v| v != root) {
                parent[v] = (0..n)
                    .filter(|&w| hops[w] != usize::MAX && hops[w] + 1 == hops[v] && cap[w][v] > 0.0)
                    .max_by(|&a, &b| cap[a][v].total_cmp(&cap[b][v]).then_with(|| graph.nodes[b].cmp(&graph.nodes[a])));
            }
        }
        Objective::MaxCapacity => {
            // Dijkstra with the bottleneck metric; ties prefer fewer hops,
            // then the lower parent id.
            let mut width = vec![f64::NEG_INFINITY; n];
            let mut hops = vec![usize::MAX; n];
            let mut done = vec![false; n];
            width[root] = f64::INFINITY;
            hops[root] = 0;
            let mut heap = BinaryHeap::new();
            heap.push((Width(f64::INFINITY), std::cmp::Reverse(0usize), std::cmp::Reverse(graph.nodes[root].clone()), root));
            while let Some((_, _, _, u)) = heap.pop() {
                if done[u] {
                    continue;
                }
                done[u] = true;
                reached[u] = true;
                for v in 0..n {
                    if done[v] || cap[u][v] <= 0.0 {
                        continue;
                    }
                    let cand = width[u].min(cap[u][v]);
                    let better = cand > width[v]
                        || (cand == width[v]
                            && (hops[u] + 1 < hops[v]
                                || (hops[u] + 1 == hops[v]
                                    && parent[v].is_none_or(|p| graph.nodes[u] < graph.nodes[p]))));
                    if better {
                        width[v] = cand;
                        hops[v] = hops[u] + 1;
                        parent[v] = Some(u);
                        heap.push((Width(cand), std::cmp::Reverse(hops[v]), std::cmp::Reverse(graph.nodes[v].clone()), v));
                    }
                }
            }
        }
    }

    for v in 0..n {
        if !reached[v] {
            let best = (0..n)
                .filter(|&w| w != v)
                .max_by(|&a, &b| cap[a][v].total_cmp(&cap[b][v]).then_with(|| graph.nodes[b].cmp(&graph.nodes[a])))
                .map(|w| (graph.nodes[w].clone(), cap[w][v]));
            return Err(BackhaulError::Unreachable { node: graph.nodes[v].clone(), best_candidate: best });
        }
    }
    let mut tree = BackhaulTree::alone(donor.clone(), objective);
    for v in 0..n {
        if let Some(p) = parent[v] {
            tree.attach(graph.nodes[v].clone(), graph.nodes[p].clone(), cap[v][p]);
        }
    }
    debug_assert!(tree.is_valid());
    Ok(tree)
}

/// Scales served traffic so that every node's subtree fits its bottleneck.
/// Normal users are reduced first (proportionally, down to zero), then MC
/// users proportionally.
pub fn apply_backhaul_cap(result: &AllocationResult, tree: &BackhaulTree, scenario: &Scenario) -> AllocationResult {
    let mut out = result.clone();
    let station_of: Vec<Option<StationId>> = out
        .users
        .iter()
        .map(|u| u.serving_cell.filter(|_| u.is_connected()).and_then(|c| scenario.cell_station(c)).map(|s| s.id.clone()))
        .collect();
    let mut nodes: Vec<(usize, StationId)> = tree
        .parent
        .keys()
        .filter_map(|n| tree.hops(n).map(|h| (h, n.clone())))
        .collect();
    nodes.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));

    for (_, node) in nodes {
        let cap = match bottleneck_capacity(tree, &node) {
            Ok(c) => c,
            Err(_) => continue,
        };
        let members: BTreeSet<StationId> = tree.subtree(&node).into_iter().collect();
        let affected: Vec<usize> = (0..out.users.len())
            .filter(|&i| station_of[i].as_ref().is_some_and(|s| members.contains(s)))
            .collect();
        let traffic = |i: usize, o: &AllocationResult| o.users[i].served_dl_mbps + o.users[i].served_ul_mbps;
        let total: f64 = affected.iter().map(|&i| traffic(i, &out)).sum();
        if total <= cap {
            continue;
        }
        let excess = total - cap;
        let (normals, mcs): (Vec<usize>, Vec<usize>) =
            affected.iter().partition(|&&i| out.users[i].kind == UserKind::Normal);
        let normal_total: f64 = normals.iter().map(|&i| traffic(i, &out)).sum();
        let (normal_scale, mc_scale) = if normal_total >= excess {
            ((normal_total - excess) / normal_total, 1.0)
        } else {
            let mc_total: f64 = mcs.iter().map(|&i| traffic(i, &out)).sum();
            (0.0, if mc_total > 0.0 { (cap / mc_total).min(1.0) } else { 1.0 })
        };
        for (list, scale) in [(&normals, normal_scale), (&mcs, mc_scale)] {
            if scale >= 1.0 {
                continue;
            }
            for &i in list.iter() {
                let u = &mut out.users[i];
                u.served_dl_mbps *= scale;
                u.served_ul_mbps *= scale;
                u.dl_fraction *= scale;
                u.ul_fraction *= scale;
            }
        }
    }

    for (o, u) in out.users.iter_mut().zip(&scenario.users) {
        if o.status != UserStatus::DroppedLink {
            o.status = UserStatus::from_traffic(u, o.served_dl_mbps, o.served_ul_mbps);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplacementStep {
    Integrate { node: StationId, parent: StationId },
    Reparent { child: StationId, to: StationId },
    HandoverUsers { from: StationId, to: StationId },
    Detach { node: StationId },
}

impl fmt::Display for ReplacementStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplacementStep::Integrate { node, parent } => write!(f, "integrate {node} parent={parent}"),
            ReplacementStep::Reparent { child, to } => write!(f, "reparent {child} to={to}"),
            ReplacementStep::HandoverUsers { from, to } => write!(f, "handover_users from={from} to={to}"),
            ReplacementStep::Detach { node } => write!(f, "detach {node}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplacementPlan {
    pub old: StationId,
    pub new: StationId,
    pub steps: Vec<ReplacementStep>,
}

/// Tree and user attachment after one executed step.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplacementSnapshot {
    pub tree: BackhaulTree,
    /// Station currently carrying the old node's users.
    pub users_on: StationId,
}

/// Make-before-break swap of `old` for `new`: integrate the new node under
/// the old node's parent, move each child, hand the users over, detach.
pub fn plan_replacement(
    tree: &BackhaulTree,
    old: &StationId,
    new: &StationId,
    graph: &CapacityGraph,
) -> Result<ReplacementPlan, BackhaulError> {
    if old == &tree.donor {
        return Err(BackhaulError::DonorReplacement(old.clone()));
    }
    let parent = tree.parent.get(old).ok_or_else(|| BackhaulError::NotInTree(old.clone()))?.clone();
    if graph.between(new, &parent) <= 0.0 {
        return Err(BackhaulError::NoLink { node: new.clone(), target: parent });
    }
    let children = tree.children(old);
    if let Some(c) = children.iter().find(|c| graph.between(c, new) <= 0.0) {
        return Err(BackhaulError::NoLink { node: c.clone(), target: new.clone() });
    }
    let mut steps = vec![ReplacementStep::Integrate { node: new.clone(), parent }];
    steps.extend(children.into_iter().map(|child| ReplacementStep::Reparent { child, to: new.clone() }));
    steps.push(ReplacementStep::HandoverUsers { from: old.clone(), to: new.clone() });
    steps.push(ReplacementStep::Detach { node: old.clone() });
    Ok(ReplacementPlan { old: old.clone(), new: new.clone(), steps })
}

impl ReplacementPlan {
    /// Executes the plan step by step, checking after every step that each
    /// node (except the old one once its users are gone) keeps a donor path.
    pub fn execute(&self, tree: &BackhaulTree, graph: &CapacityGraph) -> Result<Vec<ReplacementSnapshot>, BackhaulError> {
        let mut t = tree.clone();
        let mut users_on = self.old.clone();
        let mut released = false;
        let mut out = Vec::with_capacity(self.steps.len());
        for (i, step) in self.steps.iter().enumerate() {
            match step {
                ReplacementStep::Integrate { node, parent } => t.attach(node.clone(), parent.clone(), graph.between(node, parent)),
                ReplacementStep::Reparent { child, to } => t.attach(child.clone(), to.clone(), graph.between(child, to)),
                ReplacementStep::HandoverUsers { from, to } => {
                    if &users_on != from {
                        return Err(BackhaulError::Continuity { step: i + 1, detail: format!("users are not on {from}") });
                    }
                    users_on = to.clone();
                    released = true;
                }
                ReplacementStep::Detach { node } => {
                    if !t.children(node).is_empty() {
                        return Err(BackhaulError::Continuity { step: i + 1, detail: format!("{node} still has children") });
                    }
                    t.detach(node);
                }
            }
            for n in t.nodes() {
                if released && n == self.old {
                    continue;
                }
                if t.path_to_donor(&n).is_none() {
                    return Err(BackhaulError::Continuity { step: i + 1, detail: format!("{n} lost its donor path") });
                }
            }
            if !t.contains(&users_on) {
                return Err(BackhaulError::Continuity { step: i + 1, detail: format!("users stranded on {users_on}") });
            }
            out.push(ReplacementSnapshot { tree: t.clone(), users_on: users_on.clone() });
        }
        Ok(out)
    }

    pub fn log(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.steps.iter().enumerate() {
            let _ = writeln!(out, "{} {s}", i + 1);
        }
        out
    }
}

pub const TOPOLOGY_CSV_HEADER: &str = "child,parent,capacity_mbps,bottleneck_mbps";

/// Edge list ordered by depth, then child id.
pub fn topology_csv(tree: &BackhaulTree) -> String {
    let mut rows: Vec<(usize, &StationId, &StationId)> =
        tree.parent.iter().map(|(c, p)| (tree.hops(c).unwrap_or(usize::MAX), c, p)).collect();
    rows.sort();
    let mut out = format!("{TOPOLOGY_CSV_HEADER}\n");
    for (_, c, p) in rows {
        let cap = tree.link_capacity[&(c.clone(), p.clone())];
        let bn = bottleneck_capacity(tree, c).unwrap_or(f64::NAN);
        let _ = writeln!(out, "{c},{p},{cap:.6},{bn:.6}");
    }
    out
}
