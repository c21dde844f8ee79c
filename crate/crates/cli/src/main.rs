use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use deploynet::backhaul::{build_topology, plan_replacement, topology_csv, CapacityGraph, Objective};
use deploynet::beam::{align, trace_csv, BearingHarness};
use deploynet::runner::{self, Variant};
use deploynet::scenario::{load_scenario_with_seed, Backhaul, Scenario, StationId, StationKind};

#[derive(Parser)]
#[command(name = "deploynet", version, about = "Deployable 5G network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Allocate one scenario; writes users.csv, cells.csv and summary.csv.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Run the macro-only, macro+UAV and macro+truck variants; writes compare.csv.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of macro_only, macro_uav, macro_truck.
        #[arg(long, value_delimiter = ',', default_value = "macro_only,macro_uav,macro_truck")]
        variants: Vec<Variant>,
    },
    /// Move the emergency area toward a station; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Target station (default: the last macro in the scenario).
        #[arg(long)]
        toward: Option<String>,
        /// Comma-separated distances in km.
        #[arg(long, value_delimiter = ',')]
        distances: Option<Vec<f64>>,
        #[arg(long, default_value = "macro_uav")]
        variant: Variant,
    },
    /// Build the IAB backhaul tree; writes topology.csv (and replacement.log).
    Topology {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        objective: Option<ObjectiveArg>,
        /// Network whose IAB tree to build (default: the first IAB network).
        #[arg(long)]
        network: Option<String>,
        /// Plan a make-before-break swap of this node...
        #[arg(long, requires = "with")]
        replace: Option<String>,
        /// ...for this station.
        #[arg(long, requires = "replace")]
        with: Option<String>,
    },
    /// Two-step beam alignment against a noiseless donor; writes align_trace.csv.
    Align {
        /// Scenario supplying the alignment parameters (defaults otherwise).
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// True donor bearing in degrees.
        #[arg(long, default_value_t = 123.4)]
        bearing: f64,
        /// Received power without array gain, dBm.
        #[arg(long, default_value_t = -60.0)]
        link_budget: f64,
        /// Orientation errors (deg) fed to the tracker after alignment;
        /// writes tracking.csv.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        track_errors: Option<Vec<f64>>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario seed (affects generated users).
    #[arg(long)]
    seed: Option<u64>,
    /// Treat networks as isolated: no interference between networks.
    #[arg(long)]
    no_internet_interference: bool,
    /// Whether MC users may attach to the mobile network.
    #[arg(long, value_enum)]
    mc_on_mobile: Option<Toggle>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    MinLatency,
    MaxCapacity,
}

/// Input problems exit with 2, like usage errors.
struct InputError(anyhow::Error);

fn load(common: &Common) -> std::result::Result<Scenario, InputError> {
    let mut s = load_scenario_with_seed(&common.scenario, common.seed)
        .with_context(|| format!("loading {}", common.scenario.display()))
        .map_err(InputError)?;
    if common.no_internet_interference {
        s.radio.inter_network_interference = false;
    }
    Ok(s)
}

fn single_toggle(common: &Common, scenario: &mut Scenario) -> std::result::Result<(), InputError> {
    match common.mc_on_mobile {
        Some(Toggle::On) => scenario.allocation.mc_allowed_on_mobile = true,
        Some(Toggle::Off) => scenario.allocation.mc_allowed_on_mobile = false,
        Some(Toggle::Both) => return Err(InputError(anyhow!("--mc-on-mobile both is only meaningful for sweep"))),
        None => {}
    }
    Ok(())
}

fn write(dir: &Path, files: &[(&str, String)]) -> Result<()> {
    runner::write_files(dir, files)?;
    for (name, _) in files {
        println!("wrote {}", dir.join(name).display());
    }
    Ok(())
}

fn execute(command: Command) -> std::result::Result<Result<()>, InputError> {
    Ok(match command {
        Command::Run { common } => {
            let mut s = load(&common)?;
            single_toggle(&common, &mut s)?;
            runner::run_scenario(&s)
                .map_err(Into::into)
                .and_then(|out| write(&common.out, &runner::run_files(&s, &out)))
        }
        Command::Compare { common, variants } => {
            let mut s = load(&common)?;
            single_toggle(&common, &mut s)?;
            runner::compare(&s, &variants)
                .map_err(Into::into)
                .and_then(|c| write(&common.out, &[("compare.csv", c.csv())]))
        }
        Command::Sweep { common, toward, distances, variant } => {
            let s = load(&common)?;
            let toward = match toward {
                Some(t) => StationId(t),
                None => s
                    .stations
                    .iter()
                    .rev()
                    .find(|st| st.kind == StationKind::Macro)
                    .map(|st| st.id.clone())
                    .ok_or_else(|| InputError(anyhow!("scenario has no macro station; pass --toward")))?,
            };
            let mut spec = runner::SweepSpec::new(toward);
            spec.variant = variant;
            if let Some(d) = distances {
                spec.distances_km = d;
            }
            spec.mc_allowed = match common.mc_on_mobile {
                Some(Toggle::On) => vec![true],
                Some(Toggle::Off) => vec![false],
                Some(Toggle::Both) | None => Vec::new(),
            };
            let v = spec.violations();
            if !v.is_empty() {
                return Err(InputError(anyhow!("invalid sweep: {}", v.join("; "))));
            }
            runner::sweep(&s, &spec)
                .map_err(Into::into)
                .and_then(|rows| write(&common.out, &[("sweep.csv", runner::sweep_csv(&rows))]))
        }
        Command::Topology { common, objective, network, replace, with } => {
            let s = load(&common)?;
            topology(&s, &common.out, objective, network.as_deref(), replace.zip(with))
        }
        Command::Align { scenario, out, bearing, link_budget, track_errors } => {
            let config = match scenario {
                Some(p) => load_scenario_with_seed(&p, None)
                    .with_context(|| format!("loading {}", p.display()))
                    .map_err(InputError)?
                    .alignment,
                None => Default::default(),
            };
            let mut harness = BearingHarness::new(bearing, config);
            harness.link_budget_dbm = link_budget;
            align_files(&harness, track_errors.as_deref()).and_then(|files| {
                write(&out, &files)?;
                Ok(())
            })
        }
    })
}

fn topology(
    s: &Scenario,
    out: &Path,
    objective: Option<ObjectiveArg>,
    network: Option<&str>,
    swap: Option<(String, String)>,
) -> Result<()> {
    let net = s
        .networks
        .iter()
        .find(|n| network.map_or(n.backhaul == Backhaul::Iab, |id| n.id.0 == id))
        .ok_or_else(|| anyhow!("no IAB network in the scenario"))?;
    let members: Vec<_> = s.stations.iter().filter(|st| st.network_id == net.id).collect();
    let donor = members
        .iter()
        .find(|st| st.is_iab_donor)
        .ok_or_else(|| anyhow!("network {} has no IAB donor", net.id))?;
    let nodes: Vec<StationId> = members.iter().filter(|st| st.is_iab_node && !st.is_iab_donor).map(|st| st.id.clone()).collect();
    let objective = match objective {
        Some(ObjectiveArg::MinLatency) => Objective::MinLatency,
        Some(ObjectiveArg::MaxCapacity) => Objective::MaxCapacity,
        None => s.backhaul.objective,
    };
    let tree = build_topology(&donor.id, &nodes, s, objective)?;
    let mut files = vec![("topology.csv", topology_csv(&tree))];
    if let Some((old, new)) = swap {
        let (old, new) = (StationId(old), StationId(new));
        if s.station(&new).is_none() {
            bail!("unknown station {new}");
        }
        let mut ids = tree.nodes();
        ids.push(new.clone());
        let graph = CapacityGraph::from_scenario(s, &ids)?;
        let plan = plan_replacement(&tree, &old, &new, &graph)?;
        plan.execute(&tree, &graph)?;
        files.push(("replacement.log", plan.log()));
    }
    write(out, &files)
}

fn align_files(harness: &BearingHarness, track_errors: Option<&[f64]>) -> Result<Vec<(&'static str, String)>> {
    let cfg = &harness.config;
    let result = align(cfg, |o, n| harness.measure(o, n))?;
    println!(
        "aligned to {:.3} deg (coarse {:.1} deg, true {:.3} deg), {:.2} dBm",
        result.state.orientation_deg, result.coarse_orientation_deg, harness.target_bearing_deg, result.state.reference_rx_dbm
    );
    let mut files = vec![("align_trace.csv", trace_csv(&result.trace))];
    if let Some(errors) = track_errors {
        let mut state = result.state.clone();
        let mut samples = Vec::with_capacity(errors.len());
        for &e in errors {
            let sample = harness.sample(&state, e);
            state.observe(cfg, sample);
            samples.push((e, sample.rx_power_dbm, state.clone()));
        }
        let mut csv = String::from("sample,orientation_error_deg,rx_power_dbm,mode,n_active,consecutive_degraded\n");
        for (i, (e, p, st)) in samples.iter().enumerate() {
            csv.push_str(&format!(
                "{},{:.6},{:.6},{},{},{}\n",
                i + 1,
                e,
                p,
                st.mode.as_str(),
                st.active_elements,
                st.consecutive_degraded
            ));
        }
        files.push(("tracking.csv", csv));
    }
    Ok(files)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
        Err(InputError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
