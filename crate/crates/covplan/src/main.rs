use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use covplan::energy::sufficient_feasibility_check;
use covplan::error::{Error, Result};
use covplan::formation::{solve_och, solve_ocv, Formation};
use covplan::planner::{assign_start_offsets, build_schedule, CycleSchedule};
use covplan::report::{sig6, write_coverage_csv, write_summary_text, write_trace_csv};
use covplan::routing::{build_graph, solve_alternating_tour, TourMode, EXACT_MAX_AGENTS};
use covplan::scenario::Scenario;
use covplan::simulator::{metrics, run, BaselineParams, Controller, SimSetup, Summary};

#[derive(Parser)]
#[command(name = "covplan", version, about = "Energy-constrained multi-agent coverage planning and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the coverage and charging formations.
    Formations(CommonArgs),
    /// Route the alternating tour and derive the cycle schedule.
    Plan(CommonArgs),
    /// Run the closed-loop simulation with one controller.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value_t = ControllerKind::Centralized)]
        controller: ControllerKind,
    },
    /// Run both controllers and report the performance gap.
    Compare(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Scenario configuration (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the scenario RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the simulation time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the reward-grid cell size.
    #[arg(long)]
    grid: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ControllerKind {
    Centralized,
    Baseline,
}

impl ControllerKind {
    fn label(&self) -> &'static str {
        match self {
            ControllerKind::Centralized => "centralized",
            ControllerKind::Baseline => "baseline",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Formations(args) => with_context(&args, cmd_formations),
        Command::Plan(args) => with_context(&args, cmd_plan),
        Command::Simulate { common, controller } => {
            with_context(&common, |ctx| cmd_simulate(ctx, controller))
        }
        Command::Compare(args) => with_context(&args, cmd_compare),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Exit status contract: 2 config, 3 non-convergence, 4 infeasibility,
/// 5 constraint violation.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Io(_) => 2,
        Error::NonConvergence(_) => 3,
        Error::Infeasible(_) | Error::InfeasibleTransition { .. } => 4,
        Error::UnsupportedModel(_) => 2,
        Error::Violation(_) => 5,
    }
}

struct Context {
    scenario: Scenario,
    scenario_path: PathBuf,
    out: Outputs,
}

fn with_context(args: &CommonArgs, f: impl FnOnce(&mut Context) -> Result<()>) -> Result<()> {
    let mut scenario = Scenario::load(&args.scenario)?;
    if let Some(seed) = args.seed {
        scenario.sim.seed = seed;
    }
    if let Some(dt) = args.dt {
        scenario.sim.dt = dt;
    }
    if let Some(cell) = args.grid {
        scenario.field.cell = cell;
    }
    scenario.validate()?;
    std::fs::create_dir_all(&args.out)?;
    let mut ctx = Context {
        scenario,
        scenario_path: args.scenario.clone(),
        out: Outputs { dir: args.out.clone(), written: Vec::new() },
    };
    f(&mut ctx)
}

/// Artifact writer that records path + checksum for the run manifest.
struct Outputs {
    dir: PathBuf,
    written: Vec<(String, String)>,
}

impl Outputs {
    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)?;
        let digest = Sha256::digest(bytes);
        self.written.push((name.to_string(), format!("{digest:x}")));
        Ok(path)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::Config(format!("serialize {name}: {e}")))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    fn read_json<T: serde::de::DeserializeOwned>(&self, name: &str) -> Result<T> {
        let path = self.dir.join(name);
        let text = std::fs::read_to_string(&path).map_err(|e| {
            Error::Config(format!("{} not found (run the producing subcommand first): {e}", path.display()))
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("parse {name}: {e}")))
    }

    fn manifest(&mut self, subcommand: &str, scenario_path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            subcommand: &'a str,
            scenario: String,
            outputs: Vec<ManifestEntry>,
        }
        #[derive(Serialize)]
        struct ManifestEntry {
            path: String,
            sha256: String,
        }
        let mut outputs: Vec<ManifestEntry> = self
            .written
            .iter()
            .map(|(p, h)| ManifestEntry { path: p.clone(), sha256: h.clone() })
            .collect();
        outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            subcommand,
            scenario: scenario_path.display().to_string(),
            outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Config(format!("serialize manifest: {e}")))?;
        text.push('\n');
        std::fs::write(self.dir.join("manifest.json"), text)?;
        Ok(())
    }
}

const COVERAGE_FORMATION_FILE: &str = "formation_coverage.json";
const CHARGING_FORMATION_FILE: &str = "formation_charging.json";
const TOUR_FILE: &str = "tour.json";
const SCHEDULE_FILE: &str = "schedule.json";

fn solve_formations(scenario: &Scenario) -> Result<(Formation, Formation)> {
    let space = scenario.mission_space()?;
    let field = scenario.reward_field()?;
    let model = scenario.sensing_model()?;
    let opts = scenario.solver_options();
    let ocv = solve_ocv(scenario.agents.count, &field, &model, &opts)?;
    let och = solve_och(scenario.agents.count, &field, &model, space.station, &opts)?;
    Ok((ocv, och))
}

fn cmd_formations(ctx: &mut Context) -> Result<()> {
    let (ocv, och) = solve_formations(&ctx.scenario)?;
    ctx.out.write_json(COVERAGE_FORMATION_FILE, &ocv)?;
    ctx.out.write_json(CHARGING_FORMATION_FILE, &och)?;
    ctx.out.manifest("formations", &ctx.scenario_path)?;
    println!("coverage formation H = {} ({} agents)", sig6(ocv.achieved_h), ocv.n_agents());
    println!("charging formation H = {} ({} agents)", sig6(och.achieved_h), och.n_agents());
    if !ocv.converged || !och.converged {
        return Err(Error::NonConvergence(
            "formation solver hit the iteration cap; best iterates were written".into(),
        ));
    }
    Ok(())
}

fn plan_from_formations(
    scenario: &Scenario,
    ocv: &Formation,
    och: &Formation,
) -> Result<CycleSchedule> {
    let model = scenario.energy_model()?;
    let graph = build_graph(ocv, och)?;
    let mode = if graph.n_agents() <= EXACT_MAX_AGENTS { TourMode::Exact } else { TourMode::Heuristic };
    let tour = solve_alternating_tour(&graph, mode)?;
    let schedule = build_schedule(ocv, och, &tour, &model)?;
    assign_start_offsets(&schedule, &scenario.initial_soc())
}

fn write_plan_artifacts(ctx: &mut Context, schedule: &CycleSchedule) -> Result<()> {
    ctx.out.write_json(TOUR_FILE, &schedule.tour)?;
    ctx.out.write_json(SCHEDULE_FILE, schedule)?;
    let mut text = Vec::new();
    let t = &schedule.times;
    writeln!(text, "tour_length: {}", sig6(schedule.tour.total_length))?;
    writeln!(text, "charge_time: {}", sig6(t.charge))?;
    writeln!(text, "dwell_time: {}", sig6(t.dwell))?;
    writeln!(text, "to_coverage_time: {}", sig6(t.to_coverage))?;
    writeln!(text, "to_charging_time: {}", sig6(t.to_charging))?;
    writeln!(text, "duty_fraction: {}", sig6(schedule.duty_fraction))?;
    writeln!(text, "station_arrival_soc: {}", sig6(schedule.arrival_soc))?;
    writeln!(text, "phase_period: {}", sig6(schedule.phase_period))?;
    writeln!(text, "macro_period: {}", sig6(schedule.macro_period))?;
    let chain = &schedule.chain;
    for (i, (a, d)) in chain.arrive.iter().zip(chain.depart.iter()).enumerate() {
        writeln!(text, "node_{}: arrive {} depart {}", i + 1, sig6(*a), sig6(*d))?;
    }
    ctx.out.write_bytes("plan.txt", &text)?;
    Ok(())
}

fn print_feasibility_advisory(scenario: &Scenario) -> Result<()> {
    let model = scenario.energy_model()?;
    let ok = sufficient_feasibility_check(&model, scenario.agents.count);
    println!(
        "sufficient-rate advisory (charge_rate >= n*(motion_cost*max_speed + sensing_cost)): {}",
        if ok { "satisfied" } else { "not satisfied (advisory only; exact feasibility checked separately)" }
    );
    Ok(())
}

fn cmd_plan(ctx: &mut Context) -> Result<()> {
    let ocv: Formation = ctx.out.read_json(COVERAGE_FORMATION_FILE)?;
    let och: Formation = ctx.out.read_json(CHARGING_FORMATION_FILE)?;
    print_feasibility_advisory(&ctx.scenario)?;
    let schedule = plan_from_formations(&ctx.scenario, &ocv, &och)?;
    write_plan_artifacts(ctx, &schedule)?;
    ctx.out.manifest("plan", &ctx.scenario_path)?;
    println!(
        "charge {} s, dwell {} s, transitions {} + {} s, duty fraction {}",
        sig6(schedule.times.charge),
        sig6(schedule.times.dwell),
        sig6(schedule.times.to_coverage),
        sig6(schedule.times.to_charging),
        sig6(schedule.duty_fraction)
    );
    Ok(())
}

fn run_controller(
    ctx: &Context,
    schedule: Option<&CycleSchedule>,
    kind: ControllerKind,
) -> Result<(covplan::simulator::SimTrace, Summary)> {
    let scenario = &ctx.scenario;
    let space = scenario.mission_space()?;
    let field = scenario.reward_field()?;
    let sensing = scenario.sensing_model()?;
    let energy = scenario.energy_model()?;
    let setup = SimSetup {
        space: &space,
        field: &field,
        sensing: &sensing,
        energy: &energy,
        horizon: scenario.sim.horizon,
        dt: scenario.sim.dt,
        initial_soc: scenario.initial_soc(),
    };
    let trace = match kind {
        ControllerKind::Centralized => {
            let schedule = schedule.expect("schedule required for centralized runs");
            run(&setup, Controller::Centralized(schedule))?
        }
        ControllerKind::Baseline => {
            let ocv: Formation = ctx.out.read_json(COVERAGE_FORMATION_FILE)?;
            run(
                &setup,
                Controller::Baseline(BaselineParams {
                    low_soc_threshold: scenario.baseline.low_soc_threshold,
                    wait_offset: scenario.baseline.wait_offset,
                    coverage_points: ocv.positions,
                }),
            )?
        }
    };
    let summary = metrics(&trace);
    Ok((trace, summary))
}

fn write_run_artifacts(
    ctx: &mut Context,
    label: &str,
    trace: &covplan::simulator::SimTrace,
    summary: &Summary,
) -> Result<()> {
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, trace)?;
    ctx.out.write_bytes(&format!("trace_{label}.csv"), &buf)?;
    let mut buf = Vec::new();
    write_coverage_csv(&mut buf, trace)?;
    ctx.out.write_bytes(&format!("coverage_{label}.csv"), &buf)?;
    let mut buf = Vec::new();
    write_summary_text(&mut buf, label, summary)?;
    ctx.out.write_bytes(&format!("summary_{label}.txt"), &buf)?;
    ctx.out.write_json(&format!("summary_{label}.json"), summary)?;
    Ok(())
}

fn cmd_simulate(ctx: &mut Context, kind: ControllerKind) -> Result<()> {
    let schedule: Option<CycleSchedule> = match kind {
        ControllerKind::Centralized => Some(ctx.out.read_json(SCHEDULE_FILE)?),
        ControllerKind::Baseline => None,
    };
    let (trace, summary) = run_controller(ctx, schedule.as_ref(), kind)?;
    write_run_artifacts(ctx, kind.label(), &trace, &summary)?;
    ctx.out.manifest("simulate", &ctx.scenario_path)?;
    println!(
        "{}: time-average H {} over {} s ({} deaths, {} outlet conflicts)",
        kind.label(),
        sig6(summary.time_avg_h),
        sig6(ctx.scenario.sim.horizon),
        summary.battery_deaths,
        summary.outlet_conflicts
    );
    if kind == ControllerKind::Centralized
        && (summary.battery_deaths > 0 || summary.outlet_conflicts > 0)
    {
        return Err(Error::Violation(format!(
            "centralized run recorded {} battery deaths and {} outlet conflicts",
            summary.battery_deaths, summary.outlet_conflicts
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct Comparison {
    centralized: Summary,
    baseline: Summary,
    improvement_percent: f64,
}

fn cmd_compare(ctx: &mut Context) -> Result<()> {
    let (ocv, och) = solve_formations(&ctx.scenario)?;
    ctx.out.write_json(COVERAGE_FORMATION_FILE, &ocv)?;
    ctx.out.write_json(CHARGING_FORMATION_FILE, &och)?;
    if !ocv.converged || !och.converged {
        return Err(Error::NonConvergence(
            "formation solver hit the iteration cap; best iterates were written".into(),
        ));
    }
    print_feasibility_advisory(&ctx.scenario)?;
    let schedule = plan_from_formations(&ctx.scenario, &ocv, &och)?;
    write_plan_artifacts(ctx, &schedule)?;

    let (cen_trace, cen_summary) =
        run_controller(ctx, Some(&schedule), ControllerKind::Centralized)?;
    write_run_artifacts(ctx, "centralized", &cen_trace, &cen_summary)?;
    let (base_trace, base_summary) = run_controller(ctx, None, ControllerKind::Baseline)?;
    write_run_artifacts(ctx, "baseline", &base_trace, &base_summary)?;

    let improvement = if base_summary.time_avg_h > 0.0 {
        (cen_summary.time_avg_h - base_summary.time_avg_h) / base_summary.time_avg_h * 100.0
    } else {
        0.0
    };
    let comparison = Comparison {
        centralized: cen_summary.clone(),
        baseline: base_summary.clone(),
        improvement_percent: improvement,
    };
    ctx.out.write_json("compare.json", &comparison)?;
    let mut text = Vec::new();
    writeln!(text, "metric,centralized,baseline")?;
    writeln!(
        text,
        "time_avg_H,{},{}",
        sig6(cen_summary.time_avg_h),
        sig6(base_summary.time_avg_h)
    )?;
    writeln!(text, "min_H,{},{}", sig6(cen_summary.min_h), sig6(base_summary.min_h))?;
    writeln!(text, "max_H,{},{}", sig6(cen_summary.max_h), sig6(base_summary.max_h))?;
    writeln!(
        text,
        "sensing_off_intervals,{},{}",
        cen_summary.sensing_off_intervals, base_summary.sensing_off_intervals
    )?;
    writeln!(text, "improvement_percent,{},", sig6(improvement))?;
    ctx.out.write_bytes("compare.txt", &text)?;
    ctx.out.manifest("compare", &ctx.scenario_path)?;

    println!(
        "centralized {} vs baseline {} (improvement {}%)",
        sig6(cen_summary.time_avg_h),
        sig6(base_summary.time_avg_h),
        sig6(improvement)
    );
    if cen_summary.battery_deaths > 0 || cen_summary.outlet_conflicts > 0 {
        return Err(Error::Violation(format!(
            "centralized run recorded {} battery deaths and {} outlet conflicts",
            cen_summary.battery_deaths, cen_summary.outlet_conflicts
        )));
    }
    Ok(())
}
