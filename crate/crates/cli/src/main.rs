use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lidar_cbf::environment::{build_sdf_grid, resolve_scenario, Scenario, SignedDistanceGrid};
use lidar_cbf::io::{
    append_metrics, read_trajectory_points, write_levelset, write_model, write_sdf_grid,
    write_trajectory, write_training_set, MetricsRow,
};
use lidar_cbf::metrics::Polyline;
use lidar_cbf::sim::{
    levelset_grid, run_ground_truth_with, run_offline_with, run_online, Mode, OfflineBarrier,
    RunReport, GROUND_TRUTH_SPACING,
};
use lidar_cbf::Point;
use rayon::prelude::*;
use serde_json::{json, Value};

mod table;

#[derive(Parser)]
#[command(name = "lidar-cbf", version, about = "Learned LiDAR control barrier functions: run, evaluate, tabulate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or all controller modes for every start of a scenario.
    Run(RunArgs),
    /// Compare two trajectory CSVs (correlation R and Fréchet distance F).
    Eval(EvalArgs),
    /// Tabulate offline / online / ground-truth comparisons of a run directory.
    Table(TableArgs),
    /// Dump the ground-truth signed distance grid.
    Sdf(SdfArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    GroundTruth,
    Offline,
    OnlineAggregate,
    OnlineInstant,
    All,
}

impl ModeArg {
    fn modes(self) -> Vec<Mode> {
        match self {
            ModeArg::GroundTruth => vec![Mode::GroundTruth],
            ModeArg::Offline => vec![Mode::Offline],
            ModeArg::OnlineAggregate => vec![Mode::OnlineAggregate],
            ModeArg::OnlineInstant => vec![Mode::OnlineInstant],
            ModeArg::All => Mode::ALL.to_vec(),
        }
    }
}

#[derive(Args)]
struct ScenarioArgs {
    /// Shipped scenario name (five_ellipse, single_circle, mixed_shapes) or a file path.
    #[arg(long, default_value = "five_ellipse")]
    scenario: String,
    /// Scenario override `section.key=value`; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario> {
        resolve_scenario(&self.scenario, &self.overrides)
            .with_context(|| format!("cannot load scenario '{}'", self.scenario))
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value = "all")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "LIDAR_CBF_OUT", default_value = "out")]
    output_dir: PathBuf,
    /// Worker threads for the per-case pool; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Spacing of exported level-set grids, meters.
    #[arg(long, default_value_t = 0.02)]
    levelset_spacing: f64,
}

#[derive(Args)]
struct EvalArgs {
    traj_a: PathBuf,
    traj_b: PathBuf,
    /// Metrics report the result is appended to.
    #[arg(long, default_value = "metrics.csv")]
    report: PathBuf,
    /// Case label written to the report.
    #[arg(long, default_value = "-")]
    case: String,
}

#[derive(Args)]
struct TableArgs {
    run_dir: PathBuf,
}

#[derive(Args)]
struct SdfArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = GROUND_TRUTH_SPACING)]
    spacing: f64,
    #[arg(long, default_value = "sdf.csv")]
    output: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Eval(args) => cmd_eval(&args).map(|_| true),
        Command::Table(args) => cmd_table(&args).map(|_| true),
        Command::Sdf(args) => cmd_sdf(&args).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn report_json(r: &RunReport) -> Value {
    json!({
        "reached_goal": r.trajectory.reached_goal,
        "steps": r.trajectory.steps,
        "safety_violations": r.safety_violations,
        "min_h_hat": finite_or_null(r.min_h_hat()),
        "min_true_sdf": finite_or_null(r.min_true_sdf()),
        "training_set_size": r.training_set_size,
        "retrain_count": r.retrain_count,
        "unconstrained_steps": r.unconstrained_steps,
        "infeasible_steps": r.infeasible_steps,
        "stalled": r.stalled,
        "wall_time": r.wall_time,
    })
}

struct CaseOutcome {
    runs: Vec<(Mode, std::result::Result<RunReport, String>)>,
}

fn run_case(
    k: usize,
    start: &Point,
    scenario: &Scenario,
    modes: &[Mode],
    args: &RunArgs,
    grid: Option<&SignedDistanceGrid>,
    offline: Option<&std::result::Result<OfflineBarrier, String>>,
) -> Result<CaseOutcome> {
    let dir = args.output_dir.join(format!("case_{k:02}"));
    create_dir(&dir)?;
    let mut runs = Vec::new();
    for &mode in modes {
        let result = match mode {
            Mode::GroundTruth => run_ground_truth_with(scenario, start, grid.expect("grid built")),
            Mode::Offline => match offline.expect("offline barrier learned") {
                Ok(ob) => run_offline_with(scenario, start, ob),
                Err(e) => {
                    runs.push((mode, Err(e.clone())));
                    continue;
                }
            },
            Mode::OnlineAggregate => run_online(scenario, start, true, args.seed.wrapping_add(k as u64)),
            Mode::OnlineInstant => run_online(scenario, start, false, args.seed.wrapping_add(k as u64)),
        };
        match result {
            Ok(report) => {
                write_trajectory(dir.join(format!("{mode}.csv")), &report.trajectory)?;
                if matches!(mode, Mode::OnlineAggregate | Mode::OnlineInstant) {
                    if let Some(model) = &report.model {
                        let grid = levelset_grid(model, &scenario.workspace, args.levelset_spacing)?;
                        write_levelset(dir.join(format!("{mode}_levelset.csv")), &grid)?;
                    }
                }
                runs.push((mode, Ok(report)));
            }
            Err(e) => runs.push((mode, Err(e.to_string()))),
        }
    }
    Ok(CaseOutcome { runs })
}

fn cmd_run(args: &RunArgs) -> Result<bool> {
    let scenario = args.scenario.load()?;
    if !(args.levelset_spacing.is_finite() && args.levelset_spacing > 0.0) {
        bail!("--levelset-spacing must be > 0");
    }
    let modes = args.mode.modes();
    create_dir(&args.output_dir)?;
    if scenario.starts.is_empty() {
        log::warn!("scenario '{}' has no start points", args.scenario.scenario);
    }

    let grid = if modes.contains(&Mode::GroundTruth) {
        Some(build_sdf_grid(&scenario, GROUND_TRUTH_SPACING)?)
    } else {
        None
    };
    let offline = if modes.contains(&Mode::Offline) {
        let learned = OfflineBarrier::learn(&scenario, args.seed).map_err(|e| e.to_string());
        if let Ok(ob) = &learned {
            write_training_set(args.output_dir.join("offline_training_set.csv"), &ob.training_set)?;
            if let Some(model) = &ob.model {
                write_model(args.output_dir.join("offline_model.csv"), model)?;
                let ls = levelset_grid(model, &scenario.workspace, args.levelset_spacing)?;
                write_levelset(args.output_dir.join("offline_levelset.csv"), &ls)?;
            }
        }
        Some(learned)
    } else {
        None
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .context("cannot build worker pool")?;
    let outcomes: Vec<Result<CaseOutcome>> = pool.install(|| {
        scenario
            .starts
            .par_iter()
            .enumerate()
            .map(|(k, s)| run_case(k, s, &scenario, &modes, args, grid.as_ref(), offline.as_ref()))
            .collect()
    });

    let mut ok = true;
    let mut cases = Vec::new();
    for (k, (outcome, start)) in outcomes.into_iter().zip(&scenario.starts).enumerate() {
        let outcome = outcome?;
        let mut runs = serde_json::Map::new();
        for (mode, result) in &outcome.runs {
            match result {
                Ok(r) => {
                    if r.safety_violations > 0 {
                        ok = false;
                        eprintln!(
                            "safety violation: case {k:02} {mode}: {} steps with negative clearance",
                            r.safety_violations
                        );
                    }
                    println!(
                        "case {k:02} {mode:<16} reached_goal={} steps={} violations={} min_sdf={:.4}",
                        r.trajectory.reached_goal,
                        r.trajectory.steps,
                        r.safety_violations,
                        r.min_true_sdf()
                    );
                    runs.insert(mode.to_string(), report_json(r));
                }
                Err(e) => {
                    ok = false;
                    eprintln!("error: case {k:02} {mode}: {e}");
                    runs.insert(mode.to_string(), json!({ "error": e }));
                }
            }
        }
        cases.push(json!({ "case": k, "start": [start.x, start.y], "runs": runs }));
    }

    let offline_json = match &offline {
        Some(Ok(ob)) => match &ob.model {
            Some(m) => json!({
                "training_samples": ob.training_set.len(),
                "support_vectors": m.num_supports(),
                "bias": m.bias,
                "c_minus": m.diagnostics.c_minus,
                "solver_iterations": m.diagnostics.iterations,
                "negative_margin_violations": m.diagnostics.negative_margin_violations,
                "train_time": ob.train_time,
            }),
            None => json!({ "training_samples": ob.training_set.len(), "model": null }),
        },
        Some(Err(e)) => {
            ok = false;
            eprintln!("error: offline training: {e}");
            json!({ "error": e })
        }
        None => Value::Null,
    };
    let summary = json!({
        "scenario": args.scenario.scenario,
        "overrides": args.scenario.overrides,
        "seed": args.seed,
        "modes": modes.iter().map(|m| m.as_str()).collect::<Vec<_>>(),
        "control": scenario.control,
        "sensor": scenario.sensor,
        "learner": scenario.learner,
        "offline": offline_json,
        "cases": cases,
    });
    let summary_path = args.output_dir.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")
        .with_context(|| format!("cannot write {}", summary_path.display()))?;

    let table = table::build_table(&args.output_dir)?;
    if table.rows.iter().any(|r| r.scores.iter().any(Option::is_some)) {
        table.write(&args.output_dir)?;
        print!("{}", table.to_text());
    }
    Ok(ok)
}

fn mode_label(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("-")
        .to_string()
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let load = |p: &Path| -> Result<Polyline> {
        let pts = read_trajectory_points(p)?;
        Polyline::new(pts).with_context(|| format!("{}: not a trajectory", p.display()))
    };
    let a = load(&args.traj_a)?;
    let b = load(&args.traj_b)?;
    let score = table::compare(&a, &b);
    println!("R = {:.6}", score.r);
    println!("F = {:.6}", score.f);
    append_metrics(
        &args.report,
        &[MetricsRow {
            case: args.case.clone(),
            mode_a: mode_label(&args.traj_a),
            mode_b: mode_label(&args.traj_b),
            r: score.r,
            f: score.f,
        }],
    )?;
    Ok(())
}

fn cmd_table(args: &TableArgs) -> Result<()> {
    let table = table::build_table(&args.run_dir)?;
    table.write(&args.run_dir)?;
    print!("{}", table.to_text());
    Ok(())
}

fn cmd_sdf(args: &SdfArgs) -> Result<()> {
    let scenario = args.scenario.load()?;
    let grid = build_sdf_grid(&scenario, args.spacing)?;
    write_sdf_grid(&args.output, &grid)?;
    println!("{} x {} nodes written to {}", grid.nx, grid.ny, args.output.display());
    Ok(())
}
