//! Closed-loop drivers: ground truth (known signed distance), offline
//! (map once, learn once, then drive) and online (scan, learn and drive
//! at every step).

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::control::{filter, nominal_policy, safe_control, ControlConfig, ControlOutput};
use crate::dataset::{generate_training_data, DedupIndex, TrainingSet};
use crate::environment::{
    build_sdf_grid, true_signed_distance, Scenario, SignedDistanceGrid, Workspace,
};
use crate::sensor::{scan, SensorConfig};
use crate::svm::{BarrierModel, Trainer};
use crate::{Barrier, Error, Point, Result};

/// Grid spacing of the ground-truth signed distance barrier.
pub const GROUND_TRUTH_SPACING: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    GroundTruth,
    Offline,
    OnlineAggregate,
    OnlineInstant,
}

impl Mode {
    pub const ALL: [Mode; 4] = [
        Mode::GroundTruth,
        Mode::Offline,
        Mode::OnlineAggregate,
        Mode::OnlineInstant,
    ];

    /// File-name friendly identifier.
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::GroundTruth => "ground_truth",
            Mode::Offline => "offline",
            Mode::OnlineAggregate => "online_aggregate",
            Mode::OnlineInstant => "online_instant",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s.replace('-', "_").as_str() {
            "ground_truth" => Some(Mode::GroundTruth),
            "offline" => Some(Mode::Offline),
            "online_aggregate" => Some(Mode::OnlineAggregate),
            "online_instant" => Some(Mode::OnlineInstant),
            _ => None,
        }
    }

    pub fn is_learned(self) -> bool {
        self != Mode::GroundTruth
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: Point,
    pub u: Point,
    /// Value of the barrier in force at this step.
    pub h_hat: f64,
    pub true_sdf: f64,
    pub constraint_active: bool,
    /// Barrier of this step evaluated at the next state.
    pub h_next: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub reached_goal: bool,
    /// Control steps applied.
    pub steps: usize,
}

impl Trajectory {
    pub fn positions(&self) -> Vec<Point> {
        self.samples.iter().map(|s| s.x).collect()
    }

    pub fn min_h_hat(&self) -> f64 {
        self.samples.iter().map(|s| s.h_hat).fold(f64::INFINITY, f64::min)
    }

    pub fn min_true_sdf(&self) -> f64 {
        self.samples.iter().map(|s| s.true_sdf).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub mode: Mode,
    pub start: Point,
    pub trajectory: Trajectory,
    pub training_set_size: usize,
    pub retrain_count: usize,
    pub wall_time: f64,
    /// Steps whose state has negative true signed distance.
    pub safety_violations: usize,
    /// Steps driven by the bare nominal policy because no model existed.
    pub unconstrained_steps: usize,
    pub infeasible_steps: usize,
    /// The robot stopped (zero input) before reaching the goal.
    pub stalled: bool,
    /// Training set size after each step (online modes).
    pub training_set_sizes: Vec<usize>,
    /// Barrier model in force at the end of the run (learned modes).
    pub model: Option<BarrierModel>,
}

impl RunReport {
    pub fn min_h_hat(&self) -> f64 {
        self.trajectory.min_h_hat()
    }

    pub fn min_true_sdf(&self) -> f64 {
        self.trajectory.min_true_sdf()
    }
}

/// Per-run RNG; each mode draws from its own stream.
pub fn run_rng(seed: u64, mode: Mode) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(mode as u64 + 1);
    rng
}

struct Rollout {
    samples: Vec<TrajectorySample>,
    x: Point,
    step: usize,
    unconstrained: usize,
    infeasible: usize,
    stalled: bool,
}

impl Rollout {
    fn new(start: Point) -> Self {
        Self {
            samples: Vec::new(),
            x: start,
            step: 0,
            unconstrained: 0,
            infeasible: 0,
            stalled: false,
        }
    }

    fn t(&self, dt: f64) -> f64 {
        self.step as f64 * dt
    }

    fn at_goal(&self, scenario: &Scenario) -> bool {
        (self.x - scenario.goal).norm() <= scenario.goal_radius
    }

    /// Records the current state with `out` and advances one Euler step.
    fn advance(&mut self, scenario: &Scenario, out: &ControlOutput, h_next: Option<&dyn Fn(&Point) -> f64>) {
        let dt = scenario.control.dt;
        let next = self.x + out.u * dt;
        if out.infeasible_fallback {
            self.infeasible += 1;
        }
        self.samples.push(TrajectorySample {
            t: self.t(dt),
            x: self.x,
            u: out.u,
            h_hat: out.h_value,
            true_sdf: true_signed_distance(scenario, &self.x),
            constraint_active: out.constraint_active,
            h_next: h_next.map(|f| f(&next)),
        });
        if out.u.norm() * dt < 1e-15 {
            self.stalled = true;
        }
        self.x = next;
        self.step += 1;
    }

    fn finish(mut self, scenario: &Scenario, final_h: f64) -> (Trajectory, usize, usize, bool) {
        let reached = self.at_goal(scenario);
        let dt = scenario.control.dt;
        self.samples.push(TrajectorySample {
            t: self.t(dt),
            x: self.x,
            u: Point::zeros(),
            h_hat: final_h,
            true_sdf: true_signed_distance(scenario, &self.x),
            constraint_active: false,
            h_next: None,
        });
        let traj = Trajectory {
            samples: self.samples,
            reached_goal: reached,
            steps: self.step,
        };
        (traj, self.unconstrained, self.infeasible, self.stalled && !reached)
    }
}

fn count_violations(traj: &Trajectory) -> usize {
    traj.samples.iter().filter(|s| s.true_sdf < 0.0).count()
}

/// Drives from `start` under a fixed barrier until the goal region is
/// reached, the robot stalls, or the step cap is hit.
fn rollout_static<B: Barrier + ?Sized>(
    scenario: &Scenario,
    start: &Point,
    barrier: &B,
) -> (Trajectory, usize, bool) {
    let control: &ControlConfig = &scenario.control;
    let mut r = Rollout::new(*start);
    while !r.at_goal(scenario) && r.step < control.max_steps && !r.stalled {
        let out = safe_control(&r.x, barrier, control, &scenario.goal);
        let h_next = |p: &Point| barrier.value(p);
        r.advance(scenario, &out, Some(&h_next));
    }
    let final_h = barrier.value(&r.x);
    let (traj, _, infeasible, stalled) = r.finish(scenario, final_h);
    (traj, infeasible, stalled)
}

/// Collision-free vantage points on a grid of the given spacing (cell
/// centers of the workspace).
pub fn mapping_vantages(scenario: &Scenario, vantage_spacing: f64) -> Result<Vec<Point>> {
    if !(vantage_spacing.is_finite() && vantage_spacing > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "vantage spacing must be > 0, got {vantage_spacing}"
        )));
    }
    let ws = &scenario.workspace;
    let nx = ((ws.width() / vantage_spacing).floor() as usize).max(1);
    let ny = ((ws.height() / vantage_spacing).floor() as usize).max(1);
    let ox = ws.x_min + 0.5 * (ws.width() - (nx - 1) as f64 * vantage_spacing);
    let oy = ws.y_min + 0.5 * (ws.height() - (ny - 1) as f64 * vantage_spacing);
    let vantages: Vec<Point> = (0..ny)
        .flat_map(|iy| (0..nx).map(move |ix| Point::new(ox + ix as f64 * vantage_spacing, oy + iy as f64 * vantage_spacing)))
        .filter(|p| true_signed_distance(scenario, p) > 0.0)
        .collect();
    if vantages.is_empty() {
        return Err(Error::NoFreeVantage(vantage_spacing));
    }
    Ok(vantages)
}

/// Offline data collection: scans from every free vantage point, turned
/// into training pairs and aggregated with deduplication.
pub fn mapping_pass<R: Rng + ?Sized>(
    scenario: &Scenario,
    sensor_config: &SensorConfig,
    vantage_spacing: f64,
    rng: &mut R,
) -> Result<TrainingSet> {
    let vantages = mapping_vantages(scenario, vantage_spacing)?;
    let mut set = TrainingSet::new();
    let mut index = DedupIndex::new(scenario.learner.dedup_tol);
    for (k, v) in vantages.iter().enumerate() {
        let s = scan(scenario, v, sensor_config, k as f64, rng)?;
        let batch = generate_training_data(&s, scenario.learner.offset_d)?;
        index.extend(&mut set, &batch);
    }
    Ok(set)
}

/// Learned offline barrier together with the data it was trained on.
#[derive(Debug, Clone)]
pub struct OfflineBarrier {
    pub training_set: TrainingSet,
    /// `None` when the data lacks one of the labels (nothing to avoid).
    pub model: Option<BarrierModel>,
    pub train_time: f64,
}

impl OfflineBarrier {
    /// Mapping pass with the scenario's sensor, then a single fit.
    pub fn learn(scenario: &Scenario, seed: u64) -> Result<Self> {
        let mut rng = run_rng(seed, Mode::Offline);
        let training_set = mapping_pass(
            scenario,
            &scenario.sensor,
            scenario.learner.vantage_spacing,
            &mut rng,
        )?;
        Self::fit(scenario, training_set)
    }

    pub fn fit(scenario: &Scenario, training_set: TrainingSet) -> Result<Self> {
        let map = Arc::new(scenario.learner.feature_map(&scenario.workspace));
        let kc = scenario.learner.kernel_config(&scenario.workspace);
        let timer = Instant::now();
        let model = if training_set.has_both_labels() {
            Some(crate::svm::train(&training_set, &scenario.learner.svm_config(), &kc, map)?)
        } else {
            log::warn!("offline training set has a single label; driving unconstrained");
            None
        };
        Ok(Self {
            training_set,
            model,
            train_time: timer.elapsed().as_secs_f64(),
        })
    }
}

/// Offline closed loop under an already learned barrier.
pub fn run_offline_with(scenario: &Scenario, start: &Point, learned: &OfflineBarrier) -> Result<RunReport> {
    let timer = Instant::now();
    if let Some(model) = &learned.model {
        let h0 = model.decision(start);
        if h0 <= 0.0 {
            return Err(Error::StartOutsideLearnedSafeSet { h: h0 });
        }
    }
    if true_signed_distance(scenario, start) <= 0.0 {
        return Err(Error::StartInObstacle { x: start.x, y: start.y });
    }
    let (trajectory, infeasible, stalled) = match &learned.model {
        Some(model) => rollout_static(scenario, start, model),
        None => rollout_static(scenario, start, &Unconstrained),
    };
    let unconstrained = if learned.model.is_some() { 0 } else { trajectory.steps };
    Ok(RunReport {
        mode: Mode::Offline,
        start: *start,
        safety_violations: count_violations(&trajectory),
        trajectory,
        training_set_size: learned.training_set.len(),
        retrain_count: 1,
        wall_time: timer.elapsed().as_secs_f64() + learned.train_time,
        unconstrained_steps: unconstrained,
        infeasible_steps: infeasible,
        stalled,
        training_set_sizes: Vec::new(),
        model: learned.model.clone(),
    })
}

/// Mapping pass, single fit, then drive to the goal.
pub fn run_offline(scenario: &Scenario, start: &Point, seed: u64) -> Result<RunReport> {
    let learned = OfflineBarrier::learn(scenario, seed)?;
    run_offline_with(scenario, start, &learned)
}

/// Ground-truth closed loop with the known signed distance as barrier.
pub fn run_ground_truth_with(scenario: &Scenario, start: &Point, grid: &SignedDistanceGrid) -> Result<RunReport> {
    let timer = Instant::now();
    if true_signed_distance(scenario, start) <= 0.0 {
        return Err(Error::StartInObstacle { x: start.x, y: start.y });
    }
    let barrier = GroundTruthBarrier { scenario, grid };
    let (trajectory, infeasible, stalled) = rollout_static(scenario, start, &barrier);
    Ok(RunReport {
        mode: Mode::GroundTruth,
        start: *start,
        safety_violations: count_violations(&trajectory),
        trajectory,
        training_set_size: 0,
        retrain_count: 0,
        wall_time: timer.elapsed().as_secs_f64(),
        unconstrained_steps: 0,
        infeasible_steps: infeasible,
        stalled,
        training_set_sizes: Vec::new(),
        model: None,
    })
}

pub fn run_ground_truth(scenario: &Scenario, start: &Point) -> Result<RunReport> {
    let grid = build_sdf_grid(scenario, GROUND_TRUTH_SPACING)?;
    run_ground_truth_with(scenario, start, &grid)
}

/// Online closed loop: at each (re)training step the robot scans, turns
/// the scan into samples, either accumulates them (`aggregate`) or
/// replaces the previous set, refits, and filters the nominal input.
pub fn run_online(scenario: &Scenario, start: &Point, aggregate: bool, seed: u64) -> Result<RunReport> {
    let timer = Instant::now();
    if true_signed_distance(scenario, start) <= 0.0 {
        return Err(Error::StartInObstacle { x: start.x, y: start.y });
    }
    let mode = if aggregate { Mode::OnlineAggregate } else { Mode::OnlineInstant };
    let mut rng = run_rng(seed, mode);
    let learner = &scenario.learner;
    let control = &scenario.control;
    let map = Arc::new(learner.feature_map(&scenario.workspace));
    let mut trainer = Trainer::new(
        learner.svm_config(),
        learner.kernel_config(&scenario.workspace),
        map,
    )?;

    let mut set = TrainingSet::new();
    let mut index = DedupIndex::new(learner.dedup_tol);
    let mut model: Option<BarrierModel> = None;
    let mut retrain_count = 0;
    let mut sizes = Vec::new();
    let mut r = Rollout::new(*start);

    while !r.at_goal(scenario) && r.step < control.max_steps && !r.stalled {
        let inside = true_signed_distance(scenario, &r.x) < 0.0;
        if r.step.is_multiple_of(control.retrain_every) && !inside {
            let s = scan(scenario, &r.x, &scenario.sensor, r.t(control.dt), &mut rng)?;
            let batch = generate_training_data(&s, learner.offset_d)?;
            if aggregate {
                let before = set.len();
                index.extend(&mut set, &batch);
                trainer.extend(&set.samples[before..]);
            } else {
                set = TrainingSet::new();
                index = DedupIndex::new(learner.dedup_tol);
                index.extend(&mut set, &batch);
                trainer.clear();
                trainer.extend(&set.samples);
            }
            model = if set.has_both_labels() {
                retrain_count += 1;
                Some(trainer.fit()?)
            } else {
                None
            };
        }
        sizes.push(set.len());

        match &model {
            Some(m) => {
                let out = safe_control(&r.x, m, control, &scenario.goal);
                let h_next = |p: &Point| m.decision(p);
                r.advance(scenario, &out, Some(&h_next));
            }
            None => {
                let nominal = nominal_policy(&r.x, &scenario.goal, control.delta);
                let out = filter(f64::INFINITY, Point::zeros(), &nominal, control);
                r.unconstrained += 1;
                r.advance(scenario, &out, None);
            }
        }
    }
    let final_h = model.as_ref().map_or(f64::INFINITY, |m| m.decision(&r.x));
    let (trajectory, unconstrained, infeasible, stalled) = r.finish(scenario, final_h);
    Ok(RunReport {
        mode,
        start: *start,
        safety_violations: count_violations(&trajectory),
        trajectory,
        training_set_size: set.len(),
        retrain_count,
        wall_time: timer.elapsed().as_secs_f64(),
        unconstrained_steps: unconstrained,
        infeasible_steps: infeasible,
        stalled,
        training_set_sizes: sizes,
        model,
    })
}

/// Uniformly drawn start points inside `region` with at least
/// `min_clearance` true distance to every obstacle.
pub fn sample_free_starts<R: Rng + ?Sized>(
    scenario: &Scenario,
    region: &Workspace,
    n: usize,
    min_clearance: f64,
    rng: &mut R,
) -> Vec<Point> {
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < 100_000 {
        attempts += 1;
        let p = Point::new(
            rng.random_range(region.x_min..region.x_max),
            rng.random_range(region.y_min..region.y_max),
        );
        if true_signed_distance(scenario, &p) >= min_clearance
            && (p - scenario.goal).norm() > scenario.goal_radius
        {
            out.push(p);
        }
    }
    out
}

/// Learned barrier sampled on a regular grid over the workspace, row-major
/// from the lower-left corner.
pub fn levelset_grid<B: Barrier + Sync + ?Sized>(barrier: &B, workspace: &Workspace, spacing: f64) -> Result<Vec<(Point, f64)>> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::InvalidArgument(format!("level-set spacing must be > 0, got {spacing}")));
    }
    let nx = (workspace.width() / spacing - 1e-9).floor() as usize + 1;
    let ny = (workspace.height() / spacing - 1e-9).floor() as usize + 1;
    let points: Vec<Point> = (0..nx * ny)
        .map(|k| {
            Point::new(
                workspace.x_min + (k % nx) as f64 * spacing,
                workspace.y_min + (k / nx) as f64 * spacing,
            )
        })
        .collect();
    let values: Vec<f64> = points
        .par_chunks(1024)
        .flat_map_iter(|chunk| barrier.values(chunk))
        .collect();
    Ok(points.into_iter().zip(values).collect())
}

/// Grid points within `range` of some vantage that are truly unsafe
/// (signed distance <= 0) yet classified safe by `model`.
pub fn over_approximation_violations(
    scenario: &Scenario,
    model: &BarrierModel,
    vantages: &[Point],
    range: f64,
    spacing: f64,
) -> Result<Vec<Point>> {
    let samples = levelset_grid(&|p: &Point| {
        let sensed = vantages.iter().any(|v| (v - p).norm() <= range);
        if sensed && true_signed_distance(scenario, p) <= 0.0 {
            model.decision(p)
        } else {
            f64::NEG_INFINITY
        }
    }, &scenario.workspace, spacing)?;
    Ok(samples.into_iter().filter(|(_, h)| *h > 0.0).map(|(p, _)| p).collect())
}

/// Barrier of an empty training set: every state is admissible.
/// Exact signed distance for the value, grid gradient for the direction.
/// Bilinear interpolation overestimates the distance near curved
/// boundaries and would let a grazing rollout dip inside.
struct GroundTruthBarrier<'a> {
    scenario: &'a Scenario,
    grid: &'a SignedDistanceGrid,
}

impl Barrier for GroundTruthBarrier<'_> {
    fn value(&self, x: &Point) -> f64 {
        true_signed_distance(self.scenario, x)
    }

    fn gradient(&self, x: &Point) -> Point {
        self.grid.interpolate_gradient(x)
    }
}

struct Unconstrained;

impl Barrier for Unconstrained {
    fn value(&self, _: &Point) -> f64 {
        f64::INFINITY
    }

    fn gradient(&self, _: &Point) -> Point {
        Point::zeros()
    }
}

impl<F: Fn(&Point) -> f64> Barrier for F {
    fn value(&self, x: &Point) -> f64 {
        self(x)
    }

    fn gradient(&self, _: &Point) -> Point {
        Point::zeros()
    }
}
