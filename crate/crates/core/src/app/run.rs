use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::metrics::{compute_metrics, MetricsReport};
use super::scenario::{Ablation, Scenario};
use super::AppError;
use crate::geom::Polyline;
use crate::planner::{Course, PlanError};
use crate::sim::{run_episode, EpisodeLog, Outcome, SimEvent, SimState, World};
use crate::terrain::{simplify, write_profile_csv, write_terrain_csv, ProfilePoint, TerrainSegment};

/// Everything one run produced.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub scenario: String,
    pub seed: Option<u64>,
    pub ablation: Option<Ablation>,
    pub raw_contact: bool,
    pub profile: Vec<ProfilePoint>,
    pub segments: Vec<TerrainSegment>,
    pub course: Course,
    pub log: EpisodeLog,
    pub metrics: MetricsReport,
}

/// The parts of a run reported in `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: Option<u64>,
    pub ablation: Option<Ablation>,
    pub raw_contact: bool,
    pub outcome: Outcome,
    pub segments: usize,
    pub h_steps: Vec<f64>,
    pub mode_sequence: Vec<String>,
    pub rear_lifts: Vec<(f64, f64)>,
    /// Mean absolute tracking errors: m, deg, deg.
    pub tracking: [f64; 3],
    pub failed_replans: usize,
    pub metrics: MetricsReport,
}

impl RunResult {
    pub fn summary(&self) -> RunSummary {
        let (es, ef, er) = self.log.mean_tracking_errors();
        RunSummary {
            scenario: self.scenario.clone(),
            seed: self.seed,
            ablation: self.ablation,
            raw_contact: self.raw_contact,
            outcome: self.log.outcome.clone(),
            segments: self.segments.len(),
            h_steps: self.segments.iter().map(|s| s.h_step).collect(),
            mode_sequence: self.log.mode_sequence(),
            rear_lifts: self
                .log
                .events
                .iter()
                .filter_map(|e| match e {
                    SimEvent::RearLift { s_t, s_com, .. } => Some((*s_t, *s_com)),
                    _ => None,
                })
                .collect(),
            tracking: [es, ef.to_degrees(), er.to_degrees()],
            failed_replans: self.log.replans.iter().filter(|r| !r.ok).count(),
            metrics: self.metrics.clone(),
        }
    }
}

/// Flush driving state with the front joint above profile distance `d`.
pub fn start_state(world: &World, d: f64, flippers: [f64; 2]) -> Result<SimState, AppError> {
    let course = &world.course;
    let k = course
        .segments
        .iter()
        .position(|s| s.p_start.d <= d && d <= s.p_end.d)
        .ok_or_else(|| AppError::Scenario(format!("start {d} is not on a simplified segment")))?;
    let seg = &course.segments[k];
    let t = (d - seg.p_start.d) / (seg.p_end.d - seg.p_start.d);
    let fj = seg.start() + (seg.end() - seg.start()) * t;
    Ok(world.driving_state(k, course.s_d(k, fj), flippers[0], flippers[1])?)
}

/// Profile, simplification, closed-loop episode and metrics.
pub fn run_once(
    sc: &Scenario,
    ablation: Option<Ablation>,
    raw_contact: bool,
    seed: Option<u64>,
) -> Result<RunResult, AppError> {
    let (profile, start) = sc.realise(seed)?;
    let segments = simplify(&profile, &sc.simplify).map_err(AppError::Simplification)?;
    let course = Course::new(&segments, sc.goal)?;
    let cfg = sc.episode_config(ablation);
    cfg.planner.validate().map_err(|e| match e {
        PlanError::Config(m) => AppError::Scenario(m),
        e => AppError::Planning(e),
    })?;
    let raw = raw_contact.then(|| Polyline::new(profile.iter().map(|p| p.vec())));
    let world = World::new(sc.robot, course.clone(), raw, cfg.dt)?;
    let st = start_state(&world, start, sc.start_flippers)?;
    let log = run_episode(&world, st, &cfg);
    let ms: Vec<f64> = log.replans.iter().map(|r| r.wall_ms).collect();
    let metrics = if log.rows.is_empty() { MetricsReport::empty(&ms) } else { compute_metrics(&log.rows, &ms)? };
    Ok(RunResult { scenario: sc.name.clone(), seed, ablation, raw_contact, profile, segments, course, log, metrics })
}

/// Node table of every accepted plan, times relative to the replan.
pub fn plan_csv(log: &EpisodeLog) -> String {
    let mut out = String::from("replan_t,node,mode,t,s,theta_f,theta_r,theta_t,s_dot,omega_f,omega_r\n");
    for rec in &log.plans {
        let mut t = 0.0;
        for (k, n) in rec.plan.nodes.iter().enumerate() {
            if k > 0 {
                t += rec.plan.durations[k - 1];
            }
            let [s, f, r, p] = n.q;
            let [sd, wf, wr] = n.qdot;
            let _ = writeln!(out, "{:.2},{k},{},{t},{s},{f},{r},{p},{sd},{wf},{wr}", rec.t, n.mode.label());
        }
    }
    out
}

fn events_csv(log: &EpisodeLog) -> String {
    let mut out = String::from("t,event,from,to,s_t,s_com\n");
    for e in &log.events {
        let _ = match e {
            SimEvent::ModeChange { t, from, to } => {
                writeln!(out, "{t:.4},mode_change,{},{},,", from.label(), to.label())
            }
            SimEvent::RearLift { t, s_t, s_com } => writeln!(out, "{t:.4},rear_lift,,,{s_t},{s_com}"),
        };
    }
    out
}

/// Writes the CSV logs and `metrics.json` of a run into `dir`.
pub fn write_outputs(dir: &Path, r: &RunResult) -> Result<(), AppError> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let files = [
        ("profile.csv", write_profile_csv(&r.profile)),
        ("terrain.csv", write_terrain_csv(&r.segments)),
        ("plan.csv", plan_csv(&r.log)),
        ("episode.csv", r.log.to_csv()),
        ("tracking.csv", r.log.tracking_csv()),
        ("events.csv", events_csv(&r.log)),
        ("metrics.json", serde_json::to_string_pretty(&r.summary()).expect("summary serialises") + "\n"),
    ];
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| AppError::io(&path, e))?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct AblationReport {
    pub full: RunResult,
    pub ablated: RunResult,
}

impl AblationReport {
    /// One line per metric: full-cost value, then ablated.
    pub fn table(&self) -> String {
        let (a, b) = (&self.full.metrics, &self.ablated.metrics);
        let name = self.ablated.ablation.map_or("none", Ablation::name);
        let rows = [
            ("total_time_s", a.total_time, b.total_time),
            ("max_abs_pitch_deg", a.max_abs_pitch_deg, b.max_abs_pitch_deg),
            ("max_abs_pitch_rate_deg_s", a.max_abs_pitch_rate_deg_s, b.max_abs_pitch_rate_deg_s),
            ("rotation_angle_deg", a.rotation_angle_deg, b.rotation_angle_deg),
            ("max_z_accel", a.max_z_accel, b.max_z_accel),
            ("net_progress_m", a.net_progress, b.net_progress),
        ];
        let mut out = format!("{:<26}{:>14}{:>14}\n", "metric", "full", format!("no {name}"));
        for (k, x, y) in rows {
            let _ = writeln!(out, "{k:<26}{x:>14.4}{y:>14.4}");
        }
        out
    }
}

/// Full-cost run next to the run without one cost term.
pub fn ablate(sc: &Scenario, drop: Ablation, raw_contact: bool, seed: Option<u64>) -> Result<AblationReport, AppError> {
    Ok(AblationReport {
        full: run_once(sc, None, raw_contact, seed)?,
        ablated: run_once(sc, Some(drop), raw_contact, seed)?,
    })
}
