use serde::Serialize;

use super::control::{flipper_pd, nominal_velocity, velocity_command, Command, ControllerGains};
use super::{SimError, SimEvent, SimState, World};
use crate::planner::switching::switching_config_residual;
use crate::planner::{replan, Plan, PlanSample, PlannerConfig, PlannerState, SwitchGeometry, SwitchKind};
use crate::sequence::{Direction, Mode};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeConfig {
    pub dt: f64,
    pub replan_period: f64,
    pub max_time: f64,
    /// Goal reached once `s_d` on the last segment is below this.
    pub arrive_tol: f64,
    pub gains: ControllerGains,
    pub planner: PlannerConfig,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            replan_period: 0.5,
            max_time: 120.0,
            arrive_tol: 0.01,
            gains: ControllerGains::default(),
            planner: PlannerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Outcome {
    Completed,
    Timeout,
    /// The planner failed (twice in a row, or on the first call).
    Aborted(String),
    /// The simulator could not place the robot.
    Failed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogRow {
    pub t: f64,
    pub mode: Mode,
    pub x: f64,
    pub z: f64,
    /// World pitch.
    pub theta_t: f64,
    pub theta_f: f64,
    pub theta_r: f64,
    pub s_coord: f64,
    pub v_cmd: f64,
    pub omega_f_cmd: f64,
    pub omega_r_cmd: f64,
    pub ddz: f64,
}

/// Tracking errors at one tick; `e_s` is `None` when the reference could not
/// be expressed in the simulator's coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackRow {
    pub t: f64,
    pub e_s: Option<f64>,
    pub e_f: f64,
    pub e_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplanRecord {
    pub t: f64,
    pub wall_ms: f64,
    pub ok: bool,
    pub message: String,
    pub origin: PlannerState,
}

/// An accepted plan with the state and time it was made from.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRecord {
    pub t: f64,
    pub origin: PlannerState,
    pub plan: Plan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub rows: Vec<LogRow>,
    pub tracking: Vec<TrackRow>,
    pub events: Vec<SimEvent>,
    pub replans: Vec<ReplanRecord>,
    pub plans: Vec<PlanRecord>,
    pub outcome: Outcome,
    pub dt: f64,
}

impl EpisodeLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,mode,x,z,theta_t,theta_f,theta_r,s_coord,v_cmd,omega_f_cmd,omega_r_cmd,ddz\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.t,
                r.mode.label(),
                r.x,
                r.z,
                r.theta_t,
                r.theta_f,
                r.theta_r,
                r.s_coord,
                r.v_cmd,
                r.omega_f_cmd,
                r.omega_r_cmd,
                r.ddz
            ));
        }
        out
    }

    /// Mode labels in order of appearance, consecutive repeats removed.
    pub fn mode_sequence(&self) -> Vec<String> {
        let mut seq: Vec<String> = Vec::new();
        for r in &self.rows {
            let l = r.mode.label();
            if seq.last() != Some(&l) {
                seq.push(l);
            }
        }
        seq
    }

    /// Mean absolute coordinate error (m) and flipper errors (rad).
    pub fn mean_tracking_errors(&self) -> (f64, f64, f64) {
        let n = self.tracking.len().max(1) as f64;
        let es: Vec<f64> = self.tracking.iter().filter_map(|r| r.e_s).map(f64::abs).collect();
        let mean_s = es.iter().fold(0.0, |a, e| a + e) / es.len().max(1) as f64;
        let ef = self.tracking.iter().map(|r| r.e_f.abs()).fold(0.0, |a, e| a + e) / n;
        let er = self.tracking.iter().map(|r| r.e_r.abs()).fold(0.0, |a, e| a + e) / n;
        (mean_s, ef, er)
    }

    pub fn tracking_csv(&self) -> String {
        let mut out = String::from("t,e_s,e_f,e_r\n");
        for r in &self.tracking {
            let es = r.e_s.map_or(String::new(), |e| format!("{e:.6}"));
            out.push_str(&format!("{:.2},{},{:.6},{:.6}\n", r.t, es, r.e_f, r.e_r));
        }
        out
    }
}

/// Planner view of a simulator state (model flipper angles).
pub fn planner_state(world: &World, st: &SimState) -> PlannerState {
    let d = world.delta();
    let s_dot = if st.mode.is_driving() { -st.v } else { st.v };
    PlannerState {
        mode: st.mode,
        index: st.index,
        q: [st.s, st.theta_f + d, st.theta_r + d, st.theta_t],
        qdot: [s_dot, st.omega_f, st.omega_r],
    }
}

/// Segment (driving) or transition (traversing) a reference sample refers to.
fn reference_index(rec: &PlanRecord, sample: &PlanSample) -> usize {
    match (rec.origin.mode.is_driving(), sample.mode.is_driving()) {
        (true, _) => rec.origin.index,
        (false, false) => rec.origin.index,
        (false, true) => rec.origin.index + 1,
    }
}

/// Planned coordinate expressed in the simulator's current mode, through
/// the switching relations when the two are on different sides of a switch.
fn reference_coordinate(world: &World, st: &SimState, rec: &PlanRecord, sample: &PlanSample) -> Option<f64> {
    let ri = reference_index(rec, sample);
    let d = world.delta();
    let course = &world.course;
    let g = world.geometry(st).ok()?;
    let same = st.mode.is_driving() == sample.mode.is_driving();
    if same {
        return (ri == st.index).then_some(sample.s);
    }
    let ref_q = [sample.s, sample.theta_f, sample.theta_r, sample.theta_t];
    let sim_q = [st.s, st.theta_f + d, st.theta_r + d, st.theta_t];
    // (transition, kind, reference is the traversing side)
    let (tr_i, kind, ref_trav) = match st.mode {
        Mode::Driving => {
            let dir_of = |i: usize| course.transitions.get(i).map(|t| t.direction);
            if ri == st.index {
                (ri, SwitchKind::DriveToTraverse(dir_of(ri)?), true)
            } else if ri + 1 == st.index {
                (ri, SwitchKind::TraverseToDrive(dir_of(ri)?), true)
            } else {
                return None;
            }
        }
        Mode::Traversing { dir, .. } => {
            if ri == st.index {
                (ri, SwitchKind::DriveToTraverse(dir), false)
            } else if ri == st.index + 1 {
                (st.index, SwitchKind::TraverseToDrive(dir), false)
            } else {
                return None;
            }
        }
    };
    let tr = course.transitions.get(tr_i)?;
    let alpha = tr.alpha_rel;
    let length = course.lengths[tr.index + 1];
    let geo = SwitchGeometry { lf: g.lf_eff, lt: g.lt_eff, length, alpha };
    let frame = |mut q: [f64; 4]| {
        if kind == SwitchKind::DriveToTraverse(Direction::Descending) {
            q[3] += alpha;
        }
        q
    };
    if ref_trav {
        let r = switching_config_residual(kind, 0.0, &frame(ref_q), &geo);
        Some(-r.value / r.d_drive)
    } else {
        // the relations are affine in the traversing coordinate
        let mut q = frame(sim_q);
        q[0] = 0.0;
        let r = switching_config_residual(kind, sample.s, &q, &geo);
        (r.d_trav[0].abs() > 1e-6).then(|| -r.value / r.d_trav[0])
    }
}

struct Tracker {
    integral: f64,
}

impl Tracker {
    fn command(
        &mut self,
        world: &World,
        st: &SimState,
        rec: &PlanRecord,
        t: f64,
        cfg: &EpisodeConfig,
    ) -> (Command, TrackRow) {
        let p = &world.params;
        let d = world.delta();
        let sample = rec.plan.trajectory.sample_clamped(t - rec.t);
        let v_des = nominal_velocity(sample.s_dot, sample.mode).clamp(0.0, p.v_u);
        let s_ref = reference_coordinate(world, st, rec, &sample);
        let e_s = s_ref.map(|s| s - st.s);
        let v = velocity_command(v_des, e_s.unwrap_or(0.0), &mut self.integral, &cfg.gains, st.mode, cfg.dt, p);
        let (tf, tr) = (sample.theta_f - d, sample.theta_r - d);
        let omega_f = flipper_pd(tf, sample.omega_f, st.theta_f, st.omega_f, &cfg.gains, p);
        let omega_r = flipper_pd(tr, sample.omega_r, st.theta_r, st.omega_r, &cfg.gains, p);
        let row = TrackRow { t: st.time, e_s, e_f: tf - st.theta_f, e_r: tr - st.theta_r };
        (Command { v, omega_f, omega_r }, row)
    }
}

/// Time of a tick; dividing by an integral rate keeps printed times short.
fn tick_time(ticks: usize, dt: f64) -> f64 {
    let rate = 1.0 / dt;
    if (rate - rate.round()).abs() < 1e-9 {
        ticks as f64 / rate.round()
    } else {
        ticks as f64 * dt
    }
}

fn log_row(st: &SimState, cmd: &Command, dt: f64) -> LogRow {
    LogRow {
        t: tick_time(st.ticks, dt),
        mode: st.mode,
        x: st.pose.x,
        z: st.pose.z,
        theta_t: st.pose.theta_t,
        theta_f: st.theta_f,
        theta_r: st.theta_r,
        s_coord: st.s,
        v_cmd: cmd.v,
        omega_f_cmd: cmd.omega_f,
        omega_r_cmd: cmd.omega_r,
        ddz: st.ddz,
    }
}

/// Closed loop from `start` until the goal, a timeout, or a failure.
pub fn run_episode(world: &World, start: SimState, cfg: &EpisodeConfig) -> EpisodeLog {
    let mut log = EpisodeLog {
        rows: Vec::new(),
        tracking: Vec::new(),
        events: Vec::new(),
        replans: Vec::new(),
        plans: Vec::new(),
        outcome: Outcome::Timeout,
        dt: cfg.dt,
    };
    let mut st = start;
    let mut tracker = Tracker { integral: 0.0 };
    let mut failures = 0;
    let mut last_replan = f64::NEG_INFINITY;
    let mut last_mode = st.mode;
    let mut current: Option<PlanRecord> = None;
    let steps = (cfg.max_time / cfg.dt).ceil() as usize;
    for _ in 0..=steps {
        let due = st.time - last_replan >= cfg.replan_period - 1e-9 || st.mode != last_mode;
        if due {
            last_replan = st.time;
            last_mode = st.mode;
            let origin = planner_state(world, &st);
            let t0 = std::time::Instant::now();
            let res = replan(&origin, &world.course, &world.params, &cfg.planner, current.as_ref().map(|r| &r.plan));
            let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
            match res {
                Ok(plan) => {
                    failures = 0;
                    log.replans.push(ReplanRecord { t: st.time, wall_ms, ok: true, message: String::new(), origin });
                    let origin = log.replans.last().unwrap().origin;
                    let rec = PlanRecord { t: st.time, origin, plan };
                    log.plans.push(rec.clone());
                    current = Some(rec);
                }
                Err(e) => {
                    failures += 1;
                    log.replans.push(ReplanRecord { t: st.time, wall_ms, ok: false, message: e.to_string(), origin });
                    if current.is_none() || failures >= 2 {
                        log.outcome = Outcome::Aborted(e.to_string());
                        return log;
                    }
                }
            }
        }
        let rec = current.as_ref().expect("a plan exists after the first replan");
        let (cmd, track) = tracker.command(world, &st, rec, st.time, cfg);
        log.rows.push(log_row(&st, &cmd, cfg.dt));
        log.tracking.push(track);
        if world.arrived(&st, cfg.arrive_tol) {
            log.outcome = Outcome::Completed;
            return log;
        }
        match world.step(&st, &cmd, cfg.dt) {
            Ok((next, events)) => {
                if next.mode != st.mode && next.mode.is_driving() != st.mode.is_driving() {
                    tracker.integral = 0.0;
                }
                log.events.extend(events);
                st = next;
            }
            Err(e) => {
                log.outcome = Outcome::Failed(match e {
                    SimError::Stuck { .. } => format!("stuck: {e}"),
                    _ => e.to_string(),
                });
                return log;
            }
        }
    }
    log
}
