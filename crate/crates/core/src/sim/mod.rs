//! Kinematic simulator and tracking controller.
//!
//! The robot is quasi-static: while driving it lies flush on its segment,
//! while traversing it pivots on the support and settles under gravity until
//! a second contact. Mode changes are geometric events.

pub mod control;
pub mod episode;

use serde::Serialize;
use thiserror::Error;

use crate::geom::{vertical_clearance, vertical_clearance_except, Polyline, Vec2};
use crate::planner::Course;
use crate::robot::{
    effective_geometry, gear_offset_angle, pair_ground, pivot_pose, pose_on_line, DrivingState, EffectiveGeometry, ModelError,
    PivotFrame, PlanarPose, RobotParams,
};
use crate::sequence::{node_for_progress, Direction, Mode, NodeContext, Transition};

pub use control::{flipper_pd, nominal_velocity, velocity_command, Command, ControllerGains};
pub use episode::{planner_state, run_episode, EpisodeConfig, EpisodeLog, LogRow, Outcome, PlanRecord, ReplanRecord, TrackRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("stuck at t = {t:.2} s: {reason}")]
    Stuck { t: f64, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("bad step: {0}")]
    Step(String),
}

/// Contact gap under which the rear flipper tip counts as touching.
const CONTACT_GAP: f64 = 2e-3;
/// Largest lift off the support before the pose counts as infeasible.
const MAX_LIFT: f64 = 0.05;
/// Pitch tolerance for "flush on the next terrain".
const FLUSH_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimState {
    pub mode: Mode,
    /// Segment while driving, transition while traversing.
    pub index: usize,
    /// `s_d` or `s_t`.
    pub s: f64,
    /// Physical flipper angles.
    pub theta_f: f64,
    pub theta_r: f64,
    /// Pitch in the traversal frame; zero while driving.
    pub theta_t: f64,
    pub pose: PlanarPose,
    pub time: f64,
    pub ddz: f64,
    /// Last applied command.
    pub v: f64,
    pub omega_f: f64,
    pub omega_r: f64,
    z_hist: [f64; 2],
    ticks: usize,
    rear_contact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SimEvent {
    ModeChange { t: f64, from: Mode, to: Mode },
    /// Rear flipper tip left the lower terrain during an ascent.
    RearLift { t: f64, s_t: f64, s_com: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub params: RobotParams,
    pub course: Course,
    /// Real profile the robot rests on, when it differs from the segments.
    pub raw: Option<Polyline>,
    delta: f64,
    grounds: Vec<Polyline>,
    /// Half-width of the pinned-node bands used for node labels.
    band: f64,
}

impl World {
    pub fn new(params: RobotParams, course: Course, raw: Option<Polyline>, dt: f64) -> Result<Self, SimError> {
        params.validate()?;
        let delta = gear_offset_angle(&params)?;
        let grounds = course
            .transitions
            .iter()
            .map(|t| pair_ground((&course.segments[t.index], &course.segments[t.index + 1])))
            .collect();
        let band = params.v_u * dt;
        Ok(Self { params, course, raw, delta, grounds, band })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Flush driving state with the front joint at distance `s_d` before the
    /// segment's target.
    pub fn driving_state(&self, segment: usize, s_d: f64, theta_f: f64, theta_r: f64) -> Result<SimState, SimError> {
        let mut st = SimState {
            mode: Mode::Driving,
            index: segment,
            s: s_d,
            theta_f,
            theta_r,
            theta_t: 0.0,
            pose: PlanarPose::default(),
            time: 0.0,
            ddz: 0.0,
            v: 0.0,
            omega_f: 0.0,
            omega_r: 0.0,
            z_hist: [0.0; 2],
            ticks: 0,
            rear_contact: true,
        };
        let (pose, _) = self.driving_pose(&st)?;
        st.pose = self.settle_raw(&st, pose)?;
        st.z_hist = [st.pose.z; 2];
        Ok(st)
    }

    fn driving_pose(&self, st: &SimState) -> Result<(PlanarPose, EffectiveGeometry), SimError> {
        let seg = &self.course.segments[st.index];
        let ds = DrivingState { s_d: st.s, theta_f: st.theta_f, theta_r: st.theta_r };
        Ok(pose_on_line(&self.params, &ds, &seg.line(), self.course.targets[st.index])?)
    }

    fn frame(tr: &Transition, course: &Course) -> PivotFrame {
        let (a, b) = (&course.segments[tr.index], &course.segments[tr.index + 1]);
        PivotFrame { alpha_ref: tr.alpha_ref, alpha_front: b.alpha, alpha_rear: a.alpha }
    }

    fn pivot(&self, st: &SimState, s_t: f64, hint: Option<f64>) -> Result<(PlanarPose, EffectiveGeometry), SimError> {
        let tr = &self.course.transitions[st.index];
        let ground = &self.grounds[st.index];
        let support = tr.support;
        let near = |p: Vec2| (p - support).norm() < 1e-7;
        let r = pivot_pose(
            &self.params,
            s_t,
            st.theta_f,
            st.theta_r,
            support,
            &Self::frame(tr, &self.course),
            hint,
            |w| vertical_clearance_except(w, ground, near),
        )
        .map_err(|e| SimError::Stuck { t: st.time, reason: e.to_string() })?;
        if r.penetration > MAX_LIFT {
            return Err(SimError::Stuck { t: st.time, reason: format!("penetration {:.4} m", r.penetration) });
        }
        // over-constrained: the robot bridges on its two ends, just clear of
        // the support
        let pose = PlanarPose { z: r.pose.z + r.penetration, ..r.pose };
        Ok((pose, r.geometry))
    }

    fn world_outline(&self, pose: &PlanarPose, g: &EffectiveGeometry) -> [Vec2; 4] {
        g.outline(&self.params, g.thf_eff, g.thr_eff).to_world(pose.center(), pose.theta_t)
    }

    /// Lets the robot drop onto (or be lifted by) the real profile.
    fn settle_raw(&self, st: &SimState, pose: PlanarPose) -> Result<PlanarPose, SimError> {
        let Some(raw) = &self.raw else { return Ok(pose) };
        let (_, g) = match st.mode {
            Mode::Driving => self.driving_pose(st)?,
            _ => self.pivot(st, st.s, Some(pose.theta_t))?,
        };
        let c = vertical_clearance(&self.world_outline(&pose, &g), raw);
        Ok(PlanarPose { z: pose.z - c, ..pose })
    }

    pub fn node_context(&self, tr: &Transition, g: &EffectiveGeometry) -> NodeContext {
        NodeContext::new(&self.params, g, tr.alpha_rel, tr.h_rel)
    }

    /// Effective geometry at the current state.
    pub fn geometry(&self, st: &SimState) -> Result<EffectiveGeometry, SimError> {
        Ok(match st.mode {
            Mode::Driving => self.driving_pose(st)?.1,
            _ => self.pivot(st, st.s, Some(st.pose.theta_t))?.1,
        })
    }

    /// Whether the robot has reached the goal on the last segment.
    pub fn arrived(&self, st: &SimState, tol: f64) -> bool {
        st.mode == Mode::Driving && self.course.is_last(st.index) && st.s <= tol
    }

    /// One explicit Euler step of the rate commands.
    pub fn step(&self, st: &SimState, cmd: &Command, dt: f64) -> Result<(SimState, Vec<SimEvent>), SimError> {
        if !(dt > 0.0) || !cmd.v.is_finite() || !cmd.omega_f.is_finite() || !cmd.omega_r.is_finite() {
            return Err(SimError::Step(format!("dt = {dt}, command {cmd:?}")));
        }
        let p = &self.params;
        let cmd = cmd.clamped(p);
        let mut n = *st;
        n.time += dt;
        n.ticks += 1;
        n.v = cmd.v;
        n.theta_f = (st.theta_f + cmd.omega_f * dt).clamp(p.theta_l, p.theta_u);
        n.theta_r = (st.theta_r + cmd.omega_r * dt).clamp(p.theta_l, p.theta_u);
        n.omega_f = (n.theta_f - st.theta_f) / dt;
        n.omega_r = (n.theta_r - st.theta_r) / dt;
        let mut events = Vec::new();
        let pose = match st.mode {
            Mode::Driving => {
                n.s -= cmd.v * dt;
                self.drive_events(&mut n)?
            }
            Mode::Traversing { dir, .. } => {
                n.s += cmd.v * dt;
                self.traverse(&mut n, dir, &mut events)?
            }
        };
        n.pose = self.settle_raw(&n, pose)?;
        if n.mode != st.mode {
            events.insert(0, SimEvent::ModeChange { t: n.time, from: st.mode, to: n.mode });
        }
        let z = n.pose.z;
        n.ddz = if n.ticks >= 2 { (z - 2.0 * st.z_hist[1] + st.z_hist[0]) / (dt * dt) } else { 0.0 };
        n.z_hist = [st.z_hist[1], z];
        Ok((n, events))
    }

    /// Driving pose, entering traversal at the contact event.
    fn drive_events(&self, n: &mut SimState) -> Result<PlanarPose, SimError> {
        let (pose, g) = self.driving_pose(n)?;
        if self.course.is_last(n.index) {
            return Ok(pose);
        }
        let tr = self.course.transitions[n.index];
        let s_t = match tr.direction {
            Direction::Ascending => {
                // first point of the flush outline at or below the support
                let w = self.world_outline(&pose, &g);
                let (tip, joint) = (w[0], w[1]);
                let p = tr.support;
                if tip.x < p.x {
                    None
                } else if joint.x >= p.x {
                    Some(g.lf_eff)
                } else {
                    let t = (p.x - tip.x) / (joint.x - tip.x);
                    let z = tip.z + t * (joint.z - tip.z);
                    (z <= p.z).then(|| t * g.lf_eff)
                }
            }
            // the support is the edge the segment ends at
            Direction::Descending => (n.s <= 0.0).then(|| g.lf_eff - n.s),
        };
        let Some(s_t) = s_t else { return Ok(pose) };
        n.mode = Mode::Traversing { node: 1, dir: tr.direction };
        n.index = tr.index;
        n.s = s_t.max(1e-6);
        n.rear_contact = true;
        let (pose, g) = self.pivot(n, n.s, Some(tr.alpha_ref + (pose.theta_t - tr.alpha_ref)))?;
        n.theta_t = pose.theta_t - tr.alpha_ref;
        let ctx = self.node_context(&tr, &g);
        n.mode = Mode::Traversing { node: node_for_progress(tr.direction, n.s, &ctx, self.band), dir: tr.direction };
        Ok(pose)
    }

    fn traverse(&self, n: &mut SimState, dir: Direction, events: &mut Vec<SimEvent>) -> Result<PlanarPose, SimError> {
        let tr = self.course.transitions[n.index];
        let hint = Some(n.pose.theta_t);
        let f = Self::frame(&tr, &self.course);
        let g0 = effective_geometry(
            &self.params,
            n.theta_f,
            n.theta_r,
            n.pose.theta_t - f.alpha_ref,
            f.alpha_front - f.alpha_ref,
            f.alpha_rear - f.alpha_ref,
        )?;
        let l_sigma = g0.l_sigma();
        let exit_at = match dir {
            Direction::Ascending => g0.lf_eff + g0.lt_eff - 1e-6,
            Direction::Descending => l_sigma - 1e-6,
        };
        let s = n.s.min(exit_at);
        let (pose, g) = self.pivot(n, s, hint)?;
        let rel = pose.theta_t - tr.alpha_ref;
        n.theta_t = rel;
        let ctx = self.node_context(&tr, &g);
        if let Mode::Traversing { node, .. } = n.mode {
            let label = node_for_progress(dir, s, &ctx, self.band).max(node);
            n.mode = Mode::Traversing { node: label, dir };
        }
        if dir == Direction::Ascending {
            let w = self.world_outline(&pose, &g);
            let lower = &self.course.segments[tr.index].line();
            // the rear flipper bears anywhere between its joint and its tip
            let touching = lower.signed_distance(w[2]).min(lower.signed_distance(w[3])) <= CONTACT_GAP;
            if n.rear_contact && !touching {
                events.push(SimEvent::RearLift { t: n.time, s_t: s, s_com: ctx.s_com });
            }
            n.rear_contact = touching;
        }
        let flush = match dir {
            Direction::Ascending => s >= g.lf_eff && (rel - tr.alpha_rel).abs() <= FLUSH_TOL,
            Direction::Descending => s >= g.lf_eff + g.lt_eff && rel.abs() <= FLUSH_TOL,
        };
        if !(flush || n.s >= exit_at) {
            n.s = s;
            return Ok(pose);
        }
        // back to driving on the next segment, front joint projected onto it
        let seg = tr.index + 1;
        let w = self.world_outline(&pose, &g);
        n.mode = Mode::Driving;
        n.index = seg;
        n.s = self.course.s_d(seg, w[1]);
        n.theta_t = 0.0;
        let (pose, _) = self.driving_pose(n)?;
        Ok(pose)
    }
}
