//! Receding-horizon hybrid trajectory optimisation.
//!
//! Each replan builds a horizon of driving and traversing nodes from the
//! current state, transcribes it into an NLP ([`problem`]), solves it and
//! joins the resulting nodes by cubic Hermite segments.

pub mod costs;
pub mod hermite;
pub mod horizon;
pub mod problem;
pub mod switching;
pub mod verify;

use serde::Serialize;
use thiserror::Error;

use crate::nlp::{solve_warm, NlpError, Solution, SolveOptions, Status};
use crate::robot::{ModelError, RobotParams};
use crate::sequence::{Mode, SequenceError};

pub use costs::CostWeights;
pub use hermite::{hermite_trajectory, PlanSample, PlanTrajectory, TrajNode};
pub use horizon::{build_horizon, Course, HorizonSpec, PlannerState, Terminal};
pub use problem::HtoProblem;
pub use switching::{SwitchGeometry, SwitchKind};
pub use verify::{verify_plan, VerifyReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid planner input: {0}")]
    Config(String),
    #[error("zero duration between nodes {0} and {}", .0 + 1)]
    ZeroDuration(usize),
    #[error("sample time {t} outside [0, {t_end}]")]
    OutOfRange { t: f64, t_end: f64 },
    #[error("no feasible seed: {0}")]
    InfeasibleSeed(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Nlp(#[from] NlpError),
    #[error("solver ended {status:?} with violations eq {eq:.2e}, ineq {ineq:.2e}")]
    Solver { status: Status, eq: f64, ineq: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannerConfig {
    pub weights: CostWeights,
    /// Add the interior node between the third and fourth key nodes.
    pub insertion: bool,
    /// Target spacing of driving nodes, metres.
    pub driving_spacing: f64,
    pub max_driving_nodes: usize,
    pub t_min: f64,
    pub t_max: f64,
    /// A solution is accepted only below these violations.
    pub accept_eq: f64,
    pub accept_ineq: f64,
    /// Re-solves after refreshing the per-node geometry.
    pub geometry_passes: usize,
    pub solver: SolveOptions,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            weights: CostWeights::default(),
            insertion: true,
            driving_spacing: 0.5,
            max_driving_nodes: 6,
            t_min: 0.05,
            t_max: 1000.0,
            accept_eq: 1e-4,
            accept_ineq: 1e-6,
            geometry_passes: 2,
            solver: SolveOptions::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        self.weights.validate()?;
        if !(self.driving_spacing > 0.0) || self.max_driving_nodes < 2 {
            return Err(PlanError::Config("driving node spacing must be positive, at least two nodes".into()));
        }
        if !(self.t_min > 0.0 && self.t_max > self.t_min) {
            return Err(PlanError::Config("need 0 < t_min < t_max".into()));
        }
        Ok(())
    }
}

/// Sum of the three cost terms at a solution, before weighting.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CostBreakdown {
    pub time: f64,
    pub stability: f64,
    pub smoothness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plan {
    pub trajectory: PlanTrajectory,
    pub horizon: HorizonSpec,
    pub nodes: Vec<TrajNode>,
    pub durations: Vec<f64>,
    #[serde(skip)]
    pub x: Vec<f64>,
    /// `None` for a stationary plan that needed no solve.
    #[serde(skip)]
    pub solution: Option<Solution>,
    pub report: VerifyReport,
    pub costs: CostBreakdown,
    pub solve_ms: f64,
    pub passes: usize,
}

impl Plan {
    pub fn status(&self) -> Option<Status> {
        self.solution.as_ref().map(|s| s.status)
    }
}

/// Distance under which the goal counts as reached.
pub const GOAL_TOL: f64 = 1e-3;

fn stationary_plan(state: &PlannerState) -> Plan {
    let node = TrajNode { mode: state.mode, q: [state.q[0], state.q[1], state.q[2], 0.0], qdot: [0.0; 3] };
    Plan {
        trajectory: PlanTrajectory::stationary(node),
        horizon: HorizonSpec {
            nodes: Vec::new(),
            n_d: 1,
            n_t: 0,
            switch: None,
            switch_kind: None,
            switch_geometry: None,
            transition: None,
            terminal: Terminal::Driving { s_d: state.q[0], stop: true },
            c_drive: 0.0,
        },
        nodes: vec![node],
        durations: Vec::new(),
        x: Vec::new(),
        solution: None,
        report: VerifyReport::default(),
        costs: CostBreakdown::default(),
        solve_ms: 0.0,
        passes: 0,
    }
}

/// Refreshes the frozen geometry of free traversing nodes from `x`; returns
/// the largest change of an effective length.
fn refresh_geometry(h: &mut HorizonSpec, p: &HtoProblem, x: &[f64], params: &RobotParams) -> Result<f64, PlanError> {
    let Some(tr) = h.transition else { return Ok(0.0) };
    let mut change: f64 = 0.0;
    let mut prev_s: Option<f64> = None;
    for (k, node) in h.nodes.iter_mut().enumerate() {
        let (q, _) = p.node_state(x, k);
        // progress coordinates compare only between traversing nodes
        let s_here = if node.mode.is_driving() { prev_s.take() } else { prev_s.replace(q[0]) };
        let (Some(old), Some(key), false) = (node.ctx, node.key, node.pinned) else { continue };
        let ctx = horizon::node_context(params, &tr, &q)?;
        let bounds = horizon::node_bounds(tr.direction, key, &q, &ctx)?;
        // a refreshed reach behind the previous node would make the horizon
        // infeasible; keep the old geometry there
        if s_here.is_some_and(|s| bounds.s.1 < s) {
            continue;
        }
        change = change.max((ctx.lf - old.lf).abs()).max((ctx.lr - old.lr).abs()).max((ctx.s_com - old.s_com).abs());
        node.ctx = Some(ctx);
        node.bounds = bounds;
        node.seed_q = q;
    }
    Ok(change)
}

/// Plans from `state` to the end of the horizon. `warm` supplies multipliers
/// when the previous horizon had the same shape.
pub fn replan(
    state: &PlannerState,
    course: &Course,
    params: &RobotParams,
    cfg: &PlannerConfig,
    warm: Option<&Plan>,
) -> Result<Plan, PlanError> {
    let t0 = std::time::Instant::now();
    cfg.validate()?;
    if state.mode == Mode::Driving && course.is_last(state.index) && state.q[0] <= GOAL_TOL && state.qdot[0].abs() <= 1e-6 {
        return Ok(stationary_plan(state));
    }
    let mut horizon = build_horizon(state, course, params, cfg)?;
    let shape = horizon.labels();
    let mut warm_sol = warm
        .filter(|w| w.horizon.labels() == shape)
        .and_then(|w| w.solution.clone());
    let mut x0: Option<Vec<f64>> = None;
    let mut passes = 0;
    let (problem, sol) = loop {
        let problem = HtoProblem::new(&horizon, params, &cfg.weights)?;
        let nlp = problem.clone().into_nlp(cfg, params, x0.take())?;
        let sol = solve_warm(&nlp, &cfg.solver, warm_sol.as_ref())?;
        passes += 1;
        if passes > cfg.geometry_passes {
            break (problem, sol);
        }
        let change = refresh_geometry(&mut horizon, &problem, &sol.x_star, params)?;
        if change <= 1e-3 {
            break (problem, sol);
        }
        x0 = Some(sol.x_star.clone());
        warm_sol = Some(sol);
    };
    if !(sol.max_eq_violation <= cfg.accept_eq && sol.max_ineq_violation <= cfg.accept_ineq) {
        return Err(PlanError::Solver { status: sol.status, eq: sol.max_eq_violation, ineq: sol.max_ineq_violation });
    }
    let x = sol.x_star.clone();
    let nodes = problem.nodes(&x);
    let durations = problem.duration_values(&x);
    let trajectory = hermite_trajectory(&nodes, &durations)?;
    let report = verify_plan(&problem.horizon, &nodes, &durations, params);
    let costs = problem.breakdown(&x);
    Ok(Plan {
        trajectory,
        horizon: problem.horizon.clone(),
        nodes,
        durations,
        x,
        solution: Some(sol),
        report,
        costs,
        solve_ms: t0.elapsed().as_secs_f64() * 1e3,
        passes,
    })
}
