use serde::Serialize;

use super::switching::{switching_config_residual, SwitchGeometry, SwitchKind};
use super::{PlanError, PlannerConfig};
use crate::geom::Vec2;
use crate::robot::{effective_geometry, gear_offset_angle, RobotParams};
use crate::sequence::{
    node_constraints, plan_transitions, Direction, KeyNode, Mode, NodeBounds, NodeContext, Transition,
};
use crate::terrain::TerrainSegment;

/// Simplified route with the points every driving coordinate is measured to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Course {
    pub segments: Vec<TerrainSegment>,
    /// `transitions[k]` joins segment `k` to `k + 1`.
    pub transitions: Vec<Transition>,
    /// Per segment: support of the next transition, or the goal.
    pub targets: Vec<Vec2>,
    /// Per segment: support crossed to get onto it (start of the first).
    pub entries: Vec<Vec2>,
    /// Per segment: driving distance from entry to target.
    pub lengths: Vec<f64>,
}

impl Course {
    pub fn new(segments: &[TerrainSegment], goal_d: f64) -> Result<Self, PlanError> {
        if segments.is_empty() {
            return Err(PlanError::Config("empty terrain sequence".into()));
        }
        let (segments, transitions) = plan_transitions(segments);
        let n = segments.len();
        let last = &segments[n - 1];
        let t = ((goal_d - last.p_start.d) / (last.p_end.d - last.p_start.d)).clamp(0.0, 1.0);
        let goal = last.start() + (last.end() - last.start()) * t;
        let targets: Vec<Vec2> = (0..n).map(|k| if k + 1 < n { transitions[k].support } else { goal }).collect();
        let entries: Vec<Vec2> =
            (0..n).map(|k| if k == 0 { segments[0].start() } else { transitions[k - 1].support }).collect();
        let lengths = (0..n)
            .map(|k| {
                let l = segments[k].line();
                l.along(targets[k]) - l.along(entries[k])
            })
            .collect();
        Ok(Self { segments, transitions, targets, entries, lengths })
    }

    pub fn is_last(&self, segment: usize) -> bool {
        segment + 1 >= self.segments.len()
    }

    /// Driving coordinate for a front joint at `fj` on `segment`.
    pub fn s_d(&self, segment: usize, fj: Vec2) -> f64 {
        let l = self.segments[segment].line();
        l.along(self.targets[segment]) - l.along(fj)
    }

    /// Inverse of [`Course::s_d`]: the point on the segment line.
    pub fn point_at(&self, segment: usize, s_d: f64) -> Vec2 {
        let l = self.segments[segment].line();
        l.point_at(l.along(self.targets[segment]) - s_d)
    }
}

/// What the planner starts from. `index` is the segment while driving and the
/// transition while traversing. `q = [s, theta_f, theta_r, theta_t]` with
/// model flipper angles; `theta_t` is ignored while driving.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlannerState {
    pub mode: Mode,
    pub index: usize,
    pub q: [f64; 4],
    pub qdot: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HorizonNode {
    pub mode: Mode,
    pub key: Option<KeyNode>,
    pub pinned: bool,
    pub seed_q: [f64; 4],
    pub seed_qdot: [f64; 3],
    /// Frozen geometry and terrain of a traversing node.
    pub ctx: Option<NodeContext>,
    pub bounds: NodeBounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Terminal {
    /// The last traversal node closes the horizon.
    KeyNode,
    Driving { s_d: f64, stop: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonSpec {
    pub nodes: Vec<HorizonNode>,
    pub n_d: usize,
    pub n_t: usize,
    /// Nodes `switch - 1` and `switch` straddle the mode switch.
    pub switch: Option<usize>,
    pub switch_kind: Option<SwitchKind>,
    #[serde(skip)]
    pub switch_geometry: Option<SwitchGeometry>,
    pub transition: Option<Transition>,
    pub terminal: Terminal,
    /// Sparsity of the driving segment in the horizon.
    pub c_drive: f64,
}

impl HorizonSpec {
    pub fn direction(&self) -> Option<Direction> {
        self.transition.map(|t| t.direction)
    }

    pub fn labels(&self) -> Vec<String> {
        self.nodes
            .iter()
            .map(|n| match (n.mode, n.key) {
                (_, Some(KeyNode::Insertion)) => "I".to_string(),
                (m, _) => m.label(),
            })
            .collect()
    }
}

/// Traversal nodes in time order; the insertion node mirrors between the
/// directions.
pub fn traversal_order(dir: Direction, insertion: bool) -> Vec<KeyNode> {
    let mut v = vec![KeyNode::Q(1), KeyNode::Q(2), KeyNode::Q(3), KeyNode::Q(4)];
    if insertion {
        let at = match dir {
            Direction::Ascending => 3,
            Direction::Descending => 1,
        };
        v.insert(at, KeyNode::Insertion);
    }
    v
}

/// Mode of a key node; the insertion node belongs to the mode it interrupts.
pub fn mode_label(dir: Direction, key: KeyNode) -> u8 {
    match (key, dir) {
        (KeyNode::Q(i), _) => i,
        (KeyNode::Insertion, Direction::Ascending) => 3,
        (KeyNode::Insertion, Direction::Descending) => 1,
    }
}

/// Geometry of a traversing node frozen at `q`.
/// Violation above which a head is not yet at its labelled key node.
const HEAD_NODE_TOL: f64 = 1e-3;

pub fn node_context(params: &RobotParams, tr: &Transition, q: &[f64; 4]) -> Result<NodeContext, PlanError> {
    let delta = gear_offset_angle(params)?;
    let (af, ar) = match tr.direction {
        Direction::Ascending => (tr.alpha_rel, 0.0),
        Direction::Descending => (0.0, -tr.alpha_rel),
    };
    let g = effective_geometry(params, q[1] - delta, q[2] - delta, q[3], af, ar)?;
    Ok(NodeContext::new(params, &g, tr.alpha_rel, tr.h_rel))
}

/// Geometry of a driving node (flush, so pitch and inclinations vanish).
pub fn driving_context(params: &RobotParams, q: &[f64; 4]) -> Result<NodeContext, PlanError> {
    let delta = gear_offset_angle(params)?;
    let g = effective_geometry(params, q[1] - delta, q[2] - delta, 0.0, 0.0, 0.0)?;
    Ok(NodeContext::new(params, &g, 0.0, 0.0))
}

fn bisect(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if fa.signum() == fb.signum() {
        return if fa.abs() < fb.abs() { a } else { b };
    }
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if f(m).signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn range_mid(b: (f64, f64)) -> f64 {
    0.5 * (b.0 + b.1)
}

/// Ascending seed: node equalities solved for the free angles.
fn seed_ascending(key: KeyNode, c: &NodeContext, s_hint: Option<f64>) -> Result<[f64; 4], PlanError> {
    let bounds = crate::sequence::ascending_node_constraints(key, &[0.0; 4], c)?.bounds;
    let clampb = |v: f64, b: (f64, f64)| v.clamp(b.0, b.1);
    match key {
        KeyNode::Q(1) => {
            let reach = c.h / (0.75 * c.lf);
            let top = c.theta_u - 0.05;
            // lengths grow with the flipper angle, so a step out of reach at
            // the frozen lengths may still be reachable after a refresh
            let (s, thf) = if reach <= top.sin() {
                (0.25 * c.lf, reach.asin())
            } else {
                ((c.lf - c.h / top.sin()).max(0.05 * c.lf), top)
            };
            Ok([s, thf, 0.0, 0.0])
        }
        KeyNode::Q(2) => {
            let tht = clampb((c.h / (c.lt + c.lr)).clamp(-1.0, 1.0).asin(), bounds.theta_t);
            let thr = clampb(tht.min(0.0), bounds.theta_r);
            let thf = clampb(c.alpha - tht + 0.1, bounds.theta_f);
            Ok([c.lf, thf, thr, tht])
        }
        _ => {
            let s = clampb(s_hint.unwrap_or_else(|| range_mid(bounds.s)), bounds.s);
            let thr = 0.0;
            let lever = c.lt + c.lf - s;
            let lo = bounds.theta_t.0.max(thr);
            let hi = bounds.theta_t.1.max(lo);
            let tht = bisect(|t| lever * t.sin() + c.lr * (t - thr).sin() - c.h, lo, hi);
            let arg = (-(s - c.lf) * (tht - c.alpha).sin() / c.lf).clamp(-1.0, 1.0);
            let thf = clampb(arg.asin() - tht + c.alpha, bounds.theta_f);
            Ok([s, thf, clampb(thr, bounds.theta_r), tht])
        }
    }
}

/// Seed of a node in either direction; descents are seeded on the dual.
pub fn seed_node(dir: Direction, key: KeyNode, c: &NodeContext, s_hint: Option<f64>) -> Result<[f64; 4], PlanError> {
    match dir {
        Direction::Ascending => seed_ascending(key, c, s_hint),
        Direction::Descending => {
            let ls = c.l_sigma();
            let dual_key = match key {
                KeyNode::Q(i) => KeyNode::Q(5 - i),
                KeyNode::Insertion => KeyNode::Insertion,
            };
            let q = seed_ascending(dual_key, &c.mirrored(), s_hint.map(|s| ls - s))?;
            Ok([ls - q[0], q[2], q[1], -q[3]])
        }
    }
}

/// Seeds and frozen contexts for a list of traversal nodes. Each node's
/// geometry is refreshed from its own seed once.
fn traversal_seeds(
    params: &RobotParams,
    tr: &Transition,
    keys: &[KeyNode],
    start: Option<&[f64; 4]>,
    neutral: &[f64; 4],
) -> Result<Vec<([f64; 4], NodeContext)>, PlanError> {
    let mut out: Vec<([f64; 4], NodeContext)> = Vec::new();
    let mut prev_s = start.map(|q| q[0]);
    let mut prev_q: Option<[f64; 4]> = None;
    for &key in keys {
        let mut ctx = node_context(params, tr, neutral)?;
        let mut q = [0.0; 4];
        for _ in 0..2 {
            let bounds = node_constraints(tr.direction, key, &q, &ctx)?.bounds;
            let hint = prev_s.map(|p| {
                let mid = range_mid(bounds.s);
                if mid > p + 1e-3 {
                    mid
                } else {
                    (p + 0.5 * (bounds.s.1 - p)).min(bounds.s.1)
                }
            });
            q = seed_node(tr.direction, key, &ctx, hint)?;
            ctx = node_context(params, tr, &q)?;
        }
        // the seed's flipper angles can shrink the reach behind a head that
        // is already close to this node; freeze the head's geometry instead
        if let (Some(p), Some(prev)) = (prev_s, prev_q.or(start.copied())) {
            if node_constraints(tr.direction, key, &q, &ctx)?.bounds.s.1 < p {
                ctx = node_context(params, tr, &prev)?;
                let b = node_constraints(tr.direction, key, &q, &ctx)?.bounds;
                q = seed_node(tr.direction, key, &ctx, Some(p.clamp(b.s.0, b.s.1)))?;
            }
        }
        prev_q = Some(q);
        prev_s = Some(q[0]);
        out.push((q, ctx));
    }
    Ok(out)
}

fn driving_bounds(params: &RobotParams, relax: bool) -> Result<NodeBounds, PlanError> {
    let delta = gear_offset_angle(params)?;
    let lo = if relax { params.theta_l + delta } else { 0.0 };
    let flip = (lo, params.theta_u + delta);
    Ok(NodeBounds { s: (-10.0, 1e3), theta_f: flip, theta_r: flip, theta_t: (0.0, 0.0) })
}

fn driving_count(length: f64, cfg: &PlannerConfig) -> usize {
    let n = (length.max(0.0) / cfg.driving_spacing).ceil() as usize + 1;
    n.clamp(2, cfg.max_driving_nodes.max(2))
}

fn pinned_node(state: &PlannerState, ctx: Option<NodeContext>) -> HorizonNode {
    let b = NodeBounds {
        s: (state.q[0], state.q[0]),
        theta_f: (state.q[1], state.q[1]),
        theta_r: (state.q[2], state.q[2]),
        theta_t: if state.mode.is_driving() { (0.0, 0.0) } else { (state.q[3], state.q[3]) },
    };
    let mut q = state.q;
    if state.mode.is_driving() {
        q[3] = 0.0;
    }
    HorizonNode { mode: state.mode, key: None, pinned: true, seed_q: q, seed_qdot: state.qdot, ctx, bounds: b }
}

/// Node box, with the progress range of the flipper-reaching node cut to
/// where the flipper can still reach the step: the lever must stay above
/// `h / sin(theta_u)`, which also keeps the solver off the zero-lever saddle.
pub fn node_bounds(dir: Direction, key: KeyNode, q: &[f64; 4], ctx: &NodeContext) -> Result<NodeBounds, PlanError> {
    let mut b = node_constraints(dir, key, q, ctx)?.bounds;
    let reach = |lever: f64| ctx.h / ctx.theta_u.min(std::f64::consts::FRAC_PI_2).sin().max(1e-3) - lever;
    match (dir, key) {
        (Direction::Ascending, KeyNode::Q(1)) => b.s.1 = b.s.1.min(ctx.lf - reach(0.0)).max(b.s.0),
        (Direction::Descending, KeyNode::Q(4)) => b.s.0 = b.s.0.max(ctx.l_sigma() - ctx.lr + reach(0.0)).min(b.s.1),
        _ => {}
    }
    Ok(b)
}

fn trav_node(dir: Direction, key: KeyNode, q: [f64; 4], ctx: NodeContext, v: f64) -> Result<HorizonNode, PlanError> {
    let bounds = node_bounds(dir, key, &q, &ctx)?;
    Ok(HorizonNode {
        mode: Mode::Traversing { node: mode_label(dir, key), dir },
        key: Some(key),
        pinned: false,
        seed_q: q,
        seed_qdot: [v, 0.0, 0.0],
        ctx: Some(ctx),
        bounds,
    })
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Driving nodes from `first` to `last` (both included), linearly seeded.
fn driving_nodes(
    params: &RobotParams,
    n: usize,
    first: [f64; 4],
    last: [f64; 4],
    v: f64,
    relax_first: bool,
    relax_last: bool,
) -> Result<Vec<HorizonNode>, PlanError> {
    (0..n)
        .map(|k| {
            let t = if n > 1 { k as f64 / (n - 1) as f64 } else { 1.0 };
            let q = [lerp(first[0], last[0], t), lerp(first[1], last[1], t), lerp(first[2], last[2], t), 0.0];
            let relax = (k == 0 && relax_first) || (k + 1 == n && relax_last);
            Ok(HorizonNode {
                mode: Mode::Driving,
                key: None,
                pinned: false,
                seed_q: q,
                seed_qdot: [-v, 0.0, 0.0],
                ctx: None,
                bounds: driving_bounds(params, relax)?,
            })
        })
        .collect()
}

/// Switch coordinate implied by a traversing seed.
fn drive_coordinate(kind: SwitchKind, q: &[f64; 4], g: &SwitchGeometry) -> f64 {
    let mut q = *q;
    if kind == SwitchKind::DriveToTraverse(Direction::Descending) {
        q[3] += g.alpha;
    }
    let r = switching_config_residual(kind, 0.0, &q, g);
    -r.value / r.d_drive
}

pub fn build_horizon(
    state: &PlannerState,
    course: &Course,
    params: &RobotParams,
    cfg: &PlannerConfig,
) -> Result<HorizonSpec, PlanError> {
    let v_seed = 0.5 * params.v_u;
    match state.mode {
        Mode::Driving => {
            let seg = state.index;
            if seg >= course.segments.len() {
                return Err(PlanError::Config(format!("segment {seg} outside the course")));
            }
            let c_drive = course.segments[seg].sparsity;
            let n_d = driving_count(state.q[0], cfg);
            let mut head = pinned_node(state, None);
            head.bounds.theta_t = (0.0, 0.0);
            if course.is_last(seg) {
                let mut nodes = vec![head];
                let end = [0.0f64.min(state.q[0]), state.q[1], state.q[2], 0.0];
                let mut rest = driving_nodes(params, n_d, state.q, end, v_seed, false, false)?;
                rest.remove(0);
                if let Some(l) = rest.last_mut() {
                    l.seed_qdot = [0.0; 3];
                }
                nodes.extend(rest);
                return Ok(HorizonSpec {
                    n_d: nodes.len(),
                    nodes,
                    n_t: 0,
                    switch: None,
                    switch_kind: None,
                    switch_geometry: None,
                    transition: None,
                    terminal: Terminal::Driving { s_d: end[0], stop: true },
                    c_drive,
                });
            }
            let tr = course.transitions[seg];
            let keys = traversal_order(tr.direction, cfg.insertion);
            let seeds = traversal_seeds(params, &tr, &keys, None, &[0.0, state.q[1], state.q[2], 0.0])?;
            let kind = SwitchKind::DriveToTraverse(tr.direction);
            let (q1, c1) = seeds[0];
            let g = SwitchGeometry { lf: c1.lf, lt: c1.lt, length: course.lengths[seg], alpha: tr.alpha_rel };
            let s_sw = drive_coordinate(kind, &q1, &g).min(state.q[0]);
            let relax = tr.direction == Direction::Descending;
            let mut nodes = vec![head];
            let mut d = driving_nodes(params, n_d, state.q, [s_sw, q1[1], q1[2], 0.0], v_seed, false, relax)?;
            d.remove(0);
            nodes.extend(d);
            let switch = nodes.len();
            for (key, (q, ctx)) in keys.iter().zip(seeds) {
                nodes.push(trav_node(tr.direction, *key, q, ctx, v_seed)?);
            }
            Ok(HorizonSpec {
                nodes,
                n_d,
                n_t: keys.len(),
                switch: Some(switch),
                switch_kind: Some(kind),
                switch_geometry: Some(g),
                transition: Some(tr),
                terminal: Terminal::KeyNode,
                c_drive,
            })
        }
        Mode::Traversing { node, dir } => {
            let tr = *course
                .transitions
                .get(state.index)
                .ok_or_else(|| PlanError::Config(format!("transition {} outside the course", state.index)))?;
            if tr.direction != dir {
                return Err(PlanError::Config("state direction disagrees with the course".into()));
            }
            let keys = traversal_order(dir, cfg.insertion);
            let pos = keys.iter().position(|k| *k == KeyNode::Q(node)).ok_or(PlanError::Config(format!("node {node}")))?;
            let head_ctx = node_context(params, &tr, &state.q)?;
            // a descent head labelled with its last key node may still be
            // tilted: the flat-body configuration must be actuated, so keep the
            // node as a target (an ascent settles onto the next terrain)
            let last_unmet = dir == Direction::Descending
                && pos + 1 == keys.len()
                && node_constraints(dir, keys[pos], &state.q, &head_ctx)?.max_violation(&state.q) > HEAD_NODE_TOL;
            let remaining = if last_unmet { &keys[pos..] } else { &keys[pos + 1..] };
            let mut head = pinned_node(state, Some(head_ctx));
            head.key = Some(KeyNode::Q(node));
            let seeds = traversal_seeds(params, &tr, remaining, Some(&state.q), &state.q)?;
            let mut nodes = vec![head];
            for (key, (q, ctx)) in remaining.iter().zip(&seeds) {
                nodes.push(trav_node(dir, *key, *q, *ctx, v_seed)?);
            }
            let n_t = nodes.len();
            let seg = tr.index + 1;
            let last = *nodes.last().unwrap();
            let lc = last.ctx.unwrap();
            let kind = SwitchKind::TraverseToDrive(dir);
            let g = SwitchGeometry { lf: lc.lf, lt: lc.lt, length: course.lengths[seg], alpha: tr.alpha_rel };
            let s_first = drive_coordinate(kind, &last.seed_q, &g);
            let n_d = driving_count(course.lengths[seg], cfg);
            let c_drive = course.segments[seg].sparsity;
            let (s_end, stop) = if course.is_last(seg) {
                (0.0f64.min(s_first), true)
            } else {
                let next = course.transitions[seg];
                let neutral = [0.0, last.seed_q[1], last.seed_q[2], 0.0];
                let nk = traversal_order(next.direction, cfg.insertion);
                let (nq, nc) = traversal_seeds(params, &next, &nk[..1], None, &neutral)?[0];
                let nkind = SwitchKind::DriveToTraverse(next.direction);
                let ng = SwitchGeometry { lf: nc.lf, lt: nc.lt, length: course.lengths[seg], alpha: next.alpha_rel };
                (drive_coordinate(nkind, &nq, &ng).min(course.lengths[seg]).min(s_first), false)
            };
            let relax = dir == Direction::Ascending;
            let from = [s_first, last.seed_q[1], last.seed_q[2], 0.0];
            let to = [s_end, last.seed_q[1].max(0.0), last.seed_q[2].max(0.0), 0.0];
            let mut d = driving_nodes(params, n_d, from, to, v_seed, relax, false)?;
            if stop {
                d.last_mut().unwrap().seed_qdot = [0.0; 3];
            }
            let switch = nodes.len();
            nodes.extend(d);
            Ok(HorizonSpec {
                nodes,
                n_d,
                n_t,
                switch: Some(switch),
                switch_kind: Some(kind),
                switch_geometry: Some(g),
                transition: Some(tr),
                terminal: Terminal::Driving { s_d: s_end, stop },
                c_drive,
            })
        }
    }
}
