//! Hybrid modes, the key nodes of a terrain transition and their constraints.
//!
//! Node states are `[s_t, theta_f, theta_r, theta_t]` with model flipper
//! angles (physical angle plus the gear offset). Ascents are described in the
//! frame of the lower (current) terrain; descents are evaluated on the dual
//! configuration, which turns them into ascents of the mirrored robot.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;
use thiserror::Error;

use crate::geom::Vec2;
use crate::robot::{com_coordinate, gear_offset_angle, EffectiveGeometry, RobotParams};
use crate::terrain::TerrainSegment;

/// Shrink of strict range bounds.
pub const RANGE_EPS: f64 = 1e-6;
/// Half-width of the pitch window around the relative inclination.
pub const PITCH_WINDOW: f64 = FRAC_PI_4;
/// Substitute height for a zero-height rising transition.
pub const H_DELTA: f64 = 0.01;
/// Steps smaller than this count as zero height.
pub const H_ZERO_TOL: f64 = 0.02;
pub const ALPHA_ZERO_TOL: f64 = 1.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SequenceError {
    #[error("key node index {0} outside 1..=4")]
    Index(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Ascending,
    Descending,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Driving,
    Traversing { node: u8, dir: Direction },
}

impl Mode {
    pub fn is_driving(&self) -> bool {
        matches!(self, Mode::Driving)
    }

    pub fn label(&self) -> String {
        match self {
            Mode::Driving => "D".into(),
            Mode::Traversing { node, dir: Direction::Ascending } => format!("Q{node}a"),
            Mode::Traversing { node, dir: Direction::Descending } => format!("Q{node}d"),
        }
    }

    /// Inverse of [`Mode::label`].
    pub fn from_label(label: &str) -> Option<Self> {
        if label == "D" {
            return Some(Mode::Driving);
        }
        let rest = label.strip_prefix('Q')?;
        let (num, dir) = rest.split_at(rest.len().checked_sub(1)?);
        let dir = match dir {
            "a" => Direction::Ascending,
            "d" => Direction::Descending,
            _ => return None,
        };
        let node: u8 = num.parse().ok()?;
        (1..=4).contains(&node).then_some(Mode::Traversing { node, dir })
    }
}

/// Nodes of one transition in time order. The insertion node shares its
/// constraints with the contact-changing nodes around it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KeyNode {
    Q(u8),
    Insertion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraversalClass {
    Ascending { h: f64 },
    Descending,
    DrivingOnly,
}

pub fn classify_traversal(h_step: f64, alpha_rel: f64, h_delta: f64) -> TraversalClass {
    if h_step > H_ZERO_TOL {
        TraversalClass::Ascending { h: h_step }
    } else if h_step < -H_ZERO_TOL {
        TraversalClass::Descending
    } else if alpha_rel < -ALPHA_ZERO_TOL {
        TraversalClass::Descending
    } else if alpha_rel > ALPHA_ZERO_TOL {
        TraversalClass::Ascending { h: h_delta }
    } else {
        TraversalClass::DrivingOnly
    }
}

/// Value and gradient over `[s, theta_f, theta_r, theta_t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub value: f64,
    pub grad: [f64; 4],
}

impl Residual {
    fn new(value: f64, grad: [f64; 4]) -> Self {
        Self { value, grad }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeBounds {
    pub s: (f64, f64),
    pub theta_f: (f64, f64),
    pub theta_r: (f64, f64),
    pub theta_t: (f64, f64),
}

impl NodeBounds {
    pub fn as_array(&self) -> [(f64, f64); 4] {
        [self.s, self.theta_f, self.theta_r, self.theta_t]
    }
}

/// Equalities `= 0`, inequalities `<= 0` and box bounds of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeConstraintSet {
    pub equalities: Vec<Residual>,
    pub inequalities: Vec<Residual>,
    pub bounds: NodeBounds,
}

impl NodeConstraintSet {
    pub fn max_violation(&self, q: &[f64; 4]) -> f64 {
        let mut v: f64 = 0.0;
        for r in &self.equalities {
            v = v.max(r.value.abs());
        }
        for r in &self.inequalities {
            v = v.max(r.value);
        }
        for (x, (lo, hi)) in q.iter().zip(self.bounds.as_array()) {
            v = v.max(lo - x).max(x - hi);
        }
        v
    }
}

/// Model lengths and terrain parameters a transition is evaluated with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeContext {
    pub lf: f64,
    pub lt: f64,
    pub lr: f64,
    pub s_com: f64,
    /// Relative inclination of the next terrain.
    pub alpha: f64,
    /// Relative height of the support.
    pub h: f64,
    /// Joint limits as model angles.
    pub theta_l: f64,
    pub theta_u: f64,
}

impl NodeContext {
    pub fn new(params: &RobotParams, geom: &EffectiveGeometry, alpha_rel: f64, h_rel: f64) -> Self {
        Self {
            lf: geom.lf_eff,
            lt: geom.lt_eff,
            lr: geom.lr_eff,
            s_com: com_coordinate(params, geom),
            alpha: alpha_rel,
            h: h_rel,
            theta_l: params.theta_l + geom.delta,
            theta_u: params.theta_u + geom.delta,
        }
    }

    pub fn l_sigma(&self) -> f64 {
        self.lf + self.lt + self.lr
    }

    /// Front/rear swapped; the terrain parameters are left as given since a
    /// descent context already carries the dual height and inclination.
    pub fn mirrored(&self) -> Self {
        Self { lf: self.lr, lr: self.lf, s_com: self.l_sigma() - self.s_com, ..*self }
    }
}

fn table_row(node: KeyNode) -> Result<u8, SequenceError> {
    match node {
        KeyNode::Q(i @ 1..=4) => Ok(i),
        KeyNode::Q(i) => Err(SequenceError::Index(i)),
        KeyNode::Insertion => Ok(0),
    }
}

/// Contact equalities shared by the nodes where the support lies on the
/// track: front tip on the next terrain, rear tip on the current one.
fn track_contact_equalities(q: &[f64; 4], c: &NodeContext) -> [Residual; 2] {
    let [s, thf, thr, tht] = *q;
    let (a, b) = (tht - c.alpha, tht + thf - c.alpha);
    let front = Residual::new(
        (s - c.lf) * a.sin() + c.lf * b.sin(),
        [a.sin(), c.lf * b.cos(), 0.0, (s - c.lf) * a.cos() + c.lf * b.cos()],
    );
    let lever = c.lt + c.lf - s;
    let d = tht - thr;
    let rear = Residual::new(
        lever * tht.sin() + c.lr * d.sin() - c.h,
        [-tht.sin(), 0.0, -c.lr * d.cos(), lever * tht.cos() + c.lr * d.cos()],
    );
    [front, rear]
}

/// Rear flipper not below the track line: `theta_r - theta_t <= 0`.
fn rear_below_track() -> [f64; 4] {
    [0.0, 0.0, 1.0, -1.0]
}

pub fn ascending_node_constraints(
    node: KeyNode,
    q: &[f64; 4],
    c: &NodeContext,
) -> Result<NodeConstraintSet, SequenceError> {
    let row = table_row(node)?;
    let [s, thf, thr, tht] = *q;
    let flip = (c.theta_l, c.theta_u);
    let window = (c.alpha - PITCH_WINDOW, c.alpha + PITCH_WINDOW);
    let on_track = (c.alpha, c.alpha + PITCH_WINDOW);
    let eps = RANGE_EPS;
    let set = match row {
        1 => NodeConstraintSet {
            equalities: vec![Residual::new(
                (c.lf - s) * thf.sin() - c.h,
                [-thf.sin(), (c.lf - s) * thf.cos(), 0.0, 0.0],
            )],
            inequalities: vec![],
            bounds: NodeBounds {
                s: (eps, c.lf - eps),
                theta_f: flip,
                theta_r: (0.0, c.theta_u),
                theta_t: (0.0, 0.0),
            },
        },
        2 => {
            let d = tht - thr;
            NodeConstraintSet {
                equalities: vec![Residual::new(
                    c.lt * tht.sin() + c.lr * d.sin() - c.h,
                    [0.0, 0.0, -c.lr * d.cos(), c.lt * tht.cos() + c.lr * d.cos()],
                )],
                inequalities: vec![
                    Residual::new(thr - tht, rear_below_track()),
                    // front flipper not below the next terrain
                    Residual::new(c.alpha - tht - thf, [0.0, -1.0, 0.0, -1.0]),
                ],
                bounds: NodeBounds { s: (c.lf, c.lf), theta_f: flip, theta_r: flip, theta_t: window },
            }
        }
        _ => {
            let s_range = match row {
                3 => (c.lf + eps, c.s_com - eps),
                4 => (c.s_com, c.lf + c.lt - eps),
                _ => (c.lf + eps, c.lf + c.lt - eps),
            };
            NodeConstraintSet {
                equalities: track_contact_equalities(q, c).to_vec(),
                inequalities: vec![Residual::new(thr - tht, rear_below_track())],
                bounds: NodeBounds { s: s_range, theta_f: flip, theta_r: flip, theta_t: on_track },
            }
        }
    };
    Ok(set)
}

/// Dual point `(l_sigma - s, theta_r, theta_f, -theta_t)`.
pub fn dual_point(q: &[f64; 4], l_sigma: f64) -> [f64; 4] {
    [l_sigma - q[0], q[2], q[1], -q[3]]
}

fn undual_residual(r: Residual) -> Residual {
    let g = r.grad;
    Residual::new(r.value, [-g[0], g[2], g[1], -g[3]])
}

/// Descending node `i` is ascending node `5 - i` of the dual configuration.
/// `c` holds the real robot's lengths with the descent's dual height (edge
/// above the lower terrain) and relative inclination.
pub fn descending_node_constraints(
    node: KeyNode,
    q: &[f64; 4],
    c: &NodeContext,
) -> Result<NodeConstraintSet, SequenceError> {
    let dual_node = match node {
        KeyNode::Q(i @ 1..=4) => KeyNode::Q(5 - i),
        KeyNode::Q(i) => return Err(SequenceError::Index(i)),
        KeyNode::Insertion => KeyNode::Insertion,
    };
    let dc = c.mirrored();
    let ls = c.l_sigma();
    let a = ascending_node_constraints(dual_node, &dual_point(q, ls), &dc)?;
    let b = a.bounds;
    Ok(NodeConstraintSet {
        equalities: a.equalities.into_iter().map(undual_residual).collect(),
        inequalities: a.inequalities.into_iter().map(undual_residual).collect(),
        bounds: NodeBounds {
            s: (ls - b.s.1, ls - b.s.0),
            theta_f: b.theta_r,
            theta_r: b.theta_f,
            theta_t: (-b.theta_t.1, -b.theta_t.0),
        },
    })
}

pub fn node_constraints(
    dir: Direction,
    node: KeyNode,
    q: &[f64; 4],
    c: &NodeContext,
) -> Result<NodeConstraintSet, SequenceError> {
    match dir {
        Direction::Ascending => ascending_node_constraints(node, q, c),
        Direction::Descending => descending_node_constraints(node, q, c),
    }
}

/// Driving keeps both flippers between the track line and the joint limit.
/// `q` is `[s_d, theta_f, theta_r]` with model angles.
pub fn driving_constraints(q: &[f64; 3], params: &RobotParams) -> NodeConstraintSet {
    let _ = q;
    let upper = params.theta_u + gear_offset_angle(params).unwrap_or(0.0);
    NodeConstraintSet {
        equalities: vec![],
        inequalities: vec![],
        bounds: NodeBounds {
            s: (f64::NEG_INFINITY, f64::INFINITY),
            theta_f: (0.0, upper),
            theta_r: (0.0, upper),
            theta_t: (0.0, 0.0),
        },
    }
}

/// Node label reached at progress `s_t` under the range rows, with the
/// pinned row widened to a band of `band` metres.
pub fn node_for_progress(dir: Direction, s_t: f64, c: &NodeContext, band: f64) -> u8 {
    match dir {
        Direction::Ascending => {
            if s_t < c.lf - band {
                1
            } else if s_t <= c.lf + band {
                2
            } else if s_t < c.s_com {
                3
            } else {
                4
            }
        }
        Direction::Descending => {
            let pin = c.lf + c.lt;
            if s_t <= c.s_com {
                1
            } else if s_t < pin - band {
                2
            } else if s_t <= pin + band {
                3
            } else {
                4
            }
        }
    }
}

/// One non-trivial change of terrain along the route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// Between segment `index` and `index + 1`.
    pub index: usize,
    pub direction: Direction,
    /// Terrain vertex the robot pivots over: the next segment's start when
    /// ascending, the current segment's end when descending.
    pub support: Vec2,
    /// Next inclination minus current inclination.
    pub alpha_rel: f64,
    /// Ascending: height of the support above the current line. Descending:
    /// height of the edge above the next line. Never below `H_DELTA`.
    pub h_rel: f64,
    /// Inclination pitch is measured against during the traversal.
    pub alpha_ref: f64,
    pub sparsity_cur: f64,
    pub sparsity_next: f64,
}

/// Merges segments joined by zero transitions and lists the remaining ones.
pub fn plan_transitions(segments: &[TerrainSegment]) -> (Vec<TerrainSegment>, Vec<Transition>) {
    let mut merged: Vec<TerrainSegment> = segments.to_vec();
    // merging changes inclinations, so repeat until every joint is a real transition
    loop {
        let mut out: Vec<TerrainSegment> = Vec::with_capacity(merged.len());
        for s in &merged {
            if let Some(last) = out.last_mut() {
                let class = classify_traversal(s.p_start.h - last.p_end.h, s.alpha - last.alpha, H_DELTA);
                if class == TraversalClass::DrivingOnly {
                    let sp = last.sparsity.max(s.sparsity);
                    *last = TerrainSegment::between(last.p_start, s.p_end);
                    last.sparsity = sp;
                    continue;
                }
            }
            out.push(*s);
        }
        let done = out.len() == merged.len();
        merged = out;
        if done {
            break;
        }
    }
    crate::terrain::link_steps(&mut merged);
    let mut out = Vec::new();
    for k in 0..merged.len().saturating_sub(1) {
        let (cur, next) = (&merged[k], &merged[k + 1]);
        let alpha_rel = next.alpha - cur.alpha;
        let t = match classify_traversal(cur.h_step, alpha_rel, H_DELTA) {
            TraversalClass::Ascending { .. } => Transition {
                index: k,
                direction: Direction::Ascending,
                support: next.start(),
                alpha_rel,
                h_rel: cur.line().signed_distance(next.start()).max(H_DELTA),
                alpha_ref: cur.alpha,
                sparsity_cur: cur.sparsity,
                sparsity_next: next.sparsity,
            },
            TraversalClass::Descending => Transition {
                index: k,
                direction: Direction::Descending,
                support: cur.end(),
                alpha_rel,
                h_rel: next.line().signed_distance(cur.end()).max(H_DELTA),
                alpha_ref: next.alpha,
                sparsity_cur: cur.sparsity,
                sparsity_next: next.sparsity,
            },
            TraversalClass::DrivingOnly => unreachable!("merged above"),
        };
        out.push(t);
    }
    (merged, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_labels_round_trip() {
        let mut all = vec![Mode::Driving];
        for dir in [Direction::Ascending, Direction::Descending] {
            all.extend((1..=4).map(|node| Mode::Traversing { node, dir }));
        }
        for m in all {
            assert_eq!(Mode::from_label(&m.label()), Some(m));
        }
        for bad in ["", "Q", "Q5a", "Q1x", "Q0d", "d"] {
            assert_eq!(Mode::from_label(bad), None);
        }
    }
    use crate::robot::{effective_geometry, RobotParams};

    fn ctx(h: f64, alpha: f64) -> NodeContext {
        let p = RobotParams::default();
        let g = effective_geometry(&p, 0.3, 0.3, 0.0, 0.0, 0.0).unwrap();
        NodeContext::new(&p, &g, alpha, h)
    }

    fn fd_check(set_at: impl Fn(&[f64; 4]) -> NodeConstraintSet, q: [f64; 4]) {
        let base = set_at(&q);
        let h = 1e-6;
        for k in 0..4 {
            let (mut a, mut b) = (q, q);
            a[k] += h;
            b[k] -= h;
            let (sa, sb) = (set_at(&a), set_at(&b));
            let rows = base.equalities.iter().zip(sa.equalities.iter().zip(&sb.equalities));
            let rows2 = base.inequalities.iter().zip(sa.inequalities.iter().zip(&sb.inequalities));
            for (r, (ra, rb)) in rows.chain(rows2) {
                let fd = (ra.value - rb.value) / (2.0 * h);
                assert!((fd - r.grad[k]).abs() < 1e-7, "k={k} fd={fd} an={}", r.grad[k]);
            }
        }
    }

    #[test]
    fn q1_example() {
        let c = NodeContext { lf: 0.4, h: 0.15, ..ctx(0.15, 0.0) };
        let set = ascending_node_constraints(KeyNode::Q(1), &[0.1, 30f64.to_radians(), 0.0, 0.0], &c).unwrap();
        assert!(set.equalities[0].value.abs() < 1e-12);
    }

    #[test]
    fn q2_flat_identity() {
        let c = ctx(0.0, 0.0);
        let set = ascending_node_constraints(KeyNode::Q(2), &[c.lf, 0.2, 0.0, 0.0], &c).unwrap();
        assert_eq!(set.equalities[0].value, 0.0);
        assert_eq!(set.bounds.s, (c.lf, c.lf));
    }

    #[test]
    fn bad_index() {
        let c = ctx(0.1, 0.0);
        assert_eq!(ascending_node_constraints(KeyNode::Q(5), &[0.0; 4], &c), Err(SequenceError::Index(5)));
        assert_eq!(descending_node_constraints(KeyNode::Q(0), &[0.0; 4], &c), Err(SequenceError::Index(0)));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let c = ctx(0.3, 0.1);
        for node in [KeyNode::Q(1), KeyNode::Q(2), KeyNode::Q(3), KeyNode::Insertion, KeyNode::Q(4)] {
            let q = [0.6, 0.4, -0.2, 0.3];
            fd_check(|q| ascending_node_constraints(node, q, &c).unwrap(), q);
            fd_check(|q| descending_node_constraints(node, q, &c).unwrap(), q);
        }
    }

    #[test]
    fn descent_is_ascent_at_dual_point() {
        let c = ctx(0.25, -0.1);
        let q = [0.9, 0.2, 0.5, -0.2];
        for i in 1..=4u8 {
            let d = descending_node_constraints(KeyNode::Q(i), &q, &c).unwrap();
            let a = ascending_node_constraints(KeyNode::Q(5 - i), &dual_point(&q, c.l_sigma()), &c.mirrored()).unwrap();
            for (x, y) in d.equalities.iter().zip(&a.equalities) {
                assert_eq!(x.value, y.value);
            }
        }
    }

    #[test]
    fn descending_q4_on_flat_step_is_q1_form() {
        let c = ctx(0.2, 0.0);
        let set = descending_node_constraints(KeyNode::Q(4), &[c.l_sigma() - 0.1, 0.0, 0.6, 0.0], &c).unwrap();
        // dual: (lf* - s*) sin(theta_f*) - h with lf* = lr, s* = 0.1, theta_f* = theta_r
        let expect = (c.lr - 0.1) * 0.6f64.sin() - 0.2;
        assert!((set.equalities[0].value - expect).abs() < 1e-12);
        assert_eq!(set.bounds.theta_t, (-0.0, -0.0));
    }

    #[test]
    fn classification() {
        assert_eq!(classify_traversal(0.4, 0.0, H_DELTA), TraversalClass::Ascending { h: 0.4 });
        assert_eq!(classify_traversal(0.0, -10f64.to_radians(), H_DELTA), TraversalClass::Descending);
        assert_eq!(classify_traversal(0.0, 10f64.to_radians(), H_DELTA), TraversalClass::Ascending { h: H_DELTA });
        assert_eq!(classify_traversal(0.0, 0.0, H_DELTA), TraversalClass::DrivingOnly);
        assert_eq!(classify_traversal(-0.3, 0.2, H_DELTA), TraversalClass::Descending);
    }

    #[test]
    fn driving_bounds() {
        let p = RobotParams::default();
        let up = p.theta_u + gear_offset_angle(&p).unwrap();
        let v = |q: [f64; 3]| driving_constraints(&q, &p).max_violation(&[q[0], q[1], q[2], 0.0]);
        assert_eq!(v([0.3, 0.0, 0.0]), 0.0);
        assert!((v([0.3, up + 0.01, 0.0]) - 0.01).abs() < 1e-12);
        assert!((v([0.3, 0.0, -0.05]) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn node_labels_follow_ranges() {
        let c = ctx(0.3, 0.0);
        let a: Vec<u8> = [0.1, c.lf, c.lf + 0.05, c.s_com + 0.01]
            .iter()
            .map(|&s| node_for_progress(Direction::Ascending, s, &c, 0.01))
            .collect();
        assert_eq!(a, vec![1, 2, 3, 4]);
        let d: Vec<u8> = [c.lf + 0.1, c.s_com + 0.05, c.lf + c.lt, c.lf + c.lt + 0.1]
            .iter()
            .map(|&s| node_for_progress(Direction::Descending, s, &c, 0.01))
            .collect();
        assert_eq!(d, vec![1, 2, 3, 4]);
    }

    #[test]
    fn platform_transitions() {
        let pts = crate::terrain::shapes::platform(1.5, 0.4, 1.2, 1.5, 0.02);
        let segs = crate::terrain::simplify(&pts, &Default::default()).unwrap();
        let (merged, tr) = plan_transitions(&segs);
        assert_eq!(merged.len(), 3);
        assert_eq!(tr[0].direction, Direction::Ascending);
        assert_eq!(tr[1].direction, Direction::Descending);
        assert!((tr[0].h_rel - 0.4).abs() < 0.04 && (tr[1].h_rel - 0.4).abs() < 0.04);
    }
}
