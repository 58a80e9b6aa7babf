//! Re-evaluates a finished plan from its nodes alone, independent of the
//! variable layout used by the transcription.

use serde::Serialize;

use super::horizon::{HorizonSpec, Terminal};
use super::switching::{switching_config_residual, switching_motion_residual, SwitchKind};
use super::TrajNode;
use crate::robot::RobotParams;
use crate::sequence::{node_constraints, Direction};

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct VerifyReport {
    pub max_eq: f64,
    pub max_ineq: f64,
    /// Name of the worst constraint.
    pub worst: String,
}

impl VerifyReport {
    fn add_eq(&mut self, what: impl FnOnce() -> String, v: f64) {
        let v = v.abs();
        if v > self.max_eq {
            self.max_eq = v;
            if v >= self.max_ineq {
                self.worst = what();
            }
        }
    }

    fn add_ineq(&mut self, what: impl FnOnce() -> String, v: f64) {
        if v > self.max_ineq {
            self.max_ineq = v;
            if v >= self.max_eq {
                self.worst = what();
            }
        }
    }

    fn range(&mut self, what: &str, k: usize, v: f64, b: (f64, f64)) {
        self.add_ineq(|| format!("{what} range at node {k}"), (b.0 - v).max(v - b.1));
    }
}

pub fn verify_plan(h: &HorizonSpec, nodes: &[TrajNode], durations: &[f64], params: &RobotParams) -> VerifyReport {
    let mut r = VerifyReport::default();
    if nodes.len() != h.nodes.len() || durations.len() + 1 != nodes.len().max(1) {
        r.max_eq = f64::INFINITY;
        r.worst = "shape".into();
        return r;
    }
    for (k, (n, spec)) in nodes.iter().zip(&h.nodes).enumerate() {
        let b = spec.bounds;
        r.range("s", k, n.q[0], b.s);
        r.range("theta_f", k, n.q[1], b.theta_f);
        r.range("theta_r", k, n.q[2], b.theta_r);
        if !n.mode.is_driving() {
            r.range("theta_t", k, n.q[3], b.theta_t);
        }
        let v = if spec.pinned {
            (spec.seed_qdot[0], spec.seed_qdot[0])
        } else if n.mode.is_driving() {
            (-params.v_u, 0.0)
        } else {
            (0.0, params.v_u)
        };
        r.range("rate", k, n.qdot[0], v);
        if !spec.pinned {
            r.range("omega_f", k, n.qdot[1], (params.omega_l, params.omega_u));
            r.range("omega_r", k, n.qdot[2], (params.omega_l, params.omega_u));
        }
        if let (Some(key), Some(ctx), Some(dir), false) = (spec.key, spec.ctx, h.direction(), spec.pinned) {
            match node_constraints(dir, key, &n.q, &ctx) {
                Ok(set) => {
                    for (i, e) in set.equalities.iter().enumerate() {
                        r.add_eq(|| format!("node {k} equality {i}"), e.value);
                    }
                    for (i, e) in set.inequalities.iter().enumerate() {
                        r.add_ineq(|| format!("node {k} inequality {i}"), e.value);
                    }
                }
                Err(_) => r.add_eq(|| format!("node {k} key"), f64::INFINITY),
            }
        }
    }
    if let (Some(sw), Some(kind), Some(g)) = (h.switch, h.switch_kind, h.switch_geometry) {
        let (a, b) = (&nodes[sw - 1], &nodes[sw]);
        r.add_eq(|| "flippers across the switch".into(), (a.q[1] - b.q[1]).abs().max((a.q[2] - b.q[2]).abs()));
        if durations[sw - 1] != 0.0 {
            r.add_eq(|| "switch duration".into(), durations[sw - 1]);
        }
        let (d, t) = match kind {
            SwitchKind::DriveToTraverse(_) => (a, b),
            SwitchKind::TraverseToDrive(_) => (b, a),
        };
        let mut q = t.q;
        if kind == SwitchKind::DriveToTraverse(Direction::Descending) {
            q[3] += g.alpha;
        }
        r.add_eq(|| "switch configuration".into(), switching_config_residual(kind, d.q[0], &q, &g).value);
        r.add_ineq(|| "switch motion".into(), switching_motion_residual(kind, d.qdot[0], t.qdot[0], &q, &g).value);
    }
    for (k, &dt) in durations.iter().enumerate() {
        if h.switch == Some(k + 1) {
            continue;
        }
        let (a, b) = (&nodes[k], &nodes[k + 1]);
        let forward = if a.mode.is_driving() { a.q[0] - b.q[0] } else { b.q[0] - a.q[0] };
        r.add_ineq(|| format!("progress order {k}"), -forward);
        r.add_ineq(|| format!("progress rate {k}"), forward - params.v_u * dt);
        for i in 1..3 {
            let dq = b.q[i] - a.q[i];
            r.add_ineq(|| format!("flipper {i} rate {k}"), (dq - params.omega_u * dt).max(params.omega_l * dt - dq));
        }
    }
    if let (Terminal::Driving { s_d, stop }, Some(last)) = (h.terminal, nodes.last()) {
        r.add_eq(|| "terminal position".into(), last.q[0] - s_d);
        if stop {
            r.add_eq(|| "terminal stop".into(), last.qdot[0]);
        }
    }
    r
}
