use super::costs::{smoothness_pair, stability_term, traversal_stability, CostWeights};
use super::hermite::TrajNode;
use super::horizon::{HorizonSpec, Terminal};
use super::switching::{switching_config_residual, switching_motion_residual, SwitchKind};
use super::{PlanError, PlannerConfig};
use crate::nlp::{Evaluator, NlpProblem, Triplets};
use crate::robot::RobotParams;
use crate::sequence::{node_constraints, Direction, NodeConstraintSet};

/// Variable indices of one node. The node after a switch shares the flipper
/// angles and rates of the node before it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeVars {
    pub s: usize,
    pub thf: usize,
    pub thr: usize,
    pub tht: Option<usize>,
    pub v: usize,
    pub wf: usize,
    pub wr: usize,
}

impl NodeVars {
    fn state(&self) -> [Option<usize>; 4] {
        [Some(self.s), Some(self.thf), Some(self.thr), self.tht]
    }
}

/// Transcribed hybrid trajectory optimisation problem.
#[derive(Debug, Clone)]
pub struct HtoProblem {
    pub horizon: HorizonSpec,
    pub vars: Vec<NodeVars>,
    /// Duration variable per node pair; `None` across the switch.
    pub durations: Vec<Option<usize>>,
    pub n: usize,
    weights: CostWeights,
    v_u: f64,
    omega_l: f64,
    omega_u: f64,
    n_eq: usize,
    n_ineq: usize,
}

/// Six rows per timed pair: progress order, progress rate, two per flipper.
const PAIR_ROWS: usize = 6;

impl HtoProblem {
    pub fn new(horizon: &HorizonSpec, params: &RobotParams, weights: &CostWeights) -> Result<Self, PlanError> {
        let mut vars: Vec<NodeVars> = Vec::with_capacity(horizon.nodes.len());
        let mut n = 0;
        let mut next = || {
            n += 1;
            n - 1
        };
        for (k, node) in horizon.nodes.iter().enumerate() {
            let tht = (!node.mode.is_driving()).then(|| 0);
            let v = if horizon.switch == Some(k) {
                let p = vars[k - 1];
                NodeVars { s: next(), thf: p.thf, thr: p.thr, tht: tht.map(|_| next()), v: next(), wf: p.wf, wr: p.wr }
            } else {
                NodeVars {
                    s: next(),
                    thf: next(),
                    thr: next(),
                    tht: tht.map(|_| next()),
                    v: next(),
                    wf: next(),
                    wr: next(),
                }
            };
            vars.push(v);
        }
        let durations =
            (0..horizon.nodes.len().saturating_sub(1)).map(|k| (horizon.switch != Some(k + 1)).then(|| next())).collect();
        let mut p = Self {
            horizon: horizon.clone(),
            vars,
            durations,
            n,
            weights: *weights,
            v_u: params.v_u,
            omega_l: params.omega_l,
            omega_u: params.omega_u,
            n_eq: 0,
            n_ineq: 0,
        };
        let x = p.seed();
        let (mut e, mut i) = (0, 0);
        for k in 0..p.horizon.nodes.len() {
            if let Some(set) = p.node_set(&x, k)? {
                e += set.equalities.len();
                i += set.inequalities.len();
            }
        }
        if p.horizon.switch.is_some() {
            e += 1;
            i += 1;
        }
        i += PAIR_ROWS * p.durations.iter().flatten().count();
        p.n_eq = e;
        p.n_ineq = i;
        Ok(p)
    }

    fn node_q(&self, x: &[f64], k: usize) -> [f64; 4] {
        let v = &self.vars[k];
        [x[v.s], x[v.thf], x[v.thr], v.tht.map_or(0.0, |i| x[i])]
    }

    pub fn node_state(&self, x: &[f64], k: usize) -> ([f64; 4], [f64; 3]) {
        let v = &self.vars[k];
        (self.node_q(x, k), [x[v.v], x[v.wf], x[v.wr]])
    }

    fn node_set(&self, x: &[f64], k: usize) -> Result<Option<NodeConstraintSet>, PlanError> {
        let node = &self.horizon.nodes[k];
        match (node.pinned, node.key, node.ctx, self.horizon.direction()) {
            (false, Some(key), Some(ctx), Some(dir)) if !node.mode.is_driving() => {
                Ok(Some(node_constraints(dir, key, &self.node_q(x, k), &ctx)?))
            }
            _ => Ok(None),
        }
    }

    pub fn seed(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (k, node) in self.horizon.nodes.iter().enumerate() {
            let v = &self.vars[k];
            for (slot, val) in v.state().iter().zip(node.seed_q) {
                if let Some(i) = slot {
                    x[*i] = val;
                }
            }
            x[v.v] = node.seed_qdot[0];
            if self.horizon.switch != Some(k) {
                x[v.wf] = node.seed_qdot[1];
                x[v.wr] = node.seed_qdot[2];
            }
        }
        let t_min = 0.05;
        for (k, d) in self.durations.iter().enumerate() {
            if let Some(i) = d {
                let (a, b) = (&self.horizon.nodes[k].seed_q, &self.horizon.nodes[k + 1].seed_q);
                let t = ((b[0] - a[0]).abs() / (0.5 * self.v_u))
                    .max((b[1] - a[1]).abs() / (0.5 * self.omega_u))
                    .max((b[2] - a[2]).abs() / (0.5 * self.omega_u))
                    .max(t_min);
                x[*i] = t;
            }
        }
        x
    }

    pub fn bounds(&self, cfg: &PlannerConfig) -> Result<(Vec<f64>, Vec<f64>), PlanError> {
        let mut lo = vec![f64::NEG_INFINITY; self.n];
        let mut hi = vec![f64::INFINITY; self.n];
        let mut pinned = vec![false; self.n];
        let mut tighten = |i: usize, b: (f64, f64), pin: bool, lo: &mut Vec<f64>, hi: &mut Vec<f64>| {
            if pin {
                lo[i] = b.0;
                hi[i] = b.1;
                pinned[i] = true;
            } else if !pinned[i] {
                lo[i] = lo[i].max(b.0);
                hi[i] = hi[i].min(b.1);
            }
        };
        for (k, node) in self.horizon.nodes.iter().enumerate() {
            let v = self.vars[k];
            let b = node.bounds;
            let state = [b.s, b.theta_f, b.theta_r, b.theta_t];
            for (slot, bb) in v.state().iter().zip(state) {
                if let Some(i) = slot {
                    tighten(*i, bb, node.pinned, &mut lo, &mut hi);
                }
            }
            let rates = if node.pinned {
                let r = node.seed_qdot;
                [(r[0], r[0]), (r[1], r[1]), (r[2], r[2])]
            } else {
                let vb = if node.mode.is_driving() { (-self.v_u, 0.0) } else { (0.0, self.v_u) };
                [vb, (self.omega_l, self.omega_u), (self.omega_l, self.omega_u)]
            };
            for (i, r) in [v.v, v.wf, v.wr].into_iter().zip(rates) {
                tighten(i, r, node.pinned, &mut lo, &mut hi);
            }
        }
        if let Terminal::Driving { s_d, stop } = self.horizon.terminal {
            let last = self.vars[self.vars.len() - 1];
            if !self.horizon.nodes[self.vars.len() - 1].pinned {
                lo[last.s] = s_d;
                hi[last.s] = s_d;
                if stop {
                    lo[last.v] = 0.0;
                    hi[last.v] = 0.0;
                }
            }
        }
        for i in self.durations.iter().flatten() {
            lo[*i] = cfg.t_min;
            hi[*i] = cfg.t_max;
        }
        if let Some(i) = (0..self.n).find(|&i| lo[i] > hi[i]) {
            return Err(PlanError::InfeasibleSeed(format!("empty bounds for variable {i}: [{}, {}]", lo[i], hi[i])));
        }
        Ok((lo, hi))
    }

    pub fn scale(&self, params: &RobotParams) -> Vec<f64> {
        let mut s = vec![1.0; self.n];
        let len = 2.0 * params.l0 + params.l_t;
        for v in &self.vars {
            s[v.s] = len;
            s[v.thf] = params.theta_u;
            s[v.thr] = params.theta_u;
            if let Some(i) = v.tht {
                s[i] = params.theta_u;
            }
            s[v.v] = params.v_u;
            s[v.wf] = params.omega_u;
            s[v.wr] = params.omega_u;
        }
        s
    }

    pub fn into_nlp(self, cfg: &PlannerConfig, params: &RobotParams, x0: Option<Vec<f64>>) -> Result<NlpProblem<Self>, PlanError> {
        let (lo, hi) = self.bounds(cfg)?;
        let mut x = x0.filter(|x| x.len() == self.n).unwrap_or_else(|| self.seed());
        for i in 0..self.n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
        let scale = self.scale(params);
        Ok(NlpProblem::new(self, lo, hi, x)?.with_scale(scale)?)
    }

    pub fn nodes(&self, x: &[f64]) -> Vec<TrajNode> {
        (0..self.vars.len())
            .map(|k| {
                let (q, qdot) = self.node_state(x, k);
                TrajNode { mode: self.horizon.nodes[k].mode, q, qdot }
            })
            .collect()
    }

    pub fn duration_values(&self, x: &[f64]) -> Vec<f64> {
        self.durations.iter().map(|d| d.map_or(0.0, |i| x[i])).collect()
    }

    /// Unweighted time, stability and smoothness terms at `x`.
    pub fn breakdown(&self, x: &[f64]) -> super::CostBreakdown {
        let mut g = vec![0.0; self.n];
        let mut term = |i: usize| {
            let mut p = self.clone();
            p.weights.lambda = [0.0; 3];
            p.weights.lambda[i] = 1.0;
            g.iter_mut().for_each(|v| *v = 0.0);
            p.objective(x, &mut g)
        };
        super::CostBreakdown { time: term(0), stability: term(1), smoothness: term(2) }
    }

    fn switch_pair(&self) -> Option<(usize, usize, SwitchKind)> {
        let sw = self.horizon.switch?;
        let kind = self.horizon.switch_kind?;
        Some(match kind {
            SwitchKind::DriveToTraverse(_) => (sw - 1, sw, kind),
            SwitchKind::TraverseToDrive(_) => (sw, sw - 1, kind),
        })
    }

    /// Traversing state as the switch relations expect it.
    fn switch_q(&self, x: &[f64], t: usize, kind: SwitchKind) -> [f64; 4] {
        let mut q = self.node_q(x, t);
        if kind == SwitchKind::DriveToTraverse(Direction::Descending) {
            q[3] += self.horizon.switch_geometry.map_or(0.0, |g| g.alpha);
        }
        q
    }

    fn push_grad(&self, jac: &mut Triplets, row: usize, vars: &NodeVars, g: &[f64; 4]) {
        for (slot, gv) in vars.state().iter().zip(g) {
            if let (Some(i), true) = (slot, *gv != 0.0) {
                jac.push((row, *i, *gv));
            }
        }
    }
}

impl Evaluator for HtoProblem {
    fn n(&self) -> usize {
        self.n
    }

    fn n_eq(&self) -> usize {
        self.n_eq
    }

    fn n_ineq(&self) -> usize {
        self.n_ineq
    }

    fn objective(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let [l1, l2, l3] = self.weights.lambda;
        let mut f = 0.0;
        for i in self.durations.iter().flatten() {
            f += l1 * x[*i] * x[*i];
            grad[*i] += 2.0 * l1 * x[*i];
        }
        let tr = self.horizon.transition;
        for (k, node) in self.horizon.nodes.iter().enumerate() {
            let v = &self.vars[k];
            let q = self.node_q(x, k);
            if node.mode.is_driving() {
                let c = self.horizon.c_drive;
                let (val, g) = stability_term(0.0, q[1], q[2], c, c, 0.0);
                f += l2 * val;
                grad[v.thf] += l2 * g[1];
                grad[v.thr] += l2 * g[2];
            } else if let (Some(tr), Some(key), Some(ctx)) = (tr, node.key, node.ctx) {
                let (val, g) = traversal_stability(tr.direction, key, &q, ctx.alpha, tr.sparsity_cur, tr.sparsity_next);
                f += l2 * val;
                if let Some(i) = v.tht {
                    grad[i] += l2 * g[0];
                }
                grad[v.thf] += l2 * g[1];
                grad[v.thr] += l2 * g[2];
            }
        }
        for (k, d) in self.durations.iter().enumerate() {
            let Some(ti) = *d else { continue };
            let (a, b) = (&self.vars[k], &self.vars[k + 1]);
            let q0 = [x[a.s], x[a.thf], x[a.thr]];
            let q1 = [x[b.s], x[b.thf], x[b.thr]];
            let v0 = [x[a.v], x[a.wf], x[a.wr]];
            let v1 = [x[b.v], x[b.wf], x[b.wr]];
            // durations are bounded away from zero, so this cannot fail inside the box
            let Ok((val, g)) = smoothness_pair(&q0, &q1, &v0, &v1, x[ti], &self.weights.q_s) else {
                return f64::NAN;
            };
            f += l3 * val;
            for (i, idx) in [a.s, a.thf, a.thr].into_iter().enumerate() {
                grad[idx] += l3 * g.q0[i];
            }
            for (i, idx) in [b.s, b.thf, b.thr].into_iter().enumerate() {
                grad[idx] += l3 * g.q1[i];
            }
            for (i, idx) in [a.v, a.wf, a.wr].into_iter().enumerate() {
                grad[idx] += l3 * g.v0[i];
            }
            for (i, idx) in [b.v, b.wf, b.wr].into_iter().enumerate() {
                grad[idx] += l3 * g.v1[i];
            }
            grad[ti] += l3 * g.dt;
        }
        f
    }

    fn equalities(&self, x: &[f64], out: &mut [f64], jac: &mut Triplets) {
        let mut row = 0;
        for k in 0..self.horizon.nodes.len() {
            let Ok(Some(set)) = self.node_set(x, k) else { continue };
            for r in &set.equalities {
                out[row] = r.value;
                self.push_grad(jac, row, &self.vars[k], &r.grad);
                row += 1;
            }
        }
        if let (Some((d, t, kind)), Some(g)) = (self.switch_pair(), self.horizon.switch_geometry) {
            let r = switching_config_residual(kind, x[self.vars[d].s], &self.switch_q(x, t, kind), &g);
            out[row] = r.value;
            jac.push((row, self.vars[d].s, r.d_drive));
            self.push_grad(jac, row, &self.vars[t], &r.d_trav);
        }
    }

    fn inequalities(&self, x: &[f64], out: &mut [f64], jac: &mut Triplets) {
        let mut row = 0;
        for k in 0..self.horizon.nodes.len() {
            let Ok(Some(set)) = self.node_set(x, k) else { continue };
            for r in &set.inequalities {
                out[row] = r.value;
                self.push_grad(jac, row, &self.vars[k], &r.grad);
                row += 1;
            }
        }
        if let (Some((d, t, kind)), Some(g)) = (self.switch_pair(), self.horizon.switch_geometry) {
            let (dv, tv) = (&self.vars[d], &self.vars[t]);
            let m = switching_motion_residual(kind, x[dv.v], x[tv.v], &self.switch_q(x, t, kind), &g);
            out[row] = m.value;
            jac.push((row, dv.v, m.d_rates[0]));
            jac.push((row, tv.v, m.d_rates[1]));
            self.push_grad(jac, row, tv, &m.d_trav);
            row += 1;
        }
        for (k, d) in self.durations.iter().enumerate() {
            let Some(ti) = *d else { continue };
            let (a, b) = (&self.vars[k], &self.vars[k + 1]);
            let t = x[ti];
            // progress measured forward: s_d counts down while driving
            let sign = if self.horizon.nodes[k].mode.is_driving() { -1.0 } else { 1.0 };
            let ds = sign * (x[b.s] - x[a.s]);
            out[row] = -ds;
            jac.push((row, a.s, sign));
            jac.push((row, b.s, -sign));
            out[row + 1] = ds - self.v_u * t;
            jac.push((row + 1, a.s, -sign));
            jac.push((row + 1, b.s, sign));
            jac.push((row + 1, ti, -self.v_u));
            let mut r = row + 2;
            for (ia, ib) in [(a.thf, b.thf), (a.thr, b.thr)] {
                let dq = x[ib] - x[ia];
                out[r] = dq - self.omega_u * t;
                jac.push((r, ib, 1.0));
                jac.push((r, ia, -1.0));
                jac.push((r, ti, -self.omega_u));
                out[r + 1] = self.omega_l * t - dq;
                jac.push((r + 1, ib, -1.0));
                jac.push((r + 1, ia, 1.0));
                jac.push((r + 1, ti, self.omega_l));
                r += 2;
            }
            row += PAIR_ROWS;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlp::check_gradients;
    use crate::planner::horizon::{build_horizon, Course, PlannerState};
    use crate::planner::{replan, PlannerConfig};
    use crate::robot::gear_offset_angle;
    use crate::sequence::Mode;
    use crate::terrain::{link_steps, ProfilePoint, TerrainSegment};

    pub(crate) fn course(points: &[(f64, f64, f64, f64)], goal: f64) -> Course {
        let mut segs: Vec<TerrainSegment> = points
            .iter()
            .map(|&(d0, h0, d1, h1)| {
                let mut s = TerrainSegment::between(ProfilePoint::new(d0, h0), ProfilePoint::new(d1, h1));
                s.sparsity = 0.8;
                s
            })
            .collect();
        link_steps(&mut segs);
        Course::new(&segs, goal).unwrap()
    }

    fn start(params: &RobotParams, s_d: f64) -> PlannerState {
        let d = gear_offset_angle(params).unwrap();
        PlannerState { mode: Mode::Driving, index: 0, q: [s_d, d, d, 0.0], qdot: [0.0; 3] }
    }

    #[test]
    fn platform_replans_verify_from_each_side() {
        let params = RobotParams::default();
        let cfg = PlannerConfig::default();
        let c = course(&[(0.0, 0.0, 2.0, 0.0), (2.0, 0.4, 4.0, 0.4), (4.0, 0.0, 6.0, 0.0)], 5.5);
        let below = start(&params, c.s_d(0, crate::geom::Vec2::new(1.0, 0.0)));
        let on_top = PlannerState { index: 1, q: [0.8, below.q[1], below.q[2], 0.0], ..below };
        let first = replan(&below, &c, &params, &cfg, None).unwrap();
        let n = first.nodes[5];
        let mid_climb = PlannerState { mode: n.mode, index: 0, q: n.q, qdot: n.qdot };
        for st in [below, on_top, mid_climb] {
            let h = build_horizon(&st, &c, &params, &cfg).unwrap();
            let nlp = HtoProblem::new(&h, &params, &cfg.weights).unwrap().into_nlp(&cfg, &params, None).unwrap();
            assert!(check_gradients(&nlp, &nlp.x0, 1e-6).unwrap() < 1e-5, "{:?}", h.labels());
            let plan = replan(&st, &c, &params, &cfg, None).unwrap();
            assert!(plan.report.max_eq <= 1e-4 && plan.report.max_ineq <= 1e-6, "{:?}: {:?}", h.labels(), plan.report);
            assert!(plan.durations.iter().all(|d| *d >= 0.0));
        }
    }
}
