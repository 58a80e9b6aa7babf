use serde::{Deserialize, Serialize};

use super::PlanError;
use crate::sequence::{Direction, KeyNode, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostWeights {
    /// Time, stability, smoothness.
    pub lambda: [f64; 3],
    /// Smoothness weight over `(s_dot, omega_f, omega_r)`.
    pub q_s: [[f64; 3]; 3],
}

impl Default for CostWeights {
    fn default() -> Self {
        Self { lambda: [1.0, 0.5, 0.5], q_s: [[1.0, 0.0, 0.0], [0.0, 0.2, 0.0], [0.0, 0.0, 0.2]] }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.lambda.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(PlanError::Config("cost weights must be finite and nonnegative".into()));
        }
        let q = nalgebra::Matrix3::from_fn(|i, j| self.q_s[i][j]);
        if (q - q.transpose()).abs().max() > 1e-12 || q.cholesky().is_none() {
            return Err(PlanError::Config("Q_s must be symmetric positive definite".into()));
        }
        Ok(())
    }
}

/// Sum of squared durations; writes `2 T` into `grad`.
pub fn cost_time(durations: &[f64], grad: &mut [f64]) -> f64 {
    for (g, t) in grad.iter_mut().zip(durations) {
        *g = 2.0 * t;
    }
    durations.iter().map(|t| t * t).sum()
}

/// Front/rear weights for a node: the rear always uses the current terrain's
/// sparsity, the front is unweighted while it reaches for the support.
pub fn stability_weights(mode: Mode, c1: f64, c2: f64) -> (f64, f64) {
    let w_f = match mode {
        Mode::Driving => c1,
        Mode::Traversing { node: 1, dir: Direction::Ascending } => 0.0,
        Mode::Traversing { node: 4, dir: Direction::Descending } => 0.0,
        Mode::Traversing { .. } => c2,
    };
    (w_f, c1)
}

/// `w_f (θt + θf - α_f)² + w_r (θt - θr)²` and its gradient over
/// `(theta_t, theta_f, theta_r)`.
pub fn stability_term(theta_t: f64, theta_f: f64, theta_r: f64, w_f: f64, w_r: f64, alpha_f: f64) -> (f64, [f64; 3]) {
    let a = theta_t + theta_f - alpha_f;
    let b = theta_t - theta_r;
    (w_f * a * a + w_r * b * b, [2.0 * (w_f * a + w_r * b), 2.0 * w_f * a, -2.0 * w_r * b])
}

/// Stability of one traversal node. Descents are scored on the dual
/// configuration, where the terrains (and so the sparsities) trade places.
pub fn traversal_stability(
    dir: Direction,
    key: KeyNode,
    q: &[f64; 4],
    alpha: f64,
    c_cur: f64,
    c_next: f64,
) -> (f64, [f64; 3]) {
    let label = |k: KeyNode| match k {
        KeyNode::Q(i) => i,
        KeyNode::Insertion => 0,
    };
    match dir {
        Direction::Ascending => {
            let (w_f, w_r) = stability_weights(Mode::Traversing { node: label(key), dir }, c_cur, c_next);
            stability_term(q[3], q[1], q[2], w_f, w_r, alpha)
        }
        Direction::Descending => {
            let dual = match key {
                KeyNode::Q(i) => 5 - i,
                KeyNode::Insertion => 0,
            };
            let (w_f, w_r) =
                stability_weights(Mode::Traversing { node: dual, dir: Direction::Ascending }, c_next, c_cur);
            let (v, g) = stability_term(-q[3], q[2], q[1], w_f, w_r, alpha);
            (v, [-g[0], g[2], g[1]])
        }
    }
}

/// Sum of node stability terms, each given as `(theta_t, theta_f, theta_r,
/// w_f, w_r, alpha_f)`.
pub fn cost_stability(nodes: &[(f64, f64, f64, f64, f64, f64)]) -> f64 {
    nodes.iter().map(|&(t, f, r, wf, wr, a)| stability_term(t, f, r, wf, wr, a).0).sum()
}

/// Gradients of one smoothness pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SmoothGrad {
    pub q0: [f64; 3],
    pub q1: [f64; 3],
    pub v0: [f64; 3],
    pub v1: [f64; 3],
    pub dt: f64,
}

/// `‖q̄ - v0‖²_Q + ‖q̄ - v1‖²_Q` with `q̄ = (q1 - q0) / T`.
pub fn smoothness_pair(
    q0: &[f64; 3],
    q1: &[f64; 3],
    v0: &[f64; 3],
    v1: &[f64; 3],
    dt: f64,
    q_s: &[[f64; 3]; 3],
) -> Result<(f64, SmoothGrad), PlanError> {
    if !(dt > 0.0) {
        return Err(PlanError::ZeroDuration(0));
    }
    let bar: Vec<f64> = (0..3).map(|i| (q1[i] - q0[i]) / dt).collect();
    let e0: Vec<f64> = (0..3).map(|i| bar[i] - v0[i]).collect();
    let e1: Vec<f64> = (0..3).map(|i| bar[i] - v1[i]).collect();
    let qe = |e: &[f64]| -> [f64; 3] {
        let mut o = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                o[i] += q_s[i][j] * e[j];
            }
        }
        o
    };
    let (w0, w1) = (qe(&e0), qe(&e1));
    let val: f64 = (0..3).map(|i| e0[i] * w0[i] + e1[i] * w1[i]).sum();
    let mut g = SmoothGrad::default();
    for i in 0..3 {
        // d/d bar_i of the two quadratic forms, Q symmetric
        let db = 2.0 * (w0[i] + w1[i]);
        g.q1[i] = db / dt;
        g.q0[i] = -db / dt;
        g.v0[i] = -2.0 * w0[i];
        g.v1[i] = -2.0 * w1[i];
        g.dt -= db * bar[i] / dt;
    }
    Ok((val, g))
}

/// Sum over consecutive node pairs; node `k` is `(q, v)`.
pub fn cost_smoothness(
    nodes: &[([f64; 3], [f64; 3])],
    durations: &[f64],
    q_s: &[[f64; 3]; 3],
) -> Result<f64, PlanError> {
    let mut sum = 0.0;
    for (k, dt) in durations.iter().enumerate() {
        let (a, b) = (&nodes[k], &nodes[k + 1]);
        sum += smoothness_pair(&a.0, &b.0, &a.1, &b.1, *dt, q_s).map_err(|_| PlanError::ZeroDuration(k))?.0;
    }
    Ok(sum)
}
