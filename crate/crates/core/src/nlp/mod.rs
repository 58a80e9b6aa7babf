//! Small dense constrained NLP solver: augmented Lagrangian outer loop,
//! projected L-BFGS inner solves and a Gauss-Newton feasibility polish.

mod solver;

pub use solver::{solve, solve_warm};

use serde::Serialize;
use thiserror::Error;

/// Sparse Jacobian entries `(row, col, value)`; duplicates are summed.
pub type Triplets = Vec<(usize, usize, f64)>;

/// Problem callbacks. Equalities are `c(x) = 0`, inequalities `g(x) <= 0`.
pub trait Evaluator {
    fn n(&self) -> usize;
    fn n_eq(&self) -> usize;
    fn n_ineq(&self) -> usize;
    /// Returns the objective and writes its gradient into `grad`.
    fn objective(&self, x: &[f64], grad: &mut [f64]) -> f64;
    /// Writes residuals into `out` and appends Jacobian entries to `jac`.
    fn equalities(&self, x: &[f64], out: &mut [f64], jac: &mut Triplets);
    fn inequalities(&self, x: &[f64], out: &mut [f64], jac: &mut Triplets);
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NlpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value from the {0} evaluator")]
    NonFinite(&'static str),
}

pub struct NlpProblem<E> {
    pub eval: E,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub x0: Vec<f64>,
    /// Characteristic magnitude per variable; the solver works on `x / scale`.
    pub scale: Vec<f64>,
}

impl<E: Evaluator> NlpProblem<E> {
    pub fn new(eval: E, lower: Vec<f64>, upper: Vec<f64>, x0: Vec<f64>) -> Result<Self, NlpError> {
        let n = eval.n();
        for (name, v) in [("lower", &lower), ("upper", &upper), ("x0", &x0)] {
            if v.len() != n {
                return Err(NlpError::Dimension(format!("{name} has {} entries, expected {n}", v.len())));
            }
        }
        if let Some(i) = (0..n).find(|&i| !(lower[i] <= upper[i])) {
            return Err(NlpError::Dimension(format!("empty box for variable {i}")));
        }
        Ok(Self { eval, lower, upper, x0, scale: vec![1.0; n] })
    }

    pub fn with_scale(mut self, scale: Vec<f64>) -> Result<Self, NlpError> {
        if scale.len() != self.lower.len() || scale.iter().any(|s| !(*s > 0.0)) {
            return Err(NlpError::Dimension("scale must be positive, one per variable".into()));
        }
        self.scale = scale;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.lower.len()
    }

    /// Largest |c_i| and largest positive g_j at `x` (box bounds included in
    /// the inequality figure).
    pub fn violations(&self, x: &[f64]) -> Result<(f64, f64), NlpError> {
        let (c, _) = eval_eq(&self.eval, x)?;
        let (g, _) = eval_ineq(&self.eval, x)?;
        let eq = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut ineq = g.iter().fold(0.0f64, |m, v| m.max(*v));
        for i in 0..x.len() {
            ineq = ineq.max(self.lower[i] - x[i]).max(x[i] - self.upper[i]);
        }
        Ok((eq, ineq))
    }
}

pub(crate) fn eval_eq<E: Evaluator>(e: &E, x: &[f64]) -> Result<(Vec<f64>, Triplets), NlpError> {
    let mut out = vec![0.0; e.n_eq()];
    let mut jac = Vec::new();
    e.equalities(x, &mut out, &mut jac);
    finite(&out, &jac, "equality")?;
    Ok((out, jac))
}

pub(crate) fn eval_ineq<E: Evaluator>(e: &E, x: &[f64]) -> Result<(Vec<f64>, Triplets), NlpError> {
    let mut out = vec![0.0; e.n_ineq()];
    let mut jac = Vec::new();
    e.inequalities(x, &mut out, &mut jac);
    finite(&out, &jac, "inequality")?;
    Ok((out, jac))
}

pub(crate) fn eval_obj<E: Evaluator>(e: &E, x: &[f64], grad: &mut [f64]) -> Result<f64, NlpError> {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let f = e.objective(x, grad);
    if !f.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(NlpError::NonFinite("objective"));
    }
    Ok(f)
}

fn finite(v: &[f64], jac: &Triplets, what: &'static str) -> Result<(), NlpError> {
    if v.iter().any(|x| !x.is_finite()) || jac.iter().any(|t| !t.2.is_finite()) {
        return Err(NlpError::NonFinite(what));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOptions {
    pub max_outer: usize,
    pub max_inner: usize,
    pub mu0: f64,
    pub mu_factor: f64,
    pub mu_max: f64,
    pub tol_eq: f64,
    pub tol_ineq: f64,
    /// On the projected gradient of the augmented Lagrangian, scaled space.
    pub tol_kkt: f64,
    /// The polish aims for `g <= -ineq_margin` on active inequalities.
    pub ineq_margin: f64,
    pub memory: usize,
    pub polish: bool,
    pub log: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_outer: 30,
            max_inner: 200,
            mu0: 10.0,
            mu_factor: 10.0,
            mu_max: 1e8,
            tol_eq: 1e-6,
            tol_ineq: 1e-6,
            tol_kkt: 1e-4,
            ineq_margin: 1e-7,
            memory: 8,
            polish: true,
            log: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterLog {
    pub outer: usize,
    pub inner: usize,
    pub merit: f64,
    pub penalty: f64,
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub x_star: Vec<f64>,
    pub status: Status,
    pub max_eq_violation: f64,
    pub max_ineq_violation: f64,
    pub objective: f64,
    pub iterations: usize,
    pub outer_iterations: usize,
    pub wall_time_ms: f64,
    pub multipliers_eq: Vec<f64>,
    pub multipliers_ineq: Vec<f64>,
    pub penalty: f64,
    pub log: Vec<IterLog>,
}

impl Solution {
    pub fn is_feasible(&self, tol_eq: f64, tol_ineq: f64) -> bool {
        self.max_eq_violation <= tol_eq && self.max_ineq_violation <= tol_ineq
    }

    pub fn log_csv(&self) -> String {
        let mut s = String::from("outer,inner,merit,penalty,max_violation\n");
        for l in &self.log {
            s.push_str(&format!("{},{},{:e},{:e},{:e}\n", l.outer, l.inner, l.merit, l.penalty, l.max_violation));
        }
        s
    }
}

fn dense(jac: &Triplets, rows: usize, n: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; rows];
    for &(r, c, v) in jac {
        m[r][c] += v;
    }
    m
}

/// Largest relative discrepancy `|analytic - fd| / max(1, |fd|)` between the
/// analytic derivatives and central differences with step `h`.
pub fn check_gradients<E: Evaluator>(problem: &NlpProblem<E>, x: &[f64], h: f64) -> Result<f64, NlpError> {
    let e = &problem.eval;
    let n = e.n();
    if x.len() != n {
        return Err(NlpError::Dimension("point".into()));
    }
    let mut g = vec![0.0; n];
    eval_obj(e, x, &mut g)?;
    let (_, je) = eval_eq(e, x)?;
    let (_, ji) = eval_ineq(e, x)?;
    let (je, ji) = (dense(&je, e.n_eq(), n), dense(&ji, e.n_ineq(), n));
    let rel = |a: f64, fd: f64| (a - fd).abs() / fd.abs().max(1.0);
    let mut worst: f64 = 0.0;
    let mut scratch = vec![0.0; n];
    for k in 0..n {
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[k] += h;
        xm[k] -= h;
        let fd = (eval_obj(e, &xp, &mut scratch)? - eval_obj(e, &xm, &mut scratch)?) / (2.0 * h);
        worst = worst.max(rel(g[k], fd));
        let (cp, cm) = (eval_eq(e, &xp)?.0, eval_eq(e, &xm)?.0);
        for r in 0..cp.len() {
            worst = worst.max(rel(je[r][k], (cp[r] - cm[r]) / (2.0 * h)));
        }
        let (gp, gm) = (eval_ineq(e, &xp)?.0, eval_ineq(e, &xm)?.0);
        for r in 0..gp.len() {
            worst = worst.max(rel(ji[r][k], (gp[r] - gm[r]) / (2.0 * h)));
        }
    }
    Ok(worst)
}
