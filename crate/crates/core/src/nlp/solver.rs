use std::collections::VecDeque;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::{eval_eq, eval_ineq, eval_obj, Evaluator, IterLog, NlpError, NlpProblem, Solution, SolveOptions, Status};

/// Problem view in scaled coordinates `y = x / scale`.
struct Scaled<'a, E> {
    p: &'a NlpProblem<E>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

/// Augmented Lagrangian state.
struct Multipliers {
    lambda: Vec<f64>,
    nu: Vec<f64>,
    mu: f64,
}

impl<'a, E: Evaluator> Scaled<'a, E> {
    fn new(p: &'a NlpProblem<E>) -> Self {
        let lo = p.lower.iter().zip(&p.scale).map(|(l, s)| l / s).collect();
        let hi = p.upper.iter().zip(&p.scale).map(|(u, s)| u / s).collect();
        Self { p, lo, hi }
    }

    fn x(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.p.scale).map(|(v, s)| v * s).collect()
    }

    fn project(&self, y: &mut [f64]) {
        for i in 0..y.len() {
            y[i] = y[i].clamp(self.lo[i], self.hi[i]);
        }
    }

    /// PHR augmented Lagrangian and its gradient in scaled space.
    fn merit(&self, y: &[f64], m: &Multipliers, grad: &mut [f64]) -> Result<f64, NlpError> {
        let e = &self.p.eval;
        let x = self.x(y);
        let mut val = eval_obj(e, &x, grad)?;
        let (c, jc) = eval_eq(e, &x)?;
        let mut wc = vec![0.0; c.len()];
        for (i, ci) in c.iter().enumerate() {
            val += m.lambda[i] * ci + 0.5 * m.mu * ci * ci;
            wc[i] = m.lambda[i] + m.mu * ci;
        }
        for &(r, k, v) in &jc {
            grad[k] += wc[r] * v;
        }
        let (g, jg) = eval_ineq(e, &x)?;
        let mut wg = vec![0.0; g.len()];
        for (j, gj) in g.iter().enumerate() {
            let t = m.nu[j] + m.mu * gj;
            if t > 0.0 {
                val += (t * t - m.nu[j] * m.nu[j]) / (2.0 * m.mu);
                wg[j] = t;
            } else {
                val -= m.nu[j] * m.nu[j] / (2.0 * m.mu);
            }
        }
        for &(r, k, v) in &jg {
            grad[k] += wg[r] * v;
        }
        for (gk, s) in grad.iter_mut().zip(&self.p.scale) {
            *gk *= s;
        }
        Ok(val)
    }

    fn proj_grad_norm(&self, y: &[f64], g: &[f64]) -> f64 {
        (0..y.len()).fold(0.0f64, |m, i| m.max(((y[i] - g[i]).clamp(self.lo[i], self.hi[i]) - y[i]).abs()))
    }

    fn constraint_state(&self, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NlpError> {
        let x = self.x(y);
        Ok((eval_eq(&self.p.eval, &x)?.0, eval_ineq(&self.p.eval, &x)?.0))
    }
}

fn max_violation(c: &[f64], g: &[f64]) -> f64 {
    let a = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    g.iter().fold(a, |m, v| m.max(*v))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes the merit over the box; returns (iterations, final projected
/// gradient norm).
fn inner<E: Evaluator>(
    sp: &Scaled<E>,
    y: &mut Vec<f64>,
    m: &Multipliers,
    opts: &SolveOptions,
    tol: f64,
    outer: usize,
    log: &mut Vec<IterLog>,
) -> Result<(usize, f64), NlpError> {
    let n = y.len();
    let mut g = vec![0.0; n];
    let mut f = sp.merit(y, m, &mut g)?;
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut pg = sp.proj_grad_norm(y, &g);
    let mut g_new = vec![0.0; n];
    let mut it = 0;
    while it < opts.max_inner && pg > tol {
        it += 1;
        let free: Vec<bool> = (0..n)
            .map(|i| !((y[i] <= sp.lo[i] && g[i] > 0.0) || (y[i] >= sp.hi[i] && g[i] < 0.0)))
            .collect();
        let mut q: Vec<f64> = (0..n).map(|i| if free[i] { g[i] } else { 0.0 }).collect();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, yv, rho) in mem.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(yv).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, yv, _)) = mem.back() {
            let gamma = dot(s, yv) / dot(yv, yv);
            q.iter_mut().for_each(|v| *v *= gamma);
        } else {
            let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let gamma = if gmax > 1.0 { 1.0 / gmax } else { 1.0 };
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, yv, rho), a) in mem.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(yv, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut d: Vec<f64> = (0..n).map(|i| if free[i] { -q[i] } else { 0.0 }).collect();
        if dot(&d, &g) >= 0.0 {
            mem.clear();
            d = (0..n).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let mut yn: Vec<f64> = (0..n).map(|i| y[i] + step * d[i]).collect();
            sp.project(&mut yn);
            let dec: f64 = (0..n).map(|i| g[i] * (yn[i] - y[i])).sum();
            if dec >= 0.0 {
                step *= 0.5;
                continue;
            }
            let fnew = sp.merit(&yn, m, &mut g_new)?;
            if fnew <= f + 1e-4 * dec {
                accepted = Some((yn, fnew));
                break;
            }
            step *= 0.5;
        }
        let Some((yn, fnew)) = accepted else {
            if mem.is_empty() {
                break;
            }
            mem.clear();
            continue;
        };
        let s: Vec<f64> = (0..n).map(|i| yn[i] - y[i]).collect();
        let yv: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&yv, &yv).sqrt() && sy > 0.0 {
            mem.push_back((s, yv, 1.0 / sy));
            if mem.len() > opts.memory {
                mem.pop_front();
            }
        }
        *y = yn;
        f = fnew;
        std::mem::swap(&mut g, &mut g_new);
        pg = sp.proj_grad_norm(y, &g);
        if opts.log {
            let (c, gi) = sp.constraint_state(y)?;
            log.push(IterLog { outer, inner: it, merit: f, penalty: m.mu, max_violation: max_violation(&c, &gi) });
        }
    }
    Ok((it, pg))
}

/// Gauss-Newton minimum-norm correction onto the constraint set with active
/// inequalities pushed to `-margin`. Keeps the result only if it is more
/// feasible than the input.
fn polish<E: Evaluator>(sp: &Scaled<E>, y: &mut Vec<f64>, margin: f64) -> Result<(), NlpError> {
    let n = y.len();
    let scale = &sp.p.scale;
    let measure = |y: &[f64]| -> Result<f64, NlpError> {
        let (c, g) = sp.constraint_state(y)?;
        Ok(max_violation(&c, &g.iter().map(|v| v + margin).collect::<Vec<_>>()))
    };
    let mut cur = measure(y)?;
    for _ in 0..30 {
        if cur <= 1e-12 {
            break;
        }
        let x = sp.x(y);
        let (c, jc) = eval_eq(&sp.p.eval, &x)?;
        let (g, jg) = eval_ineq(&sp.p.eval, &x)?;
        let mut rows: Vec<usize> = (0..c.len()).collect();
        let active: Vec<usize> = (0..g.len()).filter(|&j| g[j] > -margin).collect();
        rows.extend(active.iter().map(|j| c.len() + j));
        let free: Vec<usize> = (0..n).filter(|&i| y[i] > sp.lo[i] && y[i] < sp.hi[i]).collect();
        let mut col = vec![usize::MAX; n];
        for (k, &i) in free.iter().enumerate() {
            col[i] = k;
        }
        let mut row_of = vec![usize::MAX; c.len() + g.len()];
        for (k, &r) in rows.iter().enumerate() {
            row_of[r] = k;
        }
        let m = rows.len();
        if m == 0 || free.is_empty() {
            break;
        }
        let mut j = DMatrix::<f64>::zeros(m, free.len());
        let mut put = |r: usize, k: usize, v: f64| {
            if row_of[r] != usize::MAX && col[k] != usize::MAX {
                j[(row_of[r], col[k])] += v * scale[k];
            }
        };
        for &(r, k, v) in &jc {
            put(r, k, v);
        }
        for &(r, k, v) in &jg {
            put(c.len() + r, k, v);
        }
        let rhs = DVector::from_iterator(
            m,
            rows.iter().map(|&r| if r < c.len() { -c[r] } else { -(g[r - c.len()] + margin) }),
        );
        let jjt = &j * j.transpose() + DMatrix::<f64>::identity(m, m) * 1e-12;
        let w = match jjt.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => match jjt.svd(true, true).solve(&rhs, 1e-12) {
                Ok(w) => w,
                Err(_) => break,
            },
        };
        let delta = j.transpose() * w;
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..20 {
            let mut yn = y.clone();
            for (k, &i) in free.iter().enumerate() {
                yn[i] += step * delta[k];
            }
            sp.project(&mut yn);
            let v = measure(&yn)?;
            if v < cur {
                *y = yn;
                cur = v;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(())
}

pub fn solve<E: Evaluator>(problem: &NlpProblem<E>, opts: &SolveOptions) -> Result<Solution, NlpError> {
    solve_warm(problem, opts, None)
}

/// Like [`solve`], reusing multipliers and penalty of a previous solution
/// with the same constraint layout.
pub fn solve_warm<E: Evaluator>(
    problem: &NlpProblem<E>,
    opts: &SolveOptions,
    warm: Option<&Solution>,
) -> Result<Solution, NlpError> {
    let start = Instant::now();
    let e = &problem.eval;
    let n = problem.n();
    if e.n() != n || problem.x0.len() != n {
        return Err(NlpError::Dimension("evaluator and bounds disagree".into()));
    }
    let sp = Scaled::new(problem);
    let mut y: Vec<f64> = problem.x0.iter().zip(&problem.scale).map(|(x, s)| x / s).collect();
    sp.project(&mut y);
    let mut m = Multipliers { lambda: vec![0.0; e.n_eq()], nu: vec![0.0; e.n_ineq()], mu: opts.mu0 };
    if let Some(w) = warm {
        if w.multipliers_eq.len() == e.n_eq() && w.multipliers_ineq.len() == e.n_ineq() {
            m.lambda = w.multipliers_eq.clone();
            m.nu = w.multipliers_ineq.clone();
            m.mu = w.penalty.clamp(opts.mu0, opts.mu_max);
        }
    }
    let mut log = Vec::new();
    let mut total = 0;
    let mut outer = 0;
    let mut converged = false;
    let mut prev = f64::INFINITY;
    while outer < opts.max_outer {
        let tol = opts.tol_kkt.max(0.1f64.powi(outer as i32 + 1));
        let (it, pg) = inner(&sp, &mut y, &m, opts, tol, outer, &mut log)?;
        total += it;
        outer += 1;
        let (c, g) = sp.constraint_state(&y)?;
        let viol = max_violation(&c, &g);
        for (l, ci) in m.lambda.iter_mut().zip(&c) {
            *l += m.mu * ci;
        }
        for (v, gj) in m.nu.iter_mut().zip(&g) {
            *v = (*v + m.mu * gj).max(0.0);
        }
        if viol <= opts.tol_eq.min(opts.tol_ineq) && pg <= opts.tol_kkt {
            converged = true;
            break;
        }
        if viol > 0.25 * prev {
            m.mu = (m.mu * opts.mu_factor).min(opts.mu_max);
        }
        prev = viol;
    }
    if opts.polish {
        polish(&sp, &mut y, opts.ineq_margin)?;
    }
    let x_star = sp.x(&y);
    let (eq, ineq) = problem.violations(&x_star)?;
    let mut grad = vec![0.0; n];
    let objective = eval_obj(e, &x_star, &mut grad)?;
    let feasible = eq <= opts.tol_eq && ineq <= opts.tol_ineq;
    let status = match (feasible, converged) {
        (false, _) => Status::Infeasible,
        (true, true) => Status::Optimal,
        (true, false) => Status::MaxIter,
    };
    Ok(Solution {
        x_star,
        status,
        max_eq_violation: eq,
        max_ineq_violation: ineq,
        objective,
        iterations: total,
        outer_iterations: outer,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        multipliers_eq: m.lambda,
        multipliers_ineq: m.nu,
        penalty: m.mu,
        log,
    })
}
