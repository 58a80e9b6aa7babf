//! End-to-end acceptance checks. Every test prints one `PASS`/`FAIL` line to
//! stderr (bypassing the harness capture) and then asserts it.
//!
//! The tests share cached episodes and run one at a time, so the latency
//! numbers are not measured under parallel load.

use std::io::Write as _;
use std::path::PathBuf;
use std::sync::{Mutex, MutexGuard, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use terrain_hto::app::{run_once, Ablation, RunResult, Scenario};
use terrain_hto::nlp::{Evaluator, Triplets};
use terrain_hto::planner::switching::{switching_config_residual, switching_motion_residual};
use terrain_hto::planner::{
    hermite_trajectory, CostWeights, HtoProblem, Plan,
    PlannerConfig, SwitchKind, TrajNode,
};
use terrain_hto::sequence::{Direction, KeyNode, Mode, NodeContext};
use terrain_hto::sim::SimEvent;
use terrain_hto::terrain::{
    build_graph, candidate_segments, optimal_coverage, shapes, simplify, ProfilePoint, SimplifyConfig, TerrainError,
};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(id: u8, name: &str, pass: bool, detail: &str) {
    let line = format!("acceptance {id:>2} {name}: {} ({detail})\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(pass, "criterion {id} {name}: {detail}");
}

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"));
    Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn run(name: &str, ablation: Option<Ablation>, raw: bool, seed: Option<u64>) -> RunResult {
    run_once(&scenario(name), ablation, raw, seed).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn cached(cell: &'static OnceLock<RunResult>, name: &str) -> &'static RunResult {
    cell.get_or_init(|| run(name, None, false, None))
}

fn platform() -> &'static RunResult {
    static R: OnceLock<RunResult> = OnceLock::new();
    cached(&R, "platform_0.4")
}

fn stairs() -> &'static RunResult {
    static R: OnceLock<RunResult> = OnceLock::new();
    cached(&R, "stairs_0.2x0.3")
}

fn multi() -> &'static RunResult {
    static R: OnceLock<RunResult> = OnceLock::new();
    cached(&R, "multi_terrain")
}

fn solved(r: &RunResult) -> impl Iterator<Item = &Plan> {
    r.log.plans.iter().map(|p| &p.plan).filter(|p| p.solution.is_some())
}

// ---------------------------------------------------------------- 1

/// Best cover by exhaustive enumeration: fewest segments, then most in-band
/// points (a shared endpoint counts once), then the smallest sequence of
/// graph vertices.
fn brute_force_cover(points: &[ProfilePoint], cfg: &SimplifyConfig) -> Option<Vec<(usize, usize)>> {
    let n = points.len();
    let cands = candidate_segments(points, cfg);
    let pn = |s: usize, e: usize| cands.iter().find(|c| c.s == s && c.e == e).map(|c| c.pn as i64);
    let mut best: Option<(usize, i64, Vec<usize>, Vec<(usize, usize)>)> = None;
    let mut stack: Vec<(usize, usize)> = Vec::new();
    fn go(
        start: usize,
        n: usize,
        n_ign: usize,
        pn: &dyn Fn(usize, usize) -> Option<i64>,
        stack: &mut Vec<(usize, usize)>,
        best: &mut Option<(usize, i64, Vec<usize>, Vec<(usize, usize)>)>,
    ) {
        for e in start + 1..n {
            let Some(p) = pn(start, e) else { continue };
            stack.push((start, e));
            if e == n - 1 {
                let shared = stack.windows(2).filter(|w| w[1].0 == w[0].1).count() as i64;
                let reward: i64 = stack.iter().map(|&(s, e)| pn(s, e).unwrap()).sum::<i64>() - shared;
                let verts: Vec<usize> = stack.iter().flat_map(|&(s, e)| [2 * s, 2 * e + 1]).collect();
                let key = (stack.len(), -reward, verts);
                let better = best.as_ref().map_or(true, |b| key < (b.0, b.1, b.2.clone()));
                if better {
                    *best = Some((key.0, key.1, key.2, stack.clone()));
                }
            } else {
                for j in 0..=n_ign {
                    if e + j < n - 1 {
                        go(e + j, n, n_ign, pn, stack, best);
                    }
                }
            }
            let _ = p;
            stack.pop();
        }
    }
    go(0, n, cfg.n_ign, &pn, &mut stack, &mut best);
    best.map(|b| b.3)
}

fn random_profile(rng: &mut ChaCha8Rng, d_r: f64) -> Vec<ProfilePoint> {
    let n = rng.gen_range(2..=12);
    let mut d = 0.0;
    let mut h = 0.0;
    let mut slope = 0.0;
    (0..n)
        .map(|k| {
            if k > 0 {
                // occasional missing samples exercise the gap rule
                d += d_r * if rng.gen_bool(0.15) { rng.gen_range(2..=4) as f64 } else { 1.0 };
                match rng.gen_range(0..6) {
                    0 => h += rng.gen_range(-0.3..0.3),
                    1 => slope = rng.gen_range(-1.0..1.0),
                    2 => h += rng.gen_range(-0.03..0.03),
                    _ => {}
                }
                h += slope * d_r;
            }
            ProfilePoint::new(d, h)
        })
        .collect()
}

#[test]
fn a01_simplification_matches_brute_force() {
    let _g = serial();
    let cfg = SimplifyConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let t0 = std::time::Instant::now();
    let (mut agree, mut covered) = (0, 0);
    let mut first_miss = String::new();
    for k in 0..200 {
        let points = random_profile(&mut rng, cfg.d_r);
        let oracle = brute_force_cover(&points, &cfg);
        let got = simplify(&points, &cfg);
        let index = |p: ProfilePoint| points.iter().position(|q| *q == p).unwrap();
        let same = match (&oracle, &got) {
            (Some(o), Ok(segs)) => {
                covered += 1;
                let g: Vec<(usize, usize)> = segs.iter().map(|s| (index(s.p_start), index(s.p_end))).collect();
                *o == g
            }
            (None, Err(TerrainError::Disconnected)) => true,
            _ => false,
        };
        if same {
            agree += 1;
        } else if first_miss.is_empty() {
            first_miss = format!(", first mismatch at profile {k}: oracle {oracle:?} vs {got:?}");
        }
        // the graph search alone must agree as well
        if let (Some(_), Ok(g)) = (&oracle, build_graph(&points, &candidate_segments(&points, &cfg), &cfg)) {
            assert_eq!(optimal_coverage(&g, &points, &cfg).unwrap(), got.clone().unwrap());
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        1,
        "simplification optimality",
        agree == 200 && secs < 10.0,
        &format!("{agree}/200 match, {covered} coverable, {secs:.2} s{first_miss}"),
    );
}

// ---------------------------------------------------------------- 2

#[test]
fn a02_platform_structure() {
    let _g = serial();
    let cfg = SimplifyConfig::default();
    let points = shapes::platform(2.0, 0.4, 1.2, 3.0, 0.02);
    let segs = simplify(&points, &cfg).unwrap();
    let h: Vec<f64> = segs.iter().map(|s| s.h_step).collect();
    let want = [0.4, -0.4, 0.0];
    let ok = segs.len() == 3 && h.iter().zip(want).all(|(a, b)| (a - b).abs() <= cfg.delta_m);
    verdict(2, "platform structure", ok, &format!("{} segments, h_step {h:.4?}", segs.len()));
}

// ---------------------------------------------------------------- 3

/// Key-node equalities written out directly from the ascending table; the
/// insertion node shares the third/fourth-node relations.
fn ascending_equalities(node: u8, q: [f64; 4], lf: f64, lt: f64, lr: f64, alpha: f64, h: f64) -> Vec<f64> {
    let [s, thf, thr, tht] = q;
    match node {
        1 => vec![(lf - s) * thf.sin() - h],
        2 => vec![lt * tht.sin() + lr * (tht - thr).sin() - h],
        _ => vec![
            (s - lf) * (tht - alpha).sin() + lf * (tht + thf - alpha).sin(),
            (lt + lf - s) * tht.sin() + lr * (tht - thr).sin() - h,
        ],
    }
}

/// Arc-length window of an ascending node, with the ranges' open ends.
fn ascending_range(node: u8, lf: f64, lt: f64, s_com: f64) -> (f64, f64) {
    match node {
        1 => (0.0, lf),
        2 => (lf, lf),
        3 => (lf, s_com),
        4 => (s_com, lf + lt),
        _ => (lf, lf + lt),
    }
}

/// Worst equality and range violation of one key node, descents through the
/// dual configuration.
fn key_node_violation(dir: Direction, key: KeyNode, q: [f64; 4], c: &NodeContext) -> (f64, f64) {
    let label = |k: KeyNode| match k {
        KeyNode::Q(i) => i,
        KeyNode::Insertion => 0,
    };
    let l_sigma = c.lf + c.lt + c.lr;
    let (node, q, lf, lr, s_com) = match dir {
        Direction::Ascending => (label(key), q, c.lf, c.lr, c.s_com),
        Direction::Descending => {
            let node = match key {
                KeyNode::Q(i) => 5 - i,
                KeyNode::Insertion => 0,
            };
            (node, [l_sigma - q[0], q[2], q[1], -q[3]], c.lr, c.lf, l_sigma - c.s_com)
        }
    };
    let eq = ascending_equalities(node, q, lf, c.lt, lr, c.alpha, c.h).into_iter().map(f64::abs).fold(0.0, f64::max);
    let (lo, hi) = ascending_range(node, lf, c.lt, s_com);
    (eq, (lo - q[0]).max(q[0] - hi).max(0.0))
}

#[test]
fn a03_plan_feasibility() {
    let _g = serial();
    let mut checked = 0;
    let mut worst = [0.0f64; 6];
    let mut worst_at = String::new();
    for r in [platform(), stairs()] {
        for p in solved(r) {
            checked += 1;
            let h = &p.horizon;
            let before = worst;
            worst[0] = worst[0].max(p.report.max_eq);
            worst[1] = worst[1].max(p.report.max_ineq);
            if let Some(dir) = h.direction() {
                for (n, spec) in p.nodes.iter().zip(&h.nodes) {
                    if let (Some(key), Some(ctx), false) = (spec.key, spec.ctx, spec.pinned) {
                        let (e, g) = key_node_violation(dir, key, n.q, &ctx);
                        worst[2] = worst[2].max(e);
                        worst[3] = worst[3].max(g);
                    }
                }
            }
            if let (Some(sw), Some(kind), Some(g)) = (h.switch, h.switch_kind, h.switch_geometry) {
                let (a, b) = (&p.nodes[sw - 1], &p.nodes[sw]);
                let (d, t) = match kind {
                    SwitchKind::DriveToTraverse(_) => (a, b),
                    SwitchKind::TraverseToDrive(_) => (b, a),
                };
                let mut q = t.q;
                if kind == SwitchKind::DriveToTraverse(Direction::Descending) {
                    q[3] += g.alpha;
                }
                worst[4] = worst[4].max(switching_config_residual(kind, d.q[0], &q, &g).value.abs());
                worst[5] = worst[5].max(switching_motion_residual(kind, d.qdot[0], t.qdot[0], &q, &g).value);
            }
            if worst != before && worst_at.is_empty() && (worst[0] > 1e-4 || worst[1] > 1e-6) {
                worst_at = format!(", first offender {} ({})", p.report.worst, h.labels().join(" "));
            }
        }
    }
    let ok = checked > 0
        && worst[0] <= 1e-4
        && worst[1] <= 1e-6
        && worst[2] <= 1e-4
        && worst[3] <= 1e-6
        && worst[4] <= 1e-4
        && worst[5] <= 1e-6;
    verdict(
        3,
        "plan feasibility",
        ok,
        &format!(
            "{checked} plans; eq {:.1e}, ineq {:.1e}, table eq {:.1e}, table range {:.1e}, |dc| {:.1e}, dm {:.1e}{worst_at}",
            worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]
        ),
    );
}

// ---------------------------------------------------------------- 4

fn nearest_rank(v: &mut [f64], q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1]
}

#[test]
fn a04_replan_latency() {
    let _g = serial();
    let cfg = PlannerConfig::default();
    let mut ms = Vec::new();
    let mut widest = (0, 0);
    for r in [platform(), stairs()] {
        for p in solved(r) {
            ms.push(p.solve_ms);
            widest = (widest.0.max(p.horizon.n_t), widest.1.max(p.horizon.n_d));
        }
        ms.extend(r.log.replans.iter().filter(|x| !x.ok).map(|x| x.wall_ms));
    }
    let (med, p95) = (nearest_rank(&mut ms, 0.5), nearest_rank(&mut ms, 0.95));
    let ok = med <= 150.0 && p95 <= 300.0 && widest.0 <= 5 && widest.1 <= cfg.max_driving_nodes;
    verdict(
        4,
        "replan latency",
        ok,
        &format!("{} solves, median {med:.1} ms, p95 {p95:.1} ms, n_t <= {}, n_d <= {}", ms.len(), widest.0, widest.1),
    );
}

// ---------------------------------------------------------------- 5

/// Collapses a mode sequence into driving runs (`D`) and complete
/// traversals (`A` up, `S` down); `None` if a traversal is out of order.
fn blocks(modes: &[String]) -> Option<String> {
    let mut out = String::new();
    let mut i = 0;
    while i < modes.len() {
        match Mode::from_label(&modes[i])? {
            Mode::Driving => {
                out.push('D');
                i += 1;
            }
            Mode::Traversing { dir, .. } => {
                let tag = if dir == Direction::Ascending { 'a' } else { 'd' };
                let want: Vec<String> = (1..=4).map(|k| format!("Q{k}{tag}")).collect();
                if modes.get(i..i + 4)? != want.as_slice() {
                    return None;
                }
                out.push(if dir == Direction::Ascending { 'A' } else { 'S' });
                i += 4;
            }
        }
    }
    Some(out)
}

#[test]
fn a05_mode_sequences() {
    let _g = serial();
    let p = platform().log.mode_sequence();
    let want: Vec<String> =
        ["D", "Q1a", "Q2a", "Q3a", "Q4a", "D", "Q1d", "Q2d", "Q3d", "Q4d", "D"].iter().map(|s| s.to_string()).collect();
    let platform_ok = p == want;
    // one staircase = the traversal onto its flight, a drive along it, the
    // traversal off it
    let s = stairs();
    let flights: Vec<usize> =
        (1..s.segments.len() - 1).filter(|&k| s.segments[k].alpha.abs() > 10f64.to_radians()).collect();
    let pattern = blocks(&s.log.mode_sequence());
    let stairs_ok = pattern.as_deref() == Some("DADSDSDSD") && flights.len() == 2;
    verdict(
        5,
        "mode sequences",
        platform_ok && stairs_ok,
        &format!("platform {}; stairs blocks {pattern:?} over {} flights", p.join(" "), flights.len()),
    );
}

// ---------------------------------------------------------------- 6

#[test]
fn a06_com_safety() {
    let _g = serial();
    let mut lifts = 0;
    let mut bad = Vec::new();
    for r in [platform(), stairs(), multi()] {
        for e in &r.log.events {
            if let SimEvent::RearLift { t, s_t, s_com } = *e {
                lifts += 1;
                if s_t < s_com {
                    bad.push(format!("{} t={t:.2}: {s_t:.4} < {s_com:.4}", r.scenario));
                }
            }
        }
    }
    verdict(6, "COM safety", lifts > 0 && bad.is_empty(), &format!("{lifts} rear lifts, violations {bad:?}"));
}

// ---------------------------------------------------------------- 7

#[test]
fn a07_cost_ablations() {
    let _g = serial();
    let still = run("stairs_0.2x0.3", Some(Ablation::Time), false, None);
    let progress = still.metrics.net_progress;
    let time_ok = progress.abs() <= 1e-3;

    let (mut smo_wins, mut stab_wins) = (0, 0);
    let mut rows = Vec::new();
    for seed in 1..=5u64 {
        let full = run("stairs_0.2x0.3", None, false, Some(seed));
        let no_smo = run("stairs_0.2x0.3", Some(Ablation::Smo), false, Some(seed));
        let full_raw = run("stairs_0.2x0.3", None, true, Some(seed));
        let no_stab = run("stairs_0.2x0.3", Some(Ablation::Stab), true, Some(seed));
        smo_wins += usize::from(no_smo.metrics.rotation_angle_deg > full.metrics.rotation_angle_deg);
        stab_wins += usize::from(no_stab.metrics.max_z_accel > full_raw.metrics.max_z_accel);
        rows.push(format!(
            "seed {seed}: rot {:.1}/{:.1}, zacc {:.0}/{:.0}",
            full.metrics.rotation_angle_deg,
            no_smo.metrics.rotation_angle_deg,
            full_raw.metrics.max_z_accel,
            no_stab.metrics.max_z_accel
        ));
    }
    verdict(
        7,
        "cost ablations",
        time_ok && smo_wins >= 3 && stab_wins >= 3,
        &format!(
            "no time: net progress {progress:.4} m ({:?}); no smo larger rotation {smo_wins}/5; no stab larger z accel {stab_wins}/5; {}",
            still.log.outcome,
            rows.join("; ")
        ),
    );
}

// ---------------------------------------------------------------- 8

fn dense(jac: &Triplets, rows: usize, n: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; rows];
    for &(r, c, v) in jac {
        m[r][c] += v;
    }
    m
}

/// Human-readable name of variable `i`.
fn var_name(p: &HtoProblem, i: usize) -> String {
    for (k, v) in p.vars.iter().enumerate() {
        let slots = [("s", Some(v.s)), ("thf", Some(v.thf)), ("thr", Some(v.thr)), ("tht", v.tht), ("v", Some(v.v)), ("wf", Some(v.wf)), ("wr", Some(v.wr))];
        if let Some((name, _)) = slots.iter().find(|(_, j)| *j == Some(i)) {
            return format!("{name}[{k}]");
        }
    }
    match p.durations.iter().position(|d| *d == Some(i)) {
        Some(k) => format!("T[{k}]"),
        None => format!("x[{i}]"),
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Objective (per cost term), equalities and inequalities against central
/// differences at `x`; returns the worst relative error and where it sits.
fn gradient_error(p: &HtoProblem, x: &[f64]) -> (f64, String) {
    let n = p.n();
    let mut worst: (f64, String) = (0.0, String::new());
    let mut note = |e: f64, what: &dyn Fn() -> String| {
        if e > worst.0 {
            worst = (e, what());
        }
    };
    let values = |x: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut objs = Vec::new();
        for term in 0..3 {
            let mut w = CostWeights::default();
            w.lambda = [0.0; 3];
            w.lambda[term] = 1.0;
            let q = HtoProblem::new(&p.horizon, &Default::default(), &w).unwrap();
            objs.push(q.objective(x, &mut vec![0.0; n]));
        }
        let (mut c, mut g) = (vec![0.0; p.n_eq()], vec![0.0; p.n_ineq()]);
        p.equalities(x, &mut c, &mut Vec::new());
        p.inequalities(x, &mut g, &mut Vec::new());
        (objs, c, g)
    };
    let mut grads = Vec::new();
    for term in 0..3 {
        let mut w = CostWeights::default();
        w.lambda = [0.0; 3];
        w.lambda[term] = 1.0;
        let q = HtoProblem::new(&p.horizon, &Default::default(), &w).unwrap();
        let mut g = vec![0.0; n];
        q.objective(x, &mut g);
        grads.push(g);
    }
    let (mut c, mut g) = (vec![0.0; p.n_eq()], vec![0.0; p.n_ineq()]);
    let (mut jc, mut jg) = (Vec::new(), Vec::new());
    p.equalities(x, &mut c, &mut jc);
    p.inequalities(x, &mut g, &mut jg);
    let (jc, jg) = (dense(&jc, p.n_eq(), n), dense(&jg, p.n_ineq(), n));
    for i in 0..n {
        let h = 1e-6 * x[i].abs().max(1.0);
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[i] += h;
        xm[i] -= h;
        let (op, cp, gp) = values(&xp);
        let (om, cm, gm) = values(&xm);
        for t in 0..3 {
            let fd = (op[t] - om[t]) / (2.0 * h);
            note(rel_err(grads[t][i], fd), &|| format!("cost {t} {}: {} vs {fd}", var_name(p, i), grads[t][i]));
        }
        for r in 0..p.n_eq() {
            let fd = (cp[r] - cm[r]) / (2.0 * h);
            note(rel_err(jc[r][i], fd), &|| format!("eq {r} {}: {} vs {fd}", var_name(p, i), jc[r][i]));
        }
        for r in 0..p.n_ineq() {
            let fd = (gp[r] - gm[r]) / (2.0 * h);
            note(rel_err(jg[r][i], fd), &|| format!("ineq {r} {}: {} vs {fd}", var_name(p, i), jg[r][i]));
        }
    }
    worst
}

#[test]
fn a08_gradients_match_finite_differences() {
    let _g = serial();
    let cfg = PlannerConfig::default();
    let params = Default::default();
    let horizons: Vec<_> = [platform(), stairs()]
        .into_iter()
        .flat_map(|r| solved(r).map(|p| p.horizon.clone()))
        .filter(|h| h.nodes.len() > 1)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = (0.0, String::new());
    let mut kinds = std::collections::BTreeSet::new();
    for k in 0..100 {
        let h = &horizons[(k * 7919) % horizons.len()];
        kinds.insert(h.labels().join(" "));
        let p = HtoProblem::new(h, &params, &CostWeights::default()).unwrap();
        let (lo, hi) = p.bounds(&cfg).unwrap();
        let seed = p.seed();
        let durations: Vec<usize> = p.durations.iter().flatten().copied().collect();
        let x: Vec<f64> = (0..p.n)
            .map(|i| {
                if durations.contains(&i) {
                    rng.gen_range(0.2..5.0)
                } else {
                    // the box around the seed; far corners of the driving
                    // window blow the cost up past what differencing resolves
                    let (a, b) = (lo[i].max(seed[i] - 0.5), hi[i].min(seed[i] + 0.5));
                    (a + rng.gen::<f64>() * (b - a)).clamp(lo[i], hi[i])
                }
            })
            .collect();
        let (e, at) = gradient_error(&p, &x);
        if e > worst.0 {
            worst = (e, format!("{at} in {}", h.labels().join(" ")));
        }
    }
    verdict(
        8,
        "gradient hygiene",
        worst.0 <= 1e-5,
        &format!("100 points over {} horizon shapes, worst relative error {:.2e} at {}", kinds.len(), worst.0, worst.1),
    );
}

// ---------------------------------------------------------------- 9

#[test]
fn a09_hermite() {
    let _g = serial();
    let mut node_err: f64 = 0.0;
    for p in solved(stairs()).take(20) {
        let traj = hermite_trajectory(&p.nodes, &p.durations).unwrap();
        let mut t = 0.0;
        for (k, n) in p.nodes.iter().enumerate() {
            if k > 0 {
                t += p.durations[k - 1];
            }
            // across a switch both nodes share an instant; the later wins
            if p.durations.get(k) == Some(&0.0) {
                continue;
            }
            let s = traj.sample(t.min(traj.t_end)).unwrap();
            let got = [s.s, s.theta_f, s.theta_r, s.s_dot, s.omega_f, s.omega_r];
            let want = [n.q[0], n.q[1], n.q[2], n.qdot[0], n.qdot[1], n.qdot[2]];
            for (a, b) in got.iter().zip(want) {
                node_err = node_err.max((a - b).abs());
            }
        }
    }
    let big_t = 2.0;
    let node = |s: f64| TrajNode { mode: Mode::Driving, q: [s, 0.0, 0.0, 0.0], qdot: [0.0; 3] };
    let seg = hermite_trajectory(&[node(0.0), node(1.0)], &[big_t]).unwrap();
    let mid = seg.sample(big_t / 2.0).unwrap().s;
    let peak = (0..=2000).map(|k| seg.sample(big_t * k as f64 / 2000.0).unwrap().s_dot.abs()).fold(0.0, f64::max);
    let ok = node_err <= 1e-12 && (mid - 0.5).abs() <= 1e-12 && (peak - 1.5 / big_t).abs() <= 1e-9;
    verdict(
        9,
        "hermite interpolation",
        ok,
        &format!("node error {node_err:.1e}, midpoint {mid}, peak rate {peak} (1.5/T = {})", 1.5 / big_t),
    );
}

// ---------------------------------------------------------------- 10

#[test]
fn a10_tracking_on_multi_terrain() {
    let _g = serial();
    let r = multi();
    let (es, ef, er) = r.log.mean_tracking_errors();
    let ok = r.log.outcome == terrain_hto::sim::Outcome::Completed
        && es <= 0.05
        && ef.to_degrees() <= 5.0
        && er.to_degrees() <= 5.0;
    verdict(
        10,
        "tracking on multi-terrain",
        ok,
        &format!(
            "{:?}; mean |e_s| {:.2} cm, |e_f| {:.2} deg, |e_r| {:.2} deg",
            r.log.outcome,
            es * 100.0,
            ef.to_degrees(),
            er.to_degrees()
        ),
    );
}
