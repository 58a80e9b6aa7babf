use serde::{Deserialize, Serialize};

use super::{com_coordinate, effective_geometry, BodyOutline, EffectiveGeometry, ModelError, RobotParams};
use crate::geom::{vertical_clearance_except, Line, Polyline, Vec2};
use crate::terrain::TerrainSegment;

/// Reduced driving configuration. Flipper angles are physical angles.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DrivingState {
    /// Distance along the terrain from the front joint to the reference
    /// point ahead; decreases while driving forward.
    pub s_d: f64,
    pub theta_f: f64,
    pub theta_r: f64,
}

/// Reduced traversing configuration. `s_t` is the arc length from the front
/// flipper tip to the support point; `theta_t` is the pitch relative to the
/// reference terrain of the traversal.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TraversingState {
    pub s_t: f64,
    pub theta_f: f64,
    pub theta_r: f64,
    pub theta_t: f64,
}

/// World pose of the body centre (middle of the main track, `gear_large`
/// above its bottom line).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarPose {
    pub x: f64,
    pub z: f64,
    pub theta_t: f64,
}

impl PlanarPose {
    pub fn center(&self) -> Vec2 {
        Vec2::new(self.x, self.z)
    }
}

/// Track flush on `line`, front joint `s_d` before `target` (measured along
/// the line).
pub fn pose_on_line(
    params: &RobotParams,
    state: &DrivingState,
    line: &Line,
    target: Vec2,
) -> Result<(PlanarPose, EffectiveGeometry), ModelError> {
    let g = effective_geometry(params, state.theta_f, state.theta_r, 0.0, 0.0, 0.0)?;
    let along = line.along(target) - state.s_d - (g.l_t / 2.0 + g.li_f);
    let c = line.point_at(along) + line.dir.perp() * params.gear_large;
    let pitch = line.dir.z.atan2(line.dir.x);
    Ok((PlanarPose { x: c.x, z: c.z, theta_t: pitch }, g))
}

/// Driving pose with `s_d` measured to the end of `terrain`.
pub fn pose_from_driving(
    params: &RobotParams,
    state: &DrivingState,
    terrain: &TerrainSegment,
) -> Result<PlanarPose, ModelError> {
    if !(state.s_d >= -params.l_t && state.s_d <= terrain.length + params.l_t) {
        return Err(ModelError::OutOfSegment { s_d: state.s_d });
    }
    Ok(pose_on_line(params, state, &terrain.line(), terrain.end())?.0)
}

/// Orientation frame of a traversal: pitch is reported relative to
/// `alpha_ref`; the flipper-tip extensions see the terrains under the front
/// and rear flippers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotFrame {
    pub alpha_ref: f64,
    pub alpha_front: f64,
    pub alpha_rear: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotResult {
    pub pose: PlanarPose,
    pub geometry: EffectiveGeometry,
    /// Remaining penetration when no contact-consistent pitch exists.
    pub penetration: f64,
}

const PITCH_LIMIT_DEG: i32 = 85;
const CONTACT_TOL: f64 = 1e-9;
const HINT_WINDOW_DEG: f64 = 15.0;

fn outline_at(
    params: &RobotParams,
    theta_f: f64,
    theta_r: f64,
    pitch: f64,
    frame: &PivotFrame,
) -> Result<(EffectiveGeometry, BodyOutline), ModelError> {
    let g = effective_geometry(
        params,
        theta_f,
        theta_r,
        pitch - frame.alpha_ref,
        frame.alpha_front - frame.alpha_ref,
        frame.alpha_rear - frame.alpha_ref,
    )?;
    let o = g.outline(params, g.thf_eff, g.thr_eff);
    Ok((g, o))
}

/// Rigidly rotates the robot about `support`, which stays at arc length
/// `s_t`, and lets it settle under gravity: pitch grows (nose up) while the
/// centre of mass is behind the support and shrinks otherwise, until the
/// first contact reported by `clearance` (minimum signed gap of the world
/// outline). `hint` is the previous pitch, giving the settling hysteresis.
pub fn pivot_pose(
    params: &RobotParams,
    s_t: f64,
    theta_f: f64,
    theta_r: f64,
    support: Vec2,
    frame: &PivotFrame,
    hint: Option<f64>,
    clearance: impl Fn(&[Vec2; 4]) -> f64,
) -> Result<PivotResult, ModelError> {
    let place = |pitch: f64| -> Result<(PlanarPose, EffectiveGeometry, f64), ModelError> {
        let (g, o) = outline_at(params, theta_f, theta_r, pitch, frame)?;
        let b = o.point_at(s_t);
        let c = support - b.rotate(pitch);
        let world = o.to_world(c, pitch);
        Ok((PlanarPose { x: c.x, z: c.z, theta_t: pitch }, g, clearance(&world)))
    };
    let (_, g0, _) = place(hint.unwrap_or(frame.alpha_ref))?;
    if !(0.0..=g0.l_sigma()).contains(&s_t) {
        return Err(ModelError::Infeasible { s_t });
    }
    let up = s_t < com_coordinate(params, &g0);
    let dir = if up { 1.0 } else { -1.0 };
    let c_at = |p: f64| place(p).map(|r| r.2).unwrap_or(f64::NEG_INFINITY);

    // with a hint, stay on its branch: a disjoint feasible set far away is
    // the robot flipped over, not settled
    let window = hint.map_or(f64::INFINITY, |_| HINT_WINDOW_DEG.to_radians());
    let centre = hint.unwrap_or(frame.alpha_ref);
    let grid: Vec<f64> = (-PITCH_LIMIT_DEG..=PITCH_LIMIT_DEG)
        .map(|d| (d as f64).to_radians())
        .filter(|p| (p - centre).abs() <= window)
        .collect();
    if grid.is_empty() {
        return Err(ModelError::Infeasible { s_t });
    }
    let ok: Vec<bool> = grid.iter().map(|&p| c_at(p) >= -CONTACT_TOL).collect();
    let step = 1f64.to_radians();
    let boundary = |mut feas: f64, mut infeas: f64| {
        for _ in 0..80 {
            let mid = 0.5 * (feas + infeas);
            if c_at(mid) >= -CONTACT_TOL {
                feas = mid;
            } else {
                infeas = mid;
            }
        }
        feas
    };

    let pitch = if ok.iter().any(|&b| b) {
        let start = hint.unwrap_or(frame.alpha_ref);
        let mut cur = if c_at(start) >= -CONTACT_TOL {
            start
        } else {
            let k = (0..grid.len())
                .filter(|&k| ok[k])
                .min_by(|&a, &b| {
                    let da = (grid[a] - start).abs() - 1e-9 * dir * (grid[a] - start);
                    let db = (grid[b] - start).abs() - 1e-9 * dir * (grid[b] - start);
                    da.total_cmp(&db)
                })
                .unwrap();
            grid[k]
        };
        let limit = (PITCH_LIMIT_DEG as f64).to_radians();
        loop {
            let next = cur + dir * step;
            if next.abs() > limit {
                return Err(ModelError::Infeasible { s_t });
            }
            if c_at(next) < -CONTACT_TOL {
                break boundary(cur, next);
            }
            cur = next;
        }
    } else {
        // no pitch is contact-free: take the least penetrating one, then push
        // it to the settling side of its (possibly empty) feasible set
        let kb = (0..grid.len()).max_by(|&a, &b| c_at(grid[a]).total_cmp(&c_at(grid[b]))).unwrap();
        let (mut lo, mut hi) = (grid[kb] - step, grid[kb] + step);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..100 {
            let a = hi - phi * (hi - lo);
            let b = lo + phi * (hi - lo);
            if c_at(a) >= c_at(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let best = 0.5 * (lo + hi);
        if c_at(best) >= -CONTACT_TOL {
            boundary(best, best + dir * 2.0 * step)
        } else {
            best
        }
    };
    let (pose, geometry, c) = place(pitch)?;
    Ok(PivotResult { pose, geometry, penetration: (-c).max(0.0) })
}

/// Ground profile formed by two segments, extended far along both lines.
pub fn pair_ground(pair: (&TerrainSegment, &TerrainSegment)) -> Polyline {
    let (a, b) = pair;
    let la = a.line();
    let lb = b.line();
    Polyline::new([
        la.point_at(-50.0),
        a.end(),
        b.start(),
        lb.point_at(lb.along(b.end()) + 50.0),
    ])
}

/// Pose realising a traversing state against a pair of terrains pivoting on
/// `support`. Ascents measure pitch relative to the first terrain, descents
/// relative to the second.
pub fn pose_from_traversing(
    params: &RobotParams,
    state: &TraversingState,
    pair: (&TerrainSegment, &TerrainSegment),
    support: Vec2,
    descending: bool,
) -> Result<PlanarPose, ModelError> {
    let ground = pair_ground(pair);
    let frame = PivotFrame {
        alpha_ref: if descending { pair.1.alpha } else { pair.0.alpha },
        alpha_front: pair.1.alpha,
        alpha_rear: pair.0.alpha,
    };
    let near = |p: Vec2| (p - support).norm() < 1e-7;
    let r = pivot_pose(
        params,
        state.s_t,
        state.theta_f,
        state.theta_r,
        support,
        &frame,
        Some(frame.alpha_ref + state.theta_t),
        |w| vertical_clearance_except(w, &ground, near),
    )?;
    if r.penetration > 1e-6 {
        return Err(ModelError::Infeasible { s_t: state.s_t });
    }
    Ok(r.pose)
}

/// Closest point of the outline (placed at `pose`) to `p`: arc length and
/// distance.
pub fn project_onto_outline(outline: &BodyOutline, pose: &PlanarPose, p: Vec2) -> (f64, f64) {
    let w = outline.to_world(pose.center(), pose.theta_t);
    let mut best = (0.0, f64::INFINITY);
    for k in 0..3 {
        let (a, b) = (w[k], w[k + 1]);
        let d = b - a;
        let len2 = d.dot(d);
        let t = if len2 > 0.0 { ((p - a).dot(d) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let dist = (a + d * t - p).norm();
        if dist < best.1 {
            best = (outline.arcs[k] + t * (outline.arcs[k + 1] - outline.arcs[k]), dist);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::super::gear_offset_angle;
    use super::*;
    use crate::terrain::ProfilePoint;

    fn seg(a: (f64, f64), b: (f64, f64)) -> TerrainSegment {
        TerrainSegment::between(ProfilePoint::new(a.0, a.1), ProfilePoint::new(b.0, b.1))
    }

    #[test]
    fn flat_driving() {
        let p = RobotParams::default();
        let t = seg((0.0, 0.0), (5.0, 0.0));
        let a = pose_from_driving(&p, &DrivingState { s_d: 1.0, theta_f: 0.2, theta_r: 0.1 }, &t).unwrap();
        let b = pose_from_driving(&p, &DrivingState { s_d: 2.0, theta_f: 0.2, theta_r: 0.1 }, &t).unwrap();
        assert_eq!(a.theta_t, 0.0);
        assert!((a.z - p.gear_large).abs() < 1e-15 && (b.z - a.z).abs() < 1e-15);
        assert!((a.x - b.x - 1.0).abs() < 1e-12);
        assert!(pose_from_driving(&p, &DrivingState { s_d: 7.0, ..Default::default() }, &t).is_err());
    }

    #[test]
    fn inclined_driving() {
        let p = RobotParams::default();
        let a = 15f64.to_radians();
        let t = seg((0.0, 0.0), (3.0 * a.cos(), 3.0 * a.sin()));
        for s in [0.0, 0.7, 2.5] {
            let q = pose_from_driving(&p, &DrivingState { s_d: s, ..Default::default() }, &t).unwrap();
            assert!((q.theta_t - a).abs() < 1e-12);
        }
    }

    #[test]
    fn front_joint_continuous_at_ramp_start() {
        let p = RobotParams::default();
        let a = 20f64.to_radians();
        let flat = seg((0.0, 0.0), (2.0, 0.0));
        let ramp = seg((2.0, 0.0), (2.0 + a.cos(), a.sin()));
        let st = DrivingState { s_d: 0.0, theta_f: 0.3, theta_r: 0.0 };
        let fj = |pose: PlanarPose| {
            let g = effective_geometry(&p, st.theta_f, st.theta_r, 0.0, 0.0, 0.0).unwrap();
            let o = g.outline(&p, g.thf_eff, g.thr_eff);
            o.to_world(pose.center(), pose.theta_t)[1]
        };
        let on_flat = pose_from_driving(&p, &st, &flat).unwrap();
        let on_ramp =
            pose_from_driving(&p, &DrivingState { s_d: ramp.length, ..st }, &ramp).unwrap();
        assert!((fj(on_flat) - fj(on_ramp)).norm() < 1e-9);
    }

    /// Builds a state in which the support lies on the track, the front tip
    /// on the upper line and the rear tip on the lower line by scanning the
    /// front flipper angle for the first contact and bisecting the rear one.
    fn q3_oracle(p: &RobotParams, h: f64, s_t: f64, pitch: f64) -> Option<(TraversingState, f64)> {
        let delta = gear_offset_angle(p).unwrap();
        let lower_gap = |thf: f64, thr: f64| {
            let g = effective_geometry(p, thf, thr, pitch, 0.0, 0.0).ok()?;
            let o = g.outline(p, g.thf_eff, g.thr_eff);
            let c = Vec2::new(0.0, h) - o.point_at(s_t).rotate(pitch);
            let w = o.to_world(c, pitch);
            Some((w[0].z - h, w[3].z))
        };
        // front tip on the upper line
        let (mut lo, mut hi) = (-1.2 - delta, 1.2 - delta);
        if lower_gap(lo, 0.0)?.0 * lower_gap(hi, 0.0)?.0 > 0.0 {
            return None;
        }
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if lower_gap(m, 0.0)?.0.signum() == lower_gap(lo, 0.0)?.0.signum() {
                lo = m
            } else {
                hi = m
            }
        }
        let thf = 0.5 * (lo + hi);
        let (mut a, mut b) = (-1.2 - delta, pitch - delta);
        if lower_gap(thf, a)?.1 * lower_gap(thf, b)?.1 > 0.0 {
            return None;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if lower_gap(thf, m)?.1.signum() == lower_gap(thf, a)?.1.signum() {
                a = m
            } else {
                b = m
            }
        }
        let thr = 0.5 * (a + b);
        Some((TraversingState { s_t, theta_f: thf, theta_r: thr, theta_t: pitch }, h))
    }

    #[test]
    fn q3_round_trip() {
        let p = RobotParams::default();
        let mut checked = 0;
        for (i, pitch_deg) in [12.0, 18.0, 24.0, 30.0].iter().enumerate() {
            let pitch = f64::to_radians(*pitch_deg);
            let g = effective_geometry(&p, 0.2, 0.0, pitch, 0.0, 0.0).unwrap();
            let s_t = g.lf_eff + 0.05 + 0.03 * i as f64;
            let h = 0.3;
            let Some((q, h)) = q3_oracle(&p, h, s_t, pitch) else { continue };
            let lower = seg((-3.0, 0.0), (-0.02, 0.0));
            let upper = seg((0.0, h), (3.0, h));
            let support = upper.start();
            let pose = pose_from_traversing(&p, &q, (&lower, &upper), support, false).unwrap();
            assert!((pose.theta_t - pitch).abs() < 1e-8, "{} vs {}", pose.theta_t, pitch);
            let g = effective_geometry(&p, q.theta_f, q.theta_r, pose.theta_t, 0.0, 0.0).unwrap();
            let o = g.outline(&p, g.thf_eff, g.thr_eff);
            let (s, dist) = project_onto_outline(&o, &pose, support);
            assert!((s - q.s_t).abs() < 1e-8 && dist < 1e-8);
            checked += 1;
        }
        assert!(checked >= 2, "oracle produced too few states");
    }

    #[test]
    fn q2_joint_on_support() {
        let p = RobotParams::default();
        let q = TraversingState { s_t: 0.0, theta_f: 0.6, theta_r: 0.0, theta_t: 0.3 };
        let g = effective_geometry(&p, q.theta_f, q.theta_r, 0.3, 0.0, 0.0).unwrap();
        let mut q = TraversingState { s_t: g.lf_eff, ..q };
        let lower = seg((-3.0, 0.0), (-0.02, 0.0));
        let upper = seg((0.0, 0.3), (3.0, 0.3));
        // the tip extension depends on pitch: iterate s_t = lf_eff(pitch)
        let mut pose = PlanarPose::default();
        let mut g = g;
        for _ in 0..30 {
            pose = pose_from_traversing(&p, &q, (&lower, &upper), upper.start(), false).unwrap();
            g = effective_geometry(&p, q.theta_f, q.theta_r, pose.theta_t, 0.0, 0.0).unwrap();
            q = TraversingState { s_t: g.lf_eff, theta_t: pose.theta_t, ..q };
        }
        let o = g.outline(&p, g.thf_eff, g.thr_eff);
        let fj = o.to_world(pose.center(), pose.theta_t)[1];
        assert!((fj - upper.start()).norm() < 1e-6);
    }

    #[test]
    fn small_step_tends_to_flush() {
        let p = RobotParams::default();
        let mut last = f64::INFINITY;
        for h in [0.08, 0.04, 0.02, 0.01, 0.005] {
            let lower = seg((-3.0, 0.0), (-0.01, 0.0));
            let upper = seg((0.0, h), (3.0, h));
            let q = TraversingState { s_t: 0.7, theta_f: 0.3, theta_r: 0.2, theta_t: 0.0 };
            let pose = pose_from_traversing(&p, &q, (&lower, &upper), upper.start(), false).unwrap();
            assert!(pose.theta_t.abs() < last + 1e-9);
            last = pose.theta_t.abs();
        }
        assert!(last < 0.02);
    }
}
