use serde::Serialize;

use super::PlanError;
use crate::sequence::Mode;

/// Cubic matching values and rates at both ends of `[0, dt]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hermite {
    pub p0: f64,
    pub p1: f64,
    pub v0: f64,
    pub v1: f64,
    pub dt: f64,
}

impl Hermite {
    /// Value and derivative at local time `tau`.
    pub fn eval(&self, tau: f64) -> (f64, f64) {
        let t = tau / self.dt;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let p = h00 * self.p0 + h10 * self.dt * self.v0 + h01 * self.p1 + h11 * self.dt * self.v1;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        let v = (d00 * self.p0 + d01 * self.p1) / self.dt + d10 * self.v0 + d11 * self.v1;
        (p, v)
    }
}

/// Node of a planned trajectory: `q = [s, theta_f, theta_r, theta_t]`,
/// `qdot = [s_dot, omega_f, omega_r]`. The progress coordinate is `s_d`
/// while driving and `s_t` while traversing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajNode {
    pub mode: Mode,
    pub q: [f64; 4],
    pub qdot: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanSegment {
    pub mode: Mode,
    pub t0: f64,
    pub dt: f64,
    pub channels: [Hermite; 3],
    /// Pitch is interpolated linearly.
    pub theta_t: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanSample {
    pub mode: Mode,
    pub s: f64,
    pub s_dot: f64,
    pub theta_f: f64,
    pub theta_r: f64,
    pub omega_f: f64,
    pub omega_r: f64,
    pub theta_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanTrajectory {
    pub segments: Vec<PlanSegment>,
    /// Relative time of the mode switch, if the horizon has one.
    pub t_switch: Option<f64>,
    pub t_end: f64,
    /// Node held when the horizon has no segments.
    pub hold: TrajNode,
}

/// Joins consecutive nodes by cubic segments. `durations[k]` spans nodes
/// `k` and `k + 1`; a zero duration is allowed only across a mode change,
/// where both nodes describe the same instant.
pub fn hermite_trajectory(nodes: &[TrajNode], durations: &[f64]) -> Result<PlanTrajectory, PlanError> {
    if nodes.is_empty() || durations.len() + 1 != nodes.len() {
        return Err(PlanError::Config("need one duration per node pair".into()));
    }
    let mut t = 0.0;
    let mut segments = Vec::new();
    let mut t_switch = None;
    for (k, &dt) in durations.iter().enumerate() {
        let (a, b) = (&nodes[k], &nodes[k + 1]);
        if a.mode.is_driving() != b.mode.is_driving() {
            if dt != 0.0 {
                return Err(PlanError::Config("switch pair must share one instant".into()));
            }
            t_switch = Some(t);
            continue;
        }
        if !(dt > 0.0) {
            return Err(PlanError::ZeroDuration(k));
        }
        let ch = |i: usize| Hermite { p0: a.q[i], p1: b.q[i], v0: a.qdot[i], v1: b.qdot[i], dt };
        segments.push(PlanSegment {
            mode: a.mode,
            t0: t,
            dt,
            channels: [ch(0), ch(1), ch(2)],
            theta_t: (a.q[3], b.q[3]),
        });
        t += dt;
    }
    Ok(PlanTrajectory { segments, t_switch, t_end: t, hold: nodes[nodes.len() - 1] })
}

impl PlanTrajectory {
    pub fn stationary(node: TrajNode) -> Self {
        Self { segments: Vec::new(), t_switch: None, t_end: 0.0, hold: node }
    }

    /// Reference at relative time `t`; at the switch instant the
    /// post-switch segment is returned.
    pub fn sample(&self, t: f64) -> Result<PlanSample, PlanError> {
        if !(t >= -1e-12 && t <= self.t_end + 1e-9) {
            return Err(PlanError::OutOfRange { t, t_end: self.t_end });
        }
        Ok(self.sample_clamped(t))
    }

    /// Like [`PlanTrajectory::sample`] but holds the end state past the horizon.
    pub fn sample_clamped(&self, t: f64) -> PlanSample {
        let Some(last) = self.segments.last() else {
            let n = &self.hold;
            return PlanSample {
                mode: n.mode,
                s: n.q[0],
                s_dot: 0.0,
                theta_f: n.q[1],
                theta_r: n.q[2],
                omega_f: 0.0,
                omega_r: 0.0,
                theta_t: n.q[3],
            };
        };
        let t = t.clamp(0.0, self.t_end);
        let seg = self
            .segments
            .iter()
            .find(|s| t < s.t0 + s.dt)
            .unwrap_or(last);
        let tau = (t - seg.t0).clamp(0.0, seg.dt);
        let v: Vec<(f64, f64)> = seg.channels.iter().map(|c| c.eval(tau)).collect();
        let w = tau / seg.dt;
        PlanSample {
            mode: seg.mode,
            s: v[0].0,
            s_dot: v[0].1,
            theta_f: v[1].0,
            theta_r: v[2].0,
            omega_f: v[1].1,
            omega_r: v[2].1,
            theta_t: seg.theta_t.0 + w * (seg.theta_t.1 - seg.theta_t.0),
        }
    }

    /// `t,mode,s_d,s_t,theta_f,theta_r,theta_t` rows at spacing `dt`.
    pub fn to_csv(&self, dt: f64, offset: f64) -> String {
        let mut out = String::from("t,mode,s_d,s_t,theta_f,theta_r,theta_t\n");
        let n = (self.t_end / dt).ceil() as usize;
        for k in 0..=n {
            let t = (k as f64 * dt).min(self.t_end);
            let p = self.sample_clamped(t);
            let (sd, st) = if p.mode.is_driving() {
                (format!("{:.6}", p.s), String::new())
            } else {
                (String::new(), format!("{:.6}", p.s))
            };
            out.push_str(&format!(
                "{:.4},{},{},{},{:.6},{:.6},{:.6}\n",
                t + offset,
                p.mode.label(),
                sd,
                st,
                p.theta_f,
                p.theta_r,
                p.theta_t
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::Direction;

    fn node(mode: Mode, s: f64, v: f64) -> TrajNode {
        TrajNode { mode, q: [s, 0.1 * s, -0.2 * s, s], qdot: [v, 0.3, -0.1] }
    }

    #[test]
    fn symmetric_unit_segment() {
        let h = Hermite { p0: 0.0, p1: 1.0, v0: 0.0, v1: 0.0, dt: 1.0 };
        assert_eq!(h.eval(0.5).0, 0.5);
        let peak = (0..=1000).map(|k| h.eval(k as f64 / 1000.0).1).fold(0.0f64, f64::max);
        assert!((peak - 1.5).abs() < 1e-12);
        assert_eq!(h.eval(0.5).1, 1.5);
        let h2 = Hermite { dt: 2.0, ..h };
        assert_eq!(h2.eval(1.0).1, 1.5 / 2.0);
    }

    #[test]
    fn nodes_reproduced() {
        let tr = Mode::Traversing { node: 1, dir: Direction::Ascending };
        let nodes = [node(Mode::Driving, 1.0, -0.2), node(Mode::Driving, 0.4, -0.3), node(tr, 0.1, 0.2), node(tr, 0.5, 0.1)];
        let p = hermite_trajectory(&nodes, &[1.5, 0.0, 0.8]).unwrap();
        assert_eq!(p.t_switch, Some(1.5));
        assert!((p.t_end - 2.3).abs() < 1e-15);
        let check = |t: f64, n: &TrajNode| {
            let s = p.sample(t).unwrap();
            assert!((s.s - n.q[0]).abs() < 1e-12 && (s.s_dot - n.qdot[0]).abs() < 1e-12);
            assert!((s.theta_f - n.q[1]).abs() < 1e-12 && (s.omega_f - n.qdot[1]).abs() < 1e-12);
            assert!((s.theta_r - n.q[2]).abs() < 1e-12 && (s.omega_r - n.qdot[2]).abs() < 1e-12);
        };
        check(0.0, &nodes[0]);
        check(1.5, &nodes[2]);
        check(2.3, &nodes[3]);
        assert!(p.sample(1.5 - 1e-9).unwrap().mode.is_driving());
        assert!(!p.sample(1.5).unwrap().mode.is_driving());
        assert!(matches!(p.sample(3.0), Err(PlanError::OutOfRange { .. })));
    }

    #[test]
    fn zero_duration_within_mode() {
        let nodes = [node(Mode::Driving, 1.0, 0.0), node(Mode::Driving, 0.5, 0.0)];
        assert_eq!(hermite_trajectory(&nodes, &[0.0]), Err(PlanError::ZeroDuration(0)));
    }

    #[test]
    fn csv_has_header() {
        let nodes = [node(Mode::Driving, 1.0, 0.0), node(Mode::Driving, 0.5, 0.0)];
        let p = hermite_trajectory(&nodes, &[1.0]).unwrap();
        let csv = p.to_csv(0.25, 0.0);
        assert!(csv.starts_with("t,mode,s_d,s_t"));
        assert_eq!(csv.lines().count(), 6);
    }
}
