use serde::Serialize;

use super::AppError;
use crate::sequence::Mode;
use crate::sim::LogRow;

/// Replan wall-time summary, ms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Latency {
    pub count: usize,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

impl Latency {
    pub fn of(ms: &[f64]) -> Self {
        if ms.is_empty() {
            return Self::default();
        }
        let mut v = ms.to_vec();
        v.sort_by(f64::total_cmp);
        // nearest-rank percentiles
        let rank = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Self { count: v.len(), median: rank(0.5), p95: rank(0.95), max: v[v.len() - 1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    /// From the first commanded motion to the last logged tick, s.
    pub total_time: f64,
    pub max_abs_pitch_deg: f64,
    pub max_abs_pitch_rate_deg_s: f64,
    /// Accumulated absolute flipper rotation, front plus rear, deg.
    pub rotation_angle_deg: f64,
    pub max_z_accel: f64,
    /// Body-centre displacement between the first and last tick, m.
    pub net_progress: f64,
    pub replan_ms: Vec<f64>,
    pub latency: Latency,
}

impl MetricsReport {
    /// Report of a run that never ticked, e.g. when the first plan failed.
    pub fn empty(replan_ms: &[f64]) -> Self {
        Self {
            total_time: 0.0,
            max_abs_pitch_deg: 0.0,
            max_abs_pitch_rate_deg_s: 0.0,
            rotation_angle_deg: 0.0,
            max_z_accel: 0.0,
            net_progress: 0.0,
            replan_ms: replan_ms.to_vec(),
            latency: Latency::of(replan_ms),
        }
    }
}

/// Metrics over an episode log with a uniform tick.
pub fn compute_metrics(rows: &[LogRow], replan_ms: &[f64]) -> Result<MetricsReport, AppError> {
    let (first, last) = match (rows.first(), rows.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(AppError::EmptyLog),
    };
    let t0 = rows.iter().find(|r| r.v_cmd > 0.0).map_or(last.t, |r| r.t);
    let max_abs = |f: &dyn Fn(&LogRow) -> f64| rows.iter().map(|r| f(r).abs()).fold(0.0, f64::max);
    let rate = rows
        .windows(3)
        .map(|w| ((w[2].theta_t - w[0].theta_t) / (w[2].t - w[0].t)).abs())
        .fold(0.0, f64::max);
    let rotation: f64 =
        rows.windows(2).map(|w| (w[1].theta_f - w[0].theta_f).abs() + (w[1].theta_r - w[0].theta_r).abs()).sum();
    Ok(MetricsReport {
        total_time: last.t - t0,
        max_abs_pitch_deg: max_abs(&|r| r.theta_t).to_degrees(),
        max_abs_pitch_rate_deg_s: rate.to_degrees(),
        rotation_angle_deg: rotation.to_degrees(),
        max_z_accel: max_abs(&|r| r.ddz),
        net_progress: last.x - first.x,
        replan_ms: replan_ms.to_vec(),
        latency: Latency::of(replan_ms),
    })
}

/// Reads rows written by `EpisodeLog::to_csv`.
pub fn parse_episode_csv(text: &str) -> Result<Vec<LogRow>, AppError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(AppError::EmptyLog)?;
    if header.split(',').count() != 12 {
        return Err(AppError::Csv(format!("unexpected header {header:?}")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let bad = |m: String| AppError::Csv(format!("line {}: {m}", i + 2));
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 12 {
                return Err(bad(format!("{} fields", f.len())));
            }
            let mode = Mode::from_label(f[1]).ok_or_else(|| bad(format!("mode {:?}", f[1])))?;
            let mut v = [0.0; 12];
            for (k, s) in f.iter().enumerate() {
                if k != 1 {
                    v[k] = s.parse().map_err(|e| bad(format!("{s:?}: {e}")))?;
                }
            }
            Ok(LogRow {
                t: v[0],
                mode,
                x: v[2],
                z: v[3],
                theta_t: v[4],
                theta_f: v[5],
                theta_r: v[6],
                s_coord: v[7],
                v_cmd: v[8],
                omega_f_cmd: v[9],
                omega_r_cmd: v[10],
                ddz: v[11],
            })
        })
        .collect()
}
