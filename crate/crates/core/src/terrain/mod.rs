//! Terrain simplification: from a sampled (distance, height) profile to an
//! ordered list of line segments.

mod cover;
mod graph;
mod profile;

pub use cover::{candidate_segments, chord_distance, covers, sparsity, within_count, Candidate};
pub use graph::{build_graph, optimal_coverage, CoverGraph, Edge};
pub use profile::{read_profile_csv, sample_profile, write_profile_csv, Heightmap, SampleConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Line, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TerrainError {
    #[error("profile needs at least two points, got {0}")]
    TooShort(usize),
    #[error("profile distances must be strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("no simplified cover reaches the end of the profile")]
    Disconnected,
    #[error("no valid height samples on the normal at waypoint {0}")]
    EmptyStrip(usize),
    #[error("waypoint {0} leaves the heightmap")]
    OutOfMap(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub d: f64,
    pub h: f64,
}

impl ProfilePoint {
    pub fn new(d: f64, h: f64) -> Self {
        Self { d, h }
    }

    pub fn vec(self) -> Vec2 {
        Vec2::new(self.d, self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimplifyConfig {
    pub d_r: f64,
    pub delta_m: f64,
    pub delta_l: f64,
    pub n_ign: usize,
    pub max_gap: f64,
}

impl Default for SimplifyConfig {
    fn default() -> Self {
        // max_gap is half the default track length
        Self { d_r: 0.02, delta_m: 0.04, delta_l: 0.02, n_ign: 3, max_gap: 0.3 }
    }
}

impl SimplifyConfig {
    pub fn for_track(l_t: f64) -> Self {
        Self { max_gap: l_t / 2.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), TerrainError> {
        let bad = |m: &str| Err(TerrainError::Config(m.into()));
        if !(self.d_r > 0.0) {
            return bad("d_r must be positive");
        }
        if !(self.delta_l >= 0.0 && self.delta_l <= self.delta_m) {
            return bad("need 0 <= delta_l <= delta_m");
        }
        if !(self.max_gap > 0.0) {
            return bad("max_gap must be positive");
        }
        Ok(())
    }
}

/// One simplified planar terrain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerrainSegment {
    pub p_start: ProfilePoint,
    pub p_end: ProfilePoint,
    pub alpha: f64,
    /// Height from this segment's end to the next segment's start; 0 for
    /// the last segment.
    pub h_step: f64,
    pub length: f64,
    pub sparsity: f64,
}

impl TerrainSegment {
    pub fn between(p_start: ProfilePoint, p_end: ProfilePoint) -> Self {
        let (dd, dh) = (p_end.d - p_start.d, p_end.h - p_start.h);
        Self {
            p_start,
            p_end,
            alpha: dh.atan2(dd),
            h_step: 0.0,
            length: dd.hypot(dh),
            sparsity: 0.0,
        }
    }

    pub fn line(&self) -> Line {
        Line::with_angle(self.p_start.vec(), self.alpha)
    }

    pub fn start(&self) -> Vec2 {
        self.p_start.vec()
    }

    pub fn end(&self) -> Vec2 {
        self.p_end.vec()
    }
}

pub type TerrainSequence = Vec<TerrainSegment>;

/// Fills `h_step` from consecutive endpoints.
pub fn link_steps(segments: &mut [TerrainSegment]) {
    let n = segments.len();
    for i in 0..n {
        segments[i].h_step =
            if i + 1 < n { segments[i + 1].p_start.h - segments[i].p_end.h } else { 0.0 };
    }
}

/// Full pipeline on a profile: candidates, graph, shortest path.
pub fn simplify(points: &[ProfilePoint], cfg: &SimplifyConfig) -> Result<TerrainSequence, TerrainError> {
    cfg.validate()?;
    check_profile(points)?;
    let cands = candidate_segments(points, cfg);
    let graph = build_graph(points, &cands, cfg)?;
    optimal_coverage(&graph, points, cfg)
}

pub fn check_profile(points: &[ProfilePoint]) -> Result<(), TerrainError> {
    if points.len() < 2 {
        return Err(TerrainError::TooShort(points.len()));
    }
    for (i, w) in points.windows(2).enumerate() {
        if !(w[1].d > w[0].d) || !w[1].h.is_finite() {
            return Err(TerrainError::NotIncreasing(i + 1));
        }
    }
    Ok(())
}

pub fn write_terrain_csv(segments: &[TerrainSegment]) -> String {
    let mut out = String::from("d_start,h_start,d_end,h_end,alpha,h_step,length,sparsity\n");
    for s in segments {
        out.push_str(&format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            s.p_start.d, s.p_start.h, s.p_end.d, s.p_end.h, s.alpha, s.h_step, s.length, s.sparsity
        ));
    }
    out
}

/// Synthetic profile builders used by the shipped scenarios and tests.
pub mod shapes {
    use super::ProfilePoint;

    /// Samples a piecewise-constant height function at spacing `d_r`.
    pub fn sample(length: f64, d_r: f64, h: impl Fn(f64) -> f64) -> Vec<ProfilePoint> {
        let n = (length / d_r).round() as usize;
        (0..=n).map(|i| {
            let d = i as f64 * d_r;
            ProfilePoint::new(d, h(d))
        })
        .collect()
    }

    /// Flat ground with a rectangular platform.
    pub fn platform(before: f64, height: f64, top: f64, after: f64, d_r: f64) -> Vec<ProfilePoint> {
        sample(before + top + after, d_r, |d| {
            if d > before - 1e-9 && d < before + top - 1e-9 {
                height
            } else {
                0.0
            }
        })
    }

    /// Steps described as (rise, run) pairs starting at `start`; negative
    /// rises go down.
    pub fn steps(start: f64, steps: &[(f64, f64)], tail: f64, d_r: f64) -> Vec<ProfilePoint> {
        let total = start + steps.iter().map(|s| s.1).sum::<f64>() + tail;
        let steps = steps.to_vec();
        sample(total, d_r, move |d| {
            let mut x = start;
            let mut h = 0.0;
            for &(rise, run) in &steps {
                if d < x - 1e-9 {
                    break;
                }
                h += rise;
                x += run;
            }
            h
        })
    }
}
