use super::{ProfilePoint, SimplifyConfig};

/// A simplified segment spanning profile indices `s..=e` (0-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub s: usize,
    pub e: usize,
    /// Number of points inside the `delta_l` band.
    pub pn: usize,
    pub sparsity: f64,
}

/// Signed distance of `p` from the chord `a -> b`; positive above.
pub fn chord_distance(a: ProfilePoint, b: ProfilePoint, p: ProfilePoint) -> f64 {
    let (ux, uz) = (b.d - a.d, b.h - a.h);
    let (vx, vz) = (p.d - a.d, p.h - a.h);
    (ux * vz - uz * vx) / ux.hypot(uz)
}

/// Whether the chord between `s` and `e` is an admissible simplified terrain.
///
/// Only points above the chord count as deviation: the robot rests on the
/// highest points, so gaps underneath (stair treads) are tolerated. The
/// points that do lie on the plane must be dense enough to support the
/// track.
pub fn covers(s: usize, e: usize, points: &[ProfilePoint], cfg: &SimplifyConfig) -> bool {
    assert!(s < e && e < points.len());
    let (a, b) = (points[s], points[e]);
    let mut last_in = a.d;
    for p in &points[s + 1..e] {
        let dist = chord_distance(a, b, *p);
        if dist > cfg.delta_m {
            return false;
        }
        if dist.abs() <= cfg.delta_l {
            if p.d - last_in > cfg.max_gap {
                return false;
            }
            last_in = p.d;
        }
    }
    b.d - last_in <= cfg.max_gap
}

/// Points of `s..=e` within the `delta_l` band around the chord.
pub fn within_count(s: usize, e: usize, points: &[ProfilePoint], cfg: &SimplifyConfig) -> usize {
    let (a, b) = (points[s], points[e]);
    2 + points[s + 1..e]
        .iter()
        .filter(|p| chord_distance(a, b, **p).abs() <= cfg.delta_l)
        .count()
}

pub fn sparsity(s: usize, e: usize, points: &[ProfilePoint], cfg: &SimplifyConfig) -> f64 {
    let pn = within_count(s, e, points, cfg) as f64;
    let slots = (points[e].d - points[s].d) / cfg.d_r + 1.0;
    (1.0 - pn / slots).clamp(0.0, 1.0)
}

/// All admissible chords, ordered by start then end index.
pub fn candidate_segments(points: &[ProfilePoint], cfg: &SimplifyConfig) -> Vec<Candidate> {
    let mut out = Vec::new();
    for s in 0..points.len() {
        for e in s + 1..points.len() {
            if covers(s, e, points, cfg) {
                out.push(Candidate {
                    s,
                    e,
                    pn: within_count(s, e, points, cfg),
                    sparsity: sparsity(s, e, points, cfg),
                });
            }
        }
    }
    out
}
