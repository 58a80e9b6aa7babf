//! Small 2D helpers in the longitudinal (distance, height) plane.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub z: f64,
}

impl Vec2 {
    pub const fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }

    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.z * other.z
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.z - self.z * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.z)
    }

    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.z, s * self.x + c * self.z)
    }

    /// Counter-clockwise normal.
    pub fn perp(self) -> Self {
        Self::new(-self.z, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.z + o.z)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.z - o.z)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.z * k)
    }
}

/// An infinite line through `origin` with unit direction `dir`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub origin: Vec2,
    pub dir: Vec2,
}

impl Line {
    pub fn through(a: Vec2, b: Vec2) -> Self {
        let d = b - a;
        let n = d.norm();
        Self { origin: a, dir: d * (1.0 / n) }
    }

    pub fn with_angle(origin: Vec2, angle: f64) -> Self {
        Self { origin, dir: Vec2::from_angle(angle) }
    }

    /// Signed perpendicular distance, positive on the left (above for a
    /// left-to-right line).
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        self.dir.cross(p - self.origin)
    }

    /// Coordinate of the orthogonal projection of `p` along the line.
    pub fn along(&self, p: Vec2) -> f64 {
        self.dir.dot(p - self.origin)
    }

    pub fn point_at(&self, t: f64) -> Vec2 {
        self.origin + self.dir * t
    }
}

/// Piecewise-linear ground profile `z(x)`, with strictly increasing `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pts: Vec<Vec2>,
}

impl Polyline {
    /// Builds a profile; points with non-increasing `x` are dropped.
    pub fn new(points: impl IntoIterator<Item = Vec2>) -> Self {
        let mut pts: Vec<Vec2> = Vec::new();
        for p in points {
            if pts.last().map_or(true, |l| p.x > l.x) {
                pts.push(p);
            }
        }
        Self { pts }
    }

    pub fn points(&self) -> &[Vec2] {
        &self.pts
    }

    /// Height at `x`, extrapolating flat beyond the ends.
    pub fn height_at(&self, x: f64) -> f64 {
        let pts = &self.pts;
        match pts.len() {
            0 => 0.0,
            1 => pts[0].z,
            _ => {
                if x <= pts[0].x {
                    return pts[0].z;
                }
                if x >= pts[pts.len() - 1].x {
                    return pts[pts.len() - 1].z;
                }
                let i = pts.partition_point(|p| p.x <= x);
                let (a, b) = (pts[i - 1], pts[i]);
                a.z + (b.z - a.z) * (x - a.x) / (b.x - a.x)
            }
        }
    }

    /// Vertices with `lo < x < hi`.
    pub fn vertices_between(&self, lo: f64, hi: f64) -> &[Vec2] {
        let a = self.pts.partition_point(|p| p.x <= lo);
        let b = self.pts.partition_point(|p| p.x < hi);
        if a < b {
            &self.pts[a..b]
        } else {
            &[]
        }
    }
}

/// Vertical clearance of a robot polyline above the ground: the minimum of
/// `robot_z - ground_z` over robot vertices and over ground vertices that
/// lie under a robot edge. Negative means penetration.
pub fn vertical_clearance(robot: &[Vec2], ground: &Polyline) -> f64 {
    vertical_clearance_except(robot, ground, |_| false)
}

/// As [`vertical_clearance`], ignoring robot and ground vertices for which
/// `skip` holds (typically a known contact point).
pub fn vertical_clearance_except(robot: &[Vec2], ground: &Polyline, skip: impl Fn(Vec2) -> bool) -> f64 {
    let mut best = f64::INFINITY;
    for p in robot {
        if !skip(*p) {
            best = best.min(p.z - ground.height_at(p.x));
        }
    }
    for w in robot.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (lo, hi) = if a.x < b.x { (a.x, b.x) } else { (b.x, a.x) };
        if hi - lo < 1e-12 {
            continue;
        }
        for g in ground.vertices_between(lo, hi) {
            if skip(*g) {
                continue;
            }
            let t = (g.x - a.x) / (b.x - a.x);
            let z = a.z + t * (b.z - a.z);
            best = best.min(z - g.z);
        }
    }
    best
}
