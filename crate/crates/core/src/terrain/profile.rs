use serde::{Deserialize, Serialize};

use super::{ProfilePoint, TerrainError};

/// Dense 2.5D grid; `data[row * width + col]` is the height of the cell whose
/// centre is `origin + (col, row) * resolution`. NaN marks unknown cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Heightmap {
    pub origin: (f64, f64),
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Heightmap {
    pub fn from_fn(
        origin: (f64, f64),
        resolution: f64,
        width: usize,
        height: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                let x = origin.0 + col as f64 * resolution;
                let y = origin.1 + row as f64 * resolution;
                data.push(f(x, y));
            }
        }
        Self { origin, resolution, width, height, data }
    }

    fn cell(&self, x: f64, y: f64) -> Option<usize> {
        let c = ((x - self.origin.0) / self.resolution).round();
        let r = ((y - self.origin.1) / self.resolution).round();
        if c < 0.0 || r < 0.0 || c as usize >= self.width || r as usize >= self.height {
            return None;
        }
        Some(r as usize * self.width + c as usize)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.cell(x, y).is_some()
    }

    /// Nearest-cell lookup; `None` outside the grid or on unknown cells.
    pub fn at(&self, x: f64, y: f64) -> Option<f64> {
        let v = self.data[self.cell(x, y)?];
        v.is_finite().then_some(v)
    }

    /// Text format: `origin_x origin_y resolution width height` on the first
    /// line, followed by `width * height` whitespace-separated heights in
    /// row-major order.
    pub fn parse(text: &str) -> Result<Self, TerrainError> {
        let bad = |m: String| TerrainError::Io(format!("heightmap: {m}"));
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
        if header.len() != 5 {
            return Err(bad("header needs 5 fields".into()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s}: {e}")));
        let origin = (num(header[0])?, num(header[1])?);
        let resolution = num(header[2])?;
        let width = num(header[3])? as usize;
        let height = num(header[4])? as usize;
        let data: Vec<f64> = lines
            .flat_map(|l| l.split_whitespace())
            .map(|s| if s == "nan" { Ok(f64::NAN) } else { num(s) })
            .collect::<Result<_, _>>()?;
        if data.len() != width * height || !(resolution > 0.0) {
            return Err(bad(format!("expected {} cells, got {}", width * height, data.len())));
        }
        Ok(Self { origin, resolution, width, height, data })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub d_r: f64,
    /// Half-width of the strip sampled across the path.
    pub half_width: f64,
    pub strip_resolution: f64,
    /// Samples further than `mad_k` scaled MADs from the median are dropped.
    pub mad_k: f64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { d_r: 0.02, half_width: 0.2, strip_resolution: 0.05, mad_k: 3.0 }
    }
}

/// Mean of the samples left after a median-absolute-deviation reject.
pub fn robust_mean(values: &mut [f64], k: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let median = |v: &mut [f64]| {
        v.sort_by(|a, b| a.total_cmp(b));
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    };
    let m = median(values);
    let mut dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    let mad = 1.4826 * median(&mut dev);
    let kept: Vec<f64> = values.iter().copied().filter(|v| (v - m).abs() <= k * mad + 1e-12).collect();
    Some(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Walks the reference path at spacing `d_r` and collapses a strip of cells
/// along each normal into one height.
pub fn sample_profile(
    map: &Heightmap,
    path: &[(f64, f64)],
    cfg: &SampleConfig,
) -> Result<Vec<ProfilePoint>, TerrainError> {
    if path.len() < 2 || !(cfg.d_r > 0.0) || !(cfg.half_width >= 0.0) || !(cfg.strip_resolution > 0.0) {
        return Err(TerrainError::Config("path needs 2 waypoints and positive spacings".into()));
    }
    let mut out = Vec::new();
    let mut travelled = 0.0;
    let mut next = 0.0;
    let half = (cfg.half_width / cfg.strip_resolution).floor() as i64;
    for (k, w) in path.windows(2).enumerate() {
        let (dx, dy) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
        let len = dx.hypot(dy);
        if len == 0.0 {
            continue;
        }
        let (tx, ty) = (dx / len, dy / len);
        let last = k + 2 == path.len();
        while next <= travelled + len + if last { 1e-9 } else { -1e-12 } {
            let t = next - travelled;
            let (x, y) = (w[0].0 + tx * t, w[0].1 + ty * t);
            let idx = out.len();
            if !map.contains(x, y) {
                return Err(TerrainError::OutOfMap(idx));
            }
            let mut strip: Vec<f64> = (-half..=half)
                .filter_map(|j| {
                    let o = j as f64 * cfg.strip_resolution;
                    map.at(x - ty * o, y + tx * o)
                })
                .collect();
            let h = robust_mean(&mut strip, cfg.mad_k).ok_or(TerrainError::EmptyStrip(idx))?;
            out.push(ProfilePoint::new(next, h));
            next = (out.len()) as f64 * cfg.d_r;
        }
        travelled += len;
    }
    Ok(out)
}

pub fn read_profile_csv(text: &str) -> Result<Vec<ProfilePoint>, TerrainError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.starts_with(|c: char| c.is_alphabetic())) {
            continue;
        }
        let mut it = line.split(',').map(str::trim);
        let mut field = || {
            it.next()
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| TerrainError::Io(format!("profile line {}: expected d,h", n + 1)))
        };
        let d = field()?;
        let h = field()?;
        out.push(ProfilePoint::new(d, h));
    }
    Ok(out)
}

pub fn write_profile_csv(points: &[ProfilePoint]) -> String {
    let mut s = String::from("d,h\n");
    for p in points {
        s.push_str(&format!("{:.6},{:.6}\n", p.d, p.h));
    }
    s
}
