use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AppError;
use crate::planner::{CostWeights, PlannerConfig};
use crate::robot::RobotParams;
use crate::sim::{ControllerGains, EpisodeConfig};
use crate::terrain::{read_profile_csv, sample_profile, shapes, Heightmap, ProfilePoint, SampleConfig, SimplifyConfig};

/// Where the height profile comes from. Shapes are sampled at the
/// simplification spacing `d_r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileSource {
    Flat {
        length: f64,
    },
    Platform {
        before: f64,
        height: f64,
        top: f64,
        after: f64,
    },
    /// `steps` are `[rise, run]` pairs; negative rises go down.
    Steps {
        start: f64,
        steps: Vec<[f64; 2]>,
        tail: f64,
    },
    /// `d,h` rows; the path is relative to the scenario file.
    Csv {
        path: PathBuf,
    },
    Heightmap {
        path: PathBuf,
        waypoints: Vec<[f64; 2]>,
        #[serde(default)]
        sampling: SampleConfig,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ablation {
    Time,
    #[serde(alias = "stability")]
    Stab,
    #[serde(alias = "smoothness")]
    Smo,
}

impl Ablation {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "time" => Some(Self::Time),
            "stab" | "stability" => Some(Self::Stab),
            "smo" | "smoothness" => Some(Self::Smo),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Time => "time",
            Self::Stab => "stab",
            Self::Smo => "smo",
        }
    }

    /// Weights with the corresponding cost term switched off.
    pub fn apply(self, w: &CostWeights) -> CostWeights {
        let mut w = *w;
        let k = match self {
            Self::Time => 0,
            Self::Stab => 1,
            Self::Smo => 2,
        };
        w.lambda[k] = 0.0;
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeSection {
    pub dt: f64,
    pub replan_period: f64,
    pub max_time: f64,
    pub arrive_tol: f64,
    pub insertion: bool,
}

impl Default for EpisodeSection {
    fn default() -> Self {
        let e = EpisodeConfig::default();
        Self {
            dt: e.dt,
            replan_period: e.replan_period,
            max_time: e.max_time,
            arrive_tol: e.arrive_tol,
            insertion: e.planner.insertion,
        }
    }
}

/// Perturbation applied when a run is given a seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    /// Uniform height noise amplitude, m.
    pub height: f64,
    /// The start moves forward by up to this much, m.
    pub start: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { height: 0.004, start: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    #[serde(default)]
    robot: Option<PathBuf>,
    /// Front joint distance along the profile at the start, m.
    start: f64,
    goal: f64,
    #[serde(default)]
    start_flippers_deg: [f64; 2],
    #[serde(default)]
    raw_contact: bool,
    #[serde(default)]
    ablate: Option<Ablation>,
    #[serde(default)]
    seed: Option<u64>,
    profile: ProfileSource,
    #[serde(default)]
    simplify: Option<SimplifyConfig>,
    #[serde(default)]
    weights: CostWeights,
    #[serde(default)]
    gains: ControllerGains,
    #[serde(default)]
    episode: EpisodeSection,
    #[serde(default)]
    noise: NoiseSection,
}

/// A loaded scenario; file references are resolved and angles are radians.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub base_dir: PathBuf,
    pub robot: RobotParams,
    pub start: f64,
    pub goal: f64,
    /// Physical flipper angles at the start.
    pub start_flippers: [f64; 2],
    pub raw_contact: bool,
    pub ablate: Option<Ablation>,
    pub seed: Option<u64>,
    pub profile: ProfileSource,
    pub simplify: SimplifyConfig,
    pub weights: CostWeights,
    pub gains: ControllerGains,
    pub episode: EpisodeSection,
    pub noise: NoiseSection,
}

impl Scenario {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, AppError> {
        let f: ScenarioFile = toml::from_str(text).map_err(|e| AppError::Scenario(e.to_string()))?;
        let robot = match &f.robot {
            Some(p) => {
                let path = base_dir.join(p);
                if !path.exists() {
                    return Err(AppError::Scenario(format!("robot file {} not found", path.display())));
                }
                RobotParams::load(&path).map_err(|e| AppError::Scenario(e.to_string()))?
            }
            None => RobotParams::default(),
        };
        let simplify = f.simplify.unwrap_or_else(|| SimplifyConfig::for_track(robot.l_t));
        let s = Self {
            name: f.name,
            base_dir: base_dir.to_path_buf(),
            robot,
            start: f.start,
            goal: f.goal,
            start_flippers: f.start_flippers_deg.map(f64::to_radians),
            raw_contact: f.raw_contact,
            ablate: f.ablate,
            seed: f.seed,
            profile: f.profile,
            simplify,
            weights: f.weights,
            gains: f.gains,
            episode: f.episode,
            noise: f.noise,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), AppError> {
        let bad = |m: String| Err(AppError::Scenario(m));
        if !(self.start.is_finite() && self.goal.is_finite() && self.goal > self.start) {
            return bad(format!("goal {} must lie beyond start {}", self.goal, self.start));
        }
        if self.start_flippers.iter().any(|a| !(self.robot.theta_l..=self.robot.theta_u).contains(a)) {
            return bad("start flipper angles outside the joint limits".into());
        }
        for p in self.file_refs() {
            if !p.exists() {
                return bad(format!("profile file {} not found", p.display()));
            }
        }
        let e = &self.episode;
        if !(e.dt > 0.0 && e.replan_period >= e.dt && e.max_time > 0.0 && e.arrive_tol > 0.0) {
            return bad("episode needs dt > 0, replan_period >= dt, positive max_time and arrive_tol".into());
        }
        if !(self.noise.height >= 0.0 && self.noise.start >= 0.0) {
            return bad("noise amplitudes must be nonnegative".into());
        }
        self.simplify.validate().map_err(|e| AppError::Scenario(e.to_string()))?;
        self.gains.validate().map_err(AppError::Scenario)?;
        self.weights.validate().map_err(|e| AppError::Scenario(e.to_string()))?;
        Ok(())
    }

    fn file_refs(&self) -> Vec<PathBuf> {
        match &self.profile {
            ProfileSource::Csv { path } | ProfileSource::Heightmap { path, .. } => vec![self.base_dir.join(path)],
            _ => Vec::new(),
        }
    }

    /// Episode settings with the scenario's weights, less the ablated term.
    pub fn episode_config(&self, ablate: Option<Ablation>) -> EpisodeConfig {
        let weights = match ablate {
            Some(a) => a.apply(&self.weights),
            None => self.weights,
        };
        let e = &self.episode;
        EpisodeConfig {
            dt: e.dt,
            replan_period: e.replan_period,
            max_time: e.max_time,
            arrive_tol: e.arrive_tol,
            gains: self.gains,
            planner: PlannerConfig { weights, insertion: e.insertion, ..PlannerConfig::default() },
        }
    }

    /// The height profile, before any seeded perturbation.
    pub fn base_profile(&self) -> Result<Vec<ProfilePoint>, AppError> {
        let d_r = self.simplify.d_r;
        let pts = match &self.profile {
            ProfileSource::Flat { length } => shapes::sample(*length, d_r, |_| 0.0),
            ProfileSource::Platform { before, height, top, after } => {
                shapes::platform(*before, *height, *top, *after, d_r)
            }
            ProfileSource::Steps { start, steps, tail } => {
                let steps: Vec<(f64, f64)> = steps.iter().map(|s| (s[0], s[1])).collect();
                shapes::steps(*start, &steps, *tail, d_r)
            }
            ProfileSource::Csv { path } => {
                let path = self.base_dir.join(path);
                let text = std::fs::read_to_string(&path).map_err(|e| AppError::io(&path, e))?;
                read_profile_csv(&text).map_err(AppError::Ingestion)?
            }
            ProfileSource::Heightmap { path, waypoints, sampling } => {
                let path = self.base_dir.join(path);
                let text = std::fs::read_to_string(&path).map_err(|e| AppError::io(&path, e))?;
                let map = Heightmap::parse(&text).map_err(AppError::Ingestion)?;
                let path: Vec<(f64, f64)> = waypoints.iter().map(|w| (w[0], w[1])).collect();
                let cfg = SampleConfig { d_r, ..*sampling };
                sample_profile(&map, &path, &cfg).map_err(AppError::Ingestion)?
            }
        };
        Ok(pts)
    }

    /// Profile and start for one run: a seed adds uniform height noise and
    /// moves the start forward, both reproducibly.
    pub fn realise(&self, seed: Option<u64>) -> Result<(Vec<ProfilePoint>, f64), AppError> {
        let mut pts = self.base_profile()?;
        let Some(seed) = seed else { return Ok((pts, self.start)) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if self.noise.height > 0.0 {
            for p in &mut pts {
                p.h += rng.gen_range(-self.noise.height..=self.noise.height);
            }
        }
        let start = if self.noise.start > 0.0 { self.start + rng.gen_range(0.0..=self.noise.start) } else { self.start };
        Ok((pts, start))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLATFORM: &str = r#"
name = "p"
start = 0.8
goal = 5.0
start_flippers_deg = [10.0, 0.0]

[profile]
source = "platform"
before = 2.0
height = 0.4
top = 1.2
after = 3.0
"#;

    #[test]
    fn parses_and_converts_degrees() {
        let s = Scenario::parse(PLATFORM, Path::new(".")).unwrap();
        assert!((s.start_flippers[0] - 10f64.to_radians()).abs() < 1e-15);
        assert_eq!(s.simplify, SimplifyConfig::for_track(s.robot.l_t));
        let pts = s.base_profile().unwrap();
        assert_eq!(pts.len(), 311);
        assert_eq!(pts.iter().filter(|p| p.h > 0.0).count(), 60);
    }

    #[test]
    fn rejects_goal_behind_start_and_unknown_keys() {
        let t = PLATFORM.replace("goal = 5.0", "goal = 0.5");
        assert!(matches!(Scenario::parse(&t, Path::new(".")), Err(AppError::Scenario(_))));
        let t = PLATFORM.replace("goal = 5.0", "goal = 5.0\nspeed = 3");
        assert!(Scenario::parse(&t, Path::new(".")).is_err());
        let t = PLATFORM.replace("source = \"platform\"", "source = \"csv\"\npath = \"missing.csv\"");
        assert!(Scenario::parse(&t, Path::new(".")).is_err());
    }

    #[test]
    fn seeded_realisation_is_reproducible() {
        let s = Scenario::parse(PLATFORM, Path::new(".")).unwrap();
        let (a, sa) = s.realise(Some(3)).unwrap();
        let (b, sb) = s.realise(Some(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        let (c, _) = s.realise(Some(4)).unwrap();
        assert_ne!(a, c);
        let base = s.base_profile().unwrap();
        assert!(a.iter().zip(&base).all(|(p, q)| (p.h - q.h).abs() <= s.noise.height && p.d == q.d));
        assert!(sa >= s.start && sa <= s.start + s.noise.start);
        assert_eq!(s.realise(None).unwrap(), (base, s.start));
    }

    #[test]
    fn ablation_zeroes_one_weight() {
        let w = CostWeights::default();
        assert_eq!(Ablation::Time.apply(&w).lambda, [0.0, w.lambda[1], w.lambda[2]]);
        assert_eq!(Ablation::parse("stability"), Some(Ablation::Stab));
        assert_eq!(Ablation::parse("x"), None);
    }
}
