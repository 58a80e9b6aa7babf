use serde::{Deserialize, Serialize};
use std::path::Path;

use super::ModelError;

/// Physical geometry and motion limits of the robot.
///
/// Angles are radians in memory. The on-disk format (see [`RobotParams::from_toml`])
/// is a flat key/value table in SI units with angles given in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotParams {
    /// Flipper length (front and rear are identical).
    pub l0: f64,
    /// Main track length.
    pub l_t: f64,
    /// Large (joint-side) gear radius.
    pub gear_large: f64,
    /// Small (tip-side) gear radius.
    pub gear_small: f64,
    /// COM distance from the front end of the main track, along the bottom.
    pub d_com: f64,
    pub theta_u: f64,
    pub theta_l: f64,
    /// Upper bound of the nominal longitudinal velocity.
    pub v_u: f64,
    pub omega_l: f64,
    pub omega_u: f64,
}

impl Default for RobotParams {
    /// Repository defaults for a Searcher-sized robot. These are not
    /// published values; override them with a parameter file.
    fn default() -> Self {
        Self {
            l0: 0.4,
            l_t: 0.6,
            gear_large: 0.12,
            gear_small: 0.06,
            d_com: 0.3,
            theta_u: 80f64.to_radians(),
            theta_l: -80f64.to_radians(),
            v_u: 0.5,
            omega_l: -1.0,
            omega_u: 1.0,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotFile {
    l0: f64,
    l_t: f64,
    gear_large: f64,
    gear_small: f64,
    d_com: f64,
    theta_u_deg: f64,
    theta_l_deg: f64,
    v_u: f64,
    omega_l: f64,
    omega_u: f64,
}

impl RobotParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let p = self;
        let fail = |m: &str| Err(ModelError::Domain(m.to_string()));
        let all = [
            p.l0, p.l_t, p.gear_large, p.gear_small, p.d_com, p.theta_u, p.theta_l, p.v_u,
            p.omega_l, p.omega_u,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return fail("non-finite robot parameter");
        }
        if p.l0 <= 0.0 || p.l_t <= 0.0 {
            return fail("lengths must be positive");
        }
        if !(p.gear_large >= p.gear_small && p.gear_small > 0.0) {
            return fail("gear radii must satisfy R >= r > 0");
        }
        if p.gear_large - p.gear_small >= p.l0 {
            return fail("gear difference must be shorter than the flipper");
        }
        if !(0.0..=p.l_t).contains(&p.d_com) {
            return fail("d_com must lie on the main track");
        }
        if !(p.theta_l <= 0.0 && 0.0 <= p.theta_u) {
            return fail("flipper bounds must bracket zero");
        }
        if p.v_u <= 0.0 {
            return fail("v_u must be positive");
        }
        if !(p.omega_l < 0.0 && 0.0 < p.omega_u) {
            return fail("flipper rate bounds must bracket zero");
        }
        Ok(())
    }

    /// Parses the flat TOML parameter format.
    ///
    /// ```toml
    /// l0 = 0.4
    /// l_t = 0.8
    /// gear_large = 0.12
    /// gear_small = 0.06
    /// d_com = 0.4
    /// theta_u_deg = 80.0
    /// theta_l_deg = -80.0
    /// v_u = 0.5
    /// omega_l = -1.0
    /// omega_u = 1.0
    /// ```
    pub fn from_toml(text: &str) -> Result<Self, ModelError> {
        let f: RobotFile = toml::from_str(text).map_err(|e| ModelError::Config(e.to_string()))?;
        let p = Self {
            l0: f.l0,
            l_t: f.l_t,
            gear_large: f.gear_large,
            gear_small: f.gear_small,
            d_com: f.d_com,
            theta_u: f.theta_u_deg.to_radians(),
            theta_l: f.theta_l_deg.to_radians(),
            v_u: f.v_u,
            omega_l: f.omega_l,
            omega_u: f.omega_u,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        let f = RobotFile {
            l0: self.l0,
            l_t: self.l_t,
            gear_large: self.gear_large,
            gear_small: self.gear_small,
            d_com: self.d_com,
            theta_u_deg: self.theta_u.to_degrees(),
            theta_l_deg: self.theta_l.to_degrees(),
            v_u: self.v_u,
            omega_l: self.omega_l,
            omega_u: self.omega_u,
        };
        toml::to_string(&f).expect("flat table serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RobotParams::default().validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let p = RobotParams::default();
        let q = RobotParams::from_toml(&p.to_toml()).unwrap();
        assert!((p.theta_u - q.theta_u).abs() < 1e-12);
        assert_eq!(p.l_t, q.l_t);
    }

    #[test]
    fn rejects_inverted_gears() {
        let p = RobotParams { gear_large: 0.05, gear_small: 0.06, ..Default::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = RobotParams::default().to_toml() + "\nmass = 3.0\n";
        assert!(RobotParams::from_toml(&text).is_err());
    }
}
