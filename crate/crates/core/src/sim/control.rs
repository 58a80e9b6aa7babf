use serde::{Deserialize, Serialize};

use crate::robot::RobotParams;
use crate::sequence::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Command {
    /// Forward track speed, m/s.
    pub v: f64,
    pub omega_f: f64,
    pub omega_r: f64,
}

impl Command {
    pub fn clamped(&self, p: &RobotParams) -> Self {
        Self {
            v: self.v.clamp(0.0, p.v_u),
            omega_f: self.omega_f.clamp(p.omega_l, p.omega_u),
            omega_r: self.omega_r.clamp(p.omega_l, p.omega_u),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerGains {
    pub kp_theta: f64,
    pub kd_theta: f64,
    pub kp_s: f64,
    pub ki_s: f64,
    /// Bound on the integral contribution, m/s.
    pub integrator_clamp: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self { kp_theta: 6.0, kd_theta: 0.5, kp_s: 1.0, ki_s: 0.2, integrator_clamp: 0.2 }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<(), String> {
        let g = [self.kp_theta, self.kd_theta, self.kp_s, self.ki_s];
        if g.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err("controller gains must be finite and nonnegative".into());
        }
        if !(self.integrator_clamp > 0.0) {
            return Err("integrator clamp must be positive".into());
        }
        Ok(())
    }
}

/// Track speed implied by a progress rate: `s_d` shrinks while driving.
pub fn nominal_velocity(s_dot: f64, mode: Mode) -> f64 {
    if mode.is_driving() {
        -s_dot
    } else {
        s_dot
    }
}

/// Flipper rate from the angle and rate errors (physical angles).
pub fn flipper_pd(
    theta_ref: f64,
    omega_ref: f64,
    theta_meas: f64,
    omega_meas: f64,
    gains: &ControllerGains,
    params: &RobotParams,
) -> f64 {
    let w = gains.kp_theta * (theta_ref - theta_meas) + gains.kd_theta * (omega_ref - omega_meas);
    w.clamp(params.omega_l, params.omega_u)
}

/// Feed-forward speed plus PI feedback on `e_s = planned - measured`. The
/// error is negated while driving, where lagging means a larger `s_d`.
/// `integral` is the running integral of the signed error.
pub fn velocity_command(
    v_des: f64,
    e_s: f64,
    integral: &mut f64,
    gains: &ControllerGains,
    mode: Mode,
    dt: f64,
    params: &RobotParams,
) -> f64 {
    let e = if mode.is_driving() { -e_s } else { e_s };
    *integral += e * dt;
    if gains.ki_s > 0.0 {
        let lim = gains.integrator_clamp / gains.ki_s;
        *integral = integral.clamp(-lim, lim);
    }
    (v_des + gains.kp_s * e + gains.ki_s * *integral).clamp(0.0, params.v_u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::Direction;

    const TR: Mode = Mode::Traversing { node: 1, dir: Direction::Ascending };

    #[test]
    fn nominal_velocity_sign_rule() {
        assert_eq!(nominal_velocity(-0.3, Mode::Driving), 0.3);
        assert_eq!(nominal_velocity(0.2, TR), 0.2);
        assert_eq!(nominal_velocity(0.0, Mode::Driving), 0.0);
    }

    #[test]
    fn pd_examples() {
        let p = RobotParams::default();
        let g = ControllerGains { kp_theta: 5.0, kd_theta: 0.0, ..Default::default() };
        assert_eq!(flipper_pd(0.3, 0.1, 0.3, 0.1, &g, &p), 0.0);
        assert!((flipper_pd(0.1, 0.0, 0.0, 0.0, &g, &p) - 0.5).abs() < 1e-12);
        assert_eq!(flipper_pd(10.0, 0.0, 0.0, 0.0, &g, &p), p.omega_u);
    }

    #[test]
    fn velocity_examples() {
        let p = RobotParams::default();
        let g = ControllerGains { kp_s: 1.0, ki_s: 0.0, ..Default::default() };
        let mut i = 0.0;
        assert_eq!(velocity_command(0.3, 0.0, &mut i, &g, Mode::Driving, 0.01, &p), 0.3);
        // measured s_d exceeds the plan by 0.1: the robot lags
        let v = velocity_command(0.3, -0.1, &mut i, &g, Mode::Driving, 0.01, &p);
        assert!((v - 0.4).abs() < 1e-12);
        assert_eq!(velocity_command(0.45, 0.2, &mut i, &g, TR, 0.01, &p), p.v_u);
    }

    #[test]
    fn integrator_is_clamped() {
        let p = RobotParams::default();
        let g = ControllerGains::default();
        let mut i = 0.0;
        for _ in 0..10_000 {
            velocity_command(0.0, 1.0, &mut i, &g, TR, 0.01, &p);
        }
        assert!((g.ki_s * i - g.integrator_clamp).abs() < 1e-12);
    }
}
