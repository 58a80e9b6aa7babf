use std::f64::consts::FRAC_PI_2;

use super::{ModelError, RobotParams, TraversingState};
use crate::geom::Vec2;

/// Configurations closer than this to a pole of one of the half-angle
/// tangents are rejected.
pub const TAN_POLE_MARGIN: f64 = 5.0 * std::f64::consts::PI / 180.0;

/// Angle between the flipper axis and its bottom tangent caused by the
/// gear radius difference: `asin((R - r) / l0)`.
pub fn gear_offset_angle(params: &RobotParams) -> Result<f64, ModelError> {
    let ratio = (params.gear_large - params.gear_small) / params.l0;
    if !(0.0..1.0).contains(&ratio) || !ratio.is_finite() {
        return Err(ModelError::Domain(format!("(R - r) / l0 = {ratio} outside [0, 1)")));
    }
    Ok(ratio.asin())
}

/// Model lengths and angles of the three-rod bottom outline at one
/// configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveGeometry {
    pub lf_eff: f64,
    pub lr_eff: f64,
    pub lt_eff: f64,
    /// Model flipper angles `theta + delta`.
    pub thf_eff: f64,
    pub thr_eff: f64,
    pub delta: f64,
    /// Fold extensions at the large gears.
    pub li_f: f64,
    pub li_r: f64,
    /// Extensions at the flipper tips.
    pub lo_f: f64,
    pub lo_r: f64,
    /// Physical track length, kept for placing the body centre.
    pub l_t: f64,
}

fn checked_half_tan(angle: f64, which: &'static str) -> Result<f64, ModelError> {
    let half = angle / 2.0;
    if !half.is_finite() || half.abs() > FRAC_PI_2 - TAN_POLE_MARGIN {
        return Err(ModelError::Singular { which, margin_deg: TAN_POLE_MARGIN.to_degrees() });
    }
    Ok(half.tan())
}

/// Effective lengths for physical flipper angles `theta_f`, `theta_r`,
/// pitch `theta_t` and inclinations `alpha_f`, `alpha_r` of the terrain under
/// each flipper.
///
/// The fold extension `R tan(θ̃/2)` is signed: a flipper rotated below the
/// track line shortens the outline instead of extending it.
pub fn effective_geometry(
    params: &RobotParams,
    theta_f: f64,
    theta_r: f64,
    theta_t: f64,
    alpha_f: f64,
    alpha_r: f64,
) -> Result<EffectiveGeometry, ModelError> {
    let delta = gear_offset_angle(params)?;
    let thf = theta_f + delta;
    let thr = theta_r + delta;
    let (big, small) = (params.gear_large, params.gear_small);
    let li_f = big * checked_half_tan(thf, "front fold")?;
    let li_r = big * checked_half_tan(thr, "rear fold")?;
    let lo_f = (small * checked_half_tan(thf - (theta_t + alpha_f), "front tip")?).max(0.0);
    let lo_r = (small * checked_half_tan(thr + (theta_t + alpha_r), "rear tip")?).max(0.0);
    let base = params.l0 * delta.cos();
    let g = EffectiveGeometry {
        lf_eff: base + li_f + lo_f,
        lr_eff: base + li_r + lo_r,
        lt_eff: params.l_t + li_f + li_r,
        thf_eff: thf,
        thr_eff: thr,
        delta,
        li_f,
        li_r,
        lo_f,
        lo_r,
        l_t: params.l_t,
    };
    if !(g.lf_eff > 0.0 && g.lr_eff > 0.0 && g.lt_eff > 0.0) {
        return Err(ModelError::Domain("non-positive effective length".into()));
    }
    Ok(g)
}

impl EffectiveGeometry {
    /// Total outline length from front tip to rear tip.
    pub fn l_sigma(&self) -> f64 {
        self.lf_eff + self.lt_eff + self.lr_eff
    }

    /// The same robot seen driving backwards: front and rear swapped.
    pub fn dual(&self) -> Self {
        Self {
            lf_eff: self.lr_eff,
            lr_eff: self.lf_eff,
            thf_eff: self.thr_eff,
            thr_eff: self.thf_eff,
            li_f: self.li_r,
            li_r: self.li_f,
            lo_f: self.lo_r,
            lo_r: self.lo_f,
            ..*self
        }
    }

    /// Outline vertices in the body frame for the given model flipper
    /// angles. The body origin sits at the centre of the physical track,
    /// `gear_large` above its bottom line.
    pub fn outline(&self, params: &RobotParams, thf: f64, thr: f64) -> BodyOutline {
        let z = -params.gear_large;
        let fj = Vec2::new(self.l_t / 2.0 + self.li_f, z);
        let rj = Vec2::new(-(self.l_t / 2.0 + self.li_r), z);
        let ft = fj + Vec2::new(thf.cos(), thf.sin()) * self.lf_eff;
        let rt = rj + Vec2::new(-thr.cos(), thr.sin()) * self.lr_eff;
        let com = Vec2::new(self.l_t / 2.0 - params.d_com, 0.0);
        BodyOutline { vertices: [ft, fj, rj, rt], arcs: self.arcs(), com }
    }

    /// Arc-length positions of the four outline vertices.
    pub fn arcs(&self) -> [f64; 4] {
        [0.0, self.lf_eff, self.lf_eff + self.lt_eff, self.l_sigma()]
    }
}

/// Body-frame bottom outline: front tip, front joint, rear joint, rear tip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyOutline {
    pub vertices: [Vec2; 4],
    pub arcs: [f64; 4],
    pub com: Vec2,
}

impl BodyOutline {
    /// Point at arc length `s` from the front tip (clamped to the outline).
    pub fn point_at(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.arcs[3]);
        for k in 0..3 {
            let (a0, a1) = (self.arcs[k], self.arcs[k + 1]);
            if s <= a1 || k == 2 {
                let t = if a1 > a0 { (s - a0) / (a1 - a0) } else { 0.0 };
                return self.vertices[k] + (self.vertices[k + 1] - self.vertices[k]) * t;
            }
        }
        unreachable!()
    }

    /// Vertices transformed to the world frame.
    pub fn to_world(&self, center: Vec2, pitch: f64) -> [Vec2; 4] {
        self.vertices.map(|v| center + v.rotate(pitch))
    }
}

/// Dual traversing configuration `(l_Σ - s_t, θ_r, θ_f)`; the pitch is
/// mirrored as well. Pair with [`EffectiveGeometry::dual`].
pub fn dual_traversing(state: &TraversingState, geom: &EffectiveGeometry) -> TraversingState {
    TraversingState {
        s_t: geom.l_sigma() - state.s_t,
        theta_f: state.theta_r,
        theta_r: state.theta_f,
        theta_t: -state.theta_t,
    }
}

/// Generalised coordinate of the centre of mass on the outline.
///
/// Derived from the COM definition: the physical track front lies `li_f`
/// behind the front joint, and the COM lies `d_com` behind that.
pub fn com_coordinate(params: &RobotParams, geom: &EffectiveGeometry) -> f64 {
    geom.lf_eff + geom.li_f + params.d_com
}
