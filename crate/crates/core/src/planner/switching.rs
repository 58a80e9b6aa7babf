//! Configuration and motion continuity across a mode switch.
//!
//! Traversing states are `[s_t, theta_f, theta_r, theta_t]`. For a
//! drive-to-traverse switch into a descent, `theta_t` is the pitch relative
//! to the terrain being left; everywhere else it is the traversal frame's.

use serde::{Deserialize, Serialize};

use crate::sequence::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SwitchKind {
    DriveToTraverse(Direction),
    TraverseToDrive(Direction),
}

/// Lengths entering the switch relations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchGeometry {
    pub lf: f64,
    pub lt: f64,
    /// Driving distance from the crossed support to the next target.
    pub length: f64,
    /// Relative inclination of the next terrain (ascending exit only).
    pub alpha: f64,
}

/// Value with gradients over `s_d` and the traversing state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchResidual {
    pub value: f64,
    pub d_drive: f64,
    pub d_trav: [f64; 4],
}

/// Gap between the driving coordinate and the one implied by the
/// traversing state; zero when both describe the same pose.
pub fn switching_config_residual(kind: SwitchKind, s_d: f64, q: &[f64; 4], g: &SwitchGeometry) -> SwitchResidual {
    let [s, thf, thr, tht] = *q;
    match kind {
        SwitchKind::DriveToTraverse(Direction::Ascending) => SwitchResidual {
            value: (g.lf - s) * thf.cos() - s_d,
            d_drive: -1.0,
            d_trav: [-thf.cos(), -(g.lf - s) * thf.sin(), 0.0, 0.0],
        },
        SwitchKind::DriveToTraverse(Direction::Descending) => SwitchResidual {
            value: (g.lf - s) * tht.cos() - s_d,
            d_drive: -1.0,
            d_trav: [-tht.cos(), 0.0, 0.0, -(g.lf - s) * tht.sin()],
        },
        SwitchKind::TraverseToDrive(Direction::Ascending) => {
            let a = tht - g.alpha;
            SwitchResidual {
                value: s_d - g.length + (s - g.lf) * a.cos(),
                d_drive: 1.0,
                d_trav: [a.cos(), 0.0, 0.0, -(s - g.lf) * a.sin()],
            }
        }
        SwitchKind::TraverseToDrive(Direction::Descending) => {
            let lever = s - g.lf - g.lt;
            SwitchResidual {
                value: s_d - g.length + g.lt + lever * thr.cos(),
                d_drive: 1.0,
                d_trav: [thr.cos(), 0.0, -lever * thr.sin(), 0.0],
            }
        }
    }
}

/// Value with gradients over `(s_dot_d, s_dot_t)` and the traversing state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionResidual {
    pub value: f64,
    pub d_rates: [f64; 2],
    pub d_trav: [f64; 4],
}

/// Post-switch progress rate minus the projected pre-switch rate; must not
/// be positive (speed may be lost at a switch, never gained).
pub fn switching_motion_residual(kind: SwitchKind, sdot_d: f64, sdot_t: f64, q: &[f64; 4], g: &SwitchGeometry) -> MotionResidual {
    let [_, thf, thr, tht] = *q;
    match kind {
        SwitchKind::DriveToTraverse(Direction::Ascending) => MotionResidual {
            value: sdot_t + sdot_d * thf.cos(),
            d_rates: [thf.cos(), 1.0],
            d_trav: [0.0, -sdot_d * thf.sin(), 0.0, 0.0],
        },
        SwitchKind::DriveToTraverse(Direction::Descending) => MotionResidual {
            value: sdot_t + sdot_d * tht.cos(),
            d_rates: [tht.cos(), 1.0],
            d_trav: [0.0, 0.0, 0.0, -sdot_d * tht.sin()],
        },
        SwitchKind::TraverseToDrive(Direction::Ascending) => {
            let a = tht - g.alpha;
            MotionResidual {
                value: -sdot_d - sdot_t * a.cos(),
                d_rates: [-1.0, -a.cos()],
                d_trav: [0.0, 0.0, 0.0, sdot_t * a.sin()],
            }
        }
        SwitchKind::TraverseToDrive(Direction::Descending) => MotionResidual {
            value: -sdot_d - sdot_t * thr.cos(),
            d_rates: [-1.0, -thr.cos()],
            d_trav: [0.0, 0.0, sdot_t * thr.sin(), 0.0],
        },
    }
}
