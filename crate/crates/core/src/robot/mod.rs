//! Planar robot model: parameters, angle-dependent effective lengths,
//! reduced driving/traversing states and pose reconstruction.

mod geometry;
mod params;
mod pose;

pub use geometry::{
    com_coordinate, dual_traversing, effective_geometry, gear_offset_angle, BodyOutline,
    EffectiveGeometry, TAN_POLE_MARGIN,
};
pub use params::RobotParams;
pub use pose::{
    pair_ground, pivot_pose, pose_from_driving, pose_from_traversing, pose_on_line, project_onto_outline,
    DrivingState, PivotFrame, PivotResult,
    PlanarPose, TraversingState,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("configuration within {margin_deg:.1} degrees of a tangent pole ({which})")]
    Singular { which: &'static str, margin_deg: f64 },
    #[error("driving coordinate {s_d:.3} m is outside the segment")]
    OutOfSegment { s_d: f64 },
    #[error("no pose realises both contacts for s_t = {s_t:.4} m")]
    Infeasible { s_t: f64 },
    #[error("cannot read robot parameters: {0}")]
    Config(String),
}
