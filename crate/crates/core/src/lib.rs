//! Planar terrain-traversal planning for articulated tracked robots.
//!
//! The crate is organised as a pipeline:
//!
//! * [`terrain`] turns a sampled height profile into a short sequence of
//!   line segments by solving a shortest-path cover problem.
//! * [`robot`] holds the planar robot model with its angle-dependent
//!   effective lengths, the reduced driving/traversing states and pose
//!   reconstruction.
//! * [`sequence`] encodes the hybrid modes and the key-node constraints a
//!   traversal has to pass through.
//! * [`nlp`] is a small dense augmented-Lagrangian solver.
//! * [`planner`] transcribes the hybrid problem into an NLP, solves it in a
//!   receding horizon and interpolates the result.
//! * [`sim`] is a kinematic contact simulator with the tracking controller.
//! * [`app`] wires everything into scenarios, metrics and ablations.

pub mod app;
pub mod nlp;
pub mod planner;
pub mod robot;
pub mod sequence;
pub mod sim;
pub mod terrain;

pub mod geom;
