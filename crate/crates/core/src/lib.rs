//! Consensus and formation control of rigid bodies on SE(3) under switching
//! directed topologies.
//!
//! The crate is organised bottom-up:
//!
//! * [`so3`] and [`se3`] hold the group math,
//! * [`topology`] holds digraphs and switching schedules,
//! * [`controllers`] implements the kinematic, torque and force laws,
//! * [`simulator`] integrates closed loops and runs Monte-Carlo sweeps,
//! * [`analysis`] turns traces into consensus metrics and certificates,
//! * [`io`] writes traces and reports.

pub mod analysis;
pub mod controllers;
pub mod io;
pub mod se3;
pub mod simulator;
pub mod so3;
pub mod topology;
