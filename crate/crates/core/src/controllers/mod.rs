//! Control laws.
//!
//! Every law is a pure function of a measurement snapshot and the current
//! graph. Sums run over `𝒩_i` including the self-loop; for the relative laws
//! the self term vanishes and is skipped.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::so3::So3Error;

pub mod dynamic;
pub mod formation;
pub mod kinematic;

pub use dynamic::*;
pub use formation::*;
pub use kinematic::*;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("agent {agent} has no measurement for neighbor {neighbor}")]
    MissingNeighbor { agent: usize, neighbor: usize },
    #[error("measured transform of agent {0} is singular")]
    SingularMeasurement(usize),
    #[error("invalid dynamic parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    So3(#[from] So3Error),
}

/// Which quantity a law produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LawFamily {
    /// A full twist from the 4×4 laws.
    Twist,
    AngularVelocity,
    LinearVelocity,
    Torque,
    Force,
}

/// Law tags as written in configuration files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LawKind {
    #[serde(rename = "first_abs")]
    FirstAbsolute,
    #[serde(rename = "first_rel")]
    FirstRelative,
    #[serde(rename = "rot_abs")]
    RotAbsolute,
    #[serde(rename = "rot_rel")]
    RotRelative,
    #[serde(rename = "rot_fl")]
    RotFeedbackLinearized,
    #[serde(rename = "trans_abs")]
    TransAbsolute,
    #[serde(rename = "trans_rel")]
    TransRelative,
    #[serde(rename = "torque_abs")]
    TorqueAbsolute,
    #[serde(rename = "torque_rel")]
    TorqueRelative,
    #[serde(rename = "force")]
    Force,
}

impl LawKind {
    pub const ALL: [LawKind; 10] = [
        LawKind::FirstAbsolute,
        LawKind::FirstRelative,
        LawKind::RotAbsolute,
        LawKind::RotRelative,
        LawKind::RotFeedbackLinearized,
        LawKind::TransAbsolute,
        LawKind::TransRelative,
        LawKind::TorqueAbsolute,
        LawKind::TorqueRelative,
        LawKind::Force,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LawKind::FirstAbsolute => "first_abs",
            LawKind::FirstRelative => "first_rel",
            LawKind::RotAbsolute => "rot_abs",
            LawKind::RotRelative => "rot_rel",
            LawKind::RotFeedbackLinearized => "rot_fl",
            LawKind::TransAbsolute => "trans_abs",
            LawKind::TransRelative => "trans_rel",
            LawKind::TorqueAbsolute => "torque_abs",
            LawKind::TorqueRelative => "torque_rel",
            LawKind::Force => "force",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.name() == name)
    }

    pub fn family(self) -> LawFamily {
        match self {
            LawKind::FirstAbsolute | LawKind::FirstRelative => LawFamily::Twist,
            LawKind::RotAbsolute | LawKind::RotRelative | LawKind::RotFeedbackLinearized => {
                LawFamily::AngularVelocity
            }
            LawKind::TransAbsolute | LawKind::TransRelative => LawFamily::LinearVelocity,
            LawKind::TorqueAbsolute | LawKind::TorqueRelative => LawFamily::Torque,
            LawKind::Force => LawFamily::Force,
        }
    }

    pub fn is_kinematic(self) -> bool {
        matches!(
            self.family(),
            LawFamily::Twist | LawFamily::AngularVelocity | LawFamily::LinearVelocity
        )
    }

    /// Uses only information independent of the world frame.
    pub fn is_relative(self) -> bool {
        matches!(
            self,
            LawKind::FirstRelative
                | LawKind::RotRelative
                | LawKind::TransRelative
                | LawKind::TorqueRelative
        )
    }
}

impl std::fmt::Display for LawKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
