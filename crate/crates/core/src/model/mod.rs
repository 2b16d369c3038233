//! System model: affine matrix families, parameter points, box domains and
//! structured perturbation classes.
//!
//! Parameter tuples never store the fixed leading coordinate `z_0 = 1`;
//! stored index `k` (0-based) is parameter `z_{k+1}`.

mod family;
mod point;
mod structure;
mod system;

use alloc::string::String;

pub use family::AffineMatrixFamily;
pub use point::{Axis, BoxDomain, ComplexInterval, Interval, ParameterPoint, Part};
pub(crate) use point::tensor;
pub use structure::{ChannelStructure, DeltaAssignment, PerturbationStructure};
pub use system::{LpvSystem, Recentering};

/// The four system channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Channel {
    A,
    B,
    C,
    D,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::A, Channel::B, Channel::C, Channel::D];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    pub fn error(message: String) -> Self {
        Self {
            severity: Severity::Error,
            message,
        }
    }

    pub fn warning(message: String) -> Self {
        Self {
            severity: Severity::Warning,
            message,
        }
    }
}
