pub mod entanglement;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod gates;
pub mod geometry;
pub mod influence;
pub mod linalg;
pub mod membrane;
pub mod recurrence;
pub mod rng;

pub use error::{Error, Result};

/// Guide chapters, compiled as doc-tests.
pub mod guide {
    #[doc = include_str!("../../../book/src/circuits.md")]
    pub mod circuits {}
    #[doc = include_str!("../../../book/src/influence.md")]
    pub mod influence {}
    #[doc = include_str!("../../../book/src/entanglement.md")]
    pub mod entanglement {}
    #[doc = include_str!("../../../book/src/membrane.md")]
    pub mod membrane {}
    #[doc = include_str!("../../../book/src/recurrence.md")]
    pub mod recurrence {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
}
