//! Two-timescale optimization for a rotatable-IRS-assisted downlink served by
//! a movable, rotatable BS antenna array.

// `!(x >= 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamforming;
pub mod channel;
pub mod de;
pub mod error;
pub mod harness;
pub mod multi_user;
pub mod rng;
pub mod sdp;
pub mod single_user;
pub mod stats;

pub use channel::{
    ArraySurfaceConfig, CMatrix, CVector, InstantaneousChannels, IrsLayout, LinkStatistics, NodeGeometry,
    RadioContext, ReflectionVector, Regions, StatisticalCsi,
};
pub use error::{Error, Result};
