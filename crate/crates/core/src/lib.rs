//! Long-term adaptive hybrid beamforming for massive phased arrays under
//! per-antenna power constraints.
//!
//! The crate designs the M×L beamforming matrix of a macro-cell base station
//! serving clustered users ("hotspots") split into L sections. It provides
//!
//! * a line-of-sight channel model and random scenario generator ([`channel`]),
//! * the weighted sum-log utility, its gradient and beam patterns ([`objective`]),
//! * the exact projection onto the per-antenna power set ([`projection`]),
//! * sub-beam composition heuristics ([`composition`]),
//! * the semidefinite relaxation upper bound with randomized rounding ([`sdr`]),
//! * gradient projection with the Armijo rule ([`gradproj`]),
//! * a Monte-Carlo harness reproducing the comparison experiments ([`harness`]).

pub mod channel;
pub mod composition;
pub mod error;
pub mod gradproj;
pub mod harness;
pub mod linalg;
pub mod methods;
pub mod objective;
pub mod projection;
pub mod sdr;
pub mod seed;

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type CVector = nalgebra::DVector<C64>;
pub type CMatrix = nalgebra::DMatrix<C64>;

pub use channel::{ArrayGeometry, ChannelSet, Hotspot, Scenario, ScenarioParams};
pub use error::{HybfError, Result};
pub use objective::{BeamMatrix, UtilityReport};
