//! Cost of face-to-face contact limits: occupation exposure, industry and regional
//! mixes, calibration of the contact cap, and compensating wage subsidies.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the `*64` aliases below
//! are the double-precision instantiations used by the command-line tool.

pub mod calibrate;
pub mod counterfactual;
pub mod error;
pub mod geo;
pub mod industry;
pub mod io;
pub mod lowess;
pub mod model;
pub mod occupation;
pub mod pipeline;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type FirmParams64 = model::FirmParams<f64>;
pub type FirmParams32 = model::FirmParams<f32>;
pub type Intervention64 = model::Intervention<f64>;
pub type OccupationProfile64 = occupation::OccupationProfile<f64>;
pub type IndustryMix64 = industry::IndustryMix<f64>;
pub type RegionCell64 = geo::RegionCell<f64>;
pub type ModelCell64 = calibrate::ModelCell<f64>;
pub type CalibratedModel64 = calibrate::CalibratedModel<f64>;
pub type SubsidyResult64 = counterfactual::SubsidyResult<f64>;
