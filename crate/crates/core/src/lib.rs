//! Next-location prediction for an entity observed on irregular days.
//!
//! The crate is `no_std` (it needs `alloc`) and carries only numerics:
//!
//! * [`density`]: Gaussian kernels, exponential time weights and the
//!   full-history weighted kernel density, all represented as explicit
//!   [`GaussianMixture`]s.
//! * [`likelihood`]: the exact conditional density of the next location when
//!   some past days are unobserved, in tuple-enumeration and matrix forms,
//!   plus the renormalized observed-only baseline.
//! * [`prior`]: the rule-based expert map over a [`Grid`] built from forest
//!   cover, camp proximity, an extended hull of recent sightings and
//!   informant reports.
//! * [`particles`] and [`sequential`]: the particle filter over the decay and
//!   bandwidth parameters, with an analytically carried expert marker.
//! * [`predict`]: grid predictive densities and the RAM / AUPC metrics.
//! * [`sim`]: synthetic tracks, missingness injection and the full vs.
//!   partial likelihood study.
//!
//! File formats, configuration and the command line live in the `gangtrack`
//! crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod math;

pub mod density;
pub mod error;
pub mod geo;
pub mod grid;
pub mod hull;
pub mod likelihood;
pub mod params;
pub mod particles;
pub mod predict;
pub mod prior;
pub mod quadrature;
pub mod sequential;
pub mod sim;
pub mod stats;
pub mod track;

pub use density::{full_conditional, kernel2, mixture_eval, weight, GaussianMixture, MixtureComponent};
pub use error::{Error, Result};
pub use geo::{dist_km, BoundingBox, GeoPoint, KmScale};
pub use grid::Grid;
pub use likelihood::{LikelihoodCoefficients, LikelihoodModel, MissingPattern};
pub use params::{ModelParams, ParamBox};
pub use particles::{EvaluationPoints, ParticleSet, PosteriorSummary};
pub use prior::{ExpertPrior, ForestRaster, IntelInput, PriorThresholds};
pub use track::{History, Track};
