//! Record linkage of two files without shared identifiers.
//!
//! True values of the partially identifying variables (PIVs) and the one-to-one linkage
//! between records are latent. Parameters are fitted by Stochastic EM with a Gibbs E-step;
//! link probabilities then come from posterior sampling at the fitted parameters.

pub mod config;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod gibbs;
pub mod independence;
pub mod ingest;
pub mod io;
pub mod kernels;
pub mod mstep;
pub mod pipeline;
pub mod posterior;
pub mod rng;
pub mod scalar;
pub mod simulate;
pub mod soundex;
pub mod stem;

pub use data::LinkageData;
pub use error::{Error, Result};
pub use gibbs::{LatentState, SufficientStats};
pub use ingest::{PivSpec, RecordTable};
pub use kernels::ModelParams;
pub use posterior::{LinkSet, LinkagePosterior};
pub use scalar::Scalar;
pub use stem::{FitResult, ParameterTrace, StemConfig};

pub type ModelParams64 = ModelParams<f64>;
pub type ModelParams32 = ModelParams<f32>;
pub type LinkagePosterior64 = LinkagePosterior<f64>;
pub type LinkagePosterior32 = LinkagePosterior<f32>;
pub type SufficientStats64 = SufficientStats<f64>;
pub type FitResult64 = FitResult<f64>;
