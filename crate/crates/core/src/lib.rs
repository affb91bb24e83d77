//! Fingerprint positioning over an extended reference fingerprint map.
//!
//! A raw survey ([`model::RawRfm`]) is turned into an [`model::ExtendedRfm`] by
//! [`builder::build`]: a spatial median filter, Gaussian kernel smoothing and a
//! per-feature robust spread estimate. [`positioner::iterate_locate`] then runs
//! a kNN search whose feature weights follow the local variability, moving the
//! estimate until it converges, loops or hits the iteration cap.
//!
//! ```
//! use rfmpos::prelude::*;
//!
//! let env = SyntheticEnvironment::generate(7, &EnvironmentParams::default()).unwrap();
//! let plan = SurveyPlan { seed: 8, n_passes: 1, ..Default::default() };
//! let (raw, test) = generate_dataset(&env, &plan).unwrap();
//! let rfm = build(&raw, &BuilderConfig::default()).unwrap();
//! let est = iterate_locate(&test[0], &rfm, &PositioningConfig::default()).unwrap();
//! assert!(rfm.bounding_box().unwrap().expand(1.0).contains(&est.location));
//! ```

pub mod builder;
pub mod cli;
pub mod dissim;
pub mod error;
pub mod eval;
mod index;
pub mod io;
pub mod model;
pub mod positioner;
pub mod synth;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::builder::{build, BuilderConfig, SpreadEstimator};
    pub use crate::dissim::{mji, softmax_weights, weighted_cdm, WeightVector};
    pub use crate::error::{Error, Result};
    pub use crate::eval::{circular_error, compare_report, ecdf, radial_errors, tf_stats, Report};
    pub use crate::model::{
        ExtendedRfm, FeatureId, Fingerprint, InitMode, Location, PositionEstimate, PositioningConfig, RawRfm, Rect,
        RfmEntry, TerminationFlag, WeightForm,
    };
    pub use crate::positioner::{iterate_locate, knn_locate};
    pub use crate::synth::{generate_dataset, EnvironmentParams, SurveyPlan, SyntheticEnvironment};
}
