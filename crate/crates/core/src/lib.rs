//! Nonparametric conditional quantile estimation for twice-censored data.
//!
//! The estimators work from a sample of `(Y, X, δ)` observations and local
//! kernel weights. Two quantile estimators are provided: simultaneous
//! isotonization and inversion of the plug-in distribution estimate, and plain
//! inversion of the estimate built from rearranged weights. Both are
//! monotone in the level, so estimated quantile curves never cross.
//!
//! ```
//! use tcquant::{estimate, quantile, Delta, Estimator, Observation, TailPolicy, WeightVector};
//!
//! let sample: Vec<Observation> = [1.0, 2.0, 3.0]
//!     .iter()
//!     .map(|&y| Observation::scalar(y, 0.0, Delta::Uncensored))
//!     .collect();
//! let f = estimate(&sample, &WeightVector::uniform(3), Estimator::Ip, TailPolicy::Undefined).unwrap();
//! assert_eq!(quantile(&f, 0.5).unwrap().value, Some(2.0));
//! ```

pub mod bandwidth;
pub mod beran;
pub mod error;
pub mod io;
pub mod kernel;
pub mod mc;
pub mod rearrange;
pub mod selftest;
pub mod simulate;
pub mod stepfun;
pub mod twice_censored;

pub use bandwidth::{check_loss, cv_bandwidth, CvConfig, CvReport};
pub use beran::{beran_estimate, nelson_aalen, reverse_time_crosscheck, RightCensoredObservation};
pub use error::{Error, Result};
pub use kernel::{ll_weights, local_weights, nw_weights, KernelKind, KernelSpec, WeightFamily, WeightVector};
pub use mc::{run_mc, BandwidthChoice, McConfig, McResult};
pub use rearrange::{clamp01, phi_tilde, psi_tilde, rearranged_weights, RearrangeDomain};
pub use simulate::{gen_model1, gen_model2, true_quantile, Model, Model2Params, SimSample};
pub use stepfun::{product_limit, ratio_measure, DenominatorMode, Direction, SignedMeasure, StepFunction};
pub use twice_censored::{
    estimate, estimate_fl, estimate_ft, estimate_ft_ip, quantile, quantile_ip, quantile_psi, subdist, Delta,
    DistributionEstimate, Estimator, Observation, QuantileResult, SubdistSet, TailPolicy,
};
