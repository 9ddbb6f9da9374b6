//! Residual variance estimation in nonparametric regression without
//! estimating the mean function.
//!
//! The crate is organised around four layers:
//!
//! * [`estimators`]: difference-based estimators computed from data
//!   (Rice, lag-regression least squares, Müller–Stadtmüller, and the pairwise
//!   estimator for general domains), confidence intervals and a kurtosis
//!   estimate.
//! * [`quadratic`]: the banded matrices `D` and `M` that express those
//!   estimators as quadratic forms `yᵀAy / tr(A)`, plus exact finite-sample
//!   moments of any such form.
//! * [`analytics`]: closed-form asymptotic quantities (trend functional,
//!   lag covariances, asymptotic MSE, optimal bandwidth) and checks of the
//!   coefficient identities the asymptotics rest on.
//! * [`simulation`]: a seeded, order-independent Monte Carlo engine.
//!
//! [`io`] holds the CSV/JSON formats shared with the command-line tool.

pub mod analytics;
pub mod error;
pub mod estimators;
pub mod io;
pub mod quadratic;
pub mod sample;
pub mod simulation;

pub use error::{Error, Result};
pub use estimators::{
    compute_lag_stats, confidence_interval, estimate_gamma4, general_domain, muller_stadtmuller,
    rice, tong_wang, Bandwidth, ConfidenceInterval, DenominatorMode, LagStats, LsMethod, Method,
    RegressionFit, VarianceEstimate,
};
pub use quadratic::{
    build_ms_matrix, build_tw_matrix, chi_square_df, exact_mse, quad_form, traces, BandedSymmetric,
    ExactMoments, MsCoefficients, Traces, TwCoefficients,
};
pub use sample::{NoiseMoments, Sample1D};
