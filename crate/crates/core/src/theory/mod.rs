//! Closed-form and quadrature content of the model: parameters, exponents,
//! regime classification, limit constants, characteristic functions and
//! covariances.

pub mod chf;
pub mod constants;
pub mod covariance;
pub mod exponents;
pub mod params;
pub mod regime;

pub use chf::{field_log_chf, psi, workload_log_chf};
pub use constants::*;
pub use covariance::{angular_b, covariance_exact, lrd_classify, Dependence, LrdClass};
pub use exponents::{critical_exponents, h_minus, h_plus, reflect_params, CriticalExponents};
pub use params::{ModelParams, Usage};
pub use regime::{
    classify_field_regime, classify_field_regime_exact, classify_workload_regime, classify_workload_regime_exact,
    FieldFamily, FieldLimit, FieldRegime, RateRegime, Rational, WorkloadConstants, WorkloadFamily, WorkloadRegime,
};
