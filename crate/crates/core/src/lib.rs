//! Risk-based prediction of individualized treatment benefit in randomized
//! trials, with a simulation harness for comparing benefit models.

pub mod glm;
pub mod harness;
pub mod metrics;
pub mod models;
mod linalg;
pub mod scalar;
pub mod scenario;
pub mod spline;

pub use scalar::Scalar;

pub type LogisticFitF64 = glm::LogisticFit<f64>;
pub type LogisticFitF32 = glm::LogisticFit<f32>;
pub type BenefitModelF64 = models::BenefitModel<f64>;
pub type BenefitModelF32 = models::BenefitModel<f32>;
