//! Co-design toolkit for pruned binary-search ADC front ends of tiny
//! power-of-two MLP classifiers.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below pin the common choices.

pub mod adc;
pub mod area;
pub mod config;
pub mod dataset;
pub mod error;
pub mod explorer;
pub mod mlp;
pub mod nsga2;
pub mod report;
pub mod scalar;

pub use adc::{AdcKind, LevelMask, PrunedAdc, ThresholdTree};
pub use area::{AreaReport, CostTable};
pub use config::ExperimentConfig;
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use explorer::ParetoPoint;
pub use nsga2::{Chromosome, GaConfig};
pub use scalar::Scalar;

pub type Mlp64 = mlp::Mlp<f64>;
pub type Mlp32 = mlp::Mlp<f32>;
pub type QuantizedMlp64 = mlp::QuantizedMlp<f64>;
pub type QuantizedMlp32 = mlp::QuantizedMlp<f32>;
pub type TrainedModel64 = mlp::TrainedModel<f64>;
pub type TrainedModel32 = mlp::TrainedModel<f32>;
pub type Quantized64 = adc::Quantized<f64>;
pub type Quantized32 = adc::Quantized<f32>;
