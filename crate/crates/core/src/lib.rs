pub mod detect;
pub mod pipeline;
pub mod encode;
pub mod error;
pub mod io;
pub mod rng;
pub mod scalar;
pub mod signal;
pub mod snn;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Real;

pub type SignalBuffer64 = signal::SignalBuffer<f64>;
pub type SignalBuffer32 = signal::SignalBuffer<f32>;
pub type CalibrationProfile64 = signal::CalibrationProfile<f64>;
pub type CalibrationProfile32 = signal::CalibrationProfile<f32>;
pub type SnnModel64 = snn::SnnModel<f64>;
pub type SnnModel32 = snn::SnnModel<f32>;
pub type TrainConfig64 = train::TrainConfig<f64>;
pub type TrainConfig32 = train::TrainConfig<f32>;
pub type PipelineConfig64 = pipeline::PipelineConfig<f64>;
pub type PipelineConfig32 = pipeline::PipelineConfig<f32>;
