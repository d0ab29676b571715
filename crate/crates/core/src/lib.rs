//! Time-frequency window-contrastive anomaly detection.

pub mod augment;
pub mod config;
pub mod decompose;
pub mod detect;
pub mod error;
pub mod eval;
pub mod io;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod series;
pub mod spectral;
pub mod synth;

pub use config::PipelineConfig;
pub use detect::ScoreSeries;
pub use error::{Error, Result};
pub use eval::EvalReport;
pub use rng::RngSeed;
pub use scalar::Scalar;
pub use series::{validate_series, Decomposition, Pair, Series, WindowSpec};
pub use spectral::Spectrum;
pub use synth::{AnomalyKind, Benchmark, BenchmarkConfig};

/// Double-precision series; the detector operates on these.
pub type TimeSeries = Series<f64>;
pub type TimeSeries32 = Series<f32>;
pub type DecomposedSeries = Decomposition<f64>;
pub type WindowPair = Pair<f64>;
pub type SpectralVector = Spectrum<f64>;
