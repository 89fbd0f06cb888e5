//! Dynamic MRI reconstruction from undersampled k-space by a bi-linear
//! factorization `X ≈ U Λ̌ B`, where `Λ̌` is a compressed embedding of
//! navigator landmarks learned by sparse affine self-expression.
//!
//! The usual flow is [`pipeline::prepare`] followed by
//! [`recovery::run_bilmdm`]; [`pipeline::run_pipeline`] does both and writes
//! artifacts.

pub mod embedding;
pub mod error;
pub mod inner;
pub mod io;
pub mod landmarks;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod recovery;
pub mod sampling;
pub mod transforms;

pub use error::{Error, Result};
pub use metrics::MetricsReport;
pub use pipeline::{run_pipeline, PipelineConfig, PipelineReport};
pub use recovery::{run_bilmdm, RecoveryConfig, RecoveryResult};
pub use transforms::{ImageSequence, KSpaceSequence, SamplingMask, C64};
