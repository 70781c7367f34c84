//! Desk-scale class-incremental learning lab.
//!
//! Train specialist classifiers per class group, then merge them into a
//! single model by distilling both teachers' logits onto a fresh student
//! over unlabeled auxiliary data. Includes the incremental-protocol
//! strategies (finetune, fixed representation, joint-training oracle,
//! consolidation with and without exemplars), the anchor-level detection
//! distillation math, synthetic data generators, and metrics.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod detect;
pub mod distill;
pub mod error;
pub mod incremental;
pub mod metrics;
pub mod nn;
pub mod report;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use nn::{Model, MlpSpec, TrainConfig};
pub use tensor::Matrix;
