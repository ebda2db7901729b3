//! Weaning-outcome prediction from irregularly sampled respiratory and
//! cardiac series: wrangling, non-uniform DFT spectrograms, spectral
//! features, rank-test selection, weighted SVMs tuned by Bayesian
//! optimization, and repeated cross-validation.

pub mod bayesopt;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod nudft;
pub mod pipeline;
pub mod rng;
pub mod select;
pub mod series;
pub mod stats;
pub mod svm;

pub use dataset::{Dataset, Label};
pub use error::{Error, Result};
pub use eval::{CvConfig, EvalReport};
pub use features::{FeatureVector, FrameFeatures};
pub use io::Stamp;
pub use nudft::{FrequencyGrid, SpectrogramConfig, SpectrogramFrame, Spectrum};
pub use pipeline::{PatientRecord, RunConfig};
pub use select::{RankTestResult, SelectionResult};
pub use series::{NonUniformSeries, SignalKind, WrangleConfig};
pub use svm::{KernelKind, KernelSpec, TrainedModel};
