//! Classic and noise-augmented Boruta feature selection, the learners they
//! rely on (a CART random forest and a small fully connected network), the
//! statistics used to compare selections, and an experiment harness.

pub mod boruta_classic;
pub mod boruta_noise;
pub mod dataset;
pub mod error;
pub mod forest;
pub mod harness;
pub mod hygiene;
pub mod matrix;
pub mod neural;
pub mod seed;
pub mod shadow;
pub mod stats;

pub use boruta_classic::{run_boruta, selected_features, BorutaConfig, Decision, SelectionResult};
pub use boruta_noise::{run_noise_boruta, NoiseBorutaConfig};
pub use dataset::{Dataset, FeatureStats, MissingPolicy, SplitSpec, TargetColumn};
pub use error::{Error, Result};
pub use hygiene::TrainPartition;
pub use matrix::Matrix;
pub use neural::{MlpModel, MlpSpec};
