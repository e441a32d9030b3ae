//! Filtered quasiprobability distributions for deciding whether a
//! single-mode optical process is nonclassical.

pub mod error;
pub mod estimator;
pub mod filters;
pub mod homodyne;
pub mod numeric;
pub mod predictor;
pub mod processes;
pub mod quasiprob;
pub mod recipe;
pub mod special;
pub mod states;

pub use error::{Error, Result};
pub use estimator::{sample_nqd, sample_nqd_eta_removed, sample_pnqd, PnqdTable};
pub use filters::FilterSpec;
pub use homodyne::{simulate_dataset, QuadratureDataset};
pub use predictor::{parseval_output_nqd, predict_output_nqd, InputPSpec};
pub use processes::ProcessModel;
pub use quasiprob::{nqd_direct, pnqd_direct, GridLayout, QuasiprobGrid};
pub use recipe::{run_recipe, Experiment, RecipeConfig};
pub use states::StateModel;
