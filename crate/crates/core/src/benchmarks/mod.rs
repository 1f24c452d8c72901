//! Pre-registered benchmark forecasts and EMOS post-processing.

mod crps;
mod emos;
mod empirical;
pub mod simplex;

pub use crps::crps_closed_form;
pub use emos::{
    emos_fit, emos_forecast, emos_predict, EmosError, EmosFamily, EmosFit, EmosParams, FitSettings,
    TrainingPair, MIN_TRAINING_PAIRS, VARIANCE_FLOOR,
};
pub use empirical::{
    dax_benchmark, empirical_quantiles, raw_ensemble_benchmark, BenchmarkError, RollingWindowConfig,
};
