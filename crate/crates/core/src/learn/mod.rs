//! Tree-ensemble learners, model selection, evaluation and model files.

mod dataset;
mod ensemble;
mod eval;
mod model_io;
mod search;
mod tree;

pub use dataset::{split_train_test, ClassSet, Dataset, DatasetSplit, FeatureMatrix, PacketDataset, PacketRows};
pub use ensemble::{argmax, fit, fit_traced, EnsembleModel, HyperParams, ModelKind, Predictions, RowPrediction};
pub use eval::{evaluate, r_squared, EvalReport};
pub use model_io::{load_model, model_from_json, model_to_json, save_model, MODEL_FORMAT_VERSION};
pub use search::{cross_drone_eval, grid_search, CrossDroneMatrix, GridSearchResult, DEFAULT_FOLDS};
pub use tree::{Node, Tree};
