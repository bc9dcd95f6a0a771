//! Pool-based active learning: pool bookkeeping, uncertainty selection, the
//! train → select → label → retrain loop and the simulated benchmark.

mod curve;
mod experiment;
mod pool;
mod round;
mod selection;
mod synth;

pub use curve::{curves_to_csv, write_curves_csv, CurvePoint, CurveSeed, LearningCurve, CSV_HEADER};
pub use experiment::{
    initial_labeled_draw, run_experiment, EmbeddingKind, ExperimentConfig, ExperimentData, ExperimentResult,
    SettingSpec, DEFAULT_SELF_TRAINED_DIM,
};
pub use pool::{LabeledDoc, Labels, Pool, PoolCounts};
pub use round::{evaluate_models, run_round, train_task_models, LabelingMode, Round, RoundContext, TaskModels};
pub use selection::{
    random_sample, select_batch, select_with, top_k_uncertain, uncertainty_score, ModelScorer, RandomSampling,
    SelectionContext, SelectionStrategy, Strategy, StrategyKind, UncertaintySampling,
};
pub use synth::{generate_synthetic_corpus, SyntheticCorpus, SyntheticSpec};
