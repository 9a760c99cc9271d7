#![allow(clippy::needless_range_loop)]

//! Semi-supervised CP tensor factorization for fake-news detection on
//! social engagement data.
//!
//! The pipeline: parse engagement/link/label files into a dataset bundle,
//! degree-filter the social graph, build a binary (post, follower, followee)
//! tensor, then jointly factorize it with a label-regression term so the
//! post factor matrix doubles as a classifier input. Baselines (k-NN on
//! plain CP embeddings, raw-slice nearest centroid) and seeded experiment
//! drivers make the comparisons reproducible end to end.

pub mod error;
pub mod evaluation;
pub mod factorization;
pub mod ingestion;
pub mod io;
pub mod matrix;
mod parallel;
pub mod seeding;
pub mod synthgen;
pub mod tensor;

pub use error::{Error, Result};
pub use evaluation::{
    compute_metrics, knn_classify, knn_default_k, learning_curve, nearest_centroid_classify,
    predict_classcp, raw_centroid_classify, run_experiment, run_experiment_on_tensor,
    run_experiment_on_tensor_with_jobs, run_experiment_with_jobs, ExperimentConfig,
    ExperimentTable, MetricSummary, Metrics, MetricsRecord, PredictionSet,
};
pub use factorization::{
    fit_class_cp, fit_class_cp_with_jobs, fit_cp, fit_cp_with_jobs, objective_f, objective_g,
    relative_change, update_a, update_b, update_c, update_w, CoeffMatrix, FactorSet, FitConfig,
    FitReport, IterationRecord, LabelBlock,
};
pub use ingestion::{
    build_tensor, filter_min_degree, filter_min_degree_once, make_label_split, make_split,
    parse_bundle, DatasetBundle, EngagementTable, SocialGraph, SplitPlan, CLASS_FAKE, CLASS_REAL,
};
pub use matrix::{gram_solve, gram_solve_left, khatri_rao, DenseMatrix};
pub use seeding::{derive_seed, rng_from_seed, stream, unit_f64};
pub use synthgen::{generate_exact, generate_planted, planted_bundle, CommunityProbs, SynthSpec};
pub use tensor::{matricize, mttkrp, SparseMatrix, SparseTensor3};
