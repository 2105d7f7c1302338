//! Extreme learning machines with graph-Laplacian smoothness regularization.
//!
//! The library trains single-hidden-layer networks whose vector outputs live
//! on the nodes of a weighted graph. Three interchangeable solvers produce
//! the output weights: plain ridge regression, a dense Kronecker system that
//! serves as the reference, and a per-eigenvalue solver that avoids the
//! Kronecker blowup. A spectral-shrinkage path exposes the same fit as a
//! diagonal filter over the joint hidden/graph eigenbasis, and an experiment
//! harness reproduces Monte-Carlo comparisons end to end from a seed.

pub mod data;
pub mod experiment;
pub mod graph;
pub mod model;
pub mod seeding;
pub mod spectral;

pub use data::{
    add_noise, load_coordinates, load_signal_matrix, save_signal_matrix, split_dataset,
    synth_smooth_signals, DataError, Dataset, DatasetManifest, SplitIndices,
};
pub use experiment::{
    default_grid, grid_search, nmse_db, random_geometric_graph, run_experiment, run_trial,
    write_curves_csv, write_results_csv, write_trials_csv, CellResult, CellSpec, DataSource,
    ExperimentConfig, ExperimentError, ExperimentResult, GridSearchOutcome, MethodSummary,
    MethodTrial, SolverChoice, TrialOutcome, TrialRecord, DEFAULT_VALIDATION_FRACTION,
    NMSE_FLOOR_DB,
};
pub use graph::{
    build_geodesic_graph, great_circle_km, laplacian, laplacian_eigendecomposition, smoothness,
    GeoPoint, Graph, GraphError, LaplacianEigen, LaplacianView, EARTH_RADIUS_KM,
};
pub use model::{
    activation_eval, elmg_cost, elmg_gradient, hidden_matrix, train_elm, train_elmg_dense,
    train_elmg_dense_with_cap, train_elmg_fast, ActivationKind, ElmModel, HiddenLayer, Hyperparams,
    ModelError, ModelRecord, TrainingMatrices, DEFAULT_DENSE_CAP,
};
pub use seeding::derive_seed;
pub use spectral::{
    hidden_svd, shrinkage_coefficients, smoothing_report, training_fit_spectral,
    write_smoothing_csv, HiddenSvd, ShrinkageSpectrum, SmoothingRow, SpectralError,
};
