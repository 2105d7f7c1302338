//! NMSE metric, exhaustive hyperparameter grid search with a held-out
//! validation fold, and a seeded Monte-Carlo harness that compares plain
//! ridge training against graph-regularized training over (K, N) cells.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    add_noise, split_dataset, split_indices, synth_smooth_signals, DataError, Dataset,
    DatasetManifest,
};
use crate::graph::{
    build_geodesic_graph, laplacian, laplacian_eigendecomposition, GeoPoint, Graph, GraphError,
    LaplacianEigen,
};
use crate::model::{
    hidden_matrix, train_elm, train_elmg_dense, train_elmg_fast, ActivationKind, HiddenLayer,
    Hyperparams, ModelError, TrainingMatrices,
};
use crate::seeding::derive_seed;

/// Exact fits are reported at this floor instead of negative infinity.
pub const NMSE_FLOOR_DB: f64 = -200.0;

/// Fraction of the training fold held out for hyperparameter validation
/// when the fold is large enough.
pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.25;

/// Training folds of at most this many rows use leave-one-out validation
/// instead of a single holdout.
pub const LOO_THRESHOLD: usize = 8;

const SPLIT_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const LAYER_STREAM: u64 = 3;
const FOLD_STREAM: u64 = 4;
const GRAPH_STREAM: u64 = 0x0067_7261_7068;
const POOL_STREAM: u64 = 0x706f_6f6c;

fn cell_trial_stream(cell: usize, trial: usize) -> u64 {
    (1u64 << 63) | ((cell as u64) << 32) | trial as u64
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("predictions are {p_rows}x{p_cols} but truth is {t_rows}x{t_cols}")]
    ShapeMismatch {
        p_rows: usize,
        p_cols: usize,
        t_rows: usize,
        t_cols: usize,
    },
    #[error("cannot compute NMSE against an all-zero truth matrix")]
    ZeroTruth,
    #[error("experiment config: {0}")]
    InvalidConfig(String),
    #[error("cannot hold out validation rows from {rows} training rows; need at least 2")]
    FoldTooSmall { rows: usize },
    #[error("grid search found no feasible (alpha, beta) pair on the validation folds")]
    NoFeasiblePair,
    #[error("trial with seed {seed} failed: {source}")]
    TrialSeed {
        seed: u64,
        source: Box<ExperimentError>,
    },
    #[error(
        "cell K={k}, N={n}: {failed} of {total} trials failed (> 20%); first failure: {first}"
    )]
    TooManyFailures {
        k: usize,
        n: usize,
        failed: usize,
        total: usize,
        first: String,
    },
    #[error("cannot read config {path}: {source}")]
    ReadConfig {
        path: String,
        source: std::io::Error,
    },
    #[error("config {path} is malformed: {source}")]
    MalformedConfig {
        path: String,
        source: serde_json::Error,
    },
    #[error("cannot write results: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl ExperimentError {
    /// True when the failure is numerical (singular systems, infeasible
    /// grids, failed trials) rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            ExperimentError::NoFeasiblePair | ExperimentError::TooManyFailures { .. } => true,
            ExperimentError::TrialSeed { source, .. } => source.is_numerical(),
            ExperimentError::Model(e) => matches!(
                e,
                ModelError::SingularSystem { .. } | ModelError::SingularEigenSystem { .. }
            ),
            _ => false,
        }
    }
}

/// Normalized mean-square error in decibels:
/// `10 log10(|predicted - truth|_F^2 / |truth|_F^2)`, floored at -200 dB.
pub fn nmse_db(predicted: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64, ExperimentError> {
    if predicted.shape() != truth.shape() {
        return Err(ExperimentError::ShapeMismatch {
            p_rows: predicted.nrows(),
            p_cols: predicted.ncols(),
            t_rows: truth.nrows(),
            t_cols: truth.ncols(),
        });
    }
    let energy = truth.norm_squared();
    if energy == 0.0 {
        return Err(ExperimentError::ZeroTruth);
    }
    let residual = (predicted - truth).norm_squared();
    if residual == 0.0 {
        return Ok(NMSE_FLOOR_DB);
    }
    Ok((10.0 * (residual / energy).log10()).max(NMSE_FLOOR_DB))
}

/// Default search grid for both alpha and beta: zero plus eleven decades.
pub fn default_grid() -> Vec<f64> {
    let mut grid = vec![0.0];
    for k in -6..=4 {
        grid.push(10f64.powi(k));
    }
    grid
}

fn default_validation_fraction() -> f64 {
    DEFAULT_VALIDATION_FRACTION
}

/// Which trained solver produces the final graph-regularized weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Dense,
    #[default]
    Fast,
}

/// Where the sample pool comes from: files on disk, or a generated smooth
/// dataset over a random geometric graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Manifest {
        path: String,
    },
    Synthetic {
        nodes: usize,
        pool: usize,
        input_dim: usize,
        tau: f64,
    },
}

/// Full description of one reproducible experiment sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub activation: ActivationKind,
    pub hidden_sizes: Vec<usize>,
    pub train_sizes: Vec<usize>,
    pub snr_db: f64,
    pub trials: usize,
    #[serde(default = "default_grid")]
    pub alpha_grid: Vec<f64>,
    #[serde(default = "default_grid")]
    pub beta_grid: Vec<f64>,
    pub master_seed: u64,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    #[serde(default)]
    pub solver: SolverChoice,
    pub data: DataSource,
}

fn validate_grid(name: &str, grid: &[f64]) -> Result<(), ExperimentError> {
    if grid.is_empty() {
        return Err(ExperimentError::InvalidConfig(format!(
            "{name} grid must not be empty"
        )));
    }
    for &value in grid {
        if !value.is_finite() || value < 0.0 {
            return Err(ExperimentError::InvalidConfig(format!(
                "{name} grid value {value} must be finite and nonnegative"
            )));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let display = path.display().to_string();
        let data = std::fs::read(path).map_err(|source| ExperimentError::ReadConfig {
            path: display.clone(),
            source,
        })?;
        let config: ExperimentConfig =
            serde_json::from_slice(&data).map_err(|source| ExperimentError::MalformedConfig {
                path: display,
                source,
            })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let fail = |msg: String| Err(ExperimentError::InvalidConfig(msg));
        if self.trials == 0 {
            return fail("trial count R must be at least 1".into());
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return fail("hidden_sizes must be non-empty and positive".into());
        }
        if self.train_sizes.is_empty() || self.train_sizes.iter().any(|&n| n < 2) {
            return fail(
                "train_sizes must be non-empty, and each N needs at least 2 rows so a \
                 validation fold can be held out"
                    .into(),
            );
        }
        if !self.snr_db.is_finite() {
            return fail(format!("snr_db = {} must be finite", self.snr_db));
        }
        validate_grid("alpha", &self.alpha_grid)?;
        validate_grid("beta", &self.beta_grid)?;
        if !self.beta_grid.contains(&0.0) {
            return fail("beta grid must contain 0 so the search space covers plain ELM".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return fail(format!(
                "validation_fraction = {} must lie strictly between 0 and 1",
                self.validation_fraction
            ));
        }
        Ok(())
    }
}

/// Winning hyperparameters and the validation score that selected them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSearchOutcome {
    pub hyperparams: Hyperparams,
    pub val_nmse_db: f64,
}

/// One validation fold, prepared so any (alpha, beta) pair scores in
/// O(K·M) via the eigendecomposition of the sub-train Gram matrix: the
/// transformed solve is a componentwise division in that basis.
struct FoldScorer {
    gram_eigenvalues: Vec<f64>,
    projected_rhs: DMatrix<f64>,
    val_in_basis: DMatrix<f64>,
    val_targets: DMatrix<f64>,
}

impl FoldScorer {
    fn new(
        h: &DMatrix<f64>,
        targets: &DMatrix<f64>,
        sub: &[usize],
        val: &[usize],
        eig: &LaplacianEigen,
    ) -> Self {
        let h_sub = select_rows(h, sub);
        let t_sub = select_rows(targets, sub);
        let gram = h_sub.transpose() * &h_sub;
        let se = gram.symmetric_eigen();
        // the Gram matrix is PSD; tiny negative eigenvalues are noise
        let gram_eigenvalues: Vec<f64> = se.eigenvalues.iter().map(|&d| d.max(0.0)).collect();
        let basis = se.eigenvectors;
        let projected_rhs = basis.transpose() * (h_sub.transpose() * t_sub) * eig.eigenvectors();
        let val_in_basis = select_rows(h, val) * &basis;
        let val_targets = select_rows(targets, val);
        FoldScorer {
            gram_eigenvalues,
            projected_rhs,
            val_in_basis,
            val_targets,
        }
    }

    /// Zero denominator means the pair is genuinely singular on this fold
    /// (rank-deficient Gram with alpha = 0).
    fn feasible(&self, alpha: f64) -> bool {
        let min = self
            .gram_eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        min + alpha > 0.0
    }

    /// Residual and truth energies of the validation predictions.
    fn score(&self, eig: &LaplacianEigen, hp: &Hyperparams) -> (f64, f64) {
        let k = self.gram_eigenvalues.len();
        let m = eig.num_nodes();
        let mut scaled = DMatrix::<f64>::zeros(k, m);
        for j in 0..m {
            let scale = 1.0 + hp.beta() * eig.eigenvalues()[j];
            for i in 0..k {
                scaled[(i, j)] =
                    self.projected_rhs[(i, j)] / (scale * self.gram_eigenvalues[i] + hp.alpha());
            }
        }
        let predicted = &self.val_in_basis * scaled * eig.eigenvectors().transpose();
        let residual = (&predicted - &self.val_targets).norm_squared();
        (residual, self.val_targets.norm_squared())
    }
}

fn select_rows(matrix: &DMatrix<f64>, indices: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(indices.len(), matrix.ncols());
    for (row, &index) in indices.iter().enumerate() {
        out.set_row(row, &matrix.row(index));
    }
    out
}

type Fold = (Vec<usize>, Vec<usize>);

fn validation_folds(rows: usize, fraction: f64, seed: u64) -> Result<Vec<Fold>, ExperimentError> {
    if rows < 2 {
        return Err(ExperimentError::FoldTooSmall { rows });
    }
    if rows <= LOO_THRESHOLD {
        return Ok((0..rows)
            .map(|held| {
                let sub: Vec<usize> = (0..rows).filter(|&i| i != held).collect();
                (sub, vec![held])
            })
            .collect());
    }
    let n_val = ((fraction * rows as f64).round() as usize).clamp(1, rows - 1);
    let split = split_indices(rows, rows - n_val, seed)?;
    Ok(vec![(split.train, split.test)])
}

fn sorted_copy(grid: &[f64]) -> Vec<f64> {
    let mut out = grid.to_vec();
    out.sort_by(f64::total_cmp);
    out
}

/// Exhaustive search over every (alpha, beta) pair, scored by validation
/// NMSE pooled across folds. Leave-one-out is used when the training fold
/// has at most [`LOO_THRESHOLD`] rows, otherwise a single holdout of
/// `validation_fraction` rows. Pairs that are singular on some fold
/// (possible only at alpha = 0 with a rank-deficient hidden Gram matrix)
/// are excluded; ties break toward smaller beta, then smaller alpha.
pub fn grid_search(
    train: &Dataset,
    graph: &Graph,
    layer: &HiddenLayer,
    alpha_grid: &[f64],
    beta_grid: &[f64],
    validation_fraction: f64,
    seed: u64,
) -> Result<GridSearchOutcome, ExperimentError> {
    validate_grid("alpha", alpha_grid)?;
    validate_grid("beta", beta_grid)?;
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(ExperimentError::InvalidConfig(format!(
            "validation_fraction = {validation_fraction} must lie strictly between 0 and 1"
        )));
    }
    if train.num_nodes() != graph.num_nodes() {
        return Err(ModelError::GraphSizeMismatch {
            targets: train.num_nodes(),
            graph: graph.num_nodes(),
        }
        .into());
    }

    let eig = laplacian_eigendecomposition(&laplacian(graph))?;
    let h = hidden_matrix(layer, train.inputs())?;
    let folds = validation_folds(train.num_samples(), validation_fraction, seed)?;
    let scorers: Vec<FoldScorer> = folds
        .iter()
        .map(|(sub, val)| FoldScorer::new(&h, train.targets(), sub, val, &eig))
        .collect();

    let alphas = sorted_copy(alpha_grid);
    let betas = sorted_copy(beta_grid);

    let mut best: Option<GridSearchOutcome> = None;
    for &beta in &betas {
        for &alpha in &alphas {
            if !scorers.iter().all(|s| s.feasible(alpha)) {
                continue;
            }
            let hp = Hyperparams::new(alpha, beta)?;
            let mut residual = 0.0;
            let mut energy = 0.0;
            for scorer in &scorers {
                let (r, e) = scorer.score(&eig, &hp);
                residual += r;
                energy += e;
            }
            if energy == 0.0 {
                return Err(ExperimentError::ZeroTruth);
            }
            let score = if residual == 0.0 {
                NMSE_FLOOR_DB
            } else {
                (10.0 * (residual / energy).log10()).max(NMSE_FLOOR_DB)
            };
            let better = match &best {
                None => true,
                Some(current) => score < current.val_nmse_db,
            };
            if better {
                best = Some(GridSearchOutcome {
                    hyperparams: hp,
                    val_nmse_db: score,
                });
            }
        }
    }
    best.ok_or(ExperimentError::NoFeasiblePair)
}

/// One (K, N) configuration cell, shared by all its trials.
#[derive(Debug, Clone, Copy)]
pub struct CellSpec<'a> {
    pub pool: &'a Dataset,
    pub graph: &'a Graph,
    pub activation: ActivationKind,
    pub num_neurons: usize,
    pub n_train: usize,
    pub snr_db: f64,
    pub alpha_grid: &'a [f64],
    pub beta_grid: &'a [f64],
    pub validation_fraction: f64,
    pub solver: SolverChoice,
}

/// Selected hyperparameters and scores for one method within a trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodTrial {
    pub hyperparams: Hyperparams,
    pub val_nmse_db: f64,
    pub test_nmse_db: f64,
}

/// Both methods evaluated on one shared partition, noise draw, and layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub elm: MethodTrial,
    pub elmg: MethodTrial,
}

/// Runs one full trial: partition the pool, inject training noise, draw the
/// hidden layer, grid-search each method on shared validation folds, train
/// final models on the whole noisy training fold, and score test NMSE
/// against the clean test targets.
pub fn run_trial(cell: &CellSpec<'_>, trial_seed: u64) -> Result<TrialOutcome, ExperimentError> {
    run_trial_inner(cell, trial_seed).map_err(|source| ExperimentError::TrialSeed {
        seed: trial_seed,
        source: Box::new(source),
    })
}

fn run_trial_inner(cell: &CellSpec<'_>, trial_seed: u64) -> Result<TrialOutcome, ExperimentError> {
    let (train, test) = split_dataset(
        cell.pool,
        cell.n_train,
        derive_seed(trial_seed, SPLIT_STREAM),
    )?;
    let noisy = add_noise(
        train.targets(),
        cell.snr_db,
        derive_seed(trial_seed, NOISE_STREAM),
    )?;
    let train_noisy = train.with_targets(noisy)?;
    let layer = HiddenLayer::random(
        cell.activation,
        cell.num_neurons,
        cell.pool.input_dim(),
        derive_seed(trial_seed, LAYER_STREAM),
    )?;
    let fold_seed = derive_seed(trial_seed, FOLD_STREAM);

    let elm_search = grid_search(
        &train_noisy,
        cell.graph,
        &layer,
        cell.alpha_grid,
        &[0.0],
        cell.validation_fraction,
        fold_seed,
    )?;
    let elmg_search = grid_search(
        &train_noisy,
        cell.graph,
        &layer,
        cell.alpha_grid,
        cell.beta_grid,
        cell.validation_fraction,
        fold_seed,
    )?;
    // the ridge-only pairs are a subset of the full search space scored on
    // the same folds
    debug_assert!(elmg_search.val_nmse_db <= elm_search.val_nmse_db + 1e-9);

    let tm = TrainingMatrices::from_layer(&layer, train_noisy.inputs(), train_noisy.targets())?;
    let w_elm = train_elm(&tm, elm_search.hyperparams.alpha())?;
    let w_elmg = match cell.solver {
        SolverChoice::Dense => {
            train_elmg_dense(&tm, &laplacian(cell.graph), &elmg_search.hyperparams)?
        }
        SolverChoice::Fast => {
            let eig = laplacian_eigendecomposition(&laplacian(cell.graph))?;
            train_elmg_fast(&tm, &eig, &elmg_search.hyperparams)?
        }
    };

    let h_test = hidden_matrix(&layer, test.inputs())?;
    let truth = test.clean_targets().unwrap_or_else(|| test.targets());
    let elm_test = nmse_db(&(&h_test * &w_elm), truth)?;
    let elmg_test = nmse_db(&(&h_test * &w_elmg), truth)?;

    Ok(TrialOutcome {
        elm: MethodTrial {
            hyperparams: elm_search.hyperparams,
            val_nmse_db: elm_search.val_nmse_db,
            test_nmse_db: elm_test,
        },
        elmg: MethodTrial {
            hyperparams: elmg_search.hyperparams,
            val_nmse_db: elmg_search.val_nmse_db,
            test_nmse_db: elmg_test,
        },
    })
}

/// One trial's outcome together with its index and derived seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub outcome: TrialOutcome,
}

/// Mean and sample standard deviation of test NMSE over aggregated trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSummary {
    pub mean_nmse_db: f64,
    pub std_nmse_db: f64,
    pub trials: usize,
}

fn summarize(values: &[f64]) -> MethodSummary {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    MethodSummary {
        mean_nmse_db: mean,
        std_nmse_db: std,
        trials: n,
    }
}

/// Aggregated results for one (K, N) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub num_neurons: usize,
    pub n_train: usize,
    pub trials: Vec<TrialRecord>,
    pub elm: MethodSummary,
    pub elmg: MethodSummary,
}

/// Everything a sweep produced, in deterministic cell order (hidden sizes
/// outer, train sizes inner).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
}

/// Geodesic graph over `nodes` points drawn uniformly from a 10-by-10
/// degree patch of the globe, deterministic per seed.
pub fn random_geometric_graph(nodes: usize, seed: u64) -> Result<Graph, ExperimentError> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<GeoPoint> = (0..nodes)
        .map(|_| GeoPoint {
            lat: rng.random_range(40.0..50.0),
            lon: rng.random_range(0.0..10.0),
        })
        .collect();
    Ok(build_geodesic_graph(&points)?)
}

/// Loads or generates the sample pool. The returned dataset always carries
/// clean targets (for file data without a clean-target file, the targets
/// themselves are the ground truth; trial noise is injected on top).
fn prepare_data(config: &ExperimentConfig) -> Result<(Dataset, Graph), ExperimentError> {
    match &config.data {
        DataSource::Manifest { path } => {
            let (ds, graph) = DatasetManifest::load_bundle(Path::new(path))?;
            if ds.num_nodes() != graph.num_nodes() {
                return Err(ExperimentError::InvalidConfig(format!(
                    "targets span {} nodes but the adjacency has {}",
                    ds.num_nodes(),
                    graph.num_nodes()
                )));
            }
            let truth = ds
                .clean_targets()
                .cloned()
                .unwrap_or_else(|| ds.targets().clone());
            let pool = Dataset::new(ds.inputs().clone(), truth.clone(), Some(truth))?;
            Ok((pool, graph))
        }
        DataSource::Synthetic {
            nodes,
            pool,
            input_dim,
            tau,
        } => {
            let graph =
                random_geometric_graph(*nodes, derive_seed(config.master_seed, GRAPH_STREAM))?;
            let dataset = synth_smooth_signals(
                &graph,
                *pool,
                *input_dim,
                *tau,
                derive_seed(config.master_seed, POOL_STREAM),
            )?;
            Ok((dataset, graph))
        }
    }
}

/// Runs the full sweep: R trials per (K, N) cell with decorrelated seeds
/// derived from the master seed. Trials run concurrently; aggregation is
/// ordered by trial index, so results are deterministic. A cell with more
/// than 20% failed trials aborts the sweep.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    config.validate()?;
    let (pool, graph) = prepare_data(config)?;
    if let Some(&max_n) = config.train_sizes.iter().max() {
        if max_n >= pool.num_samples() {
            return Err(ExperimentError::InvalidConfig(format!(
                "largest train size {max_n} does not leave test rows in a pool of {}",
                pool.num_samples()
            )));
        }
    }

    let mut cells = Vec::new();
    let mut cell_index = 0usize;
    for &k in &config.hidden_sizes {
        for &n in &config.train_sizes {
            let spec = CellSpec {
                pool: &pool,
                graph: &graph,
                activation: config.activation,
                num_neurons: k,
                n_train: n,
                snr_db: config.snr_db,
                alpha_grid: &config.alpha_grid,
                beta_grid: &config.beta_grid,
                validation_fraction: config.validation_fraction,
                solver: config.solver,
            };
            let seeds: Vec<u64> = (0..config.trials)
                .map(|t| derive_seed(config.master_seed, cell_trial_stream(cell_index, t)))
                .collect();
            let outcomes: Vec<Result<TrialOutcome, ExperimentError>> = seeds
                .par_iter()
                .map(|&seed| run_trial(&spec, seed))
                .collect();

            let failed = outcomes.iter().filter(|o| o.is_err()).count();
            if failed * 5 > config.trials {
                let first = outcomes
                    .iter()
                    .find_map(|o| o.as_ref().err())
                    .map(|e| e.to_string())
                    .unwrap_or_default();
                return Err(ExperimentError::TooManyFailures {
                    k,
                    n,
                    failed,
                    total: config.trials,
                    first,
                });
            }

            let trials: Vec<TrialRecord> = outcomes
                .into_iter()
                .enumerate()
                .filter_map(|(trial, outcome)| {
                    outcome.ok().map(|outcome| TrialRecord {
                        trial,
                        seed: seeds[trial],
                        outcome,
                    })
                })
                .collect();
            let elm_scores: Vec<f64> = trials.iter().map(|r| r.outcome.elm.test_nmse_db).collect();
            let elmg_scores: Vec<f64> =
                trials.iter().map(|r| r.outcome.elmg.test_nmse_db).collect();
            cells.push(CellResult {
                num_neurons: k,
                n_train: n,
                elm: summarize(&elm_scores),
                elmg: summarize(&elmg_scores),
                trials,
            });
            cell_index += 1;
        }
    }
    Ok(ExperimentResult {
        config: config.clone(),
        cells,
    })
}

/// Summary table, one row per (cell, method):
/// `activation,K,N,method,mean_nmse_db,std_nmse_db,R`.
pub fn write_results_csv<W: Write>(
    result: &ExperimentResult,
    mut out: W,
) -> Result<(), ExperimentError> {
    writeln!(out, "activation,K,N,method,mean_nmse_db,std_nmse_db,R")?;
    let activation = result.config.activation;
    for cell in &result.cells {
        for (method, summary) in [("elm", &cell.elm), ("elmg", &cell.elmg)] {
            writeln!(
                out,
                "{activation},{},{},{method},{},{},{}",
                cell.num_neurons,
                cell.n_train,
                summary.mean_nmse_db,
                summary.std_nmse_db,
                summary.trials
            )?;
        }
    }
    Ok(())
}

/// Long-format table for NMSE-versus-N curves:
/// `activation,K,method,N,mean_nmse_db`.
pub fn write_curves_csv<W: Write>(
    result: &ExperimentResult,
    mut out: W,
) -> Result<(), ExperimentError> {
    writeln!(out, "activation,K,method,N,mean_nmse_db")?;
    let activation = result.config.activation;
    for method in ["elm", "elmg"] {
        for cell in &result.cells {
            let summary = if method == "elm" {
                &cell.elm
            } else {
                &cell.elmg
            };
            writeln!(
                out,
                "{activation},{},{method},{},{}",
                cell.num_neurons, cell.n_train, summary.mean_nmse_db
            )?;
        }
    }
    Ok(())
}

/// Per-trial log with the chosen hyperparameters:
/// `K,N,trial,seed,method,alpha,beta,val_nmse_db,test_nmse_db`.
pub fn write_trials_csv<W: Write>(
    result: &ExperimentResult,
    mut out: W,
) -> Result<(), ExperimentError> {
    writeln!(
        out,
        "K,N,trial,seed,method,alpha,beta,val_nmse_db,test_nmse_db"
    )?;
    for cell in &result.cells {
        for record in &cell.trials {
            for (method, m) in [("elm", &record.outcome.elm), ("elmg", &record.outcome.elmg)] {
                writeln!(
                    out,
                    "{},{},{},{},{method},{},{},{},{}",
                    cell.num_neurons,
                    cell.n_train,
                    record.trial,
                    record.seed,
                    m.hyperparams.alpha(),
                    m.hyperparams.beta(),
                    m.val_nmse_db,
                    m.test_nmse_db
                )?;
            }
        }
    }
    Ok(())
}
