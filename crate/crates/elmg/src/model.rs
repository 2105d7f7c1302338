//! Random hidden layer, activation functions, and the closed-form training
//! paths: ridge regression, the dense Kronecker system, and the
//! per-eigenvalue solver for the graph-regularized stationarity equation.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{LaplacianEigen, LaplacianView};

/// Default guard on the dense Kronecker system: `M * K` may not exceed this
/// unless the caller raises the cap explicitly.
pub const DEFAULT_DENSE_CAP: usize = 4000;

/// Relative stationarity residual every trained weight matrix must satisfy.
const STATIONARITY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("activation input has {x_len} entries but the weight vector has {a_len}")]
    ActivationDimension { x_len: usize, a_len: usize },
    #[error("hidden layer needs K >= 1 neurons and d >= 1 inputs, got K={k}, d={d}")]
    EmptyLayer { k: usize, d: usize },
    #[error("hidden layer has {weights} weight rows but {offsets} offsets")]
    LayerShape { weights: usize, offsets: usize },
    #[error("hidden layer parameters must all be finite")]
    NonFiniteLayer,
    #[error("inputs have {got} columns but the hidden layer expects {expected}")]
    InputDimension { got: usize, expected: usize },
    #[error("hidden matrix has {h_rows} rows but the targets have {t_rows}")]
    RowMismatch { h_rows: usize, t_rows: usize },
    #[error("training matrices must be finite")]
    NonFiniteTraining,
    #[error("hyperparameter {name} = {value} must be finite and nonnegative")]
    InvalidHyperparameter { name: &'static str, value: f64 },
    #[error("targets span {targets} graph nodes but the graph has {graph}")]
    GraphSizeMismatch { targets: usize, graph: usize },
    #[error("output weights have {rows} rows but the hidden layer has {neurons} neurons")]
    WeightShape { rows: usize, neurons: usize },
    #[error(
        "weight matrix is {rows}x{cols} but this problem needs {expected_rows}x{expected_cols}"
    )]
    WeightDimension {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error(
        "linear system is singular or near-singular (condition estimate {condition:.3e}); a positive alpha regularizes it"
    )]
    SingularSystem { condition: f64 },
    #[error(
        "per-eigenvalue system {index} (lambda = {lambda:.6e}) is singular; a positive alpha regularizes it"
    )]
    SingularEigenSystem { index: usize, lambda: f64 },
    #[error(
        "dense solver would materialize a {size}x{size} system, above the cap of {cap}; use train_elmg_fast instead"
    )]
    DenseCapExceeded { size: usize, cap: usize },
    #[error("unknown activation kind `{0}`; expected sigmoid, hardlimit, or gaussian")]
    UnknownActivation(String),
    #[error("cannot read model from {path}: {source}")]
    ReadModel {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write model to {path}: {source}")]
    WriteModel {
        path: String,
        source: std::io::Error,
    },
    #[error("model file {path} is malformed: {source}")]
    MalformedModel {
        path: String,
        source: serde_json::Error,
    },
    #[error("model file {path} is inconsistent: {reason}")]
    InconsistentModel { path: String, reason: String },
}

/// The scalar nonlinearity applied by each hidden neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Sigmoid,
    Hardlimit,
    Gaussian,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 3] = [
        ActivationKind::Sigmoid,
        ActivationKind::Hardlimit,
        ActivationKind::Gaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Hardlimit => "hardlimit",
            ActivationKind::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "hardlimit" => Ok(ActivationKind::Hardlimit),
            "gaussian" => Ok(ActivationKind::Gaussian),
            other => Err(ModelError::UnknownActivation(other.to_string())),
        }
    }
}

fn eval_unchecked(kind: ActivationKind, x: &[f64], a: &[f64], b: f64) -> f64 {
    match kind {
        ActivationKind::Sigmoid => {
            let mut z = b;
            for (xi, ai) in x.iter().zip(a) {
                z += ai * xi;
            }
            1.0 / (1.0 + (-z).exp())
        }
        ActivationKind::Hardlimit => {
            let mut z = b;
            for (xi, ai) in x.iter().zip(a) {
                z += ai * xi;
            }
            // the boundary itself maps to 1
            if z >= 0.0 {
                1.0
            } else {
                0.0
            }
        }
        ActivationKind::Gaussian => {
            let mut d2 = 0.0;
            for (xi, ai) in x.iter().zip(a) {
                let diff = xi - ai;
                d2 += diff * diff;
            }
            (-b * d2).exp()
        }
    }
}

/// Evaluates one hidden neuron `G(x, a, b)` on an input vector.
pub fn activation_eval(
    kind: ActivationKind,
    x: &[f64],
    a: &[f64],
    b: f64,
) -> Result<f64, ModelError> {
    if x.len() != a.len() {
        return Err(ModelError::ActivationDimension {
            x_len: x.len(),
            a_len: a.len(),
        });
    }
    Ok(eval_unchecked(kind, x, a, b))
}

/// A fixed random hidden layer: `K` neurons over `d`-dimensional inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayer {
    kind: ActivationKind,
    weights: DMatrix<f64>,
    offsets: DVector<f64>,
}

impl HiddenLayer {
    pub fn new(
        kind: ActivationKind,
        weights: DMatrix<f64>,
        offsets: DVector<f64>,
    ) -> Result<Self, ModelError> {
        let (k, d) = weights.shape();
        if k == 0 || d == 0 {
            return Err(ModelError::EmptyLayer { k, d });
        }
        if offsets.len() != k {
            return Err(ModelError::LayerShape {
                weights: k,
                offsets: offsets.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) || offsets.iter().any(|b| !b.is_finite()) {
            return Err(ModelError::NonFiniteLayer);
        }
        Ok(Self {
            kind,
            weights,
            offsets,
        })
    }

    /// Draws every weight and offset independently from the standard normal
    /// distribution. The draw order is fixed (weight rows neuron by neuron,
    /// then offsets), so a seed pins the layer bit for bit.
    pub fn random(kind: ActivationKind, k: usize, d: usize, seed: u64) -> Result<Self, ModelError> {
        if k == 0 || d == 0 {
            return Err(ModelError::EmptyLayer { k, d });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut flat = vec![0.0; k * d];
        for value in flat.iter_mut() {
            *value = rng.sample(StandardNormal);
        }
        let weights = DMatrix::from_row_slice(k, d, &flat);
        let offsets = DVector::from_iterator(k, (0..k).map(|_| rng.sample(StandardNormal)));
        Self::new(kind, weights, offsets)
    }

    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    /// `K x d` matrix; row `k` is the weight vector of neuron `k`.
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn offsets(&self) -> &DVector<f64> {
        &self.offsets
    }

    pub fn num_neurons(&self) -> usize {
        self.weights.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }
}

/// Evaluates the hidden layer on a batch: entry `(n, k)` is neuron `k`
/// applied to input row `n`, exactly as [`activation_eval`] computes it.
pub fn hidden_matrix(
    layer: &HiddenLayer,
    inputs: &DMatrix<f64>,
) -> Result<DMatrix<f64>, ModelError> {
    let d = layer.input_dim();
    if inputs.ncols() != d {
        return Err(ModelError::InputDimension {
            got: inputs.ncols(),
            expected: d,
        });
    }
    let n = inputs.nrows();
    let k = layer.num_neurons();

    let weight_rows: Vec<Vec<f64>> = (0..k)
        .map(|ki| layer.weights.row(ki).iter().copied().collect())
        .collect();

    let mut h = DMatrix::<f64>::zeros(n, k);
    let mut x = vec![0.0; d];
    for ni in 0..n {
        for (j, slot) in x.iter_mut().enumerate() {
            *slot = inputs[(ni, j)];
        }
        for ki in 0..k {
            h[(ni, ki)] = eval_unchecked(layer.kind, &x, &weight_rows[ki], layer.offsets[ki]);
        }
    }
    Ok(h)
}

/// Ridge and graph regularization weights, both nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    alpha: f64,
    beta: f64,
}

impl Hyperparams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, ModelError> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(ModelError::InvalidHyperparameter {
                name: "alpha",
                value: alpha,
            });
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(ModelError::InvalidHyperparameter {
                name: "beta",
                value: beta,
            });
        }
        Ok(Self { alpha, beta })
    }

    pub fn ridge(alpha: f64) -> Result<Self, ModelError> {
        Self::new(alpha, 0.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// The hidden-output matrix `H` (`N x K`) paired with targets `T` (`N x M`).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMatrices {
    h: DMatrix<f64>,
    t: DMatrix<f64>,
}

impl TrainingMatrices {
    pub fn new(h: DMatrix<f64>, t: DMatrix<f64>) -> Result<Self, ModelError> {
        if h.nrows() != t.nrows() {
            return Err(ModelError::RowMismatch {
                h_rows: h.nrows(),
                t_rows: t.nrows(),
            });
        }
        if h.iter().any(|v| !v.is_finite()) || t.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteTraining);
        }
        Ok(Self { h, t })
    }

    /// Builds `H` from a hidden layer and raw inputs, then pairs it with the
    /// targets.
    pub fn from_layer(
        layer: &HiddenLayer,
        inputs: &DMatrix<f64>,
        targets: &DMatrix<f64>,
    ) -> Result<Self, ModelError> {
        let h = hidden_matrix(layer, inputs)?;
        Self::new(h, targets.clone())
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn t(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn num_samples(&self) -> usize {
        self.h.nrows()
    }

    pub fn num_neurons(&self) -> usize {
        self.h.ncols()
    }

    pub fn num_nodes(&self) -> usize {
        self.t.ncols()
    }
}

fn condition_estimate(a: &DMatrix<f64>) -> f64 {
    let eigenvalues = a.clone().symmetric_eigenvalues();
    let max = eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let min = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn validate_alpha(alpha: f64) -> Result<(), ModelError> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(ModelError::InvalidHyperparameter {
            name: "alpha",
            value: alpha,
        });
    }
    Ok(())
}

/// Ridge ELM training: the unique minimizer
/// `W = (H^T H + alpha I_K)^{-1} H^T T` of the regularized least-squares
/// cost, solved by Cholesky factorization rather than explicit inversion.
pub fn train_elm(tm: &TrainingMatrices, alpha: f64) -> Result<DMatrix<f64>, ModelError> {
    validate_alpha(alpha)?;
    let k = tm.num_neurons();
    let gram = tm.h.transpose() * &tm.h;
    let mut system = gram;
    for i in 0..k {
        system[(i, i)] += alpha;
    }
    let rhs = tm.h.transpose() * &tm.t;

    let chol = match nalgebra::linalg::Cholesky::new(system.clone()) {
        Some(c) => c,
        None => {
            return Err(ModelError::SingularSystem {
                condition: condition_estimate(&system),
            })
        }
    };
    let weights = chol.solve(&rhs);

    let residual = (&system * &weights - &rhs).norm();
    if residual > STATIONARITY_TOL * rhs.norm() {
        return Err(ModelError::SingularSystem {
            condition: condition_estimate(&system),
        });
    }
    Ok(weights)
}

fn check_graph_size(tm: &TrainingMatrices, graph_nodes: usize) -> Result<(), ModelError> {
    if tm.num_nodes() != graph_nodes {
        return Err(ModelError::GraphSizeMismatch {
            targets: tm.num_nodes(),
            graph: graph_nodes,
        });
    }
    Ok(())
}

/// Graph-regularized training through the explicit Kronecker system
/// `[I_M (x) (H^T H + alpha I_K) + beta L (x) H^T H] vec(W) = vec(H^T T)`,
/// using the default size cap. Kept despite its cost: it is the oracle the
/// fast solver is verified against.
pub fn train_elmg_dense(
    tm: &TrainingMatrices,
    l: &LaplacianView,
    hp: &Hyperparams,
) -> Result<DMatrix<f64>, ModelError> {
    train_elmg_dense_with_cap(tm, l, hp, DEFAULT_DENSE_CAP)
}

/// [`train_elmg_dense`] with an explicit cap on `M * K`.
pub fn train_elmg_dense_with_cap(
    tm: &TrainingMatrices,
    l: &LaplacianView,
    hp: &Hyperparams,
    cap: usize,
) -> Result<DMatrix<f64>, ModelError> {
    check_graph_size(tm, l.num_nodes())?;
    let k = tm.num_neurons();
    let m = l.num_nodes();
    let size = m * k;
    if size > cap {
        return Err(ModelError::DenseCapExceeded { size, cap });
    }

    let gram = tm.h.transpose() * &tm.h;
    let mut ridge = gram.clone();
    for i in 0..k {
        ridge[(i, i)] += hp.alpha();
    }
    let system = DMatrix::<f64>::identity(m, m).kronecker(&ridge)
        + (l.matrix() * hp.beta()).kronecker(&gram);

    let rhs_matrix = tm.h.transpose() * &tm.t;
    let rhs = DVector::from_column_slice(rhs_matrix.as_slice());

    let chol = match nalgebra::linalg::Cholesky::new(system) {
        Some(c) => c,
        None => {
            let rebuilt = DMatrix::<f64>::identity(m, m).kronecker(&ridge)
                + (l.matrix() * hp.beta()).kronecker(&gram);
            return Err(ModelError::SingularSystem {
                condition: condition_estimate(&rebuilt),
            });
        }
    };
    let solution = chol.solve(&rhs);
    let weights = DMatrix::from_column_slice(k, m, solution.as_slice());

    // stationarity: (H^T H + alpha I) W + beta H^T H W L = H^T T
    let residual =
        (&ridge * &weights + (&gram * &weights * l.matrix()) * hp.beta() - &rhs_matrix).norm();
    if residual > STATIONARITY_TOL * rhs_matrix.norm() {
        let rebuilt = DMatrix::<f64>::identity(m, m).kronecker(&ridge)
            + (l.matrix() * hp.beta()).kronecker(&gram);
        return Err(ModelError::SingularSystem {
            condition: condition_estimate(&rebuilt),
        });
    }
    Ok(weights)
}

/// Graph-regularized training without the Kronecker blowup: with
/// `L = V diag(lambda) V^T`, substituting `W = W~ V^T` into the
/// stationarity equation splits it into `M` independent `K x K` systems
/// `[(1 + beta lambda_j) H^T H + alpha I] w~_j = (H^T T V) e_j`.
pub fn train_elmg_fast(
    tm: &TrainingMatrices,
    eig: &LaplacianEigen,
    hp: &Hyperparams,
) -> Result<DMatrix<f64>, ModelError> {
    check_graph_size(tm, eig.num_nodes())?;
    let k = tm.num_neurons();
    let m = eig.num_nodes();

    let gram = tm.h.transpose() * &tm.h;
    let rhs = (tm.h.transpose() * &tm.t) * eig.eigenvectors();
    let rhs_norm = rhs.norm();

    let mut transformed = DMatrix::<f64>::zeros(k, m);
    let mut worst = (0usize, 0.0f64);
    for j in 0..m {
        let lambda = eig.eigenvalues()[j];
        let scale = 1.0 + hp.beta() * lambda;
        let mut system = &gram * scale;
        for i in 0..k {
            system[(i, i)] += hp.alpha();
        }
        let column = rhs.column(j).into_owned();
        let chol = match nalgebra::linalg::Cholesky::new(system) {
            Some(c) => c,
            None => {
                return Err(ModelError::SingularEigenSystem { index: j, lambda });
            }
        };
        let solution = chol.solve(&column);
        // residual in the transformed basis equals the stationarity residual
        let residual = ((&gram * &solution) * scale + &solution * hp.alpha() - column).norm();
        if residual > worst.1 {
            worst = (j, residual);
        }
        transformed.set_column(j, &solution);
    }

    if worst.1 > STATIONARITY_TOL * rhs_norm {
        return Err(ModelError::SingularEigenSystem {
            index: worst.0,
            lambda: eig.eigenvalues()[worst.0],
        });
    }
    Ok(transformed * eig.eigenvectors().transpose())
}

/// The scalar training cost: squared error plus the ridge and
/// graph-smoothness penalties.
pub fn elmg_cost(
    tm: &TrainingMatrices,
    l: &LaplacianView,
    hp: &Hyperparams,
    weights: &DMatrix<f64>,
) -> Result<f64, ModelError> {
    check_weight_shape(tm, l, weights)?;
    let fitted = &tm.h * weights;
    let misfit = (&tm.t - &fitted).norm_squared();
    let ridge = hp.alpha() * weights.norm_squared();
    let smooth = hp.beta() * (&fitted * l.matrix()).dot(&fitted);
    Ok(misfit + ridge + smooth)
}

/// Analytic gradient of [`elmg_cost`] with respect to the weights:
/// `2 [ -H^T T + (H^T H + alpha I) W + beta H^T H W L ]`.
pub fn elmg_gradient(
    tm: &TrainingMatrices,
    l: &LaplacianView,
    hp: &Hyperparams,
    weights: &DMatrix<f64>,
) -> Result<DMatrix<f64>, ModelError> {
    check_weight_shape(tm, l, weights)?;
    let gram = tm.h.transpose() * &tm.h;
    let grad = (&gram * weights + weights * hp.alpha() - tm.h.transpose() * &tm.t
        + (&gram * weights * l.matrix()) * hp.beta())
        * 2.0;
    Ok(grad)
}

fn check_weight_shape(
    tm: &TrainingMatrices,
    l: &LaplacianView,
    weights: &DMatrix<f64>,
) -> Result<(), ModelError> {
    check_graph_size(tm, l.num_nodes())?;
    if weights.nrows() != tm.num_neurons() || weights.ncols() != tm.num_nodes() {
        return Err(ModelError::WeightDimension {
            rows: weights.nrows(),
            cols: weights.ncols(),
            expected_rows: tm.num_neurons(),
            expected_cols: tm.num_nodes(),
        });
    }
    Ok(())
}

/// A trained model: the fixed hidden layer plus learned output weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ElmModel {
    hidden: HiddenLayer,
    output_weights: DMatrix<f64>,
}

impl ElmModel {
    pub fn new(hidden: HiddenLayer, output_weights: DMatrix<f64>) -> Result<Self, ModelError> {
        if output_weights.nrows() != hidden.num_neurons() {
            return Err(ModelError::WeightShape {
                rows: output_weights.nrows(),
                neurons: hidden.num_neurons(),
            });
        }
        Ok(Self {
            hidden,
            output_weights,
        })
    }

    pub fn hidden(&self) -> &HiddenLayer {
        &self.hidden
    }

    /// `K x M` output weight matrix.
    pub fn output_weights(&self) -> &DMatrix<f64> {
        &self.output_weights
    }

    pub fn graph_nodes(&self) -> usize {
        self.output_weights.ncols()
    }

    /// Predicts one output row `W^T h(x)` per input row.
    pub fn predict(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>, ModelError> {
        let h = hidden_matrix(&self.hidden, inputs)?;
        Ok(h * &self.output_weights)
    }
}

/// A trained model plus the hyperparameters and seed that produced it; the
/// unit of model (de)serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRecord {
    pub model: ElmModel,
    pub hyperparams: Hyperparams,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    kind: ActivationKind,
    num_neurons: usize,
    input_dim: usize,
    graph_nodes: usize,
    weights: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    output_weights: Vec<Vec<f64>>,
    alpha: f64,
    beta: f64,
    seed: u64,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn rows_to_matrix(
    rows: &[Vec<f64>],
    expected_cols: usize,
    what: &str,
    path: &str,
) -> Result<DMatrix<f64>, ModelError> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != expected_cols {
            return Err(ModelError::InconsistentModel {
                path: path.to_string(),
                reason: format!(
                    "{what} row {i} has {} entries, expected {expected_cols}",
                    row.len()
                ),
            });
        }
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), expected_cols, &flat))
}

impl ModelRecord {
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let file = ModelFile {
            kind: self.model.hidden.kind(),
            num_neurons: self.model.hidden.num_neurons(),
            input_dim: self.model.hidden.input_dim(),
            graph_nodes: self.model.graph_nodes(),
            weights: matrix_rows(self.model.hidden.weights()),
            offsets: self.model.hidden.offsets().iter().copied().collect(),
            output_weights: matrix_rows(self.model.output_weights()),
            alpha: self.hyperparams.alpha(),
            beta: self.hyperparams.beta(),
            seed: self.seed,
        };
        let out = std::fs::File::create(path).map_err(|source| ModelError::WriteModel {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(out), &file).map_err(|source| {
            ModelError::MalformedModel {
                path: path.display().to_string(),
                source,
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let display = path.display().to_string();
        let data = std::fs::read(path).map_err(|source| ModelError::ReadModel {
            path: display.clone(),
            source,
        })?;
        let file: ModelFile =
            serde_json::from_slice(&data).map_err(|source| ModelError::MalformedModel {
                path: display.clone(),
                source,
            })?;

        if file.weights.len() != file.num_neurons
            || file.offsets.len() != file.num_neurons
            || file.output_weights.len() != file.num_neurons
        {
            return Err(ModelError::InconsistentModel {
                path: display,
                reason: format!(
                    "declared {} neurons but found {} weight rows, {} offsets, {} output rows",
                    file.num_neurons,
                    file.weights.len(),
                    file.offsets.len(),
                    file.output_weights.len()
                ),
            });
        }
        let weights = rows_to_matrix(&file.weights, file.input_dim, "weights", &display)?;
        let output_weights = rows_to_matrix(
            &file.output_weights,
            file.graph_nodes,
            "output_weights",
            &display,
        )?;
        let hidden = HiddenLayer::new(file.kind, weights, DVector::from_vec(file.offsets))?;
        let model = ElmModel::new(hidden, output_weights)?;
        let hyperparams = Hyperparams::new(file.alpha, file.beta)?;
        Ok(ModelRecord {
            model,
            hyperparams,
            seed: file.seed,
        })
    }
}
