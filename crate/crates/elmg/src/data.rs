//! Dataset plumbing: dense CSV matrices, coordinate lists, seeded noise
//! injection at a prescribed SNR, train/test splitting, and a synthetic
//! generator for targets that are smooth over a graph.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{laplacian, laplacian_eigendecomposition, GeoPoint, Graph, GraphError};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path} is empty")]
    Empty { path: String },
    #[error("{path} row {row} has {got} fields but row 1 has {expected}")]
    Ragged {
        path: String,
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("{path} row {row}, column {column}: `{value}` is not a finite number")]
    BadCell {
        path: String,
        row: usize,
        column: usize,
        value: String,
    },
    #[error("{path} must start with the header `lat,lon`, found `{got}`")]
    CoordinateHeader { path: String, got: String },
    #[error("inputs have {inputs} rows but targets have {targets}")]
    RowCountMismatch { inputs: usize, targets: usize },
    #[error("clean targets are {clean_rows}x{clean_cols} but targets are {rows}x{cols}")]
    CleanShapeMismatch {
        clean_rows: usize,
        clean_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("dataset matrices must be finite")]
    NonFinite,
    #[error("dataset must contain at least one sample")]
    NoSamples,
    #[error("cannot add noise to an all-zero target matrix: SNR is undefined")]
    AllZeroTargets,
    #[error("snr_db = {0} must be finite")]
    InvalidSnr(f64),
    #[error("n_train = {n_train} must satisfy 1 <= n_train < {total}")]
    SplitSize { n_train: usize, total: usize },
    #[error("diffusion time tau = {0} must be finite and nonnegative")]
    InvalidTau(f64),
    #[error(
        "synthetic dataset needs N >= 1 samples and d >= 1 input dimensions, got N={n}, d={d}"
    )]
    SynthSize { n: usize, d: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("manifest {path} is malformed: {source}")]
    MalformedManifest {
        path: String,
        source: serde_json::Error,
    },
}

/// Input rows paired with target rows; optionally keeps the noise-free
/// targets so evaluation can score against ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: DMatrix<f64>,
    targets: DMatrix<f64>,
    clean_targets: Option<DMatrix<f64>>,
}

impl Dataset {
    pub fn new(
        inputs: DMatrix<f64>,
        targets: DMatrix<f64>,
        clean_targets: Option<DMatrix<f64>>,
    ) -> Result<Self, DataError> {
        if inputs.nrows() != targets.nrows() {
            return Err(DataError::RowCountMismatch {
                inputs: inputs.nrows(),
                targets: targets.nrows(),
            });
        }
        if inputs.nrows() == 0 {
            return Err(DataError::NoSamples);
        }
        if let Some(clean) = &clean_targets {
            if clean.shape() != targets.shape() {
                return Err(DataError::CleanShapeMismatch {
                    clean_rows: clean.nrows(),
                    clean_cols: clean.ncols(),
                    rows: targets.nrows(),
                    cols: targets.ncols(),
                });
            }
        }
        let finite = inputs.iter().all(|v| v.is_finite())
            && targets.iter().all(|v| v.is_finite())
            && clean_targets
                .as_ref()
                .is_none_or(|c| c.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(DataError::NonFinite);
        }
        Ok(Self {
            inputs,
            targets,
            clean_targets,
        })
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    pub fn clean_targets(&self) -> Option<&DMatrix<f64>> {
        self.clean_targets.as_ref()
    }

    pub fn num_samples(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn num_nodes(&self) -> usize {
        self.targets.ncols()
    }

    /// Same inputs and clean targets, new (for example noise-injected)
    /// training targets.
    pub fn with_targets(&self, targets: DMatrix<f64>) -> Result<Self, DataError> {
        Self::new(self.inputs.clone(), targets, self.clean_targets.clone())
    }
}

/// Reads a dense, headerless, rectangular numeric CSV into a matrix.
pub fn load_signal_matrix(path: &Path) -> Result<DMatrix<f64>, DataError> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| DataError::Read {
        path: display.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);

    let mut values: Vec<f64> = Vec::new();
    let mut cols = 0usize;
    let mut rows = 0usize;
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|source| DataError::Csv {
            path: display.clone(),
            source,
        })?;
        if rows == 0 {
            cols = record.len();
        } else if record.len() != cols {
            return Err(DataError::Ragged {
                path: display,
                row: index + 1,
                got: record.len(),
                expected: cols,
            });
        }
        for (column, field) in record.iter().enumerate() {
            let parsed = field.parse::<f64>().ok().filter(|v| v.is_finite());
            match parsed {
                Some(v) => values.push(v),
                None => {
                    return Err(DataError::BadCell {
                        path: display,
                        row: index + 1,
                        column: column + 1,
                        value: field.to_string(),
                    })
                }
            }
        }
        rows += 1;
    }
    if rows == 0 || cols == 0 {
        return Err(DataError::Empty { path: display });
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

/// Writes a matrix as headerless CSV. Floats are printed in shortest
/// round-trip form, so a save/load cycle is exact.
pub fn save_signal_matrix(path: &Path, matrix: &DMatrix<f64>) -> Result<(), DataError> {
    let display = path.display().to_string();
    let wrap = |source| DataError::Write {
        path: display.clone(),
        source,
    };
    let file = std::fs::File::create(path).map_err(wrap)?;
    let mut out = std::io::BufWriter::new(file);
    for i in 0..matrix.nrows() {
        let row: Vec<String> = matrix.row(i).iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", row.join(",")).map_err(wrap)?;
    }
    out.flush().map_err(wrap)
}

/// Reads node coordinates from a CSV with the exact header `lat,lon`.
pub fn load_coordinates(path: &Path) -> Result<Vec<GeoPoint>, DataError> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| DataError::Read {
        path: display.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);

    let headers = reader.headers().map_err(|source| DataError::Csv {
        path: display.clone(),
        source,
    })?;
    let header_fields: Vec<&str> = headers.iter().collect();
    if header_fields != ["lat", "lon"] {
        return Err(DataError::CoordinateHeader {
            path: display,
            got: header_fields.join(","),
        });
    }

    let mut points = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|source| DataError::Csv {
            path: display.clone(),
            source,
        })?;
        // header occupies row 1 of the file
        let row = index + 2;
        if record.len() != 2 {
            return Err(DataError::Ragged {
                path: display,
                row,
                got: record.len(),
                expected: 2,
            });
        }
        let mut parsed = [0.0f64; 2];
        for (column, field) in record.iter().enumerate() {
            match field.parse::<f64>().ok().filter(|v| v.is_finite()) {
                Some(v) => parsed[column] = v,
                None => {
                    return Err(DataError::BadCell {
                        path: display,
                        row,
                        column: column + 1,
                        value: field.to_string(),
                    })
                }
            }
        }
        points.push(GeoPoint {
            lat: parsed[0],
            lon: parsed[1],
        });
    }
    if points.is_empty() {
        return Err(DataError::Empty { path: display });
    }
    Ok(points)
}

/// Adds i.i.d. Gaussian noise scaled so the dataset-wide SNR (signal power
/// averaged over all entries) equals `snr_db`.
pub fn add_noise(clean: &DMatrix<f64>, snr_db: f64, seed: u64) -> Result<DMatrix<f64>, DataError> {
    if !snr_db.is_finite() {
        return Err(DataError::InvalidSnr(snr_db));
    }
    let energy = clean.norm_squared();
    if energy == 0.0 {
        return Err(DataError::AllZeroTargets);
    }
    let entries = (clean.nrows() * clean.ncols()) as f64;
    let sigma = ((energy / entries) * 10f64.powf(-snr_db / 10.0)).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noisy = clean.clone();
    for i in 0..noisy.nrows() {
        for j in 0..noisy.ncols() {
            let draw: f64 = rng.sample(StandardNormal);
            noisy[(i, j)] += sigma * draw;
        }
    }
    Ok(noisy)
}

/// The row indices of one train/test partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Draws a uniformly random partition into `n_train` training rows and the
/// rest, deterministic per seed. Row order within each side is ascending.
pub fn split_indices(total: usize, n_train: usize, seed: u64) -> Result<SplitIndices, DataError> {
    if n_train == 0 || n_train >= total {
        return Err(DataError::SplitSize { n_train, total });
    }
    let mut order: Vec<usize> = (0..total).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

fn select_rows(matrix: &DMatrix<f64>, indices: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(indices.len(), matrix.ncols());
    for (row, &index) in indices.iter().enumerate() {
        out.set_row(row, &matrix.row(index));
    }
    out
}

fn take_rows(ds: &Dataset, indices: &[usize]) -> Dataset {
    Dataset {
        inputs: select_rows(&ds.inputs, indices),
        targets: select_rows(&ds.targets, indices),
        clean_targets: ds.clean_targets.as_ref().map(|c| select_rows(c, indices)),
    }
}

/// Splits a dataset into `n_train` training rows and the remaining test
/// rows, uniformly at random and deterministic per seed.
pub fn split_dataset(
    ds: &Dataset,
    n_train: usize,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    let indices = split_indices(ds.num_samples(), n_train, seed)?;
    Ok((take_rows(ds, &indices.train), take_rows(ds, &indices.test)))
}

/// Relative size of the input perturbation in [`synth_smooth_signals`].
const INPUT_NOISE_FRACTION: f64 = 0.05;

/// Generates `n` samples whose clean targets are heat-kernel-filtered white
/// noise over the graph: `t_o = V exp(-tau Lambda) V^T g_raw`. Inputs are a
/// fixed random linear projection of the clean targets to `d` dimensions
/// plus a small perturbation, giving a learnable input-target relation.
/// `tau = 0` applies no filtering at all.
pub fn synth_smooth_signals(
    g: &Graph,
    n: usize,
    d: usize,
    tau: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    if !tau.is_finite() || tau < 0.0 {
        return Err(DataError::InvalidTau(tau));
    }
    if n == 0 || d == 0 {
        return Err(DataError::SynthSize { n, d });
    }
    let m = g.num_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
        let mut out = DMatrix::<f64>::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out[(i, j)] = rng.sample(StandardNormal);
            }
        }
        out
    };

    let raw = draw(n, m, &mut rng);
    let clean = if tau == 0.0 {
        raw
    } else {
        let eig = laplacian_eigendecomposition(&laplacian(g))?;
        let decay = DMatrix::from_diagonal(&eig.eigenvalues().map(|lambda| (-tau * lambda).exp()));
        // rows are signals, and the kernel is symmetric
        raw * eig.eigenvectors() * decay * eig.eigenvectors().transpose()
    };

    let projection = draw(m, d, &mut rng);
    let projected = &clean * projection / (m as f64).sqrt();
    let rms = (projected.norm_squared() / (n * d) as f64).sqrt();
    let scale = if rms > 0.0 {
        INPUT_NOISE_FRACTION * rms
    } else {
        INPUT_NOISE_FRACTION
    };
    let perturbation = draw(n, d, &mut rng);
    let inputs = projected + perturbation * scale;

    Dataset::new(inputs, clean.clone(), Some(clean))
}

/// File-path bundle describing a dataset on disk. Relative paths resolve
/// against the manifest's own directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub inputs: String,
    pub targets: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean_targets: Option<String>,
    pub adjacency: String,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self, DataError> {
        let display = path.display().to_string();
        let data = std::fs::read(path).map_err(|source| DataError::Read {
            path: display.clone(),
            source,
        })?;
        serde_json::from_slice(&data).map_err(|source| DataError::MalformedManifest {
            path: display,
            source,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let display = path.display().to_string();
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json + "\n").map_err(|source| DataError::Write {
            path: display,
            source,
        })
    }

    fn resolve(base: &Path, entry: &str) -> PathBuf {
        let candidate = Path::new(entry);
        if candidate.is_absolute() {
            candidate.to_path_buf()
        } else {
            base.join(candidate)
        }
    }

    /// Loads the dataset and graph the manifest points at.
    pub fn load_bundle(manifest_path: &Path) -> Result<(Dataset, Graph), DataError> {
        let manifest = Self::load(manifest_path)?;
        let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

        let inputs = load_signal_matrix(&Self::resolve(base, &manifest.inputs))?;
        let targets = load_signal_matrix(&Self::resolve(base, &manifest.targets))?;
        let clean = manifest
            .clean_targets
            .as_ref()
            .map(|p| load_signal_matrix(&Self::resolve(base, p)))
            .transpose()?;
        let adjacency = load_signal_matrix(&Self::resolve(base, &manifest.adjacency))?;
        let graph = Graph::from_adjacency(adjacency)?;
        let dataset = Dataset::new(inputs, targets, clean)?;
        Ok((dataset, graph))
    }
}
