//! Command-line front end: graph building, synthetic data generation,
//! training, prediction, evaluation, Monte-Carlo sweeps, and shrinkage
//! diagnostics. Exit codes: 0 success, 2 usage or input error, 3 numerical
//! failure. Every run prints its resolved seed (0 for commands that use no
//! randomness).

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{ArgGroup, Parser, Subcommand};
use thiserror::Error;

use elmg::{
    add_noise, build_geodesic_graph, derive_seed, laplacian, laplacian_eigendecomposition,
    load_coordinates, load_signal_matrix, nmse_db, random_geometric_graph, run_experiment,
    save_signal_matrix, smoothing_report, synth_smooth_signals, train_elmg_dense, train_elmg_fast,
    write_curves_csv, write_results_csv, write_smoothing_csv, write_trials_csv, ActivationKind,
    DataError, DatasetManifest, ElmModel, ExperimentConfig, ExperimentError, Graph, GraphError,
    HiddenLayer, Hyperparams, ModelError, ModelRecord, SolverChoice, SpectralError,
    TrainingMatrices,
};

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn is_numerical(&self) -> bool {
        match self {
            CliError::Model(e) => matches!(
                e,
                ModelError::SingularSystem { .. } | ModelError::SingularEigenSystem { .. }
            ),
            CliError::Experiment(e) => e.is_numerical(),
            _ => false,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "elmg",
    version,
    about = "Extreme learning machines with graph-Laplacian output smoothing"
)]
struct Cli {
    /// Worker threads for sweep parallelism (0 uses all available cores)
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a geodesic adjacency matrix from a lat,lon coordinate CSV
    Graph {
        /// Coordinate CSV with the exact header `lat,lon`, one node per row
        #[arg(long)]
        coords: PathBuf,
        /// Output adjacency CSV
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset whose targets are smooth over a graph
    #[command(group(ArgGroup::new("source").required(true).args(["adjacency", "nodes"])))]
    Synth {
        /// Adjacency CSV of an existing graph
        #[arg(long)]
        adjacency: Option<PathBuf>,
        /// Generate a random geometric graph with this many nodes instead
        #[arg(long)]
        nodes: Option<usize>,
        /// Number of samples to draw
        #[arg(long)]
        samples: usize,
        /// Input dimension
        #[arg(long, default_value_t = 3)]
        input_dim: usize,
        /// Heat-kernel diffusion time; 0 leaves targets as white noise
        #[arg(long, default_value_t = 5.0)]
        tau: f64,
        /// Optional SNR in dB; when set, targets.csv carries noisy targets
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long)]
        seed: u64,
        /// Directory receiving adjacency/inputs/targets/manifest files
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train output weights on an inputs/targets/adjacency triple
    Train {
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        adjacency: PathBuf,
        /// sigmoid, hardlimit, or gaussian
        #[arg(long)]
        activation: String,
        /// Hidden layer width
        #[arg(long)]
        k: usize,
        /// Ridge weight
        #[arg(long)]
        alpha: f64,
        /// Graph smoothness weight (0 trains a plain ELM)
        #[arg(long)]
        beta: f64,
        /// Seed for the random hidden layer
        #[arg(long)]
        seed: u64,
        /// dense or fast
        #[arg(long, default_value = "fast")]
        solver: String,
        #[arg(long)]
        model_out: PathBuf,
    },
    /// Predict outputs for new inputs with a saved model
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        inputs: PathBuf,
        /// Output predictions CSV
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a saved model against a truth matrix, printing NMSE in dB
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Run a Monte-Carlo sweep from a JSON config, writing result CSVs
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Directory receiving results.csv, curves.csv, and trials.csv
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit per-component shrinkage diagnostics as CSV
    Spectrum {
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        adjacency: PathBuf,
        /// sigmoid, hardlimit, or gaussian
        #[arg(long)]
        activation: String,
        /// Hidden layer width
        #[arg(long)]
        k: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        /// Seed for the random hidden layer
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .ok();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if err.is_numerical() {
                eprintln!("error[numeric]: {err}");
                ExitCode::from(3)
            } else {
                eprintln!("error[input]: {err}");
                ExitCode::from(2)
            }
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Graph { coords, out } => cmd_graph(&coords, &out),
        Command::Synth {
            adjacency,
            nodes,
            samples,
            input_dim,
            tau,
            snr,
            seed,
            out_dir,
        } => cmd_synth(
            adjacency.as_deref(),
            nodes,
            samples,
            input_dim,
            tau,
            snr,
            seed,
            &out_dir,
        ),
        Command::Train {
            inputs,
            targets,
            adjacency,
            activation,
            k,
            alpha,
            beta,
            seed,
            solver,
            model_out,
        } => cmd_train(
            &inputs,
            &targets,
            &adjacency,
            &activation,
            k,
            alpha,
            beta,
            seed,
            &solver,
            &model_out,
        ),
        Command::Predict { model, inputs, out } => cmd_predict(&model, &inputs, &out),
        Command::Eval {
            model,
            inputs,
            truth,
        } => cmd_eval(&model, &inputs, &truth),
        Command::Sweep { config, out } => cmd_sweep(&config, &out),
        Command::Spectrum {
            inputs,
            targets,
            adjacency,
            activation,
            k,
            alpha,
            beta,
            seed,
            out,
        } => cmd_spectrum(
            &inputs,
            &targets,
            &adjacency,
            &activation,
            k,
            alpha,
            beta,
            seed,
            &out,
        ),
    }
}

fn parse_solver(s: &str) -> Result<SolverChoice, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "dense" => Ok(SolverChoice::Dense),
        "fast" => Ok(SolverChoice::Fast),
        other => Err(CliError::Usage(format!(
            "unknown solver `{other}`; expected dense or fast"
        ))),
    }
}

fn load_graph(path: &Path) -> Result<Graph, CliError> {
    let adjacency = load_signal_matrix(path)?;
    Ok(Graph::from_adjacency(adjacency)?)
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn cmd_graph(coords: &Path, out: &Path) -> Result<(), CliError> {
    println!("seed=0");
    let points = load_coordinates(coords)?;
    let graph = build_geodesic_graph(&points)?;
    save_signal_matrix(out, graph.adjacency())?;
    println!("wrote {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    adjacency: Option<&Path>,
    nodes: Option<usize>,
    samples: usize,
    input_dim: usize,
    tau: f64,
    snr: Option<f64>,
    seed: u64,
    out_dir: &Path,
) -> Result<(), CliError> {
    println!("seed={seed}");
    let graph = match (adjacency, nodes) {
        (Some(path), None) => load_graph(path)?,
        (None, Some(nodes)) => random_geometric_graph(nodes, derive_seed(seed, 1))?,
        _ => unreachable!("clap enforces exactly one source"),
    };
    let dataset = synth_smooth_signals(&graph, samples, input_dim, tau, derive_seed(seed, 2))?;
    let targets = match snr {
        Some(snr_db) => add_noise(dataset.targets(), snr_db, derive_seed(seed, 3))?,
        None => dataset.targets().clone(),
    };

    create_dir(out_dir)?;
    save_signal_matrix(&out_dir.join("adjacency.csv"), graph.adjacency())?;
    save_signal_matrix(&out_dir.join("inputs.csv"), dataset.inputs())?;
    save_signal_matrix(&out_dir.join("targets.csv"), &targets)?;
    save_signal_matrix(
        &out_dir.join("clean_targets.csv"),
        dataset.clean_targets().expect("synthetic data is clean"),
    )?;
    let manifest = DatasetManifest {
        inputs: "inputs.csv".into(),
        targets: "targets.csv".into(),
        clean_targets: Some("clean_targets.csv".into()),
        adjacency: "adjacency.csv".into(),
    };
    manifest.save(&out_dir.join("manifest.json"))?;
    println!("wrote {}", out_dir.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    inputs: &Path,
    targets: &Path,
    adjacency: &Path,
    activation: &str,
    k: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    solver: &str,
    model_out: &Path,
) -> Result<(), CliError> {
    println!("seed={seed}");
    let activation = ActivationKind::from_str(activation)?;
    let solver = parse_solver(solver)?;
    let x = load_signal_matrix(inputs)?;
    let t = load_signal_matrix(targets)?;
    let graph = load_graph(adjacency)?;

    let layer = HiddenLayer::random(activation, k, x.ncols(), seed)?;
    let tm = TrainingMatrices::from_layer(&layer, &x, &t)?;
    let hyperparams = Hyperparams::new(alpha, beta)?;
    let weights = match solver {
        SolverChoice::Dense => train_elmg_dense(&tm, &laplacian(&graph), &hyperparams)?,
        SolverChoice::Fast => {
            let eig = laplacian_eigendecomposition(&laplacian(&graph))?;
            train_elmg_fast(&tm, &eig, &hyperparams)?
        }
    };

    let record = ModelRecord {
        model: ElmModel::new(layer, weights)?,
        hyperparams,
        seed,
    };
    record.save(model_out)?;
    println!("wrote {}", model_out.display());
    Ok(())
}

fn cmd_predict(model: &Path, inputs: &Path, out: &Path) -> Result<(), CliError> {
    println!("seed=0");
    let record = ModelRecord::load(model)?;
    let x = load_signal_matrix(inputs)?;
    let predictions = record.model.predict(&x)?;
    save_signal_matrix(out, &predictions)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_eval(model: &Path, inputs: &Path, truth: &Path) -> Result<(), CliError> {
    println!("seed=0");
    let record = ModelRecord::load(model)?;
    let x = load_signal_matrix(inputs)?;
    let t = load_signal_matrix(truth)?;
    let predictions = record.model.predict(&x)?;
    let score = nmse_db(&predictions, &t)?;
    println!("nmse_db={score}");
    Ok(())
}

fn cmd_sweep(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let config = ExperimentConfig::load(config_path)?;
    println!("seed={}", config.master_seed);
    let result = run_experiment(&config)?;

    create_dir(out)?;
    let open = |name: &str| -> Result<BufWriter<fs::File>, CliError> {
        let path = out.join(name);
        let file = fs::File::create(&path).map_err(|source| CliError::Write {
            path: path.display().to_string(),
            source,
        })?;
        Ok(BufWriter::new(file))
    };
    write_results_csv(&result, open("results.csv")?).map_err(CliError::Experiment)?;
    write_curves_csv(&result, open("curves.csv")?).map_err(CliError::Experiment)?;
    write_trials_csv(&result, open("trials.csv")?).map_err(CliError::Experiment)?;

    for cell in &result.cells {
        println!(
            "K={} N={}: elm {:.3} dB (std {:.3}), elmg {:.3} dB (std {:.3}), R={}",
            cell.num_neurons,
            cell.n_train,
            cell.elm.mean_nmse_db,
            cell.elm.std_nmse_db,
            cell.elmg.mean_nmse_db,
            cell.elmg.std_nmse_db,
            cell.elm.trials
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_spectrum(
    inputs: &Path,
    targets: &Path,
    adjacency: &Path,
    activation: &str,
    k: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    println!("seed={seed}");
    let activation = ActivationKind::from_str(activation)?;
    let x = load_signal_matrix(inputs)?;
    let t = load_signal_matrix(targets)?;
    let graph = load_graph(adjacency)?;

    let layer = HiddenLayer::random(activation, k, x.ncols(), seed)?;
    let tm = TrainingMatrices::from_layer(&layer, &x, &t)?;
    let eig = laplacian_eigendecomposition(&laplacian(&graph))?;
    let rows = smoothing_report(&tm, &eig, &Hyperparams::new(alpha, beta)?)?;

    let file = fs::File::create(out).map_err(|source| CliError::Write {
        path: out.display().to_string(),
        source,
    })?;
    write_smoothing_csv(&rows, BufWriter::new(file))?;
    println!("wrote {}", out.display());
    Ok(())
}
