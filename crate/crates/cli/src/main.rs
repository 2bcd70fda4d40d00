//! Command-line front end for the `alosim` toolkit: exact probabilities,
//! shot sampling, overlap estimation, kernel matrices, and classifier
//! training for adaptive linear-optical circuits.
//!
//! Every command prints compact JSON (one object per line for record
//! streams) to stdout, or to `--out` when given. Randomized commands take
//! a `--seed` and are bit-reproducible for a fixed seed.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use alosim::qml::{
    self, Binning, CostEvaluation, Dataset, FeatureMapSpec, GramMatrix, OptimizerConfig, SvmModel,
    VariationalModel,
};
use alosim::sampler::{self, DEFAULT_ATTEMPT_BUDGET};
use alosim::strong_sim;
use alosim::{AdaptiveInterferometer, Error, FockState};

#[derive(Parser)]
#[command(
    name = "alosim",
    version,
    about = "Adaptive linear-optical circuits: exact simulation, sampling, and kernel methods"
)]
struct Cli {
    /// Thread count for parallel kernel evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the joint distribution over (adaptive, final) outcome pairs.
    Simulate {
        /// Adaptive circuit description (JSON).
        #[arg(long)]
        input: PathBuf,
    },
    /// Print exact or estimated final-outcome probabilities.
    Prob {
        /// Adaptive circuit description (JSON).
        #[arg(long)]
        input: PathBuf,
        /// Final outcome occupancy, comma-separated (repeatable).
        /// Without it the full final distribution is printed.
        #[arg(long = "outcome")]
        outcomes: Vec<String>,
        /// Estimate each probability instead of computing it exactly.
        #[arg(long)]
        estimate: bool,
        /// Additive accuracy per adaptive term (estimate mode).
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Failure probability (estimate mode).
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Squared overlap of two normalized post-selected states.
    Overlap {
        /// Circuit preparing the first state (JSON).
        #[arg(long)]
        input: PathBuf,
        /// Circuit preparing the second state; defaults to the first.
        #[arg(long)]
        other: Option<PathBuf>,
        /// Adaptive outcome heralding the first state, comma-separated.
        #[arg(long)]
        outcome_p: String,
        /// Adaptive outcome heralding the second state, comma-separated.
        #[arg(long)]
        outcome_q: String,
        /// Estimate the overlap from counted shots instead of exactly.
        #[arg(long)]
        estimate: bool,
        /// Counted arrivals to collect (estimate mode).
        #[arg(long, default_value_t = 10_000)]
        shots: u64,
        /// Failure probability for the reported halfwidth (estimate mode).
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cap on total runs before giving up (estimate mode).
        #[arg(long, default_value_t = DEFAULT_ATTEMPT_BUDGET)]
        budget: u64,
    },
    /// Draw outcome records from a circuit, one JSON object per line.
    Sample {
        /// Adaptive circuit description (JSON).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1000)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compute the kernel (Gram) matrix of a dataset.
    Kernel {
        /// Dataset CSV: feature columns then a +-1 label column.
        #[arg(long)]
        data: PathBuf,
        /// Modes of the encoding circuit.
        #[arg(long)]
        modes: usize,
        /// Photons at the input.
        #[arg(long)]
        photons: usize,
        /// Adaptively measured modes of the encoding circuit.
        #[arg(long, default_value_t = 0)]
        adaptive_modes: usize,
        /// Estimate entries from counted shots instead of exactly.
        #[arg(long)]
        estimate: bool,
        /// Counted arrivals per entry (estimate mode).
        #[arg(long, default_value_t = 10_000)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a kernel support-vector classifier from a Gram matrix.
    SvmTrain {
        /// Gram matrix (JSON, from `kernel`).
        #[arg(long)]
        gram: PathBuf,
        /// Dataset CSV supplying the labels.
        #[arg(long)]
        data: PathBuf,
        /// Regularization strength.
        #[arg(long, default_value_t = 0.01)]
        lambda: f64,
        /// Cap on solver pair updates.
        #[arg(long, default_value_t = qml::SVM_MAX_PAIR_UPDATES)]
        max_updates: u64,
    },
    /// Classify new points with a trained kernel model.
    SvmPredict {
        /// Trained model (JSON, from `svm-train`).
        #[arg(long)]
        model: PathBuf,
        /// Training dataset CSV (defines the kernel rows).
        #[arg(long)]
        data: PathBuf,
        /// CSV of points to classify; a trailing label column is ignored.
        #[arg(long)]
        points: PathBuf,
        /// Modes of the encoding circuit.
        #[arg(long)]
        modes: usize,
        /// Photons at the input.
        #[arg(long)]
        photons: usize,
        /// Adaptively measured modes of the encoding circuit.
        #[arg(long, default_value_t = 0)]
        adaptive_modes: usize,
    },
    /// Train a variational single-circuit classifier.
    ExplicitTrain {
        /// Dataset CSV: feature columns then a +-1 label column.
        #[arg(long)]
        data: PathBuf,
        /// Modes of the encoding circuit.
        #[arg(long)]
        modes: usize,
        /// Photons at the input.
        #[arg(long)]
        photons: usize,
        /// Adaptively measured modes of the encoding circuit.
        #[arg(long, default_value_t = 0)]
        adaptive_modes: usize,
        /// Rule mapping a final outcome to a class label.
        #[arg(long, value_enum, default_value_t = BinningArg::Parity)]
        binning: BinningArg,
        /// Estimate costs from this many shots per point (default: exact).
        #[arg(long)]
        shots_per_point: Option<u64>,
        #[arg(long, default_value_t = 200)]
        max_iterations: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Time exact and estimated computations over a grid of circuit sizes.
    Bench {
        #[arg(long, value_enum, default_value_t = GridArg::Full)]
        grid: GridArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Accuracy target for the estimated-probability task.
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        /// Failure probability for the estimated-probability task.
        #[arg(long, default_value_t = 0.25)]
        delta: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BinningArg {
    /// +1 when the first unmeasured mode holds an even photon count.
    Parity,
    /// Always predict +1.
    AlwaysPlus,
    /// Always predict -1.
    AlwaysMinus,
}

impl From<BinningArg> for Binning {
    fn from(arg: BinningArg) -> Binning {
        match arg {
            BinningArg::Parity => Binning::FirstModeParity,
            BinningArg::AlwaysPlus => Binning::Constant(1),
            BinningArg::AlwaysMinus => Binning::Constant(-1),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    /// m in {4,6,8,10}, n in {1..4}, k in {0..3}.
    Full,
    /// m in {4,6}, n in {1,2}, k in {0..2}.
    Small,
}

/// Errors carry the process exit code: 2 for bad input or I/O, 3 when an
/// instance exceeds a capacity cap, 4 when shot collection starves, 5 when
/// the solver fails to converge.
enum CliError {
    Core(Error),
    Usage(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Core(err) => core_exit_code(err),
            CliError::Usage(_) => 2,
        }
    }
}

fn core_exit_code(err: &Error) -> u8 {
    match err {
        Error::Capacity(_) => 3,
        Error::Starvation { .. } => 4,
        Error::NonConvergence { .. } => 5,
        Error::GramEntry { source, .. } => core_exit_code(source),
        _ => 2,
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(err) => err.fmt(f),
            CliError::Usage(msg) => msg.fmt(f),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        CliError::Core(err)
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Usage(err.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::Usage(err.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        CliError::Usage(err.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(err) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {err}");
            return ExitCode::from(2);
        }
    }
    let output = match run(cli.command) {
        Ok(output) => output,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(err.code());
        }
    };
    if let Err(err) = emit(cli.out.as_deref(), &output) {
        eprintln!("error: {err}");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}

fn emit(out: Option<&Path>, output: &str) -> std::io::Result<()> {
    match out {
        Some(path) => {
            let mut file = fs::File::create(path)?;
            writeln!(file, "{output}")
        }
        None => {
            let stdout = std::io::stdout();
            writeln!(stdout.lock(), "{output}")
        }
    }
}

fn run(command: Command) -> CliResult<String> {
    match command {
        Command::Simulate { input } => cmd_simulate(&input),
        Command::Prob { input, outcomes, estimate, epsilon, delta, seed } => {
            cmd_prob(&input, &outcomes, estimate, epsilon, delta, seed)
        }
        Command::Overlap {
            input,
            other,
            outcome_p,
            outcome_q,
            estimate,
            shots,
            delta,
            seed,
            budget,
        } => cmd_overlap(
            &input,
            other.as_deref(),
            &outcome_p,
            &outcome_q,
            estimate,
            shots,
            delta,
            seed,
            budget,
        ),
        Command::Sample { input, shots, seed } => cmd_sample(&input, shots, seed),
        Command::Kernel { data, modes, photons, adaptive_modes, estimate, shots, seed } => {
            cmd_kernel(&data, modes, photons, adaptive_modes, estimate, shots, seed)
        }
        Command::SvmTrain { gram, data, lambda, max_updates } => {
            cmd_svm_train(&gram, &data, lambda, max_updates)
        }
        Command::SvmPredict { model, data, points, modes, photons, adaptive_modes } => {
            cmd_svm_predict(&model, &data, &points, modes, photons, adaptive_modes)
        }
        Command::ExplicitTrain {
            data,
            modes,
            photons,
            adaptive_modes,
            binning,
            shots_per_point,
            max_iterations,
            seed,
        } => cmd_explicit_train(
            &data,
            modes,
            photons,
            adaptive_modes,
            binning,
            shots_per_point,
            max_iterations,
            seed,
        ),
        Command::Bench { grid, seed, epsilon, delta } => cmd_bench(grid, seed, epsilon, delta),
    }
}

fn load_circuit(path: &Path) -> CliResult<AdaptiveInterferometer> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Parses a comma-separated occupancy list; an empty string is the empty
/// outcome on zero modes.
fn parse_outcome(text: &str) -> CliResult<FockState> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(FockState::empty());
    }
    let occ = trimmed
        .split(',')
        .map(|field| {
            field.trim().parse::<usize>().map_err(|err| {
                CliError::Usage(format!("bad occupancy entry {field:?} in {text:?}: {err}"))
            })
        })
        .collect::<CliResult<Vec<usize>>>()?;
    Ok(FockState::new(occ))
}

#[derive(Serialize)]
struct JointRow<'a> {
    p: &'a FockState,
    s: &'a FockState,
    prob: f64,
}

fn cmd_simulate(input: &Path) -> CliResult<String> {
    let a = load_circuit(input)?;
    let joint = strong_sim::joint_distribution(&a)?;
    let lines = joint
        .iter()
        .map(|((p, s), prob)| {
            serde_json::to_string(&JointRow { p, s, prob: *prob }).map_err(CliError::from)
        })
        .collect::<CliResult<Vec<String>>>()?;
    Ok(lines.join("\n"))
}

#[derive(Serialize)]
struct ProbRow<'a> {
    state: &'a FockState,
    prob: f64,
}

#[derive(Serialize)]
struct ProbEstimateRow<'a> {
    state: &'a FockState,
    prob: f64,
    abs_error_bound: f64,
    samples_used: u64,
}

fn cmd_prob(
    input: &Path,
    outcomes: &[String],
    estimate: bool,
    epsilon: f64,
    delta: f64,
    seed: u64,
) -> CliResult<String> {
    let a = load_circuit(input)?;
    if outcomes.is_empty() {
        if estimate {
            return Err(CliError::Usage("--estimate requires at least one --outcome".into()));
        }
        let dist = strong_sim::final_distribution(&a)?;
        return Ok(serde_json::to_string(&dist)?);
    }
    let mut lines = Vec::with_capacity(outcomes.len());
    for (index, text) in outcomes.iter().enumerate() {
        let s = parse_outcome(text)?;
        let line = if estimate {
            let est = strong_sim::prob_final_estimate(
                &a,
                &s,
                epsilon,
                delta,
                mix_seed(seed, &[index as u64]),
            )?;
            serde_json::to_string(&ProbEstimateRow {
                state: &s,
                prob: est.value.re,
                abs_error_bound: est.abs_error_bound,
                samples_used: est.samples_used,
            })?
        } else {
            let prob = strong_sim::prob_final_exact(&a, &s)?;
            serde_json::to_string(&ProbRow { state: &s, prob })?
        };
        lines.push(line);
    }
    Ok(lines.join("\n"))
}

#[derive(Serialize)]
struct OverlapRow {
    overlap: f64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_overlap(
    input: &Path,
    other: Option<&Path>,
    outcome_p: &str,
    outcome_q: &str,
    estimate: bool,
    shots: u64,
    delta: f64,
    seed: u64,
    budget: u64,
) -> CliResult<String> {
    let ua = load_circuit(input)?;
    let va = match other {
        Some(path) => load_circuit(path)?,
        None => ua.clone(),
    };
    let p = parse_outcome(outcome_p)?;
    let q = parse_outcome(outcome_q)?;
    if estimate {
        let report =
            sampler::estimate_overlap_sampled_pair(&ua, &p, &va, &q, shots, seed, delta, budget)?;
        Ok(serde_json::to_string(&report)?)
    } else {
        let overlap = strong_sim::overlap_normalized(&ua, &p, &va, &q)?;
        Ok(serde_json::to_string(&OverlapRow { overlap })?)
    }
}

fn cmd_sample(input: &Path, shots: u64, seed: u64) -> CliResult<String> {
    let a = load_circuit(input)?;
    let records = sampler::sample(&a, shots, seed)?;
    let lines = records
        .iter()
        .map(|record| serde_json::to_string(record).map_err(CliError::from))
        .collect::<CliResult<Vec<String>>>()?;
    Ok(lines.join("\n"))
}

fn feature_map_for(
    dataset: &Dataset,
    modes: usize,
    photons: usize,
    adaptive_modes: usize,
) -> CliResult<FeatureMapSpec> {
    Ok(qml::default_feature_map(dataset.dim(), modes, photons, adaptive_modes)?)
}

fn cmd_kernel(
    data: &Path,
    modes: usize,
    photons: usize,
    adaptive_modes: usize,
    estimate: bool,
    shots: u64,
    seed: u64,
) -> CliResult<String> {
    let dataset = Dataset::from_csv_path(data)?;
    let fm = feature_map_for(&dataset, modes, photons, adaptive_modes)?;
    let gram = if estimate {
        qml::gram_estimated(&fm, &dataset, shots, seed)?
    } else {
        qml::gram_exact(&fm, &dataset)?
    };
    Ok(serde_json::to_string(&gram)?)
}

fn cmd_svm_train(gram: &Path, data: &Path, lambda: f64, max_updates: u64) -> CliResult<String> {
    let gram: GramMatrix = serde_json::from_str(&fs::read_to_string(gram)?)?;
    let dataset = Dataset::from_csv_path(data)?;
    let model = qml::svm_train_with_limit(&gram, dataset.labels(), lambda, max_updates)?;
    Ok(serde_json::to_string(&model)?)
}

/// Reads prediction points: rows of `dim` floats, with an optional header
/// row and an optional trailing label column (ignored).
fn read_points(path: &Path, dim: usize) -> CliResult<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: Option<Vec<f64>> =
            record.iter().map(|field| field.parse::<f64>().ok()).collect();
        let Some(mut row) = parsed else {
            if index == 0 {
                continue;
            }
            return Err(CliError::Usage(format!(
                "row {} of {} is not numeric",
                index + 1,
                path.display()
            )));
        };
        if row.len() == dim + 1 {
            row.truncate(dim);
        }
        if row.len() != dim {
            return Err(CliError::Usage(format!(
                "row {} of {} has {} feature columns, expected {dim}",
                index + 1,
                path.display(),
                row.len()
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Usage(format!("no data rows in {}", path.display())));
    }
    Ok(rows)
}

#[derive(Serialize)]
struct PredictionRow {
    index: usize,
    label: i8,
}

fn cmd_svm_predict(
    model: &Path,
    data: &Path,
    points: &Path,
    modes: usize,
    photons: usize,
    adaptive_modes: usize,
) -> CliResult<String> {
    let model: SvmModel = serde_json::from_str(&fs::read_to_string(model)?)?;
    let dataset = Dataset::from_csv_path(data)?;
    if model.alphas.len() != dataset.len() {
        return Err(CliError::Usage(format!(
            "model was trained on {} points but the dataset has {}",
            model.alphas.len(),
            dataset.len()
        )));
    }
    let fm = feature_map_for(&dataset, modes, photons, adaptive_modes)?;
    let queries = read_points(points, dataset.dim())?;
    let mut lines = Vec::with_capacity(queries.len());
    for (index, x) in queries.iter().enumerate() {
        let row = dataset
            .points()
            .iter()
            .map(|train| qml::kernel_entry_exact(&fm, x, train))
            .collect::<Result<Vec<f64>, Error>>()?;
        let label = qml::svm_predict(&model, &row)?;
        lines.push(serde_json::to_string(&PredictionRow { index, label })?);
    }
    Ok(lines.join("\n"))
}

#[allow(clippy::too_many_arguments)]
fn cmd_explicit_train(
    data: &Path,
    modes: usize,
    photons: usize,
    adaptive_modes: usize,
    binning: BinningArg,
    shots_per_point: Option<u64>,
    max_iterations: u64,
    seed: u64,
) -> CliResult<String> {
    let dataset = Dataset::from_csv_path(data)?;
    let fm = feature_map_for(&dataset, modes, photons, adaptive_modes)?;
    let theta = vec![0.0; alosim::interferometer::mesh_param_count(modes - adaptive_modes)];
    let vm = VariationalModel::new(fm, theta, binning.into())?;
    let evaluation = match shots_per_point {
        Some(per_point) => CostEvaluation::Shots { per_point },
        None => CostEvaluation::Exact,
    };
    let config = OptimizerConfig { evaluation, max_iterations, ..OptimizerConfig::default() };
    let outcome = qml::explicit_train(&vm, &dataset, &config, seed)?;
    Ok(serde_json::to_string(&outcome)?)
}

#[derive(Serialize)]
struct BenchMeta {
    grid: &'static str,
    seed: u64,
    epsilon: f64,
    delta: f64,
}

#[derive(Serialize)]
struct BenchRow {
    m: usize,
    n: usize,
    k: usize,
    r: usize,
    task: &'static str,
    wall_time_s: f64,
    permanent_evals: u64,
    estimator_samples: u64,
}

#[derive(Serialize)]
struct BenchReport {
    metadata: BenchMeta,
    rows: Vec<BenchRow>,
}

/// Splitmix-style mixer deriving independent sub-seeds from a base seed.
fn mix_seed(base: u64, tags: &[u64]) -> u64 {
    let mut state = base ^ 0x9E37_79B9_7F4A_7C15;
    for &tag in tags {
        state = state.wrapping_add(tag).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        state ^= state >> 31;
    }
    state
}

fn cmd_bench(grid: GridArg, seed: u64, epsilon: f64, delta: f64) -> CliResult<String> {
    let (ms, ns, ks, grid_name): (&[usize], &[usize], &[usize], &'static str) = match grid {
        GridArg::Full => (&[4, 6, 8, 10], &[1, 2, 3, 4], &[0, 1, 2, 3], "full"),
        GridArg::Small => (&[4, 6], &[1, 2], &[0, 1, 2], "small"),
    };
    let mut rows = Vec::new();
    for &m in ms {
        for &n in ns {
            if n > m {
                continue;
            }
            for &k in ks {
                if k >= m {
                    continue;
                }
                let a = alosim::interferometer::random_adaptive(
                    m,
                    k,
                    n,
                    mix_seed(seed, &[m as u64, n as u64, k as u64]),
                )?;
                for r in 0..=n {
                    // Phi(0, r) is empty for r > 0: no heralded state exists.
                    if k == 0 && r > 0 {
                        continue;
                    }
                    let p = if k == 0 {
                        FockState::empty()
                    } else {
                        alosim::fock::enumerate_phi(k, r)?[0].clone()
                    };
                    let s = alosim::fock::enumerate_phi(m - k, n - r)?[0].clone();

                    let start = Instant::now();
                    let ip = strong_sim::inner_product_structured(&a, &p, &a, &p)?;
                    rows.push(BenchRow {
                        m,
                        n,
                        k,
                        r,
                        task: "overlap_structured",
                        wall_time_s: start.elapsed().as_secs_f64(),
                        permanent_evals: ip.permanent_evals,
                        estimator_samples: 0,
                    });

                    let start = Instant::now();
                    let exact = strong_sim::prob_final_exact_counted(&a, &s)?;
                    rows.push(BenchRow {
                        m,
                        n,
                        k,
                        r,
                        task: "probability_exact",
                        wall_time_s: start.elapsed().as_secs_f64(),
                        permanent_evals: exact.permanent_evals,
                        estimator_samples: 0,
                    });

                    let start = Instant::now();
                    let est = strong_sim::prob_final_estimate(
                        &a,
                        &s,
                        epsilon,
                        delta,
                        mix_seed(seed, &[m as u64, n as u64, k as u64, r as u64]),
                    )?;
                    rows.push(BenchRow {
                        m,
                        n,
                        k,
                        r,
                        task: "probability_estimate",
                        wall_time_s: start.elapsed().as_secs_f64(),
                        permanent_evals: 0,
                        estimator_samples: est.samples_used,
                    });
                }
            }
        }
    }
    let report =
        BenchReport { metadata: BenchMeta { grid: grid_name, seed, epsilon, delta }, rows };
    Ok(serde_json::to_string(&report)?)
}
