//! Experiment orchestration behind the `haarscat` binary.
//!
//! Configuration comes from a JSON file plus flag overrides (flags win,
//! then the file, then defaults). Every run hashes its resolved
//! configuration; artifacts land under `<output_dir>/<hash>/` so reruns
//! with identical configuration are cache hits. Progress goes to stderr,
//! machine-readable output to files only.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify;
use crate::datasets::{self, Dataset};
use crate::error::{Error, Result};
use crate::features::{self, ColumnMeta, FeatureMatrix};
use crate::multires::{self, MultiresApprox};
use crate::pairing_learn;
use crate::reconstruct;
use crate::scattering;

/// Where the members used by `features`/`connectivity` come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleSource {
    /// The output of `learn` for the same configuration.
    Learned,
    /// Known-geometry grid constructions, variants `0..ensemble`.
    Grid,
}

/// Dataset selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum DatasetSpec {
    /// IDX image/label files, optionally truncated.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        #[serde(default)]
        test_images: Option<PathBuf>,
        #[serde(default)]
        test_labels: Option<PathBuf>,
        #[serde(default)]
        train_limit: Option<usize>,
        #[serde(default)]
        test_limit: Option<usize>,
    },
    /// Deterministic stroke-rendered digits written to IDX and loaded back.
    SyntheticDigits { train: usize, test: usize, data_seed: u64 },
    /// Smooth nonnegative signals on a pixel grid (no labels).
    SmoothGrid {
        width: usize,
        height: usize,
        count: usize,
        smoothing_steps: usize,
        data_seed: u64,
    },
    /// Two separable Gaussian blobs (labels 0/1), for end-to-end sanity.
    TwoBlobs {
        train: usize,
        test: usize,
        dim: usize,
        separation: f64,
        data_seed: u64,
    },
    /// Generic signals as CSV, one signal per row; labels are one
    /// integer per line. No ground-truth geometry.
    Csv {
        train_signals: PathBuf,
        #[serde(default)]
        train_labels: Option<PathBuf>,
        #[serde(default)]
        test_signals: Option<PathBuf>,
        #[serde(default)]
        test_labels: Option<PathBuf>,
    },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::SyntheticDigits {
            train: 500,
            test: 200,
            data_seed: 7,
        }
    }
}

/// Resolved experiment configuration. `depth` is the cascade depth J,
/// `max_order` the order-truncation cap, `ensemble` the number of
/// multiresolutions N, and `dictionary_size` the reduced dimension M
/// (per-class K = M / classes unless `features_k` overrides it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub depth: usize,
    pub max_order: usize,
    pub ensemble: usize,
    pub ensemble_source: EnsembleSource,
    pub dictionary_size: usize,
    pub features_k: Option<usize>,
    pub standardize: bool,
    pub sigma: Option<f64>,
    pub lambda: f64,
    pub seed: u64,
    pub scramble_seed: Option<u64>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSpec::default(),
            depth: 4,
            max_order: 4,
            ensemble: 1,
            ensemble_source: EnsembleSource::Learned,
            dictionary_size: 1000,
            features_k: None,
            standardize: true,
            sigma: None,
            lambda: 1e-3,
            seed: 0,
            scramble_seed: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Hex digest of the canonical JSON serialization; the artifact key.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(self.hash())
    }

    fn validate(&self) -> Result<()> {
        if self.max_order > self.depth {
            return Err(Error::InvalidConfig(format!(
                "max_order {} exceeds depth {}",
                self.max_order, self.depth
            )));
        }
        if self.ensemble == 0 {
            return Err(Error::InvalidConfig("ensemble size must be ≥ 1".into()));
        }
        if self.lambda <= 0.0 {
            return Err(Error::InvalidConfig("lambda must be positive".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

#[derive(Parser, Debug)]
#[command(
    name = "haarscat",
    about = "Haar scattering on graphs: learn multiresolutions, extract invariant features, classify",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (fallback: HAAR_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learn an ensemble of multiresolutions from training signals.
    Learn(RunArgs),
    /// Compute order-truncated scattering features for train/test splits.
    Features(RunArgs),
    /// Select a reduced feature dictionary by per-class PLS.
    Select(RunArgs),
    /// Train the Gaussian-kernel classifier head.
    Train(RunArgs),
    /// Evaluate the trained model on the test split.
    Evaluate(RunArgs),
    /// Score multiresolution connectivity against the dataset geometry.
    Connectivity(RunArgs),
    /// Forward-and-invert round trips through an interlaced family.
    ReconstructDemo(ReconstructArgs),
    /// Boolean or/xor cascade over every input of a small dimension.
    BoolDemo(BoolArgs),
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// JSON configuration file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    max_order: Option<usize>,
    #[arg(long)]
    ensemble: Option<usize>,
    /// "learned" or "grid".
    #[arg(long)]
    ensemble_source: Option<String>,
    #[arg(long)]
    dict_size: Option<usize>,
    /// Features per class (default dict_size / classes).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    scramble_seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    #[arg(long, default_value_t = 16)]
    d: usize,
    #[arg(long, default_value_t = 4)]
    depth: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
}

#[derive(Args, Debug)]
struct BoolArgs {
    #[arg(long, default_value_t = 4)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.depth {
            config.depth = v;
        }
        if let Some(v) = self.max_order {
            config.max_order = v;
        }
        if let Some(v) = self.ensemble {
            config.ensemble = v;
        }
        if let Some(v) = &self.ensemble_source {
            config.ensemble_source = match v.as_str() {
                "learned" => EnsembleSource::Learned,
                "grid" => EnsembleSource::Grid,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown ensemble source '{other}' (expected learned|grid)"
                    )))
                }
            };
        }
        if let Some(v) = self.dict_size {
            config.dictionary_size = v;
        }
        if let Some(v) = self.k {
            config.features_k = Some(v);
        }
        if let Some(v) = self.sigma {
            config.sigma = Some(v);
        }
        if let Some(v) = self.lambda {
            config.lambda = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.scramble_seed {
            config.scramble_seed = Some(v);
        }
        if let Some(v) = &self.output_dir {
            config.output_dir = v.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

fn log(message: &str) {
    let _ = writeln!(std::io::stderr(), "[haarscat] {message}");
}

/// Entry point used by the binary.
pub fn run() -> Result<()> {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("HAAR_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        // Ignore the error if a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Learn(args) => cmd_learn(&args.resolve()?),
        Command::Features(args) => cmd_features(&args.resolve()?),
        Command::Select(args) => cmd_select(&args.resolve()?),
        Command::Train(args) => cmd_train(&args.resolve()?),
        Command::Evaluate(args) => cmd_evaluate(&args.resolve()?).map(|_| ()),
        Command::Connectivity(args) => cmd_connectivity(&args.resolve()?).map(|_| ()),
        Command::ReconstructDemo(args) => {
            cmd_reconstruct_demo(args.d, args.depth, args.trials, args.seed, &args.output_dir)
                .map(|_| ())
        }
        Command::BoolDemo(args) => cmd_bool_demo(args.d, args.depth, &args.output_dir).map(|_| ()),
    }
}

// ---------------------------------------------------------------------------
// Dataset loading
// ---------------------------------------------------------------------------

fn data_dir(config: &ExperimentConfig) -> Result<PathBuf> {
    let dir = config.run_dir().join("data");
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn two_blobs(count: usize, dim: usize, separation: f64, seed: u64) -> Result<Dataset> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut signals = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let label = i % 2;
        let center = if label == 0 { -separation / 2.0 } else { separation / 2.0 };
        signals.push((0..dim).map(|_| center + rng.random_range(-0.5..0.5)).collect());
        labels.push(label);
    }
    Dataset::new(signals, Some(labels), None)
}

/// Whether the configured dataset provides a test split.
pub fn has_test_split(config: &ExperimentConfig) -> bool {
    match &config.dataset {
        DatasetSpec::Idx { test_images, test_labels, .. } => {
            test_images.is_some() && test_labels.is_some()
        }
        DatasetSpec::SmoothGrid { .. } => false,
        DatasetSpec::SyntheticDigits { .. } | DatasetSpec::TwoBlobs { .. } => true,
        DatasetSpec::Csv { test_signals, .. } => test_signals.is_some(),
    }
}

/// Load the train or test split described by the configuration, applying
/// the configured scramble.
pub fn load_split(config: &ExperimentConfig, test: bool) -> Result<Dataset> {
    let ds = match &config.dataset {
        DatasetSpec::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            train_limit,
            test_limit,
        } => {
            if test {
                let images = test_images
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("no test IDX files configured".into()))?;
                let labels = test_labels
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("no test IDX labels configured".into()))?;
                let ds = datasets::load_idx(images, labels)?;
                match test_limit {
                    Some(n) => ds.take(*n),
                    None => ds,
                }
            } else {
                let ds = datasets::load_idx(train_images, train_labels)?;
                match train_limit {
                    Some(n) => ds.take(*n),
                    None => ds,
                }
            }
        }
        DatasetSpec::SyntheticDigits { train, test: test_n, data_seed } => {
            let dir = data_dir(config)?;
            if test {
                datasets::synthetic_digits_dataset(&dir, *test_n, data_seed + 1)?
            } else {
                datasets::synthetic_digits_dataset(&dir, *train, *data_seed)?
            }
        }
        DatasetSpec::SmoothGrid {
            width,
            height,
            count,
            smoothing_steps,
            data_seed,
        } => {
            if test {
                return Err(Error::InvalidConfig("smooth-grid has no test split".into()));
            }
            datasets::synthetic_smooth(
                &datasets::grid_graph(*width, *height),
                *count,
                *data_seed,
                *smoothing_steps,
            )
        }
        DatasetSpec::TwoBlobs {
            train,
            test: test_n,
            dim,
            separation,
            data_seed,
        } => {
            if test {
                two_blobs(*test_n, *dim, *separation, data_seed + 1)?
            } else {
                two_blobs(*train, *dim, *separation, *data_seed)?
            }
        }
        DatasetSpec::Csv {
            train_signals,
            train_labels,
            test_signals,
            test_labels,
        } => {
            let (signals_path, labels_path) = if test {
                let signals = test_signals
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("no test CSV configured".into()))?;
                (signals, test_labels)
            } else {
                (train_signals, train_labels)
            };
            let signals = datasets::read_signals_csv(signals_path)?;
            let labels = match labels_path {
                Some(path) => Some(datasets::read_labels_csv(path)?),
                None => None,
            };
            Dataset::new(signals, labels, None)?
        }
    };
    match config.scramble_seed {
        Some(seed) => datasets::scramble(&ds, seed),
        None => Ok(ds),
    }
}

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

fn ensemble_dir(config: &ExperimentConfig) -> PathBuf {
    config.run_dir().join("ensemble")
}

#[derive(Serialize, Deserialize)]
struct EnsembleManifest {
    config_hash: String,
    seed: u64,
    depth: usize,
    members: usize,
    files: Vec<String>,
    subsets: Vec<Vec<usize>>,
    /// Matching cost per member and level.
    level_costs: Vec<Vec<f64>>,
}

/// Learn the ensemble and persist one JSON file per member plus a
/// manifest carrying the seed, subset assignment and per-level costs.
pub fn cmd_learn(config: &ExperimentConfig) -> Result<()> {
    let dir = ensemble_dir(config);
    let manifest_path = dir.join("manifest.json");
    if manifest_path.exists() {
        log(&format!("cache hit: {}", manifest_path.display()));
        return Ok(());
    }
    let train = load_split(config, false)?;
    log(&format!(
        "learning {} multiresolutions at depth {} from {} signals (d = {})",
        config.ensemble,
        config.depth,
        train.len(),
        train.d()
    ));
    let outcome = pairing_learn::learn_ensemble(&train.signals, config.depth, config.ensemble, config.seed)?;
    std::fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    let mut level_costs = Vec::new();
    for (i, member) in outcome.members.iter().enumerate() {
        let file = format!("member_{i:03}.json");
        std::fs::write(dir.join(&file), member.multires.to_json_string())?;
        let costs: Vec<f64> = member.level_results.iter().map(|r| r.total_cost).collect();
        for (j, c) in costs.iter().enumerate() {
            log(&format!("member {i} level {j}: matching cost {c:.6}"));
        }
        files.push(file);
        level_costs.push(costs);
    }
    let manifest = EnsembleManifest {
        config_hash: config.hash(),
        seed: outcome.seed,
        depth: config.depth,
        members: outcome.members.len(),
        files,
        subsets: outcome.subsets,
        level_costs,
    };
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    log(&format!("wrote {}", manifest_path.display()));
    Ok(())
}

/// Members used downstream: either the learned ensemble from disk or
/// known-geometry grid variants. Grid members follow a scramble by
/// relabeling through the recorded permutation, so they pair the same
/// underlying pixels.
pub fn ensemble_members(config: &ExperimentConfig, dataset: &Dataset) -> Result<Vec<MultiresApprox>> {
    match config.ensemble_source {
        EnsembleSource::Learned => {
            let dir = ensemble_dir(config);
            let manifest: EnsembleManifest =
                serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
            manifest
                .files
                .iter()
                .map(|f| MultiresApprox::from_json_str(&std::fs::read_to_string(dir.join(f))?))
                .collect()
        }
        EnsembleSource::Grid => {
            let d = dataset.d();
            let side = (d as f64).sqrt().round() as usize;
            if side * side != d {
                return Err(Error::InvalidConfig(format!(
                    "grid ensemble needs a square signal length, got {d}"
                )));
            }
            let mut members = Vec::with_capacity(config.ensemble);
            for variant in 0..config.ensemble {
                members.push(multires::grid_multires(side, side, config.depth, variant)?);
            }
            if let Some(perm) = &dataset.permutation {
                let mut inverse = vec![0usize; d];
                for (v, &src) in perm.iter().enumerate() {
                    inverse[src] = v;
                }
                members = members
                    .into_iter()
                    .map(|m| m.relabel(&inverse))
                    .collect::<Result<Vec<_>>>()?;
            }
            Ok(members)
        }
    }
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct FeatureSidecar {
    config_hash: String,
    #[serde(rename = "J")]
    depth: usize,
    m_max: usize,
    members: usize,
    flattening: String,
    rows: usize,
    cols: usize,
    labels: Option<Vec<usize>>,
    columns: Vec<ColumnMeta>,
}

fn write_features(path_base: &Path, matrix: &FeatureMatrix, labels: Option<&[usize]>, config: &ExperimentConfig) -> Result<()> {
    let mut bytes = Vec::with_capacity(matrix.rows() * matrix.cols() * 8);
    for i in 0..matrix.rows() {
        for v in matrix.row(i) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path_base.with_extension("bin"), bytes)?;
    let sidecar = FeatureSidecar {
        config_hash: config.hash(),
        depth: config.depth,
        m_max: config.max_order,
        members: config.ensemble,
        flattening: "member-major, then (n, q) lexicographic over columns with order <= m_max".into(),
        rows: matrix.rows(),
        cols: matrix.cols(),
        labels: labels.map(<[usize]>::to_vec),
        columns: matrix.column_meta().to_vec(),
    };
    std::fs::write(
        path_base.with_extension("json"),
        serde_json::to_string_pretty(&sidecar)?,
    )?;
    Ok(())
}

fn read_features(path_base: &Path) -> Result<(FeatureMatrix, Option<Vec<usize>>)> {
    let sidecar: FeatureSidecar =
        serde_json::from_str(&std::fs::read_to_string(path_base.with_extension("json"))?)?;
    let bytes = std::fs::read(path_base.with_extension("bin"))?;
    if bytes.len() != sidecar.rows * sidecar.cols * 8 {
        return Err(Error::InvalidConfig("feature binary does not match sidecar".into()));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunks")))
        .collect();
    Ok((
        FeatureMatrix::new(sidecar.rows, sidecar.cols, data, sidecar.columns)?,
        sidecar.labels,
    ))
}

/// Compute and persist order-truncated scattering features for the train
/// split and, when the dataset has one, the test split.
pub fn cmd_features(config: &ExperimentConfig) -> Result<()> {
    let dir = config.run_dir().join("features");
    if dir.join("train.json").exists() {
        log(&format!("cache hit: {}", dir.display()));
        return Ok(());
    }
    let train = load_split(config, false)?;
    let members = ensemble_members(config, &train)?;
    std::fs::create_dir_all(&dir)?;
    log(&format!(
        "computing features: {} members, J = {}, m_max = {}",
        members.len(),
        config.depth,
        config.max_order
    ));
    let matrix = features::scattering_feature_matrix(&train.signals, &members, config.depth, config.max_order)?;
    let profile = features::order_energy_profile(&matrix, config.depth);
    log(&format!(
        "order energy profile (diagnostic): {}",
        profile
            .iter()
            .enumerate()
            .map(|(m, e)| format!("m={m}: {:.4}", e))
            .collect::<Vec<_>>()
            .join(", ")
    ));
    write_features(&dir.join("train"), &matrix, train.labels.as_deref(), config)?;
    if has_test_split(config) {
        let test = load_split(config, true)?;
        let matrix = features::scattering_feature_matrix(&test.signals, &members, config.depth, config.max_order)?;
        write_features(&dir.join("test"), &matrix, test.labels.as_deref(), config)?;
    }
    log(&format!("wrote {}", dir.display()));
    Ok(())
}

// ---------------------------------------------------------------------------
// Selection, training, evaluation
// ---------------------------------------------------------------------------

/// Build and persist the PLS dictionary from the training features.
pub fn cmd_select(config: &ExperimentConfig) -> Result<()> {
    let path = config.run_dir().join("dictionary.json");
    if path.exists() {
        log(&format!("cache hit: {}", path.display()));
        return Ok(());
    }
    let (matrix, labels) = read_features(&config.run_dir().join("features").join("train"))?;
    let labels = labels.ok_or_else(|| Error::InvalidConfig("training features carry no labels".into()))?;
    let classes: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
    let k = config
        .features_k
        .unwrap_or((config.dictionary_size / classes.len().max(1)).max(1));
    log(&format!("selecting {k} features per class over {} classes", classes.len()));
    let dictionary = features::build_dictionary_with(&matrix, &labels, k, config.standardize)?;
    std::fs::write(&path, dictionary.to_json_string())?;
    log(&format!("wrote {} (M = {})", path.display(), dictionary.output_width()));
    Ok(())
}

/// Train and persist the kernel model on projected training features.
pub fn cmd_train(config: &ExperimentConfig) -> Result<()> {
    let path = config.run_dir().join("model.bin");
    if path.exists() {
        log(&format!("cache hit: {}", path.display()));
        return Ok(());
    }
    let dictionary = features::FeatureDictionary::from_json_str(&std::fs::read_to_string(
        config.run_dir().join("dictionary.json"),
    )?)?;
    let (matrix, labels) = read_features(&config.run_dir().join("features").join("train"))?;
    let labels = labels.ok_or_else(|| Error::InvalidConfig("training features carry no labels".into()))?;
    let rows = features::project_matrix(&dictionary, &matrix)?;
    let sigma = config.sigma.unwrap_or_else(|| classify::median_distance(&rows, 1000));
    log(&format!("training kernel model: sigma = {sigma:.6}, lambda = {}", config.lambda));
    let model = classify::train(&rows, &labels, sigma, config.lambda)?;
    model.save(&path)?;
    log(&format!("wrote {}", path.display()));
    Ok(())
}

/// Evaluation report: error rates, dictionary shape and timings.
#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluateReport {
    pub config_hash: String,
    pub seed: u64,
    pub error_rate: f64,
    pub per_class_errors: Vec<f64>,
    pub classes: Vec<usize>,
    #[serde(rename = "M")]
    pub dictionary_width: usize,
    #[serde(rename = "K")]
    pub per_class_features: usize,
    pub sigma: f64,
    pub lambda: f64,
    pub test_rows: usize,
    pub timings_ms: std::collections::BTreeMap<String, u128>,
}

/// Evaluate the persisted model on the test split and write the report.
pub fn cmd_evaluate(config: &ExperimentConfig) -> Result<EvaluateReport> {
    let report_path = config.run_dir().join("reports").join("evaluate.json");
    if report_path.exists() {
        log(&format!("cache hit: {}", report_path.display()));
        return Ok(serde_json::from_str(&std::fs::read_to_string(&report_path)?)?);
    }
    let started = std::time::Instant::now();
    let dictionary = features::FeatureDictionary::from_json_str(&std::fs::read_to_string(
        config.run_dir().join("dictionary.json"),
    )?)?;
    let model = classify::KernelModel::load(&config.run_dir().join("model.bin"))?;
    let (matrix, labels) = read_features(&config.run_dir().join("features").join("test"))?;
    let labels = labels.ok_or_else(|| Error::InvalidConfig("test features carry no labels".into()))?;
    let project_start = std::time::Instant::now();
    let rows = features::project_matrix(&dictionary, &matrix)?;
    let project_ms = project_start.elapsed().as_millis();
    let predict_start = std::time::Instant::now();
    let error_rate = classify::error_rate(&model, &rows, &labels)?;
    let per_class = classify::per_class_errors(&model, &rows, &labels)?;
    let predict_ms = predict_start.elapsed().as_millis();
    let mut timings = std::collections::BTreeMap::new();
    timings.insert("project".into(), project_ms);
    timings.insert("predict".into(), predict_ms);
    timings.insert("total".into(), started.elapsed().as_millis());
    let report = EvaluateReport {
        config_hash: config.hash(),
        seed: config.seed,
        error_rate,
        per_class_errors: per_class,
        classes: model.classes().to_vec(),
        dictionary_width: dictionary.output_width(),
        per_class_features: dictionary
            .classes
            .first()
            .map_or(0, |c| c.selected.len()),
        sigma: model.sigma(),
        lambda: model.lambda(),
        test_rows: rows.len(),
        timings_ms: timings,
    };
    std::fs::create_dir_all(report_path.parent().expect("report dir"))?;
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    log(&format!(
        "error rate {:.4} ({} test rows) -> {}",
        report.error_rate,
        report.test_rows,
        report_path.display()
    ));
    Ok(report)
}

// ---------------------------------------------------------------------------
// Connectivity
// ---------------------------------------------------------------------------

/// Connectivity report: per-member and averaged per-level connected
/// fractions over active vertices.
#[derive(Debug, Serialize, Deserialize)]
pub struct ConnectivityReport {
    pub config_hash: String,
    pub seed: u64,
    pub per_member: Vec<Vec<f64>>,
    pub average: Vec<f64>,
}

/// Score every ensemble member against the dataset's ground-truth
/// geometry, restricted to active vertices.
pub fn cmd_connectivity(config: &ExperimentConfig) -> Result<ConnectivityReport> {
    let report_path = config.run_dir().join("reports").join("connectivity.json");
    if report_path.exists() {
        log(&format!("cache hit: {}", report_path.display()));
        return Ok(serde_json::from_str(&std::fs::read_to_string(&report_path)?)?);
    }
    let train = load_split(config, false)?;
    let geometry = train.geometry.clone().ok_or(Error::MissingGeometry)?;
    let members = ensemble_members(config, &train)?;
    let per_member: Result<Vec<Vec<f64>>> = members
        .iter()
        .map(|m| multires::connectivity_fraction(m, &geometry, Some(&train.active)))
        .collect();
    let per_member = per_member?;
    let levels = per_member.first().map_or(0, Vec::len);
    let average: Vec<f64> = (0..levels)
        .map(|j| per_member.iter().map(|m| m[j]).sum::<f64>() / per_member.len() as f64)
        .collect();
    let report = ConnectivityReport {
        config_hash: config.hash(),
        seed: config.seed,
        per_member,
        average,
    };
    std::fs::create_dir_all(report_path.parent().expect("report dir"))?;
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    for (j, f) in report.average.iter().enumerate() {
        log(&format!("level {j}: average connected fraction {f:.4}"));
    }
    log(&format!("wrote {}", report_path.display()));
    Ok(report)
}

// ---------------------------------------------------------------------------
// Demos
// ---------------------------------------------------------------------------

/// Round-trip reconstruction report.
#[derive(Debug, Serialize, Deserialize)]
pub struct ReconstructReport {
    pub d: usize,
    #[serde(rename = "J")]
    pub depth: usize,
    pub trials: usize,
    pub seed: u64,
    pub max_abs_error: f64,
    pub ambiguous_count: usize,
}

/// Run Gaussian round trips through the standard interlaced family.
pub fn cmd_reconstruct_demo(
    d: usize,
    depth: usize,
    trials: usize,
    seed: u64,
    output_dir: &Path,
) -> Result<ReconstructReport> {
    use rand::SeedableRng;
    let family = reconstruct::standard_interlaced_family(d, depth)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut max_abs_error = 0.0f64;
    let mut ambiguous = 0usize;
    for _ in 0..trials {
        let x: Vec<f64> = (0..d).map(|_| datasets::standard_normal(&mut rng)).collect();
        let outputs = family.transforms(&x)?;
        match reconstruct::reconstruct(&outputs, &family) {
            Ok(recovered) => {
                let err = x
                    .iter()
                    .zip(&recovered)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                max_abs_error = max_abs_error.max(err);
            }
            Err(Error::Ambiguous { .. }) => ambiguous += 1,
            Err(e) => return Err(e),
        }
    }
    let report = ReconstructReport {
        d,
        depth,
        trials,
        seed,
        max_abs_error,
        ambiguous_count: ambiguous,
    };
    let path = output_dir.join("reports");
    std::fs::create_dir_all(&path)?;
    let file = path.join(format!("reconstruct_d{d}_J{depth}_t{trials}_s{seed}.json"));
    std::fs::write(&file, serde_json::to_string_pretty(&report)?)?;
    log(&format!(
        "max |error| {:.3e}, {} ambiguous -> {}",
        report.max_abs_error,
        report.ambiguous_count,
        file.display()
    ));
    Ok(report)
}

/// Boolean cascade report.
#[derive(Debug, Serialize, Deserialize)]
pub struct BoolReport {
    pub d: usize,
    #[serde(rename = "J")]
    pub depth: usize,
    pub inputs: usize,
    pub oracle_mismatches: usize,
    pub constant_inputs_have_false_xor: bool,
}

/// Run the or/xor cascade over every boolean input of dimension `d` and
/// compare against a direct truth-table evaluation.
pub fn cmd_bool_demo(d: usize, depth: usize, output_dir: &Path) -> Result<BoolReport> {
    if d == 0 || !d.is_power_of_two() || d > 16 {
        return Err(Error::InvalidConfig(format!(
            "bool demo needs a power-of-two d ≤ 16, got {d}"
        )));
    }
    let multires = consecutive_multires(d, depth)?;
    let mut mismatches = 0usize;
    let mut constant_ok = true;
    for bits in 0..(1usize << d) {
        let x: Vec<bool> = (0..d).map(|v| bits >> v & 1 == 1).collect();
        let layers = scattering::boolean_transform(&x, &multires, depth)?;
        let top = &layers[depth];
        let oracle = boolean_oracle(&x, &multires, depth);
        let got: Vec<bool> = (0..top.rows())
            .flat_map(|n| (0..top.cols()).map(move |q| top.get(n, q)))
            .collect();
        if got != oracle {
            mismatches += 1;
        }
        // For a constant input every coefficient that passed through an
        // xor must be false.
        if x.iter().all(|&b| b == x[0]) {
            constant_ok &= (0..top.rows())
                .all(|n| (0..top.cols()).all(|q| q.count_ones() == 0 || !top.get(n, q)));
        }
    }
    let report = BoolReport {
        d,
        depth,
        inputs: 1 << d,
        oracle_mismatches: mismatches,
        constant_inputs_have_false_xor: constant_ok,
    };
    let path = output_dir.join("reports");
    std::fs::create_dir_all(&path)?;
    let file = path.join(format!("bool_d{d}_J{depth}.json"));
    std::fs::write(&file, serde_json::to_string_pretty(&report)?)?;
    log(&format!(
        "{} inputs, {} oracle mismatches -> {}",
        report.inputs,
        report.oracle_mismatches,
        file.display()
    ));
    Ok(report)
}

/// Plain consecutive-pair multiresolution (no geometry).
pub fn consecutive_multires(d: usize, depth: usize) -> Result<MultiresApprox> {
    let mut pairings = Vec::with_capacity(depth);
    for j in 0..depth {
        let nodes = d >> j;
        pairings.push(crate::multires::Pairing::new(
            (0..nodes / 2).map(|n| (2 * n, 2 * n + 1)).collect(),
            nodes,
        )?);
    }
    MultiresApprox::build_from_pairings(d, pairings)
}

/// Independent truth-table evaluation of the boolean cascade: every
/// output bit is evaluated directly from the input by set reduction,
/// without reusing the layer-by-layer code path.
fn boolean_oracle(x: &[bool], multires: &MultiresApprox, depth: usize) -> Vec<bool> {
    // Represent each current node's feature row as a vector of bools and
    // reduce pairs with explicit integer truth tables: or = max, xor = sum mod 2.
    let mut rows: Vec<Vec<u8>> = x.iter().map(|&b| vec![u8::from(b)]).collect();
    for j in 0..depth {
        let pairs = multires.pairing(j).pairs();
        let mut next = Vec::with_capacity(pairs.len());
        for &(a, b) in pairs {
            let mut row = Vec::with_capacity(rows[a].len() * 2);
            for q in 0..rows[a].len() {
                let (alpha, beta) = (rows[a][q], rows[b][q]);
                row.push(alpha.max(beta));
                row.push((alpha + beta) % 2);
            }
            next.push(row);
        }
        rows = next;
    }
    rows.into_iter().flatten().map(|b| b == 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig::default();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig {
            seed: 1,
            ..ExperimentConfig::default()
        };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn config_validation() {
        let bad = ExperimentConfig {
            max_order: 9,
            depth: 4,
            ..ExperimentConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig {
            lambda: 0.0,
            ..ExperimentConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn csv_dataset_loads_through_the_config() {
        let dir = tempfile::tempdir().unwrap();
        let signals_path = dir.path().join("train.csv");
        let labels_path = dir.path().join("labels.csv");
        datasets::write_signals_csv(
            &signals_path,
            &[vec![1.0, 2.0, 3.0, 4.0], vec![0.5, 0.0, 1.5, 2.5]],
        )
        .unwrap();
        std::fs::write(&labels_path, "0\n1\n").unwrap();
        let config = ExperimentConfig {
            dataset: DatasetSpec::Csv {
                train_signals: signals_path,
                train_labels: Some(labels_path),
                test_signals: None,
                test_labels: None,
            },
            depth: 2,
            max_order: 2,
            ..ExperimentConfig::default()
        };
        assert!(!has_test_split(&config));
        let ds = load_split(&config, false).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.d(), 4);
        assert_eq!(ds.labels.as_ref().unwrap(), &vec![0, 1]);
        assert!(load_split(&config, true).is_err());
    }

    #[test]
    fn bool_demo_matches_oracle_everywhere() {
        let dir = tempfile::tempdir().unwrap();
        let report = cmd_bool_demo(4, 2, dir.path()).unwrap();
        assert_eq!(report.inputs, 16);
        assert_eq!(report.oracle_mismatches, 0);
        assert!(report.constant_inputs_have_false_xor);
    }

    #[test]
    fn reconstruct_demo_small() {
        let dir = tempfile::tempdir().unwrap();
        let report = cmd_reconstruct_demo(16, 3, 5, 42, dir.path()).unwrap();
        assert_eq!(report.ambiguous_count, 0);
        assert!(report.max_abs_error < 1e-8);
        // J = 0 round trip is the identity.
        let report = cmd_reconstruct_demo(8, 0, 2, 1, dir.path()).unwrap();
        assert_eq!(report.max_abs_error, 0.0);
    }
}
