//! Command implementations behind the `regen-hdc` binary.
//!
//! Each `cmd_*` function does the work of one subcommand and returns the
//! record it would print, so the commands can be driven without a process.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use regen_hdc::analysis::{
    domain_models, domain_variance, misleading_scores, select_domain_variant, select_insignificant, select_misleading,
    variance_over_classes, ScoreSummary, ScoreVector,
};
use regen_hdc::data::{
    apply_normalizer, fit_normalizer, load_csv, make_blobs, train_test_split, write_csv, NormalizationStats,
    SyntheticSpec,
};
use regen_hdc::experiments::{drop_sweep, noise_sweep, CurvePoint, DropOrder, EvalSet};
use regen_hdc::inference::score_all;
use regen_hdc::model::ValidationIssue;
use regen_hdc::{
    train, validate_dataset, ClassModel, Dataset, EncoderState, FeatureVector, HdcError, ModelFile, Strategy,
    TrainConfig,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Hdc(#[from] HdcError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit code: 2 config/validation, 3 I/O, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Hdc(e) => match e.root() {
                HdcError::Io(_) => 3,
                HdcError::NonFinite(_) => 4,
                _ => 2,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.flush().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train_csv: PathBuf,
    /// Held-out validation CSV; when absent a stratified share of the
    /// training file is used.
    pub valid_csv: Option<PathBuf>,
    pub valid_fraction: f64,
    pub label_column: String,
    pub domain_column: Option<String>,
    pub normalize: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train_csv: PathBuf::new(),
            valid_csv: None,
            valid_fraction: 0.1,
            label_column: "label".into(),
            domain_column: None,
            normalize: true,
        }
    }
}

/// The `train` command's JSON config. Relative paths resolve against the
/// config file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub params: TrainConfig,
    pub model_out: PathBuf,
    /// JSON-lines report path; `None` prints the report to stdout.
    pub report_out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            params: TrainConfig::default(),
            model_out: PathBuf::from("model.json"),
            report_out: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.train_csv);
        if let Some(p) = self.data.valid_csv.as_mut() {
            fix(p);
        }
        fix(&mut self.model_out);
        if let Some(p) = self.report_out.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.data.train_csv.as_os_str().is_empty() {
            return Err(CliError::Config("data.train_csv is required".into()));
        }
        if !(0.0..1.0).contains(&self.data.valid_fraction) {
            return Err(CliError::Config("data.valid_fraction must lie in [0, 1)".into()));
        }
        if self.params.strategy == Strategy::DomainVariant && self.data.domain_column.is_none() {
            return Err(CliError::Config(
                "strategy domain_variant needs data.domain_column".into(),
            ));
        }
        Ok(())
    }
}

fn checked_dataset(d: Dataset) -> Result<Dataset> {
    let report = validate_dataset(&d);
    if let Some(f) = report.failures.first() {
        let at = f.sample.map(|i| format!(" (sample {i})")).unwrap_or_default();
        let message = format!("invalid dataset: {}{at}", f.issue);
        if f.issue == ValidationIssue::NonFiniteFeature {
            return Err(HdcError::NonFinite(message).into());
        }
        return Err(CliError::Config(message));
    }
    Ok(d)
}

fn load_data(path: &Path, label: &str, domain: Option<&str>) -> Result<Dataset> {
    if !path.exists() {
        return Err(CliError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        });
    }
    let detected;
    let domain = match domain {
        Some(d) => Some(d),
        None => {
            detected = has_column(path, DEFAULT_DOMAIN_COLUMN)?;
            detected.then_some(DEFAULT_DOMAIN_COLUMN)
        }
    };
    checked_dataset(load_csv(path, label, domain)?)
}

/// Column treated as the domain id when none is configured.
pub const DEFAULT_DOMAIN_COLUMN: &str = "domain";

fn has_column(path: &Path, name: &str) -> Result<bool> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => CliError::Config(format!("{}: {other:?}", path.display())),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(headers.iter().any(|h| h.trim() == name))
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainSummary {
    pub model_path: PathBuf,
    pub valid_accuracy: Option<f64>,
    pub rounds: usize,
    pub stopped_early: bool,
}

/// Trains per `cfg`, writes the model file and returns the JSON-lines report.
pub fn cmd_train(cfg: &RunConfig) -> Result<(TrainSummary, String)> {
    cfg.validate()?;
    let data = &cfg.data;
    let domain = data.domain_column.as_deref();
    let full = load_data(&data.train_csv, &data.label_column, domain)?;
    let (train_raw, valid_raw) = match &data.valid_csv {
        Some(p) => {
            let valid = load_data(p, &data.label_column, domain)?.remap_labels(&full.label_names)?;
            (full, valid)
        }
        None if data.valid_fraction > 0.0 => train_test_split(&full, 1.0 - data.valid_fraction, cfg.params.seed)?,
        None => {
            let empty = full.subset(&[]);
            (full, empty)
        }
    };
    let (stats, train_set, valid_set) = if data.normalize {
        let stats = fit_normalizer(&train_raw)?;
        let t = apply_normalizer(&stats, &train_raw)?;
        let v = apply_normalizer(&stats, &valid_raw)?;
        (Some(stats), t, v)
    } else {
        (None, train_raw, valid_raw)
    };

    let outcome = train(&cfg.params, &train_set, &valid_set)?;
    let file = ModelFile::new(&outcome.encoder, &outcome.model, stats);
    write_atomic(&cfg.model_out, file.to_json()?.as_bytes())?;

    let valid_accuracy = outcome.report.final_valid_accuracy().filter(|_| !valid_set.is_empty());
    let mut lines = vec![json!({ "event": "config", "config": cfg })];
    for event in outcome.report.events() {
        lines.push(serde_json::to_value(event).map_err(HdcError::from)?);
    }
    lines.push(json!({ "event": "done", "model": cfg.model_out, "valid_accuracy": valid_accuracy }));
    let lines: Vec<String> = lines.iter().map(|v| v.to_string()).collect();
    let mut text = lines.join("\n");
    text.push('\n');
    if let Some(path) = &cfg.report_out {
        write_atomic(path, text.as_bytes())?;
    }
    Ok((
        TrainSummary {
            model_path: cfg.model_out.clone(),
            valid_accuracy,
            rounds: outcome.report.rounds.len(),
            stopped_early: outcome.report.stopped_early,
        },
        text,
    ))
}

/// A loaded model file with its normalizer.
pub struct LoadedModel {
    pub encoder: EncoderState,
    pub model: ClassModel,
    pub normalization: Option<NormalizationStats>,
}

impl LoadedModel {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let (encoder, model, normalization) = ModelFile::from_json(&text)?.into_parts()?;
        Ok(Self {
            encoder,
            model,
            normalization,
        })
    }

    /// Loads a CSV, aligns its labels with the model and normalizes it.
    pub fn prepare(&self, path: &Path, label: &str, domain: Option<&str>) -> Result<Dataset> {
        let raw = load_data(path, label, domain)?;
        if raw.n_features != self.encoder.n() {
            return Err(CliError::Config(format!(
                "data has {} features, model expects {}",
                raw.n_features,
                self.encoder.n()
            )));
        }
        let aligned = raw.remap_labels(self.model.labels())?;
        Ok(match &self.normalization {
            Some(stats) => apply_normalizer(stats, &aligned)?,
            None => aligned,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub k: usize,
    pub accuracy: f64,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(rename = "D")]
    pub dim: usize,
}

pub fn cmd_eval(model_path: &Path, data_path: &Path, label: &str, ks: &[usize]) -> Result<Vec<EvalRecord>> {
    let loaded = LoadedModel::load(model_path)?;
    let data = loaded.prepare(data_path, label, None)?;
    let eval = EvalSet::new(&loaded.encoder, &loaded.model, &data)?;
    ks.iter()
        .map(|&k| {
            Ok(EvalRecord {
                k,
                accuracy: eval.topk_accuracy(&loaded.model, k)?,
                n_samples: data.len(),
                seed: loaded.encoder.seed(),
                dim: loaded.model.dim(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeRecord {
    pub strategy: Strategy,
    #[serde(rename = "R")]
    pub rate: f64,
    pub selected_indices: Vec<usize>,
    pub score_summary: ScoreSummary,
}

pub fn cmd_analyze(
    model_path: &Path,
    data_path: Option<&Path>,
    label: &str,
    domain: Option<&str>,
    strategy: Strategy,
    rate: f64,
) -> Result<AnalyzeRecord> {
    let loaded = LoadedModel::load(model_path)?;
    let need_data = || data_path.ok_or_else(|| CliError::Config(format!("strategy {strategy} needs --data")));
    let (scores, plan) = match strategy {
        Strategy::None => return Err(CliError::Config("analyze needs a detector strategy".into())),
        Strategy::Insignificant => {
            let plan = select_insignificant(&loaded.model, rate)?;
            (ScoreVector(variance_over_classes(&loaded.model)?), plan)
        }
        Strategy::Misleading => {
            let data = loaded.prepare(need_data()?, label, None)?;
            let scores = misleading_scores(&loaded.model, &loaded.encoder, &data)?;
            let plan = select_misleading(&scores, rate)?;
            (scores, plan)
        }
        Strategy::DomainVariant => {
            let domain = domain.ok_or_else(|| CliError::Config("domain_variant needs --domain-column".into()))?;
            let data = loaded.prepare(need_data()?, label, Some(domain))?;
            let scores = domain_variance(&domain_models(&loaded.encoder, &data)?)?;
            let plan = select_domain_variant(&scores, rate)?;
            (scores, plan)
        }
    };
    Ok(AnalyzeRecord {
        strategy,
        rate,
        selected_indices: plan.indices().to_vec(),
        score_summary: scores.summary(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropSweepRecord {
    pub experiment: String,
    pub model: PathBuf,
    pub data: PathBuf,
    pub fractions: Vec<f64>,
    pub seed: u64,
    pub baseline: f64,
    pub lowest: Option<Vec<CurvePoint>>,
    pub highest: Option<Vec<CurvePoint>>,
    pub wall_ms: f64,
}

pub fn cmd_dropsweep(
    model_path: &Path,
    data_path: &Path,
    label: &str,
    fractions: &[f64],
    orders: &[DropOrder],
) -> Result<DropSweepRecord> {
    let start = Instant::now();
    let loaded = LoadedModel::load(model_path)?;
    let data = loaded.prepare(data_path, label, None)?;
    let eval = EvalSet::new(&loaded.encoder, &loaded.model, &data)?;
    let curve = |order| -> Result<Option<Vec<CurvePoint>>> {
        if orders.contains(&order) {
            Ok(Some(drop_sweep(&loaded.model, &eval, fractions, order)?))
        } else {
            Ok(None)
        }
    };
    Ok(DropSweepRecord {
        experiment: "dropsweep".into(),
        model: model_path.to_path_buf(),
        data: data_path.to_path_buf(),
        fractions: fractions.to_vec(),
        seed: loaded.encoder.seed(),
        baseline: eval.topk_accuracy(&loaded.model, 1)?,
        lowest: curve(DropOrder::Lowest)?,
        highest: curve(DropOrder::Highest)?,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisePoint {
    pub q: f64,
    pub accuracy: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSweepRecord {
    pub experiment: String,
    pub model: PathBuf,
    pub data: PathBuf,
    pub magnitude: f64,
    #[serde(rename = "D")]
    pub dim: usize,
    pub points: Vec<NoisePoint>,
    pub wall_ms: f64,
}

pub fn cmd_noise_sweep(
    model_path: &Path,
    data_path: &Path,
    label: &str,
    qs: &[f64],
    magnitude: f64,
    seed: u64,
) -> Result<NoiseSweepRecord> {
    let start = Instant::now();
    let loaded = LoadedModel::load(model_path)?;
    let data = loaded.prepare(data_path, label, None)?;
    let eval = EvalSet::new(&loaded.encoder, &loaded.model, &data)?;
    let points = noise_sweep(&loaded.model, &eval, qs, magnitude, seed)?
        .into_iter()
        .map(|p| NoisePoint {
            q: p.x,
            accuracy: p.accuracy,
            seed,
        })
        .collect();
    Ok(NoiseSweepRecord {
        experiment: "noisesweep".into(),
        model: model_path.to_path_buf(),
        data: data_path.to_path_buf(),
        magnitude,
        dim: loaded.model.dim(),
        points,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub experiment: String,
    pub n: usize,
    #[serde(rename = "D")]
    pub dim: usize,
    pub batch: usize,
    pub classes: usize,
    pub reps: usize,
    pub seed: u64,
    pub encodes_per_sec: f64,
    pub scores_per_sec: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        0.5 * (xs[mid - 1] + xs[mid])
    }
}

/// Median encode and score throughput over `reps` timed repetitions.
pub fn cmd_bench(n: usize, dim: usize, batch: usize, classes: usize, reps: usize, seed: u64) -> Result<BenchRecord> {
    if n == 0 || dim == 0 || batch == 0 || classes == 0 {
        return Err(CliError::Config("bench sizes must be positive".into()));
    }
    let reps = reps.max(3);
    let encoder = EncoderState::init(seed, n, dim)?;
    let spec = SyntheticSpec {
        n_features: n,
        n_classes: classes,
        samples_per_class_per_domain: batch.div_ceil(classes),
        seed,
        ..SyntheticSpec::default()
    };
    let data = make_blobs(&spec)?;
    let features: Vec<FeatureVector> = data.samples.iter().take(batch).map(|s| s.features.clone()).collect();
    let labels = (0..classes).map(|l| format!("c{l}")).collect();
    let mut model = ClassModel::zeros(labels, dim)?;
    let encoded = encoder.encode_batch(&features)?;
    for (i, h) in encoded.iter().enumerate() {
        model.add_scaled(i % classes, 1.0, h);
    }

    let mut enc_rates = Vec::with_capacity(reps);
    let mut score_rates = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        let out = encoder.encode_batch(&features)?;
        enc_rates.push(batch as f64 / t.elapsed().as_secs_f64().max(1e-9));
        let t = Instant::now();
        let mut sink = 0.0;
        for h in &out {
            sink += score_all(&model, h)?.0[0];
        }
        std::hint::black_box(sink);
        score_rates.push(batch as f64 / t.elapsed().as_secs_f64().max(1e-9));
    }
    Ok(BenchRecord {
        experiment: "bench".into(),
        n,
        dim,
        batch,
        classes,
        reps,
        seed,
        encodes_per_sec: median(enc_rates),
        scores_per_sec: median(score_rates),
    })
}

/// Synthetic blobs as CSV text.
pub fn cmd_synth(spec: &SyntheticSpec) -> Result<String> {
    let d = make_blobs(spec)?;
    let mut buf = Vec::new();
    write_csv(&d, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
