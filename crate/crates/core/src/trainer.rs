//! Training: a bundling pass, similarity-weighted corrective epochs, and the
//! regenerate-and-retrain loop.

use serde::{Deserialize, Serialize};

use crate::analysis::{
    domain_models_encoded, domain_variance, misleading_scores_encoded, select_domain_variant, select_insignificant,
    select_misleading,
};
use crate::error::{HdcError, Result};
use crate::inference::{argmax, count_topk_hits, scores_unchecked};
use crate::model::{ClassModel, Dataset, EncoderState, Hypervector, RegenPlan, Strategy};
use crate::rng::{streams, DrawStream};

/// Minimum validation gain that counts as an improvement for early stopping.
pub const EARLY_STOP_DELTA: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(rename = "D")]
    pub dim: usize,
    pub eta: f64,
    pub epochs_per_round: usize,
    pub rounds: usize,
    #[serde(rename = "R")]
    pub rate: f64,
    pub strategy: Strategy,
    /// Rounds without validation improvement before stopping; 0 disables.
    pub patience: usize,
    pub seed: u64,
    /// Seeded per-epoch permutation of the sample order.
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 1024,
            eta: 0.05,
            epochs_per_round: 5,
            rounds: 0,
            rate: 0.1,
            strategy: Strategy::None,
            patience: 0,
            seed: 0,
            shuffle: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(HdcError::invalid("D must be >= 1"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(HdcError::invalid(format!("eta must be > 0, got {}", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(HdcError::invalid(format!("R must lie in [0, 1], got {}", self.rate)));
        }
        Ok(())
    }

    /// Epochs a run performs when it never stops early.
    pub fn total_epochs(&self) -> usize {
        self.epochs_per_round * (self.rounds + 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub round: usize,
    pub epoch: usize,
    pub train_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub valid_accuracy: f64,
    /// Dimensions regenerated after this round (empty for the last round).
    pub regenerated: Vec<usize>,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub rounds: Vec<RoundRecord>,
    pub stopped_early: bool,
}

/// One line of the JSON-lines report stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ReportEvent {
    Epoch(EpochRecord),
    Round(RoundRecord),
}

impl TrainReport {
    /// Events in the order they happened.
    pub fn events(&self) -> Vec<ReportEvent> {
        let mut out = Vec::with_capacity(self.epochs.len() + self.rounds.len());
        let mut epochs = self.epochs.iter().peekable();
        for r in &self.rounds {
            while let Some(e) = epochs.next_if(|e| e.round <= r.round) {
                out.push(ReportEvent::Epoch(e.clone()));
            }
            out.push(ReportEvent::Round(r.clone()));
        }
        out.extend(epochs.map(|e| ReportEvent::Epoch(e.clone())));
        out
    }

    pub fn final_valid_accuracy(&self) -> Option<f64> {
        self.rounds.last().map(|r| r.valid_accuracy)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub encoder: EncoderState,
    pub model: ClassModel,
    pub report: TrainReport,
}

fn check_labels(d: &Dataset, classes: usize) -> Result<()> {
    if d.samples.iter().any(|s| s.label >= classes) {
        return Err(HdcError::invalid("sample label outside label set"));
    }
    Ok(())
}

fn bundle(labels: Vec<String>, dim: usize, encoded: &[Hypervector], ys: &[usize]) -> Result<ClassModel> {
    let mut model = ClassModel::zeros(labels, dim)?;
    for (h, &y) in encoded.iter().zip(ys) {
        model.add_scaled(y, 1.0, h);
    }
    Ok(model)
}

/// Plain accumulation: `C_l` is the sum of the encodings labeled `l`.
pub fn initial_pass(e: &EncoderState, train: &Dataset) -> Result<ClassModel> {
    if train.is_empty() {
        return Err(HdcError::invalid("empty training set"));
    }
    check_labels(train, train.num_classes())?;
    let features: Vec<_> = train.samples.iter().map(|s| s.features.clone()).collect();
    let encoded = e.encode_batch(&features)?;
    let ys: Vec<usize> = train.samples.iter().map(|s| s.label).collect();
    bundle(train.label_names.clone(), e.dim(), &encoded, &ys)
}

/// Corrective update for one encoded sample; returns whether it was
/// predicted correctly before the update.
fn update_one(m: &mut ClassModel, h: &[f64], y: usize, eta: f64) -> bool {
    let scores = scores_unchecked(m, h);
    let predicted = argmax(&scores);
    if predicted == y {
        return true;
    }
    m.add_scaled(y, eta * (1.0 - scores[y]), h);
    m.add_scaled(predicted, -eta * (1.0 - scores[predicted]), h);
    false
}

fn epoch_over(m: &mut ClassModel, encoded: &[Hypervector], ys: &[usize], order: &[usize], eta: f64) -> f64 {
    let correct = order
        .iter()
        .filter(|&&i| update_one(m, &encoded[i], ys[i], eta))
        .count();
    correct as f64 / order.len().max(1) as f64
}

/// One pass over `train` in dataset order. Mispredicted samples pull their
/// true class toward them and push the predicted class away, each scaled by
/// `eta * (1 - similarity)`. Returns the fraction predicted correctly before
/// each sample's update.
pub fn adaptive_epoch(m: &mut ClassModel, e: &EncoderState, train: &Dataset, eta: f64) -> Result<f64> {
    if e.dim() != m.dim() {
        return Err(HdcError::invalid("encoder and model dimensionality differ"));
    }
    check_labels(train, m.num_classes())?;
    let features: Vec<_> = train.samples.iter().map(|s| s.features.clone()).collect();
    let encoded = e.encode_batch(&features)?;
    let ys: Vec<usize> = train.samples.iter().map(|s| s.label).collect();
    let order: Vec<usize> = (0..encoded.len()).collect();
    Ok(epoch_over(m, &encoded, &ys, &order, eta))
}

struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn elapsed_ms(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.start.elapsed().as_secs_f64() * 1e3;
        #[cfg(target_arch = "wasm32")]
        0.0
    }
}

/// Step-wise training state with cached sample encodings.
///
/// [`train`] drives this; it is public so callers can observe the state
/// between steps.
pub struct Trainer<'a> {
    cfg: TrainConfig,
    train: &'a Dataset,
    train_ys: Vec<usize>,
    valid_ys: Vec<usize>,
    train_cache: Vec<Hypervector>,
    valid_cache: Vec<Hypervector>,
    valid: &'a Dataset,
    encoder: EncoderState,
    model: ClassModel,
    shuffle: DrawStream,
}

impl<'a> Trainer<'a> {
    /// Validates inputs, draws the encoder and runs the bundling pass.
    pub fn new(cfg: TrainConfig, train: &'a Dataset, valid: &'a Dataset) -> Result<Self> {
        cfg.validate()?;
        if train.is_empty() {
            return Err(HdcError::invalid("empty training set"));
        }
        if valid.n_features != train.n_features {
            return Err(HdcError::invalid("train and validation feature counts differ"));
        }
        if valid.label_names != train.label_names {
            return Err(HdcError::invalid("train and validation label sets differ"));
        }
        if cfg.strategy == Strategy::DomainVariant && !train.has_domains() {
            return Err(HdcError::invalid(
                "strategy domain_variant needs domain ids on the training set",
            ));
        }
        check_labels(train, train.num_classes())?;
        check_labels(valid, train.num_classes())?;

        let encoder = EncoderState::init(cfg.seed, train.n_features, cfg.dim)?;
        let train_features: Vec<_> = train.samples.iter().map(|s| s.features.clone()).collect();
        let valid_features: Vec<_> = valid.samples.iter().map(|s| s.features.clone()).collect();
        let train_cache = encoder.encode_batch(&train_features)?;
        let valid_cache = encoder.encode_batch(&valid_features)?;
        let train_ys: Vec<usize> = train.samples.iter().map(|s| s.label).collect();
        let valid_ys = valid.samples.iter().map(|s| s.label).collect();
        let model = bundle(train.label_names.clone(), cfg.dim, &train_cache, &train_ys)?;
        Ok(Self {
            shuffle: DrawStream::new(cfg.seed, streams::SHUFFLE),
            cfg,
            train,
            train_ys,
            valid_ys,
            train_cache,
            valid_cache,
            valid,
            encoder,
            model,
        })
    }

    pub fn encoder(&self) -> &EncoderState {
        &self.encoder
    }

    pub fn model(&self) -> &ClassModel {
        &self.model
    }

    /// Cached encodings of the training samples.
    pub fn train_encodings(&self) -> &[Hypervector] {
        &self.train_cache
    }

    pub fn valid_encodings(&self) -> &[Hypervector] {
        &self.valid_cache
    }

    pub fn run_epoch(&mut self) -> f64 {
        let mut order: Vec<usize> = (0..self.train_cache.len()).collect();
        if self.cfg.shuffle {
            self.shuffle.shuffle(&mut order);
        }
        epoch_over(&mut self.model, &self.train_cache, &self.train_ys, &order, self.cfg.eta)
    }

    /// Top-1 accuracy on the validation set; 0 when it is empty.
    pub fn valid_accuracy(&self) -> f64 {
        if self.valid_cache.is_empty() {
            return 0.0;
        }
        count_topk_hits(&self.model, &self.valid_cache, &self.valid_ys, 1) as f64 / self.valid_cache.len() as f64
    }

    /// Runs the configured detector on the current model.
    pub fn plan(&self) -> Result<RegenPlan> {
        let rate = self.cfg.rate;
        match self.cfg.strategy {
            Strategy::None => Ok(RegenPlan::empty()),
            Strategy::Insignificant => {
                if self.model.num_classes() < 2 {
                    return Ok(RegenPlan::empty());
                }
                select_insignificant(&self.model, rate)
            }
            Strategy::Misleading => {
                let scores = misleading_scores_encoded(&self.model, &self.train_cache, &self.train_ys);
                select_misleading(&scores, rate)
            }
            Strategy::DomainVariant => {
                let models = domain_models_encoded(self.train, &self.train_cache, self.cfg.dim)?;
                if models.len() < 2 {
                    return Ok(RegenPlan::empty());
                }
                select_domain_variant(&domain_variance(&models)?, rate)
            }
        }
    }

    /// Redraws the planned dimensions, zeroes them in every class and
    /// refreshes the cached encodings.
    pub fn regenerate(&mut self, plan: &RegenPlan) -> Result<()> {
        self.encoder.regenerate_dims(plan)?;
        self.model.zero_dims(plan.indices());
        let dims = plan.indices();
        let train_f: Vec<&[f64]> = self.train.samples.iter().map(|s| &s.features[..]).collect();
        let valid_f: Vec<&[f64]> = self.valid.samples.iter().map(|s| &s.features[..]).collect();
        self.encoder.reencode_cache(&train_f, &mut self.train_cache, dims);
        self.encoder.reencode_cache(&valid_f, &mut self.valid_cache, dims);
        Ok(())
    }

    /// Re-bundles the given dimensions: for each planned `i`, class `l`
    /// receives the sum of `h_i` over its training samples.
    pub fn refill(&mut self, dims: &[usize]) {
        if dims.is_empty() {
            return;
        }
        let classes = self.model.num_classes();
        let mut sums = vec![vec![0.0; dims.len()]; classes];
        for (h, &y) in self.train_cache.iter().zip(&self.train_ys) {
            for (acc, &i) in sums[y].iter_mut().zip(dims) {
                *acc += h[i];
            }
        }
        for (l, row) in sums.iter().enumerate() {
            let mut class = self.model.class(l).to_vec();
            for (&i, &v) in dims.iter().zip(row) {
                class[i] = v;
            }
            self.model.set_class(l, &class);
        }
    }

    pub fn into_parts(self) -> (EncoderState, ClassModel) {
        (self.encoder, self.model)
    }
}

/// Full training run.
///
/// Each round runs `epochs_per_round` corrective epochs and measures
/// validation accuracy; between rounds the configured detector picks
/// dimensions to regenerate. Stops early once validation accuracy has not
/// improved by [`EARLY_STOP_DELTA`] for `patience` consecutive rounds.
pub fn train(cfg: &TrainConfig, train: &Dataset, valid: &Dataset) -> Result<TrainOutcome> {
    let clock = Stopwatch::start();
    let mut trainer = Trainer::new(cfg.clone(), train, valid)?;
    let mut report = TrainReport::default();
    let mut best = f64::NEG_INFINITY;
    let mut stale = 0;
    for round in 0..=cfg.rounds {
        for epoch in 0..cfg.epochs_per_round {
            let acc = trainer.run_epoch();
            report.epochs.push(EpochRecord {
                round,
                epoch,
                train_accuracy: acc,
            });
        }
        let valid_accuracy = trainer.valid_accuracy();
        if valid_accuracy > best + EARLY_STOP_DELTA {
            best = valid_accuracy;
            stale = 0;
        } else {
            stale += 1;
        }
        let stop = cfg.patience > 0 && stale >= cfg.patience;
        let mut regenerated = Vec::new();
        if round < cfg.rounds && !stop {
            let plan = trainer.plan()?;
            trainer.regenerate(&plan)?;
            trainer.refill(plan.indices());
            regenerated = plan.indices().to_vec();
        }
        report.rounds.push(RoundRecord {
            round,
            valid_accuracy,
            regenerated,
            elapsed_ms: clock.elapsed_ms(),
        });
        if stop && round < cfg.rounds {
            report.stopped_early = true;
            break;
        }
    }
    let (encoder, model) = trainer.into_parts();
    Ok(TrainOutcome { encoder, model, report })
}
