//! WebAssembly bindings for the demo page in `www/`.
//!
//! Every export takes a JSON parameter object and returns a JSON string.
//! The same computations are available as plain Rust functions so they can
//! be tested natively.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use regen_hdc::data::{apply_normalizer, fit_normalizer, make_blobs, split, SyntheticSpec};
use regen_hdc::experiments::{drop_sweep, noise_sweep, CurvePoint, DropOrder, EvalSet};
use regen_hdc::{train, Dataset, HdcError, Result, Strategy, TrainConfig};

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoParams {
    pub n_classes: usize,
    pub intra_class_std: f64,
    pub samples_per_class: usize,
    #[serde(rename = "D")]
    pub dim: usize,
    pub epochs_per_round: usize,
    pub rounds: usize,
    #[serde(rename = "R")]
    pub rate: f64,
    pub strategy: Strategy,
    pub seed: u64,
}

impl Default for DemoParams {
    fn default() -> Self {
        Self {
            n_classes: 8,
            intra_class_std: 0.22,
            samples_per_class: 150,
            dim: 512,
            epochs_per_round: 2,
            rounds: 5,
            rate: 0.2,
            strategy: Strategy::Insignificant,
            seed: 0,
        }
    }
}

struct Splits {
    train: Dataset,
    valid: Dataset,
    test: Dataset,
}

fn splits(p: &DemoParams) -> Result<Splits> {
    let d = make_blobs(&SyntheticSpec {
        n_features: 16,
        n_classes: p.n_classes,
        samples_per_class_per_domain: p.samples_per_class,
        intra_class_std: p.intra_class_std,
        seed: p.seed,
        ..SyntheticSpec::default()
    })?;
    let mut parts = split(&d, &[0.7, 0.1, 0.2], p.seed)?.into_iter();
    let (train, valid, test) = (parts.next().unwrap(), parts.next().unwrap(), parts.next().unwrap());
    let stats = fit_normalizer(&train)?;
    Ok(Splits {
        train: apply_normalizer(&stats, &train)?,
        valid: apply_normalizer(&stats, &valid)?,
        test: apply_normalizer(&stats, &test)?,
    })
}

fn config(p: &DemoParams) -> TrainConfig {
    TrainConfig {
        dim: p.dim,
        epochs_per_round: p.epochs_per_round,
        rounds: p.rounds,
        rate: p.rate,
        strategy: p.strategy,
        seed: p.seed,
        ..TrainConfig::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundPoint {
    pub round: usize,
    pub valid_accuracy: f64,
    pub regenerated: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainDemo {
    pub regen: Vec<RoundPoint>,
    /// Same data and total epochs without regeneration.
    pub baseline_valid_accuracy: f64,
    pub regen_test_accuracy: f64,
    pub baseline_test_accuracy: f64,
}

/// Trains with the requested strategy and a static baseline of equal epochs.
pub fn train_demo(p: &DemoParams) -> Result<TrainDemo> {
    let s = splits(p)?;
    let cfg = config(p);
    let flat = TrainConfig {
        epochs_per_round: cfg.total_epochs(),
        rounds: 0,
        strategy: Strategy::None,
        ..cfg.clone()
    };
    let a = train(&cfg, &s.train, &s.valid)?;
    let b = train(&flat, &s.train, &s.valid)?;
    let test = |o: &regen_hdc::TrainOutcome| EvalSet::new(&o.encoder, &o.model, &s.test)?.topk_accuracy(&o.model, 1);
    Ok(TrainDemo {
        regen: a
            .report
            .rounds
            .iter()
            .map(|r| RoundPoint {
                round: r.round,
                valid_accuracy: r.valid_accuracy,
                regenerated: r.regenerated.len(),
            })
            .collect(),
        baseline_valid_accuracy: b.report.final_valid_accuracy().unwrap_or(0.0),
        regen_test_accuracy: test(&a)?,
        baseline_test_accuracy: test(&b)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DropDemo {
    pub lowest: Vec<CurvePoint>,
    pub highest: Vec<CurvePoint>,
}

fn static_model(p: &DemoParams) -> Result<(regen_hdc::TrainOutcome, Dataset)> {
    let s = splits(p)?;
    let cfg = TrainConfig {
        rounds: 0,
        strategy: Strategy::None,
        ..config(p)
    };
    Ok((train(&cfg, &s.train, &s.valid)?, s.test))
}

fn grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

/// Test accuracy while zeroing dimensions in variance order, both ways.
pub fn drop_demo(p: &DemoParams) -> Result<DropDemo> {
    let (out, test) = static_model(p)?;
    let eval = EvalSet::new(&out.encoder, &out.model, &test)?;
    let fractions = grid(10);
    Ok(DropDemo {
        lowest: drop_sweep(&out.model, &eval, &fractions, DropOrder::Lowest)?,
        highest: drop_sweep(&out.model, &eval, &fractions, DropOrder::Highest)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseCurve {
    #[serde(rename = "D")]
    pub dim: usize,
    pub points: Vec<CurvePoint>,
}

/// Accuracy against the fraction of perturbed model entries, for `D`, `D/2`
/// and `D/4`.
pub fn noise_demo(p: &DemoParams, magnitude: f64) -> Result<Vec<NoiseCurve>> {
    let qs = grid(10);
    [p.dim, p.dim / 2, p.dim / 4]
        .into_iter()
        .filter(|&d| d > 0)
        .map(|dim| {
            let (out, test) = static_model(&DemoParams { dim, ..p.clone() })?;
            let eval = EvalSet::new(&out.encoder, &out.model, &test)?;
            Ok(NoiseCurve {
                dim,
                points: noise_sweep(&out.model, &eval, &qs, magnitude, p.seed)?,
            })
        })
        .collect()
}

fn parse(params: &str) -> std::result::Result<DemoParams, JsError> {
    if params.trim().is_empty() {
        return Ok(DemoParams::default());
    }
    serde_json::from_str(params).map_err(|e| JsError::new(&e.to_string()))
}

fn respond<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let value = r.map_err(|e: HdcError| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = trainCurve)]
pub fn train_curve(params: &str) -> std::result::Result<String, JsError> {
    respond(train_demo(&parse(params)?))
}

#[wasm_bindgen(js_name = dropCurve)]
pub fn drop_curve(params: &str) -> std::result::Result<String, JsError> {
    respond(drop_demo(&parse(params)?))
}

#[wasm_bindgen(js_name = noiseCurve)]
pub fn noise_curve(params: &str, magnitude: f64) -> std::result::Result<String, JsError> {
    respond(noise_demo(&parse(params)?, magnitude))
}
