//! Training, thresholding and serving of the three anomaly detectors.
//!
//! The EPI detector reconstructs z-scored per-agent feature sequences with an
//! LSTM autoencoder. The semantic detector does the same over embedded LLM
//! call outputs. The combined detector freezes both encoders, concatenates
//! their latent vectors per run and reconstructs that vector with a small
//! feed-forward autoencoder. A run is anomalous when its reconstruction
//! error is strictly above the threshold picked on validation F1.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{EmbedError, EmbedderSpec, TextEmbedder};
use crate::event::RunLog;
use crate::features::{extract_epi, extract_semantic, NormStats, FEATURE_DIM};
use crate::nn::{
    load_linear_ae, load_seq_ae, save_linear_ae, save_seq_ae, train_linear_ae, train_seq_ae,
    LinearAeConfig, LinearAutoencoder, NnError, SeqAeConfig, SeqAutoencoder, TrainConfig,
};

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("invalid detector configuration: {0}")]
    Config(String),
    #[error("run {run_id} cannot be scored: {reason}")]
    Unscorable { run_id: String, reason: String },
    #[error("threshold selection failed: {0}")]
    Threshold(String),
    #[error("detector bundle rejected: {0}")]
    Bundle(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization failure: {0}")]
    Serde(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Epi,
    Semantic,
    Combined,
}

impl DetectorKind {
    pub fn label(&self) -> &'static str {
        match self {
            DetectorKind::Epi => "epi",
            DetectorKind::Semantic => "semantic",
            DetectorKind::Combined => "combined",
        }
    }
}

/// Hyperparameters for one sequence autoencoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeqModelParams {
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub num_layers: usize,
    pub bidirectional: bool,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

/// Hyperparameters for the combined feed-forward autoencoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VecModelParams {
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    pub epi: SeqModelParams,
    pub semantic: SeqModelParams,
    pub combined: VecModelParams,
    pub embedder: EmbedderSpec,
    pub seed: u64,
}

impl DetectorConfig {
    /// Full-scale defaults.
    pub fn defaults(kind: DetectorKind) -> Self {
        Self {
            kind,
            epi: SeqModelParams {
                hidden_dim: 128,
                latent_dim: 64,
                num_layers: 1,
                bidirectional: false,
                learning_rate: 1.2e-3,
                batch_size: 16,
                epochs: 150,
            },
            semantic: SeqModelParams {
                hidden_dim: 256,
                latent_dim: 32,
                num_layers: 1,
                bidirectional: true,
                learning_rate: 8.3e-4,
                batch_size: 64,
                epochs: 150,
            },
            combined: VecModelParams {
                hidden_dim: 160,
                latent_dim: 80,
                learning_rate: 1.5e-4,
                batch_size: 16,
                epochs: 260,
            },
            embedder: EmbedderSpec::default(),
            seed: 7,
        }
    }

    /// Shrunk models and shorter schedules so a full train/evaluate cycle
    /// fits in a test run on laptop hardware.
    pub fn desk(kind: DetectorKind) -> Self {
        Self {
            kind,
            epi: SeqModelParams {
                hidden_dim: 64,
                latent_dim: 32,
                num_layers: 1,
                bidirectional: false,
                learning_rate: 3e-3,
                batch_size: 16,
                epochs: 60,
            },
            semantic: SeqModelParams {
                hidden_dim: 48,
                latent_dim: 24,
                num_layers: 1,
                bidirectional: true,
                learning_rate: 3e-3,
                batch_size: 32,
                epochs: 60,
            },
            combined: VecModelParams {
                hidden_dim: 64,
                latent_dim: 28,
                learning_rate: 3e-3,
                batch_size: 16,
                epochs: 160,
            },
            embedder: EmbedderSpec::default(),
            seed: 7,
        }
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        let check_seq = |name: &str, p: &SeqModelParams| -> Result<(), DetectorError> {
            if p.hidden_dim == 0 || p.latent_dim == 0 || p.num_layers == 0 {
                return Err(DetectorError::Config(format!("{name}: dimensions must be positive")));
            }
            if p.batch_size == 0 || p.epochs == 0 {
                return Err(DetectorError::Config(format!("{name}: schedule must be positive")));
            }
            if !(p.learning_rate.is_finite() && p.learning_rate > 0.0) {
                return Err(DetectorError::Config(format!("{name}: learning rate must be positive")));
            }
            Ok(())
        };
        check_seq("epi", &self.epi)?;
        check_seq("semantic", &self.semantic)?;
        let c = &self.combined;
        if c.hidden_dim == 0 || c.latent_dim == 0 || c.batch_size == 0 || c.epochs == 0 {
            return Err(DetectorError::Config("combined: dimensions and schedule must be positive".into()));
        }
        if !(c.learning_rate.is_finite() && c.learning_rate > 0.0) {
            return Err(DetectorError::Config("combined: learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Reconstruction error of one run under one detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub run_id: String,
    pub kind: DetectorKind,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Benign,
    Anomalous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunVerdict {
    pub run_id: String,
    pub score: f64,
    pub verdict: Verdict,
}

impl RunVerdict {
    pub fn is_anomalous(&self) -> bool {
        self.verdict == Verdict::Anomalous
    }
}

/// Validation counts and quality at the chosen threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSelection {
    pub threshold: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
}

fn f1_for(tp: usize, fp: usize, fn_: usize) -> f64 {
    // Harmonic mean written over counts: 2tp / (2tp + fp + fn). Zero when no
    // true positives exist, which also covers the no-predicted-positive case.
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Picks the threshold maximizing F1 of `score > threshold`. Candidates are
/// midpoints between consecutive distinct scores plus one sentinel beyond
/// each extreme; the sentinels stand in for the unbounded ends while keeping
/// the stored threshold finite. Ties break toward the smallest candidate.
pub fn select_threshold(scored: &[(f64, bool)]) -> Result<ThresholdSelection, DetectorError> {
    if scored.is_empty() {
        return Err(DetectorError::Threshold("no scored runs".into()));
    }
    if scored.iter().any(|(s, _)| !s.is_finite()) {
        return Err(DetectorError::Threshold("scores must be finite".into()));
    }
    let positives = scored.iter().filter(|(_, label)| *label).count();
    if positives == 0 || positives == scored.len() {
        return Err(DetectorError::Threshold(
            "need at least one anomalous and one benign label".into(),
        ));
    }

    let mut sorted: Vec<f64> = scored.iter().map(|(s, _)| *s).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    sorted.dedup();
    let mut candidates = Vec::with_capacity(sorted.len() + 1);
    candidates.push(sorted[0] - 1.0);
    for pair in sorted.windows(2) {
        candidates.push((pair[0] + pair[1]) / 2.0);
    }
    candidates.push(sorted[sorted.len() - 1] + 1.0);

    let mut best: Option<ThresholdSelection> = None;
    for &threshold in &candidates {
        let mut tp = 0;
        let mut fp = 0;
        let mut fn_ = 0;
        let mut tn = 0;
        for &(score, label) in scored {
            match (score > threshold, label) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        let f1 = f1_for(tp, fp, fn_);
        let better = match &best {
            None => true,
            Some(b) => f1 > b.f1,
        };
        if better {
            best = Some(ThresholdSelection {
                threshold,
                f1,
                true_positives: tp,
                false_positives: fp,
                false_negatives: fn_,
                true_negatives: tn,
            });
        }
    }
    Ok(best.expect("candidate set is never empty"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorMetadata {
    pub config: DetectorConfig,
    pub train_runs: usize,
    pub val_runs: usize,
    pub validation: ThresholdSelection,
    pub loss_curves: BTreeMap<String, Vec<f64>>,
}

pub struct TrainedDetector {
    kind: DetectorKind,
    pub threshold: f64,
    epi_norm: Option<NormStats>,
    epi_model: Option<SeqAutoencoder>,
    semantic_model: Option<SeqAutoencoder>,
    combined_model: Option<LinearAutoencoder>,
    embedder: Option<Box<dyn TextEmbedder>>,
    pub metadata: DetectorMetadata,
}

impl std::fmt::Debug for TrainedDetector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrainedDetector")
            .field("kind", &self.kind)
            .field("threshold", &self.threshold)
            .finish_non_exhaustive()
    }
}

impl TrainedDetector {
    pub fn kind(&self) -> DetectorKind {
        self.kind
    }

    fn needs_epi(kind: DetectorKind) -> bool {
        matches!(kind, DetectorKind::Epi | DetectorKind::Combined)
    }

    fn needs_semantic(kind: DetectorKind) -> bool {
        matches!(kind, DetectorKind::Semantic | DetectorKind::Combined)
    }

    fn epi_sequence(&self, run: &RunLog) -> Result<Vec<Vec<f64>>, DetectorError> {
        let sequence = extract_epi(run);
        if sequence.is_empty() {
            return Err(DetectorError::Unscorable {
                run_id: run.run_id.clone(),
                reason: "no completed agent spans to build feature vectors from".into(),
            });
        }
        let norm = self.epi_norm.as_ref().expect("epi detector carries norm stats");
        Ok(norm.apply_sequence(&sequence))
    }

    fn semantic_sequence(&self, run: &RunLog) -> Result<Vec<Vec<f64>>, DetectorError> {
        let texts = extract_semantic(run);
        if texts.is_empty() {
            return Err(DetectorError::Unscorable {
                run_id: run.run_id.clone(),
                reason: "no LLM calls to embed".into(),
            });
        }
        let embedder = self.embedder.as_ref().expect("semantic detector carries an embedder");
        Ok(embedder.embed(&texts)?)
    }

    fn combined_vector(&self, run: &RunLog) -> Result<Vec<f64>, DetectorError> {
        let epi = self.epi_sequence(run)?;
        let semantic = self.semantic_sequence(run)?;
        let epi_model = self.epi_model.as_ref().expect("combined detector carries epi model");
        let sem_model =
            self.semantic_model.as_ref().expect("combined detector carries semantic model");
        let mut latent = epi_model.encode_latent(&epi)?;
        latent.extend(sem_model.encode_latent(&semantic)?);
        Ok(latent)
    }

    /// Mean squared reconstruction error of a run under this detector.
    pub fn score_run(&self, run: &RunLog) -> Result<Score, DetectorError> {
        let value = match self.kind {
            DetectorKind::Epi => {
                let seq = self.epi_sequence(run)?;
                self.epi_model.as_ref().expect("epi model present").reconstruction_error(&seq)?
            }
            DetectorKind::Semantic => {
                let seq = self.semantic_sequence(run)?;
                self.semantic_model
                    .as_ref()
                    .expect("semantic model present")
                    .reconstruction_error(&seq)?
            }
            DetectorKind::Combined => {
                let vector = self.combined_vector(run)?;
                self.combined_model
                    .as_ref()
                    .expect("combined model present")
                    .reconstruction_error(&vector)?
            }
        };
        Ok(Score { run_id: run.run_id.clone(), kind: self.kind, value })
    }

    /// Anomalous iff the score is strictly above the threshold.
    pub fn classify_run(&self, run: &RunLog) -> Result<RunVerdict, DetectorError> {
        let score = self.score_run(run)?;
        let verdict =
            if score.value > self.threshold { Verdict::Anomalous } else { Verdict::Benign };
        Ok(RunVerdict { run_id: score.run_id, score: score.value, verdict })
    }

    pub fn set_threshold(&mut self, threshold: f64) -> Result<(), DetectorError> {
        if !threshold.is_finite() {
            return Err(DetectorError::Config("threshold must be finite".into()));
        }
        self.threshold = threshold;
        Ok(())
    }

    /// Writes the bundle directory: metadata plus one file per artifact.
    pub fn save_bundle(&self, dir: &Path) -> Result<(), DetectorError> {
        fs::create_dir_all(dir)?;
        let head = BundleHead {
            kind: self.kind,
            threshold: self.threshold,
            metadata: self.metadata.clone(),
        };
        fs::write(dir.join("detector.json"), serde_json::to_string_pretty(&head)?)?;
        if let Some(norm) = &self.epi_norm {
            fs::write(dir.join("epi_norm.json"), serde_json::to_string(norm)?)?;
        }
        if let Some(model) = &self.epi_model {
            save_seq_ae(model, &dir.join("epi_model.json"))?;
        }
        if let Some(model) = &self.semantic_model {
            save_seq_ae(model, &dir.join("semantic_model.json"))?;
        }
        if let Some(model) = &self.combined_model {
            save_linear_ae(model, &dir.join("combined_model.json"))?;
        }
        Ok(())
    }

    /// Loads and cross-checks a bundle directory.
    pub fn load_bundle(dir: &Path) -> Result<Self, DetectorError> {
        let head_path = dir.join("detector.json");
        let head: BundleHead = serde_json::from_str(&fs::read_to_string(&head_path).map_err(
            |e| DetectorError::Bundle(format!("cannot read {}: {e}", head_path.display())),
        )?)
        .map_err(|e| DetectorError::Bundle(format!("detector.json is invalid: {e}")))?;

        if !head.threshold.is_finite() {
            return Err(DetectorError::Bundle("threshold must be finite".into()));
        }
        let kind = head.kind;
        let mut detector = Self {
            kind,
            threshold: head.threshold,
            epi_norm: None,
            epi_model: None,
            semantic_model: None,
            combined_model: None,
            embedder: None,
            metadata: head.metadata,
        };
        if Self::needs_epi(kind) {
            let norm = NormStats::read(&dir.join("epi_norm.json"))
                .map_err(|e| DetectorError::Bundle(format!("epi_norm.json: {e}")))?;
            norm.validate().map_err(|e| DetectorError::Bundle(e.to_string()))?;
            let model = load_seq_ae(&dir.join("epi_model.json"))?;
            if model.config().input_dim != FEATURE_DIM {
                return Err(DetectorError::Bundle(format!(
                    "epi model input dim {} does not match the {FEATURE_DIM}-feature contract",
                    model.config().input_dim
                )));
            }
            detector.epi_norm = Some(norm);
            detector.epi_model = Some(model);
        }
        if Self::needs_semantic(kind) {
            let embedder = detector.metadata.config.embedder.build()?;
            let model = load_seq_ae(&dir.join("semantic_model.json"))?;
            if model.config().input_dim != embedder.dimension() {
                return Err(DetectorError::Bundle(format!(
                    "semantic model input dim {} does not match embedder dimension {}",
                    model.config().input_dim,
                    embedder.dimension()
                )));
            }
            detector.embedder = Some(embedder);
            detector.semantic_model = Some(model);
        }
        if kind == DetectorKind::Combined {
            let model = load_linear_ae(&dir.join("combined_model.json"))?;
            let expected = detector.epi_model.as_ref().expect("loaded").config().latent_dim
                + detector.semantic_model.as_ref().expect("loaded").config().latent_dim;
            if model.config().input_dim != expected {
                return Err(DetectorError::Bundle(format!(
                    "combined model input dim {} does not equal the concatenated latent size {expected}",
                    model.config().input_dim
                )));
            }
            detector.combined_model = Some(model);
        }
        Ok(detector)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BundleHead {
    kind: DetectorKind,
    threshold: f64,
    metadata: DetectorMetadata,
}

/// Trains a detector on benign runs and picks its threshold on the labeled
/// validation split.
pub fn train_detector(
    config: &DetectorConfig,
    train_runs: &[RunLog],
    val_runs: &[RunLog],
) -> Result<TrainedDetector, DetectorError> {
    config.validate()?;
    if train_runs.is_empty() {
        return Err(DetectorError::Config("training corpus is empty".into()));
    }
    if val_runs.is_empty() {
        return Err(DetectorError::Config("validation corpus is empty".into()));
    }
    if let Some(run) = train_runs.iter().find(|r| r.label.is_anomalous) {
        return Err(DetectorError::Config(format!(
            "training corpus must be benign, run {} is labeled anomalous",
            run.run_id
        )));
    }

    let kind = config.kind;
    let mut loss_curves = BTreeMap::new();
    let mut epi_norm = None;
    let mut epi_model = None;
    let mut semantic_model = None;
    let mut combined_model = None;
    let mut embedder = None;

    let mut epi_train_seqs: Vec<Vec<Vec<f64>>> = Vec::new();
    if TrainedDetector::needs_epi(kind) {
        let raw: Vec<_> = train_runs.iter().map(extract_epi).collect();
        if let Some(pos) = raw.iter().position(|s| s.is_empty()) {
            return Err(DetectorError::Unscorable {
                run_id: train_runs[pos].run_id.clone(),
                reason: "no completed agent spans to build feature vectors from".into(),
            });
        }
        let norm = NormStats::fit(&raw);
        epi_train_seqs = raw.iter().map(|s| norm.apply_sequence(s)).collect();
        epi_norm = Some(norm);

        let seq_config = SeqAeConfig {
            input_dim: FEATURE_DIM,
            hidden_dim: config.epi.hidden_dim,
            latent_dim: config.epi.latent_dim,
            num_layers: config.epi.num_layers,
            bidirectional: config.epi.bidirectional,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed ^ 0x01);
        let mut model = SeqAutoencoder::new(seq_config, &mut rng)?;
        let report = train_seq_ae(
            &mut model,
            &epi_train_seqs,
            &TrainConfig {
                epochs: config.epi.epochs,
                batch_size: config.epi.batch_size,
                learning_rate: config.epi.learning_rate,
                seed: config.seed.wrapping_add(1),
            },
        )?;
        loss_curves.insert("epi".to_string(), report.epoch_losses);
        epi_model = Some(model);
    }

    let mut semantic_train_seqs: Vec<Vec<Vec<f64>>> = Vec::new();
    if TrainedDetector::needs_semantic(kind) {
        let built = config.embedder.build()?;
        for run in train_runs {
            let texts = extract_semantic(run);
            if texts.is_empty() {
                return Err(DetectorError::Unscorable {
                    run_id: run.run_id.clone(),
                    reason: "no LLM calls to embed".into(),
                });
            }
            semantic_train_seqs.push(built.embed(&texts)?);
        }
        let seq_config = SeqAeConfig {
            input_dim: built.dimension(),
            hidden_dim: config.semantic.hidden_dim,
            latent_dim: config.semantic.latent_dim,
            num_layers: config.semantic.num_layers,
            bidirectional: config.semantic.bidirectional,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed ^ 0x02);
        let mut model = SeqAutoencoder::new(seq_config, &mut rng)?;
        let report = train_seq_ae(
            &mut model,
            &semantic_train_seqs,
            &TrainConfig {
                epochs: config.semantic.epochs,
                batch_size: config.semantic.batch_size,
                learning_rate: config.semantic.learning_rate,
                seed: config.seed.wrapping_add(2),
            },
        )?;
        loss_curves.insert("semantic".to_string(), report.epoch_losses);
        semantic_model = Some(model);
        embedder = Some(built);
    }

    if kind == DetectorKind::Combined {
        // Both encoders are frozen; only the concatenated latents train the
        // feed-forward autoencoder.
        let epi = epi_model.as_ref().expect("trained above");
        let sem = semantic_model.as_ref().expect("trained above");
        let mut vectors = Vec::with_capacity(train_runs.len());
        for (epi_seq, sem_seq) in epi_train_seqs.iter().zip(&semantic_train_seqs) {
            let mut latent = epi.encode_latent(epi_seq)?;
            latent.extend(sem.encode_latent(sem_seq)?);
            vectors.push(latent);
        }
        let linear_config = LinearAeConfig {
            input_dim: config.epi.latent_dim + config.semantic.latent_dim,
            hidden_dim: config.combined.hidden_dim,
            latent_dim: config.combined.latent_dim,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed ^ 0x03);
        let mut model = LinearAutoencoder::new(linear_config, &mut rng)?;
        let report = train_linear_ae(
            &mut model,
            &vectors,
            &TrainConfig {
                epochs: config.combined.epochs,
                batch_size: config.combined.batch_size,
                learning_rate: config.combined.learning_rate,
                seed: config.seed.wrapping_add(3),
            },
        )?;
        loss_curves.insert("combined".to_string(), report.epoch_losses);
        combined_model = Some(model);
    }

    let mut detector = TrainedDetector {
        kind,
        threshold: 0.0,
        epi_norm,
        epi_model,
        semantic_model,
        combined_model,
        embedder,
        metadata: DetectorMetadata {
            config: config.clone(),
            train_runs: train_runs.len(),
            val_runs: val_runs.len(),
            validation: ThresholdSelection {
                threshold: 0.0,
                f1: 0.0,
                true_positives: 0,
                false_positives: 0,
                false_negatives: 0,
                true_negatives: 0,
            },
            loss_curves,
        },
    };

    let mut scored = Vec::with_capacity(val_runs.len());
    for run in val_runs {
        let score = detector.score_run(run)?;
        scored.push((score.value, run.label.is_anomalous));
    }
    let selection = select_threshold(&scored)?;
    detector.threshold = selection.threshold;
    detector.metadata.validation = selection;
    Ok(detector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{Event, EventPayload, GroundTruth};
    use crate::sim::{
        generate_run, inject_failure, FailureClass, FailureSpec, SimConfig,
    };

    fn tiny_config(kind: DetectorKind) -> DetectorConfig {
        let mut config = DetectorConfig::desk(kind);
        config.epi = SeqModelParams {
            hidden_dim: 16,
            latent_dim: 8,
            num_layers: 1,
            bidirectional: false,
            learning_rate: 3e-3,
            batch_size: 8,
            epochs: 10,
        };
        config.semantic = SeqModelParams {
            hidden_dim: 12,
            latent_dim: 6,
            num_layers: 1,
            bidirectional: true,
            learning_rate: 3e-3,
            batch_size: 8,
            epochs: 5,
        };
        config.combined = VecModelParams {
            hidden_dim: 16,
            latent_dim: 7,
            learning_rate: 3e-3,
            batch_size: 8,
            epochs: 15,
        };
        config
    }

    fn tiny_corpus() -> (Vec<RunLog>, Vec<RunLog>) {
        let sim = SimConfig::default();
        let train: Vec<RunLog> = (0..24).map(|i| generate_run(&sim, i).unwrap()).collect();
        let mut val = Vec::new();
        for i in 24..36 {
            let run = generate_run(&sim, i).unwrap();
            if i % 2 == 1 {
                let spec = FailureSpec {
                    class: FailureClass::DpiExhaustion,
                    target_agent: 1 + (i as u32 % 3),
                    intensity: 1.0,
                };
                val.push(inject_failure(&run, &spec, sim.rng_seed).unwrap());
            } else {
                val.push(run);
            }
        }
        (train, val)
    }

    #[test]
    fn default_combined_input_is_concatenated_latent_size() {
        let config = DetectorConfig::defaults(DetectorKind::Combined);
        assert_eq!(config.epi.latent_dim, 64);
        assert_eq!(config.semantic.latent_dim, 32);
        assert_eq!(config.epi.latent_dim + config.semantic.latent_dim, 96);
        assert!(config.semantic.bidirectional);
    }

    #[test]
    fn threshold_splits_separable_scores_at_midpoint() {
        let scored = [(0.1, false), (0.2, false), (0.8, true), (0.9, true)];
        let selection = select_threshold(&scored).unwrap();
        assert_eq!(selection.threshold, 0.5);
        assert_eq!(selection.f1, 1.0);
    }

    #[test]
    fn equal_scores_fall_back_to_all_positive() {
        let scored = [(0.4, true), (0.4, false), (0.4, true)];
        let selection = select_threshold(&scored).unwrap();
        // The below-minimum sentinel predicts everything anomalous.
        assert_eq!(selection.threshold, 0.4 - 1.0);
        assert_eq!(selection.true_positives, 2);
        assert_eq!(selection.false_positives, 1);
        assert_eq!(selection.false_negatives, 0);
    }

    #[test]
    fn degenerate_labels_and_bad_scores_are_rejected() {
        assert!(select_threshold(&[]).is_err());
        assert!(select_threshold(&[(0.1, true), (0.2, true)]).is_err());
        assert!(select_threshold(&[(0.1, false), (0.2, false)]).is_err());
        assert!(select_threshold(&[(f64::NAN, true), (0.2, false)]).is_err());
    }

    #[test]
    fn ties_break_toward_the_smallest_threshold() {
        // Both middle midpoints give F1 = 2/3; the smaller one must win.
        let scored = [(1.0, true), (2.0, false), (3.0, true)];
        let selection = select_threshold(&scored).unwrap();
        assert_eq!(selection.threshold, 0.0);
    }

    fn brute_force_best_f1(scored: &[(f64, bool)]) -> f64 {
        let mut sorted: Vec<f64> = scored.iter().map(|(s, _)| *s).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted.dedup();
        let mut candidates = vec![sorted[0] - 1.0, sorted[sorted.len() - 1] + 1.0];
        for pair in sorted.windows(2) {
            candidates.push((pair[0] + pair[1]) / 2.0);
        }
        let mut best = 0.0_f64;
        for t in candidates {
            let tp = scored.iter().filter(|(s, l)| *l && *s > t).count() as f64;
            let fp = scored.iter().filter(|(s, l)| !*l && *s > t).count() as f64;
            let fn_ = scored.iter().filter(|(s, l)| *l && *s <= t).count() as f64;
            let f1 = if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) };
            best = best.max(f1);
        }
        best
    }

    #[test]
    fn selected_threshold_matches_brute_force_on_random_sets() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(55);
        for _ in 0..20 {
            let scored: Vec<(f64, bool)> = (0..50)
                .map(|_| (rng.gen_range(0.0..1.0), rng.gen_bool(0.4)))
                .collect();
            let positives = scored.iter().filter(|(_, l)| *l).count();
            if positives == 0 || positives == scored.len() {
                continue;
            }
            let selection = select_threshold(&scored).unwrap();
            assert_eq!(selection.f1, brute_force_best_f1(&scored));
        }
    }

    #[test]
    fn anomalous_training_runs_are_rejected() {
        let (mut train, val) = tiny_corpus();
        train[0].label = GroundTruth::anomalous(crate::event::VulnClass::Dpi, 1);
        let err = train_detector(&tiny_config(DetectorKind::Epi), &train, &val).unwrap_err();
        assert!(matches!(err, DetectorError::Config(_)));
    }

    #[test]
    fn epi_detector_trains_deterministically_and_scores_nonnegative() {
        let (train, val) = tiny_corpus();
        let config = tiny_config(DetectorKind::Epi);
        let a = train_detector(&config, &train, &val).unwrap();
        let b = train_detector(&config, &train, &val).unwrap();
        assert_eq!(a.threshold.to_bits(), b.threshold.to_bits());
        assert!(a.threshold.is_finite());

        let score_one = a.score_run(&train[0]).unwrap();
        let score_two = a.score_run(&train[0]).unwrap();
        assert!(score_one.value >= 0.0);
        assert_eq!(score_one.value.to_bits(), score_two.value.to_bits());

        let curve = &a.metadata.loss_curves["epi"];
        assert!(curve.last().unwrap() < curve.first().unwrap());
    }

    #[test]
    fn injected_exhaustion_scores_above_its_benign_twin() {
        let (train, val) = tiny_corpus();
        let detector = train_detector(&tiny_config(DetectorKind::Epi), &train, &val).unwrap();
        let sim = SimConfig::default();
        let mut higher = 0;
        let pairs = 10;
        for i in 200..200 + pairs {
            let benign = generate_run(&sim, i).unwrap();
            let spec = FailureSpec {
                class: FailureClass::DpiExhaustion,
                target_agent: 2,
                intensity: 1.0,
            };
            let injected = inject_failure(&benign, &spec, sim.rng_seed).unwrap();
            let benign_score = detector.score_run(&benign).unwrap().value;
            let injected_score = detector.score_run(&injected).unwrap().value;
            if injected_score > benign_score {
                higher += 1;
            }
        }
        assert!(higher * 2 > pairs, "only {higher}/{pairs} injected runs scored higher");
    }

    #[test]
    fn semantic_detector_rejects_runs_without_llm_calls() {
        let (train, val) = tiny_corpus();
        let detector =
            train_detector(&tiny_config(DetectorKind::Semantic), &train, &val).unwrap();
        let empty = RunLog::new(
            "run-empty",
            vec![Event {
                run_id: "run-empty".into(),
                timestamp_ms: 1,
                payload: EventPayload::ApplicationStarted {
                    user_inputs: "noop".into(),
                    application_data: "noop".into(),
                    llm_models: vec!["sim-lm-1.0".into()],
                    system_data: "noop".into(),
                },
            }],
            GroundTruth::benign(),
        );
        match detector.score_run(&empty) {
            Err(DetectorError::Unscorable { run_id, reason }) => {
                assert_eq!(run_id, "run-empty");
                assert!(reason.contains("LLM calls"));
            }
            other => panic!("expected Unscorable, got {other:?}"),
        }
    }

    #[test]
    fn combined_bundle_round_trips_bit_exact() {
        let (train, val) = tiny_corpus();
        let config = tiny_config(DetectorKind::Combined);
        let detector = train_detector(&config, &train, &val).unwrap();
        let dir = tempfile::tempdir().unwrap();
        detector.save_bundle(dir.path()).unwrap();
        let loaded = TrainedDetector::load_bundle(dir.path()).unwrap();
        assert_eq!(loaded.threshold.to_bits(), detector.threshold.to_bits());
        for run in val.iter().take(4) {
            let a = detector.score_run(run).unwrap().value;
            let b = loaded.score_run(run).unwrap().value;
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn bundle_with_mismatched_dims_is_rejected() {
        let (train, val) = tiny_corpus();
        let config = tiny_config(DetectorKind::Combined);
        let detector = train_detector(&config, &train, &val).unwrap();
        let dir = tempfile::tempdir().unwrap();
        detector.save_bundle(dir.path()).unwrap();

        // Swap in a combined model whose input dim no longer matches the
        // concatenated latents.
        let wrong = LinearAutoencoder::new(
            LinearAeConfig { input_dim: 9, hidden_dim: 4, latent_dim: 2 },
            &mut ChaCha12Rng::seed_from_u64(1),
        )
        .unwrap();
        save_linear_ae(&wrong, &dir.path().join("combined_model.json")).unwrap();
        match TrainedDetector::load_bundle(dir.path()) {
            Err(DetectorError::Bundle(msg)) => assert!(msg.contains("concatenated")),
            other => panic!("expected bundle error, got {other:?}"),
        }
    }

    #[test]
    fn verdicts_are_monotone_in_threshold() {
        let (train, val) = tiny_corpus();
        let mut detector =
            train_detector(&tiny_config(DetectorKind::Epi), &train, &val).unwrap();
        let run = &val[1];
        let score = detector.score_run(run).unwrap().value;
        detector.set_threshold(score - 1.0).unwrap();
        assert!(detector.classify_run(run).unwrap().is_anomalous());
        detector.set_threshold(score).unwrap();
        // Exactly at the threshold stays benign: the comparison is strict.
        assert!(!detector.classify_run(run).unwrap().is_anomalous());
        detector.set_threshold(score + 1.0).unwrap();
        assert!(!detector.classify_run(run).unwrap().is_anomalous());
        assert!(detector.set_threshold(f64::INFINITY).is_err());
    }
}
