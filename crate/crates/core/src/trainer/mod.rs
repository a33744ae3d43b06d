//! Training loop: class-rebalanced batches, Adam, early stopping on
//! validation accuracy, checkpointing and the operating-point gate.

mod batches;
mod constraints;
mod early_stop;
mod optim;

pub use batches::{class_ids, rebalanced_batches};
pub use constraints::{check_constraints, check_values, ConstraintCheck, ConstraintSpec, ConstraintVerdict};
pub use early_stop::EarlyStopping;
pub use optim::{Adam, AdamConfig};

use crate::archnet::{save_checkpoint, Model, ModelError};
use crate::dataman::{DatasetManifest, ImageRecord, Label, Split};
use crate::metrics::{confusion, ConfusionMatrix};
use crate::pixelpipe::{augment, augment_rng, load_preprocessed, ImageBuffer, PreprocessConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("cannot load image {image_id}: {msg}")]
    Data { image_id: String, msg: String },
    #[error("non-finite loss at epoch {epoch} step {step}; batch: {}", batch.join(","))]
    NonFiniteLoss { epoch: usize, step: usize, batch: Vec<String> },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl TrainError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        TrainError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Defaults to half the batch.
    pub positives_per_batch: Option<usize>,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Stop after this many optimizer steps in total.
    pub max_steps: Option<usize>,
    pub threshold: f64,
    pub adam: AdamConfig,
    pub augment: crate::pixelpipe::AugmentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-5,
            batch_size: 8,
            positives_per_batch: None,
            epochs: 40,
            patience: 5,
            seed: 0,
            max_steps: None,
            threshold: 0.5,
            adam: AdamConfig::default(),
            augment: crate::pixelpipe::AugmentConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let err = |m: String| Err(TrainError::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return err(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size < 2 {
            return err(format!("batch_size must be at least 2, got {}", self.batch_size));
        }
        match self.positives_per_batch {
            None if self.batch_size % 2 != 0 => {
                return err(format!("batch_size must be even for a 1:1 ratio, got {}", self.batch_size))
            }
            Some(k) if k == 0 || k >= self.batch_size => {
                return err(format!("positives_per_batch must be in 1..{}, got {k}", self.batch_size))
            }
            _ => {}
        }
        if self.epochs == 0 {
            return err("epochs must be at least 1".into());
        }
        if self.patience == 0 || self.patience > self.epochs {
            return err(format!("patience must be in 1..={}, got {}", self.epochs, self.patience));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return err(format!("threshold must be in [0, 1], got {}", self.threshold));
        }
        self.augment.validate().map_err(|e| TrainError::Config(e.to_string()))
    }

    pub fn positives_per_batch(&self) -> usize {
        self.positives_per_batch.unwrap_or(self.batch_size / 2)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, TrainError> {
        toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))
    }
}

/// Supplies preprocessed images for manifest records.
pub trait ImageSource: Sync {
    fn load(&self, record: &ImageRecord) -> Result<ImageBuffer, TrainError>;
}

impl ImageSource for HashMap<String, ImageBuffer> {
    fn load(&self, record: &ImageRecord) -> Result<ImageBuffer, TrainError> {
        self.get(&record.image_id).cloned().ok_or_else(|| TrainError::Data {
            image_id: record.image_id.clone(),
            msg: "not in memory source".into(),
        })
    }
}

/// Reads images relative to a data root. `.cxrt` files are taken as already
/// preprocessed tensors; anything else is decoded and preprocessed.
#[derive(Debug, Clone)]
pub struct FileImageSource {
    pub root: PathBuf,
    pub preprocess: PreprocessConfig,
}

impl ImageSource for FileImageSource {
    fn load(&self, record: &ImageRecord) -> Result<ImageBuffer, TrainError> {
        let path = self.root.join(&record.file_path);
        let data_err = |msg: String| TrainError::Data { image_id: record.image_id.clone(), msg };
        if path.extension().is_some_and(|e| e == "cxrt") {
            let f = std::fs::File::open(&path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
            ImageBuffer::read_tensor(std::io::BufReader::new(f)).map_err(|e| data_err(e.to_string()))
        } else {
            load_preprocessed(&path, &self.preprocess).map_err(|e| data_err(e.to_string()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub steps: usize,
    pub checkpoint: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub total_steps: usize,
}

impl TrainHistory {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }
}

/// Predicted probabilities and 0/1 labels for every record in `split`.
pub fn predict_split(
    model: &Model,
    manifest: &DatasetManifest,
    split: Split,
    source: &dyn ImageSource,
) -> Result<(Vec<String>, Vec<f64>, Vec<u8>), TrainError> {
    let records: Vec<&ImageRecord> = manifest.records_in(split).collect();
    let mut ids = Vec::with_capacity(records.len());
    let mut probs = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for chunk in records.chunks(32) {
        let imgs = chunk.iter().map(|r| source.load(r)).collect::<Result<Vec<_>, _>>()?;
        probs.extend(model.forward(&imgs)?);
        for r in chunk {
            ids.push(r.image_id.clone());
            labels.push(u8::from(r.label == Label::Positive));
        }
    }
    Ok((ids, probs, labels))
}

pub fn evaluate_split(
    model: &Model,
    manifest: &DatasetManifest,
    split: Split,
    source: &dyn ImageSource,
    threshold: f64,
) -> Result<ConfusionMatrix, TrainError> {
    let (_, probs, labels) = predict_split(model, manifest, split, source)?;
    confusion(&probs, &labels, threshold).map_err(|e| TrainError::Config(e.to_string()))
}

/// Trains on the train split and selects the epoch with the best validation
/// accuracy. Writes `config.toml`, `history.jsonl` and checkpoints into
/// `run_dir` when given, plus `history.sha256` and `best.ckpt` at the end.
pub fn train(
    model: Model,
    manifest: &DatasetManifest,
    source: &dyn ImageSource,
    cfg: &TrainConfig,
    run_dir: Option<&Path>,
) -> Result<(Model, TrainHistory), TrainError> {
    if manifest.records_in(Split::Val).next().is_none() {
        return Err(TrainError::Config("validation split is empty".into()));
    }
    let threshold = cfg.threshold;
    train_with_validator(model, manifest, source, cfg, run_dir, |m, _| {
        let cm = evaluate_split(m, manifest, Split::Val, source, threshold)?;
        let (n, d) = cm.accuracy_ratio();
        Ok(n as f64 / d as f64)
    })
}

/// Same as [`train`] with a caller-supplied validation score.
pub fn train_with_validator<F>(
    mut model: Model,
    manifest: &DatasetManifest,
    source: &dyn ImageSource,
    cfg: &TrainConfig,
    run_dir: Option<&Path>,
    mut validate: F,
) -> Result<(Model, TrainHistory), TrainError>
where
    F: FnMut(&Model, usize) -> Result<f64, TrainError>,
{
    cfg.validate()?;
    let (pos, neg) = class_ids(manifest, Split::Train);
    let by_id: HashMap<&str, &ImageRecord> = manifest.records.iter().map(|r| (r.image_id.as_str(), r)).collect();
    if let Some(dir) = run_dir {
        std::fs::create_dir_all(dir).map_err(|e| TrainError::io(dir, e))?;
        write_file(&dir.join("config.toml"), cfg.to_toml().as_bytes())?;
        write_file(&dir.join("history.jsonl"), b"")?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let aug_seed = cfg.seed ^ cfg.augment.seed.rotate_left(32);
    let mut adam = Adam::new(model.num_params(), cfg.learning_rate, cfg.adam);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best_params = model.params().to_vec();
    let mut history = TrainHistory::default();
    let mut sample_counter: u64 = 0;
    let mut kept: Vec<PathBuf> = Vec::new();

    'epochs: for epoch in 1..=cfg.epochs {
        let batches = rebalanced_batches(&pos, &neg, cfg.batch_size, cfg.positives_per_batch(), &mut rng)?;
        let mut loss_sum = 0.0;
        let mut steps = 0;
        let mut budget_hit = false;
        for batch in &batches {
            if cfg.max_steps.is_some_and(|m| history.total_steps >= m) {
                budget_hit = true;
                break;
            }
            let mut imgs = Vec::with_capacity(batch.len());
            let mut labels = Vec::with_capacity(batch.len());
            for id in batch {
                let rec = by_id[id.as_str()];
                let img = source.load(rec)?;
                let mut arng = augment_rng(aug_seed, sample_counter);
                sample_counter += 1;
                imgs.push(augment(&img, &cfg.augment, &mut arng));
                labels.push(rec.label.target());
            }
            let (loss, grad) = model.loss_and_grad(&imgs, &labels)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(TrainError::NonFiniteLoss { epoch, step: history.total_steps + 1, batch: batch.clone() });
            }
            adam.step(model.params_mut(), &grad);
            loss_sum += loss;
            steps += 1;
            history.total_steps += 1;
        }
        if steps == 0 {
            break 'epochs;
        }
        let val_accuracy = validate(&model, epoch)?;
        let improved = stopper.observe(epoch, val_accuracy);
        if improved {
            best_params = model.params().to_vec();
        }
        let mut record = EpochRecord {
            epoch,
            train_loss: loss_sum / steps as f64,
            val_accuracy,
            steps,
            checkpoint: None,
        };
        if let Some(dir) = run_dir {
            let name = format!("epoch-{epoch:03}.ckpt");
            let path = dir.join(&name);
            save_checkpoint(&model, &path)?;
            record.checkpoint = Some(name);
            let best = stopper.best_epoch().map(|b| dir.join(format!("epoch-{b:03}.ckpt")));
            kept.retain(|p| {
                if Some(p) == best.as_ref() {
                    true
                } else {
                    let _ = std::fs::remove_file(p);
                    false
                }
            });
            kept.push(path);
            append_history(&dir.join("history.jsonl"), &record)?;
        }
        log::info!("epoch {epoch}: loss {:.5} val_acc {:.4}", record.train_loss, val_accuracy);
        history.epochs.push(record);
        if stopper.should_stop() || budget_hit {
            break;
        }
    }

    history.best_epoch = stopper.best_epoch().unwrap_or(0);
    model.set_params(best_params)?;
    if let Some(dir) = run_dir {
        save_checkpoint(&model, &dir.join("best.ckpt"))?;
        let hist_path = dir.join("history.jsonl");
        let bytes = std::fs::read(&hist_path).map_err(|e| TrainError::io(&hist_path, e))?;
        write_file(&dir.join("history.sha256"), format!("{}  history.jsonl\n", sha256_hex(&bytes)).as_bytes())?;
        let json = serde_json::to_string_pretty(&history).expect("history serializes");
        write_file(&dir.join("history.json"), json.as_bytes())?;
    }
    Ok((model, history))
}

/// Lower-case hex SHA-256, as written to `history.sha256`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), TrainError> {
    std::fs::write(path, bytes).map_err(|e| TrainError::io(path, e))
}

fn append_history(path: &Path, record: &EpochRecord) -> Result<(), TrainError> {
    let mut f = std::fs::OpenOptions::new().append(true).open(path).map_err(|e| TrainError::io(path, e))?;
    let line = serde_json::to_string(record).expect("record serializes");
    writeln!(f, "{line}").map_err(|e| TrainError::io(path, e))
}
