use super::TrainError;
use crate::dataman::{DatasetManifest, Label, Split};
use rand::seq::SliceRandom;
use rand::Rng;

/// Ids for one epoch of class-rebalanced batches.
///
/// Every batch holds exactly `positives_per_batch` positives and
/// `batch_size - positives_per_batch` negatives. The number of batches is set
/// by the class that needs more of them; that class is walked once in a
/// shuffled order, the other is oversampled by concatenating fresh shuffles.
/// When the covering class does not divide evenly, its last batch is topped
/// up from a new shuffle. Order within each batch is shuffled too.
pub fn rebalanced_batches<R: Rng + ?Sized>(
    positives: &[String],
    negatives: &[String],
    batch_size: usize,
    positives_per_batch: usize,
    rng: &mut R,
) -> Result<Vec<Vec<String>>, TrainError> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(TrainError::Config(format!(
            "re-balancing needs both classes: {} positives, {} negatives",
            positives.len(),
            negatives.len()
        )));
    }
    if positives_per_batch == 0 || positives_per_batch >= batch_size {
        return Err(TrainError::Config(format!(
            "positives per batch must be in 1..{batch_size}, got {positives_per_batch}"
        )));
    }
    let neg_per_batch = batch_size - positives_per_batch;
    let n_batches = positives.len().div_ceil(positives_per_batch).max(negatives.len().div_ceil(neg_per_batch));
    let pos = cycle(positives, n_batches * positives_per_batch, rng);
    let neg = cycle(negatives, n_batches * neg_per_batch, rng);
    Ok((0..n_batches)
        .map(|i| {
            let mut b: Vec<String> = pos[i * positives_per_batch..(i + 1) * positives_per_batch]
                .iter()
                .chain(&neg[i * neg_per_batch..(i + 1) * neg_per_batch])
                .map(|s| s.to_string())
                .collect();
            b.shuffle(rng);
            b
        })
        .collect())
}

fn cycle<'a, R: Rng + ?Sized>(ids: &'a [String], len: usize, rng: &mut R) -> Vec<&'a String> {
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let mut perm: Vec<&String> = ids.iter().collect();
        perm.shuffle(rng);
        let take = (len - out.len()).min(perm.len());
        out.extend_from_slice(&perm[..take]);
    }
    out
}

/// Positive and negative image ids of `split`, in manifest order.
pub fn class_ids(manifest: &DatasetManifest, split: Split) -> (Vec<String>, Vec<String>) {
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for r in manifest.records_in(split) {
        match r.label {
            Label::Positive => pos.push(r.image_id.clone()),
            Label::Negative => neg.push(r.image_id.clone()),
        }
    }
    (pos, neg)
}
