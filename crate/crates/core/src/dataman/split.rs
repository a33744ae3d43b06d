use super::record::{DatasetManifest, Finding, Split};
use super::DataError;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const DEFAULT_VAL_FRACTION: f64 = 0.10;

/// Number of test images wanted per finding.
///
/// Only patients whose images all share one finding are eligible for the
/// test split, so every selected patient contributes to exactly one target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestTargets {
    pub per_finding: BTreeMap<Finding, usize>,
}

impl TestTargets {
    /// 200 positive images; 200 negative images split evenly between
    /// no-pneumonia and non-SARS-CoV-2 pneumonia.
    pub fn benchmark() -> Self {
        Self::from_label_targets(200, 200)
    }

    /// Positive target goes to `Sars2`; the negative target is split evenly,
    /// with an odd remainder going to `None`.
    pub fn from_label_targets(positive: usize, negative: usize) -> Self {
        let pneumonia = negative / 2;
        TestTargets {
            per_finding: [
                (Finding::Sars2, positive),
                (Finding::None, negative - pneumonia),
                (Finding::PneumoniaNonSars2, pneumonia),
            ]
            .into(),
        }
    }

    pub fn total(&self) -> usize {
        self.per_finding.values().sum()
    }
}

/// Assigns every image to train / val / test at patient granularity.
///
/// Test patients are drawn per finding until the image target is met
/// exactly: a random greedy pass first, then an exact subset-sum search over
/// the same shuffled order when greedy overshoots. Of the remaining patients,
/// `round(val_fraction * n)` go to val and the rest to train.
pub fn split_patient_level(
    manifest: &DatasetManifest,
    targets: &TestTargets,
    val_fraction: f64,
    seed: u64,
) -> Result<DatasetManifest, DataError> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(DataError::Argument(format!("val_fraction must be in [0, 1), got {val_fraction}")));
    }
    // patient -> image count and set of findings; BTreeMap gives an order
    // independent of record order.
    let mut patients: BTreeMap<&str, (usize, BTreeSet<Finding>)> = BTreeMap::new();
    for r in &manifest.records {
        let e = patients.entry(r.patient_id.as_str()).or_default();
        e.0 += 1;
        e.1.insert(r.finding);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test: BTreeSet<&str> = BTreeSet::new();
    for (&finding, &target) in &targets.per_finding {
        let mut candidates: Vec<(&str, usize)> = patients
            .iter()
            .filter(|(_, (_, fs))| fs.len() == 1 && fs.contains(&finding))
            .map(|(p, (n, _))| (*p, *n))
            .collect();
        let available: usize = candidates.iter().map(|c| c.1).sum();
        if available < target {
            return Err(DataError::Unsatisfiable {
                class: finding,
                target,
                msg: format!("only {available} images from {} eligible patients", candidates.len()),
            });
        }
        candidates.shuffle(&mut rng);
        let chosen = pick_exact(&candidates, target).ok_or_else(|| DataError::Unsatisfiable {
            class: finding,
            target,
            msg: "no subset of eligible patients has exactly that many images".into(),
        })?;
        test.extend(chosen);
    }

    let mut rest: Vec<&str> = patients.keys().copied().filter(|p| !test.contains(p)).collect();
    rest.shuffle(&mut rng);
    let n_val = (val_fraction * rest.len() as f64).round() as usize;
    let val: BTreeSet<&str> = rest[..n_val].iter().copied().collect();

    let split_assignment = manifest
        .records
        .iter()
        .map(|r| {
            let p = r.patient_id.as_str();
            let s = if test.contains(p) {
                Split::Test
            } else if val.contains(p) {
                Split::Val
            } else {
                Split::Train
            };
            (r.image_id.clone(), s)
        })
        .collect();
    Ok(DatasetManifest { split_assignment, ..manifest.clone() })
}

/// Chooses patients whose image counts sum to exactly `target`.
fn pick_exact<'a>(candidates: &[(&'a str, usize)], target: usize) -> Option<Vec<&'a str>> {
    let mut remaining = target;
    let mut greedy = Vec::new();
    for &(p, n) in candidates {
        if remaining == 0 {
            break;
        }
        if n <= remaining {
            greedy.push(p);
            remaining -= n;
        }
    }
    if remaining == 0 {
        return Some(greedy);
    }
    // 0/1 subset sum; `first[s]` is the first candidate index that made `s`
    // reachable, which always extends a sum reached by an earlier candidate.
    let mut first: Vec<Option<usize>> = vec![None; target + 1];
    let mut reachable = vec![false; target + 1];
    reachable[0] = true;
    for (i, &(_, n)) in candidates.iter().enumerate() {
        if n == 0 || n > target {
            continue;
        }
        for s in (n..=target).rev() {
            if reachable[s - n] && !reachable[s] {
                reachable[s] = true;
                first[s] = Some(i);
            }
        }
        if reachable[target] {
            break;
        }
    }
    if !reachable[target] {
        return None;
    }
    let mut out = Vec::new();
    let mut s = target;
    while s > 0 {
        let i = first[s]?;
        out.push(candidates[i].0);
        s -= candidates[i].1;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataman::record::{ImageRecord, Source};

    fn toy(n_pos: usize, n_neg: usize) -> DatasetManifest {
        let mut recs = Vec::new();
        for i in 0..n_pos {
            recs.push(ImageRecord::new(format!("i{i}"), format!("p{i}"), Source::Cohen, Finding::Sars2));
        }
        for i in n_pos..n_pos + n_neg {
            let f = if i % 2 == 0 { Finding::None } else { Finding::PneumoniaNonSars2 };
            recs.push(ImageRecord::new(format!("i{i}"), format!("p{i}"), Source::Cohen, f));
        }
        DatasetManifest::from_records(recs)
    }

    #[test]
    fn ten_patient_fixture_any_seed() {
        let m = toy(5, 5);
        let t = TestTargets { per_finding: [(Finding::Sars2, 2), (Finding::None, 2)].into() };
        for seed in 0..50 {
            let s = split_patient_level(&m, &t, 0.1, seed).unwrap();
            assert_eq!(s.records_in(Split::Test).count(), 4);
            let test = s.patients_in(Split::Test);
            let train = s.patients_in(Split::Train);
            let val = s.patients_in(Split::Val);
            assert!(test.is_disjoint(&train) && test.is_disjoint(&val) && train.is_disjoint(&val));
            assert_eq!(s.split_assignment.len(), 10);
        }
    }

    #[test]
    fn unsatisfiable_names_class() {
        let m = toy(3, 10);
        let err = split_patient_level(&m, &TestTargets::from_label_targets(4, 2), 0.1, 1).unwrap_err();
        match err {
            DataError::Unsatisfiable { class, .. } => assert_eq!(class, Finding::Sars2),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn exact_pick_needs_subset_sum() {
        // counts 3,3,2,2: target 4 is reachable only as 2+2.
        let c = [("a", 3), ("b", 3), ("c", 2), ("d", 2)];
        let mut got = pick_exact(&c, 4).unwrap();
        got.sort();
        assert_eq!(got, vec!["c", "d"]);
        assert!(pick_exact(&[("a", 3), ("b", 3)], 4).is_none());
        assert_eq!(pick_exact(&c, 0).unwrap(), Vec::<&str>::new());
    }

    #[test]
    fn same_seed_same_split() {
        let m = toy(20, 40);
        let t = TestTargets::from_label_targets(5, 6);
        assert_eq!(split_patient_level(&m, &t, 0.2, 9).unwrap(), split_patient_level(&m, &t, 0.2, 9).unwrap());
    }

    #[test]
    fn rejects_bad_val_fraction() {
        assert!(split_patient_level(&toy(2, 2), &TestTargets::from_label_targets(0, 0), 1.0, 0).is_err());
    }
}
