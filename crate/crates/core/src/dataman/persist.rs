use super::record::{DatasetManifest, Finding, ImageRecord, Label, Sex, Source, Split, View};
use super::DataError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const MANIFEST_HEADER: [&str; 10] =
    ["image_id", "patient_id", "source", "label", "finding", "view", "age", "sex", "country", "file_path"];

/// The three files that persist a manifest: the record table, the
/// `image_id,split` sidecar and a TOML summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestPaths {
    pub manifest: PathBuf,
    pub splits: PathBuf,
    pub summary: PathBuf,
}

impl ManifestPaths {
    pub fn for_manifest(manifest: &Path) -> Self {
        let stem = manifest.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "manifest".into());
        let dir = manifest.parent().unwrap_or(Path::new(""));
        ManifestPaths {
            manifest: manifest.to_path_buf(),
            splits: dir.join(format!("{stem}.splits.csv")),
            summary: dir.join(format!("{stem}.summary.toml")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSummary {
    pub records: usize,
    pub patients: usize,
    pub seed: Option<u64>,
    pub val_fraction: Option<f64>,
    pub provenance: BTreeMap<String, usize>,
    pub split_images: BTreeMap<String, usize>,
    pub split_patients: BTreeMap<String, usize>,
}

impl ManifestSummary {
    pub fn of(manifest: &DatasetManifest, seed: Option<u64>, val_fraction: Option<f64>) -> Self {
        let patients = manifest.records.iter().map(|r| r.patient_id.as_str()).collect::<std::collections::BTreeSet<_>>();
        let mut split_images = BTreeMap::new();
        let mut split_patients = BTreeMap::new();
        for s in Split::ALL {
            split_images.insert(s.to_string(), manifest.records_in(s).count());
            split_patients.insert(s.to_string(), manifest.patients_in(s).len());
        }
        ManifestSummary {
            records: manifest.len(),
            patients: patients.len(),
            seed,
            val_fraction,
            provenance: manifest.provenance.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            split_images,
            split_patients,
        }
    }
}

pub fn write_manifest(manifest: &DatasetManifest, paths: &ManifestPaths, summary: &ManifestSummary) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(&paths.manifest)?;
    w.write_record(MANIFEST_HEADER)?;
    for r in &manifest.records {
        let age = r.age.map(|a| a.to_string()).unwrap_or_default();
        w.write_record([
            r.image_id.as_str(),
            r.patient_id.as_str(),
            r.source.as_str(),
            r.label.as_str(),
            r.finding.as_str(),
            r.view.as_str(),
            age.as_str(),
            r.sex.as_str(),
            r.country.as_deref().unwrap_or(""),
            r.file_path.as_str(),
        ])?;
    }
    w.flush().map_err(|e| DataError::io(&paths.manifest, e))?;

    let mut w = csv::Writer::from_path(&paths.splits)?;
    w.write_record(["image_id", "split"])?;
    for r in &manifest.records {
        if let Some(s) = manifest.split_of(&r.image_id) {
            w.write_record([r.image_id.as_str(), s.as_str()])?;
        }
    }
    w.flush().map_err(|e| DataError::io(&paths.splits, e))?;

    let text = toml::to_string(summary)
        .map_err(|e| DataError::Manifest { path: paths.summary.clone(), msg: e.to_string() })?;
    std::fs::write(&paths.summary, text).map_err(|e| DataError::io(&paths.summary, e))?;
    Ok(())
}

/// Reads a manifest written by [`write_manifest`]. The header must match
/// [`MANIFEST_HEADER`] exactly; the splits sidecar is optional.
pub fn read_manifest(path: &Path) -> Result<DatasetManifest, DataError> {
    let bad = |msg: String| DataError::Manifest { path: path.to_path_buf(), msg };
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if header != MANIFEST_HEADER {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let f = |k: usize| row.get(k).unwrap_or("");
        let label: Label = f(3).parse().map_err(|e| bad(format!("line {line}: {e}")))?;
        let finding: Finding = f(4).parse().map_err(|e| bad(format!("line {line}: {e}")))?;
        if finding.label() != label {
            return Err(bad(format!("line {line}: label {label} contradicts finding {finding}")));
        }
        let age = match f(6) {
            "" => None,
            a => Some(a.parse::<u32>().map_err(|_| bad(format!("line {line}: invalid age {a:?}")))?),
        };
        records.push(ImageRecord {
            image_id: f(0).to_string(),
            patient_id: f(1).to_string(),
            source: Source::from(f(2)),
            label,
            finding,
            view: View::parse_lenient(f(5)),
            age,
            sex: Sex::parse_lenient(f(7)),
            country: Some(f(8).to_string()).filter(|c| !c.is_empty()),
            file_path: f(9).to_string(),
        });
    }
    let mut manifest = DatasetManifest::from_records(records);
    let splits = ManifestPaths::for_manifest(path).splits;
    if splits.exists() {
        let mut rdr = csv::Reader::from_path(&splits)?;
        for row in rdr.records() {
            let row = row?;
            let split: Split = row.get(1).unwrap_or("").parse().map_err(|e: String| bad(e))?;
            manifest.split_assignment.insert(row.get(0).unwrap_or("").to_string(), split);
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = ImageRecord::new("a,1", "p1", Source::Ricord, Finding::Sars2);
        r.age = Some(52);
        r.sex = Sex::Female;
        r.view = View::AP;
        r.country = Some("Canada".into());
        let mut m = DatasetManifest::from_records(vec![r, ImageRecord::new("b", "p2", Source::Cohen, Finding::None)]);
        m.split_assignment.insert("a,1".into(), Split::Test);
        m.split_assignment.insert("b".into(), Split::Train);
        let paths = ManifestPaths::for_manifest(&dir.path().join("bench.csv"));
        write_manifest(&m, &paths, &ManifestSummary::of(&m, Some(3), Some(0.1))).unwrap();
        let text = std::fs::read_to_string(&paths.manifest).unwrap();
        assert!(text.starts_with("image_id,patient_id,source,label,finding,view,age,sex,country,file_path\n"));
        assert!(paths.summary.ends_with("bench.summary.toml"));
        assert_eq!(read_manifest(&paths.manifest).unwrap(), m);
        let summary: ManifestSummary = toml::from_str(&std::fs::read_to_string(&paths.summary).unwrap()).unwrap();
        assert_eq!(summary.split_images["test"], 1);
    }
}
