use super::record::{DatasetManifest, Finding, ImageRecord, Label, Sex, Source, View};
use super::DataError;
use log::warn;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;
use std::path::{Component, Path};

/// Maps the columns of a cohort's metadata file onto [`ImageRecord`] fields.
///
/// `image_id`, `patient_id`, `finding` and `file_path` are required; the
/// remaining columns are read when present and treated as unknown otherwise.
/// `finding_aliases` extends the built-in finding vocabulary (keys compared
/// case-insensitively).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub delimiter: char,
    pub image_id: String,
    pub patient_id: String,
    pub finding: String,
    pub file_path: String,
    pub label: String,
    pub view: String,
    pub age: String,
    pub sex: String,
    pub country: String,
    pub finding_aliases: BTreeMap<String, Finding>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            delimiter: ',',
            image_id: "image_id".into(),
            patient_id: "patient_id".into(),
            finding: "finding".into(),
            file_path: "file_path".into(),
            label: "label".into(),
            view: "view".into(),
            age: "age".into(),
            sex: "sex".into(),
            country: "country".into(),
            finding_aliases: BTreeMap::new(),
        }
    }
}

impl ColumnMapping {
    fn parse_finding(&self, raw: &str) -> Result<Finding, String> {
        let key = raw.trim().to_ascii_lowercase();
        if let Some((_, f)) = self.finding_aliases.iter().find(|(k, _)| k.to_ascii_lowercase() == key) {
            return Ok(*f);
        }
        raw.parse()
    }
}

/// A row that did not become a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based line number in the file, header included.
    pub line: usize,
    pub image_id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestOutcome {
    pub records: Vec<ImageRecord>,
    pub rejections: Vec<Rejection>,
}

pub fn ingest_source(manifest_file: &Path, source: Source, schema: &ColumnMapping) -> Result<IngestOutcome, DataError> {
    let file = std::fs::File::open(manifest_file).map_err(|e| DataError::io(manifest_file, e))?;
    ingest_reader(file, &manifest_file.display().to_string(), source, schema)
}

/// Ingests delimiter-separated rows from any reader. `name` is used in errors.
pub fn ingest_reader<R: Read>(
    reader: R,
    name: &str,
    source: Source,
    schema: &ColumnMapping,
) -> Result<IngestOutcome, DataError> {
    if !schema.delimiter.is_ascii() {
        return Err(DataError::Schema { file: name.into(), msg: "delimiter must be ASCII".into() });
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .flexible(true)
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let require = |field: &str, column: &str| {
        col(column).ok_or_else(|| DataError::Schema {
            file: name.into(),
            msg: format!("missing required column {column:?} (field {field})"),
        })
    };
    let i_image = require("image_id", &schema.image_id)?;
    let i_patient = require("patient_id", &schema.patient_id)?;
    let i_finding = require("finding", &schema.finding)?;
    let i_path = require("file_path", &schema.file_path)?;
    let i_label = col(&schema.label);
    let i_view = col(&schema.view);
    let i_age = col(&schema.age);
    let i_sex = col(&schema.sex);
    let i_country = col(&schema.country);

    let mut out = IngestOutcome::default();
    let mut seen: HashSet<String> = HashSet::new();
    for (row_idx, row) in rdr.records().enumerate() {
        let line = row_idx + 2;
        let row = row?;
        let get = |i: usize| row.get(i).map(str::trim).unwrap_or("");
        let image_id = get(i_image).to_string();
        let mut reject = |reason: String| {
            warn!("rejected {name}:{line}: {reason}");
            out.rejections.push(Rejection {
                line,
                image_id: (!image_id.is_empty()).then(|| image_id.clone()),
                reason,
            });
        };
        if row.len() < headers.len() {
            reject(format!("malformed row: {} fields, expected {}", row.len(), headers.len()));
            continue;
        }
        if image_id.is_empty() {
            reject("missing image_id".into());
            continue;
        }
        let patient_id = get(i_patient);
        if patient_id.is_empty() {
            reject("missing patient_id".into());
            continue;
        }
        let finding = match schema.parse_finding(get(i_finding)) {
            Ok(f) => f,
            Err(e) => {
                reject(e);
                continue;
            }
        };
        if let Some(i) = i_label {
            let raw = get(i);
            if !raw.is_empty() {
                match raw.parse::<Label>() {
                    Ok(l) if l == finding.label() => {}
                    Ok(l) => {
                        reject(format!("label {l} contradicts finding {finding}"));
                        continue;
                    }
                    Err(e) => {
                        reject(e);
                        continue;
                    }
                }
            }
        }
        let age = match i_age.map(get).unwrap_or("") {
            "" => None,
            raw => match parse_age(raw) {
                Ok(a) => a,
                Err(e) => {
                    reject(e);
                    continue;
                }
            },
        };
        let file_path = get(i_path);
        if let Err(e) = check_relative(file_path) {
            reject(e);
            continue;
        }
        if !seen.insert(image_id.clone()) {
            reject("duplicate image_id".into());
            continue;
        }
        let country = i_country.map(get).filter(|c| !c.is_empty()).map(str::to_string);
        out.records.push(ImageRecord {
            image_id: image_id.clone(),
            patient_id: patient_id.to_string(),
            source: source.clone(),
            label: finding.label(),
            finding,
            view: i_view.map(|i| View::parse_lenient(get(i))).unwrap_or(View::Unknown),
            age,
            sex: i_sex.map(|i| Sex::parse_lenient(get(i))).unwrap_or(Sex::Unknown),
            country,
            file_path: file_path.to_string(),
        });
    }
    Ok(out)
}

fn parse_age(raw: &str) -> Result<Option<u32>, String> {
    match raw.to_ascii_lowercase().as_str() {
        "na" | "nan" | "n/a" | "unknown" | "?" => return Ok(None),
        _ => {}
    }
    if let Ok(a) = raw.parse::<u32>() {
        return Ok(Some(a));
    }
    match raw.parse::<f64>() {
        Ok(a) if a.is_finite() && a >= 0.0 && a < 200.0 => Ok(Some(a.floor() as u32)),
        _ => Err(format!("invalid age {raw:?}")),
    }
}

fn check_relative(path: &str) -> Result<(), String> {
    if path.is_empty() {
        return Err("missing file_path".into());
    }
    let p = Path::new(path);
    if p.is_absolute() || p.components().any(|c| !matches!(c, Component::Normal(_) | Component::CurDir)) {
        return Err(format!("file_path {path:?} does not resolve under the data root"));
    }
    Ok(())
}

/// Cross-source duplicate resolved in favour of the earlier source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnifyConflict {
    pub image_id: String,
    pub kept: Source,
    pub dropped: Source,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unified {
    pub manifest: DatasetManifest,
    pub conflicts: Vec<UnifyConflict>,
}

/// Merges per-source record lists. Duplicate image ids keep the first
/// occurrence; a duplicate whose label disagrees is a hard error.
pub fn unify(sources: Vec<Vec<ImageRecord>>) -> Result<Unified, DataError> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut records: Vec<ImageRecord> = Vec::new();
    let mut conflicts = Vec::new();
    for source in sources {
        for rec in source {
            match index.get(&rec.image_id) {
                Some(&i) => {
                    let kept = &records[i];
                    if kept.label != rec.label {
                        return Err(DataError::LabelConflict {
                            image_id: rec.image_id,
                            first: kept.label,
                            second: rec.label,
                        });
                    }
                    warn!("duplicate image {} from {} ignored (kept {})", rec.image_id, rec.source, kept.source);
                    conflicts.push(UnifyConflict {
                        image_id: rec.image_id,
                        kept: kept.source.clone(),
                        dropped: rec.source,
                    });
                }
                None => {
                    index.insert(rec.image_id.clone(), records.len());
                    records.push(rec);
                }
            }
        }
    }
    Ok(Unified { manifest: DatasetManifest::from_records(records), conflicts })
}
