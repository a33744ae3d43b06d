use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        }
    }

    /// 1.0 for positive, 0.0 for negative.
    pub fn target(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => 0.0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" | "pos" | "1" => Ok(Label::Positive),
            "negative" | "neg" | "0" => Ok(Label::Negative),
            other => Err(format!("unrecognised label {other:?}")),
        }
    }
}

/// Radiological finding. Determines the label: only `Sars2` is positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Finding {
    None,
    PneumoniaNonSars2,
    Sars2,
}

impl Finding {
    pub const ALL: [Finding; 3] = [Finding::None, Finding::PneumoniaNonSars2, Finding::Sars2];

    pub fn label(self) -> Label {
        match self {
            Finding::Sars2 => Label::Positive,
            Finding::None | Finding::PneumoniaNonSars2 => Label::Negative,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Finding::None => "none",
            Finding::PneumoniaNonSars2 => "pneumonia_non_sars2",
            Finding::Sars2 => "sars2",
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Finding {
    type Err = String;

    /// Accepts the canonical names plus the vocabulary used by the public
    /// cohorts ("COVID-19", "normal", "pneumonia", ...). Case-insensitive.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        match norm.as_str() {
            "sars2" | "covid_19" | "covid19" | "covid" | "sars_cov_2" | "covid_19_positive" => Ok(Finding::Sars2),
            "none" | "normal" | "no_finding" | "no_pneumonia" | "healthy" => Ok(Finding::None),
            "pneumonia_non_sars2" | "pneumonia" | "non_covid_pneumonia" | "non_sars2_pneumonia" | "lung_opacity" => {
                Ok(Finding::PneumoniaNonSars2)
            }
            _ => Err(format!("unrecognised finding {:?}", s.trim())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum View {
    PA,
    AP,
    Unknown,
}

impl View {
    pub fn as_str(self) -> &'static str {
        match self {
            View::PA => "PA",
            View::AP => "AP",
            View::Unknown => "",
        }
    }

    /// Lenient parse: anything that is not PA or AP (lateral, empty, ...) is
    /// `Unknown`.
    pub fn parse_lenient(s: &str) -> View {
        let s = s.trim().to_ascii_uppercase();
        if s == "PA" {
            View::PA
        } else if s == "AP" || s.starts_with("AP ") || s.starts_with("AP_") {
            View::AP
        } else {
            View::Unknown
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sex {
    Male,
    Female,
    Unknown,
}

impl Sex {
    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
            Sex::Unknown => "",
        }
    }

    pub fn parse_lenient(s: &str) -> Sex {
        match s.trim().to_ascii_lowercase().as_str() {
            "m" | "male" => Sex::Male,
            "f" | "female" => Sex::Female,
            _ => Sex::Unknown,
        }
    }
}

/// Source cohort. The known public cohorts have dedicated variants; anything
/// else is carried verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Source {
    Cohen,
    Figure1,
    Actualmed,
    Sirm,
    RsnaPneumonia,
    Ricord,
    Bimcv,
    Other(String),
}

impl Source {
    pub fn as_str(&self) -> &str {
        match self {
            Source::Cohen => "cohen",
            Source::Figure1 => "figure1",
            Source::Actualmed => "actualmed",
            Source::Sirm => "sirm",
            Source::RsnaPneumonia => "rsna_pneumonia",
            Source::Ricord => "ricord",
            Source::Bimcv => "bimcv",
            Source::Other(s) => s,
        }
    }
}

impl From<String> for Source {
    fn from(s: String) -> Self {
        match s.as_str() {
            "cohen" => Source::Cohen,
            "figure1" => Source::Figure1,
            "actualmed" => Source::Actualmed,
            "sirm" => Source::Sirm,
            "rsna_pneumonia" => Source::RsnaPneumonia,
            "ricord" => Source::Ricord,
            "bimcv" => Source::Bimcv,
            _ => Source::Other(s),
        }
    }
}

impl From<&str> for Source {
    fn from(s: &str) -> Self {
        Source::from(s.to_string())
    }
}

impl From<Source> for String {
    fn from(s: Source) -> Self {
        s.as_str().to_string()
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// One chest radiograph and its metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub patient_id: String,
    pub source: Source,
    pub label: Label,
    pub finding: Finding,
    pub view: View,
    pub age: Option<u32>,
    pub sex: Sex,
    pub country: Option<String>,
    pub file_path: String,
}

impl ImageRecord {
    /// Record with unknown demographics; the label follows from `finding`.
    pub fn new(image_id: impl Into<String>, patient_id: impl Into<String>, source: Source, finding: Finding) -> Self {
        let image_id = image_id.into();
        ImageRecord {
            file_path: format!("{}/{}.png", source.as_str(), image_id),
            image_id,
            patient_id: patient_id.into(),
            source,
            label: finding.label(),
            finding,
            view: View::Unknown,
            age: None,
            sex: Sex::Unknown,
            country: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub records: Vec<ImageRecord>,
    pub split_assignment: BTreeMap<String, Split>,
    pub provenance: BTreeMap<Source, usize>,
}

impl DatasetManifest {
    /// Builds a manifest without split assignments, recomputing provenance.
    pub fn from_records(records: Vec<ImageRecord>) -> Self {
        let mut provenance = BTreeMap::new();
        for r in &records {
            *provenance.entry(r.source.clone()).or_insert(0) += 1;
        }
        DatasetManifest { records, split_assignment: BTreeMap::new(), provenance }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn split_of(&self, image_id: &str) -> Option<Split> {
        self.split_assignment.get(image_id).copied()
    }

    pub fn records_in(&self, split: Split) -> impl Iterator<Item = &ImageRecord> {
        self.records.iter().filter(move |r| self.split_of(&r.image_id) == Some(split))
    }

    pub fn patients_in(&self, split: Split) -> BTreeSet<&str> {
        self.records_in(split).map(|r| r.patient_id.as_str()).collect()
    }

    pub fn record(&self, image_id: &str) -> Option<&ImageRecord> {
        self.records.iter().find(|r| r.image_id == image_id)
    }
}
