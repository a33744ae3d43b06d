use super::record::{DatasetManifest, Finding, Label, Sex, Split, View};
use crate::percent::{count_with_percent, tenths_of_percent};
use log::warn;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

/// Decade age bins with `<20` and `90+` terminals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeBin {
    #[serde(rename = "<20")]
    Under20,
    #[serde(rename = "20-29")]
    Twenties,
    #[serde(rename = "30-39")]
    Thirties,
    #[serde(rename = "40-49")]
    Forties,
    #[serde(rename = "50-59")]
    Fifties,
    #[serde(rename = "60-69")]
    Sixties,
    #[serde(rename = "70-79")]
    Seventies,
    #[serde(rename = "80-89")]
    Eighties,
    #[serde(rename = "90+")]
    NinetyPlus,
    Unknown,
}

impl AgeBin {
    pub const ALL: [AgeBin; 10] = [
        AgeBin::Under20,
        AgeBin::Twenties,
        AgeBin::Thirties,
        AgeBin::Forties,
        AgeBin::Fifties,
        AgeBin::Sixties,
        AgeBin::Seventies,
        AgeBin::Eighties,
        AgeBin::NinetyPlus,
        AgeBin::Unknown,
    ];

    pub fn of(age: Option<u32>) -> AgeBin {
        match age {
            None => AgeBin::Unknown,
            Some(a) if a < 20 => AgeBin::Under20,
            Some(a) if a >= 90 => AgeBin::NinetyPlus,
            Some(a) => AgeBin::ALL[(a / 10 - 1) as usize],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AgeBin::Under20 => "<20",
            AgeBin::Twenties => "20-29",
            AgeBin::Thirties => "30-39",
            AgeBin::Forties => "40-49",
            AgeBin::Fifties => "50-59",
            AgeBin::Sixties => "60-69",
            AgeBin::Seventies => "70-79",
            AgeBin::Eighties => "80-89",
            AgeBin::NinetyPlus => "90+",
            AgeBin::Unknown => "Unknown",
        }
    }
}

/// A count and its share of the relevant total, rounded to one decimal
/// (half-up, computed on integers).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinCount {
    pub count: u64,
    pub percentage: f64,
}

impl BinCount {
    fn new(count: u64, total: u64) -> Self {
        let percentage = tenths_of_percent(count, total).map_or(0.0, |t| t as f64 / 10.0);
        BinCount { count, percentage }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicSummary {
    pub patients: u64,
    pub images: u64,
    /// Over patients with a known age; `None` when there are none.
    pub age_mean: Option<f64>,
    /// Population standard deviation over patients with a known age.
    pub age_std: Option<f64>,
    pub age_bins: BTreeMap<AgeBin, BinCount>,
    pub sex_counts: BTreeMap<Sex, BinCount>,
    pub view_counts: BTreeMap<View, BinCount>,
}

/// Age and sex are tallied once per patient from its first record; views are
/// tallied per image.
pub fn demographic_summary(manifest: &DatasetManifest) -> DemographicSummary {
    let mut first: HashMap<&str, (Option<u32>, Sex)> = HashMap::new();
    let mut order: Vec<&str> = Vec::new();
    let mut views: BTreeMap<View, u64> = BTreeMap::new();
    for r in &manifest.records {
        *views.entry(r.view).or_default() += 1;
        match first.get(r.patient_id.as_str()) {
            Some(&(age, sex)) => {
                if age != r.age || sex != r.sex {
                    warn!(
                        "patient {} has conflicting demographics on image {}; keeping first record",
                        r.patient_id, r.image_id
                    );
                }
            }
            None => {
                first.insert(&r.patient_id, (r.age, r.sex));
                order.push(&r.patient_id);
            }
        }
    }
    let patients = order.len() as u64;
    let images = manifest.records.len() as u64;

    let mut ages: BTreeMap<AgeBin, u64> = AgeBin::ALL.iter().map(|b| (*b, 0)).collect();
    let mut sexes: BTreeMap<Sex, u64> = [Sex::Male, Sex::Female, Sex::Unknown].iter().map(|s| (*s, 0)).collect();
    let mut known = Vec::new();
    for p in &order {
        let (age, sex) = first[p];
        *ages.get_mut(&AgeBin::of(age)).unwrap() += 1;
        *sexes.get_mut(&sex).unwrap() += 1;
        if let Some(a) = age {
            known.push(a as f64);
        }
    }
    let (age_mean, age_std) = if known.is_empty() {
        (None, None)
    } else {
        let n = known.len() as f64;
        let mean = known.iter().sum::<f64>() / n;
        let var = known.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        (Some(mean), Some(var.sqrt()))
    };
    for v in [View::PA, View::AP, View::Unknown] {
        views.entry(v).or_default();
    }
    DemographicSummary {
        patients,
        images,
        age_mean,
        age_std,
        age_bins: ages.into_iter().map(|(b, c)| (b, BinCount::new(c, patients))).collect(),
        sex_counts: sexes.into_iter().map(|(s, c)| (s, BinCount::new(c, patients))).collect(),
        view_counts: views.into_iter().map(|(v, c)| (v, BinCount::new(c, images))).collect(),
    }
}

impl DemographicSummary {
    pub fn age_cell(&self, bin: AgeBin) -> String {
        count_with_percent(self.age_bins[&bin].count, self.patients)
    }

    pub fn sex_cell(&self, sex: Sex) -> String {
        count_with_percent(self.sex_counts[&sex].count, self.patients)
    }

    pub fn view_cell(&self, view: View) -> String {
        count_with_percent(self.view_counts[&view].count, self.images)
    }

    /// `"46.89 ± 17.65"`, or `"n/a"` without any known age.
    pub fn age_mean_std(&self) -> String {
        match (self.age_mean, self.age_std) {
            (Some(m), Some(s)) => format!("{m:.2} ± {s:.2}"),
            _ => "n/a".into(),
        }
    }

    /// Plain-text table laid out like a demographics table: one row per bin
    /// with `count (pct%)` cells.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Age          | mean ± std | {}", self.age_mean_std());
        for b in AgeBin::ALL {
            let _ = writeln!(out, "             | {:<10} | {}", b.label(), self.age_cell(b));
        }
        let _ = writeln!(out, "Sex");
        for (s, name) in [(Sex::Male, "Male"), (Sex::Female, "Female"), (Sex::Unknown, "Unknown")] {
            let _ = writeln!(out, "             | {:<10} | {}", name, self.sex_cell(s));
        }
        let _ = writeln!(out, "Imaging view");
        for (v, name) in [(View::PA, "PA"), (View::AP, "AP"), (View::Unknown, "Unknown")] {
            let _ = writeln!(out, "             | {:<10} | {}", name, self.view_cell(v));
        }
        out
    }
}

/// Class grouping used by the distribution report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassKey {
    Positive,
    Negative,
    NoPneumonia,
    Pneumonia,
}

impl ClassKey {
    pub const ALL: [ClassKey; 4] = [ClassKey::Positive, ClassKey::Negative, ClassKey::NoPneumonia, ClassKey::Pneumonia];

    fn matches(self, finding: Finding) -> bool {
        match self {
            ClassKey::Positive => finding.label() == Label::Positive,
            ClassKey::Negative => finding.label() == Label::Negative,
            ClassKey::NoPneumonia => finding == Finding::None,
            ClassKey::Pneumonia => finding == Finding::PneumoniaNonSars2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionRow {
    /// `"all"`, `"unassigned"` or a split name.
    pub split: String,
    pub class: ClassKey,
    pub images: usize,
    pub patients: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub rows: Vec<DistributionRow>,
}

/// Image and unique-patient counts per split and class.
pub fn distribution_report(manifest: &DatasetManifest) -> DistributionReport {
    let groups: Vec<String> = std::iter::once("all".to_string())
        .chain(Split::ALL.iter().map(|s| s.to_string()))
        .chain(std::iter::once("unassigned".to_string()))
        .collect();
    let group_of = |image_id: &str| match manifest.split_of(image_id) {
        Some(s) => s.to_string(),
        None => "unassigned".to_string(),
    };
    let mut rows = Vec::new();
    for g in &groups {
        for class in ClassKey::ALL {
            let mut images = 0;
            let mut patients = BTreeSet::new();
            for r in &manifest.records {
                if class.matches(r.finding) && (g == "all" || group_of(&r.image_id) == *g) {
                    images += 1;
                    patients.insert(r.patient_id.as_str());
                }
            }
            rows.push(DistributionRow { split: g.clone(), class, images, patients: patients.len() });
        }
    }
    DistributionReport { rows }
}

impl DistributionReport {
    pub fn get(&self, split: &str, class: ClassKey) -> Option<&DistributionRow> {
        self.rows.iter().find(|r| r.split == split && r.class == class)
    }

    /// `split,class,images,patients` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("split,class,images,patients\n");
        for r in &self.rows {
            let class = serde_json::to_value(r.class).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", r.split, class, r.images, r.patients);
        }
        out
    }
}
