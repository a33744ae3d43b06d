//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits non-zero if any fails. Tolerances and time budgets are fixed here.

mod common;

use common::*;
use cxrscreen::archnet::{ArchSpec, LayerSpec, PoolMode, PrpeBlockSpec, Shape};
use cxrscreen::archnet::Activation as Act;
use cxrscreen::complexity::analyze;
use cxrscreen::dataman::{
    demographic_summary, split_patient_level, AgeBin, DatasetManifest, Finding, ImageRecord, Sex, Source, Split,
    TestTargets, View,
};
use cxrscreen::factorscope::{identify_critical_factors, suppress, FactorConfig};
use cxrscreen::metrics::{metrics_from_confusion, render_report, ConfusionMatrix, ReportStyle};
use cxrscreen::pixelpipe::{crop_top, hflip, preprocess, resize, PreprocessConfig};
use cxrscreen::trainer::{check_values, evaluate_split, rebalanced_batches, train_with_validator, ConstraintSpec, TrainConfig};
use cxrscreen::{ImageBuffer, Model};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_ABS_FLOOR: f64 = 1e-8;
const RESIZE_TOL: f64 = 1e-6;
const SMOKE_MIN_ACCURACY: f64 = 0.95;
const SMOKE_STEPS: usize = 200;
const EXPLAIN_MIN_PASS: f64 = 0.90;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let criteria: Vec<(&str, Duration, fn() -> Outcome)> = vec![
        ("metric arithmetic", Duration::from_secs(1), metric_arithmetic),
        ("constraint indicator", Duration::from_secs(1), constraint_indicator),
        ("complexity oracle", Duration::from_secs(10), complexity_oracle),
        ("split safety", Duration::from_secs(30), split_safety),
        ("preprocessing goldens", Duration::from_secs(5), preprocessing_goldens),
        ("training smoke", Duration::from_secs(120), training_smoke),
        ("re-balancing", Duration::from_secs(10), rebalancing),
        ("explainability property", Duration::from_secs(120), explainability),
        ("demographics", Duration::from_secs(5), demographics),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(d) if took > *budget => Err(format!("{d}; exceeded {:.0?} budget", budget)),
            o => o,
        };
        match outcome {
            Ok(detail) => println!("PASS  {} {:<24} {:>8.2?}  {}", i + 1, name, took, detail),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {} {:<24} {:>8.2?}  {}", i + 1, name, took, detail)
            }
        }
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

// 1 ------------------------------------------------------------------------

fn metric_arithmetic() -> Outcome {
    let cm = ConfusionMatrix::new(194, 6, 9, 191);
    let r = metrics_from_confusion(cm);
    ensure(cm.sensitivity_ratio() == (191, 200), || format!("sensitivity ratio {:?}", cm.sensitivity_ratio()))?;
    ensure(cm.ppv_ratio() == (191, 197), || format!("ppv ratio {:?}", cm.ppv_ratio()))?;
    ensure(cm.accuracy_ratio() == (385, 400), || format!("accuracy ratio {:?}", cm.accuracy_ratio()))?;
    ensure(r.sensitivity == Some(0.9550), || format!("sensitivity {:?}", r.sensitivity))?;
    ensure(r.accuracy == Some(0.9625), || format!("accuracy {:?}", r.accuracy))?;
    let ppv = r.ppv.ok_or("ppv undefined")?;
    ensure(format!("{ppv:.5}") == "0.96954", || format!("ppv {ppv}"))?;
    let line = r.summary_line();
    ensure(line == "95.5 / 97.0 / 96.3", || format!("rendered {line:?}"))?;
    ensure(render_report(&r, ReportStyle::Table).contains("95.5 / 97.0 / 96.3"), || "table missing summary".into())?;
    Ok(line)
}

// 2 ------------------------------------------------------------------------

fn constraint_indicator() -> Outcome {
    let spec = ConstraintSpec::default();
    let rows = [("tiny", 0.955, 0.970, true), ("baseline-a", 0.935, 1.000, false), ("baseline-b", 0.885, 0.922, false)];
    for (name, s, p, want) in rows {
        let v = check_values(Some(s), Some(p), &spec);
        ensure(v.passed == want, || format!("{name}: got {v}"))?;
    }
    Ok("tiny pass, baseline-a fail, baseline-b fail".into())
}

// 3 ------------------------------------------------------------------------

fn complexity_oracle() -> Outcome {
    let mut r = rng(3);
    let mut specs: Vec<ArchSpec> = (0..40).map(|_| random_spec(&mut r)).collect();
    specs.push(ArchSpec::cxr2_tiny());
    specs.push(ArchSpec::prpe_toy());
    for (i, spec) in specs.iter().enumerate() {
        let rep = analyze(spec).map_err(|e| e.to_string())?;
        let oracle = brute_force_tally(spec);
        ensure(rep.total_params == oracle.params && rep.total_macs == oracle.macs, || {
            format!("spec {i} ({}): analytic {}/{} vs brute force {}/{}", spec.name, rep.total_params, rep.total_macs, oracle.params, oracle.macs)
        })?;
        let model = Model::new(spec.clone(), 0).map_err(|e| e.to_string())?;
        ensure(model.num_params() as u64 == rep.total_params, || format!("spec {i}: model has {} params", model.num_params()))?;
    }
    let tiny = analyze(&ArchSpec::cxr2_tiny()).unwrap();
    Ok(format!("{} specs exact; cxr2-tiny {} params, {} MACs", specs.len(), tiny.total_params, tiny.total_macs))
}

// 4 ------------------------------------------------------------------------

fn split_safety() -> Outcome {
    let mut satisfiable = 0;
    for seed in 0..1000u64 {
        let mut r = rng(10_000 + seed);
        let n_pat = r.random_range(8..60);
        let m = random_manifest(&mut r, n_pat);
        let targets = TestTargets::from_label_targets(r.random_range(0..=12), r.random_range(0..=12));
        let mut eligible: BTreeMap<Finding, Vec<usize>> = BTreeMap::new();
        let mut per_patient: BTreeMap<&str, (usize, BTreeSet<Finding>)> = BTreeMap::new();
        for rec in &m.records {
            let e = per_patient.entry(&rec.patient_id).or_default();
            e.0 += 1;
            e.1.insert(rec.finding);
        }
        for (n, fs) in per_patient.values() {
            if fs.len() == 1 {
                eligible.entry(*fs.iter().next().unwrap()).or_default().push(*n);
            }
        }
        let feasible: BTreeMap<Finding, bool> = targets
            .per_finding
            .iter()
            .map(|(f, &t)| (*f, subset_sum(eligible.get(f).map_or(&[][..], |v| v), t)))
            .collect();
        let all_ok = feasible.values().all(|&b| b);
        match split_patient_level(&m, &targets, 0.1, seed) {
            Ok(s) => {
                ensure(all_ok, || format!("seed {seed}: split succeeded on unsatisfiable targets"))?;
                satisfiable += 1;
                ensure(s.split_assignment.len() == m.len(), || format!("seed {seed}: not every image assigned"))?;
                let sets: Vec<BTreeSet<&str>> = [Split::Train, Split::Val, Split::Test].iter().map(|&x| s.patients_in(x)).collect();
                for a in 0..3 {
                    for b in a + 1..3 {
                        ensure(sets[a].is_disjoint(&sets[b]), || format!("seed {seed}: patient overlap"))?;
                    }
                }
                for (f, &t) in &targets.per_finding {
                    let got = s.records_in(Split::Test).filter(|r| r.finding == *f).count();
                    ensure(got == t, || format!("seed {seed}: {f:?} test images {got}, target {t}"))?;
                }
                if seed % 100 == 0 {
                    ensure(split_patient_level(&m, &targets, 0.1, seed).ok() == Some(s), || format!("seed {seed}: not deterministic"))?;
                }
            }
            Err(cxrscreen::dataman::DataError::Unsatisfiable { class, .. }) => {
                ensure(!feasible[&class], || format!("seed {seed}: {class:?} reported unsatisfiable but is feasible"))?;
            }
            Err(e) => return Err(format!("seed {seed}: {e}")),
        }
    }
    // benchmark-scale cohort with the published class sizes
    let m = cohort_like(7);
    let s = split_patient_level(&m, &TestTargets::benchmark(), 0.1, 7).map_err(|e| e.to_string())?;
    let count = |f: Finding| s.records_in(Split::Test).filter(|r| r.finding == f).count();
    ensure(count(Finding::Sars2) == 200 && count(Finding::None) == 100 && count(Finding::PneumoniaNonSars2) == 100, || {
        format!("benchmark test split {}/{}/{}", count(Finding::Sars2), count(Finding::None), count(Finding::PneumoniaNonSars2))
    })?;
    Ok(format!("1000 manifests ({satisfiable} satisfiable), benchmark 200/100/100 exact"))
}

/// Patients and images per finding as in the published cohort; extra images
/// go to the first patients of each class.
fn cohort_like(seed: u64) -> DatasetManifest {
    let mut r = rng(seed);
    let mut recs = Vec::new();
    for (f, images, patients) in [(Finding::Sars2, 5210, 2815), (Finding::None, 8418, 8300), (Finding::PneumoniaNonSars2, 5575, 5551)] {
        let extra = images - patients;
        for p in 0..patients {
            let n = 1 + usize::from(p < extra);
            for i in 0..n {
                let mut rec = ImageRecord::new(format!("{}-{p}-{i}", f.as_str()), format!("{}-{p}", f.as_str()), Source::Cohen, f);
                rec.view = [View::PA, View::AP][r.random_range(0..2)];
                recs.push(rec);
            }
        }
    }
    DatasetManifest::from_records(recs)
}

// 5 ------------------------------------------------------------------------

fn preprocessing_goldens() -> Outcome {
    let mut r = rng(5);
    for (h, w) in [(100, 50), (483, 480), (25, 7), (1000, 800), (13, 13)] {
        let img = ImageBuffer::from_fn(h, w, |_, _| r.random_range(0.0..255.0f32).round());
        let c = crop_top(&img, 0.08).map_err(|e| e.to_string())?;
        let removed = h * 8 / 100;
        ensure(c.height() == h - removed && c.width() == w, || format!("{h}x{w} cropped to {}x{}", c.height(), c.width()))?;
        ensure(c.get(0, 0) == img.get(removed, 0), || "crop kept wrong rows".into())?;
    }
    ensure(crop_top(&ImageBuffer::filled(483, 480, 0.0), 0.08).unwrap().height() == 445, || "483 rows".into())?;

    for (h, w) in [(600, 500), (480, 480), (321, 777)] {
        let raw = ImageBuffer::from_fn(h, w, |_, _| r.random_range(0..=255) as f32);
        let out = preprocess(&raw, &PreprocessConfig::default()).map_err(|e| e.to_string())?;
        ensure(out.height() == 480 && out.width() == 480, || format!("output {}x{}", out.height(), out.width()))?;
        ensure(out.pixels().iter().all(|v| (0.0..=1.0).contains(v)), || "value outside [0,1]".into())?;
    }

    let checker = ImageBuffer::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
    let up = resize(&checker, 4).unwrap();
    // hand-computed: sample coords per axis are 0, 0.25, 0.75, 1
    let t = [0.0, 0.25, 0.75, 1.0];
    for y in 0..4 {
        for x in 0..4 {
            let want = t[x] + t[y] - 2.0 * t[x] * t[y];
            ensure((up.get(y, x) as f64 - want).abs() <= RESIZE_TOL, || format!("checkerboard ({y},{x}) {} vs {want}", up.get(y, x)))?;
        }
    }
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (h, w) = (r.random_range(1..60), r.random_range(1..60));
        let side = r.random_range(1..90);
        let img = ImageBuffer::from_fn(h, w, |_, _| r.random_range(0.0..1.0));
        let got = resize(&img, side).unwrap();
        let want = bilinear_oracle(&to_rows(&img), side, side);
        for y in 0..side {
            for x in 0..side {
                worst = worst.max((got.get(y, x) as f64 - want[y][x]).abs());
            }
        }
    }
    ensure(worst <= RESIZE_TOL, || format!("resize deviates from oracle by {worst:e}"))?;
    let img = ImageBuffer::from_fn(37, 23, |_, _| r.random_range(0.0..1.0));
    ensure(hflip(&hflip(&img)) == img, || "hflip is not an involution".into())?;
    Ok(format!("crop/shape/range ok; resize max deviation {worst:.1e}"))
}

// 6 ------------------------------------------------------------------------

struct Trained {
    model: Model,
    /// Best train accuracy reached at an epoch boundary.
    train_accuracy: f64,
    steps: usize,
}

fn trained_toy() -> &'static Result<Trained, String> {
    static CELL: OnceLock<Result<Trained, String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let (m, images) = blob_dataset(61, 32, 16);
        for rec in &m.records {
            let positive = rec.label == cxrscreen::dataman::Label::Positive;
            if threshold_oracle(&images[&rec.image_id]) != positive {
                return Err(format!("fixture not separable at {}", rec.image_id));
            }
        }
        let cfg = TrainConfig {
            learning_rate: 1e-3,
            epochs: SMOKE_STEPS / 4,
            patience: SMOKE_STEPS / 4,
            max_steps: Some(SMOKE_STEPS),
            augment: cxrscreen::pixelpipe::AugmentConfig::disabled(),
            seed: 1,
            ..Default::default()
        };
        let model = Model::new(ArchSpec::prpe_toy(), 1).map_err(|e| e.to_string())?;
        let accuracy = |model: &Model, split: Split| -> Result<f64, cxrscreen::trainer::TrainError> {
            let (n, d) = evaluate_split(model, &m, split, &images, 0.5)?.accuracy_ratio();
            Ok(n as f64 / d as f64)
        };
        let mut train_curve = Vec::new();
        let (model, history) = train_with_validator(model, &m, &images, &cfg, None, |model, _| {
            train_curve.push(accuracy(model, Split::Train)?);
            accuracy(model, Split::Val)
        })
        .map_err(|e| e.to_string())?;
        let train_accuracy = train_curve.iter().cloned().fold(0.0, f64::max);
        Ok(Trained { model, train_accuracy, steps: history.total_steps })
    })
}

fn grad_check_spec() -> ArchSpec {
    use LayerSpec::*;
    let mut prpe = PrpeBlockSpec::new(4, 0.5, 2, 6);
    prpe.replication = cxrscreen::archnet::Replication::Concat;
    ArchSpec::new(
        "grad-check",
        Shape::new(1, 9, 9),
        vec![
            ConvStandard { in_channels: 1, out_channels: 4, kernel: 3, stride: 1 },
            Activation { function: Act::Relu },
            Pool { mode: PoolMode::Avg, kernel: 2, stride: 2 },
            PrpeBlock(PrpeBlockSpec::new(4, 1.0, 2, 4)),
            ConvDepthwise { channels: 4, multiplier: 1, kernel: 3, stride: 1 },
            PrpeBlock(prpe),
            ConvPointwise { in_channels: 6, out_channels: 5, stride: 2 },
            Dense { in_features: 45, out_features: 3 },
        ],
    )
    .with_edges(vec![(2, 4), (3, 5)])
}

fn gradient_check() -> Result<f64, String> {
    let spec = grad_check_spec();
    let mut model = Model::new(spec, 17).map_err(|e| e.to_string())?;
    let mut r = rng(18);
    // small non-zero biases so no unit sits exactly on a kink
    for p in model.params_mut() {
        *p += r.random_range(-0.05..0.05);
    }
    let batch: Vec<ImageBuffer> = (0..3).map(|_| ImageBuffer::from_fn(9, 9, |_, _| r.random_range(0.0..1.0))).collect();
    let labels = [1.0, 0.0, 1.0];
    let (_, grad) = model.loss_and_grad(&batch, &labels).map_err(|e| e.to_string())?;
    let mut idx: Vec<usize> = (0..model.num_params()).collect();
    idx.shuffle(&mut r);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for &i in idx.iter().take(50) {
        let orig = model.params()[i];
        model.params_mut()[i] = orig + h;
        let lp = model.loss(&batch, &labels).unwrap();
        model.params_mut()[i] = orig - h;
        let lm = model.loss(&batch, &labels).unwrap();
        model.params_mut()[i] = orig;
        let num = (lp - lm) / (2.0 * h);
        let a = grad[i];
        let scale = a.abs().max(num.abs());
        if scale < GRAD_ABS_FLOOR {
            continue;
        }
        let rel = (a - num).abs() / scale;
        worst = worst.max(rel);
        if rel > GRAD_REL_TOL {
            return Err(format!("param {i}: analytic {a:e} numeric {num:e} rel {rel:e}"));
        }
    }
    Ok(worst)
}

fn training_smoke() -> Outcome {
    let worst = gradient_check()?;
    let t = trained_toy().as_ref().map_err(|e| e.clone())?;
    ensure(t.steps <= SMOKE_STEPS, || format!("{} steps", t.steps))?;
    ensure(t.train_accuracy >= SMOKE_MIN_ACCURACY, || format!("train accuracy {:.3} after {} steps", t.train_accuracy, t.steps))?;
    Ok(format!("train accuracy {:.3} in {} steps; gradient max rel err {worst:.1e}", t.train_accuracy, t.steps))
}

// 7 ------------------------------------------------------------------------

fn rebalancing() -> Outcome {
    let mut r = rng(7);
    let mut batches_seen = 0;
    for epoch in 0..100 {
        let n_pos: usize = r.random_range(1..80);
        let n_neg: usize = r.random_range(1..80);
        let batch: usize = 2 * r.random_range(1..=8);
        let half = batch / 2;
        let pos: Vec<String> = (0..n_pos).map(|i| format!("p{i}")).collect();
        let neg: Vec<String> = (0..n_neg).map(|i| format!("n{i}")).collect();
        let batches = rebalanced_batches(&pos, &neg, batch, half, &mut r).map_err(|e| e.to_string())?;
        let n_batches = n_pos.div_ceil(half).max(n_neg.div_ceil(half));
        ensure(batches.len() == n_batches, || format!("epoch {epoch}: {} batches, expected {n_batches}", batches.len()))?;
        let mut count: HashMap<&str, usize> = HashMap::new();
        for b in &batches {
            let p = b.iter().filter(|s| s.starts_with('p')).count();
            ensure(b.len() == batch && p == half, || format!("epoch {epoch}: batch with {p} positives of {}", b.len()))?;
            for s in b {
                *count.entry(s).or_default() += 1;
            }
        }
        batches_seen += batches.len();
        let (major, minor) = if n_pos.div_ceil(half) >= n_neg.div_ceil(half) { (&pos, &neg) } else { (&neg, &pos) };
        let slots = n_batches * half;
        // majority: each once, plus a top-up smaller than one half-batch
        let twice = major.iter().filter(|s| count.get(s.as_str()) == Some(&2)).count();
        ensure(major.iter().all(|s| matches!(count.get(s.as_str()), Some(1) | Some(2))), || format!("epoch {epoch}: majority sample missing or repeated"))?;
        ensure(twice == slots - major.len() && twice < half, || format!("epoch {epoch}: {twice} majority repeats"))?;
        // minority: resampled as evenly as possible
        let lo = slots / minor.len();
        ensure(minor.iter().all(|s| { let c = count.get(s.as_str()).copied().unwrap_or(0); c == lo || c == lo + 1 }), || format!("epoch {epoch}: uneven minority resampling"))?;
    }
    Ok(format!("100 epochs, {batches_seen} batches, all exact 50/50"))
}

// 8 ------------------------------------------------------------------------

fn explainability() -> Outcome {
    let t = trained_toy().as_ref().map_err(|e| e.clone())?;
    let cfg = FactorConfig { cells_per_side: 8, ..Default::default() };
    let mut r = rng(88);
    let mut wins = 0;
    let n_images = 50;
    for i in 0..n_images {
        let img = blob_image(&mut r, true);
        let mask = identify_critical_factors(&t.model, &img, &cfg).map_err(|e| e.to_string())?;
        let again = identify_critical_factors(&t.model, &img, &cfg).map_err(|e| e.to_string())?;
        ensure(mask == again, || format!("image {i}: mask not deterministic"))?;
        let k = mask.count();
        if k == 0 {
            continue;
        }
        let score = |p: f64| if mask.predicted_positive { p } else { 1.0 - p };
        let d0 = score(mask.base_probability);
        let fill = img.mean() as f32;
        let drop_of = |cells: &[usize]| d0 - score(t.model.predict(&suppress(&img, 8, cells, fill)).unwrap());
        let own = drop_of(&mask.selected);
        let mut cells: Vec<usize> = (0..64).collect();
        let mut total = 0.0;
        for _ in 0..100 {
            cells.shuffle(&mut r);
            total += drop_of(&cells[..k]);
        }
        if own > total / 100.0 {
            wins += 1;
        }
    }
    let frac = wins as f64 / n_images as f64;
    ensure(frac >= EXPLAIN_MIN_PASS, || format!("mask beat random masks on {wins}/{n_images} images"))?;
    Ok(format!("mask beat random masks on {wins}/{n_images} images; deterministic"))
}

// 9 ------------------------------------------------------------------------

fn demographics() -> Outcome {
    let mut r = rng(9);
    let m = random_manifest(&mut r, 200);
    let s = demographic_summary(&m);
    let mut seen = BTreeSet::new();
    let mut ages: BTreeMap<&str, u64> = BTreeMap::new();
    let mut sexes: BTreeMap<&str, u64> = BTreeMap::new();
    let mut views: BTreeMap<&str, u64> = BTreeMap::new();
    for rec in &m.records {
        *views.entry(rec.view.as_str()).or_default() += 1;
        if !seen.insert(rec.patient_id.clone()) {
            continue;
        }
        let bin = match rec.age {
            None => "Unknown",
            Some(a) if a < 20 => "<20",
            Some(a) if a >= 90 => "90+",
            Some(a) => ["20-29", "30-39", "40-49", "50-59", "60-69", "70-79", "80-89"][(a / 10 - 2) as usize],
        };
        *ages.entry(bin).or_default() += 1;
        *sexes.entry(rec.sex.as_str()).or_default() += 1;
    }
    let pct = |c: u64, n: u64| format!("{:.1}", (c as f64 * 100.0 / n as f64 * 10.0 + 0.5 + 1e-9).floor() / 10.0);
    let patients = seen.len() as u64;
    ensure(s.patients == patients, || format!("patients {} vs {patients}", s.patients))?;
    for b in AgeBin::ALL {
        let want = ages.get(b.label()).copied().unwrap_or(0);
        ensure(s.age_bins[&b].count == want, || format!("bin {} {} vs {want}", b.label(), s.age_bins[&b].count))?;
        ensure(s.age_cell(b) == format!("{want} ({}%)", pct(want, patients)), || format!("bin cell {}", s.age_cell(b)))?;
    }
    for sex in [Sex::Male, Sex::Female, Sex::Unknown] {
        let want = sexes.get(sex.as_str()).copied().unwrap_or(0);
        ensure(s.sex_counts[&sex].count == want, || format!("sex {:?}", sex))?;
    }
    for v in [View::PA, View::AP, View::Unknown] {
        let want = views.get(v.as_str()).copied().unwrap_or(0);
        ensure(s.view_counts[&v].count == want, || format!("view {:?}", v))?;
        ensure(s.view_cell(v) == format!("{want} ({}%)", pct(want, m.len() as u64)), || format!("view cell {}", s.view_cell(v)))?;
    }

    let table = published_table_fixture();
    let s = demographic_summary(&table);
    let expected_age = [
        "1026 (6.2%)", "1821 (10.9%)", "2268 (13.6%)", "2908 (17.5%)", "3486 (20.9%)",
        "2358 (14.2%)", "1010 (6.1%)", "300 (1.8%)", "86 (0.5%)", "1393 (8.4%)",
    ];
    for (b, want) in AgeBin::ALL.iter().zip(expected_age) {
        ensure(s.age_cell(*b) == want, || format!("{}: {} vs {want}", b.label(), s.age_cell(*b)))?;
    }
    for (sex, want) in [(Sex::Male, "8774 (52.7%)"), (Sex::Female, "6768 (40.6%)"), (Sex::Unknown, "1114 (6.7%)")] {
        ensure(s.sex_cell(sex) == want, || format!("{sex:?}: {}", s.sex_cell(sex)))?;
    }
    for (v, want) in [(View::PA, "9321 (48.5%)"), (View::AP, "7307 (38.1%)"), (View::Unknown, "2575 (13.4%)")] {
        ensure(s.view_cell(v) == want, || format!("{v:?}: {}", s.view_cell(v)))?;
    }
    Ok(format!("200-patient tally exact; published table cells reproduced ({} patients, {} images)", s.patients, s.images))
}

/// 16,656 patients and 19,203 images with the published bin, sex and view
/// counts.
fn published_table_fixture() -> DatasetManifest {
    let age_bins: [(Option<u32>, usize); 10] = [
        (Some(15), 1026), (Some(25), 1821), (Some(35), 2268), (Some(45), 2908), (Some(55), 3486),
        (Some(65), 2358), (Some(75), 1010), (Some(85), 300), (Some(95), 86), (None, 1393),
    ];
    let mut ages = Vec::new();
    for (a, n) in age_bins {
        ages.extend(std::iter::repeat_n(a, n));
    }
    let mut sexes = Vec::new();
    for (s, n) in [(Sex::Male, 8774), (Sex::Female, 6768), (Sex::Unknown, 1114)] {
        sexes.extend(std::iter::repeat_n(s, n));
    }
    let mut views = Vec::new();
    for (v, n) in [(View::PA, 9321), (View::AP, 7307), (View::Unknown, 2575)] {
        views.extend(std::iter::repeat_n(v, n));
    }
    let patients = ages.len();
    let mut recs = Vec::with_capacity(views.len());
    for (i, view) in views.into_iter().enumerate() {
        let p = if i < patients { i } else { i - patients };
        let mut rec = ImageRecord::new(format!("img{i}"), format!("pt{p}"), Source::Cohen, Finding::None);
        rec.age = ages[p];
        rec.sex = sexes[p];
        rec.view = view;
        recs.push(rec);
    }
    DatasetManifest::from_records(recs)
}
