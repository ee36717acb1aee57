//! Labeled radiology reports: the severity taxonomy, the two label stages,
//! stratified splitting, and random oversampling.
//!
//! A [`Report`] always carries its original four-level [`SeverityClass`];
//! the [`Dataset`] it lives in decides how that label is presented as a
//! zero-based class index. Stage 1 keeps the four classes, stage 2 collapses
//! severities {1,2} into class 0 (treatment required) and {3,4} into class 1
//! (no compulsory treatment).

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::rng_from_seed;

pub mod synth;

/// Four-level severity label attached to every report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct SeverityClass(u8);

impl SeverityClass {
    pub const URGENT: SeverityClass = SeverityClass(1);
    pub const DELAYABLE: SeverityClass = SeverityClass(2);
    pub const OPTIONAL: SeverityClass = SeverityClass(3);
    pub const NORMAL: SeverityClass = SeverityClass(4);

    pub fn new(value: u8) -> Result<Self> {
        if (1..=4).contains(&value) {
            Ok(SeverityClass(value))
        } else {
            Err(Error::invalid(format!(
                "severity label must be in 1..=4, got {value}"
            )))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn description(self) -> &'static str {
        match self.0 {
            1 => "issues require urgent attention",
            2 => "treatment can be delayed",
            3 => "optional treatment",
            _ => "no problem detected",
        }
    }

    pub fn all() -> [SeverityClass; 4] {
        [
            Self::URGENT,
            Self::DELAYABLE,
            Self::OPTIONAL,
            Self::NORMAL,
        ]
    }
}

impl TryFrom<u8> for SeverityClass {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        SeverityClass::new(v)
    }
}

impl From<SeverityClass> for u8 {
    fn from(s: SeverityClass) -> u8 {
        s.0
    }
}

impl fmt::Display for SeverityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Which labeling task a dataset is presented under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    /// Four classes, one per severity level.
    Stage1,
    /// Binary: severities {1,2} vs {3,4}.
    Stage2,
}

impl Stage {
    pub fn n_classes(self) -> usize {
        match self {
            Stage::Stage1 => 4,
            Stage::Stage2 => 2,
        }
    }

    /// Zero-based class index of a severity label under this stage.
    pub fn class_index(self, label: SeverityClass) -> usize {
        match self {
            Stage::Stage1 => usize::from(label.value()) - 1,
            Stage::Stage2 => {
                if label.value() <= 2 {
                    0
                } else {
                    1
                }
            }
        }
    }

    /// Human-readable description of a class index under this stage.
    pub fn class_description(self, index: usize) -> &'static str {
        match (self, index) {
            (Stage::Stage1, i) if i < 4 => SeverityClass::new(i as u8 + 1).unwrap().description(),
            (Stage::Stage2, 0) => "treatment required (urgent or delayable)",
            (Stage::Stage2, 1) => "no compulsory treatment (optional or normal)",
            _ => "unknown class",
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Stage::Stage1 => "stage1",
            Stage::Stage2 => "stage2",
        }
    }
}

/// A stage-qualified class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StageLabel {
    pub stage: Stage,
    pub index: usize,
}

impl StageLabel {
    pub fn new(stage: Stage, index: usize) -> Result<Self> {
        if index < stage.n_classes() {
            Ok(StageLabel { stage, index })
        } else {
            Err(Error::invalid(format!(
                "class index {index} out of range for {stage:?}"
            )))
        }
    }

    pub fn from_severity(stage: Stage, label: SeverityClass) -> Self {
        StageLabel {
            stage,
            index: stage.class_index(label),
        }
    }
}

/// One radiology note with its severity label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub id: String,
    pub text: String,
    pub label: SeverityClass,
}

impl Report {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: SeverityClass) -> Result<Self> {
        let id = id.into();
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::invalid(format!("report {id:?} has empty text")));
        }
        Ok(Report { id, text, label })
    }
}

/// Where a dataset's members came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Original,
    Oversampled,
    Synthetic,
}

/// An ordered, id-unique collection of reports under a label stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    examples: Vec<Report>,
    stage: Stage,
    provenance: Provenance,
}

/// Per-class example counts, keyed by stage-class index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub counts: BTreeMap<usize, usize>,
}

impl ClassDistribution {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    /// Counts in class-index order.
    pub fn as_vec(&self) -> Vec<usize> {
        self.counts.values().copied().collect()
    }
}

impl fmt::Display for ClassDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .counts
            .iter()
            .map(|(k, v)| format!("{k}: {v}"))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

impl Dataset {
    /// Build a dataset, validating id uniqueness and non-empty texts.
    pub fn new(examples: Vec<Report>, stage: Stage, provenance: Provenance) -> Result<Self> {
        let mut seen = HashSet::with_capacity(examples.len());
        for r in &examples {
            if r.text.trim().is_empty() {
                return Err(Error::invalid(format!("report {:?} has empty text", r.id)));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::invalid(format!("duplicate report id {:?}", r.id)));
            }
        }
        Ok(Dataset {
            examples,
            stage,
            provenance,
        })
    }

    pub fn examples(&self) -> &[Report] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn n_classes(&self) -> usize {
        self.stage.n_classes()
    }

    /// Stage-class index of the i-th report.
    pub fn class_index(&self, i: usize) -> usize {
        self.stage.class_index(self.examples[i].label)
    }

    /// Class indices for all reports, in order.
    pub fn class_indices(&self) -> Vec<usize> {
        self.examples
            .iter()
            .map(|r| self.stage.class_index(r.label))
            .collect()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.examples.iter().map(|r| r.text.as_str()).collect()
    }
}

/// Corpus file formats accepted by [`load_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    text: String,
    label: i64,
}

fn validate_record(raw: RawRecord, line: u64, seen: &mut HashSet<String>) -> Result<Report> {
    if raw.label < 1 || raw.label > 4 {
        return Err(Error::data(
            line,
            format!("label {} outside 1..=4 for id {:?}", raw.label, raw.id),
        ));
    }
    if raw.text.trim().is_empty() {
        return Err(Error::data(line, format!("empty text for id {:?}", raw.id)));
    }
    if raw.id.trim().is_empty() {
        return Err(Error::data(line, "missing id".to_string()));
    }
    if !seen.insert(raw.id.clone()) {
        return Err(Error::data(line, format!("duplicate id {:?}", raw.id)));
    }
    Report::new(raw.id, raw.text, SeverityClass::new(raw.label as u8)?)
}

/// Load a stage-1 corpus from a CSV (`id,text,label` header, RFC-4180) or
/// JSONL (`{"id":…,"text":…,"label":…}` per line) file. Record order is
/// file order; every malformed row is reported with its line number.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| {
        Error::data(None, format!("cannot open {}: {e}", path.display()))
    })?;
    let mut seen = HashSet::new();
    let mut examples = Vec::new();
    match format {
        CorpusFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .from_reader(BufReader::new(file));
            let headers = reader
                .headers()
                .map_err(|e| Error::data(1, e.to_string()))?
                .clone();
            if headers.iter().collect::<Vec<_>>() != ["id", "text", "label"] {
                return Err(Error::data(
                    1,
                    format!("expected header id,text,label, got {headers:?}"),
                ));
            }
            for result in reader.records() {
                let record = result.map_err(|e| {
                    let line = e.position().map(|p| p.line());
                    Error::data(line, e.to_string())
                })?;
                let line = record.position().map(|p| p.line());
                let raw: RawRecord = record
                    .deserialize(Some(&headers))
                    .map_err(|e| Error::data(line, e.to_string()))?;
                examples.push(validate_record(raw, line.unwrap_or(0), &mut seen)?);
            }
        }
        CorpusFormat::Jsonl => {
            let reader = BufReader::new(file);
            for (i, line) in reader.lines().enumerate() {
                let lineno = i as u64 + 1;
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let raw: RawRecord = serde_json::from_str(&line)
                    .map_err(|e| Error::data(lineno, e.to_string()))?;
                examples.push(validate_record(raw, lineno, &mut seen)?);
            }
        }
    }
    Dataset::new(examples, Stage::Stage1, Provenance::Original)
}

/// Write a dataset back out as `id,text,label` CSV.
pub fn write_corpus_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["id", "text", "label"])?;
    for r in dataset.examples() {
        writer.write_record([r.id.as_str(), r.text.as_str(), &r.label.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Re-present a stage-1 dataset under the binary stage-2 labeling.
/// The examples and their order are unchanged.
pub fn map_to_stage2(dataset: &Dataset) -> Result<Dataset> {
    if dataset.stage == Stage::Stage2 {
        return Err(Error::invalid("dataset is already stage 2"));
    }
    Ok(Dataset {
        examples: dataset.examples.clone(),
        stage: Stage::Stage2,
        provenance: dataset.provenance,
    })
}

/// Exact per-class counts under the dataset's stage. Every class index of
/// the stage is present, zero-count classes included.
pub fn class_distribution(dataset: &Dataset) -> ClassDistribution {
    let mut counts: BTreeMap<usize, usize> = (0..dataset.n_classes()).map(|c| (c, 0)).collect();
    for i in 0..dataset.len() {
        *counts.get_mut(&dataset.class_index(i)).unwrap() += 1;
    }
    ClassDistribution { counts }
}

/// Stratified 80/20-style split. Per class with `n` members the test side
/// receives `floor(n * (1 - train_fraction))` examples but at least one;
/// membership is chosen by a seeded shuffle within the class, and both
/// halves keep the original dataset order.
pub fn stratified_split(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..dataset.len() {
        by_class.entry(dataset.class_index(i)).or_default().push(i);
    }
    for (class, members) in &by_class {
        if members.len() < 2 {
            return Err(Error::invalid(format!(
                "class {class} has {} example(s); stratified split needs at least 2",
                members.len()
            )));
        }
    }

    let mut rng = rng_from_seed(seed);
    let mut test_rows: HashSet<usize> = HashSet::new();
    for members in by_class.values() {
        let n = members.len();
        // nudge before flooring so exact fractions (10 * 0.2) do not land
        // one below their mathematical value
        let n_test = ((((n as f64) * (1.0 - train_fraction)) + 1e-9).floor() as usize).max(1);
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        test_rows.extend(shuffled.into_iter().take(n_test));
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, r) in dataset.examples.iter().enumerate() {
        if test_rows.contains(&i) {
            test.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    Ok((
        Dataset {
            examples: train,
            stage: dataset.stage,
            provenance: dataset.provenance,
        },
        Dataset {
            examples: test,
            stage: dataset.stage,
            provenance: dataset.provenance,
        },
    ))
}

/// Mint an id for a duplicated report that does not collide with any id in
/// `used`.
fn dup_id(source: &str, used: &mut HashSet<String>) -> String {
    let mut n = 1usize;
    loop {
        let candidate = format!("{source}#dup{n}");
        if used.insert(candidate.clone()) {
            return candidate;
        }
        n += 1;
    }
}

/// Duplicate minority-class examples uniformly at random (with replacement)
/// until every stage-class count equals the majority count. Originals are
/// all retained; duplicates get fresh `#dupN` ids.
pub fn random_oversample(dataset: &Dataset, seed: u64) -> Result<Dataset> {
    if dataset.is_empty() {
        return Err(Error::invalid("cannot oversample an empty dataset"));
    }
    let dist = class_distribution(dataset);
    let majority = *dist.counts.values().max().unwrap();

    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..dataset.len() {
        by_class.entry(dataset.class_index(i)).or_default().push(i);
    }

    let mut used: HashSet<String> = dataset
        .examples
        .iter()
        .map(|r| r.id.clone())
        .collect();
    let mut rng = rng_from_seed(seed);
    let mut examples = dataset.examples.clone();
    for (_, members) in by_class {
        if members.is_empty() {
            continue;
        }
        let deficit = majority - members.len();
        for _ in 0..deficit {
            let source = &dataset.examples[members[rng.gen_range(0..members.len())]];
            let id = dup_id(&source.id, &mut used);
            examples.push(Report {
                id,
                text: source.text.clone(),
                label: source.label,
            });
        }
    }
    Ok(Dataset {
        examples,
        stage: dataset.stage,
        provenance: Provenance::Oversampled,
    })
}

/// Read a corpus from any reader in JSONL form; used by tests.
pub fn load_corpus_jsonl_reader(mut reader: impl std::io::Read) -> Result<Dataset> {
    let mut buf = String::new();
    reader.read_to_string(&mut buf)?;
    let mut seen = HashSet::new();
    let mut examples = Vec::new();
    for (i, line) in buf.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(line).map_err(|e| Error::data(i as u64 + 1, e.to_string()))?;
        examples.push(validate_record(raw, i as u64 + 1, &mut seen)?);
    }
    Dataset::new(examples, Stage::Stage1, Provenance::Original)
}
