//! Deterministic synthetic report corpora for tests, demos, and benchmarks.
//!
//! The lexicons below are fixed constants: regenerating a corpus with the
//! same profile, seed, and counts is byte-identical. Three profiles with
//! different difficulty:
//!
//! * [`SyntheticProfile::Separable`] — near-disjoint class vocabularies;
//!   every reasonable classifier should score high.
//! * [`SyntheticProfile::Overlapping`] — severities 1/2 share "pathology"
//!   terms and 3/4 share "benign" terms, with cross-class noise. The
//!   four-class task is genuinely confusable and minority classes suffer
//!   under imbalance.
//! * [`SyntheticProfile::Clustered`] — each class is a fixed base phrase
//!   with small perturbations, so bag-of-words embeddings form tight
//!   per-class clusters.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Provenance, Report, SeverityClass, Stage};
use crate::seeding::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticProfile {
    Separable,
    Overlapping,
    Clustered,
}

impl SyntheticProfile {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "separable" => Some(Self::Separable),
            "overlapping" => Some(Self::Overlapping),
            "clustered" => Some(Self::Clustered),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Separable => "separable",
            Self::Overlapping => "overlapping",
            Self::Clustered => "clustered",
        }
    }
}

const LOCATIONS: &[&str] = &[
    "anterior mandible",
    "posterior maxilla",
    "left ramus",
    "right condyle",
    "palatal side",
    "buccal plate",
    "apical area",
    "incisive canal area",
    "sinus floor",
    "alveolar crest",
];

const FILLER: &[&str] = &[
    "image", "region", "examination", "report", "study", "scan", "view", "field", "film",
    "slice", "section", "series",
];

// class cores for the separable profile: pairwise disjoint content words
const SEP_CORE: [&[&str]; 4] = [
    &[
        "sarcomatosis",
        "osteomyelitis",
        "chondrosarcoma",
        "malignant",
        "expansile",
        "destructive",
        "aggressive",
        "osteolytic",
        "tumoral",
        "infiltrative",
    ],
    &[
        "impacted",
        "resorption",
        "blunting",
        "inverted",
        "periapical",
        "carious",
        "infected",
        "granuloma",
        "abscess",
        "displacement",
    ],
    &[
        "mesiodens",
        "supernumerary",
        "retained",
        "variant",
        "torus",
        "anomaly",
        "rotation",
        "crowding",
        "spacing",
        "hypodontia",
    ],
    &[
        "unremarkable",
        "healthy",
        "symmetric",
        "preserved",
        "pneumatized",
        "intact",
        "regular",
        "sound",
        "homogeneous",
        "corticated",
    ],
];

const SEP_TEMPLATES: [&[&str]; 4] = [
    &[
        "There is a {c} lesion with {c} appearance in the {l}.",
        "A {c} {c} process involves the {l}.",
        "Findings indicate {c} {c} change at the {l}.",
        "The {l} shows a {c} lesion with {c} margins.",
    ],
    &[
        "The tooth in the {l} is {c} with {c} of the root.",
        "There is {c} {c} associated with the {l}.",
        "A {c} tooth with {c} is seen near the {l}.",
        "Signs of {c} and {c} around the {l}.",
    ],
    &[
        "A {c} {c} is noted in the {l}.",
        "There is a {c} tooth with {c} in the {l}.",
        "Incidental {c} {c} at the {l}.",
        "The {l} shows a {c} {c} of little consequence.",
    ],
    &[
        "No erosive lesion can be detected in the {l}.",
        "The {l} appears {c} and {c}.",
        "No abnormality is seen and structures are {c} and {c}.",
        "The {l} is {c} with {c} bone pattern.",
    ],
];

const SEP_SUFFIXES: [&[&str]; 4] = [
    &["DDX includes {c} versus {c}.", "The {c} component reaches the {l}."],
    &["The {c} area contacts the {l}.", "Associated {c} change is present."],
    &["No {c} consequence is expected.", "The {c} finding is incidental."],
    &["Bone trabeculation is {c} throughout.", "All visualized structures are {c}."],
];

// overlapping profile: severities 1/2 share pathology terms, 3/4 share
// benign terms, and each class leaks into its stage-2 partner
const PAIR_PATHOLOGY: &[&str] = &[
    "lesion",
    "loss",
    "continuity",
    "cortex",
    "cortices",
    "erosion",
    "involvement",
    "radiolucent",
    "expansion",
    "defect",
];

const PAIR_BENIGN: &[&str] = &[
    "no",
    "without",
    "adjacent",
    "found",
    "intact",
    "teeth",
    "preserved",
    "normal",
    "defined",
    "clear",
];

const OVR_CORE: [&[&str]; 4] = [
    &[
        "mixed", "poorly", "tumor", "sarcomatosis", "osteomyelitis", "malignant", "urgent",
        "aggressive",
    ],
    &[
        "impacted", "inverted", "blunting", "resorption", "caries", "periapical", "infection",
        "root",
    ],
    &[
        "mesiodens",
        "supernumerary",
        "missing",
        "retained",
        "optional",
        "minor",
        "variant",
        "anomaly",
    ],
    &[
        "unremarkable",
        "healthy",
        "erosive",
        "detected",
        "symmetric",
        "maxilla",
        "pneumatized",
        "sound",
    ],
];

// clustered profile: one base phrase per class plus a small variant pool
const CLUSTER_BASE: [&str; 4] = [
    "mixed destructive lesion with aggressive borders involving mandibular cortex and alveolar crest",
    "impacted tooth with root resorption and periapical infection near the incisive canal",
    "supernumerary mesiodens retained in palatal position without resorption of adjacent teeth",
    "no erosive lesion detected structures intact symmetric and unremarkable throughout the maxilla",
];

const CLUSTER_VARIANTS: [&[&str]; 4] = [
    &["expansile", "osteolytic", "infiltrative", "sarcomatous", "necrotic", "fulminant"],
    &["tilted", "rotated", "submerged", "ankylosed", "fractured", "decayed"],
    &["incidental", "asymptomatic", "stable", "small", "isolated", "benign"],
    &["clear", "healthy", "regular", "homogeneous", "corticated", "sound"],
];

fn pick<'a>(rng: &mut ChaCha8Rng, words: &[&'a str]) -> &'a str {
    words[rng.gen_range(0..words.len())]
}

fn fill_template(rng: &mut ChaCha8Rng, template: &str, core: &[&str]) -> String {
    let mut out = String::with_capacity(template.len() + 16);
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let end = rest[start..].find('}').expect("unclosed placeholder") + start;
        match &rest[start + 1..end] {
            "c" => out.push_str(pick(rng, core)),
            "l" => out.push_str(pick(rng, LOCATIONS)),
            other => panic!("unknown placeholder {{{other}}}"),
        }
        rest = &rest[end + 1..];
    }
    out.push_str(rest);
    out
}

fn separable_text(rng: &mut ChaCha8Rng, class: usize) -> String {
    let template = pick(rng, SEP_TEMPLATES[class]);
    let mut text = fill_template(rng, template, SEP_CORE[class]);
    if rng.gen_bool(0.6) {
        let suffix = pick(rng, SEP_SUFFIXES[class]);
        text.push(' ');
        text.push_str(&fill_template(rng, suffix, SEP_CORE[class]));
    }
    text
}

fn overlapping_text(rng: &mut ChaCha8Rng, class: usize) -> String {
    let partner = match class {
        0 => 1,
        1 => 0,
        2 => 3,
        _ => 2,
    };
    let pair_shared = if class <= 1 { PAIR_PATHOLOGY } else { PAIR_BENIGN };
    let n_tokens = rng.gen_range(9..=15);
    let mut words: Vec<&str> = Vec::with_capacity(n_tokens);
    for _ in 0..n_tokens {
        let r: f64 = rng.gen();
        let w = if r < 0.32 {
            pick(rng, OVR_CORE[class])
        } else if r < 0.60 {
            pick(rng, pair_shared)
        } else if r < 0.72 {
            pick(rng, OVR_CORE[partner])
        } else if r < 0.78 {
            // cross-pair noise: any other class
            let other = (class + rng.gen_range(1..4)) % 4;
            pick(rng, OVR_CORE[other])
        } else {
            pick(rng, FILLER)
        };
        words.push(w);
    }
    // group into sentence-ish chunks
    let mut text = String::new();
    let mut i = 0;
    while i < words.len() {
        let take = rng.gen_range(5..=7).min(words.len() - i);
        let chunk = &words[i..i + take];
        let mut sentence = chunk.join(" ");
        if let Some(first) = sentence.get_mut(0..1) {
            first.make_ascii_uppercase();
        }
        if !text.is_empty() {
            text.push(' ');
        }
        text.push_str(&sentence);
        text.push('.');
        i += take;
    }
    text
}

fn clustered_text(rng: &mut ChaCha8Rng, class: usize) -> String {
    let mut words: Vec<String> = CLUSTER_BASE[class]
        .split_whitespace()
        .map(str::to_string)
        .collect();
    for _ in 0..rng.gen_range(1..=2) {
        let pos = rng.gen_range(0..=words.len());
        words.insert(pos, pick(rng, CLUSTER_VARIANTS[class]).to_string());
    }
    if rng.gen_bool(0.1) && words.len() > 4 {
        let pos = rng.gen_range(0..words.len());
        words.remove(pos);
    }
    let mut text = words.join(" ");
    if let Some(first) = text.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    text.push('.');
    text
}

/// Generate a stage-1 synthetic dataset with exactly `counts[c]` reports of
/// severity `c + 1`, deterministic in `(profile, seed, counts)`.
pub fn generate_synthetic_corpus_with(
    profile: SyntheticProfile,
    seed: u64,
    counts: &[usize; 4],
) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let mut examples = Vec::with_capacity(counts.iter().sum());
    for (class, &n) in counts.iter().enumerate() {
        let label = SeverityClass::new(class as u8 + 1).unwrap();
        for k in 0..n {
            let text = match profile {
                SyntheticProfile::Separable => separable_text(&mut rng, class),
                SyntheticProfile::Overlapping => overlapping_text(&mut rng, class),
                SyntheticProfile::Clustered => clustered_text(&mut rng, class),
            };
            examples.push(Report {
                id: format!("syn-{}-c{}-{}", profile.name(), class + 1, k),
                text,
                label,
            });
        }
    }
    Dataset::new(examples, Stage::Stage1, Provenance::Synthetic)
        .expect("synthetic ids are unique by construction")
}

/// Keyword-separable synthetic corpus (the default profile).
pub fn generate_synthetic_corpus(seed: u64, counts: &[usize; 4]) -> Dataset {
    generate_synthetic_corpus_with(SyntheticProfile::Separable, seed, counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::class_distribution;

    #[test]
    fn empty_counts_give_empty_dataset() {
        let d = generate_synthetic_corpus(1, &[0, 0, 0, 0]);
        assert!(d.is_empty());
        assert_eq!(d.provenance(), Provenance::Synthetic);
    }

    #[test]
    fn counts_match_request_exactly() {
        for profile in [
            SyntheticProfile::Separable,
            SyntheticProfile::Overlapping,
            SyntheticProfile::Clustered,
        ] {
            let d = generate_synthetic_corpus_with(profile, 3, &[67, 354, 219, 64]);
            assert_eq!(class_distribution(&d).as_vec(), vec![67, 354, 219, 64]);
        }
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let a = generate_synthetic_corpus(42, &[5, 5, 5, 5]);
        let b = generate_synthetic_corpus(42, &[5, 5, 5, 5]);
        assert_eq!(a, b);
        let c = generate_synthetic_corpus(43, &[5, 5, 5, 5]);
        assert_ne!(a, c);
    }

    #[test]
    fn class_one_contains_tumor_terms_and_class_four_negation() {
        let d = generate_synthetic_corpus(9, &[30, 0, 0, 30]);
        let joined_c1: String = d.examples()[..30]
            .iter()
            .map(|r| r.text.to_lowercase())
            .collect::<Vec<_>>()
            .join(" ");
        assert!(
            joined_c1.contains("lesion")
                || joined_c1.contains("tumoral")
                || joined_c1.contains("sarcomatosis")
        );
        let c4_with_negation = d.examples()[30..]
            .iter()
            .filter(|r| r.text.to_lowercase().starts_with("no "))
            .count();
        assert!(c4_with_negation > 0, "expected some negated class-4 texts");
    }
}
