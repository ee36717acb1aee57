//! Text preprocessing pipeline: tokenization, stopword removal,
//! lemmatization, and spell correction.
//!
//! The pipeline order is fixed: tokenize, then spell correction (so
//! corrected forms feed later stages), then stopword removal, then
//! lemmatization. Each stage is individually gated by [`PipelineConfig`].
//!
//! Negation terms are load-bearing in clinical text ("no erosive lesion"),
//! so [`Lexicon`] strips them from any stopword list it is given.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Negation terms that must never be treated as stopwords.
pub const NEGATION_TERMS: [&str; 6] = ["no", "not", "without", "cannot", "can't", "non"];

/// A lowercase token containing only letters, digits, `#`, and `/`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Token(String);

impl Token {
    pub fn new(surface: impl Into<String>) -> Result<Self> {
        let surface = surface.into();
        if surface.is_empty() {
            return Err(Error::invalid("token must be non-empty"));
        }
        let ok = surface
            .chars()
            .all(|c| c.is_alphanumeric() || c == '#' || c == '/');
        let lower = surface.chars().all(|c| !c.is_uppercase());
        if !ok || !lower {
            return Err(Error::invalid(format!("invalid token {surface:?}")));
        }
        Ok(Token(surface))
    }

    fn new_unchecked(surface: String) -> Self {
        debug_assert!(Token::new(surface.clone()).is_ok());
        Token(surface)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for Token {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Token::new(s)
    }
}

impl From<Token> for String {
    fn from(t: Token) -> String {
        t.0
    }
}

impl PartialEq<&str> for Token {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

/// Stopword list, lemma dictionary, and term-frequency vocabulary used by
/// the pipeline stages.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    stopwords: HashSet<String>,
    lemma_map: HashMap<String, String>,
    vocabulary: HashMap<String, u64>,
}

impl Lexicon {
    /// Build a lexicon. Negation terms are removed from the stopword list
    /// and lemma values must be valid tokens.
    pub fn new(
        stopwords: impl IntoIterator<Item = String>,
        lemma_map: impl IntoIterator<Item = (String, String)>,
        vocabulary: impl IntoIterator<Item = (String, u64)>,
    ) -> Result<Self> {
        let stopwords: HashSet<String> = stopwords
            .into_iter()
            .filter(|w| !NEGATION_TERMS.contains(&w.as_str()))
            .collect();
        let lemma_map: HashMap<String, String> = lemma_map.into_iter().collect();
        for lemma in lemma_map.values() {
            Token::new(lemma.clone())
                .map_err(|_| Error::invalid(format!("lemma {lemma:?} is not a valid token")))?;
        }
        Ok(Lexicon {
            stopwords,
            lemma_map,
            vocabulary: vocabulary.into_iter().collect(),
        })
    }

    /// The built-in English stopword list (negations excluded) plus a small
    /// dictionary of irregular clinical plurals. The spell-correction
    /// vocabulary starts empty; populate it from a training corpus with
    /// [`Lexicon::with_vocabulary_from`].
    pub fn builtin() -> Self {
        let stopwords = BUILTIN_STOPWORDS.iter().map(|s| s.to_string());
        let lemma_map = BUILTIN_LEMMAS
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()));
        Lexicon::new(stopwords, lemma_map, []).expect("builtin lexicon is valid")
    }

    /// Replace the spell-correction vocabulary with term frequencies
    /// counted over the given tokenized documents.
    pub fn with_vocabulary_from<'a>(
        mut self,
        docs: impl IntoIterator<Item = &'a [Token]>,
    ) -> Self {
        let mut vocab: HashMap<String, u64> = HashMap::new();
        for doc in docs {
            for tok in doc {
                *vocab.entry(tok.as_str().to_string()).or_insert(0) += 1;
            }
        }
        self.vocabulary = vocab;
        self
    }

    pub fn is_stopword(&self, token: &Token) -> bool {
        self.stopwords.contains(token.as_str())
    }

    pub fn stopword_count(&self) -> usize {
        self.stopwords.len()
    }

    pub fn vocabulary(&self) -> &HashMap<String, u64> {
        &self.vocabulary
    }

    /// Load stopwords from a plain-text file, one term per line.
    pub fn load_stopwords(path: &Path) -> Result<Vec<String>> {
        let text = std::fs::read_to_string(path)?;
        Ok(text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect())
    }

    /// Load a two-column TSV lemma map (`surface<TAB>lemma`).
    pub fn load_lemma_map(path: &Path) -> Result<Vec<(String, String)>> {
        let text = std::fs::read_to_string(path)?;
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.splitn(2, '\t');
            match (it.next(), it.next()) {
                (Some(k), Some(v)) => out.push((k.trim().to_string(), v.trim().to_string())),
                _ => {
                    return Err(Error::data(
                        i as u64 + 1,
                        format!("lemma map line needs two tab-separated columns: {line:?}"),
                    ))
                }
            }
        }
        Ok(out)
    }

    /// Load a vocabulary TSV (`term<TAB>count`).
    pub fn load_vocabulary(path: &Path) -> Result<Vec<(String, u64)>> {
        let text = std::fs::read_to_string(path)?;
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.splitn(2, '\t');
            match (it.next(), it.next()) {
                (Some(term), Some(count)) => {
                    let count: u64 = count.trim().parse().map_err(|_| {
                        Error::data(i as u64 + 1, format!("bad count in vocabulary: {line:?}"))
                    })?;
                    out.push((term.trim().to_string(), count));
                }
                _ => {
                    return Err(Error::data(
                        i as u64 + 1,
                        format!("vocabulary line needs term<TAB>count: {line:?}"),
                    ))
                }
            }
        }
        Ok(out)
    }
}

/// Flags controlling which pipeline stages run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub enable_stopwords: bool,
    pub enable_lemmatize: bool,
    pub enable_spellcheck: bool,
    pub max_edit_distance: u8,
}

impl PipelineConfig {
    pub fn new(
        enable_stopwords: bool,
        enable_lemmatize: bool,
        enable_spellcheck: bool,
        max_edit_distance: u8,
    ) -> Result<Self> {
        if !(1..=2).contains(&max_edit_distance) {
            return Err(Error::invalid(format!(
                "max_edit_distance must be 1 or 2, got {max_edit_distance}"
            )));
        }
        Ok(PipelineConfig {
            enable_stopwords,
            enable_lemmatize,
            enable_spellcheck,
            max_edit_distance,
        })
    }

    pub fn all_disabled() -> Self {
        PipelineConfig {
            enable_stopwords: false,
            enable_lemmatize: false,
            enable_spellcheck: false,
            max_edit_distance: 2,
        }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            enable_stopwords: true,
            enable_lemmatize: true,
            enable_spellcheck: true,
            max_edit_distance: 2,
        }
    }
}

/// Split text into lowercase tokens. Maximal runs of letters, digits, `#`,
/// and `/` become tokens; a standalone `#` immediately followed by a digit
/// token merges with it, so tooth designators like `# 8` survive as `#8`.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens: Vec<String> = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '#' || c == '/' {
            for lc in c.to_lowercase() {
                current.push(lc);
            }
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }

    let mut merged: Vec<Token> = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i] == "#"
            && i + 1 < tokens.len()
            && tokens[i + 1].chars().all(|c| c.is_ascii_digit())
        {
            merged.push(Token::new_unchecked(format!("#{}", tokens[i + 1])));
            i += 2;
        } else {
            merged.push(Token::new_unchecked(tokens[i].clone()));
            i += 1;
        }
    }
    merged
}

/// Drop stopwords, preserving order. Negations are never dropped because
/// the lexicon cannot contain them.
pub fn remove_stopwords(tokens: &[Token], lexicon: &Lexicon) -> Vec<Token> {
    tokens
        .iter()
        .filter(|t| !lexicon.is_stopword(t))
        .cloned()
        .collect()
}

fn rule_lemma(token: &Token, lexicon: &Lexicon) -> Option<Token> {
    let s = token.as_str();
    let n = s.len();
    if !s.is_ascii() {
        return None;
    }
    if n > 3 && s.ends_with("ies") {
        return Some(Token::new_unchecked(format!("{}y", &s[..n - 3])));
    }
    if s.ends_with("sses") {
        return Some(Token::new_unchecked(s[..n - 2].to_string()));
    }
    if n > 3 && s.ends_with('s') && !s.ends_with("ss") {
        return Some(Token::new_unchecked(s[..n - 1].to_string()));
    }
    if n > 5 && s.ends_with("ing") {
        let base = &s[..n - 3];
        return Some(restore_silent_e(base, lexicon));
    }
    if n > 4 && s.ends_with("ed") {
        let base = &s[..n - 2];
        return Some(restore_silent_e(base, lexicon));
    }
    None
}

fn restore_silent_e(base: &str, lexicon: &Lexicon) -> Token {
    if lexicon.vocabulary.contains_key(base) {
        return Token::new_unchecked(base.to_string());
    }
    let with_e = format!("{base}e");
    if lexicon.vocabulary.contains_key(&with_e) {
        Token::new_unchecked(with_e)
    } else {
        Token::new_unchecked(base.to_string())
    }
}

/// Map each token to its base form: dictionary lookup first, then suffix
/// rules (`ies`→`y`, `sses`→`ss`, plural `s`-drop, `ing`/`ed` strip with
/// silent-e restore against the vocabulary).
pub fn lemmatize(tokens: &[Token], lexicon: &Lexicon) -> Vec<Token> {
    tokens
        .iter()
        .map(|t| {
            if let Some(lemma) = lexicon.lemma_map.get(t.as_str()) {
                Token::new_unchecked(lemma.clone())
            } else {
                rule_lemma(t, lexicon).unwrap_or_else(|| t.clone())
            }
        })
        .collect()
}

/// Levenshtein distance with an early bail-out above `cap`.
fn levenshtein_capped(a: &str, b: &str, cap: usize) -> Option<usize> {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.len().abs_diff(b.len()) > cap {
        return None;
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut row = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        row[0] = i;
        let mut row_min = row[0];
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            row[j] = (prev[j] + 1).min(row[j - 1] + 1).min(prev[j - 1] + cost);
            row_min = row_min.min(row[j]);
        }
        if row_min > cap {
            return None;
        }
        std::mem::swap(&mut prev, &mut row);
    }
    (prev[b.len()] <= cap).then_some(prev[b.len()])
}

/// Replace out-of-vocabulary tokens with the closest vocabulary term within
/// `max_edit_distance` edits; ties go to the more frequent term, then the
/// lexicographically smaller one. Only purely alphabetic tokens of length
/// three or more are candidates for correction, so designators like `#8`
/// and abbreviations like `r/o` pass through untouched.
pub fn correct_spelling(tokens: &[Token], lexicon: &Lexicon, max_edit_distance: u8) -> Vec<Token> {
    assert!(
        (1..=2).contains(&max_edit_distance),
        "max_edit_distance must be 1 or 2"
    );
    let cap = usize::from(max_edit_distance);
    tokens
        .iter()
        .map(|t| {
            let s = t.as_str();
            if lexicon.vocabulary.contains_key(s)
                || s.chars().count() < 3
                || !s.chars().all(char::is_alphabetic)
            {
                return t.clone();
            }
            let mut best: Option<(usize, u64, &str)> = None;
            for (term, &freq) in &lexicon.vocabulary {
                if let Some(d) = levenshtein_capped(s, term, cap) {
                    let better = match &best {
                        None => true,
                        Some((bd, bf, bt)) => {
                            d < *bd || (d == *bd && (freq > *bf || (freq == *bf && term.as_str() < *bt)))
                        }
                    };
                    if better {
                        best = Some((d, freq, term));
                    }
                }
            }
            match best {
                Some((_, _, term)) => Token::new_unchecked(term.to_string()),
                None => t.clone(),
            }
        })
        .collect()
}

/// Run the full pipeline: tokenize, then the enabled stages in fixed order
/// (spell correction, stopword removal, lemmatization).
pub fn run_pipeline(text: &str, config: &PipelineConfig, lexicon: &Lexicon) -> Vec<Token> {
    let mut tokens = tokenize(text);
    if config.enable_spellcheck {
        tokens = correct_spelling(&tokens, lexicon, config.max_edit_distance);
    }
    if config.enable_stopwords {
        tokens = remove_stopwords(&tokens, lexicon);
    }
    if config.enable_lemmatize {
        tokens = lemmatize(&tokens, lexicon);
    }
    tokens
}

const BUILTIN_STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for",
    "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself",
    "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just",
    "me", "more", "most", "my", "myself", "of", "off", "on", "once", "only", "or", "other",
    "our", "ours", "ourselves", "out", "over", "own", "same", "she", "should", "so", "some",
    "such", "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there",
    "these", "they", "this", "those", "through", "to", "too", "under", "until", "up", "very",
    "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom", "why",
    "will", "with", "would", "you", "your", "yours", "yourself", "yourselves",
];

const BUILTIN_LEMMAS: &[(&str, &str)] = &[
    ("teeth", "tooth"),
    ("cortices", "cortex"),
    ("apices", "apex"),
    ("foramina", "foramen"),
    ("diagnoses", "diagnosis"),
    ("caries", "caries"),
    ("sinuses", "sinus"),
    ("abscesses", "abscess"),
    ("septa", "septum"),
    ("radii", "radius"),
];

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<Token> {
        words.iter().map(|w| Token::new(*w).unwrap()).collect()
    }

    fn surface(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(Token::as_str).collect()
    }

    #[test]
    fn tokenize_tooth_designator() {
        let t = tokenize("The tooth # 8 is in inverted fashion.");
        assert_eq!(
            surface(&t),
            vec!["the", "tooth", "#8", "is", "in", "inverted", "fashion"]
        );
    }

    #[test]
    fn tokenize_slash_abbreviation() {
        assert_eq!(surface(&tokenize("R/O Sarcomatosis")), vec!["r/o", "sarcomatosis"]);
    }

    #[test]
    fn tokenize_empty() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  ...  ").is_empty());
    }

    #[test]
    fn tokenize_attached_designator_and_fraction() {
        assert_eq!(surface(&tokenize("tooth #8, 1/3 middle")), vec!["tooth", "#8", "1/3", "middle"]);
    }

    #[test]
    fn hash_without_digits_stays_alone() {
        assert_eq!(surface(&tokenize("see # note")), vec!["see", "#", "note"]);
    }

    #[test]
    fn stopwords_removed_in_order() {
        let lex = Lexicon::new(
            ["the".into(), "is".into()],
            [],
            [],
        )
        .unwrap();
        let out = remove_stopwords(&toks(&["the", "tooth", "is", "inverted"]), &lex);
        assert_eq!(surface(&out), vec!["tooth", "inverted"]);
    }

    #[test]
    fn negations_never_become_stopwords() {
        let lex = Lexicon::new(
            ["no".into(), "not".into(), "without".into(), "the".into()],
            [],
            [],
        )
        .unwrap();
        let out = remove_stopwords(&toks(&["no", "erosive", "lesion"]), &lex);
        assert_eq!(surface(&out), vec!["no", "erosive", "lesion"]);
        let builtin = Lexicon::builtin();
        for neg in NEGATION_TERMS {
            assert!(!builtin.stopwords.contains(neg), "{neg} must not be a stopword");
        }
    }

    #[test]
    fn builtin_stoplist_size_is_about_120() {
        let lex = Lexicon::builtin();
        assert!(lex.stopword_count() >= 100 && lex.stopword_count() <= 140);
    }

    #[test]
    fn lemmatize_s_drop() {
        let lex = Lexicon::new([], [], [("lesion".into(), 3u64)]).unwrap();
        assert_eq!(surface(&lemmatize(&toks(&["lesions"]), &lex)), vec!["lesion"]);
    }

    #[test]
    fn lemmatize_dictionary_overrides_rules() {
        let lex = Lexicon::new([], [("cortices".into(), "cortex".into())], []).unwrap();
        assert_eq!(surface(&lemmatize(&toks(&["cortices"]), &lex)), vec!["cortex"]);
    }

    #[test]
    fn lemmatize_fixed_point_on_lemma() {
        let lex = Lexicon::builtin();
        assert_eq!(surface(&lemmatize(&toks(&["cortex"]), &lex)), vec!["cortex"]);
    }

    #[test]
    fn lemmatize_suffix_rules() {
        let lex = Lexicon::new([], [], [("cause".into(), 2u64)]).unwrap();
        assert_eq!(surface(&lemmatize(&toks(&["cavities"]), &lex)), vec!["cavity"]);
        assert_eq!(surface(&lemmatize(&toks(&["abscesses"]), &lex)), vec!["abscess"]);
        assert_eq!(surface(&lemmatize(&toks(&["caused"]), &lex)), vec!["cause"]);
        assert_eq!(surface(&lemmatize(&toks(&["detecting"]), &lex)), vec!["detect"]);
        // short tokens and ss-final tokens are left alone
        assert_eq!(surface(&lemmatize(&toks(&["is", "loss"]), &lex)), vec!["is", "loss"]);
    }

    #[test]
    fn spelling_corrects_near_miss() {
        let lex = Lexicon::new([], [], [("lesion".into(), 10u64)]).unwrap();
        assert_eq!(
            surface(&correct_spelling(&toks(&["lesionn"]), &lex, 2)),
            vec!["lesion"]
        );
    }

    #[test]
    fn spelling_keeps_in_vocabulary_and_hopeless_tokens() {
        let lex = Lexicon::new([], [], [("lesion".into(), 10u64)]).unwrap();
        assert_eq!(
            surface(&correct_spelling(&toks(&["lesion", "xqzt"]), &lex, 2)),
            vec!["lesion", "xqzt"]
        );
    }

    #[test]
    fn spelling_tie_breaks_by_frequency_then_lex_order() {
        let lex = Lexicon::new(
            [],
            [],
            [("molar".into(), 5u64), ("polar".into(), 9u64)],
        )
        .unwrap();
        // "olar" is distance 1 from both; polar wins on frequency
        assert_eq!(surface(&correct_spelling(&toks(&["olar"]), &lex, 1)), vec!["polar"]);
        let lex = Lexicon::new(
            [],
            [],
            [("molar".into(), 5u64), ("polar".into(), 5u64)],
        )
        .unwrap();
        assert_eq!(surface(&correct_spelling(&toks(&["olar"]), &lex, 1)), vec!["molar"]);
    }

    #[test]
    fn spelling_skips_designators() {
        let lex = Lexicon::new([], [], [("is".into(), 50u64)]).unwrap();
        assert_eq!(
            surface(&correct_spelling(&toks(&["#8", "r/o"]), &lex, 2)),
            vec!["#8", "r/o"]
        );
    }

    #[test]
    fn pipeline_all_off_is_plain_tokenize() {
        let lex = Lexicon::builtin();
        let cfg = PipelineConfig::all_disabled();
        assert_eq!(
            run_pipeline("The tooth # 8.", &cfg, &lex),
            tokenize("The tooth # 8.")
        );
    }

    #[test]
    fn pipeline_stopword_stage_keeps_negation() {
        let lex = Lexicon::new(
            ["can".into(), "be".into(), "in".into()],
            [],
            [],
        )
        .unwrap();
        let cfg = PipelineConfig::new(true, false, false, 2).unwrap();
        let out = run_pipeline(
            "No erosive lesion can be detected in ant. maxilla.",
            &cfg,
            &lex,
        );
        assert_eq!(
            surface(&out),
            vec!["no", "erosive", "lesion", "detected", "ant", "maxilla"]
        );
    }

    #[test]
    fn pipeline_is_deterministic() {
        let lex = Lexicon::builtin();
        let cfg = PipelineConfig::default();
        let text = "Ther is a mixd lesion in the mandible.";
        assert_eq!(run_pipeline(text, &cfg, &lex), run_pipeline(text, &cfg, &lex));
    }

    #[test]
    fn config_rejects_bad_edit_distance() {
        assert!(PipelineConfig::new(true, true, true, 0).is_err());
        assert!(PipelineConfig::new(true, true, true, 3).is_err());
    }

    #[test]
    fn levenshtein_basics() {
        assert_eq!(levenshtein_capped("lesionn", "lesion", 2), Some(1));
        assert_eq!(levenshtein_capped("abc", "abc", 2), Some(0));
        assert_eq!(levenshtein_capped("abc", "axc", 2), Some(1));
        assert_eq!(levenshtein_capped("abcd", "dcba", 2), None);
    }
}
