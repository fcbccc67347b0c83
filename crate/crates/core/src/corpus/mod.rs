//! Sentences, aspect spans and labels: ingestion of SemEval-2014 XML and ARTS
//! JSON, the line-delimited dataset dump, dev splitting and word vectors.

mod arts;
mod embeddings;
mod layout;
mod semeval;
mod split;
mod tokenize;

pub use arts::parse_arts;
pub use embeddings::{load_embeddings, Coverage, EmbeddingTable};
pub use layout::{locate, read_dataset, DataKind, SourceFormat};
pub use semeval::parse_semeval_xml;
pub use split::split_dev;
pub use tokenize::tokenize;

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("XML error at line {line}, column {col}: {msg}")]
    Xml { line: u32, col: u32, msg: String },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unexpected structure: {0}")]
    Structure(String),
    #[error("invalid instance {id}: {reason}")]
    Instance { id: String, reason: String },
    #[error("cannot draw {k} dev instances from {n}")]
    DevTooLarge { k: usize, n: usize },
    #[error("embeddings: {0}")]
    Embeddings(String),
    #[error("unknown {what} `{value}`")]
    Unknown { what: &'static str, value: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sentiment polarity. The discriminant is the class index used by the
/// classifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Negative = 0,
    Neutral = 1,
    Positive = 2,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Negative, Polarity::Neutral, Polarity::Positive];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Negative => "negative",
            Polarity::Neutral => "neutral",
            Polarity::Positive => "positive",
        }
    }
}

impl FromStr for Polarity {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "negative" | "neg" => Ok(Polarity::Negative),
            "neutral" | "neu" => Ok(Polarity::Neutral),
            "positive" | "pos" => Ok(Polarity::Positive),
            _ => Err(CorpusError::Unknown {
                what: "polarity",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Laptop,
    Restaurant,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Laptop => "laptop",
            Domain::Restaurant => "restaurant",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Domain::Laptop => "lap",
            Domain::Restaurant => "rest",
        }
    }

    pub fn other(self) -> Self {
        match self {
            Domain::Laptop => Domain::Restaurant,
            Domain::Restaurant => Domain::Laptop,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lap" | "laptop" | "laptops" => Ok(Domain::Laptop),
            "rest" | "restaurant" | "restaurants" => Ok(Domain::Restaurant),
            _ => Err(CorpusError::Unknown {
                what: "domain",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
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
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            _ => Err(CorpusError::Unknown {
                what: "split",
                value: s.to_string(),
            }),
        }
    }
}

/// A lowercased token with character offsets into the source sentence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub char_start: usize,
    pub char_end: usize,
}

/// One sentence with one aspect span `[aspect_start, aspect_start + aspect_len)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub domain: Domain,
    pub tokens: Vec<Token>,
    pub aspect_start: usize,
    pub aspect_len: usize,
    pub label: Polarity,
}

impl Instance {
    pub fn new(
        id: impl Into<String>,
        domain: Domain,
        tokens: Vec<Token>,
        aspect_start: usize,
        aspect_len: usize,
        label: Polarity,
    ) -> Result<Self, CorpusError> {
        let inst = Self {
            id: id.into(),
            domain,
            tokens,
            aspect_start,
            aspect_len,
            label,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Builds an instance from already-split words; offsets assume single
    /// spaces between words.
    pub fn from_words(
        id: impl Into<String>,
        domain: Domain,
        words: &[&str],
        aspect_start: usize,
        aspect_len: usize,
        label: Polarity,
    ) -> Result<Self, CorpusError> {
        let mut pos = 0;
        let tokens = words
            .iter()
            .map(|w| {
                let len = w.chars().count();
                let t = Token {
                    surface: w.to_lowercase(),
                    char_start: pos,
                    char_end: pos + len,
                };
                pos += len + 1;
                t
            })
            .collect();
        Self::new(id, domain, tokens, aspect_start, aspect_len, label)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |reason: String| CorpusError::Instance {
            id: self.id.clone(),
            reason,
        };
        if self.tokens.is_empty() {
            return Err(fail("no tokens".into()));
        }
        if self.aspect_len == 0 {
            return Err(fail("empty aspect".into()));
        }
        if self.aspect_start + self.aspect_len > self.tokens.len() {
            return Err(fail(format!(
                "aspect [{}, {}) exceeds {} tokens",
                self.aspect_start,
                self.aspect_start + self.aspect_len,
                self.tokens.len()
            )));
        }
        let mut prev_end = 0;
        for t in &self.tokens {
            if t.char_start >= t.char_end || t.char_start < prev_end {
                return Err(fail(format!("token `{}` has bad offsets", t.surface)));
            }
            prev_end = t.char_end;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.surface.as_str())
    }

    pub fn aspect_range(&self) -> std::ops::Range<usize> {
        self.aspect_start..self.aspect_start + self.aspect_len
    }

    pub fn aspect_surfaces(&self) -> Vec<&str> {
        self.tokens[self.aspect_range()]
            .iter()
            .map(|t| t.surface.as_str())
            .collect()
    }
}

/// Label histogram in the (positive, neutral, negative) order used by
/// dataset statistics tables.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub positive: usize,
    pub neutral: usize,
    pub negative: usize,
}

impl LabelCounts {
    pub fn as_tuple(&self) -> (usize, usize, usize) {
        (self.positive, self.neutral, self.negative)
    }

    pub fn total(&self) -> usize {
        self.positive + self.neutral + self.negative
    }
}

impl fmt::Display for LabelCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "pos={} neu={} neg={} total={}",
            self.positive,
            self.neutral,
            self.negative,
            self.total()
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetMeta {
    pub domain: Domain,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub domain: Domain,
    pub split: Split,
    pub instances: Vec<Instance>,
}

impl Dataset {
    pub fn new(meta: DatasetMeta, instances: Vec<Instance>) -> Result<Self, CorpusError> {
        if let Some(bad) = instances.iter().find(|i| i.domain != meta.domain) {
            return Err(CorpusError::Instance {
                id: bad.id.clone(),
                reason: format!("domain {} in a {} dataset", bad.domain, meta.domain),
            });
        }
        Ok(Self {
            domain: meta.domain,
            split: meta.split,
            instances,
        })
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            domain: self.domain,
            split: self.split,
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn label_counts(&self) -> LabelCounts {
        let mut c = LabelCounts::default();
        for i in &self.instances {
            match i.label {
                Polarity::Positive => c.positive += 1,
                Polarity::Neutral => c.neutral += 1,
                Polarity::Negative => c.negative += 1,
            }
        }
        c
    }

    /// Writes one JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), CorpusError> {
        for inst in &self.instances {
            serde_json::to_writer(&mut w, inst)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R, meta: DatasetMeta) -> Result<Self, CorpusError> {
        let mut instances = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let inst: Instance = serde_json::from_str(&line)?;
            inst.validate()?;
            instances.push(inst);
        }
        Self::new(meta, instances)
    }
}

/// Parser output together with the per-instance problems that were
/// tolerated along the way.
#[derive(Clone, Debug)]
pub struct Ingested {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

/// Every token surface across `datasets`.
pub fn vocabulary<'a>(datasets: impl IntoIterator<Item = &'a Dataset>) -> BTreeSet<String> {
    datasets
        .into_iter()
        .flat_map(|d| &d.instances)
        .flat_map(|i| i.tokens.iter().map(|t| t.surface.clone()))
        .collect()
}

/// Maps a character range of `text` onto the smallest run of tokens covering
/// it. Returns `(start, len, exact)` where `exact` means the range coincides
/// with token boundaries.
pub(crate) fn align_span(tokens: &[Token], from: usize, to: usize) -> Option<(usize, usize, bool)> {
    let covering: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.char_end > from && t.char_start < to)
        .map(|(i, _)| i)
        .collect();
    let (&first, &last) = (covering.first()?, covering.last()?);
    let exact = tokens[first].char_start == from && tokens[last].char_end == to;
    Some((first, last - first + 1, exact))
}

/// Locates the tokenized `term` inside `tokens` (first occurrence).
pub(crate) fn find_term(tokens: &[Token], term: &str) -> Option<(usize, usize)> {
    let needle: Vec<String> = tokenize(term).into_iter().map(|t| t.surface).collect();
    if needle.is_empty() || needle.len() > tokens.len() {
        return None;
    }
    (0..=tokens.len() - needle.len())
        .find(|&s| {
            needle
                .iter()
                .zip(&tokens[s..])
                .all(|(n, t)| *n == t.surface)
        })
        .map(|s| (s, needle.len()))
}

/// Shared span resolution for both file formats.
pub(crate) fn resolve_aspect(
    id: &str,
    tokens: &[Token],
    term: &str,
    from: usize,
    to: usize,
    warnings: &mut Vec<String>,
) -> Option<(usize, usize)> {
    match align_span(tokens, from, to) {
        Some((s, l, true)) => Some((s, l)),
        Some((s, l, false)) => {
            warnings.push(format!(
                "{id}: offsets {from}..{to} for `{term}` do not align with tokens; snapped to tokens {s}..{}",
                s + l
            ));
            Some((s, l))
        }
        None => match find_term(tokens, term) {
            Some((s, l)) => {
                warnings.push(format!(
                    "{id}: offsets {from}..{to} for `{term}` cover no token; located term at tokens {s}..{}",
                    s + l
                ));
                Some((s, l))
            }
            None => {
                warnings.push(format!("{id}: cannot place aspect `{term}`; instance skipped"));
                None
            }
        },
    }
}
