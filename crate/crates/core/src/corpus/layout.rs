use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{parse_arts, parse_semeval_xml, CorpusError, Dataset, DatasetMeta, Domain, Ingested, Split};

/// On-disk encoding of a dataset file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceFormat {
    SemEval,
    Arts,
    Jsonl,
}

impl SourceFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceFormat::SemEval => "semeval",
            SourceFormat::Arts => "arts",
            SourceFormat::Jsonl => "jsonl",
        }
    }
}

impl fmt::Display for SourceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "semeval" | "xml" => Ok(SourceFormat::SemEval),
            "arts" => Ok(SourceFormat::Arts),
            "jsonl" => Ok(SourceFormat::Jsonl),
            _ => Err(CorpusError::Unknown {
                what: "format",
                value: s.to_string(),
            }),
        }
    }
}

/// Reads one dataset file in the given format.
pub fn read_dataset(path: &Path, format: SourceFormat, meta: DatasetMeta) -> Result<Ingested, CorpusError> {
    match format {
        SourceFormat::SemEval => parse_semeval_xml(&fs::read(path)?, meta),
        SourceFormat::Arts => parse_arts(&fs::read(path)?, meta),
        SourceFormat::Jsonl => Ok(Ingested {
            dataset: Dataset::read_jsonl(BufReader::new(fs::File::open(path)?), meta)?,
            warnings: Vec::new(),
        }),
    }
}

/// Which benchmark file of a domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DataKind {
    Train,
    Test,
    Adversarial,
}

impl DataKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DataKind::Train => "train",
            DataKind::Test => "test",
            DataKind::Adversarial => "adv",
        }
    }

    pub fn split(self) -> Split {
        match self {
            DataKind::Train => Split::Train,
            _ => Split::Test,
        }
    }
}

fn raw_names(domain: Domain, kind: DataKind) -> &'static [&'static str] {
    match (domain, kind) {
        (Domain::Laptop, DataKind::Train) => &["Laptop_Train_v2.xml", "Laptops_Train_v2.xml", "Laptops_Train.xml"],
        (Domain::Laptop, DataKind::Test) => &["Laptops_Test_Gold.xml", "Laptop_Test_Gold.xml"],
        (Domain::Restaurant, DataKind::Train) => &["Restaurants_Train_v2.xml", "Restaurants_Train.xml"],
        (Domain::Restaurant, DataKind::Test) => &["Restaurants_Test_Gold.xml"],
        (Domain::Laptop, DataKind::Adversarial) => &["laptop_test_enriched.json", "arts_laptop.json"],
        (Domain::Restaurant, DataKind::Adversarial) => &["rest_test_enriched.json", "arts_restaurant.json"],
    }
}

/// Finds a benchmark file under `root`, `root/semeval` or `root/arts`.
///
/// A dumped `<lap|rest>_<train|test|adv>.jsonl` wins over the original
/// SemEval XML / ARTS JSON file names.
pub fn locate(root: &Path, domain: Domain, kind: DataKind) -> Option<(PathBuf, SourceFormat)> {
    let dirs = [root.to_path_buf(), root.join("semeval"), root.join("arts")];
    let dump = format!("{}_{}.jsonl", domain.short(), kind.as_str());
    let raw = if kind == DataKind::Adversarial {
        SourceFormat::Arts
    } else {
        SourceFormat::SemEval
    };
    let mut candidates = vec![(dump, SourceFormat::Jsonl)];
    candidates.extend(raw_names(domain, kind).iter().map(|n| (n.to_string(), raw)));
    candidates
        .iter()
        .flat_map(|(name, fmt)| dirs.iter().map(move |d| (d.join(name), *fmt)))
        .find(|(p, _)| p.is_file())
}
