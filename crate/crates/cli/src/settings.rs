use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use ini::Ini;
use posasc::models::ModelConfig;
use posasc::trainer::TrainConfig;
use serde::Serialize;

use crate::error::CliError;

/// Comma-separated values.
#[derive(Clone, Debug, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let items: Result<Vec<T>, String> = s
            .split(',')
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(|x| x.parse::<T>().map_err(|e| e.to_string()))
            .collect();
        let items = items?;
        if items.is_empty() {
            return Err("empty list".into());
        }
        Ok(List(items))
    }
}

/// Seeds as a comma list whose items may be inclusive ranges, e.g. `0-4,9`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedList(pub Vec<u64>);

impl FromStr for SeedList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let bad = |_| format!("bad seed `{part}`");
            match part.split_once('-') {
                Some((a, b)) => {
                    let (a, b): (u64, u64) = (a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?);
                    if b < a {
                        return Err(format!("empty seed range `{part}`"));
                    }
                    out.extend(a..=b);
                }
                None => out.push(part.parse().map_err(bad)?),
            }
        }
        if out.is_empty() {
            return Err("no seeds".into());
        }
        Ok(SeedList(out))
    }
}

/// Keys from an INI-style file: top-level entries apply to every command,
/// a `[command]` section overrides them for that command.
#[derive(Clone, Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
    source: Option<PathBuf>,
}

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

impl FileConfig {
    pub fn load(path: Option<&Path>, command: &str, known: &[&str]) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let ini = Ini::load_from_file(path).map_err(|e| CliError::read(path, e))?;
        let mut values = BTreeMap::new();
        for section in [None, Some(command)] {
            if let Some(props) = ini.section(section) {
                for (k, v) in props.iter() {
                    let k = normalize(k);
                    if !known.contains(&k.as_str()) {
                        return Err(CliError::Data(format!(
                            "{}: unknown key `{k}` for `{command}`",
                            path.display()
                        )));
                    }
                    values.insert(k, v.trim().to_string());
                }
            }
        }
        Ok(Self {
            values,
            source: Some(path.to_path_buf()),
        })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| {
                CliError::Data(format!(
                    "{}: `{key} = {v}`: {e}",
                    self.source.as_deref().unwrap_or(Path::new("config")).display()
                ))
            }),
        }
    }

    /// The flag if given, otherwise the file entry.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }
}

/// Optimizer, model-size and data settings shared by `train` and `robustness`.
#[derive(Args, Clone, Debug, Default)]
pub struct HyperOpts {
    /// Training epochs; the best dev epoch is kept [default: 20]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size [default: 64]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// L2 penalty on weight matrices [default: 0.00001]
    #[arg(long)]
    pub l2: Option<f64>,
    /// Hidden size of every LSTM direction [default: 300]
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Word-vector dimension [default: 300]
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// MemNet hops [default: 3]
    #[arg(long)]
    pub hops: Option<usize>,
    /// Give aspect tokens weight 1 instead of 1/(n-m)
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub keep_aspect: Option<bool>,
    /// Fine-tune the word vectors
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub train_embeddings: Option<bool>,
    /// GloVe-style text file; random vectors when absent [env: POSBIAS_GLOVE]
    #[arg(long, value_name = "FILE")]
    pub embeddings: Option<PathBuf>,
    /// Instances moved from training to the dev split [default: 150]
    #[arg(long)]
    pub dev_size: Option<usize>,
    /// Seed of the dev split draw [default: 0]
    #[arg(long)]
    pub dev_seed: Option<u64>,
    /// Worker threads [default: all cores]
    #[arg(long)]
    pub jobs: Option<usize>,
}

pub const HYPER_KEYS: [&str; 13] = [
    "epochs",
    "batch-size",
    "lr",
    "l2",
    "hidden",
    "embed-dim",
    "hops",
    "keep-aspect",
    "train-embeddings",
    "embeddings",
    "dev-size",
    "dev-seed",
    "jobs",
];

pub const DEV_SIZE: usize = 150;

/// [`HyperOpts`] after merging flags, file and defaults.
#[derive(Clone, Debug, Serialize)]
pub struct Hyper {
    pub train: TrainConfig,
    pub embeddings: Option<PathBuf>,
    pub dev_size: usize,
    pub dev_seed: u64,
    pub jobs: Option<usize>,
}

impl HyperOpts {
    pub fn resolve(&self, file: &FileConfig) -> Result<Hyper, CliError> {
        let d = TrainConfig::default();
        let m = ModelConfig::default();
        let model = ModelConfig {
            hidden: file.pick(self.hidden, "hidden")?.unwrap_or(m.hidden),
            embed_dim: file.pick(self.embed_dim, "embed-dim")?.unwrap_or(m.embed_dim),
            memnet_hops: file.pick(self.hops, "hops")?.unwrap_or(m.memnet_hops),
            keep_aspect: file.pick(self.keep_aspect, "keep-aspect")?.unwrap_or(m.keep_aspect),
            train_embeddings: file.pick(self.train_embeddings, "train-embeddings")?.unwrap_or(m.train_embeddings),
            ..m
        };
        let train = TrainConfig {
            batch_size: file.pick(self.batch_size, "batch-size")?.unwrap_or(d.batch_size),
            learning_rate: file.pick(self.lr, "lr")?.unwrap_or(d.learning_rate),
            l2: file.pick(self.l2, "l2")?.unwrap_or(d.l2),
            max_epochs: file.pick(self.epochs, "epochs")?.unwrap_or(d.max_epochs),
            seed: 0,
            model,
        };
        train.validate()?;
        let embeddings = file
            .pick(self.embeddings.clone(), "embeddings")?
            .or_else(|| std::env::var_os("POSBIAS_GLOVE").map(PathBuf::from));
        let jobs = file.pick(self.jobs, "jobs")?;
        if jobs == Some(0) {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        Ok(Hyper {
            train,
            embeddings,
            dev_size: file.pick(self.dev_size, "dev-size")?.unwrap_or(DEV_SIZE),
            dev_seed: file.pick(self.dev_seed, "dev-seed")?.unwrap_or(0),
            jobs,
        })
    }
}
