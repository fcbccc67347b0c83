use std::path::PathBuf;

use clap::Args;
use posasc::corpus::{split_dev, DatasetMeta, Domain, SourceFormat, Split};
use posasc::models::Arch;
use posasc::posbias::BiasMode;
use posasc::trainer::train_with_log;
use serde::Serialize;

use super::{create_dir, embedding_table, infer_domain, infer_format, load_dataset, set_jobs, write_file};
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::settings::{FileConfig, Hyper, HyperOpts, HYPER_KEYS};

pub const KEYS: [&str; 4] = ["arch", "mode", "seed", "domain"];

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training set
    #[arg(long, value_name = "FILE")]
    pub train: PathBuf,
    /// Dev set [default: drawn from --train, see --dev-size]
    #[arg(long, value_name = "FILE")]
    pub dev: Option<PathBuf>,
    /// Extra dataset files whose words join the vocabulary (e.g. test sets)
    #[arg(long, value_name = "FILE")]
    pub vocab: Vec<PathBuf>,
    /// Input encoding of every file [default: from the extension]
    #[arg(long)]
    pub format: Option<SourceFormat>,
    /// lap or rest [default: from the file name]
    #[arg(long)]
    pub domain: Option<Domain>,
    /// lstm, lstm-attn, ian, memnet or aoa [default: lstm]
    #[arg(long)]
    pub arch: Option<Arch>,
    /// none, pos-wt or pos-dp [default: none]
    #[arg(long)]
    pub mode: Option<BiasMode>,
    /// Seed for initialization, shuffling and dropout masks [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub hyper: HyperOpts,
    /// Directory receiving the checkpoint, training log and manifest
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

pub fn keys() -> Vec<&'static str> {
    let mut k: Vec<&str> = HYPER_KEYS.to_vec();
    k.extend(KEYS);
    k.push("format");
    k
}

#[derive(Serialize)]
struct Settings<'a> {
    #[serde(flatten)]
    hyper: &'a Hyper,
    train_file: &'a PathBuf,
    dev_file: &'a Option<PathBuf>,
    vocab_files: &'a [PathBuf],
    domain: Domain,
}

#[derive(Serialize)]
struct Summary {
    best_epoch: usize,
    best_dev_accuracy: f64,
    epochs_run: usize,
    train_size: usize,
    dev_size: usize,
}

pub fn run(args: TrainArgs, file: &FileConfig) -> Result<(), CliError> {
    let mut hyper = args.hyper.resolve(file)?;
    hyper.train.model.arch = file.pick(args.arch, "arch")?.unwrap_or(Arch::Lstm);
    hyper.train.model.bias_mode = file.pick(args.mode, "mode")?.unwrap_or(BiasMode::None);
    hyper.train.seed = file.pick(args.seed, "seed")?.unwrap_or(0);
    let format = file.pick(args.format, "format")?;
    let domain = infer_domain(&args.train, file.pick(args.domain, "domain")?)?;
    if args.dev.is_some() {
        hyper.dev_size = 0;
    }

    let meta = |split| DatasetMeta { domain, split };
    let (full, d_train) = load_dataset("train", &args.train, infer_format(&args.train, format)?, meta(Split::Train))?;
    let mut inputs = vec![d_train];
    let (train, dev) = match &args.dev {
        Some(p) => {
            let (dev, d) = load_dataset("dev", p, infer_format(p, format)?, meta(Split::Dev))?;
            inputs.push(d);
            (full, dev)
        }
        None => split_dev(&full, hyper.dev_size, hyper.dev_seed)?,
    };
    let mut extra = Vec::new();
    for p in &args.vocab {
        let (d, dig) = load_dataset("vocabulary", p, infer_format(p, format)?, meta(Split::Test))?;
        inputs.push(dig);
        extra.push(d);
    }
    let mut all = vec![&train, &dev];
    all.extend(extra.iter());
    let (table, emb) = embedding_table(&hyper, &all)?;
    inputs.extend(emb);

    create_dir(&args.out)?;
    let settings = Settings {
        hyper: &hyper,
        train_file: &args.train,
        dev_file: &args.dev,
        vocab_files: &args.vocab,
        domain,
    };
    RunManifest::new("train", settings, inputs, vec![hyper.train.seed])?.write(&args.out.join("manifest.json"))?;
    set_jobs(hyper.jobs);

    let mut log = Vec::new();
    let result = train_with_log(&train, &dev, &hyper.train, &table, Some(&mut log))?;
    write_file(&args.out.join("train_log.jsonl"), &log)?;
    let ckpt = args.out.join("model.ckpt");
    result.model.save(&ckpt, hyper.train.seed)?;
    let summary = Summary {
        best_epoch: result.best_epoch,
        best_dev_accuracy: result.best_dev_accuracy,
        epochs_run: result.history.len(),
        train_size: train.len(),
        dev_size: dev.len(),
    };
    let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(&args.out.join("summary.json"), format!("{text}\n").as_bytes())?;
    println!(
        "best epoch {} dev accuracy {:.4}; checkpoint {}",
        result.best_epoch,
        result.best_dev_accuracy,
        ckpt.display()
    );
    Ok(())
}
