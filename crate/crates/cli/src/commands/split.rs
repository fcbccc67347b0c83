use std::path::PathBuf;

use clap::Args;
use posasc::corpus::{split_dev, DatasetMeta, Domain, SourceFormat, Split};
use serde::Serialize;

use super::{create_dir, infer_domain, infer_format, load_dataset, write_file};
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::settings::{FileConfig, DEV_SIZE};

#[derive(Args, Debug)]
pub struct SplitArgs {
    /// Training set to split
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Input encoding [default: from the extension]
    #[arg(long)]
    pub format: Option<SourceFormat>,
    /// lap or rest [default: from the file name]
    #[arg(long)]
    pub domain: Option<Domain>,
    /// Instances drawn into the dev split [default: 150]
    #[arg(long)]
    pub dev_size: Option<usize>,
    /// Seed of the draw [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory receiving train.jsonl, dev.jsonl and manifest.json
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Settings {
    input: PathBuf,
    format: String,
    domain: Domain,
    dev_size: usize,
    seed: u64,
}

pub fn run(args: SplitArgs, file: &FileConfig) -> Result<(), CliError> {
    let format = infer_format(&args.input, file.pick(args.format, "format")?)?;
    let domain = infer_domain(&args.input, file.pick(args.domain, "domain")?)?;
    let dev_size = file.pick(args.dev_size, "dev-size")?.unwrap_or(DEV_SIZE);
    let seed = file.pick(args.seed, "seed")?.unwrap_or(0);
    let (train, digest) = load_dataset("train", &args.input, format, DatasetMeta { domain, split: Split::Train })?;

    create_dir(&args.out)?;
    let settings = Settings {
        input: args.input.clone(),
        format: format.to_string(),
        domain,
        dev_size,
        seed,
    };
    RunManifest::new("split", settings, vec![digest], vec![seed])?.write(&args.out.join("manifest.json"))?;

    let (rest, dev) = split_dev(&train, dev_size, seed)?;
    for (name, d) in [("train.jsonl", &rest), ("dev.jsonl", &dev)] {
        let mut buf = Vec::new();
        d.write_jsonl(&mut buf)?;
        write_file(&args.out.join(name), &buf)?;
    }
    println!("train\t{}\t{}", rest.len(), rest.label_counts());
    println!("dev\t{}\t{}", dev.len(), dev.label_counts());
    Ok(())
}
