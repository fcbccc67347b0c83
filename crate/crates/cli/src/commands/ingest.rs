use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use posasc::corpus::{DatasetMeta, Domain, SourceFormat, Split};
use serde::Serialize;

use super::{infer_domain, infer_format, infer_split, load_dataset, sidecar, write_file};
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::settings::FileConfig;

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Input encoding: semeval, arts or jsonl [default: from the extension]
    #[arg(long)]
    pub format: Option<SourceFormat>,
    /// Dataset file to parse
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Line-delimited JSON dump to write
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// lap or rest [default: from the file name]
    #[arg(long)]
    pub domain: Option<Domain>,
    /// train, dev or test [default: from the file name]
    #[arg(long)]
    pub split: Option<Split>,
    /// Print label counts
    #[arg(long)]
    pub stats: bool,
}

#[derive(Serialize)]
struct Settings {
    format: String,
    domain: Domain,
    split: String,
    input: PathBuf,
    out: Option<PathBuf>,
}

pub fn run(args: IngestArgs, file: &FileConfig) -> Result<(), CliError> {
    let format = infer_format(&args.input, file.pick(args.format, "format")?)?;
    let domain = infer_domain(&args.input, file.pick(args.domain, "domain")?)?;
    let split = infer_split(&args.input, file.pick(args.split, "split")?);
    let (dataset, digest) = load_dataset("input", &args.input, format, DatasetMeta { domain, split })?;

    if let Some(out) = &args.out {
        let settings = Settings {
            format: format.to_string(),
            domain,
            split: split.to_string(),
            input: args.input.clone(),
            out: Some(out.clone()),
        };
        RunManifest::new("ingest", settings, vec![digest], vec![])?.write(&sidecar(out))?;
        let mut buf = Vec::new();
        dataset.write_jsonl(&mut buf)?;
        write_file(out, &buf)?;
        log::info!("wrote {} instances to {}", dataset.len(), out.display());
    }
    if args.stats {
        let c = dataset.label_counts();
        let mut stdout = std::io::stdout().lock();
        let _ = writeln!(stdout, "dataset\tpositive\tneutral\tnegative\ttotal");
        let _ = writeln!(
            stdout,
            "{}/{}\t{}\t{}\t{}\t{}",
            domain.short(),
            split,
            c.positive,
            c.neutral,
            c.negative,
            c.total()
        );
    }
    Ok(())
}
