use std::path::PathBuf;

use clap::Args;
use posasc::corpus::{DatasetMeta, Domain, SourceFormat, Split};
use posasc::models::Model;
use posasc::robeval::evaluate;
use posasc::trainer::predict;
use serde::Serialize;

use super::{create_dir, infer_domain, infer_format, load_dataset, set_jobs, write_file};
use crate::error::CliError;
use crate::manifest::{digest, RunManifest};
use crate::settings::FileConfig;

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Checkpoint written by `train` (its .json sidecar must sit next to it)
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Test set
    #[arg(long, value_name = "FILE")]
    pub test: PathBuf,
    /// Input encoding [default: from the extension]
    #[arg(long)]
    pub format: Option<SourceFormat>,
    /// lap or rest [default: from the file name]
    #[arg(long)]
    pub domain: Option<Domain>,
    /// Worker threads [default: all cores]
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Directory receiving metrics.json, predictions.jsonl and manifest.json
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Settings {
    checkpoint: PathBuf,
    test: PathBuf,
    format: String,
    domain: Domain,
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    id: &'a str,
    gold: &'a str,
    predicted: &'a str,
    logits: &'a [f64],
}

pub fn run(args: EvalArgs, file: &FileConfig) -> Result<(), CliError> {
    let format = infer_format(&args.test, file.pick(args.format, "format")?)?;
    let domain = infer_domain(&args.test, file.pick(args.domain, "domain")?)?;
    let (model, seed) = Model::load(&args.checkpoint).map_err(|e| match e {
        posasc::models::ModelError::Io(e) => CliError::read(&args.checkpoint, e),
        e => CliError::Data(format!("{}: {e}", args.checkpoint.display())),
    })?;
    let mut inputs = vec![
        digest("checkpoint", &args.checkpoint)?,
        digest("checkpoint metadata", &Model::metadata_path(&args.checkpoint))?,
    ];
    let (test, d) = load_dataset("test", &args.test, format, DatasetMeta { domain, split: Split::Test })?;
    inputs.push(d);

    if let Some(out) = &args.out {
        create_dir(out)?;
        let settings = Settings {
            checkpoint: args.checkpoint.clone(),
            test: args.test.clone(),
            format: format.to_string(),
            domain,
        };
        RunManifest::new("eval", settings, inputs, vec![seed])?.write(&out.join("manifest.json"))?;
    }
    set_jobs(file.pick(args.jobs, "jobs")?);

    let preds = predict(&model, &test.instances)?;
    let pred: Vec<usize> = preds.iter().map(|p| p.class).collect();
    let gold: Vec<usize> = test.instances.iter().map(|i| i.label.index()).collect();
    let metrics = evaluate(&pred, &gold).map_err(|e| CliError::Runtime(e.to_string()))?;

    if let Some(out) = &args.out {
        let mut lines = String::new();
        for (inst, p) in test.instances.iter().zip(&preds) {
            let line = PredictionLine {
                id: &inst.id,
                gold: inst.label.as_str(),
                predicted: posasc::corpus::Polarity::from_index(p.class).map_or("?", |c| c.as_str()),
                logits: &p.trace.logits,
            };
            lines.push_str(&serde_json::to_string(&line).map_err(|e| CliError::Runtime(e.to_string()))?);
            lines.push('\n');
        }
        write_file(&out.join("predictions.jsonl"), lines.as_bytes())?;
        let text = serde_json::to_string_pretty(&metrics).map_err(|e| CliError::Runtime(e.to_string()))?;
        write_file(&out.join("metrics.json"), format!("{text}\n").as_bytes())?;
    }
    println!("accuracy\t{:.4}", metrics.accuracy);
    println!("macro_f1\t{:.4}", metrics.macro_f1);
    Ok(())
}
