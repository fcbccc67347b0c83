use std::path::PathBuf;

use clap::{Args, ValueEnum};
use posasc::corpus::{DatasetMeta, Domain, SourceFormat, Split};
use posasc::explain::{attention_scores, render_heatmap, saliency};
use posasc::models::Model;
use serde::Serialize;

use super::{infer_domain, infer_format, load_dataset, sidecar};
use crate::error::CliError;
use crate::manifest::{digest, RunManifest};
use crate::settings::FileConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Saliency,
    Attention,
}

#[derive(Args, Debug)]
pub struct ExplainArgs {
    /// Checkpoint written by `train`
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Dataset holding the sentence
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Input encoding [default: from the extension]
    #[arg(long)]
    pub format: Option<SourceFormat>,
    /// lap or rest [default: from the file name]
    #[arg(long)]
    pub domain: Option<Domain>,
    /// Instance id; takes precedence over --index
    #[arg(long)]
    pub id: Option<String>,
    /// Position of the instance in the file [default: 0]
    #[arg(long)]
    pub index: Option<usize>,
    /// What to visualize
    #[arg(long, value_enum, default_value_t = Kind::Saliency)]
    pub kind: Kind,
    /// Attention record to show [default: the model's first]
    #[arg(long)]
    pub record: Option<String>,
    /// Heatmap file; `.html` gives an HTML fragment, anything else SVG
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Settings<'a> {
    checkpoint: &'a PathBuf,
    input: &'a PathBuf,
    instance: &'a str,
    kind: Kind,
    record: Option<&'a str>,
}

pub fn run(args: ExplainArgs, file: &FileConfig) -> Result<(), CliError> {
    let format = infer_format(&args.input, file.pick(args.format, "format")?)?;
    let domain = infer_domain(&args.input, file.pick(args.domain, "domain")?)?;
    let (model, seed) = Model::load(&args.checkpoint).map_err(|e| CliError::read(&args.checkpoint, e))?;
    let mut inputs = vec![
        digest("checkpoint", &args.checkpoint)?,
        digest("checkpoint metadata", &Model::metadata_path(&args.checkpoint))?,
    ];
    let (data, d) = load_dataset("input", &args.input, format, DatasetMeta { domain, split: Split::Test })?;
    inputs.push(d);

    let instance = match (&args.id, args.index) {
        (Some(id), _) => data
            .instances
            .iter()
            .find(|i| &i.id == id)
            .ok_or_else(|| CliError::Usage(format!("no instance `{id}` in {}", args.input.display())))?,
        (None, k) => {
            let k = k.unwrap_or(0);
            data.instances.get(k).ok_or_else(|| {
                CliError::Usage(format!("index {k} out of range ({} instances)", data.instances.len()))
            })?
        }
    };

    let trace = model.forward_instance(instance)?;
    let record = match (args.kind, &args.record) {
        (Kind::Attention, Some(r)) => Some(r.clone()),
        (Kind::Attention, None) => Some(
            trace
                .attention
                .first()
                .map(|r| r.name.clone())
                .ok_or_else(|| CliError::Usage(format!("{} records no attention", model.config().arch)))?,
        ),
        (Kind::Saliency, _) => None,
    };
    let settings = Settings {
        checkpoint: &args.checkpoint,
        input: &args.input,
        instance: &instance.id,
        kind: args.kind,
        record: record.as_deref(),
    };
    RunManifest::new("explain", settings, inputs, vec![seed])?.write(&sidecar(&args.out))?;

    let scores = match &record {
        Some(name) => attention_scores(&trace, name, instance)?,
        None => saliency(&model, instance)?,
    };
    render_heatmap(&scores, &args.out)?;
    println!("# {} predicted={} gold={}", instance.id, trace.predicted(), instance.label.index());
    for (t, s) in scores.tokens.iter().zip(&scores.scores) {
        println!("{t}\t{s:.4}");
    }
    Ok(())
}
