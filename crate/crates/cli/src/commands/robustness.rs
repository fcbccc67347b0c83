use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::Args;
use posasc::corpus::{locate, split_dev, DataKind, Dataset, DatasetMeta, Domain, EmbeddingTable};
use posasc::models::Arch;
use posasc::posbias::BiasMode;
use posasc::robeval::{render_csv, render_markdown, run_plan, ProtocolData, ProtocolPlan, RunRecord, Scenario, ScenarioSpec};
use posasc::synthetic::{separable_dataset, table_for};
use serde::Serialize;

use super::{create_dir, embedding_table, load_dataset, set_jobs, write_file};
use crate::error::CliError;
use crate::manifest::{InputDigest, RunManifest};
use crate::settings::{FileConfig, Hyper, HyperOpts, List, SeedList, HYPER_KEYS};

pub const KEYS: [&str; 8] = [
    "arch",
    "modes",
    "scenario",
    "train-domain",
    "seeds",
    "data-dir",
    "synthetic",
    "save-models",
];

#[derive(Args, Debug)]
pub struct RobustnessArgs {
    /// Architectures, comma-separated [default: lstm,lstm-attn,ian,memnet,aoa]
    #[arg(long)]
    pub arch: Option<List<Arch>>,
    /// Bias modes, comma-separated [default: none,pos-wt,pos-dp]
    #[arg(long)]
    pub modes: Option<List<BiasMode>>,
    /// Scenarios: id, ood, adv [default: id,ood,adv]
    #[arg(long)]
    pub scenario: Option<List<Scenario>>,
    /// Training domains: lap, rest [default: lap,rest]
    #[arg(long)]
    pub train_domain: Option<List<Domain>>,
    /// Seeds, e.g. `0-4` or `1,7,9` [default: 0-4]
    #[arg(long)]
    pub seeds: Option<SeedList>,
    /// Directory holding the SemEval/ARTS files [env: POSBIAS_DATA_DIR]
    #[arg(long, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// Use generated separable corpora of this many training instances per
    /// domain instead of the benchmark files
    #[arg(long, value_name = "N")]
    pub synthetic: Option<usize>,
    /// Keep every run's best checkpoint in its run directory
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub save_models: Option<bool>,
    #[command(flatten)]
    pub hyper: HyperOpts,
    /// Output directory for the report, manifest and per-run logs
    #[arg(long, value_name = "DIR", default_value = "robustness-out")]
    pub out: PathBuf,
}

pub fn keys() -> Vec<&'static str> {
    let mut k: Vec<&str> = HYPER_KEYS.to_vec();
    k.extend(KEYS);
    k
}

#[derive(Serialize)]
struct Settings<'a> {
    archs: &'a [Arch],
    modes: &'a [BiasMode],
    scenarios: &'a [String],
    data: String,
    save_models: bool,
    #[serde(flatten)]
    hyper: &'a Hyper,
}

struct Loaded {
    data: ProtocolData,
    table: EmbeddingTable,
    inputs: Vec<InputDigest>,
    source: String,
}

fn synthetic(n: usize, hyper: &Hyper) -> Loaded {
    let mut data = ProtocolData::default();
    for (k, d) in [Domain::Laptop, Domain::Restaurant].into_iter().enumerate() {
        let s = 100 * k as u64;
        let test_n = n.max(3);
        data.train.insert(d, separable_dataset(n.max(3), d, posasc::corpus::Split::Train, false, s + 1));
        data.dev.insert(d, separable_dataset((n / 3).max(3), d, posasc::corpus::Split::Dev, false, s + 2));
        data.test.insert(d, separable_dataset(test_n, d, posasc::corpus::Split::Test, false, s + 3));
        data.adversarial.insert(d, separable_dataset(test_n, d, posasc::corpus::Split::Test, true, s + 4));
    }
    let all: Vec<&Dataset> = data
        .train
        .values()
        .chain(data.dev.values())
        .chain(data.test.values())
        .chain(data.adversarial.values())
        .collect();
    let table = table_for(&all, hyper.train.model.embed_dim, 0);
    Loaded {
        data,
        table,
        inputs: Vec::new(),
        source: format!("synthetic:{n}"),
    }
}

fn from_files(root: &Path, specs: &[ScenarioSpec], hyper: &Hyper) -> Result<Loaded, CliError> {
    let mut needed: BTreeSet<(Domain, DataKind)> = BTreeSet::new();
    for s in specs {
        needed.insert((s.train_domain, DataKind::Train));
        match s.scenario {
            Scenario::Id | Scenario::Ood => needed.insert((s.test_domain(), DataKind::Test)),
            Scenario::Adv => needed.insert((s.test_domain(), DataKind::Adversarial)),
        };
    }
    let mut data = ProtocolData::default();
    let mut inputs = Vec::new();
    for (domain, kind) in needed {
        let (path, format) = locate(root, domain, kind).ok_or_else(|| {
            CliError::Data(format!(
                "no {} {} file under {} (expected {}_{}.jsonl or the original SemEval/ARTS file name)",
                domain,
                kind.as_str(),
                root.display(),
                domain.short(),
                kind.as_str()
            ))
        })?;
        let role = format!("{}-{}", domain.short(), kind.as_str());
        let (ds, dig) = load_dataset(&role, &path, format, DatasetMeta { domain, split: kind.split() })?;
        inputs.push(dig);
        match kind {
            DataKind::Train => {
                let (train, dev) = split_dev(&ds, hyper.dev_size, hyper.dev_seed)?;
                data.train.insert(domain, train);
                data.dev.insert(domain, dev);
            }
            DataKind::Test => {
                data.test.insert(domain, ds);
            }
            DataKind::Adversarial => {
                data.adversarial.insert(domain, ds);
            }
        }
    }
    let all: Vec<&Dataset> = data
        .train
        .values()
        .chain(data.dev.values())
        .chain(data.test.values())
        .chain(data.adversarial.values())
        .collect();
    let (table, emb) = embedding_table(hyper, &all)?;
    inputs.extend(emb);
    Ok(Loaded {
        data,
        table,
        inputs,
        source: root.display().to_string(),
    })
}

fn run_dir(out: &Path, r: &RunRecord<'_>) -> PathBuf {
    out.join("runs")
        .join(format!("{}_{}_{}_seed{}", r.arch, r.mode, r.train_domain.short(), r.seed))
}

pub fn run(args: RobustnessArgs, file: &FileConfig) -> Result<(), CliError> {
    let hyper = args.hyper.resolve(file)?;
    let archs = file.pick(args.arch, "arch")?.map_or(Arch::ALL.to_vec(), |l| l.0);
    let modes = file.pick(args.modes, "modes")?.map_or(BiasMode::ALL.to_vec(), |l| l.0);
    let scenarios = file
        .pick(args.scenario, "scenario")?
        .map_or(vec![Scenario::Id, Scenario::Ood, Scenario::Adv], |l| l.0);
    let domains = file
        .pick(args.train_domain, "train-domain")?
        .map_or(vec![Domain::Laptop, Domain::Restaurant], |l| l.0);
    let seeds = file.pick(args.seeds, "seeds")?.map_or((0..5).collect(), |s| s.0);
    let save_models = file.pick(args.save_models, "save-models")?.unwrap_or(false);
    let synthetic_n = file.pick(args.synthetic, "synthetic")?;

    let mut specs: Vec<ScenarioSpec> = domains
        .iter()
        .flat_map(|&d| scenarios.iter().map(move |&s| ScenarioSpec::new(s, d)))
        .collect();
    specs.sort();
    specs.dedup();

    let loaded = match synthetic_n {
        Some(n) => synthetic(n, &hyper),
        None => {
            let root = file
                .pick(args.data_dir, "data-dir")?
                .or_else(|| std::env::var_os("POSBIAS_DATA_DIR").map(PathBuf::from))
                .ok_or_else(|| CliError::Usage("no dataset directory: pass --data-dir or set POSBIAS_DATA_DIR".into()))?;
            from_files(&root, &specs, &hyper)?
        }
    };

    create_dir(&args.out)?;
    let labels: Vec<String> = specs.iter().map(ScenarioSpec::label).collect();
    let settings = Settings {
        archs: &archs,
        modes: &modes,
        scenarios: &labels,
        data: loaded.source.clone(),
        save_models,
        hyper: &hyper,
    };
    RunManifest::new("robustness", settings, loaded.inputs, seeds.clone())?.write(&args.out.join("manifest.json"))?;
    set_jobs(hyper.jobs);

    let plan = ProtocolPlan {
        archs,
        modes,
        specs,
        seeds,
        template: hyper.train.clone(),
    };
    let failures = Mutex::new(Vec::new());
    let observer = |r: &RunRecord<'_>| {
        let dir = run_dir(&args.out, r);
        let summary = serde_json::json!({
            "arch": r.arch,
            "mode": r.mode,
            "train_domain": r.train_domain,
            "seed": r.seed,
            "best_epoch": r.result.best_epoch,
            "best_dev_accuracy": r.result.best_dev_accuracy,
        });
        let mut res = write_file(&dir.join("train_log.jsonl"), r.log)
            .and_then(|_| write_file(&dir.join("summary.json"), format!("{summary:#}\n").as_bytes()));
        if save_models && res.is_ok() {
            res = r.result.model.save(&dir.join("model.ckpt"), r.seed).map_err(|e| CliError::write(&dir, e));
        }
        log::info!(
            "{} {} {} seed {}: best epoch {} dev accuracy {:.4}",
            r.arch,
            r.mode,
            r.train_domain.short(),
            r.seed,
            r.result.best_epoch,
            r.result.best_dev_accuracy
        );
        if let Err(e) = res {
            failures.lock().expect("not poisoned").push(e);
        }
    };
    let report = run_plan(&plan, &loaded.data, &loaded.table, &observer)?;
    if let Some(e) = failures.into_inner().expect("not poisoned").into_iter().next() {
        return Err(e);
    }
    let md = render_markdown(&report)?;
    let csv = render_csv(&report)?;
    write_file(&args.out.join("report.md"), md.as_bytes())?;
    write_file(&args.out.join("report.csv"), csv.as_bytes())?;
    print!("{md}");
    Ok(())
}
