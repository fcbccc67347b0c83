use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EvalError, Metrics};
use crate::corpus::{Dataset, Domain, EmbeddingTable};
use crate::models::Arch;
use crate::posbias::BiasMode;
use crate::trainer::{evaluate_model, train_with_log, TrainConfig, TrainError, TrainResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// Tested on the training domain's own test split.
    Id,
    /// Tested on the other domain.
    Ood,
    /// Tested on the adversarial counterpart of the training domain.
    Adv,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Id, Scenario::Ood, Scenario::Adv];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Id => "id",
            Scenario::Ood => "ood",
            Scenario::Adv => "adv",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Scenario::Id => "I.D.",
            Scenario::Ood => "O.O.D.",
            Scenario::Adv => "Adv.",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('.', "").as_str() {
            "id" => Ok(Scenario::Id),
            "ood" => Ok(Scenario::Ood),
            "adv" => Ok(Scenario::Adv),
            other => Err(format!("unknown scenario `{other}` (id, ood, adv)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub train_domain: Domain,
    pub scenario: Scenario,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, train_domain: Domain) -> Self {
        Self {
            train_domain,
            scenario,
        }
    }

    pub fn test_domain(&self) -> Domain {
        match self.scenario {
            Scenario::Ood => self.train_domain.other(),
            _ => self.train_domain,
        }
    }

    /// `ood-lap` style label used in CSV output.
    pub fn label(&self) -> String {
        format!("{}-{}", self.scenario, self.train_domain.short())
    }
}

/// Datasets keyed by domain. `adversarial` holds the ARTS test sets.
#[derive(Clone, Debug, Default)]
pub struct ProtocolData {
    pub train: BTreeMap<Domain, Dataset>,
    pub dev: BTreeMap<Domain, Dataset>,
    pub test: BTreeMap<Domain, Dataset>,
    pub adversarial: BTreeMap<Domain, Dataset>,
}

fn need<'a>(map: &'a BTreeMap<Domain, Dataset>, d: Domain, what: &str) -> Result<&'a Dataset, ProtocolError> {
    map.get(&d)
        .ok_or_else(|| ProtocolError::MissingDataset(format!("{what} set for {d}")))
}

impl ProtocolData {
    pub fn test_set(&self, spec: &ScenarioSpec) -> Result<&Dataset, ProtocolError> {
        match spec.scenario {
            Scenario::Adv => need(&self.adversarial, spec.test_domain(), "adversarial test"),
            _ => need(&self.test, spec.test_domain(), "test"),
        }
    }

    pub fn train_set(&self, d: Domain) -> Result<&Dataset, ProtocolError> {
        need(&self.train, d, "training")
    }

    pub fn dev_set(&self, d: Domain) -> Result<&Dataset, ProtocolError> {
        need(&self.dev, d, "development")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("missing dataset: {0}")]
    MissingDataset(String),
    #[error("{arch} {mode} seed {seed}: {source}")]
    Train {
        arch: Arch,
        mode: BiasMode,
        seed: u64,
        #[source]
        source: TrainError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("cannot compare cells run on different seeds")]
    SeedMismatch,
    #[error("empty report")]
    Empty,
    #[error("rendering report: {0}")]
    Render(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub metrics: Metrics,
}

/// One (model, bias mode, scenario) entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub arch: Arch,
    pub mode: BiasMode,
    pub spec: ScenarioSpec,
    pub per_seed: Vec<SeedMetrics>,
}

impl Cell {
    /// Arithmetic mean of the per-seed metrics.
    pub fn mean(&self) -> Metrics {
        let n = self.per_seed.len().max(1) as f64;
        Metrics {
            accuracy: self.per_seed.iter().map(|s| s.metrics.accuracy).sum::<f64>() / n,
            macro_f1: self.per_seed.iter().map(|s| s.metrics.macro_f1).sum::<f64>() / n,
        }
    }

    fn seeds(&self) -> Vec<u64> {
        self.per_seed.iter().map(|s| s.seed).collect()
    }
}

/// `a`'s mean minus `b`'s mean; both must cover the same seeds.
pub fn delta(a: &Cell, b: &Cell) -> Result<Metrics, ProtocolError> {
    if a.seeds() != b.seeds() {
        return Err(ProtocolError::SeedMismatch);
    }
    let (ma, mb) = (a.mean(), b.mean());
    Ok(Metrics {
        accuracy: ma.accuracy - mb.accuracy,
        macro_f1: ma.macro_f1 - mb.macro_f1,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub cells: Vec<Cell>,
}

impl RobustnessReport {
    pub fn cell(&self, arch: Arch, mode: BiasMode, spec: ScenarioSpec) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.arch == arch && c.mode == mode && c.spec == spec)
    }

    /// Difference from the `none` baseline of the same model and scenario.
    pub fn delta_vs_baseline(&self, cell: &Cell) -> Option<Metrics> {
        if cell.mode == BiasMode::None {
            return None;
        }
        let base = self.cell(cell.arch, BiasMode::None, cell.spec)?;
        delta(cell, base).ok()
    }
}

/// One training run inside the protocol, handed to the observer callback.
pub struct RunRecord<'a> {
    pub arch: Arch,
    pub mode: BiasMode,
    pub train_domain: Domain,
    pub seed: u64,
    pub result: &'a TrainResult,
    pub log: &'a [u8],
}

/// Which models, modes, scenarios and seeds to run.
#[derive(Clone, Debug)]
pub struct ProtocolPlan {
    pub archs: Vec<Arch>,
    pub modes: Vec<BiasMode>,
    pub specs: Vec<ScenarioSpec>,
    pub seeds: Vec<u64>,
    /// Model fields other than `arch`/`bias_mode`, and the optimizer settings.
    pub template: TrainConfig,
}

/// Runs a single scenario: trains one model per seed on the in-domain
/// training split, selects on the in-domain dev split, tests on the
/// scenario's test set.
pub fn run_protocol(
    spec: ScenarioSpec,
    template: &TrainConfig,
    seeds: &[u64],
    data: &ProtocolData,
    table: &EmbeddingTable,
) -> Result<Cell, ProtocolError> {
    let plan = ProtocolPlan {
        archs: vec![template.model.arch],
        modes: vec![template.model.bias_mode],
        specs: vec![spec],
        seeds: seeds.to_vec(),
        template: template.clone(),
    };
    let report = run_plan(&plan, data, table, &|_| {})?;
    report.cells.into_iter().next().ok_or(ProtocolError::Empty)
}

/// Runs the whole grid. Each (model, mode, training domain, seed) is trained
/// once and scored on every requested scenario for that domain. Runs proceed
/// in parallel; cells come back in plan order.
pub fn run_plan(
    plan: &ProtocolPlan,
    data: &ProtocolData,
    table: &EmbeddingTable,
    observer: &(dyn Fn(&RunRecord<'_>) + Sync),
) -> Result<RobustnessReport, ProtocolError> {
    let mut domains: Vec<Domain> = plan.specs.iter().map(|s| s.train_domain).collect();
    domains.sort();
    domains.dedup();
    for s in &plan.specs {
        data.test_set(s)?;
    }
    for &d in &domains {
        data.train_set(d)?;
        data.dev_set(d)?;
    }

    let mut jobs = Vec::new();
    for &arch in &plan.archs {
        for &mode in &plan.modes {
            for &d in &domains {
                for &seed in &plan.seeds {
                    jobs.push((arch, mode, d, seed));
                }
            }
        }
    }

    type JobOut = Vec<(ScenarioSpec, Metrics)>;
    let results: Vec<Result<JobOut, ProtocolError>> = jobs
        .par_iter()
        .map(|&(arch, mode, d, seed)| {
            let mut cfg = plan.template.clone();
            cfg.model.arch = arch;
            cfg.model.bias_mode = mode;
            cfg.seed = seed;
            let wrap = |source| ProtocolError::Train {
                arch,
                mode,
                seed,
                source,
            };
            let mut log = Vec::new();
            let result = train_with_log(data.train_set(d)?, data.dev_set(d)?, &cfg, table, Some(&mut log))
                .map_err(wrap)?;
            observer(&RunRecord {
                arch,
                mode,
                train_domain: d,
                seed,
                result: &result,
                log: &log,
            });
            plan.specs
                .iter()
                .filter(|s| s.train_domain == d)
                .map(|s| {
                    let m = evaluate_model(&result.model, data.test_set(s)?).map_err(wrap)?;
                    Ok((*s, m))
                })
                .collect()
        })
        .collect();

    let mut by_key: BTreeMap<(Arch, BiasMode, ScenarioSpec), Vec<SeedMetrics>> = BTreeMap::new();
    for (&(arch, mode, _, seed), r) in jobs.iter().zip(results) {
        for (spec, metrics) in r? {
            by_key
                .entry((arch, mode, spec))
                .or_default()
                .push(SeedMetrics { seed, metrics });
        }
    }
    let mut cells = Vec::new();
    for &arch in &plan.archs {
        for &mode in &plan.modes {
            for &spec in &plan.specs {
                if let Some(per_seed) = by_key.remove(&(arch, mode, spec)) {
                    cells.push(Cell {
                        arch,
                        mode,
                        spec,
                        per_seed,
                    });
                }
            }
        }
    }
    Ok(RobustnessReport { cells })
}
