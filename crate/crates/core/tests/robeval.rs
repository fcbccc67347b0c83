use posasc::corpus::{Dataset, Domain, Split};
use posasc::models::{Arch, ModelConfig};
use posasc::posbias::BiasMode;
use posasc::robeval::{
    accuracy, delta, format_delta, macro_f1, render_csv, render_markdown, run_plan, run_protocol, Cell,
    Metrics, ProtocolData, ProtocolPlan, RobustnessReport, Scenario, ScenarioSpec, SeedMetrics,
};
use posasc::synthetic::{separable_dataset_with, table_for};
use posasc::trainer::TrainConfig;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// F1 per class as 2·TP / (row + column sums) of the confusion matrix.
fn oracle_macro_f1(pred: &[usize], gold: &[usize]) -> f64 {
    let mut m = [[0u32; 3]; 3];
    for (&p, &g) in pred.iter().zip(gold) {
        m[g][p] += 1;
    }
    (0..3)
        .map(|c| {
            let row: u32 = m[c].iter().sum();
            let col: u32 = (0..3).map(|r| m[r][c]).sum();
            if row + col == 0 {
                0.0
            } else {
                2.0 * m[c][c] as f64 / (row + col) as f64
            }
        })
        .sum::<f64>()
        / 3.0
}

fn digits(mut k: usize) -> [usize; 4] {
    let mut out = [0; 4];
    for d in &mut out {
        *d = k % 3;
        k /= 3;
    }
    out
}

#[test]
fn macro_f1_matches_oracle_exhaustively() {
    let mut cases = 0;
    for p in 0..81 {
        for g in 0..81 {
            let (pred, gold) = (digits(p), digits(g));
            let got = macro_f1(&pred, &gold).unwrap();
            assert!((got - oracle_macro_f1(&pred, &gold)).abs() <= 1e-12, "{pred:?} {gold:?}");
            cases += 1;
        }
    }
    assert_eq!(cases, 6561);
}

#[test]
fn macro_f1_matches_oracle_on_random_lists() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..1000 {
        let n = rng.gen_range(1..60);
        let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        let gold: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        assert!((macro_f1(&pred, &gold).unwrap() - oracle_macro_f1(&pred, &gold)).abs() <= 1e-12);
    }
}

#[test]
fn hand_computed_macro_f1() {
    // gold pos, neu, neg; all predicted pos → pos F1 = 0.5
    let f = macro_f1(&[2, 2, 2], &[2, 1, 0]).unwrap();
    assert!((f - 1.0 / 6.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn metrics_invariant_under_relabeling(
        pairs in prop::collection::vec((0usize..3, 0usize..3), 1..40),
        perm in Just([0usize, 1, 2]).prop_shuffle(),
    ) {
        let (pred, gold): (Vec<usize>, Vec<usize>) = pairs.iter().cloned().unzip();
        let pp: Vec<usize> = pred.iter().map(|&c| perm[c]).collect();
        let pg: Vec<usize> = gold.iter().map(|&c| perm[c]).collect();
        prop_assert_eq!(accuracy(&pred, &gold).unwrap(), accuracy(&pp, &pg).unwrap());
        prop_assert!((macro_f1(&pred, &gold).unwrap() - macro_f1(&pp, &pg).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn accuracy_invariant_under_reordering(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..40).prop_shuffle()) {
        let (pred, gold): (Vec<usize>, Vec<usize>) = pairs.iter().cloned().unzip();
        let mut sorted = pairs.clone();
        sorted.sort();
        let (sp, sg): (Vec<usize>, Vec<usize>) = sorted.into_iter().unzip();
        prop_assert_eq!(accuracy(&pred, &gold).unwrap(), accuracy(&sp, &sg).unwrap());
    }
}

fn cell(arch: Arch, mode: BiasMode, spec: ScenarioSpec, accs: &[f64]) -> Cell {
    Cell {
        arch,
        mode,
        spec,
        per_seed: accs
            .iter()
            .enumerate()
            .map(|(i, &a)| SeedMetrics {
                seed: i as u64,
                metrics: Metrics { accuracy: a, macro_f1: a / 2.0 },
            })
            .collect(),
    }
}

#[test]
fn deltas_are_antisymmetric_and_rendered_with_arrows() {
    let spec = ScenarioSpec::new(Scenario::Ood, Domain::Laptop);
    let a = cell(Arch::Lstm, BiasMode::None, spec, &[0.70, 0.72, 0.71]);
    let b = cell(Arch::Lstm, BiasMode::Weight, spec, &[0.73, 0.72, 0.74]);
    let ab = delta(&b, &a).unwrap();
    let ba = delta(&a, &b).unwrap();
    assert_eq!(ab.accuracy, -ba.accuracy);
    assert_eq!(ab.macro_f1, -ba.macro_f1);
    assert_eq!(format_delta(1.94), "↑1.94");
    assert_eq!(format_delta(-1.17), "↓1.17");

    let mut short = b.clone();
    short.per_seed.pop();
    assert!(delta(&short, &a).is_err());

    let report = RobustnessReport { cells: vec![a, b] };
    let md = render_markdown(&report).unwrap();
    assert!(md.contains("w/ pos-wt"), "{md}");
    assert!(md.contains("↑2.00"), "{md}");
}

#[test]
fn one_cell_one_row_and_csv_cardinality() {
    let spec = ScenarioSpec::new(Scenario::Adv, Domain::Restaurant);
    let report = RobustnessReport { cells: vec![cell(Arch::Ian, BiasMode::None, spec, &[0.5])] };
    let md = render_markdown(&report).unwrap();
    assert_eq!(md.lines().count(), 3);
    assert!(md.lines().nth(2).unwrap().starts_with("| IAN |"));
    assert!(render_markdown(&RobustnessReport::default()).is_err());

    let specs = [ScenarioSpec::new(Scenario::Ood, Domain::Laptop), spec];
    let mut cells = Vec::new();
    for arch in [Arch::Lstm, Arch::Aoa] {
        for mode in BiasMode::ALL {
            for s in specs {
                cells.push(cell(arch, mode, s, &[0.1, 0.2, 0.3, 0.4, 0.5]));
            }
        }
    }
    let csv = render_csv(&RobustnessReport { cells }).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 3 * 2 * 5);
    assert_eq!(csv.lines().next().unwrap(), "model,bias_mode,scenario,seed,accuracy,macro_f1");
    assert!(csv.contains("aoa,pos-dp,adv-rest,4,0.5,0.25"));
}

fn tiny_template() -> TrainConfig {
    TrainConfig {
        batch_size: 1,
        max_epochs: 8,
        model: ModelConfig { hidden: 32, embed_dim: 32, ..ModelConfig::default() },
        ..TrainConfig::default()
    }
}

fn data() -> ProtocolData {
    let mut d = ProtocolData::default();
    for (k, dom) in [Domain::Laptop, Domain::Restaurant].into_iter().enumerate() {
        let s = 10 * k as u64;
        d.train.insert(dom, separable_dataset_with(30, dom, Split::Train, &["battery"], false, s + 1));
        d.dev.insert(dom, separable_dataset_with(9, dom, Split::Dev, &["battery"], false, s + 2));
        d.test.insert(dom, separable_dataset_with(9, dom, Split::Test, &["battery"], false, s + 3));
        d.adversarial.insert(dom, separable_dataset_with(9, dom, Split::Test, &["battery"], true, s + 4));
    }
    d
}

#[test]
fn single_seed_single_correct_instance() {
    let mut d = data();
    let table = table_for(&d.train.values().chain(d.adversarial.values()).collect::<Vec<&Dataset>>(), 32, 0);
    let t = tiny_template();
    let trained = posasc::trainer::train(&d.train[&Domain::Laptop], &d.dev[&Domain::Laptop], &t, &table).unwrap();
    let preds = posasc::trainer::predict(&trained.model, &d.train[&Domain::Laptop].instances).unwrap();
    let (inst, _) = d.train[&Domain::Laptop]
        .instances
        .iter()
        .zip(&preds)
        .find(|(i, p)| p.class == i.label.index())
        .expect("some training instance is fitted");
    let one = Dataset { domain: Domain::Laptop, split: Split::Test, instances: vec![inst.clone()] };
    d.test.insert(Domain::Laptop, one);
    let c = run_protocol(ScenarioSpec::new(Scenario::Id, Domain::Laptop), &t, &[0], &d, &table).unwrap();
    assert_eq!(c.mean().accuracy, 1.0);
    assert_eq!(c.per_seed.len(), 1);
}

#[test]
fn missing_dataset_is_an_error() {
    let mut d = data();
    d.adversarial.clear();
    let table = table_for(&d.train.values().collect::<Vec<&Dataset>>(), 32, 0);
    let r = run_protocol(ScenarioSpec::new(Scenario::Adv, Domain::Laptop), &tiny_template(), &[0], &d, &table);
    assert!(r.is_err());
}

#[test]
fn grid_is_deterministic_and_ordered() {
    let d = data();
    let table = table_for(&d.train.values().chain(d.adversarial.values()).collect::<Vec<&Dataset>>(), 32, 0);
    let mut template = tiny_template();
    template.max_epochs = 2;
    let plan = ProtocolPlan {
        archs: vec![Arch::Lstm],
        modes: vec![BiasMode::None, BiasMode::Weight],
        specs: vec![
            ScenarioSpec::new(Scenario::Ood, Domain::Laptop),
            ScenarioSpec::new(Scenario::Adv, Domain::Restaurant),
        ],
        seeds: vec![0, 1],
        template,
    };
    let runs = std::sync::atomic::AtomicUsize::new(0);
    let a = run_plan(&plan, &d, &table, &|_| {
        runs.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
    })
    .unwrap();
    assert_eq!(runs.into_inner(), 1 * 2 * 2 * 2);
    let b = run_plan(&plan, &d, &table, &|_| {}).unwrap();
    assert_eq!(render_csv(&a).unwrap(), render_csv(&b).unwrap());
    assert_eq!(a.cells.len(), 4);
    assert_eq!(a.cells[0].mode, BiasMode::None);
    assert_eq!(a.cells[1].spec.scenario, Scenario::Adv);
    assert!(a.delta_vs_baseline(&a.cells[2]).is_some());
}
