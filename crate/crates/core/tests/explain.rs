use posasc::corpus::{Domain, EmbeddingTable, Instance, Polarity, Token};
use posasc::explain::{
    attention_scores, gradient_norms, heatmap_html, heatmap_svg, kde_svg, normalize_max, render_heatmap, render_kde,
    saliency, saliency_from_checkpoint, ExplainError, KdeSeries, LogitGradient, ScoreKind, TokenScores,
};
use posasc::models::{Arch, AttentionRecord, ForwardTrace, Model, ModelConfig};
use posasc::numcore::{finite_diff_grad, relative_error, Tensor};
use posasc::posbias::BiasMode;
use posasc::synthetic::random_instance;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];

fn config(arch: Arch, mode: BiasMode) -> ModelConfig {
    ModelConfig {
        hidden: 6,
        embed_dim: 6,
        ..ModelConfig::new(arch, mode)
    }
}

fn table(seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = WORDS
        .iter()
        .map(|w| (w.to_string(), (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect();
    EmbeddingTable::from_rows(rows, vec![0.05; 6]).unwrap()
}

fn model(arch: Arch, mode: BiasMode, seed: u64) -> Model {
    let mut m = Model::new(config(arch, mode), &table(seed), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let names: Vec<String> = m
        .store()
        .iter()
        .filter(|p| !p.name.starts_with("embedding"))
        .map(|p| p.name.clone())
        .collect();
    for n in names {
        for x in m.store_mut().get_mut(&n).unwrap().data_mut() {
            *x = rng.gen_range(-0.5..0.5);
        }
    }
    m
}

fn sentence(words: &[&str], aspect: std::ops::Range<usize>) -> Instance {
    let mut at = 0;
    let tokens = words
        .iter()
        .map(|w| {
            let t = Token { surface: w.to_string(), char_start: at, char_end: at + w.len() };
            at += w.len() + 1;
            t
        })
        .collect();
    Instance::new("s", Domain::Laptop, tokens, aspect.start, aspect.len(), Polarity::Positive).unwrap()
}

/// logit_c = w_c · mean(e)
struct MeanLinear {
    table: EmbeddingTable,
    w: [[f64; 6]; 3],
}

impl LogitGradient for MeanLinear {
    fn logits(&self, inst: &Instance) -> Result<Vec<f64>, ExplainError> {
        let n = inst.tokens.len() as f64;
        let mut mean = [0.0; 6];
        for s in inst.surfaces() {
            for (m, v) in mean.iter_mut().zip(self.table.lookup(s)) {
                *m += v / n;
            }
        }
        Ok(self.w.iter().map(|w| w.iter().zip(&mean).map(|(a, b)| a * b).sum()).collect())
    }

    fn logit_gradient(&self, inst: &Instance, class: usize) -> Result<Tensor, ExplainError> {
        let n = inst.tokens.len();
        let row: Vec<f64> = self.w[class].iter().map(|w| w / n as f64).collect();
        Ok(Tensor::from_rows(&vec![row; n]).unwrap())
    }
}

#[test]
fn mean_model_scores_every_token_equally() {
    let m = MeanLinear {
        table: table(1),
        w: [[0.3, -0.2, 0.1, 0.0, 0.5, 0.2], [0.1; 6], [-0.4, 0.2, 0.0, 0.3, 0.1, 0.0]],
    };
    let s = saliency(&m, &sentence(&["a", "b", "c", "d", "e"], 1..2)).unwrap();
    assert_eq!(s.kind, ScoreKind::Saliency);
    assert_eq!(s.scores, vec![1.0; 5]);
}

#[test]
fn maximum_is_exactly_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for arch in Arch::ALL {
        let m = model(arch, BiasMode::Weight, 2);
        for _ in 0..5 {
            let s = saliency(&m, &random_instance(&WORDS, 7, &mut rng)).unwrap();
            assert_eq!(s.scores.iter().cloned().fold(0.0, f64::max), 1.0, "{arch}");
            assert!(s.scores.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }
}

#[test]
fn lstm_saliency_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for mode in BiasMode::ALL {
        for t in 0..5 {
            let m = model(Arch::Lstm, mode, t);
            let inst = random_instance(&WORDS, 7, &mut rng);
            let input = m.input(&inst);
            let r = m.refinement::<ChaCha8Rng>(&input, false, None).unwrap();
            let (class, norms) = gradient_norms(&m, &inst).unwrap();
            let analytic = m.logit_gradient(&inst, class).unwrap();

            let mut probe = input.clone();
            let fd = finite_diff_grad(
                |x| {
                    probe.vectors.data_mut().copy_from_slice(x);
                    m.forward(&probe, &r).unwrap().logits[class]
                },
                input.vectors.data(),
                1e-5,
            );
            assert!(relative_error(analytic.data(), &fd) <= 1e-4, "{mode} trial {t}");

            let d = input.vectors.cols();
            let fd_norms: Vec<f64> = fd.chunks(d).map(|row| row.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
            assert!(relative_error(&norms, &fd_norms) <= 1e-4);
            let s = saliency(&m, &inst).unwrap();
            assert!(relative_error(&s.scores, &normalize_max(&fd_norms)) <= 1e-4);
        }
    }
}

#[test]
fn shifting_all_logits_leaves_saliency_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for arch in Arch::ALL {
        let m = model(arch, BiasMode::Weight, 3);
        let bias = m
            .store()
            .iter()
            .find(|p| p.name.ends_with("classifier.bias"))
            .map(|p| p.name.clone())
            .unwrap();
        let mut shifted = m.clone();
        for x in shifted.store_mut().get_mut(&bias).unwrap().data_mut() {
            *x += 2.5;
        }
        for _ in 0..3 {
            let inst = random_instance(&WORDS, 7, &mut rng);
            let a = saliency(&m, &inst).unwrap();
            let b = saliency(&shifted, &inst).unwrap();
            assert!(relative_error(&a.scores, &b.scores) <= 1e-12, "{arch}");
        }
    }
}

#[test]
fn checkpoint_saliency_equals_in_memory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let m = model(Arch::Ian, BiasMode::Dropout, 5);
    m.save(&path, 5).unwrap();
    let inst = sentence(&["a", "b", "c", "d"], 1..3);
    let from_disk = saliency_from_checkpoint(&path, m.config(), &inst).unwrap();
    assert_eq!(from_disk, saliency(&m, &inst).unwrap());
    assert!(saliency_from_checkpoint(&path, &config(Arch::Aoa, BiasMode::Dropout), &inst).is_err());
}

#[test]
fn empty_inputs_are_rejected() {
    let m = model(Arch::Lstm, BiasMode::None, 0);
    let empty = Instance {
        id: "e".into(),
        domain: Domain::Laptop,
        tokens: vec![],
        aspect_start: 0,
        aspect_len: 0,
        label: Polarity::Neutral,
    };
    assert!(matches!(saliency(&m, &empty), Err(ExplainError::Empty)));
    assert!(TokenScores::new(vec![], &[], ScoreKind::Attention, 0..0).is_err());
    assert!(TokenScores::new(vec!["x".into()], &[-1.0], ScoreKind::Attention, 0..0).is_err());
}

fn trace(records: &[(&str, Vec<f64>)]) -> ForwardTrace {
    ForwardTrace {
        logits: vec![0.0; 3],
        attention: records
            .iter()
            .map(|(n, w)| AttentionRecord { name: n.to_string(), weights: w.clone() })
            .collect(),
    }
}

#[test]
fn attention_examples() {
    let four = sentence(&["a", "b", "c", "d"], 2..3);
    let s = attention_scores(&trace(&[("attention", vec![0.25; 4])]), "attention", &four).unwrap();
    assert_eq!(s.scores, vec![1.0; 4]);
    assert_eq!(s.kind, ScoreKind::Attention);

    let one = sentence(&["a"], 0..1);
    let s = attention_scores(&trace(&[("attention", vec![1.0])]), "attention", &one).unwrap();
    assert_eq!(s.scores, vec![1.0]);

    let err = attention_scores(&trace(&[("hop1", vec![0.25; 4])]), "hop4", &four).unwrap_err();
    assert!(err.to_string().contains("hop1"));
    assert!(attention_scores(&trace(&[("x", vec![0.5; 3])]), "x", &four).is_err());
}

#[test]
fn memnet_and_ian_records_are_scorable() {
    let inst = sentence(&["a", "b", "c", "d", "e"], 1..3);
    let memnet = model(Arch::MemNet, BiasMode::None, 1);
    let t = memnet.forward_instance(&inst).unwrap();
    for hop in ["hop1", "hop2", "hop3"] {
        assert_eq!(attention_scores(&t, hop, &inst).unwrap().len(), 5);
    }
    assert!(attention_scores(&t, "hop4", &inst).is_err());

    let ian = model(Arch::Ian, BiasMode::None, 1);
    let t = ian.forward_instance(&inst).unwrap();
    let a = attention_scores(&t, "aspect", &inst).unwrap();
    assert_eq!(a.tokens, vec!["b", "c"]);
    assert_eq!(a.aspect, 0..2);
    assert_eq!(attention_scores(&t, "context", &inst).unwrap().len(), 5);
}

fn scores(tokens: &[&str], raw: &[f64], aspect: std::ops::Range<usize>) -> TokenScores {
    TokenScores::new(tokens.iter().map(|t| t.to_string()).collect(), raw, ScoreKind::Saliency, aspect).unwrap()
}

#[test]
fn heatmap_has_one_cell_per_token() {
    let s = scores(
        &["the", "battery", "<life>", "is", "&", "really", "long", "'ok'"],
        &[0.0, 0.9, 0.4, 0.1, 0.2, 0.3, 0.5, 0.05],
        1..3,
    );
    let svg = heatmap_svg(&s);
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let cells: Vec<_> = doc.descendants().filter(|n| n.attribute("class") == Some("cell")).collect();
    assert_eq!(cells.len(), 8);
    assert_eq!(cells[0].attribute("fill-opacity"), Some("0"));
    assert_eq!(cells[1].attribute("fill-opacity"), Some("1"));
    assert_eq!(doc.descendants().filter(|n| n.attribute("class") == Some("aspect")).count(), 2);
    let texts: Vec<&str> = doc.descendants().filter(|n| n.has_tag_name("text")).filter_map(|n| n.text()).collect();
    assert_eq!(texts[2], "<life>");

    let html = heatmap_html(&s);
    let frag = roxmltree::Document::parse(&html).unwrap();
    let spans: Vec<_> = frag.descendants().filter(|n| n.has_tag_name("span")).collect();
    assert_eq!(spans.len(), 8);
    assert!(spans[0].attribute("style").unwrap().ends_with(", 0)"));
    assert_eq!(frag.descendants().filter(|n| n.has_tag_name("u")).count(), 2);
}

#[test]
fn heatmap_file_format_follows_extension() {
    let dir = tempfile::tempdir().unwrap();
    let s = scores(&["a", "b"], &[1.0, 0.5], 0..1);
    render_heatmap(&s, &dir.path().join("h.svg")).unwrap();
    render_heatmap(&s, &dir.path().join("h.html")).unwrap();
    assert!(std::fs::read_to_string(dir.path().join("h.svg")).unwrap().starts_with("<svg"));
    assert!(std::fs::read_to_string(dir.path().join("h.html")).unwrap().starts_with("<div"));
    assert!(render_heatmap(&s, &dir.path().join("missing/h.svg")).is_err());
}

fn polylines(svg: &str) -> Vec<Vec<String>> {
    let doc = roxmltree::Document::parse(svg).unwrap();
    doc.descendants()
        .filter(|n| n.has_tag_name("polyline"))
        .map(|n| n.attribute("points").unwrap().split(' ').map(str::to_string).collect())
        .collect()
}

#[test]
fn kde_plot_examples() {
    let two = kde_svg(&[KdeSeries::new("x", &[0.0, 1.0], &[0.2, 0.8])]).unwrap();
    let lines = polylines(&two);
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0].len(), 2);

    let grid: Vec<f64> = (0..50).map(|i| i as f64 / 49.0).collect();
    let series: Vec<KdeSeries> = ["Lap14", "Rest14", "Rest15", "Rest16"]
        .iter()
        .enumerate()
        .map(|(k, l)| KdeSeries::new(*l, &grid, &grid.iter().map(|x| (-(x - 0.1 * k as f64).powi(2)).exp()).collect::<Vec<_>>()))
        .collect();
    let svg = kde_svg(&series).unwrap();
    assert_eq!(polylines(&svg).len(), 4);
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let entries: Vec<_> = doc.descendants().filter(|n| n.attribute("class") == Some("legend-entry")).collect();
    assert_eq!(entries.len(), 4);
    assert_eq!(doc.descendants().filter(|n| n.attribute("class").is_some_and(|c| c.starts_with("axis"))).count(), 2);

    assert!(kde_svg(&[KdeSeries::new("u", &[0.0, 2.0, 1.0], &[1.0, 1.0, 1.0])]).is_err());
    assert!(kde_svg(&[KdeSeries::new("one", &[0.0], &[1.0])]).is_err());
    assert!(kde_svg(&[]).is_err());

    let dir = tempfile::tempdir().unwrap();
    render_kde(&series, &dir.path().join("k.svg")).unwrap();
}

proptest! {
    #[test]
    fn normalization_is_idempotent(raw in prop::collection::vec(0.0f64..10.0, 1..20)) {
        let once = normalize_max(&raw);
        prop_assert_eq!(normalize_max(&once), once.clone());
        let t = trace(&[("r", raw.clone())]);
        let words: Vec<String> = (0..raw.len()).map(|i| format!("w{i}")).collect();
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        let inst = sentence(&refs, 0..1);
        let s = attention_scores(&t, "r", &inst).unwrap();
        let again = attention_scores(&trace(&[("r", s.scores.clone())]), "r", &inst).unwrap();
        prop_assert_eq!(s.scores, again.scores);
    }

    #[test]
    fn renders_are_well_formed(
        toks in prop::collection::vec("[a-z<>&'\"]{1,6}", 1..10),
        seed in 0u64..1000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = toks.iter().map(|_| rng.gen_range(0.0..1.0)).collect();
        let s = TokenScores::new(toks.clone(), &raw, ScoreKind::Attention, 0..1).unwrap();
        prop_assert!(roxmltree::Document::parse(&heatmap_svg(&s)).is_ok());
        prop_assert!(roxmltree::Document::parse(&heatmap_html(&s)).is_ok());
        let grid: Vec<f64> = (0..toks.len() + 1).map(|i| i as f64).collect();
        let svg = kde_svg(&[KdeSeries::new(toks.concat(), &grid, &grid)]).unwrap();
        prop_assert!(roxmltree::Document::parse(&svg).is_ok());
    }
}
