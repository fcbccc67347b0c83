use posasc::corpus::{Domain, EmbeddingTable, Instance, Polarity};
use posasc::models::{embed_and_bias, Arch, Model, ModelConfig, ModelInput, Refinement};
use posasc::numcore::{cross_entropy, finite_diff_grad, relative_error, Tensor};
use posasc::posbias::BiasMode;
use posasc::synthetic::random_instance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];

fn small_config(arch: Arch, mode: BiasMode) -> ModelConfig {
    ModelConfig {
        arch,
        bias_mode: mode,
        hidden: 6,
        embed_dim: 6,
        memnet_hops: 3,
        keep_aspect: false,
        train_embeddings: false,
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

/// Widens every non-embedding weight so the nonlinearities are exercised.
fn widen(model: &mut Model, rng: &mut ChaCha8Rng) {
    let names: Vec<String> = model
        .store()
        .iter()
        .filter(|p| !p.name.starts_with("embedding"))
        .map(|p| p.name.clone())
        .collect();
    for n in names {
        for x in model.store_mut().get_mut(&n).unwrap().data_mut() {
            *x = rng.gen_range(-0.5..0.5);
        }
    }
}

fn loss(model: &Model, input: &ModelInput, r: &Refinement, gold: usize) -> f64 {
    cross_entropy(&model.forward(input, r).unwrap().logits, gold).unwrap()
}

fn grad_check(arch: Arch, mode: BiasMode, trials: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(arch as u64 * 31 + mode as u64);
    for t in 0..trials {
        let mut model = Model::new(small_config(arch, mode), &table(t as u64), t as u64).unwrap();
        widen(&mut model, &mut rng);
        let inst = random_instance(&WORDS, 7, &mut rng);
        let input = model.input(&inst);
        let r = model.refinement::<ChaCha8Rng>(&input, false, None).unwrap();
        let gold = inst.label.index();
        let (_, _, grads) = model.loss_and_grads(&input, &r, gold).unwrap();
        for (i, p) in model.store().params().iter().enumerate() {
            let Some(g) = &grads[i] else { continue };
            let mut probe = model.clone();
            let name = p.name.clone();
            let fd = finite_diff_grad(
                |x| {
                    probe.store_mut().get_mut(&name).unwrap().data_mut().copy_from_slice(x);
                    loss(&probe, &input, &r, gold)
                },
                p.value.data(),
                1e-5,
            );
            let err = relative_error(g.data(), &fd);
            assert!(err <= 1e-5, "{arch} {mode} trial {t} `{name}`: relative error {err:e}");
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    for arch in Arch::ALL {
        for mode in [BiasMode::None, BiasMode::Weight] {
            grad_check(arch, mode, 2);
        }
    }
}

#[test]
fn logits_are_three_and_records_are_distributions() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for arch in Arch::ALL {
        let model = Model::new(small_config(arch, BiasMode::Weight), &table(1), 3).unwrap();
        for _ in 0..20 {
            let inst = random_instance(&WORDS, 7, &mut rng);
            let tr = model.forward_instance(&inst).unwrap();
            assert_eq!(tr.logits.len(), 3);
            assert!(tr.logits.iter().all(|x| x.is_finite()));
            for rec in &tr.attention {
                assert!(rec.weights.iter().all(|&w| w >= 0.0));
                assert!((rec.weights.iter().sum::<f64>() - 1.0).abs() < 1e-10, "{arch} {}", rec.name);
            }
        }
    }
}

#[test]
fn record_names_per_arch() {
    let inst = Instance::from_words("x", Domain::Laptop, &["a", "b", "c", "d"], 1, 2, Polarity::Neutral).unwrap();
    let names = |arch| -> Vec<String> {
        let m = Model::new(small_config(arch, BiasMode::None), &table(2), 0).unwrap();
        m.forward_instance(&inst).unwrap().attention.into_iter().map(|r| r.name).collect()
    };
    assert!(names(Arch::Lstm).is_empty());
    assert_eq!(names(Arch::LstmAttn), ["attention"]);
    assert_eq!(names(Arch::Ian), ["context", "aspect"]);
    assert_eq!(names(Arch::MemNet), ["hop1", "hop2", "hop3"]);
    assert_eq!(names(Arch::Aoa), ["aoa"]);
}

#[test]
fn single_token_and_single_aspect_cases() {
    let one = Instance::from_words("x", Domain::Laptop, &["a"], 0, 1, Polarity::Neutral).unwrap();
    for arch in [Arch::LstmAttn, Arch::Aoa] {
        let m = Model::new(small_config(arch, BiasMode::None), &table(2), 0).unwrap();
        assert_eq!(m.forward_instance(&one).unwrap().attention[0].weights, [1.0]);
    }
    let inst = Instance::from_words("x", Domain::Laptop, &["a", "b", "c"], 1, 1, Polarity::Neutral).unwrap();
    let m = Model::new(small_config(Arch::Ian, BiasMode::None), &table(2), 0).unwrap();
    assert_eq!(m.forward_instance(&inst).unwrap().record("aspect").unwrap().weights, [1.0]);
}

#[test]
fn memnet_hop_count_is_configurable() {
    let inst = Instance::from_words("x", Domain::Laptop, &["a", "b", "c"], 1, 1, Polarity::Neutral).unwrap();
    for hops in [1, 2, 5] {
        let mut cfg = small_config(Arch::MemNet, BiasMode::None);
        cfg.memnet_hops = hops;
        let m = Model::new(cfg, &table(2), 0).unwrap();
        assert_eq!(m.forward_instance(&inst).unwrap().attention.len(), hops);
    }
}

#[test]
fn trailing_padding_is_ignored() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for arch in Arch::ALL {
        let model = Model::new(small_config(arch, BiasMode::Weight), &table(4), 1).unwrap();
        let inst = random_instance(&WORDS, 6, &mut rng);
        let input = model.input(&inst);
        let r = model.refinement::<ChaCha8Rng>(&input, false, None).unwrap();
        let mut rows: Vec<Vec<f64>> = (0..input.length).map(|i| input.vectors.row_slice(i).to_vec()).collect();
        rows.push(vec![9.0; 6]);
        rows.push(vec![-3.0; 6]);
        let padded = ModelInput {
            vectors: Tensor::from_rows(&rows).unwrap(),
            length: input.length,
            aspect: input.aspect.clone(),
        };
        assert_eq!(
            model.forward(&input, &r).unwrap().logits,
            model.forward(&padded, &r).unwrap().logits,
            "{arch}"
        );
    }
}

#[test]
fn all_ones_override_matches_no_bias() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for arch in Arch::ALL {
        let biased = Model::new(small_config(arch, BiasMode::Weight), &table(4), 9).unwrap();
        let plain = Model::new(small_config(arch, BiasMode::None), &table(4), 9).unwrap();
        for _ in 0..10 {
            let inst = random_instance(&WORDS, 7, &mut rng);
            let input = biased.input(&inst);
            let ones = Refinement::Scale(vec![1.0; input.length]);
            let a = biased.forward(&input, &ones).unwrap().logits;
            let b = plain.forward_instance(&inst).unwrap().logits;
            assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        }
    }
}

#[test]
fn embed_and_bias_contract() {
    let t = table(3);
    let inst = Instance::from_words("x", Domain::Laptop, &["a", "b", "c", "d", "e"], 2, 1, Polarity::Neutral).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let none = embed_and_bias(&inst, &t, &small_config(Arch::Lstm, BiasMode::None), &mut rng, true).unwrap();
    assert_eq!(none.vectors.row_slice(0), t.lookup("a"));

    let whole = Instance::from_words("x", Domain::Laptop, &["a", "b"], 0, 2, Polarity::Neutral).unwrap();
    let wt = embed_and_bias(&whole, &t, &small_config(Arch::Lstm, BiasMode::Weight), &mut rng, false).unwrap();
    assert_eq!(wt.vectors.row_slice(1), t.lookup("b"));

    let dp = small_config(Arch::Lstm, BiasMode::Dropout);
    let a = embed_and_bias(&inst, &t, &dp, &mut ChaCha8Rng::seed_from_u64(4), true).unwrap();
    let b = embed_and_bias(&inst, &t, &dp, &mut ChaCha8Rng::seed_from_u64(4), true).unwrap();
    assert_eq!(a, b);
    let eval = embed_and_bias(&inst, &t, &dp, &mut rng, false).unwrap();
    let wt = embed_and_bias(&inst, &t, &small_config(Arch::Lstm, BiasMode::Weight), &mut rng, false).unwrap();
    assert_eq!(eval.vectors, wt.vectors);
}

#[test]
fn dropout_training_needs_rng_and_evaluation_is_deterministic() {
    let m = Model::new(small_config(Arch::Lstm, BiasMode::Dropout), &table(1), 0).unwrap();
    let inst = Instance::from_words("x", Domain::Laptop, &["a", "b", "c"], 0, 1, Polarity::Neutral).unwrap();
    let input = m.input(&inst);
    assert!(m.refinement::<ChaCha8Rng>(&input, true, None).is_err());
    assert_eq!(m.forward_instance(&inst).unwrap(), m.forward_instance(&inst).unwrap());
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for arch in Arch::ALL {
        let model = Model::new(small_config(arch, BiasMode::Weight), &table(6), 5).unwrap();
        let path = dir.path().join(format!("{arch}.ckpt"));
        model.save(&path, 5).unwrap();
        let (back, seed) = Model::load(&path).unwrap();
        assert_eq!(seed, 5);
        assert_eq!(back.config(), model.config());
        let inst = random_instance(&WORDS, 7, &mut rng);
        assert_eq!(back.forward_instance(&inst).unwrap(), model.forward_instance(&inst).unwrap());
        let other = small_config(arch, BiasMode::None);
        assert!(Model::load_expecting(&path, &other).is_err());
    }
}

#[test]
fn tampered_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let model = Model::new(small_config(Arch::Ian, BiasMode::None), &table(6), 5).unwrap();
    let path = dir.path().join("m.ckpt");
    model.save(&path, 0).unwrap();
    let meta_path = Model::metadata_path(&path);
    let meta = std::fs::read_to_string(&meta_path).unwrap().replace("\"ian\"", "\"aoa\"");
    std::fs::write(&meta_path, meta).unwrap();
    assert!(Model::load(&path).is_err());
}
