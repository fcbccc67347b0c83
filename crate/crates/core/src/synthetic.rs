//! Small generated corpora for tests, demos and smoke runs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{vocabulary, Dataset, DatasetMeta, Domain, EmbeddingTable, Instance, Polarity, Split};

const ASPECTS: [&str; 6] = ["battery", "screen", "keyboard", "food", "service", "staff"];
const FILLER: [&str; 4] = ["the", "a", "is", "was"];

fn opinion(label: Polarity) -> &'static str {
    match label {
        Polarity::Positive => "great",
        Polarity::Neutral => "okay",
        Polarity::Negative => "awful",
    }
}

/// One sentence whose label is fixed by the opinion word right after the
/// aspect. With `distractor`, a contrary opinion word is placed at the far
/// end of the sentence.
pub fn separable_instance<R: Rng + ?Sized>(
    id: &str,
    domain: Domain,
    label: Polarity,
    aspects: &[&str],
    distractor: bool,
    rng: &mut R,
) -> Instance {
    let left = rng.gen_range(0..4);
    let right = rng.gen_range(1..4);
    let mut words: Vec<&str> = (0..left).map(|_| *FILLER.choose(rng).unwrap()).collect();
    let aspect_start = words.len();
    words.push(aspects.choose(rng).expect("at least one aspect term"));
    words.push(opinion(label));
    words.extend((0..right).map(|_| *FILLER.choose(rng).unwrap()));
    if distractor {
        let other = Polarity::ALL[(label.index() + 1 + rng.gen_range(0..2)) % 3];
        words.push(opinion(other));
    }
    Instance::from_words(id, domain, &words, aspect_start, 1, label).expect("well-formed")
}

/// `n` separable instances with labels cycling through the three classes.
pub fn separable_dataset(n: usize, domain: Domain, split: Split, distractor: bool, seed: u64) -> Dataset {
    separable_dataset_with(n, domain, split, &ASPECTS, distractor, seed)
}

/// [`separable_dataset`] drawing aspect terms from `aspects`.
pub fn separable_dataset_with(
    n: usize,
    domain: Domain,
    split: Split,
    aspects: &[&str],
    distractor: bool,
    seed: u64,
) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = (0..n)
        .map(|i| {
            let label = Polarity::ALL[i % 3];
            separable_instance(&format!("syn{seed}-{i}"), domain, label, aspects, distractor, &mut rng)
        })
        .collect();
    Dataset::new(DatasetMeta { domain, split }, instances).expect("non-empty")
}

/// Uniform `[-1, 1]` vectors for every word of `datasets`, roughly the scale
/// of pre-trained word vectors.
pub fn table_for(datasets: &[&Dataset], dimension: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..dimension).map(|_| rng.gen_range(-1.0..=1.0)).collect() };
    let rows = vocabulary(datasets.iter().copied())
        .into_iter()
        .map(|w| {
            let v = draw(&mut rng);
            (w, v)
        })
        .collect();
    let oov = draw(&mut rng);
    EmbeddingTable::from_rows(rows, oov).expect("positive dimension")
}

/// A random instance over `words` with `1 ≤ n ≤ max_len` tokens and a random
/// aspect span.
pub fn random_instance<R: Rng + ?Sized>(words: &[&str], max_len: usize, rng: &mut R) -> Instance {
    let n = rng.gen_range(1..=max_len);
    let toks: Vec<&str> = (0..n).map(|_| *words.choose(rng).unwrap()).collect();
    let m = rng.gen_range(1..=n.min(3));
    let start = rng.gen_range(0..=n - m);
    let label = Polarity::ALL[rng.gen_range(0..3)];
    Instance::from_words("rand", Domain::Laptop, &toks, start, m, label).expect("well-formed")
}
