use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, Dataset, Split};

/// Draws `k` instances uniformly without replacement as a dev set. Both
/// halves keep the original instance order.
pub fn split_dev(train: &Dataset, k: usize, seed: u64) -> Result<(Dataset, Dataset), CorpusError> {
    let n = train.len();
    if k > n {
        return Err(CorpusError::DevTooLarge { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, k) {
        picked[i] = true;
    }
    let (mut rest, mut dev) = (Vec::with_capacity(n - k), Vec::with_capacity(k));
    for (inst, is_dev) in train.instances.iter().zip(picked) {
        if is_dev {
            dev.push(inst.clone());
        } else {
            rest.push(inst.clone());
        }
    }
    let train_out = Dataset {
        domain: train.domain,
        split: train.split,
        instances: rest,
    };
    let dev_out = Dataset {
        domain: train.domain,
        split: Split::Dev,
        instances: dev,
    };
    Ok((train_out, dev_out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DatasetMeta, Domain, Instance, Polarity};
    use proptest::prelude::*;

    fn dataset(n: usize) -> Dataset {
        let instances = (0..n)
            .map(|i| {
                Instance::from_words(i.to_string(), Domain::Laptop, &["a", "b"], 0, 1, Polarity::Positive)
                    .unwrap()
            })
            .collect();
        Dataset::new(
            DatasetMeta {
                domain: Domain::Laptop,
                split: Split::Train,
            },
            instances,
        )
        .unwrap()
    }

    #[test]
    fn sizes_and_determinism() {
        let d = dataset(400);
        let (t, dev) = split_dev(&d, 150, 3).unwrap();
        assert_eq!(dev.len(), 150);
        assert_eq!(t.len(), 250);
        assert_eq!(dev.split, Split::Dev);
        let (t2, dev2) = split_dev(&d, 150, 3).unwrap();
        assert_eq!((t, dev), (t2, dev2));
    }

    #[test]
    fn zero_and_oversized() {
        let d = dataset(5);
        let (t, dev) = split_dev(&d, 0, 1).unwrap();
        assert!(dev.is_empty());
        assert_eq!(t, d);
        assert!(matches!(split_dev(&d, 6, 1), Err(CorpusError::DevTooLarge { .. })));
    }

    proptest! {
        #[test]
        fn halves_partition_the_input(n in 0usize..60, frac in 0.0f64..=1.0, seed in any::<u64>()) {
            let d = dataset(n);
            let k = ((n as f64) * frac) as usize;
            let (t, dev) = split_dev(&d, k, seed).unwrap();
            let mut ids: Vec<usize> = t.instances.iter().chain(&dev.instances)
                .map(|i| i.id.parse().unwrap()).collect();
            ids.sort();
            prop_assert_eq!(ids, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(dev.len(), k);
        }
    }
}
