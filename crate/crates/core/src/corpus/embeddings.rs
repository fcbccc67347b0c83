use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::CorpusError;
use crate::numcore::Tensor;

/// Word vectors restricted to a vocabulary, with a shared fallback vector for
/// unknown surfaces.
///
/// Rows `0..len()` hold the known words in vocabulary order; the final row is
/// the OOV vector, so [`EmbeddingTable::index_of`] is total.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    words: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Tensor,
}

/// How much of the requested vocabulary the vector file covered.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Coverage {
    pub found: usize,
    pub missing: usize,
    pub skipped_lines: usize,
}

fn oov_row(dimension: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dimension).map(|_| rng.gen_range(-0.1..=0.1)).collect()
}

impl EmbeddingTable {
    /// `rows` are `(word, vector)`; the OOV vector is appended after them.
    pub fn from_rows(
        rows: Vec<(String, Vec<f64>)>,
        oov: Vec<f64>,
    ) -> Result<Self, CorpusError> {
        let dimension = oov.len();
        if dimension == 0 {
            return Err(CorpusError::Embeddings("dimension must be positive".into()));
        }
        let mut words = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity((rows.len() + 1) * dimension);
        for (w, v) in rows {
            if v.len() != dimension {
                return Err(CorpusError::Embeddings(format!(
                    "`{w}` has {} values, expected {dimension}",
                    v.len()
                )));
            }
            words.push(w);
            data.extend(v);
        }
        data.extend(oov);
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let matrix = Tensor::from_vec(words.len() + 1, dimension, data)
            .map_err(|e| CorpusError::Embeddings(e.to_string()))?;
        Ok(Self {
            words,
            index,
            matrix,
        })
    }

    /// Uniform `[-0.1, 0.1]` vectors for every word, for runs without a
    /// pre-trained file.
    pub fn random(vocabulary: &BTreeSet<String>, dimension: usize, seed: u64) -> Result<Self, CorpusError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
        let rows = vocabulary
            .iter()
            .map(|w| {
                let v = (0..dimension).map(|_| rng.gen_range(-0.1..=0.1)).collect();
                (w.clone(), v)
            })
            .collect();
        Self::from_rows(rows, oov_row(dimension, seed))
    }

    /// Rebuilds a table from its vocabulary and the full matrix (OOV row last).
    pub fn from_matrix(words: Vec<String>, matrix: Tensor) -> Result<Self, CorpusError> {
        if matrix.rows() != words.len() + 1 {
            return Err(CorpusError::Embeddings(format!(
                "{} words need {} rows, matrix has {}",
                words.len(),
                words.len() + 1,
                matrix.rows()
            )));
        }
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(Self {
            words,
            index,
            matrix,
        })
    }

    pub fn dimension(&self) -> usize {
        self.matrix.cols()
    }

    /// Number of known words (the OOV row excluded).
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.index.contains_key(surface)
    }

    pub fn oov_index(&self) -> usize {
        self.words.len()
    }

    pub fn index_of(&self, surface: &str) -> usize {
        self.index.get(surface).copied().unwrap_or(self.words.len())
    }

    pub fn lookup(&self, surface: &str) -> &[f64] {
        self.matrix.row_slice(self.index_of(surface))
    }

    pub fn oov_vector(&self) -> &[f64] {
        self.matrix.row_slice(self.oov_index())
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }
}

/// Reads a GloVe-style text file (`word v1 … vd` per line), keeping only
/// words in `vocabulary`. Lines with the wrong number of values are skipped
/// with a warning; the OOV vector is drawn from `seed`.
pub fn load_embeddings(
    path: &Path,
    vocabulary: &BTreeSet<String>,
    dimension: usize,
    seed: u64,
) -> Result<(EmbeddingTable, Coverage), CorpusError> {
    if dimension == 0 {
        return Err(CorpusError::Embeddings("dimension must be positive".into()));
    }
    let reader = BufReader::new(File::open(path)?);
    let mut found: HashMap<String, Vec<f64>> = HashMap::new();
    let mut coverage = Coverage::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let Some(word) = fields.next() else { continue };
        if !vocabulary.contains(word) || found.contains_key(word) {
            continue;
        }
        let values: Result<Vec<f64>, _> = fields.map(str::parse::<f64>).collect();
        match values {
            Ok(v) if v.len() == dimension => {
                found.insert(word.to_string(), v);
            }
            Ok(v) => {
                coverage.skipped_lines += 1;
                log::warn!(
                    "{}:{}: `{word}` has {} values, expected {dimension}; skipped",
                    path.display(),
                    lineno + 1,
                    v.len()
                );
            }
            Err(e) => {
                coverage.skipped_lines += 1;
                log::warn!("{}:{}: {e}; skipped", path.display(), lineno + 1);
            }
        }
    }
    if found.is_empty() {
        return Err(CorpusError::Embeddings(format!(
            "no vocabulary word found with {dimension} values in {}",
            path.display()
        )));
    }
    // vocabulary order keeps row indices independent of file order
    let rows: Vec<(String, Vec<f64>)> = vocabulary
        .iter()
        .filter_map(|w| found.remove(w).map(|v| (w.clone(), v)))
        .collect();
    coverage.found = rows.len();
    coverage.missing = vocabulary.len() - rows.len();
    let table = EmbeddingTable::from_rows(rows, oov_row(dimension, seed))?;
    Ok((table, coverage))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn vocab(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_a_300d_line() {
        let values: Vec<String> = (0..300).map(|i| format!("{}", i as f64 / 1000.0)).collect();
        let f = file(&format!("good {}\nbad {}\n", values.join(" "), values.join(" ")));
        let (t, cov) = load_embeddings(f.path(), &vocab(&["good"]), 300, 0).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.dimension(), 300);
        assert_eq!(t.lookup("good")[1], 0.001);
        assert_eq!(cov, Coverage { found: 1, missing: 0, skipped_lines: 0 });
    }

    #[test]
    fn absent_word_falls_back_to_oov() {
        let f = file("good 0.5 0.5\n");
        let (t, cov) = load_embeddings(f.path(), &vocab(&["good", "zzz"]), 2, 9).unwrap();
        assert_eq!(t.lookup("zzz"), t.oov_vector());
        assert!(t.oov_vector().iter().all(|v| v.abs() <= 0.1));
        assert_eq!(cov.missing, 1);
        let (t2, _) = load_embeddings(f.path(), &vocab(&["good", "zzz"]), 2, 9).unwrap();
        assert_eq!(t.oov_vector(), t2.oov_vector());
    }

    #[test]
    fn wrong_dimension_everywhere_is_an_error() {
        let f = file("good 0.1 0.2 0.3\nbad 0.1\n");
        assert!(load_embeddings(f.path(), &vocab(&["good", "bad"]), 2, 0).is_err());
    }

    #[test]
    fn bad_lines_are_skipped() {
        let f = file("good 0.1\ngood 0.1 0.2\nbad x y\n");
        let (t, cov) = load_embeddings(f.path(), &vocab(&["good", "bad"]), 2, 0).unwrap();
        assert_eq!(t.lookup("good"), &[0.1, 0.2]);
        assert_eq!(cov.skipped_lines, 2);
    }
}
