use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::CorpusSet;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, SALT_SPLIT};

/// Per-corpus train/test partition. A pure function of the data seed, the
/// corpus sizes and the test fraction, so every strategy sees the same split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSplit {
    train: Vec<Vec<usize>>,
    test: Vec<Vec<usize>>,
}

impl DataSplit {
    pub fn new(set: &CorpusSet, test_fraction: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::validation("test_fraction", "must lie in [0, 1)"));
        }
        let seed = derive_seed(set.data_seed(), SALT_SPLIT);
        let mut train = Vec::with_capacity(set.len());
        let mut test = Vec::with_capacity(set.len());
        for (ci, corpus) in set.corpora().iter().enumerate() {
            let n = corpus.utterances.len();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(ci as u64);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let mut n_test = (n as f64 * test_fraction).round() as usize;
            if test_fraction > 0.0 && n >= 2 {
                n_test = n_test.clamp(1, n - 1);
            }
            let mut te = idx[..n_test].to_vec();
            let mut tr = idx[n_test..].to_vec();
            te.sort_unstable();
            tr.sort_unstable();
            train.push(tr);
            test.push(te);
        }
        Ok(Self { train, test })
    }

    pub fn train(&self, corpus: usize) -> &[usize] {
        &self.train[corpus]
    }

    pub fn test(&self, corpus: usize) -> &[usize] {
        &self.test[corpus]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus_set, FactorialDesign};

    #[test]
    fn partition_is_disjoint_complete_and_seeded() {
        let mut d = FactorialDesign::eight_corpus(2);
        d.corpora = vec![(0, 0, 50), (1, 1, 7)];
        let set = generate_corpus_set(&d.to_spec()).unwrap();
        let s = DataSplit::new(&set, 0.1).unwrap();
        assert_eq!(s, DataSplit::new(&set, 0.1).unwrap());
        assert_eq!(s.test(0).len(), 5);
        assert_eq!(s.test(1).len(), 1);
        for c in 0..2 {
            let mut all: Vec<usize> = s.train(c).iter().chain(s.test(c)).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..set.corpora()[c].utterances.len()).collect::<Vec<_>>());
        }
    }
}
