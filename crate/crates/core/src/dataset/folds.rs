use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MultiLabelDataset;
use crate::error::{Error, Result};

/// Assignment of every instance to one of `fold_count` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    fold_count: usize,
    assignment: Vec<usize>,
}

impl FoldSplit {
    /// Uniform random assignment: instances are shuffled with a seeded RNG
    /// and dealt round-robin, so fold sizes differ by at most one.
    pub fn random(n_instances: usize, fold_count: usize, seed: u64) -> Result<Self> {
        if fold_count < 2 || fold_count > n_instances {
            return Err(Error::FoldCount {
                folds: fold_count,
                instances: n_instances,
            });
        }
        let mut order: Vec<usize> = (0..n_instances).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut assignment = vec![0; n_instances];
        for (pos, &i) in order.iter().enumerate() {
            assignment[i] = pos % fold_count;
        }
        Ok(FoldSplit {
            fold_count,
            assignment,
        })
    }

    /// Wraps an explicit assignment.
    pub fn from_assignment(fold_count: usize, assignment: Vec<usize>) -> Result<Self> {
        if fold_count == 0 || assignment.iter().any(|&f| f >= fold_count) {
            return Err(Error::FoldCount {
                folds: fold_count,
                instances: assignment.len(),
            });
        }
        Ok(FoldSplit {
            fold_count,
            assignment,
        })
    }

    pub fn fold_count(&self) -> usize {
        self.fold_count
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.fold_count];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

pub fn split_folds(dataset: &MultiLabelDataset, fold_count: usize, seed: u64) -> Result<FoldSplit> {
    FoldSplit::random(dataset.n_instances(), fold_count, seed)
}
