use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{require_minsup, Entailment, Exclusion, LabelPair};
use crate::dataset::LabelMatrix;
use crate::error::{Error, Result};

/// Co-occurrence counts for an ordered label pair `(a, b)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    /// `a ∧ b`
    pub both: usize,
    /// `¬a ∧ b`
    pub b_only: usize,
    /// `a ∧ ¬b`
    pub a_only: usize,
    /// `¬a ∧ ¬b`
    pub neither: usize,
}

impl ContingencyTable {
    pub fn total(&self) -> usize {
        self.both + self.b_only + self.a_only + self.neither
    }

    /// The table for `(b, a)`.
    pub fn transposed(&self) -> Self {
        ContingencyTable {
            both: self.both,
            b_only: self.a_only,
            a_only: self.b_only,
            neither: self.neither,
        }
    }
}

/// Packed label column for fast pair counting.
struct Bits {
    words: Vec<u64>,
    ones: usize,
}

impl Bits {
    fn from_column(col: &[bool]) -> Self {
        let mut words = vec![0u64; col.len().div_ceil(64)];
        for (i, _) in col.iter().enumerate().filter(|(_, &v)| v) {
            words[i / 64] |= 1 << (i % 64);
        }
        Bits {
            words,
            ones: col.iter().filter(|&&v| v).count(),
        }
    }

    fn table(&self, other: &Bits, n: usize) -> ContingencyTable {
        let both = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(x, y)| (x & y).count_ones() as usize)
            .sum::<usize>();
        let a_only = self.ones - both;
        let b_only = other.ones - both;
        ContingencyTable {
            both,
            b_only,
            a_only,
            neither: n - both - a_only - b_only,
        }
    }
}

pub fn build_contingency(labels: &LabelMatrix, a: &str, b: &str) -> Result<ContingencyTable> {
    let ia = labels.index_of(a).ok_or_else(|| Error::UnknownLabel(a.to_string()))?;
    let ib = labels.index_of(b).ok_or_else(|| Error::UnknownLabel(b.to_string()))?;
    if ia == ib {
        return Err(Error::SameLabel(a.to_string()));
    }
    let n = labels.n_instances();
    Ok(Bits::from_column(labels.column(ia)).table(&Bits::from_column(labels.column(ib)), n))
}

/// Pairwise output of discovery. Exclusions here are pairs only.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairwiseRelationships {
    pub positive_entailments: Vec<Entailment>,
    pub exclusions: Vec<Exclusion>,
    pub coexhaustions: Vec<LabelPair>,
    pub equivalences: Vec<LabelPair>,
}

/// Reads all four relationship types off the pairwise contingency tables.
///
/// * `a → b` when `a_only == 0` and `a` has at least `minsup_entail` positives.
/// * exclusion `{a, b}` when `both == 0` and `a_only + b_only >= minsup_excl`.
/// * coexhaustion when `neither == 0`, unfiltered, support `a_only + b_only`.
/// * equivalence when both off-diagonal cells are zero and `both >= minsup_entail`.
pub fn discover_pairwise(labels: &LabelMatrix, minsup_entail: usize, minsup_excl: usize) -> Result<PairwiseRelationships> {
    require_minsup(minsup_entail, 1)?;
    require_minsup(minsup_excl, 1)?;
    let n = labels.n_instances();
    let q = labels.n_labels();
    let names = labels.names();
    let bits: Vec<Bits> = (0..q).map(|j| Bits::from_column(labels.column(j))).collect();

    let per_label: Vec<PairwiseRelationships> = (0..q)
        .into_par_iter()
        .map(|i| {
            let mut out = PairwiseRelationships::default();
            for j in (i + 1)..q {
                let t = bits[i].table(&bits[j], n);
                let (a, b) = (&names[i], &names[j]);
                if t.a_only == 0 && t.both >= minsup_entail {
                    out.positive_entailments.push(Entailment {
                        antecedent: a.clone(),
                        consequent: b.clone(),
                        support: t.both,
                    });
                }
                if t.b_only == 0 && t.both >= minsup_entail {
                    out.positive_entailments.push(Entailment {
                        antecedent: b.clone(),
                        consequent: a.clone(),
                        support: t.both,
                    });
                }
                if t.both == 0 && t.a_only + t.b_only >= minsup_excl {
                    let mut pair = vec![a.clone(), b.clone()];
                    pair.sort();
                    out.exclusions.push(Exclusion {
                        labels: pair,
                        support: t.a_only + t.b_only,
                    });
                }
                if t.neither == 0 {
                    out.coexhaustions.push(LabelPair::new(a, b, t.a_only + t.b_only));
                }
                if t.a_only == 0 && t.b_only == 0 && t.both >= minsup_entail {
                    out.equivalences.push(LabelPair::new(a, b, t.both));
                }
            }
            out
        })
        .collect();

    let mut all = PairwiseRelationships::default();
    for part in per_label {
        all.positive_entailments.extend(part.positive_entailments);
        all.exclusions.extend(part.exclusions);
        all.coexhaustions.extend(part.coexhaustions);
        all.equivalences.extend(part.equivalences);
    }
    all.positive_entailments.sort();
    all.exclusions.sort();
    all.coexhaustions.sort();
    all.equivalences.sort();
    Ok(all)
}
