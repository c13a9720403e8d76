//! Discovery of deterministic label relationships.
//!
//! Every unordered label pair gets a 2×2 contingency table. Zero cells in
//! that table identify the relationship types:
//!
//! | relationship              | zero cells | support            |
//! |---------------------------|------------|--------------------|
//! | positive entailment a → b | `a_only`   | positives of `a`   |
//! | exclusion {a, b}          | `both`     | positives of a + b |
//! | coexhaustion {a, b}       | `neither`  | `a_only + b_only`  |
//! | equivalence {a, b}        | both off-diagonals | positives of `a` |
//!
//! Pairwise exclusions are then grown level by level into maximal mutually
//! exclusive label sets, and the entailment graph is reduced to its
//! transitive reduction after equivalent labels are merged.

mod contingency;
mod exclusion;
mod reduction;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use self::contingency::{build_contingency, discover_pairwise, ContingencyTable, PairwiseRelationships};
pub use self::exclusion::{escalate_minsup, mine_maximal_exclusions, mine_maximal_exclusions_within, Escalation};
pub use self::reduction::{equivalence_classes, transitive_reduction};

use crate::dataset::LabelMatrix;
use crate::error::{Error, Result};

/// Minimum support used when nothing else is configured.
pub const DEFAULT_MIN_SUPPORT: usize = 2;

/// `antecedent → consequent`: every instance with the antecedent also has
/// the consequent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Entailment {
    pub antecedent: String,
    pub consequent: String,
    pub support: usize,
}

/// A set of labels no two of which occur together. `labels` is sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Exclusion {
    pub labels: Vec<String>,
    pub support: usize,
}

/// A sorted label pair, used for coexhaustion and equivalence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabelPair {
    pub labels: [String; 2],
    pub support: usize,
}

impl LabelPair {
    pub fn new(a: &str, b: &str, support: usize) -> Self {
        let (x, y) = if a <= b { (a, b) } else { (b, a) };
        LabelPair {
            labels: [x.to_string(), y.to_string()],
            support,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Relationship {
    PositiveEntailment(Entailment),
    Exclusion(Exclusion),
    Coexhaustion(LabelPair),
    Equivalence(LabelPair),
}

impl Relationship {
    pub fn support(&self) -> usize {
        match self {
            Relationship::PositiveEntailment(e) => e.support,
            Relationship::Exclusion(e) => e.support,
            Relationship::Coexhaustion(p) | Relationship::Equivalence(p) => p.support,
        }
    }
}

/// Everything discovered on one training split.
///
/// `positive_entailments` lists every discovered entailment.
/// `reduced_entailments` is what the network encodes: equivalent labels are
/// merged into their lexicographically smallest member and edges implied by
/// transitivity are dropped. Exclusions are mined over those representative
/// labels.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationshipSet {
    pub positive_entailments: Vec<Entailment>,
    #[serde(default)]
    pub reduced_entailments: Vec<Entailment>,
    pub exclusions: Vec<Exclusion>,
    pub coexhaustions: Vec<LabelPair>,
    pub equivalences: Vec<LabelPair>,
    pub minsup_entail: usize,
    pub minsup_excl: usize,
}

impl RelationshipSet {
    pub fn iter(&self) -> impl Iterator<Item = Relationship> + '_ {
        let ent = self
            .positive_entailments
            .iter()
            .cloned()
            .map(Relationship::PositiveEntailment);
        let exc = self.exclusions.iter().cloned().map(Relationship::Exclusion);
        let coe = self.coexhaustions.iter().cloned().map(Relationship::Coexhaustion);
        let eqv = self.equivalences.iter().cloned().map(Relationship::Equivalence);
        ent.chain(exc).chain(coe).chain(eqv)
    }

    /// Maps every label that belongs to an equivalence class to the class
    /// representative. Labels outside any class are absent.
    pub fn representatives(&self) -> BTreeMap<String, String> {
        equivalence_classes(&self.equivalences)
    }

    /// Drops the entailment part (both lists).
    pub fn without_entailments(mut self) -> Self {
        self.positive_entailments.clear();
        self.reduced_entailments.clear();
        self
    }

    pub fn without_exclusions(mut self) -> Self {
        self.exclusions.clear();
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut set: RelationshipSet = serde_json::from_str(text)?;
        if set.reduced_entailments.is_empty() && !set.positive_entailments.is_empty() {
            set.reduced_entailments = reduce_with_equivalences(&set.positive_entailments, &set.equivalences)?;
        }
        Ok(set)
    }
}

/// Discovery settings.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryConfig {
    pub minsup_entail: usize,
    pub minsup_excl: usize,
    /// When set, the exclusion support is escalated (doubling from
    /// `minsup_excl`) until mining satisfies both caps.
    pub escalation: Option<EscalationCaps>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscalationCaps {
    pub max_relationships: usize,
    pub max_time: Duration,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            minsup_entail: DEFAULT_MIN_SUPPORT,
            minsup_excl: DEFAULT_MIN_SUPPORT,
            escalation: None,
        }
    }
}

/// Merges equivalent labels, then transitively reduces the entailment graph.
pub fn reduce_with_equivalences(entailments: &[Entailment], equivalences: &[LabelPair]) -> Result<Vec<Entailment>> {
    let reps = equivalence_classes(equivalences);
    let rep = |l: &String| reps.get(l).unwrap_or(l).clone();
    let mut merged: BTreeMap<(String, String), usize> = BTreeMap::new();
    for e in entailments {
        let (a, b) = (rep(&e.antecedent), rep(&e.consequent));
        if a != b {
            let s = merged.entry((a, b)).or_default();
            *s = (*s).max(e.support);
        }
    }
    let merged: Vec<Entailment> = merged
        .into_iter()
        .map(|((antecedent, consequent), support)| Entailment {
            antecedent,
            consequent,
            support,
        })
        .collect();
    transitive_reduction(&merged)
}

/// Full discovery on one label matrix: pairwise relationships, equivalence
/// merging, transitive reduction and maximal exclusion mining.
pub fn discover(labels: &LabelMatrix, config: &DiscoveryConfig) -> Result<RelationshipSet> {
    let pairwise = discover_pairwise(labels, config.minsup_entail, config.minsup_excl)?;
    let reduced = reduce_with_equivalences(&pairwise.positive_entailments, &pairwise.equivalences)?;

    let reps = equivalence_classes(&pairwise.equivalences);
    let merged_away: BTreeSet<&String> = reps.iter().filter(|(l, r)| l != r).map(|(l, _)| l).collect();
    let counts: BTreeMap<String, usize> = labels
        .names()
        .iter()
        .cloned()
        .zip(labels.positive_counts())
        .collect();

    let (minsup_excl, exclusions) = match config.escalation {
        None => {
            let pairs: Vec<Exclusion> = pairwise
                .exclusions
                .iter()
                .filter(|p| !p.labels.iter().any(|l| merged_away.contains(l)))
                .cloned()
                .collect();
            (
                config.minsup_excl,
                mine_maximal_exclusions(&pairs, &counts, config.minsup_excl),
            )
        }
        Some(caps) => {
            let keep: Vec<usize> = (0..labels.n_labels())
                .filter(|&j| !merged_away.contains(&labels.names()[j]))
                .collect();
            let sub = LabelMatrix::from_columns(
                keep.iter().map(|&j| labels.names()[j].clone()).collect(),
                keep.iter().map(|&j| labels.column(j).to_vec()).collect(),
            )?;
            let outcome = escalate_minsup(&sub, config.minsup_excl, caps.max_relationships, caps.max_time)?;
            (outcome.minsup, outcome.exclusions)
        }
    };

    Ok(RelationshipSet {
        positive_entailments: pairwise.positive_entailments,
        reduced_entailments: reduced,
        exclusions,
        coexhaustions: pairwise.coexhaustions,
        equivalences: pairwise.equivalences,
        minsup_entail: config.minsup_entail,
        minsup_excl,
    })
}

pub(crate) fn require_minsup(minsup: usize, min: usize) -> Result<()> {
    if minsup < min {
        Err(Error::MinSupport { min, got: minsup })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::read_csv;

    pub(crate) fn toy() -> LabelMatrix {
        let ds = read_csv(
            include_str!("../../tests/data/toy.csv").as_bytes(),
            &["A", "B", "C", "D", "E", "F"],
            "toy",
        )
        .unwrap();
        ds.labels().clone()
    }

    fn edges(list: &[Entailment]) -> Vec<(&str, &str)> {
        list.iter()
            .map(|e| (e.antecedent.as_str(), e.consequent.as_str()))
            .collect()
    }

    #[test]
    fn toy_discovery() {
        let set = discover(&toy(), &DiscoveryConfig::default()).unwrap();
        assert_eq!(
            edges(&set.positive_entailments),
            vec![("A", "B"), ("A", "C"), ("B", "C"), ("D", "C")]
        );
        assert_eq!(edges(&set.reduced_entailments), vec![("A", "B"), ("B", "C"), ("D", "C")]);
        assert_eq!(set.exclusions.len(), 1);
        assert_eq!(set.exclusions[0].labels, vec!["A", "E", "F"]);
        assert_eq!(set.exclusions[0].support, 9);
        assert!(set.equivalences.is_empty());
    }

    #[test]
    fn equivalent_labels_merge_into_smallest_name() {
        // b and c are identical columns; a implies both.
        let m = LabelMatrix::from_columns(
            vec!["a".into(), "c".into(), "b".into(), "d".into()],
            vec![
                vec![true, true, false, false, false],
                vec![true, true, true, false, false],
                vec![true, true, true, false, false],
                vec![false, false, false, true, true],
            ],
        )
        .unwrap();
        let set = discover(&m, &DiscoveryConfig::default()).unwrap();
        assert_eq!(set.equivalences, vec![LabelPair::new("b", "c", 3)]);
        assert_eq!(edges(&set.reduced_entailments), vec![("a", "b")]);
        assert_eq!(set.representatives().get("c").map(String::as_str), Some("b"));
        // c is merged away, so it appears in no exclusion.
        let ex: Vec<Vec<&str>> = set
            .exclusions
            .iter()
            .map(|e| e.labels.iter().map(String::as_str).collect())
            .collect();
        assert_eq!(ex, vec![vec!["a", "d"], vec!["b", "d"]]);
    }

    #[test]
    fn json_has_the_documented_keys() {
        let set = discover(&toy(), &DiscoveryConfig::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&set.to_json().unwrap()).unwrap();
        for key in [
            "positive_entailments",
            "exclusions",
            "coexhaustions",
            "equivalences",
            "minsup_entail",
            "minsup_excl",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["positive_entailments"][0]["antecedent"], "A");
        assert_eq!(v["exclusions"][0]["labels"], serde_json::json!(["A", "E", "F"]));
        assert_eq!(RelationshipSet::from_json(&set.to_json().unwrap()).unwrap(), set);
    }

    #[test]
    fn reduced_list_rebuilt_when_absent() {
        let set = discover(&toy(), &DiscoveryConfig::default()).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&set.to_json().unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("reduced_entailments");
        let back = RelationshipSet::from_json(&v.to_string()).unwrap();
        assert_eq!(back.reduced_entailments, set.reduced_entailments);
    }

    #[test]
    fn escalation_in_discover_records_chosen_support() {
        let config = DiscoveryConfig {
            escalation: Some(EscalationCaps {
                max_relationships: 10,
                max_time: Duration::from_secs(10),
            }),
            ..DiscoveryConfig::default()
        };
        let set = discover(&toy(), &config).unwrap();
        assert_eq!(set.minsup_excl, 2);
        assert_eq!(set.exclusions.len(), 1);
    }
}
