//! Level-wise growth of pairwise exclusions into maximal mutually exclusive
//! label sets.
//!
//! A set is mutually exclusive iff each of its pairs is, so the sets are
//! exactly the cliques of the graph whose edges are the qualifying pairwise
//! exclusions. Level `k + 1` is produced by joining two level-`k` cliques
//! that share their first `k - 1` members and whose last members are
//! themselves an exclusion pair.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::contingency::discover_pairwise;
use super::{require_minsup, Exclusion};
use crate::dataset::LabelMatrix;
use crate::error::{Error, Result};

struct Graph {
    names: Vec<String>,
    adj: Vec<Vec<u64>>,
}

impl Graph {
    fn new(pairs: &[Exclusion]) -> Self {
        let mut names: Vec<String> = pairs.iter().flat_map(|p| p.labels.iter().cloned()).collect();
        names.sort();
        names.dedup();
        let words = names.len().div_ceil(64);
        let mut adj = vec![vec![0u64; words]; names.len()];
        let idx = |l: &String| names.binary_search(l).unwrap();
        for p in pairs {
            let (a, b) = (idx(&p.labels[0]), idx(&p.labels[1]));
            if a != b {
                adj[a][b / 64] |= 1 << (b % 64);
                adj[b][a / 64] |= 1 << (a % 64);
            }
        }
        Graph { names, adj }
    }

    fn linked(&self, a: usize, b: usize) -> bool {
        self.adj[a][b / 64] >> (b % 64) & 1 == 1
    }

    /// A clique is maximal iff no vertex is adjacent to every member.
    fn is_maximal(&self, clique: &[usize]) -> bool {
        let mut common = self.adj[clique[0]].clone();
        for &m in &clique[1..] {
            for (c, w) in common.iter_mut().zip(&self.adj[m]) {
                *c &= w;
            }
        }
        common.iter().all(|&w| w == 0)
    }
}

/// Mines maximal exclusion sets from qualifying pairwise exclusions.
///
/// `positive_counts` gives each label's number of positive instances; a
/// set's support is the sum over its members. Only sets with support at
/// least `minsup` that have no mutually exclusive superset are returned,
/// sorted by member list.
pub fn mine_maximal_exclusions(
    pairwise: &[Exclusion],
    positive_counts: &BTreeMap<String, usize>,
    minsup: usize,
) -> Vec<Exclusion> {
    mine_maximal_exclusions_within(pairwise, positive_counts, minsup, None)
        .expect("mining without a deadline cannot time out")
}

/// As [`mine_maximal_exclusions`], giving up with [`Error::MiningTimeout`]
/// once `deadline` passes.
pub fn mine_maximal_exclusions_within(
    pairwise: &[Exclusion],
    positive_counts: &BTreeMap<String, usize>,
    minsup: usize,
    deadline: Option<Instant>,
) -> Result<Vec<Exclusion>> {
    let graph = Graph::new(pairwise);
    let count = |i: usize| positive_counts.get(&graph.names[i]).copied().unwrap_or(0);
    let mut found = Vec::new();

    let mut level: Vec<Vec<usize>> = Vec::new();
    for a in 0..graph.names.len() {
        for b in (a + 1)..graph.names.len() {
            if graph.linked(a, b) {
                level.push(vec![a, b]);
            }
        }
    }

    let mut steps = 0usize;
    while !level.is_empty() {
        let mut next = Vec::new();
        let mut start = 0;
        while start < level.len() {
            let k = level[start].len();
            let prefix = &level[start][..k - 1];
            let mut end = start + 1;
            while end < level.len() && &level[end][..k - 1] == prefix {
                end += 1;
            }
            for x in start..end {
                for y in (x + 1)..end {
                    let (a, b) = (level[x][k - 1], level[y][k - 1]);
                    if graph.linked(a, b) {
                        let mut c = level[x].clone();
                        c.push(b);
                        next.push(c);
                    }
                    steps += 1;
                    if steps.is_multiple_of(4096) && deadline.is_some_and(|d| Instant::now() > d) {
                        return Err(Error::MiningTimeout);
                    }
                }
            }
            start = end;
        }
        for clique in &level {
            if graph.is_maximal(clique) {
                let support: usize = clique.iter().map(|&i| count(i)).sum();
                if support >= minsup {
                    found.push(Exclusion {
                        labels: clique.iter().map(|&i| graph.names[i].clone()).collect(),
                        support,
                    });
                }
            }
        }
        level = next;
    }
    found.sort();
    Ok(found)
}

/// Outcome of support escalation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Escalation {
    pub minsup: usize,
    pub exclusions: Vec<Exclusion>,
    /// Each support tried, with the number of sets it produced (`None` when
    /// mining ran out of time).
    pub attempts: Vec<(usize, Option<usize>)>,
}

/// Doubles the exclusion support, starting from `start`, until mining
/// finishes within `max_time` and yields at most `max_relationships` sets.
pub fn escalate_minsup(
    labels: &LabelMatrix,
    start: usize,
    max_relationships: usize,
    max_time: Duration,
) -> Result<Escalation> {
    require_minsup(start, 2)?;
    if max_relationships == 0 {
        return Err(Error::ZeroCap);
    }
    let n = labels.n_instances();
    let all_pairs = discover_pairwise(labels, 1, 1)?.exclusions;
    let counts: BTreeMap<String, usize> = labels
        .names()
        .iter()
        .cloned()
        .zip(labels.positive_counts())
        .collect();

    let mut attempts = Vec::new();
    let mut minsup = start;
    while minsup <= n {
        let pairs: Vec<Exclusion> = all_pairs.iter().filter(|p| p.support >= minsup).cloned().collect();
        let deadline = Instant::now() + max_time;
        match mine_maximal_exclusions_within(&pairs, &counts, minsup, Some(deadline)) {
            Ok(sets) if sets.len() <= max_relationships => {
                attempts.push((minsup, Some(sets.len())));
                return Ok(Escalation {
                    minsup,
                    exclusions: sets,
                    attempts,
                });
            }
            Ok(sets) => attempts.push((minsup, Some(sets.len()))),
            Err(Error::MiningTimeout) => attempts.push((minsup, None)),
            Err(e) => return Err(e),
        }
        log::info!("exclusion support {minsup} rejected, doubling");
        minsup *= 2;
    }
    Err(Error::NoQualifyingSupport { instances: n })
}
