use std::collections::BTreeMap;

use super::{Entailment, LabelPair};
use crate::error::{Error, Result};

/// Union-find over equivalence pairs. Every member of a class maps to the
/// lexicographically smallest member.
pub fn equivalence_classes(equivalences: &[LabelPair]) -> BTreeMap<String, String> {
    let mut parent: BTreeMap<String, String> = BTreeMap::new();
    fn find(parent: &mut BTreeMap<String, String>, x: &str) -> String {
        let p = parent.get(x).cloned().unwrap_or_else(|| x.to_string());
        if p == x {
            return p;
        }
        let root = find(parent, &p);
        parent.insert(x.to_string(), root.clone());
        root
    }
    for pair in equivalences {
        for l in &pair.labels {
            parent.entry(l.clone()).or_insert_with(|| l.clone());
        }
        let a = find(&mut parent, &pair.labels[0]);
        let b = find(&mut parent, &pair.labels[1]);
        if a != b {
            let (small, large) = if a < b { (a, b) } else { (b, a) };
            parent.insert(large, small);
        }
    }
    let keys: Vec<String> = parent.keys().cloned().collect();
    keys.into_iter()
        .map(|k| {
            let r = find(&mut parent, &k);
            (k, r)
        })
        .collect()
}

/// Transitive reduction of an entailment DAG.
///
/// Keeps an edge `u → v` only if `v` is not reachable from another child of
/// `u`. Reachability is unchanged and no remaining edge is implied by the
/// others. Duplicate edges are merged; output is sorted.
pub fn transitive_reduction(entailments: &[Entailment]) -> Result<Vec<Entailment>> {
    let mut names: Vec<&str> = entailments
        .iter()
        .flat_map(|e| [e.antecedent.as_str(), e.consequent.as_str()])
        .collect();
    names.sort_unstable();
    names.dedup();
    let n = names.len();
    let idx = |l: &str| names.binary_search(&l).unwrap();

    let mut edges: BTreeMap<(usize, usize), &Entailment> = BTreeMap::new();
    for e in entailments {
        let (a, b) = (idx(&e.antecedent), idx(&e.consequent));
        if a == b {
            return Err(Error::EntailmentCycle(vec![e.antecedent.clone(), e.consequent.clone()]));
        }
        edges.entry((a, b)).or_insert(e);
    }
    let mut children = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for &(a, b) in edges.keys() {
        children[a].push(b);
        indegree[b] += 1;
    }

    // Kahn's algorithm; anything left over sits on a cycle.
    let mut order = Vec::with_capacity(n);
    let mut ready: Vec<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
    let mut remaining = indegree.clone();
    while let Some(v) = ready.pop() {
        order.push(v);
        for &c in &children[v] {
            remaining[c] -= 1;
            if remaining[c] == 0 {
                ready.push(c);
            }
        }
    }
    if order.len() < n {
        return Err(Error::EntailmentCycle(
            find_cycle(&children, &remaining).into_iter().map(|i| names[i].to_string()).collect(),
        ));
    }

    let words = n.div_ceil(64);
    let mut reach = vec![vec![0u64; words]; n];
    for &v in order.iter().rev() {
        let mut r = vec![0u64; words];
        for &c in &children[v] {
            r[c / 64] |= 1 << (c % 64);
            for (x, y) in r.iter_mut().zip(&reach[c]) {
                *x |= y;
            }
        }
        reach[v] = r;
    }
    let reaches = |from: usize, to: usize| reach[from][to / 64] >> (to % 64) & 1 == 1;

    let mut kept: Vec<Entailment> = edges
        .iter()
        .filter(|(&(u, v), _)| !children[u].iter().any(|&w| w != v && reaches(w, v)))
        .map(|(_, e)| (*e).clone())
        .collect();
    kept.sort();
    Ok(kept)
}

/// Walks forward through nodes still carrying in-edges until one repeats.
fn find_cycle(children: &[Vec<usize>], remaining: &[usize]) -> Vec<usize> {
    let on_cycle = |v: usize| remaining[v] > 0;
    let start = (0..children.len()).find(|&v| on_cycle(v)).unwrap();
    let mut path = vec![start];
    let mut seen = vec![None; children.len()];
    seen[start] = Some(0);
    let mut v = start;
    loop {
        v = *children[v].iter().find(|&&c| on_cycle(c)).unwrap();
        if let Some(pos) = seen[v] {
            let mut cycle = path[pos..].to_vec();
            cycle.push(v);
            return cycle;
        }
        seen[v] = Some(path.len());
        path.push(v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(a: &str, b: &str) -> Entailment {
        Entailment {
            antecedent: a.into(),
            consequent: b.into(),
            support: 2,
        }
    }

    fn pairs(v: &[Entailment]) -> Vec<(String, String)> {
        v.iter().map(|e| (e.antecedent.clone(), e.consequent.clone())).collect()
    }

    #[test]
    fn toy_reduction() {
        let r = transitive_reduction(&[e("A", "B"), e("A", "C"), e("B", "C"), e("D", "C")]).unwrap();
        assert_eq!(pairs(&r), pairs(&[e("A", "B"), e("B", "C"), e("D", "C")]));
    }

    #[test]
    fn single_edge_unchanged() {
        assert_eq!(transitive_reduction(&[e("a", "b")]).unwrap(), vec![e("a", "b")]);
    }

    #[test]
    fn cycle_reported() {
        match transitive_reduction(&[e("a", "b"), e("b", "c"), e("c", "a"), e("x", "a")]) {
            Err(Error::EntailmentCycle(c)) => {
                assert_eq!(c.first(), c.last());
                assert_eq!(c.len(), 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn classes_use_smallest_member() {
        let m = equivalence_classes(&[LabelPair::new("z", "m", 1), LabelPair::new("m", "q", 1)]);
        assert!(m.values().all(|r| r == "m"));
        assert_eq!(m.len(), 3);
    }

    fn closure(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
        let mut r = vec![vec![false; n]; n];
        for &(a, b) in edges {
            r[a][b] = true;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if r[i][k] && r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
        r
    }

    proptest! {
        // Random DAGs: edges only go from lower to higher index.
        #[test]
        fn preserves_reachability_and_is_minimal(raw in prop::collection::vec((0usize..8, 0usize..8), 0..25)) {
            let edges: Vec<(usize, usize)> = raw.into_iter().filter(|(a, b)| a < b).collect();
            let name = |i: usize| format!("v{i}");
            let input: Vec<Entailment> = edges.iter().map(|&(a, b)| e(&name(a), &name(b))).collect();
            let out = transitive_reduction(&input).unwrap();
            let back: Vec<(usize, usize)> = out.iter().map(|x| (
                x.antecedent[1..].parse().unwrap(), x.consequent[1..].parse().unwrap())).collect();
            prop_assert_eq!(closure(8, &edges), closure(8, &back));
            for skip in 0..back.len() {
                let fewer: Vec<_> = back.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, x)| *x).collect();
                prop_assert_ne!(closure(8, &fewer), closure(8, &back));
            }
        }
    }
}
