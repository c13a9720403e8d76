use std::collections::BTreeSet;

use crate::network::LabelNetwork;

/// Elimination order over the free nodes of a network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EliminationOrder {
    pub nodes: Vec<usize>,
}

impl EliminationOrder {
    pub fn names<'a>(&self, network: &'a LabelNetwork) -> Vec<&'a str> {
        self.nodes.iter().map(|&v| network.node(v).name.as_str()).collect()
    }

    /// Largest number of not-yet-eliminated neighbours any node has at the
    /// moment it is eliminated.
    pub fn induced_width(&self, graph: &MoralGraph) -> usize {
        let mut adj = graph.adj.clone();
        let mut width = 0;
        for &v in &self.nodes {
            let nb: Vec<usize> = adj[v].iter().copied().collect();
            width = width.max(nb.len());
            eliminate(&mut adj, v, &nb);
        }
        width
    }
}

/// Undirected graph over free nodes: every family (child and its free
/// parents) is a clique, and so are the parents of each observed
/// constraint.
#[derive(Debug, Clone)]
pub struct MoralGraph {
    pub adj: Vec<BTreeSet<usize>>,
    pub free: Vec<usize>,
}

impl MoralGraph {
    pub fn new(network: &LabelNetwork) -> Self {
        let n = network.len();
        let mut adj = vec![BTreeSet::new(); n];
        for (c, node) in network.nodes().iter().enumerate() {
            let mut family: Vec<usize> = node.parents.clone();
            if node.is_free() {
                family.push(c);
            }
            for &a in &family {
                for &b in &family {
                    if a != b {
                        adj[a].insert(b);
                    }
                }
            }
        }
        let free = network.evidence_nodes().map(|(i, _)| i).collect();
        MoralGraph { adj, free }
    }

    /// Connected components of the free nodes, each sorted ascending.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.adj.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for &s in &self.free {
            if seen[s] {
                continue;
            }
            let mut comp = vec![];
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &w in &self.adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

fn eliminate(adj: &mut [BTreeSet<usize>], v: usize, nb: &[usize]) {
    for &a in nb {
        adj[a].remove(&v);
        for &b in nb {
            if a != b {
                adj[a].insert(b);
            }
        }
    }
    adj[v].clear();
}

fn fill_in(adj: &[BTreeSet<usize>], v: usize) -> usize {
    let nb: Vec<usize> = adj[v].iter().copied().collect();
    let mut fill = 0;
    for (i, &a) in nb.iter().enumerate() {
        for &b in &nb[i + 1..] {
            if !adj[a].contains(&b) {
                fill += 1;
            }
        }
    }
    fill
}

/// Greedy minimum fill-in order over all free nodes; ties go to the
/// lexicographically smaller node name.
pub fn min_fill_order(network: &LabelNetwork) -> EliminationOrder {
    let graph = MoralGraph::new(network);
    let mut adj = graph.adj.clone();
    let mut remaining: BTreeSet<usize> = graph.free.iter().copied().collect();
    let mut nodes = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let v = *remaining
            .iter()
            .min_by(|&&a, &&b| {
                fill_in(&adj, a)
                    .cmp(&fill_in(&adj, b))
                    .then_with(|| network.node(a).name.cmp(&network.node(b).name))
            })
            .unwrap();
        let nb: Vec<usize> = adj[v].iter().copied().collect();
        eliminate(&mut adj, v, &nb);
        remaining.remove(&v);
        nodes.push(v);
    }
    EliminationOrder { nodes }
}
