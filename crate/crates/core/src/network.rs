//! Bayesian network encoding of discovered relationships.
//!
//! * one node per real label, with a uniform prior when it has no parents;
//! * an entailment consequent gets a deterministic OR over its antecedents
//!   plus one leak parent, a virtual label covering causes the discovered
//!   antecedents miss;
//! * an exclusion set gets a constraint child over its members plus one
//!   leak parent, true iff exactly one parent is true, and observed true.
//!
//! Leak nodes are uniform-prior roots. Equivalent labels share the node of
//! their class representative.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::{check_names, LabelMatrix};
use crate::discovery::{reduce_with_equivalences, transitive_reduction, Entailment, RelationshipSet};
use crate::error::{Error, Result};

/// Separator between member names in exclusion node names.
pub const MEMBER_SEPARATOR: &str = "+";

pub fn entail_leak_name(consequent: &str) -> String {
    format!("leak__{consequent}")
}

pub fn excl_leak_name(members: &[String]) -> String {
    format!("leakx__{}", members.join(MEMBER_SEPARATOR))
}

pub fn constraint_name(members: &[String]) -> String {
    format!("excl__{}", members.join(MEMBER_SEPARATOR))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NodeKind {
    Label,
    LeakEntail { consequent: String },
    LeakExcl { members: Vec<String> },
    Constraint { members: Vec<String> },
}

impl NodeKind {
    pub fn is_leak(&self) -> bool {
        matches!(self, NodeKind::LeakEntail { .. } | NodeKind::LeakExcl { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CptKind {
    /// Root with P(true) = 0.5.
    UniformPrior,
    /// True iff any parent is true.
    DeterministicOr,
    /// True iff exactly one parent is true.
    ExactlyOne,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    pub cpt: CptKind,
    pub parents: Vec<usize>,
    /// Fixed value for observed nodes (constraints are observed true).
    pub observed: Option<bool>,
    /// Positive rate of a leak label on the training split, when known.
    pub train_frequency: Option<f64>,
}

impl Node {
    pub fn is_free(&self) -> bool {
        self.observed.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelNetwork {
    nodes: Vec<Node>,
    /// Equivalent label → the representative whose node it shares.
    aliases: BTreeMap<String, String>,
}

/// Node and edge counts by role.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub labels: usize,
    pub entail_leaks: usize,
    pub excl_leaks: usize,
    pub constraints: usize,
    pub edges: usize,
}

/// Builds the network for `relationships` over `label_names`.
pub fn build_network<S: AsRef<str>>(relationships: &RelationshipSet, label_names: &[S]) -> Result<LabelNetwork> {
    let label_names: Vec<String> = label_names.iter().map(|s| s.as_ref().to_string()).collect();
    check_names(&label_names)?;
    let known: BTreeSet<&str> = label_names.iter().map(String::as_str).collect();
    let check = |l: &String| {
        if known.contains(l.as_str()) {
            Ok(())
        } else {
            Err(Error::UnknownLabel(l.clone()))
        }
    };
    for r in relationships.iter() {
        match r {
            crate::discovery::Relationship::PositiveEntailment(e) => {
                check(&e.antecedent)?;
                check(&e.consequent)?;
            }
            crate::discovery::Relationship::Exclusion(e) => e.labels.iter().try_for_each(check)?,
            crate::discovery::Relationship::Equivalence(p) => p.labels.iter().try_for_each(check)?,
            crate::discovery::Relationship::Coexhaustion(_) => {}
        }
    }
    relationships.reduced_entailments.iter().try_for_each(|e| {
        check(&e.antecedent)?;
        check(&e.consequent)
    })?;

    let reps = relationships.representatives();
    let rep = |l: &String| reps.get(l).unwrap_or(l).clone();
    let aliases: BTreeMap<String, String> = reps.iter().filter(|(l, r)| l != r).map(|(l, r)| (l.clone(), r.clone())).collect();

    let entailments: Vec<Entailment> = if relationships.reduced_entailments.is_empty() {
        reduce_with_equivalences(&relationships.positive_entailments, &relationships.equivalences)?
    } else {
        let mapped: Vec<Entailment> = relationships
            .reduced_entailments
            .iter()
            .map(|e| Entailment {
                antecedent: rep(&e.antecedent),
                consequent: rep(&e.consequent),
                support: e.support,
            })
            .filter(|e| e.antecedent != e.consequent)
            .collect();
        transitive_reduction(&mapped)?
    };

    let mut exclusions: BTreeSet<Vec<String>> = BTreeSet::new();
    for ex in &relationships.exclusions {
        let mut members: Vec<String> = ex.labels.iter().map(rep).collect();
        members.sort();
        members.dedup();
        if members.len() >= 2 {
            exclusions.insert(members);
        }
    }

    let mut nodes: Vec<Node> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut add = |nodes: &mut Vec<Node>, node: Node| -> Result<usize> {
        if index.insert(node.name.clone(), nodes.len()).is_some() {
            return Err(Error::DuplicateName(node.name));
        }
        nodes.push(node);
        Ok(nodes.len() - 1)
    };

    for l in label_names.iter().filter(|l| !aliases.contains_key(*l)) {
        add(
            &mut nodes,
            Node {
                name: l.clone(),
                kind: NodeKind::Label,
                cpt: CptKind::UniformPrior,
                parents: Vec::new(),
                observed: None,
                train_frequency: None,
            },
        )?;
    }
    let label_index: BTreeMap<String, usize> = nodes.iter().enumerate().map(|(i, n)| (n.name.clone(), i)).collect();

    let mut parents_of: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in &entailments {
        parents_of.entry(&e.consequent).or_default().push(&e.antecedent);
    }
    for (consequent, antecedents) in &parents_of {
        let leak = add(
            &mut nodes,
            Node {
                name: entail_leak_name(consequent),
                kind: NodeKind::LeakEntail {
                    consequent: consequent.to_string(),
                },
                cpt: CptKind::UniformPrior,
                parents: Vec::new(),
                observed: None,
                train_frequency: None,
            },
        )?;
        let c = label_index[*consequent];
        let mut parents: Vec<usize> = antecedents.iter().map(|a| label_index[*a]).collect();
        parents.push(leak);
        nodes[c].parents = parents;
        nodes[c].cpt = CptKind::DeterministicOr;
    }

    for members in &exclusions {
        let leak = add(
            &mut nodes,
            Node {
                name: excl_leak_name(members),
                kind: NodeKind::LeakExcl {
                    members: members.clone(),
                },
                cpt: CptKind::UniformPrior,
                parents: Vec::new(),
                observed: None,
                train_frequency: None,
            },
        )?;
        let mut parents: Vec<usize> = members.iter().map(|m| label_index[m]).collect();
        parents.push(leak);
        add(
            &mut nodes,
            Node {
                name: constraint_name(members),
                kind: NodeKind::Constraint {
                    members: members.clone(),
                },
                cpt: CptKind::ExactlyOne,
                parents,
                observed: Some(true),
                train_frequency: None,
            },
        )?;
    }

    let net = LabelNetwork { nodes, aliases };
    net.validate()?;
    Ok(net)
}

/// Appends one leak column per leak node of the network built from
/// `relationships` on this matrix. The matrix must be the split the
/// relationships were mined on.
pub fn generate_leak_labels(labels: &LabelMatrix, relationships: &RelationshipSet) -> Result<LabelMatrix> {
    build_network(relationships, labels.names())?.leak_labels(labels)
}

impl LabelNetwork {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn aliases(&self) -> &BTreeMap<String, String> {
        &self.aliases
    }

    /// Nodes that take soft evidence: real labels and leaks.
    pub fn evidence_nodes(&self) -> impl Iterator<Item = (usize, &Node)> {
        self.nodes.iter().enumerate().filter(|(_, n)| n.is_free())
    }

    pub fn leak_nodes(&self) -> impl Iterator<Item = (usize, &Node)> {
        self.nodes.iter().enumerate().filter(|(_, n)| n.kind.is_leak())
    }

    /// Every real label, including equivalent labels without a node of
    /// their own, in node order followed by aliases.
    pub fn real_labels(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Label)
            .map(|n| n.name.clone())
            .collect();
        out.extend(self.aliases.keys().cloned());
        out
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.nodes
            .iter()
            .enumerate()
            .flat_map(|(c, n)| n.parents.iter().map(move |&p| (p, c)))
            .collect()
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.nodes.len()];
        for (p, c) in self.edges() {
            ch[p].push(c);
        }
        ch
    }

    pub fn summary(&self) -> NetworkSummary {
        let mut s = NetworkSummary {
            edges: self.edges().len(),
            ..Default::default()
        };
        for n in &self.nodes {
            match n.kind {
                NodeKind::Label => s.labels += 1,
                NodeKind::LeakEntail { .. } => s.entail_leaks += 1,
                NodeKind::LeakExcl { .. } => s.excl_leaks += 1,
                NodeKind::Constraint { .. } => s.constraints += 1,
            }
        }
        s
    }

    /// Node ids ordered so every parent precedes its children.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let children = self.children();
        let mut indegree: Vec<usize> = self.nodes.iter().map(|n| n.parents.len()).collect();
        let mut ready: Vec<usize> = (0..self.nodes.len()).rev().filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(v) = ready.pop() {
            order.push(v);
            for &c in children[v].iter().rev() {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(c);
                }
            }
        }
        if order.len() < self.nodes.len() {
            let stuck: Vec<String> = (0..self.nodes.len())
                .filter(|&v| indegree[v] > 0)
                .map(|v| self.nodes[v].name.clone())
                .collect();
            return Err(Error::EntailmentCycle(stuck));
        }
        Ok(order)
    }

    fn validate(&self) -> Result<()> {
        check_names(self.nodes.iter().map(|n| &n.name))?;
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(&p) = n.parents.iter().find(|&&p| p >= self.nodes.len() || p == i) {
                return Err(Error::Shape(format!("node `{}` has invalid parent {p}", n.name)));
            }
            let ok = match (&n.kind, n.cpt) {
                (NodeKind::Constraint { .. }, CptKind::ExactlyOne) => n.observed.is_some() && !n.parents.is_empty(),
                (NodeKind::Constraint { .. }, _) | (_, CptKind::ExactlyOne) => false,
                (_, CptKind::UniformPrior) => n.parents.is_empty() && n.observed.is_none(),
                (NodeKind::Label, CptKind::DeterministicOr) => !n.parents.is_empty() && n.observed.is_none(),
                (_, CptKind::DeterministicOr) => false,
            };
            if !ok {
                return Err(Error::Shape(format!("node `{}` has an inconsistent kind/cpt/parents", n.name)));
            }
        }
        for (alias, rep) in &self.aliases {
            if self.index_of(alias).is_some() || self.index_of(rep).is_none() {
                return Err(Error::Shape(format!("bad alias `{alias}` -> `{rep}`")));
            }
        }
        self.topological_order().map(|_| ())
    }

    /// Computes the leak columns from real label values and appends them
    /// after the real labels.
    ///
    /// * entailment leak: true iff the consequent is true and every other
    ///   parent is false;
    /// * exclusion leak: true iff every member is false.
    pub fn leak_labels(&self, labels: &LabelMatrix) -> Result<LabelMatrix> {
        let n = labels.n_instances();
        let column = |name: &str| labels.column_by_name(name);
        let mut out = labels.clone();
        for (id, node) in self.leak_nodes() {
            let values: Vec<bool> = match &node.kind {
                NodeKind::LeakEntail { consequent } => {
                    let c = self.index_of(consequent).ok_or_else(|| Error::UnknownLabel(consequent.clone()))?;
                    let target = column(consequent)?;
                    let others: Vec<&[bool]> = self.nodes[c]
                        .parents
                        .iter()
                        .filter(|&&p| p != id)
                        .map(|&p| column(&self.nodes[p].name))
                        .collect::<Result<_>>()?;
                    (0..n).map(|i| target[i] && others.iter().all(|col| !col[i])).collect()
                }
                NodeKind::LeakExcl { members } => {
                    let cols: Vec<&[bool]> = members.iter().map(|m| column(m)).collect::<Result<_>>()?;
                    (0..n).map(|i| cols.iter().all(|col| !col[i])).collect()
                }
                _ => unreachable!(),
            };
            out.push_column(node.name.clone(), values)?;
        }
        Ok(out)
    }

    /// Records each leak label's positive rate from a matrix holding the
    /// leak columns.
    pub fn set_leak_frequencies(&mut self, augmented: &LabelMatrix) -> Result<()> {
        let n = augmented.n_instances();
        for node in self.nodes.iter_mut().filter(|n| n.kind.is_leak()) {
            let col = augmented.column_by_name(&node.name)?;
            let pos = col.iter().filter(|&&v| v).count();
            node.train_frequency = Some(if n == 0 { 0.0 } else { pos as f64 / n as f64 });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NetworkJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: NetworkJson = serde_json::from_str(text)?;
        raw.try_into()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeJson {
    id: usize,
    name: String,
    kind: NodeKind,
    cpt: CptKind,
    observed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    train_frequency: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeJson {
    parent: String,
    child: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkJson {
    nodes: Vec<NodeJson>,
    edges: Vec<EdgeJson>,
    #[serde(default)]
    aliases: BTreeMap<String, String>,
}

impl From<&LabelNetwork> for NetworkJson {
    fn from(net: &LabelNetwork) -> Self {
        NetworkJson {
            nodes: net
                .nodes
                .iter()
                .enumerate()
                .map(|(id, n)| NodeJson {
                    id,
                    name: n.name.clone(),
                    kind: n.kind.clone(),
                    cpt: n.cpt,
                    observed: n.observed.is_some(),
                    value: n.observed,
                    train_frequency: n.train_frequency,
                })
                .collect(),
            edges: net
                .edges()
                .into_iter()
                .map(|(p, c)| EdgeJson {
                    parent: net.nodes[p].name.clone(),
                    child: net.nodes[c].name.clone(),
                })
                .collect(),
            aliases: net.aliases.clone(),
        }
    }
}

impl TryFrom<NetworkJson> for LabelNetwork {
    type Error = Error;

    fn try_from(raw: NetworkJson) -> Result<Self> {
        let mut nodes: Vec<Node> = Vec::with_capacity(raw.nodes.len());
        for (i, n) in raw.nodes.into_iter().enumerate() {
            if n.id != i {
                return Err(Error::Shape(format!("node `{}` has id {}, expected {i}", n.name, n.id)));
            }
            nodes.push(Node {
                name: n.name,
                kind: n.kind,
                cpt: n.cpt,
                parents: Vec::new(),
                observed: if n.observed { Some(n.value.unwrap_or(true)) } else { None },
                train_frequency: n.train_frequency,
            });
        }
        let index: BTreeMap<String, usize> = nodes.iter().enumerate().map(|(i, n)| (n.name.clone(), i)).collect();
        for e in raw.edges {
            let p = *index.get(&e.parent).ok_or_else(|| Error::UnknownLabel(e.parent.clone()))?;
            let c = *index.get(&e.child).ok_or_else(|| Error::UnknownLabel(e.child.clone()))?;
            nodes[c].parents.push(p);
        }
        let net = LabelNetwork {
            nodes,
            aliases: raw.aliases,
        };
        net.validate()?;
        Ok(net)
    }
}
