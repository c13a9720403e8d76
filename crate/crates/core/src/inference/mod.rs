//! Exact posterior marginals under soft evidence.
//!
//! Each free node receives a virtual-evidence likelihood `(p, 1 − p)` from
//! its predicted probability, and constraint nodes are observed true. With
//! uniform root priors and no structure this returns `p` itself; with
//! structure, the posteriors respect every deterministic relation encoded
//! in the network.
//!
//! Posteriors are computed by variable elimination, one query per free
//! node, separately for each connected component of the moral graph.
//! Deterministic CPTs are expanded to indicator tables.

mod brute;
mod check;
mod factor;
mod order;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use self::brute::{brute_force_posteriors, MAX_ENUMERATION_VARS};
pub use self::check::check_consistency;
pub use self::factor::{Factor, MAX_FACTOR_VARS};
pub use self::order::{min_fill_order, EliminationOrder, MoralGraph};

use crate::error::{Error, Result};
use crate::network::{CptKind, LabelNetwork};

/// Default clamp on evidence probabilities.
pub const DEFAULT_CLAMP: f64 = 1e-6;

/// Tolerance for the consistency checks run after each correction.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-9;

/// Predicted probability per node name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionVector(pub BTreeMap<String, f64>);

impl PredictionVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, node: impl Into<String>, p: f64) {
        self.0.insert(node.into(), p);
    }

    pub fn get(&self, node: &str) -> Option<f64> {
        self.0.get(node).copied()
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for PredictionVector {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        PredictionVector(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

pub fn clamp_probability(p: f64, epsilon: f64) -> f64 {
    p.max(epsilon).min(1.0 - epsilon)
}

/// Likelihood weights `(if_true, if_false)` for every free node, aligned
/// with node ids. Observed nodes carry `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceModel {
    likelihoods: Vec<Option<(f64, f64)>>,
}

impl EvidenceModel {
    /// Builds evidence from raw likelihood pairs, one per node id.
    pub fn from_likelihoods(network: &LabelNetwork, likelihoods: Vec<Option<(f64, f64)>>) -> Result<Self> {
        if likelihoods.len() != network.len() {
            return Err(Error::Shape(format!(
                "{} likelihoods for {} nodes",
                likelihoods.len(),
                network.len()
            )));
        }
        for (node, lk) in network.nodes().iter().zip(&likelihoods) {
            match (node.is_free(), lk) {
                (true, None) => return Err(Error::MissingPrediction(node.name.clone())),
                (true, Some((t, f))) => {
                    if !(*t >= 0.0 && *f >= 0.0) || (*t == 0.0 && *f == 0.0) || !t.is_finite() || !f.is_finite() {
                        return Err(Error::Shape(format!("invalid likelihood for `{}`", node.name)));
                    }
                }
                (false, _) => {}
            }
        }
        let likelihoods = network
            .nodes()
            .iter()
            .zip(likelihoods)
            .map(|(n, l)| if n.is_free() { l } else { None })
            .collect();
        Ok(EvidenceModel { likelihoods })
    }

    /// Evidence from probabilities aligned with node ids; entries for
    /// observed nodes are ignored.
    pub fn from_probabilities(network: &LabelNetwork, probabilities: &[f64], epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if probabilities.len() != network.len() {
            return Err(Error::Shape(format!(
                "{} probabilities for {} nodes",
                probabilities.len(),
                network.len()
            )));
        }
        let mut likelihoods = Vec::with_capacity(network.len());
        for (node, &p) in network.nodes().iter().zip(probabilities) {
            if !node.is_free() {
                likelihoods.push(None);
                continue;
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ProbabilityOutOfRange {
                    location: format!("node `{}`", node.name),
                    value: p,
                });
            }
            let c = clamp_probability(p, epsilon);
            likelihoods.push(Some((c, 1.0 - c)));
        }
        Ok(EvidenceModel { likelihoods })
    }

    pub fn likelihood(&self, node: usize) -> Option<(f64, f64)> {
        self.likelihoods[node]
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if (0.0..0.5).contains(&epsilon) {
        Ok(())
    } else {
        Err(Error::Config(format!("clamp epsilon {epsilon} outside [0, 0.5)")))
    }
}

/// Turns per-node predictions into virtual evidence. Every label and leak
/// node needs a prediction; each `p` becomes weights
/// `(clamp(p), 1 − clamp(p))` with `clamp(p) = min(max(p, ε), 1 − ε)`.
pub fn attach_evidence(network: &LabelNetwork, predictions: &PredictionVector, epsilon: f64) -> Result<EvidenceModel> {
    let mut probs = vec![0.0; network.len()];
    for (i, node) in network.evidence_nodes() {
        probs[i] = predictions
            .get(&node.name)
            .ok_or_else(|| Error::MissingPrediction(node.name.clone()))?;
    }
    EvidenceModel::from_probabilities(network, &probs, epsilon)
}

/// Posterior probability of every node, plus aliases of equivalent labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedMarginals {
    names: Vec<String>,
    values: Vec<f64>,
    n_nodes: usize,
}

impl CorrectedMarginals {
    fn new(network: &LabelNetwork, node_values: Vec<f64>) -> Self {
        let mut names: Vec<String> = network.nodes().iter().map(|n| n.name.clone()).collect();
        let mut values = node_values;
        for (alias, rep) in network.aliases() {
            let v = values[network.index_of(rep).expect("validated alias")];
            names.push(alias.clone());
            values.push(v);
        }
        CorrectedMarginals {
            names,
            values,
            n_nodes: network.len(),
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    /// Values aligned with node ids. Observed nodes hold their observed
    /// value as 0 or 1.
    pub fn node_values(&self) -> &[f64] {
        &self.values[..self.n_nodes]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.names.iter().map(String::as_str).zip(self.values.iter().copied())
    }
}

#[derive(Debug, Clone)]
struct Component {
    vars: Vec<usize>,
    factors: Vec<Factor>,
    order: Vec<usize>,
}

/// A network prepared for repeated correction: factor tables, components
/// and elimination orders are built once and shared read-only.
#[derive(Debug, Clone)]
pub struct CompiledNetwork {
    network: LabelNetwork,
    components: Vec<Component>,
}

impl CompiledNetwork {
    pub fn new(network: &LabelNetwork) -> Result<Self> {
        let graph = MoralGraph::new(network);
        let order = min_fill_order(network);
        let mut rank = vec![usize::MAX; network.len()];
        for (r, &v) in order.nodes.iter().enumerate() {
            rank[v] = r;
        }

        let mut structural: Vec<Factor> = Vec::new();
        for (i, node) in network.nodes().iter().enumerate() {
            if node.parents.len() + 1 > MAX_FACTOR_VARS {
                return Err(Error::TooComplex {
                    width: node.parents.len() + 1,
                    limit: MAX_FACTOR_VARS,
                });
            }
            match (node.cpt, node.observed) {
                (CptKind::UniformPrior, _) => structural.push(Factor::unary(i, 0.5, 0.5)),
                (CptKind::DeterministicOr, None) => structural.push(Factor::deterministic_or(&node.parents, i)),
                (CptKind::ExactlyOne, Some(v)) => structural.push(Factor::exactly_one(&node.parents, v)),
                _ => return Err(Error::Shape(format!("unsupported node `{}`", node.name))),
            }
        }

        let mut components = Vec::new();
        for vars in graph.components() {
            let member = |v: &usize| vars.binary_search(v).is_ok();
            let factors: Vec<Factor> = structural
                .iter()
                .filter(|f| f.vars.first().is_some_and(member))
                .cloned()
                .collect();
            let mut order = vars.clone();
            order.sort_by_key(|&v| rank[v]);
            components.push(Component { vars, factors, order });
        }
        Ok(CompiledNetwork {
            network: network.clone(),
            components,
        })
    }

    pub fn network(&self) -> &LabelNetwork {
        &self.network
    }

    /// Posterior of every node given the evidence, aligned with node ids.
    pub fn posteriors(&self, evidence: &EvidenceModel) -> Result<Vec<f64>> {
        let mut out: Vec<f64> = self
            .network
            .nodes()
            .iter()
            .map(|n| if n.observed == Some(true) { 1.0 } else { 0.0 })
            .collect();
        for comp in &self.components {
            let mut base = comp.factors.clone();
            for &v in &comp.vars {
                let (t, f) = evidence.likelihood(v).ok_or_else(|| {
                    Error::MissingPrediction(self.network.node(v).name.clone())
                })?;
                base.push(Factor::unary(v, f, t));
            }
            for &q in &comp.vars {
                out[q] = query(&base, &comp.order, q)?;
            }
        }
        Ok(out)
    }

    pub fn correct(&self, evidence: &EvidenceModel) -> Result<CorrectedMarginals> {
        Ok(CorrectedMarginals::new(&self.network, self.posteriors(evidence)?))
    }
}

/// P(q = true) by eliminating every other variable in `order`.
fn query(base: &[Factor], order: &[usize], q: usize) -> Result<f64> {
    let mut factors: Vec<Factor> = base.to_vec();
    for &v in order.iter().filter(|&&v| v != q) {
        let (with, without): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.vars.binary_search(&v).is_ok());
        factors = without;
        let mut iter = with.into_iter();
        let Some(first) = iter.next() else { continue };
        let product = iter.try_fold(first, |acc, f| acc.product(&f))?;
        let mut summed = product.marginalize(v);
        summed.normalize()?;
        factors.push(summed);
    }
    let mut result = Factor::unary(q, 1.0, 1.0);
    for f in &factors {
        result = result.product(f)?;
    }
    result.normalize()?;
    Ok(result.values[1])
}

/// Exact corrected marginals for one instance.
pub fn correct_marginals(network: &LabelNetwork, evidence: &EvidenceModel) -> Result<CorrectedMarginals> {
    CompiledNetwork::new(network)?.correct(evidence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::{Entailment, Exclusion, RelationshipSet};
    use crate::network::build_network;

    fn chain() -> LabelNetwork {
        let rel = RelationshipSet {
            reduced_entailments: vec![Entailment {
                antecedent: "A".into(),
                consequent: "B".into(),
                support: 2,
            }],
            ..Default::default()
        };
        build_network(&rel, &["A", "B"]).unwrap()
    }

    #[test]
    fn weights_from_probabilities() {
        let net = build_network(&RelationshipSet::default(), &["x"]).unwrap();
        let ev = attach_evidence(&net, &[("x", 0.7)].into_iter().collect(), DEFAULT_CLAMP).unwrap();
        assert_eq!(ev.likelihood(0), Some((0.7, 1.0 - 0.7)));
        let ev = attach_evidence(&net, &[("x", 1.0)].into_iter().collect(), 1e-6).unwrap();
        let (t, f) = ev.likelihood(0).unwrap();
        assert_eq!(t, 1.0 - 1e-6);
        assert!((t - 0.999999).abs() < 1e-15 && (f - 1e-6).abs() < 1e-15);
    }

    #[test]
    fn missing_and_out_of_range_predictions() {
        let net = chain();
        let p: PredictionVector = [("A", 0.4), ("B", 0.2)].into_iter().collect();
        match attach_evidence(&net, &p, DEFAULT_CLAMP) {
            Err(Error::MissingPrediction(n)) => assert_eq!(n, "leak__B"),
            other => panic!("unexpected {other:?}"),
        }
        let p: PredictionVector = [("A", 1.3), ("B", 0.2), ("leak__B", 0.1)].into_iter().collect();
        assert!(matches!(
            attach_evidence(&net, &p, DEFAULT_CLAMP),
            Err(Error::ProbabilityOutOfRange { .. })
        ));
    }

    #[test]
    fn single_root_is_identity() {
        let net = build_network(&RelationshipSet::default(), &["x"]).unwrap();
        let ev = attach_evidence(&net, &[("x", 0.7)].into_iter().collect(), DEFAULT_CLAMP).unwrap();
        let post = correct_marginals(&net, &ev).unwrap();
        assert!((post.get("x").unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn chain_with_leak() {
        // Brute force by hand over (A, L); B = A ∨ L.
        // weights: (0,0) .6*.65*.75=.2925, (1,0) .4*.65*.25=.065,
        //          (0,1) .6*.35*.25=.0525, (1,1) .4*.35*.25=.035; Z=.445
        let net = chain();
        let p: PredictionVector = [("A", 0.4), ("leak__B", 0.35), ("B", 0.25)].into_iter().collect();
        let post = correct_marginals(&net, &attach_evidence(&net, &p, DEFAULT_CLAMP).unwrap()).unwrap();
        let z = 0.445;
        assert!((post.get("A").unwrap() - 0.1 / z).abs() < 1e-9);
        assert!((post.get("leak__B").unwrap() - 0.0875 / z).abs() < 1e-9);
        assert!((post.get("B").unwrap() - 0.1525 / z).abs() < 1e-9);
        assert!((post.get("A").unwrap() - 0.2247).abs() < 1e-4);
        assert!((post.get("leak__B").unwrap() - 0.1966).abs() < 1e-4);
        assert!((post.get("B").unwrap() - 0.3427).abs() < 1e-4);
    }

    #[test]
    fn exclusion_pair_with_leak() {
        // feasible one-hot configs: A .3*.15*.7=.0315, E .7*.85*.7=.4165, L .7*.15*.3=.0315
        let rel = RelationshipSet {
            exclusions: vec![Exclusion {
                labels: vec!["A".into(), "E".into()],
                support: 2,
            }],
            ..Default::default()
        };
        let net = build_network(&rel, &["A", "E"]).unwrap();
        let p: PredictionVector = [("A", 0.3), ("E", 0.85), ("leakx__A+E", 0.3)].into_iter().collect();
        let post = correct_marginals(&net, &attach_evidence(&net, &p, DEFAULT_CLAMP).unwrap()).unwrap();
        let z = 0.0315 + 0.4165 + 0.0315;
        assert!((post.get("A").unwrap() - 0.0315 / z).abs() < 1e-9);
        assert!((post.get("E").unwrap() - 0.4165 / z).abs() < 1e-9);
        assert!((post.get("leakx__A+E").unwrap() - 0.0315 / z).abs() < 1e-9);
        assert!((post.get("A").unwrap() - 0.0657).abs() < 1e-4);
        assert!((post.get("E").unwrap() - 0.8686).abs() < 1e-4);
        let sum: f64 = ["A", "E", "leakx__A+E"].iter().map(|n| post.get(n).unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert_eq!(post.get("excl__A+E"), Some(1.0));
    }

    #[test]
    fn infeasible_without_clamp() {
        let rel = RelationshipSet {
            exclusions: vec![Exclusion {
                labels: vec!["A".into(), "E".into()],
                support: 2,
            }],
            ..Default::default()
        };
        let net = build_network(&rel, &["A", "E"]).unwrap();
        let p: PredictionVector = [("A", 1.0), ("E", 1.0), ("leakx__A+E", 1.0)].into_iter().collect();
        let ev = attach_evidence(&net, &p, 0.0).unwrap();
        assert!(matches!(correct_marginals(&net, &ev), Err(Error::InfeasibleEvidence)));
        assert!(matches!(brute_force_posteriors(&net, &ev), Err(Error::InfeasibleEvidence)));
    }

    #[test]
    fn epsilon_range_checked() {
        let net = chain();
        assert!(EvidenceModel::from_probabilities(&net, &[0.5; 3], 0.5).is_err());
        assert!(EvidenceModel::from_probabilities(&net, &[0.5; 3], -1.0).is_err());
    }

    #[test]
    fn likelihood_validation() {
        let net = chain();
        assert!(EvidenceModel::from_likelihoods(&net, vec![Some((0.0, 0.0)); 3]).is_err());
        assert!(EvidenceModel::from_likelihoods(&net, vec![Some((-1.0, 1.0)); 3]).is_err());
        assert!(EvidenceModel::from_likelihoods(&net, vec![Some((2.0, 1.0)); 3]).is_ok());
    }

    fn toy_network() -> LabelNetwork {
        let m = crate::dataset::read_csv(
            include_str!("../../tests/data/toy.csv").as_bytes(),
            &["A", "B", "C", "D", "E", "F"],
            "toy",
        )
        .unwrap();
        let rel = crate::discovery::discover(m.labels(), &Default::default()).unwrap();
        build_network(&rel, m.labels().names()).unwrap()
    }

    #[test]
    fn worked_example_exclusion_group() {
        let net = toy_network();
        let p: PredictionVector = [
            ("A", 0.4),
            ("leak__B", 0.35),
            ("B", 0.25),
            ("D", 0.6),
            ("leak__C", 0.01),
            ("C", 0.2),
            ("F", 0.3),
            ("E", 0.85),
            ("leakx__A+E+F", 0.3),
        ]
        .into_iter()
        .collect();
        let ev = attach_evidence(&net, &p, DEFAULT_CLAMP).unwrap();
        let post = correct_marginals(&net, &ev).unwrap();
        for (name, want) in [("A", 0.022), ("E", 0.85), ("F", 0.064), ("leakx__A+E+F", 0.064), ("B", 0.096), ("leak__B", 0.082), ("C", 0.345)] {
            assert!((post.get(name).unwrap() - want).abs() < 0.02, "{name}");
        }
        check_consistency(&net, post.node_values(), CONSISTENCY_TOLERANCE).unwrap();
        let brute = brute_force_posteriors(&net, &ev).unwrap();
        for (a, b) in post.node_values().iter().zip(brute.node_values()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn compiled_network_is_shareable() {
        fn assert_sync<T: Send + Sync>() {}
        assert_sync::<CompiledNetwork>();
    }

    #[test]
    fn enumeration_limit() {
        let names: Vec<String> = (0..23).map(|i| format!("x{i:02}")).collect();
        let net = build_network(&RelationshipSet::default(), &names).unwrap();
        let ev = EvidenceModel::from_probabilities(&net, &[0.5; 23], DEFAULT_CLAMP).unwrap();
        assert!(matches!(brute_force_posteriors(&net, &ev), Err(Error::TooLarge { .. })));
        assert!(correct_marginals(&net, &ev).is_ok());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(128))]
        #[test]
        fn matches_enumeration(seed in proptest::prelude::any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let net = crate::synthetic::random_network(&mut rng, 15).unwrap();
            let probs: Vec<f64> = (0..net.len()).map(|_| rng.random_range(0.0..=1.0)).collect();
            let ev = EvidenceModel::from_probabilities(&net, &probs, DEFAULT_CLAMP).unwrap();
            let fast = correct_marginals(&net, &ev).unwrap();
            let slow = brute_force_posteriors(&net, &ev).unwrap();
            for (a, b) in fast.node_values().iter().zip(slow.node_values()) {
                proptest::prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
            }
            check_consistency(&net, fast.node_values(), CONSISTENCY_TOLERANCE).unwrap();
        }

        #[test]
        fn no_structure_is_identity(ps in proptest::collection::vec(0.0f64..=1.0, 1..10)) {
            let names: Vec<String> = (0..ps.len()).map(|i| format!("x{i}")).collect();
            let net = build_network(&RelationshipSet::default(), &names).unwrap();
            let ev = EvidenceModel::from_probabilities(&net, &ps, DEFAULT_CLAMP).unwrap();
            let post = correct_marginals(&net, &ev).unwrap();
            for (p, q) in ps.iter().zip(post.node_values()) {
                proptest::prop_assert!((clamp_probability(*p, DEFAULT_CLAMP) - q).abs() < 1e-12);
            }
        }
    }
}
