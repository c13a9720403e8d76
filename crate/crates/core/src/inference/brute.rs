use super::{CorrectedMarginals, EvidenceModel};
use crate::error::{Error, Result};
use crate::network::{CptKind, LabelNetwork};

/// Most root variables the enumeration oracle accepts.
pub const MAX_ENUMERATION_VARS: usize = 22;

/// Exact posteriors by enumerating every root assignment and deriving the
/// deterministic nodes from it. Exponential; meant as a test oracle.
pub fn brute_force_posteriors(network: &LabelNetwork, evidence: &EvidenceModel) -> Result<CorrectedMarginals> {
    let roots: Vec<usize> = network
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, n)| n.cpt == CptKind::UniformPrior)
        .map(|(i, _)| i)
        .collect();
    if roots.len() > MAX_ENUMERATION_VARS {
        return Err(Error::TooLarge {
            vars: roots.len(),
            limit: MAX_ENUMERATION_VARS,
        });
    }
    let topo = network.topological_order()?;
    let n = network.len();
    let mut value = vec![false; n];
    let mut mass = vec![0.0; n];
    let mut z = 0.0;
    for assignment in 0..1u64 << roots.len() {
        for (b, &r) in roots.iter().enumerate() {
            value[r] = assignment >> b & 1 == 1;
        }
        let mut w = 1.0;
        for &v in &topo {
            let node = network.node(v);
            match node.cpt {
                CptKind::UniformPrior => {}
                CptKind::DeterministicOr => value[v] = node.parents.iter().any(|&p| value[p]),
                CptKind::ExactlyOne => {
                    let one = node.parents.iter().filter(|&&p| value[p]).count() == 1;
                    if Some(one) != node.observed {
                        w = 0.0;
                    }
                    value[v] = one;
                }
            }
            if let Some((t, f)) = evidence.likelihood(v) {
                w *= if value[v] { t } else { f };
            }
        }
        if w == 0.0 {
            continue;
        }
        z += w;
        for v in 0..n {
            if value[v] {
                mass[v] += w;
            }
        }
    }
    if z.is_nan() || z <= 0.0 {
        return Err(Error::InfeasibleEvidence);
    }
    let values = network
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, node)| match node.observed {
            Some(o) => f64::from(u8::from(o)),
            None => mass[i] / z,
        })
        .collect();
    Ok(CorrectedMarginals::new(network, values))
}
