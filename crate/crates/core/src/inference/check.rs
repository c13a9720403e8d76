use crate::error::{Error, Result};
use crate::network::{CptKind, LabelNetwork};

/// Checks corrected posteriors, aligned with node ids, against the network
/// structure:
///
/// * every free node lies strictly inside (0, 1);
/// * an OR node is at least its largest parent and at most the parents' sum;
/// * the members of an exactly-one constraint sum to one.
pub fn check_consistency(network: &LabelNetwork, posteriors: &[f64], tol: f64) -> Result<()> {
    if posteriors.len() != network.len() {
        return Err(Error::Shape(format!(
            "{} posteriors for {} nodes",
            posteriors.len(),
            network.len()
        )));
    }
    let fail = |msg: String| Err(Error::Invariant(msg));
    for (i, node) in network.nodes().iter().enumerate() {
        let p = posteriors[i];
        if node.is_free() && !(p > 0.0 && p < 1.0) {
            return fail(format!("P({}) = {p} not in (0, 1)", node.name));
        }
        let parents = node.parents.iter().map(|&q| posteriors[q]);
        match node.cpt {
            CptKind::DeterministicOr => {
                let max = parents.clone().fold(0.0, f64::max);
                let sum: f64 = parents.sum();
                if p < max - tol {
                    return fail(format!("P({}) = {p} below parent maximum {max}", node.name));
                }
                if p > sum + tol {
                    return fail(format!("P({}) = {p} above parent sum {sum}", node.name));
                }
            }
            CptKind::ExactlyOne if node.observed == Some(true) => {
                let sum: f64 = parents.sum();
                if (sum - 1.0).abs() > tol {
                    return fail(format!("members of {} sum to {sum}", node.name));
                }
            }
            _ => {}
        }
    }
    Ok(())
}
