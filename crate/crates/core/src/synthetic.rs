//! Seeded generators for tests and demonstrations: random label matrices
//! and networks, and a planted dataset with noisy scores.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use crate::dataset::{FeatureMatrix, LabelMatrix, MultiLabelDataset};
use crate::discovery::{discover, DiscoveryConfig};
use crate::error::Result;
use crate::network::{build_network, entail_leak_name, excl_leak_name, LabelNetwork};
use crate::pipeline::PredictionTable;

/// A random `n_instances × n_labels` matrix (labels `l0, l1, ...`).
/// Each label is either independent with a random rate, implied by an
/// earlier label, or kept disjoint from one, so discovery finds a mix of
/// entailments and exclusions.
pub fn random_labels<R: Rng>(rng: &mut R, n_labels: usize, n_instances: usize) -> Result<LabelMatrix> {
    let names: Vec<String> = (0..n_labels).map(|i| format!("l{i}")).collect();
    let mut columns: Vec<Vec<bool>> = Vec::with_capacity(n_labels);
    for j in 0..n_labels {
        let rate = rng.random_range(0.05..0.6);
        let fresh: Vec<bool> = (0..n_instances).map(|_| rng.random_bool(rate)).collect();
        let col = match (j, rng.random_range(0..3u8)) {
            (0, _) | (_, 0) => fresh,
            (_, 1) => {
                let a = &columns[rng.random_range(0..j)];
                a.iter().zip(&fresh).map(|(&x, &y)| x || y).collect()
            }
            _ => {
                let a = &columns[rng.random_range(0..j)];
                a.iter().zip(&fresh).map(|(&x, &y)| !x && y).collect()
            }
        };
        columns.push(col);
    }
    LabelMatrix::from_columns(names, columns)
}

/// The network discovered (minimum support 2) on a random matrix from
/// [`random_labels`], retried until it has at most `max_nodes` nodes.
/// Every such network is realisable: each data row is a feasible state.
pub fn random_network<R: Rng>(rng: &mut R, max_nodes: usize) -> Result<LabelNetwork> {
    loop {
        let n_labels = rng.random_range(1..=max_nodes.clamp(1, 8));
        let n_instances = rng.random_range(4..=40);
        let labels = random_labels(rng, n_labels, n_instances)?;
        let rel = discover(&labels, &DiscoveryConfig::default())?;
        let net = build_network(&rel, labels.names())?;
        if net.len() <= max_nodes {
            return Ok(net);
        }
    }
}

/// Planted labels with truth-conditional scores.
#[derive(Debug, Clone)]
pub struct PlantedData {
    /// No features; eight labels `L0..L7`.
    pub dataset: MultiLabelDataset,
    /// Scores for every label and for the leaks of the planted structure,
    /// keyed by row index.
    pub scores: PredictionTable,
}

/// Eight labels: chain `L0 → L1 → L2`, exclusion set `{L3, L4, L5}` (at
/// most one true, none true a quarter of the time), `L6` and `L7`
/// independent. Each score is drawn from Beta(2, 1) when its label is true
/// and Beta(1, 2) when false, which makes it a calibrated likelihood ratio
/// `s / (1 − s)`.
pub fn planted(seed: u64, n_instances: usize) -> Result<PlantedData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..8).map(|i| format!("L{i}")).collect();
    let mut rows = Vec::with_capacity(n_instances);
    for _ in 0..n_instances {
        let mut r = vec![false; 8];
        r[0] = rng.random_bool(0.3);
        r[1] = r[0] || rng.random_bool(0.3);
        r[2] = r[1] || rng.random_bool(0.3);
        let pick = rng.random_range(0..4usize);
        if pick < 3 {
            r[3 + pick] = true;
        }
        r[6] = rng.random_bool(0.4);
        r[7] = rng.random_bool(0.4);
        rows.push(r);
    }
    let labels = LabelMatrix::from_rows(names.clone(), &rows)?;

    let group = vec!["L3".to_string(), "L4".to_string(), "L5".to_string()];
    let mut columns = names;
    columns.extend([entail_leak_name("L1"), entail_leak_name("L2"), excl_leak_name(&group)]);
    let hi = Beta::new(2.0, 1.0).expect("valid beta");
    let lo = Beta::new(1.0, 2.0).expect("valid beta");
    let mut scores = PredictionTable::new(columns)?;
    for (i, r) in rows.iter().enumerate() {
        let mut truth = r.clone();
        truth.push(r[1] && !r[0]);
        truth.push(r[2] && !r[1]);
        truth.push(!(r[3] || r[4] || r[5]));
        let s = truth
            .iter()
            .map(|&t| if t { hi.sample(&mut rng) } else { lo.sample(&mut rng) })
            .collect();
        scores.push_row(i.to_string(), s)?;
    }
    let dataset = MultiLabelDataset::new("planted", FeatureMatrix::empty(n_instances), labels)?;
    Ok(PlantedData { dataset, scores })
}
