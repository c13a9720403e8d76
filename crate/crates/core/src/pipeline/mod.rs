//! Cross-validated correction runs: per fold, discover relationships on the
//! training split, add leak labels, obtain marginals for the test split,
//! and correct them with the fold's network.
//!
//! Nothing from the test split reaches discovery, leak generation or model
//! fitting.

mod learner;
mod predictions;

use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use self::learner::{
    predict_marginals, smoothed_prior, train_binary_relevance, BinaryLearner, BinaryModel, NaiveBayes,
    PriorLearner,
};
pub use self::predictions::{
    align_predictions, check_instance_ids, ingest_external_predictions, PredictionTable, ID_COLUMN,
};

use crate::dataset::{FoldSplit, LabelMatrix, MultiLabelDataset};
use crate::discovery::{discover, DiscoveryConfig, EscalationCaps, RelationshipSet, DEFAULT_MIN_SUPPORT};
use crate::error::{Error, Result};
use crate::evaluation::{compare, EvaluationReport, FoldEvaluation, RelationshipCounts};
use crate::inference::{check_consistency, clamp_probability, CompiledNetwork, EvidenceModel, CONSISTENCY_TOLERANCE, DEFAULT_CLAMP};
use crate::network::{build_network, LabelNetwork};

/// Where per-label marginals come from.
#[derive(Debug, Clone)]
pub enum LearnerSpec {
    Prior,
    NaiveBayes,
    /// Predictions file keyed by dataset row index.
    ExternalFile(PathBuf),
    /// Same, already loaded.
    External(Arc<PredictionTable>),
}

impl FromStr for LearnerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prior" => Ok(LearnerSpec::Prior),
            "nb" => Ok(LearnerSpec::NaiveBayes),
            _ => match s.strip_prefix("external:") {
                Some(p) if !p.is_empty() => Ok(LearnerSpec::ExternalFile(PathBuf::from(p))),
                _ => Err(Error::Config(format!("unknown learner `{s}` (prior | nb | external:<path>)"))),
            },
        }
    }
}

/// Which relationships the network encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exploit {
    Entail,
    Excl,
    Both,
    None,
}

impl FromStr for Exploit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entail" => Ok(Exploit::Entail),
            "excl" => Ok(Exploit::Excl),
            "both" => Ok(Exploit::Both),
            "none" => Ok(Exploit::None),
            _ => Err(Error::Config(format!("unknown exploit mode `{s}` (entail | excl | both | none)"))),
        }
    }
}

impl Exploit {
    /// Keeps only the relationships this mode exploits. Equivalence merging
    /// counts as entailment.
    pub fn filter(self, rel: &RelationshipSet) -> RelationshipSet {
        let mut r = rel.clone();
        if matches!(self, Exploit::Excl | Exploit::None) {
            r = r.without_entailments();
            r.equivalences.clear();
        }
        if matches!(self, Exploit::Entail | Exploit::None) {
            r = r.without_exclusions();
        }
        r
    }
}

/// Default relationship cap when escalation is requested without one.
pub const DEFAULT_ESCALATE_CAP: usize = 1000;
/// Default mining time budget per escalation attempt sequence.
pub const DEFAULT_ESCALATE_TIME: Duration = Duration::from_secs(60);

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub learner: LearnerSpec,
    pub minsup_entail: usize,
    pub minsup_excl: usize,
    pub exploit: Exploit,
    pub folds: usize,
    pub seed: u64,
    /// Exclusion-support escalation caps; `None` disables escalation.
    pub escalation: Option<EscalationCaps>,
    pub clamp_epsilon: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            learner: LearnerSpec::Prior,
            minsup_entail: DEFAULT_MIN_SUPPORT,
            minsup_excl: DEFAULT_MIN_SUPPORT,
            exploit: Exploit::Both,
            folds: 10,
            seed: 0,
            escalation: None,
            clamp_epsilon: DEFAULT_CLAMP,
        }
    }
}

impl PipelineConfig {
    /// Parses a flat `key = value` file. `#` starts a comment. Keys:
    /// `learner`, `minsup_entail`, `minsup_excl`, `exploit`, `folds`,
    /// `seed`, `escalate_cap`, `escalate_time_secs`, `clamp_epsilon`.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut c = PipelineConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            c.set(key.trim(), value.trim())?;
        }
        Ok(c)
    }

    /// Sets one key as named in [`PipelineConfig::from_kv`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
        }
        match key {
            "learner" => self.learner = value.parse()?,
            "minsup_entail" => self.minsup_entail = num(key, value)?,
            "minsup_excl" => self.minsup_excl = num(key, value)?,
            "exploit" => self.exploit = value.parse()?,
            "folds" => self.folds = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "escalate_cap" => {
                let cap = num(key, value)?;
                let caps = self.escalation.get_or_insert(EscalationCaps {
                    max_relationships: cap,
                    max_time: DEFAULT_ESCALATE_TIME,
                });
                caps.max_relationships = cap;
            }
            "escalate_time_secs" => {
                let secs: f64 = num(key, value)?;
                if !(secs.is_finite() && secs >= 0.0) {
                    return Err(Error::Config(format!("`{key}` must be a non-negative number")));
                }
                let caps = self.escalation.get_or_insert(EscalationCaps {
                    max_relationships: DEFAULT_ESCALATE_CAP,
                    max_time: DEFAULT_ESCALATE_TIME,
                });
                caps.max_time = Duration::from_secs_f64(secs);
            }
            "clamp_epsilon" => self.clamp_epsilon = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.clamp_epsilon) {
            return Err(Error::Config(format!("clamp_epsilon {} outside [0, 0.5)", self.clamp_epsilon)));
        }
        if let Some(c) = self.escalation {
            if c.max_relationships == 0 {
                return Err(Error::ZeroCap);
            }
        }
        Ok(())
    }

    pub fn discovery(&self) -> DiscoveryConfig {
        DiscoveryConfig {
            minsup_entail: self.minsup_entail,
            minsup_excl: self.minsup_excl,
            escalation: self.escalation,
        }
    }
}

/// Everything one fold produced.
#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: usize,
    /// Discovered on the training split, before the exploit filter.
    pub relationships: RelationshipSet,
    /// Built from the filtered relationships, with leak frequencies.
    pub network: LabelNetwork,
    /// Test-split truth for the real labels.
    pub truth: LabelMatrix,
    /// Clamped input marginals: evidence nodes, then aliased labels.
    pub raw: PredictionTable,
    /// Posteriors in the same layout as `raw`.
    pub corrected: PredictionTable,
}

impl FoldResult {
    pub fn evaluate(&self) -> Result<FoldEvaluation> {
        let comparison = match compare(&self.raw, &self.corrected, &self.truth) {
            Ok(c) => Some(c),
            Err(Error::NoEvaluableLabels) => None,
            Err(e) => return Err(e),
        };
        Ok(FoldEvaluation {
            fold: self.fold,
            n_test: self.truth.n_instances(),
            relationships: RelationshipCounts::from(&self.relationships),
            comparison,
        })
    }
}

/// Corrects every row of an aligned table (see [`align_predictions`]),
/// checking the consistency invariants on each instance. Rows are
/// independent and processed in parallel; output order matches input.
pub fn correct_table(compiled: &CompiledNetwork, aligned: &PredictionTable, epsilon: f64) -> Result<PredictionTable> {
    let net = compiled.network();
    let mut slots = vec![usize::MAX; net.len()];
    for (i, node) in net.evidence_nodes() {
        slots[i] = aligned
            .column_index(&node.name)
            .ok_or_else(|| Error::MissingPrediction(node.name.clone()))?;
    }
    let alias_cols: Vec<(usize, usize)> = net
        .aliases()
        .iter()
        .map(|(alias, rep)| {
            let col = aligned
                .column_index(alias)
                .ok_or_else(|| Error::MissingPrediction(alias.clone()))?;
            Ok((col, net.index_of(rep).expect("validated alias")))
        })
        .collect::<Result<_>>()?;

    let rows: Vec<Vec<f64>> = (0..aligned.n_instances())
        .into_par_iter()
        .map(|r| {
            let row = aligned.row(r);
            let probs: Vec<f64> = slots.iter().map(|&j| if j == usize::MAX { 0.0 } else { row[j] }).collect();
            let evidence = EvidenceModel::from_probabilities(net, &probs, epsilon)?;
            let post = compiled.posteriors(&evidence)?;
            check_consistency(net, &post, CONSISTENCY_TOLERANCE)
                .map_err(|e| Error::Invariant(format!("instance `{}`: {e}", aligned.ids()[r])))?;
            let mut out = vec![0.0; aligned.columns().len()];
            for (node, &j) in slots.iter().enumerate() {
                if j != usize::MAX {
                    out[j] = post[node];
                }
            }
            for &(col, rep) in &alias_cols {
                out[col] = post[rep];
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut table = PredictionTable::new(aligned.columns().to_vec())?;
    for (id, row) in aligned.ids().iter().zip(rows) {
        table.push_row(id.clone(), row)?;
    }
    Ok(table)
}

/// Clamps every value of a table into `[ε, 1 − ε]`.
pub fn clamp_table(table: &PredictionTable, epsilon: f64) -> Result<PredictionTable> {
    table.check_range()?;
    let mut out = PredictionTable::new(table.columns().to_vec())?;
    for (i, id) in table.ids().iter().enumerate() {
        out.push_row(id.clone(), table.row(i).iter().map(|&p| clamp_probability(p, epsilon)).collect())?;
    }
    Ok(out)
}

/// Corrects an arbitrary predictions table as a filter: columns the
/// network models are replaced by their posteriors, other columns pass
/// through unchanged, and imputed leak columns are appended. Row order is
/// preserved.
pub fn correct_predictions(compiled: &CompiledNetwork, raw: &PredictionTable, epsilon: f64) -> Result<PredictionTable> {
    let net = compiled.network();
    let aligned = clamp_table(&align_full(raw, net)?, epsilon)?;
    let corrected = correct_table(compiled, &aligned, epsilon)?;
    let mut columns = raw.columns().to_vec();
    let appended: Vec<String> = corrected
        .columns()
        .iter()
        .filter(|c| raw.column_index(c).is_none())
        .cloned()
        .collect();
    columns.extend(appended.iter().cloned());
    let source: Vec<Option<usize>> = columns.iter().map(|c| corrected.column_index(c)).collect();
    let mut out = PredictionTable::new(columns)?;
    for i in 0..raw.n_instances() {
        let row = source
            .iter()
            .enumerate()
            .map(|(j, s)| match s {
                Some(k) => corrected.row(i)[*k],
                None => raw.row(i)[j],
            })
            .collect();
        out.push_row(raw.ids()[i].clone(), row)?;
    }
    Ok(out)
}

/// Evidence columns followed by aliased real labels.
fn layout(network: &LabelNetwork) -> Vec<String> {
    network
        .evidence_nodes()
        .map(|(_, n)| n.name.clone())
        .chain(network.aliases().keys().cloned())
        .collect()
}

/// Picks `layout(network)` columns out of `raw`, imputing missing leak
/// columns from training frequencies.
fn align_full(raw: &PredictionTable, network: &LabelNetwork) -> Result<PredictionTable> {
    let evidence = align_predictions(raw, network)?;
    let mut out = PredictionTable::new(layout(network))?;
    let alias_cols: Vec<usize> = network
        .aliases()
        .keys()
        .map(|a| {
            raw.column_index(a)
                .ok_or_else(|| Error::SchemaMismatch(format!("missing label column `{a}`")))
        })
        .collect::<Result<_>>()?;
    for i in 0..evidence.n_instances() {
        let mut row = evidence.row(i).to_vec();
        row.extend(alias_cols.iter().map(|&j| raw.row(i)[j]));
        out.push_row(evidence.ids()[i].clone(), row)?;
    }
    Ok(out)
}

/// Runs one fold: train on every other fold, correct this one.
pub fn run_fold(dataset: &MultiLabelDataset, split: &FoldSplit, fold: usize, config: &PipelineConfig) -> Result<FoldResult> {
    config.validate()?;
    if split.assignment().len() != dataset.n_instances() {
        return Err(Error::Shape(format!(
            "fold assignment covers {} instances, dataset has {}",
            split.assignment().len(),
            dataset.n_instances()
        )));
    }
    let train_idx = split.train_indices(fold);
    let test_idx = split.test_indices(fold);
    run_split(dataset, &train_idx, &test_idx, fold, config)
}

/// Like [`run_fold`] with explicit train and test rows; they may overlap.
pub fn run_split(
    dataset: &MultiLabelDataset,
    train_idx: &[usize],
    test_idx: &[usize],
    fold: usize,
    config: &PipelineConfig,
) -> Result<FoldResult> {
    config.validate()?;
    let train = dataset.select_rows(train_idx);
    let test = dataset.select_rows(test_idx);
    let test_ids: Vec<String> = test_idx.iter().map(usize::to_string).collect();

    let relationships = discover(train.labels(), &config.discovery())?;
    let mut network = build_network(&config.exploit.filter(&relationships), train.labels().names())?;
    let augmented = network.leak_labels(train.labels())?;
    network.set_leak_frequencies(&augmented)?;

    let raw = match &config.learner {
        LearnerSpec::Prior => learned(&PriorLearner, &train, &augmented, &test, &test_ids)?,
        LearnerSpec::NaiveBayes => learned(&NaiveBayes, &train, &augmented, &test, &test_ids)?,
        LearnerSpec::ExternalFile(path) => {
            let table = PredictionTable::load(path)?;
            check_instance_ids(&table, dataset.n_instances())?;
            table.select_ids(&test_ids)?
        }
        LearnerSpec::External(table) => {
            check_instance_ids(table, dataset.n_instances())?;
            table.select_ids(&test_ids)?
        }
    };
    let raw = clamp_table(&align_full(&raw, &network)?, config.clamp_epsilon)?;
    let compiled = CompiledNetwork::new(&network)?;
    let corrected = correct_table(&compiled, &raw, config.clamp_epsilon)?;
    Ok(FoldResult {
        fold,
        relationships,
        network,
        truth: test.labels().clone(),
        raw,
        corrected,
    })
}

fn learned(
    learner: &dyn BinaryLearner,
    train: &MultiLabelDataset,
    augmented: &LabelMatrix,
    test: &MultiLabelDataset,
    ids: &[String],
) -> Result<PredictionTable> {
    let models = train_binary_relevance(learner, train.features(), augmented)?;
    predict_marginals(&models, augmented.names(), test.features(), ids)
}

/// Cross-validation over `config.folds` seeded folds. Folds run in
/// parallel; results come back in fold order.
pub fn run_cv(dataset: &MultiLabelDataset, config: &PipelineConfig) -> Result<(Vec<FoldResult>, EvaluationReport)> {
    config.validate()?;
    let split = FoldSplit::random(dataset.n_instances(), config.folds, config.seed)?;
    let mut config = config.clone();
    if let LearnerSpec::ExternalFile(path) = &config.learner {
        let table = PredictionTable::load(path)?;
        check_instance_ids(&table, dataset.n_instances())?;
        config.learner = LearnerSpec::External(Arc::new(table));
    }
    let results: Vec<FoldResult> = (0..split.fold_count())
        .into_par_iter()
        .map(|k| run_fold(dataset, &split, k, &config))
        .collect::<Result<_>>()?;
    let evaluations = results.iter().map(FoldResult::evaluate).collect::<Result<Vec<_>>>()?;
    let report = EvaluationReport::from_folds(evaluations)?;
    Ok((results, report))
}
