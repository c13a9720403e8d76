use std::collections::BTreeMap;

use rayon::prelude::*;

use super::predictions::PredictionTable;
use crate::dataset::{FeatureColumn, FeatureMatrix, LabelMatrix};
use crate::error::{Error, Result};

/// Fits one binary probability model per call.
pub trait BinaryLearner: Send + Sync {
    fn fit(&self, features: &FeatureMatrix, target: &[bool]) -> Result<Box<dyn BinaryModel>>;
}

pub trait BinaryModel: Send + Sync {
    /// P(target = true) per instance, each in [0, 1].
    fn predict_proba(&self, features: &FeatureMatrix) -> Result<Vec<f64>>;
}

/// Laplace-smoothed positive rate, `(pos + 1) / (n + 2)`.
pub fn smoothed_prior(target: &[bool]) -> f64 {
    let pos = target.iter().filter(|&&t| t).count();
    (pos as f64 + 1.0) / (target.len() as f64 + 2.0)
}

/// Ignores the features and predicts the smoothed training frequency.
#[derive(Debug, Clone, Copy, Default)]
pub struct PriorLearner;

#[derive(Debug, Clone, Copy)]
struct ConstantModel(f64);

impl BinaryModel for ConstantModel {
    fn predict_proba(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        Ok(vec![self.0; features.n_instances()])
    }
}

impl BinaryLearner for PriorLearner {
    fn fit(&self, _features: &FeatureMatrix, target: &[bool]) -> Result<Box<dyn BinaryModel>> {
        Ok(Box::new(ConstantModel(smoothed_prior(target))))
    }
}

/// Naive Bayes over discretised features with additive smoothing α = 1.
///
/// Numeric features are split at the training median (`x > median`);
/// nominal features use their training categories plus one slot for
/// unseen values. Missing cells are skipped. A constant target yields the
/// smoothed prior.
#[derive(Debug, Clone, Copy, Default)]
pub struct NaiveBayes;

#[derive(Debug, Clone)]
enum Discretizer {
    Median(f64),
    Categories(BTreeMap<String, usize>),
}

impl Discretizer {
    fn fit(column: &FeatureColumn) -> Option<Self> {
        match column {
            FeatureColumn::Numeric(v) => {
                let mut xs: Vec<f64> = v.iter().flatten().copied().filter(|x| x.is_finite()).collect();
                if xs.is_empty() {
                    return None;
                }
                xs.sort_by(f64::total_cmp);
                let m = xs.len();
                let median = if m % 2 == 1 { xs[m / 2] } else { (xs[m / 2 - 1] + xs[m / 2]) / 2.0 };
                Some(Discretizer::Median(median))
            }
            FeatureColumn::Nominal(v) => {
                let mut cats = BTreeMap::new();
                for s in v.iter().flatten() {
                    let next = cats.len();
                    cats.entry(s.clone()).or_insert(next);
                }
                Some(Discretizer::Categories(cats))
            }
        }
    }

    /// Number of bins, including the unseen-category slot.
    fn bins(&self) -> usize {
        match self {
            Discretizer::Median(_) => 2,
            Discretizer::Categories(c) => c.len() + 1,
        }
    }

    fn bin(&self, column: &FeatureColumn, row: usize) -> Option<usize> {
        match (self, column) {
            (Discretizer::Median(m), FeatureColumn::Numeric(v)) => v[row].filter(|x| x.is_finite()).map(|x| usize::from(x > *m)),
            (Discretizer::Categories(c), FeatureColumn::Nominal(v)) => {
                v[row].as_ref().map(|s| c.get(s).copied().unwrap_or(c.len()))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
struct NaiveBayesModel {
    names: Vec<String>,
    numeric: Vec<bool>,
    prior_logit: f64,
    /// Per used feature: discretiser and log P(bin | class) for both classes.
    features: Vec<(usize, Discretizer, Vec<[f64; 2]>)>,
}

impl BinaryLearner for NaiveBayes {
    fn fit(&self, features: &FeatureMatrix, target: &[bool]) -> Result<Box<dyn BinaryModel>> {
        if features.n_instances() != target.len() {
            return Err(Error::Shape(format!(
                "{} feature rows for {} targets",
                features.n_instances(),
                target.len()
            )));
        }
        let prior = smoothed_prior(target);
        let pos = target.iter().filter(|&&t| t).count();
        if pos == 0 || pos == target.len() {
            return Ok(Box::new(ConstantModel(prior)));
        }
        let mut used = Vec::new();
        for (j, column) in features.columns().iter().enumerate() {
            let Some(disc) = Discretizer::fit(column) else { continue };
            let k = disc.bins();
            let mut counts = vec![[0usize; 2]; k];
            let mut totals = [0usize; 2];
            for (i, &t) in target.iter().enumerate() {
                if let Some(b) = disc.bin(column, i) {
                    counts[b][usize::from(t)] += 1;
                    totals[usize::from(t)] += 1;
                }
            }
            let logp = counts
                .iter()
                .map(|c| {
                    [0, 1].map(|y| ((c[y] as f64 + 1.0) / (totals[y] as f64 + k as f64)).ln())
                })
                .collect();
            used.push((j, disc, logp));
        }
        Ok(Box::new(NaiveBayesModel {
            names: features.names().to_vec(),
            numeric: features.columns().iter().map(FeatureColumn::is_numeric).collect(),
            prior_logit: (prior / (1.0 - prior)).ln(),
            features: used,
        }))
    }
}

impl BinaryModel for NaiveBayesModel {
    fn predict_proba(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        let numeric: Vec<bool> = features.columns().iter().map(FeatureColumn::is_numeric).collect();
        if features.names() != self.names.as_slice() || numeric != self.numeric {
            return Err(Error::SchemaMismatch(
                "prediction features differ from training features".into(),
            ));
        }
        Ok((0..features.n_instances())
            .map(|i| {
                let mut logit = self.prior_logit;
                for (j, disc, logp) in &self.features {
                    if let Some(b) = disc.bin(&features.columns()[*j], i) {
                        logit += logp[b][1] - logp[b][0];
                    }
                }
                1.0 / (1.0 + (-logit).exp())
            })
            .collect())
    }
}

/// One model per label column, fitted in parallel.
pub fn train_binary_relevance(
    learner: &dyn BinaryLearner,
    features: &FeatureMatrix,
    labels: &LabelMatrix,
) -> Result<Vec<Box<dyn BinaryModel>>> {
    (0..labels.n_labels())
        .into_par_iter()
        .map(|j| learner.fit(features, labels.column(j)))
        .collect()
}

/// Predicts every model on `features` into a table with `names` as columns.
pub fn predict_marginals<S: AsRef<str>>(
    models: &[Box<dyn BinaryModel>],
    names: &[S],
    features: &FeatureMatrix,
    ids: &[String],
) -> Result<PredictionTable> {
    if models.len() != names.len() || ids.len() != features.n_instances() {
        return Err(Error::Shape("models, names and ids do not line up".into()));
    }
    let columns: Vec<Vec<f64>> = models
        .par_iter()
        .map(|m| m.predict_proba(features))
        .collect::<Result<_>>()?;
    let mut table = PredictionTable::new(names.iter().map(|s| s.as_ref().to_string()).collect())?;
    for (i, id) in ids.iter().enumerate() {
        table.push_row(id.clone(), columns.iter().map(|c| c[i]).collect())?;
    }
    Ok(table)
}
