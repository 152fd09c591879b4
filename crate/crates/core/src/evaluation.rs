//! Group k-fold cross-validation of the two learners.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::discriminant::{accuracy, Discriminant};
use crate::dtree::{expand_weighted, fit_tree, tree_to_discriminant, DecisionTree, TreeParams};
use crate::error::{Error, Result};
use crate::mlc::{learn_conjunctive, MlcOptions, MlcResult};

/// Fold index for every item, given each item's group.
///
/// Distinct groups are sorted, shuffled with `seed`, and dealt round-robin,
/// so fold sizes in groups differ by at most one.
pub fn group_kfold<G: Ord + Clone>(groups: &[G], k: usize, seed: u64) -> Result<Vec<usize>> {
    let mut distinct: Vec<G> = groups
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if k == 0 || k > distinct.len() {
        return Err(Error::Evaluation(format!(
            "k = {k} folds but {} groups",
            distinct.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    distinct.shuffle(&mut rng);
    let fold_of: BTreeMap<G, usize> = distinct
        .into_iter()
        .enumerate()
        .map(|(i, g)| (g, i % k))
        .collect();
    Ok(groups.iter().map(|g| fold_of[g]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Learner {
    DecisionTree(TreeParams),
    MaxLikelihood { time_limit: Option<Duration> },
}

impl Learner {
    pub fn name(&self) -> &'static str {
        match self {
            Learner::DecisionTree(_) => "dtree",
            Learner::MaxLikelihood { .. } => "mlc",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Model {
    Tree(DecisionTree),
    Conjunctive(MlcResult),
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: Model,
    pub discriminant: Discriminant,
}

impl TrainedModel {
    /// False only when the conjunctive search stopped at a limit.
    pub fn optimal(&self) -> bool {
        match &self.model {
            Model::Tree(_) => true,
            Model::Conjunctive(r) => r.optimal,
        }
    }

    pub fn tree_height(&self) -> Option<usize> {
        match &self.model {
            Model::Tree(t) => Some(t.height()),
            Model::Conjunctive(_) => None,
        }
    }

    pub fn max_conjuncts(&self) -> Option<usize> {
        match &self.model {
            Model::Tree(_) => None,
            Model::Conjunctive(r) => Some(r.discriminant.max_conjuncts()),
        }
    }
}

/// Trains `learner` on the traces at `idx`.
pub fn train(data: &Dataset, idx: &[usize], learner: &Learner) -> TrainedModel {
    match learner {
        Learner::DecisionTree(params) => {
            let dists = data.label_refs(idx);
            let mut samples = expand_weighted(&dists);
            for s in samples.iter_mut() {
                s.trace = idx[s.trace];
            }
            let tree = fit_tree(
                &data.attribute_names,
                &data.counts,
                &samples,
                data.num_labels,
                &data.centers_s,
                params,
            );
            let discriminant = tree_to_discriminant(&tree, data.num_labels);
            TrainedModel {
                model: Model::Tree(tree),
                discriminant,
            }
        }
        Learner::MaxLikelihood { time_limit } => {
            let preds: Vec<&[bool]> = idx.iter().map(|&i| data.predicates.values(i)).collect();
            let options = MlcOptions {
                deadline: time_limit.map(|t| Instant::now() + t),
                ..Default::default()
            };
            let result =
                learn_conjunctive(&preds, &data.label_refs(idx), data.num_labels, &options);
            TrainedModel {
                discriminant: result.discriminant.clone(),
                model: Model::Conjunctive(result),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub accuracy: f64,
    pub learn_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tree_height: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_conjuncts: Option<usize>,
    pub optimal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub learner: String,
    pub k: usize,
    pub seed: u64,
    pub num_traces: usize,
    pub num_labels: usize,
    pub num_attributes: usize,
    pub num_predicates: usize,
    /// Mean of the per-fold weighted accuracies.
    pub accuracy: f64,
    pub mean_learn_time_s: f64,
    pub total_learn_time_s: f64,
    /// Largest tree height over folds.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tree_height: Option<usize>,
    /// Largest conjunction over folds.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_conjuncts: Option<usize>,
    pub all_optimal: bool,
    pub folds: Vec<FoldReport>,
    pub fold_of: BTreeMap<String, usize>,
}

impl EvalReport {
    /// The report with wall-clock fields zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.mean_learn_time_s = 0.0;
        r.total_learn_time_s = 0.0;
        for f in r.folds.iter_mut() {
            f.learn_time_s = 0.0;
        }
        r
    }
}

/// Cross-validates `learner` with one group per trace.
pub fn evaluate(data: &Dataset, learner: &Learner, k: usize, seed: u64) -> Result<EvalReport> {
    let folds = group_kfold(&data.trace_ids, k, seed)?;
    let mut reports = Vec::with_capacity(k);
    for fold in 0..k {
        let (test, train_idx): (Vec<usize>, Vec<usize>) =
            (0..data.len()).partition(|&i| folds[i] == fold);
        if train_idx.is_empty() {
            return Err(Error::Fold {
                fold,
                source: Box::new(Error::Evaluation("empty training set".into())),
            });
        }
        let start = Instant::now();
        let model = train(data, &train_idx, learner);
        let learn_time_s = start.elapsed().as_secs_f64();
        let acc = accuracy(
            &model.discriminant,
            data.observations(&test),
            &test
                .iter()
                .map(|&i| data.labels[i].clone())
                .collect::<Vec<_>>(),
        );
        reports.push(FoldReport {
            fold,
            train_size: train_idx.len(),
            test_size: test.len(),
            accuracy: acc,
            learn_time_s,
            tree_height: model.tree_height(),
            max_conjuncts: model.max_conjuncts(),
            optimal: model.optimal(),
        });
    }
    let n = reports.len() as f64;
    let total: f64 = reports.iter().map(|r| r.learn_time_s).sum();
    Ok(EvalReport {
        learner: learner.name().into(),
        k,
        seed,
        num_traces: data.len(),
        num_labels: data.num_labels,
        num_attributes: data.attribute_names.len(),
        num_predicates: data.predicates.num_predicates(),
        accuracy: reports.iter().map(|r| r.accuracy).sum::<f64>() / n,
        mean_learn_time_s: total / n,
        total_learn_time_s: total,
        tree_height: reports.iter().filter_map(|r| r.tree_height).max(),
        max_conjuncts: reports.iter().filter_map(|r| r.max_conjuncts).max(),
        all_optimal: reports.iter().all(|r| r.optimal),
        fold_of: data
            .trace_ids
            .iter()
            .cloned()
            .zip(folds.iter().copied())
            .collect(),
        folds: reports,
    })
}
