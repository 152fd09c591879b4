//! Weighted CART over per-method call counts.
//!
//! A trace whose label distribution puts mass on several labels contributes
//! one sample per label, weighted by that mass. Splits are `count ≤ θ` with
//! θ the midpoint between consecutive observed values, chosen to maximize
//! the weighted Gini decrease. There is no pruning.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::discriminant::{Discriminant, Formula, ThresholdTest};
use crate::trace::LabelDistribution;

/// Label mass below this is not expanded into a sample.
pub const WEIGHT_FLOOR: f64 = 1e-6;
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    /// Row of the owning trace in the count matrix.
    pub trace: usize,
    pub label: usize,
    pub weight: f64,
}

/// One sample per (trace, label) with mass above [`WEIGHT_FLOOR`].
pub fn expand_weighted(dists: &[&LabelDistribution]) -> Vec<WeightedSample> {
    dists
        .iter()
        .enumerate()
        .flat_map(|(trace, d)| {
            d.probs()
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > WEIGHT_FLOOR)
                .map(move |(label, &weight)| WeightedSample {
                    trace,
                    label,
                    weight,
                })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf_weight: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_leaf_weight: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum TreeNode {
    Split {
        attribute: usize,
        threshold: f64,
        /// Taken when `count ≤ threshold`.
        left: usize,
        right: usize,
    },
    Leaf {
        label: usize,
        histogram: Vec<f64>,
        mean_s: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub attribute_names: Vec<String>,
    pub num_labels: usize,
    /// Nodes in preorder; the root is node 0.
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn predict(&self, counts: &[u64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Split {
                    attribute,
                    threshold,
                    left,
                    right,
                } => {
                    at = if (counts[*attribute] as f64) <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
                TreeNode::Leaf { label, .. } => return *label,
            }
        }
    }

    /// Edges on the longest root-to-leaf path.
    pub fn height(&self) -> usize {
        fn go(tree: &DecisionTree, at: usize) -> usize {
            match &tree.nodes[at] {
                TreeNode::Split { left, right, .. } => 1 + go(tree, *left).max(go(tree, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    /// Root-to-leaf test sequences paired with the leaf label.
    pub fn paths(&self) -> Vec<(Vec<ThresholdTest>, usize)> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, Vec::new())];
        while let Some((at, path)) = stack.pop() {
            match &self.nodes[at] {
                TreeNode::Split {
                    attribute,
                    threshold,
                    left,
                    right,
                } => {
                    let mut r = path.clone();
                    r.push(ThresholdTest {
                        attribute: *attribute,
                        threshold: *threshold,
                        le: false,
                    });
                    stack.push((*right, r));
                    let mut l = path;
                    l.push(ThresholdTest {
                        attribute: *attribute,
                        threshold: *threshold,
                        le: true,
                    });
                    stack.push((*left, l));
                }
                TreeNode::Leaf { label, .. } => out.push((path, *label)),
            }
        }
        out
    }
}

fn gini(hist: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - hist.iter().map(|w| (w / total).powi(2)).sum::<f64>()
}

fn argmax(hist: &[f64]) -> usize {
    let mut best = 0;
    for (i, w) in hist.iter().enumerate() {
        if *w > hist[best] {
            best = i;
        }
    }
    best
}

struct Split {
    attribute: usize,
    threshold: f64,
    gain: f64,
}

struct Builder<'a> {
    samples: &'a [WeightedSample],
    /// Nonzero `(attribute, count)` entries per trace row.
    sparse: Vec<Vec<(usize, u64)>>,
    num_attributes: usize,
    k: usize,
    params: TreeParams,
    centers_s: &'a [f64],
    nodes: Vec<TreeNode>,
    buckets: Vec<Vec<(u64, usize, f64)>>,
}

impl Builder<'_> {
    fn histogram(&self, idx: &[usize]) -> Vec<f64> {
        let mut h = vec![0.0; self.k];
        for &s in idx {
            h[self.samples[s].label] += self.samples[s].weight;
        }
        h
    }

    fn value(&self, sample: usize, attribute: usize) -> u64 {
        let row = &self.sparse[self.samples[sample].trace];
        row.binary_search_by_key(&attribute, |e| e.0)
            .map(|p| row[p].1)
            .unwrap_or(0)
    }

    fn best_split(&mut self, idx: &[usize], hist: &[f64], total: f64) -> Option<Split> {
        let parent = gini(hist, total);
        for b in self.buckets.iter_mut() {
            b.clear();
        }
        for &s in idx {
            let sample = self.samples[s];
            for &(a, v) in &self.sparse[sample.trace] {
                self.buckets[a].push((v, sample.label, sample.weight));
            }
        }
        let mut best: Option<Split> = None;
        let mut left = vec![0.0; self.k];
        for a in 0..self.num_attributes {
            let bucket = &mut self.buckets[a];
            if bucket.is_empty() {
                continue;
            }
            let zeros = idx.len() - bucket.len();
            bucket.sort_unstable_by_key(|x| x.0);
            if zeros == 0 && bucket[0].0 == bucket[bucket.len() - 1].0 {
                continue;
            }
            // Left side starts as the zero group: everything not in the bucket.
            left.copy_from_slice(hist);
            for &(_, l, w) in bucket.iter() {
                left[l] -= w;
            }
            let mut left_total: f64 = left.iter().sum();
            let mut prev = 0u64;
            let mut started = zeros > 0;
            let mut pos = 0;
            while pos < bucket.len() {
                let v = bucket[pos].0;
                if started {
                    let right_total = total - left_total;
                    if left_total >= self.params.min_leaf_weight
                        && right_total >= self.params.min_leaf_weight
                    {
                        let right: Vec<f64> = hist.iter().zip(&left).map(|(h, l)| h - l).collect();
                        let gain = parent
                            - (left_total / total) * gini(&left, left_total)
                            - (right_total / total) * gini(&right, right_total);
                        if best.as_ref().is_none_or(|b| gain > b.gain) {
                            best = Some(Split {
                                attribute: a,
                                threshold: (prev as f64 + v as f64) / 2.0,
                                gain,
                            });
                        }
                    }
                }
                while pos < bucket.len() && bucket[pos].0 == v {
                    left[bucket[pos].1] += bucket[pos].2;
                    left_total += bucket[pos].2;
                    pos += 1;
                }
                prev = v;
                started = true;
            }
        }
        best.filter(|b| b.gain > MIN_GAIN)
    }

    fn leaf(&mut self, hist: Vec<f64>) -> usize {
        let label = argmax(&hist);
        self.nodes.push(TreeNode::Leaf {
            label,
            histogram: hist,
            mean_s: self.centers_s.get(label).copied(),
        });
        self.nodes.len() - 1
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let hist = self.histogram(&idx);
        let total: f64 = hist.iter().sum();
        let pure = hist.iter().filter(|w| **w > 0.0).count() <= 1;
        let at_limit = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || at_limit {
            return self.leaf(hist);
        }
        let Some(split) = self.best_split(&idx, &hist, total) else {
            return self.leaf(hist);
        };
        let (l_idx, r_idx): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&s| (self.value(s, split.attribute) as f64) <= split.threshold);
        let at = self.nodes.len();
        self.nodes.push(TreeNode::Split {
            attribute: split.attribute,
            threshold: split.threshold,
            left: 0,
            right: 0,
        });
        let left = self.build(l_idx, depth + 1);
        let right = self.build(r_idx, depth + 1);
        if let TreeNode::Split {
            left: l, right: r, ..
        } = &mut self.nodes[at]
        {
            *l = left;
            *r = right;
        }
        at
    }
}

/// Fits a tree on `samples` whose `trace` fields index rows of `counts`.
///
/// `centers_s`, when given, annotates each leaf with its label's mean time.
/// The result is a pure function of the inputs: ties between splits go to
/// the lower attribute index, then the lower threshold.
pub fn fit_tree(
    attribute_names: &[String],
    counts: &[Vec<u64>],
    samples: &[WeightedSample],
    num_labels: usize,
    centers_s: &[f64],
    params: &TreeParams,
) -> DecisionTree {
    let sparse = counts
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, c)| **c > 0)
                .map(|(a, c)| (a, *c))
                .collect()
        })
        .collect();
    let mut builder = Builder {
        samples,
        sparse,
        num_attributes: attribute_names.len(),
        k: num_labels,
        params: *params,
        centers_s,
        nodes: Vec::new(),
        buckets: vec![Vec::new(); attribute_names.len()],
    };
    if samples.is_empty() {
        builder.leaf(vec![0.0; num_labels]);
    } else {
        builder.build((0..samples.len()).collect(), 0);
    }
    DecisionTree {
        attribute_names: attribute_names.to_vec(),
        num_labels,
        nodes: builder.nodes,
    }
}

/// Per label, the disjunction of the paths to leaves predicting it; the last
/// label's formula is `true`.
pub fn tree_to_discriminant(tree: &DecisionTree, num_labels: usize) -> Discriminant {
    let k = num_labels.max(1);
    let mut per_label: Vec<Vec<Vec<ThresholdTest>>> = vec![Vec::new(); k];
    for (path, label) in tree.paths() {
        if label < k {
            per_label[label].push(path);
        }
    }
    let mut formulas: Vec<Formula> = per_label.into_iter().map(Formula::Dnf).collect();
    formulas[k - 1] = Formula::Dnf(vec![Vec::new()]);
    Discriminant::new(formulas).expect("last formula is true")
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering: tests on internal nodes, label, mean time and weight
/// histogram on leaves.
pub fn export_dot(tree: &DecisionTree) -> String {
    let mut out = String::from("digraph discriminant {\n");
    out.push_str("  node [shape=box, fontname=\"Helvetica\"];\n");
    for (i, node) in tree.nodes.iter().enumerate() {
        match node {
            TreeNode::Split {
                attribute,
                threshold,
                ..
            } => {
                let _ = writeln!(
                    out,
                    "  n{i} [label=\"{} <= {}\"];",
                    escape(&tree.attribute_names[*attribute]),
                    threshold
                );
            }
            TreeNode::Leaf {
                label,
                histogram,
                mean_s,
            } => {
                let hist: Vec<String> = histogram.iter().map(|w| format!("{w:.3}")).collect();
                let mean = mean_s.map_or_else(|| "?".to_string(), |m| format!("{m:.4} s"));
                let _ = writeln!(
                    out,
                    "  n{i} [shape=ellipse, label=\"label {label}\\nmean {mean}\\n[{}]\"];",
                    hist.join(", ")
                );
            }
        }
    }
    for (i, node) in tree.nodes.iter().enumerate() {
        if let TreeNode::Split { left, right, .. } = node {
            let _ = writeln!(out, "  n{i} -> n{left} [label=\"true\"];");
            let _ = writeln!(out, "  n{i} -> n{right} [label=\"false\"];");
        }
    }
    out.push_str("}\n");
    out
}
