//! Maximum-likelihood monotone conjunctive discriminants.
//!
//! For two labels, pick a set `S` of predicates; a trace keeps label 0 iff
//! none of its falsified predicates `R_i` is in `S`, i.e. `w_i = [S ∩ R_i ≠ ∅]`.
//! The log-likelihood is
//!
//! ```text
//!   Σ_i (1 - w_i)·log r_i + w_i·log(1 - r_i)
//! ```
//!
//! Because `w_i` is determined by `S`, the 0/1 program over `(x, w)` is the
//! same as optimizing over subsets `S`, which [`solve_two_label`] does
//! exactly by best-first branch-and-bound. More labels are handled by
//! peeling off one label at a time ([`learn_conjunctive`]).

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::discriminant::{clamped_ln, ConjunctiveFormula, Discriminant, Formula};
use crate::numeric::exact_sum;
use crate::trace::LabelDistribution;

/// Two-label instance: per-trace falsified predicates and log-weights.
#[derive(Debug, Clone, PartialEq)]
pub struct IlpInstance {
    pub num_predicates: usize,
    /// `R_i`: sorted indices of predicates false in trace `i`.
    pub falsified: Vec<Vec<usize>>,
    /// Objective term when the trace keeps the target label (`w_i = 0`).
    pub log_keep: Vec<f64>,
    /// Objective term when the trace is passed on (`w_i = 1`).
    pub log_switch: Vec<f64>,
}

impl IlpInstance {
    pub fn num_traces(&self) -> usize {
        self.falsified.len()
    }

    /// `w_i` for every trace under the conjunction `chosen`.
    pub fn switched(&self, chosen: &[usize]) -> Vec<bool> {
        let mut mask = vec![false; self.num_predicates];
        for &j in chosen {
            mask[j] = true;
        }
        self.falsified
            .iter()
            .map(|r| r.iter().any(|&j| mask[j]))
            .collect()
    }

    /// Log-likelihood of the conjunction `chosen` (correctly rounded).
    pub fn objective(&self, chosen: &[usize]) -> f64 {
        self.objective_of_switched(&self.switched(chosen))
    }

    fn objective_of_switched(&self, switched: &[bool]) -> f64 {
        exact_sum(switched.iter().enumerate().map(|(i, &w)| {
            if w {
                self.log_switch[i]
            } else {
                self.log_keep[i]
            }
        }))
    }

    /// Optimistic value: every trace takes its better term.
    pub fn upper_bound(&self) -> f64 {
        exact_sum((0..self.num_traces()).map(|i| self.log_keep[i].max(self.log_switch[i])))
    }

    fn columns(&self) -> Vec<Vec<usize>> {
        let mut cols = vec![Vec::new(); self.num_predicates];
        for (i, r) in self.falsified.iter().enumerate() {
            for &j in r {
                cols[j].push(i);
            }
        }
        cols
    }
}

/// Builds the instance "label `target` vs. the rest" from predicate
/// valuations and label distributions. The remaining labels' mass is summed.
pub fn build_instance(
    predicates: &[&[bool]],
    dists: &[&LabelDistribution],
    target: usize,
) -> IlpInstance {
    let num_predicates = predicates.first().map_or(0, |p| p.len());
    let falsified = predicates
        .iter()
        .map(|p| (0..p.len()).filter(|&j| !p[j]).collect())
        .collect();
    let log_keep = dists.iter().map(|d| clamped_ln(d.prob(target))).collect();
    let log_switch = dists
        .iter()
        .map(|d| {
            let rest = d
                .probs()
                .iter()
                .enumerate()
                .filter(|(l, _)| *l != target)
                .map(|(_, p)| p)
                .sum::<f64>();
            clamped_ln(rest)
        })
        .collect();
    IlpInstance {
        num_predicates,
        falsified,
        log_keep,
        log_switch,
    }
}

/// A reduced instance plus what is needed to map solutions back.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub reduced: IlpInstance,
    /// Original index of each reduced predicate (lowest of its column class).
    pub kept_predicates: Vec<usize>,
    /// Predicates in no `R_i`; never part of an optimal minimal conjunction.
    pub dropped_predicates: Vec<usize>,
    /// `(duplicate, representative)` pairs of identical columns.
    pub merged_predicates: Vec<(usize, usize)>,
    /// Original traces behind each reduced trace.
    pub trace_groups: Vec<Vec<usize>>,
    /// Traces with `R_i = ∅`, whose `w_i` is fixed to 0.
    pub fixed_keep: Vec<usize>,
}

impl Preprocessed {
    pub fn expand(&self, reduced_chosen: &[usize]) -> ConjunctiveFormula {
        ConjunctiveFormula::new(reduced_chosen.iter().map(|&j| self.kept_predicates[j]))
    }
}

/// Simplifies an instance without changing its optimum:
/// fixes `w_i = 0` when `R_i = ∅`, drops predicates that appear in no `R_i`,
/// merges identical predicate columns and merges traces with identical `R_i`.
pub fn preprocess(inst: &IlpInstance) -> Preprocessed {
    let cols = inst.columns();
    let mut dropped_predicates = Vec::new();
    let mut merged_predicates = Vec::new();
    let mut kept_predicates = Vec::new();
    let mut class_of: HashMap<&[usize], usize> = HashMap::new();
    let mut new_index = vec![usize::MAX; inst.num_predicates];
    for (j, col) in cols.iter().enumerate() {
        if col.is_empty() {
            dropped_predicates.push(j);
            continue;
        }
        match class_of.get(col.as_slice()) {
            Some(&rep) => {
                merged_predicates.push((j, kept_predicates[rep]));
                new_index[j] = rep;
            }
            None => {
                let idx = kept_predicates.len();
                class_of.insert(col.as_slice(), idx);
                kept_predicates.push(j);
                new_index[j] = idx;
            }
        }
    }

    let mut fixed_keep = Vec::new();
    let mut groups: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let mut group_of: HashMap<Vec<usize>, usize> = HashMap::new();
    for (i, r) in inst.falsified.iter().enumerate() {
        if r.is_empty() {
            fixed_keep.push(i);
            continue;
        }
        let mut reduced: Vec<usize> = r.iter().map(|&j| new_index[j]).collect();
        reduced.sort_unstable();
        reduced.dedup();
        match group_of.get(&reduced) {
            Some(&g) => groups[g].1.push(i),
            None => {
                group_of.insert(reduced.clone(), groups.len());
                groups.push((reduced, vec![i]));
            }
        }
    }

    let mut falsified = Vec::with_capacity(groups.len());
    let mut log_keep = Vec::with_capacity(groups.len());
    let mut log_switch = Vec::with_capacity(groups.len());
    let mut trace_groups = Vec::with_capacity(groups.len());
    for (r, members) in groups {
        falsified.push(r);
        log_keep.push(exact_sum(members.iter().map(|&i| inst.log_keep[i])));
        log_switch.push(exact_sum(members.iter().map(|&i| inst.log_switch[i])));
        trace_groups.push(members);
    }

    Preprocessed {
        reduced: IlpInstance {
            num_predicates: kept_predicates.len(),
            falsified,
            log_keep,
            log_switch,
        },
        kept_predicates,
        dropped_predicates,
        merged_predicates,
        trace_groups,
        fixed_keep,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Stop and return the incumbent after this instant.
    pub deadline: Option<Instant>,
    /// Stop and return the incumbent once this many nodes are open.
    pub max_open_nodes: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            deadline: None,
            max_open_nodes: 4_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLabelSolution {
    pub formula: ConjunctiveFormula,
    pub log_likelihood: f64,
    /// False when a limit stopped the search early.
    pub optimal: bool,
    pub nodes_explored: u64,
    pub root_bound: f64,
}

/// `a` is preferred to `b`: higher value, then fewer conjuncts, then the
/// lexicographically smaller index list.
fn better(a_value: f64, a_set: &[usize], b_value: f64, b_set: &[usize]) -> bool {
    match a_value.total_cmp(&b_value) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => match a_set.len().cmp(&b_set.len()) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => a_set < b_set,
        },
    }
}

struct Node {
    bound: f64,
    depth: u32,
    seq: u64,
    chosen: Vec<usize>,
    excluded: Vec<u64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Max-heap: highest bound, then deepest, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

fn bit(set: &[u64], j: usize) -> bool {
    set[j / 64] >> (j % 64) & 1 == 1
}

fn set_bit(set: &mut [u64], j: usize) {
    set[j / 64] |= 1 << (j % 64);
}

/// Exact optimum of the two-label program by best-first branch-and-bound.
///
/// A node fixes some predicates in and some out. Its bound gives each trace
/// `log(1-r)` if an included predicate falsifies it, `log r` if all of `R_i`
/// is excluded, and the larger of the two otherwise. Free predicates that
/// touch no undecided trace are excluded outright: including them changes no
/// `w_i` and only lengthens the conjunction.
pub fn solve_two_label(inst: &IlpInstance, options: &SolverOptions) -> TwoLabelSolution {
    let n = inst.num_traces();
    let m = inst.num_predicates;
    let cols = inst.columns();
    let best_term: Vec<f64> = (0..n)
        .map(|i| inst.log_keep[i].max(inst.log_switch[i]))
        .collect();
    let magnitude: f64 = best_term
        .iter()
        .zip(&inst.log_keep)
        .zip(&inst.log_switch)
        .map(|((_, a), b)| a.abs().max(b.abs()))
        .sum();
    // Covers rounding in the incremental child bounds.
    let slack = 1e-10 * (1.0 + magnitude);
    let root_bound = inst.upper_bound();

    let mut incumbent: Vec<usize> = Vec::new();
    let mut incumbent_value = inst.objective(&incumbent);
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node {
        bound: root_bound,
        depth: 0,
        seq,
        chosen: Vec::new(),
        excluded: vec![0; m.div_ceil(64)],
    });

    let mut nodes_explored = 0u64;
    let mut optimal = true;
    let mut switched = vec![false; n];
    let mut free_left = vec![0usize; n];

    while let Some(node) = heap.pop() {
        if node.bound < incumbent_value - slack {
            break;
        }
        nodes_explored += 1;
        if nodes_explored.is_multiple_of(256) {
            if let Some(deadline) = options.deadline {
                if Instant::now() >= deadline {
                    optimal = false;
                    break;
                }
            }
        }
        if heap.len() > options.max_open_nodes {
            optimal = false;
            break;
        }

        // Trace status under this node's decisions.
        switched.iter_mut().for_each(|w| *w = false);
        for &j in &node.chosen {
            for &i in &cols[j] {
                switched[i] = true;
            }
        }
        for (i, r) in inst.falsified.iter().enumerate() {
            free_left[i] = r.len();
        }
        for (j, col) in cols.iter().enumerate() {
            if bit(&node.excluded, j) {
                for &i in col {
                    free_left[i] -= 1;
                }
            }
        }
        let undecided = |i: usize| !switched[i] && free_left[i] > 0;
        let bound = exact_sum((0..n).map(|i| {
            if switched[i] {
                inst.log_switch[i]
            } else if free_left[i] == 0 {
                inst.log_keep[i]
            } else {
                best_term[i]
            }
        }));
        if bound < incumbent_value - slack {
            continue;
        }

        let value = inst.objective_of_switched(&switched);
        if better(value, &node.chosen, incumbent_value, &incumbent) {
            incumbent_value = value;
            incumbent.clone_from(&node.chosen);
        }

        let mut excluded = node.excluded.clone();
        let mut branch: Option<(usize, usize)> = None;
        for (j, col) in cols.iter().enumerate() {
            if bit(&node.excluded, j) || node.chosen.contains(&j) {
                continue;
            }
            let touch = col.iter().filter(|&&i| undecided(i)).count();
            if touch == 0 {
                set_bit(&mut excluded, j);
            } else if branch.is_none_or(|(_, t)| touch > t) {
                branch = Some((j, touch));
            }
        }
        let Some((j, _)) = branch else { continue };

        let mut in_bound = bound;
        let mut out_bound = bound;
        for &i in &cols[j] {
            if undecided(i) {
                in_bound -= best_term[i] - inst.log_switch[i];
                if free_left[i] == 1 {
                    out_bound -= best_term[i] - inst.log_keep[i];
                }
            }
        }

        let mut chosen = node.chosen.clone();
        chosen.push(j);
        chosen.sort_unstable();
        if in_bound >= incumbent_value - slack {
            seq += 1;
            heap.push(Node {
                bound: in_bound,
                depth: node.depth + 1,
                seq,
                chosen,
                excluded: excluded.clone(),
            });
        }
        if out_bound >= incumbent_value - slack {
            set_bit(&mut excluded, j);
            seq += 1;
            heap.push(Node {
                bound: out_bound,
                depth: node.depth + 1,
                seq,
                chosen: node.chosen,
                excluded,
            });
        }
    }

    TwoLabelSolution {
        formula: ConjunctiveFormula::new(incumbent),
        log_likelihood: incumbent_value,
        optimal,
        nodes_explored,
        root_bound,
    }
}

/// Preprocesses, solves the reduced instance, and reports the mapped-back
/// conjunction scored on the original instance.
pub fn solve_preprocessed(inst: &IlpInstance, options: &SolverOptions) -> TwoLabelSolution {
    let pre = preprocess(inst);
    let sol = solve_two_label(&pre.reduced, options);
    let formula = pre.expand(sol.formula.conjuncts());
    TwoLabelSolution {
        log_likelihood: inst.objective(formula.conjuncts()),
        formula,
        optimal: sol.optimal,
        nodes_explored: sol.nodes_explored,
        root_bound: inst.upper_bound(),
    }
}

/// Enumerates all `2^m` conjunctions. Same objective and tie-breaking as
/// [`solve_two_label`]; usable for `m` up to about 20.
pub fn brute_force_two_label(inst: &IlpInstance) -> (ConjunctiveFormula, f64) {
    let m = inst.num_predicates;
    assert!(m <= 24, "brute force over 2^{m} subsets");
    let mut best: Vec<usize> = Vec::new();
    let mut best_value = inst.objective(&best);
    for mask in 1u64..(1u64 << m) {
        let set: Vec<usize> = (0..m).filter(|&j| mask >> j & 1 == 1).collect();
        let value = inst.objective(&set);
        if better(value, &set, best_value, &best) {
            best_value = value;
            best = set;
        }
    }
    (ConjunctiveFormula::new(best), best_value)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MlcOptions {
    pub deadline: Option<Instant>,
    pub max_open_nodes: Option<usize>,
    /// Skip preprocessing (for testing the raw solver).
    pub no_preprocess: bool,
}

/// One label's step in the recursive reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlcStep {
    pub label: usize,
    pub traces_remaining: usize,
    pub conjuncts: usize,
    pub log_likelihood: f64,
    pub optimal: bool,
    pub nodes_explored: u64,
    /// No traces were left; the full conjunction was used.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlcResult {
    pub discriminant: Discriminant,
    pub optimal: bool,
    pub steps: Vec<MlcStep>,
}

/// Learns `⟨φ_1, …, φ_{K-1}, true⟩` by solving label `i` against the rest,
/// removing the traces that satisfy `φ_i`, and moving on to label `i + 1`.
///
/// If every trace is gone before the last label, the remaining formulas
/// become the conjunction of all predicates.
pub fn learn_conjunctive(
    predicates: &[&[bool]],
    dists: &[&LabelDistribution],
    num_labels: usize,
    options: &MlcOptions,
) -> MlcResult {
    let m = predicates.first().map_or(0, |p| p.len());
    let solver = SolverOptions {
        deadline: options.deadline,
        max_open_nodes: options
            .max_open_nodes
            .unwrap_or(SolverOptions::default().max_open_nodes),
    };
    let mut remaining: Vec<usize> = (0..predicates.len()).collect();
    let mut formulas = Vec::with_capacity(num_labels);
    let mut steps = Vec::new();
    let mut optimal = true;
    for label in 0..num_labels.saturating_sub(1) {
        if remaining.is_empty() {
            formulas.push(Formula::Conjunction(ConjunctiveFormula::new(0..m)));
            steps.push(MlcStep {
                label,
                traces_remaining: 0,
                conjuncts: m,
                log_likelihood: 0.0,
                optimal: true,
                nodes_explored: 0,
                degenerate: true,
            });
            continue;
        }
        let preds: Vec<&[bool]> = remaining.iter().map(|&i| predicates[i]).collect();
        let ds: Vec<&LabelDistribution> = remaining.iter().map(|&i| dists[i]).collect();
        let inst = build_instance(&preds, &ds, label);
        let sol = if options.no_preprocess {
            solve_two_label(&inst, &solver)
        } else {
            solve_preprocessed(&inst, &solver)
        };
        optimal &= sol.optimal;
        steps.push(MlcStep {
            label,
            traces_remaining: remaining.len(),
            conjuncts: sol.formula.len(),
            log_likelihood: sol.log_likelihood,
            optimal: sol.optimal,
            nodes_explored: sol.nodes_explored,
            degenerate: false,
        });
        remaining.retain(|&i| !sol.formula.holds(predicates[i]));
        formulas.push(Formula::Conjunction(sol.formula));
    }
    formulas.push(Formula::truth());
    MlcResult {
        discriminant: Discriminant::new(formulas).expect("last formula is true"),
        optimal,
        steps,
    }
}
