//! Discriminants: ordered formulas, one per label, read under the
//! smallest-index rule, together with likelihood and weighted accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::LabelDistribution;

/// Lower clamp applied to probabilities before taking logs.
pub const PROB_EPSILON: f64 = 1e-12;

pub fn clamped_ln(p: f64) -> f64 {
    p.clamp(PROB_EPSILON, 1.0).ln()
}

/// What a formula can look at for one trace.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    /// Predicate valuation (conjunctive formulas).
    pub predicates: &'a [bool],
    /// Per-attribute call counts (threshold tests).
    pub counts: &'a [u64],
}

/// A monotone conjunction of predicates; the empty set is `true`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConjunctiveFormula {
    conjuncts: Vec<usize>,
}

impl ConjunctiveFormula {
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut conjuncts: Vec<usize> = indices.into_iter().collect();
        conjuncts.sort_unstable();
        conjuncts.dedup();
        Self { conjuncts }
    }

    pub fn truth() -> Self {
        Self::default()
    }

    pub fn conjuncts(&self) -> &[usize] {
        &self.conjuncts
    }

    pub fn len(&self) -> usize {
        self.conjuncts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conjuncts.is_empty()
    }

    pub fn holds(&self, predicates: &[bool]) -> bool {
        self.conjuncts.iter().all(|&j| predicates[j])
    }

    pub fn describe(&self, names: &[String]) -> String {
        if self.conjuncts.is_empty() {
            return "true".into();
        }
        self.conjuncts
            .iter()
            .map(|&j| names[j].as_str())
            .collect::<Vec<_>>()
            .join(" ∧ ")
    }
}

/// `count(attribute) ≤ threshold` when `le`, otherwise `count > threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTest {
    pub attribute: usize,
    pub threshold: f64,
    pub le: bool,
}

impl ThresholdTest {
    pub fn holds(&self, counts: &[u64]) -> bool {
        let v = counts[self.attribute] as f64;
        if self.le {
            v <= self.threshold
        } else {
            v > self.threshold
        }
    }

    pub fn describe(&self, names: &[String]) -> String {
        let op = if self.le { "<=" } else { ">" };
        format!("{} {} {}", names[self.attribute], op, self.threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "terms")]
pub enum Formula {
    Conjunction(ConjunctiveFormula),
    /// Disjunction of conjunctions of threshold tests. No disjuncts means
    /// `false`; a disjunct with no tests is `true`.
    Dnf(Vec<Vec<ThresholdTest>>),
}

impl Formula {
    pub fn truth() -> Self {
        Formula::Conjunction(ConjunctiveFormula::truth())
    }

    pub fn is_true(&self) -> bool {
        match self {
            Formula::Conjunction(c) => c.is_empty(),
            Formula::Dnf(paths) => paths.iter().any(Vec::is_empty),
        }
    }

    pub fn holds(&self, obs: Observation<'_>) -> bool {
        match self {
            Formula::Conjunction(c) => c.holds(obs.predicates),
            Formula::Dnf(paths) => paths.iter().any(|p| p.iter().all(|t| t.holds(obs.counts))),
        }
    }

    /// `predicate_names` for conjunctions, `attribute_names` for DNF.
    pub fn describe(&self, predicate_names: &[String], attribute_names: &[String]) -> String {
        match self {
            Formula::Conjunction(c) => c.describe(predicate_names),
            Formula::Dnf(_) if self.is_true() => "true".into(),
            Formula::Dnf(paths) if paths.is_empty() => "false".into(),
            Formula::Dnf(paths) => paths
                .iter()
                .map(|p| {
                    let terms: Vec<String> =
                        p.iter().map(|t| t.describe(attribute_names)).collect();
                    format!("({})", terms.join(" ∧ "))
                })
                .collect::<Vec<_>>()
                .join(" ∨ "),
        }
    }
}

/// Ordered formulas `⟨φ_1, …, φ_K⟩` with `φ_K = true`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Formula>", into = "Vec<Formula>")]
pub struct Discriminant {
    formulas: Vec<Formula>,
}

impl Discriminant {
    pub fn new(formulas: Vec<Formula>) -> Result<Self> {
        match formulas.last() {
            None => Err(Error::Discriminant("no formulas".into())),
            Some(last) if !last.is_true() => {
                Err(Error::Discriminant("last formula must be `true`".into()))
            }
            Some(_) => Ok(Self { formulas }),
        }
    }

    /// `⟨true⟩`: every trace gets label 0.
    pub fn trivial() -> Self {
        Self {
            formulas: vec![Formula::truth()],
        }
    }

    pub fn formulas(&self) -> &[Formula] {
        &self.formulas
    }

    pub fn num_labels(&self) -> usize {
        self.formulas.len()
    }

    /// Smallest index whose formula holds. Total since the last is `true`.
    pub fn lab(&self, obs: Observation<'_>) -> usize {
        self.formulas
            .iter()
            .position(|f| f.holds(obs))
            .unwrap_or(self.formulas.len() - 1)
    }

    /// Largest conjunct count over the conjunctive formulas before the last.
    pub fn max_conjuncts(&self) -> usize {
        self.formulas[..self.formulas.len() - 1]
            .iter()
            .map(|f| match f {
                Formula::Conjunction(c) => c.len(),
                Formula::Dnf(paths) => paths.iter().map(Vec::len).max().unwrap_or(0),
            })
            .max()
            .unwrap_or(0)
    }
}

impl TryFrom<Vec<Formula>> for Discriminant {
    type Error = Error;

    fn try_from(formulas: Vec<Formula>) -> Result<Self> {
        Self::new(formulas)
    }
}

impl From<Discriminant> for Vec<Formula> {
    fn from(d: Discriminant) -> Self {
        d.formulas
    }
}

/// Probability each trace's distribution assigns to its discriminant label.
pub fn label_masses<'a>(
    psi: &Discriminant,
    observations: impl IntoIterator<Item = Observation<'a>>,
    dists: &[LabelDistribution],
) -> Vec<f64> {
    observations
        .into_iter()
        .zip(dists)
        .map(|(obs, d)| d.prob(psi.lab(obs)))
        .collect()
}

/// λ(Ψ): product of per-trace masses. Exactly 0 if any factor is 0.
pub fn likelihood<'a>(
    psi: &Discriminant,
    observations: impl IntoIterator<Item = Observation<'a>>,
    dists: &[LabelDistribution],
) -> f64 {
    label_masses(psi, observations, dists).iter().product()
}

/// log λ(Ψ) with each factor clamped to `[PROB_EPSILON, 1]`.
pub fn log_likelihood<'a>(
    psi: &Discriminant,
    observations: impl IntoIterator<Item = Observation<'a>>,
    dists: &[LabelDistribution],
) -> f64 {
    label_masses(psi, observations, dists)
        .into_iter()
        .map(clamped_ln)
        .sum()
}

/// α(Ψ): mean of per-trace masses.
pub fn accuracy<'a>(
    psi: &Discriminant,
    observations: impl IntoIterator<Item = Observation<'a>>,
    dists: &[LabelDistribution],
) -> f64 {
    let masses = label_masses(psi, observations, dists);
    if masses.is_empty() {
        return 0.0;
    }
    masses.iter().sum::<f64>() / masses.len() as f64
}

/// One label's entry in a [`DiscriminantReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelFormula {
    pub label: usize,
    pub center_s: Option<f64>,
    pub formula: String,
    /// Conjunct names for conjunctive formulas.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub conjuncts: Option<Vec<String>>,
    /// Root-to-leaf paths for tree-derived formulas.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub paths: Option<Vec<Vec<String>>>,
}

/// Serializable summary of a learned discriminant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminantReport {
    pub learner: String,
    pub optimal: Option<bool>,
    pub labels: Vec<LabelFormula>,
    pub likelihood: f64,
    pub log_likelihood: f64,
    pub accuracy: f64,
    pub max_conjuncts: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tree_height: Option<usize>,
    pub notes: Vec<String>,
    pub discriminant: Discriminant,
    pub predicate_names: Vec<String>,
    pub attribute_names: Vec<String>,
}

impl DiscriminantReport {
    #[allow(clippy::too_many_arguments)]
    pub fn build<'a>(
        learner: &str,
        psi: &Discriminant,
        predicate_names: &[String],
        attribute_names: &[String],
        centers_s: &[f64],
        observations: impl IntoIterator<Item = Observation<'a>> + Clone,
        dists: &[LabelDistribution],
    ) -> Self {
        let masses = label_masses(psi, observations, dists);
        let labels = psi
            .formulas()
            .iter()
            .enumerate()
            .map(|(label, f)| LabelFormula {
                label,
                center_s: centers_s.get(label).copied(),
                formula: f.describe(predicate_names, attribute_names),
                conjuncts: match f {
                    Formula::Conjunction(c) => Some(
                        c.conjuncts()
                            .iter()
                            .map(|&j| predicate_names[j].clone())
                            .collect(),
                    ),
                    Formula::Dnf(_) => None,
                },
                paths: match f {
                    Formula::Dnf(paths) => Some(
                        paths
                            .iter()
                            .map(|p| p.iter().map(|t| t.describe(attribute_names)).collect())
                            .collect(),
                    ),
                    Formula::Conjunction(_) => None,
                },
            })
            .collect();
        let n = masses.len().max(1) as f64;
        Self {
            learner: learner.into(),
            optimal: None,
            labels,
            likelihood: masses.iter().product(),
            log_likelihood: masses.iter().copied().map(clamped_ln).sum(),
            accuracy: masses.iter().sum::<f64>() / n,
            max_conjuncts: psi.max_conjuncts(),
            tree_height: None,
            notes: Vec::new(),
            discriminant: psi.clone(),
            predicate_names: predicate_names.to_vec(),
            attribute_names: attribute_names.to_vec(),
        }
    }
}
