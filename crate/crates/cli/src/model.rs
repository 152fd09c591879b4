use serde::{Deserialize, Serialize};

use discriminer_core::discriminant::DiscriminantReport;
use discriminer_core::dtree::DecisionTree;
use discriminer_core::evaluation::{Model, TrainedModel};
use discriminer_core::mlc::MlcStep;
use discriminer_core::Dataset;

/// What `learn-dtree` and `learn-mlc` write.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnedModel {
    pub report: DiscriminantReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tree: Option<DecisionTree>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub steps: Option<Vec<MlcStep>>,
}

impl LearnedModel {
    /// Scores `trained` on the full dataset.
    pub fn new(data: &Dataset, trained: TrainedModel) -> Self {
        let all: Vec<usize> = (0..data.len()).collect();
        let learner = match trained.model {
            Model::Tree(_) => "dtree",
            Model::Conjunctive(_) => "mlc",
        };
        let mut report = DiscriminantReport::build(
            learner,
            &trained.discriminant,
            data.predicates.names(),
            &data.attribute_names,
            &data.centers_s,
            data.observations(&all),
            &data.labels,
        );
        report.tree_height = trained.tree_height();
        match trained.model {
            Model::Tree(tree) => Self {
                report,
                tree: Some(tree),
                steps: None,
            },
            Model::Conjunctive(result) => {
                report.optimal = Some(result.optimal);
                for s in &result.steps {
                    if s.degenerate {
                        report.notes.push(format!(
                            "label {}: no traces left, formula set to the conjunction of all predicates",
                            s.label
                        ));
                    }
                    if !s.optimal {
                        report.notes.push(format!(
                            "label {}: search stopped at a limit, best incumbent reported",
                            s.label
                        ));
                    }
                }
                Self {
                    report,
                    tree: None,
                    steps: Some(result.steps),
                }
            }
        }
    }
}
