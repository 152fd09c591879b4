use std::fmt::Write;

use discriminer_core::evaluation::EvalReport;
use discriminer_core::LabelFile;

use crate::model::LearnedModel;

/// Plain-text summary. Wall-clock times are left out so that identical
/// inputs give identical text.
pub fn render(labels: &LabelFile, model: &LearnedModel, eval: Option<&EvalReport>) -> String {
    let mut out = String::new();
    let r = &model.report;
    let mut sizes = vec![0usize; labels.k];
    for t in &labels.traces {
        if let Some(s) = sizes.get_mut(t.cluster) {
            *s += 1;
        }
    }
    let _ = writeln!(
        out,
        "clusters: k = {}, {} traces",
        labels.k,
        labels.traces.len()
    );
    for (i, c) in labels.centers_s.iter().enumerate() {
        let upper = labels
            .boundaries_s
            .get(i)
            .map_or("inf".to_string(), |b| format!("{b:.6} s"));
        let _ = writeln!(
            out,
            "  label {i}: center {c:.6} s, upper boundary {upper}, {} traces",
            sizes[i]
        );
    }
    let _ = writeln!(out);
    let status = match r.optimal {
        Some(true) => " (optimal)",
        Some(false) => " (not proven optimal)",
        None => "",
    };
    let _ = writeln!(out, "discriminant: {}{status}", r.learner);
    for l in &r.labels {
        let _ = writeln!(out, "  label {}: {}", l.label, l.formula);
    }
    if let Some(h) = r.tree_height {
        let _ = writeln!(out, "  tree height: {h}");
    }
    let _ = writeln!(out, "  max conjuncts: {}", r.max_conjuncts);
    for note in &r.notes {
        let _ = writeln!(out, "  note: {note}");
    }
    let _ = writeln!(
        out,
        "  training accuracy: {:.4}, log-likelihood: {:.6}",
        r.accuracy, r.log_likelihood
    );
    if let Some(e) = eval {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "cross-validation: {} with {} folds, seed {}",
            e.learner, e.k, e.seed
        );
        let _ = writeln!(out, "  accuracy: {:.4}", e.accuracy);
        let lo = e
            .folds
            .iter()
            .map(|f| f.accuracy)
            .fold(f64::INFINITY, f64::min);
        let hi = e
            .folds
            .iter()
            .map(|f| f.accuracy)
            .fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(out, "  fold range: {lo:.4} .. {hi:.4}");
        if let Some(h) = e.tree_height {
            let _ = writeln!(out, "  max tree height: {h}");
        }
        if let Some(m) = e.max_conjuncts {
            let _ = writeln!(out, "  max conjuncts: {m}");
        }
        if !e.all_optimal {
            let _ = writeln!(out, "  some folds stopped at the search limit");
        }
    }
    out
}
