use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::molgraph::Label;

/// Mann–Whitney ROC-AUC: the fraction of positive/negative pairs ranked
/// correctly, ties counting ½. Computed from average ranks in `O(n log n)`.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::Evaluation(format!("score {s} is not comparable")));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Evaluation(format!("need both classes, got {n_pos} positive and {n_neg} negative")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the rank sum of the positives, so tied ranks stay integral
    let mut twice_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let twice_avg_rank = (i + 1 + j + 1) as u64;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k]).count() as u64;
        twice_rank_sum += twice_avg_rank * pos_in_group;
        i = j + 1;
    }
    let twice_u = twice_rank_sum - (n_pos as u64) * (n_pos as u64 + 1);
    Ok(twice_u as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroAuc {
    /// Mean over the tasks that could be scored.
    pub mean: f64,
    /// `None` for tasks skipped because one class was absent.
    pub per_task: Vec<Option<f64>>,
}

/// Per-task ROC-AUC over unmasked labels, averaged over scorable tasks.
pub fn macro_roc_auc(predictions: &[Array1<f64>], labels: &[&[Label]]) -> Result<MacroAuc> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape(format!("{} predictions for {} label rows", predictions.len(), labels.len())));
    }
    let n_tasks = labels.first().map_or(0, |l| l.len());
    if predictions.iter().zip(labels).any(|(p, l)| p.len() != n_tasks || l.len() != n_tasks) {
        return Err(Error::Shape("ragged prediction or label rows".into()));
    }
    let mut per_task = Vec::with_capacity(n_tasks);
    for t in 0..n_tasks {
        let (scores, ys): (Vec<f64>, Vec<bool>) = predictions
            .iter()
            .zip(labels)
            .filter_map(|(p, l)| l[t].map(|y| (p[t], y)))
            .unzip();
        let pos = ys.iter().filter(|&&y| y).count();
        if pos == 0 || pos == ys.len() {
            log::warn!("task {t}: only one class among {} labels, skipped", ys.len());
            per_task.push(None);
            continue;
        }
        per_task.push(Some(roc_auc(&scores, &ys)?));
    }
    let scored: Vec<f64> = per_task.iter().flatten().copied().collect();
    if scored.is_empty() {
        return Err(Error::Evaluation("no task has both classes; ROC-AUC is undefined".into()));
    }
    Ok(MacroAuc {
        mean: scored.iter().sum::<f64>() / scored.len() as f64,
        per_task,
    })
}
