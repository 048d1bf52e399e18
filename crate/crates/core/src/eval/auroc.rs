use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Mann–Whitney AUROC: probability that a random positive outscores a random
/// negative, ties counting one half. `None` when either side is empty.
pub fn binary_auroc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), positive.len());
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of 1-based mid-ranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let mid_rank = (i + 1 + j) as f64 / 2.0;
        let pos_in_tie = order[i..j].iter().filter(|&&k| positive[k]).count();
        rank_sum += mid_rank * pos_in_tie as f64;
        i = j;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// AUROC from per-class probability rows.
///
/// Two columns: binary AUROC of column 1. More columns: unweighted mean of
/// one-vs-rest AUROCs over classes having both positives and negatives.
pub fn auroc(probs: &Tensor, labels: &[usize]) -> Result<f64> {
    if probs.rows() != labels.len() {
        return Err(Error::input("one probability row per label required"));
    }
    let classes = probs.cols();
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::input(format!("label {bad} has no probability column")));
    }
    let column = |c: usize| -> Vec<f64> { (0..probs.rows()).map(|r| probs.get(r, c)).collect() };
    if classes == 2 {
        let pos: Vec<bool> = labels.iter().map(|&y| y == 1).collect();
        return binary_auroc(&column(1), &pos)
            .ok_or_else(|| Error::Eval("AUROC needs both classes present".into()));
    }
    let per_class: Vec<f64> = (0..classes)
        .filter_map(|c| {
            let pos: Vec<bool> = labels.iter().map(|&y| y == c).collect();
            binary_auroc(&column(c), &pos)
        })
        .collect();
    if per_class.is_empty() {
        return Err(Error::Eval("no class with both positives and negatives".into()));
    }
    Ok(per_class.iter().sum::<f64>() / per_class.len() as f64)
}
