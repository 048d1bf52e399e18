use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Splits `0..labels.len()` into `k` folds that preserve class proportions.
///
/// Each class is shuffled with `seed` and dealt round-robin, continuing the
/// deal position across classes, so per-class counts and fold sizes both
/// differ by at most one. Folds are returned sorted.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k == 0 {
        return Err(Error::input("k must be positive"));
    }
    if k > labels.len() {
        return Err(Error::input(format!(
            "cannot make {k} folds from {} samples",
            labels.len()
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut deal = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[deal % k].push(i);
            deal += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Stratified hold-out of roughly `1/parts` of `indices` (at least one
/// element). Returns `(kept, held_out)`. With fewer than two indices nothing
/// can be held out and both sides are the full set.
pub fn stratified_holdout(
    indices: &[usize],
    labels: &[usize],
    parts: usize,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    if indices.len() < 2 {
        return (indices.to_vec(), indices.to_vec());
    }
    let local: Vec<usize> = indices.iter().map(|&i| labels[i]).collect();
    let k = parts.clamp(2, indices.len());
    let folds = stratified_kfold(&local, k, seed).expect("k within range");
    let held: Vec<usize> = folds[0].iter().map(|&j| indices[j]).collect();
    let kept = folds[1..]
        .iter()
        .flatten()
        .map(|&j| indices[j])
        .collect::<Vec<_>>();
    let mut kept = kept;
    kept.sort_unstable();
    (kept, held)
}
