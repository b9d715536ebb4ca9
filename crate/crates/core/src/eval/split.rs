use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldSplit {
    pub fold_id: usize,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

fn folds_from_assignment(assign: &[usize], k: usize) -> Vec<FoldSplit> {
    (0..k)
        .map(|f| FoldSplit {
            fold_id: f,
            train_indices: (0..assign.len()).filter(|&i| assign[i] != f).collect(),
            test_indices: (0..assign.len()).filter(|&i| assign[i] == f).collect(),
        })
        .collect()
}

/// Shuffles each class with `seed` and deals it round-robin over `k` folds.
/// Negatives continue where the positives stopped so fold sizes stay even.
pub fn stratified_kfold(y: &[bool], k: usize, seed: u64) -> Result<Vec<FoldSplit>, EvalError> {
    if k < 2 {
        return Err(EvalError::Config(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assign = vec![0usize; y.len()];
    let mut offset = 0;
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if idx.len() < k {
            return Err(EvalError::StratificationImpossible {
                positive: class,
                count: idx.len(),
                k,
            });
        }
        idx.shuffle(&mut rng);
        for (j, &i) in idx.iter().enumerate() {
            assign[i] = (offset + j) % k;
        }
        offset = (offset + idx.len()) % k;
    }
    Ok(folds_from_assignment(&assign, k))
}

/// Keeps each patient's nights in one fold. Patients are shuffled, ordered
/// by positive count (descending, stable) and assigned greedily to the fold
/// with the fewest positives, then fewest rows.
pub fn group_kfold(
    y: &[bool],
    groups: &[usize],
    k: usize,
    seed: u64,
) -> Result<Vec<FoldSplit>, EvalError> {
    let n_groups = groups.iter().copied().max().map_or(0, |m| m + 1);
    if n_groups < k {
        return Err(EvalError::Config(format!(
            "{n_groups} patients cannot fill {k} folds"
        )));
    }
    let mut stats = vec![(0usize, 0usize); n_groups];
    for (i, &g) in groups.iter().enumerate() {
        stats[g].1 += 1;
        if y[i] {
            stats[g].0 += 1;
        }
    }
    let mut order: Vec<usize> = (0..n_groups).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.sort_by(|&a, &b| stats[b].0.cmp(&stats[a].0));
    let mut fold_pos = vec![0usize; k];
    let mut fold_rows = vec![0usize; k];
    let mut group_fold = vec![0usize; n_groups];
    for g in order {
        let f = (0..k)
            .min_by_key(|&f| (fold_pos[f], fold_rows[f], f))
            .expect("k >= 1");
        group_fold[g] = f;
        fold_pos[f] += stats[g].0;
        fold_rows[f] += stats[g].1;
    }
    let assign: Vec<usize> = groups.iter().map(|&g| group_fold[g]).collect();
    Ok(folds_from_assignment(&assign, k))
}
