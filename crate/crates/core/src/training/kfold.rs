use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph_data::Dataset;

/// One cross-validation split; both index lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn by_class(labels: &[usize], members: impl IntoIterator<Item = usize>) -> BTreeMap<usize, Vec<usize>> {
    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in members {
        classes.entry(labels[i]).or_default().push(i);
    }
    classes
}

/// Stratified k-fold partition of `labels`.
///
/// Members of each class are shuffled and dealt round-robin over the folds,
/// continuing from where the previous class stopped, so fold sizes also
/// differ by at most one.
pub fn stratified_kfold_labels(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k = {k}, need at least 2 folds")));
    }
    let classes = by_class(labels, 0..labels.len());
    if let Some((class, members)) = classes.iter().find(|(_, m)| m.len() < k) {
        return Err(Error::Dataset(format!(
            "class {class} has {} subjects, fewer than k = {k}",
            members.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tests = vec![Vec::new(); k];
    let mut next = 0;
    for mut members in classes.into_values() {
        members.shuffle(&mut rng);
        for i in members {
            tests[next].push(i);
            next = (next + 1) % k;
        }
    }
    Ok(tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let train = (0..labels.len())
                .filter(|i| test.binary_search(i).is_err())
                .collect();
            Fold { train, test }
        })
        .collect())
}

pub fn stratified_kfold(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    stratified_kfold_labels(&ds.labels(), k, seed)
}

/// Splits `pool` into (kept, held out), holding out `round(fraction · n_c)`
/// members of each class while always keeping at least one.
pub fn stratified_holdout(
    labels: &[usize],
    pool: &[usize],
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = Vec::new();
    let mut held = Vec::new();
    for mut members in by_class(labels, pool.iter().copied()).into_values() {
        members.shuffle(&mut rng);
        let n_held = ((members.len() as f64 * fraction).round() as usize).min(members.len() - 1);
        held.extend_from_slice(&members[..n_held]);
        kept.extend_from_slice(&members[n_held..]);
    }
    kept.sort_unstable();
    held.sort_unstable();
    (kept, held)
}
