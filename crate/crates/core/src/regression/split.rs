use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Fold = (Vec<usize>, Vec<usize>);

/// K-fold split at group level: unique groups (in first-appearance order)
/// are shuffled with `seed` and dealt round-robin to folds. Returns
/// `(train rows, test rows)` per fold, both ascending.
pub fn group_kfold<S: AsRef<str>>(groups: &[S], folds: usize, seed: u64) -> Result<Vec<Fold>> {
    let mut unique: Vec<&str> = Vec::new();
    for g in groups {
        if !unique.contains(&g.as_ref()) {
            unique.push(g.as_ref());
        }
    }
    if folds < 2 || unique.len() < folds {
        return Err(Error::TooFewGroups {
            groups: unique.len(),
            folds,
        });
    }
    unique.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let fold_of = |g: &str| unique.iter().position(|u| *u == g).unwrap() % folds;
    Ok((0..folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..groups.len()).partition(|&i| fold_of(groups[i].as_ref()) == f);
            (train, test)
        })
        .collect())
}
