use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dom::LabeledTable;
use crate::error::{Error, Result};

/// One partition cell: the sources it owns and their tables (corpus indices).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub sources: Vec<String>,
    pub tables: Vec<usize>,
}

/// Grouping keys and the corpus indices of each, in sorted key order.
fn groups(corpus: &[LabeledTable], by_source: bool) -> BTreeMap<String, Vec<usize>> {
    let mut g: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, t) in corpus.iter().enumerate() {
        let key = if by_source { t.source.clone() } else { t.id.clone() };
        g.entry(key).or_default().push(i);
    }
    g
}

fn shuffled_groups(corpus: &[LabeledTable], by_source: bool, seed: u64) -> Vec<(String, Vec<usize>)> {
    let mut g: Vec<_> = groups(corpus, by_source).into_iter().collect();
    g.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    g
}

/// Partitions the groups (sources, or tables when not grouping) into `k`
/// folds whose group counts differ by at most one; larger folds first.
pub fn split_folds(corpus: &[LabeledTable], k: usize, group_by_source: bool, seed: u64) -> Result<Vec<Fold>> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let g = shuffled_groups(corpus, group_by_source, seed);
    if k < 2 || g.len() < k {
        return Err(Error::TooFewSources {
            sources: g.len(),
            folds: k,
        });
    }
    let (base, extra) = (g.len() / k, g.len() % k);
    let mut it = g.into_iter();
    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let take = base + usize::from(f < extra);
        let mut fold = Fold {
            sources: Vec::new(),
            tables: Vec::new(),
        };
        for (key, idx) in it.by_ref().take(take) {
            fold.sources.push(key);
            fold.tables.extend(idx);
        }
        fold.sources.sort();
        fold.tables.sort_unstable();
        folds.push(fold);
    }
    Ok(folds)
}

/// Train/test table indices for fold `i`.
pub fn fold_split(folds: &[Fold], i: usize) -> (Vec<usize>, Vec<usize>) {
    let mut train: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .flat_map(|(_, f)| f.tables.iter().copied())
        .collect();
    train.sort_unstable();
    (train, folds[i].tables.clone())
}

/// Single source-grouped split: whole sources go to the test side until
/// roughly `test_fraction` of the sources are held out (at least one on
/// each side).
pub fn holdout_split(corpus: &[LabeledTable], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let g = shuffled_groups(corpus, true, seed);
    if g.len() < 2 {
        return Err(Error::TooFewSources {
            sources: g.len(),
            folds: 2,
        });
    }
    let n_test = ((g.len() as f64 * test_fraction).round() as usize).clamp(1, g.len() - 1);
    let mut test: Vec<usize> = g[..n_test].iter().flat_map(|(_, i)| i.iter().copied()).collect();
    let mut train: Vec<usize> = g[n_test..].iter().flat_map(|(_, i)| i.iter().copied()).collect();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}
