use rand::seq::SliceRandom;

use super::{EvalError, Result};
use crate::data::Label;
use crate::rng::substream;

/// Validation index sets for k-fold cross-validation; training sets are the complements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldSplit {
    pub k: usize,
    pub n: usize,
    pub validation: Vec<Vec<usize>>,
}

impl FoldSplit {
    pub fn train(&self, fold: usize) -> Vec<usize> {
        let mut held = vec![false; self.n];
        for &i in &self.validation[fold] {
            held[i] = true;
        }
        (0..self.n).filter(|&i| !held[i]).collect()
    }
}

/// Shuffles and deals samples round-robin into `k` folds. Stratified mode deals
/// each class in turn, continuing the rotation, so both fold sizes and per-class
/// counts differ by at most one.
pub fn make_folds(labels: &[Label], k: usize, seed: u64, stratified: bool) -> Result<FoldSplit> {
    let n = labels.len();
    if k < 2 {
        return Err(EvalError::Folds(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(EvalError::Folds(format!("{n} samples cannot fill {k} folds")));
    }
    let mut rng = substream(seed, "folds");
    let groups: Vec<Vec<usize>> = if stratified {
        [Label::Loose, Label::WellFixed]
            .iter()
            .map(|&class| (0..n).filter(|&i| labels[i] == class).collect::<Vec<_>>())
            .collect()
    } else {
        vec![(0..n).collect()]
    };
    if stratified {
        if let Some(small) = groups.iter().position(|g| g.len() < k) {
            let class = [Label::Loose, Label::WellFixed][small];
            return Err(EvalError::Folds(format!(
                "stratification needs at least {k} {class} samples, found {}",
                groups[small].len()
            )));
        }
    }
    let mut validation = vec![Vec::new(); k];
    let mut slot = 0;
    for mut group in groups {
        group.shuffle(&mut rng);
        for i in group {
            validation[slot % k].push(i);
            slot += 1;
        }
    }
    for fold in &mut validation {
        fold.sort_unstable();
    }
    Ok(FoldSplit { k, n, validation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream_indexed;
    use rand::Rng;

    fn labels(pos: usize, neg: usize) -> Vec<Label> {
        (0..pos).map(|_| Label::Loose).chain((0..neg).map(|_| Label::WellFixed)).collect()
    }

    #[test]
    fn forty_samples_five_folds() {
        let split = make_folds(&labels(17, 23), 5, 1, true).unwrap();
        for fold in &split.validation {
            assert_eq!(fold.len(), 8);
            let loose = fold.iter().filter(|&&i| i < 17).count();
            assert!((3..=4).contains(&loose), "{loose}");
        }
    }

    #[test]
    fn leave_one_out() {
        let split = make_folds(&labels(3, 4), 7, 2, false).unwrap();
        assert!(split.validation.iter().all(|f| f.len() == 1));
    }

    #[test]
    fn infeasible_requests() {
        assert!(make_folds(&labels(2, 1), 5, 0, false).is_err());
        assert!(make_folds(&labels(3, 20), 5, 0, true).is_err());
        assert!(make_folds(&labels(3, 20), 5, 0, false).is_ok());
    }

    #[test]
    fn partition_over_random_draws() {
        let mut rng = substream(99, "fold-draws");
        for draw in 0..1000u64 {
            let k = rng.gen_range(2..=10);
            let n = rng.gen_range(k..=60);
            let pos = rng.gen_range(0..=n);
            let labs = labels(pos, n - pos);
            let stratified = pos >= k && n - pos >= k && rng.gen_bool(0.5);
            let seed = substream_indexed(7, "seed", draw).gen();
            let split = make_folds(&labs, k, seed, stratified).unwrap();
            let mut seen = vec![0usize; n];
            for (f, fold) in split.validation.iter().enumerate() {
                for &i in fold {
                    seen[i] += 1;
                }
                let train = split.train(f);
                assert_eq!(train.len() + fold.len(), n);
                assert!(train.iter().all(|i| fold.binary_search(i).is_err()));
            }
            assert!(seen.iter().all(|&c| c == 1), "draw {draw}");
            let sizes: Vec<usize> = split.validation.iter().map(Vec::len).collect();
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            if stratified {
                let per: Vec<usize> = split.validation.iter().map(|f| f.iter().filter(|&&i| i < pos).count()).collect();
                assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
            }
        }
    }
}
