use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::vocab::split_words;
use super::{InstructionDataset, LangError, Split};

const ATTEMPTS: usize = 2000;

/// Re-tags a dataset into train and hold-out so that no
/// `(house, start, goal)` triple appears in both, every hold-out word occurs
/// in train, and at least `⌈fraction·N⌉` instructions are held out. Whole
/// triples move together, so the hold-out count rounds up to the next group
/// boundary.
pub fn split_dataset(dataset: &InstructionDataset, fraction: f64, seed: u64) -> Result<InstructionDataset, LangError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(LangError::Split(format!("hold-out fraction {fraction} must lie in (0, 1)")));
    }
    let n = dataset.len();
    let target = (fraction * n as f64).ceil() as usize;
    if target >= n {
        return Err(LangError::Split(format!("hold-out of {target} leaves no train data among {n}; use a smaller fraction")));
    }
    let mut groups: BTreeMap<(&str, &str, &str), Vec<usize>> = BTreeMap::new();
    for (i, ins) in dataset.instructions().iter().enumerate() {
        groups.entry((ins.house.as_str(), ins.start_region.as_str(), ins.goal())).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    let words: Vec<BTreeSet<String>> =
        dataset.instructions().iter().map(|i| split_words(&i.text).into_iter().collect()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..ATTEMPTS {
        groups.shuffle(&mut rng);
        let mut holdout = vec![false; n];
        let mut taken = 0;
        for g in &groups {
            if taken >= target {
                break;
            }
            taken += g.len();
            for &i in g {
                holdout[i] = true;
            }
        }
        if taken >= n {
            continue;
        }
        let train_words: BTreeSet<&String> = (0..n).filter(|&i| !holdout[i]).flat_map(|i| words[i].iter()).collect();
        let covered = (0..n).filter(|&i| holdout[i]).all(|i| words[i].iter().all(|w| train_words.contains(w)));
        if covered {
            let mut out = dataset.instructions().to_vec();
            for (ins, &h) in out.iter_mut().zip(&holdout) {
                ins.split = if h { Split::Holdout } else { Split::Train };
            }
            return Ok(InstructionDataset::new(out));
        }
    }
    Err(LangError::Split(format!(
        "no split of {n} instructions holds out at least {target} with disjoint pairs and covered vocabulary; try a smaller fraction or more instructions"
    )))
}
