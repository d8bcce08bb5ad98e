use std::collections::{BTreeMap, BTreeSet};

use super::{EpisodeReport, EvalError, SuccessClass};
use crate::lang::{split_words, InstructionDataset};

/// Shares of episodes per reached-fraction bucket.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaypointHistogram {
    /// Fraction exactly 0.
    pub zero: f64,
    /// Fraction in (0, 0.5].
    pub low: f64,
    /// Fraction in (0.5, 1).
    pub high: f64,
    /// Fraction exactly 1.
    pub full: f64,
}

impl WaypointHistogram {
    pub const LABELS: [&'static str; 4] = ["0", "(0,0.5]", "(0.5,1)", "1"];

    pub fn shares(&self) -> [f64; 4] {
        [self.zero, self.low, self.high, self.full]
    }
}

/// Buckets by `reached / total`, compared in integers so that e.g. 1 of 2
/// lands in (0, 0.5] exactly.
pub fn waypoint_histogram(reports: &[EpisodeReport]) -> Result<WaypointHistogram, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::Empty("histogram over zero reports".into()));
    }
    let mut counts = [0usize; 4];
    for r in reports {
        let (a, b) = (r.waypoints_reached, r.waypoints_total.max(1));
        let bucket = if a == 0 {
            0
        } else if a >= b {
            3
        } else if 2 * a <= b {
            1
        } else {
            2
        };
        counts[bucket] += 1;
    }
    let n = reports.len() as f64;
    Ok(WaypointHistogram {
        zero: counts[0] as f64 / n,
        low: counts[1] as f64 / n,
        high: counts[2] as f64 / n,
        full: counts[3] as f64 / n,
    })
}

/// For each word of the instructions the reports ran, the fraction of
/// those episodes that fully succeeded. Repeated words count once per
/// episode.
pub fn per_word_success(reports: &[EpisodeReport], dataset: &InstructionDataset) -> BTreeMap<String, f64> {
    let mut tally: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in reports {
        let Some(ins) = dataset.instructions().get(r.instruction_id) else { continue };
        let words: BTreeSet<String> = split_words(&ins.text).into_iter().collect();
        for w in words {
            let e = tally.entry(w).or_default();
            e.0 += 1;
            if r.success == SuccessClass::Full {
                e.1 += 1;
            }
        }
    }
    tally.into_iter().map(|(w, (n, s))| (w, s as f64 / n as f64)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepStatistics {
    /// Over fully successful episodes; `None` when there are none.
    pub min_steps: Option<usize>,
    pub max_steps: Option<usize>,
    pub mean_steps: Option<f64>,
    /// Turns over all actions, pooled per (success class, waypoint count).
    pub turn_fraction: BTreeMap<(SuccessClass, usize), f64>,
}

pub fn step_statistics(reports: &[EpisodeReport]) -> Result<StepStatistics, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::Empty("step statistics over zero reports".into()));
    }
    let full: Vec<usize> = reports.iter().filter(|r| r.success == SuccessClass::Full).map(|r| r.steps_taken).collect();
    let mut pooled: BTreeMap<(SuccessClass, usize), (usize, usize)> = BTreeMap::new();
    for r in reports {
        let e = pooled.entry((r.success, r.waypoints_total)).or_default();
        e.0 += r.turn_count();
        e.1 += r.action_counts.iter().sum::<usize>();
    }
    Ok(StepStatistics {
        min_steps: full.iter().min().copied(),
        max_steps: full.iter().max().copied(),
        mean_steps: (!full.is_empty()).then(|| full.iter().sum::<usize>() as f64 / full.len() as f64),
        turn_fraction: pooled
            .into_iter()
            .filter(|(_, (_, all))| *all > 0)
            .map(|(k, (t, all))| (k, t as f64 / all as f64))
            .collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalSummary {
    pub episodes: usize,
    pub avg_return: f64,
    pub full: f64,
    pub partial: f64,
    pub none: f64,
}

pub fn summarize(reports: &[EpisodeReport]) -> Result<EvalSummary, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::Empty("summary over zero reports".into()));
    }
    let n = reports.len() as f64;
    let share = |c| reports.iter().filter(|r| r.success == c).count() as f64 / n;
    Ok(EvalSummary {
        episodes: reports.len(),
        avg_return: reports.iter().map(|r| r.total_return).sum::<f64>() / n,
        full: share(SuccessClass::Full),
        partial: share(SuccessClass::Partial),
        none: share(SuccessClass::None),
    })
}
