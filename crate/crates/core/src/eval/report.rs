use std::fmt::Write as _;
use std::path::Path;

use super::{per_word_success, step_statistics, summarize, waypoint_histogram, EpisodeReport, EvalError, WaypointHistogram};
use crate::lang::{InstructionDataset, Vocabulary, PAD_TOKEN};

fn io(path: &Path, e: std::io::Error) -> EvalError {
    EvalError::Io(format!("{}: {e}", path.display()))
}

/// Writes `<stem>.csv` (one row per token, one column per step) and
/// `<stem>.pgm` (plain grayscale, `k` rows by `T` columns, largest weight
/// white).
pub fn export_attention_heatmap(
    report: &EpisodeReport,
    tokens: &[String],
    stem: &Path,
) -> Result<(), EvalError> {
    let cols = report
        .attention
        .as_ref()
        .ok_or_else(|| EvalError::Unsupported("attention heatmaps need a model with attention enabled".into()))?;
    let t = cols.len();
    let k = tokens.len();
    if let Some(bad) = cols.iter().find(|c| c.len() != k) {
        return Err(EvalError::Unsupported(format!("attention column has {} weights for {k} tokens", bad.len())));
    }
    let mut csv = String::from("token");
    for s in 0..t {
        let _ = write!(csv, ",t{s}");
    }
    csv.push('\n');
    for (i, tok) in tokens.iter().enumerate() {
        csv.push_str(&csv_field(tok));
        for c in cols {
            let _ = write!(csv, ",{}", c[i]);
        }
        csv.push('\n');
    }
    let max = cols.iter().flatten().cloned().fold(0.0f64, f64::max);
    let mut pgm = format!("P2\n{t} {k}\n255\n");
    for i in 0..k {
        let row: Vec<String> = cols
            .iter()
            .map(|c| if max > 0.0 { ((c[i] / max) * 255.0).round() as u8 } else { 0 }.to_string())
            .collect();
        pgm.push_str(&row.join(" "));
        pgm.push('\n');
    }
    let csv_path = stem.with_extension("csv");
    std::fs::write(&csv_path, csv).map_err(|e| io(&csv_path, e))?;
    let pgm_path = stem.with_extension("pgm");
    std::fs::write(&pgm_path, pgm).map_err(|e| io(&pgm_path, e))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Token strings of an instruction as the model saw them.
pub(crate) fn token_strings(dataset: &InstructionDataset, vocab: &Vocabulary, id: usize) -> Vec<String> {
    dataset.instructions()[id]
        .tokens
        .iter()
        .map(|&t| vocab.token(t).unwrap_or(PAD_TOKEN).to_string())
        .collect()
}

/// Writes `summary.csv`, `episodes.csv`, `per_word.csv`, `histogram.csv` and, when
/// attention was recorded, `attention/<episode>.csv|.pgm`.
pub fn write_report_bundle(dir: &Path, reports: &[EpisodeReport], dataset: &InstructionDataset) -> Result<(), EvalError> {
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let summary = summarize(reports)?;
    let steps = step_statistics(reports)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    let mut s = String::from("metric,value\n");
    let _ = writeln!(s, "episodes,{}", summary.episodes);
    let _ = writeln!(s, "avg_return,{}", summary.avg_return);
    let _ = writeln!(s, "full_success,{}", summary.full);
    let _ = writeln!(s, "partial_success,{}", summary.partial);
    let _ = writeln!(s, "no_progress,{}", summary.none);
    let _ = writeln!(s, "min_steps_full,{}", opt(steps.min_steps.map(|v| v.to_string())));
    let _ = writeln!(s, "max_steps_full,{}", opt(steps.max_steps.map(|v| v.to_string())));
    let _ = writeln!(s, "mean_steps_full,{}", opt(steps.mean_steps.map(|v| v.to_string())));
    for ((class, total), frac) in &steps.turn_fraction {
        let _ = writeln!(s, "turn_fraction_{}_{total},{frac}", class.label());
    }
    let path = dir.join("summary.csv");
    std::fs::write(&path, s).map_err(|e| io(&path, e))?;

    let mut e = String::from(
        "episode,instruction_id,waypoints_total,waypoints_reached,steps,success,turn_left,forward,turn_right,return\n",
    );
    for (i, r) in reports.iter().enumerate() {
        let _ = writeln!(
            e,
            "{i},{},{},{},{},{},{},{},{},{}",
            r.instruction_id,
            r.waypoints_total,
            r.waypoints_reached,
            r.steps_taken,
            r.success.label(),
            r.action_counts[0],
            r.action_counts[1],
            r.action_counts[2],
            r.total_return
        );
    }
    let path = dir.join("episodes.csv");
    std::fs::write(&path, e).map_err(|e| io(&path, e))?;

    let mut w = String::from("word,success_rate\n");
    for (word, rate) in per_word_success(reports, dataset) {
        let _ = writeln!(w, "{},{rate}", csv_field(&word));
    }
    let path = dir.join("per_word.csv");
    std::fs::write(&path, w).map_err(|e| io(&path, e))?;

    let h: WaypointHistogram = waypoint_histogram(reports)?;
    let mut hs = String::from("bucket,share\n");
    for (label, share) in WaypointHistogram::LABELS.iter().zip(h.shares()) {
        let _ = writeln!(hs, "\"{label}\",{share}");
    }
    let path = dir.join("histogram.csv");
    std::fs::write(&path, hs).map_err(|e| io(&path, e))?;

    if reports.iter().any(|r| r.attention.is_some()) {
        let adir = dir.join("attention");
        std::fs::create_dir_all(&adir).map_err(|e| io(&adir, e))?;
        for (i, r) in reports.iter().enumerate() {
            let tokens = token_strings(dataset, dataset.vocabulary(), r.instruction_id);
            export_attention_heatmap(r, &tokens, &adir.join(i.to_string()))?;
        }
    }
    Ok(())
}
