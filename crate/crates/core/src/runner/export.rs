//! Aggregation of per-run scores into Markdown and CSV tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RunnerError;
use crate::prompting::Method;
use crate::scoring::stats::aggregate_runs;
use crate::scoring::{MatchMode, RunLabel, ScoreReport};

/// Cross-run summary of one (dataset, method, mode) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub dataset_id: String,
    pub method: Method,
    pub mode: MatchMode,
    pub runs: usize,
    pub mean: f64,
    /// `None` with a single run, where no interval exists.
    pub half_width: Option<f64>,
    pub voted: Option<f64>,
}

/// Groups reports by (dataset, method, mode) and computes mean and
/// Student-t half-width over the individual runs.
pub fn aggregate(reports: &[ScoreReport], confidence: f64) -> Result<Vec<AggregateRow>, RunnerError> {
    if reports.is_empty() {
        return Err(RunnerError::Config("no score reports to export".into()));
    }
    type Cell = (Vec<(u32, f64)>, Option<f64>);
    let mut cells: BTreeMap<(String, Method, MatchMode), Cell> = BTreeMap::new();
    for r in reports {
        let cell = cells.entry((r.dataset_id.clone(), r.method, r.mode)).or_default();
        match r.run {
            RunLabel::Run(i) => cell.0.push((i, r.f1)),
            RunLabel::Voted => cell.1 = Some(r.f1),
        }
    }
    let mut rows = Vec::with_capacity(cells.len());
    for ((dataset_id, method, mode), (mut runs, voted)) in cells {
        if runs.is_empty() {
            return Err(RunnerError::Config(format!(
                "{dataset_id}/{method}/{mode}: voted score without per-run scores"
            )));
        }
        runs.sort_by_key(|(i, _)| *i);
        let values: Vec<f64> = runs.iter().map(|(_, f)| *f).collect();
        let (mean, half_width) = if values.len() >= 2 {
            let stat = aggregate_runs(&values, confidence).map_err(|e| RunnerError::Config(e.to_string()))?;
            (stat.mean, Some(stat.half_width))
        } else {
            (values[0], None)
        };
        rows.push(AggregateRow {
            dataset_id,
            method,
            mode,
            runs: values.len(),
            mean,
            half_width,
            voted,
        });
    }
    Ok(rows)
}

/// `0.241±0.021`, or the bare mean when no interval exists.
pub fn format_cell(mean: f64, half_width: Option<f64>) -> String {
    match half_width {
        Some(h) => format!("{mean:.3}±{h:.3}"),
        None => format!("{mean:.3}"),
    }
}

/// Signed three-decimal difference; a rounded zero always reads `+0.000`.
pub fn format_gain(gain: f64) -> String {
    let s = format!("{gain:+.3}");
    if s == "-0.000" {
        "+0.000".to_string()
    } else {
        s
    }
}

fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn md_row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

/// Bolds every maximal cell of a row (exact ties all bold).
fn bold_best(row: &[Option<(f64, Option<f64>)>]) -> Vec<String> {
    let best = row
        .iter()
        .flatten()
        .map(|(m, _)| *m)
        .fold(f64::NEG_INFINITY, f64::max);
    row.iter()
        .map(|c| match c {
            None => "-".to_string(),
            Some((m, h)) if *m == best => format!("**{}**", format_cell(*m, *h)),
            Some((m, h)) => format_cell(*m, *h),
        })
        .collect()
}

/// One row per dataset, one column per method, plus an Average row holding
/// the mean of each column's means and half-widths.
pub fn method_table(rows: &[AggregateRow], mode: MatchMode) -> String {
    let rows: Vec<&AggregateRow> = rows.iter().filter(|r| r.mode == mode).collect();
    let methods: Vec<Method> = rows.iter().map(|r| r.method).collect::<BTreeSet<_>>().into_iter().collect();
    let datasets: Vec<&str> = rows
        .iter()
        .map(|r| r.dataset_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let lookup: BTreeMap<(&str, Method), &AggregateRow> =
        rows.iter().map(|r| ((r.dataset_id.as_str(), r.method), *r)).collect();

    let mut out = String::new();
    let _ = writeln!(out, "Micro {mode} F1 (mean±half-width over runs)\n");
    let mut header = vec!["Dataset".to_string()];
    header.extend(methods.iter().map(|m| m.to_string()));
    out.push_str(&md_row(&header));
    out.push_str(&md_row(&vec!["---".to_string(); header.len()]));
    for d in &datasets {
        let cells: Vec<Option<(f64, Option<f64>)>> = methods
            .iter()
            .map(|m| lookup.get(&(*d, *m)).map(|r| (r.mean, r.half_width)))
            .collect();
        let mut line = vec![d.to_string()];
        line.extend(bold_best(&cells));
        out.push_str(&md_row(&line));
    }
    if datasets.len() > 1 {
        let cells: Vec<Option<(f64, Option<f64>)>> = methods
            .iter()
            .map(|m| {
                let col: Vec<&AggregateRow> = datasets.iter().filter_map(|d| lookup.get(&(*d, *m)).copied()).collect();
                let means: Vec<f64> = col.iter().map(|r| r.mean).collect();
                let hws: Option<Vec<f64>> = col.iter().map(|r| r.half_width).collect();
                Some((mean_of(&means), hws.map(|h| mean_of(&h))))
            })
            .collect();
        let mut line = vec!["Average".to_string()];
        line.extend(bold_best(&cells));
        out.push_str(&md_row(&line));
    }
    out
}

/// Best cross-run mean and best voted score for one dataset and mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoteSummary {
    pub best: f64,
    pub voted: f64,
}

impl VoteSummary {
    pub fn gain(&self) -> f64 {
        self.voted - self.best
    }
}

pub fn vote_summaries(rows: &[AggregateRow]) -> BTreeMap<(String, MatchMode), VoteSummary> {
    let mut out: BTreeMap<(String, MatchMode), VoteSummary> = BTreeMap::new();
    let mut seen: BTreeMap<(String, MatchMode), (f64, Option<f64>)> = BTreeMap::new();
    for r in rows {
        let e = seen
            .entry((r.dataset_id.clone(), r.mode))
            .or_insert((f64::NEG_INFINITY, None));
        e.0 = e.0.max(r.mean);
        if let Some(v) = r.voted {
            e.1 = Some(e.1.map_or(v, |b: f64| b.max(v)));
        }
    }
    for (key, (best, voted)) in seen {
        if let Some(voted) = voted {
            out.insert(key, VoteSummary { best, voted });
        }
    }
    out
}

/// Best single-method mean, best voted score and their difference, per
/// dataset, for both matching modes.
pub fn voting_table(rows: &[AggregateRow]) -> String {
    let summaries = vote_summaries(rows);
    let datasets: Vec<&str> = summaries
        .keys()
        .map(|(d, _)| d.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut out = String::from("Majority voting over runs\n\n");
    let mut header = vec!["Dataset".to_string()];
    for mode in MatchMode::ALL {
        header.push(format!("{mode} best"));
        header.push(format!("{mode} voted"));
        header.push(format!("{mode} gain"));
    }
    out.push_str(&md_row(&header));
    out.push_str(&md_row(&vec!["---".to_string(); header.len()]));
    let mut columns: BTreeMap<MatchMode, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for d in &datasets {
        let mut line = vec![d.to_string()];
        for mode in MatchMode::ALL {
            match summaries.get(&(d.to_string(), mode)) {
                Some(s) => {
                    line.push(format!("{:.3}", s.best));
                    line.push(format!("{:.3}", s.voted));
                    line.push(format_gain(s.gain()));
                    let col = columns.entry(mode).or_default();
                    col.0.push(s.best);
                    col.1.push(s.voted);
                }
                None => line.extend(["-".to_string(), "-".to_string(), "-".to_string()]),
            }
        }
        out.push_str(&md_row(&line));
    }
    if datasets.len() > 1 {
        let mut line = vec!["Average".to_string()];
        for mode in MatchMode::ALL {
            match columns.get(&mode) {
                Some((best, voted)) => {
                    let (b, v) = (mean_of(best), mean_of(voted));
                    line.push(format!("{b:.3}"));
                    line.push(format!("{v:.3}"));
                    line.push(format_gain(v - b));
                }
                None => line.extend(["-".to_string(), "-".to_string(), "-".to_string()]),
            }
        }
        out.push_str(&md_row(&line));
    }
    out
}

/// Unrounded values: dataset, method, mode, runs, mean, half_width, voted.
pub fn scores_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from("dataset,method,mode,runs,mean,half_width,voted\n");
    for r in rows {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.dataset_id,
            r.method,
            r.mode,
            r.runs,
            r.mean,
            opt(r.half_width),
            opt(r.voted)
        );
    }
    out
}

/// Writes strict.md, fuzzy.md, voting.md (when voted scores exist) and
/// scores.csv into `dir`.
pub fn export_tables(reports: &[ScoreReport], confidence: f64, dir: &Path) -> Result<Vec<PathBuf>, RunnerError> {
    let rows = aggregate(reports, confidence)?;
    std::fs::create_dir_all(dir).map_err(|e| RunnerError::io(dir, e))?;
    let mut files: Vec<(PathBuf, String)> = MatchMode::ALL
        .iter()
        .map(|m| (dir.join(format!("{m}.md")), method_table(&rows, *m)))
        .collect();
    if rows.iter().any(|r| r.voted.is_some()) {
        files.push((dir.join("voting.md"), voting_table(&rows)));
    }
    files.push((dir.join("scores.csv"), scores_csv(&rows)));
    let mut written = Vec::new();
    for (path, text) in files {
        std::fs::write(&path, text).map_err(|e| RunnerError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(d: &str, m: Method, run: RunLabel, mode: MatchMode, f1: f64) -> ScoreReport {
        ScoreReport {
            dataset_id: d.into(),
            method: m,
            run,
            mode,
            tp: 0,
            fp: 0,
            fn_: 0,
            precision: 0.0,
            recall: 0.0,
            f1,
            per_label: Default::default(),
        }
    }

    #[test]
    fn gain_formatting() {
        assert_eq!(format_gain(0.7294 - 0.7236), "+0.006");
        assert_eq!(format_gain(-0.0004), "+0.000");
        assert_eq!(format_gain(0.0), "+0.000");
        assert_eq!(format_gain(-0.0101), "-0.010");
    }

    #[test]
    fn cell_from_three_runs() {
        let reports: Vec<ScoreReport> = [0.5, 0.6, 0.7]
            .iter()
            .enumerate()
            .map(|(i, f)| report("d", Method::Baseline, RunLabel::Run(i as u32), MatchMode::Strict, *f))
            .collect();
        let rows = aggregate(&reports, 0.95).unwrap();
        assert_eq!(format_cell(rows[0].mean, rows[0].half_width), "0.600±0.248");
        let table = method_table(&rows, MatchMode::Strict);
        assert!(table.contains("| d | **0.600±0.248** |"), "{table}");
        assert!(!table.contains("Average"));
    }

    #[test]
    fn ties_all_bold_and_single_run_has_no_interval() {
        let reports = vec![
            report("d", Method::Baseline, RunLabel::Run(0), MatchMode::Fuzzy, 0.5),
            report("d", Method::Random(1), RunLabel::Run(0), MatchMode::Fuzzy, 0.5),
            report("d", Method::Overlap(1), RunLabel::Run(0), MatchMode::Fuzzy, 0.4),
        ];
        let rows = aggregate(&reports, 0.95).unwrap();
        let t = method_table(&rows, MatchMode::Fuzzy);
        assert!(t.contains("| d | **0.500** | **0.500** | 0.400 |"), "{t}");
    }

    #[test]
    fn voting_rows() {
        let mut reports = Vec::new();
        for (m, runs, voted) in [
            (Method::Overlap(3), [0.72, 0.7236, 0.7272], 0.7294),
            (Method::Random(1), [0.60, 0.61, 0.62], 0.70),
        ] {
            for (i, f) in runs.iter().enumerate() {
                reports.push(report("ajmc", m, RunLabel::Run(i as u32), MatchMode::Strict, *f));
            }
            reports.push(report("ajmc", m, RunLabel::Voted, MatchMode::Strict, voted));
        }
        let rows = aggregate(&reports, 0.95).unwrap();
        let s = vote_summaries(&rows)[&("ajmc".to_string(), MatchMode::Strict)];
        assert!((s.best - 0.7236).abs() < 1e-12);
        assert!((s.voted - 0.7294).abs() < 1e-12);
        let t = voting_table(&rows);
        assert!(t.contains("| ajmc | 0.724 | 0.729 | +0.006 | - | - | - |"), "{t}");
    }

    #[test]
    fn csv_shape() {
        let reports = vec![
            report("d", Method::Baseline, RunLabel::Run(0), MatchMode::Strict, 0.25),
            report("d", Method::Baseline, RunLabel::Run(1), MatchMode::Strict, 0.25),
        ];
        let csv = scores_csv(&aggregate(&reports, 0.95).unwrap());
        assert_eq!(csv, "dataset,method,mode,runs,mean,half_width,voted\nd,baseline,strict,2,0.25,0,\n");
    }
}
