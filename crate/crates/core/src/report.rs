//! Report persistence: per-run CSV of session metrics, confusion matrices
//! as CSV, and a JSON summary with means and standard deviations over runs.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{avg_incremental_accuracy, MetricsRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStat {
    pub session: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    /// Relative standard deviation, std/mean.
    pub rsd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub num_runs: usize,
    pub num_sessions: usize,
    pub top1_per_session: Vec<SessionStat>,
    pub first_task_per_session: Vec<SessionStat>,
    /// Absent when the protocol has a single session.
    pub avg_incremental: Option<Stat>,
    /// Per-run average incremental accuracy, in run order.
    pub avg_incremental_per_run: Vec<f32>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregate per-run records into the summary statistics.
pub fn summarize(runs: &[Vec<MetricsRecord>]) -> Result<Summary> {
    if runs.is_empty() || runs.iter().any(|r| r.is_empty()) {
        return Err(Error::input("no records to summarize"));
    }
    let sessions = runs[0].len();
    if runs.iter().any(|r| r.len() != sessions) {
        return Err(Error::input("runs have different session counts"));
    }
    let stat_over = |f: &dyn Fn(&MetricsRecord) -> f64| -> Vec<SessionStat> {
        (0..sessions)
            .map(|s| {
                let vals: Vec<f64> = runs.iter().map(|r| f(&r[s])).collect();
                let (mean, std) = mean_std(&vals);
                SessionStat {
                    session: s + 1,
                    mean,
                    std,
                }
            })
            .collect()
    };
    let top1 = stat_over(&|r| r.top1 as f64);
    let first = stat_over(&|r| r.first_group_accuracy as f64);
    let (avg_incremental, per_run) = if sessions >= 2 {
        let per_run: Vec<f32> = runs
            .iter()
            .map(|r| avg_incremental_accuracy(r))
            .collect::<Result<_>>()?;
        let vals: Vec<f64> = per_run.iter().map(|&v| v as f64).collect();
        let (mean, std) = mean_std(&vals);
        let rsd = if mean != 0.0 { std / mean } else { 0.0 };
        (Some(Stat { mean, std, rsd }), per_run)
    } else {
        (None, Vec::new())
    };
    Ok(Summary {
        num_runs: runs.len(),
        num_sessions: sessions,
        top1_per_session: top1,
        first_task_per_session: first,
        avg_incremental,
        avg_incremental_per_run: per_run,
    })
}

/// Write the full report into `dir`:
///
/// - `run_<r>_sessions.csv`: `session,top1,first_group_accuracy`
/// - `run_<r>_per_class.csv`: `session,class,accuracy`
/// - `run_<r>_confusion_<s>.csv`: header row of predicted labels, then one
///   row per true label with its counts
/// - `summary.json`: the [`Summary`]
pub fn emit_report(runs: &[Vec<MetricsRecord>], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (r, records) in runs.iter().enumerate() {
        let mut sessions_csv = String::from("session,top1,first_group_accuracy\n");
        let mut per_class_csv = String::from("session,class,accuracy\n");
        for rec in records {
            let _ = writeln!(
                sessions_csv,
                "{},{},{}",
                rec.session, rec.top1, rec.first_group_accuracy
            );
            for (c, acc) in rec.seen_classes.iter().zip(&rec.per_class_accuracy) {
                let _ = writeln!(per_class_csv, "{},{},{}", rec.session, c, acc);
            }
            let mut cm = String::from("true\\pred");
            for l in &rec.confusion.labels {
                let _ = write!(cm, ",{}", l);
            }
            cm.push('\n');
            for (i, l) in rec.confusion.labels.iter().enumerate() {
                let _ = write!(cm, "{}", l);
                for v in &rec.confusion.counts[i] {
                    let _ = write!(cm, ",{}", v);
                }
                cm.push('\n');
            }
            std::fs::write(
                dir.join(format!("run_{}_confusion_{}.csv", r, rec.session)),
                cm,
            )?;
        }
        std::fs::write(dir.join(format!("run_{}_sessions.csv", r)), sessions_csv)?;
        std::fs::write(dir.join(format!("run_{}_per_class.csv", r)), per_class_csv)?;
    }
    let summary = summarize(runs)?;
    let json = serde_json::to_string_pretty(&summary)?;
    std::fs::write(dir.join("summary.json"), json)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ConfusionMatrix;

    fn record(run: usize, session: usize, top1: f32, first: f32) -> MetricsRecord {
        MetricsRecord {
            run,
            session,
            seen_classes: vec![0, 1],
            per_class_accuracy: vec![top1, top1],
            top1,
            confusion: ConfusionMatrix {
                labels: vec![0, 1],
                counts: vec![vec![3, 1], vec![0, 4]],
            },
            first_group_accuracy: first,
        }
    }

    #[test]
    fn summary_matches_recomputation() {
        let runs = vec![
            vec![record(0, 1, 0.9, 0.9), record(0, 2, 0.7, 0.6)],
            vec![record(1, 1, 0.8, 0.8), record(1, 2, 0.9, 0.7)],
        ];
        let s = summarize(&runs).unwrap();
        assert_eq!(s.num_runs, 2);
        assert_eq!(s.num_sessions, 2);
        assert!((s.top1_per_session[0].mean - 0.85).abs() < 1e-6);
        assert!((s.top1_per_session[1].mean - 0.8).abs() < 1e-6);
        // avg incremental per run: session-1 excluded
        assert_eq!(s.avg_incremental_per_run, vec![0.7, 0.9]);
        let stat = s.avg_incremental.unwrap();
        assert!((stat.mean - 0.8).abs() < 1e-6);
        assert!((stat.rsd - stat.std / stat.mean).abs() < 1e-12);
    }

    #[test]
    fn report_files_reconstruct_the_records() {
        let runs = vec![vec![record(0, 1, 0.9, 0.9), record(0, 2, 0.7, 0.6)]];
        let dir = tempfile::tempdir().unwrap();
        emit_report(&runs, dir.path()).unwrap();

        let sessions = std::fs::read_to_string(dir.path().join("run_0_sessions.csv")).unwrap();
        let mut lines = sessions.lines();
        assert_eq!(lines.next().unwrap(), "session,top1,first_group_accuracy");
        assert_eq!(lines.next().unwrap(), "1,0.9,0.9");
        assert_eq!(lines.next().unwrap(), "2,0.7,0.6");

        let cm = std::fs::read_to_string(dir.path().join("run_0_confusion_1.csv")).unwrap();
        assert!(cm.starts_with("true\\pred,0,1\n0,3,1\n1,0,4\n"));

        let summary: Summary =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        assert_eq!(summary, summarize(&runs).unwrap());
    }

    #[test]
    fn emitting_twice_is_byte_identical() {
        let runs = vec![vec![record(0, 1, 0.85, 0.85), record(0, 2, 0.55, 0.4)]];
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        emit_report(&runs, d1.path()).unwrap();
        emit_report(&runs, d2.path()).unwrap();
        for entry in std::fs::read_dir(d1.path()).unwrap() {
            let name = entry.unwrap().file_name();
            let a = std::fs::read(d1.path().join(&name)).unwrap();
            let b = std::fs::read(d2.path().join(&name)).unwrap();
            assert_eq!(a, b, "{:?}", name);
        }
    }
}
