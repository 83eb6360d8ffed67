//! Tabular experiment output: one `metric,value,run,checkpoint` row per number.
//! Timings stay out of the rows so that reruns produce identical files.

use std::io::Write;

use super::experiment::{RankingReport, RatingReport, TemporalReport};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub metric: String,
    pub value: f64,
    pub run: Option<usize>,
    pub checkpoint: Option<usize>,
}

impl ReportRow {
    fn new(metric: impl Into<String>, value: f64) -> Self {
        Self {
            metric: metric.into(),
            value,
            run: None,
            checkpoint: None,
        }
    }
}

pub fn write_csv<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "value", "run", "checkpoint"])?;
    let opt = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([r.metric.clone(), r.value.to_string(), opt(r.run), opt(r.checkpoint)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn rating_rows(reports: &[RatingReport]) -> Vec<ReportRow> {
    reports
        .iter()
        .enumerate()
        .map(|(i, r)| ReportRow {
            run: Some(i + 1),
            ..ReportRow::new(format!("{}_rmse", r.algorithm), r.rmse)
        })
        .collect()
}

pub fn ranking_rows(report: &RankingReport) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for r in &report.runs {
        rows.push(ReportRow {
            run: Some(r.run),
            ..ReportRow::new(format!("precision@{}", report.n), r.precision)
        });
        rows.push(ReportRow {
            run: Some(r.run),
            ..ReportRow::new("ranking_accumulation", r.ranking_accumulation)
        });
    }
    rows.push(ReportRow::new(format!("mean_precision@{}", report.n), report.mean_precision()));
    rows.push(ReportRow::new(
        "mean_ranking_accumulation",
        report.mean_ranking_accumulation(),
    ));
    rows
}

pub fn temporal_rows(report: &TemporalReport, run: Option<usize>) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for (c, (t, tl)) in report.time.iter().zip(&report.timeless).enumerate() {
        for (metric, v) in [("precision_time", *t), ("precision_timeless", *tl)] {
            rows.push(ReportRow {
                metric: metric.into(),
                value: v,
                run,
                checkpoint: Some(c + 1),
            });
        }
    }
    rows
}

pub fn rating_summary(reports: &[RatingReport]) -> String {
    let mut s = String::new();
    for (i, r) in reports.iter().enumerate() {
        s += &format!(
            "run {}: {} rmse={:.4} pairs={}\n",
            i + 1,
            r.algorithm,
            r.rmse,
            r.test_pairs
        );
    }
    s
}

pub fn ranking_summary(report: &RankingReport) -> String {
    let mut s = String::new();
    for r in &report.runs {
        s += &format!(
            "run {}: precision@{}={:.4} ra={:.4} users={}\n",
            r.run, report.n, r.precision, r.ranking_accumulation, r.test_users
        );
    }
    s += &format!(
        "{} mean: precision@{}={:.4} ra={:.4}\n",
        report.algorithm,
        report.n,
        report.mean_precision(),
        report.mean_ranking_accumulation()
    );
    s
}

pub fn temporal_summary(report: &TemporalReport) -> String {
    let mut s = String::from("checkpoint\ttimestamp\tusers\ttime\ttimeless\n");
    for c in 0..report.time.len() {
        s += &format!(
            "{}\t{}\t{}\t{:.4}\t{:.4}\n",
            c + 1,
            report.checkpoints[c],
            report.test_users[c],
            report.time[c],
            report.timeless[c]
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let rows = vec![
            ReportRow::new("acf_rmse", 0.5),
            ReportRow {
                run: Some(2),
                checkpoint: Some(3),
                ..ReportRow::new("p", 0.125)
            },
        ];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "metric,value,run,checkpoint\nacf_rmse,0.5,,\np,0.125,2,3\n"
        );
    }
}
