//! CSV outputs.
//!
//! `metrics.csv`: `user,mean_quality,prebuffer_s,rebuffer_pct,avg_Q_bits,avg_Theta`,
//! one row per user followed by an `all` row holding the user means.
//! `trace.csv`: `slot,user,Q_u,Theta_u`, end-of-slot values.
//! `topology.csv`: `kind,id,x,y` with kind `helper` or `user`.

use std::path::Path;

use crate::engine::MetricsReport;
use crate::error::{Error, Result};

pub const METRICS_HEADER: [&str; 6] = [
    "user",
    "mean_quality",
    "prebuffer_s",
    "rebuffer_pct",
    "avg_Q_bits",
    "avg_Theta",
];
pub const TRACE_HEADER: [&str; 4] = ["slot", "user", "Q_u", "Theta_u"];
pub const TOPOLOGY_HEADER: [&str; 4] = ["kind", "id", "x", "y"];

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

fn write_row<const N: usize>(w: &mut csv::Writer<std::fs::File>, path: &Path, row: [String; N]) -> Result<()> {
    w.write_record(&row).map_err(|e| Error::csv(path, e))
}

fn metrics_row(user: String, q: f64, pre: f64, rebuf: f64, backlog: f64, theta: f64) -> [String; 6] {
    [
        user,
        format!("{q:.6}"),
        format!("{pre:.3}"),
        format!("{rebuf:.4}"),
        format!("{backlog:.1}"),
        format!("{theta:.6}"),
    ]
}

/// Writes the per-user QoE table. An empty report gives a header-only file.
pub fn emit_metrics(report: &MetricsReport, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    write_row(&mut w, path, METRICS_HEADER.map(String::from))?;
    for u in &report.users {
        write_row(
            &mut w,
            path,
            metrics_row(
                u.user.to_string(),
                u.mean_quality,
                u.prebuffer_s,
                u.rebuffer_pct,
                u.avg_backlog_bits,
                u.avg_theta,
            ),
        )?;
    }
    if !report.users.is_empty() {
        let n = report.users.len() as f64;
        let mean = |f: fn(&crate::engine::UserMetrics) -> f64| report.users.iter().map(f).sum::<f64>() / n;
        write_row(
            &mut w,
            path,
            metrics_row(
                "all".into(),
                mean(|u| u.mean_quality),
                mean(|u| u.prebuffer_s),
                mean(|u| u.rebuffer_pct),
                mean(|u| u.avg_backlog_bits),
                mean(|u| u.avg_theta),
            ),
        )?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn emit_trace(report: &MetricsReport, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    write_row(&mut w, path, TRACE_HEADER.map(String::from))?;
    for r in &report.trace {
        write_row(
            &mut w,
            path,
            [
                r.slot.to_string(),
                r.user.to_string(),
                r.backlog_bits.to_string(),
                format!("{:.6}", r.theta),
            ],
        )?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn emit_topology(report: &MetricsReport, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    write_row(&mut w, path, TOPOLOGY_HEADER.map(String::from))?;
    let nodes = report
        .helper_positions
        .iter()
        .enumerate()
        .map(|(i, p)| ("helper", i, p))
        .chain(report.user_positions.iter().enumerate().map(|(i, p)| ("user", i, p)));
    for (kind, id, p) in nodes {
        write_row(
            &mut w,
            path,
            [
                kind.to_string(),
                id.to_string(),
                format!("{:.3}", p.x),
                format!("{:.3}", p.y),
            ],
        )?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::UserMetrics;

    fn user(id: usize) -> UserMetrics {
        UserMetrics {
            user: id,
            mean_quality: 0.9,
            prebuffer_s: 2.5,
            started: true,
            rebuffer_pct: 0.0,
            stall_events: 0,
            avg_backlog_bits: 1000.0,
            avg_theta: 0.5,
            chunks_requested: 10,
            chunks_delivered: 10,
            chunks_played: 10,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        emit_metrics(&MetricsReport::default(), &path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "user,mean_quality,prebuffer_s,rebuffer_pct,avg_Q_bits,avg_Theta\n"
        );
    }

    #[test]
    fn rows_plus_summary() {
        let report = MetricsReport {
            users: (0..3).map(user).collect(),
            ..MetricsReport::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        emit_metrics(&report, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "0,0.900000,2.500,0.0000,1000.0,0.500000");
        assert!(lines[4].starts_with("all,0.900000,2.500"));
    }

    #[test]
    fn unwritable_path_reports_it() {
        let err = emit_metrics(&MetricsReport::default(), Path::new("/no/such/dir/m.csv")).unwrap_err();
        assert!(err.to_string().contains("/no/such/dir/m.csv"));
    }
}
