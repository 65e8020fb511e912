//! Aligned text tables and JSON artifacts.

use std::fmt::Write as _;
use std::path::Path;

use gdrkit_core::bench::{DomainStats, MetricsReport};
use gdrkit_core::dcr::DcrTable;
use serde::Serialize;

/// Every JSON artifact carries the command, seed, and effective config.
#[derive(Debug, Serialize)]
pub struct Artifact<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub config: serde_json::Value,
    pub result: &'a T,
}

impl<'a, T: Serialize> Artifact<'a, T> {
    pub fn new(command: &'a str, seed: u64, config: serde_json::Value, result: &'a T) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config,
            result,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("artifact serializes");
        s.push('\n');
        s
    }
}

/// Flat config entries as a JSON object, in rendering order.
pub fn config_json(entries: &[(String, String)]) -> serde_json::Value {
    serde_json::Value::Object(
        entries
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
            .collect(),
    )
}

pub fn write_text(path: &Path, text: &str) -> std::io::Result<()> {
    std::fs::write(path, text)
}

fn pct(v: f64) -> String {
    format!("{v:.1}")
}

/// One row per run (named by its test domains) and a final average row.
pub fn metrics_table(r: &MetricsReport) -> String {
    let mut rows: Vec<[String; 5]> = r
        .runs
        .iter()
        .map(|run| {
            [
                run.test_domains.join("+"),
                run.train_samples.to_string(),
                pct(run.metrics.auc),
                pct(run.metrics.acc),
                pct(run.metrics.f1),
            ]
        })
        .collect();
    rows.push([
        "average".into(),
        String::new(),
        pct(r.average.auc),
        pct(r.average.acc),
        pct(r.average.f1),
    ]);
    let mut out = format!(
        "protocol {}  method {}  seed {}  config {:016x}\n",
        r.protocol.name(),
        r.method,
        r.seed,
        r.config_hash
    );
    out.push_str(&table(&["target", "train n", "AUC", "ACC", "F1"], &rows));
    for run in &r.runs {
        let absent = run.metrics.absent_classes();
        if !absent.is_empty() {
            let _ = writeln!(
                out,
                "note: target {} has no samples of grade(s) {:?}; excluded from macro means",
                run.test_domains.join("+"),
                absent
            );
        }
    }
    out
}

/// Methods as rows, held-out targets as columns, mean AUC last.
pub fn comparison_table(reports: &[MetricsReport]) -> String {
    let Some(first) = reports.first() else {
        return String::new();
    };
    let mut header: Vec<String> = vec!["method".into()];
    header.extend(first.runs.iter().map(|r| r.test_domains.join("+")));
    header.push("avg".into());
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![format!("{} (seed {})", r.method, r.seed)];
            row.extend(r.runs.iter().map(|x| pct(x.metrics.auc)));
            row.push(pct(r.average.auc));
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    table(&header, &rows)
}

pub fn stats_table(stats: &[DomainStats]) -> String {
    let n_classes = stats.first().map_or(0, |s| s.class_histogram.len());
    let mut header = vec![
        "domain".to_string(),
        "images".into(),
        "mean R".into(),
        "mean G".into(),
        "mean B".into(),
        "std R".into(),
        "std G".into(),
        "std B".into(),
    ];
    header.extend((0..n_classes).map(|c| format!("g{c}")));
    let rows: Vec<Vec<String>> = stats
        .iter()
        .map(|s| {
            let mut row = vec![s.domain.clone(), s.images.to_string()];
            row.extend(s.mean.iter().map(|v| format!("{v:.4}")));
            row.extend(s.std.iter().map(|v| format!("{v:.4}")));
            row.extend(s.class_histogram.iter().map(u64::to_string));
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    table(&header, &rows)
}

/// The `q` and `w` grids, domains as rows and grades as columns.
pub fn dcr_tables(t: &DcrTable) -> String {
    let mut header = vec!["domain".to_string()];
    header.extend((0..t.n_classes).map(|c| format!("g{c}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let grid = |vals: &[f64], digits: usize| -> Vec<Vec<String>> {
        t.domains
            .iter()
            .enumerate()
            .map(|(d, name)| {
                let mut row = vec![name.clone()];
                row.extend(
                    vals[d * t.n_classes..(d + 1) * t.n_classes]
                        .iter()
                        .map(|v| format!("{v:.digits$}")),
                );
                row
            })
            .collect()
    };
    format!(
        "occurrence probability q (beta {})\n{}\nweight w\n{}",
        t.beta,
        table(&header, &grid(&t.q, 4)),
        table(&header, &grid(&t.w, 4))
    )
}

/// `q.<domain>.<grade> = v` and `w.<domain>.<grade> = v` lines.
pub fn dcr_key_values(t: &DcrTable) -> String {
    let mut out = format!("beta = {}\n", t.beta);
    for (name, vals) in [("q", &t.q), ("w", &t.w)] {
        for (d, dom) in t.domains.iter().enumerate() {
            for c in 0..t.n_classes {
                let _ = writeln!(out, "{name}.{dom}.{c} = {}", vals[d * t.n_classes + c]);
            }
        }
    }
    out
}

/// Left-aligned first column, right-aligned others.
pub fn table<S: AsRef<str>>(header: &[&str], rows: &[impl AsRef<[S]>]) -> String {
    let cols = header.len();
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.as_ref().iter().enumerate().take(cols) {
            width[i] = width[i].max(cell.as_ref().len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            if i == 0 {
                let _ = write!(s, "{c:<w$}", w = width[i]);
            } else {
                let _ = write!(s, "{c:>w$}", w = width[i]);
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(header.to_vec());
    line(width.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for row in rows {
        line(row.as_ref().iter().map(|c| c.as_ref()).collect());
    }
    out
}
