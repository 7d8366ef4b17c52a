// Copyright 2026 The vsyn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::fmt::Write;
use std::io::Write as _;

use serde::Serialize;
use vsyn_core::bench::{BenchReport, PerfReport};
use vsyn_core::{BucketBoundaries, CountsResponse, Estimate, HeatmapResponse, HistogramResponse};

use crate::policy::PolicyStatus;
use crate::workspace::IngestSummary;

/// Writes to stdout; a closed pipe (`vsyn ... | head`) is not an error.
pub fn emit(text: &str) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn print<T: Serialize>(json: bool, value: &T, table: impl FnOnce(&T) -> String) -> anyhow::Result<()> {
    if json {
        emit(&(serde_json::to_string_pretty(value)? + "\n"))
    } else {
        emit(&table(value))
    }
}

fn labels(b: &BucketBoundaries) -> Vec<String> {
    let edges: Vec<String> = match b {
        BucketBoundaries::Numeric(v) => v.iter().map(f64::to_string).collect(),
        BucketBoundaries::String(v) => v.iter().map(|s| format!("{s:?}")).collect(),
    };
    let last_closed = matches!(b, BucketBoundaries::String(_));
    let n = edges.len().saturating_sub(1);
    (0..n)
        .map(|i| {
            let close = if last_closed && i + 1 == n { ']' } else { ')' };
            format!("[{}, {}{close}", edges[i], edges[i + 1])
        })
        .collect()
}

fn estimate(e: &Estimate) -> String {
    format!("{:>12.2} ±{:<10.2}", e.count, e.radius)
}

pub fn ingest(s: &IngestSummary) -> String {
    let mut out = format!("table {}: {} rows\n", s.table, s.rows);
    for c in &s.columns {
        let kind = serde_json::to_value(c.column_type).unwrap_or_default();
        let _ = writeln!(
            out,
            "  {:<24} {:<8} {} non-null",
            c.name,
            kind.as_str().unwrap_or(""),
            c.non_null
        );
    }
    let _ = writeln!(out, "key file {}", s.key_file.display());
    out
}

pub fn policy_status(s: &PolicyStatus) -> String {
    format!(
        "{}: policy {} ({}published, total epsilon {})\n",
        s.table,
        s.action,
        if s.published { "" } else { "un" },
        s.total_epsilon
    )
}

fn footer(out: &mut String, epsilon: f64, total: f64, alpha: f64, id: &str) {
    let _ = writeln!(
        out,
        "epsilon {epsilon} (table total {total}), confidence {alpha}, policy {id}"
    );
}

pub fn histogram(r: &HistogramResponse, boundaries: &BucketBoundaries) -> String {
    let mut out = format!("{}.{}\n", r.table, r.column);
    let labels = labels(boundaries);
    for (i, (label, b)) in labels.iter().zip(&r.buckets).enumerate() {
        let _ = write!(out, "{label:<28}{}", estimate(b));
        if let Some(cdf) = &r.cdf {
            let _ = write!(out, "  cdf {}", estimate(&cdf[i]));
        }
        out.push('\n');
    }
    footer(&mut out, r.epsilon, r.total_epsilon, r.alpha, &r.policy_id);
    out
}

pub fn heatmap(r: &HeatmapResponse, x: &BucketBoundaries, y: &BucketBoundaries) -> String {
    let mut out = format!("{}.{} x {}.{}\n", r.table, r.columns[0], r.table, r.columns[1]);
    let (xl, yl) = (labels(x), labels(y));
    for (row, lx) in r.cells.iter().zip(&xl) {
        for (cell, ly) in row.iter().zip(&yl) {
            let _ = writeln!(out, "{lx:<24}{ly:<24}{}", estimate(cell));
        }
    }
    footer(&mut out, r.epsilon, r.total_epsilon, r.alpha, &r.policy_id);
    out
}

pub fn counts(r: &CountsResponse) -> String {
    let mut out = format!("{}.{}\n", r.table, r.column);
    for (name, c) in [("nulls", &r.null_count), ("distinct", &r.distinct_count)] {
        if let Some(c) = c {
            let _ = writeln!(
                out,
                "{name:<10}{:>12.2} ±{:<10.2} epsilon {}",
                c.count, c.radius, c.epsilon
            );
        }
    }
    let _ = writeln!(out, "table total epsilon {}, policy {}", r.total_epsilon, r.policy_id);
    out
}

pub fn accuracy(reports: &Vec<BenchReport>) -> String {
    let mut out = String::new();
    if let Some(w) = reports.first().map(|r| &r.workload) {
        let _ = writeln!(
            out,
            "{} queries over {} (domain {:?}), epsilon {}, branching {}, seed {}",
            w.queries,
            w.columns.join(" x "),
            w.domain_sizes,
            w.epsilon,
            w.branching,
            w.seed
        );
    }
    let _ = writeln!(
        out,
        "{:<14}{:>14}{:>14}{:>16}{:>12}",
        "mechanism", "mean l1", "median l1", "total l1", "ms"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<14}{:>14.3}{:>14.3}{:>16.1}{:>12.1}",
            r.mechanism.to_string(),
            r.mean_l1,
            r.median_l1,
            r.total_l1,
            r.elapsed_ms
        );
    }
    out
}

pub fn perf(r: &PerfReport) -> String {
    let mut out = format!(
        "{} rows, {} buckets, median of {} runs after {} warmup\n",
        r.rows, r.buckets, r.runs, r.warmup
    );
    let _ = writeln!(
        out,
        "{:<28}{:>12}{:>12}{:>8}",
        "query", "plain ms", "private ms", "ratio"
    );
    for e in &r.entries {
        let _ = writeln!(
            out,
            "{:<28}{:>12.2}{:>12.2}{:>8.2}",
            e.name, e.plain_ms, e.private_ms, e.ratio
        );
    }
    let _ = writeln!(out, "geometric mean ratio {:.2}", r.geometric_mean);
    out
}
