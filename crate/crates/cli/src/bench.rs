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

use anyhow::bail;
use clap::{Args, Subcommand};
use vsyn_core::bench::{self, AccuracyConfig, Mechanism, PerfConfig};
use vsyn_core::{Dataset, SecretKey, TablePolicy};

use crate::render;
use crate::workspace::Workspace;

#[derive(Subcommand)]
pub enum BenchCommand {
    /// Mean and median l1 error over random intervals or rectangles.
    Accuracy(AccuracyArgs),
    /// Private against plain histogram latency.
    Perf(PerfArgs),
}

/// A stored table, or without `--table` a synthetic uniform one with
/// columns `x` (and `y` when two dimensions are asked for).
#[derive(Args)]
pub struct Source {
    #[arg(long)]
    table: Option<String>,
    /// Columns of the stored table.
    #[arg(long, value_delimiter = ',', requires = "table")]
    columns: Vec<String>,
    /// Synthetic rows; accepts forms like `1e7`.
    #[arg(long, value_parser = parse_count, conflicts_with = "table")]
    rows: Option<usize>,
    /// Synthetic quanta per column.
    #[arg(long, default_value_t = 1024, conflicts_with = "table")]
    domain: u64,
    #[arg(long, default_value_t = 2, conflicts_with = "table")]
    branching: u32,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2), conflicts_with = "table")]
    dims: u8,
    #[arg(long, default_value_t = 0, conflicts_with = "table")]
    data_seed: u64,
}

#[derive(Args)]
pub struct AccuracyArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, value_delimiter = ',', default_value = "hierarchical,identity")]
    mechanism: Vec<Mechanism>,
    #[arg(long, default_value_t = 5000)]
    queries: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overrides the column set's epsilon; synthetic tables default to 0.5.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
pub struct PerfArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long, default_value_t = 3)]
    warmup: usize,
    #[arg(long, default_value_t = 50)]
    buckets: usize,
    /// Also time the heatmap over the first two columns.
    #[arg(long)]
    heatmap: bool,
}

fn parse_count(s: &str) -> Result<usize, String> {
    if let Ok(n) = s.parse::<usize>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53) => Ok(v as usize),
        _ => Err(format!("`{s}` is not a row count")),
    }
}

struct Loaded {
    dataset: Dataset,
    policy: TablePolicy,
    key: SecretKey,
    columns: Vec<String>,
}

fn load(ws: &Workspace, source: &Source, default_rows: usize, dims: u8, epsilon: f64) -> anyhow::Result<Loaded> {
    if let Some(table) = &source.table {
        if source.columns.is_empty() {
            bail!("--columns is required with --table");
        }
        let (stored, key) = ws.load(table)?;
        return Ok(Loaded {
            dataset: stored.dataset,
            policy: stored.policy,
            key,
            columns: source.columns.clone(),
        });
    }
    let names = &["x", "y"][..dims as usize];
    let rows = source.rows.unwrap_or(default_rows);
    let (dataset, policy) = bench::synthetic_table(
        "synthetic",
        names,
        rows,
        source.domain,
        source.branching,
        epsilon,
        source.data_seed,
    )?;
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&source.data_seed.to_be_bytes());
    let key = SecretKey::from_bytes(key);
    Ok(Loaded {
        dataset,
        policy,
        key,
        columns: names.iter().map(|s| s.to_string()).collect(),
    })
}

pub fn run(ws: &Workspace, command: BenchCommand, json: bool) -> anyhow::Result<()> {
    match command {
        BenchCommand::Accuracy(args) => {
            let synthetic = args.source.table.is_none();
            let eps = args.epsilon.unwrap_or(0.5);
            let data = load(ws, &args.source, 1_000_000, args.source.dims, eps)?;
            let columns: Vec<&str> = data.columns.iter().map(String::as_str).collect();
            let mut reports = Vec::new();
            for &mechanism in &args.mechanism {
                let mut config = AccuracyConfig::new(mechanism, args.queries, args.seed);
                if !synthetic {
                    config.epsilon = args.epsilon;
                }
                reports.push(bench::bench_accuracy(
                    &data.dataset,
                    &data.policy,
                    &data.key,
                    &columns,
                    config,
                )?);
            }
            render::print(json, &reports, render::accuracy)
        }
        BenchCommand::Perf(args) => {
            let dims = if args.heatmap { 2 } else { args.source.dims };
            let data = load(ws, &args.source, 10_000_000, dims, 1.0)?;
            let columns: Vec<&str> = data.columns.iter().map(String::as_str).collect();
            let pair = match (args.heatmap, columns.as_slice()) {
                (false, _) => None,
                (true, [x, y, ..]) => Some((*x, *y)),
                (true, _) => bail!("--heatmap needs two columns"),
            };
            let config = PerfConfig {
                runs: args.runs,
                warmup: args.warmup,
                buckets: args.buckets,
            };
            let report = bench::bench_perf(&data.dataset, &data.policy, &data.key, &columns, pair, config)?;
            render::print(json, &report, render::perf)
        }
    }
}
