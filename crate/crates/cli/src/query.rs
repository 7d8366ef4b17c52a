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

use anyhow::{bail, Context};
use clap::{Args, Subcommand};
use vsyn_core::confidence::DEFAULT_MC_SAMPLES;
use vsyn_core::{BucketBoundaries, CiCache, ColumnType, HistogramRequest, QueryContext, Schema};

use crate::render;
use crate::workspace::Workspace;

#[derive(Args)]
pub struct CiArgs {
    /// Monte-Carlo samples per confidence radius.
    #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
    ci_samples: usize,
}

#[derive(Subcommand)]
pub enum QueryCommand {
    /// Noisy counts per bucket, optionally with the noisy CDF.
    Histogram {
        table: String,
        column: String,
        /// Comma-separated boundaries, one more than the number of buckets.
        #[arg(long, value_delimiter = ',', required = true)]
        buckets: Vec<String>,
        #[arg(long)]
        cdf: bool,
        #[command(flatten)]
        ci: CiArgs,
    },
    /// Noisy counts per rectangle of two columns.
    Heatmap {
        table: String,
        #[arg(long)]
        x: String,
        #[arg(long, value_delimiter = ',', required = true)]
        x_buckets: Vec<String>,
        #[arg(long)]
        y: String,
        #[arg(long, value_delimiter = ',', required = true)]
        y_buckets: Vec<String>,
        #[command(flatten)]
        ci: CiArgs,
    },
    /// Released null and distinct counts of one column.
    Counts { table: String, column: String },
}

pub fn parse_boundaries(schema: &Schema, column: &str, raw: Vec<String>) -> anyhow::Result<BucketBoundaries> {
    let spec = schema
        .get(column)
        .with_context(|| format!("unknown column `{column}`"))?;
    Ok(match spec.column_type {
        ColumnType::String => BucketBoundaries::String(raw),
        ColumnType::Real => BucketBoundaries::Numeric(
            raw.iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .with_context(|| format!("bad boundary {s:?} for `{column}`"))
                })
                .collect::<anyhow::Result<_>>()?,
        ),
    })
}

fn samples(ci: &CiArgs) -> anyhow::Result<CiCache> {
    if ci.ci_samples == 0 {
        bail!("--ci-samples must be positive");
    }
    Ok(CiCache::new(ci.ci_samples))
}

pub fn run(ws: &Workspace, command: QueryCommand, json: bool) -> anyhow::Result<()> {
    match command {
        QueryCommand::Histogram {
            table,
            column,
            buckets,
            cdf,
            ci,
        } => {
            let (stored, key) = ws.load(&table)?;
            let cache = samples(&ci)?;
            let ctx = QueryContext::new(&stored.dataset, &stored.policy, &key, &cache);
            let boundaries = parse_boundaries(&stored.dataset.schema(), &column, buckets)?;
            let mut request = HistogramRequest::histogram(column, boundaries.clone());
            if cdf {
                request = request.with_cdf();
            }
            let response = ctx.histogram(&request)?;
            render::print(json, &response, |r| render::histogram(r, &boundaries))
        }
        QueryCommand::Heatmap {
            table,
            x,
            x_buckets,
            y,
            y_buckets,
            ci,
        } => {
            let (stored, key) = ws.load(&table)?;
            let cache = samples(&ci)?;
            let ctx = QueryContext::new(&stored.dataset, &stored.policy, &key, &cache);
            let schema = stored.dataset.schema();
            let xb = parse_boundaries(&schema, &x, x_buckets)?;
            let yb = parse_boundaries(&schema, &y, y_buckets)?;
            let response = ctx.heatmap(&HistogramRequest::heatmap(x, xb.clone(), y, yb.clone()))?;
            render::print(json, &response, |r| render::heatmap(r, &xb, &yb))
        }
        QueryCommand::Counts { table, column } => {
            let (stored, key) = ws.load(&table)?;
            let cache = CiCache::default();
            let ctx = QueryContext::new(&stored.dataset, &stored.policy, &key, &cache);
            render::print(json, &ctx.counts(&column)?, render::counts)
        }
    }
}
