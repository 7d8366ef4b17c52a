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

mod bench;
mod policy;
mod query;
mod render;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::workspace::Workspace;

#[derive(Parser)]
#[command(
    name = "vsyn",
    version,
    about = "Differentially private histograms over a virtual synopsis"
)]
struct Cli {
    /// Print machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,

    #[arg(long, global = true, env = "VSYN_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,

    /// Defaults to `<data-dir>/keys`.
    #[arg(long, global = true, env = vsyn_core::keys::KEY_FILE_ENV)]
    key_file: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Copy a CSV and its schema into the data directory.
    Ingest {
        #[arg(long)]
        table: String,
        #[arg(long)]
        csv: PathBuf,
        /// JSON list of `{"name", "type": "real" | "string"}`.
        #[arg(long)]
        schema: PathBuf,
    },
    /// Show, replace, validate or publish a table policy.
    Policy {
        #[command(subcommand)]
        action: policy::PolicyCommand,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Answer a private query locally.
    Query {
        #[command(subcommand)]
        query: query::QueryCommand,
    },
    /// Accuracy and performance benchmarks.
    Bench {
        #[command(subcommand)]
        bench: bench::BenchCommand,
    },
}

fn serve(config: PathBuf) -> anyhow::Result<()> {
    use tracing_subscriber::EnvFilter;

    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let config = vsyn_service::ServiceConfig::load(&config)?;
    let service = std::sync::Arc::new(vsyn_service::Service::open(&config)?);
    tokio::runtime::Runtime::new()?.block_on(vsyn_service::serve(service, config.listen))?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let ws = Workspace::new(cli.data_dir, cli.key_file);
    match cli.command {
        Command::Ingest { table, csv, schema } => {
            let summary = ws.ingest(&table, &csv, &schema)?;
            render::print(cli.json, &summary, render::ingest)
        }
        Command::Policy { action } => policy::run(&ws, action, cli.json),
        Command::Serve { config } => serve(config),
        Command::Query { query } => query::run(&ws, query, cli.json),
        Command::Bench { bench } => bench::run(&ws, bench, cli.json),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
