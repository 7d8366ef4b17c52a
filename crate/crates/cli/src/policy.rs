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

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Subcommand;
use serde::Serialize;
use vsyn_core::{Error, TablePolicy};

use crate::render;
use crate::workspace::Workspace;

#[derive(Subcommand)]
pub enum PolicyCommand {
    /// Print the stored policy document.
    Show { table: String },
    /// Replace an unpublished policy with the document in `file`.
    Set { table: String, file: PathBuf },
    /// Check `file` (or the stored policy) against the table schema.
    Validate { table: String, file: Option<PathBuf> },
    /// Freeze the policy; it can no longer be changed.
    Publish { table: String },
}

#[derive(Serialize)]
pub struct PolicyStatus {
    pub table: String,
    pub action: &'static str,
    pub published: bool,
    pub policy_id: String,
    pub total_epsilon: f64,
}

impl PolicyStatus {
    fn new(action: &'static str, policy: &TablePolicy) -> Self {
        Self {
            table: policy.table().to_string(),
            action,
            published: policy.is_published(),
            policy_id: policy.snapshot_id(),
            total_epsilon: policy.total_epsilon(),
        }
    }
}

fn read_policy(file: &PathBuf) -> anyhow::Result<TablePolicy> {
    let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    Ok(TablePolicy::from_json(&text)?)
}

fn check(ws: &Workspace, table: &str, policy: &TablePolicy) -> anyhow::Result<()> {
    if policy.table() != table {
        bail!("policy names table `{}`, expected `{table}`", policy.table());
    }
    let schema = ws.store.load_schema(table)?;
    match policy.validate_against(&schema) {
        Err(Error::Validation(problems)) => bail!("policy is invalid:\n  {}", problems.join("\n  ")),
        other => Ok(other?),
    }
}

pub fn run(ws: &Workspace, command: PolicyCommand, json: bool) -> anyhow::Result<()> {
    match command {
        PolicyCommand::Show { table } => render::emit(&(ws.store.load_policy(&table)?.to_json() + "\n")),
        PolicyCommand::Set { table, file } => {
            if ws.store.load_policy(&table)?.is_published() {
                return Err(Error::Published.into());
            }
            let policy = read_policy(&file)?;
            if policy.is_published() {
                bail!("a policy cannot be set as published; use `vsyn policy publish`");
            }
            check(ws, &table, &policy)?;
            ws.store.save_policy(&policy)?;
            render::print(json, &PolicyStatus::new("saved", &policy), render::policy_status)
        }
        PolicyCommand::Validate { table, file } => {
            let policy = match file {
                Some(file) => read_policy(&file)?,
                None => ws.store.load_policy(&table)?,
            };
            check(ws, &table, &policy)?;
            render::print(json, &PolicyStatus::new("valid", &policy), render::policy_status)
        }
        PolicyCommand::Publish { table } => {
            let current = ws.store.load_policy(&table)?;
            if current.is_published() {
                return render::print(json, &PolicyStatus::new("unchanged", &current), render::policy_status);
            }
            check(ws, &table, &current)?;
            ws.key(&table, false)?;
            let published = current.publish()?;
            ws.store.save_policy(&published)?;
            render::print(json, &PolicyStatus::new("published", &published), render::policy_status)
        }
    }
}
