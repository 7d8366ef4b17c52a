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

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;
use vsyn_core::{ColumnType, DataDir, KeyFile, Schema, SecretKey, StoredTable};

pub struct Workspace {
    pub store: DataDir,
    key_path: PathBuf,
}

#[derive(Serialize)]
pub struct ColumnSummary {
    pub name: String,
    #[serde(rename = "type")]
    pub column_type: ColumnType,
    pub non_null: u64,
}

#[derive(Serialize)]
pub struct IngestSummary {
    pub table: String,
    pub rows: usize,
    pub columns: Vec<ColumnSummary>,
    pub key_file: PathBuf,
}

impl Workspace {
    pub fn new(data_dir: PathBuf, key_file: Option<PathBuf>) -> Self {
        let key_path = key_file.unwrap_or_else(|| data_dir.join("keys"));
        Self {
            store: DataDir::new(data_dir),
            key_path,
        }
    }

    pub fn ingest(&self, table: &str, csv: &Path, schema: &Path) -> anyhow::Result<IngestSummary> {
        let schema = Schema::load(schema).with_context(|| format!("reading schema {}", schema.display()))?;
        let stored = self.store.ingest(table, csv, &schema)?;
        self.key(table, false)?;
        let columns = stored
            .dataset
            .columns()
            .iter()
            .map(|c| ColumnSummary {
                name: c.name().to_string(),
                column_type: c.column_type(),
                non_null: c.non_null(),
            })
            .collect();
        Ok(IngestSummary {
            table: table.to_string(),
            rows: stored.dataset.rows(),
            columns,
            key_file: self.key_path.clone(),
        })
    }

    /// The table's key. Unpublished tables get one on first use; a
    /// published table without its key cannot be answered.
    pub fn key(&self, table: &str, published: bool) -> anyhow::Result<SecretKey> {
        let mut keys = KeyFile::open(&self.key_path)?;
        match keys.get(table) {
            Some(key) => Ok(key.clone()),
            None if published => bail!("published table `{table}` has no key in {}", self.key_path.display()),
            None => Ok(keys.get_or_create(table)?),
        }
    }

    pub fn load(&self, table: &str) -> anyhow::Result<(StoredTable, SecretKey)> {
        let stored = self.store.load(table)?;
        let key = self.key(table, stored.policy.is_published())?;
        Ok((stored, key))
    }
}
