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

//! On-disk layout of a data directory:
//!
//! ```text
//! <root>/<table>/data.csv
//! <root>/<table>/schema.json
//! <root>/<table>/policy.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use crate::engine::Dataset;
use crate::error::{Error, Result};
use crate::policy::TablePolicy;
use crate::schema::Schema;

pub const DATA_FILE: &str = "data.csv";
pub const SCHEMA_FILE: &str = "schema.json";
pub const POLICY_FILE: &str = "policy.json";

pub fn check_table_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name.len() <= 128
        && name
            .bytes()
            .all(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b'-')
        && !name.starts_with('-');
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("invalid table name {name:?}")))
    }
}

#[derive(Clone, Debug)]
pub struct DataDir {
    root: PathBuf,
}

pub struct StoredTable {
    pub dataset: Dataset,
    pub policy: TablePolicy,
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn table_dir(&self, table: &str) -> Result<PathBuf> {
        check_table_name(table)?;
        Ok(self.root.join(table))
    }

    pub fn policy_path(&self, table: &str) -> Result<PathBuf> {
        Ok(self.table_dir(table)?.join(POLICY_FILE))
    }

    /// Table directories holding all three files, sorted by name.
    pub fn tables(&self) -> Result<Vec<String>> {
        let mut out = Vec::new();
        let entries = match fs::read_dir(&self.root) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(e.into()),
        };
        for entry in entries {
            let entry = entry?;
            let Some(name) = entry.file_name().to_str().map(str::to_string) else {
                continue;
            };
            let dir = entry.path();
            if check_table_name(&name).is_ok()
                && [DATA_FILE, SCHEMA_FILE, POLICY_FILE]
                    .iter()
                    .all(|f| dir.join(f).is_file())
            {
                out.push(name);
            }
        }
        out.sort();
        Ok(out)
    }

    /// Copies `csv` into the directory under `table` with a fresh
    /// unpublished policy. Refuses to replace a published table.
    pub fn ingest(&self, table: &str, csv: &Path, schema: &Schema) -> Result<StoredTable> {
        let dir = self.table_dir(table)?;
        if let Ok(existing) = TablePolicy::load(&dir.join(POLICY_FILE)) {
            if existing.is_published() {
                return Err(Error::Published);
            }
        }
        let dataset = Dataset::load_csv(table, csv, schema)?;
        fs::create_dir_all(&dir)?;
        fs::copy(csv, dir.join(DATA_FILE))?;
        fs::write(dir.join(SCHEMA_FILE), serde_json::to_string_pretty(schema)?)?;
        let policy = TablePolicy::for_schema(table, schema);
        policy.save(&dir.join(POLICY_FILE))?;
        Ok(StoredTable { dataset, policy })
    }

    pub fn load_schema(&self, table: &str) -> Result<Schema> {
        let dir = self.existing(table)?;
        Schema::load(&dir.join(SCHEMA_FILE))
    }

    pub fn load_policy(&self, table: &str) -> Result<TablePolicy> {
        let dir = self.existing(table)?;
        let policy = TablePolicy::load(&dir.join(POLICY_FILE))?;
        if policy.table() != table {
            return Err(Error::Policy(format!(
                "policy in `{table}` names table `{}`",
                policy.table()
            )));
        }
        Ok(policy)
    }

    pub fn save_policy(&self, policy: &TablePolicy) -> Result<()> {
        let dir = self.existing(policy.table())?;
        policy.save(&dir.join(POLICY_FILE))
    }

    pub fn load(&self, table: &str) -> Result<StoredTable> {
        let schema = self.load_schema(table)?;
        let policy = self.load_policy(table)?;
        policy.validate_against(&schema)?;
        let dir = self.existing(table)?;
        let dataset = Dataset::load_csv(table, &dir.join(DATA_FILE), &schema)?;
        Ok(StoredTable { dataset, policy })
    }

    fn existing(&self, table: &str) -> Result<PathBuf> {
        let dir = self.table_dir(table)?;
        if !dir.is_dir() {
            return Err(Error::UnknownTable(table.to_string()));
        }
        Ok(dir)
    }
}
