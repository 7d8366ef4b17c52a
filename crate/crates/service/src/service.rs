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

//! Role-checked operations over loaded tables, independent of HTTP.

use std::collections::BTreeMap;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use vsyn_core::{
    Bound, CiCache, ColumnSetPolicy, ColumnType, CountRelease, CountsResponse, DataDir, Dataset, HeatmapResponse,
    HistogramRequest, HistogramResponse, KeyFile, Quantization, QueryContext, SecretKey, TablePolicy, Visibility,
};

use crate::config::ServiceConfig;
use crate::error::ServiceError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Curator,
    Analyst,
}

struct Table {
    dataset: Dataset,
    key: SecretKey,
    policy: RwLock<Arc<TablePolicy>>,
    /// Serializes policy replacement and publication.
    writer: Mutex<()>,
}

impl Table {
    fn snapshot(&self) -> Arc<TablePolicy> {
        self.policy.read().clone()
    }
}

pub struct Service {
    store: DataDir,
    tables: BTreeMap<String, Table>,
    ci: CiCache,
    curator_token: String,
    analyst_token: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSummary {
    pub table: String,
    pub published: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnView {
    pub name: String,
    #[serde(rename = "type")]
    pub column_type: ColumnType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantization: Option<Quantization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_size: Option<u64>,
}

/// Public view of a table and its policy. Never carries key material.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemaResponse {
    pub table: String,
    pub published: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<ColumnView>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column_sets: Option<Vec<ColumnSetPolicy>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count_releases: Option<BTreeMap<String, CountRelease>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branching: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_id: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatsSource {
    Policy,
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeStatsResponse {
    pub table: String,
    pub column: String,
    pub source: StatsSource,
    pub min: Option<Bound>,
    pub max: Option<Bound>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub non_null: Option<u64>,
}

impl Service {
    /// Loads every table in the data directory. Unpublished tables without a
    /// key get a fresh one; a published table without its key is an error.
    pub fn open(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let store = DataDir::new(&config.data_dir);
        let mut keys = KeyFile::open(&config.key_file)?;
        let mut tables = BTreeMap::new();
        for name in store.tables()? {
            let stored = store.load(&name)?;
            let key = match keys.get(&name) {
                Some(key) => key.clone(),
                None if stored.policy.is_published() => {
                    return Err(ServiceError::config(format!("published table `{name}` has no key")));
                }
                None => keys.get_or_create(&name)?,
            };
            tables.insert(
                name,
                Table {
                    dataset: stored.dataset,
                    key,
                    policy: RwLock::new(Arc::new(stored.policy)),
                    writer: Mutex::new(()),
                },
            );
        }
        tracing::info!(tables = tables.len(), "service loaded");
        Ok(Self {
            store,
            tables,
            ci: CiCache::new(config.ci_samples),
            curator_token: config.curator_token.clone(),
            analyst_token: config.analyst_token.clone(),
        })
    }

    pub fn authenticate(&self, token: &str) -> Result<Role, ServiceError> {
        if constant_time_eq(token.as_bytes(), self.curator_token.as_bytes()) {
            Ok(Role::Curator)
        } else if constant_time_eq(token.as_bytes(), self.analyst_token.as_bytes()) {
            Ok(Role::Analyst)
        } else {
            Err(ServiceError::unauthorized())
        }
    }

    fn table(&self, name: &str) -> Result<&Table, ServiceError> {
        self.tables.get(name).ok_or_else(|| ServiceError::unknown_table(name))
    }

    /// Policy snapshot for a query; analysts only see published tables.
    fn readable(&self, name: &str, role: Role) -> Result<(&Table, Arc<TablePolicy>), ServiceError> {
        let table = self.table(name)?;
        let policy = table.snapshot();
        if role == Role::Analyst && !policy.is_published() {
            return Err(ServiceError::forbidden(format!("table `{name}` is not published")));
        }
        Ok((table, policy))
    }

    fn require_curator(role: Role, action: &str) -> Result<(), ServiceError> {
        match role {
            Role::Curator => Ok(()),
            Role::Analyst => Err(ServiceError::forbidden(format!("only the curator may {action}"))),
        }
    }

    pub fn list_tables(&self, _role: Role) -> Vec<TableSummary> {
        self.tables
            .iter()
            .map(|(name, t)| TableSummary {
                table: name.clone(),
                published: t.snapshot().is_published(),
            })
            .collect()
    }

    pub fn schema(&self, name: &str, role: Role) -> Result<SchemaResponse, ServiceError> {
        let table = self.table(name)?;
        let policy = table.snapshot();
        if role == Role::Analyst && !policy.is_published() {
            return Ok(SchemaResponse {
                table: name.to_string(),
                published: false,
                columns: None,
                column_sets: None,
                count_releases: None,
                branching: None,
                alpha: None,
                total_epsilon: None,
                policy_id: None,
            });
        }
        let columns = table
            .dataset
            .schema()
            .columns()
            .iter()
            .map(|spec| {
                let quantization = policy.quantization(&spec.name).cloned();
                ColumnView {
                    name: spec.name.clone(),
                    column_type: spec.column_type,
                    domain_size: quantization.as_ref().map(Quantization::domain_size),
                    quantization,
                }
            })
            .collect();
        Ok(SchemaResponse {
            table: name.to_string(),
            published: policy.is_published(),
            columns: Some(columns),
            column_sets: Some(policy.column_sets().to_vec()),
            count_releases: Some(policy.count_releases().clone()),
            branching: Some(policy.branching()),
            alpha: Some(policy.alpha()),
            total_epsilon: Some(policy.total_epsilon()),
            policy_id: Some(policy.snapshot_id()),
        })
    }

    pub fn histogram(
        &self,
        name: &str,
        role: Role,
        request: &HistogramRequest,
    ) -> Result<HistogramResponse, ServiceError> {
        let (table, policy) = self.readable(name, role)?;
        Ok(QueryContext::new(&table.dataset, &policy, &table.key, &self.ci).histogram(request)?)
    }

    pub fn heatmap(&self, name: &str, role: Role, request: &HistogramRequest) -> Result<HeatmapResponse, ServiceError> {
        let (table, policy) = self.readable(name, role)?;
        Ok(QueryContext::new(&table.dataset, &policy, &table.key, &self.ci).heatmap(request)?)
    }

    pub fn counts(&self, name: &str, role: Role, column: &str) -> Result<CountsResponse, ServiceError> {
        let (table, policy) = self.readable(name, role)?;
        Ok(QueryContext::new(&table.dataset, &policy, &table.key, &self.ci).counts(column)?)
    }

    /// Policy bounds for released columns; exact statistics only for the
    /// curator before publication.
    pub fn range_stats(
        &self,
        name: &str,
        role: Role,
        column: &str,
        raw: bool,
    ) -> Result<RangeStatsResponse, ServiceError> {
        let (table, policy) = self.readable(name, role)?;
        table.dataset.column(column)?;
        if raw {
            Self::require_curator(role, "read raw statistics")?;
            let visibility = if policy.is_published() {
                Visibility::Private
            } else {
                Visibility::Public
            };
            let stats = table.dataset.raw_range_stats(column, visibility)?;
            return Ok(RangeStatsResponse {
                table: name.to_string(),
                column: column.to_string(),
                source: StatsSource::Raw,
                min: stats.min,
                max: stats.max,
                rows: Some(stats.rows),
                non_null: Some(stats.non_null),
            });
        }
        let (min, max) = match policy.quantization(column) {
            Some(Quantization::Numeric(q)) => (Bound::Real(q.qmin), Bound::Real(q.qmax)),
            Some(Quantization::String(q)) => (
                Bound::String(q.boundaries[0].clone()),
                Bound::String(q.boundaries[q.boundaries.len() - 1].clone()),
            ),
            None => {
                return Err(vsyn_core::Error::Policy(format!("column `{column}` has no quantization")).into());
            }
        };
        Ok(RangeStatsResponse {
            table: name.to_string(),
            column: column.to_string(),
            source: StatsSource::Policy,
            min: Some(min),
            max: Some(max),
            rows: None,
            non_null: None,
        })
    }

    /// Replaces the whole policy of an unpublished table.
    pub fn put_policy(&self, name: &str, role: Role, policy: TablePolicy) -> Result<SchemaResponse, ServiceError> {
        Self::require_curator(role, "change a policy")?;
        let table = self.table(name)?;
        let _guard = table.writer.lock();
        if table.snapshot().is_published() {
            return Err(vsyn_core::Error::Published.into());
        }
        if policy.table() != name {
            return Err(ServiceError::bad_request(format!(
                "policy names table `{}`, not `{name}`",
                policy.table()
            )));
        }
        if policy.is_published() {
            return Err(ServiceError::bad_request("publish through the publish endpoint"));
        }
        policy.validate_against(&table.dataset.schema())?;
        self.store.save_policy(&policy)?;
        *table.policy.write() = Arc::new(policy);
        drop(_guard);
        self.schema(name, role)
    }

    /// Latches the table; repeating it is a no-op.
    pub fn publish(&self, name: &str, role: Role) -> Result<SchemaResponse, ServiceError> {
        Self::require_curator(role, "publish a table")?;
        let table = self.table(name)?;
        {
            let _guard = table.writer.lock();
            let current = table.snapshot();
            if !current.is_published() {
                let published = current.publish()?;
                published.validate_against(&table.dataset.schema())?;
                self.store.save_policy(&published)?;
                *table.policy.write() = Arc::new(published);
                tracing::info!(table = name, "published");
            }
        }
        self.schema(name, role)
    }
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}
