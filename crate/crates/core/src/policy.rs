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

//! Curator-authored privacy metadata for one table.
//!
//! A policy fixes the public quantization of every private column, the ε of
//! every released column set and of per-column count releases, and carries a
//! one-way publish latch. Once published, no mutator succeeds.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::confidence::DEFAULT_ALPHA;
use crate::error::{invalid, Error, Result};
use crate::schema::{ColumnType, Schema};
use crate::synopsis::{QuantumRange, SynopsisParams};

pub const DEFAULT_BRANCHING: u32 = 2;
pub const DEFAULT_EPSILON: f64 = 1.0;

/// Equal-width quanta `[qmin + i·g, qmin + (i+1)·g)` over `[qmin, qmax]`;
/// `qmax` itself folds into the last quantum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericQuantization {
    pub qmin: f64,
    pub qmax: f64,
    pub granularity: f64,
}

impl NumericQuantization {
    pub fn new(qmin: f64, qmax: f64, granularity: f64) -> Result<Self> {
        let q = Self {
            qmin,
            qmax,
            granularity,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.qmin.is_finite() && self.qmax.is_finite() && self.qmin < self.qmax) {
            return Err(invalid(format!(
                "numeric quantization needs finite qmin < qmax, got [{}, {}]",
                self.qmin, self.qmax
            )));
        }
        if !(self.granularity > 0.0 && self.granularity.is_finite()) {
            return Err(invalid(format!(
                "granularity must be positive, got {}",
                self.granularity
            )));
        }
        if (self.qmax - self.qmin) / self.granularity > (1u64 << 52) as f64 {
            return Err(invalid("quantization has more than 2^52 quanta"));
        }
        Ok(())
    }

    pub fn quantizer(&self) -> NumericQuantizer {
        let g = self.granularity;
        let rep = |i: u64| self.qmin + i as f64 * g;
        let mut m = (((self.qmax - self.qmin) / g).ceil() as u64).max(1);
        while m > 1 && rep(m - 1) >= self.qmax {
            m -= 1;
        }
        while rep(m) < self.qmax {
            m += 1;
        }
        NumericQuantizer {
            qmin: self.qmin,
            qmax: self.qmax,
            granularity: g,
            inv_granularity: 1.0 / g,
            domain_size: m,
        }
    }

    pub fn domain_size(&self) -> u64 {
        self.quantizer().domain_size
    }

    pub fn representative(&self, index: u64) -> f64 {
        self.qmin + index as f64 * self.granularity
    }

    /// Index of the quantum holding `v`; `None` for missing, NaN or
    /// out-of-range values.
    pub fn quantize(&self, v: Option<f64>) -> Option<u64> {
        v.and_then(|v| self.quantizer().index(v))
    }
}

/// Precomputed form of [`NumericQuantization`] used by scans.
#[derive(Clone, Copy, Debug)]
pub struct NumericQuantizer {
    pub(crate) qmin: f64,
    pub(crate) qmax: f64,
    granularity: f64,
    inv_granularity: f64,
    domain_size: u64,
}

impl NumericQuantizer {
    pub fn domain_size(&self) -> u64 {
        self.domain_size
    }

    // Indices stay below 2^53, so the signed conversions are exact and
    // compile to single instructions.
    #[inline]
    pub fn representative(&self, index: u64) -> f64 {
        self.qmin + index as i64 as f64 * self.granularity
    }

    /// Largest `i < m` whose representative is `<= v`.
    #[inline]
    pub fn index(&self, v: f64) -> Option<u64> {
        // Also rejects NaN.
        if !(v >= self.qmin && v <= self.qmax) {
            return None;
        }
        let mut i = (((v - self.qmin) * self.inv_granularity) as i64 as u64).min(self.domain_size - 1);
        if self.representative(i) > v {
            i -= 1;
        } else if i + 1 < self.domain_size && self.representative(i + 1) <= v {
            i += 1;
        }
        Some(i)
    }

    /// Smallest index in `[0, m]` whose representative is `>= h`.
    fn first_at_least(&self, h: f64) -> u64 {
        let estimate = ((h - self.qmin) * self.inv_granularity).ceil();
        let mut i = if estimate <= 0.0 {
            0
        } else {
            (estimate as u64).min(self.domain_size)
        };
        while i > 0 && self.representative(i - 1) >= h {
            i -= 1;
        }
        while i < self.domain_size && self.representative(i) < h {
            i += 1;
        }
        i
    }
}

fn default_true() -> bool {
    true
}

/// Quanta labelled by sorted boundary strings; quantum `i` holds the strings
/// in `[boundaries[i], boundaries[i+1])` under byte-lexicographic order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StringQuantization {
    pub boundaries: Vec<String>,
    #[serde(default = "default_true")]
    pub include_upper: bool,
}

impl StringQuantization {
    pub fn new<S: Into<String>>(boundaries: impl IntoIterator<Item = S>, include_upper: bool) -> Result<Self> {
        let q = Self {
            boundaries: boundaries.into_iter().map(Into::into).collect(),
            include_upper,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.boundaries.is_empty() {
            return Err(invalid("string quantization needs at least one boundary"));
        }
        if let Some(w) = self.boundaries.windows(2).find(|w| w[0] >= w[1]) {
            return Err(invalid(format!(
                "string boundaries must be strictly increasing: {:?} >= {:?}",
                w[0], w[1]
            )));
        }
        Ok(())
    }

    pub fn domain_size(&self) -> u64 {
        self.boundaries.len() as u64
    }

    #[inline]
    pub fn index(&self, v: &str) -> Option<u64> {
        let above = self.boundaries.partition_point(|b| b.as_str() <= v);
        if above == 0 {
            return None;
        }
        let i = above - 1;
        if i + 1 == self.boundaries.len() && !self.include_upper && v != self.boundaries[i] {
            return None;
        }
        Some(i as u64)
    }

    pub fn quantize(&self, v: Option<&str>) -> Option<u64> {
        v.and_then(|v| self.index(v))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Quantization {
    Numeric(NumericQuantization),
    String(StringQuantization),
}

impl Quantization {
    pub fn validate(&self) -> Result<()> {
        match self {
            Quantization::Numeric(q) => q.validate(),
            Quantization::String(q) => q.validate(),
        }
    }

    pub fn domain_size(&self) -> u64 {
        match self {
            Quantization::Numeric(q) => q.domain_size(),
            Quantization::String(q) => q.domain_size(),
        }
    }

    pub fn column_type(&self) -> ColumnType {
        match self {
            Quantization::Numeric(_) => ColumnType::Real,
            Quantization::String(_) => ColumnType::String,
        }
    }
}

/// Bucket boundaries in raw column units: `ℓ + 1` sorted values for `ℓ` buckets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BucketBoundaries {
    Numeric(Vec<f64>),
    String(Vec<String>),
}

impl BucketBoundaries {
    pub fn len(&self) -> usize {
        match self {
            BucketBoundaries::Numeric(b) => b.len(),
            BucketBoundaries::String(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bucket_count(&self) -> usize {
        self.len().saturating_sub(1)
    }
}

/// Maps each bucket `[h_i, h_{i+1})` to the quanta whose representative lies
/// in it. For string columns the last bucket is closed on the right, so a
/// bucket list `first..=last` over the boundaries covers every quantum.
pub fn bucket_to_quantum_ranges(boundaries: &BucketBoundaries, q: &Quantization) -> Result<Vec<QuantumRange>> {
    if boundaries.len() < 2 {
        return Err(invalid("at least two bucket boundaries are required"));
    }
    let edges: Vec<u64> = match (boundaries, q) {
        (BucketBoundaries::Numeric(h), Quantization::Numeric(q)) => {
            if let Some(v) = h.iter().find(|v| !v.is_finite()) {
                return Err(invalid(format!("bucket boundary {v} is not finite")));
            }
            if h.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid("bucket boundaries must be strictly increasing"));
            }
            let quantizer = q.quantizer();
            h.iter().map(|&h| quantizer.first_at_least(h)).collect()
        }
        (BucketBoundaries::String(h), Quantization::String(q)) => {
            if h.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid("bucket boundaries must be strictly increasing"));
            }
            let labels = &q.boundaries;
            let mut edges: Vec<u64> = h.iter().map(|h| labels.partition_point(|b| b < h) as u64).collect();
            let last = h.last().expect("at least two boundaries");
            *edges.last_mut().expect("at least two boundaries") = labels.partition_point(|b| b <= last) as u64;
            edges
        }
        (BucketBoundaries::Numeric(_), Quantization::String(_)) => {
            return Err(invalid("numeric bucket boundaries for a string column"));
        }
        (BucketBoundaries::String(_), Quantization::Numeric(_)) => {
            return Err(invalid("string bucket boundaries for a numeric column"));
        }
    };
    Ok(edges.windows(2).map(|w| QuantumRange { lo: w[0], hi: w[1] }).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnPolicy {
    #[serde(rename = "type")]
    pub column_type: ColumnType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantization: Option<Quantization>,
}

/// ε allocated to one released column set (one or two columns).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSetPolicy {
    pub id: u32,
    pub columns: Vec<String>,
    pub epsilon: f64,
}

impl ColumnSetPolicy {
    pub fn new<S: Into<String>>(id: u32, columns: impl IntoIterator<Item = S>, epsilon: f64) -> Self {
        Self {
            id,
            columns: columns.into_iter().map(Into::into).collect(),
            epsilon,
        }
    }

    fn same_columns(&self, columns: &[impl AsRef<str>]) -> bool {
        self.columns.len() == columns.len() && columns.iter().all(|c| self.columns.iter().any(|own| own == c.as_ref()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CountRelease {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distinct_epsilon: Option<f64>,
}

fn default_branching() -> u32 {
    DEFAULT_BRANCHING
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

/// The policy document. Serialized as JSON; never contains the table key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TablePolicy {
    table: String,
    #[serde(default = "default_branching")]
    branching: u32,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default)]
    published: bool,
    #[serde(default)]
    columns: BTreeMap<String, ColumnPolicy>,
    #[serde(default)]
    column_sets: Vec<ColumnSetPolicy>,
    #[serde(default)]
    count_releases: BTreeMap<String, CountRelease>,
}

impl TablePolicy {
    pub fn new(table: impl Into<String>) -> Self {
        Self {
            table: table.into(),
            branching: DEFAULT_BRANCHING,
            alpha: DEFAULT_ALPHA,
            published: false,
            columns: BTreeMap::new(),
            column_sets: Vec::new(),
            count_releases: BTreeMap::new(),
        }
    }

    /// Unpublished policy listing every schema column without quantization.
    pub fn for_schema(table: impl Into<String>, schema: &Schema) -> Self {
        let mut policy = Self::new(table);
        for column in schema.columns() {
            policy.columns.insert(
                column.name.clone(),
                ColumnPolicy {
                    column_type: column.column_type,
                    quantization: None,
                },
            );
        }
        policy
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, self.to_json())?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn table(&self) -> &str {
        &self.table
    }

    pub fn branching(&self) -> u32 {
        self.branching
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_published(&self) -> bool {
        self.published
    }

    pub fn columns(&self) -> &BTreeMap<String, ColumnPolicy> {
        &self.columns
    }

    pub fn column_sets(&self) -> &[ColumnSetPolicy] {
        &self.column_sets
    }

    pub fn count_releases(&self) -> &BTreeMap<String, CountRelease> {
        &self.count_releases
    }

    pub fn quantization(&self, column: &str) -> Option<&Quantization> {
        self.columns.get(column).and_then(|c| c.quantization.as_ref())
    }

    /// Short content hash identifying this exact policy document.
    pub fn snapshot_id(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("policy serializes");
        hex::encode(&Sha256::digest(bytes)[..16])
    }

    fn check_mutable(&self) -> Result<()> {
        if self.published {
            Err(Error::Published)
        } else {
            Ok(())
        }
    }

    pub fn set_branching(&mut self, branching: u32) -> Result<()> {
        self.check_mutable()?;
        if branching < 2 {
            return Err(invalid(format!("branching factor must be >= 2, got {branching}")));
        }
        self.branching = branching;
        Ok(())
    }

    pub fn set_alpha(&mut self, alpha: f64) -> Result<()> {
        self.check_mutable()?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        self.alpha = alpha;
        Ok(())
    }

    pub fn set_column(&mut self, name: impl Into<String>, column: ColumnPolicy) -> Result<()> {
        self.check_mutable()?;
        if let Some(q) = &column.quantization {
            q.validate()?;
            if q.column_type() != column.column_type {
                return Err(invalid("quantization kind does not match the column type"));
            }
        }
        self.columns.insert(name.into(), column);
        Ok(())
    }

    pub fn set_quantization(&mut self, column: &str, quantization: Option<Quantization>) -> Result<()> {
        self.check_mutable()?;
        let entry = self
            .columns
            .get_mut(column)
            .ok_or_else(|| Error::UnknownColumn(column.to_string()))?;
        if let Some(q) = &quantization {
            q.validate()?;
            if q.column_type() != entry.column_type {
                return Err(invalid(format!("quantization kind does not match type of `{column}`")));
            }
        }
        entry.quantization = quantization;
        Ok(())
    }

    pub fn add_column_set(&mut self, set: ColumnSetPolicy) -> Result<()> {
        self.check_mutable()?;
        if self.column_sets.iter().any(|s| s.id == set.id) {
            return Err(Error::Policy(format!("duplicate column set id {}", set.id)));
        }
        if self.column_sets.iter().any(|s| s.same_columns(&set.columns)) {
            return Err(Error::Policy(format!("duplicate column set {:?}", set.columns)));
        }
        if !(set.epsilon > 0.0 && set.epsilon.is_finite()) {
            return Err(invalid(format!("epsilon must be positive, got {}", set.epsilon)));
        }
        self.column_sets.push(set);
        Ok(())
    }

    pub fn set_column_set_epsilon(&mut self, id: u32, epsilon: f64) -> Result<()> {
        self.check_mutable()?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        let set = self
            .column_sets
            .iter_mut()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::Policy(format!("no column set with id {id}")))?;
        set.epsilon = epsilon;
        Ok(())
    }

    pub fn remove_column_set(&mut self, id: u32) -> Result<()> {
        self.check_mutable()?;
        let before = self.column_sets.len();
        self.column_sets.retain(|s| s.id != id);
        if self.column_sets.len() == before {
            return Err(Error::Policy(format!("no column set with id {id}")));
        }
        Ok(())
    }

    pub fn set_count_release(&mut self, column: impl Into<String>, release: CountRelease) -> Result<()> {
        self.check_mutable()?;
        self.count_releases.insert(column.into(), release);
        Ok(())
    }

    /// Every problem with the policy, or `Ok` if there are none.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.table.is_empty() {
            problems.push("table name is empty".to_string());
        }
        if self.branching < 2 {
            problems.push(format!("branching factor {} is below 2", self.branching));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            problems.push(format!("alpha {} is outside (0, 1)", self.alpha));
        }
        for (name, column) in &self.columns {
            if let Some(q) = &column.quantization {
                if let Err(e) = q.validate() {
                    problems.push(format!("column `{name}`: {e}"));
                } else if q.column_type() != column.column_type {
                    problems.push(format!("column `{name}`: quantization kind does not match its type"));
                }
            }
        }
        for (i, set) in self.column_sets.iter().enumerate() {
            if set.columns.is_empty() {
                problems.push(format!("column set {} lists no columns", set.id));
            }
            if !(set.epsilon > 0.0 && set.epsilon.is_finite()) {
                problems.push(format!(
                    "column set {} has non-positive epsilon {}",
                    set.id, set.epsilon
                ));
            }
            for column in &set.columns {
                if self.quantization(column).is_none() {
                    problems.push(format!(
                        "column set {} references unquantized column `{column}`",
                        set.id
                    ));
                }
            }
            for (j, other) in set.columns.iter().enumerate() {
                if set.columns[..j].contains(other) {
                    problems.push(format!("column set {} repeats column `{other}`", set.id));
                }
            }
            let earlier = &self.column_sets[..i];
            if earlier.iter().any(|s| s.id == set.id) {
                problems.push(format!("duplicate column set id {}", set.id));
            }
            if earlier.iter().any(|s| s.same_columns(&set.columns)) {
                problems.push(format!("duplicate column set {:?}", set.columns));
            }
        }
        for (column, release) in &self.count_releases {
            if !self.columns.contains_key(column) {
                problems.push(format!("count release for unknown column `{column}`"));
            }
            for (what, eps) in [("null", release.null_epsilon), ("distinct", release.distinct_epsilon)] {
                if let Some(eps) = eps {
                    if !(eps > 0.0 && eps.is_finite()) {
                        problems.push(format!("{what}-count epsilon for `{column}` is not positive: {eps}"));
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Checks that the policy describes columns of `schema` with matching types.
    pub fn validate_against(&self, schema: &Schema) -> Result<()> {
        self.validate()?;
        let mut problems = Vec::new();
        for (name, column) in &self.columns {
            match schema.get(name) {
                None => problems.push(format!("policy column `{name}` is not in the dataset")),
                Some(spec) if spec.column_type != column.column_type => {
                    problems.push(format!("policy column `{name}` has the wrong type"))
                }
                Some(_) => {}
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Published copy of this policy. Publishing twice is a no-op.
    pub fn publish(&self) -> Result<TablePolicy> {
        if self.published {
            return Ok(self.clone());
        }
        self.validate()?;
        let mut published = self.clone();
        published.published = true;
        Ok(published)
    }

    /// Total ε released by the table under basic composition.
    pub fn total_epsilon(&self) -> f64 {
        let sets: f64 = self.column_sets.iter().map(|s| s.epsilon).sum();
        let counts: f64 = self
            .count_releases
            .values()
            .map(|r| r.null_epsilon.unwrap_or(0.0) + r.distinct_epsilon.unwrap_or(0.0))
            .sum();
        sets + counts
    }

    /// The column set releasing exactly `columns` (in any order).
    pub fn column_set_for(&self, columns: &[impl AsRef<str>]) -> Result<&ColumnSetPolicy> {
        self.column_sets
            .iter()
            .find(|s| s.same_columns(columns))
            .ok_or_else(|| {
                let names: Vec<&str> = columns.iter().map(AsRef::as_ref).collect();
                Error::Policy(format!("no column set releases {names:?}"))
            })
    }

    pub fn synopsis_params(&self, set: &ColumnSetPolicy) -> Result<SynopsisParams> {
        let domain_sizes = set
            .columns
            .iter()
            .map(|c| {
                self.quantization(c)
                    .map(Quantization::domain_size)
                    .ok_or_else(|| Error::Policy(format!("column `{c}` is not quantized")))
            })
            .collect::<Result<Vec<_>>>()?;
        SynopsisParams::new(self.branching, domain_sizes, set.epsilon, set.id)
    }
}
