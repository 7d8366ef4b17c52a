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

//! Private query pipeline shared by the HTTP service and the CLI.
//!
//! bucket boundaries → quantum ranges → exact counts from a [`Backend`] →
//! synopsis noise per bucket → Monte-Carlo confidence radius per bucket.
//! Role checks and the publish latch are enforced by callers.

use serde::{Deserialize, Serialize};

use crate::confidence::CiCache;
use crate::engine::{Dataset, RangeStats, TrueHeatmap, TrueHistogram, Visibility};
use crate::error::{invalid, Error, Result};
use crate::policy::{bucket_to_quantum_ranges, BucketBoundaries, Quantization, TablePolicy};
use crate::schema::Schema;
use crate::synopsis::{count_release_noise, NoiseTag, QuantumRange, SecretKey, VirtualSynopsis};

/// Source of exact, pre-noise aggregates.
pub trait Backend: Send + Sync {
    fn schema(&self) -> Schema;

    fn quantized_histogram(&self, column: &str, q: &Quantization, ranges: &[QuantumRange]) -> Result<TrueHistogram>;

    fn quantized_heatmap(
        &self,
        x: (&str, &Quantization, &[QuantumRange]),
        y: (&str, &Quantization, &[QuantumRange]),
    ) -> Result<TrueHeatmap>;

    fn null_count(&self, column: &str, q: Option<&Quantization>) -> Result<u64>;

    fn distinct_count(&self, column: &str) -> Result<u64>;

    fn raw_range_stats(&self, column: &str, visibility: Visibility) -> Result<RangeStats>;
}

impl Backend for Dataset {
    fn schema(&self) -> Schema {
        Dataset::schema(self)
    }

    fn quantized_histogram(&self, column: &str, q: &Quantization, ranges: &[QuantumRange]) -> Result<TrueHistogram> {
        Dataset::quantized_histogram(self, column, q, ranges)
    }

    fn quantized_heatmap(
        &self,
        x: (&str, &Quantization, &[QuantumRange]),
        y: (&str, &Quantization, &[QuantumRange]),
    ) -> Result<TrueHeatmap> {
        Dataset::quantized_heatmap(self, x, y)
    }

    fn null_count(&self, column: &str, q: Option<&Quantization>) -> Result<u64> {
        Dataset::null_count(self, column, q)
    }

    fn distinct_count(&self, column: &str) -> Result<u64> {
        Dataset::distinct_count(self, column)
    }

    fn raw_range_stats(&self, column: &str, visibility: Visibility) -> Result<RangeStats> {
        Dataset::raw_range_stats(self, column, visibility)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRequest {
    pub columns: Vec<String>,
    /// One boundary list per column, in raw column units.
    pub buckets: Vec<BucketBoundaries>,
    #[serde(default)]
    pub include_cdf: bool,
}

impl HistogramRequest {
    pub fn histogram(column: impl Into<String>, buckets: BucketBoundaries) -> Self {
        Self {
            columns: vec![column.into()],
            buckets: vec![buckets],
            include_cdf: false,
        }
    }

    pub fn heatmap(
        x: impl Into<String>,
        x_buckets: BucketBoundaries,
        y: impl Into<String>,
        y_buckets: BucketBoundaries,
    ) -> Self {
        Self {
            columns: vec![x.into(), y.into()],
            buckets: vec![x_buckets, y_buckets],
            include_cdf: false,
        }
    }

    pub fn with_cdf(mut self) -> Self {
        self.include_cdf = true;
        self
    }
}

/// A noisy count and its confidence radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub count: f64,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramDebug {
    pub scale: f64,
    pub n_vars: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cdf_n_vars: Option<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramResponse {
    pub table: String,
    pub column: String,
    pub column_set_id: u32,
    pub buckets: Vec<Estimate>,
    /// Noisy prefix counts `[0, end of bucket j)`, not forced monotone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cdf: Option<Vec<Estimate>>,
    pub epsilon: f64,
    pub total_epsilon: f64,
    pub alpha: f64,
    pub policy_id: String,
    pub debug: HistogramDebug,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapDebug {
    pub scale: f64,
    /// `n_vars[x][y]`.
    pub n_vars: Vec<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapResponse {
    pub table: String,
    pub columns: Vec<String>,
    pub column_set_id: u32,
    /// `cells[x][y]`.
    pub cells: Vec<Vec<Estimate>>,
    pub epsilon: f64,
    pub total_epsilon: f64,
    pub alpha: f64,
    pub policy_id: String,
    pub debug: HeatmapDebug,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountEstimate {
    pub count: f64,
    pub radius: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountsResponse {
    pub table: String,
    pub column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_count: Option<CountEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distinct_count: Option<CountEstimate>,
    pub total_epsilon: f64,
    pub policy_id: String,
}

/// One consistent `(backend, policy, key)` snapshot to answer queries from.
pub struct QueryContext<'a, B: Backend + ?Sized> {
    pub backend: &'a B,
    pub policy: &'a TablePolicy,
    pub key: &'a SecretKey,
    pub ci: &'a CiCache,
}

impl<'a, B: Backend + ?Sized> QueryContext<'a, B> {
    pub fn new(backend: &'a B, policy: &'a TablePolicy, key: &'a SecretKey, ci: &'a CiCache) -> Self {
        Self {
            backend,
            policy,
            key,
            ci,
        }
    }

    fn quantization(&self, column: &str) -> Result<&'a Quantization> {
        self.policy
            .quantization(column)
            .ok_or_else(|| Error::Policy(format!("column `{column}` has no quantization")))
    }

    fn estimate(
        &self,
        synopsis: &VirtualSynopsis,
        ranges: &[QuantumRange],
        true_count: u64,
    ) -> Result<(Estimate, u64)> {
        let noisy = synopsis.noisy_count(ranges, true_count as f64)?;
        let radius = self.ci.radius(noisy.n_vars, synopsis.scale(), self.policy.alpha())?;
        Ok((
            Estimate {
                count: noisy.value,
                radius,
            },
            noisy.n_vars,
        ))
    }

    pub fn histogram(&self, request: &HistogramRequest) -> Result<HistogramResponse> {
        let (column, boundaries) = match (request.columns.as_slice(), request.buckets.as_slice()) {
            ([column], [boundaries]) => (column, boundaries),
            _ => return Err(invalid("a histogram takes exactly one column and one bucket list")),
        };
        let set = self.policy.column_set_for(&[column])?;
        let q = self.quantization(column)?;
        let ranges = bucket_to_quantum_ranges(boundaries, q)?;
        let synopsis = VirtualSynopsis::new(self.key, self.policy.synopsis_params(set)?)?;

        // The quanta before the first bucket only matter for prefix counts.
        let head = QuantumRange {
            lo: 0,
            hi: ranges[0].lo,
        };
        let scan: Vec<QuantumRange> = if request.include_cdf && !head.is_empty() {
            std::iter::once(head).chain(ranges.iter().copied()).collect()
        } else {
            ranges.clone()
        };
        let exact = self.backend.quantized_histogram(column, q, &scan)?;
        let (head_count, counts) = if scan.len() > ranges.len() {
            (exact.counts[0], &exact.counts[1..])
        } else {
            (0, &exact.counts[..])
        };

        let mut buckets = Vec::with_capacity(ranges.len());
        let mut n_vars = Vec::with_capacity(ranges.len());
        for (range, &count) in ranges.iter().zip(counts) {
            let (estimate, vars) = self.estimate(&synopsis, &[*range], count)?;
            buckets.push(estimate);
            n_vars.push(vars);
        }

        let (cdf, cdf_n_vars) = if request.include_cdf {
            let mut points = Vec::with_capacity(ranges.len());
            let mut vars = Vec::with_capacity(ranges.len());
            let mut prefix = head_count;
            for (range, &count) in ranges.iter().zip(counts) {
                prefix += count;
                let (estimate, v) = self.estimate(&synopsis, &[QuantumRange { lo: 0, hi: range.hi }], prefix)?;
                points.push(estimate);
                vars.push(v);
            }
            (Some(points), Some(vars))
        } else {
            (None, None)
        };

        Ok(HistogramResponse {
            table: self.policy.table().to_string(),
            column: column.clone(),
            column_set_id: set.id,
            buckets,
            cdf,
            epsilon: set.epsilon,
            total_epsilon: self.policy.total_epsilon(),
            alpha: self.policy.alpha(),
            policy_id: self.policy.snapshot_id(),
            debug: HistogramDebug {
                scale: synopsis.scale(),
                n_vars,
                cdf_n_vars,
            },
        })
    }

    pub fn heatmap(&self, request: &HistogramRequest) -> Result<HeatmapResponse> {
        let ((x, y), (bx, by)) = match (request.columns.as_slice(), request.buckets.as_slice()) {
            ([x, y], [bx, by]) => ((x, y), (bx, by)),
            _ => return Err(invalid("a heatmap takes exactly two columns and two bucket lists")),
        };
        if x == y {
            return Err(invalid("heatmap columns must differ"));
        }
        if request.include_cdf {
            return Err(invalid("CDFs are only available for one-dimensional histograms"));
        }
        let set = self.policy.column_set_for(&[x, y])?;
        // Noise coordinates follow the column set's column order.
        let swapped = set.columns[0] != *x;
        let (qx, qy) = (self.quantization(x)?, self.quantization(y)?);
        let (rx, ry) = (bucket_to_quantum_ranges(bx, qx)?, bucket_to_quantum_ranges(by, qy)?);
        let synopsis = VirtualSynopsis::new(self.key, self.policy.synopsis_params(set)?)?;
        let exact = self.backend.quantized_heatmap((x, qx, &rx), (y, qy, &ry))?;

        let mut cells = Vec::with_capacity(rx.len());
        let mut n_vars = Vec::with_capacity(rx.len());
        for (i, range_x) in rx.iter().enumerate() {
            let mut row = Vec::with_capacity(ry.len());
            let mut row_vars = Vec::with_capacity(ry.len());
            for (j, range_y) in ry.iter().enumerate() {
                let rect = if swapped {
                    [*range_y, *range_x]
                } else {
                    [*range_x, *range_y]
                };
                let (estimate, vars) = self.estimate(&synopsis, &rect, exact.get(i, j))?;
                row.push(estimate);
                row_vars.push(vars);
            }
            cells.push(row);
            n_vars.push(row_vars);
        }

        Ok(HeatmapResponse {
            table: self.policy.table().to_string(),
            columns: vec![x.clone(), y.clone()],
            column_set_id: set.id,
            cells,
            epsilon: set.epsilon,
            total_epsilon: self.policy.total_epsilon(),
            alpha: self.policy.alpha(),
            policy_id: self.policy.snapshot_id(),
            debug: HeatmapDebug {
                scale: synopsis.scale(),
                n_vars,
            },
        })
    }

    /// Noisy null and distinct counts for one column. Each noise term is a
    /// PRF evaluation keyed by the column's position in the schema.
    pub fn counts(&self, column: &str) -> Result<CountsResponse> {
        let schema = self.backend.schema();
        let position = schema
            .position(column)
            .ok_or_else(|| Error::UnknownColumn(column.to_string()))?;
        let release = self
            .policy
            .count_releases()
            .get(column)
            .filter(|r| r.null_epsilon.is_some() || r.distinct_epsilon.is_some())
            .ok_or_else(|| Error::Policy(format!("no count release is configured for `{column}`")))?;
        let release_one = |tag: NoiseTag, epsilon: f64, exact: u64| -> Result<CountEstimate> {
            let noise = count_release_noise(self.key, tag, position as u32, epsilon)?;
            Ok(CountEstimate {
                count: exact as f64 + noise,
                radius: self.ci.radius(1, 1.0 / epsilon, self.policy.alpha())?,
                epsilon,
            })
        };
        let null_count = release
            .null_epsilon
            .map(|eps| {
                let exact = self.backend.null_count(column, self.policy.quantization(column))?;
                release_one(NoiseTag::NullCount, eps, exact)
            })
            .transpose()?;
        let distinct_count = release
            .distinct_epsilon
            .map(|eps| release_one(NoiseTag::DistinctCount, eps, self.backend.distinct_count(column)?))
            .transpose()?;
        Ok(CountsResponse {
            table: self.policy.table().to_string(),
            column: column.to_string(),
            null_count,
            distinct_count,
            total_epsilon: self.policy.total_epsilon(),
            policy_id: self.policy.snapshot_id(),
        })
    }
}
