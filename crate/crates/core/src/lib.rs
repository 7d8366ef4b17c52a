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

//! Differentially private histogram and heatmap queries over a published
//! table, answered from a virtual hierarchical-histogram synopsis.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod confidence;
pub mod engine;
pub mod error;
pub mod keys;
pub mod policy;
pub mod query;
pub mod schema;
pub mod sqlgen;
pub mod store;
pub mod synopsis;

pub use confidence::{confidence_interval, min_epsilon_subpixel, CiCache};
pub use engine::{Bound, Column, Dataset, RangeStats, TrueHeatmap, TrueHistogram, Visibility};
pub use error::{Error, Result};
pub use keys::KeyFile;
pub use policy::{
    bucket_to_quantum_ranges, BucketBoundaries, ColumnPolicy, ColumnSetPolicy, CountRelease, NumericQuantization,
    Quantization, StringQuantization, TablePolicy,
};
pub use query::{
    Backend, CountEstimate, CountsResponse, Estimate, HeatmapResponse, HistogramRequest, HistogramResponse,
    QueryContext,
};
pub use schema::{ColumnSpec, ColumnType, Schema};
pub use sqlgen::{normalize_sql, Dialect, MySql, SqlGenerator, SqlQueryPlan};
pub use store::{DataDir, StoredTable};
pub use synopsis::{
    b_adic_decomposition, laplace_from_uniform, laplace_scale, node_noise, noisy_range_count, prf_uniform, NoiseSample,
    NoiseTag, QuantumRange, SecretKey, SynopsisParams, TreeNode, VirtualSynopsis,
};
