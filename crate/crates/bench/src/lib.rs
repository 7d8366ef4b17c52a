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

//! Fixtures shared by the benchmarks.

use vsyn_core::bench::synthetic_table;
use vsyn_core::{BucketBoundaries, Dataset, SecretKey, TablePolicy};

pub const DOMAIN: u64 = 1024;

pub struct Fixture {
    pub dataset: Dataset,
    pub policy: TablePolicy,
    pub key: SecretKey,
}

/// Uniform columns `x` and `y` over `DOMAIN` unit quanta, branching 2, ε = 1.
pub fn fixture(rows: usize) -> Fixture {
    let (dataset, policy) = synthetic_table("bench", &["x", "y"], rows, DOMAIN, 2, 1.0, 7).expect("synthetic table");
    Fixture {
        dataset,
        policy,
        key: SecretKey::from_bytes([9; 32]),
    }
}

/// `buckets` equal-width boundaries over the whole domain.
pub fn equal_width(buckets: usize) -> BucketBoundaries {
    let width = DOMAIN as f64 / buckets as f64;
    BucketBoundaries::Numeric((0..=buckets).map(|i| i as f64 * width).collect())
}
