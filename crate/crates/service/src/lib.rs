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

//! HTTP front end for private histogram, heatmap and count queries.
//!
//! Two bearer tokens select the curator or analyst role. Analysts may only
//! query published tables; the curator previews and edits policies until
//! publication, after which the policy is frozen.

pub mod config;
pub mod error;
pub mod http;
pub mod service;

pub use config::ServiceConfig;
pub use error::ServiceError;
pub use http::{router, serve};
pub use service::{RangeStatsResponse, Role, SchemaResponse, Service, StatsSource, TableSummary};
