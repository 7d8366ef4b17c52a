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

use std::fmt;

use axum::http::StatusCode;
use serde::Serialize;
use serde_json::Value;
use vsyn_core::Error;

/// Error body: `{code, message, detail}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ServiceError {
    #[serde(skip)]
    pub status: u16,
    pub code: &'static str,
    pub message: String,
    pub detail: Value,
}

impl ServiceError {
    fn new(status: u16, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            detail: Value::Null,
        }
    }

    pub fn unauthorized() -> Self {
        Self::new(401, "unauthorized", "missing or unknown bearer token")
    }

    pub fn forbidden(message: impl Into<String>) -> Self {
        Self::new(403, "forbidden", message)
    }

    pub fn unknown_table(table: &str) -> Self {
        Self::new(404, "unknown_table", format!("unknown table `{table}`"))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(400, "invalid_request", message)
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(500, "config", message)
    }

    pub fn status_code(&self) -> StatusCode {
        StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
    }
}

impl fmt::Display for ServiceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}): {}", self.code, self.status, self.message)
    }
}

impl std::error::Error for ServiceError {}

impl From<Error> for ServiceError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::InvalidParameter(_) => Self::new(400, "invalid_request", message),
            Error::Validation(problems) => Self {
                detail: Value::from(problems),
                ..Self::new(400, "invalid_policy", message)
            },
            Error::Policy(_) => Self::new(400, "policy", message),
            Error::UnknownColumn(_) => Self::new(400, "unknown_column", message),
            Error::Schema(_) => Self::new(400, "schema", message),
            Error::Published => Self::new(409, "published", message),
            Error::Access(_) => Self::new(403, "forbidden", message),
            Error::UnknownTable(table) => Self::unknown_table(&table),
            Error::Key(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => {
                tracing::error!(error = %message, "internal error");
                Self::new(500, "internal", "internal error")
            }
        }
    }
}
