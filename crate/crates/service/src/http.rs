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

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequestParts, Path, Query, State};
use axum::http::header::AUTHORIZATION;
use axum::http::request::Parts;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use vsyn_core::{HistogramRequest, TablePolicy};

use crate::error::ServiceError;
use crate::service::{Role, Service};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status_code(), Json(self)).into_response()
    }
}

struct Caller(Role);

impl FromRequestParts<Arc<Service>> for Caller {
    type Rejection = ServiceError;

    async fn from_request_parts(parts: &mut Parts, service: &Arc<Service>) -> Result<Self, Self::Rejection> {
        let token = parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .ok_or_else(ServiceError::unauthorized)?;
        service.authenticate(token.trim()).map(Caller)
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ServiceError::bad_request(e.body_text()))
}

async fn blocking<T, F>(f: F) -> Result<Json<T>, ServiceError>
where
    T: Serialize + Send + 'static,
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| {
            tracing::error!(error = %e, "query task failed");
            ServiceError::from(vsyn_core::Error::Io(std::io::Error::other("query task failed")))
        })?
        .map(Json)
}

async fn tables(State(s): State<Arc<Service>>, Caller(role): Caller) -> impl IntoResponse {
    Json(s.list_tables(role))
}

async fn schema(
    State(s): State<Arc<Service>>,
    Caller(role): Caller,
    Path(table): Path<String>,
) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(s.schema(&table, role)?))
}

async fn histogram(
    State(s): State<Arc<Service>>,
    Caller(role): Caller,
    Path(table): Path<String>,
    payload: Result<Json<HistogramRequest>, JsonRejection>,
) -> Result<impl IntoResponse, ServiceError> {
    let request = body(payload)?;
    blocking(move || s.histogram(&table, role, &request)).await
}

async fn heatmap(
    State(s): State<Arc<Service>>,
    Caller(role): Caller,
    Path(table): Path<String>,
    payload: Result<Json<HistogramRequest>, JsonRejection>,
) -> Result<impl IntoResponse, ServiceError> {
    let request = body(payload)?;
    blocking(move || s.heatmap(&table, role, &request)).await
}

async fn counts(
    State(s): State<Arc<Service>>,
    Caller(role): Caller,
    Path((table, column)): Path<(String, String)>,
) -> Result<impl IntoResponse, ServiceError> {
    blocking(move || s.counts(&table, role, &column)).await
}

#[derive(Deserialize)]
struct RangeParams {
    #[serde(default)]
    raw: bool,
}

async fn range_stats(
    State(s): State<Arc<Service>>,
    Caller(role): Caller,
    Path((table, column)): Path<(String, String)>,
    Query(params): Query<RangeParams>,
) -> Result<impl IntoResponse, ServiceError> {
    blocking(move || s.range_stats(&table, role, &column, params.raw)).await
}

async fn put_policy(
    State(s): State<Arc<Service>>,
    Caller(role): Caller,
    Path(table): Path<String>,
    payload: Bytes,
) -> Result<impl IntoResponse, ServiceError> {
    if role != Role::Curator {
        return Err(ServiceError::forbidden("only the curator may change a policy"));
    }
    let text = std::str::from_utf8(&payload).map_err(|_| ServiceError::bad_request("policy must be UTF-8 JSON"))?;
    let policy = TablePolicy::from_json(text).map_err(|e| ServiceError::bad_request(e.to_string()))?;
    Ok(Json(s.put_policy(&table, role, policy)?))
}

async fn publish(
    State(s): State<Arc<Service>>,
    Caller(role): Caller,
    Path(table): Path<String>,
) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(s.publish(&table, role)?))
}

async fn not_found() -> ServiceError {
    ServiceError {
        status: 404,
        code: "not_found",
        message: "no such endpoint".into(),
        detail: serde_json::Value::Null,
    }
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/tables", get(tables))
        .route("/tables/{table}/schema", get(schema))
        .route("/tables/{table}/histogram", post(histogram))
        .route("/tables/{table}/heatmap", post(heatmap))
        .route("/tables/{table}/counts/{column}", post(counts))
        .route("/tables/{table}/range-stats/{column}", get(range_stats))
        .route("/tables/{table}/policy", put(put_policy))
        .route("/tables/{table}/publish", post(publish))
        .fallback(not_found)
        .with_state(service)
}

/// Serves until Ctrl-C.
pub async fn serve(service: Arc<Service>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
