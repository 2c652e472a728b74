use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::extract::State;
use axum::http::{header, HeaderValue, Request as HttpRequest, StatusCode};
use axum::response::{IntoResponse, Response as HttpResponse};
use axum::Router;
use serde_json::Value;

use super::{Request, Response, Service};
use crate::error::ApiError;

/// Header carrying the client's idempotency key.
pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

const MAX_BODY: usize = 16 * 1024 * 1024;

/// An HTTP router that forwards every request to the service.
pub fn router(service: Arc<Service>) -> Router {
    Router::new().fallback(dispatch).with_state(service)
}

async fn dispatch(State(service): State<Arc<Service>>, request: HttpRequest<Body>) -> HttpResponse {
    let (parts, body) = request.into_parts();
    let bytes = match to_bytes(body, MAX_BODY).await {
        Ok(b) => b,
        Err(e) => return reply(Response::error(&ApiError::new(413, "body-too-large", e.to_string()))),
    };
    let body = if bytes.iter().all(u8::is_ascii_whitespace) {
        Value::Null
    } else {
        match serde_json::from_slice(&bytes) {
            Ok(v) => v,
            Err(e) => return reply(Response::error(&ApiError::schema(format!("body is not JSON: {e}")))),
        }
    };
    let key = parts.headers.get(IDEMPOTENCY_HEADER).and_then(|v| v.to_str().ok()).map(str::to_string);
    let request = Request { method: parts.method.as_str().to_string(), path: parts.uri.path().to_string(), key, body };
    match tokio::task::spawn_blocking(move || service.handle(request)).await {
        Ok(r) => reply(r),
        Err(e) => reply(Response::error(&ApiError::new(500, "internal", e.to_string()))),
    }
}

fn reply(r: Response) -> HttpResponse {
    let status = StatusCode::from_u16(r.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let mut response = (status, r.body.to_string()).into_response();
    response.headers_mut().insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    response
}
