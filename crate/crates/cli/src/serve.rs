use std::sync::Arc;

use axum::extract::{Query, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use levelforge_core::explorer::{ApiError, BlendRequest, Session};
use levelforge_core::{Error, Result};
use serde::Deserialize;

use crate::commands::Ctx;
use crate::ServeArgs;

type Shared = Arc<Session>;

struct ApiResponse(Result<serde_json::Value, ApiError>);

impl IntoResponse for ApiResponse {
    fn into_response(self) -> Response {
        match self.0 {
            Ok(v) => Json(v).into_response(),
            Err(e) => {
                let status = StatusCode::from_u16(e.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
                (status, Json(e)).into_response()
            }
        }
    }
}

fn respond<T: serde::Serialize>(r: Result<T, ApiError>) -> ApiResponse {
    ApiResponse(r.map(|v| serde_json::to_value(v).expect("payload serializes")))
}

#[derive(Debug, Deserialize)]
struct GameQuery {
    game: Option<String>,
}

#[derive(Debug, Deserialize)]
struct SeedQuery {
    seed: Option<u64>,
}

async fn segments(State(s): State<Shared>, Query(q): Query<GameQuery>) -> ApiResponse {
    respond(s.list_segments(q.game.as_deref()))
}

async fn blend(State(s): State<Shared>, body: Option<Json<BlendRequest>>) -> ApiResponse {
    match body {
        Some(Json(req)) => respond(
            tokio::task::spawn_blocking(move || s.blend(&req))
                .await
                .unwrap_or_else(join_error),
        ),
        None => respond::<()>(Err(ApiError::new(400, "body must be {\"a\", \"b\", \"t\"}"))),
    }
}

async fn random(State(s): State<Shared>, Query(q): Query<SeedQuery>) -> ApiResponse {
    respond(
        tokio::task::spawn_blocking(move || s.random(q.seed))
            .await
            .unwrap_or_else(join_error),
    )
}

async fn health(State(s): State<Shared>) -> Json<serde_json::Value> {
    Json(s.health())
}

fn join_error<T>(e: tokio::task::JoinError) -> Result<T, ApiError> {
    Err(ApiError::new(500, e.to_string()))
}

fn local_origin(origin: &str) -> bool {
    let rest = origin
        .strip_prefix("http://")
        .or_else(|| origin.strip_prefix("https://"))
        .unwrap_or("");
    let host = match rest.strip_prefix('[') {
        Some(v6) => v6.split(']').next().map(|h| format!("[{h}]")).unwrap_or_default(),
        None => rest.split(':').next().unwrap_or("").to_string(),
    };
    matches!(host.as_str(), "localhost" | "127.0.0.1" | "[::1]")
}

/// Cross-origin access for pages served from the local machine only.
async fn cors(req: Request, next: Next) -> Response {
    let origin = req
        .headers()
        .get(header::ORIGIN)
        .and_then(|o| o.to_str().ok())
        .filter(|o| local_origin(o))
        .and_then(|o| HeaderValue::from_str(o).ok());
    let mut resp = if req.method() == Method::OPTIONS {
        StatusCode::NO_CONTENT.into_response()
    } else {
        next.run(req).await
    };
    if let Some(origin) = origin {
        let h = resp.headers_mut();
        h.insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, origin);
        h.insert(
            header::ACCESS_CONTROL_ALLOW_METHODS,
            HeaderValue::from_static("GET, POST, OPTIONS"),
        );
        h.insert(
            header::ACCESS_CONTROL_ALLOW_HEADERS,
            HeaderValue::from_static("content-type"),
        );
        h.insert(header::VARY, HeaderValue::from_static("origin"));
    }
    resp
}

pub fn router(session: Session) -> Router {
    Router::new()
        .route("/api/segments", get(segments))
        .route("/api/blend", post(blend))
        .route("/api/random", get(random))
        .route("/api/health", get(health))
        .layer(middleware::from_fn(cors))
        .with_state(Arc::new(session))
}

pub fn serve(_ctx: &Ctx, args: &ServeArgs, session: Session) -> Result<()> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("starting runtime", e))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.addr)
            .await
            .map_err(|e| Error::io(format!("binding {}", args.addr), e))?;
        log::warn!("explorer API listening on http://{}", args.addr);
        axum::serve(listener, router(session))
            .await
            .map_err(|e| Error::io("serving", e))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use levelforge_core::corpus::{CorpusSplit, SegmentArchive};
    use levelforge_core::fixtures::{overfit_segments, overfit_table};
    use levelforge_core::tiles::TileCatalog;
    use levelforge_core::vae::{build_model, NetworkSpec, OutputKind};
    use tokio::io::{AsyncReadExt, AsyncWriteExt};

    fn session() -> Session {
        let catalog = TileCatalog::default();
        let table = overfit_table(&catalog, 0).unwrap();
        let segs = overfit_segments();
        let spec = NetworkSpec::fc_scaled(table.dim(), vec![8], 4, OutputKind::Linear);
        let archive = SegmentArchive::new(&segs, &CorpusSplit::train_only(segs.clone(), 0));
        Session::new(build_model(&spec, 0).unwrap(), table, &archive, catalog).unwrap()
    }

    async fn request(addr: std::net::SocketAddr, raw: String) -> (u16, String, String) {
        let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
        stream.write_all(raw.as_bytes()).await.unwrap();
        let mut buf = String::new();
        stream.read_to_string(&mut buf).await.unwrap();
        let (head, body) = buf.split_once("\r\n\r\n").unwrap();
        let status = head[9..12].parse().unwrap();
        (status, head.to_ascii_lowercase(), body.to_string())
    }

    fn get(path: &str, origin: &str) -> String {
        format!("GET {path} HTTP/1.1\r\nHost: x\r\nOrigin: {origin}\r\nConnection: close\r\n\r\n")
    }

    fn post(path: &str, body: &str) -> String {
        format!(
            "POST {path} HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
    }

    #[tokio::test]
    async fn http_routes() {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, router(session())).await.unwrap() });

        let (status, head, body) = request(addr, get("/api/health", "http://localhost:3000")).await;
        assert_eq!(status, 200);
        assert!(head.contains("access-control-allow-origin: http://localhost:3000"));
        assert!(body.contains("\"version\":1"));

        let (_, head, _) = request(addr, get("/api/health", "http://example.com")).await;
        assert!(!head.contains("access-control-allow-origin"));

        let (status, _, body) = request(addr, get("/api/segments?game=LR", "null")).await;
        assert_eq!(status, 200);
        let list: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!(list["segments"].as_array().unwrap().len(), 4);
        assert_eq!(request(addr, get("/api/segments?game=nope", "null")).await.0, 400);

        let a = overfit_segments()[0].id();
        let b = overfit_segments()[4].id();
        let ok = format!("{{\"a\":\"{a}\",\"b\":\"{b}\",\"t\":0.25}}");
        let (status, _, body) = request(addr, post("/api/blend", &ok)).await;
        assert_eq!(status, 200);
        let payload: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!(payload["t"], 0.25);
        assert_eq!(payload["tiles"].as_array().unwrap().len(), 16);
        let far = format!("{{\"a\":\"{a}\",\"b\":\"{b}\",\"t\":2}}");
        assert_eq!(request(addr, post("/api/blend", &far)).await.0, 422);
        let missing = format!("{{\"a\":\"{a}\",\"b\":\"zzz\",\"t\":0}}");
        let (status, _, body) = request(addr, post("/api/blend", &missing)).await;
        assert_eq!(status, 404);
        assert!(body.contains("\"version\":1"));

        let (status, _, body) = request(addr, get("/api/random?seed=12", "null")).await;
        assert_eq!(status, 200);
        assert!(body.contains("\"seed\":12"));
    }

    #[test]
    fn only_local_origins_are_allowed() {
        assert!(local_origin("http://localhost:5173"));
        assert!(local_origin("http://127.0.0.1"));
        assert!(local_origin("http://[::1]:8080"));
        assert!(!local_origin("http://localhost.evil.com"));
        assert!(!local_origin("https://example.com"));
        assert!(!local_origin("null"));
    }
}
