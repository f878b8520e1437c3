use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use apilab_core::featurizer::FeatureVector;
use apilab_core::oracle::{ClassifyService, OracleError};
use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use crate::{ClassifyRequest, ErrorBody, RateLimitedBody, ServiceError};

fn bad_request(message: String) -> Response {
    (StatusCode::BAD_REQUEST, Json(ErrorBody { error: message })).into_response()
}

async fn classify(State(service): State<Arc<ClassifyService>>, body: Bytes) -> Response {
    let request: ClassifyRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return bad_request(format!("malformed request body: {e}")),
    };
    match service.classify(&FeatureVector(request.counts)) {
        Ok(answer) => Json(answer).into_response(),
        Err(OracleError::RateLimited { retry_after_seconds }) => (
            StatusCode::TOO_MANY_REQUESTS,
            [(header::RETRY_AFTER, retry_after_seconds.to_string())],
            Json(RateLimitedBody { retry_after_seconds }),
        )
            .into_response(),
        Err(OracleError::BadRequest(m)) => bad_request(m),
        Err(OracleError::Network(m)) => (StatusCode::INTERNAL_SERVER_ERROR, Json(ErrorBody { error: m })).into_response(),
    }
}

pub fn router(service: Arc<ClassifyService>) -> Router {
    Router::new()
        .route("/classify", post(classify))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(service)
}

/// Serves until `shutdown` resolves.
pub async fn serve<F>(listener: TcpListener, service: Arc<ClassifyService>, shutdown: F) -> Result<(), ServiceError>
where
    F: Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}

/// Server on its own thread and runtime; dropped or [`RunningServer::stop`]ped to shut down.
pub struct RunningServer {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<Result<(), ServiceError>>>,
}

impl RunningServer {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) -> Result<(), ServiceError> {
        self.shutdown_and_join()
    }

    fn shutdown_and_join(&mut self) -> Result<(), ServiceError> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked").into())),
            None => Ok(()),
        }
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        let _ = self.shutdown_and_join();
    }
}

/// Binds `addr` (port 0 picks a free port) and serves in the background.
pub fn spawn_background(service: Arc<ClassifyService>, addr: &str) -> Result<RunningServer, ServiceError> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()?;
    let listener = runtime
        .block_on(TcpListener::bind(addr))
        .map_err(|source| ServiceError::Bind { addr: addr.to_string(), source })?;
    let local = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        runtime.block_on(serve(listener, service, async {
            let _ = rx.await;
        }))
    });
    Ok(RunningServer {
        addr: local,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}
