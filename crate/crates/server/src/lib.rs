//! Stateless HTTP/JSON front end of the simulator.
//!
//! Every request carries the whole problem (configuration, program, memory
//! arrays, target cycle) and the response is a pure function of it; stepping
//! backward is a request for an earlier tick.

pub mod api;
pub mod compile;

use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use rvss_core::config::CpuConfig;
use rvss_core::pipeline::{assemble_for, state_at, InitError, RunOutcome, SimState};
use schemars::schema_for;
use serde::de::DeserializeOwned;
use serde::Serialize;
use tower_http::compression::CompressionLayer;
use tower_http::cors::CorsLayer;

use api::*;
use compile::{CompileFailure, Compiler};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// `None` disables `/api/compile`.
    pub compiler: Option<Compiler>,
    pub body_limit: usize,
    /// Upper bound on the cycles any request may simulate.
    pub max_cycles: u64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { compiler: Some(Compiler::default()), body_limit: 4 << 20, max_cycles: 10_000_000 }
    }
}

impl ServerConfig {
    /// Reads `RVSS_CC`, `RVSS_CC_TIMEOUT` (seconds), `RVSS_BODY_LIMIT`
    /// (bytes) and `RVSS_MAX_CYCLES`. An empty `RVSS_CC` disables compiling.
    pub fn from_env() -> Result<Self, String> {
        let mut config = Self::default();
        let number = |name: &str| -> Result<Option<u64>, String> {
            std::env::var(name).ok().map(|v| v.parse().map_err(|_| format!("{name}: not a number: {v}"))).transpose()
        };
        if let Ok(template) = std::env::var("RVSS_CC") {
            config.compiler = (!template.trim().is_empty()).then(|| Compiler { template, ..Compiler::default() });
        }
        if let (Some(secs), Some(compiler)) = (number("RVSS_CC_TIMEOUT")?, config.compiler.as_mut()) {
            compiler.timeout = Duration::from_secs(secs);
        }
        if let Some(limit) = number("RVSS_BODY_LIMIT")? {
            config.body_limit = limit as usize;
        }
        if let Some(max) = number("RVSS_MAX_CYCLES")? {
            config.max_cycles = max;
        }
        Ok(config)
    }
}

/// A JSON response with an explicit status.
pub struct Reply(pub StatusCode, pub Vec<u8>);

impl IntoResponse for Reply {
    fn into_response(self) -> Response {
        (self.0, [(header::CONTENT_TYPE, "application/json")], self.1).into_response()
    }
}

fn reply<T: Serialize>(status: StatusCode, body: &T) -> Reply {
    Reply(status, serde_json::to_vec(body).expect("response serializes"))
}

fn error(status: StatusCode, body: ApiError) -> Reply {
    reply(status, &body)
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, Reply> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        error(StatusCode::BAD_REQUEST, ApiError::BadRequest { path, message: e.into_inner().to_string() })
    })
}

fn init_error(e: InitError) -> (StatusCode, ApiError) {
    let body = match e {
        InitError::Config(errors) => ApiError::InvalidConfig { errors },
        InitError::Assembly(e) => ApiError::Assembly { errors: e.diagnostics },
        InitError::Memory(e) => ApiError::Memory { message: e.to_string() },
        InitError::Unsupported { mnemonic, line } => ApiError::Unsupported { mnemonic, line },
    };
    (StatusCode::BAD_REQUEST, body)
}

/// Runs one simulate request. Budget exhaustion is reported in-band with
/// status 422 and the full response.
pub fn simulate(request: &SimulateRequest, max_cycles: u64) -> Result<(StatusCode, SimulateResponse), (StatusCode, ApiError)> {
    let bad = |path: &str, message: String| {
        (StatusCode::BAD_REQUEST, ApiError::BadRequest { path: path.into(), message })
    };
    let budget = request.max_cycles.unwrap_or(max_cycles).min(max_cycles);
    if request.tick < -1 {
        return Err(bad("tick", format!("tick must be -1 or a cycle number, got {}", request.tick)));
    }
    if request.tick > budget as i64 {
        return Err(bad("tick", format!("tick {} exceeds the cycle budget of {budget}", request.tick)));
    }
    let errors = request.config.validate(&rvss_core::isa::IsaSet::shared_default());
    if !errors.is_empty() {
        return Err((StatusCode::BAD_REQUEST, ApiError::InvalidConfig { errors }));
    }
    let program = assemble_for(&request.config, &request.program, request.entry.as_deref(), &request.memory)
        .map_err(|e| init_error(e.into()))?;
    let program = Arc::new(program);
    if request.tick >= 0 {
        let state = state_at(&request.config, program, None, request.tick as u64).map_err(init_error)?;
        return Ok((StatusCode::OK, SimulateResponse::new(state, false)));
    }
    let mut state = SimState::new(request.config.clone(), program, None).map_err(init_error)?;
    let exhausted = state.run_to_end(budget) == RunOutcome::BudgetExhausted;
    let status = if exhausted { StatusCode::UNPROCESSABLE_ENTITY } else { StatusCode::OK };
    Ok((status, SimulateResponse::new(state, exhausted)))
}

/// Assembles without simulating.
pub fn parse_asm(request: &ParseAsmRequest) -> ParseAsmResponse {
    let config = request.config.clone().unwrap_or_default();
    match assemble_for(&config, &request.program, request.entry.as_deref(), &request.memory) {
        Ok(program) => ParseAsmResponse { ok: true, errors: Vec::new(), symbol_table: program.labels },
        Err(e) => ParseAsmResponse { ok: false, errors: e.diagnostics, symbol_table: Default::default() },
    }
}

/// Schemas of every request and response plus the default configuration.
pub fn schema_document() -> serde_json::Value {
    serde_json::json!({
        "simulateRequest": schema_for!(SimulateRequest),
        "simulateResponse": schema_for!(SimulateResponse),
        "compileRequest": schema_for!(CompileRequest),
        "compileResponse": schema_for!(CompileResponse),
        "parseAsmRequest": schema_for!(ParseAsmRequest),
        "parseAsmResponse": schema_for!(ParseAsmResponse),
        "error": schema_for!(ApiError),
        "cpuConfig": schema_for!(CpuConfig),
        "defaultConfig": CpuConfig::default(),
    })
}

async fn simulate_handler(State(config): State<Arc<ServerConfig>>, body: Bytes) -> Reply {
    let request: SimulateRequest = match parse(&body) {
        Ok(r) => r,
        Err(reply) => return reply,
    };
    let max_cycles = config.max_cycles;
    let result = tokio::task::spawn_blocking(move || simulate(&request, max_cycles)).await;
    match result {
        Ok(Ok((status, response))) => reply(status, &response),
        Ok(Err((status, body))) => error(status, body),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, ApiError::Internal { message: e.to_string() }),
    }
}

async fn compile_handler(State(config): State<Arc<ServerConfig>>, body: Bytes) -> Reply {
    let request: CompileRequest = match parse(&body) {
        Ok(r) => r,
        Err(reply) => return reply,
    };
    let Some(compiler) = &config.compiler else {
        let message = "no compiler configured".to_string();
        return error(StatusCode::SERVICE_UNAVAILABLE, ApiError::CompilerUnavailable { message });
    };
    match compiler.compile(&request.c_code, request.optimization_level).await {
        Ok(response) => reply(StatusCode::OK, &response),
        Err(CompileFailure::Unavailable(message)) => {
            error(StatusCode::SERVICE_UNAVAILABLE, ApiError::CompilerUnavailable { message })
        }
        Err(CompileFailure::Timeout(limit)) => {
            error(StatusCode::GATEWAY_TIMEOUT, ApiError::CompilerTimeout { seconds: limit.as_secs() })
        }
    }
}

async fn parse_asm_handler(body: Bytes) -> Reply {
    match parse::<ParseAsmRequest>(&body) {
        Ok(request) => reply(StatusCode::OK, &parse_asm(&request)),
        Err(reply) => reply,
    }
}

async fn schema_handler() -> Reply {
    reply(StatusCode::OK, &schema_document())
}

pub fn router(config: ServerConfig) -> Router {
    let limit = config.body_limit;
    Router::new()
        .route("/api/simulate", post(simulate_handler))
        .route("/api/compile", post(compile_handler))
        .route("/api/parseAsm", post(parse_asm_handler))
        .route("/api/schema", get(schema_handler))
        .with_state(Arc::new(config))
        .layer(DefaultBodyLimit::max(limit))
        .layer(CompressionLayer::new())
        .layer(CorsLayer::permissive())
}
