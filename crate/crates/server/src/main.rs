use rvss_server::{router, ServerConfig};

#[tokio::main]
async fn main() {
    let config = match ServerConfig::from_env() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("rvss-server: {e}");
            std::process::exit(1);
        }
    };
    let addr = std::env::var("RVSS_ADDR").unwrap_or_else(|_| "127.0.0.1:8080".into());
    let listener = match tokio::net::TcpListener::bind(&addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("rvss-server: cannot listen on {addr}: {e}");
            std::process::exit(1);
        }
    };
    eprintln!("rvss-server listening on http://{addr}");
    if let Err(e) = axum::serve(listener, router(config)).await {
        eprintln!("rvss-server: {e}");
        std::process::exit(1);
    }
}
