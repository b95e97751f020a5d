//! Transport loops for the protocol: stdio or a local unix socket.
//!
//! Each connection is served line-by-line, in order; a malformed frame gets
//! a `MALFORMED_FRAME` response and the connection continues. Transport
//! failures close only the affected connection.

use std::io::{BufRead, BufReader, Write};
use std::os::unix::net::UnixListener;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use super::{handle_line, ServerContext};

/// Where the server listens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transport {
    Stdio,
    Unix(PathBuf),
}

impl Transport {
    /// Parse a CLI transport flag: `stdio` or `unix:<path>`.
    pub fn parse(flag: &str) -> Result<Self, String> {
        if flag == "stdio" {
            Ok(Transport::Stdio)
        } else if let Some(path) = flag.strip_prefix("unix:") {
            if path.is_empty() {
                Err("unix transport needs a socket path".into())
            } else {
                Ok(Transport::Unix(PathBuf::from(path)))
            }
        } else {
            Err(format!("unknown transport {flag:?}; use stdio or unix:<path>"))
        }
    }
}

/// Cooperative shutdown signal for socket servers.
#[derive(Clone, Default)]
pub struct ShutdownFlag(Arc<AtomicBool>);

impl ShutdownFlag {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn trigger(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_triggered(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

/// Serve one framed byte stream until EOF. Responses are written in request
/// order, one per line.
pub fn serve_connection(
    reader: impl BufRead,
    mut writer: impl Write,
    ctx: &ServerContext,
) -> std::io::Result<()> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = handle_line(&line, ctx);
        writer.write_all(response.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}

/// Serve a single session over stdin/stdout; returns at EOF.
pub fn serve_stdio(ctx: &ServerContext) -> std::io::Result<()> {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    serve_connection(stdin.lock(), stdout.lock(), ctx)
}

/// Serve concurrent connections on a unix socket until the shutdown flag
/// trips. An optional reclaim interval sweeps expired leases between
/// accepts.
pub fn serve_unix(
    path: &PathBuf,
    ctx: &ServerContext,
    shutdown: &ShutdownFlag,
    reclaim_interval: Option<Duration>,
) -> std::io::Result<()> {
    if path.exists() {
        std::fs::remove_file(path)?;
    }
    let listener = UnixListener::bind(path)?;
    listener.set_nonblocking(true)?;
    let mut workers = Vec::new();
    let mut last_reclaim = std::time::Instant::now();
    while !shutdown.is_triggered() {
        match listener.accept() {
            Ok((stream, _addr)) => {
                stream.set_nonblocking(false)?;
                let ctx = ctx.clone();
                workers.push(thread::spawn(move || {
                    let reader = BufReader::new(stream.try_clone().expect("clone unix stream"));
                    // a failed connection only affects itself
                    let _ = serve_connection(reader, stream, &ctx);
                }));
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                if let Some(interval) = reclaim_interval {
                    if last_reclaim.elapsed() >= interval {
                        ctx.store.reclaim_expired(ctx.clock.now_ms());
                        last_reclaim = std::time::Instant::now();
                    }
                }
                thread::sleep(Duration::from_millis(20));
            }
            Err(e) => return Err(e),
        }
    }
    for worker in workers {
        let _ = worker.join();
    }
    let _ = std::fs::remove_file(path);
    Ok(())
}
