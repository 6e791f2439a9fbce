//! Minimal static file server for a bundle directory, bound to loopback by
//! default so VOSviewer Online can fetch the network files from the browser.

use std::fs;
use std::io;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;
use std::thread;

use percent_encoding::percent_decode_str;
use thiserror::Error;
use tiny_http::{Header, Method, Request, Response};

use dimnet_core::vosexport::{INDEX_FILE, MANIFEST_FILE};

const WORKERS: usize = 4;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("{} is not a bundle directory (no {MANIFEST_FILE})", path.display())]
    NotABundle { path: PathBuf },
    #[error("cannot resolve {}: {source}", path.display())]
    Root {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot listen on {addr}: {message}")]
    Bind { addr: String, message: String },
}

pub fn content_type(path: &Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("html" | "htm") => "text/html; charset=utf-8",
        Some("json") => "application/json",
        Some("js") => "text/javascript; charset=utf-8",
        Some("css") => "text/css; charset=utf-8",
        Some("txt") => "text/plain; charset=utf-8",
        _ => "application/octet-stream",
    }
}

/// Maps a request target to a file under `root` (which must already be
/// canonical). Returns `None` for anything that is missing, not a regular
/// file, contains a `..` segment, or resolves outside `root` through a
/// symlink.
pub fn resolve_path(root: &Path, target: &str) -> Option<PathBuf> {
    let raw = target.split(['?', '#']).next().unwrap_or("");
    let decoded = percent_decode_str(raw).decode_utf8().ok()?;
    if !decoded.starts_with('/') || decoded.contains('\0') || decoded.contains('\\') {
        return None;
    }
    let mut rel = PathBuf::new();
    for segment in decoded.split('/') {
        match segment {
            "" | "." => {}
            ".." => return None,
            s => {
                // a segment such as "C:" must not turn into a prefix or root
                let mut parts = Path::new(s).components();
                match (parts.next(), parts.next()) {
                    (Some(Component::Normal(_)), None) => rel.push(s),
                    _ => return None,
                }
            }
        }
    }
    let mut candidate = root.join(rel);
    if candidate.is_dir() {
        candidate.push(INDEX_FILE);
    }
    let canonical = candidate.canonicalize().ok()?;
    (canonical.starts_with(root) && canonical.is_file()).then_some(canonical)
}

pub struct StaticServer {
    root: PathBuf,
    server: Arc<tiny_http::Server>,
}

impl StaticServer {
    pub fn bind(
        dir: &Path,
        addr: impl ToSocketAddrs + std::fmt::Debug,
    ) -> Result<StaticServer, ServeError> {
        if !dir.join(MANIFEST_FILE).is_file() {
            return Err(ServeError::NotABundle {
                path: dir.to_path_buf(),
            });
        }
        let root = dir.canonicalize().map_err(|source| ServeError::Root {
            path: dir.to_path_buf(),
            source,
        })?;
        let addr_text = format!("{addr:?}");
        let server = tiny_http::Server::http(addr).map_err(|e| ServeError::Bind {
            addr: addr_text,
            message: e.to_string(),
        })?;
        Ok(StaticServer {
            root,
            server: Arc::new(server),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.server
            .server_addr()
            .to_ip()
            .expect("server is bound to an IP socket")
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Serves requests on a small pool of worker threads; blocks for the
    /// life of the server.
    pub fn run(&self) {
        thread::scope(|scope| {
            for _ in 0..WORKERS {
                scope.spawn(|| {
                    for request in self.server.incoming_requests() {
                        self.handle(request);
                    }
                });
            }
        });
    }

    /// Serves on background threads; the returned handle stops the server
    /// when dropped.
    pub fn spawn(self) -> ServerHandle {
        let addr = self.local_addr();
        let shared = Arc::new(self);
        let worker = Arc::clone(&shared);
        let thread = thread::spawn(move || worker.run());
        ServerHandle {
            addr,
            server: shared,
            thread: Some(thread),
        }
    }

    fn unblock(&self) {
        for _ in 0..WORKERS {
            self.server.unblock();
        }
    }

    fn handle(&self, request: Request) {
        let method = request.method().clone();
        let url = request.url().to_string();
        let result = match method {
            Method::Get | Method::Head => match resolve_path(&self.root, &url)
                .and_then(|p| fs::read(&p).ok().map(|b| (p, b)))
            {
                Some((path, body)) => {
                    let len = body.len();
                    let response = Response::from_data(body)
                        .with_header(header("Content-Type", content_type(&path)))
                        .with_header(header("Access-Control-Allow-Origin", "*"));
                    (200, len, request.respond(response))
                }
                None => text_response(request, 404, "not found\n"),
            },
            _ => text_response(request, 405, "method not allowed\n"),
        };
        let (status, bytes, sent) = result;
        match sent {
            Ok(()) => log::info!("{method} {url} {status} {bytes}"),
            Err(e) => log::warn!("{method} {url} {status} failed: {e}"),
        }
    }
}

pub struct ServerHandle {
    addr: SocketAddr,
    server: Arc<StaticServer>,
    thread: Option<thread::JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn header(name: &str, value: &str) -> Header {
    Header::from_bytes(name.as_bytes(), value.as_bytes()).expect("static header is valid")
}

fn text_response(request: Request, status: u16, body: &str) -> (u16, usize, io::Result<()>) {
    let response = Response::from_string(body)
        .with_status_code(status)
        .with_header(header("Content-Type", "text/plain; charset=utf-8"));
    (status, body.len(), request.respond(response))
}
