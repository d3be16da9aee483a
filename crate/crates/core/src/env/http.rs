use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use log::debug;
use tiny_http::{Header, Response, Server};

use super::fixture::{target_state, SimApp};
use crate::error::{Error, Result};

/// Serves a [`SimApp`]'s pages at `/s/{state}` (and the start page at `/`)
/// on a loopback port until dropped.
pub struct FixtureServer {
    addr: String,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl FixtureServer {
    pub fn start(app: Arc<SimApp>) -> Result<Self> {
        let server = Server::http("127.0.0.1:0").map_err(|e| Error::Config(format!("fixture server: {e}")))?;
        let addr = format!("http://{}", server.server_addr().to_ip().expect("tcp listener"));
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let handle = std::thread::spawn(move || {
            while !flag.load(Ordering::Relaxed) {
                let request = match server.recv_timeout(Duration::from_millis(50)) {
                    Ok(Some(r)) => r,
                    Ok(None) => continue,
                    Err(_) => break,
                };
                let path = request.url().split(['?', '#']).next().unwrap_or("/").to_string();
                let id = if path == "/" { Some(app.start) } else { path.strip_prefix("/s/").and(target_state(&path)) };
                debug!("fixture GET {path}");
                let response = match id.and_then(|i| app.pages.get(i)) {
                    Some(page) => Response::from_string(page.html.clone()).with_header(
                        Header::from_bytes(&b"Content-Type"[..], &b"text/html; charset=utf-8"[..]).expect("header"),
                    ),
                    None => Response::from_string("not found").with_status_code(404),
                };
                let _ = request.respond(response);
            }
        });
        Ok(Self { addr, stop, handle: Some(handle) })
    }

    /// Base URL, e.g. `http://127.0.0.1:41234`.
    pub fn base_url(&self) -> &str {
        &self.addr
    }

    pub fn start_url(&self) -> String {
        format!("{}/", self.addr)
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}
