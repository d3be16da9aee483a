//! A minimal WebDriver endpoint that "browses" real HTTP pages: it fetches
//! documents, lays them out with the crate's box model, follows `href`,
//! `onclick` and `ondblclick` navigations, and reports `console.error` calls
//! found in page scripts through the `/log` extension. Script execution is
//! not implemented, so the adapter's per-element fallback paths get used.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use gridwalk::dom::{parse_document, DomTree, Node};
use gridwalk::env::layout;
use regex::Regex;
use serde_json::{json, Value};
use tiny_http::{Header, Method, Response, Server};

const ELEMENT_KEY: &str = "element-6066-11e4-a52e-4f735466cecf";

#[derive(Default)]
struct Browser {
    url: String,
    html: String,
    log: Vec<Value>,
    elements: Vec<String>,
    sessions: usize,
}

impl Browser {
    fn tree(&self) -> DomTree {
        parse_document(&self.html)
    }

    fn navigate(&mut self, target: &str) -> Result<(), String> {
        let url = resolve(&self.url, target);
        let body = ureq::get(&url)
            .call()
            .map_err(|e| e.to_string())?
            .into_body()
            .read_to_string()
            .map_err(|e| e.to_string())?;
        self.url = url;
        self.html = body;
        self.elements.clear();
        let console = Regex::new(r#"console\.error\(("(?:[^"\\]|\\.)*")\)"#).unwrap();
        let tree = self.tree();
        for el in tree.elements().into_iter().filter(|e| e.node.tag == "script") {
            for c in console.captures_iter(&el.node.text) {
                let message: String = serde_json::from_str(&c[1]).unwrap();
                self.log.push(json!({"level": "SEVERE", "message": message, "source": self.url}));
            }
        }
        Ok(())
    }

    fn element_id(&mut self, locator: &str) -> String {
        self.elements.push(locator.to_string());
        format!("el-{}", self.elements.len() - 1)
    }

    fn locator(&self, id: &str) -> Option<String> {
        let i: usize = id.strip_prefix("el-")?.parse().ok()?;
        self.elements.get(i).cloned()
    }
}

fn resolve(base: &str, target: &str) -> String {
    if target.starts_with("http://") || target.starts_with("https://") {
        return target.to_string();
    }
    let origin_end = base.find("://").map(|i| i + 3).and_then(|s| base[s..].find('/').map(|j| s + j)).unwrap_or(base.len());
    format!("{}{}", &base[..origin_end], target)
}

fn script_location(script: Option<&str>) -> Option<String> {
    let re = Regex::new(r#"location(?:\.href)?\s*=\s*['"]([^'"]+)['"]"#).unwrap();
    re.captures(script?).map(|c| c[1].to_string())
}

/// Navigation triggered by clicking the element at `locator`, bubbling up.
fn click_navigation(tree: &DomTree, locator: &str) -> Option<String> {
    let el = tree.resolve(locator)?;
    let chain: Vec<&Node> = std::iter::once(el.node).chain(el.ancestors.iter().rev().copied()).collect();
    chain.iter().find_map(|n| {
        script_location(n.get_attr("onclick"))
            .or_else(|| (n.tag == "a").then(|| n.get_attr("href").map(str::to_string)).flatten())
    })
}

fn dblclick_navigation(tree: &DomTree, locator: &str) -> Option<String> {
    let el = tree.resolve(locator)?;
    std::iter::once(el.node).chain(el.ancestors.iter().rev().copied()).find_map(|n| script_location(n.get_attr("ondblclick")))
}

fn ok(value: Value) -> (u16, Value) {
    (200, json!({ "value": value }))
}

fn err(status: u16, kind: &str, message: &str) -> (u16, Value) {
    (status, json!({"value": {"error": kind, "message": message}}))
}

fn handle(browser: &Mutex<Browser>, method: &Method, path: &str, body: &Value) -> (u16, Value) {
    let mut b = browser.lock().unwrap();
    let parts: Vec<&str> = path.trim_matches('/').split('/').collect();
    match (method, parts.as_slice()) {
        (Method::Post, ["session"]) => {
            b.sessions += 1;
            ok(json!({"sessionId": format!("mock-{}", b.sessions), "capabilities": {}}))
        }
        (Method::Delete, ["session", _]) => ok(Value::Null),
        (Method::Post, ["session", _, "url"]) => {
            let url = body["url"].as_str().unwrap_or("").to_string();
            b.url = String::new();
            match b.navigate(&url) {
                Ok(()) => ok(Value::Null),
                Err(e) => err(500, "unknown error", &e),
            }
        }
        (Method::Get, ["session", _, "url"]) => ok(json!(b.url)),
        (Method::Get, ["session", _, "source"]) => ok(json!(b.html)),
        (Method::Get, ["session", _, "log"]) => ok(Value::Array(std::mem::take(&mut b.log))),
        (Method::Post, ["session", _, "element"]) => {
            let xpath = body["value"].as_str().unwrap_or("");
            if b.tree().find(xpath).is_some() {
                let id = b.element_id(xpath);
                ok(json!({ ELEMENT_KEY: id }))
            } else {
                err(404, "no such element", xpath)
            }
        }
        (Method::Get, ["session", _, "element", id, "rect"]) => {
            let Some(loc) = b.locator(id) else { return err(404, "stale element reference", id) };
            let (geometry, _) = layout(&b.tree());
            let r = geometry.get(&loc).copied();
            ok(r.map_or(json!({"x": 0, "y": 0, "width": 0, "height": 0}), |r| {
                json!({"x": r.x, "y": r.y, "width": r.w, "height": r.h})
            }))
        }
        (Method::Post, ["session", _, "element", id, "click"]) => {
            let Some(loc) = b.locator(id) else { return err(404, "stale element reference", id) };
            match click_navigation(&b.tree(), &loc) {
                Some(target) => match b.navigate(&target) {
                    Ok(()) => ok(Value::Null),
                    Err(e) => err(500, "unknown error", &e),
                },
                None => ok(Value::Null),
            }
        }
        (Method::Post, ["session", _, "element", _, "clear" | "value"]) => ok(Value::Null),
        (Method::Post, ["session", _, "actions"]) => {
            let actions = &body["actions"][0]["actions"];
            let origin = actions[0]["origin"][ELEMENT_KEY].as_str().unwrap_or("");
            let downs = actions.as_array().map_or(0, |a| a.iter().filter(|x| x["type"] == "pointerDown").count());
            let Some(loc) = b.locator(origin) else { return err(404, "stale element reference", origin) };
            let tree = b.tree();
            let target = click_navigation(&tree, &loc).or_else(|| (downs >= 2).then(|| dblclick_navigation(&tree, &loc)).flatten());
            match target {
                Some(t) => match b.navigate(&t) {
                    Ok(()) => ok(Value::Null),
                    Err(e) => err(500, "unknown error", &e),
                },
                None => ok(Value::Null),
            }
        }
        (Method::Delete, ["session", _, "actions"]) => ok(Value::Null),
        _ => err(404, "unknown command", path),
    }
}

pub struct MockWebDriver {
    url: String,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl MockWebDriver {
    pub fn start() -> Self {
        let server = Server::http("127.0.0.1:0").unwrap();
        let url = format!("http://{}", server.server_addr().to_ip().unwrap());
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let browser = Mutex::new(Browser::default());
        let handle = std::thread::spawn(move || {
            while !flag.load(Ordering::Relaxed) {
                let mut request = match server.recv_timeout(Duration::from_millis(50)) {
                    Ok(Some(r)) => r,
                    Ok(None) => continue,
                    Err(_) => break,
                };
                let mut text = String::new();
                let _ = request.as_reader().read_to_string(&mut text);
                let body: Value = serde_json::from_str(&text).unwrap_or(Value::Null);
                let (status, payload) = handle(&browser, request.method(), request.url(), &body);
                let response = Response::from_string(payload.to_string())
                    .with_status_code(status)
                    .with_header(Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..]).unwrap());
                let _ = request.respond(response);
            }
        });
        Self { url, stop, handle: Some(handle) }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl Drop for MockWebDriver {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}
