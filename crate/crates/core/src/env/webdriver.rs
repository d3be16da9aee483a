//! W3C WebDriver client backend.

use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use ureq::Agent;

use super::{ConsoleEntry, ConsoleLevel, Environment, Observation};
use crate::actions::{Action, ActionClass, Geometry, Payload};
use crate::dom::parse_document;
use crate::error::EnvError;
use crate::geom::BBox;

const ELEMENT_KEY: &str = "element-6066-11e4-a52e-4f735466cecf";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WebDriverConfig {
    /// Driver endpoint, e.g. `http://127.0.0.1:4444`.
    pub driver_url: String,
    pub start_url: String,
    /// `alwaysMatch` capabilities for the new session.
    pub capabilities: Value,
    pub settle_ms: u64,
    /// Script executed after every reset navigation (login and similar).
    pub login_script: Option<String>,
    pub request_timeout_ms: u64,
}

impl Default for WebDriverConfig {
    fn default() -> Self {
        Self {
            driver_url: "http://127.0.0.1:4444".into(),
            start_url: String::new(),
            capabilities: json!({}),
            settle_ms: 2000,
            login_script: None,
            request_timeout_ms: 30_000,
        }
    }
}

/// Collects page geometry in one round trip. Locators follow the same
/// tag-index scheme as [`crate::dom::DomTree::elements`].
const GEOMETRY_SCRIPT: &str = r#"
const out = {};
const sx = window.scrollX, sy = window.scrollY;
function walk(el, path) {
  const seen = {};
  for (const c of el.children) {
    const tag = c.tagName.toLowerCase();
    seen[tag] = (seen[tag] || 0) + 1;
    const loc = path + '/' + tag + '[' + seen[tag] + ']';
    const r = c.getBoundingClientRect();
    if (r.width > 0 && r.height > 0) out[loc] = [r.left + sx, r.top + sy, r.width, r.height];
    walk(c, loc);
  }
}
walk(document, '');
const d = document.documentElement;
return {boxes: out, w: Math.max(d.scrollWidth, d.clientWidth), h: Math.max(d.scrollHeight, d.clientHeight)};
"#;

/// Mirrors console errors into an in-page sink; returns and clears it.
const CONSOLE_SINK_SCRIPT: &str = r#"
if (!window.__gwSink) {
  window.__gwSink = [];
  const orig = console.error.bind(console);
  console.error = function(...a) { window.__gwSink.push({message: a.map(String).join(' '), source: location.href}); orig(...a); };
  window.addEventListener('error', e => window.__gwSink.push({message: 'Uncaught ' + e.message, source: e.filename || location.href}));
}
const s = window.__gwSink.splice(0);
return s;
"#;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Support {
    Unknown,
    Yes,
    No,
}

/// One browser session driven over the WebDriver wire protocol.
pub struct WebDriverEnv {
    agent: Agent,
    config: WebDriverConfig,
    session: String,
    script: Support,
    log_endpoint: Support,
}

fn transport(e: ureq::Error) -> EnvError {
    EnvError::Disconnected(e.to_string())
}

impl WebDriverEnv {
    pub fn connect(config: WebDriverConfig) -> Result<Self, EnvError> {
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_millis(config.request_timeout_ms)))
            .build()
            .into();
        let mut env = Self { agent, config, session: String::new(), script: Support::Unknown, log_endpoint: Support::Unknown };
        let caps = json!({"capabilities": {"alwaysMatch": env.config.capabilities}});
        let value = env.raw("POST", "/session", Some(caps))?;
        env.session = value
            .get("sessionId")
            .and_then(Value::as_str)
            .ok_or_else(|| EnvError::Protocol(format!("no sessionId in {value}")))?
            .to_string();
        Ok(env)
    }

    pub fn session_id(&self) -> &str {
        &self.session
    }

    fn raw(&self, method: &str, path: &str, body: Option<Value>) -> Result<Value, EnvError> {
        let url = format!("{}{}", self.config.driver_url.trim_end_matches('/'), path);
        debug!("webdriver {method} {url}");
        let response = match method {
            "GET" => self.agent.get(&url).call(),
            "DELETE" => self.agent.delete(&url).call(),
            _ => self.agent.post(&url).send_json(body.unwrap_or_else(|| json!({}))),
        }
        .map_err(transport)?;
        let status = response.status().as_u16();
        let payload: Value = response.into_body().read_json().map_err(|e| EnvError::Protocol(e.to_string()))?;
        let value = payload.get("value").cloned().unwrap_or(Value::Null);
        if status >= 400 {
            let kind = value.get("error").and_then(Value::as_str).unwrap_or("unknown error");
            let message = value.get("message").and_then(Value::as_str).unwrap_or("");
            return Err(match kind {
                "no such element" | "stale element reference" => EnvError::StaleLocator(message.to_string()),
                "invalid session id" => EnvError::Disconnected(message.to_string()),
                _ => EnvError::Protocol(format!("{kind}: {message}")),
            });
        }
        Ok(value)
    }

    fn session_call(&self, method: &str, path: &str, body: Option<Value>) -> Result<Value, EnvError> {
        self.raw(method, &format!("/session/{}{path}", self.session), body)
    }

    fn find(&self, xpath: &str) -> Result<String, EnvError> {
        let v = self.session_call("POST", "/element", Some(json!({"using": "xpath", "value": xpath})))?;
        v.get(ELEMENT_KEY)
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| EnvError::Protocol(format!("bad element reference {v}")))
    }

    fn execute(&mut self, script: &str, args: Value) -> Result<Option<Value>, EnvError> {
        if self.script == Support::No {
            return Ok(None);
        }
        match self.session_call("POST", "/execute/sync", Some(json!({"script": script, "args": args}))) {
            Ok(v) => {
                self.script = Support::Yes;
                Ok(Some(v))
            }
            Err(EnvError::Protocol(msg)) if self.script == Support::Unknown => {
                warn!("script execution unavailable, using per-element queries: {msg}");
                self.script = Support::No;
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    fn geometry(&mut self, html: &str) -> Result<(Geometry, (f64, f64)), EnvError> {
        if let Some(v) = self.execute(GEOMETRY_SCRIPT, json!([]))? {
            let mut geo = Geometry::new();
            if let Some(boxes) = v.get("boxes").and_then(Value::as_object) {
                for (loc, b) in boxes {
                    let n: Vec<f64> = b.as_array().into_iter().flatten().filter_map(Value::as_f64).collect();
                    if n.len() == 4 {
                        geo.insert(loc.clone(), BBox::new(n[0], n[1], n[2], n[3]));
                    }
                }
            }
            let w = v.get("w").and_then(Value::as_f64).unwrap_or(0.0);
            let h = v.get("h").and_then(Value::as_f64).unwrap_or(0.0);
            return Ok((geo, (w, h)));
        }
        let tree = parse_document(html);
        let mut geo = Geometry::new();
        let (mut w, mut h) = (0.0f64, 0.0f64);
        for el in tree.elements() {
            let id = match self.find(&el.locator) {
                Ok(id) => id,
                Err(EnvError::StaleLocator(_)) => continue,
                Err(e) => return Err(e),
            };
            let r = self.session_call("GET", &format!("/element/{id}/rect"), None)?;
            let f = |k: &str| r.get(k).and_then(Value::as_f64).unwrap_or(0.0);
            let b = BBox::new(f("x"), f("y"), f("width"), f("height"));
            if b.has_area() {
                w = w.max(b.x + b.w);
                h = h.max(b.y + b.h);
                geo.insert(el.locator.clone(), b);
            }
        }
        Ok((geo, (w.max(1.0), h.max(1.0))))
    }

    fn console(&mut self) -> Result<Vec<ConsoleEntry>, EnvError> {
        if self.log_endpoint != Support::No {
            match self.session_call("GET", "/log", None) {
                Ok(v) => {
                    self.log_endpoint = Support::Yes;
                    return Ok(v.as_array().into_iter().flatten().filter_map(log_entry).collect());
                }
                Err(e @ EnvError::Disconnected(_)) => return Err(e),
                Err(_) if self.log_endpoint == Support::Unknown => self.log_endpoint = Support::No,
                Err(e) => return Err(e),
            }
        }
        let Some(v) = self.execute(CONSOLE_SINK_SCRIPT, json!([]))? else { return Ok(Vec::new()) };
        Ok(v.as_array()
            .into_iter()
            .flatten()
            .map(|e| ConsoleEntry {
                level: ConsoleLevel::Error,
                message: e.get("message").and_then(Value::as_str).unwrap_or("").to_string(),
                source_url: e.get("source").and_then(Value::as_str).unwrap_or("").to_string(),
            })
            .collect())
    }

    fn snapshot(&mut self) -> Result<Observation, EnvError> {
        let html = self.session_call("GET", "/source", None)?.as_str().unwrap_or("").to_string();
        let nav_url = self.session_call("GET", "/url", None)?.as_str().unwrap_or("").to_string();
        let (geometry, page_size) = self.geometry(&html)?;
        let console = self.console()?;
        Ok(Observation { html, geometry, page_size, console, nav_url })
    }

    fn settle(&self) {
        if self.config.settle_ms > 0 {
            std::thread::sleep(Duration::from_millis(self.config.settle_ms));
        }
    }

    fn type_into(&self, element: &str, text: &str) -> Result<(), EnvError> {
        self.session_call("POST", &format!("/element/{element}/clear"), None)?;
        self.session_call("POST", &format!("/element/{element}/value"), Some(json!({"text": text})))?;
        Ok(())
    }

    fn choose(&self, select_locator: &str, value: &str) -> Result<(), EnvError> {
        let option = self.find(&format!("{select_locator}/option[@value={}]", xpath_literal(value)))?;
        self.session_call("POST", &format!("/element/{option}/click"), None)?;
        Ok(())
    }

    fn double_click(&self, element: &str) -> Result<(), EnvError> {
        let origin = json!({ ELEMENT_KEY: element });
        let actions = json!({"actions": [{
            "type": "pointer", "id": "mouse", "parameters": {"pointerType": "mouse"},
            "actions": [
                {"type": "pointerMove", "duration": 0, "origin": origin, "x": 0, "y": 0},
                {"type": "pointerDown", "button": 0}, {"type": "pointerUp", "button": 0},
                {"type": "pointerDown", "button": 0}, {"type": "pointerUp", "button": 0}
            ]
        }]});
        self.session_call("POST", "/actions", Some(actions))?;
        self.session_call("DELETE", "/actions", None)?;
        Ok(())
    }

    fn fill_form(&mut self, action: &Action, element: &str) -> Result<(), EnvError> {
        if let Some(Payload::Form(fields)) = &action.payload {
            for (loc, value) in fields {
                let is_select = loc.rsplit('/').next().is_some_and(|s| s.starts_with("select["));
                if is_select {
                    self.choose(loc, value)?;
                } else {
                    let id = self.find(loc)?;
                    self.type_into(&id, value)?;
                }
            }
        }
        let submit = format!(
            "{}//*[self::button[not(@type) or @type='submit'] or self::input[@type='submit' or @type='image']]",
            action.locator
        );
        match self.find(&submit) {
            Ok(id) => {
                self.session_call("POST", &format!("/element/{id}/click"), None)?;
            }
            Err(EnvError::StaleLocator(_)) => {
                self.execute("arguments[0].requestSubmit ? arguments[0].requestSubmit() : arguments[0].submit();", json!([{ ELEMENT_KEY: element }]))?;
            }
            Err(e) => return Err(e),
        }
        Ok(())
    }
}

fn log_entry(v: &Value) -> Option<ConsoleEntry> {
    let message = v.get("message")?.as_str()?.to_string();
    let level = match v.get("level").and_then(Value::as_str).unwrap_or("SEVERE") {
        "SEVERE" | "ERROR" | "error" => ConsoleLevel::Error,
        "WARNING" | "warning" => ConsoleLevel::Warning,
        _ => ConsoleLevel::Info,
    };
    let source_url = v.get("source").and_then(Value::as_str).unwrap_or("").to_string();
    Some(ConsoleEntry { level, message, source_url })
}

/// Quotes `s` as an XPath 1.0 string literal.
fn xpath_literal(s: &str) -> String {
    if !s.contains('\'') {
        format!("'{s}'")
    } else if !s.contains('"') {
        format!("\"{s}\"")
    } else {
        let parts: Vec<String> = s.split('\'').map(|p| format!("'{p}'")).collect();
        format!("concat({})", parts.join(", \"'\", "))
    }
}

impl Environment for WebDriverEnv {
    fn reset(&mut self) -> Result<Observation, EnvError> {
        let start = self.config.start_url.clone();
        self.session_call("POST", "/url", Some(json!({"url": start})))
            .map_err(|e| EnvError::Navigation(e.to_string()))?;
        if let Some(script) = self.config.login_script.clone() {
            self.execute(&script, json!([]))?;
        }
        self.settle();
        self.snapshot()
    }

    fn step(&mut self, action: &Action) -> Result<Observation, EnvError> {
        let element = self.find(&action.locator)?;
        match action.class {
            ActionClass::Click => {
                self.session_call("POST", &format!("/element/{element}/click"), None)?;
            }
            ActionClass::Dbclick => self.double_click(&element)?,
            ActionClass::Input => {
                let text = match &action.payload {
                    Some(Payload::Text(t)) => t.clone(),
                    _ => String::new(),
                };
                self.type_into(&element, &text)?;
            }
            ActionClass::Select => {
                if let Some(Payload::Choice(v)) = &action.payload {
                    self.choose(&action.locator, v)?;
                }
            }
            ActionClass::FormFill => self.fill_form(action, &element)?,
        }
        self.settle();
        self.snapshot()
    }
}

impl Drop for WebDriverEnv {
    fn drop(&mut self) {
        if !self.session.is_empty() {
            let _ = self.raw("DELETE", &format!("/session/{}", self.session), None);
        }
    }
}
