#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

pub fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[derive(Clone)]
pub enum Reply {
    /// 200 with `{"content": ...}`.
    Content(String),
    Status(u16, String),
    /// Sleeps, then answers with the content.
    Slow(Duration, String),
}

/// Minimal HTTP server answering every POST from a fixed reply; request
/// bodies are kept for inspection.
pub struct MockChat {
    pub url: String,
    pub bodies: Arc<Mutex<Vec<serde_json::Value>>>,
    pub headers: Arc<Mutex<Vec<String>>>,
}

impl MockChat {
    pub fn start(reply: Reply) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/chat", listener.local_addr().unwrap());
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let headers = Arc::new(Mutex::new(Vec::new()));
        let (b, h) = (Arc::clone(&bodies), Arc::clone(&headers));
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let (b, h, reply) = (Arc::clone(&b), Arc::clone(&h), reply.clone());
                thread::spawn(move || serve(stream, &reply, &b, &h));
            }
        });
        Self { url, bodies, headers }
    }

    pub fn requests(&self) -> Vec<serde_json::Value> {
        self.bodies.lock().unwrap().clone()
    }
}

fn serve(stream: TcpStream, reply: &Reply, bodies: &Mutex<Vec<serde_json::Value>>, headers: &Mutex<Vec<String>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut len = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let t = line.trim_end();
        if t.is_empty() {
            break;
        }
        if let Some((k, v)) = t.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().unwrap_or(0);
            }
        }
        headers.lock().unwrap().push(t.to_string());
    }
    let mut body = vec![0; len];
    if reader.read_exact(&mut body).is_err() {
        return;
    }
    if let Ok(v) = serde_json::from_slice(&body) {
        bodies.lock().unwrap().push(v);
    }
    let (code, text) = match reply {
        Reply::Content(c) => (200, serde_json::json!({ "content": c }).to_string()),
        Reply::Status(code, text) => (*code, text.clone()),
        Reply::Slow(d, c) => {
            thread::sleep(*d);
            (200, serde_json::json!({ "content": c }).to_string())
        }
    };
    let mut out = stream;
    let _ = write!(
        out,
        "HTTP/1.1 {code} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
        text.len()
    );
}
