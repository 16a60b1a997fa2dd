//! Tiny scripted HTTP server for exercising the backend client without a
//! network. Test-only.

use serde_json::json;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

/// Answers `replies.len()` requests in order with the given (status, body)
/// pairs, counting hits and capturing request bodies. Join the handle to
/// collect the bodies.
pub fn spawn_stub(replies: Vec<(u16, String)>) -> (String, Arc<AtomicUsize>, JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let hits2 = hits.clone();
    let handle = std::thread::spawn(move || {
        let mut bodies = Vec::new();
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            hits2.fetch_add(1, Ordering::SeqCst);
            let mut reader = BufReader::new(stream);
            let mut content_len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let low = line.to_ascii_lowercase();
                if let Some(v) = low.strip_prefix("content-length:") {
                    content_len = v.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut buf = vec![0u8; content_len];
            reader.read_exact(&mut buf).unwrap();
            bodies.push(String::from_utf8(buf).unwrap());
            let mut stream = reader.into_inner();
            let reason = if status == 200 { "OK" } else { "NOPE" };
            write!(
                stream,
                "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
        bodies
    });
    (format!("http://{addr}"), hits, handle)
}

/// A chat-completions reply whose assistant message is `content`.
pub fn chat_reply(content: &str) -> String {
    json!({ "choices": [{ "message": { "role": "assistant", "content": content } }] }).to_string()
}
