use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use subgoal_core::error::BackendError;
use subgoal_core::generator::{
    parse_act_response, parse_state, CompletionRequest, GeneratorBackend, HttpBackend, HttpConfig,
};

/// Serves `reply(request_index, body)` -> (status, body) on a local port.
fn serve<F>(reply: F) -> (String, Arc<AtomicUsize>)
where
    F: Fn(usize, &str) -> (u16, String) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/complete", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let i = counter.fetch_add(1, Ordering::SeqCst);
            let (status, text) = reply(i, &String::from_utf8(body).unwrap());
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
        }
    });
    (url, hits)
}

fn fast() -> HttpConfig {
    HttpConfig {
        max_retries: 2,
        initial_backoff: Duration::from_millis(5),
        max_backoff: Duration::from_millis(20),
        max_in_flight: 2,
        timeout: Duration::from_secs(10),
    }
}

fn request(n: usize) -> CompletionRequest {
    CompletionRequest {
        prompt: "[C] [U] i need a train to cambridge".into(),
        n,
        greedy: false,
        temperature: 1.0,
        seed: 7,
        max_tokens: 32,
    }
}

#[test]
fn echoes_completions_and_sends_wire_body() {
    let (url, _) = serve(|_, body| {
        let req: serde_json::Value = serde_json::from_str(body).unwrap();
        assert_eq!(req["prompt"], "[C] [U] i need a train to cambridge");
        assert_eq!(req["seed"], 7);
        let n = req["n"].as_u64().unwrap() as usize;
        let completions: Vec<&str> = ["train destination: cambridge;", "[A] train request DAY; [R] what day?", "x"]
            .into_iter()
            .cycle()
            .take(n)
            .collect();
        (200, serde_json::json!({ "completions": completions }).to_string())
    });
    let backend = HttpBackend::new(&url, fast()).unwrap();
    let out = backend.complete(&request(3)).unwrap();
    assert_eq!(out.len(), 3);
    let (state, _) = parse_state(&out[0]);
    assert_eq!(state.get("train", "destination"), Some("cambridge"));
    assert_eq!(parse_act_response(&out[1]).response, "what day?");
}

#[test]
fn malformed_reply_is_a_schema_error() {
    let (url, hits) = serve(|_, _| (200, "{\"completions\": [".to_string()));
    let backend = HttpBackend::new(&url, fast()).unwrap();
    assert!(matches!(backend.complete(&request(1)), Err(BackendError::Schema(_))));
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn wrong_count_is_a_schema_error() {
    let (url, _) = serve(|_, _| (200, "{\"completions\": [\"a\"]}".to_string()));
    let backend = HttpBackend::new(&url, fast()).unwrap();
    assert!(matches!(backend.complete(&request(3)), Err(BackendError::Schema(_))));
}

#[test]
fn retries_server_errors_then_succeeds() {
    let (url, hits) = serve(|i, _| {
        if i < 2 {
            (503, "{}".into())
        } else {
            (200, "{\"completions\": [\"ok\"]}".into())
        }
    });
    let backend = HttpBackend::new(&url, fast()).unwrap();
    assert_eq!(backend.complete(&request(1)).unwrap(), vec!["ok".to_string()]);
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn gives_up_after_the_retry_cap() {
    let (url, hits) = serve(|_, _| (500, "{}".into()));
    let backend = HttpBackend::new(&url, fast()).unwrap();
    let err = backend.complete(&request(1)).unwrap_err();
    assert_eq!(err, BackendError::Http { status: 500, retries: 2 });
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, hits) = serve(|_, _| (400, "{}".into()));
    let backend = HttpBackend::new(&url, fast()).unwrap();
    assert!(matches!(backend.complete(&request(1)), Err(BackendError::Http { status: 400, retries: 0 })));
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn unreachable_endpoint_reports_retries() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let backend = HttpBackend::new(&format!("http://127.0.0.1:{port}/"), fast()).unwrap();
    assert!(matches!(
        backend.complete(&request(1)),
        Err(BackendError::Transport { retries: 2, .. })
    ));
}
