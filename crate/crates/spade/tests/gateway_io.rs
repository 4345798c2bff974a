//! Gateway IO end to end: the HTTP transport against a local stub provider,
//! the record→replay cache round trip, and the on-disk cache entry format.

mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Duration;

use spade::gateway::{
    boolean_request, Gateway, GatewayError, HttpTransport, LlmRequest, Mode, RequestKind,
};

/// What the stub saw in one provider request.
struct StubRequest {
    authorization: String,
    body: serde_json::Value,
}

/// Spawns a minimal chat-completions stub on a loopback port and returns its
/// endpoint URL. The handler maps each request to (status, reply content);
/// the thread serves until the test process exits.
fn spawn_stub<F>(handler: F) -> String
where
    F: Fn(StubRequest) -> (u16, String) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").expect("loopback bind");
    let endpoint = format!(
        "http://{}/v1/chat/completions",
        listener.local_addr().unwrap()
    );
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let request = read_request(&mut stream);
            let (status, content) = handler(request);
            write_response(&mut stream, status, &content);
        }
    });
    endpoint
}

fn read_request(stream: &mut TcpStream) -> StubRequest {
    let mut reader = BufReader::new(stream.try_clone().expect("stream clones"));
    let mut request_line = String::new();
    reader.read_line(&mut request_line).expect("request line");
    let mut content_length = 0usize;
    let mut authorization = String::new();
    loop {
        let mut header = String::new();
        reader.read_line(&mut header).expect("header line");
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        if let Some((name, value)) = header.split_once(':') {
            match name.to_ascii_lowercase().as_str() {
                "content-length" => content_length = value.trim().parse().expect("length"),
                "authorization" => authorization = value.trim().to_string(),
                _ => {}
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body).expect("body");
    StubRequest {
        authorization,
        body: serde_json::from_slice(&body).expect("JSON body"),
    }
}

fn write_response(stream: &mut TcpStream, status: u16, content: &str) {
    let (reason, body) = if status == 200 {
        let payload = serde_json::json!({
            "id": "stub",
            "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}],
        });
        ("OK", payload.to_string())
    } else {
        ("Internal Server Error", String::new())
    };
    let response = format!(
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\n\
         Content-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(response.as_bytes()).expect("response written");
    stream.flush().expect("response flushed");
}

/// The transport must send the bearer token, the model, the temperature, and
/// the system/user messages, and surface choices[0].message.content.
#[test]
fn http_transport_speaks_the_chat_completions_protocol() {
    let endpoint = spawn_stub(|req| {
        let messages = req.body["messages"].as_array().unwrap();
        let roles: Vec<&str> = messages
            .iter()
            .map(|m| m["role"].as_str().unwrap())
            .collect();
        let reply = format!(
            "auth={}; model={}; temperature={}; roles={}; last={}",
            req.authorization,
            req.body["model"].as_str().unwrap(),
            req.body["temperature"],
            roles.join("+"),
            messages.last().unwrap()["content"].as_str().unwrap(),
        );
        (200, reply)
    });
    let gateway = Gateway::new(Mode::Live, "/unused", Box::new(HttpTransport))
        .with_endpoint(endpoint)
        .with_model("stub-model")
        .with_api_key("k7");

    let reply = gateway
        .complete(&boolean_request("the prompt", "the response", "Is it concise?"))
        .unwrap();

    assert_eq!(
        reply.text,
        "auth=Bearer k7; model=stub-model; temperature=0.0; roles=system+user; \
         last=Prompt given to the pipeline:\n\nthe prompt\n\nResponse from the pipeline:\n\n\
         the response\n\nQuestion: Is it concise?\n\nAnswer exactly \"yes\" or \"no\"."
    );
    assert!(!reply.cached);
}

#[test]
fn record_then_replay_round_trips_through_the_cache() {
    let endpoint = spawn_stub(|_| (200, "Yes.".to_string()));
    let tmp = tempfile::tempdir().unwrap();

    let recorder = Gateway::new(Mode::Record, tmp.path(), Box::new(HttpTransport))
        .with_endpoint(endpoint)
        .with_api_key("k");
    let request = boolean_request("p", "r", "Is it concise?");
    let recorded = recorder.complete(&request).unwrap();
    assert_eq!(recorded.text, "Yes.");
    assert!(!recorded.cached);

    // Exactly one entry, named by the request's 64-hex-digit content key,
    // holding pretty JSON with the request (for audit) and the response.
    let entries: Vec<_> = std::fs::read_dir(tmp.path()).unwrap().collect();
    assert_eq!(entries.len(), 1);
    let name = entries[0].as_ref().unwrap().file_name();
    let name = name.to_str().unwrap();
    assert_eq!(name, Gateway::request_key(&request));
    assert_eq!(name.len(), 64);
    assert!(name.chars().all(|c| c.is_ascii_hexdigit()));
    let raw = std::fs::read_to_string(entries[0].as_ref().unwrap().path()).unwrap();
    assert!(raw.contains('\n'), "cache entries are pretty-printed for diffing");
    let entry: serde_json::Value = serde_json::from_str(&raw).unwrap();
    assert_eq!(entry["response"], "Yes.");
    assert_eq!(entry["request"]["request_kind"], "ASK_BOOLEAN");
    assert_eq!(entry["request"]["temperature"], 0.0);

    // Replay needs no key and must not touch the wire: the panicking
    // transport proves the reply comes from the cache.
    let replayer = Gateway::new(Mode::Replay, tmp.path(), Box::new(common::PanicTransport));
    let replayed = replayer.complete(&request).unwrap();
    assert_eq!(replayed.text, "Yes.");
    assert!(replayed.cached);
    assert_eq!(replayer.ask_boolean("p", "r", "Is it concise?").unwrap(), true);
}

#[test]
fn replay_misses_name_the_missing_key() {
    let tmp = tempfile::tempdir().unwrap();
    let gateway = Gateway::new(Mode::Replay, tmp.path(), Box::new(common::PanicTransport));
    let request = LlmRequest {
        system_text: "s".into(),
        user_text: "never recorded".into(),
        temperature: 0.7,
        request_kind: RequestKind::Categorize,
    };
    match gateway.complete(&request) {
        Err(GatewayError::CacheMiss { key }) => {
            assert_eq!(key, Gateway::request_key(&request));
        }
        other => panic!("expected a cache miss, got {other:?}"),
    }
}

#[test]
fn ambiguous_judge_replies_surface_as_errors() {
    let endpoint = spawn_stub(|_| (200, "It depends on the reader.".to_string()));
    let gateway = Gateway::new(Mode::Live, "/unused", Box::new(HttpTransport))
        .with_endpoint(endpoint)
        .with_api_key("k");
    match gateway.ask_boolean("p", "r", "Is it concise?") {
        Err(GatewayError::AmbiguousReply { reply }) => {
            assert_eq!(reply, "It depends on the reader.");
        }
        other => panic!("expected an ambiguous-reply error, got {other:?}"),
    }
}

#[test]
fn provider_failures_are_retried_then_reported() {
    let endpoint = spawn_stub(|_| (500, String::new()));
    let gateway = Gateway::new(Mode::Live, "/unused", Box::new(HttpTransport))
        .with_endpoint(endpoint)
        .with_api_key("k")
        .with_backoff_base(Duration::from_millis(1));
    match gateway.complete(&boolean_request("p", "r", "q")) {
        Err(GatewayError::Provider { attempts, detail }) => {
            assert_eq!(attempts, 3);
            assert!(detail.contains("500"), "got: {detail}");
        }
        other => panic!("expected a provider error, got {other:?}"),
    }
}
