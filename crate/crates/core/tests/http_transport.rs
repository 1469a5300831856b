use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use ideaforge::embedding::{EmbeddingProvider, HttpEmbeddingProvider};
use ideaforge::gateway::{
    ChatGateway, ChatMessage, ChatRequest, EndpointConfig, GatewayError, HttpChatGateway, HttpClient, RequestPurpose,
    UreqTransport,
};
use ideaforge::corpus::ReasoningEffort;

#[derive(Debug, Clone)]
struct Seen {
    request_line: String,
    authorization: Option<String>,
    body: String,
}

/// Serves one canned (status, body) per connection, in order.
fn serve(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>, JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    let handle = std::thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let (mut length, mut authorization) = (0usize, None);
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (k, v) = line.split_once(':').unwrap();
                match k.to_ascii_lowercase().as_str() {
                    "content-length" => length = v.trim().parse().unwrap(),
                    "authorization" => authorization = Some(v.trim().to_string()),
                    _ => {}
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Seen {
                request_line: request_line.trim_end().to_string(),
                authorization,
                body: String::from_utf8(buf).unwrap(),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            stream.flush().unwrap();
        }
    });
    (base, seen, handle)
}

fn endpoint(base: &str) -> EndpointConfig {
    EndpointConfig { base_url: base.to_string(), backoff_base_ms: 1, timeout_ms: 5_000, ..Default::default() }
}

fn completion(text: &str) -> String {
    format!("{{\"choices\":[{{\"message\":{{\"role\":\"assistant\",\"content\":\"{text}\"}}}}],\"usage\":{{\"prompt_tokens\":7,\"completion_tokens\":2}}}}")
}

fn request(effort: Option<ReasoningEffort>) -> ChatRequest {
    ChatRequest {
        model_name: "o3".into(),
        messages: vec![ChatMessage::system("s"), ChatMessage::user("hello")],
        temperature: None,
        max_output_tokens: None,
        reasoning_effort: effort,
        purpose: RequestPurpose::Other,
    }
}

#[test]
fn chat_round_trip_over_a_socket() {
    let (base, seen, handle) = serve(vec![(200, completion("an idea"))]);
    let gw = HttpChatGateway::with_transport(endpoint(&base), "sekret".into(), Box::new(UreqTransport));
    let reply = gw.complete(&request(Some(ReasoningEffort::High))).unwrap();
    handle.join().unwrap();
    assert_eq!(reply.content, "an idea");
    assert_eq!(reply.usage.total(), 9);
    assert_eq!(reply.attempts, 1);
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].request_line, "POST /chat/completions HTTP/1.1");
    assert_eq!(seen[0].authorization.as_deref(), Some("Bearer sekret"));
    let body: serde_json::Value = serde_json::from_str(&seen[0].body).unwrap();
    assert_eq!(body["model"], "o3");
    assert_eq!(body["reasoning_effort"], "high");
    assert_eq!(body["messages"][1]["content"], "hello");
    assert!(body.get("temperature").is_none());
}

#[test]
fn default_effort_is_not_sent() {
    let (base, seen, handle) = serve(vec![(200, completion("ok"))]);
    let gw = HttpChatGateway::with_transport(endpoint(&base), "k".into(), Box::new(UreqTransport));
    gw.complete(&request(Some(ReasoningEffort::Default))).unwrap();
    handle.join().unwrap();
    let body: serde_json::Value = serde_json::from_str(&seen.lock().unwrap()[0].body).unwrap();
    assert!(body.get("reasoning_effort").is_none());
}

#[test]
fn transient_statuses_are_retried_over_the_wire() {
    let (base, seen, handle) = serve(vec![(503, "{}".into()), (429, "{}".into()), (200, completion("third"))]);
    let gw = HttpChatGateway::with_transport(endpoint(&base), "k".into(), Box::new(UreqTransport));
    let reply = gw.complete(&request(None)).unwrap();
    handle.join().unwrap();
    assert_eq!(reply.content, "third");
    assert_eq!(reply.attempts, 3);
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn client_errors_surface_status_and_body() {
    let (base, _, handle) = serve(vec![(400, "{\"error\":\"bad\"}".into())]);
    let gw = HttpChatGateway::with_transport(endpoint(&base), "k".into(), Box::new(UreqTransport));
    let err = gw.complete(&request(None)).unwrap_err();
    handle.join().unwrap();
    match err {
        GatewayError::Http { status, body } => {
            assert_eq!(status, 400);
            assert!(body.contains("bad"));
        }
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn refused_connection_exhausts_retries() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let cfg = EndpointConfig { max_attempts: 2, ..endpoint(&format!("http://127.0.0.1:{port}")) };
    let gw = HttpChatGateway::with_transport(cfg, "k".into(), Box::new(UreqTransport));
    assert!(matches!(gw.complete(&request(None)), Err(GatewayError::RetryExhausted { attempts: 2, .. })));
}

#[test]
fn embeddings_endpoint_orders_by_index() {
    let body = "{\"data\":[{\"index\":1,\"embedding\":[0.0,1.0]},{\"index\":0,\"embedding\":[1.0,0.0]}]}";
    let (base, seen, handle) = serve(vec![(200, body.into())]);
    let client = HttpClient::with_transport(endpoint(&base), "k".into(), Box::new(UreqTransport));
    let provider = HttpEmbeddingProvider::new("embed-model", client);
    let v = provider.embed(&["first", "second"]).unwrap();
    handle.join().unwrap();
    assert_eq!(v, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].request_line, "POST /embeddings HTTP/1.1");
    let req: serde_json::Value = serde_json::from_str(&seen[0].body).unwrap();
    assert_eq!(req["model"], "embed-model");
    assert_eq!(req["input"][1], "second");
}
