mod common;

use std::sync::{Arc, Mutex};
use std::time::Duration;

use histner::corpus::LabelSet;
use histner::llm_gateway::{
    ExchangeStore, Gateway, GatewayError, HttpProvider, HttpResponse, HttpTransport, MockProvider,
    ProviderConfig, RequestMeta, TransportError, VirtualClock,
};
use histner::prompting::render_zero_shot;
use histner::response::parse_reply;
use histner::Document;

/// Replays canned responses and records every request body.
#[derive(Default)]
struct FakeTransport {
    replies: Mutex<Vec<Result<HttpResponse, TransportError>>>,
    bodies: Mutex<Vec<(String, Option<String>)>>,
}

impl FakeTransport {
    fn new(mut replies: Vec<Result<HttpResponse, TransportError>>) -> Arc<Self> {
        replies.reverse();
        Arc::new(Self {
            replies: Mutex::new(replies),
            bodies: Mutex::default(),
        })
    }
}

struct Shared(Arc<FakeTransport>);

impl HttpTransport for Shared {
    fn post_json(
        &self,
        _url: &str,
        bearer: Option<&str>,
        body: &str,
        _timeout: Duration,
    ) -> Result<HttpResponse, TransportError> {
        self.0.bodies.lock().unwrap().push((body.to_string(), bearer.map(str::to_string)));
        self.0.replies.lock().unwrap().pop().expect("no canned reply left")
    }
}

fn ok(content: &str) -> Result<HttpResponse, TransportError> {
    Ok(HttpResponse {
        status: 200,
        body: serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string(),
    })
}

fn status(code: u16) -> Result<HttpResponse, TransportError> {
    Ok(HttpResponse {
        status: code,
        body: "{}".into(),
    })
}

fn config() -> ProviderConfig {
    ProviderConfig {
        api_key_env: None,
        ..Default::default()
    }
}

fn prompt() -> histner::prompting::RenderedPrompt {
    let labels = LabelSet::new("x", vec!["PER".into()]).unwrap();
    render_zero_shot(&Document::from_surfaces("d", &["Anna", "sang"], vec![]), &labels).unwrap()
}

fn gateway(transport: Arc<FakeTransport>, store: ExchangeStore, clock: Arc<VirtualClock>) -> Gateway {
    let provider = HttpProvider::with_transport(&config(), Shared(transport));
    Gateway::with_clock(config(), Box::new(provider), store, clock)
}

#[test]
fn rate_limited_reply_is_retried_once_and_stored() {
    let transport = FakeTransport::new(vec![status(429), ok("[(\"Anna\", \"PER\")]")]);
    let clock = Arc::new(VirtualClock::new());
    let gw = gateway(transport.clone(), ExchangeStore::in_memory(), clock.clone());
    let ex = gw.complete(&prompt(), 0, &RequestMeta::new("x", "d")).unwrap();
    assert_eq!(ex.raw_response, "[(\"Anna\", \"PER\")]");
    assert_eq!(gw.provider_calls(), 2);
    assert_eq!(clock.sleeps(), vec![Duration::from_secs(1)]);
    assert_eq!(gw.store().len(), 1);

    let bodies = transport.bodies.lock().unwrap();
    let sent: serde_json::Value = serde_json::from_str(&bodies[0].0).unwrap();
    assert_eq!(sent["model"], "deepseek-chat");
    assert_eq!(sent["temperature"], 0.0);
    assert_eq!(sent["messages"][0]["role"], "user");
    assert_eq!(sent["messages"][0]["content"], prompt().text.as_str());
    assert_eq!(bodies[0].1, None);
}

#[test]
fn retries_stop_after_the_configured_budget() {
    let transport = FakeTransport::new(vec![status(503), status(500), status(502), status(504)]);
    let clock = Arc::new(VirtualClock::new());
    let gw = gateway(transport, ExchangeStore::in_memory(), clock.clone());
    let err = gw.complete(&prompt(), 0, &RequestMeta::new("x", "d")).unwrap_err();
    assert!(matches!(err, GatewayError::ProviderUnavailable { attempts: 4, .. }), "{err}");
    assert_eq!(
        clock.sleeps(),
        [1, 2, 4].map(Duration::from_secs).to_vec()
    );
    assert!(gw.store().is_empty());
}

#[test]
fn client_errors_and_bad_bodies_are_not_retried() {
    let clock = Arc::new(VirtualClock::new());
    let gw = gateway(FakeTransport::new(vec![status(401)]), ExchangeStore::in_memory(), clock.clone());
    let err = gw.complete(&prompt(), 0, &RequestMeta::new("x", "d")).unwrap_err();
    assert!(matches!(err, GatewayError::ProviderUnavailable { attempts: 1, .. }));

    let gw = gateway(
        FakeTransport::new(vec![Ok(HttpResponse {
            status: 200,
            body: "<html>".into(),
        })]),
        ExchangeStore::in_memory(),
        clock.clone(),
    );
    let err = gw.complete(&prompt(), 0, &RequestMeta::new("x", "d")).unwrap_err();
    assert!(matches!(err, GatewayError::MalformedProviderReply(_)));
    assert!(clock.sleeps().is_empty());
}

#[test]
fn timeouts_are_transient() {
    let transport = FakeTransport::new(vec![Err(TransportError::Timeout("slow".into())), ok("[]")]);
    let clock = Arc::new(VirtualClock::new());
    let gw = gateway(transport, ExchangeStore::in_memory(), clock.clone());
    assert_eq!(gw.complete(&prompt(), 0, &RequestMeta::new("x", "d")).unwrap().raw_response, "[]");
    assert_eq!(clock.sleeps().len(), 1);
}

#[test]
fn persisted_cache_answers_without_provider_calls() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exchanges.jsonl");
    let clock = Arc::new(VirtualClock::new());
    let first = {
        let gw = gateway(
            FakeTransport::new(vec![ok("[(\"Anna\", \"PER\")]")]),
            ExchangeStore::open(&path).unwrap(),
            clock.clone(),
        );
        gw.complete(&prompt(), 0, &RequestMeta::new("x", "d")).unwrap()
    };
    let gw = gateway(FakeTransport::new(vec![]), ExchangeStore::open(&path).unwrap(), clock);
    let again = gw.complete(&prompt(), 0, &RequestMeta::new("x", "d")).unwrap();
    assert_eq!(again, first);
    assert_eq!(gw.provider_calls(), 0);
    assert_eq!(gw.cache_hits(), 1);
}

#[test]
fn runs_are_cached_separately() {
    let clock = Arc::new(VirtualClock::new());
    let gw = gateway(FakeTransport::new(vec![ok("[]"), ok("[(\"Anna\", \"PER\")]")]), ExchangeStore::in_memory(), clock);
    let a = gw.complete(&prompt(), 0, &RequestMeta::new("x", "d")).unwrap();
    let b = gw.complete(&prompt(), 1, &RequestMeta::new("x", "d")).unwrap();
    assert_ne!(a.raw_response, b.raw_response);
    assert_eq!(gw.complete(&prompt(), 1, &RequestMeta::new("x", "d")).unwrap(), b);
    assert_eq!(gw.provider_calls(), 2);
}

#[test]
fn rate_limit_spaces_calls_on_the_virtual_clock() {
    let replies = (0..5).map(|_| ok("[]")).collect();
    let clock = Arc::new(VirtualClock::new());
    let cfg = ProviderConfig {
        requests_per_minute: Some(2),
        ..config()
    };
    let provider = HttpProvider::with_transport(&cfg, Shared(FakeTransport::new(replies)));
    let gw = Gateway::with_clock(cfg, Box::new(provider), ExchangeStore::in_memory(), clock.clone());
    for run in 0..5 {
        gw.complete(&prompt(), run, &RequestMeta::new("x", "d")).unwrap();
    }
    let waited: Duration = clock.sleeps().iter().sum();
    // five calls at two per minute need two full windows of waiting
    assert_eq!(waited, Duration::from_secs(120));
}

#[test]
fn gold_echo_reply_parses_to_the_gold_pairs() {
    let mut rng = common::rng(11);
    let ds = common::random_dataset(&mut rng, "echo", 8);
    let gw = Gateway::new(
        ProviderConfig {
            model_id: "mock-gold_echo".into(),
            ..config()
        },
        Box::new(MockProvider::gold_echo([&ds])),
        ExchangeStore::in_memory(),
    );
    for doc in &ds.documents {
        let p = render_zero_shot(doc, &ds.labels).unwrap();
        let ex = gw.complete(&p, 0, &RequestMeta::new("echo", &doc.doc_id)).unwrap();
        let parsed = parse_reply(&ex.raw_response).unwrap();
        let got: Vec<(String, String)> = parsed.predictions.into_iter().map(|p| (p.surface, p.label)).collect();
        let want: Vec<(String, String)> = doc.gold.iter().map(|s| (doc.span_text(s), s.label.clone())).collect();
        assert_eq!(got, want, "{}", doc.doc_id);
    }
}
