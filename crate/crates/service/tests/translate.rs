mod common;

use std::sync::Arc;
use std::time::Duration;

use common::*;
use markmt_core::backends::{Glossary, RemoteConfig, RemoteBackend};
use markmt_service::stub::StubMt;
use markmt_core::docmodel::{canonicalize, parse_str, serialize_to_string, DocFormat};
use serde_json::json;

const DOC: &str = r#"<div class="exercise"><p>Voda je <b>H<sub>2</sub>O</b>.</p><p title="Nápověda">Pes <i>je</i> velký.</p></div>"#;

fn canonical(html: &str) -> String {
    let doc = canonicalize(&parse_str(html, DocFormat::Html).unwrap());
    serialize_to_string(&doc)
}

#[tokio::test]
async fn identity_returns_canonical_input() {
    let server = identity_server().await;
    let (status, body) = post_json(&server.url("/api/v1/translate"), &translate_body("html", DOC)).await;
    assert_eq!(status, 200);
    assert_eq!(body["content"], canonical(DOC));
    assert_eq!(body["backend"], "identity");
    assert!(parse_str(body["content"].as_str().unwrap(), DocFormat::Html).is_ok());
    let segs = body["segments"].as_array().unwrap();
    assert!(segs.iter().any(|s| s["source_text"] == "Voda je H2O."));
    assert!(body.get("session").is_none());
}

#[tokio::test]
async fn dictionary_keeps_bold() {
    let server = Setup {
        backend: Arc::new(dictionary()),
        ..Default::default()
    }
    .spawn()
    .await;
    let (status, body) = post_json(&server.url("/api/v1/translate"), &translate_body("html", "<p><b>pes</b></p>")).await;
    assert_eq!(status, 200);
    assert_eq!(body["content"], "<p><b>собака</b></p>");
}

#[tokio::test]
async fn malformed_xml_reports_position() {
    let server = identity_server().await;
    let (status, body) = post_json(
        &server.url("/api/v1/translate"),
        &translate_body("xml", "<a>\n  <b>text</a>"),
    )
    .await;
    assert_eq!(status, 400);
    assert_eq!(body["error"], "malformed_markup");
    assert_eq!(body["line"], 2);
    assert!(body["column"].as_u64().unwrap() > 0);
}

#[tokio::test]
async fn request_errors() {
    let server = Setup {
        backend: Arc::new(dictionary()),
        max_bytes: 4096,
        ..Default::default()
    }
    .spawn()
    .await;
    let url = server.url("/api/v1/translate");

    let client = reqwest::Client::new();
    let r = client.post(&url).body("{not json").send().await.unwrap();
    assert_eq!(r.status(), 400);

    let (status, _) = post_json(&url, &translate_body("pdf", "x")).await;
    assert_eq!(status, 400);

    let mut body = translate_body("html", "<p>pes</p>");
    body["target_lang"] = json!("de");
    let (status, err) = post_json(&url, &body).await;
    assert_eq!(status, 422);
    assert_eq!(err["error"], "unsupported_pair");

    let big = format!("<p>{}</p>", "pes ".repeat(2000));
    let (status, err) = post_json(&url, &translate_body("html", &big)).await;
    assert_eq!(status, 413);
    assert_eq!(err["error"], "payload_too_large");
}

#[tokio::test]
async fn unreachable_backend_is_502_and_degraded() {
    let mut config = RemoteConfig::new("http://127.0.0.1:1/translate");
    config.max_retries = 0;
    config.timeout_ms = 500;
    let server = Setup {
        backend: Arc::new(RemoteBackend::new(config)),
        ..Default::default()
    }
    .spawn()
    .await;
    let (status, err) = post_json(&server.url("/api/v1/translate"), &translate_body("text", "Pes.")).await;
    assert_eq!(status, 502);
    assert_eq!(err["error"], "backend_unavailable");
    let (status, health) = get_json(&server.url("/health")).await;
    assert_eq!(status, 200);
    assert_eq!(health, json!({"status": "degraded", "backend": "remote"}));
}

#[tokio::test]
async fn health_is_stable() {
    let server = identity_server().await;
    for _ in 0..3 {
        let (status, body) = get_json(&server.url("/health")).await;
        assert_eq!(status, 200);
        assert_eq!(body, json!({"status": "ok", "backend": "identity"}));
    }
}

#[tokio::test]
async fn concurrent_identical_requests_match() {
    let server = identity_server().await;
    let url = server.url("/api/v1/translate");
    let body = translate_body("html", DOC);
    let client = reqwest::Client::new();
    let handles: Vec<_> = (0..50)
        .map(|_| {
            let client = client.clone();
            let url = url.clone();
            let body = body.clone();
            tokio::spawn(async move {
                let r = client.post(&url).json(&body).send().await.unwrap();
                assert_eq!(r.status(), 200);
                r.bytes().await.unwrap().to_vec()
            })
        })
        .collect();
    let mut bodies = Vec::new();
    for h in handles {
        bodies.push(h.await.unwrap());
    }
    assert_eq!(bodies.len(), 50);
    assert!(bodies.iter().all(|b| b == &bodies[0]));
}

#[tokio::test]
async fn glossary_findings_by_domain() {
    let glossary = Glossary::parse_tsv("pes\tсобака\tbiology\texact\n").unwrap();
    let server = Setup {
        backend: Arc::new(dictionary()),
        glossaries: [("biology".to_string(), glossary)].into(),
        ..Default::default()
    }
    .spawn()
    .await;
    let mut body = translate_body("html", "<p>Pes je velký.</p>");
    body["glossary"] = json!(true);
    body["domain"] = json!("biology");
    let (status, out) = post_json(&server.url("/api/v1/translate"), &body).await;
    assert_eq!(status, 200);
    let findings = out["term_findings"].as_array().unwrap();
    assert_eq!(findings.len(), 1);
    assert_eq!(findings[0]["status"], "ok");

    body["glossary"] = json!(false);
    let (_, out) = post_json(&server.url("/api/v1/translate"), &body).await;
    assert!(out["term_findings"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn tooltips() {
    // The stub answers "Собака." and links only the first tokens, so
    // "velký" stays unlinked.
    let stub = StubMt::spawn_with(vec![], Arc::new(|_: &str| "Собака.".to_string())).await;
    let server = Setup {
        backend: Arc::new(RemoteBackend::new(RemoteConfig::new(stub.url()))),
        ttl: Duration::from_millis(300),
        ..Default::default()
    }
    .spawn()
    .await;
    let mut body = translate_body("html", "<p>Pes je velký.</p>");
    body["keep_session"] = json!(true);
    let (status, out) = post_json(&server.url("/api/v1/translate"), &body).await;
    assert_eq!(status, 200);
    let session = out["session"].as_str().unwrap().to_string();
    let segment = out["segments"][0]["segment_id"].as_str().unwrap().to_string();
    let tip = |token: &str| server.url(&format!("/api/v1/tooltip?session={session}&segment={segment}&token={token}"));

    let (status, t) = get_json(&tip("0")).await;
    assert_eq!(status, 200);
    assert_eq!(t, json!({"source_token": "Pes", "translations": ["Собака"]}));
    let (_, t) = get_json(&tip("2")).await;
    assert_eq!(t, json!({"source_token": "velký", "translations": []}));
    assert_eq!(get_json(&tip("99")).await.0, 400);
    assert_eq!(get_json(&tip("x")).await.0, 400);
    let (status, _) = get_json(&server.url(&format!("/api/v1/tooltip?session={session}&segment=9.9&token=0"))).await;
    assert_eq!(status, 404);
    let (status, _) = get_json(&server.url("/api/v1/tooltip?session=nope&segment=0.0&token=0")).await;
    assert_eq!(status, 404);

    tokio::time::sleep(Duration::from_millis(400)).await;
    assert_eq!(get_json(&tip("0")).await.0, 404);
}

#[tokio::test]
async fn identity_tooltip_returns_same_token() {
    let server = identity_server().await;
    let mut body = translate_body("text", "Voda je mokrá.");
    body["keep_session"] = json!(true);
    let (_, out) = post_json(&server.url("/api/v1/translate"), &body).await;
    let session = out["session"].as_str().unwrap();
    let segment = out["segments"][0]["segment_id"].as_str().unwrap();
    let (status, t) = get_json(&server.url(&format!(
        "/api/v1/tooltip?session={session}&segment={segment}&token=0"
    )))
    .await;
    assert_eq!(status, 200);
    assert_eq!(t, json!({"source_token": "Voda", "translations": ["Voda"]}));
}
