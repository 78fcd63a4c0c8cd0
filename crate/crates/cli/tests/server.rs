mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::process::{Child, Command, Stdio};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use crossmap_cli::server::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use common::{artifacts_copy, shared_artifacts};

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

fn app(dir: &std::path::Path) -> Router {
    router(AppState::open(dir).unwrap(), None)
}

fn decision(std: usize, spec: usize, d: &str, who: &str) -> Value {
    json!({"standard_ref": std, "spec_ref": spec, "decision": d, "note": "", "reviewer": who})
}

#[tokio::test]
async fn standards_lists_every_standard_with_its_steps() {
    let (status, v) = call(&app(shared_artifacts()), "GET", "/api/standards", None).await;
    assert_eq!(status, StatusCode::OK);
    let list = v.as_array().unwrap();
    assert_eq!(list.len(), 34);
    assert_eq!(list[12]["ref"], 13);
    assert_eq!(list[12]["id"], "4.NF.A.2");
    assert_eq!(list[12]["steps"].as_array().unwrap().len(), 3);
    assert_eq!(list[12]["decided_candidates"], 0);
}

#[tokio::test]
async fn candidates_are_sorted_and_badged() {
    let (status, v) = call(
        &app(shared_artifacts()),
        "GET",
        "/api/standards/13/candidates",
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let list = v.as_array().unwrap();
    assert_eq!(list.len(), 49);
    assert_eq!(list[0]["spec_ref"], 7);
    let sims: Vec<f64> = list.iter().map(|c| c["similarity"].as_f64().unwrap()).collect();
    assert!(sims.windows(2).all(|w| w[0] >= w[1]));
    let badged: usize = list.iter().filter(|c| !c["step"].is_null()).count();
    assert_eq!(badged, 3);
    assert!(list.iter().all(|c| c["decisions"].as_array().unwrap().is_empty()));
}

#[tokio::test]
async fn unknown_and_malformed_standard_refs() {
    let a = app(shared_artifacts());
    assert_eq!(call(&a, "GET", "/api/standards/99/candidates", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&a, "GET", "/api/standards/x/candidates", None).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn report_is_the_run_report() {
    let (status, v) = call(&app(shared_artifacts()), "GET", "/api/report", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["table"]["rows"].as_array().unwrap().len(), 34);
    assert_eq!(v["specifications"]["per_domain"].as_array().unwrap().len(), 5);
    assert_eq!(v["occurrences"]["total_slots"], 102);
}

#[tokio::test]
async fn invalid_adjudications_are_422_and_not_persisted() {
    let dir = artifacts_copy();
    let a = app(dir.path());
    for bad in [
        decision(13, 50, "ACCEPT", "r"),
        decision(0, 7, "ACCEPT", "r"),
        decision(35, 7, "ACCEPT", "r"),
        decision(13, 7, "ACCEPT", "  "),
        decision(13, 7, "MAYBE", "r"),
        json!({"standard_ref": 13}),
    ] {
        let (status, v) = call(&a, "POST", "/api/adjudications", Some(bad.clone())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
        assert!(v["error"].is_string());
    }
    let (_, list) = call(&a, "GET", "/api/adjudications?history=true", None).await;
    assert!(list.as_array().unwrap().is_empty());
}

#[tokio::test]
async fn decisions_persist_across_restart_and_reach_export() {
    let dir = artifacts_copy();
    {
        let a = app(dir.path());
        let (status, rec) = call(&a, "POST", "/api/adjudications", Some(decision(13, 7, "REJECT", "ana"))).await;
        assert_eq!(status, StatusCode::CREATED);
        assert!(rec["created_at"].is_string());
        call(&a, "POST", "/api/adjudications", Some(decision(13, 7, "ACCEPT", "ana"))).await;
        call(&a, "POST", "/api/adjudications", Some(decision(13, 6, "flag", "bo"))).await;
    }
    let a = app(dir.path());
    let (_, latest) = call(&a, "GET", "/api/adjudications", None).await;
    let latest = latest.as_array().unwrap();
    assert_eq!(latest.len(), 2);
    assert_eq!(latest[1]["spec_ref"], 7);
    assert_eq!(latest[1]["decision"], "ACCEPT");
    let (_, history) = call(&a, "GET", "/api/adjudications?history=true", None).await;
    assert_eq!(history.as_array().unwrap().len(), 3);

    let (_, cands) = call(&a, "GET", "/api/standards/13/candidates", None).await;
    let seven = &cands.as_array().unwrap()[0];
    assert_eq!(seven["decisions"][0]["decision"], "ACCEPT");
    let (_, standards) = call(&a, "GET", "/api/standards", None).await;
    assert_eq!(standards[12]["decided_candidates"], 2);

    let (status, export) = call(&a, "GET", "/api/export", None).await;
    assert_eq!(status, StatusCode::OK);
    let row = &export["crosswalk"][12];
    assert_eq!(row["ref"], 13);
    assert_eq!(row["accepted"], json!([7]));
    assert_eq!(row["flagged"], json!([6]));
    assert_eq!(export["report"]["table"]["rows"].as_array().unwrap().len(), 34);
    assert!(export["manifest_sha256"].is_string());
}

#[test]
fn tampered_artifacts_are_rejected() {
    let dir = artifacts_copy();
    let path = dir.path().join("report.json");
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push(' ');
    std::fs::write(&path, text).unwrap();
    let err = AppState::open(dir.path()).err().unwrap();
    assert!(format!("{err:#}").contains("corrupt artifacts"));
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn spawn(dir: &std::path::Path, bind: &str) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_crossmap"));
    cmd.args(["serve", "--artifacts", dir.to_str().unwrap(), "--bind", bind]);
    cmd
}

fn http_get(addr: &str, path: &str) -> String {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(s, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut out = String::new();
    s.read_to_string(&mut out).unwrap();
    out
}

#[test]
fn serve_subcommand_listens_and_answers() {
    let dir = artifacts_copy();
    let child = spawn(dir.path(), "127.0.0.1:0")
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut server = Server(child);
    let mut line = String::new();
    BufReader::new(server.0.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line.trim().strip_prefix("listening on http://").unwrap().to_string();
    let resp = http_get(&addr, "/api/standards");
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.contains("4.NF.A.2"));
}

#[test]
fn serve_reports_a_busy_port() {
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    let out = spawn(shared_artifacts(), &addr).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains(&addr));
}
