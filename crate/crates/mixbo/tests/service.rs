use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use mixbo::service::{router, AppState};
use mixbo::Store;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(dir: &std::path::Path) -> Router {
    router(AppState::new(Store::open(dir).unwrap()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(&b).unwrap())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (
        status,
        serde_json::from_slice(&bytes).unwrap_or(Value::Null),
    )
}

fn create_body(id: &str) -> Value {
    let space =
        json!({"names":["c0","c1","c2","c3"],"increment":0.5,"total_min":1.0,"total_max":3.0});
    json!({
        "config": {"id": id, "seed": 3, "iterations": 2, "space": space,
                   "acquisition": {"method": "qlognehvi", "batch_size": 3, "mc_samples": 64},
                   "model": {"restarts": 1}},
        "initial": initial_json(),
    })
}

fn initial_json() -> Value {
    use mixbo_core::campaign::{Measurement, Source};
    use mixbo_core::space::ComponentSet;
    let s = ComponentSet {
        names: (0..4).map(|i| format!("c{i}")).collect(),
        increment: 0.5,
        per_component_max: None,
        total_min: 1.0,
        total_max: 3.0,
    };
    let rows = [
        ([1.0, 0.0, 0.0, 0.0], vec![0.9, 0.88]),
        ([0.0, 1.5, 0.0, 0.0], vec![0.7, 0.72]),
        ([0.0, 0.0, 2.0, 0.5], vec![0.3, 0.35]),
        ([1.0, 1.0, 0.0, 0.0], vec![0.6, 0.5]),
    ];
    let ms: Vec<Measurement> = rows
        .into_iter()
        .map(|(c, r)| Measurement {
            formulation: s.formulation(&c).unwrap(),
            replicates: r,
            source: Source::Lab,
        })
        .collect();
    serde_json::to_value(ms).unwrap()
}

fn results_for(suggestion: &Value) -> Vec<Value> {
    suggestion["candidates"]
        .as_array()
        .unwrap()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let v = 0.5 + 0.1 * i as f64;
            json!({"id": c["formulation"]["id"].clone(), "replicates": [v, v, v]})
        })
        .collect()
}

fn candidate_ids(suggestion: &Value) -> Vec<String> {
    suggestion["candidates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["formulation"]["id"].as_str().unwrap().to_string())
        .collect()
}

async fn suggest(app: &Router, id: &str) -> (u64, Value) {
    let (status, body) = call(app, "GET", &format!("/campaigns/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let version = body["version"].as_u64().unwrap();
    let (status, body) = call(
        app,
        "POST",
        &format!("/campaigns/{id}/suggest"),
        Some(json!({"version": version})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    (
        body["version"].as_u64().unwrap(),
        body["suggestion"].clone(),
    )
}

#[tokio::test]
async fn lifecycle_keeps_hypervolume_non_decreasing() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (status, body) = call(&app, "POST", "/campaigns", Some(create_body("life"))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["status"], "ready_to_suggest");
    assert_eq!(body["activity"], "idle");

    let (_, m0) = call(&app, "GET", "/campaigns/life/metrics", None).await;
    let (version, suggestion) = suggest(&app, "life").await;
    assert_eq!(candidate_ids(&suggestion).len(), 3);

    let (status, listed) = call(&app, "GET", "/campaigns/life/candidates?limit=2", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(listed["candidates"].as_array().unwrap().len(), 2);
    assert_eq!(listed["version"], version);

    let body = json!({"version": version, "results": results_for(&suggestion)});
    let (status, posted) = call(&app, "POST", "/campaigns/life/results", Some(body)).await;
    assert_eq!(status, StatusCode::OK, "{posted}");

    let (_, m1) = call(&app, "GET", "/campaigns/life/metrics", None).await;
    let hv = |m: &Value| {
        m["metrics"].as_array().unwrap().last().unwrap()["hypervolume"]
            .as_f64()
            .unwrap()
    };
    assert!(hv(&m1) >= hv(&m0));
    assert_eq!(m1["metrics"].as_array().unwrap().len(), 2);
    assert_eq!(
        posted["metric"],
        *m1["metrics"].as_array().unwrap().last().unwrap()
    );
    assert_eq!(m1["version"], posted["version"]);

    let (status, front) = call(&app, "GET", "/campaigns/life/front", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(!front["front"].as_array().unwrap().is_empty());
    assert!(front["front"][0]["formulation"]["units"].is_array());
}

#[tokio::test]
async fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (status, body) = call(&app, "GET", "/campaigns/ghost", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "not_found");
    let (status, _) = call(&app, "POST", "/campaigns/ghost/suggest", Some(json!({}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let mut bad = create_body("bad");
    bad["config"]["acquisition"]["method"] = json!("simplex");
    let (status, body) = call(&app, "POST", "/campaigns", Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["message"].as_str().unwrap().contains("qvarlognehvi"));

    let (status, _) = call(&app, "POST", "/campaigns", Some(create_body("err"))).await;
    assert_eq!(status, StatusCode::CREATED);
    let (status, _) = call(&app, "POST", "/campaigns", Some(create_body("err"))).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, body) = call(
        &app,
        "POST",
        "/campaigns/err/results",
        Some(json!({"results": []})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    assert_eq!(body["error"], "wrong_status");

    let (version, suggestion) = suggest(&app, "err").await;
    let (status, body) = call(
        &app,
        "POST",
        "/campaigns/err/suggest",
        Some(json!({"version": version - 1})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["version"], version);

    let stranger = mixbo_core::space::ComponentSet {
        names: (0..4).map(|i| format!("c{i}")).collect(),
        increment: 0.5,
        per_component_max: None,
        total_min: 1.0,
        total_max: 3.0,
    }
    .formulation(&[0.0, 0.0, 0.0, 3.0])
    .unwrap()
    .id()
    .to_string();
    let mut results = results_for(&suggestion);
    let outsider = if candidate_ids(&suggestion).contains(&stranger) {
        "0000000000000001".to_string()
    } else {
        stranger
    };
    results[0]["id"] = json!(outsider);
    let (status, body) = call(
        &app,
        "POST",
        "/campaigns/err/results",
        Some(json!({"version": version, "results": results})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert_eq!(body["offenders"], json!([outsider]));

    let (_, after) = call(&app, "GET", "/campaigns/err", None).await;
    assert_eq!(after["version"], version);
    assert_eq!(after["status"], "awaiting_results");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_results_with_one_version() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    call(&app, "POST", "/campaigns", Some(create_body("race"))).await;
    let (version, suggestion) = suggest(&app, "race").await;
    let body = json!({"version": version, "results": results_for(&suggestion)});
    let (a, b) = tokio::join!(
        call(&app, "POST", "/campaigns/race/results", Some(body.clone())),
        call(&app, "POST", "/campaigns/race/results", Some(body.clone())),
    );
    let mut codes = [a.0, b.0];
    codes.sort();
    assert_eq!(codes, [StatusCode::OK, StatusCode::CONFLICT]);
}

#[tokio::test]
async fn csv_results_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    call(&app, "POST", "/campaigns", Some(create_body("csv"))).await;
    let (version, suggestion) = suggest(&app, "csv").await;
    let mut csv = String::from("id,replicate_1,replicate_2\n");
    for id in candidate_ids(&suggestion) {
        csv.push_str(&format!("{id},0.8,0.7\n"));
    }
    let req = Request::builder()
        .method("POST")
        .uri(format!("/campaigns/csv/results?version={version}"))
        .header("content-type", "text/csv")
        .body(Body::from(csv))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    assert_eq!(res.status(), StatusCode::OK);

    let (status, schema) = call(&app, "GET", "/schema", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(schema["endpoints"]["POST /campaigns/{id}/results"].is_object());
}

#[tokio::test]
async fn replaying_calls_gives_identical_bodies() {
    let mut transcripts = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let app = app(dir.path());
        let mut t = Vec::new();
        t.push(
            call(&app, "POST", "/campaigns", Some(create_body("pure")))
                .await
                .1,
        );
        let (version, suggestion) = suggest(&app, "pure").await;
        t.push(suggestion.clone());
        let body = json!({"version": version, "results": results_for(&suggestion)});
        t.push(
            call(&app, "POST", "/campaigns/pure/results", Some(body))
                .await
                .1,
        );
        t.push(call(&app, "GET", "/campaigns/pure/metrics", None).await.1);
        t.push(call(&app, "GET", "/campaigns/pure/front", None).await.1);
        transcripts.push(t);
    }
    assert_eq!(transcripts[0], transcripts[1]);
}
