mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use navseg::codec::DctCodec;
use navseg::partition::{assign_by_distance, equidistant_references, CostParams, Partition};
use navseg::server::{router, DomainInfo, SegmentPayload, ServerState, Stats};
use serde_json::Value;
use tower::ServiceExt;

fn app() -> (Router, Partition) {
    let ds = common::desk();
    let codec = DctCodec::new(ds, 16);
    let params = CostParams::new(&ds.domain, 0.0, 0.0, 16).unwrap();
    let refs = equidistant_references(&ds.domain, 4).unwrap();
    let members = assign_by_distance(&ds.domain, &refs).unwrap();
    let p = Partition::evaluate(&ds.sets, &refs, &members, &params, &codec).unwrap();
    let state = ServerState::new(ds, p.clone(), 5).unwrap();
    (router(Arc::new(state)), p)
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

#[tokio::test]
async fn domain_lists_segments() {
    let (app, p) = app();
    let (status, body) = call(&app, Method::GET, "/api/domain", None).await;
    assert_eq!(status, StatusCode::OK);
    let info: DomainInfo = serde_json::from_slice(&body).unwrap();
    assert_eq!((info.kind.as_str(), info.rows, info.cols, info.nt), ("line", 1, 120, 5));
    assert_eq!(info.poses.len(), 120);
    assert_eq!(info.segments.len(), p.segments.len());
    for (d, s) in info.segments.iter().zip(&p.segments) {
        assert_eq!((d.reference, &d.members), (s.reference, &s.members));
    }
}

#[tokio::test]
async fn position_fetch_and_stats_flow() {
    let (app, p) = app();
    let membership = p.membership();
    let report = serde_json::json!({ "session": "a", "view": 29 });
    let (status, body) = call(&app, Method::POST, "/api/position", Some(report.clone())).await;
    assert_eq!(status, StatusCode::OK);
    let fetch: Vec<usize> = serde_json::from_value(serde_json::from_slice::<Value>(&body).unwrap()["fetch"].clone()).unwrap();
    let ds = common::desk();
    let mut want: Vec<usize> = ds.domain.navigation_ball(29, 5).unwrap().iter().map(|&v| membership[v]).collect();
    want.sort_unstable();
    want.dedup();
    assert_eq!(fetch, want);

    // Already pending segments are not announced twice.
    let (_, body) = call(&app, Method::POST, "/api/position", Some(report)).await;
    assert_eq!(serde_json::from_slice::<Value>(&body).unwrap()["fetch"], serde_json::json!([]));

    let mut bytes = 0;
    for s in &fetch {
        let (status, body) = call(&app, Method::GET, &format!("/api/segment/{s}?session=a"), None).await;
        assert_eq!(status, StatusCode::OK);
        let payload: SegmentPayload = serde_json::from_slice(&body).unwrap();
        assert_eq!(payload.id, *s);
        assert_eq!(payload.reference.view, p.segments[*s].reference);
        assert_eq!(payload.aux.len(), p.segments[*s].phi_size);
        assert_eq!(payload.ref_bits + payload.aux_bits, p.segments[*s].size_bits());
        bytes += body.len() as u64;
    }

    let (status, body) = call(&app, Method::GET, "/api/stats?session=a", None).await;
    assert_eq!(status, StatusCode::OK);
    let stats: Stats = serde_json::from_slice(&body).unwrap();
    assert_eq!(stats.sessions.len(), 1);
    let s = &stats.sessions[0];
    assert_eq!((s.current_view, s.reports, s.fetches), (Some(29), 2, fetch.len() as u64));
    assert_eq!(s.segments_delivered, fetch.len() as u64);
    assert_eq!(s.bytes, bytes);
    assert_eq!(stats.total.bytes, bytes);
}

#[tokio::test]
async fn errors_map_to_status_codes() {
    let (app, _) = app();
    let (status, _) = call(&app, Method::GET, "/api/segment/99", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, body) =
        call(&app, Method::POST, "/api/position", Some(serde_json::json!({ "session": "b", "view": 500 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(serde_json::from_slice::<Value>(&body).unwrap()["error"].is_string());
    let (status, _) = call(&app, Method::POST, "/api/position", Some(serde_json::json!({ "view": 1 }))).await;
    assert!(status.is_client_error());

    let ds = common::desk();
    let bare = router(Arc::new(ServerState::without_partition(ds.domain.clone(), 5)));
    let (status, _) = call(&bare, Method::GET, "/api/domain", None).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    let (status, body) = call(&bare, Method::GET, "/api/stats", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_slice::<Stats>(&body).unwrap().sessions.len(), 0);
}
