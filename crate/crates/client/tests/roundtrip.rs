use std::net::SocketAddr;

use epal_client::{ClientError, EpalClient};
use epal_core::api::{MeasurementRequest, OverrideRequest};
use epal_core::campaign::{Campaign, CampaignConfig};
use epal_service::{serve_with, AppState};

struct Server {
    addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
    _dir: tempfile::TempDir,
}

impl Server {
    fn start() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("campaign.json");
        Campaign::new(CampaignConfig::default(), 5).unwrap().save(&path).unwrap();
        let state = AppState::open(&path).unwrap();
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                addr_tx.send(listener.local_addr().unwrap()).unwrap();
                serve_with(listener, state, async {
                    let _ = stop_rx.await;
                })
                .await
                .unwrap();
            });
        });
        let addr = addr_rx.recv().unwrap();
        Self {
            addr,
            stop: Some(stop_tx),
            thread: Some(thread),
            _dir: dir,
        }
    }

    fn client(&self) -> EpalClient {
        EpalClient::new(format!("http://{}/", self.addr)).unwrap()
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

#[test]
fn status_measure_override() {
    let server = Server::start();
    let client = server.client();

    let status = client.status().unwrap();
    assert_eq!(status.grid_size, 1375);
    assert_eq!(status.sampled, 0);
    assert!(!status.converged);

    let suggestions = client.suggestions().unwrap();
    assert_eq!(suggestions.points.len(), 3);

    let first = suggestions.points[0].id;
    let after = client
        .measure(&MeasurementRequest {
            point_id: first,
            hardness: 0.8,
            inverse_elasticity: 0.2,
            note: None,
            timestamp: None,
        })
        .unwrap();
    assert_eq!(after.sampled, 1);

    let resp = client
        .override_point(&OverrideRequest {
            point_id: None,
            coordinates: Some([0.0, 1.0 / 9.0, 8.0 / 9.0, 8000.0, 0.0]),
        })
        .unwrap();
    assert_eq!(resp.suggestions[0], resp.point_id);
    assert_eq!(client.status().unwrap().override_target, Some(resp.point_id));
    assert_eq!(client.log().unwrap().entries.len(), 2);
    assert_eq!(client.points().unwrap().len(), 1375);
}

#[test]
fn api_errors_carry_status_and_message() {
    let server = Server::start();
    let client = server.client();

    let err = client
        .measure(&MeasurementRequest {
            point_id: 100_000,
            hardness: 0.8,
            inverse_elasticity: 0.2,
            note: None,
            timestamp: None,
        })
        .unwrap_err();
    assert_eq!(err.status(), Some(404));
    assert!(matches!(err, ClientError::Api { ref message, .. } if message.contains("100000")));

    let err = client.step().unwrap_err();
    assert_eq!(err.status(), Some(400));
}

#[test]
fn unreachable_server_is_a_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let client = EpalClient::new(format!("http://{addr}")).unwrap();
    assert!(matches!(client.status(), Err(ClientError::Transport(_))));
}
