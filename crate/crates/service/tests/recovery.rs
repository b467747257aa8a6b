mod common;

use std::fs::{self, OpenOptions};
use std::io::Write;

use common::{planted_config, start};
use prefdesign::checkpoint::load_checkpoint;
use prefdesign_service::api::{LabelAck, NextPairsResponse, SessionStatus};

#[tokio::test]
async fn restart_restores_labels_queue_and_model() {
    let tmp = tempfile::tempdir().unwrap();
    let config = planted_config("entropy", 4);
    let (id, before, queue, ack, model) = {
        let srv = start(tmp.path()).await;
        let id = srv.create(&config, "background").await.session_id.to_string();
        srv.finish_round(&id).await;
        srv.finish_round(&id).await;
        srv.wait_for_version(&id, 2).await;
        let next: NextPairsResponse = srv.next(&id, 4).await.ok();
        let ack: LabelAck = srv.label(&id, &next.pairs[0], "keep").await.ok();
        let queue: NextPairsResponse = srv.next(&id, 3).await.ok();
        let status = srv.status(&id).await;
        let session = srv.state.session(&id.parse().unwrap()).unwrap();
        (id, status, queue, ack, session.current_model().1)
    };

    let srv = start(tmp.path()).await;
    let after: SessionStatus = srv.status(&id).await;
    assert_eq!(after, before);
    let queue_after: NextPairsResponse = srv.next(&id, 3).await.ok();
    assert_eq!(queue_after, queue);
    let replay: LabelAck = srv.label(&id, &queue.pairs[0], "keep").await.ok();
    assert_eq!(replay, ack);
    let session = srv.state.session(&id.parse().unwrap()).unwrap();
    assert_eq!(session.current_model().1, model);
}

#[tokio::test]
async fn lost_model_and_torn_log_are_repaired() {
    let tmp = tempfile::tempdir().unwrap();
    let config = planted_config("maxdiff", 3);
    let (id, model, labels) = {
        let srv = start(tmp.path()).await;
        let id = srv.create(&config, "sync").await.session_id.to_string();
        srv.finish_round(&id).await;
        srv.finish_round(&id).await;
        let s = srv.status(&id).await;
        let session = srv.state.session(&id.parse().unwrap()).unwrap();
        (id, session.current_model().1, s.labels)
    };
    let dir = tmp.path().join(&id);
    // Crash after the label was logged but before the retrain finished.
    fs::remove_file(dir.join("checkpoints/latest.bin")).unwrap();
    fs::remove_file(dir.join("checkpoints/model.json")).unwrap();
    let mut log = OpenOptions::new().append(true).open(dir.join("labels.jsonl")).unwrap();
    log.write_all(b"{\"round\":2,\"pair_id\":1").unwrap();
    drop(log);

    let srv = start(tmp.path()).await;
    let s = srv.status(&id).await;
    assert_eq!((s.labels, s.round, s.model_version), (labels, 2, 1));
    let session = srv.state.session(&id.parse().unwrap()).unwrap();
    assert_eq!(session.current_model().1, model);
    assert_eq!(load_checkpoint(&dir.join("checkpoints/round_001.bin")).unwrap(), model);
    let text = fs::read_to_string(dir.join("labels.jsonl")).unwrap();
    assert!(text.ends_with('\n'));
    assert_eq!(text.lines().count(), labels);
    srv.finish_round(&id).await;
}
