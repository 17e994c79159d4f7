use std::io::Write;

use nlac_gateway::{ComposedAction, Message};
use nlac_pipeline::{
    apply_priorities, load_buffer, load_pairs, load_transitions, to_jsonl, write_jsonl, Error, PriorityUpdate,
    TransitionLog, TransitionRecord, TRANSITION_SCHEMA_VERSION,
};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;
use serde_json::json;

fn record(episode_id: u64, step_index: u32, priority: f64) -> TransitionRecord {
    TransitionRecord {
        schema_version: TRANSITION_SCHEMA_VERSION,
        episode_id,
        step_index,
        context: vec![Message::system("Play."), Message::user("Ask.")],
        action: ComposedAction::new("Think.", "ask", json!({ "question": "Is it red?" })),
        reward: 0.0,
        next_observation: "No.".into(),
        done: false,
        priority,
    }
}

fn text() -> impl Strategy<Value = String> {
    prop_oneof![".{0,40}", "[a-z \n\"\\\\{}]{0,40}"]
}

fn records(max: usize) -> impl Strategy<Value = Vec<TransitionRecord>> {
    let one = (
        prop::collection::vec((text(), text()), 0..3),
        text(),
        text(),
        text(),
        any::<f64>().prop_filter("finite", |f| f.is_finite()),
        any::<bool>(),
        0.0..1e6f64,
        any::<i64>(),
    );
    prop::collection::vec(one, 0..max).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (turns, obs, thought, next, reward, done, priority, arg))| {
                let mut context = vec![Message::system("sys")];
                for (a, o) in turns {
                    context.push(Message::user(o));
                    context.push(Message::assistant(a));
                }
                context.push(Message::user(obs));
                TransitionRecord {
                    schema_version: TRANSITION_SCHEMA_VERSION,
                    episode_id: (i / 7) as u64,
                    step_index: (i % 7) as u32,
                    context,
                    action: ComposedAction::new(thought, "act", json!({ "n": arg, "f": reward })),
                    reward,
                    next_observation: next,
                    done,
                    priority,
                }
            })
            .collect()
    })
}

#[test]
fn thousand_random_records_round_trip_byte_identically() {
    let mut runner = TestRunner::deterministic();
    let rs = records(1001).prop_filter("1000", |v| v.len() >= 1000).new_tree(&mut runner).unwrap().current();
    let rs = &rs[..1000];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    write_jsonl(&path, rs).unwrap();
    let loaded = load_transitions(&path).unwrap();
    assert_eq!(loaded.skipped, 0);
    assert_eq!(loaded.records, rs);
    assert_eq!(to_jsonl(&loaded.records).unwrap(), std::fs::read_to_string(&path).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_then_load_is_identity(rs in records(30)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let mut log = TransitionLog::open(&path).unwrap();
        for r in &rs {
            log.persist(r).unwrap();
        }
        let loaded = load_transitions(&path).unwrap();
        prop_assert_eq!(&loaded.records, &rs);
        prop_assert_eq!(to_jsonl(&loaded.records).unwrap(), std::fs::read_to_string(&path).unwrap());
    }
}

fn write_raw(text: &str) -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    std::fs::File::create(&path).unwrap().write_all(text.as_bytes()).unwrap();
    (dir, path)
}

#[test]
fn unknown_schema_version_is_rejected() {
    let line = to_jsonl(&[record(0, 0, 1.0)]).unwrap().replace("\"schema_version\":1", "\"schema_version\":2");
    let (_d, path) = write_raw(&line);
    match load_transitions(&path) {
        Err(Error::SchemaVersion { line: 1, found: 2, expected: 1, .. }) => {}
        other => panic!("{other:?}"),
    }
    let (_d, path) = write_raw(&line.replace("\"schema_version\":2,", ""));
    assert!(matches!(load_transitions(&path), Err(Error::Schema { ref field, .. }) if field == "schema_version"));
}

#[test]
fn field_errors_name_the_path() {
    let good = to_jsonl(&[record(0, 0, 1.0), record(0, 1, 1.0)]).unwrap();
    let bad = good.replacen("\"name\":\"ask\"", "\"name\":7", 2);
    let (_d, path) = write_raw(&bad);
    let err = load_transitions(&path).unwrap_err();
    match &err {
        Error::Schema { line: 1, field, .. } => assert_eq!(field, "action.env_action.name"),
        other => panic!("{other:?}"),
    }
    let bad = good.replacen("\"step_index\":1", "\"step_index\":1,\"extra\":0", 1);
    let (_d, path) = write_raw(&bad);
    assert!(matches!(load_transitions(&path), Err(Error::Schema { line: 2, .. })));
}

#[test]
fn truncated_final_line_is_skipped_and_counted() {
    let full = to_jsonl(&[record(0, 0, 1.0), record(0, 1, 1.0), record(0, 2, 1.0)]).unwrap();
    let cut = &full[..full.len() - 25];
    let (_d, path) = write_raw(cut);
    let loaded = load_transitions(&path).unwrap();
    assert_eq!(loaded.records.len(), 2);
    assert_eq!(loaded.skipped, 1);
    let (buffer, skipped) = load_buffer(&path, 10, 0.1).unwrap();
    assert_eq!((buffer.len(), skipped), (2, 1));

    // a corrupt line in the middle is not truncation
    let lines: Vec<&str> = full.lines().collect();
    let corrupt = format!("{}\n{}\n{}\n", lines[0], &lines[1][..20], lines[2]);
    let (_d, path) = write_raw(&corrupt);
    assert!(matches!(load_transitions(&path), Err(Error::Schema { line: 2, .. })));
}

#[test]
fn duplicate_keys_are_rejected() {
    let (_d, path) = write_raw(&to_jsonl(&[record(3, 1, 1.0), record(3, 1, 2.0)]).unwrap());
    assert!(matches!(load_transitions(&path), Err(Error::Duplicate { episode_id: 3, step_index: 1 })));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    let mut log = TransitionLog::open(&path).unwrap();
    log.persist(&record(3, 1, 1.0)).unwrap();
    drop(log);
    let mut log = TransitionLog::open(&path).unwrap();
    assert_eq!(log.len(), 1);
    assert!(matches!(log.persist(&record(3, 1, 1.0)), Err(Error::Duplicate { .. })));
    log.persist(&record(3, 2, 1.0)).unwrap();
    assert_eq!(load_transitions(&path).unwrap().records.len(), 2);
}

#[test]
fn invalid_records_are_not_persisted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    let mut log = TransitionLog::open(&path).unwrap();
    assert!(log.persist(&record(0, 0, -1.0)).is_err());
    assert!(log.persist(&record(0, 0, f64::NAN)).is_err());
    let mut r = record(0, 0, 1.0);
    r.context.pop();
    assert!(log.persist(&r).is_err());
    assert!(log.is_empty());
}

#[test]
fn buffer_keeps_priorities_and_updates_apply() {
    let mut rs = vec![record(0, 0, 0.0), record(0, 1, 2.0), record(1, 0, 6.0)];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    write_jsonl(&path, &rs).unwrap();
    let (buffer, _) = load_buffer(&path, 10, 1.0).unwrap();
    assert_eq!(buffer.priorities().collect::<Vec<_>>(), vec![0.0, 2.0, 6.0]);
    assert_eq!(buffer.sampling_probs().unwrap(), vec![0.0, 0.25, 0.75]);

    apply_priorities(&mut rs, &[PriorityUpdate { episode_id: 0, step_index: 0, priority: 4.0 }]).unwrap();
    assert_eq!(rs[0].priority, 4.0);
    assert!(apply_priorities(&mut rs, &[PriorityUpdate { episode_id: 9, step_index: 0, priority: 1.0 }]).is_err());
    assert!(apply_priorities(&mut rs, &[PriorityUpdate { episode_id: 0, step_index: 0, priority: -1.0 }]).is_err());
}

#[test]
fn pair_files_reject_other_versions() {
    let (_d, path) = write_raw("{\"schema_version\":9,\"kind\":\"critic_L1\"}\n");
    assert!(matches!(load_pairs(&path), Err(Error::SchemaVersion { found: 9, .. })));
}
