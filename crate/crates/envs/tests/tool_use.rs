use nlac_envs::tool_use::{Database, OrderStatus};
use nlac_envs::tool_use::{Scenario, STOP_TOKEN};
use nlac_envs::{env_reset, env_step, EnvSpec, EnvState, Episode};
use nlac_gateway::EnvAction;
use serde_json::{json, Value};

fn spec(id: &str) -> EnvSpec {
    EnvSpec::ToolUse { scenario: id.into() }
}

fn call(name: &str, args: Value) -> EnvAction {
    EnvAction { name: name.into(), arguments: args.as_object().unwrap().clone() }
}

fn respond(text: &str) -> EnvAction {
    call("respond", json!({ "content": text }))
}

fn run(id: &str, actions: &[EnvAction]) -> (Episode, EnvState) {
    let mut ep = env_reset(&spec(id), 0).unwrap();
    let mut last = ep.state().clone();
    for a in actions {
        last = env_step(&mut ep, a).unwrap();
    }
    (ep, last)
}

fn find_yusuf() -> EnvAction {
    call("find_user_id_by_name_zip", json!({ "first_name": "Yusuf", "last_name": "Rossi", "zip": "19122" }))
}

fn cancel(order: &str) -> EnvAction {
    call("cancel_pending_order", json!({ "order_id": order, "reason": "no longer needed" }))
}

#[test]
fn reset_database_matches_the_scenario_file() {
    for id in Scenario::bundled_ids() {
        let path = format!("{}/data/tool_use/{id}.json", env!("CARGO_MANIFEST_DIR"));
        let raw: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        let expected: Database = serde_json::from_value(raw["db"].clone()).unwrap();
        let ep = env_reset(&spec(id), 0).unwrap();
        assert_eq!(ep.tool_use().unwrap().database(), &expected, "{id}");
        assert!(ep.state().observation.ends_with(raw["first_message"].as_str().unwrap()));
    }
}

#[test]
fn single_cancellation_solves_the_task() {
    let (ep, s) = run(
        "cancel_pending",
        &[find_yusuf(), respond("Confirm cancelling #W2378156?"), cancel("#W2378156"), respond("Done.")],
    );
    assert!(s.done);
    assert!(s.observation.contains(STOP_TOKEN));
    assert_eq!((s.reward, s.violation), (1.0, false));
    let w = ep.tool_use().unwrap();
    assert_eq!(w.database().orders["#W2378156"].status, OrderStatus::Cancelled);
    assert_eq!(w.database(), w.ground_truth());
}

#[test]
fn intermediate_rewards_are_zero() {
    let mut ep = env_reset(&spec("cancel_pending"), 0).unwrap();
    for a in [find_yusuf(), cancel("#W2378156"), respond("Anything else?")] {
        let s = env_step(&mut ep, &a).unwrap();
        assert_eq!((s.done, s.reward), (false, 0.0));
    }
}

#[test]
fn second_modification_is_a_violation() {
    let (ep, s) = run(
        "cancel_pending",
        &[find_yusuf(), cancel("#W2378156"), cancel("#W4776164"), respond("Done."), respond("Bye.")],
    );
    assert!(s.done);
    assert_eq!((s.reward, s.violation), (0.0, true));
    assert_eq!(ep.tool_use().unwrap().violations().len(), 1);
}

#[test]
fn modifying_before_authentication_is_a_violation_even_if_the_result_is_right() {
    let (ep, s) = run("cancel_pending", &[cancel("#W2378156"), respond("Done."), respond("Bye.")]);
    let w = ep.tool_use().unwrap();
    assert_eq!(w.database(), w.ground_truth());
    assert_eq!((s.reward, s.violation), (0.0, true));
}

#[test]
fn modifying_another_users_order_is_a_violation() {
    let (_, s) = run(
        "cancel_pending",
        &[find_yusuf(), cancel("#W6390527"), respond("Done."), respond("Bye.")],
    );
    assert_eq!((s.reward, s.violation), (0.0, true));
}

#[test]
fn delivered_order_must_be_refused() {
    let find_omar = call("find_user_id_by_name_zip", json!({ "first_name": "Omar", "last_name": "Anderson", "zip": "19031" }));
    let lookup = call("get_order_details", json!({ "order_id": "#W5866402" }));
    let (_, s) = run(
        "cancel_delivered",
        &[find_omar.clone(), lookup, respond("Delivered orders cannot be cancelled.")],
    );
    assert!(s.done);
    assert_eq!((s.reward, s.violation), (1.0, false));

    let attempt = call("cancel_pending_order", json!({ "order_id": "#W5866402", "reason": "ordered by mistake" }));
    let mut ep = env_reset(&spec("cancel_delivered"), 0).unwrap();
    env_step(&mut ep, &find_omar).unwrap();
    let s = env_step(&mut ep, &attempt).unwrap();
    assert!(s.observation.starts_with("Error:"), "{}", s.observation);
    assert!(s.violation);
    let s = env_step(&mut ep, &respond("Sorry.")).unwrap();
    assert_eq!((s.done, s.reward), (true, 0.0));
}

#[test]
fn item_swap_solves_the_modification_task() {
    let find_mei = call("find_user_id_by_name_zip", json!({ "first_name": "Mei", "last_name": "Kovacs", "zip": "28236" }));
    let swap = call(
        "modify_pending_order_items",
        json!({ "order_id": "#W6390527", "item_ids": ["8538875209"], "new_item_ids": ["2658930189"] }),
    );
    let (ep, s) = run("modify_items", &[find_mei, swap, respond("Swapped."), respond("Bye.")]);
    assert_eq!((s.done, s.reward, s.violation), (true, 1.0, false));
    assert!(ep.tool_use().unwrap().database().orders["#W6390527"].items.contains(&"2658930189".to_string()));
}

#[test]
fn malformed_arguments_produce_an_error_observation() {
    let mut ep = env_reset(&spec("cancel_pending"), 0).unwrap();
    let before = ep.tool_use().unwrap().database().clone();
    for bad in [
        call("cancel_pending_order", json!({ "order_id": "#W2378156" })),
        call("cancel_pending_order", json!({ "order_id": 5, "reason": "no longer needed" })),
        call("refund_everything", json!({})),
        call("cancel_pending_order", json!({ "order_id": "#W2378156", "reason": "bored" })),
    ] {
        let s = env_step(&mut ep, &bad).unwrap();
        assert!(s.observation.starts_with("Error:"), "{}", s.observation);
        assert!(!s.done);
    }
    assert_eq!(ep.tool_use().unwrap().database(), &before);
}

#[test]
fn unknown_user_is_reported() {
    let (_, s) = run(
        "cancel_pending",
        &[call("find_user_id_by_name_zip", json!({ "first_name": "Nobody", "last_name": "X", "zip": "00000" }))],
    );
    assert_eq!(s.observation, "Error: user not found");
}

#[test]
fn horizon_ends_the_episode() {
    let mut ep = env_reset(&spec("cancel_pending"), 0).unwrap();
    let lookup = call("get_order_details", json!({ "order_id": "#W2378156" }));
    let mut s = ep.state().clone();
    while !s.done {
        s = env_step(&mut ep, &lookup).unwrap();
    }
    assert_eq!(s.turn, ep.horizon());
    assert_eq!(s.reward, 0.0);
}

#[test]
fn scenario_files_load_from_paths() {
    let path = format!("{}/data/tool_use/modify_items.json", env!("CARGO_MANIFEST_DIR"));
    let ep = env_reset(&EnvSpec::ToolUse { scenario: path }, 0).unwrap();
    assert_eq!(ep.tool_use().unwrap().scenario().id, "modify_items");
    assert!(env_reset(&spec("no_such_scenario"), 0).is_err());
    let text = std::fs::read_to_string(format!("{}/data/tool_use/modify_items.json", env!("CARGO_MANIFEST_DIR"))).unwrap();
    assert!(Scenario::parse(&text.replace("\"schema_version\": 1", "\"schema_version\": 2")).is_err());
}
