mod common;

use std::collections::BTreeSet;

use common::*;
use nlac_gateway::parse::parse_action_target;
use nlac_gateway::{ChatResponse, ParsedEvaluation, RecordingTransport, ReplayTransport, ScriptedTransport};
use nlac_pipeline::{
    emit_training_pairs, load_pairs, load_transitions, policy_pair, to_jsonl, write_jsonl, EmitConfig, Error, PairKind,
};

fn schema() -> nlac_gateway::ActionSchema {
    nlac_envs::twenty_q::action_schema()
}

/// Rewrites the committed fixtures from the rule stub. Run with
/// `NLAC_BLESS=1 cargo test -p nlac-pipeline --test emit bless`.
#[test]
fn bless() {
    if std::env::var_os("NLAC_BLESS").is_none() {
        return;
    }
    let records = fixture_transitions();
    write_jsonl(&fixture("transitions.jsonl"), &records).unwrap();
    let cassette = fixture("cassette.jsonl");
    let _ = std::fs::remove_file(&cassette);
    let gw = gateway(RecordingTransport::new(RuleStub::default(), &cassette).unwrap());
    let config = EmitConfig { workers: 1, ..golden_config() };
    let out = emit_training_pairs(&buffer(&records, GOLDEN_ALPHA), &gw, &schema(), &config).unwrap();
    write_jsonl(&fixture("pairs.golden.jsonl"), &out.pairs).unwrap();
}

#[test]
fn recorded_fixture_reproduces_golden_pairs() {
    let records = load_transitions(&fixture("transitions.jsonl")).unwrap().records;
    let gw = gateway(ReplayTransport::from_path(&fixture("cassette.jsonl")).unwrap());
    let out = emit_training_pairs(&buffer(&records, GOLDEN_ALPHA), &gw, &schema(), &golden_config()).unwrap();
    assert!(out.skipped.is_empty(), "{:?}", out.skipped);
    let golden = std::fs::read_to_string(fixture("pairs.golden.jsonl")).unwrap();
    assert_eq!(to_jsonl(&out.pairs).unwrap(), golden);

    let kinds: BTreeSet<PairKind> = out.pairs.iter().map(|p| p.kind).collect();
    assert_eq!(kinds.len(), 2);
    assert!(out.pairs.iter().any(|p| p.provenance.correction_applied));
    assert!(out.pairs.iter().any(|p| !p.provenance.correction_applied));
    assert_eq!(load_pairs(&fixture("pairs.golden.jsonl")).unwrap().records, out.pairs);
}

#[test]
fn fixture_transitions_are_current() {
    let on_disk = load_transitions(&fixture("transitions.jsonl")).unwrap().records;
    assert_eq!(on_disk, fixture_transitions());
}

#[test]
fn every_target_reparses() {
    let records = fixture_transitions();
    let gw = gateway(RuleStub::default());
    let config = EmitConfig { batch_size: 64, l2_ratio: 1.0, ..golden_config() };
    let out = emit_training_pairs(&buffer(&records, 0.0), &gw, &schema(), &config).unwrap();
    assert_eq!(out.pairs.len(), 128);
    for p in &out.pairs {
        match p.kind {
            PairKind::CriticL1 => {
                let e = ParsedEvaluation::parse_target(&p.target_text).unwrap();
                assert_eq!(e.corrected_thought.is_some(), p.provenance.correction_applied);
                assert_eq!(p.context.last().unwrap().content, nlac_gateway::templates::Template::CriticEval.text());
            }
            PairKind::PolicyL2 => {
                let (thinking, action) = parse_action_target(&p.target_text).unwrap();
                assert_eq!(thinking.is_some(), p.provenance.correction_applied);
                schema().validate(&action).unwrap();
                let r = records.iter().find(|r| r.key() == (p.provenance.episode_id, p.provenance.step_index)).unwrap();
                assert_eq!(p.context, r.context);
            }
        }
    }
}

#[test]
fn emission_is_idempotent_and_independent_of_worker_count() {
    let records = fixture_transitions();
    let run = |workers| {
        let gw = gateway(RuleStub::default());
        let config = EmitConfig { workers, batch_size: 40, ..golden_config() };
        to_jsonl(&emit_training_pairs(&buffer(&records, 0.5), &gw, &schema(), &config).unwrap().pairs).unwrap()
    };
    let one = run(1);
    assert_eq!(one, run(1));
    assert_eq!(one, run(8));
}

#[test]
fn empty_buffer_emits_nothing() {
    let gw = gateway(ScriptedTransport::new([]));
    let out = emit_training_pairs(&buffer(&[], 1.0), &gw, &schema(), &golden_config()).unwrap();
    assert!(out.pairs.is_empty() && out.skipped.is_empty());
    assert_eq!(out.draws, 0);
}

#[test]
fn zero_priority_is_never_sampled_with_alpha_one() {
    let records = fixture_transitions();
    assert_eq!(records[0].priority, 0.0);
    let gw = gateway(RuleStub::default());
    let config = EmitConfig { batch_size: 500, l2_ratio: 0.0, ..golden_config() };
    let out = emit_training_pairs(&buffer(&records, 1.0), &gw, &schema(), &config).unwrap();
    assert_eq!(out.pairs.len(), 500);
    assert!(out.pairs.iter().all(|p| p.provenance.step_index != 0));
    assert_eq!(out.transitions, records.len() - 1);
}

#[test]
fn failed_transitions_are_skipped_with_a_reason() {
    let records = fixture_transitions();
    let terminal = records.last().unwrap();
    let stub = || RuleStub { fail_target_on: Some("Final score".into()) };
    let config = EmitConfig { batch_size: 200, l2_ratio: 0.0, max_failure_rate: 0.5, ..golden_config() };
    let out = emit_training_pairs(&buffer(&records, 0.0), &gateway(stub()), &schema(), &config).unwrap();
    assert_eq!(out.skipped.len(), 1);
    let skip = &out.skipped[0];
    assert_eq!((skip.episode_id, skip.step_index, skip.kind), (terminal.episode_id, terminal.step_index, PairKind::CriticL1));
    assert!(skip.reason.contains("missing_section") || skip.reason.contains("Future"), "{}", skip.reason);
    assert!(out.pairs.iter().all(|p| p.provenance.step_index != terminal.step_index));

    let strict = EmitConfig { max_failure_rate: 0.0, ..config };
    assert!(matches!(
        emit_training_pairs(&buffer(&records, 0.0), &gateway(stub()), &schema(), &strict),
        Err(Error::FailureRate { failed: 1, .. })
    ));
}

#[test]
fn optimal_critique_copies_the_sampled_action() {
    let records = fixture_transitions();
    let action = "Thought:\nAsk about size.\nAction:\n{\"name\": \"ask\", \"arguments\": {\"question\": \"Is it big?\"}}";
    let critique = "Future:\nI learn its size.\nOptimality:\nYes.";
    let transport = std::sync::Arc::new(ScriptedTransport::new([ChatResponse::text(action), ChatResponse::text(critique)]));
    let gw = gateway(transport.clone());
    let pair = policy_pair(&records[2], &gw, &schema(), 1, 3).unwrap();
    assert_eq!(transport.requests().len(), 2);
    assert_eq!(pair.target_text, "Thought:\nAsk about size.\nAction:\n{\"name\":\"ask\",\"arguments\":{\"question\":\"Is it big?\"}}");
    assert_eq!((pair.provenance.attempt, pair.provenance.correction_applied), (0, false));
}

#[test]
fn refinement_rounds_are_recorded() {
    let records = fixture_transitions();
    let no = "Future:\nI waste a turn.\nOptimality:\nNo. Ask about the category.";
    let yes = "Future:\nI narrow it down.\nOptimality:\nYes.";
    let act = |q: &str| format!("Thought:\nTry.\nAction:\n{{\"name\": \"ask\", \"arguments\": {{\"question\": \"{q}\"}}}}");
    let replies = [act("Is it red?"), no.into(), act("Is it big?"), no.into(), act("Is it furniture?"), yes.into()];
    let transport = std::sync::Arc::new(ScriptedTransport::new(replies.map(ChatResponse::text)));
    let gw = gateway(transport.clone());
    let pair = policy_pair(&records[1], &gw, &schema(), 1, 3).unwrap();
    assert_eq!(pair.provenance.attempt, 2);
    assert!(pair.target_text.contains("Is it furniture?"));
    assert_eq!(transport.remaining(), 0);
    // the second refinement prompt shows both earlier attempts
    let refine = &transport.requests()[4];
    for q in ["Is it red?", "Is it big?"] {
        assert!(refine.messages.iter().any(|m| m.content.contains(q)));
    }
}

#[test]
fn bad_config_is_rejected() {
    let gw = gateway(RuleStub::default());
    let records = fixture_transitions();
    for bad in [
        EmitConfig { l2_ratio: 1.5, ..EmitConfig::default() },
        EmitConfig { k: 0, ..EmitConfig::default() },
        EmitConfig { workers: 0, ..EmitConfig::default() },
    ] {
        assert!(matches!(emit_training_pairs(&buffer(&records, 1.0), &gw, &schema(), &bad), Err(Error::Config(_))));
    }
}
