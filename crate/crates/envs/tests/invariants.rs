use nlac_envs::twenty_q::DEFAULT_MAX_TURNS;
use nlac_envs::{env_reset, env_step, EnvSpec, Error, ObjectTable};
use nlac_gateway::EnvAction;
use proptest::prelude::*;
use serde_json::json;

fn action(table: &ObjectTable, kind: u8, pick: usize) -> EnvAction {
    let (name, args) = match kind % 4 {
        0 => {
            let q = table.attributes().nth(pick % table.attributes().count()).unwrap().1;
            ("ask", json!({ "question": q }))
        }
        1 => ("guess", json!({ "object": table.objects().nth(pick % table.len()).unwrap() })),
        2 => ("ask", json!({ "question": format!("Is it number {pick}?") })),
        _ => ("shout", json!({ "volume": pick })),
    };
    EnvAction { name: name.into(), arguments: args.as_object().unwrap().clone() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn twenty_q_invariants(seed in any::<u64>(), moves in prop::collection::vec((any::<u8>(), any::<usize>()), 0..30)) {
        let table = ObjectTable::bundled();
        let spec = EnvSpec::TwentyQuestions { hidden: None, max_turns: DEFAULT_MAX_TURNS };
        let mut ep = env_reset(&spec, seed).unwrap();
        let mut prev_turn = 0;
        for (k, p) in moves {
            let a = action(&table, k, p);
            if ep.state().done {
                prop_assert!(matches!(env_step(&mut ep, &a), Err(Error::EpisodeDone)));
                continue;
            }
            let s = env_step(&mut ep, &a).unwrap();
            prop_assert_eq!(s.turn, prev_turn + 1);
            prop_assert!(s.turn <= ep.horizon());
            prop_assert!(s.reward == 0.0 || (s.reward == 1.0 && s.done));
            prop_assert!(!s.violation);
            prop_assert_eq!(s.done, s.reward == 1.0 || s.turn == ep.horizon());
            prev_turn = s.turn;
        }
        prop_assert_eq!(ep.transcript().len() as u32, ep.state().turn);
    }
}
