mod common;

use fluxcompose::bundled;
use fluxcompose::composer::MessageSink;
use fluxcompose::scenario::{standard_env, trace_resources, TraceConfig};
use fluxcompose::{compose, execute, CompositionRequest, SearchConfig, Term};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Executing a composed workflow visits the plan's steps in order, ends in
    /// a state satisfying the goal, and is deterministic.
    #[test]
    fn execution_agrees_with_plan(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let roster = common::roster(&mut r, 60, 10);
        let event = common::random_event(&mut r, &roster);
        let Ok(ranked) = trace_resources(&roster, &event, &TraceConfig::default()) else {
            return Ok(());
        };
        let g = bundled::taxonomy().unwrap();
        let reg = bundled::registry(&g).unwrap();
        let top = &ranked[0];
        let req = CompositionRequest {
            have: vec![
                ("Profession".into(), Term::constant(top.profession.clone())),
                ("Specialization".into(), Term::constant(top.specialization_or_general())),
                ("Message".into(), Term::constant("help")),
            ],
            want: vec!["ConfirmSend".into()],
            world_facts: vec![Term::compound(
                "availableRole",
                vec![Term::constant(top.profession.clone()), Term::constant(top.specialization_or_general())],
            )],
        };
        let w = compose(&req, &reg, &g, &SearchConfig::default()).unwrap();
        let run = || {
            let mut env = standard_env(&ranked, MessageSink::new());
            let t = execute(&w, &mut env).unwrap();
            (t, env.sink.messages().to_vec())
        };
        let (t1, m1) = run();
        let (t2, m2) = run();
        prop_assert_eq!(&t1, &t2);
        prop_assert_eq!(&m1, &m2);
        let visited: Vec<&str> = t1.records.iter().map(|rec| rec.service.as_str()).collect();
        let planned: Vec<&str> = w.plan.actions().map(|a| a.name.as_str()).collect();
        prop_assert_eq!(visited, planned);
        prop_assert!(w.problem.goal_satisfied(&t1.state));
        prop_assert!(t1.state.placeholder_ids().is_empty());
        prop_assert_eq!(m1.len(), 1);
        prop_assert_eq!(&m1[0].recipient, &top.name);
    }
}
