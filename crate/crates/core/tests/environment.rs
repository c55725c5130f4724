mod support;

use oel_core::env::{CanonicalStart, CylinderLocation};
use oel_core::experts::{candidates, exploratory_action};
use oel_core::goal_memory::detect_events;
use oel_core::{Predicate, ScenarioConfig, Tabletop};
use support::checks::{dependency_walk, replay_traces, rng};

#[test]
fn random_walk_never_violates_dependencies() {
    let report = dependency_walk(1_000_000, 3);
    assert_eq!(report.steps, 1_000_000);
    assert_eq!(report.violations, 0);
    // the search reaches every goal, so the check is not vacuous
    assert!(report.fired.iter().all(|&n| n > 0), "fired {:?}", report.fired);
}

#[test]
fn orange_button_cannot_light_in_phase_one() {
    let report = dependency_walk(300_000, 11);
    assert_eq!(report.phase1_orange, 0);

    let table = Tabletop::new(ScenarioConfig::default_tabletop()).unwrap();
    let orange = Predicate::Lit("orange".into());
    for start in [
        CanonicalStart::Default,
        CanonicalStart::After(Predicate::Lit("green".into())),
        CanonicalStart::After(Predicate::Held),
    ] {
        let base = table.init_env(1, 0).unwrap();
        let mut env = table.teleport_to_canonical(&base, &start).unwrap();
        // park the effector on the orange button's spot and press
        env.effector = table.config().object("orange").unwrap().position;
        for a in candidates() {
            let mut probe = env.clone();
            let out = table.step(&mut probe, *a);
            assert!(out.events.iter().all(|e| e.signature.post_state().all(|(p, _)| *p != orange)));
        }
    }
}

#[test]
fn replays_are_byte_identical() {
    let (a, b) = replay_traces(20_000, 5);
    assert_eq!(a.len(), b.len());
    assert!(a == b);
    let (c, _) = replay_traces(20_000, 6);
    assert_ne!(a, c, "different action streams must give different traces");
}

#[test]
fn reported_events_agree_with_ground_truth() {
    let table = Tabletop::new(ScenarioConfig::default_tabletop()).unwrap();
    let mut r = rng(9);
    for phase in [0, 1] {
        let mut env = table.init_env(phase, 9).unwrap();
        for i in 0..100_000 {
            if i % 400 == 0 {
                env = table.init_env(phase, 9).unwrap();
            }
            let before = table.percept(&env);
            let out = table.step(&mut env, candidates()[exploratory_action(&mut r)]);
            assert_eq!(out.events, detect_events(&before, &out.percept).unwrap());
            for event in &out.events {
                for (p, value) in event.signature.post_state() {
                    assert_eq!(table.check_predicate(&env, p).unwrap(), value, "{p} after step {i}");
                }
            }
            assert_eq!(env.holding.is_some(), env.cylinder == CylinderLocation::Held);
        }
    }
}
