use std::collections::BTreeSet;
use std::fmt::Write as _;

use proptest::prelude::*;
use sigrt_core::explorer::{bundled, explore, explore_with, multinomial, replay, Anomaly, ExploreError, Mode, Schedule, Script};
use sigrt_core::runtime::Enforcement;

fn exhaustive(name: &str, e: Enforcement) -> Vec<sigrt_core::explorer::Outcome> {
    explore(&bundled(name).unwrap(), Mode::Exhaustive, e).unwrap()
}

fn count(outs: &[sigrt_core::explorer::Outcome], a: Anomaly) -> usize {
    outs.iter().filter(|o| o.anomalies.contains(&a)).count()
}

#[test]
fn micro_needs_guarded_writes() {
    let on = exhaustive("micro", Enforcement::on());
    assert!(on.iter().all(|o| o.is_clean()));
    assert!(on.iter().all(|o| o.writes.values().sum::<u32>() == 1));
    let off = exhaustive("micro", Enforcement::off());
    assert!(count(&off, Anomaly::Mutilation) + count(&off, Anomaly::Contradiction) >= 1);
}

#[test]
fn seats_reserved_exactly_once() {
    let on = exhaustive("seats", Enforcement::on());
    assert!(!on.is_empty());
    for o in &on {
        assert_eq!(o.writes.values().sum::<u32>(), 1, "{}", o.schedule);
        let seat = &o.lists["seat"];
        let reserved = seat.iter().filter(|p| p.get("state") == Some(&"reserved".into())).count();
        assert_eq!(reserved, 1, "{}", o.schedule);
    }
    let off = exhaustive("seats", Enforcement::off());
    assert!(off.iter().any(|o| !o.is_clean()));
}

#[test]
fn derivation_order_separation() {
    let on = exhaustive("derivation", Enforcement::on());
    for o in &on {
        assert!(o.is_clean());
        assert_eq!(o.derived["D"], [0, 1, 2, 3], "{}", o.schedule);
    }
    let off = exhaustive("derivation", Enforcement { order_preservation: false, ..Enforcement::on() });
    assert!(count(&off, Anomaly::OrderDestroyed) >= 1);
    for o in off.iter().filter(|o| o.anomalies.contains(&Anomaly::OrderDestroyed)) {
        let d = &o.derived["D"];
        assert!(d.windows(2).any(|w| w[0] > w[1]), "flagged but ordered: {d:?}");
    }
}

#[test]
fn transfer_deadlock_separation() {
    let on = exhaustive("transfer", Enforcement::on());
    assert_eq!(count(&on, Anomaly::Deadlock), 0);
    for o in &on {
        assert_eq!(o.lists["L1"].len(), 2, "{}", o.schedule);
        assert_eq!(o.lists["L2"].len(), 2, "{}", o.schedule);
    }
    let off = exhaustive("transfer", Enforcement { canonical_order: false, ..Enforcement::on() });
    assert!(count(&off, Anomaly::Deadlock) >= 1);
    // the refused claimer aborts, so one copy is missing
    for o in off.iter().filter(|o| o.anomalies.contains(&Anomaly::Deadlock)) {
        assert!(o.lists["L1"].len() + o.lists["L2"].len() < 4, "{}", o.schedule);
    }
}

#[test]
fn elevator_group_reads_are_consistent() {
    for e in [Enforcement::on(), Enforcement::off()] {
        assert_eq!(count(&exhaustive("elevator_group", e), Anomaly::Contradiction), 0);
        assert!(count(&exhaustive("elevator_direct", e), Anomaly::Contradiction) >= 1);
    }
}

#[test]
fn pipeline_never_reclaims_early() {
    let outs = exhaustive("pipeline", Enforcement::on());
    assert_eq!(outs.len() as u128, multinomial(&[4, 4, 4]).unwrap());
    assert_eq!(count(&outs, Anomaly::PrematureReclaim), 0);
}

#[test]
fn replay_reproduces_every_outcome() {
    for name in ["micro", "seats", "derivation", "transfer"] {
        let s = bundled(name).unwrap();
        for o in explore(&s, Mode::Exhaustive, Enforcement::on()).unwrap() {
            let text = o.schedule.to_string();
            let parsed: Schedule = text.parse().unwrap();
            let a = replay(&s, &parsed, Enforcement::on()).unwrap();
            let b = replay(&s, &parsed, Enforcement::on()).unwrap();
            assert_eq!(a, o);
            assert_eq!(a, b);
        }
    }
}

#[test]
fn invalid_schedules() {
    let s = bundled("micro").unwrap();
    for bad in ["w3.0", "w1.1 w1.0 w2.0 w2.1", "w1.0", ""] {
        let sched: Schedule = bad.parse().unwrap();
        assert!(matches!(replay(&s, &sched, Enforcement::on()), Err(ExploreError::InvalidSchedule(_))), "{bad}");
    }
    assert!("w1".parse::<Schedule>().is_err());
}

#[test]
fn sampling_is_deterministic_by_seed() {
    let s = bundled("pipeline").unwrap();
    let run = |seed| explore(&s, Mode::Sampled { n: 50, seed }, Enforcement::on()).unwrap();
    assert_eq!(run(7), run(7));
    let a: Vec<Schedule> = run(7).into_iter().map(|o| o.schedule).collect();
    let b: Vec<Schedule> = run(8).into_iter().map(|o| o.schedule).collect();
    assert_ne!(a, b);
}

#[test]
fn state_space_bound() {
    let mut text = String::from("list L window 64\n");
    for a in ["x", "y", "z"] {
        for _ in 0..6 {
            writeln!(text, "actor {a}: append L v=1").unwrap();
        }
    }
    let s = Script::parse(&text).unwrap();
    let n = multinomial(&[6, 6, 6]).unwrap();
    assert_eq!(explore(&s, Mode::Exhaustive, Enforcement::on()), Err(ExploreError::StateSpaceTooLarge(n)));
    assert_eq!(explore(&s, Mode::Sampled { n: 3, seed: 1 }, Enforcement::on()).unwrap().len(), 3);
}

#[test]
fn parse_errors_carry_line() {
    assert!(matches!(Script::parse("list L\nactor a: fly L\n"), Err(ExploreError::Parse { line: 2, .. })));
    let s = Script::parse("actor a: append Nope v=1\n").unwrap();
    assert!(matches!(explore(&s, Mode::Exhaustive, Enforcement::on()), Err(ExploreError::Setup(_))));
}

#[test]
fn observer_sees_every_step() {
    let s = bundled("micro").unwrap();
    let mut steps = 0;
    let outs = explore_with(&s, Mode::Sampled { n: 4, seed: 2 }, Enforcement::on(), &mut |_| steps += 1).unwrap();
    assert_eq!(steps, outs.iter().map(|o| o.schedule.0.len()).sum::<usize>());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// Unclaimed appends on a shared list never block, so every interleaving
    /// is reachable and each appears once.
    #[test]
    fn coverage_matches_multinomial(lens in prop::collection::vec(1..4usize, 1..4)) {
        let mut text = String::from("list L window 16\n");
        for (i, n) in lens.iter().enumerate() {
            for k in 0..*n {
                writeln!(text, "actor a{i}: append L v={k}").unwrap();
            }
        }
        let s = Script::parse(&text).unwrap();
        let outs = explore(&s, Mode::Exhaustive, Enforcement::on()).unwrap();
        prop_assert_eq!(outs.len() as u128, multinomial(&lens).unwrap());
        let distinct: BTreeSet<&Schedule> = outs.iter().map(|o| &o.schedule).collect();
        prop_assert_eq!(distinct.len(), outs.len());
        for o in &outs {
            let mut seen = vec![0usize; lens.len()];
            for (a, p) in &o.schedule.0 {
                let i: usize = a[1..].parse().unwrap();
                prop_assert_eq!(*p, seen[i]);
                seen[i] += 1;
            }
            prop_assert_eq!(&seen, &lens);
        }
    }
}
