use proptest::prelude::*;
use sigrt_core::model::{ActorId, ListId};
use sigrt_core::reclaim::{
    CursorId, DivergenceKind, Lifecycle, PinId, ReclaimStatus, RetainReason, Source,
};
use sigrt_core::{ClaimToken, ClassPair, Error, FactId, Payload, Runtime};

fn cls(g: &str) -> ClassPair {
    ClassPair::generic_only(g)
}

fn list_with_claim(rt: &mut Runtime, a: ActorId, window: usize) -> (ListId, ClaimToken) {
    let l = rt.create_list_windowed(cls("e"), None, &[], window).unwrap();
    let t = rt.try_claim(l, a).unwrap().unwrap();
    (l, t)
}

#[test]
fn root_is_always_retained() {
    let rt = Runtime::new();
    assert_eq!(rt.reclaim_check(FactId::ROOT), Ok(ReclaimStatus::Retained(RetainReason::Root)));
}

#[test]
fn empty_description_audit() {
    let rt = Runtime::new();
    let report = rt.audit().unwrap();
    assert_eq!((report.facts_total, report.facts_live, report.facts_reclaimed), (1, 1, 0));
    assert!(report.is_clean());
    assert_eq!(report.to_string(), "facts_total 1\nfacts_live 1\nfacts_reclaimed 0\ndivergences 0\n");
}

#[test]
fn pin_keeps_a_superseded_entry() {
    let mut rt = Runtime::new();
    let a = rt.new_actor();
    let (l, t) = list_with_claim(&mut rt, a, 1);
    let e1 = rt.append_entry(l, Payload::new(), &t).unwrap();
    let p1 = rt.pin(e1, a).unwrap();
    let p2 = rt.pin(e1, a).unwrap();
    rt.append_entry(l, Payload::new(), &t).unwrap();
    assert_eq!(rt.reclaim_check(e1), Ok(ReclaimStatus::Retained(RetainReason::Users(2))));
    rt.unpin(p1).unwrap();
    assert!(!rt.reclaim_table().is_reclaimed(e1));
    rt.unpin(p2).unwrap();
    assert_eq!(rt.reclaim_check(e1), Ok(ReclaimStatus::Reclaimed));
    assert_eq!(rt.pin(e1, a), Err(Error::AlreadyReclaimed(e1)));
    assert_eq!(rt.unpin(p2), Err(Error::UnknownPin(p2.0)));
}

#[test]
fn latest_slot_overwrite_drops_one_connection() {
    let mut rt = Runtime::new();
    let a = rt.new_actor();
    let (l, t) = list_with_claim(&mut rt, a, 1);
    let e1 = rt.append_entry(l, Payload::new(), &t).unwrap();
    let pin = rt.pin(e1, a).unwrap();
    assert_eq!(rt.reclaim_table().count(e1).unwrap().connections, 1);
    rt.append_entry(l, Payload::new(), &t).unwrap();
    assert_eq!(rt.reclaim_table().count(e1).unwrap().connections, 0);
    rt.unpin(pin).unwrap();
}

#[test]
fn cross_reference_released_with_its_holder() {
    let mut rt = Runtime::new();
    let a = rt.new_actor();
    let (l, t) = list_with_claim(&mut rt, a, 1);
    let (m, tm) = list_with_claim(&mut rt, a, 1);
    let target = rt.append_entry(l, Payload::new(), &t).unwrap();
    let holder = rt.append_entry(m, Payload::new(), &tm).unwrap();
    rt.add_connection(Source::Fact(holder), target).unwrap();
    rt.append_entry(l, Payload::new(), &t).unwrap();
    assert_eq!(rt.reclaim_check(target), Ok(ReclaimStatus::Retained(RetainReason::Connections(1))));
    rt.append_entry(m, Payload::new(), &tm).unwrap();
    assert!(rt.reclaim_table().is_reclaimed(holder));
    assert!(rt.reclaim_table().is_reclaimed(target));
    assert_eq!(rt.add_connection(Source::List(l), target), Err(Error::AlreadyReclaimed(target)));
}

#[test]
fn cascade_through_a_chain() {
    let mut rt = Runtime::new();
    let a = rt.new_actor();
    let (l, t) = list_with_claim(&mut rt, a, 1);
    let fa = rt.append_entry(l, Payload::new(), &t).unwrap();
    let g1 = rt.add_gate(fa, cls("g"), std::slice::from_ref(&t)).unwrap();
    let fb = rt.extend(&[g1], cls("b"), Payload::new(), std::slice::from_ref(&t)).unwrap();
    let g2 = rt.add_gate(fb, cls("g"), std::slice::from_ref(&t)).unwrap();
    let fc = rt.extend(&[g2], cls("c"), Payload::new(), std::slice::from_ref(&t)).unwrap();
    rt.append_entry(l, Payload::new(), &t).unwrap();
    for f in [fa, fb, fc] {
        assert_eq!(rt.reclaim_check(f), Ok(ReclaimStatus::Reclaimed), "{f}");
    }
    rt.release(&t, a).unwrap();
    assert!(rt.audit().unwrap().is_clean());
}

#[test]
fn group_entry_retains_members() {
    let mut rt = Runtime::new();
    let a = rt.new_actor();
    let (el, te) = list_with_claim(&mut rt, a, 1);
    let gl = rt.create_list(cls("g"), None, &[]).unwrap();
    let tg = rt.try_claim(gl, a).unwrap().unwrap();
    let g = rt
        .create_group(gl, &[el], sigrt_core::Consistency::EqualField("phase".into()))
        .unwrap();
    let e = rt.append_entry(el, Payload::new().with("phase", 1), &te).unwrap();
    rt.group_commit(g, &[(el, e)].into_iter().collect(), &tg).unwrap();
    rt.append_entry(el, Payload::new().with("phase", 2), &te).unwrap();
    assert_eq!(rt.reclaim_check(e), Ok(ReclaimStatus::Retained(RetainReason::Connections(1))));
}

#[test]
fn lifecycle_of_a_store() {
    let mut rt = Runtime::new();
    let a = rt.new_actor();
    let (stores, t) = list_with_claim(&mut rt, a, 1);
    let store = rt.append_entry(stores, Payload::new(), &t).unwrap();
    let products = rt.create_list(cls("product"), Some(store), std::slice::from_ref(&t)).unwrap();
    assert_eq!(rt.signal_lifecycle(store, Lifecycle::Ended), Err(Error::LifecycleOrder(store)));
    rt.signal_lifecycle(store, Lifecycle::Started).unwrap();
    rt.append_entry(stores, Payload::new(), &t).unwrap();
    let reader = rt.pin(store, a).unwrap();
    rt.signal_lifecycle(store, Lifecycle::Ended).unwrap();
    assert!(!rt.reclaim_table().is_reclaimed(store));
    assert_eq!(rt.latest_entry(products, a), Err(Error::SignalEnded(products)));
    rt.unpin(reader).unwrap();
    assert!(rt.reclaim_table().is_reclaimed(store));
    assert!(rt.list(products).unwrap().is_orphaned());
    rt.release(&t, a).unwrap();
    assert!(rt.audit().unwrap().is_clean());
}

#[test]
fn cursor_cases() {
    let mut rt = Runtime::new();
    let a = rt.new_actor();
    let l = rt.create_list(cls("e"), None, &[]).unwrap();
    let c1 = rt.register_cursor(l, a).unwrap();
    let c2 = rt.register_cursor(l, a).unwrap();
    let t = rt.try_claim(l, a).unwrap().unwrap();
    let e1 = rt.append_entry(l, Payload::new(), &t).unwrap();
    assert_eq!(rt.register_cursor(l, a), Err(Error::LateCursor(l)));
    let e2 = rt.append_entry(l, Payload::new(), &t).unwrap();
    assert_eq!(rt.advance(c1), Ok(e1));
    assert_eq!(rt.advance(c1), Ok(e2));
    assert!(!rt.reclaim_table().is_reclaimed(e1), "c2 has not passed e1");
    assert_eq!(rt.advance(c1), Err(Error::NoNextEntry));
    assert_eq!(rt.advance(c2), Ok(e1));
    assert_eq!(rt.advance(c2), Ok(e2));
    assert!(rt.reclaim_table().is_reclaimed(e1));
}

#[test]
fn audit_requires_quiescence_and_catches_corruption() {
    let mut rt = Runtime::new();
    let a = rt.new_actor();
    let (l, t) = list_with_claim(&mut rt, a, 1);
    let e = rt.append_entry(l, Payload::new(), &t).unwrap();
    assert_eq!(rt.audit(), Err(Error::NotQuiescent(1)));
    rt.release(&t, a).unwrap();
    assert!(rt.audit().unwrap().is_clean());
    let mut bad = rt.clone();
    bad.raw_set_count(e, 3, 0);
    let report = bad.audit().unwrap();
    assert_eq!(report.divergences.len(), 1);
    assert_eq!(report.divergences[0].kind, DivergenceKind::Miscounted);
    assert_eq!(report.divergences[0].fact, e);
}

#[derive(Debug, Clone)]
enum CursorAct {
    Advance(usize),
    Pin(usize),
    Unpin(usize),
    Close(usize),
}

fn cursor_act() -> impl Strategy<Value = CursorAct> {
    prop_oneof![
        4 => (0..3usize).prop_map(CursorAct::Advance),
        2 => (0..4usize).prop_map(CursorAct::Pin),
        2 => (0..8usize).prop_map(CursorAct::Unpin),
        1 => (0..3usize).prop_map(CursorAct::Close),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// An entry goes exactly when every cursor has moved past it, no pin is
    /// held and it has left the latest slot.
    #[test]
    fn multi_cursor_exactness(
        p in 1..=3usize,
        len in 1..=4usize,
        acts in prop::collection::vec(cursor_act(), 0..30),
    ) {
        let mut rt = Runtime::new();
        let a = rt.new_actor();
        let l = rt.create_list(cls("e"), None, &[]).unwrap();
        let cursors: Vec<CursorId> = (0..p).map(|_| rt.register_cursor(l, a).unwrap()).collect();
        let t = rt.try_claim(l, a).unwrap().unwrap();
        let entries: Vec<FactId> =
            (0..len).map(|i| rt.append_entry(l, Payload::new().with("i", i as i64), &t).unwrap()).collect();
        rt.release(&t, a).unwrap();

        // oracle state: how far each cursor got, and whether it closed
        let mut taken = vec![0usize; p];
        let mut closed = vec![false; p];
        let mut pins: Vec<(PinId, usize)> = vec![];
        let mut gone = vec![false; len];

        for act in acts {
            match act {
                CursorAct::Advance(c) => {
                    let c = c % p;
                    let r = rt.advance(cursors[c]);
                    if closed[c] || taken[c] == len {
                        prop_assert_eq!(r, Err(Error::NoNextEntry));
                    } else {
                        prop_assert_eq!(r, Ok(entries[taken[c]]));
                        taken[c] += 1;
                    }
                }
                CursorAct::Pin(i) => {
                    let i = i % len;
                    let r = rt.pin(entries[i], a);
                    if gone[i] {
                        prop_assert_eq!(r, Err(Error::AlreadyReclaimed(entries[i])));
                    } else {
                        pins.push((r.unwrap(), i));
                    }
                }
                CursorAct::Unpin(k) => {
                    if !pins.is_empty() {
                        let (pin, _) = pins.remove(k % pins.len());
                        rt.unpin(pin).unwrap();
                    }
                }
                CursorAct::Close(c) => {
                    let c = c % p;
                    rt.close_cursor(cursors[c]).unwrap();
                    closed[c] = true;
                }
            }
            for i in 0..len {
                // a cursor that handed out entry i still holds it until the
                // next advance
                let passed = (0..p).all(|c| closed[c] || taken[c] > i + 1);
                let pinned = pins.iter().any(|(_, j)| *j == i);
                let in_slot = i == len - 1;
                let expect = passed && !pinned && !in_slot;
                prop_assert_eq!(rt.reclaim_table().is_reclaimed(entries[i]), expect, "entry {}", i);
                if expect {
                    gone[i] = true;
                }
            }
        }
        for (pin, _) in pins {
            rt.unpin(pin).unwrap();
        }
        prop_assert!(rt.audit().unwrap().is_clean());
    }
}
