use std::collections::BTreeMap;

use sigrt_core::lists::CondOutcome;
use sigrt_core::model::{ActorId, ListId};
use sigrt_core::{ClassPair, Consistency, Error, FactId, Payload, Relevance, Runtime};

fn cls(g: &str) -> ClassPair {
    ClassPair::generic_only(g)
}

fn claim(rt: &mut Runtime, list: ListId, actor: ActorId) -> sigrt_core::ClaimToken {
    rt.try_claim(list, actor).unwrap().expect("list is free")
}

#[test]
fn append_and_read_back() {
    let mut rt = Runtime::new();
    let a = rt.new_actor();
    let l = rt.create_list(cls("store_opened"), None, &[]).unwrap();
    assert_eq!(rt.list(l).unwrap().entry_count, 0);
    let t = claim(&mut rt, l, a);
    let first = rt.append_entry(l, Payload::new().with("n", 1), &t).unwrap();
    assert_eq!(rt.list(l).unwrap().entry_count, 1);
    assert_eq!(rt.list(l).unwrap().latest, Some(first));
    rt.append_entry(l, Payload::new().with("n", 2), &t).unwrap();
    rt.append_entry(l, Payload::new().with("n", 3), &t).unwrap();
    let times: Vec<u64> =
        rt.entries(l).unwrap().iter().map(|f| rt.description().fact(*f).unwrap().set_time).collect();
    assert!(times.windows(2).all(|w| w[0] < w[1]));
    for f in rt.entries(l).unwrap() {
        assert_eq!(rt.description().fact(f).unwrap().class.generic(), "store_opened");
    }
}

#[test]
fn append_without_claim() {
    let mut rt = Runtime::new();
    let a = rt.new_actor();
    let l = rt.create_list(cls("x"), None, &[]).unwrap();
    let t = claim(&mut rt, l, a);
    rt.release(&t, a).unwrap();
    assert!(matches!(rt.append_entry(l, Payload::new(), &t), Err(Error::StaleToken(_))));
    let other = rt.create_list(cls("y"), None, &[]).unwrap();
    let t2 = claim(&mut rt, other, a);
    assert_eq!(rt.append_entry(l, Payload::new(), &t2), Err(Error::NotClaimed(l)));
}

#[test]
fn child_list_under_entry_and_unknown_parent() {
    let mut rt = Runtime::new();
    let a = rt.new_actor();
    let stores = rt.create_list(cls("store"), None, &[]).unwrap();
    let t = claim(&mut rt, stores, a);
    let store_a = rt.append_entry(stores, Payload::new().with("name", "A"), &t).unwrap();
    let products = rt.create_list(cls("product"), Some(store_a), std::slice::from_ref(&t)).unwrap();
    assert_eq!(rt.list(products).unwrap().owner(), store_a);
    assert_eq!(rt.entry_meta(store_a).unwrap().child_lists, vec![products]);
    assert!(rt.check_hierarchy().is_ok());
    assert_eq!(rt.create_list(cls("z"), Some(FactId(999)), &[]), Err(Error::UnknownFact(FactId(999))));
}

#[test]
fn latest_entry_cases() {
    let mut rt = Runtime::new();
    let a = rt.new_actor();
    let l = rt.create_list(cls("x"), None, &[]).unwrap();
    assert_eq!(rt.latest_entry(l, a), Err(Error::EmptyList(l)));
    let t = claim(&mut rt, l, a);
    let e = rt.append_entry(l, Payload::new(), &t).unwrap();
    assert_eq!(rt.latest_entry(l, a).unwrap().fact, e);
}

fn latest_cost(n: usize) -> u64 {
    let mut rt = Runtime::new();
    let a = rt.new_actor();
    let l = rt.create_list(cls("x"), None, &[]).unwrap();
    let t = claim(&mut rt, l, a);
    for i in 0..n {
        rt.append_entry(l, Payload::new().with("i", i as i64), &t).unwrap();
    }
    let before = rt.description().access_count();
    let p = rt.latest_entry(l, a).unwrap();
    let cost = rt.description().access_count() - before;
    rt.unpin(p.pin).unwrap();
    cost
}

#[test]
fn latest_entry_cost_is_independent_of_length() {
    let one = latest_cost(1);
    assert_eq!(one, latest_cost(1_000));
    assert_eq!(one, latest_cost(100_000));
}

#[test]
fn latest_k_cases() {
    let mut rt = Runtime::new();
    let a = rt.new_actor();
    let l = rt.create_list_windowed(cls("x"), None, &[], 3).unwrap();
    let t = claim(&mut rt, l, a);
    let e1 = rt.append_entry(l, Payload::new().with("n", 1), &t).unwrap();
    let e2 = rt.append_entry(l, Payload::new().with("n", 2), &t).unwrap();
    let facts = |v: Vec<sigrt_core::lists::Pinned>| v.into_iter().map(|p| p.fact).collect::<Vec<_>>();
    assert_eq!(facts(rt.latest_k(l, 5, a).unwrap()), vec![e2, e1]);
    let e3 = rt.append_entry(l, Payload::new().with("n", 3), &t).unwrap();
    assert_eq!(facts(rt.latest_k(l, 2, a).unwrap()), vec![e3, e2]);
    rt.bypass(l, e2, &t).unwrap();
    assert_eq!(facts(rt.latest_k(l, 2, a).unwrap()), vec![e3, e1]);
    assert_eq!(rt.entries(l).unwrap(), vec![e1, e3]);
}

#[test]
fn annotate_and_bypass() {
    let mut rt = Runtime::new();
    let a = rt.new_actor();
    let l = rt.create_list(cls("store"), None, &[]).unwrap();
    let m = rt.create_list(cls("other"), None, &[]).unwrap();
    let t = claim(&mut rt, l, a);
    let tm = claim(&mut rt, m, a);
    let e = rt.append_entry(l, Payload::new(), &t).unwrap();
    let pin = rt.pin(e, a).unwrap();
    let e2 = rt.append_entry(l, Payload::new(), &t).unwrap();
    rt.annotate(l, e, ClassPair::new("closed", "t"), &t).unwrap();
    assert!(rt.entry_meta(e).unwrap().annotations.contains(&ClassPair::new("closed", "t")));
    assert_eq!(rt.bypass(m, e, &tm), Err(Error::UnknownEntry(m, e)));
    rt.bypass(l, e, &t).unwrap();
    assert_eq!(rt.entries(l).unwrap(), vec![e2]);
    // a pinned reader can still read the bypassed entry
    assert!(rt.description().fact(e).is_ok());
    rt.unpin(pin).unwrap();
    assert!(rt.reclaim_table().is_reclaimed(e));
}

#[test]
fn seat_reservation() {
    let mut rt = Runtime::new();
    let (alice, bob) = (rt.new_actor(), rt.new_actor());
    let seat = rt.create_list(cls("seat"), None, &[]).unwrap();
    let unreserved =
        |f: Option<&sigrt_core::Fact>| f.is_none_or(|f| f.payload.get("state") != Some(&"reserved".into()));

    let t = claim(&mut rt, seat, alice);
    let out = rt
        .conditional_append(seat, Payload::new().with("state", "reserved").with("by", "alice"), unreserved, &t)
        .unwrap();
    let CondOutcome::Appended(first) = out else { panic!("expected append") };
    rt.release(&t, alice).unwrap();

    let t = claim(&mut rt, seat, bob);
    let out = rt
        .conditional_append(seat, Payload::new().with("state", "reserved").with("by", "bob"), unreserved, &t)
        .unwrap();
    assert_eq!(out, CondOutcome::Refused(Some(first)));
    assert_eq!(rt.description().fact(first).unwrap().payload.get("by"), Some(&"alice".into()));
}

#[test]
fn vacuous_guard_on_empty_list() {
    let mut rt = Runtime::new();
    let a = rt.new_actor();
    let l = rt.create_list(cls("x"), None, &[]).unwrap();
    let t = claim(&mut rt, l, a);
    let out = rt.conditional_append(l, Payload::new(), |prev| prev.is_none(), &t).unwrap();
    assert!(matches!(out, CondOutcome::Appended(_)));
}

fn elevator() -> (Runtime, ActorId, ListId, ListId, ListId, u32) {
    let mut rt = Runtime::new();
    let a = rt.new_actor();
    let el = rt.create_list_windowed(cls("elevator"), None, &[], 2).unwrap();
    let fl = rt.create_list_windowed(cls("floor"), None, &[], 2).unwrap();
    let gl = rt.create_list(cls("consistent"), None, &[]).unwrap();
    let g = rt.create_group(gl, &[el, fl], Consistency::EqualField("phase".into())).unwrap();
    (rt, a, el, fl, gl, g)
}

#[test]
fn group_commit_elevator() {
    let (mut rt, a, el, fl, gl, g) = elevator();
    assert_eq!(rt.read_consistent(g, a).map(|r| r.group_entry), Err(Error::EmptyList(gl)));
    let te = claim(&mut rt, el, a);
    let tf = claim(&mut rt, fl, a);
    let tg = claim(&mut rt, gl, a);
    let boarded = rt.append_entry(el, Payload::new().with("status", "boarded").with("phase", 1), &te).unwrap();
    let present = rt.append_entry(fl, Payload::new().with("status", "present").with("phase", 0), &tf).unwrap();
    let tuple = BTreeMap::from([(el, boarded), (fl, present)]);
    assert_eq!(rt.group_commit(g, &tuple, &tg), Err(Error::InconsistentTuple));
    let departed = rt.append_entry(fl, Payload::new().with("status", "departed").with("phase", 1), &tf).unwrap();
    let tuple = BTreeMap::from([(el, boarded), (fl, departed)]);
    let ge = rt.group_commit(g, &tuple, &tg).unwrap();
    let read = rt.read_consistent(g, a).unwrap();
    assert_eq!(read.group_entry, ge);
    assert_eq!(read.entries, tuple);
    assert!(rt.group_consistent(g, &read.entries).unwrap());
}

#[test]
fn single_member_group_always_consistent() {
    let mut rt = Runtime::new();
    let a = rt.new_actor();
    let el = rt.create_list(cls("elevator"), None, &[]).unwrap();
    let gl = rt.create_list(cls("g"), None, &[]).unwrap();
    let g = rt.create_group(gl, &[el], Consistency::EqualField("phase".into())).unwrap();
    let te = claim(&mut rt, el, a);
    let tg = claim(&mut rt, gl, a);
    let e = rt.append_entry(el, Payload::new().with("phase", 7), &te).unwrap();
    assert!(rt.group_commit(g, &BTreeMap::from([(el, e)]), &tg).is_ok());
}

#[test]
fn derive_squares() {
    let mut rt = Runtime::new();
    let a = rt.new_actor();
    let src = rt.create_list_windowed(cls("v"), None, &[], 3).unwrap();
    let dst = rt.create_list_windowed(cls("sq"), None, &[], 3).unwrap();
    let d = rt.register_derivation(src, dst, Relevance::All, a).unwrap();
    let ts = claim(&mut rt, src, a);
    for v in [1, 2, 3] {
        rt.append_entry(src, Payload::new().with("v", v), &ts).unwrap();
    }
    let td = claim(&mut rt, dst, a);
    rt.derive_list(
        d,
        |p| {
            let v = p.get("v").unwrap().as_int().unwrap();
            Payload::new().with("v", v * v)
        },
        &td,
    )
    .unwrap();
    let got: Vec<i64> = rt
        .entries(dst)
        .unwrap()
        .iter()
        .map(|f| rt.description().fact(*f).unwrap().payload.get("v").unwrap().as_int().unwrap())
        .collect();
    assert_eq!(got, vec![1, 4, 9]);
    assert_eq!(rt.derivation(d).unwrap().recorded, vec![0, 1, 2]);
}

#[test]
fn derived_append_out_of_order() {
    let mut rt = Runtime::new();
    let (w1, w2) = (rt.new_actor(), rt.new_actor());
    let src = rt.create_list_windowed(cls("v"), None, &[], 4).unwrap();
    let dst = rt.create_list_windowed(cls("w"), None, &[], 4).unwrap();
    let d = rt.register_derivation(src, dst, Relevance::All, w1).unwrap();
    let ts = claim(&mut rt, src, w1);
    for v in 0..4 {
        rt.append_entry(src, Payload::new().with("v", v), &ts).unwrap();
    }
    rt.release(&ts, w1).unwrap();
    let mut taken = vec![];
    for _ in 0..4 {
        taken.push(rt.derivation_take(d, w2).unwrap().unwrap());
    }
    let td = claim(&mut rt, dst, w2);
    rt.derivation_put(d, taken[0].index, Payload::new(), &td).unwrap();
    rt.derivation_put(d, taken[1].index, Payload::new(), &td).unwrap();
    assert_eq!(
        rt.derivation_put(d, taken[3].index, Payload::new(), &td),
        Err(Error::OrderDestroyed { expected: 2, got: 3 })
    );
}

#[test]
fn relevance_filters_source() {
    let mut rt = Runtime::new();
    let a = rt.new_actor();
    let src = rt.create_list_windowed(cls("v"), None, &[], 4).unwrap();
    let dst = rt.create_list_windowed(cls("w"), None, &[], 4).unwrap();
    let d = rt
        .register_derivation(src, dst, Relevance::FieldEquals("keep".into(), 1.into()), a)
        .unwrap();
    let ts = claim(&mut rt, src, a);
    for k in [1, 0, 1, 0] {
        rt.append_entry(src, Payload::new().with("keep", k), &ts).unwrap();
    }
    let td = claim(&mut rt, dst, a);
    rt.derive_list(d, |p| p.clone(), &td).unwrap();
    assert_eq!(rt.derivation(d).unwrap().recorded, vec![0, 2]);
}

#[test]
fn dump_format() {
    let mut rt = Runtime::new();
    let a = rt.new_actor();
    let l = rt.create_list(cls("seat"), None, &[]).unwrap();
    let t = claim(&mut rt, l, a);
    let e = rt.append_entry(l, Payload::new().with("state", "free"), &t).unwrap();
    let dump = rt.dump_list(l).unwrap();
    let mut lines = dump.lines();
    assert_eq!(lines.next(), Some("list L0 class seat entries 1"));
    let t_set = rt.description().fact(e).unwrap().set_time;
    assert_eq!(lines.next().unwrap(), format!("0, {e}, {t_set}, false, {{state=\"free\"}}"));
}
