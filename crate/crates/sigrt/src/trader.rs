//! A trader who opens stores, stocks products, records sales and closes the
//! stores again, all through scheduled procedures.
//!
//! `open_store` appends to the store list, which triggers `stock_store`.
//! That initiates one `add_product` per product, each of which initiates its
//! `sell` invocations. The invocation finishing a store's last piece of work
//! initiates `close_store`, which annotates and bypasses the store entry,
//! records a closure fact under it and ends its lifecycle. Every writer
//! claims on one step and writes on the next.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use sigrt_core::model::Decimal;
use sigrt_core::reclaim::{Lifecycle, PinId};
use sigrt_core::scheduler::{InvocationCtx, Policy, ProcedureDecl, Progress, RunReport, Scheduler};
use sigrt_core::{ClaimToken, ClassPair, FactId, ListId, Payload, Runtime, Scalar};

use crate::config::Config;

pub const NOTATION: &str = "\
signal trader
list store under trader
entry store field name:text
child product
annotate closed
list product under store
entry product field sku:text price:decimal
child transaction
list transaction under product
entry transaction field qty:int
fact closure under store field reason:text
";

#[derive(Debug, Default)]
struct Shop {
    stores: Vec<Option<(FactId, ListId)>>,
    store_index: BTreeMap<FactId, usize>,
    transactions: BTreeMap<(usize, usize), ListId>,
    /// Pin on each product entry and its unsold count. The pin keeps a
    /// product alive after a newer product takes the latest slot.
    selling: BTreeMap<(usize, usize), (PinId, usize)>,
    /// Outstanding `add_product` and `sell` invocations per store.
    pending: BTreeMap<usize, usize>,
}

pub struct TraderRun {
    pub rt: Runtime,
    pub report: RunReport,
    pub store_list: ListId,
    pub store_entries: Vec<FactId>,
}

/// Number of invocations a complete run performs.
pub fn expected_invocations(stores: usize, products: usize, transactions: usize) -> usize {
    stores * 3 + stores * products * (1 + transactions)
}

fn arg(ctx: &InvocationCtx, i: usize) -> usize {
    ctx.args.get(i).and_then(Scalar::as_int).unwrap_or(0) as usize
}

/// Claims `list` on one step and hands out the token on a later one, so
/// other invocations run between the claim and the write.
fn held(rt: &mut Runtime, list: ListId, ctx: &InvocationCtx) -> sigrt_core::Result<Option<ClaimToken>> {
    let mine = rt.claims().live_tokens().find(|t| t.holder == ctx.actor && t.list == list).cloned();
    if mine.is_none() {
        rt.try_claim(list, ctx.actor)?;
    }
    Ok(mine)
}

fn finish_work(shop: &mut Shop, store: usize, ctx: &mut InvocationCtx) {
    let left = shop.pending.get_mut(&store).expect("stocked store");
    *left -= 1;
    if *left == 0 {
        ctx.initiate("close_store", vec![Scalar::Int(store as i64)]);
    }
}

pub fn run(config: &Config, enforcement: sigrt_core::Enforcement) -> TraderRun {
    let (n_products, n_txns) = (config.products, config.transactions);
    let mut rt = Runtime::with_signal(ClassPair::generic_only("trader"), enforcement);
    let stores = rt.create_list(ClassPair::generic_only("store"), None, &[]).expect("root list");
    let shop = Arc::new(Mutex::new(Shop { stores: vec![None; config.stores], ..Shop::default() }));
    let mut sched = Scheduler::new(config.workers, Policy::Seeded(config.seed));
    // invocation actors drop their pins on completion
    let keeper = rt.new_actor();

    let s = shop.clone();
    let open = ProcedureDecl::new("open_store", move |rt, ctx| {
        let i = arg(ctx, 0);
        let Some(t) = held(rt, stores, ctx)? else { return Ok(Progress::Yield) };
        let e = rt.append_entry(stores, Payload::new().with("name", format!("s{i}").as_str()), &t)?;
        let products = rt.create_list(ClassPair::generic_only("product"), Some(e), std::slice::from_ref(&t))?;
        rt.signal_lifecycle(e, Lifecycle::Started)?;
        rt.release(&t, ctx.actor)?;
        let mut shop = s.lock().unwrap();
        shop.stores[i] = Some((e, products));
        shop.store_index.insert(e, i);
        Ok(Progress::Complete)
    })
    .params(&["store"]);

    let s = shop.clone();
    let stock = ProcedureDecl::new("stock_store", move |_, ctx| {
        let e = ctx.entry().expect("triggered by a store entry");
        let i = s.lock().unwrap().store_index[&e];
        s.lock().unwrap().pending.insert(i, n_products * (1 + n_txns));
        if n_products == 0 {
            ctx.initiate("close_store", vec![Scalar::Int(i as i64)]);
        }
        for p in 0..n_products {
            ctx.initiate("add_product", vec![Scalar::Int(i as i64), Scalar::Int(p as i64)]);
        }
        Ok(Progress::Complete)
    })
    .on_list(stores);

    let s = shop.clone();
    let add = ProcedureDecl::new("add_product", move |rt, ctx| {
        let (i, p) = (arg(ctx, 0), arg(ctx, 1));
        let products = s.lock().unwrap().stores[i].expect("opened").1;
        let Some(t) = held(rt, products, ctx)? else { return Ok(Progress::Yield) };
        let price = Decimal { units: 250 + 100 * p as i64, scale: 2 };
        let e = rt.append_entry(
            products,
            Payload::new().with("sku", format!("s{i}p{p}").as_str()).with("price", price),
            &t,
        )?;
        let txns = rt.create_list(ClassPair::generic_only("transaction"), Some(e), std::slice::from_ref(&t))?;
        rt.release(&t, ctx.actor)?;
        let mut shop = s.lock().unwrap();
        shop.transactions.insert((i, p), txns);
        if n_txns > 0 {
            shop.selling.insert((i, p), (rt.pin(e, keeper)?, n_txns));
        }
        for n in 0..n_txns {
            ctx.initiate("sell", vec![Scalar::Int(i as i64), Scalar::Int(p as i64), Scalar::Int(n as i64)]);
        }
        finish_work(&mut shop, i, ctx);
        Ok(Progress::Complete)
    })
    .params(&["store", "product"]);

    let s = shop.clone();
    let sell = ProcedureDecl::new("sell", move |rt, ctx| {
        let (i, p, n) = (arg(ctx, 0), arg(ctx, 1), arg(ctx, 2));
        let txns = s.lock().unwrap().transactions[&(i, p)];
        let Some(t) = held(rt, txns, ctx)? else { return Ok(Progress::Yield) };
        rt.append_entry(txns, Payload::new().with("qty", n as i64 + 1), &t)?;
        rt.release(&t, ctx.actor)?;
        let mut shop = s.lock().unwrap();
        let (pin, left) = shop.selling.get_mut(&(i, p)).expect("pinned product");
        *left -= 1;
        if *left == 0 {
            rt.unpin(*pin)?;
        }
        finish_work(&mut shop, i, ctx);
        Ok(Progress::Complete)
    })
    .params(&["store", "product", "sale"]);

    let s = shop.clone();
    let close = ProcedureDecl::new("close_store", move |rt, ctx| {
        let i = arg(ctx, 0);
        let e = s.lock().unwrap().stores[i].expect("opened").0;
        let Some(t) = held(rt, stores, ctx)? else { return Ok(Progress::Yield) };
        let tokens = std::slice::from_ref(&t);
        rt.annotate(stores, e, ClassPair::generic_only("closed"), &t)?;
        rt.bypass(stores, e, &t)?;
        let g = rt.add_gate(e, ClassPair::generic_only("closure"), tokens)?;
        rt.extend(&[g], ClassPair::generic_only("closure"), Payload::new().with("reason", "closed"), tokens)?;
        rt.release(&t, ctx.actor)?;
        rt.signal_lifecycle(e, Lifecycle::Ended)?;
        Ok(Progress::Complete)
    })
    .params(&["store"]);

    for decl in [open, stock, add, sell, close] {
        sched.declare(&mut rt, decl).expect("fresh scheduler");
    }
    for i in 0..config.stores {
        sched.initiate("open_store", vec![Scalar::Int(i as i64)]).expect("declared");
    }
    let report = sched.run_until_quiescent(&mut rt, config.budget);
    let store_entries = shop.lock().unwrap().stores.iter().flatten().map(|(e, _)| *e).collect();
    TraderRun { rt, report, store_list: stores, store_entries }
}
