use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use colcrunch_core::buffer::{BufferConfig, BufferManager, QueryAccount};
use colcrunch_core::codec::CodecId;
use colcrunch_core::exec::{
    collect_positions, execute, read_column, read_values, select_access_method, AccessMethod, AggExpr, Aggregate,
    ColumnRef, ColumnValues, ExecContext, ExecError, JoinIndexBlock, PlanNode, Predicate, ReaderSpec, SortKey, Value,
};
use colcrunch_core::storage::{write_bytes_column, write_column, Catalog, ColumnStore};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Col<'a> {
    U(&'a [u32]),
    S(&'a [&'a str]),
}

/// Writes `tables` (name, columns) with pages of `page_values` values.
fn database(dir: &Path, tables: &[(&str, Vec<(&str, Col)>)], codec: CodecId, page_values: usize) -> BufferManager {
    let mut catalog = Catalog::new(dir);
    for (table, cols) in tables {
        for (name, col) in cols {
            let path = dir.join(format!("{table}.{name}.pcf"));
            let entry = match col {
                Col::U(v) => write_column(table, name, v, codec, page_values * 4, &path),
                Col::S(v) => write_bytes_column(table, name, v, page_values * 4, &path),
            };
            catalog.upsert(entry.unwrap());
        }
    }
    let store = Arc::new(ColumnStore::open(catalog).unwrap());
    BufferManager::new(store, BufferConfig { capacity_pages: 256, io_threads: 2, prefetch_window: 2 })
}

fn c(table: &str, column: &str) -> ColumnRef {
    ColumnRef::new(table, column)
}

fn rows(blocks: &[JoinIndexBlock]) -> Vec<Vec<u32>> {
    blocks.iter().flat_map(|b| (0..b.len()).map(move |i| b.row(i))).collect()
}

#[test]
fn access_method_selection() {
    assert_eq!(select_access_method(&[5, 6, 7, 8]), AccessMethod::Range);
    assert_eq!(select_access_method(&[2, 9, 40]), AccessMethod::Sorted);
    assert_eq!(select_access_method(&[9, 2, 40]), AccessMethod::Jive);
    assert_eq!(select_access_method(&[4, 4]), AccessMethod::Jive);
    assert_eq!(select_access_method(&[4]), AccessMethod::Range);
}

#[test]
fn column_reader_picks_positions() {
    let dir = tempfile::tempdir().unwrap();
    let bm = database(dir.path(), &[("t", vec![("v", Col::U(&[10, 20, 30]))])], CodecId::Raw, 2);
    let ctx = ExecContext::new(&bm);
    let id = bm.store().column_id("t", "v").unwrap();
    assert_eq!(read_column(&ctx, id, &[0, 2], None).unwrap(), ColumnValues::U32(vec![10, 30]));
    assert!(matches!(read_column(&ctx, id, &[3], None), Err(ExecError::PositionOutOfRange { position: 3, .. })));
}

#[test]
fn repeated_positions_read_their_own_values() {
    let dir = tempfile::tempdir().unwrap();
    let values: Vec<u32> = (0..500).map(|i| i * 3 + 2).collect();
    let names: Vec<String> = (0..500).map(|i| format!("s{i}")).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let bm = database(
        dir.path(),
        &[("t", vec![("v", Col::U(&values)), ("s", Col::S(&names))])],
        CodecId::BinaryPacking128,
        128,
    );
    let ctx = ExecContext::new(&bm);
    let v = bm.store().column_id("t", "v").unwrap();
    let s = bm.store().column_id("t", "s").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // [1, 1, 3] spans as many values as it holds but is not a run.
    let mut cases = vec![vec![1, 1, 3], vec![13, 5, 13, 13, 5, 1, 15, 1, 13, 13, 3, 15, 3, 1, 15]];
    for _ in 0..50 {
        let n = rng.random_range(1..40);
        let hi = rng.random_range(1..500);
        let mut p: Vec<u32> = (0..n).map(|_| rng.random_range(0..hi)).collect();
        if rng.random_bool(0.5) {
            p.sort();
        }
        cases.push(p);
    }
    for p in cases {
        let want: Vec<u32> = p.iter().map(|&i| values[i as usize]).collect();
        assert_eq!(read_column(&ctx, v, &p, None).unwrap(), ColumnValues::U32(want), "{p:?}");
        let want: Vec<Vec<u8>> = p.iter().map(|&i| names[i as usize].as_bytes().to_vec()).collect();
        assert_eq!(read_column(&ctx, s, &p, None).unwrap(), ColumnValues::Bytes(want), "{p:?}");
    }
}

#[test]
fn permuted_positions_read_each_page_once() {
    let dir = tempfile::tempdir().unwrap();
    let values: Vec<u32> = (0..300).map(|i| i * 7 + 1).collect();
    let bm = database(dir.path(), &[("t", vec![("v", Col::U(&values))])], CodecId::VByte, 100);
    let id = bm.store().column_id("t", "v").unwrap();
    let mut positions: Vec<u32> = (0..300).collect();
    positions.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    let account = Arc::new(QueryAccount::new());
    let ctx = ExecContext::new(&bm).with_account(Arc::clone(&account));
    let got = read_column(&ctx, id, &positions, None).unwrap();
    let want: Vec<u32> = positions.iter().map(|&p| values[p as usize]).collect();
    assert_eq!(got, ColumnValues::U32(want));
    bm.wait_idle();
    assert_eq!(account.snapshot().pages_loaded, 3);
    assert_eq!(bm.io_stats().pages_loaded(), 3);
}

#[test]
fn access_methods_agree() {
    let dir = tempfile::tempdir().unwrap();
    let values: Vec<u32> = (0..1000).map(|i| i ^ 0x5a5a).collect();
    let names: Vec<String> = (0..1000).map(|i| format!("n{}", i % 37)).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let bm = database(dir.path(), &[("t", vec![("v", Col::U(&values)), ("s", Col::S(&names))])], CodecId::PFor, 64);
    let ctx = ExecContext::new(&bm);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dense: Vec<u32> = (100..400).collect();
    let mut sparse: Vec<u32> = (0..1000).filter(|_| rng.random_bool(0.2)).collect();
    sparse.dedup();
    for col in ["v", "s"] {
        let id = bm.store().column_id("t", col).unwrap();
        for positions in [&dense, &sparse] {
            let natural = read_column(&ctx, id, positions, None).unwrap();
            let allowed: &[AccessMethod] = if select_access_method(positions) == AccessMethod::Range {
                &[AccessMethod::Range, AccessMethod::Sorted, AccessMethod::Jive]
            } else {
                &[AccessMethod::Sorted, AccessMethod::Jive]
            };
            for &m in allowed {
                assert_eq!(read_column(&ctx, id, positions, Some(m)).unwrap(), natural, "{col} {m:?}");
            }
        }
        assert!(matches!(
            read_column(&ctx, id, &sparse, Some(AccessMethod::Range)),
            Err(ExecError::AccessMethodMismatch { .. })
        ));
    }
}

#[test]
fn datasource_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let big: Vec<u32> = (0..10_000).collect();
    let bm = database(
        dir.path(),
        &[
            ("big", vec![("v", Col::U(&big))]),
            ("small", vec![("v", Col::U(&[1, 2, 3, 4, 5]))]),
            ("none", vec![("v", Col::U(&[]))]),
        ],
        CodecId::Raw,
        1024,
    );
    let ctx = ExecContext::new(&bm);
    let lens = |t: &str| {
        collect_positions(&ctx, &PlanNode::scan(t, &["v"])).unwrap().iter().map(JoinIndexBlock::len).collect::<Vec<_>>()
    };
    assert_eq!(lens("big"), vec![4096, 4096, 1808]);
    assert_eq!(lens("small"), vec![5]);
    assert!(lens("none").is_empty());
    let blocks = collect_positions(&ctx, &PlanNode::scan("small", &[])).unwrap();
    assert_eq!(blocks[0].positions(0), &[0, 1, 2, 3, 4]);
    assert!(matches!(collect_positions(&ctx, &PlanNode::scan("nope", &[])), Err(ExecError::Storage(_))));
}

#[test]
fn filter_semantics() {
    let dir = tempfile::tempdir().unwrap();
    let bm = database(
        dir.path(),
        &[("t", vec![("v", Col::U(&[3, 7, 3])), ("s", Col::S(&["AIR", "RAIL", "MAIL"]))])],
        CodecId::BinaryPacking128,
        2,
    );
    let ctx = ExecContext::new(&bm);
    let run = |p: Predicate| rows(&collect_positions(&ctx, &PlanNode::scan("t", &[]).filter(p)).unwrap());
    assert_eq!(run(Predicate::eq(c("t", "v"), 3u32)), vec![vec![0], vec![2]]);
    assert_eq!(run(Predicate::Const(true)), vec![vec![0], vec![1], vec![2]]);
    assert!(run(Predicate::Const(false)).is_empty());
    assert_eq!(run(Predicate::in_set(c("t", "s"), ["AIR", "MAIL"])), vec![vec![0], vec![2]]);
    assert_eq!(run(Predicate::between(c("t", "s"), "B", "RZ")), vec![vec![1], vec![2]]);
    assert_eq!(
        run(Predicate::And(vec![
            Predicate::cmp(c("t", "v"), colcrunch_core::exec::CmpOp::Gt, 3u32),
            Predicate::eq(c("t", "s"), "RAIL")
        ])),
        vec![vec![1]]
    );
    let err = collect_positions(&ctx, &PlanNode::scan("t", &[]).filter(Predicate::eq(c("t", "s"), 3u32)));
    assert!(matches!(err, Err(ExecError::TypeMismatch { .. })));
}

#[test]
fn hash_join_pairs_matching_rows() {
    let dir = tempfile::tempdir().unwrap();
    let bm = database(
        dir.path(),
        &[
            ("t1", vec![("k", Col::S(&["a", "b"]))]),
            ("t2", vec![("k", Col::S(&["b", "a"])), ("u", Col::U(&[1, 1]))]),
            ("t3", vec![("u", Col::U(&[1, 1, 2]))]),
        ],
        CodecId::Raw,
        4,
    );
    let ctx = ExecContext::new(&bm);
    let join = PlanNode::scan("t1", &[]).join(PlanNode::scan("t2", &[]), c("t1", "k"), c("t2", "k"));
    let mut got = rows(&collect_positions(&ctx, &join).unwrap());
    got.sort();
    assert_eq!(got, vec![vec![0, 1], vec![1, 0]]);

    let empty = PlanNode::scan("t1", &[]).join(
        PlanNode::scan("t2", &[]).filter(Predicate::Const(false)),
        c("t1", "k"),
        c("t2", "k"),
    );
    assert!(collect_positions(&ctx, &empty).unwrap().is_empty());

    // Duplicate keys on both sides give the cross product.
    let dup = PlanNode::scan("t3", &[]).join(PlanNode::scan("t2", &[]), c("t3", "u"), c("t2", "u"));
    let mut got = rows(&collect_positions(&ctx, &dup).unwrap());
    got.sort();
    assert_eq!(got, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);

    let mismatch = PlanNode::scan("t3", &[]).join(PlanNode::scan("t2", &[]), c("t3", "u"), c("t2", "k"));
    assert!(matches!(collect_positions(&ctx, &mismatch), Err(ExecError::TypeMismatch { .. })));

    let mut small = ExecContext::new(&bm);
    small.max_build_rows = 1;
    assert!(matches!(collect_positions(&small, &join), Err(ExecError::BuildTooLarge { .. })));
}

#[test]
fn three_table_join_index_row() {
    // T1 row 2 joins T2 row 1, which joins T3 row 2 (1-based), i.e. (1, 0, 1).
    let dir = tempfile::tempdir().unwrap();
    let bm = database(
        dir.path(),
        &[
            ("t1", vec![("k", Col::U(&[7, 5, 9]))]),
            ("t2", vec![("k", Col::U(&[5, 6])), ("j", Col::U(&[2, 3]))]),
            ("t3", vec![("j", Col::U(&[8, 2]))]),
        ],
        CodecId::FastPFor128,
        2,
    );
    let ctx = ExecContext::new(&bm);
    let plan = PlanNode::scan("t1", &[]).join(PlanNode::scan("t2", &[]), c("t1", "k"), c("t2", "k")).join(
        PlanNode::scan("t3", &[]),
        c("t2", "j"),
        c("t3", "j"),
    );
    let blocks = collect_positions(&ctx, &plan).unwrap();
    assert_eq!(rows(&blocks), vec![vec![1, 0, 1]]);
    assert_eq!(blocks[0].tables(), &["t1", "t2", "t3"]);
    let store = bm.store();
    blocks[0].check(|t| store.table_rows(t).ok()).unwrap();
    let vals = read_values(&ctx, &ReaderSpec::Column(c("t2", "k")), &blocks[0]).unwrap();
    assert_eq!(vals, vec![ColumnValues::U32(vec![5])]);
    let sync = read_values(&ctx, &ReaderSpec::Sync(vec![c("t1", "k"), c("t3", "j")]), &blocks[0]).unwrap();
    assert_eq!(sync, vec![ColumnValues::U32(vec![5]), ColumnValues::U32(vec![2])]);
}

#[test]
fn aggregation_semantics() {
    let dir = tempfile::tempdir().unwrap();
    let big = [u32::MAX; 3];
    let bm = database(
        dir.path(),
        &[
            ("t", vec![("v", Col::U(&[10, 20, 30]))]),
            ("g", vec![("k", Col::S(&["x", "y", "x"])), ("v", Col::U(&[1, 2, 3]))]),
            ("o", vec![("v", Col::U(&big))]),
        ],
        CodecId::Raw,
        2,
    );
    let ctx = ExecContext::new(&bm);
    let sum = |t: &str| vec![Aggregate::sum("s", AggExpr::Col(c(t, "v")))];
    let total = execute(&ctx, &PlanNode::scan("t", &[]).aggregate(vec![], sum("t"))).unwrap();
    assert_eq!(total.rows, vec![vec![Value::I64(60)]]);

    let none = PlanNode::scan("t", &[]).filter(Predicate::Const(false));
    let grouped = execute(&ctx, &none.clone().aggregate(vec![c("t", "v")], sum("t"))).unwrap();
    assert!(grouped.rows.is_empty());
    let ungrouped = execute(&ctx, &none.aggregate(vec![], sum("t"))).unwrap();
    assert_eq!(ungrouped.rows, vec![vec![Value::I64(0)]]);

    let groups = execute(&ctx, &PlanNode::scan("g", &[]).aggregate(vec![c("g", "k")], sum("g"))).unwrap();
    assert_eq!(groups.to_tsv(), "k\ts\nx\t4\ny\t2\n");

    let exprs = vec![
        Aggregate::sum("mul", AggExpr::Mul(c("t", "v"), c("t", "v"))),
        Aggregate::sum("sub", AggExpr::Sub(c("t", "v"), c("t", "v"))),
        Aggregate::sum("ms", AggExpr::MulSub(c("t", "v"), c("t", "v"), c("t", "v"))),
    ];
    let r = execute(&ctx, &PlanNode::scan("t", &[]).aggregate(vec![], exprs)).unwrap();
    assert_eq!(r.rows, vec![vec![Value::I64(1400), Value::I64(0), Value::I64(0)]]);

    let overflow = vec![Aggregate::sum("sq", AggExpr::Mul(c("o", "v"), c("o", "v")))];
    let err = execute(&ctx, &PlanNode::scan("o", &[]).aggregate(vec![], overflow)).unwrap_err();
    assert!(matches!(err, ExecError::Overflow { .. }), "{err}");
}

#[test]
fn sort_limit_orders_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let bm = database(
        dir.path(),
        &[("t", vec![("k", Col::U(&[1, 3, 2, 3])), ("w", Col::U(&[5, 6, 7, 8]))])],
        CodecId::Raw,
        8,
    );
    let ctx = ExecContext::new(&bm);
    let agg = |group: Vec<ColumnRef>| {
        PlanNode::scan("t", &[]).aggregate(group, vec![Aggregate::sum("s", AggExpr::Col(c("t", "w")))])
    };
    let desc = execute(&ctx, &agg(vec![c("t", "k")]).sort(vec![SortKey::desc("k")], None)).unwrap();
    assert_eq!(
        desc.rows.iter().map(|r| r[0].clone()).collect::<Vec<_>>(),
        vec![Value::U32(3), Value::U32(2), Value::U32(1)]
    );
    let one = execute(&ctx, &agg(vec![]).sort(vec![SortKey::asc("s")], None)).unwrap();
    assert_eq!(one.rows, vec![vec![Value::I64(26)]]);
    // Equal primary keys fall back to the whole tuple.
    let tie = execute(&ctx, &agg(vec![c("t", "w"), c("t", "k")]).sort(vec![SortKey::desc("k")], Some(3))).unwrap();
    assert_eq!(tie.to_tsv(), "w\tk\ts\n6\t3\t6\n8\t3\t8\n7\t2\t7\n");
    let bad = agg(vec![]).sort(vec![SortKey::asc("zzz")], None);
    assert!(matches!(execute(&ctx, &bad), Err(ExecError::InvalidPlan(_))));
}

#[test]
fn plans_need_one_materialization_point() {
    let dir = tempfile::tempdir().unwrap();
    let bm = database(dir.path(), &[("t", vec![("v", Col::U(&[1]))])], CodecId::Raw, 8);
    let ctx = ExecContext::new(&bm);
    let sum = vec![Aggregate::sum("s", AggExpr::Col(c("t", "v")))];
    assert!(matches!(execute(&ctx, &PlanNode::scan("t", &[])), Err(ExecError::InvalidPlan(_))));
    let twice = PlanNode::scan("t", &[]).aggregate(vec![], sum.clone()).aggregate(vec![], sum.clone());
    assert!(twice.validate().is_err());
    let sort_below = PlanNode::scan("t", &[]).sort(vec![], None).aggregate(vec![], sum.clone());
    assert!(sort_below.validate().is_err());
    assert!(PlanNode::scan("t", &[]).aggregate(vec![], sum).sort(vec![], Some(1)).validate().is_ok());
}

/// Star join with filters on both sides, run under every codec and compared
/// with a nested-loop evaluation over plain vectors.
#[test]
fn star_join_is_codec_transparent() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 20_000;
    let dims = 300u32;
    let fk: Vec<u32> = (0..n).map(|_| rng.random_range(1..=dims)).collect();
    let qty: Vec<u32> = (0..n).map(|_| rng.random_range(1..=50)).collect();
    let price: Vec<u32> = (0..n).map(|_| rng.random_range(90_000..10_000_000)).collect();
    let cost: Vec<u32> = (0..n).map(|_| rng.random_range(10_000..90_000)).collect();
    let key: Vec<u32> = (1..=dims).collect();
    let regions = ["AMERICA", "ASIA", "EUROPE"];
    let region: Vec<&str> = (0..dims).map(|_| regions[rng.random_range(0..3)]).collect();
    let year: Vec<u32> = (0..dims).map(|_| rng.random_range(1992..=1998)).collect();

    let mut oracle: BTreeMap<(Vec<u8>, u32), (i64, i64)> = BTreeMap::new();
    for i in 0..n {
        let d = (fk[i] - 1) as usize;
        if qty[i] < 25 && region[d] != "ASIA" {
            let e = oracle.entry((region[d].as_bytes().to_vec(), year[d])).or_default();
            e.0 += i64::from(price[i]) * i64::from(qty[i]);
            e.1 += i64::from(price[i]) - i64::from(cost[i]);
        }
    }
    let mut want = "region\tyear\trev\tprofit\n".to_string();
    let mut sorted: Vec<_> = oracle.into_iter().collect();
    sorted.sort_by(|a, b| a.0 .1.cmp(&b.0 .1).then(b.1 .0.cmp(&a.1 .0)));
    for ((r, y), (rev, profit)) in sorted {
        want.push_str(&format!("{}\t{y}\t{rev}\t{profit}\n", String::from_utf8(r).unwrap()));
    }

    for codec in CodecId::ALL {
        let dir = tempfile::tempdir().unwrap();
        let bm = database(
            dir.path(),
            &[
                (
                    "f",
                    vec![
                        ("fk", Col::U(&fk)),
                        ("qty", Col::U(&qty)),
                        ("price", Col::U(&price)),
                        ("cost", Col::U(&cost)),
                    ],
                ),
                ("d", vec![("key", Col::U(&key)), ("region", Col::S(&region)), ("year", Col::U(&year))]),
            ],
            codec,
            1024,
        );
        let plan = PlanNode::scan("f", &["fk", "qty"])
            .filter(Predicate::cmp(c("f", "qty"), colcrunch_core::exec::CmpOp::Lt, 25u32))
            .join(
                PlanNode::scan("d", &[]).filter(Predicate::in_set(c("d", "region"), ["AMERICA", "EUROPE"])),
                c("f", "fk"),
                c("d", "key"),
            )
            .aggregate(
                vec![c("d", "region"), c("d", "year")],
                vec![
                    Aggregate::sum("rev", AggExpr::Mul(c("f", "price"), c("f", "qty"))),
                    Aggregate::sum("profit", AggExpr::Sub(c("f", "price"), c("f", "cost"))),
                ],
            )
            .sort(vec![SortKey::asc("year"), SortKey::desc("rev")], None);
        let ctx = ExecContext::new(&bm);
        assert_eq!(execute(&ctx, &plan).unwrap().to_tsv(), want, "{codec}");
        let store = bm.store();
        for b in collect_positions(
            &ctx,
            match &plan {
                PlanNode::SortLimit { input, .. } => match input.as_ref() {
                    PlanNode::AggregateMaterialize { input, .. } => input,
                    _ => unreachable!(),
                },
                _ => unreachable!(),
            },
        )
        .unwrap()
        {
            b.check(|t| store.table_rows(t).ok()).unwrap();
        }
        assert_eq!(bm.audit().violations, 0);
    }
}
