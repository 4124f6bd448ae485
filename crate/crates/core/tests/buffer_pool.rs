use std::fs::OpenOptions;
use std::os::unix::fs::FileExt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use colcrunch_core::buffer::{BufferConfig, BufferError, BufferManager, FetchOutcome, QueryAccount};
use colcrunch_core::codec::CodecId;
use colcrunch_core::storage::{write_column, Catalog, ColumnId, ColumnStore, PageRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VALUES_PER_PAGE: usize = 256;

/// Column `t.c` holding `0..pages*256` under `codec`.
fn store(dir: &std::path::Path, pages: usize, codec: CodecId) -> Arc<ColumnStore> {
    let values: Vec<u32> = (0..(pages * VALUES_PER_PAGE) as u32).collect();
    let mut catalog = Catalog::new(dir);
    catalog.upsert(write_column("t", "c", &values, codec, VALUES_PER_PAGE * 4, &dir.join("t.c.pcf")).unwrap());
    Arc::new(ColumnStore::open(catalog).unwrap())
}

fn page(n: u32) -> PageRef {
    PageRef { column: ColumnId(0), page: n }
}

fn manager(store: Arc<ColumnStore>, capacity: usize, io_threads: usize) -> BufferManager {
    BufferManager::new(store, BufferConfig { capacity_pages: capacity, io_threads, prefetch_window: 0 })
}

fn expected(n: u32) -> Vec<u32> {
    let start = n * VALUES_PER_PAGE as u32;
    (start..start + VALUES_PER_PAGE as u32).collect()
}

#[test]
fn single_slot_reloads_evicted_page() {
    let dir = tempfile::tempdir().unwrap();
    let bm = manager(store(dir.path(), 2, CodecId::Raw), 1, 1);
    let mut a = bm.fetch(page(0)).unwrap();
    assert_eq!(a.outcome(), FetchOutcome::Miss);
    a.unpin().unwrap();
    let b = bm.fetch(page(1)).unwrap();
    assert_eq!(b.u32_values().unwrap(), expected(1));
    drop(b);
    let a = bm.fetch(page(0)).unwrap();
    assert_eq!(a.outcome(), FetchOutcome::Miss);
    assert_eq!(a.u32_values().unwrap(), expected(0));
    assert_eq!(bm.io_stats().pages_loaded(), 3);
    assert_eq!(bm.audit().violations, 0);
}

#[test]
fn prefetched_page_is_a_hit() {
    let dir = tempfile::tempdir().unwrap();
    let bm = manager(store(dir.path(), 4, CodecId::FastPFor128), 8, 2);
    bm.prefetch([page(2)], None);
    bm.wait_idle();
    let p = bm.fetch(page(2)).unwrap();
    assert_eq!(p.outcome(), FetchOutcome::Hit);
    assert_eq!(p.header.first_global_position, 2 * VALUES_PER_PAGE as u64);
    assert_eq!(p.u32_values().unwrap(), expected(2));
    let stats = bm.io_stats();
    assert_eq!(stats.pages_loaded(), 1);
    assert_eq!(stats.requests.hits, 1);
    assert_eq!(stats.requests.prefetch_issued, 1);
}

#[test]
fn second_unpin_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let bm = manager(store(dir.path(), 1, CodecId::Raw), 4, 1);
    let mut p = bm.fetch(page(0)).unwrap();
    let mut q = bm.fetch(page(0)).unwrap();
    assert_eq!(bm.pin_count(page(0)), 2);
    p.unpin().unwrap();
    assert!(matches!(p.unpin(), Err(BufferError::DoubleUnpin { .. })));
    assert_eq!(bm.pin_count(page(0)), 1);
    q.unpin().unwrap();
    assert_eq!(bm.pin_count(page(0)), 0);
    assert_eq!(bm.audit().violations, 0);
}

#[test]
fn all_slots_pinned_exhausts_the_pool() {
    let dir = tempfile::tempdir().unwrap();
    let bm = manager(store(dir.path(), 3, CodecId::Raw), 2, 1);
    let a = bm.fetch(page(0)).unwrap();
    let b = bm.fetch(page(1)).unwrap();
    assert!(matches!(bm.fetch(page(2)), Err(BufferError::ResourceExhausted { capacity: 2 })));
    // Prefetch never displaces pinned pages.
    bm.prefetch([page(2)], None);
    assert_eq!(bm.io_stats().requests.prefetch_skipped, 1);
    drop(a);
    assert!(bm.fetch(page(2)).is_ok());
    assert!(bm.is_resident(page(1)));
    drop(b);
    assert_eq!(bm.audit().violations, 0);
}

#[test]
fn out_of_range_page_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bm = manager(store(dir.path(), 1, CodecId::Raw), 2, 1);
    assert!(matches!(bm.fetch(page(1)), Err(BufferError::InvalidPage(_))));
    assert!(matches!(bm.fetch(PageRef { column: ColumnId(9), page: 0 }), Err(BufferError::UnknownColumn(_))));
}

#[test]
fn corrupt_page_fails_with_its_identity_and_is_retried() {
    let dir = tempfile::tempdir().unwrap();
    let st = store(dir.path(), 2, CodecId::BinaryPacking128);
    let entry = st.file(ColumnId(0)).page_entry(1).unwrap();
    let file = OpenOptions::new().write(true).open(dir.path().join("t.c.pcf")).unwrap();
    // A width byte of 200 cannot occur in a valid block.
    file.write_all_at(&[200], entry.offset).unwrap();
    let bm = manager(st, 4, 1);
    match bm.fetch(page(1)) {
        Err(BufferError::Load { page: p, .. }) => assert_eq!(p, page(1)),
        other => panic!("expected a load error, got {other:?}"),
    }
    assert!(!bm.is_resident(page(1)));
    assert!(bm.fetch(page(1)).is_err());
    assert_eq!(bm.io_stats().requests.load_failures, 2);
    assert_eq!(bm.fetch(page(0)).unwrap().u32_values().unwrap(), expected(0));
    assert_eq!(bm.audit().violations, 0);
}

#[test]
fn concurrent_fetchers_share_one_load() {
    let dir = tempfile::tempdir().unwrap();
    let bm = Arc::new(manager(store(dir.path(), 1, CodecId::Brotli), 4, 2));
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let bm = Arc::clone(&bm);
            std::thread::spawn(move || bm.fetch(page(0)).unwrap().u32_values().unwrap().to_vec())
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap(), expected(0));
    }
    let stats = bm.io_stats();
    assert_eq!(stats.pages_loaded(), 1);
    assert_eq!(stats.requests.misses, 1);
    assert_eq!(stats.requests.hits + stats.requests.joined, 7);
}

#[test]
fn loads_are_charged_to_the_requesting_query() {
    let dir = tempfile::tempdir().unwrap();
    let st = store(dir.path(), 4, CodecId::PFor);
    let sizes: Vec<u64> =
        (0..4).map(|i| u64::from(st.file(ColumnId(0)).page_entry(i).unwrap().compressed_len)).collect();
    let bm = manager(st, 8, 2);
    let q1 = Arc::new(QueryAccount::with_trace());
    let q2 = Arc::new(QueryAccount::with_trace());
    drop(bm.fetch_for(page(0), &q1).unwrap());
    drop(bm.fetch_for(page(1), &q1).unwrap());
    drop(bm.fetch_for(page(1), &q2).unwrap());
    drop(bm.fetch_for(page(3), &q2).unwrap());
    let (s1, s2) = (q1.snapshot(), q2.snapshot());
    assert_eq!((s1.pages_loaded, s1.bytes_read), (2, sizes[0] + sizes[1]));
    assert_eq!((s2.pages_loaded, s2.bytes_read), (1, sizes[3]));
    assert_eq!(s2.fetches, 2);
    assert_eq!(q2.trace().iter().map(|l| l.page).collect::<Vec<_>>(), vec![page(3)]);
    let io = bm.io_stats();
    assert_eq!(io.bytes_read(), sizes[0] + sizes[1] + sizes[3]);
    assert!(io.busy_seconds() >= io.read_seconds());
}

#[test]
fn evict_all_requires_no_pins() {
    let dir = tempfile::tempdir().unwrap();
    let bm = manager(store(dir.path(), 2, CodecId::Raw), 4, 1);
    let p = bm.fetch(page(0)).unwrap();
    assert!(matches!(bm.evict_all(), Err(BufferError::PagesPinned(1))));
    drop(p);
    bm.evict_all().unwrap();
    assert!(!bm.is_resident(page(0)));
    assert_eq!(bm.audit().resident, 0);
    bm.reset_stats();
    assert_eq!(bm.fetch(page(0)).unwrap().outcome(), FetchOutcome::Miss);
    assert_eq!(bm.io_stats().pages_loaded(), 1);
}

#[test]
fn stress_sixteen_workers_small_pool() {
    let dir = tempfile::tempdir().unwrap();
    let pages = 200u32;
    let bm = Arc::new(manager(store(dir.path(), pages as usize, CodecId::FastPFor128), 64, 2));
    let failed = Arc::new(AtomicBool::new(false));
    let workers: Vec<_> = (0..16u64)
        .map(|w| {
            let bm = Arc::clone(&bm);
            let failed = Arc::clone(&failed);
            std::thread::spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(w);
                for op in 0..6250 {
                    // Each worker holds at most two pins, so 16 workers never pin all 64 slots.
                    let a = rng.random_range(0..pages);
                    let b = rng.random_range(0..pages);
                    if op % 10 == 0 {
                        bm.prefetch((a..pages.min(a + 4)).map(page), None);
                    }
                    let pa = bm.fetch(page(a)).unwrap();
                    let pb = bm.fetch(page(b)).unwrap();
                    let va = pa.u32_values().unwrap();
                    let vb = pb.u32_values().unwrap();
                    if va[0] != a * VALUES_PER_PAGE as u32
                        || vb[VALUES_PER_PAGE - 1] != (b + 1) * VALUES_PER_PAGE as u32 - 1
                    {
                        failed.store(true, Ordering::Relaxed);
                    }
                }
            })
        })
        .collect();
    for w in workers {
        w.join().unwrap();
    }
    assert!(!failed.load(Ordering::Relaxed));
    bm.wait_idle();
    let audit = bm.audit();
    assert_eq!(audit.violations, 0);
    assert_eq!(audit.pinned_slots, 0);
    assert!(audit.resident <= 64);
    let r = bm.io_stats().requests;
    assert_eq!(r.hits + r.misses + r.joined, 16 * 6250 * 2);
}
