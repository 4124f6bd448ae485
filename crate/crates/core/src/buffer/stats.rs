use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use crate::storage::PageRef;

/// Raw per-I/O-thread counters, in nanoseconds.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct IoCounters {
    pub read_ns: u64,
    pub decompress_ns: u64,
    pub busy_ns: u64,
    pub bytes_read: u64,
    pub pages_loaded: u64,
}

/// What one I/O thread spent its time on.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IoThreadStats {
    pub read_seconds: f64,
    pub decompress_seconds: f64,
    /// Time from dequeuing a request to having its page decoded.
    pub busy_seconds: f64,
    pub bytes_read: u64,
    pub pages_loaded: u64,
}

impl From<IoCounters> for IoThreadStats {
    fn from(c: IoCounters) -> Self {
        let secs = |ns: u64| Duration::from_nanos(ns).as_secs_f64();
        IoThreadStats {
            read_seconds: secs(c.read_ns),
            decompress_seconds: secs(c.decompress_ns),
            busy_seconds: secs(c.busy_ns),
            bytes_read: c.bytes_read,
            pages_loaded: c.pages_loaded,
        }
    }
}

/// Request-level counters kept next to the slot table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RequestCounters {
    pub hits: u64,
    pub misses: u64,
    /// Fetches that waited on a load another request had already started.
    pub joined: u64,
    pub prefetch_issued: u64,
    /// Prefetch requests for pages already resident or in flight.
    pub prefetch_duplicates: u64,
    /// Prefetch requests dropped because no slot was evictable.
    pub prefetch_skipped: u64,
    pub load_failures: u64,
}

/// Snapshot of buffer accounting taken under one lock acquisition.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IoStats {
    pub threads: Vec<IoThreadStats>,
    pub requests: RequestCounters,
}

impl IoStats {
    pub fn read_seconds(&self) -> f64 {
        self.threads.iter().map(|t| t.read_seconds).sum()
    }

    pub fn decompress_seconds(&self) -> f64 {
        self.threads.iter().map(|t| t.decompress_seconds).sum()
    }

    pub fn busy_seconds(&self) -> f64 {
        self.threads.iter().map(|t| t.busy_seconds).sum()
    }

    pub fn bytes_read(&self) -> u64 {
        self.threads.iter().map(|t| t.bytes_read).sum()
    }

    pub fn pages_loaded(&self) -> u64 {
        self.threads.iter().map(|t| t.pages_loaded).sum()
    }
}

/// One page load charged to a query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PageLoad {
    pub page: PageRef,
    pub bytes: u64,
}

/// Per-query accounting. Loads are charged to the query whose request
/// triggered them; hits on pages another query loaded charge nobody.
#[derive(Debug, Default)]
pub struct QueryAccount {
    read_ns: AtomicU64,
    decompress_ns: AtomicU64,
    bytes_read: AtomicU64,
    pages_loaded: AtomicU64,
    fetch_wait_ns: AtomicU64,
    fetches: AtomicU64,
    trace: Option<Mutex<Vec<PageLoad>>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AccountSnapshot {
    pub read_seconds: f64,
    pub decompress_seconds: f64,
    pub bytes_read: u64,
    pub pages_loaded: u64,
    /// Time the query's worker spent blocked inside `fetch`.
    pub data_access_seconds: f64,
    pub fetches: u64,
}

impl QueryAccount {
    pub fn new() -> QueryAccount {
        QueryAccount::default()
    }

    /// Also records every page loaded on this query's behalf.
    pub fn with_trace() -> QueryAccount {
        QueryAccount { trace: Some(Mutex::new(Vec::new())), ..QueryAccount::default() }
    }

    pub(crate) fn charge_load(&self, page: PageRef, read_ns: u64, decompress_ns: u64, bytes: u64, loaded: bool) {
        self.read_ns.fetch_add(read_ns, Ordering::Relaxed);
        self.decompress_ns.fetch_add(decompress_ns, Ordering::Relaxed);
        self.bytes_read.fetch_add(bytes, Ordering::Relaxed);
        if loaded {
            self.pages_loaded.fetch_add(1, Ordering::Relaxed);
        }
        if let Some(trace) = &self.trace {
            trace.lock().unwrap().push(PageLoad { page, bytes });
        }
    }

    pub(crate) fn charge_fetch(&self, waited: Duration) {
        self.fetch_wait_ns.fetch_add(waited.as_nanos() as u64, Ordering::Relaxed);
        self.fetches.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> AccountSnapshot {
        let secs = |a: &AtomicU64| Duration::from_nanos(a.load(Ordering::Relaxed)).as_secs_f64();
        AccountSnapshot {
            read_seconds: secs(&self.read_ns),
            decompress_seconds: secs(&self.decompress_ns),
            bytes_read: self.bytes_read.load(Ordering::Relaxed),
            pages_loaded: self.pages_loaded.load(Ordering::Relaxed),
            data_access_seconds: secs(&self.fetch_wait_ns),
            fetches: self.fetches.load(Ordering::Relaxed),
        }
    }

    pub fn trace(&self) -> Vec<PageLoad> {
        self.trace.as_ref().map(|t| t.lock().unwrap().clone()).unwrap_or_default()
    }
}
