//! Buffer manager for decompressed pages.
//!
//! Callers never touch the disk: a miss reserves a slot, queues a load on one
//! of the I/O threads and parks until that thread has read the compressed
//! extent and decompressed it into a [`ValBlock`]. Replacement is CLOCK over
//! unpinned, fully loaded slots. A page being loaded is tracked by its slot so
//! concurrent fetchers of the same page share one read.

mod stats;

use std::collections::HashMap;
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::Instant;

use thiserror::Error;

use crate::storage::{ColumnId, ColumnStore, PageData, PageRef, StorageError, StringPage};

use stats::IoCounters;
pub use stats::{AccountSnapshot, IoStats, IoThreadStats, PageLoad, QueryAccount, RequestCounters};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BufferConfig {
    pub capacity_pages: usize,
    pub io_threads: usize,
    /// Pages to load ahead of a sequential scan; 0 disables prefetch.
    pub prefetch_window: usize,
}

impl Default for BufferConfig {
    fn default() -> Self {
        BufferConfig { capacity_pages: 16384, io_threads: 2, prefetch_window: 4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ValBlockHeader {
    pub column: ColumnId,
    pub page_no: u32,
    pub value_count: u32,
    pub first_global_position: u64,
}

/// A decompressed page as held by the buffer pool.
#[derive(Debug)]
pub struct ValBlock {
    pub header: ValBlockHeader,
    pub data: PageData,
}

impl ValBlock {
    pub fn u32_values(&self) -> Option<&[u32]> {
        match &self.data {
            PageData::U32(v) => Some(v),
            PageData::Bytes(_) => None,
        }
    }

    pub fn byte_values(&self) -> Option<&StringPage> {
        match &self.data {
            PageData::Bytes(p) => Some(p),
            PageData::U32(_) => None,
        }
    }
}

#[derive(Debug, Error, Clone)]
pub enum BufferError {
    #[error("all {capacity} buffer slots are pinned")]
    ResourceExhausted { capacity: usize },
    #[error("page {page:?} unpinned more often than pinned")]
    DoubleUnpin { page: PageRef },
    #[error("{} page pin(s) still held", .0)]
    PagesPinned(usize),
    #[error("loading page {page:?} failed: {source}")]
    Load { page: PageRef, source: Arc<StorageError> },
    #[error("no column with id {}", .0 .0)]
    UnknownColumn(ColumnId),
    #[error("invalid page reference: {0}")]
    InvalidPage(Arc<StorageError>),
    #[error("buffer manager is shut down")]
    Shutdown,
}

/// How a fetch was served.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FetchOutcome {
    /// Page was resident and loaded.
    Hit,
    /// This fetch started the load.
    Miss,
    /// Page was already being loaded (by a prefetch or another fetch).
    Joined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SlotState {
    Free,
    Loading,
    Ready,
}

#[derive(Debug)]
struct Slot {
    page: Option<PageRef>,
    state: SlotState,
    pins: u32,
    referenced: bool,
    load_id: u64,
    block: Option<Arc<ValBlock>>,
}

struct LoadRequest {
    slot: usize,
    load_id: u64,
    page: PageRef,
    account: Option<Arc<QueryAccount>>,
}

struct State {
    slots: Vec<Slot>,
    table: HashMap<PageRef, usize>,
    free: Vec<usize>,
    hand: usize,
    next_load_id: u64,
    in_flight: usize,
    /// Errors of failed loads, kept until every pinned waiter has seen them.
    failures: HashMap<u64, (BufferError, u32)>,
    io: Vec<IoCounters>,
    requests: RequestCounters,
    violations: u64,
}

impl State {
    /// Picks a free slot, else runs CLOCK over unpinned ready slots.
    fn find_victim(&mut self) -> Option<usize> {
        if let Some(idx) = self.free.pop() {
            return Some(idx);
        }
        let capacity = self.slots.len();
        for _ in 0..2 * capacity {
            let i = self.hand;
            self.hand = (self.hand + 1) % capacity;
            let slot = &mut self.slots[i];
            if slot.state == SlotState::Ready && slot.pins == 0 {
                if slot.referenced {
                    slot.referenced = false;
                } else {
                    return Some(i);
                }
            }
        }
        None
    }

    /// Clears `idx` and claims it for `page`.
    fn admit(&mut self, idx: usize, page: PageRef, pins: u32) -> u64 {
        let slot = &mut self.slots[idx];
        if slot.pins != 0 || slot.state == SlotState::Loading {
            self.violations += 1;
        }
        if let Some(old) = slot.page.take() {
            self.table.remove(&old);
        }
        self.next_load_id += 1;
        let slot = &mut self.slots[idx];
        *slot = Slot {
            page: Some(page),
            state: SlotState::Loading,
            pins,
            referenced: true,
            load_id: self.next_load_id,
            block: None,
        };
        self.table.insert(page, idx);
        if self.table.len() > self.slots.len() {
            self.violations += 1;
        }
        self.in_flight += 1;
        self.next_load_id
    }

    fn has_pending_unpinned_load(&self) -> bool {
        self.slots.iter().any(|s| s.state == SlotState::Loading && s.pins == 0)
    }
}

struct Shared {
    store: Arc<ColumnStore>,
    state: Mutex<State>,
    changed: Condvar,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap()
    }
}

/// Result of [`BufferManager::audit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BufferAudit {
    pub capacity: usize,
    pub resident: usize,
    pub pinned_slots: usize,
    /// Eviction of a pinned or loading slot, residency above capacity, or an
    /// inconsistent page table. Must stay zero.
    pub violations: u64,
}

pub struct BufferManager {
    shared: Arc<Shared>,
    config: BufferConfig,
    senders: Vec<Sender<LoadRequest>>,
    next_sender: std::sync::atomic::AtomicUsize,
    workers: Vec<JoinHandle<()>>,
}

impl BufferManager {
    pub fn new(store: Arc<ColumnStore>, config: BufferConfig) -> BufferManager {
        assert!(config.capacity_pages > 0, "buffer capacity must be positive");
        assert!(config.io_threads > 0, "at least one I/O thread is required");
        let slots = (0..config.capacity_pages)
            .map(|_| Slot { page: None, state: SlotState::Free, pins: 0, referenced: false, load_id: 0, block: None })
            .collect();
        let shared = Arc::new(Shared {
            store,
            state: Mutex::new(State {
                slots,
                table: HashMap::with_capacity(config.capacity_pages),
                free: (0..config.capacity_pages).rev().collect(),
                hand: 0,
                next_load_id: 0,
                in_flight: 0,
                failures: HashMap::new(),
                io: vec![IoCounters::default(); config.io_threads],
                requests: RequestCounters::default(),
                violations: 0,
            }),
            changed: Condvar::new(),
        });
        let mut senders = Vec::new();
        let mut workers = Vec::new();
        for thread_no in 0..config.io_threads {
            let (tx, rx) = mpsc::channel();
            let shared = Arc::clone(&shared);
            let handle = std::thread::Builder::new()
                .name(format!("io-{thread_no}"))
                .spawn(move || io_loop(&shared, thread_no, rx))
                .expect("spawn I/O thread");
            senders.push(tx);
            workers.push(handle);
        }
        BufferManager { shared, config, senders, next_sender: Default::default(), workers }
    }

    pub fn config(&self) -> BufferConfig {
        self.config
    }

    pub fn store(&self) -> &Arc<ColumnStore> {
        &self.shared.store
    }

    pub fn fetch(&self, page: PageRef) -> Result<PinnedBlock, BufferError> {
        self.fetch_inner(page, None)
    }

    /// Fetches on behalf of a query; loads and blocked time are charged to `account`.
    pub fn fetch_for(&self, page: PageRef, account: &Arc<QueryAccount>) -> Result<PinnedBlock, BufferError> {
        let started = Instant::now();
        let result = self.fetch_inner(page, Some(account));
        account.charge_fetch(started.elapsed());
        result
    }

    fn validate(&self, page: PageRef) -> Result<(), BufferError> {
        let store = &self.shared.store;
        if page.column.0 as usize >= store.catalog().entries().len() {
            return Err(BufferError::UnknownColumn(page.column));
        }
        store.page_ref(page.column, page.page).map_err(|e| BufferError::InvalidPage(Arc::new(e)))?;
        Ok(())
    }

    fn fetch_inner(&self, page: PageRef, account: Option<&Arc<QueryAccount>>) -> Result<PinnedBlock, BufferError> {
        self.validate(page)?;
        let mut st = self.shared.lock();
        loop {
            if let Some(&idx) = st.table.get(&page) {
                let slot = &mut st.slots[idx];
                slot.pins += 1;
                slot.referenced = true;
                if slot.state == SlotState::Ready {
                    let block = slot.block.clone().expect("ready slot has a block");
                    st.requests.hits += 1;
                    return Ok(self.handle(idx, page, block, FetchOutcome::Hit));
                }
                let load_id = slot.load_id;
                st.requests.joined += 1;
                let (_st, block) = self.wait_for(st, idx, load_id)?;
                return Ok(self.handle(idx, page, block, FetchOutcome::Joined));
            }
            match st.find_victim() {
                Some(idx) => {
                    let load_id = st.admit(idx, page, 1);
                    st.requests.misses += 1;
                    drop(st);
                    self.submit(LoadRequest { slot: idx, load_id, page, account: account.cloned() })?;
                    let st = self.shared.lock();
                    let (_st, block) = self.wait_for(st, idx, load_id)?;
                    return Ok(self.handle(idx, page, block, FetchOutcome::Miss));
                }
                None if st.has_pending_unpinned_load() => {
                    st = self.shared.changed.wait(st).unwrap();
                }
                None => {
                    return Err(BufferError::ResourceExhausted { capacity: self.config.capacity_pages });
                }
            }
        }
    }

    fn wait_for<'a>(
        &self,
        mut st: MutexGuard<'a, State>,
        idx: usize,
        load_id: u64,
    ) -> Result<(MutexGuard<'a, State>, Arc<ValBlock>), BufferError> {
        loop {
            let slot = &st.slots[idx];
            if slot.load_id == load_id && slot.state == SlotState::Ready {
                let block = slot.block.clone().expect("ready slot has a block");
                return Ok((st, block));
            }
            if let Some((err, remaining)) = st.failures.get_mut(&load_id) {
                let err = err.clone();
                *remaining -= 1;
                if *remaining == 0 {
                    st.failures.remove(&load_id);
                }
                return Err(err);
            }
            st = self.shared.changed.wait(st).unwrap();
        }
    }

    fn handle(&self, slot: usize, page: PageRef, block: Arc<ValBlock>, outcome: FetchOutcome) -> PinnedBlock {
        PinnedBlock { shared: Arc::clone(&self.shared), slot, page, block, outcome, released: false }
    }

    fn submit(&self, request: LoadRequest) -> Result<(), BufferError> {
        let n = self.next_sender.fetch_add(1, std::sync::atomic::Ordering::Relaxed) % self.senders.len();
        self.senders[n].send(request).map_err(|mpsc::SendError(req)| {
            let mut st = self.shared.lock();
            fail_load(&mut st, req.slot, req.load_id, BufferError::Shutdown);
            self.shared.changed.notify_all();
            BufferError::Shutdown
        })
    }

    /// Queues asynchronous loads. Pages already resident or in flight are
    /// skipped, pinned pages are never displaced, and a request with no
    /// evictable slot is dropped.
    pub fn prefetch<I>(&self, pages: I, account: Option<&Arc<QueryAccount>>)
    where
        I: IntoIterator<Item = PageRef>,
    {
        let mut requests = Vec::new();
        {
            let mut st = self.shared.lock();
            for page in pages {
                if self.validate(page).is_err() {
                    continue;
                }
                if st.table.contains_key(&page) {
                    st.requests.prefetch_duplicates += 1;
                    continue;
                }
                match st.find_victim() {
                    Some(idx) => {
                        let load_id = st.admit(idx, page, 0);
                        st.requests.prefetch_issued += 1;
                        requests.push(LoadRequest { slot: idx, load_id, page, account: account.cloned() });
                    }
                    None => st.requests.prefetch_skipped += 1,
                }
            }
        }
        for request in requests {
            // A failed submit has already released its slot.
            let _ = self.submit(request);
        }
    }

    pub fn io_stats(&self) -> IoStats {
        let st = self.shared.lock();
        IoStats { threads: st.io.iter().copied().map(IoThreadStats::from).collect(), requests: st.requests }
    }

    pub fn reset_stats(&self) {
        let mut st = self.shared.lock();
        st.io.iter_mut().for_each(|c| *c = IoCounters::default());
        st.requests = RequestCounters::default();
    }

    /// Blocks until no load is in flight.
    pub fn wait_idle(&self) {
        let mut st = self.shared.lock();
        while st.in_flight > 0 {
            st = self.shared.changed.wait(st).unwrap();
        }
    }

    /// Empties the pool. Fails if any page is still pinned.
    pub fn evict_all(&self) -> Result<(), BufferError> {
        let mut st = self.shared.lock();
        while st.in_flight > 0 {
            st = self.shared.changed.wait(st).unwrap();
        }
        let pinned = st.slots.iter().filter(|s| s.pins > 0).count();
        if pinned > 0 {
            return Err(BufferError::PagesPinned(pinned));
        }
        let st = &mut *st;
        st.table.clear();
        st.free.clear();
        for (i, slot) in st.slots.iter_mut().enumerate().rev() {
            *slot = Slot {
                page: None,
                state: SlotState::Free,
                pins: 0,
                referenced: false,
                load_id: slot.load_id,
                block: None,
            };
            st.free.push(i);
        }
        st.hand = 0;
        Ok(())
    }

    pub fn is_resident(&self, page: PageRef) -> bool {
        let st = self.shared.lock();
        st.table.get(&page).is_some_and(|&i| st.slots[i].state == SlotState::Ready)
    }

    pub fn pin_count(&self, page: PageRef) -> u32 {
        let st = self.shared.lock();
        st.table.get(&page).map_or(0, |&i| st.slots[i].pins)
    }

    /// Checks slot-table consistency.
    pub fn audit(&self) -> BufferAudit {
        let st = self.shared.lock();
        let mut violations = st.violations;
        let mut occupied = 0;
        for (i, slot) in st.slots.iter().enumerate() {
            match (slot.state, slot.page) {
                (SlotState::Free, None) => {}
                (SlotState::Free, Some(_)) => violations += 1,
                (_, None) => violations += 1,
                (_, Some(p)) => {
                    occupied += 1;
                    if st.table.get(&p) != Some(&i) {
                        violations += 1;
                    }
                }
            }
        }
        if occupied != st.table.len() || occupied > st.slots.len() || occupied + st.free.len() != st.slots.len() {
            violations += 1;
        }
        BufferAudit {
            capacity: st.slots.len(),
            resident: occupied,
            pinned_slots: st.slots.iter().filter(|s| s.pins > 0).count(),
            violations,
        }
    }
}

impl Drop for BufferManager {
    fn drop(&mut self) {
        self.senders.clear();
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl std::fmt::Debug for BufferManager {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BufferManager").field("config", &self.config).finish_non_exhaustive()
    }
}

fn fail_load(st: &mut State, idx: usize, load_id: u64, err: BufferError) {
    let slot = &mut st.slots[idx];
    if slot.load_id != load_id {
        return;
    }
    let waiters = slot.pins;
    if let Some(page) = slot.page.take() {
        st.table.remove(&page);
    }
    let slot = &mut st.slots[idx];
    slot.state = SlotState::Free;
    slot.pins = 0;
    slot.block = None;
    st.free.push(idx);
    st.in_flight -= 1;
    st.requests.load_failures += 1;
    if waiters > 0 {
        st.failures.insert(load_id, (err, waiters));
    }
}

fn io_loop(shared: &Shared, thread_no: usize, requests: Receiver<LoadRequest>) {
    for req in requests {
        let file = shared.store.file(req.page.column);
        let started = Instant::now();
        let payload = file.read_page_bytes(req.page.page);
        let read_done = Instant::now();
        let bytes = payload.as_ref().map_or(0, |p| p.bytes.len() as u64);
        let decoded = payload.and_then(|p| file.decode_page(&p));
        let decoded_at = Instant::now();

        let read_ns = (read_done - started).as_nanos() as u64;
        let decompress_ns = (decoded_at - read_done).as_nanos() as u64;
        if let Some(account) = &req.account {
            account.charge_load(req.page, read_ns, decompress_ns, bytes, decoded.is_ok());
        }

        let mut st = shared.state.lock().unwrap();
        let io = &mut st.io[thread_no];
        io.read_ns += read_ns;
        io.decompress_ns += decompress_ns;
        io.bytes_read += bytes;
        match decoded {
            Ok(data) => {
                io.pages_loaded += 1;
                let vpp = u64::from(file.header().values_per_page);
                let block = ValBlock {
                    header: ValBlockHeader {
                        column: req.page.column,
                        page_no: req.page.page,
                        value_count: data.len() as u32,
                        first_global_position: u64::from(req.page.page) * vpp,
                    },
                    data,
                };
                let slot = &mut st.slots[req.slot];
                if slot.load_id == req.load_id {
                    slot.block = Some(Arc::new(block));
                    slot.state = SlotState::Ready;
                    st.in_flight -= 1;
                }
            }
            Err(e) => {
                let err = BufferError::Load { page: req.page, source: Arc::new(e) };
                fail_load(&mut st, req.slot, req.load_id, err);
            }
        }
        // Busy time spans the whole request, including the lock wait and
        // installation, so read + decompress need not cover all of it.
        st.io[thread_no].busy_ns += started.elapsed().as_nanos() as u64;
        drop(st);
        shared.changed.notify_all();
    }
}

/// A pinned page. The pin is released by [`PinnedBlock::unpin`] or on drop.
pub struct PinnedBlock {
    shared: Arc<Shared>,
    slot: usize,
    page: PageRef,
    block: Arc<ValBlock>,
    outcome: FetchOutcome,
    released: bool,
}

impl PinnedBlock {
    pub fn page(&self) -> PageRef {
        self.page
    }

    pub fn block(&self) -> &ValBlock {
        &self.block
    }

    pub fn outcome(&self) -> FetchOutcome {
        self.outcome
    }

    pub fn unpin(&mut self) -> Result<(), BufferError> {
        if self.released {
            return Err(BufferError::DoubleUnpin { page: self.page });
        }
        self.released = true;
        let mut st = self.shared.lock();
        let slot = &mut st.slots[self.slot];
        if slot.page != Some(self.page) || slot.pins == 0 {
            st.violations += 1;
            return Err(BufferError::DoubleUnpin { page: self.page });
        }
        slot.pins -= 1;
        let now_free = slot.pins == 0;
        drop(st);
        if now_free {
            self.shared.changed.notify_all();
        }
        Ok(())
    }
}

impl std::ops::Deref for PinnedBlock {
    type Target = ValBlock;

    fn deref(&self) -> &ValBlock {
        &self.block
    }
}

impl Drop for PinnedBlock {
    fn drop(&mut self) {
        if !self.released {
            let _ = self.unpin();
        }
    }
}

impl std::fmt::Debug for PinnedBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PinnedBlock").field("page", &self.page).field("outcome", &self.outcome).finish()
    }
}
