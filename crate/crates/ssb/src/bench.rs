use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Barrier, Mutex};
use std::time::{Duration, Instant};

use colcrunch_core::buffer::{BufferConfig, BufferManager, PageLoad, QueryAccount};
use colcrunch_core::codec::CodecId;
use colcrunch_core::exec::{execute, ExecContext, ResultSet};
use colcrunch_core::storage::{Catalog, ColumnStore, CATALOG_FILE_NAME};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::compression::lineorder_codec;
use crate::measure::MeasurementRecord;
use crate::queries::{build_query, QueryId};
use crate::{BenchError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    /// One query at a time.
    Sequential,
    /// All queries submitted at once to a worker pool, one I/O thread.
    Parallel,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Sequential => "sequential",
            Scenario::Parallel => "parallel",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Scenario, String> {
        match s {
            "sequential" => Ok(Scenario::Sequential),
            "parallel" => Ok(Scenario::Parallel),
            _ => Err(format!("unknown scenario {s:?}; expected sequential or parallel")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub data_dir: PathBuf,
    /// Codec the dataset's compressed columns must use.
    pub codec: CodecId,
    pub scenario: Scenario,
    pub iterations: usize,
    pub capacity_pages: usize,
    /// Ignored by the parallel scenario, which always uses one.
    pub io_threads: usize,
    pub worker_threads: usize,
    pub prefetch_window: usize,
    pub seed: u64,
    /// Shell command run after each measured pass to drop OS caches.
    pub drop_caches_cmd: Option<String>,
    /// Empty the buffer and OS cache before every query (sequential only).
    pub cold_per_query: bool,
    /// Keep each query's page-load trace.
    pub trace_pages: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let buffer = BufferConfig::default();
        BenchConfig {
            data_dir: PathBuf::from("data"),
            codec: CodecId::Raw,
            scenario: Scenario::Sequential,
            iterations: 10,
            capacity_pages: buffer.capacity_pages,
            io_threads: buffer.io_threads,
            worker_threads: QueryId::ALL.len(),
            prefetch_window: buffer.prefetch_window,
            seed: 42,
            drop_caches_cmd: None,
            cold_per_query: false,
            trace_pages: false,
        }
    }
}

impl BenchConfig {
    pub fn effective_io_threads(&self) -> usize {
        match self.scenario {
            Scenario::Sequential => self.io_threads,
            Scenario::Parallel => 1,
        }
    }

    pub fn buffer_config(&self) -> BufferConfig {
        BufferConfig {
            capacity_pages: self.capacity_pages,
            io_threads: self.effective_io_threads(),
            prefetch_window: self.prefetch_window,
        }
    }
}

/// An opened dataset with its buffer pool.
pub struct Engine {
    buffer: BufferManager,
}

impl Engine {
    pub fn open(data_dir: &Path, config: BufferConfig) -> Result<Engine> {
        let catalog_path = data_dir.join(CATALOG_FILE_NAME);
        if !catalog_path.exists() {
            return Err(BenchError::Config(format!(
                "no dataset at {} (missing {CATALOG_FILE_NAME})",
                data_dir.display()
            )));
        }
        let store = Arc::new(ColumnStore::open(Catalog::load(&catalog_path)?)?);
        Ok(Engine { buffer: BufferManager::new(store, config) })
    }

    pub fn buffer(&self) -> &BufferManager {
        &self.buffer
    }

    pub fn store(&self) -> &ColumnStore {
        self.buffer.store()
    }

    pub fn run(&self, query: QueryId, account: Option<Arc<QueryAccount>>) -> Result<ResultSet> {
        let mut ctx = ExecContext::new(&self.buffer);
        ctx.account = account;
        execute(&ctx, &build_query(query)).map_err(|source| BenchError::Query { query, source })
    }

    /// Empties the buffer pool and asks the OS to drop cached file pages.
    /// Returns a note naming the mechanism used.
    pub fn drop_caches(&self, hook: Option<&str>) -> Result<String> {
        self.buffer.evict_all()?;
        Ok(match hook {
            Some(cmd) => match std::process::Command::new("sh").arg("-c").arg(cmd).status() {
                Ok(s) if s.success() => "hook".to_string(),
                Ok(s) => {
                    log::warn!("cache-drop hook {cmd:?} exited with {s}");
                    format!("hook-failed: {s}")
                }
                Err(e) => {
                    log::warn!("cache-drop hook {cmd:?} could not run: {e}");
                    format!("hook-failed: {e}")
                }
            },
            None if self.store().drop_os_cache() => "fadvise-dontneed".to_string(),
            None => "warm-OS-cache".to_string(),
        })
    }
}

pub fn checksum(result: &ResultSet) -> String {
    let digest = Sha256::digest(result.to_tsv().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Query order for one iteration: a pure function of (seed, iteration).
pub fn shuffled_queries(seed: u64, iteration: usize) -> Vec<QueryId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration as u64);
    let mut order = QueryId::ALL.to_vec();
    order.shuffle(&mut rng);
    order
}

/// When a query started and finished, relative to the scenario start.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueryTiming {
    pub query: QueryId,
    pub submitted: Duration,
    pub started: Duration,
    pub finished: Duration,
}

#[derive(Debug, Default)]
pub struct ScenarioRun {
    pub records: Vec<MeasurementRecord>,
    pub timings: Vec<QueryTiming>,
    pub traces: Vec<(QueryId, Vec<PageLoad>)>,
    pub checksums: BTreeMap<QueryId, String>,
}

struct QueryOutcome {
    record: MeasurementRecord,
    timing: QueryTiming,
    trace: Vec<PageLoad>,
    checksum: String,
}

fn run_one(
    engine: &Engine,
    config: &BenchConfig,
    query: QueryId,
    iteration: usize,
    origin: Instant,
    submitted: Instant,
) -> Result<QueryOutcome> {
    let account = Arc::new(if config.trace_pages { QueryAccount::with_trace() } else { QueryAccount::new() });
    let started = Instant::now();
    let result = engine.run(query, Some(Arc::clone(&account)))?;
    let finished = Instant::now();
    let wall = (finished - submitted).as_secs_f64();
    let acct = account.snapshot();
    let checksum = checksum(&result);
    let record = MeasurementRecord {
        iteration,
        scenario: config.scenario.name().into(),
        codec: config.codec.name().into(),
        query_id: query.name().into(),
        wall_seconds: wall,
        plan_seconds: (wall - acct.data_access_seconds).max(0.0),
        data_access_seconds: acct.data_access_seconds.min(wall),
        io_read_seconds: acct.read_seconds,
        io_decompress_seconds: acct.decompress_seconds,
        bytes_read: acct.bytes_read,
        pages_loaded: acct.pages_loaded,
        result_checksum: checksum.clone(),
    };
    let timing =
        QueryTiming { query, submitted: submitted - origin, started: started - origin, finished: finished - origin };
    Ok(QueryOutcome { record, timing, trace: account.trace(), checksum })
}

/// Runs `order` once under the configured scenario.
pub fn run_scenario(engine: &Engine, config: &BenchConfig, order: &[QueryId], iteration: usize) -> Result<ScenarioRun> {
    let origin = Instant::now();
    let outcomes = match config.scenario {
        Scenario::Sequential => {
            let mut out = Vec::with_capacity(order.len());
            for &q in order {
                if config.cold_per_query {
                    engine.drop_caches(None)?;
                }
                out.push(run_one(engine, config, q, iteration, origin, Instant::now())?);
            }
            out
        }
        Scenario::Parallel => {
            if engine.buffer().config().io_threads != 1 {
                return Err(BenchError::Config("the parallel scenario needs a buffer with one I/O thread".into()));
            }
            let workers = config.worker_threads.max(1);
            let queue: Mutex<VecDeque<QueryId>> = Mutex::new(VecDeque::new());
            let results: Mutex<Vec<Result<QueryOutcome>>> = Mutex::new(Vec::new());
            let start = Barrier::new(workers + 1);
            let submitted: Mutex<Option<Instant>> = Mutex::new(None);
            std::thread::scope(|s| {
                for _ in 0..workers {
                    s.spawn(|| {
                        start.wait();
                        let at = submitted.lock().unwrap().expect("set before release");
                        loop {
                            let Some(q) = queue.lock().unwrap().pop_front() else { break };
                            let outcome = run_one(engine, config, q, iteration, origin, at);
                            results.lock().unwrap().push(outcome);
                        }
                    });
                }
                // Every query enters the queue in one step, then the workers are released.
                queue.lock().unwrap().extend(order.iter().copied());
                *submitted.lock().unwrap() = Some(Instant::now());
                start.wait();
            });
            let mut out = results.into_inner().unwrap().into_iter().collect::<Result<Vec<_>>>()?;
            out.sort_by_key(|o| order.iter().position(|&q| q == o.timing.query));
            out
        }
    };
    let mut run = ScenarioRun::default();
    for o in outcomes {
        run.checksums.insert(o.timing.query, o.checksum);
        if config.trace_pages {
            run.traces.push((o.timing.query, o.trace));
        }
        run.records.push(o.record);
        run.timings.push(o.timing);
    }
    Ok(run)
}

#[derive(Debug, Default)]
pub struct BenchOutcome {
    /// Measured executions only.
    pub records: Vec<MeasurementRecord>,
    /// Every execution, warm-up included.
    pub executions: BTreeMap<QueryId, usize>,
    pub orders: Vec<Vec<QueryId>>,
    /// How caches were dropped after each iteration.
    pub cache_notes: Vec<String>,
    pub checksums: BTreeMap<QueryId, String>,
    pub traces: Vec<(QueryId, Vec<PageLoad>)>,
}

/// Runs the iteration protocol: per iteration a seeded shuffle, a discarded
/// warm-up pass, a measured pass, then a cache drop and buffer reset.
/// Result checksums must agree across every pass and with `expected` if given.
pub fn run_iterations(config: &BenchConfig, expected: Option<&BTreeMap<QueryId, String>>) -> Result<BenchOutcome> {
    let engine = Engine::open(&config.data_dir, config.buffer_config())?;
    let actual = lineorder_codec(engine.store().catalog())?;
    if actual != config.codec {
        return Err(BenchError::Config(format!(
            "dataset columns are stored as {actual}, benchmark asked for {}",
            config.codec
        )));
    }
    let mut outcome = BenchOutcome::default();
    if let Some(e) = expected {
        outcome.checksums = e.clone();
    }
    for iteration in 0..config.iterations {
        let order = shuffled_queries(config.seed, iteration);
        for pass in 0..2 {
            let run = run_scenario(&engine, config, &order, iteration)?;
            for (q, sum) in &run.checksums {
                *outcome.executions.entry(*q).or_default() += 1;
                match outcome.checksums.get(q) {
                    Some(known) if known != sum => {
                        return Err(BenchError::ChecksumMismatch {
                            query: *q,
                            expected: known.clone(),
                            actual: sum.clone(),
                        })
                    }
                    Some(_) => {}
                    None => {
                        outcome.checksums.insert(*q, sum.clone());
                    }
                }
            }
            if pass == 1 {
                outcome.records.extend(run.records);
                outcome.traces.extend(run.traces);
            }
        }
        outcome.orders.push(order);
        outcome.cache_notes.push(engine.drop_caches(config.drop_caches_cmd.as_deref())?);
        engine.buffer().reset_stats();
    }
    Ok(outcome)
}
