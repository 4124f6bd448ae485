//! Positional query execution.
//!
//! Below the materialization point operators exchange [`JoinIndexBlock`]s of
//! row positions and call readers when they need values. The single
//! [`PlanNode::AggregateMaterialize`] turns positions into tuples; only
//! [`PlanNode::SortLimit`] may sit above it.

mod expr;
mod join_index;
mod ops;
mod reader;

use std::cmp::Ordering;
use std::sync::Arc;

use thiserror::Error;

use crate::buffer::{BufferError, BufferManager, PinnedBlock, QueryAccount};
use crate::storage::{ColumnStore, PageRef, StorageError};

pub use expr::{AggExpr, Aggregate, CmpOp, ColumnRef, Predicate, Value};
pub use join_index::{JoinIndexBlock, DEFAULT_BLOCK_ROWS};
pub use reader::{read_column, read_values, select_access_method, AccessMethod, ColumnValues, ReaderSpec};

use ops::{DataSource, Filter, HashJoin, PositionStream};

/// Default cap on hash-join build rows.
pub const DEFAULT_MAX_BUILD_ROWS: usize = 16 << 20;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Buffer(#[from] BufferError),
    #[error("column {column} refers to a table not produced by this operator's input")]
    TableNotInBlock { column: ColumnRef },
    #[error("column {column} holds {expected} values")]
    TypeMismatch { column: ColumnRef, expected: &'static str },
    #[error("access method {requested:?} cannot read positions that need {actual:?}")]
    AccessMethodMismatch { requested: AccessMethod, actual: AccessMethod },
    #[error("position {position} out of range for table {table} ({rows} rows)")]
    PositionOutOfRange { table: String, position: u32, rows: u64 },
    #[error("page {page:?} holds no value for position {position}")]
    CorruptPage { page: PageRef, position: u32 },
    #[error("hash join build side reached {rows} rows (limit {limit})")]
    BuildTooLarge { rows: u64, limit: usize },
    #[error("aggregate {aggregate} overflowed a 64-bit accumulator")]
    Overflow { aggregate: String },
    #[error("malformed join index: {0}")]
    MalformedJoinIndex(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

pub type Result<T, E = ExecError> = std::result::Result<T, E>;

/// Everything one query needs while running. Confined to one thread.
#[derive(Clone)]
pub struct ExecContext<'a> {
    pub buffer: &'a BufferManager,
    /// Charged with the loads this query triggers.
    pub account: Option<Arc<QueryAccount>>,
    pub block_rows: usize,
    pub max_build_rows: usize,
}

impl<'a> ExecContext<'a> {
    pub fn new(buffer: &'a BufferManager) -> ExecContext<'a> {
        ExecContext { buffer, account: None, block_rows: DEFAULT_BLOCK_ROWS, max_build_rows: DEFAULT_MAX_BUILD_ROWS }
    }

    pub fn with_account(mut self, account: Arc<QueryAccount>) -> ExecContext<'a> {
        self.account = Some(account);
        self
    }

    pub fn store(&self) -> &ColumnStore {
        self.buffer.store()
    }

    pub(crate) fn fetch(&self, page: PageRef) -> Result<PinnedBlock> {
        Ok(match &self.account {
            Some(a) => self.buffer.fetch_for(page, a)?,
            None => self.buffer.fetch(page)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SortKey {
    /// Output column name.
    pub column: String,
    pub descending: bool,
}

impl SortKey {
    pub fn asc(column: &str) -> SortKey {
        SortKey { column: column.into(), descending: false }
    }

    pub fn desc(column: &str) -> SortKey {
        SortKey { column: column.into(), descending: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PlanNode {
    /// Dense scan of a table; `prefetch` names columns whose pages are loaded ahead.
    DataSource {
        table: String,
        prefetch: Vec<String>,
    },
    Filter {
        input: Box<PlanNode>,
        predicate: Predicate,
    },
    /// Inner equi-join; `right` is the build side.
    HashJoin {
        left: Box<PlanNode>,
        right: Box<PlanNode>,
        left_key: ColumnRef,
        right_key: ColumnRef,
    },
    AggregateMaterialize {
        input: Box<PlanNode>,
        group_by: Vec<ColumnRef>,
        aggregates: Vec<Aggregate>,
    },
    SortLimit {
        input: Box<PlanNode>,
        keys: Vec<SortKey>,
        limit: Option<usize>,
    },
}

impl PlanNode {
    pub fn scan(table: &str, prefetch: &[&str]) -> PlanNode {
        PlanNode::DataSource { table: table.into(), prefetch: prefetch.iter().map(|s| s.to_string()).collect() }
    }

    pub fn filter(self, predicate: Predicate) -> PlanNode {
        PlanNode::Filter { input: Box::new(self), predicate }
    }

    pub fn join(self, right: PlanNode, left_key: ColumnRef, right_key: ColumnRef) -> PlanNode {
        PlanNode::HashJoin { left: Box::new(self), right: Box::new(right), left_key, right_key }
    }

    pub fn aggregate(self, group_by: Vec<ColumnRef>, aggregates: Vec<Aggregate>) -> PlanNode {
        PlanNode::AggregateMaterialize { input: Box::new(self), group_by, aggregates }
    }

    pub fn sort(self, keys: Vec<SortKey>, limit: Option<usize>) -> PlanNode {
        PlanNode::SortLimit { input: Box::new(self), keys, limit }
    }

    fn is_position_op(&self) -> bool {
        matches!(self, PlanNode::DataSource { .. } | PlanNode::Filter { .. } | PlanNode::HashJoin { .. })
    }

    fn children(&self) -> Vec<&PlanNode> {
        match self {
            PlanNode::DataSource { .. } => vec![],
            PlanNode::Filter { input, .. }
            | PlanNode::AggregateMaterialize { input, .. }
            | PlanNode::SortLimit { input, .. } => vec![input],
            PlanNode::HashJoin { left, right, .. } => vec![left, right],
        }
    }

    /// Checks there is exactly one materialization point with only position
    /// operators below it and only tuple operators above it.
    pub fn validate(&self) -> Result<()> {
        let mut node = self;
        while let PlanNode::SortLimit { input, .. } = node {
            node = input;
        }
        let PlanNode::AggregateMaterialize { input, .. } = node else {
            return Err(ExecError::InvalidPlan("no materialization point below the tuple operators".into()));
        };
        let mut stack = vec![input.as_ref()];
        while let Some(n) = stack.pop() {
            if !n.is_position_op() {
                return Err(ExecError::InvalidPlan("tuple operator below the materialization point".into()));
            }
            stack.extend(n.children());
        }
        Ok(())
    }
}

/// Materialized query output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResultSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl ResultSet {
    /// Header line plus one line per row, tab separated, LF terminated.
    pub fn to_tsv(&self) -> String {
        let mut out = self.columns.join("\t");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Value::to_string).collect();
            out.push_str(&line.join("\t"));
            out.push('\n');
        }
        out
    }

    /// Stable sort by `keys`; remaining ties fall back to the whole tuple.
    pub fn sort(&mut self, keys: &[SortKey], limit: Option<usize>) -> Result<()> {
        let idx: Vec<(usize, bool)> = keys
            .iter()
            .map(|k| {
                self.columns
                    .iter()
                    .position(|c| *c == k.column)
                    .map(|i| (i, k.descending))
                    .ok_or_else(|| ExecError::InvalidPlan(format!("sort key {} is not an output column", k.column)))
            })
            .collect::<Result<_>>()?;
        self.rows.sort_by(|a, b| {
            idx.iter()
                .map(|&(i, desc)| if desc { b[i].cmp(&a[i]) } else { a[i].cmp(&b[i]) })
                .find(|o| *o != Ordering::Equal)
                .unwrap_or_else(|| a.cmp(b))
        });
        if let Some(n) = limit {
            self.rows.truncate(n);
        }
        Ok(())
    }
}

fn build_stream<'p>(ctx: &ExecContext<'_>, node: &'p PlanNode) -> Result<Box<dyn PositionStream + 'p>> {
    Ok(match node {
        PlanNode::DataSource { table, prefetch } => Box::new(DataSource::new(ctx, table, prefetch)?),
        PlanNode::Filter { input, predicate } => Box::new(Filter::new(ctx, build_stream(ctx, input)?, predicate)?),
        PlanNode::HashJoin { left, right, left_key, right_key } => {
            Box::new(HashJoin::new(ctx, build_stream(ctx, left)?, build_stream(ctx, right)?, left_key, right_key)?)
        }
        _ => return Err(ExecError::InvalidPlan("tuple operator below the materialization point".into())),
    })
}

/// Runs a validated plan to completion on the calling thread.
pub fn execute(ctx: &ExecContext<'_>, plan: &PlanNode) -> Result<ResultSet> {
    plan.validate()?;
    execute_tuples(ctx, plan)
}

fn execute_tuples(ctx: &ExecContext<'_>, plan: &PlanNode) -> Result<ResultSet> {
    match plan {
        PlanNode::SortLimit { input, keys, limit } => {
            let mut rs = execute_tuples(ctx, input)?;
            rs.sort(keys, *limit)?;
            Ok(rs)
        }
        PlanNode::AggregateMaterialize { input, group_by, aggregates } => {
            ops::aggregate(ctx, build_stream(ctx, input)?, group_by, aggregates)
        }
        _ => Err(ExecError::InvalidPlan("no materialization point".into())),
    }
}

/// Runs the position part of a plan and collects every block it produces.
pub fn collect_positions(ctx: &ExecContext<'_>, plan: &PlanNode) -> Result<Vec<JoinIndexBlock>> {
    let mut stream = build_stream(ctx, plan)?;
    let mut out = Vec::new();
    while let Some(b) = stream.next_block(ctx)? {
        out.push(b);
    }
    Ok(out)
}
