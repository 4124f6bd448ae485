use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use crate::storage::{ColumnId, PageRef, ValueKind};

use super::expr::{CmpOp, Test};
use super::reader::{read_block_column, ColumnValues};
use super::{Aggregate, ColumnRef, ExecContext, ExecError, JoinIndexBlock, Predicate, Result, ResultSet, Value};

/// A position-based operator: produces join-index blocks.
pub(crate) trait PositionStream {
    fn tables(&self) -> &Arc<[String]>;
    fn next_block(&mut self, ctx: &ExecContext<'_>) -> Result<Option<JoinIndexBlock>>;
}

pub(crate) struct DataSource {
    tables: Arc<[String]>,
    rows: u64,
    next: u64,
    /// Declared columns with the first page not yet prefetched.
    prefetch: Vec<(ColumnId, u32)>,
}

impl DataSource {
    pub(crate) fn new(ctx: &ExecContext<'_>, table: &str, columns: &[String]) -> Result<DataSource> {
        let store = ctx.store();
        let rows = store.table_rows(table)?;
        let prefetch = columns
            .iter()
            .map(|c| store.column_id(table, c).map(|id| (id, 0)))
            .collect::<std::result::Result<_, _>>()?;
        Ok(DataSource { tables: Arc::from(vec![table.to_string()]), rows, next: 0, prefetch })
    }
}

impl PositionStream for DataSource {
    fn tables(&self) -> &Arc<[String]> {
        &self.tables
    }

    fn next_block(&mut self, ctx: &ExecContext<'_>) -> Result<Option<JoinIndexBlock>> {
        if self.next >= self.rows {
            return Ok(None);
        }
        let end = (self.next + ctx.block_rows as u64).min(self.rows);
        let window = ctx.buffer.config().prefetch_window as u32;
        if window > 0 {
            for (id, from) in &mut self.prefetch {
                let store = ctx.store();
                let vpp = u64::from(store.entry(*id).values_per_page);
                let total = store.file(*id).total_pages();
                let current = ((end - 1) / vpp) as u32;
                let upto = (current + 1 + window).min(total);
                if *from < upto {
                    let column = *id;
                    ctx.buffer.prefetch((*from..upto).map(|page| PageRef { column, page }), ctx.account.as_ref());
                    *from = upto;
                }
            }
        }
        let block = JoinIndexBlock::dense(&self.tables[0], self.next as u32, end as u32);
        self.next = end;
        Ok(Some(block))
    }
}

/// A predicate with leaves bound to physical column types.
enum Compiled {
    Const(bool),
    U32(ColumnRef, Test<u32>),
    Bytes(ColumnRef, Test<Vec<u8>>),
    And(Vec<Compiled>),
}

#[derive(Clone, Copy)]
enum Shape {
    Cmp(CmpOp),
    Between,
    In,
}

fn make_test<T: Clone>(shape: Shape, mut vs: Vec<T>) -> Test<T> {
    match shape {
        Shape::Cmp(op) => Test::Cmp(op, vs.swap_remove(0)),
        Shape::Between => Test::Between(vs[0].clone(), vs[1].clone()),
        Shape::In => Test::In(vs),
    }
}

fn bind_leaf(
    ctx: &ExecContext<'_>,
    tables: &[String],
    column: &ColumnRef,
    shape: Shape,
    values: &[Value],
) -> Result<Compiled> {
    if !tables.contains(&column.table) {
        return Err(ExecError::TableNotInBlock { column: column.clone() });
    }
    let kind = ctx.store().entry(ctx.store().column_id(&column.table, &column.column)?).kind;
    let mismatch = || ExecError::TypeMismatch { column: column.clone(), expected: kind.name() };
    match kind {
        ValueKind::U32 => {
            let vs = values
                .iter()
                .map(|v| match v {
                    Value::U32(x) => Ok(*x),
                    _ => Err(mismatch()),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Compiled::U32(column.clone(), make_test(shape, vs)))
        }
        ValueKind::Bytes => {
            let vs = values
                .iter()
                .map(|v| match v {
                    Value::Bytes(b) => Ok(b.clone()),
                    _ => Err(mismatch()),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Compiled::Bytes(column.clone(), make_test(shape, vs)))
        }
    }
}

fn compile(ctx: &ExecContext<'_>, p: &Predicate, tables: &[String]) -> Result<Compiled> {
    match p {
        Predicate::Const(c) => Ok(Compiled::Const(*c)),
        Predicate::Cmp { column, op, value } => {
            bind_leaf(ctx, tables, column, Shape::Cmp(*op), std::slice::from_ref(value))
        }
        Predicate::Between { column, low, high } => {
            bind_leaf(ctx, tables, column, Shape::Between, &[low.clone(), high.clone()])
        }
        Predicate::InSet { column, values } if values.is_empty() => {
            bind_leaf(ctx, tables, column, Shape::In, values)?;
            Ok(Compiled::Const(false))
        }
        Predicate::InSet { column, values } => bind_leaf(ctx, tables, column, Shape::In, values),
        Predicate::And(ps) => Ok(Compiled::And(ps.iter().map(|p| compile(ctx, p, tables)).collect::<Result<_>>()?)),
    }
}

impl Compiled {
    /// Clears mask entries of rows that fail. Stops reading once no row survives.
    fn apply(&self, ctx: &ExecContext<'_>, block: &JoinIndexBlock, mask: &mut [bool]) -> Result<()> {
        match self {
            Compiled::Const(true) => {}
            Compiled::Const(false) => mask.fill(false),
            Compiled::And(ps) => {
                for p in ps {
                    if !mask.contains(&true) {
                        break;
                    }
                    p.apply(ctx, block, mask)?;
                }
            }
            Compiled::U32(column, test) => match read_block_column(ctx, column, block)? {
                ColumnValues::U32(vs) => mask.iter_mut().zip(&vs).for_each(|(m, v)| *m &= test.matches(v)),
                ColumnValues::Bytes(_) => unreachable!("type checked at compile"),
            },
            Compiled::Bytes(column, test) => match read_block_column(ctx, column, block)? {
                ColumnValues::Bytes(vs) => mask.iter_mut().zip(&vs).for_each(|(m, v)| *m &= test.matches(v.as_slice())),
                ColumnValues::U32(_) => unreachable!("type checked at compile"),
            },
        }
        Ok(())
    }
}

pub(crate) struct Filter<'a> {
    input: Box<dyn PositionStream + 'a>,
    predicate: Compiled,
}

impl<'a> Filter<'a> {
    pub(crate) fn new(
        ctx: &ExecContext<'_>,
        input: Box<dyn PositionStream + 'a>,
        predicate: &Predicate,
    ) -> Result<Filter<'a>> {
        let predicate = compile(ctx, predicate, input.tables())?;
        Ok(Filter { input, predicate })
    }
}

impl PositionStream for Filter<'_> {
    fn tables(&self) -> &Arc<[String]> {
        self.input.tables()
    }

    fn next_block(&mut self, ctx: &ExecContext<'_>) -> Result<Option<JoinIndexBlock>> {
        while let Some(block) = self.input.next_block(ctx)? {
            let mut mask = vec![true; block.len()];
            self.predicate.apply(ctx, &block, &mut mask)?;
            if mask.iter().all(|&m| m) {
                return Ok(Some(block));
            }
            if mask.contains(&true) {
                return Ok(Some(block.select(&mask)));
            }
        }
        Ok(None)
    }
}

#[derive(Default)]
struct BuildTable<K> {
    /// Key to first build row; further rows with the same key chain through `next`.
    heads: HashMap<K, u32>,
    next: Vec<u32>,
}

const NO_ROW: u32 = u32::MAX;

impl<K: std::hash::Hash + Eq> BuildTable<K> {
    fn insert(&mut self, key: K, row: u32) {
        let prev = self.heads.insert(key, row).unwrap_or(NO_ROW);
        self.next.push(prev);
    }
}

enum JoinTable {
    U32(BuildTable<u32>),
    Bytes(BuildTable<Vec<u8>>),
}

/// Inner equi-join; the right input is the build side.
pub(crate) struct HashJoin<'a> {
    left: Box<dyn PositionStream + 'a>,
    right: Option<Box<dyn PositionStream + 'a>>,
    left_key: ColumnRef,
    right_key: ColumnRef,
    tables: Arc<[String]>,
    build: Option<(JoinTable, Vec<Vec<u32>>)>,
    pending: VecDeque<JoinIndexBlock>,
}

impl<'a> HashJoin<'a> {
    pub(crate) fn new(
        ctx: &ExecContext<'_>,
        left: Box<dyn PositionStream + 'a>,
        right: Box<dyn PositionStream + 'a>,
        left_key: &ColumnRef,
        right_key: &ColumnRef,
    ) -> Result<HashJoin<'a>> {
        for (key, side) in [(left_key, &left), (right_key, &right)] {
            if !side.tables().contains(&key.table) {
                return Err(ExecError::TableNotInBlock { column: key.clone() });
            }
        }
        let store = ctx.store();
        let lk = store.entry(store.column_id(&left_key.table, &left_key.column)?).kind;
        let rk = store.entry(store.column_id(&right_key.table, &right_key.column)?).kind;
        if lk != rk {
            return Err(ExecError::TypeMismatch { column: right_key.clone(), expected: lk.name() });
        }
        let tables: Vec<String> = left.tables().iter().chain(right.tables().iter()).cloned().collect();
        Ok(HashJoin {
            left,
            right: Some(right),
            left_key: left_key.clone(),
            right_key: right_key.clone(),
            tables: Arc::from(tables),
            build: None,
            pending: VecDeque::new(),
        })
    }

    fn build(&mut self, ctx: &ExecContext<'_>) -> Result<()> {
        let mut right = self.right.take().expect("built once");
        let mut positions = vec![Vec::new(); right.tables().len()];
        let mut table: Option<JoinTable> = None;
        let mut rows = 0u64;
        while let Some(block) = right.next_block(ctx)? {
            rows += block.len() as u64;
            if rows > ctx.max_build_rows as u64 {
                return Err(ExecError::BuildTooLarge { rows, limit: ctx.max_build_rows });
            }
            let first = positions[0].len() as u32;
            for (t, col) in positions.iter_mut().enumerate() {
                col.extend_from_slice(block.positions(t));
            }
            match read_block_column(ctx, &self.right_key, &block)? {
                ColumnValues::U32(keys) => {
                    let JoinTable::U32(t) = table.get_or_insert_with(|| JoinTable::U32(BuildTable::default())) else {
                        unreachable!("one key type per column")
                    };
                    keys.into_iter().enumerate().for_each(|(i, k)| t.insert(k, first + i as u32));
                }
                ColumnValues::Bytes(keys) => {
                    let JoinTable::Bytes(t) = table.get_or_insert_with(|| JoinTable::Bytes(BuildTable::default()))
                    else {
                        unreachable!("one key type per column")
                    };
                    keys.into_iter().enumerate().for_each(|(i, k)| t.insert(k, first + i as u32));
                }
            }
        }
        let table = table.unwrap_or(JoinTable::U32(BuildTable::default()));
        self.build = Some((table, positions));
        Ok(())
    }

    fn probe(&mut self, ctx: &ExecContext<'_>, block: &JoinIndexBlock) -> Result<()> {
        let (table, build_positions) = self.build.as_ref().expect("built");
        let keys = read_block_column(ctx, &self.left_key, block)?;
        let left_width = block.tables().len();
        let mut out = JoinIndexBlock::new(Arc::clone(&self.tables));
        let mut row = vec![0u32; self.tables.len()];
        let mut emit = |i: usize, mut b: u32, next: &[u32], out: &mut JoinIndexBlock| {
            while b != NO_ROW {
                for (t, slot) in row[..left_width].iter_mut().enumerate() {
                    *slot = block.positions(t)[i];
                }
                for (t, col) in build_positions.iter().enumerate() {
                    row[left_width + t] = col[b as usize];
                }
                out.push_row(&row);
                if out.len() == ctx.block_rows {
                    self.pending.push_back(std::mem::replace(out, JoinIndexBlock::new(Arc::clone(&self.tables))));
                }
                b = next[b as usize];
            }
        };
        match (table, &keys) {
            (JoinTable::U32(t), ColumnValues::U32(ks)) => {
                for (i, k) in ks.iter().enumerate() {
                    if let Some(&b) = t.heads.get(k) {
                        emit(i, b, &t.next, &mut out);
                    }
                }
            }
            (JoinTable::Bytes(t), ColumnValues::Bytes(ks)) => {
                for (i, k) in ks.iter().enumerate() {
                    if let Some(&b) = t.heads.get(k) {
                        emit(i, b, &t.next, &mut out);
                    }
                }
            }
            // Empty build side defaults to a u32 table.
            _ => {}
        }
        if !out.is_empty() {
            self.pending.push_back(out);
        }
        Ok(())
    }
}

impl PositionStream for HashJoin<'_> {
    fn tables(&self) -> &Arc<[String]> {
        &self.tables
    }

    fn next_block(&mut self, ctx: &ExecContext<'_>) -> Result<Option<JoinIndexBlock>> {
        if self.build.is_none() {
            self.build(ctx)?;
            if self.build.as_ref().is_some_and(|(_, p)| p.first().is_none_or(Vec::is_empty)) {
                return Ok(None);
            }
        }
        loop {
            if let Some(b) = self.pending.pop_front() {
                return Ok(Some(b));
            }
            match self.left.next_block(ctx)? {
                Some(block) => self.probe(ctx, &block)?,
                None => return Ok(None),
            }
        }
    }
}

/// The materialization point: reads group keys and aggregate operands and
/// produces one tuple per group, ordered by group key.
pub(crate) fn aggregate(
    ctx: &ExecContext<'_>,
    mut input: Box<dyn PositionStream + '_>,
    group_by: &[ColumnRef],
    aggregates: &[Aggregate],
) -> Result<ResultSet> {
    let tables = Arc::clone(input.tables());
    let store = ctx.store();
    for c in group_by.iter().chain(aggregates.iter().flat_map(|a| a.expr.columns())) {
        if !tables.contains(&c.table) {
            return Err(ExecError::TableNotInBlock { column: c.clone() });
        }
        store.column_id(&c.table, &c.column)?;
    }
    for a in aggregates {
        for c in a.expr.columns() {
            let kind = store.entry(store.column_id(&c.table, &c.column)?).kind;
            if kind != ValueKind::U32 {
                return Err(ExecError::TypeMismatch { column: c.clone(), expected: ValueKind::U32.name() });
            }
        }
    }

    let mut groups: HashMap<Vec<Value>, Vec<i64>> = HashMap::new();
    let mut args = Vec::new();
    while let Some(block) = input.next_block(ctx)? {
        #[cfg(debug_assertions)]
        block.check(|t| store.table_rows(t).ok()).map_err(ExecError::MalformedJoinIndex)?;
        let keys: Vec<ColumnValues> =
            group_by.iter().map(|c| read_block_column(ctx, c, &block)).collect::<Result<_>>()?;
        let mut operands: HashMap<&ColumnRef, ColumnValues> = HashMap::new();
        for c in aggregates.iter().flat_map(|a| a.expr.columns()) {
            if !operands.contains_key(c) {
                operands.insert(c, read_block_column(ctx, c, &block)?);
            }
        }
        let operands: Vec<Vec<&[u32]>> = aggregates
            .iter()
            .map(|a| a.expr.columns().iter().map(|c| operands[c].as_u32().expect("type checked")).collect())
            .collect();
        let mut key = Vec::with_capacity(group_by.len());
        for row in 0..block.len() {
            key.clear();
            key.extend(keys.iter().map(|k| k.value(row)));
            let sums = match groups.get_mut(&key) {
                Some(s) => s,
                None => groups.entry(key.clone()).or_insert_with(|| vec![0; aggregates.len()]),
            };
            for ((sum, agg), cols) in sums.iter_mut().zip(aggregates).zip(&operands) {
                args.clear();
                args.extend(cols.iter().map(|c| c[row]));
                *sum = agg
                    .expr
                    .eval(&args)
                    .and_then(|v| sum.checked_add(v))
                    .ok_or_else(|| ExecError::Overflow { aggregate: agg.name.clone() })?;
            }
        }
    }
    if group_by.is_empty() && groups.is_empty() {
        groups.insert(Vec::new(), vec![0; aggregates.len()]);
    }
    let mut rows: Vec<Vec<Value>> = groups
        .into_iter()
        .map(|(mut k, sums)| {
            k.extend(sums.into_iter().map(Value::I64));
            k
        })
        .collect();
    rows.sort();
    let columns = group_by.iter().map(|c| c.column.clone()).chain(aggregates.iter().map(|a| a.name.clone())).collect();
    Ok(ResultSet { columns, rows })
}
