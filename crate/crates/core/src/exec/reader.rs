use crate::buffer::PinnedBlock;
use crate::storage::{ColumnId, PageData, PageRef, ValueKind};

use super::{ColumnRef, ExecContext, ExecError, JoinIndexBlock, Result, Value};

/// How a reader walks a position list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AccessMethod {
    /// Dense ascending run.
    Range,
    /// Strictly ascending with gaps.
    Sorted,
    /// Arbitrary order: sorted for reading, then restored.
    Jive,
}

/// Picks the cheapest method valid for `positions`.
pub fn select_access_method(positions: &[u32]) -> AccessMethod {
    let mut dense = true;
    for w in positions.windows(2) {
        if w[1] <= w[0] {
            return AccessMethod::Jive;
        }
        dense &= w[1] == w[0] + 1;
    }
    if dense {
        AccessMethod::Range
    } else {
        AccessMethod::Sorted
    }
}

fn admits(forced: AccessMethod, natural: AccessMethod) -> bool {
    match forced {
        AccessMethod::Jive => true,
        AccessMethod::Sorted => natural != AccessMethod::Jive,
        AccessMethod::Range => natural == AccessMethod::Range,
    }
}

/// Values of one column at a list of positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ColumnValues {
    U32(Vec<u32>),
    Bytes(Vec<Vec<u8>>),
}

impl ColumnValues {
    fn with_capacity(kind: ValueKind, n: usize) -> ColumnValues {
        match kind {
            ValueKind::U32 => ColumnValues::U32(Vec::with_capacity(n)),
            ValueKind::Bytes => ColumnValues::Bytes(Vec::with_capacity(n)),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ColumnValues::U32(v) => v.len(),
            ColumnValues::Bytes(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, i: usize) -> Value {
        match self {
            ColumnValues::U32(v) => Value::U32(v[i]),
            ColumnValues::Bytes(v) => Value::Bytes(v[i].clone()),
        }
    }

    pub fn as_u32(&self) -> Option<&[u32]> {
        match self {
            ColumnValues::U32(v) => Some(v),
            ColumnValues::Bytes(_) => None,
        }
    }

    fn extend_from(&mut self, data: &PageData, range: std::ops::Range<usize>) -> bool {
        match (self, data) {
            (ColumnValues::U32(out), PageData::U32(v)) => match v.get(range) {
                Some(s) => {
                    out.extend_from_slice(s);
                    true
                }
                None => false,
            },
            (ColumnValues::Bytes(out), PageData::Bytes(p)) => {
                if range.end > p.len() {
                    return false;
                }
                out.extend(range.map(|i| p.get(i).to_vec()));
                true
            }
            _ => false,
        }
    }

    fn permute_back(self, order: &[usize]) -> ColumnValues {
        match self {
            ColumnValues::U32(sorted) => {
                let mut out = vec![0; sorted.len()];
                for (v, &i) in sorted.into_iter().zip(order) {
                    out[i] = v;
                }
                ColumnValues::U32(out)
            }
            ColumnValues::Bytes(sorted) => {
                let mut out = vec![Vec::new(); sorted.len()];
                for (v, &i) in sorted.into_iter().zip(order) {
                    out[i] = v;
                }
                ColumnValues::Bytes(out)
            }
        }
    }
}

/// What a reader produces values for.
#[derive(Clone, Debug, PartialEq)]
pub enum ReaderSpec {
    Column(ColumnRef),
    /// Several columns read for the same rows, aligned.
    Sync(Vec<ColumnRef>),
}

/// Reads `reader`'s columns for every row of `block`; one entry per column.
pub fn read_values(ctx: &ExecContext<'_>, reader: &ReaderSpec, block: &JoinIndexBlock) -> Result<Vec<ColumnValues>> {
    let columns = match reader {
        ReaderSpec::Column(c) => std::slice::from_ref(c),
        ReaderSpec::Sync(cs) => cs.as_slice(),
    };
    columns.iter().map(|c| read_block_column(ctx, c, block)).collect()
}

pub(crate) fn read_block_column(
    ctx: &ExecContext<'_>,
    column: &ColumnRef,
    block: &JoinIndexBlock,
) -> Result<ColumnValues> {
    let t = block.table_index(&column.table).ok_or_else(|| ExecError::TableNotInBlock { column: column.clone() })?;
    let id = ctx.store().column_id(&column.table, &column.column)?;
    read_column(ctx, id, block.positions(t), None)
}

/// Reads `column` at `positions`, in the order given. `forced` overrides the
/// access method and must be valid for the positions.
pub fn read_column(
    ctx: &ExecContext<'_>,
    column: ColumnId,
    positions: &[u32],
    forced: Option<AccessMethod>,
) -> Result<ColumnValues> {
    let entry = ctx.store().entry(column);
    if positions.is_empty() {
        return Ok(ColumnValues::with_capacity(entry.kind, 0));
    }
    let natural = select_access_method(positions);
    let method = match forced {
        Some(m) if !admits(m, natural) => {
            return Err(ExecError::AccessMethodMismatch { requested: m, actual: natural })
        }
        Some(m) => m,
        None => natural,
    };
    match method {
        AccessMethod::Range | AccessMethod::Sorted => read_ascending(ctx, column, positions),
        AccessMethod::Jive => {
            let mut order: Vec<usize> = (0..positions.len()).collect();
            order.sort_by_key(|&i| positions[i]);
            let sorted: Vec<u32> = order.iter().map(|&i| positions[i]).collect();
            Ok(read_ascending(ctx, column, &sorted)?.permute_back(&order))
        }
    }
}

/// Reads non-decreasing positions, pinning each needed page once, in order.
fn read_ascending(ctx: &ExecContext<'_>, column: ColumnId, positions: &[u32]) -> Result<ColumnValues> {
    let entry = ctx.store().entry(column);
    let vpp = entry.values_per_page;
    let last = *positions.last().expect("non-empty");
    if u64::from(last) >= entry.total_values {
        return Err(ExecError::PositionOutOfRange {
            table: entry.table.clone(),
            position: last,
            rows: entry.total_values,
        });
    }
    let window = ctx.buffer.config().prefetch_window;
    let mut pages: Vec<u32> = Vec::new();
    if window > 0 {
        pages = positions.iter().map(|p| p / vpp).collect();
        pages.dedup();
    }
    let mut prefetched = 0;
    let mut out = ColumnValues::with_capacity(entry.kind, positions.len());

    let mut i = 0;
    let mut page_no = 0;
    while i < positions.len() {
        let page = positions[i] / vpp;
        if window > 0 {
            let upto = (page_no + 1 + window).min(pages.len());
            if prefetched < upto {
                let from = prefetched.max(page_no + 1);
                let ahead = pages[from..upto].iter().map(|&p| PageRef { column, page: p });
                ctx.buffer.prefetch(ahead, ctx.account.as_ref());
                prefetched = upto;
            }
        }
        let pinned = ctx.fetch(PageRef { column, page })?;
        let base = page * vpp;
        // Positions on this page form a contiguous slice of the input.
        let end = i + positions[i..].partition_point(|&p| p / vpp == page);
        // Duplicates can make count equal span without the run being contiguous.
        if positions[i..end].windows(2).all(|w| w[1] == w[0] + 1) {
            let from = (positions[i] - base) as usize;
            let to = (positions[end - 1] - base) as usize + 1;
            check(out.extend_from(&pinned.data, from..to), &pinned, positions[i])?;
        } else {
            for &p in &positions[i..end] {
                let off = (p - base) as usize;
                check(out.extend_from(&pinned.data, off..off + 1), &pinned, p)?;
            }
        }
        drop(pinned);
        i = end;
        page_no += 1;
    }
    Ok(out)
}

fn check(ok: bool, block: &PinnedBlock, position: u32) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(ExecError::CorruptPage { page: block.page(), position })
    }
}
