use std::borrow::Borrow;
use std::fmt;

/// A single value in a predicate or a result tuple.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    U32(u32),
    I64(i64),
    Bytes(Vec<u8>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::U32(v) => write!(f, "{v}"),
            Value::I64(v) => write!(f, "{v}"),
            Value::Bytes(b) => f.write_str(&String::from_utf8_lossy(b)),
        }
    }
}

impl From<u32> for Value {
    fn from(v: u32) -> Value {
        Value::U32(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Value {
        Value::Bytes(v.as_bytes().to_vec())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColumnRef {
    pub table: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(table: &str, column: &str) -> ColumnRef {
        ColumnRef { table: table.into(), column: column.into() }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Predicate {
    Const(bool),
    Cmp {
        column: ColumnRef,
        op: CmpOp,
        value: Value,
    },
    /// Inclusive on both ends.
    Between {
        column: ColumnRef,
        low: Value,
        high: Value,
    },
    InSet {
        column: ColumnRef,
        values: Vec<Value>,
    },
    And(Vec<Predicate>),
}

impl Predicate {
    pub fn cmp(column: ColumnRef, op: CmpOp, value: impl Into<Value>) -> Predicate {
        Predicate::Cmp { column, op, value: value.into() }
    }

    pub fn eq(column: ColumnRef, value: impl Into<Value>) -> Predicate {
        Predicate::cmp(column, CmpOp::Eq, value)
    }

    pub fn between(column: ColumnRef, low: impl Into<Value>, high: impl Into<Value>) -> Predicate {
        Predicate::Between { column, low: low.into(), high: high.into() }
    }

    pub fn in_set<V: Into<Value>>(column: ColumnRef, values: impl IntoIterator<Item = V>) -> Predicate {
        Predicate::InSet { column, values: values.into_iter().map(Into::into).collect() }
    }

    /// Every column the predicate reads.
    pub fn columns(&self) -> Vec<&ColumnRef> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns<'a>(&'a self, out: &mut Vec<&'a ColumnRef>) {
        match self {
            Predicate::Const(_) => {}
            Predicate::Cmp { column, .. } | Predicate::Between { column, .. } | Predicate::InSet { column, .. } => {
                if !out.contains(&column) {
                    out.push(column);
                }
            }
            Predicate::And(ps) => ps.iter().for_each(|p| p.collect_columns(out)),
        }
    }
}

/// A leaf test compiled to the column's physical type.
#[derive(Clone, Debug)]
pub(crate) enum Test<T> {
    Cmp(CmpOp, T),
    Between(T, T),
    In(Vec<T>),
}

impl<T> Test<T> {
    pub(crate) fn matches<Q>(&self, v: &Q) -> bool
    where
        T: Borrow<Q>,
        Q: Ord + ?Sized,
    {
        match self {
            Test::Cmp(op, c) => {
                let c = c.borrow();
                match op {
                    CmpOp::Eq => v == c,
                    CmpOp::Lt => v < c,
                    CmpOp::Le => v <= c,
                    CmpOp::Gt => v > c,
                    CmpOp::Ge => v >= c,
                }
            }
            Test::Between(lo, hi) => lo.borrow() <= v && v <= hi.borrow(),
            Test::In(set) => set.iter().any(|c| c.borrow() == v),
        }
    }
}

/// `SUM` argument forms.
#[derive(Clone, Debug, PartialEq)]
pub enum AggExpr {
    Col(ColumnRef),
    Mul(ColumnRef, ColumnRef),
    Sub(ColumnRef, ColumnRef),
    /// `a * (b - c)`
    MulSub(ColumnRef, ColumnRef, ColumnRef),
}

impl AggExpr {
    pub fn columns(&self) -> Vec<&ColumnRef> {
        match self {
            AggExpr::Col(a) => vec![a],
            AggExpr::Mul(a, b) | AggExpr::Sub(a, b) => vec![a, b],
            AggExpr::MulSub(a, b, c) => vec![a, b, c],
        }
    }

    /// Evaluates over already-read operands in `columns()` order.
    pub(crate) fn eval(&self, args: &[u32]) -> Option<i64> {
        let v = |i: usize| i64::from(args[i]);
        match self {
            AggExpr::Col(_) => Some(v(0)),
            AggExpr::Mul(..) => v(0).checked_mul(v(1)),
            AggExpr::Sub(..) => Some(v(0) - v(1)),
            AggExpr::MulSub(..) => v(0).checked_mul(v(1) - v(2)),
        }
    }
}

/// `SUM(expr) AS name`.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub name: String,
    pub expr: AggExpr,
}

impl Aggregate {
    pub fn sum(name: &str, expr: AggExpr) -> Aggregate {
        Aggregate { name: name.into(), expr }
    }
}
