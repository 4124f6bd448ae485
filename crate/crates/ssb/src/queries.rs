use std::fmt;
use std::str::FromStr;

use colcrunch_core::exec::{AggExpr, Aggregate, CmpOp, ColumnRef, PlanNode, Predicate, SortKey};

use crate::schema::{CUSTOMER, DATE, LINEORDER, PART, SUPPLIER};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueryId {
    Q1_1,
    Q1_2,
    Q1_3,
    Q2_1,
    Q2_2,
    Q2_3,
    Q3_1,
    Q3_2,
    Q3_3,
    Q3_4,
    Q4_1,
    Q4_2,
    Q4_3,
}

impl QueryId {
    pub const ALL: [QueryId; 13] = [
        QueryId::Q1_1,
        QueryId::Q1_2,
        QueryId::Q1_3,
        QueryId::Q2_1,
        QueryId::Q2_2,
        QueryId::Q2_3,
        QueryId::Q3_1,
        QueryId::Q3_2,
        QueryId::Q3_3,
        QueryId::Q3_4,
        QueryId::Q4_1,
        QueryId::Q4_2,
        QueryId::Q4_3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QueryId::Q1_1 => "Q1.1",
            QueryId::Q1_2 => "Q1.2",
            QueryId::Q1_3 => "Q1.3",
            QueryId::Q2_1 => "Q2.1",
            QueryId::Q2_2 => "Q2.2",
            QueryId::Q2_3 => "Q2.3",
            QueryId::Q3_1 => "Q3.1",
            QueryId::Q3_2 => "Q3.2",
            QueryId::Q3_3 => "Q3.3",
            QueryId::Q3_4 => "Q3.4",
            QueryId::Q4_1 => "Q4.1",
            QueryId::Q4_2 => "Q4.2",
            QueryId::Q4_3 => "Q4.3",
        }
    }
}

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown query {0:?}; expected one of Q1.1..Q1.3, Q2.1..Q2.3, Q3.1..Q3.4, Q4.1..Q4.3")]
pub struct UnknownQuery(pub String);

impl FromStr for QueryId {
    type Err = UnknownQuery;

    fn from_str(s: &str) -> Result<QueryId, UnknownQuery> {
        QueryId::ALL.into_iter().find(|q| q.name().eq_ignore_ascii_case(s)).ok_or_else(|| UnknownQuery(s.into()))
    }
}

fn lo(column: &str) -> ColumnRef {
    ColumnRef::new(LINEORDER, column)
}

fn d(column: &str) -> ColumnRef {
    ColumnRef::new(DATE, column)
}

fn cu(column: &str) -> ColumnRef {
    ColumnRef::new(CUSTOMER, column)
}

fn su(column: &str) -> ColumnRef {
    ColumnRef::new(SUPPLIER, column)
}

fn pa(column: &str) -> ColumnRef {
    ColumnRef::new(PART, column)
}

fn dim(table: &str, predicate: Predicate) -> PlanNode {
    PlanNode::scan(table, &[]).filter(predicate)
}

fn join_date(input: PlanNode, date: Predicate) -> PlanNode {
    input.join(dim(DATE, date), lo("lo_orderdate"), d("d_datekey"))
}

fn join_part(input: PlanNode, part: Predicate) -> PlanNode {
    input.join(dim(PART, part), lo("lo_partkey"), pa("p_partkey"))
}

fn join_supplier(input: PlanNode, supplier: Predicate) -> PlanNode {
    input.join(dim(SUPPLIER, supplier), lo("lo_suppkey"), su("s_suppkey"))
}

fn join_customer(input: PlanNode, customer: Predicate) -> PlanNode {
    input.join(dim(CUSTOMER, customer), lo("lo_custkey"), cu("c_custkey"))
}

/// Flight 1: revenue from discounted lineitems in a date window.
fn flight1(date: Predicate, discount: (u32, u32), quantity: Predicate) -> PlanNode {
    let fact = PlanNode::scan(LINEORDER, &["lo_orderdate", "lo_discount", "lo_quantity", "lo_extendedprice"])
        .filter(Predicate::And(vec![Predicate::between(lo("lo_discount"), discount.0, discount.1), quantity]));
    join_date(fact, date)
        .aggregate(vec![], vec![Aggregate::sum("revenue", AggExpr::Mul(lo("lo_extendedprice"), lo("lo_discount")))])
}

/// Flight 2: revenue by year and brand for a part selection and supplier region.
fn flight2(part: Predicate, region: &str) -> PlanNode {
    let fact = PlanNode::scan(LINEORDER, &["lo_partkey", "lo_suppkey", "lo_orderdate", "lo_revenue"]);
    join_date(join_supplier(join_part(fact, part), Predicate::eq(su("s_region"), region)), Predicate::Const(true))
        .aggregate(vec![d("d_year"), pa("p_brand1")], vec![Aggregate::sum("revenue", AggExpr::Col(lo("lo_revenue")))])
        .sort(vec![SortKey::asc("d_year"), SortKey::asc("p_brand1")], None)
}

/// Flight 3: revenue by customer and supplier location and year.
fn flight3(customer: Predicate, supplier: Predicate, date: Predicate, group: (&str, &str)) -> PlanNode {
    let fact = PlanNode::scan(LINEORDER, &["lo_custkey", "lo_suppkey", "lo_orderdate", "lo_revenue"]);
    join_date(join_supplier(join_customer(fact, customer), supplier), date)
        .aggregate(
            vec![cu(group.0), su(group.1), d("d_year")],
            vec![Aggregate::sum("revenue", AggExpr::Col(lo("lo_revenue")))],
        )
        .sort(vec![SortKey::asc("d_year"), SortKey::desc("revenue")], None)
}

/// Flight 4: profit drill-down over all four dimensions.
fn flight4(
    customer: Predicate,
    supplier: Predicate,
    part: Predicate,
    date: Predicate,
    group: Vec<ColumnRef>,
) -> PlanNode {
    let fact = PlanNode::scan(
        LINEORDER,
        &["lo_custkey", "lo_suppkey", "lo_partkey", "lo_orderdate", "lo_revenue", "lo_supplycost"],
    );
    let keys = group.iter().map(|c| SortKey::asc(&c.column)).collect();
    join_date(join_part(join_supplier(join_customer(fact, customer), supplier), part), date)
        .aggregate(group, vec![Aggregate::sum("profit", AggExpr::Sub(lo("lo_revenue"), lo("lo_supplycost")))])
        .sort(keys, None)
}

const UK_CITIES: [&str; 2] = ["UNITED KI1", "UNITED KI5"];

/// The plan for one of the thirteen star-schema queries.
pub fn build_query(id: QueryId) -> PlanNode {
    let year_range = || Predicate::between(d("d_year"), 1992u32, 1997u32);
    let mfgr12 = || Predicate::in_set(pa("p_mfgr"), ["MFGR#1", "MFGR#2"]);
    match id {
        QueryId::Q1_1 => {
            flight1(Predicate::eq(d("d_year"), 1993u32), (1, 3), Predicate::cmp(lo("lo_quantity"), CmpOp::Lt, 25u32))
        }
        QueryId::Q1_2 => flight1(
            Predicate::eq(d("d_yearmonthnum"), 199401u32),
            (4, 6),
            Predicate::between(lo("lo_quantity"), 26u32, 35u32),
        ),
        QueryId::Q1_3 => flight1(
            Predicate::And(vec![Predicate::eq(d("d_weeknuminyear"), 6u32), Predicate::eq(d("d_year"), 1994u32)]),
            (5, 7),
            Predicate::between(lo("lo_quantity"), 26u32, 35u32),
        ),
        QueryId::Q2_1 => flight2(Predicate::eq(pa("p_category"), "MFGR#12"), "AMERICA"),
        QueryId::Q2_2 => flight2(Predicate::between(pa("p_brand1"), "MFGR#2221", "MFGR#2228"), "ASIA"),
        QueryId::Q2_3 => flight2(Predicate::eq(pa("p_brand1"), "MFGR#2239"), "EUROPE"),
        QueryId::Q3_1 => flight3(
            Predicate::eq(cu("c_region"), "ASIA"),
            Predicate::eq(su("s_region"), "ASIA"),
            year_range(),
            ("c_nation", "s_nation"),
        ),
        QueryId::Q3_2 => flight3(
            Predicate::eq(cu("c_nation"), "UNITED STATES"),
            Predicate::eq(su("s_nation"), "UNITED STATES"),
            year_range(),
            ("c_city", "s_city"),
        ),
        QueryId::Q3_3 => flight3(
            Predicate::in_set(cu("c_city"), UK_CITIES),
            Predicate::in_set(su("s_city"), UK_CITIES),
            year_range(),
            ("c_city", "s_city"),
        ),
        QueryId::Q3_4 => flight3(
            Predicate::in_set(cu("c_city"), UK_CITIES),
            Predicate::in_set(su("s_city"), UK_CITIES),
            Predicate::eq(d("d_yearmonth"), "Dec1997"),
            ("c_city", "s_city"),
        ),
        QueryId::Q4_1 => flight4(
            Predicate::eq(cu("c_region"), "AMERICA"),
            Predicate::eq(su("s_region"), "AMERICA"),
            mfgr12(),
            Predicate::Const(true),
            vec![d("d_year"), cu("c_nation")],
        ),
        QueryId::Q4_2 => flight4(
            Predicate::eq(cu("c_region"), "AMERICA"),
            Predicate::eq(su("s_region"), "AMERICA"),
            mfgr12(),
            Predicate::in_set(d("d_year"), [1997u32, 1998]),
            vec![d("d_year"), su("s_nation"), pa("p_category")],
        ),
        QueryId::Q4_3 => flight4(
            Predicate::eq(cu("c_region"), "AMERICA"),
            Predicate::eq(su("s_nation"), "UNITED STATES"),
            Predicate::eq(pa("p_category"), "MFGR#14"),
            Predicate::in_set(d("d_year"), [1997u32, 1998]),
            vec![d("d_year"), su("s_city"), pa("p_brand1")],
        ),
    }
}
