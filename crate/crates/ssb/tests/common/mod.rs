//! Brute-force reference for the thirteen queries. Loads whole tables into
//! memory and evaluates each query row by row with plain loops and maps,
//! sharing nothing with the engine except the on-disk reader.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use colcrunch_core::codec::CodecId;
use colcrunch_core::storage::{Catalog, ColumnFile, ValueKind, CATALOG_FILE_NAME};
use colcrunch_ssb::compression::compress_lineorder;
use colcrunch_ssb::{generate_dataset, GenConfig, QueryId};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cell {
    N(i64),
    S(String),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::N(v) => write!(f, "{v}"),
            Cell::S(s) => f.write_str(s),
        }
    }
}

enum Col {
    U(Vec<u32>),
    S(Vec<String>),
}

pub struct Db {
    tables: HashMap<String, HashMap<String, Col>>,
    /// table -> key value -> row, built from each dimension's first column.
    keys: HashMap<String, HashMap<u32, usize>>,
}

impl Db {
    pub fn load(data_dir: &Path) -> Db {
        let catalog = Catalog::load(data_dir.join(CATALOG_FILE_NAME)).unwrap();
        let mut tables: HashMap<String, HashMap<String, Col>> = HashMap::new();
        for e in catalog.entries() {
            let file = ColumnFile::open(catalog.resolve(e)).unwrap();
            let col = match e.kind {
                ValueKind::U32 => Col::U(file.read_all_u32().unwrap()),
                _ => {
                    Col::S(file.read_all_bytes().unwrap().into_iter().map(|b| String::from_utf8(b).unwrap()).collect())
                }
            };
            tables.entry(e.table.clone()).or_default().insert(e.column.clone(), col);
        }
        let mut keys = HashMap::new();
        for (table, key) in
            [("date", "d_datekey"), ("customer", "c_custkey"), ("supplier", "s_suppkey"), ("part", "p_partkey")]
        {
            if let Some(Col::U(v)) = tables.get(table).and_then(|t| t.get(key)) {
                keys.insert(table.to_string(), v.iter().enumerate().map(|(i, k)| (*k, i)).collect());
            }
        }
        Db { tables, keys }
    }

    pub fn u(&self, table: &str, column: &str) -> &[u32] {
        match &self.tables[table][column] {
            Col::U(v) => v,
            Col::S(_) => panic!("{table}.{column} is not numeric"),
        }
    }

    pub fn s(&self, table: &str, column: &str) -> &[String] {
        match &self.tables[table][column] {
            Col::S(v) => v,
            Col::U(_) => panic!("{table}.{column} is not text"),
        }
    }

    pub fn rows(&self, table: &str) -> usize {
        self.tables[table].values().next().map_or(0, |c| match c {
            Col::U(v) => v.len(),
            Col::S(v) => v.len(),
        })
    }

    fn row_of(&self, table: &str, key: u32) -> Option<usize> {
        self.keys[table].get(&key).copied()
    }
}

/// A lineorder row joined to every dimension it references.
struct Joined<'a> {
    db: &'a Db,
    lo: usize,
    d: Option<usize>,
    c: Option<usize>,
    s: Option<usize>,
    p: Option<usize>,
}

impl Joined<'_> {
    fn lo(&self, col: &str) -> u32 {
        self.db.u("lineorder", col)[self.lo]
    }
    fn dn(&self, col: &str) -> u32 {
        self.db.u("date", col)[self.d.unwrap()]
    }
    fn ds(&self, col: &str) -> &str {
        &self.db.s("date", col)[self.d.unwrap()]
    }
    fn cs(&self, col: &str) -> &str {
        &self.db.s("customer", col)[self.c.unwrap()]
    }
    fn ss(&self, col: &str) -> &str {
        &self.db.s("supplier", col)[self.s.unwrap()]
    }
    fn ps(&self, col: &str) -> &str {
        &self.db.s("part", col)[self.p.unwrap()]
    }
}

fn n(v: u32) -> Cell {
    Cell::N(i64::from(v))
}

fn s(v: &str) -> Cell {
    Cell::S(v.to_string())
}

/// For each query: group key and measure if the row qualifies.
fn evaluate(q: QueryId, j: &Joined) -> Option<(Vec<Cell>, i64)> {
    let uk = |c: &str| c == "UNITED KI1" || c == "UNITED KI5";
    let flight1 = |ok: bool| ok.then(|| (vec![], i64::from(j.lo("lo_extendedprice")) * i64::from(j.lo("lo_discount"))));
    let revenue = || i64::from(j.lo("lo_revenue"));
    j.d?;
    match q {
        QueryId::Q1_1 => {
            flight1(j.dn("d_year") == 1993 && (1..=3).contains(&j.lo("lo_discount")) && j.lo("lo_quantity") < 25)
        }
        QueryId::Q1_2 => flight1(
            j.dn("d_yearmonthnum") == 199401
                && (4..=6).contains(&j.lo("lo_discount"))
                && (26..=35).contains(&j.lo("lo_quantity")),
        ),
        QueryId::Q1_3 => flight1(
            j.dn("d_weeknuminyear") == 6
                && j.dn("d_year") == 1994
                && (5..=7).contains(&j.lo("lo_discount"))
                && (26..=35).contains(&j.lo("lo_quantity")),
        ),
        QueryId::Q2_1 | QueryId::Q2_2 | QueryId::Q2_3 => {
            j.p?;
            j.s?;
            let brand = j.ps("p_brand1");
            let ok = match q {
                QueryId::Q2_1 => j.ps("p_category") == "MFGR#12" && j.ss("s_region") == "AMERICA",
                QueryId::Q2_2 => ("MFGR#2221"..="MFGR#2228").contains(&brand) && j.ss("s_region") == "ASIA",
                _ => brand == "MFGR#2239" && j.ss("s_region") == "EUROPE",
            };
            ok.then(|| (vec![n(j.dn("d_year")), s(brand)], revenue()))
        }
        QueryId::Q3_1 | QueryId::Q3_2 | QueryId::Q3_3 | QueryId::Q3_4 => {
            j.c?;
            j.s?;
            let year = j.dn("d_year");
            let in_years = (1992..=1997).contains(&year);
            let (ok, group) = match q {
                QueryId::Q3_1 => {
                    (j.cs("c_region") == "ASIA" && j.ss("s_region") == "ASIA" && in_years, ("c_nation", "s_nation"))
                }
                QueryId::Q3_2 => (
                    j.cs("c_nation") == "UNITED STATES" && j.ss("s_nation") == "UNITED STATES" && in_years,
                    ("c_city", "s_city"),
                ),
                QueryId::Q3_3 => (uk(j.cs("c_city")) && uk(j.ss("s_city")) && in_years, ("c_city", "s_city")),
                _ => {
                    (uk(j.cs("c_city")) && uk(j.ss("s_city")) && j.ds("d_yearmonth") == "Dec1997", ("c_city", "s_city"))
                }
            };
            ok.then(|| (vec![s(j.cs(group.0)), s(j.ss(group.1)), n(year)], revenue()))
        }
        QueryId::Q4_1 | QueryId::Q4_2 | QueryId::Q4_3 => {
            j.c?;
            j.s?;
            j.p?;
            let year = j.dn("d_year");
            let profit = revenue() - i64::from(j.lo("lo_supplycost"));
            let mfgr12 = matches!(j.ps("p_mfgr"), "MFGR#1" | "MFGR#2");
            let america = j.cs("c_region") == "AMERICA";
            match q {
                QueryId::Q4_1 => (america && j.ss("s_region") == "AMERICA" && mfgr12)
                    .then(|| (vec![n(year), s(j.cs("c_nation"))], profit)),
                QueryId::Q4_2 => (america && j.ss("s_region") == "AMERICA" && mfgr12 && (year == 1997 || year == 1998))
                    .then(|| (vec![n(year), s(j.ss("s_nation")), s(j.ps("p_category"))], profit)),
                _ => (america
                    && j.ss("s_nation") == "UNITED STATES"
                    && j.ps("p_category") == "MFGR#14"
                    && (year == 1997 || year == 1998))
                    .then(|| (vec![n(year), s(j.ss("s_city")), s(j.ps("p_brand1"))], profit)),
            }
        }
    }
}

fn header(q: QueryId) -> &'static [&'static str] {
    match q {
        QueryId::Q1_1 | QueryId::Q1_2 | QueryId::Q1_3 => &["revenue"],
        QueryId::Q2_1 | QueryId::Q2_2 | QueryId::Q2_3 => &["d_year", "p_brand1", "revenue"],
        QueryId::Q3_1 => &["c_nation", "s_nation", "d_year", "revenue"],
        QueryId::Q3_2 | QueryId::Q3_3 | QueryId::Q3_4 => &["c_city", "s_city", "d_year", "revenue"],
        QueryId::Q4_1 => &["d_year", "c_nation", "profit"],
        QueryId::Q4_2 => &["d_year", "s_nation", "p_category", "profit"],
        QueryId::Q4_3 => &["d_year", "s_city", "p_brand1", "profit"],
    }
}

/// Reference result of `q`, formatted as the engine's TSV.
pub fn oracle_tsv(db: &Db, q: QueryId) -> String {
    let mut groups: BTreeMap<Vec<Cell>, i64> = BTreeMap::new();
    let lo = db.u("lineorder", "lo_orderdate");
    let has = |t: &str| db.keys.contains_key(t);
    for (i, &date) in lo.iter().enumerate() {
        let j = Joined {
            db,
            lo: i,
            d: db.row_of("date", date),
            c: if has("customer") { db.row_of("customer", db.u("lineorder", "lo_custkey")[i]) } else { None },
            s: if has("supplier") { db.row_of("supplier", db.u("lineorder", "lo_suppkey")[i]) } else { None },
            p: if has("part") { db.row_of("part", db.u("lineorder", "lo_partkey")[i]) } else { None },
        };
        if let Some((key, m)) = evaluate(q, &j) {
            *groups.entry(key).or_default() += m;
        }
    }
    let mut rows: Vec<Vec<Cell>> = groups
        .into_iter()
        .map(|(mut k, v)| {
            k.push(Cell::N(v));
            k
        })
        .collect();
    if matches!(q, QueryId::Q1_1 | QueryId::Q1_2 | QueryId::Q1_3) && rows.is_empty() {
        rows.push(vec![Cell::N(0)]);
    }
    match q {
        QueryId::Q3_1 | QueryId::Q3_2 | QueryId::Q3_3 | QueryId::Q3_4 => {
            rows.sort_by(|a, b| a[2].cmp(&b[2]).then(b[3].cmp(&a[3])).then(a.cmp(b)))
        }
        _ => rows.sort(),
    }
    let mut out = header(q).join("\t");
    out.push('\n');
    for r in rows {
        out.push_str(&r.iter().map(Cell::to_string).collect::<Vec<_>>().join("\t"));
        out.push('\n');
    }
    out
}

/// Generates a dataset and optionally compresses LINEORDER.
pub fn dataset(dir: &Path, sf: f64, codec: CodecId) {
    generate_dataset(&GenConfig { scale_factor: sf, ..GenConfig::default() }, dir, true).unwrap();
    if codec != CodecId::Raw {
        compress_lineorder(dir, codec).unwrap();
    }
}

/// Copies a generated dataset so each codec gets its own directory.
pub fn copy_dataset(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let p = e.unwrap().path();
        std::fs::copy(&p, to.join(p.file_name().unwrap())).unwrap();
    }
}
