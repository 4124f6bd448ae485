use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use colcrunch_core::codec::CodecId;
use colcrunch_core::storage::{column_file_name, write_bytes_column, write_column, Catalog, StorageError};
use rand::distr::Alphanumeric;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::schema::*;
use crate::{BenchError, Result};

pub const DEFAULT_PAGE_SIZE: usize = 65536;

#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub scale_factor: f64,
    pub seed: u64,
    pub page_size_bytes: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { scale_factor: 0.1, seed: 42, page_size_bytes: DEFAULT_PAGE_SIZE }
    }
}

enum Data {
    U32(Vec<u32>),
    Bytes(Vec<String>),
}

struct Table {
    name: &'static str,
    columns: Vec<(String, Data)>,
}

impl Table {
    fn new(name: &'static str) -> Table {
        Table { name, columns: Vec::new() }
    }

    fn u32(&mut self, column: &str, values: Vec<u32>) {
        self.columns.push((column.to_string(), Data::U32(values)));
    }

    fn bytes(&mut self, column: &str, values: Vec<String>) {
        self.columns.push((column.to_string(), Data::Bytes(values)));
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn text(rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    let len = rng.random_range(min..=max);
    rng.sample_iter(&Alphanumeric).take(len).map(char::from).collect()
}

fn phone(rng: &mut ChaCha8Rng, nation: usize) -> String {
    format!(
        "{}-{:03}-{:03}-{:04}",
        10 + nation,
        rng.random_range(100..1000),
        rng.random_range(100..1000),
        rng.random_range(1000..10000)
    )
}

pub(crate) fn first_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(1992, 1, 1).expect("valid date")
}

pub(crate) fn date_key(d: NaiveDate) -> u32 {
    d.year() as u32 * 10_000 + d.month() * 100 + d.day()
}

fn date_table() -> Table {
    let days: Vec<NaiveDate> = (0..DATE_ROWS as i64).map(|i| first_date() + Duration::days(i)).collect();
    let num = |f: &dyn Fn(&NaiveDate) -> u32| days.iter().map(f).collect::<Vec<u32>>();
    let txt = |f: &dyn Fn(&NaiveDate) -> String| days.iter().map(f).collect::<Vec<String>>();
    let mut t = Table::new(DATE);
    t.u32("d_datekey", num(&|d| date_key(*d)));
    t.bytes("d_date", txt(&|d| d.format("%B %-d, %Y").to_string()));
    t.bytes("d_dayofweek", txt(&|d| d.format("%A").to_string()));
    t.bytes("d_month", txt(&|d| d.format("%B").to_string()));
    t.u32("d_year", num(&|d| d.year() as u32));
    t.u32("d_yearmonthnum", num(&|d| d.year() as u32 * 100 + d.month()));
    t.bytes("d_yearmonth", txt(&|d| d.format("%b%Y").to_string()));
    t.u32("d_daynuminweek", num(&|d| d.weekday().number_from_sunday()));
    t.u32("d_daynuminmonth", num(&|d| d.day()));
    t.u32("d_daynuminyear", num(&|d| d.ordinal()));
    t.u32("d_monthnuminyear", num(&|d| d.month()));
    t.u32("d_weeknuminyear", num(&|d| (d.ordinal() - 1) / 7 + 1));
    t.bytes(
        "d_sellingseason",
        txt(&|d| {
            match d.month() {
                12 => "Christmas",
                1 | 2 => "Winter",
                3..=5 => "Spring",
                6..=8 => "Summer",
                _ => "Fall",
            }
            .to_string()
        }),
    );
    t.u32("d_lastdayinweekfl", num(&|d| u32::from(d.weekday() == Weekday::Sat)));
    t.u32("d_lastdayinmonthfl", num(&|d| u32::from((*d + Duration::days(1)).day() == 1)));
    t.u32("d_holidayfl", num(&|d| u32::from(matches!((d.month(), d.day()), (1, 1) | (7, 4) | (11, 11) | (12, 25)))));
    t.u32("d_weekdayfl", num(&|d| u32::from(!matches!(d.weekday(), Weekday::Sat | Weekday::Sun))));
    t
}

/// Customer or supplier: key, name, address, city, nation, region, phone.
fn party_table(name: &'static str, key_column: &str, label: &str, rows: usize, rng: &mut ChaCha8Rng) -> Table {
    let mut keys = Vec::with_capacity(rows);
    let mut names = Vec::with_capacity(rows);
    let mut addresses = Vec::with_capacity(rows);
    let mut cities = Vec::with_capacity(rows);
    let mut nations = Vec::with_capacity(rows);
    let mut regions = Vec::with_capacity(rows);
    let mut phones = Vec::with_capacity(rows);
    for i in 0..rows {
        let key = i as u32 + 1;
        let n = rng.random_range(0..NATIONS.len());
        let (nation, region) = NATIONS[n];
        keys.push(key);
        names.push(format!("{label}#{key:09}"));
        addresses.push(text(rng, 10, 25));
        cities.push(city(nation, rng.random_range(0..10)));
        nations.push(nation.to_string());
        regions.push(REGIONS[region].to_string());
        phones.push(phone(rng, n));
    }
    let prefix = &key_column[..1];
    let mut t = Table::new(name);
    t.u32(key_column, keys);
    t.bytes(&format!("{prefix}_name"), names);
    t.bytes(&format!("{prefix}_address"), addresses);
    t.bytes(&format!("{prefix}_city"), cities);
    t.bytes(&format!("{prefix}_nation"), nations);
    t.bytes(&format!("{prefix}_region"), regions);
    t.bytes(&format!("{prefix}_phone"), phones);
    t
}

fn customer_table(rows: usize, rng: &mut ChaCha8Rng) -> Table {
    let mut t = party_table(CUSTOMER, "c_custkey", "Customer", rows, rng);
    let segments = (0..rows).map(|_| MARKET_SEGMENTS[rng.random_range(0..MARKET_SEGMENTS.len())].to_string()).collect();
    t.bytes("c_mktsegment", segments);
    t
}

fn part_table(rows: usize, rng: &mut ChaCha8Rng) -> Table {
    let mut keys = Vec::with_capacity(rows);
    let mut names = Vec::with_capacity(rows);
    let mut mfgrs = Vec::with_capacity(rows);
    let mut categories = Vec::with_capacity(rows);
    let mut brands = Vec::with_capacity(rows);
    let mut colors = Vec::with_capacity(rows);
    let mut types = Vec::with_capacity(rows);
    let mut sizes = Vec::with_capacity(rows);
    let mut containers = Vec::with_capacity(rows);
    let pick = |rng: &mut ChaCha8Rng, xs: &[&str]| xs[rng.random_range(0..xs.len())].to_string();
    for i in 0..rows {
        let m = rng.random_range(1..=5);
        let c = rng.random_range(1..=5);
        let b = rng.random_range(1..=40);
        let color = pick(rng, &COLORS);
        keys.push(i as u32 + 1);
        names.push(format!("{color} {}", pick(rng, &COLORS)));
        mfgrs.push(format!("MFGR#{m}"));
        categories.push(format!("MFGR#{m}{c}"));
        brands.push(format!("MFGR#{m}{c}{b}"));
        colors.push(color);
        types.push(TYPE_SYLLABLES.iter().map(|s| pick(rng, s)).collect::<Vec<_>>().join(" "));
        sizes.push(rng.random_range(1..=50));
        containers.push(CONTAINER_SYLLABLES.iter().map(|s| pick(rng, s)).collect::<Vec<_>>().join(" "));
    }
    let mut t = Table::new(PART);
    t.u32("p_partkey", keys);
    t.bytes("p_name", names);
    t.bytes("p_mfgr", mfgrs);
    t.bytes("p_category", categories);
    t.bytes("p_brand1", brands);
    t.bytes("p_color", colors);
    t.bytes("p_type", types);
    t.u32("p_size", sizes);
    t.bytes("p_container", containers);
    t
}

fn lineorder_table(card: &Cardinalities, rng: &mut ChaCha8Rng) -> Table {
    let n = card.lineorder;
    let mut orderkey = Vec::with_capacity(n);
    let mut linenumber = Vec::with_capacity(n);
    let mut custkey = Vec::with_capacity(n);
    let mut partkey = Vec::with_capacity(n);
    let mut suppkey = Vec::with_capacity(n);
    let mut orderdate = Vec::with_capacity(n);
    let mut orderpriority = Vec::with_capacity(n);
    let mut shippriority = Vec::with_capacity(n);
    let mut quantity = Vec::with_capacity(n);
    let mut extendedprice = Vec::with_capacity(n);
    let mut ordtotalprice = Vec::with_capacity(n);
    let mut discount = Vec::with_capacity(n);
    let mut revenue = Vec::with_capacity(n);
    let mut supplycost = Vec::with_capacity(n);
    let mut tax = Vec::with_capacity(n);
    let mut commitdate = Vec::with_capacity(n);
    let mut shipmode = Vec::with_capacity(n);

    let mut order = 0u32;
    while orderkey.len() < n {
        order += 1;
        let lines = rng.random_range(1..=7).min(n - orderkey.len());
        let cust = rng.random_range(1..=card.customer as u32);
        let day = first_date() + Duration::days(rng.random_range(0..DATE_ROWS as i64));
        let priority = ORDER_PRIORITIES[rng.random_range(0..ORDER_PRIORITIES.len())];
        let first = orderkey.len();
        let mut total = 0u64;
        for line in 1..=lines as u32 {
            let part = rng.random_range(1..=card.part as u32);
            let qty = rng.random_range(1..=50);
            let price = qty * retail_price(part);
            let disc = rng.random_range(0..=10);
            let tx = rng.random_range(0..=8);
            let rev = price * (100 - disc) / 100;
            total += u64::from(rev) * u64::from(100 + tx) / 100;
            orderkey.push(order);
            linenumber.push(line);
            custkey.push(cust);
            partkey.push(part);
            suppkey.push(rng.random_range(1..=card.supplier as u32));
            orderdate.push(date_key(day));
            orderpriority.push(priority.to_string());
            shippriority.push("0".to_string());
            quantity.push(qty);
            extendedprice.push(price);
            discount.push(disc);
            revenue.push(rev);
            supplycost.push(6 * retail_price(part) / 10);
            tax.push(tx);
            commitdate.push(date_key(day + Duration::days(rng.random_range(30..=90))));
            shipmode.push(SHIP_MODES[rng.random_range(0..SHIP_MODES.len())].to_string());
        }
        ordtotalprice.extend(std::iter::repeat_n(total as u32, orderkey.len() - first));
    }

    let mut t = Table::new(LINEORDER);
    t.u32("lo_orderkey", orderkey);
    t.u32("lo_linenumber", linenumber);
    t.u32("lo_custkey", custkey);
    t.u32("lo_partkey", partkey);
    t.u32("lo_suppkey", suppkey);
    t.u32("lo_orderdate", orderdate);
    t.bytes("lo_orderpriority", orderpriority);
    t.bytes("lo_shippriority", shippriority);
    t.u32("lo_quantity", quantity);
    t.u32("lo_extendedprice", extendedprice);
    t.u32("lo_ordtotalprice", ordtotalprice);
    t.u32("lo_discount", discount);
    t.u32("lo_revenue", revenue);
    t.u32("lo_supplycost", supplycost);
    t.u32("lo_tax", tax);
    t.u32("lo_commitdate", commitdate);
    t.bytes("lo_shipmode", shipmode);
    t
}

/// Files in `dir` that a previous generation would have written.
fn dataset_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).map_err(|e| BenchError::io(dir, e))? {
        let p = e.map_err(|e| BenchError::io(dir, e))?.path();
        let ours = p.extension().is_some_and(|x| x == "pcf")
            || p.file_name().is_some_and(|n| n == colcrunch_core::storage::CATALOG_FILE_NAME);
        if ours {
            out.push(p);
        }
    }
    Ok(out)
}

/// Writes every table as raw column files plus `catalog.txt` into `out_dir`.
/// A non-empty `out_dir` is refused unless `force`, which first removes
/// column files and the catalog left there.
pub fn generate_dataset(config: &GenConfig, out_dir: &Path, force: bool) -> Result<Catalog> {
    if !(config.scale_factor > 0.0 && config.scale_factor.is_finite()) {
        return Err(BenchError::Config(format!("scale factor must be positive, got {}", config.scale_factor)));
    }
    if out_dir.exists() {
        let non_empty = fs::read_dir(out_dir).map_err(|e| BenchError::io(out_dir, e))?.next().is_some();
        if non_empty && !force {
            return Err(BenchError::Config(format!("{} is not empty; pass --force to overwrite", out_dir.display())));
        }
        for p in dataset_files(out_dir)? {
            fs::remove_file(&p).map_err(|e| BenchError::io(&p, e))?;
        }
    } else {
        fs::create_dir_all(out_dir).map_err(|e| BenchError::io(out_dir, e))?;
    }

    let card = Cardinalities::for_scale(config.scale_factor);
    let mut catalog = Catalog::new(out_dir);
    let mut write = |table: Table| -> Result<()> {
        for (column, data) in &table.columns {
            let path = out_dir.join(column_file_name(table.name, column, CodecId::Raw));
            let entry = match data {
                Data::U32(v) => write_column(table.name, column, v, CodecId::Raw, config.page_size_bytes, &path)?,
                Data::Bytes(v) => write_bytes_column(table.name, column, v, config.page_size_bytes, &path)?,
            };
            catalog.upsert(entry);
        }
        Ok(())
    };
    write(lineorder_table(&card, &mut rng_for(config.seed, 1)))?;
    write(date_table())?;
    write(customer_table(card.customer, &mut rng_for(config.seed, 2)))?;
    write(party_table(SUPPLIER, "s_suppkey", "Supplier", card.supplier, &mut rng_for(config.seed, 3)))?;
    write(part_table(card.part, &mut rng_for(config.seed, 4)))?;
    let path = catalog.default_path();
    catalog.save(&path)?;
    Ok(catalog)
}

impl From<StorageError> for BenchError {
    fn from(e: StorageError) -> Self {
        BenchError::Storage(e)
    }
}
